use uav_tpc::{
    check_feasibility, max_sampling_interval, run_scheme, ChannelParams, Horizon, KinematicLimits, Point, Scenario,
    Scheme, SchemeConfig,
};

/// Two links whose terminals are a short flight away, over a 240-slot mission.
fn small() -> Scenario {
    let limits = KinematicLimits::default();
    let ts = max_sampling_interval(&limits).unwrap();
    Scenario::new(
        vec![Point::new(-120.0, 60.0, 0.0), Point::new(140.0, -40.0, 0.0)],
        vec![Point::new(-10.5, 0.0, 100.0), Point::new(10.5, 0.0, 100.0)],
        1.0,
        ChannelParams::from_db(-50.0, 10e6, -160.0).unwrap(),
        limits,
        Horizon::new(240.0 * ts, ts).unwrap(),
    )
    .unwrap()
}

#[test]
fn scheme_names_round_trip() {
    for s in Scheme::ALL {
        assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        assert_eq!(s.to_string().to_uppercase().parse::<Scheme>().unwrap(), s);
    }
    assert!("ofdma".parse::<Scheme>().is_err());
}

#[test]
fn every_scheme_returns_a_feasible_round_trip() {
    let scen = small();
    let cfg = SchemeConfig::default();
    let mut rates = Vec::new();
    for s in Scheme::ALL {
        let out = run_scheme(&scen, s, &cfg).unwrap_or_else(|e| panic!("{s}: {e}"));
        let full = &out.run.full;
        assert_eq!(full.num_slots(), scen.horizon.slots, "{s}");
        let rep = check_feasibility(full, &scen, 1e-6).unwrap();
        assert!(rep.is_feasible(), "{s}: {rep:?}");
        let m = out.run.hover_slot();
        assert!(m >= 1 && 2 * m <= scen.horizon.slots);
        assert_eq!(out.allocation.is_some(), matches!(s, Scheme::Fdma | Scheme::Tdma));
        rates.push((s, full.sum_rate()));
    }
    let get = |s| rates.iter().find(|r| r.0 == s).unwrap().1;
    assert!(get(Scheme::Fdma) >= get(Scheme::Tdma));
    assert!((get(Scheme::Sca) - get(Scheme::Parallel)).abs() <= 0.02 * get(Scheme::Sca));
}
