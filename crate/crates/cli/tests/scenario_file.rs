use proptest::prelude::*;
use uav_tpc::{ChannelParams, Horizon, KinematicLimits, Point, Scenario};
use uav_tpc_cli::scenario_file::{ChannelSection, HorizonSection, LimitsSection, PositionsSection, PowerSection};
use uav_tpc_cli::{generate_scenario_file, CliError, GenerateConfig, Level, ScenarioFile, Unit};

const EXAMPLE: &str = r#"
version = 1
seed = 42

[horizon]
total_time = 600.0

[power]
p_max = "30 dBm"

[channel]
bandwidth = 1e7
beta0 = "-50 dB"
noise_psd = "-160 dBm/Hz"

[limits]
v_level = 20.0
v_ascend = 5.0
v_descend = 3.0
h_min = 100.0
h_max = 500.0
d_min = 20.0

[positions]
ground_terminals = [[300.0, 0.0, 0.0], [-200.0, 100.0, 0.0]]
uav_initial = [[0.0, 0.0, 100.0], [20.2, 0.0, 100.0]]
"#;

#[test]
fn example_document_parses_to_reference_defaults() {
    let file = ScenarioFile::parse(EXAMPLE).unwrap();
    assert_eq!(file.seed, 42);
    assert_eq!(file.power.p_max, Level::new(30.0, Unit::Dbm));
    let scen = file.to_scenario().unwrap();
    assert!((scen.p_max - 1.0).abs() < 1e-12);
    let reference = ChannelParams::default();
    assert!((scen.channel.beta0 - reference.beta0).abs() < 1e-18);
    assert!((scen.channel.noise_psd / reference.noise_psd - 1.0).abs() < 1e-12);
    assert_eq!(scen.limits, KinematicLimits::default());
    assert_eq!(scen.horizon.slots, 1224);
    assert_eq!(scen.gt_positions[1], Point::new(-200.0, 100.0, 0.0));
    assert!(scen.uav_final.is_none());
}

#[test]
fn levels_parse_with_and_without_units() {
    assert_eq!("30 dBm".parse::<Level>().unwrap(), Level::new(30.0, Unit::Dbm));
    assert_eq!(
        " -160  dBm/Hz ".parse::<Level>().unwrap(),
        Level::new(-160.0, Unit::DbmPerHz)
    );
    assert_eq!("1e-5".parse::<Level>().unwrap(), Level::new(1e-5, Unit::Linear));
    assert_eq!("0.5 W".parse::<Level>().unwrap().watts().unwrap(), 0.5);
    assert!((("20 dBm".parse::<Level>().unwrap()).watts().unwrap() - 0.1).abs() < 1e-15);
    assert!("3 furlongs".parse::<Level>().is_err());
    assert!("abc dB".parse::<Level>().is_err());
    assert!("inf dB".parse::<Level>().is_err());
}

#[test]
fn unit_mismatch_is_a_parse_error() {
    let text = EXAMPLE.replace("\"30 dBm\"", "\"30 dB\"");
    let err = ScenarioFile::parse(&text).unwrap().to_scenario().unwrap_err();
    assert!(matches!(err, CliError::Parse(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn malformed_documents_are_rejected() {
    assert!(matches!(ScenarioFile::parse("version = 1\n"), Err(CliError::Parse(_))));
    let wrong_version = EXAMPLE.replace("version = 1", "version = 9");
    assert!(matches!(ScenarioFile::parse(&wrong_version), Err(CliError::Parse(_))));
    let unknown_key = EXAMPLE.replace("[power]", "[power]\ncolor = 3");
    assert!(ScenarioFile::parse(&unknown_key).is_err());
}

#[test]
fn invalid_scenarios_map_to_exit_code_two() {
    let text = EXAMPLE.replace("[20.2, 0.0, 100.0]", "[5.0, 0.0, 100.0]");
    let err = ScenarioFile::parse(&text).unwrap().to_scenario().unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn optional_fields_survive_a_round_trip() {
    let mut file = ScenarioFile::parse(EXAMPLE).unwrap();
    file.horizon.slots = Some(1300);
    file.horizon.reduced = Some(80);
    file.positions.uav_final = Some(vec![[10.0, 10.0, 120.0], [40.0, 10.0, 120.0]]);
    let text = file.to_text().unwrap();
    assert_eq!(ScenarioFile::parse(&text).unwrap(), file);
    let scen = file.to_scenario().unwrap();
    assert_eq!(scen.horizon.slots, 1300);
    assert_eq!(scen.horizon.reduced, Some(80));
    assert_eq!(scen.final_positions()[1], Point::new(40.0, 10.0, 120.0));
}

#[test]
fn scenario_to_file_and_back_is_exact() {
    let limits = KinematicLimits::default();
    let scen = Scenario::new(
        vec![Point::new(123.456789, -0.1, 0.0), Point::new(-1.0 / 3.0, 400.0, 0.0)],
        vec![
            Point::new(0.0, 0.0, 100.0),
            Point::new(std::f64::consts::PI * 10.0, 0.0, 100.0),
        ],
        0.7,
        ChannelParams::default(),
        limits,
        Horizon::fit(300.0, &limits).unwrap(),
    )
    .unwrap();
    let file = ScenarioFile::from_scenario(&scen, 5);
    let back = ScenarioFile::parse(&file.to_text().unwrap())
        .unwrap()
        .to_scenario()
        .unwrap();
    assert_eq!(back, scen);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        (-300.0..300.0f64).prop_map(|e: f64| 10f64.powf(e / 10.0)),
        Just(0.0),
        Just(-0.0)
    ]
}

fn level() -> impl Strategy<Value = Level> {
    let unit = prop_oneof![
        Just(Unit::Linear),
        Just(Unit::Db),
        Just(Unit::Dbm),
        Just(Unit::Watt),
        Just(Unit::DbmPerHz),
        Just(Unit::WattPerHz)
    ];
    (finite(), unit).prop_map(|(v, u)| Level::new(v, u))
}

fn triples(max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([finite(), finite(), finite()], 0..max)
}

prop_compose! {
    fn any_file()(
        seed in any::<u64>(),
        total_time in finite(),
        slots in prop::option::of(1usize..100_000),
        reduced in prop::option::of(1usize..1000),
        p_max in level(),
        bandwidth in finite(),
        beta0 in level(),
        noise_psd in level(),
        lim in [finite(), finite(), finite(), finite(), finite(), finite()],
        gts in triples(8),
        starts in triples(8),
        finals in prop::option::of(triples(8)),
    ) -> ScenarioFile {
        ScenarioFile {
            version: 1,
            seed,
            horizon: HorizonSection { total_time, slots, reduced },
            power: PowerSection { p_max },
            channel: ChannelSection { bandwidth, beta0, noise_psd },
            limits: LimitsSection {
                v_level: lim[0], v_ascend: lim[1], v_descend: lim[2], h_min: lim[3], h_max: lim[4], d_min: lim[5],
            },
            positions: PositionsSection { ground_terminals: gts, uav_initial: starts, uav_final: finals },
        }
    }
}

proptest! {
    #[test]
    fn parse_serialize_parse_is_identity(file in any_file()) {
        let text = file.to_text().unwrap();
        let once = ScenarioFile::parse(&text).unwrap();
        prop_assert_eq!(&once, &file);
        let twice = ScenarioFile::parse(&once.to_text().unwrap()).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn generated_files_round_trip(seed in any::<u64>(), k in 1usize..8) {
        let cfg = GenerateConfig { num_links: k, ..Default::default() };
        let file = generate_scenario_file(seed, &cfg).unwrap();
        let back = ScenarioFile::parse(&file.to_text().unwrap()).unwrap();
        prop_assert_eq!(back.to_scenario().unwrap(), file.to_scenario().unwrap());
        prop_assert_eq!(back, file);
    }
}
