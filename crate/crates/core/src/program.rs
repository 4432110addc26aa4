//! Generic trajectory program: a per-slot concave objective over resource
//! variables and UAV positions, subject to altitude, speed and (linearized)
//! separation constraints.

use nalgebra::DMatrix;

use crate::kernel::{BlockTridiagonal, Constraint, ConvexProgram};
use crate::normalized::{Geometry, PathState};
use crate::scenario::Point;

/// Concave per-slot objective plugged into a [`PathProgram`].
///
/// Local coordinates of one slot are the resource variables followed by the
/// full 3D position of every UAV in the program. When the altitude is fixed
/// the program drops the vertical entries.
pub trait SlotModel {
    fn resource_dim(&self) -> usize;

    /// Objective of free slot `slot`; `-inf` outside the domain.
    fn value(&self, slot: usize, res: &[f64], pos: &[Point]) -> f64;

    /// Adds the gradient and Hessian in local coordinates.
    fn derivatives(&self, slot: usize, res: &[f64], pos: &[Point], grad: &mut [f64], hess: &mut DMatrix<f64>);

    /// Extra constraints that involve only this slot's variables.
    fn slot_constraints(&self, _slot: usize, _b: &mut SlotConstraints<'_>) {}
}

/// Helper handed to [`SlotModel::slot_constraints`] to address variables.
pub struct SlotConstraints<'a> {
    offset: usize,
    res_dim: usize,
    pos_dim: usize,
    fixed_z: Option<f64>,
    out: &'a mut Vec<Constraint>,
}

impl SlotConstraints<'_> {
    pub fn res_var(&self, i: usize) -> usize {
        self.offset + i
    }

    /// Adds `sum res_coefs . res + sum pos_coefs . pos + constant <= 0`.
    pub fn affine(&mut self, res_coefs: &[(usize, f64)], pos_coefs: &[(usize, Point)], constant: f64) {
        let mut vars = Vec::new();
        let mut coefs = Vec::new();
        let mut bound = -constant;
        for &(i, c) in res_coefs {
            vars.push(self.offset + i);
            coefs.push(c);
        }
        for (u, c) in pos_coefs {
            let base = self.offset + self.res_dim + u * self.pos_dim;
            for d in 0..3 {
                if c[d] == 0.0 {
                    continue;
                }
                match (d, self.fixed_z) {
                    (2, Some(z)) => bound -= c[d] * z,
                    _ => {
                        vars.push(base + d);
                        coefs.push(c[d]);
                    }
                }
            }
        }
        self.out.push(Constraint::linear(vars, coefs, bound));
    }

    pub fn push(&mut self, c: Constraint) {
        self.out.push(c);
    }
}

/// Boundary data of a [`PathProgram`].
#[derive(Debug, Clone)]
pub struct PathSpec<'a> {
    /// Positions before the first free slot (one per UAV in the program).
    pub lead: &'a [Point],
    /// Step limits (level, ascend, descend) of the first transition.
    pub lead_steps: (f64, f64, f64),
    /// Positions after the last free slot, if fixed.
    pub tail: Option<&'a [Point]>,
    /// Expansion positions per free slot for the linearized pairwise
    /// separation constraints.
    pub separation: Option<&'a [Vec<Point>]>,
    /// Separation distance used by those constraints.
    pub sep_distance: f64,
    pub free_slots: usize,
    /// Balls `(center, radius)`, one per UAV, that must contain the last
    /// free slot.
    pub end_balls: Option<&'a [(Point, f64)]>,
}

/// Concave program over `free_slots` consecutive slots.
pub struct PathProgram<'a, M: SlotModel> {
    model: &'a M,
    res_dim: usize,
    uavs: usize,
    pos_dim: usize,
    free: usize,
    fixed_z: Option<f64>,
    constraints: Vec<Constraint>,
}

impl<'a, M: SlotModel> PathProgram<'a, M> {
    pub fn new(geo: &Geometry, model: &'a M, spec: &PathSpec<'_>) -> Self {
        let uavs = spec.lead.len();
        let pos_dim = if geo.fixed_altitude { 2 } else { 3 };
        let fixed_z = geo.fixed_altitude.then_some(geo.h_min);
        let mut prog = Self {
            model,
            res_dim: model.resource_dim(),
            uavs,
            pos_dim,
            free: spec.free_slots,
            fixed_z,
            constraints: Vec::new(),
        };
        prog.build_constraints(geo, spec);
        prog
    }

    fn block(&self) -> usize {
        self.res_dim + self.uavs * self.pos_dim
    }

    fn offset(&self, slot: usize) -> usize {
        slot * self.block()
    }

    fn pos_var(&self, slot: usize, u: usize, d: usize) -> usize {
        self.offset(slot) + self.res_dim + u * self.pos_dim + d
    }

    fn build_constraints(&mut self, geo: &Geometry, spec: &PathSpec<'_>) {
        let mut out = Vec::new();
        let vertical = self.fixed_z.is_none();
        for t in 0..self.free {
            let (dl, da, dd) = if t == 0 {
                spec.lead_steps
            } else {
                (geo.dl, geo.da, geo.dd)
            };
            for u in 0..self.uavs {
                let (x, y) = (self.pos_var(t, u, 0), self.pos_var(t, u, 1));
                if vertical {
                    let z = self.pos_var(t, u, 2);
                    out.push(Constraint::lower(z, geo.h_min));
                    out.push(Constraint::upper(z, geo.h_max));
                }
                if t == 0 {
                    let l = spec.lead[u];
                    out.push(Constraint::Ball {
                        vars: vec![x, y],
                        rows: vec![1.0, 0.0, 0.0, 1.0],
                        offset: vec![-l[0], -l[1]],
                        radius: dl,
                    });
                    if vertical {
                        let z = self.pos_var(t, u, 2);
                        out.push(Constraint::linear(vec![z], vec![1.0], l[2] + da));
                        out.push(Constraint::linear(vec![z], vec![-1.0], dd - l[2]));
                    }
                } else {
                    let (px, py) = (self.pos_var(t - 1, u, 0), self.pos_var(t - 1, u, 1));
                    out.push(Constraint::Ball {
                        vars: vec![x, y, px, py],
                        rows: vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
                        offset: vec![0.0, 0.0],
                        radius: dl,
                    });
                    if vertical {
                        let (z, pz) = (self.pos_var(t, u, 2), self.pos_var(t - 1, u, 2));
                        out.push(Constraint::linear(vec![z, pz], vec![1.0, -1.0], da));
                        out.push(Constraint::linear(vec![pz, z], vec![1.0, -1.0], dd));
                    }
                }
            }
        }
        if let (Some(tail), true) = (spec.tail, self.free > 0) {
            let t = self.free - 1;
            for (u, e) in tail.iter().enumerate() {
                let (x, y) = (self.pos_var(t, u, 0), self.pos_var(t, u, 1));
                out.push(Constraint::Ball {
                    vars: vec![x, y],
                    rows: vec![1.0, 0.0, 0.0, 1.0],
                    offset: vec![-e[0], -e[1]],
                    radius: geo.dl,
                });
                if vertical {
                    let z = self.pos_var(t, u, 2);
                    // e_z - z <= da and z - e_z <= dd.
                    out.push(Constraint::linear(vec![z], vec![-1.0], geo.da - e[2]));
                    out.push(Constraint::linear(vec![z], vec![1.0], geo.dd + e[2]));
                }
            }
        }
        if let (Some(balls), true) = (spec.end_balls, self.free > 0) {
            let t = self.free - 1;
            for (u, (c, r)) in balls.iter().enumerate() {
                let (x, y) = (self.pos_var(t, u, 0), self.pos_var(t, u, 1));
                out.push(match self.fixed_z {
                    None => Constraint::Ball {
                        vars: vec![x, y, self.pos_var(t, u, 2)],
                        rows: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                        offset: vec![-c[0], -c[1], -c[2]],
                        radius: *r,
                    },
                    Some(z) => Constraint::Ball {
                        vars: vec![x, y],
                        rows: vec![1.0, 0.0, 0.0, 1.0],
                        offset: vec![-c[0], -c[1]],
                        radius: (r * r - (z - c[2]).powi(2)).max(0.0).sqrt(),
                    },
                });
            }
        }
        if let Some(exp) = spec.separation {
            let d2 = spec.sep_distance * spec.sep_distance;
            for t in 0..self.free {
                for u in 0..self.uavs {
                    for v in u + 1..self.uavs {
                        let delta = exp[t][u] - exp[t][v];
                        // |delta|^2 + d^2 - 2 delta . (q_u - q_v) <= 0
                        let mut b = self.slot_builder(t, &mut out);
                        b.affine(&[], &[(u, -2.0 * delta), (v, 2.0 * delta)], delta.norm_squared() + d2);
                    }
                }
            }
        }
        for t in 0..self.free {
            let mut b = self.slot_builder(t, &mut out);
            self.model.slot_constraints(t, &mut b);
        }
        self.constraints = out;
    }

    fn slot_builder<'b>(&self, t: usize, out: &'b mut Vec<Constraint>) -> SlotConstraints<'b> {
        SlotConstraints {
            offset: self.offset(t),
            res_dim: self.res_dim,
            pos_dim: self.pos_dim,
            fixed_z: self.fixed_z,
            out,
        }
    }

    /// Program variable of coordinate `d` of UAV `u` at free slot `slot`;
    /// `None` for the altitude when it is fixed.
    pub fn position_var(&self, slot: usize, u: usize, d: usize) -> Option<usize> {
        (d < self.pos_dim).then(|| self.pos_var(slot, u, d))
    }

    /// Flattens resources and positions of the free slots.
    pub fn encode(&self, res: &[Vec<f64>], pos: &[Vec<Point>]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.free * self.block());
        for t in 0..self.free {
            x.extend_from_slice(&res[t][..self.res_dim]);
            for q in &pos[t][..self.uavs] {
                x.extend_from_slice(&q.as_slice()[..self.pos_dim]);
            }
        }
        x
    }

    fn slot_view(&self, x: &[f64], t: usize) -> (Vec<f64>, Vec<Point>) {
        let o = self.offset(t);
        let res = x[o..o + self.res_dim].to_vec();
        let pos = (0..self.uavs)
            .map(|u| {
                let b = o + self.res_dim + u * self.pos_dim;
                let z = self.fixed_z.unwrap_or_else(|| x[b + 2]);
                Point::new(x[b], x[b + 1], z)
            })
            .collect();
        (res, pos)
    }

    pub fn decode(&self, x: &[f64]) -> PathState {
        let (res, pos) = (0..self.free).map(|t| self.slot_view(x, t)).unzip();
        PathState { res, pos }
    }
}

impl<M: SlotModel> ConvexProgram for PathProgram<'_, M> {
    fn block_sizes(&self) -> Vec<usize> {
        vec![self.block(); self.free]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in 0..self.free {
            let (res, pos) = self.slot_view(x, t);
            let v = self.model.value(t, &res, &pos);
            if !v.is_finite() {
                return f64::NEG_INFINITY;
            }
            total += v;
        }
        total
    }

    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut BlockTridiagonal) {
        let local = self.res_dim + 3 * self.uavs;
        let mut g = vec![0.0; local];
        let mut h = DMatrix::zeros(local, local);
        // Local index -> program variable (None for a fixed altitude).
        let map: Vec<Option<usize>> = (0..local)
            .map(|i| {
                if i < self.res_dim {
                    Some(i)
                } else {
                    let (u, d) = ((i - self.res_dim) / 3, (i - self.res_dim) % 3);
                    (d < self.pos_dim).then_some(self.res_dim + u * self.pos_dim + d)
                }
            })
            .collect();
        for t in 0..self.free {
            let (res, pos) = self.slot_view(x, t);
            g.iter_mut().for_each(|v| *v = 0.0);
            h.fill(0.0);
            self.model.derivatives(t, &res, &pos, &mut g, &mut h);
            let o = self.offset(t);
            for i in 0..local {
                let Some(vi) = map[i] else { continue };
                grad[o + vi] += g[i];
                for j in 0..local {
                    let Some(vj) = map[j] else { continue };
                    let v = h[(i, j)];
                    if v != 0.0 {
                        hess.add(o + vi, o + vj, v);
                    }
                }
            }
        }
    }

    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! Finite-difference checks shared by the model tests.
    use super::*;

    /// Compares analytic derivatives of `model` at `(res, pos)` against
    /// central differences and returns the largest absolute error.
    pub fn derivative_error<M: SlotModel>(model: &M, slot: usize, res: &[f64], pos: &[Point]) -> f64 {
        let r = res.len();
        let local = r + 3 * pos.len();
        let pack = |res: &[f64], pos: &[Point]| {
            let mut v = res.to_vec();
            for q in pos {
                v.extend_from_slice(q.as_slice());
            }
            v
        };
        let unpack = |v: &[f64]| {
            let res = v[..r].to_vec();
            let pos: Vec<Point> = v[r..].chunks(3).map(|c| Point::new(c[0], c[1], c[2])).collect();
            (res, pos)
        };
        let x0 = pack(res, pos);
        let mut g = vec![0.0; local];
        let mut h = DMatrix::zeros(local, local);
        model.derivatives(slot, res, pos, &mut g, &mut h);
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..local {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let (rp, pp) = unpack(&xp);
            let (rm, pm) = unpack(&xm);
            let fd = (model.value(slot, &rp, &pp) - model.value(slot, &rm, &pm)) / (2.0 * eps);
            worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
            let mut gp = vec![0.0; local];
            let mut gm = vec![0.0; local];
            let mut scratch = DMatrix::zeros(local, local);
            model.derivatives(slot, &rp, &pp, &mut gp, &mut scratch);
            scratch.fill(0.0);
            model.derivatives(slot, &rm, &pm, &mut gm, &mut scratch);
            for j in 0..local {
                let fd = (gp[j] - gm[j]) / (2.0 * eps);
                worst = worst.max((fd - h[(j, i)]).abs() / (1.0 + h[(j, i)].abs()));
            }
        }
        worst
    }
}
