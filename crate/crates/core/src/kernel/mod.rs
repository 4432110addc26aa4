//! Log-barrier interior-point solver for smooth concave maximization.
//!
//! Problems are described through [`ConvexProgram`]. The objective supplies
//! its own derivatives; inequality constraints are drawn from a small closed
//! set of convex shapes ([`Constraint`]) whose derivatives the kernel computes
//! itself. Variables are grouped into consecutive blocks and every Hessian
//! entry must couple variables of the same or of adjacent blocks, so Newton
//! systems are factored block by block. Programs with affine equality
//! constraints fall back to a dense solve on a nullspace basis.

mod blocktri;

pub use blocktri::BlockTridiagonal;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, TpcError};

/// A convex inequality `g(x) <= 0` on a subset of the variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `coefs . x[vars] - bound <= 0`.
    Linear {
        vars: Vec<usize>,
        coefs: Vec<f64>,
        bound: f64,
    },
    /// `|A x[vars] + offset|^2 - radius^2 <= 0`, with `A` stored row-major in
    /// `rows` (`offset.len()` rows of `vars.len()` columns).
    Ball {
        vars: Vec<usize>,
        rows: Vec<f64>,
        offset: Vec<f64>,
        radius: f64,
    },
    /// `|A x[vars] + offset|^2 / t - t <= 0` with
    /// `t = scale . x[vars] + scale_offset > 0` (a second-order cone).
    Cone {
        vars: Vec<usize>,
        rows: Vec<f64>,
        offset: Vec<f64>,
        scale: Vec<f64>,
        scale_offset: f64,
    },
}

impl Constraint {
    pub fn linear(vars: Vec<usize>, coefs: Vec<f64>, bound: f64) -> Self {
        debug_assert_eq!(vars.len(), coefs.len());
        Constraint::Linear { vars, coefs, bound }
    }

    /// `x[var] <= bound`.
    pub fn upper(var: usize, bound: f64) -> Self {
        Self::linear(vec![var], vec![1.0], bound)
    }

    /// `x[var] >= bound`.
    pub fn lower(var: usize, bound: f64) -> Self {
        Self::linear(vec![var], vec![-1.0], -bound)
    }

    pub fn vars(&self) -> &[usize] {
        match self {
            Constraint::Linear { vars, .. } | Constraint::Ball { vars, .. } | Constraint::Cone { vars, .. } => vars,
        }
    }

    fn affine(rows: &[f64], offset: &[f64], xs: &[f64]) -> Vec<f64> {
        let n = xs.len();
        offset
            .iter()
            .enumerate()
            .map(|(i, o)| o + rows[i * n..(i + 1) * n].iter().zip(xs).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    /// Constraint value; `+inf` outside the constraint's own domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        let xs: Vec<f64> = self.vars().iter().map(|&i| x[i]).collect();
        match self {
            Constraint::Linear { coefs, bound, .. } => coefs.iter().zip(&xs).map(|(a, v)| a * v).sum::<f64>() - bound,
            Constraint::Ball {
                rows, offset, radius, ..
            } => {
                let u = Self::affine(rows, offset, &xs);
                u.iter().map(|v| v * v).sum::<f64>() - radius * radius
            }
            Constraint::Cone {
                rows,
                offset,
                scale,
                scale_offset,
                ..
            } => {
                let t = scale_offset + scale.iter().zip(&xs).map(|(a, v)| a * v).sum::<f64>();
                if t <= 0.0 {
                    return f64::INFINITY;
                }
                let u = Self::affine(rows, offset, &xs);
                u.iter().map(|v| v * v).sum::<f64>() / t - t
            }
        }
    }

    /// Value, gradient and Hessian with respect to `x[vars]`.
    fn local_derivatives(&self, x: &[f64]) -> (f64, Vec<f64>, Option<DMatrix<f64>>) {
        let xs: Vec<f64> = self.vars().iter().map(|&i| x[i]).collect();
        let n = xs.len();
        match self {
            Constraint::Linear { coefs, .. } => (self.value(x), coefs.clone(), None),
            Constraint::Ball { rows, offset, .. } => {
                let a = DMatrix::from_row_slice(offset.len(), n, rows);
                let u = DVector::from_vec(Self::affine(rows, offset, &xs));
                let grad = (a.transpose() * &u) * 2.0;
                let hess = a.transpose() * &a * 2.0;
                (self.value(x), grad.as_slice().to_vec(), Some(hess))
            }
            Constraint::Cone {
                rows,
                offset,
                scale,
                scale_offset,
                ..
            } => {
                let a = DMatrix::from_row_slice(offset.len(), n, rows);
                let u = DVector::from_vec(Self::affine(rows, offset, &xs));
                let s = DVector::from_column_slice(scale);
                let t = scale_offset + s.dot(&DVector::from_column_slice(&xs));
                let uu = u.norm_squared();
                let atu = a.transpose() * &u;
                let grad = &atu * (2.0 / t) - &s * (uu / (t * t) + 1.0);
                let cross = &atu * s.transpose();
                let hess = a.transpose() * &a * (2.0 / t) - (&cross + cross.transpose()) * (2.0 / (t * t))
                    + &s * s.transpose() * (2.0 * uu / (t * t * t));
                (uu / t - t, grad.as_slice().to_vec(), Some(hess))
            }
        }
    }
}

/// A concave maximization problem for [`maximize`].
pub trait ConvexProgram {
    /// Sizes of the consecutive variable blocks; they sum to the dimension.
    fn block_sizes(&self) -> Vec<usize>;

    /// Objective value, `-inf` outside its domain.
    fn objective(&self, x: &[f64]) -> f64;

    /// Adds the objective gradient to `grad` and its Hessian to `hess`.
    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut BlockTridiagonal);

    fn constraints(&self) -> &[Constraint];

    /// Affine equalities `E x = f`, if any.
    fn equality(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        None
    }

    fn dim(&self) -> usize {
        self.block_sizes().iter().sum()
    }
}

/// Parameters of the barrier method and its Newton centering steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmConfig {
    /// Initial objective weight `s`.
    pub barrier_init: f64,
    /// Factor applied to `s` after every centering.
    pub barrier_growth: f64,
    /// Stop once `m / s` drops to this value.
    pub outer_tol: f64,
    pub newton_max_iter: usize,
    /// Centering stops when half the squared Newton decrement falls below
    /// this value.
    pub newton_tol: f64,
    pub ls_alpha: f64,
    pub ls_beta: f64,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            barrier_init: 1.0,
            barrier_growth: 30.0,
            outer_tol: 1e-8,
            newton_max_iter: 30,
            newton_tol: 1e-8,
            ls_alpha: 0.01,
            ls_beta: 0.5,
        }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.barrier_init > 0.0
            && self.barrier_growth > 1.0
            && self.outer_tol > 0.0
            && self.newton_max_iter >= 1
            && self.newton_tol > 0.0
            && self.ls_alpha > 0.0
            && self.ls_alpha < 0.5
            && self.ls_beta > 0.0
            && self.ls_beta < 1.0;
        if ok {
            Ok(())
        } else {
            Err(TpcError::Usage(format!("invalid IPM configuration {self:?}")))
        }
    }

    /// Upper bound on the number of outer iterations for `m` inequalities.
    pub fn max_outer_iterations(&self, m: usize) -> usize {
        if m == 0 {
            return 1;
        }
        let ratio = m as f64 / (self.barrier_init * self.outer_tol);
        (ratio.ln() / self.barrier_growth.ln()).ceil().max(0.0) as usize + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IpmDiagnostics {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub final_weight: f64,
    /// `m / s` at exit.
    pub gap: f64,
    /// Objective value at the end of every centering step.
    pub path: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub diagnostics: IpmDiagnostics,
}

/// Solver state shared by the centering steps: an optional nullspace basis
/// for the equalities plus scratch buffers.
struct Workspace {
    basis: Option<DMatrix<f64>>,
    hess: BlockTridiagonal,
    grad: Vec<f64>,
}

impl Workspace {
    fn new<P: ConvexProgram + ?Sized>(prog: &P) -> Self {
        let sizes = prog.block_sizes();
        let basis = prog.equality().map(|(e, _)| nullspace(e));
        let n: usize = sizes.iter().sum();
        Self {
            basis,
            hess: BlockTridiagonal::new(&sizes),
            grad: vec![0.0; n],
        }
    }
}

fn nullspace(e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = e.ncols();
    let gram = e.transpose() * e;
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Barrier-augmented objective `s f(x) + sum log(-g_i(x))`; `-inf` when `x`
/// is outside the domain or not strictly feasible.
fn phi<P: ConvexProgram + ?Sized>(prog: &P, weight: f64, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for c in prog.constraints() {
        let g = c.value(x);
        if !(g < 0.0) {
            return f64::NEG_INFINITY;
        }
        total += (-g).ln();
    }
    let f = prog.objective(x);
    if !f.is_finite() {
        return f64::NEG_INFINITY;
    }
    weight * f + total
}

fn assemble<P: ConvexProgram + ?Sized>(prog: &P, weight: f64, x: &[f64], ws: &mut Workspace) {
    ws.hess.clear();
    ws.grad.iter_mut().for_each(|g| *g = 0.0);
    prog.objective_derivatives(x, &mut ws.grad, &mut ws.hess);
    if weight != 1.0 {
        ws.grad.iter_mut().for_each(|g| *g *= weight);
        ws.hess.scale(weight);
    }
    for c in prog.constraints() {
        let (g, dg, d2g) = c.local_derivatives(x);
        let vars = c.vars();
        for (i, &vi) in vars.iter().enumerate() {
            ws.grad[vi] += dg[i] / g;
            for (j, &vj) in vars.iter().enumerate() {
                let mut h = -dg[i] * dg[j] / (g * g);
                if let Some(m) = &d2g {
                    h += m[(i, j)] / g;
                }
                ws.hess.add(vi, vj, h);
            }
        }
    }
}

/// Solves `(-H) dx = grad`, adding a doubling multiple of the identity until
/// the factorization succeeds.
fn newton_direction(ws: &Workspace, x: &[f64]) -> Result<Vec<f64>> {
    let scale = ws.hess.diag_scale().max(1e-300);
    match &ws.basis {
        None => {
            let mut tau = 0.0;
            for _ in 0..200 {
                if let Some(dx) = ws.hess.solve_negated(&ws.grad, tau) {
                    return Ok(dx);
                }
                tau = if tau == 0.0 { 1e-10 * scale } else { 2.0 * tau };
            }
        }
        Some(z) => {
            if z.ncols() == 0 {
                return Ok(vec![0.0; x.len()]);
            }
            let h = -ws.hess.to_dense();
            let reduced = z.transpose() * &h * z;
            let g = z.transpose() * DVector::from_column_slice(&ws.grad);
            let mut tau = 0.0;
            for _ in 0..200 {
                let mut m = reduced.clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += tau;
                }
                if let Some(ch) = m.cholesky() {
                    let y = ch.solve(&g);
                    let dx = z * y;
                    if dx.iter().all(|v| v.is_finite()) {
                        return Ok(dx.as_slice().to_vec());
                    }
                }
                tau = if tau == 0.0 { 1e-10 * scale } else { 2.0 * tau };
            }
        }
    }
    Err(TpcError::Numerical {
        message: "negated Hessian could not be made positive definite".into(),
        iterate: x.to_vec(),
    })
}

fn centering<P: ConvexProgram + ?Sized>(
    prog: &P,
    weight: f64,
    x: &mut Vec<f64>,
    cfg: &IpmConfig,
    ws: &mut Workspace,
) -> Result<usize> {
    let mut value = phi(prog, weight, x);
    if !value.is_finite() {
        return Err(TpcError::Numerical {
            message: "centering started outside the barrier domain".into(),
            iterate: x.clone(),
        });
    }
    let mut trial = vec![0.0; x.len()];
    for it in 0..cfg.newton_max_iter {
        assemble(prog, weight, x, ws);
        let dx = newton_direction(ws, x)?;
        let slope: f64 = ws.grad.iter().zip(&dx).map(|(g, d)| g * d).sum();
        if !slope.is_finite() || dx.iter().any(|v| !v.is_finite()) {
            return Err(TpcError::Numerical {
                message: "non-finite Newton step".into(),
                iterate: x.clone(),
            });
        }
        if slope / 2.0 <= cfg.newton_tol {
            return Ok(it);
        }
        let mut t = 1.0;
        let accepted = loop {
            for i in 0..x.len() {
                trial[i] = x[i] + t * dx[i];
            }
            let v = phi(prog, weight, &trial);
            if v.is_finite() && v >= value + cfg.ls_alpha * t * slope {
                break Some(v);
            }
            t *= cfg.ls_beta;
            if t < 1e-20 {
                break None;
            }
        };
        match accepted {
            Some(v) => {
                std::mem::swap(x, &mut trial);
                value = v;
            }
            // No step gives sufficient increase: the point is centered up to
            // rounding.
            None => return Ok(it + 1),
        }
    }
    Ok(cfg.newton_max_iter)
}

fn check_start<P: ConvexProgram + ?Sized>(prog: &P, x: &[f64]) -> Result<()> {
    if x.len() != prog.dim() {
        return Err(TpcError::Usage(format!(
            "start has {} entries, program has {}",
            x.len(),
            prog.dim()
        )));
    }
    for (index, c) in prog.constraints().iter().enumerate() {
        let value = c.value(x);
        if !(value < 0.0) {
            return Err(TpcError::InfeasibleStart { index, value });
        }
    }
    if let Some((e, f)) = prog.equality() {
        let r = e * DVector::from_column_slice(x) - f;
        let tol = 1e-9 * (1.0 + f.amax());
        if r.amax() > tol {
            return Err(TpcError::Usage(format!(
                "start violates the equality constraints by {:e}",
                r.amax()
            )));
        }
    }
    if !prog.objective(x).is_finite() {
        return Err(TpcError::Domain("objective is not finite at the start point".into()));
    }
    Ok(())
}

/// Newton centering for a fixed objective weight: maximizes
/// `weight * f(x) + sum log(-g_i(x))` from a strictly feasible `start`.
/// Returns the centered point and the number of Newton steps taken.
pub fn newton_centering<P: ConvexProgram + ?Sized>(
    prog: &P,
    weight: f64,
    start: &[f64],
    cfg: &IpmConfig,
) -> Result<(Vec<f64>, usize)> {
    cfg.validate()?;
    check_start(prog, start)?;
    let mut ws = Workspace::new(prog);
    let mut x = start.to_vec();
    let iters = centering(prog, weight, &mut x, cfg, &mut ws)?;
    Ok((x, iters))
}

/// Maximizes the program by the barrier method from a strictly feasible start.
pub fn maximize<P: ConvexProgram + ?Sized>(prog: &P, start: &[f64], cfg: &IpmConfig) -> Result<IpmSolution> {
    cfg.validate()?;
    check_start(prog, start)?;
    let m = prog.constraints().len();
    let mut ws = Workspace::new(prog);
    let mut x = start.to_vec();
    let mut weight = cfg.barrier_init;
    let mut diag = IpmDiagnostics::default();
    loop {
        diag.newton_iterations += centering(prog, weight, &mut x, cfg, &mut ws)?;
        diag.outer_iterations += 1;
        diag.path.push((weight, prog.objective(&x)));
        let gap = m as f64 / weight;
        if gap <= cfg.outer_tol || m == 0 {
            diag.gap = gap;
            diag.final_weight = weight;
            break;
        }
        weight *= cfg.barrier_growth;
    }
    Ok(IpmSolution {
        objective: prog.objective(&x),
        x,
        diagnostics: diag,
    })
}

/// Dense concave quadratic program `max -x'Qx/2 + c'x` with arbitrary
/// constraints and optional equalities. Used for testing and as a reference
/// implementation of [`ConvexProgram`].
#[derive(Debug, Clone)]
pub struct QpProgram {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub constraints: Vec<Constraint>,
    pub equality: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl ConvexProgram for QpProgram {
    fn block_sizes(&self) -> Vec<usize> {
        vec![self.c.len()]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        self.c.dot(&x) - 0.5 * x.dot(&(&self.q * &x))
    }

    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut BlockTridiagonal) {
        let xv = DVector::from_column_slice(x);
        let g = &self.c - &self.q * xv;
        for i in 0..x.len() {
            grad[i] += g[i];
            for j in 0..x.len() {
                hess.add(i, j, -self.q[(i, j)]);
            }
        }
    }

    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn equality(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        self.equality.as_ref().map(|(e, f)| (e, f))
    }
}
