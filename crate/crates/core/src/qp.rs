//! Dense convex QP `min ½ x·Qx + q·x + r` s.t. `G x ≤ h` with diagonal positive
//! definite `Q`.
//!
//! Goldfarb-Idnani dual active-set method. The iterate starts at the
//! unconstrained minimiser and stays dual feasible; violated rows are added one
//! at a time (most violated first, lowest row index on ties) until the iterate
//! is primal feasible. `Jᵀ N_A = [R; 0]` is maintained with Givens rotations,
//! starting from `J = Q^{-1/2}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::ConstraintSystem;
use crate::cost::QuadraticCost;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub status: SolveStatus,
    /// Add and drop steps taken.
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    /// A previous solution; rows active there are tried first.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-8,
            max_iterations: 10_000,
            warm_start: None,
        }
    }
}

/// Farkas certificate: `y ≥ 0` with `Gᵀy = 0` and `hᵀy < 0`, so `G x ≤ h` has
/// no solution.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub weights: Vec<f64>,
    /// `‖Gᵀy‖∞`, zero up to rounding.
    pub gty_norm: f64,
    /// `hᵀy`, strictly negative.
    pub hty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per row of `G`; zero off the active set.
    pub multipliers: Vec<f64>,
    /// Active row indices in the order they were added.
    pub active_set: Vec<usize>,
    pub report: SolverReport,
    pub certificate: Option<InfeasibilityCertificate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖max(Gx - h, 0)‖∞`
    pub primal: f64,
    /// `‖Qx + q + Gᵀμ‖∞`
    pub dual: f64,
    /// `‖μ ∘ (Gx - h)‖∞`
    pub complementarity: f64,
}

/// Solves `min qc(x)` subject to `cs`. The antisymmetric own cross form of `qc`
/// has no effect on the minimiser and is ignored.
pub fn solve(
    qc: &QuadraticCost,
    cs: &ConstraintSystem,
    settings: &QpSettings,
) -> Result<QpSolution> {
    solve_diagonal(qc.quad_diag(), qc.linear(), qc.constant(), cs, settings)
}

pub fn kkt_residuals(
    qc: &QuadraticCost,
    cs: &ConstraintSystem,
    x: &[f64],
    mu: &[f64],
) -> Result<KktResiduals> {
    residuals(qc.quad_diag(), qc.linear(), cs, x, mu)
}

fn residuals(
    diag: &[f64],
    linear: &[f64],
    cs: &ConstraintSystem,
    x: &[f64],
    mu: &[f64],
) -> Result<KktResiduals> {
    let n = diag.len();
    if linear.len() != n {
        return Err(Error::shape("kkt_residuals linear", n, linear.len()));
    }
    if x.len() != n {
        return Err(Error::shape("kkt_residuals x", n, x.len()));
    }
    if cs.n_terms() != n {
        return Err(Error::shape("kkt_residuals constraints", n, cs.n_terms()));
    }
    if mu.len() != cs.n_rows() {
        return Err(Error::shape(
            "kkt_residuals multipliers",
            cs.n_rows(),
            mu.len(),
        ));
    }
    let slack = cs.slack(x)?;
    let mut stat: Vec<f64> = (0..n).map(|j| diag[j] * x[j] + linear[j]).collect();
    for (i, &m) in mu.iter().enumerate() {
        if m != 0.0 {
            for (s, g) in stat.iter_mut().zip(cs.row(i)) {
                *s += m * g;
            }
        }
    }
    Ok(KktResiduals {
        primal: slack.iter().fold(0.0, |acc, s| acc.max(*s)),
        dual: stat.iter().fold(0.0, |acc, s| acc.max(libm::fabs(*s))),
        complementarity: slack
            .iter()
            .zip(mu)
            .fold(0.0, |acc, (s, m)| acc.max(libm::fabs(s * m))),
    })
}

fn objective(diag: &[f64], linear: &[f64], constant: f64, x: &[f64]) -> f64 {
    constant
        + diag
            .iter()
            .zip(linear)
            .zip(x)
            .map(|((q, l), x)| l * x + 0.5 * q * x * x)
            .sum::<f64>()
}

/// Relative size below which the primal step direction is treated as zero.
const DEPENDENCE_RATIO: f64 = 1e-24;

/// Same problem as [`solve`], given as the diagonal of `Q`, `q` and `r`.
pub fn solve_diagonal(
    diag: &[f64],
    linear: &[f64],
    constant: f64,
    cs: &ConstraintSystem,
    settings: &QpSettings,
) -> Result<QpSolution> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::domain("n_terms", 0.0, ">= 1"));
    }
    if linear.len() != n {
        return Err(Error::shape("qp linear term", n, linear.len()));
    }
    if cs.n_terms() != n {
        return Err(Error::shape("qp constraint columns", n, cs.n_terms()));
    }
    if let Some(q) = diag.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
        return Err(Error::domain("Q diagonal entry", *q, "finite and > 0"));
    }
    if linear.iter().any(|l| !l.is_finite()) || !constant.is_finite() {
        return Err(Error::Numeric("non-finite QP data".into()));
    }
    let tol = settings.kkt_tolerance;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::domain("kkt_tolerance", tol, "finite and > 0"));
    }
    if let Some(w) = &settings.warm_start {
        if w.len() != n {
            return Err(Error::shape("qp warm start", n, w.len()));
        }
    }

    let mut solver = Solver::new(diag, linear, cs);
    let mut warm_rows: Vec<usize> = match &settings.warm_start {
        Some(w) => {
            let slack = cs.slack(w)?;
            (0..cs.n_rows())
                .filter(|&i| libm::fabs(slack[i]) <= tol.max(1e-9))
                .collect()
        }
        None => Vec::new(),
    };
    let add_threshold = 0.1 * tol;
    let mut iterations = 0usize;
    let mut certificate = None;

    let status = 'outer: loop {
        // Step 1: pick a violated row.
        let p = match solver.pick_violated(&mut warm_rows, add_threshold) {
            Some(p) => p,
            None => break SolveStatus::Optimal,
        };
        let mut u_p = 0.0;
        // Step 2: move towards satisfying row p, dropping rows that would get
        // negative multipliers.
        loop {
            if iterations >= settings.max_iterations {
                break 'outer SolveStatus::MaxIterations;
            }
            iterations += 1;
            let step = solver.directions(p);
            let (t1, k) = solver.partial_step(&step.r);
            let full = step.ztn > DEPENDENCE_RATIO * step.dnorm2 && step.ztn > 0.0;
            if !full {
                if t1.is_infinite() {
                    certificate = Some(solver.certificate(p, &step.r));
                    break 'outer SolveStatus::Infeasible;
                }
                solver.dual_update(t1, &step.r);
                u_p += t1;
                solver.drop(k);
                continue;
            }
            let s_p = solver.slack(p);
            let t2 = (-s_p / step.ztn).max(0.0);
            let t = t1.min(t2);
            for (xj, zj) in solver.x.iter_mut().zip(&step.z) {
                *xj += t * zj;
            }
            solver.dual_update(t, &step.r);
            u_p += t;
            if t2 <= t1 {
                solver.add(p, u_p, &step.d);
                break;
            }
            solver.drop(k);
        }
        if solver.x.iter().any(|v| !v.is_finite()) {
            break SolveStatus::NumericFailure;
        }
    };

    let mut multipliers = vec![0.0; cs.n_rows()];
    for (&row, &u) in solver.active.iter().zip(&solver.u) {
        multipliers[row] = u.max(0.0);
    }
    let x = solver.x;
    let res = residuals(diag, linear, cs, &x, &multipliers)?;
    let status = match status {
        SolveStatus::Optimal
            if !(res.primal <= tol && res.dual <= tol && res.complementarity <= tol) =>
        {
            SolveStatus::NumericFailure
        }
        s => s,
    };
    Ok(QpSolution {
        report: SolverReport {
            status,
            iterations,
            primal_residual: res.primal,
            dual_residual: res.dual,
            complementarity: res.complementarity,
            objective: objective(diag, linear, constant, &x),
        },
        x,
        multipliers,
        active_set: solver.active,
        certificate,
    })
}

struct Directions {
    /// `Jᵀ n_p`
    d: Vec<f64>,
    /// Primal step direction `J₂ d₂`.
    z: Vec<f64>,
    /// Dual step direction `R⁻¹ d₁`.
    r: Vec<f64>,
    /// `zᵀ n_p = ‖d₂‖²`
    ztn: f64,
    dnorm2: f64,
}

/// Working state, in the `Cᵀx ≥ b` orientation with `c_i = -g_i`, `b_i = -h_i`.
struct Solver<'a> {
    n: usize,
    cs: &'a ConstraintSystem,
    x: Vec<f64>,
    /// Row-major `n × n`.
    j: Vec<f64>,
    /// Row-major `n × n`, upper triangular in its leading `q × q` block.
    r: Vec<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    is_active: Vec<bool>,
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = libm::hypot(a, b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

impl<'a> Solver<'a> {
    fn new(diag: &[f64], linear: &[f64], cs: &'a ConstraintSystem) -> Self {
        let n = diag.len();
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            j[i * n + i] = 1.0 / libm::sqrt(diag[i]);
        }
        Self {
            n,
            cs,
            x: linear.iter().zip(diag).map(|(l, q)| -l / q).collect(),
            j,
            r: vec![0.0; n * n],
            active: Vec::new(),
            u: Vec::new(),
            is_active: vec![false; cs.n_rows()],
        }
    }

    fn q(&self) -> usize {
        self.active.len()
    }

    /// `c_pᵀx - b_p = h_p - g_pᵀx`; negative when row `p` is violated.
    fn slack(&self, p: usize) -> f64 {
        let dot: f64 = self.cs.row(p).iter().zip(&self.x).map(|(g, x)| g * x).sum();
        self.cs.h()[p] - dot
    }

    fn pick_violated(&self, warm: &mut Vec<usize>, threshold: f64) -> Option<usize> {
        while let Some(&p) = warm.first() {
            warm.remove(0);
            if !self.is_active[p] && self.slack(p) < -threshold {
                return Some(p);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for p in 0..self.cs.n_rows() {
            if self.is_active[p] {
                continue;
            }
            let s = self.slack(p);
            if s < -threshold && best.map_or(true, |(_, bs)| s < bs) {
                best = Some((p, s));
            }
        }
        best.map(|(p, _)| p)
    }

    fn directions(&self, p: usize) -> Directions {
        let n = self.n;
        let q = self.q();
        let row = self.cs.row(p);
        // n_p = -g_p
        let d: Vec<f64> = (0..n)
            .map(|col| -(0..n).map(|i| self.j[i * n + col] * row[i]).sum::<f64>())
            .collect();
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = (q..n).map(|col| self.j[i * n + col] * d[col]).sum();
        }
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in (i + 1)..q {
                acc -= self.r[i * n + k] * r[k];
            }
            r[i] = acc / self.r[i * n + i];
        }
        let ztn = d[q..].iter().map(|v| v * v).sum();
        let dnorm2 = d.iter().map(|v| v * v).sum();
        Directions {
            d,
            z,
            r,
            ztn,
            dnorm2,
        }
    }

    /// Largest dual step keeping the active multipliers non-negative, and the
    /// position of the blocking row.
    fn partial_step(&self, r: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, (&rk, &uk)) in r.iter().zip(&self.u).enumerate() {
            if rk > 0.0 {
                let t = uk / rk;
                if t < best.0 || (t == best.0 && self.active[k] < self.active[best.1]) {
                    best = (t, k);
                }
            }
        }
        best
    }

    fn dual_update(&mut self, t: f64, r: &[f64]) {
        for (u, rk) in self.u.iter_mut().zip(r) {
            *u -= t * rk;
        }
    }

    fn rotate_j_cols(&mut self, a: usize, b: usize, c: f64, s: f64) {
        let n = self.n;
        for i in 0..n {
            let (x, y) = (self.j[i * n + a], self.j[i * n + b]);
            self.j[i * n + a] = c * x + s * y;
            self.j[i * n + b] = -s * x + c * y;
        }
    }

    fn add(&mut self, p: usize, u_p: f64, d: &[f64]) {
        let n = self.n;
        let q = self.q();
        let mut d = d.to_vec();
        for col in ((q + 1)..n).rev() {
            let (c, s, h) = givens(d[col - 1], d[col]);
            if s == 0.0 {
                continue;
            }
            d[col - 1] = h;
            d[col] = 0.0;
            self.rotate_j_cols(col - 1, col, c, s);
        }
        for i in 0..=q {
            self.r[i * n + q] = d[i];
        }
        self.active.push(p);
        self.u.push(u_p);
        self.is_active[p] = true;
    }

    fn drop(&mut self, k: usize) {
        let n = self.n;
        let q = self.q();
        let row = self.active.remove(k);
        self.u.remove(k);
        self.is_active[row] = false;
        for col in k..(q - 1) {
            for i in 0..q {
                self.r[i * n + col] = self.r[i * n + col + 1];
            }
        }
        for i in 0..q {
            self.r[i * n + q - 1] = 0.0;
        }
        // Restore triangularity: zero the subdiagonal left by the removed column.
        for i in k..(q - 1) {
            let (c, s, h) = givens(self.r[i * n + i], self.r[(i + 1) * n + i]);
            if s == 0.0 {
                continue;
            }
            self.r[i * n + i] = h;
            self.r[(i + 1) * n + i] = 0.0;
            for col in (i + 1)..(q - 1) {
                let (x, y) = (self.r[i * n + col], self.r[(i + 1) * n + col]);
                self.r[i * n + col] = c * x + s * y;
                self.r[(i + 1) * n + col] = -s * x + c * y;
            }
            self.rotate_j_cols(i, i + 1, c, s);
        }
    }

    fn certificate(&self, p: usize, r: &[f64]) -> InfeasibilityCertificate {
        let m = self.cs.n_rows();
        let mut weights = vec![0.0; m];
        weights[p] = 1.0;
        for (&row, &rk) in self.active.iter().zip(r) {
            weights[row] = (-rk).max(0.0);
        }
        let mut gty = vec![0.0; self.n];
        let mut hty = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                for (acc, g) in gty.iter_mut().zip(self.cs.row(i)) {
                    *acc += w * g;
                }
                hty += w * self.cs.h()[i];
            }
        }
        InfeasibilityCertificate {
            weights,
            gty_norm: gty.iter().fold(0.0, |acc, v| acc.max(libm::fabs(*v))),
            hty,
        }
    }
}

impl QpSolution {
    /// Errors unless the solve ended [`SolveStatus::Optimal`].
    pub fn require_optimal(self) -> Result<Self> {
        match self.report.status {
            SolveStatus::Optimal => Ok(self),
            status => Err(Error::Numeric(format!(
                "QP ended with status {status:?} after {} iterations",
                self.report.iterations
            ))),
        }
    }
}
