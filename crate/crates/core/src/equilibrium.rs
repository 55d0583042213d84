//! Alternating relaxed best responses between the unit trader A and the
//! `λ`-scaled trader B.
//!
//! Iteration `k` first moves A part of the way to its best response against
//! `b^{(k-1)}`, then moves B part of the way to its best response against the
//! new `a^{(k)}`:
//!
//! ```text
//! a^{(k)} = γ BR_A(b^{(k-1)}) + (1 - γ) a^{(k-1)}
//! b^{(k)} = γ BR_B(a^{(k)})   + (1 - γ) b^{(k-1)}
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{compile, ConstraintSpec, ConstraintSystem};
use crate::cost::{
    assemble_cost_a, assemble_cost_b, check_kappa, check_lambda, QuadraticCost, Trader,
};
use crate::qp::{self, QpSettings, SolveStatus, SolverReport};
use crate::{Error, Result, StrategyCoeffs};

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
/// A run is declared diverged once any coefficient exceeds this in magnitude.
pub const DIVERGENCE_CEILING: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct EquilibriumParams {
    pub kappa: f64,
    pub lambda: f64,
    pub n_terms: usize,
    pub gamma: f64,
    /// Convergence threshold on the sup norm of one iteration's coefficient change.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub constraints_a: Vec<ConstraintSpec>,
    pub constraints_b: Vec<ConstraintSpec>,
    /// Starting coefficients; `None` is the risk-neutral line.
    pub initial_a: Option<Vec<f64>>,
    pub initial_b: Option<Vec<f64>>,
    pub qp: QpSettings,
}

impl EquilibriumParams {
    pub fn new(kappa: f64, lambda: f64, n_terms: usize, gamma: f64) -> Self {
        Self {
            kappa,
            lambda,
            n_terms,
            gamma,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            constraints_a: Vec::new(),
            constraints_b: Vec::new(),
            initial_a: None,
            initial_b: None,
            qp: QpSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_kappa(self.kappa)?;
        check_lambda(self.lambda)?;
        if self.n_terms == 0 {
            return Err(Error::domain("n_terms", 0.0, ">= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::domain("gamma", self.gamma, "within (0, 1]"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::domain("tolerance", self.tolerance, "finite and > 0"));
        }
        for init in [&self.initial_a, &self.initial_b].into_iter().flatten() {
            if init.len() != self.n_terms {
                return Err(Error::shape(
                    "initial coefficients",
                    self.n_terms,
                    init.len(),
                ));
            }
            if init.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite initial coefficients".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Converged,
    Diverged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Costs at `(a^{(k)}, b^{(k-1)})`, after step (i).
    pub cost_a_mid: f64,
    pub cost_b_mid: f64,
    /// Costs at `(a^{(k)}, b^{(k)})`, after step (ii).
    pub cost_a: f64,
    pub cost_b: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub report_a: SolverReport,
    pub report_b: SolverReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTrace {
    pub initial_a: Vec<f64>,
    pub initial_b: Vec<f64>,
    /// Costs at the starting pair.
    pub init_cost_a: f64,
    pub init_cost_b: f64,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl EquilibriumTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Final `(cost_a, cost_b)`, or the initial pair for an empty trace.
    pub fn final_costs(&self) -> (f64, f64) {
        self.records
            .last()
            .map_or((self.init_cost_a, self.init_cost_b), |r| {
                (r.cost_a, r.cost_b)
            })
    }

    pub fn final_coeffs(&self) -> (&[f64], &[f64]) {
        self.records
            .last()
            .map_or((&self.initial_a[..], &self.initial_b[..]), |r| {
                (&r.a[..], &r.b[..])
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Unit strategy of A.
    pub a: StrategyCoeffs,
    /// Unit strategy of B, carrying scale `λ`.
    pub b: StrategyCoeffs,
    pub trace: EquilibriumTrace,
}

/// A run aborted by a failed best response, with everything computed before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: Error,
    pub trace: EquilibriumTrace,
}

/// Precompiled constraint systems for one parameter set.
#[derive(Debug, Clone)]
pub struct Engine {
    params: EquilibriumParams,
    system_a: ConstraintSystem,
    system_b: ConstraintSystem,
}

fn sup_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .fold(0.0, |acc, (a, b)| acc.max(libm::fabs(a - b)))
}

fn relax(new: &[f64], old: &[f64], gamma: f64) -> Vec<f64> {
    new.iter()
        .zip(old)
        .map(|(n, o)| gamma * n + (1.0 - gamma) * o)
        .collect()
}

impl Engine {
    pub fn new(params: EquilibriumParams) -> Result<Self> {
        params.validate()?;
        let system_a = compile(&params.constraints_a, params.n_terms)?;
        let system_b = compile(&params.constraints_b, params.n_terms)?;
        Ok(Self {
            params,
            system_a,
            system_b,
        })
    }

    pub fn params(&self) -> &EquilibriumParams {
        &self.params
    }

    pub fn system(&self, trader: Trader) -> &ConstraintSystem {
        match trader {
            Trader::A => &self.system_a,
            Trader::B => &self.system_b,
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.params.n_terms {
            Ok(())
        } else {
            Err(Error::shape(
                "coefficient vector",
                self.params.n_terms,
                x.len(),
            ))
        }
    }

    /// The cost `trader` minimises against `opponent`'s coefficients.
    pub fn cost_form(&self, trader: Trader, opponent: &[f64]) -> Result<QuadraticCost> {
        self.check_len(opponent)?;
        let p = &self.params;
        match trader {
            Trader::A => {
                assemble_cost_a(&StrategyCoeffs::new(opponent.to_vec(), p.lambda)?, p.kappa)
            }
            Trader::B => {
                assemble_cost_b(&StrategyCoeffs::unit(opponent.to_vec())?, p.kappa, p.lambda)
            }
        }
    }

    /// `(cost_a, cost_b)` at the pair `(a, b)`.
    pub fn costs(&self, a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
        let ca = self.cost_form(Trader::A, b)?.evaluate(a)?;
        let cb = self.cost_form(Trader::B, a)?.evaluate(b)?;
        Ok((ca, cb))
    }

    /// Unrelaxed constrained best response of `trader`. Any solver status other
    /// than optimal is returned as-is in the report.
    pub fn best_response(
        &self,
        trader: Trader,
        opponent: &[f64],
        warm_start: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolverReport)> {
        let qc = self.cost_form(trader, opponent)?;
        let settings = match warm_start {
            Some(w) => QpSettings {
                warm_start: Some(w.to_vec()),
                ..self.params.qp.clone()
            },
            None => self.params.qp.clone(),
        };
        let sol = qp::solve(&qc, self.system(trader), &settings)?;
        Ok((sol.x, sol.report))
    }

    fn checked_response(
        &self,
        trader: Trader,
        opponent: &[f64],
        warm_start: Option<&[f64]>,
        iteration: usize,
    ) -> Result<(Vec<f64>, SolverReport)> {
        let (x, report) = self.best_response(trader, opponent, warm_start)?;
        if report.status != SolveStatus::Optimal {
            return Err(Error::Solver {
                trader,
                iteration,
                status: report.status,
            });
        }
        Ok((x, report))
    }

    pub fn run(&self) -> core::result::Result<Equilibrium, RunFailure> {
        let p = &self.params;
        let n = p.n_terms;
        let mut a = p.initial_a.clone().unwrap_or_else(|| vec![0.0; n]);
        let mut b = p.initial_b.clone().unwrap_or_else(|| vec![0.0; n]);
        let mut trace = EquilibriumTrace {
            initial_a: a.clone(),
            initial_b: b.clone(),
            init_cost_a: f64::NAN,
            init_cost_b: f64::NAN,
            records: Vec::new(),
            status: RunStatus::MaxIterations,
        };
        match self.costs(&a, &b) {
            Ok((ca, cb)) => {
                trace.init_cost_a = ca;
                trace.init_cost_b = cb;
            }
            Err(error) => return Err(RunFailure { error, trace }),
        }
        let mut warm_a: Option<Vec<f64>> = None;
        let mut warm_b: Option<Vec<f64>> = None;

        for k in 1..=p.max_iterations {
            let step = (|| -> Result<IterationRecord> {
                let (br_a, report_a) =
                    self.checked_response(Trader::A, &b, warm_a.as_deref(), k)?;
                let next_a = relax(&br_a, &a, p.gamma);
                let (cost_a_mid, cost_b_mid) = self.costs(&next_a, &b)?;
                let (br_b, report_b) =
                    self.checked_response(Trader::B, &next_a, warm_b.as_deref(), k)?;
                let next_b = relax(&br_b, &b, p.gamma);
                let (cost_a, cost_b) = self.costs(&next_a, &next_b)?;
                warm_a = Some(br_a);
                warm_b = Some(br_b);
                Ok(IterationRecord {
                    k,
                    delta_a: sup_diff(&next_a, &a),
                    delta_b: sup_diff(&next_b, &b),
                    a: next_a,
                    b: next_b,
                    cost_a_mid,
                    cost_b_mid,
                    cost_a,
                    cost_b,
                    report_a,
                    report_b,
                })
            })();
            let record = match step {
                Ok(r) => r,
                Err(error) => return Err(RunFailure { error, trace }),
            };
            a.clone_from(&record.a);
            b.clone_from(&record.b);
            let blown_up = a
                .iter()
                .chain(&b)
                .any(|v| !(libm::fabs(*v) <= DIVERGENCE_CEILING))
                || !(record.cost_a.is_finite() && record.cost_b.is_finite());
            let converged = record.delta_a.max(record.delta_b) < p.tolerance;
            trace.records.push(record);
            if blown_up {
                trace.status = RunStatus::Diverged;
                break;
            }
            if converged {
                trace.status = RunStatus::Converged;
                break;
            }
        }
        let wrap = |x: Vec<f64>, scale: f64| StrategyCoeffs::new(x, scale);
        match (wrap(a, 1.0), wrap(b, p.lambda)) {
            (Ok(a), Ok(b)) => Ok(Equilibrium { a, b, trace }),
            (Err(error), _) | (_, Err(error)) => Err(RunFailure { error, trace }),
        }
    }

    /// `max(‖a - BR_A(b)‖∞, ‖b - BR_B(a)‖∞)`.
    pub fn fixed_point_residual(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(a)?;
        self.check_len(b)?;
        let (br_a, _) = self.checked_response(Trader::A, b, None, 0)?;
        let (br_b, _) = self.checked_response(Trader::B, a, None, 0)?;
        Ok(sup_diff(a, &br_a).max(sup_diff(b, &br_b)))
    }
}

/// One unrelaxed best response of `own` against `opponent`, using the
/// constraint list for `own` from `params`.
pub fn best_response_step(
    own: Trader,
    opponent: &[f64],
    params: &EquilibriumParams,
) -> Result<(Vec<f64>, SolverReport)> {
    Engine::new(params.clone())?.best_response(own, opponent, None)
}

pub fn run(params: &EquilibriumParams) -> core::result::Result<Equilibrium, RunFailure> {
    let engine = Engine::new(params.clone()).map_err(|error| RunFailure {
        error,
        trace: EquilibriumTrace {
            initial_a: Vec::new(),
            initial_b: Vec::new(),
            init_cost_a: f64::NAN,
            init_cost_b: f64::NAN,
            records: Vec::new(),
            status: RunStatus::MaxIterations,
        },
    })?;
    engine.run()
}

pub fn fixed_point_residual(a: &[f64], b: &[f64], params: &EquilibriumParams) -> Result<f64> {
    Engine::new(params.clone())?.fixed_point_residual(a, b)
}
