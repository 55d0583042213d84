//! Comparison against the closed-form equilibrium and state-space series.

use alloc::vec::Vec;

use crate::closed_form::equilibrium_pair;
use crate::equilibrium::{EquilibriumTrace, RunStatus};
use crate::strategy::{l2_distance_quadrature, StrategyCoeffs};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub kappa: f64,
    pub lambda: f64,
    pub n_terms: usize,
    /// `‖a* - a_eq‖₂` on the unit curves.
    pub l2_a: f64,
    /// `‖b* - b_eq‖₂` on the unit curves.
    pub l2_b: f64,
}

/// L2 distances of the reconstructed `a`, `b` to the closed-form equilibrium,
/// by quadrature.
pub fn compare_to_closed_form(
    a: &StrategyCoeffs,
    b: &StrategyCoeffs,
    kappa: f64,
    lambda: f64,
) -> Result<ComparisonReport> {
    if a.n_terms() != b.n_terms() {
        return Err(Error::shape(
            "compare_to_closed_form",
            a.n_terms(),
            b.n_terms(),
        ));
    }
    let (ea, eb) = equilibrium_pair(kappa, lambda)?;
    Ok(ComparisonReport {
        kappa,
        lambda,
        n_terms: a.n_terms(),
        l2_a: l2_distance_quadrature(a, &ea)?,
        l2_b: l2_distance_quadrature(b, &eb)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Init,
    /// After A's move in iteration `k`.
    StepA,
    /// After B's move in iteration `k`.
    StepB,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::StepA => "step_a",
            Phase::StepB => "step_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint {
    pub phase: Phase,
    pub iteration: usize,
    pub cost_a: f64,
    pub cost_b: f64,
}

/// The init point followed by the step-A and step-B cost pairs of every
/// iteration. An empty trace with unknown initial costs yields no points.
pub fn state_space_series(trace: &EquilibriumTrace) -> Vec<StatePoint> {
    let mut out = Vec::with_capacity(1 + 2 * trace.records.len());
    if trace.init_cost_a.is_nan() && trace.records.is_empty() {
        return out;
    }
    out.push(StatePoint {
        phase: Phase::Init,
        iteration: 0,
        cost_a: trace.init_cost_a,
        cost_b: trace.init_cost_b,
    });
    for r in &trace.records {
        out.push(StatePoint {
            phase: Phase::StepA,
            iteration: r.k,
            cost_a: r.cost_a_mid,
            cost_b: r.cost_b_mid,
        });
        out.push(StatePoint {
            phase: Phase::StepB,
            iteration: r.k,
            cost_a: r.cost_a,
            cost_b: r.cost_b,
        });
    }
    out
}

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub status: RunStatus,
    pub iterations: usize,
    pub cost_a_init: f64,
    pub cost_b_init: f64,
    pub cost_a_final: f64,
    pub cost_b_final: f64,
}

pub fn summarize(trace: &EquilibriumTrace) -> RunSummary {
    let (cost_a_final, cost_b_final) = trace.final_costs();
    RunSummary {
        status: trace.status,
        iterations: trace.iterations(),
        cost_a_init: trace.init_cost_a,
        cost_b_init: trace.init_cost_b,
        cost_a_final,
        cost_b_final,
    }
}
