//! One scenario run: solve, then write the four artifacts.

use std::fs;
use std::path::Path;

use posbuild_core::analysis::{compare_to_closed_form, state_space_series, Phase, StatePoint};
use posbuild_core::closed_form::{
    equilibrium_pair, BestResponseEager, BestResponseRiskAverse, BestResponseRiskNeutral,
};
use posbuild_core::cost::Trader;
use posbuild_core::equilibrium::{Engine, EquilibriumParams, RunStatus};
use posbuild_core::qp::{SolveStatus, SolverReport};
use posbuild_core::strategy::l2_distance_quadrature;
use posbuild_core::trig::sin_pi;
use posbuild_core::{Curve, StrategyCoeffs};
use serde_json::{json, Value};

use crate::config::{Adversary, Mode, PassiveName, ScenarioConfig};
use crate::error::CliError;
use crate::format::{fmt_num, num, nums};

pub const STRATEGIES_FILE: &str = "strategies.csv";
pub const STATE_SPACE_FILE: &str = "state_space.csv";
pub const REPORT_FILE: &str = "report.json";
pub const COEFFICIENTS_FILE: &str = "coefficients.json";

/// What a finished scenario reports back to the caller and to sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: String,
    pub exit_code: i32,
    pub iterations: usize,
    pub l2_a: Option<f64>,
    pub l2_b: Option<f64>,
    pub cost_a_final: f64,
    pub cost_b_final: f64,
}

type BoxCurve = Box<dyn Curve + Send + Sync>;

/// Everything the writers need, independent of the mode that produced it.
struct Artifacts {
    a: Vec<f64>,
    b: Vec<f64>,
    a_reference: Option<BoxCurve>,
    b_reference: Option<BoxCurve>,
    /// Direct curves for closed_form mode; the coefficients are then only a fit.
    a_curve: Option<BoxCurve>,
    b_curve: Option<BoxCurve>,
    states: Vec<StatePoint>,
    status: String,
    exit_code: i32,
    iterations: usize,
    init_costs: Option<(f64, f64)>,
    final_costs: (f64, f64),
    comparison: Option<Value>,
    l2: (Option<f64>, Option<f64>),
    solver: Value,
    error: Option<String>,
}

pub fn params_for(config: &ScenarioConfig) -> Result<EquilibriumParams, CliError> {
    let mut params =
        EquilibriumParams::new(config.kappa, config.lambda, config.n_terms, config.gamma);
    params.tolerance = config.tolerance;
    params.max_iterations = config.max_iterations;
    params.constraints_a = config.specs_a()?;
    params.constraints_b = config.specs_b()?;
    params.validate()?;
    Ok(params)
}

/// Runs `config` in its own mode and writes every artifact into `out`.
/// Solver trouble is reported through the outcome's exit code, not as an error.
pub fn run_scenario(config: &ScenarioConfig, out: &Path) -> Result<Outcome, CliError> {
    let artifacts = match config.mode {
        Mode::BestResponse => best_response(config)?,
        Mode::Equilibrium | Mode::Sweep => equilibrium(config)?,
        Mode::ClosedForm => closed_form(config)?,
    };
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_strategies(config, &artifacts, &out.join(STRATEGIES_FILE))?;
    write_state_space(&artifacts.states, &out.join(STATE_SPACE_FILE))?;
    write_json(&report_json(config, &artifacts), &out.join(REPORT_FILE))?;
    write_json(
        &coefficients_json(config, &artifacts),
        &out.join(COEFFICIENTS_FILE),
    )?;
    Ok(Outcome {
        status: artifacts.status,
        exit_code: artifacts.exit_code,
        iterations: artifacts.iterations,
        l2_a: artifacts.l2.0,
        l2_b: artifacts.l2.1,
        cost_a_final: artifacts.final_costs.0,
        cost_b_final: artifacts.final_costs.1,
    })
}

fn closed_form_best_response(config: &ScenarioConfig) -> Result<Option<BoxCurve>, CliError> {
    let Some(Adversary::Passive(name)) = &config.adversary else {
        return Ok(None);
    };
    let (k, l) = (config.kappa, config.lambda);
    let sigma = || {
        config.sigma.ok_or_else(|| CliError::Config {
            key: "sigma".into(),
            message: "required by this adversary".into(),
        })
    };
    Ok(Some(match name {
        PassiveName::RiskNeutral => Box::new(BestResponseRiskNeutral::new(k, l)?),
        PassiveName::RiskAverse => Box::new(BestResponseRiskAverse::new(k, l, sigma()?)?),
        PassiveName::Eager => Box::new(BestResponseEager::new(k, l, sigma()?)?),
    }))
}

fn best_response(config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let params = params_for(config)?;
    let n = params.n_terms;
    let b = config
        .adversary_coeffs(n, config.lambda)?
        .expect("validated: best_response has an adversary");
    let engine = Engine::new(params)?;
    let a0 = vec![0.0; n];
    let init = engine.costs(&a0, b.coeffs())?;
    let (a, report) = engine.best_response(Trader::A, b.coeffs(), None)?;
    let ok = report.status == SolveStatus::Optimal;
    let final_costs = engine.costs(&a, b.coeffs())?;
    let reference = closed_form_best_response(config)?;
    let l2_a = match &reference {
        Some(r) if config.constraints_a.is_empty() => Some(l2_distance_quadrature(
            &StrategyCoeffs::unit(a.clone())?,
            r.as_ref(),
        )?),
        _ => None,
    };
    let comparison =
        l2_a.map(|d| json!({ "reference": "closed_form_best_response", "l2_a": num(d) }));
    Ok(Artifacts {
        b: b.coeffs().to_vec(),
        a,
        a_reference: reference,
        b_reference: config.adversary_curve()?,
        a_curve: None,
        b_curve: None,
        states: vec![
            StatePoint {
                phase: Phase::Init,
                iteration: 0,
                cost_a: init.0,
                cost_b: init.1,
            },
            StatePoint {
                phase: Phase::StepA,
                iteration: 1,
                cost_a: final_costs.0,
                cost_b: final_costs.1,
            },
        ],
        status: status_name(report.status).to_string(),
        exit_code: if ok { 0 } else { 3 },
        iterations: 1,
        init_costs: Some(init),
        final_costs,
        comparison,
        l2: (l2_a, None),
        solver: json!({ "a": solver_json(&report), "b": Value::Null }),
        error: None,
    })
}

fn equilibrium(config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let params = params_for(config)?;
    let (kappa, lambda) = (params.kappa, params.lambda);
    let engine = Engine::new(params)?;
    let (trace, error) = match engine.run() {
        Ok(eq) => (eq.trace, None),
        Err(failure) => (failure.trace, Some(failure.error.to_string())),
    };
    let (a, b) = trace.final_coeffs();
    let (a, b) = (a.to_vec(), b.to_vec());
    let (ea, eb) = equilibrium_pair(kappa, lambda)?;
    let mut l2 = (None, None);
    let mut comparison = None;
    if let (Ok(ua), Ok(ub)) = (
        StrategyCoeffs::unit(a.clone()),
        StrategyCoeffs::new(b.clone(), lambda),
    ) {
        if let Ok(rep) = compare_to_closed_form(&ua, &ub, kappa, lambda) {
            l2 = (Some(rep.l2_a), Some(rep.l2_b));
            comparison = Some(json!({
                "reference": "closed_form_equilibrium",
                "kappa": num(rep.kappa),
                "lambda": num(rep.lambda),
                "n_terms": rep.n_terms,
                "l2_a": num(rep.l2_a),
                "l2_b": num(rep.l2_b),
            }));
        }
    }
    let status = if error.is_some() {
        "solver_failure"
    } else {
        run_status_name(trace.status)
    };
    let exit_code = if error.is_none() && trace.status == RunStatus::Converged {
        0
    } else {
        3
    };
    let last = trace.records.last();
    let solver = json!({
        "a": last.map(|r| solver_json(&r.report_a)).unwrap_or(Value::Null),
        "b": last.map(|r| solver_json(&r.report_b)).unwrap_or(Value::Null),
    });
    Ok(Artifacts {
        a,
        b,
        a_reference: Some(Box::new(ea)),
        b_reference: Some(Box::new(eb)),
        a_curve: None,
        b_curve: None,
        states: state_space_series(&trace),
        status: status.to_string(),
        exit_code,
        iterations: trace.iterations(),
        init_costs: Some((trace.init_cost_a, trace.init_cost_b)),
        final_costs: trace.final_costs(),
        comparison,
        l2,
        solver,
        error,
    })
}

fn closed_form(config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let params = params_for(config)?;
    let (kappa, lambda, n) = (params.kappa, params.lambda, params.n_terms);
    let (a_curve, b_curve): (BoxCurve, BoxCurve) = match closed_form_best_response(config)? {
        Some(br) => (br, config.adversary_curve()?.expect("passive adversary")),
        None => {
            let (ea, eb) = equilibrium_pair(kappa, lambda)?;
            (Box::new(ea), Box::new(eb))
        }
    };
    let a = StrategyCoeffs::fit(a_curve.as_ref(), n, 1.0)?;
    let b = StrategyCoeffs::fit(b_curve.as_ref(), n, lambda)?;
    let engine = Engine::new(params)?;
    let costs = engine.costs(a.coeffs(), b.coeffs())?;
    Ok(Artifacts {
        a: a.into_coeffs(),
        b: b.into_coeffs(),
        a_reference: None,
        b_reference: None,
        a_curve: Some(a_curve),
        b_curve: Some(b_curve),
        states: Vec::new(),
        status: "closed_form".to_string(),
        exit_code: 0,
        iterations: 0,
        init_costs: None,
        final_costs: costs,
        comparison: None,
        l2: (None, None),
        solver: Value::Null,
        error: None,
    })
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::MaxIterations => "max_iterations",
        SolveStatus::NumericFailure => "numeric_failure",
    }
}

pub fn run_status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::Diverged => "diverged",
        RunStatus::MaxIterations => "max_iterations",
    }
}

fn solver_json(r: &SolverReport) -> Value {
    json!({
        "status": status_name(r.status),
        "iterations": r.iterations,
        "primal_residual": num(r.primal_residual),
        "dual_residual": num(r.dual_residual),
        "complementarity": num(r.complementarity),
        "objective": num(r.objective),
    })
}

/// `t + Σ c_n sin(nπt)`, exact at the endpoints even for non-finite
/// coefficients from a divergent run.
fn unit_curve(coeffs: &[f64], t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if t == 1.0 {
        return 1.0;
    }
    t + coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * sin_pi((i + 1) as f64 * t))
        .sum::<f64>()
}

fn output_grid(points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|i| i as f64 / last).collect()
}

fn write_strategies(config: &ScenarioConfig, art: &Artifacts, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t", "a", "b"];
    if art.a_reference.is_some() {
        header.push("a_closed_form");
    }
    if art.b_reference.is_some() {
        header.push("b_closed_form");
    }
    w.write_record(&header)?;
    for t in output_grid(config.grid_points_out) {
        let a = match &art.a_curve {
            Some(c) => c.value(t),
            None => unit_curve(&art.a, t),
        };
        let b = match &art.b_curve {
            Some(c) => c.value(t),
            None => unit_curve(&art.b, t),
        };
        let mut row = vec![fmt_num(t), fmt_num(a), fmt_num(b)];
        row.extend(art.a_reference.iter().map(|c| fmt_num(c.value(t))));
        row.extend(art.b_reference.iter().map(|c| fmt_num(c.value(t))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_state_space(states: &[StatePoint], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["phase", "iteration", "cost_a", "cost_b"])?;
    for p in states {
        w.write_record([
            p.phase.name().to_string(),
            p.iteration.to_string(),
            fmt_num(p.cost_a),
            fmt_num(p.cost_b),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json(value: &Value, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::BestResponse => "best_response",
        Mode::Equilibrium => "equilibrium",
        Mode::ClosedForm => "closed_form",
        Mode::Sweep => "sweep",
    }
}

fn report_json(config: &ScenarioConfig, art: &Artifacts) -> Value {
    let pair = |(x, y): (f64, f64)| json!([num(x), num(y)]);
    json!({
        "mode": mode_name(config.mode),
        "status": art.status,
        "exit_code": art.exit_code,
        "params": {
            "kappa": num(config.kappa),
            "lambda": num(config.lambda),
            "sigma": config.sigma.map(num),
            "n_terms": config.n_terms,
            "gamma": num(config.gamma),
            "tolerance": num(config.tolerance),
            "max_iterations": config.max_iterations,
        },
        "iterations": art.iterations,
        "costs": {
            "init": art.init_costs.map(pair),
            "final": pair(art.final_costs),
        },
        "comparison": art.comparison,
        "solver": art.solver,
        "error": art.error,
    })
}

fn coefficients_json(config: &ScenarioConfig, art: &Artifacts) -> Value {
    json!({
        "n_terms": config.n_terms,
        "kappa": num(config.kappa),
        "lambda": num(config.lambda),
        "gamma": num(config.gamma),
        "a": nums(&art.a),
        "b": nums(&art.b),
    })
}
