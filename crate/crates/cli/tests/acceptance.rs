//! Acceptance checks, one pass/fail line per criterion.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use posbuild_core::analysis::compare_to_closed_form;
use posbuild_core::closed_form::{
    equilibrium_pair, BestResponseEager, BestResponseRiskAverse, BestResponseRiskNeutral,
    PassiveSpec,
};
use posbuild_core::constraints::{Bound, ConstraintKind, ConstraintSpec, DEFAULT_GRID_POINTS};
use posbuild_core::cost::{assemble_cost, quadrature_cost, Trader};
use posbuild_core::equilibrium::{run, Engine, EquilibriumParams, RunStatus};
use posbuild_core::qp::SolveStatus;
use posbuild_core::quadrature::{integrate_vec, SimpsonRule};
use posbuild_core::strategy::l2_distance_quadrature;
use posbuild_core::trig::{cos_pi, sin_pi, trig_integral, TrigKind, TrigTable};
use posbuild_core::{Curve, StrategyCoeffs};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use tempfile::TempDir;

const ORACLE_CASES: u32 = 100;
const ORACLE_N: usize = 12;
const ORACLE_RANGE: f64 = 0.3;
const ORACLE_TOL: f64 = 1e-6;

const GRADIENT_POINTS: u32 = 20;
const GRADIENT_STEP: f64 = 1e-3;
const GRADIENT_REL_TOL: f64 = 1e-5;

const BR_NEUTRAL_N: usize = 20;
const BR_NEUTRAL_TOL: f64 = 1e-4;
const BR_SIGMA_N: usize = 40;
const BR_SIGMA_TOL: f64 = 1e-3;

const EQ_MAX_ITERATIONS: usize = 20;
const EQ_L2_TOL: f64 = 5e-3;
const EQ_COSTS: (f64, f64) = (8.2, 46.2);
const EQ_COST_REL_TOL: f64 = 0.05;

const N_RATIO_RANGE: (f64, f64) = (5.0, 25.0);
const N_RATIO_GAMMA: f64 = 0.2;

const SLOW_GAMMA_WINDOW: (usize, usize) = (50, 80);
const MID_GAMMA_MAX_ITERATIONS: usize = 1000;
const FULL_STEP_MAX_ITERATIONS: usize = 100;

const RISK_NEUTRAL_COST: f64 = 27.0;

const CONSTRAINT_CASES: u32 = 8;
const GRID_TOL: f64 = 1e-8;
const BETWEEN_GRID_TOL: f64 = 1e-3;
const REFINEMENT: usize = 10;

const TRIG_MAX_INDEX: i64 = 20;
const TRIG_TOL: f64 = 1e-10;
const CROSS_N: usize = 15;

const FIXED_POINT_TOL: f64 = 1e-3;
const ONE_STEP_TOL: f64 = 1e-4;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn oracle_equivalence() -> Check {
    let strategy = (
        vec(-ORACLE_RANGE..ORACLE_RANGE, ORACLE_N),
        vec(-ORACLE_RANGE..ORACLE_RANGE, ORACLE_N),
        prop::sample::select(vec![0.0, 0.5, 5.0]),
        prop::sample::select(vec![0.5, 1.0, 5.0]),
    );
    let worst = Cell::new(0.0_f64);
    let result = runner(ORACLE_CASES).run(&strategy, |(a, b, kappa, lambda)| {
        let a = StrategyCoeffs::unit(a).unwrap();
        let b = StrategyCoeffs::new(b, lambda).unwrap();
        let ca = assemble_cost(Trader::A, &b, kappa, lambda)
            .unwrap()
            .evaluate(a.coeffs())
            .unwrap();
        let cb = assemble_cost(Trader::B, &a, kappa, lambda)
            .unwrap()
            .evaluate(b.coeffs())
            .unwrap();
        let qa = quadrature_cost(&a, &b, kappa, lambda, Trader::A).unwrap();
        let qb = quadrature_cost(&a, &b, kappa, lambda, Trader::B).unwrap();
        let gap = (ca - qa).abs().max((cb - qb).abs());
        worst.set(worst.get().max(gap));
        prop_assert!(
            gap < ORACLE_TOL,
            "gap {gap} at kappa {kappa}, lambda {lambda}"
        );
        Ok(())
    });
    result.map_err(err)?;
    Ok(format!(
        "{ORACLE_CASES} pairs, worst gap {:.2e} < {ORACLE_TOL:e}",
        worst.get()
    ))
}

fn gradient_check() -> Check {
    let strategy = (
        vec(-ORACLE_RANGE..ORACLE_RANGE, ORACLE_N),
        vec(-ORACLE_RANGE..ORACLE_RANGE, ORACLE_N),
        prop::sample::select(vec![0.0, 0.5, 5.0]),
        prop::sample::select(vec![0.5, 1.0, 5.0]),
        any::<bool>(),
    );
    let worst = Cell::new(0.0_f64);
    let result = runner(GRADIENT_POINTS).run(&strategy, |(own, opp, kappa, lambda, is_a)| {
        let trader = if is_a { Trader::A } else { Trader::B };
        let opp_scale = if is_a { lambda } else { 1.0 };
        let opponent = StrategyCoeffs::new(opp, opp_scale).unwrap();
        let form = assemble_cost(trader, &opponent, kappa, lambda).unwrap();
        let grad = form.gradient(&own).unwrap();
        let oracle = |x: &[f64]| {
            let mine = StrategyCoeffs::unit(x.to_vec()).unwrap();
            match trader {
                Trader::A => quadrature_cost(&mine, &opponent, kappa, lambda, trader).unwrap(),
                Trader::B => quadrature_cost(&opponent, &mine, kappa, lambda, trader).unwrap(),
            }
        };
        let scale = grad.iter().fold(1.0_f64, |m, g| m.max(g.abs()));
        for i in 0..own.len() {
            let (mut up, mut down) = (own.clone(), own.clone());
            up[i] += GRADIENT_STEP;
            down[i] -= GRADIENT_STEP;
            let fd = (oracle(&up) - oracle(&down)) / (2.0 * GRADIENT_STEP);
            let rel = (fd - grad[i]).abs() / scale;
            worst.set(worst.get().max(rel));
            prop_assert!(
                rel < GRADIENT_REL_TOL,
                "component {i}: fd {fd} vs {}",
                grad[i]
            );
        }
        Ok(())
    });
    result.map_err(err)?;
    Ok(format!(
        "{GRADIENT_POINTS} points, worst relative error {:.2e} < {GRADIENT_REL_TOL:e}",
        worst.get()
    ))
}

fn qp_response(
    opponent: &dyn Curve,
    kappa: f64,
    lambda: f64,
    n: usize,
) -> Result<StrategyCoeffs, String> {
    let b = StrategyCoeffs::fit(opponent, n, lambda).map_err(err)?;
    let engine = Engine::new(EquilibriumParams::new(kappa, lambda, n, 1.0)).map_err(err)?;
    let (x, report) = engine
        .best_response(Trader::A, b.coeffs(), None)
        .map_err(err)?;
    if report.status != SolveStatus::Optimal {
        return Err(format!("solver status {:?}", report.status));
    }
    StrategyCoeffs::unit(x).map_err(err)
}

fn closed_form_best_response() -> Check {
    let neutral = qp_response(&PassiveSpec::risk_neutral(), 1.0, 5.0, BR_NEUTRAL_N)?;
    let d_neutral = l2_distance_quadrature(
        &neutral,
        &BestResponseRiskNeutral::new(1.0, 5.0).map_err(err)?,
    )
    .map_err(err)?;
    let averse = qp_response(
        &PassiveSpec::risk_averse(3.0).map_err(err)?,
        0.5,
        1.0,
        BR_SIGMA_N,
    )?;
    let d_averse = l2_distance_quadrature(
        &averse,
        &BestResponseRiskAverse::new(0.5, 1.0, 3.0).map_err(err)?,
    )
    .map_err(err)?;
    let eager = qp_response(&PassiveSpec::eager(3.0).map_err(err)?, 0.5, 1.0, BR_SIGMA_N)?;
    let d_eager =
        l2_distance_quadrature(&eager, &BestResponseEager::new(0.5, 1.0, 3.0).map_err(err)?)
            .map_err(err)?;
    ensure(
        d_neutral < BR_NEUTRAL_TOL && d_averse < BR_SIGMA_TOL && d_eager < BR_SIGMA_TOL,
        format!("L2 risk-neutral {d_neutral:.2e}, risk-averse {d_averse:.2e}, eager {d_eager:.2e}"),
    )
}

fn equilibrium_vs_closed_form() -> Check {
    let eq = run(&EquilibriumParams::new(1.0, 5.0, 20, 0.8)).map_err(err)?;
    let rep = compare_to_closed_form(&eq.a, &eq.b, 1.0, 5.0).map_err(err)?;
    let (ca, cb) = eq.trace.final_costs();
    let iterations = eq.trace.iterations();
    let costs_ok = (ca / EQ_COSTS.0 - 1.0).abs() <= EQ_COST_REL_TOL
        && (cb / EQ_COSTS.1 - 1.0).abs() <= EQ_COST_REL_TOL;
    ensure(
        eq.trace.status == RunStatus::Converged
            && iterations <= EQ_MAX_ITERATIONS
            && rep.l2_a < EQ_L2_TOL
            && rep.l2_b < EQ_L2_TOL
            && costs_ok,
        format!(
            "{:?} in {iterations} iterations, L2 ({:.2e}, {:.2e}), costs ({ca:.4}, {cb:.4})",
            eq.trace.status, rep.l2_a, rep.l2_b
        ),
    )
}

fn n_dependence() -> Check {
    let l2 = |n: usize| -> Result<f64, String> {
        let eq = run(&EquilibriumParams::new(20.0, 1.0, n, N_RATIO_GAMMA)).map_err(err)?;
        if eq.trace.status != RunStatus::Converged {
            return Err(format!("N={n} ended {:?}", eq.trace.status));
        }
        let rep = compare_to_closed_form(&eq.a, &eq.b, 20.0, 1.0).map_err(err)?;
        Ok(rep.l2_a.max(rep.l2_b))
    };
    let (coarse, fine) = (l2(10)?, l2(30)?);
    let ratio = coarse / fine;
    ensure(
        ratio > N_RATIO_RANGE.0 && ratio < N_RATIO_RANGE.1,
        format!("L2 N=10 {coarse:.3e}, N=30 {fine:.3e}, ratio {ratio:.2}"),
    )
}

fn gamma_phases() -> Check {
    let slow = run(&EquilibriumParams::new(25.0, 1.0, 35, 0.2)).map_err(err)?;
    let mut mid_params = EquilibriumParams::new(25.0, 1.0, 35, 0.6);
    mid_params.max_iterations = MID_GAMMA_MAX_ITERATIONS;
    let mid = run(&mid_params).map_err(err)?;
    let mut full_params = EquilibriumParams::new(25.0, 1.0, 35, 1.0);
    full_params.max_iterations = FULL_STEP_MAX_ITERATIONS;
    let full = run(&full_params).map_err(err)?;
    let slow_n = slow.trace.iterations();
    ensure(
        slow.trace.status == RunStatus::Converged
            && (SLOW_GAMMA_WINDOW.0..=SLOW_GAMMA_WINDOW.1).contains(&slow_n)
            && mid.trace.status == RunStatus::Converged
            && full.trace.status != RunStatus::Converged,
        format!(
            "gamma 0.2: {:?} in {slow_n}; gamma 0.6: {:?} in {} (cap {MID_GAMMA_MAX_ITERATIONS}); gamma 1.0: {:?} after {} (cap {FULL_STEP_MAX_ITERATIONS})",
            slow.trace.status,
            mid.trace.status,
            mid.trace.iterations(),
            full.trace.status,
            full.trace.iterations()
        ),
    )
}

fn cost_inversion() -> Check {
    let eq = run(&EquilibriumParams::new(25.0, 1.0, 35, 0.2)).map_err(err)?;
    let (ia, ib) = (eq.trace.init_cost_a, eq.trace.init_cost_b);
    let (ca, cb) = eq.trace.final_costs();
    ensure(
        eq.trace.status == RunStatus::Converged
            && (ia - RISK_NEUTRAL_COST).abs() < 1e-12
            && (ib - RISK_NEUTRAL_COST).abs() < 1e-12
            && ca > RISK_NEUTRAL_COST
            && cb > RISK_NEUTRAL_COST,
        format!("init ({ia}, {ib}), equilibrium ({ca:.4}, {cb:.4})"),
    )
}

fn constraint_kinds() -> Vec<ConstraintKind> {
    vec![
        ConstraintKind::Overbuy { rho: 0.1 },
        ConstraintKind::Channel {
            lower: Bound::custom(|t| t - 0.05),
            upper: Bound::custom(|t| t + 0.05),
        },
        ConstraintKind::EndStrategy {
            t_star: 0.8,
            c: 0.95,
        },
        ConstraintKind::ShortSellFloor { floor: 0.0 },
        ConstraintKind::NoSell,
        ConstraintKind::UpperPath(Bound::Passive(PassiveSpec::eager(2.0).unwrap())),
        ConstraintKind::LowerPath(Bound::Passive(PassiveSpec::risk_averse(2.0).unwrap())),
    ]
}

fn excess(kind: &ConstraintKind, a: &StrategyCoeffs, t: f64) -> f64 {
    let v = a.value(t);
    match kind {
        ConstraintKind::UpperPath(c) => v - c.at(t),
        ConstraintKind::LowerPath(c) => c.at(t) - v,
        ConstraintKind::Channel { lower, upper } => (v - upper.at(t)).max(lower.at(t) - v),
        ConstraintKind::Overbuy { rho } => v - 1.0 - rho,
        ConstraintKind::EndStrategy { c, .. } => (v - 1.0).max(c - v),
        ConstraintKind::ShortSellFloor { floor } => floor - v,
        ConstraintKind::NoSell => -a.rate(t),
    }
}

fn constraint_satisfaction() -> Check {
    let strategy = (
        prop::sample::select(vec![10usize, 20, 30, 40]),
        0.5f64..15.0,
        0.5f64..8.0,
        1.0f64..6.0,
        any::<bool>(),
    );
    let (worst_grid, worst_between) = (Cell::new(0.0_f64), Cell::new(0.0_f64));
    let result = runner(CONSTRAINT_CASES).run(&strategy, |(n, kappa, lambda, sigma, eager)| {
        let opponent = if eager {
            PassiveSpec::eager(sigma).unwrap()
        } else {
            PassiveSpec::risk_averse(sigma).unwrap()
        };
        let b = StrategyCoeffs::fit(&opponent, n, lambda).unwrap();
        for kind in constraint_kinds() {
            let spec = ConstraintSpec::new(kind.clone(), DEFAULT_GRID_POINTS).unwrap();
            let mut params = EquilibriumParams::new(kappa, lambda, n, 1.0);
            params.constraints_a.push(spec.clone());
            let engine = Engine::new(params).unwrap();
            let (x, report) = engine.best_response(Trader::A, b.coeffs(), None).unwrap();
            prop_assert_eq!(report.status, SolveStatus::Optimal);
            let a = StrategyCoeffs::unit(x).unwrap();
            let on_grid = engine.system(Trader::A).max_violation(a.coeffs()).unwrap();
            let (lo, hi) = spec.grid().range();
            let m = REFINEMENT * spec.grid().len();
            let between = (0..m)
                .map(|i| excess(&kind, &a, lo + (hi - lo) * i as f64 / (m - 1) as f64))
                .fold(0.0_f64, f64::max);
            worst_grid.set(worst_grid.get().max(on_grid));
            worst_between.set(worst_between.get().max(between));
            prop_assert!(
                on_grid <= GRID_TOL,
                "{}: grid violation {}",
                kind.name(),
                on_grid
            );
            prop_assert!(
                between < BETWEEN_GRID_TOL,
                "{}: between-grid violation {}",
                kind.name(),
                between
            );
        }
        Ok(())
    });
    result.map_err(err)?;
    Ok(format!(
        "7 kinds x {CONSTRAINT_CASES} cases, K={DEFAULT_GRID_POINTS}: grid {:.2e}, between-grid {:.2e}",
        worst_grid.get(),
        worst_between.get()
    ))
}

fn trig_identities() -> Check {
    let m_max = TRIG_MAX_INDEX as usize;
    let idx = |n: usize, m: usize| n * (m_max + 1) + m;
    let pairs = (m_max + 1) * (m_max + 1);
    // Single-index kinds use m = 0; the product kinds cover every (n, m).
    let dim = 5 * pairs;
    let rule = SimpsonRule::new(1024, 1e-12, 1 << 22);
    let est = integrate_vec(
        dim,
        |t, out| {
            for n in 0..=m_max {
                let (sn, cn) = (sin_pi(n as f64 * t), cos_pi(n as f64 * t));
                for m in 0..=m_max {
                    let (sm, cm) = (sin_pi(m as f64 * t), cos_pi(m as f64 * t));
                    let k = idx(n, m);
                    out[k] = sn;
                    out[pairs + k] = cn;
                    out[2 * pairs + k] = t * cn;
                    out[3 * pairs + k] = cn * cm;
                    out[4 * pairs + k] = cn * sm;
                }
            }
        },
        0.0,
        1.0,
        &rule,
    )
    .map_err(err)?;
    let kinds = [
        TrigKind::Sin,
        TrigKind::Cos,
        TrigKind::TCos,
        TrigKind::CosCos,
        TrigKind::CosSin,
    ];
    let mut worst: f64 = 0.0;
    for (slot, kind) in kinds.iter().enumerate() {
        for n in 0..=TRIG_MAX_INDEX {
            for m in 0..=TRIG_MAX_INDEX {
                let exact = trig_integral(*kind, n, m).map_err(err)?;
                let q = est.values[slot * pairs + idx(n as usize, m as usize)];
                worst = worst.max((q - exact).abs());
            }
        }
    }
    let table = TrigTable::new(m_max);
    for n in 1..=m_max {
        let q_sin = est.values[idx(n, 0)];
        worst = worst.max((table.sin_integral(n) - q_sin).abs());
        for m in 1..=m_max {
            // n π ∫ cos(nπt) sin(mπt) dt = 2 w(n, m)
            let q = n as f64 * PI * est.values[4 * pairs + idx(n, m)];
            worst = worst.max((2.0 * table.cross_weight(n, m) - q).abs());
        }
    }
    let table15 = TrigTable::new(CROSS_N);
    let x: Vec<f64> = (1..=CROSS_N)
        .map(|i| (i as f64 * 0.731).sin() / i as f64)
        .collect();
    let self_cross = table15.cross_form(&x, &x);
    ensure(
        worst < TRIG_TOL && self_cross == 0.0,
        format!("n, m <= {TRIG_MAX_INDEX}: worst table error {worst:.2e}; self cross-sum at N={CROSS_N} = {self_cross}"),
    )
}

fn fixed_point() -> Check {
    let (ea, eb) = equilibrium_pair(1.0, 5.0).map_err(err)?;
    let a = StrategyCoeffs::fit(&ea, 20, 1.0).map_err(err)?;
    let b = StrategyCoeffs::fit(&eb, 20, 5.0).map_err(err)?;
    let mut params = EquilibriumParams::new(1.0, 5.0, 20, 1.0);
    let residual = Engine::new(params.clone())
        .map_err(err)?
        .fixed_point_residual(a.coeffs(), b.coeffs())
        .map_err(err)?;
    params.initial_a = Some(a.coeffs().to_vec());
    params.initial_b = Some(b.coeffs().to_vec());
    params.max_iterations = 1;
    let eq = run(&params).map_err(err)?;
    let rec = eq.trace.records.first().ok_or("no iteration recorded")?;
    let movement = rec.delta_a.max(rec.delta_b);
    ensure(
        residual < FIXED_POINT_TOL && movement < ONE_STEP_TOL,
        format!("residual {residual:.2e}, one-step movement {movement:.2e}"),
    )
}

fn collect_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let dir = TempDir::new().map_err(err)?;
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"mode": "sweep", "kappa": 5, "lambda": 1, "n_terms": 12,
            "constraints_a": [{"kind": "overbuy", "rho": 0.2}],
            "sweep": {"gamma": [0.4, 1.0], "kappa": [2, 5], "n_terms": [8, 12]}}"#,
    )
    .map_err(err)?;
    let mut roots = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_posbuild"))
            .args([
                "sweep",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--quiet",
            ])
            .status()
            .map_err(err)?;
        if status.code() != Some(0) {
            return Err(format!("sweep exited with {status}"));
        }
        roots.push(out);
    }
    let files = collect_files(&roots[0]);
    if files != collect_files(&roots[1]) {
        return Err("the two runs produced different file sets".into());
    }
    for f in &files {
        if fs::read(roots[0].join(f)).map_err(err)? != fs::read(roots[1].join(f)).map_err(err)? {
            return Err(format!("{} differs", f.display()));
        }
    }
    Ok(format!(
        "{} files byte-identical across two sweep runs",
        files.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("gradient check", gradient_check),
        ("closed-form best response", closed_form_best_response),
        ("equilibrium vs closed form", equilibrium_vs_closed_form),
        ("N-dependence", n_dependence),
        ("relaxation phases", gamma_phases),
        ("no-collusion cost inversion", cost_inversion),
        ("constraint satisfaction", constraint_satisfaction),
        ("trig identities", trig_identities),
        ("fixed-point property", fixed_point),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
