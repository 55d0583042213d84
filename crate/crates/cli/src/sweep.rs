//! Parameter grids: one scenario per (κ, λ, γ, N) combination.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{Mode, ScenarioConfig};
use crate::error::CliError;
use crate::format::fmt_num;
use crate::scenario::{run_scenario, Outcome};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub kappa: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub n_terms: usize,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!(
            "cell_{:03}_k{}_l{}_g{}_n{}",
            self.index,
            fmt_num(self.kappa),
            fmt_num(self.lambda),
            fmt_num(self.gamma),
            self.n_terms
        )
    }
}

/// Cartesian product in the order κ, λ, γ, N (N varies fastest). A missing
/// list stands for the base value; an empty list yields no cells.
pub fn cells(config: &ScenarioConfig) -> Vec<Cell> {
    let grid = config.sweep.clone().unwrap_or_default();
    let kappas = grid.kappa.unwrap_or_else(|| vec![config.kappa]);
    let lambdas = grid.lambda.unwrap_or_else(|| vec![config.lambda]);
    let gammas = grid.gamma.unwrap_or_else(|| vec![config.gamma]);
    let ns = grid.n_terms.unwrap_or_else(|| vec![config.n_terms]);
    let mut out = Vec::new();
    for &kappa in &kappas {
        for &lambda in &lambdas {
            for &gamma in &gammas {
                for &n_terms in &ns {
                    out.push(Cell {
                        index: out.len(),
                        kappa,
                        lambda,
                        gamma,
                        n_terms,
                    });
                }
            }
        }
    }
    out
}

fn cell_config(base: &ScenarioConfig, cell: &Cell) -> ScenarioConfig {
    let mut c = base.clone();
    c.kappa = cell.kappa;
    c.lambda = cell.lambda;
    c.gamma = cell.gamma;
    c.n_terms = cell.n_terms;
    c.sweep = None;
    if c.mode == Mode::Sweep {
        c.mode = Mode::Equilibrium;
    }
    c
}

/// Runs every cell (in parallel) into its own sub-directory of `out`, then
/// writes `summary.csv`. Returns 0 if every cell succeeded, else 3.
pub fn run_sweep(config: &ScenarioConfig, out: &Path) -> Result<i32, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let cells = cells(config);
    let results: Vec<(Cell, Result<Outcome, CliError>)> = cells
        .into_par_iter()
        .map(|cell| {
            let dir: PathBuf = out.join(cell.dir_name());
            let result = run_scenario(&cell_config(config, &cell), &dir);
            (cell, result)
        })
        .collect();

    let path = out.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "cell",
        "kappa",
        "lambda",
        "gamma",
        "n_terms",
        "status",
        "iterations",
        "l2_a",
        "l2_b",
        "cost_a_final",
        "cost_b_final",
        "exit_code",
    ])?;
    let mut exit = 0;
    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    for (cell, result) in &results {
        let mut row = vec![
            cell.dir_name(),
            fmt_num(cell.kappa),
            fmt_num(cell.lambda),
            fmt_num(cell.gamma),
            cell.n_terms.to_string(),
        ];
        match result {
            Ok(o) => {
                row.extend([
                    o.status.clone(),
                    o.iterations.to_string(),
                    opt(o.l2_a),
                    opt(o.l2_b),
                    fmt_num(o.cost_a_final),
                    fmt_num(o.cost_b_final),
                    o.exit_code.to_string(),
                ]);
                exit = exit.max(o.exit_code);
            }
            Err(e) => {
                let code = e.exit_code();
                row.extend([
                    "error".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    code.to_string(),
                ]);
                exit = exit.max(3);
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(exit)
}
