//! Scenario configuration: one JSON document per run or sweep.

use std::fs;
use std::path::{Path, PathBuf};

use posbuild_core::closed_form::{
    equilibrium_pair, BestResponseEager, BestResponseRiskAverse, BestResponseRiskNeutral,
    PassiveKind, PassiveSpec,
};
use posbuild_core::constraints::{
    compile, Bound, ConstraintKind, ConstraintSpec, DEFAULT_GRID_POINTS,
};
use posbuild_core::equilibrium::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use posbuild_core::{Curve, StrategyCoeffs};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_GRID_POINTS_OUT: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    BestResponse,
    Equilibrium,
    ClosedForm,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassiveName {
    RiskNeutral,
    RiskAverse,
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormId {
    EquilibriumA,
    EquilibriumB,
    BestResponseRiskNeutral,
    BestResponseRiskAverse,
    BestResponseEager,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Adversary {
    Passive(PassiveName),
    ClosedForm(ClosedFormId),
    /// Path to a JSON file holding either a coefficient array or an object with
    /// a `b` (as in `coefficients.json`) or `coefficients` array.
    Coefficients(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum BoundConfig {
    Constant(f64),
    Curve(CurveBound),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CurveBound {
    pub curve: PassiveName,
    #[serde(default)]
    pub sigma: Option<f64>,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_floor() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintConfig {
    Overbuy {
        rho: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    Channel {
        lower: BoundConfig,
        upper: BoundConfig,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    EndStrategy {
        t_star: f64,
        c: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    ShortSell {
        #[serde(default = "default_floor")]
        floor: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    NoSell {
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    PathUpper {
        bound: BoundConfig,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    PathLower {
        bound: BoundConfig,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub kappa: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub n_terms: Option<Vec<usize>>,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_grid_points_out() -> usize {
    DEFAULT_GRID_POINTS_OUT
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub kappa: f64,
    pub lambda: f64,
    #[serde(default)]
    pub sigma: Option<f64>,
    pub n_terms: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub adversary: Option<Adversary>,
    #[serde(default)]
    pub constraints_a: Vec<ConstraintConfig>,
    #[serde(default)]
    pub constraints_b: Vec<ConstraintConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_grid_points_out")]
    pub grid_points_out: usize,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    /// Directory relative paths in the config resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| invalid("<file>", format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            invalid(
                if key == "." { "<root>" } else { &key },
                e.inner().to_string(),
            )
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Range checks that do not depend on the mode's solver.
    pub fn validate(&self) -> Result<(), CliError> {
        check_kappa(self.kappa, "kappa")?;
        check_lambda(self.lambda, "lambda")?;
        check_n_terms(self.n_terms, "n_terms")?;
        check_gamma(self.gamma, "gamma")?;
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("tolerance", "must be finite and > 0"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("sigma", "must be finite and > 0"));
            }
        }
        if self.grid_points_out < 2 {
            return Err(invalid("grid_points_out", "must be >= 2"));
        }
        if self.mode == Mode::BestResponse && self.adversary.is_none() {
            return Err(invalid("adversary", "required in best_response mode"));
        }
        if let Some(sweep) = &self.sweep {
            for (i, k) in sweep.kappa.iter().flatten().enumerate() {
                check_kappa(*k, &format!("sweep.kappa[{i}]"))?;
            }
            for (i, l) in sweep.lambda.iter().flatten().enumerate() {
                check_lambda(*l, &format!("sweep.lambda[{i}]"))?;
            }
            for (i, g) in sweep.gamma.iter().flatten().enumerate() {
                check_gamma(*g, &format!("sweep.gamma[{i}]"))?;
            }
            for (i, n) in sweep.n_terms.iter().flatten().enumerate() {
                check_n_terms(*n, &format!("sweep.n_terms[{i}]"))?;
            }
        }
        for (side, list) in [
            ("constraints_a", &self.constraints_a),
            ("constraints_b", &self.constraints_b),
        ] {
            let specs = to_specs(list, side)?;
            compile(&specs, self.n_terms).map_err(|e| invalid(side, e.to_string()))?;
        }
        Ok(())
    }

    pub fn specs_a(&self) -> Result<Vec<ConstraintSpec>, CliError> {
        to_specs(&self.constraints_a, "constraints_a")
    }

    pub fn specs_b(&self) -> Result<Vec<ConstraintSpec>, CliError> {
        to_specs(&self.constraints_b, "constraints_b")
    }

    fn sigma_for(&self, key: &str) -> Result<f64, CliError> {
        self.sigma
            .ok_or_else(|| invalid("sigma", format!("required by {key}")))
    }

    /// The adversary as a unit curve, if it has a closed form.
    pub fn adversary_curve(&self) -> Result<Option<Box<dyn Curve + Send + Sync>>, CliError> {
        let Some(adv) = &self.adversary else {
            return Ok(None);
        };
        let core = |e: posbuild_core::Error| invalid("adversary", e.to_string());
        Ok(match adv {
            Adversary::Passive(name) => Some(Box::new(self.passive(*name, "adversary")?)),
            Adversary::ClosedForm(id) => {
                let (k, l) = (self.kappa, self.lambda);
                let curve: Box<dyn Curve + Send + Sync> = match id {
                    ClosedFormId::EquilibriumA => Box::new(equilibrium_pair(k, l).map_err(core)?.0),
                    ClosedFormId::EquilibriumB => Box::new(equilibrium_pair(k, l).map_err(core)?.1),
                    ClosedFormId::BestResponseRiskNeutral => {
                        Box::new(BestResponseRiskNeutral::new(k, l).map_err(core)?)
                    }
                    ClosedFormId::BestResponseRiskAverse => Box::new(
                        BestResponseRiskAverse::new(k, l, self.sigma_for("adversary")?)
                            .map_err(core)?,
                    ),
                    ClosedFormId::BestResponseEager => Box::new(
                        BestResponseEager::new(k, l, self.sigma_for("adversary")?).map_err(core)?,
                    ),
                };
                Some(curve)
            }
            Adversary::Coefficients(_) => None,
        })
    }

    /// The adversary's coefficients at `n_terms`, scale `lambda`.
    pub fn adversary_coeffs(
        &self,
        n_terms: usize,
        lambda: f64,
    ) -> Result<Option<StrategyCoeffs>, CliError> {
        let Some(adv) = &self.adversary else {
            return Ok(None);
        };
        if let Adversary::Coefficients(path) = adv {
            let coeffs = read_coefficients(&self.base_dir.join(path))?;
            if coeffs.len() != n_terms {
                return Err(invalid(
                    "adversary",
                    format!(
                        "coefficient file has {} terms, n_terms is {n_terms}",
                        coeffs.len()
                    ),
                ));
            }
            return StrategyCoeffs::new(coeffs, lambda)
                .map(Some)
                .map_err(|e| invalid("adversary", e.to_string()));
        }
        let curve = self.adversary_curve()?.expect("closed-form adversary");
        StrategyCoeffs::fit(curve.as_ref(), n_terms, lambda)
            .map(Some)
            .map_err(CliError::Core)
    }

    pub fn passive(&self, name: PassiveName, key: &str) -> Result<PassiveSpec, CliError> {
        passive_spec(name, self.sigma, key)
    }
}

fn passive_spec(name: PassiveName, sigma: Option<f64>, key: &str) -> Result<PassiveSpec, CliError> {
    let kind = match name {
        PassiveName::RiskNeutral => return Ok(PassiveSpec::risk_neutral()),
        PassiveName::RiskAverse => PassiveKind::RiskAverse,
        PassiveName::Eager => PassiveKind::Eager,
    };
    let sigma = sigma.ok_or_else(|| invalid(key, "sigma is required for this curve"))?;
    PassiveSpec::new(kind, sigma).map_err(|e| invalid(key, e.to_string()))
}

fn read_coefficients(path: &Path) -> Result<Vec<f64>, CliError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum File {
        Bare(Vec<f64>),
        Output { b: Vec<f64> },
        Named { coefficients: Vec<f64> },
    }
    let text = fs::read_to_string(path)
        .map_err(|e| invalid("adversary", format!("cannot read {}: {e}", path.display())))?;
    let file: File = serde_json::from_str(&text)
        .map_err(|e| invalid("adversary", format!("{}: {e}", path.display())))?;
    Ok(match file {
        File::Bare(v) | File::Output { b: v } | File::Named { coefficients: v } => v,
    })
}

impl BoundConfig {
    fn to_bound(&self, key: &str) -> Result<Bound, CliError> {
        match self {
            BoundConfig::Constant(c) => Ok(Bound::Constant(*c)),
            BoundConfig::Curve(c) => passive_spec(c.curve, c.sigma, key).map(Bound::Passive),
        }
    }
}

impl ConstraintConfig {
    pub fn to_spec(&self) -> Result<ConstraintSpec, CliError> {
        let core = |e: posbuild_core::Error| invalid(self.name(), e.to_string());
        let (kind, k) = match self {
            ConstraintConfig::Overbuy { rho, grid_points } => {
                (ConstraintKind::Overbuy { rho: *rho }, *grid_points)
            }
            ConstraintConfig::Channel {
                lower,
                upper,
                grid_points,
            } => (
                ConstraintKind::Channel {
                    lower: lower.to_bound("lower")?,
                    upper: upper.to_bound("upper")?,
                },
                *grid_points,
            ),
            ConstraintConfig::EndStrategy {
                t_star,
                c,
                grid_points,
            } => (
                ConstraintKind::EndStrategy {
                    t_star: *t_star,
                    c: *c,
                },
                *grid_points,
            ),
            ConstraintConfig::ShortSell { floor, grid_points } => (
                ConstraintKind::ShortSellFloor { floor: *floor },
                *grid_points,
            ),
            ConstraintConfig::NoSell { grid_points } => (ConstraintKind::NoSell, *grid_points),
            ConstraintConfig::PathUpper { bound, grid_points } => (
                ConstraintKind::UpperPath(bound.to_bound("bound")?),
                *grid_points,
            ),
            ConstraintConfig::PathLower { bound, grid_points } => (
                ConstraintKind::LowerPath(bound.to_bound("bound")?),
                *grid_points,
            ),
        };
        ConstraintSpec::new(kind, k).map_err(core)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintConfig::Overbuy { .. } => "overbuy",
            ConstraintConfig::Channel { .. } => "channel",
            ConstraintConfig::EndStrategy { .. } => "end_strategy",
            ConstraintConfig::ShortSell { .. } => "short_sell",
            ConstraintConfig::NoSell { .. } => "no_sell",
            ConstraintConfig::PathUpper { .. } => "path_upper",
            ConstraintConfig::PathLower { .. } => "path_lower",
        }
    }
}

fn to_specs(list: &[ConstraintConfig], side: &str) -> Result<Vec<ConstraintSpec>, CliError> {
    list.iter()
        .enumerate()
        .map(|(i, c)| {
            c.to_spec()
                .map_err(|e| invalid(&format!("{side}[{i}]"), e.to_string()))
        })
        .collect()
}

fn check_kappa(v: f64, key: &str) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be finite and >= 0")))
    }
}

fn check_lambda(v: f64, key: &str) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be finite and > 0")))
    }
}

fn check_gamma(v: f64, key: &str) -> Result<(), CliError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be within (0, 1]")))
    }
}

fn check_n_terms(v: usize, key: &str) -> Result<(), CliError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(invalid(key, "must be >= 1"))
    }
}
