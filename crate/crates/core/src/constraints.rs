//! Path and rate constraints compiled to linear inequalities `G x ≤ h` over
//! sine coefficients, sampled on a time grid.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::closed_form::PassiveSpec;
use crate::strategy::Curve;
use crate::trig::{cos_pi, sin_pi};
use crate::{Error, Result};

/// Grid size used when none is given.
pub const DEFAULT_GRID_POINTS: usize = 200;

/// Uniform sample times strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    t_start: f64,
    t_end: f64,
}

/// `k` uniform points on `[max(t_start, δ), min(t_end, 1 - δ)]` with
/// `δ = 1 / (2(k + 1))`. A single point sits at the middle of that range.
pub fn make_grid(k: usize, t_start: f64, t_end: f64) -> Result<TimeGrid> {
    if k == 0 {
        return Err(Error::domain("grid points", 0.0, ">= 1"));
    }
    if !(t_start >= 0.0 && t_start < t_end && t_end <= 1.0) {
        return Err(Error::Precondition(format!(
            "grid range [{t_start}, {t_end}] must satisfy 0 <= start < end <= 1"
        )));
    }
    let delta = 1.0 / (2.0 * (k as f64 + 1.0));
    let lo = t_start.max(delta);
    let hi = t_end.min(1.0 - delta);
    if !(lo <= hi) || (k > 1 && lo == hi) {
        return Err(Error::Precondition(format!(
            "grid range [{t_start}, {t_end}] collapses after clamping to [{lo}, {hi}]"
        )));
    }
    let points = if k == 1 {
        alloc::vec![(lo + hi) / 2.0]
    } else {
        (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect()
    };
    Ok(TimeGrid {
        points,
        t_start,
        t_end,
    })
}

impl TimeGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }
}

/// A bound curve `c(t)` in units of the constrained trader's target.
#[derive(Clone)]
pub enum Bound {
    Constant(f64),
    Passive(PassiveSpec),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Bound {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Bound::Custom(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Bound::Constant(c) => *c,
            Bound::Passive(p) => p.value(t),
            Bound::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Bound::Passive(p) => f.debug_tuple("Passive").field(p).finish(),
            Bound::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl From<f64> for Bound {
    fn from(c: f64) -> Self {
        Bound::Constant(c)
    }
}

impl From<PassiveSpec> for Bound {
    fn from(p: PassiveSpec) -> Self {
        Bound::Passive(p)
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintKind {
    /// `a(t) ≤ c(t)`
    UpperPath(Bound),
    /// `a(t) ≥ c(t)`
    LowerPath(Bound),
    /// `L(t) ≤ a(t) ≤ U(t)`
    Channel { lower: Bound, upper: Bound },
    /// `a(t) ≤ 1 + ρ`
    Overbuy { rho: f64 },
    /// `c ≤ a(t) ≤ 1` on `[t*, 1]`
    EndStrategy { t_star: f64, c: f64 },
    /// `a(t) ≥ floor`
    ShortSellFloor { floor: f64 },
    /// `ȧ(t) ≥ 0`
    NoSell,
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::UpperPath(_) => "path_upper",
            ConstraintKind::LowerPath(_) => "path_lower",
            ConstraintKind::Channel { .. } => "channel",
            ConstraintKind::Overbuy { .. } => "overbuy",
            ConstraintKind::EndStrategy { .. } => "end_strategy",
            ConstraintKind::ShortSellFloor { .. } => "short_sell",
            ConstraintKind::NoSell => "no_sell",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ConstraintKind::Overbuy { rho } if !(rho >= 0.0 && rho.is_finite()) => {
                Err(Error::domain("rho", rho, "finite and >= 0"))
            }
            ConstraintKind::EndStrategy { t_star, .. } if !(t_star > 0.0 && t_star < 1.0) => {
                Err(Error::domain("t_star", t_star, "within (0, 1)"))
            }
            ConstraintKind::EndStrategy { c, .. } if !(c < 1.0 && c.is_finite()) => {
                Err(Error::domain("c", c, "finite and < 1"))
            }
            ConstraintKind::ShortSellFloor { floor } if !(floor <= 0.0 && floor.is_finite()) => {
                Err(Error::domain("floor", floor, "finite and <= 0"))
            }
            _ => Ok(()),
        }
    }

    /// The time range a default grid for this kind should cover.
    pub fn default_range(&self) -> (f64, f64) {
        match *self {
            ConstraintKind::EndStrategy { t_star, .. } => (t_star, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    kind: ConstraintKind,
    grid: TimeGrid,
}

impl ConstraintSpec {
    /// Validates `kind` and samples it on `grid_points` uniform times over its
    /// default range.
    pub fn new(kind: ConstraintKind, grid_points: usize) -> Result<Self> {
        kind.validate()?;
        let (lo, hi) = kind.default_range();
        let grid = make_grid(grid_points, lo, hi)?;
        Ok(Self { kind, grid })
    }

    pub fn with_grid(kind: ConstraintKind, grid: TimeGrid) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, grid })
    }

    pub fn overbuy(rho: f64, grid_points: usize) -> Result<Self> {
        Self::new(ConstraintKind::Overbuy { rho }, grid_points)
    }

    pub fn end_strategy(t_star: f64, c: f64, grid_points: usize) -> Result<Self> {
        Self::new(ConstraintKind::EndStrategy { t_star, c }, grid_points)
    }

    pub fn no_sell(grid_points: usize) -> Result<Self> {
        Self::new(ConstraintKind::NoSell, grid_points)
    }

    pub fn short_sell_floor(floor: f64, grid_points: usize) -> Result<Self> {
        Self::new(ConstraintKind::ShortSellFloor { floor }, grid_points)
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

/// What a compiled row constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowSense {
    Upper,
    Lower,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowLabel {
    /// Index of the originating spec in the list passed to [`compile`].
    pub spec: usize,
    pub kind: &'static str,
    pub sense: RowSense,
    pub t: f64,
}

/// Dense `G x ≤ h` with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    n_terms: usize,
    g: Vec<f64>,
    h: Vec<f64>,
    labels: Vec<RowLabel>,
}

impl ConstraintSystem {
    pub fn empty(n_terms: usize) -> Self {
        Self {
            n_terms,
            g: Vec::new(),
            h: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Builds a system from a row-major `G`. Labels are synthesised.
    pub fn from_rows(n_terms: usize, g: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if g.len() != h.len() * n_terms {
            return Err(Error::shape(
                "ConstraintSystem::from_rows",
                h.len() * n_terms,
                g.len(),
            ));
        }
        if g.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite constraint data".into()));
        }
        let labels = (0..h.len())
            .map(|i| RowLabel {
                spec: i,
                kind: "row",
                sense: RowSense::Upper,
                t: f64::NAN,
            })
            .collect();
        Ok(Self {
            n_terms,
            g,
            h,
            labels,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_rows(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.g[i * self.n_terms..(i + 1) * self.n_terms]
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn labels(&self) -> &[RowLabel] {
        &self.labels
    }

    /// `G x - h`.
    pub fn slack(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_terms {
            return Err(Error::shape(
                "ConstraintSystem::slack",
                self.n_terms,
                x.len(),
            ));
        }
        Ok((0..self.n_rows())
            .map(|i| {
                let dot: f64 = self.row(i).iter().zip(x).map(|(g, x)| g * x).sum();
                dot - self.h[i]
            })
            .collect())
    }

    /// `max(0, max_i (G x - h)_i)`.
    pub fn max_violation(&self, x: &[f64]) -> Result<f64> {
        Ok(self.slack(x)?.into_iter().fold(0.0, f64::max))
    }

    fn push(&mut self, row: impl Iterator<Item = f64>, h: f64, label: RowLabel) -> Result<()> {
        let start = self.g.len();
        self.g.extend(row);
        debug_assert_eq!(self.g.len() - start, self.n_terms);
        if !h.is_finite() || self.g[start..].iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite {} row at t = {}",
                label.kind, label.t
            )));
        }
        self.h.push(h);
        self.labels.push(label);
        Ok(())
    }
}

/// Compiles `specs` into one system over `n_terms` coefficients, in spec order
/// and then grid order.
pub fn compile(specs: &[ConstraintSpec], n_terms: usize) -> Result<ConstraintSystem> {
    if n_terms == 0 {
        return Err(Error::domain("n_terms", 0.0, ">= 1"));
    }
    let mut sys = ConstraintSystem::empty(n_terms);
    let sines = |t: f64| (1..=n_terms).map(move |n| sin_pi(n as f64 * t));
    for (idx, spec) in specs.iter().enumerate() {
        let kind = spec.kind.name();
        let label = |sense, t| RowLabel {
            spec: idx,
            kind,
            sense,
            t,
        };
        let upper = |sys: &mut ConstraintSystem, t: f64, c: f64| {
            sys.push(sines(t), c - t, label(RowSense::Upper, t))
        };
        for &t in spec.grid.points() {
            match &spec.kind {
                ConstraintKind::UpperPath(c) => upper(&mut sys, t, c.at(t))?,
                ConstraintKind::Overbuy { rho } => upper(&mut sys, t, 1.0 + rho)?,
                ConstraintKind::LowerPath(c) => {
                    sys.push(sines(t).map(|s| -s), t - c.at(t), label(RowSense::Lower, t))?
                }
                ConstraintKind::ShortSellFloor { floor } => {
                    sys.push(sines(t).map(|s| -s), t - floor, label(RowSense::Lower, t))?
                }
                ConstraintKind::Channel { lower, upper: hi } => {
                    let (l, u) = (lower.at(t), hi.at(t));
                    if l > u {
                        return Err(Error::InfeasibleSpec(format!(
                            "channel lower bound {l} exceeds upper bound {u} at t = {t}"
                        )));
                    }
                    sys.push(sines(t).map(|s| -s), t - l, label(RowSense::Lower, t))?;
                    upper(&mut sys, t, u)?;
                }
                ConstraintKind::EndStrategy { c, .. } => {
                    sys.push(sines(t).map(|s| -s), t - c, label(RowSense::Lower, t))?;
                    upper(&mut sys, t, 1.0)?;
                }
                ConstraintKind::NoSell => {
                    let row = (1..=n_terms).map(|n| {
                        let nf = n as f64;
                        -nf * PI * cos_pi(nf * t)
                    });
                    sys.push(row, 1.0, label(RowSense::Rate, t))?;
                }
            }
        }
    }
    Ok(sys)
}
