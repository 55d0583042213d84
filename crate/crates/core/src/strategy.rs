//! Trading strategies as truncated sine series around the risk-neutral line.
//!
//! A unit strategy is `a(t) = t + Σ_{n=1..N} a_n sin(nπt)`. Only the
//! coefficients are stored; the boundary values `a(0) = 0`, `a(1) = 1` are
//! structural. The target-quantity multiple `λ` travels alongside as metadata
//! and is applied by callers (cost functions, output scaling).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quadrature::{self, SimpsonRule};
use crate::trig::{cos_pi, sin_pi};
use crate::{Error, Result};

/// Step used for finite-difference rates of curves without an analytic derivative.
pub const FD_STEP: f64 = 1e-6;

/// Tolerance on `f(0) = 0` and `f(1) = 1` when fitting a curve.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Absolute accuracy target for each fitted coefficient.
pub const FIT_TOLERANCE: f64 = 1e-10;

const FIT_RULE: SimpsonRule = SimpsonRule::new(2000, FIT_TOLERANCE, 2000 << 8);
const L2_RULE: SimpsonRule = SimpsonRule::new(2000, 1e-15, 2000 << 8);

/// A position curve on `[0, 1]`.
pub trait Curve {
    fn value(&self, t: f64) -> f64;

    /// Trading rate. Defaults to a second-order finite difference with step
    /// [`FD_STEP`], one-sided within one step of the endpoints.
    fn rate(&self, t: f64) -> f64 {
        let h = FD_STEP;
        if t - h < 0.0 {
            (-3.0 * self.value(t) + 4.0 * self.value(t + h) - self.value(t + 2.0 * h)) / (2.0 * h)
        } else if t + h > 1.0 {
            (3.0 * self.value(t) - 4.0 * self.value(t - h) + self.value(t - 2.0 * h)) / (2.0 * h)
        } else {
            (self.value(t + h) - self.value(t - h)) / (2.0 * h)
        }
    }
}

impl<C: Curve + ?Sized> Curve for &C {
    fn value(&self, t: f64) -> f64 {
        (**self).value(t)
    }
    fn rate(&self, t: f64) -> f64 {
        (**self).rate(t)
    }
}

/// Adapts a closure to [`Curve`]; the rate is finite-differenced.
#[derive(Clone, Copy)]
pub struct FnCurve<F>(pub F);

impl<F: Fn(f64) -> f64> Curve for FnCurve<F> {
    fn value(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

/// Adapts a value closure and an analytic rate closure to [`Curve`].
#[derive(Clone, Copy)]
pub struct FnCurveWithRate<F, G> {
    pub value: F,
    pub rate: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> Curve for FnCurveWithRate<F, G> {
    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }
    fn rate(&self, t: f64) -> f64 {
        (self.rate)(t)
    }
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain("t", t, "within [0, 1]"))
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("scale", scale, "finite and > 0"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyCoeffs {
    coeffs: Vec<f64>,
    scale: f64,
}

impl StrategyCoeffs {
    pub fn new(coeffs: Vec<f64>, scale: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("n_terms", 0.0, ">= 1"));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain("coefficient", *bad, "finite"));
        }
        check_scale(scale)?;
        Ok(Self { coeffs, scale })
    }

    /// Unit-scale strategy (`λ = 1`).
    pub fn unit(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, 1.0)
    }

    /// The risk-neutral line `t` with `n_terms` zero coefficients.
    pub fn risk_neutral(n_terms: usize, scale: f64) -> Result<Self> {
        Self::new(vec![0.0; n_terms], scale)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(Self {
            coeffs: self.coeffs.clone(),
            scale,
        })
    }

    /// Unit position `t + Σ a_n sin(nπt)`.
    pub fn reconstruct(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.eval_unchecked(t))
    }

    /// Unit trading rate `1 + Σ a_n nπ cos(nπt)`.
    pub fn derivative_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.rate_unchecked(t))
    }

    /// Position in units of the owning trader's target, i.e. `λ · reconstruct(t)`.
    pub fn scaled_position(&self, t: f64) -> Result<f64> {
        Ok(self.scale * self.reconstruct(t)?)
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if t == 1.0 {
            return 1.0;
        }
        let wiggle: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * sin_pi((i + 1) as f64 * t))
            .sum();
        t + wiggle
    }

    fn rate_unchecked(&self, t: f64) -> f64 {
        let wiggle: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let n = (i + 1) as f64;
                c * n * PI * cos_pi(n * t)
            })
            .sum();
        1.0 + wiggle
    }

    /// Sine coefficients `a_n = 2∫₀¹ (f(t) - t) sin(nπt) dt` of a unit curve.
    pub fn fit<C: Curve + ?Sized>(curve: &C, n_terms: usize, scale: f64) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::domain("n_terms", 0.0, ">= 1"));
        }
        check_scale(scale)?;
        let (f0, f1) = (curve.value(0.0), curve.value(1.0));
        if !(libm::fabs(f0) <= BOUNDARY_TOLERANCE && libm::fabs(f1 - 1.0) <= BOUNDARY_TOLERANCE) {
            return Err(Error::Precondition(format!(
                "curve must satisfy f(0) = 0 and f(1) = 1, got f(0) = {f0}, f(1) = {f1}"
            )));
        }
        // The factor 2 is folded into the integrand so the tolerance applies to a_n itself.
        let est = quadrature::integrate_vec(
            n_terms,
            |t, out| {
                let g = 2.0 * (curve.value(t) - t);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = g * sin_pi((i + 1) as f64 * t);
                }
            },
            0.0,
            1.0,
            &FIT_RULE,
        )?;
        Self::new(est.values, scale)
    }

    /// Fit with a closure; see [`Self::fit`].
    pub fn fit_fn<F: Fn(f64) -> f64>(f: F, n_terms: usize, scale: f64) -> Result<Self> {
        Self::fit(&FnCurve(f), n_terms, scale)
    }

    /// Coefficient-wise `γ·self + (1-γ)·other`, which reconstructs to the same
    /// convex combination of the curves.
    pub fn convex_combine(&self, other: &Self, gamma: f64) -> Result<Self> {
        if other.n_terms() != self.n_terms() {
            return Err(Error::shape(
                "convex_combine",
                self.n_terms(),
                other.n_terms(),
            ));
        }
        if other.scale != self.scale {
            return Err(Error::Precondition(format!(
                "convex_combine needs equal scales, got {} and {}",
                self.scale, other.scale
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain("gamma", gamma, "within [0, 1]"));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| gamma * x + (1.0 - gamma) * y)
            .collect();
        Ok(Self {
            coeffs,
            scale: self.scale,
        })
    }

    /// L2 norm of the difference of the reconstructed unit curves, via
    /// `∫ sin²(nπt) = 1/2`.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if other.n_terms() != self.n_terms() {
            return Err(Error::shape("l2_distance", self.n_terms(), other.n_terms()));
        }
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(libm::sqrt(sum / 2.0))
    }
}

impl Curve for StrategyCoeffs {
    fn value(&self, t: f64) -> f64 {
        self.eval_unchecked(t)
    }
    fn rate(&self, t: f64) -> f64 {
        self.rate_unchecked(t)
    }
}

/// `(∫₀¹ (f - g)² dt)^{1/2}` by adaptive quadrature, for curves that need not
/// be bandlimited.
pub fn l2_distance_quadrature<F: Curve + ?Sized, G: Curve + ?Sized>(f: &F, g: &G) -> Result<f64> {
    let est = quadrature::integrate(
        |t| {
            let d = f.value(t) - g.value(t);
            d * d
        },
        0.0,
        1.0,
        &L2_RULE,
    )?;
    Ok(libm::sqrt(est.value.max(0.0)))
}
