//! Closed-form strategies: the passive families, best responses to them, and
//! the unconstrained two-trader equilibrium pair.
//!
//! Every type here is a [`Curve`] with an analytic rate, so the quadrature cost
//! oracle never has to finite-difference them.

use crate::strategy::Curve;
use crate::{Error, Result};

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("sigma", sigma, "finite and > 0"))
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("kappa", kappa, "finite and >= 0"))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("lambda", lambda, "finite and > 0"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PassiveKind {
    RiskNeutral,
    RiskAverse,
    Eager,
}

/// A passive strategy: `t`, `sinh(σt)/sinh(σ)` or `(e^{-σt}-1)/(e^{-σ}-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassiveSpec {
    kind: PassiveKind,
    sigma: f64,
}

impl PassiveSpec {
    /// `sigma` is ignored for [`PassiveKind::RiskNeutral`].
    pub fn new(kind: PassiveKind, sigma: f64) -> Result<Self> {
        match kind {
            PassiveKind::RiskNeutral => Ok(Self::risk_neutral()),
            _ => {
                check_sigma(sigma)?;
                Ok(Self { kind, sigma })
            }
        }
    }

    pub fn risk_neutral() -> Self {
        Self {
            kind: PassiveKind::RiskNeutral,
            sigma: 0.0,
        }
    }

    pub fn risk_averse(sigma: f64) -> Result<Self> {
        Self::new(PassiveKind::RiskAverse, sigma)
    }

    pub fn eager(sigma: f64) -> Result<Self> {
        Self::new(PassiveKind::Eager, sigma)
    }

    pub fn kind(&self) -> PassiveKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Curve for PassiveSpec {
    fn value(&self, t: f64) -> f64 {
        let s = self.sigma;
        match self.kind {
            PassiveKind::RiskNeutral => t,
            PassiveKind::RiskAverse => libm::sinh(s * t) / libm::sinh(s),
            PassiveKind::Eager => libm::expm1(-s * t) / libm::expm1(-s),
        }
    }

    fn rate(&self, t: f64) -> f64 {
        let s = self.sigma;
        match self.kind {
            PassiveKind::RiskNeutral => 1.0,
            PassiveKind::RiskAverse => s * libm::cosh(s * t) / libm::sinh(s),
            PassiveKind::Eager => -s * libm::exp(-s * t) / libm::expm1(-s),
        }
    }
}

/// Returns the passive curve for `spec`.
pub fn passive(spec: PassiveSpec) -> PassiveSpec {
    spec
}

/// Best response to a `λ`-scaled risk-neutral opponent:
/// `(1 + λκ/4) t - (λκ/4) t²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseRiskNeutral {
    kappa: f64,
    lambda: f64,
}

impl BestResponseRiskNeutral {
    pub fn new(kappa: f64, lambda: f64) -> Result<Self> {
        check_kappa(kappa)?;
        check_lambda(lambda)?;
        Ok(Self { kappa, lambda })
    }
}

impl Curve for BestResponseRiskNeutral {
    fn value(&self, t: f64) -> f64 {
        let c = self.lambda * self.kappa / 4.0;
        (1.0 + c) * t - c * t * t
    }
    fn rate(&self, t: f64) -> f64 {
        let c = self.lambda * self.kappa / 4.0;
        1.0 + c - 2.0 * c * t
    }
}

/// `q_σ(t) = sinh(σt)/sinh(σ) + (κ/σ) cosh(σt)/sinh(σ)`.
pub fn q_sigma(t: f64, sigma: f64, kappa: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(q_sigma_unchecked(t, sigma, kappa))
}

fn q_sigma_unchecked(t: f64, sigma: f64, kappa: f64) -> f64 {
    let sh = libm::sinh(sigma);
    libm::sinh(sigma * t) / sh + (kappa / sigma) * libm::cosh(sigma * t) / sh
}

fn q_sigma_rate(t: f64, sigma: f64, kappa: f64) -> f64 {
    let sh = libm::sinh(sigma);
    sigma * libm::cosh(sigma * t) / sh + kappa * libm::sinh(sigma * t) / sh
}

/// Best response to a `λ`-scaled risk-averse opponent of aversion `σ`:
/// `(λ/2)(q(0) - q(t)) + (1 + (λ/2)(q(1) - q(0))) t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseRiskAverse {
    kappa: f64,
    lambda: f64,
    sigma: f64,
    q0: f64,
    q1: f64,
}

impl BestResponseRiskAverse {
    pub fn new(kappa: f64, lambda: f64, sigma: f64) -> Result<Self> {
        check_kappa(kappa)?;
        check_lambda(lambda)?;
        check_sigma(sigma)?;
        Ok(Self {
            kappa,
            lambda,
            sigma,
            q0: q_sigma_unchecked(0.0, sigma, kappa),
            q1: q_sigma_unchecked(1.0, sigma, kappa),
        })
    }
}

impl Curve for BestResponseRiskAverse {
    fn value(&self, t: f64) -> f64 {
        let half = self.lambda / 2.0;
        half * (self.q0 - q_sigma_unchecked(t, self.sigma, self.kappa))
            + (1.0 + half * (self.q1 - self.q0)) * t
    }
    fn rate(&self, t: f64) -> f64 {
        let half = self.lambda / 2.0;
        -half * q_sigma_rate(t, self.sigma, self.kappa) + 1.0 + half * (self.q1 - self.q0)
    }
}

/// Best response of the unit trader to a `λ`-scaled eager opponent of
/// eagerness `σ`, in the displayed rational-exponential form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseEager {
    kappa: f64,
    lambda: f64,
    sigma: f64,
}

impl BestResponseEager {
    pub const ENDPOINT_TOLERANCE: f64 = 1e-9;

    pub fn new(kappa: f64, lambda: f64, sigma: f64) -> Result<Self> {
        check_kappa(kappa)?;
        check_lambda(lambda)?;
        check_sigma(sigma)?;
        let curve = Self {
            kappa,
            lambda,
            sigma,
        };
        let (v0, v1) = (curve.value(0.0), curve.value(1.0));
        if !(libm::fabs(v0) <= Self::ENDPOINT_TOLERANCE
            && libm::fabs(v1 - 1.0) <= Self::ENDPOINT_TOLERANCE)
        {
            return Err(Error::Internal(alloc::format!(
                "eager best response misses its endpoints: a(0) = {v0}, a(1) = {v1}"
            )));
        }
        Ok(curve)
    }
}

impl Curve for BestResponseEager {
    fn value(&self, t: f64) -> f64 {
        let (k, l, s) = (self.kappa, self.lambda, self.sigma);
        let es = libm::exp(s);
        let num = l * libm::exp(s * (1.0 - t)) * (s - k) - t * ((l + 2.0) * s - k * l)
            + es * (-l * s + k * (l - l * t) + (l + 2.0) * s * t);
        num / (2.0 * libm::expm1(s) * s)
    }
    fn rate(&self, t: f64) -> f64 {
        let (k, l, s) = (self.kappa, self.lambda, self.sigma);
        let es = libm::exp(s);
        let num = -s * l * libm::exp(s * (1.0 - t)) * (s - k) - ((l + 2.0) * s - k * l)
            + es * (-k * l + (l + 2.0) * s);
        num / (2.0 * libm::expm1(s) * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumSide {
    A,
    B,
}

/// One side of the unconstrained two-trader equilibrium, as a unit strategy.
///
/// `κ = 0` is the removable singularity of the closed form and evaluates to the
/// line `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumStrategy {
    side: EquilibriumSide,
    kappa: f64,
    lambda: f64,
}

impl EquilibriumStrategy {
    pub fn side(&self) -> EquilibriumSide {
        self.side
    }

    // a_eq(t) = -(1 - e^{-κt/3}) P_a(t) / (2(e^κ - 1))
    // b_eq(t) =  (1 - e^{-κt/3}) P_b(t) / (2(e^κ - 1) λ)
    // P(t) = ∓ x(1 + x + x²)(λ + 1) + (λ - 1)(y + y² + y³), x = e^{κ/3}, y = e^{κt/3}
    fn parts(&self, t: f64) -> (f64, f64, f64, f64, f64) {
        let (k, l) = (self.kappa, self.lambda);
        let x = libm::exp(k / 3.0);
        let y = libm::exp(k * t / 3.0);
        let anchor = x * (1.0 + x + x * x) * (l + 1.0);
        let tail = (l - 1.0) * (y + y * y + y * y * y);
        let tail_rate = (l - 1.0) * (k / 3.0) * (y + 2.0 * y * y + 3.0 * y * y * y);
        // 1 - e^{-κt/3} and its derivative
        let lead = -libm::expm1(-k * t / 3.0);
        let lead_rate = (k / 3.0) * libm::exp(-k * t / 3.0);
        (anchor, tail, tail_rate, lead, lead_rate)
    }
}

impl Curve for EquilibriumStrategy {
    fn value(&self, t: f64) -> f64 {
        if self.kappa == 0.0 || t == 0.0 || t == 1.0 {
            return t;
        }
        let (anchor, tail, _, lead, _) = self.parts(t);
        let denom = 2.0 * libm::expm1(self.kappa);
        match self.side {
            EquilibriumSide::A => -lead * (tail - anchor) / denom,
            EquilibriumSide::B => lead * (tail + anchor) / (denom * self.lambda),
        }
    }

    fn rate(&self, t: f64) -> f64 {
        if self.kappa == 0.0 {
            return 1.0;
        }
        let (anchor, tail, tail_rate, lead, lead_rate) = self.parts(t);
        let denom = 2.0 * libm::expm1(self.kappa);
        match self.side {
            EquilibriumSide::A => -(lead_rate * (tail - anchor) + lead * tail_rate) / denom,
            EquilibriumSide::B => {
                (lead_rate * (tail + anchor) + lead * tail_rate) / (denom * self.lambda)
            }
        }
    }
}

/// The unconstrained equilibrium `(a_eq, b_eq)`; both are unit strategies and
/// `b_eq` is traded at scale `λ`.
pub fn equilibrium_pair(
    kappa: f64,
    lambda: f64,
) -> Result<(EquilibriumStrategy, EquilibriumStrategy)> {
    check_kappa(kappa)?;
    check_lambda(lambda)?;
    let side = |side| EquilibriumStrategy {
        side,
        kappa,
        lambda,
    };
    Ok((side(EquilibriumSide::A), side(EquilibriumSide::B)))
}
