//! Trading costs as quadratic forms in one trader's sine coefficients, and a
//! quadrature oracle for the exact cost integral.
//!
//! With unit strategies `a`, `b` and opponent scale `λ`, trader A pays
//! `∫ (ȧ + λḃ) ȧ + κ (a + λb) ȧ dt` and trader B pays
//! `∫ (ȧ + λḃ) λḃ + κ (a + λb) λḃ dt`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quadrature::{self, SimpsonRule};
use crate::strategy::{Curve, StrategyCoeffs};
use crate::trig::TrigTable;
use crate::{Error, Result};

/// Which trader's cost a quadratic form describes. A is the unit trader, B the
/// `λ`-scaled one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trader {
    A,
    B,
}

impl Trader {
    pub fn other(self) -> Self {
        match self {
            Trader::A => Trader::B,
            Trader::B => Trader::A,
        }
    }
}

/// Absolute error target of [`quadrature_cost`].
pub const ORACLE_TOLERANCE: f64 = 1e-9;

const ORACLE_RULE: SimpsonRule = SimpsonRule::new(4000, ORACLE_TOLERANCE, 4000 << 8);

/// `constant + linear·x + ½ Σ quad_n x_n² + own_cross · Σ_{n+m odd} x_n x_m nm/(m²-n²)`.
///
/// The last term is antisymmetric and therefore zero; it is carried so that the
/// assembled form matches the full expansion term for term.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    perspective: Trader,
    kappa: f64,
    lambda: f64,
    constant: f64,
    linear: Vec<f64>,
    quad_diag: Vec<f64>,
    own_cross: f64,
    table: TrigTable,
}

pub(crate) fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("kappa", kappa, "finite and >= 0"))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("lambda", lambda, "finite and > 0"))
    }
}

/// Cost of trader A in A's coefficients, against `opponent` whose
/// [`StrategyCoeffs::scale`] is `λ`.
pub fn assemble_cost_a(opponent: &StrategyCoeffs, kappa: f64) -> Result<QuadraticCost> {
    check_kappa(kappa)?;
    let lambda = opponent.scale();
    check_lambda(lambda)?;
    let n_terms = opponent.n_terms();
    let table = TrigTable::new(n_terms);
    let b = opponent.coeffs();
    let cross_b = table.cross_apply(b);

    let mut constant = (2.0 + kappa) * (1.0 + lambda) / 2.0;
    let mut linear = Vec::with_capacity(n_terms);
    let mut quad_diag = Vec::with_capacity(n_terms);
    for i in 0..n_terms {
        let n = (i + 1) as f64;
        let n2pi2 = PI * PI * n * n;
        let odd = table.sin_integral(i + 1) != 0.0;
        quad_diag.push(n2pi2);
        let mut l = lambda * n2pi2 * b[i] / 2.0 + 2.0 * kappa * lambda * cross_b[i];
        if odd {
            l -= 2.0 * kappa * lambda / (PI * n);
            constant += 2.0 * kappa * lambda / PI * b[i] / n;
        }
        linear.push(l);
    }
    Ok(QuadraticCost {
        perspective: Trader::A,
        kappa,
        lambda,
        constant,
        linear,
        quad_diag,
        own_cross: 2.0 * kappa,
        table,
    })
}

/// Cost of trader B (scale `λ`) in B's unit coefficients, against the unit
/// trader `opponent`.
pub fn assemble_cost_b(
    opponent: &StrategyCoeffs,
    kappa: f64,
    lambda: f64,
) -> Result<QuadraticCost> {
    check_kappa(kappa)?;
    check_lambda(lambda)?;
    let n_terms = opponent.n_terms();
    let table = TrigTable::new(n_terms);
    let a = opponent.coeffs();
    let cross_a = table.cross_apply(a);

    let mut constant = (2.0 + kappa) * (1.0 + lambda) / 2.0;
    let mut linear = Vec::with_capacity(n_terms);
    let mut quad_diag = Vec::with_capacity(n_terms);
    for i in 0..n_terms {
        let n = (i + 1) as f64;
        let n2pi2 = PI * PI * n * n;
        let odd = table.sin_integral(i + 1) != 0.0;
        quad_diag.push(lambda * lambda * n2pi2);
        let mut l = n2pi2 * a[i] / 2.0 + 2.0 * kappa * cross_a[i];
        if odd {
            l -= 2.0 * kappa / (PI * n);
            constant += 2.0 * kappa / PI * a[i] / n;
        }
        linear.push(lambda * l);
    }
    Ok(QuadraticCost {
        perspective: Trader::B,
        kappa,
        lambda,
        constant: lambda * constant,
        linear,
        quad_diag,
        own_cross: 2.0 * kappa * lambda * lambda,
        table,
    })
}

/// Assembles the cost of `trader` against `opponent`. For [`Trader::A`] the
/// opponent's scale must equal `lambda`.
pub fn assemble_cost(
    trader: Trader,
    opponent: &StrategyCoeffs,
    kappa: f64,
    lambda: f64,
) -> Result<QuadraticCost> {
    match trader {
        Trader::A => {
            if opponent.scale() != lambda {
                return Err(Error::Precondition(format!(
                    "opponent scale {} differs from lambda {lambda}",
                    opponent.scale()
                )));
            }
            assemble_cost_a(opponent, kappa)
        }
        Trader::B => assemble_cost_b(opponent, kappa, lambda),
    }
}

impl QuadraticCost {
    /// Builds a form with no own cross term from explicit parts.
    pub fn from_parts(
        perspective: Trader,
        constant: f64,
        linear: Vec<f64>,
        quad_diag: Vec<f64>,
    ) -> Result<Self> {
        if linear.len() != quad_diag.len() {
            return Err(Error::shape(
                "QuadraticCost::from_parts",
                quad_diag.len(),
                linear.len(),
            ));
        }
        if linear.is_empty() {
            return Err(Error::domain("n_terms", 0.0, ">= 1"));
        }
        if let Some(q) = quad_diag.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
            return Err(Error::domain("quad_diag entry", *q, "finite and > 0"));
        }
        if !constant.is_finite() || linear.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric("non-finite quadratic cost data".into()));
        }
        let n_terms = linear.len();
        Ok(Self {
            perspective,
            kappa: 0.0,
            lambda: 1.0,
            constant,
            linear,
            quad_diag,
            own_cross: 0.0,
            table: TrigTable::new(n_terms),
        })
    }

    pub fn perspective(&self) -> Trader {
        self.perspective
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_terms(&self) -> usize {
        self.linear.len()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Diagonal of `Q` in the `½ x·Qx` convention.
    pub fn quad_diag(&self) -> &[f64] {
        &self.quad_diag
    }

    /// Weight of the antisymmetric own-coefficient cross form.
    pub fn own_cross(&self) -> f64 {
        self.own_cross
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.n_terms() {
            Ok(())
        } else {
            Err(Error::shape("QuadraticCost", self.n_terms(), x.len()))
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut value = self.constant;
        for ((l, q), xi) in self.linear.iter().zip(&self.quad_diag).zip(x) {
            value += l * xi + 0.5 * q * xi * xi;
        }
        if self.own_cross != 0.0 {
            value += self.own_cross * self.table.cross_form(x, x);
        }
        Ok(value)
    }

    /// `linear + Q x`; the antisymmetric own cross form has zero gradient.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self
            .linear
            .iter()
            .zip(&self.quad_diag)
            .zip(x)
            .map(|((l, q), xi)| l + q * xi)
            .collect())
    }

    /// The unconstrained minimiser `-Q⁻¹ q`.
    pub fn stationary_point(&self) -> Vec<f64> {
        self.linear
            .iter()
            .zip(&self.quad_diag)
            .map(|(l, q)| -l / q)
            .collect()
    }
}

/// Exact cost of `perspective` for unit curves `a` and `b` with B at scale
/// `lambda`, by adaptive Simpson quadrature to [`ORACLE_TOLERANCE`].
pub fn quadrature_cost<A, B>(
    a: &A,
    b: &B,
    kappa: f64,
    lambda: f64,
    perspective: Trader,
) -> Result<f64>
where
    A: Curve + ?Sized,
    B: Curve + ?Sized,
{
    check_kappa(kappa)?;
    check_lambda(lambda)?;
    let est = quadrature::integrate(
        |t| {
            let (pa, pb) = (a.value(t), b.value(t));
            let (ra, rb) = (a.rate(t), b.rate(t));
            let own = match perspective {
                Trader::A => ra,
                Trader::B => lambda * rb,
            };
            (ra + lambda * rb) * own + kappa * (pa + lambda * pb) * own
        },
        0.0,
        1.0,
        &ORACLE_RULE,
    )?;
    Ok(est.value)
}
