//! Composite Simpson quadrature with interval doubling.
//!
//! Each refinement reuses every sample of the previous level, so doubling only
//! evaluates the new midpoints. The error of level `2m` is estimated from the
//! difference with level `m` (Richardson, `|S_2m - S_m| / 15`) and the returned
//! value is the Richardson-extrapolated one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Refinement schedule for [`integrate`] and [`integrate_vec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpsonRule {
    /// Number of subintervals of the first level. Rounded up to an even number.
    pub initial_intervals: usize,
    /// Absolute error target on every component.
    pub tolerance: f64,
    /// Refinement stops with an error once this many subintervals would be exceeded.
    pub max_intervals: usize,
}

impl SimpsonRule {
    pub const fn new(initial_intervals: usize, tolerance: f64, max_intervals: usize) -> Self {
        Self {
            initial_intervals,
            tolerance,
            max_intervals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecEstimate {
    pub values: Vec<f64>,
    pub error: f64,
    pub intervals: usize,
}

/// Integrates a scalar function over `[lo, hi]`.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, rule: &SimpsonRule) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let est = integrate_vec(1, |t, out| out[0] = f(t), lo, hi, rule)?;
    Ok(Estimate {
        value: est.values[0],
        error: est.error,
        intervals: est.intervals,
    })
}

/// Integrates a vector-valued function component-wise over `[lo, hi]`.
///
/// `f(t, out)` must fill all `dim` entries of `out`.
pub fn integrate_vec<F>(
    dim: usize,
    mut f: F,
    lo: f64,
    hi: f64,
    rule: &SimpsonRule,
) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Precondition(format!(
            "quadrature interval [{lo}, {hi}] must be finite and non-empty"
        )));
    }
    if !(rule.tolerance > 0.0) {
        return Err(Error::domain("tolerance", rule.tolerance, "> 0"));
    }
    let mut m = rule.initial_intervals.max(2);
    if m % 2 == 1 {
        m += 1;
    }

    let mut buf = vec![0.0; dim];
    let mut sample = |t: f64, acc: &mut [f64]| -> Result<()> {
        f(t, &mut buf);
        for (a, &v) in acc.iter_mut().zip(buf.iter()) {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite integrand sample at t = {t}"
                )));
            }
            *a += v;
        }
        Ok(())
    };

    // Simpson on m intervals: h/3 [ends + 4 odd + 2 even]. Interior points of
    // level m become the even points of level 2m.
    let mut ends = vec![0.0; dim];
    sample(lo, &mut ends)?;
    sample(hi, &mut ends)?;
    let width = hi - lo;
    let mut odd = vec![0.0; dim];
    let mut even = vec![0.0; dim];
    for i in 1..m {
        let t = lo + width * (i as f64) / (m as f64);
        if i % 2 == 1 {
            sample(t, &mut odd)?;
        } else {
            sample(t, &mut even)?;
        }
    }
    let simpson = |m: usize, odd: &[f64], even: &[f64], ends: &[f64]| -> Vec<f64> {
        let h = width / m as f64;
        (0..dim)
            .map(|j| h / 3.0 * (ends[j] + 4.0 * odd[j] + 2.0 * even[j]))
            .collect()
    };
    let mut coarse = simpson(m, &odd, &even, &ends);

    loop {
        let fine_m = 2 * m;
        if fine_m > rule.max_intervals {
            return Err(Error::Numeric(format!(
                "quadrature did not reach tolerance {} within {} intervals",
                rule.tolerance, rule.max_intervals
            )));
        }
        let interior: Vec<f64> = odd.iter().zip(even.iter()).map(|(o, e)| o + e).collect();
        let mut mid = vec![0.0; dim];
        for i in 0..m {
            let t = lo + width * (2 * i + 1) as f64 / fine_m as f64;
            sample(t, &mut mid)?;
        }
        let fine = simpson(fine_m, &mid, &interior, &ends);
        let error = fine
            .iter()
            .zip(coarse.iter())
            .map(|(f, c)| libm::fabs(f - c) / 15.0)
            .fold(0.0, f64::max);
        if error <= rule.tolerance {
            let values = fine
                .iter()
                .zip(coarse.iter())
                .map(|(f, c)| f + (f - c) / 15.0)
                .collect();
            return Ok(VecEstimate {
                values,
                error,
                intervals: fine_m,
            });
        }
        odd = mid;
        even = interior;
        coarse = fine;
        m = fine_m;
    }
}
