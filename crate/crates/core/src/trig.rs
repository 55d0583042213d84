//! Closed-form integrals of products of `sin(nπt)`, `cos(nπt)` and `t` over `[0, 1]`,
//! and the antisymmetric cross-kernel they induce on coefficient vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// `sin(πx)`, exactly zero at integers and exactly `±1` at half-integers.
pub fn sin_pi(x: f64) -> f64 {
    let k = libm::round(x);
    let r = x - k;
    let s = if r == 0.5 {
        1.0
    } else if r == -0.5 {
        -1.0
    } else {
        libm::sin(PI * r)
    };
    if is_odd(k) {
        -s
    } else {
        s
    }
}

/// `cos(πx)`, exactly zero at half-integers and exactly `±1` at integers.
pub fn cos_pi(x: f64) -> f64 {
    let k = libm::round(x);
    let r = x - k;
    let c = if r == 0.5 || r == -0.5 {
        0.0
    } else {
        libm::cos(PI * r)
    };
    if is_odd(k) {
        -c
    } else {
        c
    }
}

fn is_odd(k: f64) -> bool {
    libm::fmod(libm::fabs(k), 2.0) == 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrigKind {
    /// `∫ sin(nπt) dt`
    Sin,
    /// `∫ cos(nπt) dt`
    Cos,
    /// `∫ t cos(nπt) dt`
    TCos,
    /// `∫ cos(nπt) cos(mπt) dt`
    CosCos,
    /// `∫ cos(nπt) sin(mπt) dt`
    CosSin,
}

/// Exact value of the `kind` integral over `[0, 1]`. `m` is ignored for the
/// single-index kinds.
///
/// The zero-index cases are the true integrals (`∫ t dt = 1/2`, `∫ 1 dt = 1`).
pub fn trig_integral(kind: TrigKind, n: i64, m: i64) -> Result<f64> {
    if n < 0 {
        return Err(Error::domain("n", n as f64, ">= 0"));
    }
    let uses_m = matches!(kind, TrigKind::CosCos | TrigKind::CosSin);
    if uses_m && m < 0 {
        return Err(Error::domain("m", m as f64, ">= 0"));
    }
    let nf = n as f64;
    let mf = m as f64;
    let odd = n % 2 == 1;
    Ok(match kind {
        TrigKind::Sin => {
            if odd {
                2.0 / (nf * PI)
            } else {
                0.0
            }
        }
        TrigKind::Cos => {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        }
        TrigKind::TCos => {
            if n == 0 {
                0.5
            } else if odd {
                -2.0 / (nf * nf * PI * PI)
            } else {
                0.0
            }
        }
        TrigKind::CosCos => {
            if n != m {
                0.0
            } else if n == 0 {
                1.0
            } else {
                0.5
            }
        }
        TrigKind::CosSin => {
            if (n + m) % 2 == 1 {
                2.0 * mf / (PI * (mf * mf - nf * nf))
            } else {
                0.0
            }
        }
    })
}

/// Kernel weight `nm / (m² - n²)` for `n + m` odd, zero otherwise (1-based indices).
#[inline]
pub fn cross_weight(n: usize, m: usize) -> f64 {
    if (n + m) % 2 == 1 {
        let (nf, mf) = (n as f64, m as f64);
        nf * mf / (mf * mf - nf * nf)
    } else {
        0.0
    }
}

/// Precomputed kernels for `N` sine terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTable {
    n_terms: usize,
    /// `∫ sin(nπt) dt` for n = 1..=N.
    sin_integrals: Vec<f64>,
    /// Row-major `N × N`, entry `(n-1, m-1)` is [`cross_weight`]`(n, m)`.
    cross: Vec<f64>,
}

impl TrigTable {
    pub fn new(n_terms: usize) -> Self {
        let sin_integrals = (1..=n_terms)
            .map(|n| {
                if n % 2 == 1 {
                    2.0 / (n as f64 * PI)
                } else {
                    0.0
                }
            })
            .collect();
        let mut cross = vec![0.0; n_terms * n_terms];
        for n in 1..=n_terms {
            for m in 1..=n_terms {
                cross[(n - 1) * n_terms + (m - 1)] = cross_weight(n, m);
            }
        }
        Self {
            n_terms,
            sin_integrals,
            cross,
        }
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn sin_integral(&self, n: usize) -> f64 {
        self.sin_integrals[n - 1]
    }

    pub fn cross_weight(&self, n: usize, m: usize) -> f64 {
        self.cross[(n - 1) * self.n_terms + (m - 1)]
    }

    /// `Σ_{n+m odd} x_n y_m nm/(m²-n²)`.
    ///
    /// Accumulated over unordered pairs so that `x == y` gives exactly zero.
    pub fn cross_form(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_terms);
        debug_assert_eq!(y.len(), self.n_terms);
        let n_terms = self.n_terms;
        let mut acc = 0.0;
        for i in 0..n_terms {
            for j in (i + 1)..n_terms {
                let w = self.cross[i * n_terms + j];
                if w != 0.0 {
                    acc += w * (x[i] * y[j] - x[j] * y[i]);
                }
            }
        }
        acc
    }

    /// `v_n = Σ_m w(n, m) y_m`, the gradient of [`Self::cross_form`] in `x`.
    pub fn cross_apply(&self, y: &[f64]) -> Vec<f64> {
        let n_terms = self.n_terms;
        (0..n_terms)
            .map(|i| {
                self.cross[i * n_terms..(i + 1) * n_terms]
                    .iter()
                    .zip(y)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }
}
