//! The s-kernel on the group and its Walsh-Fourier coefficients in closed
//! form.
//!
//! The kernel is radial in the shell decomposition: it vanishes at zero and
//! takes the constant value 2^{s(m-1)} on the shell of points whose first
//! nonzero coordinate is the m-th. The truncated variant levels off at 2^{ns}
//! inside the subgroup G_n, which makes it a Walsh polynomial of degree
//! below 2^n; its coefficients are finite geometric sums, evaluated here
//! term by term from exactly-formed exponents.

use crate::group::{shell_level, GroupElement, Resolution};
use std::f64::consts::LN_2;
use thiserror::Error;

/// Largest supported truncation level. Coefficient sums are evaluated term by
/// term, so the bound keeps them short; every practical use sits far below.
pub const MAX_TRUNCATION: u32 = 60;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel exponent must satisfy 0 < s < 1 strictly, got {0}")]
    BadExponent(f64),
    #[error("truncation level must lie in [1, {MAX_TRUNCATION}], got {0}")]
    BadTruncation(u32),
}

/// Kernel parameters: exponent s in (0, 1) and an optional truncation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    s: f64,
    truncation: Option<u32>,
}

impl KernelSpec {
    pub fn new(s: f64) -> Result<Self, KernelError> {
        if !s.is_finite() || s <= 0.0 || s >= 1.0 {
            return Err(KernelError::BadExponent(s));
        }
        Ok(Self { s, truncation: None })
    }

    pub fn with_truncation(mut self, n: u32) -> Result<Self, KernelError> {
        if n == 0 || n > MAX_TRUNCATION {
            return Err(KernelError::BadTruncation(n));
        }
        self.truncation = Some(n);
        Ok(self)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }
}

/// 1 - 2^t without cancellation for t near 0.
pub(crate) fn one_minus_exp2(t: f64) -> f64 {
    -(t * LN_2).exp_m1()
}

/// Dyadic block of a spectral index: 0 for k = 0, otherwise the m with
/// 2^{m-1} <= k < 2^m. Coefficients are constant on blocks.
pub(crate) fn block_of(k: u64) -> u32 {
    if k == 0 {
        0
    } else {
        64 - k.leading_zeros()
    }
}

/// Kernel value at a point, honoring the truncation level if set.
pub fn kernel_value(spec: &KernelSpec, z: &GroupElement) -> f64 {
    match shell_level(z) {
        None => 0.0,
        Some(m) => match spec.truncation {
            Some(n) if m > n => (n as f64 * spec.s).exp2(),
            _ => ((m as f64 - 1.0) * spec.s).exp2(),
        },
    }
}

/// sum_{j=m+1}^{n} 2^{(j-1)s - j}, accumulated smallest term first.
pub(crate) fn shell_integral_sum(s: f64, m: u32, n: u32) -> f64 {
    let mut acc = 0.0;
    let mut j = n;
    while j > m {
        acc += ((j as f64 - 1.0) * s - j as f64).exp2();
        j -= 1;
    }
    acc
}

/// Walsh-Fourier coefficient of the kernel truncated at level n.
///
/// Zero for k >= 2^n. For k in block m >= 1 the value is the average of the
/// truncated kernel over the subgroup G_m minus the shell term
/// 2^{(m-1)s - m}; the average splits into the shells between m and n plus
/// the constant plateau 2^{n(s-1)}. Positive, and strictly increasing in n.
pub fn truncated_coefficient(s: f64, n: u32, k: u64) -> Result<f64, KernelError> {
    let spec = KernelSpec::new(s)?.with_truncation(n)?;
    let s = spec.s;
    if k >> n != 0 {
        return Ok(0.0);
    }
    let m = block_of(k);
    let integral = shell_integral_sum(s, m, n) + (n as f64 * (s - 1.0)).exp2();
    if k == 0 {
        Ok(integral)
    } else {
        Ok(integral - ((m as f64 - 1.0) * s - m as f64).exp2())
    }
}

/// Walsh-Fourier coefficient of the untruncated kernel: the monotone limit of
/// the truncated ones. Closed forms follow from summing the geometric shell
/// series with ratio 2^{s-1}:
///
///   k = 0:            1 / (2 (1 - 2^{s-1}))
///   k in block m >= 1: (1 - 2^{-s}) 2^{m(s-1)} / (1 - 2^{s-1})
///
/// All positive for 0 < s < 1, decaying like k^{s-1} across blocks.
pub fn full_coefficient(s: f64, k: u64) -> Result<f64, KernelError> {
    let spec = KernelSpec::new(s)?;
    let s = spec.s;
    let denom = one_minus_exp2(s - 1.0);
    if k == 0 {
        return Ok(0.5 / denom);
    }
    let m = block_of(k);
    Ok(one_minus_exp2(-s) * ((m as f64) * (s - 1.0)).exp2() / denom)
}

/// Coefficients for every spectral index below 2^N, truncated or full per
/// the kernel spec. Block-constant, so each block value is computed once.
pub fn coefficient_table(spec: &KernelSpec, resolution: Resolution) -> Vec<f64> {
    let n_levels = resolution.levels();
    let cells = resolution.cells();
    let mut table = vec![0.0; cells];
    let coeff = |k: u64| match spec.truncation {
        Some(n) => truncated_coefficient(spec.s, n, k).expect("validated spec"),
        None => full_coefficient(spec.s, k).expect("validated spec"),
    };
    table[0] = coeff(0);
    for m in 1..=n_levels {
        let value = coeff(1 << (m - 1));
        for k in (1usize << (m - 1))..(1usize << m) {
            table[k] = value;
        }
    }
    table
}
