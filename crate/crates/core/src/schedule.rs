//! Interpolation schedules `λ ↦ s(λ)` on `[0, 1]`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{domain, Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance below which a numerical derivative counts as vanishing.
pub const DERIVATIVE_TOL: f64 = 1e-6;

/// Highest derivative order accepted by [`smoothness_order`].
pub const MAX_PROBE_ORDER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// `sin²[(π/2)·sin²(πλ/2)]`.
    Sin2OneD,
    /// `sin²(πλ/2)`.
    Sin2TwoD,
    /// Regularized incomplete Beta function `B_λ(k+1, k+1) / B_1(k+1, k+1)`.
    Beta(u32),
}

impl Schedule {
    pub fn evaluate(&self, lambda: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(domain!("schedule argument {lambda} outside [0, 1]"));
        }
        Ok(self.value(lambda))
    }

    /// Evaluation without the range check; analytic continuation outside `[0, 1]`.
    fn value(&self, x: f64) -> f64 {
        match *self {
            Schedule::Sin2OneD => {
                let inner = (PI * x / 2.0).sin();
                (PI / 2.0 * inner * inner).sin().powi(2)
            }
            Schedule::Sin2TwoD => (PI * x / 2.0).sin().powi(2),
            Schedule::Beta(k) => {
                if x > 0.5 {
                    1.0 - beta_ratio(k, 1.0 - x)
                } else {
                    beta_ratio(k, x)
                }
            }
        }
    }

    /// `1 − s(x)`, accurate near `x = 1`.
    fn complement(&self, x: f64) -> f64 {
        match *self {
            Schedule::Sin2OneD => {
                let inner = (PI * x / 2.0).sin();
                (PI / 2.0 * inner * inner).cos().powi(2)
            }
            Schedule::Sin2TwoD => (PI * x / 2.0).cos().powi(2),
            Schedule::Beta(k) => beta_ratio(k, 1.0 - x),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Sin2OneD => f.write_str("sin2-1d"),
            Schedule::Sin2TwoD => f.write_str("sin2-2d"),
            Schedule::Beta(k) => write!(f, "beta:k={k}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// Accepts `sin2-1d`, `sin2-2d`, `beta:k=<k>` and `beta(<k>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "sin2-1d" => return Ok(Schedule::Sin2OneD),
            "sin2-2d" => return Ok(Schedule::Sin2TwoD),
            _ => {}
        }
        let k = s
            .strip_prefix("beta:k=")
            .or_else(|| s.strip_prefix("beta(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| domain!("unknown schedule {s:?}"))?;
        let k: u32 = k.parse().map_err(|_| domain!("bad smoothness order {k:?}"))?;
        if k > 20 {
            return Err(domain!("smoothness order {k} too large"));
        }
        Ok(Schedule::Beta(k))
    }
}

/// `B_λ(a, b) = ∫₀^λ y^{a−1}(1−y)^{b−1} dy` for integer `a, b ≥ 1`, by binomial
/// expansion of `(1−y)^{b−1}`.
pub fn beta_incomplete(a: u32, b: u32, lambda: f64) -> Result<f64> {
    if a < 1 || b < 1 {
        return Err(domain!("beta parameters must be at least 1"));
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    for j in 0..b {
        let p = (a + j) as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * lambda.powi((a + j) as i32) / p;
        binom = binom * (b - 1 - j) as f64 / (j + 1) as f64;
    }
    Ok(sum)
}

fn beta_ratio(k: u32, x: f64) -> f64 {
    let num = beta_incomplete(k + 1, k + 1, x).expect("k + 1 >= 1");
    let den = beta_incomplete(k + 1, k + 1, 1.0).expect("k + 1 >= 1");
    num / den
}

/// Estimated endpoint derivative of one order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeVerdict {
    pub order: usize,
    pub at_zero: f64,
    pub at_one: f64,
    pub vanishes_at_zero: bool,
    pub vanishes_at_one: bool,
}

impl DerivativeVerdict {
    pub fn vanishes(&self) -> bool {
        self.vanishes_at_zero && self.vanishes_at_one
    }
}

/// `n`-th central difference of `f` at `x` with step `h`.
fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, n: usize, h: f64) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x + (n as f64 / 2.0 - j as f64) * h);
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(n as i32)
}

/// Richardson-extrapolated `n`-th derivative; the stencil halves four times.
fn derivative(f: &dyn Fn(f64) -> f64, x: f64, n: usize) -> f64 {
    const LEVELS: usize = 5;
    let h0 = 0.2;
    let mut table: Vec<f64> = (0..LEVELS)
        .map(|i| central_difference(f, x, n, h0 / (1 << i) as f64))
        .collect();
    // Central differences have even error expansions in h.
    for j in 1..LEVELS {
        let factor = 4f64.powi(j as i32);
        for i in (j..LEVELS).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table[LEVELS - 1]
}

/// Numerical derivatives of orders `1..=probe_order` at both endpoints.
pub fn smoothness_order(sched: &Schedule, probe_order: usize) -> Result<Vec<DerivativeVerdict>> {
    if probe_order == 0 || probe_order > MAX_PROBE_ORDER {
        return Err(domain!("probe order must lie in 1..={MAX_PROBE_ORDER}"));
    }
    let s = *sched;
    let near_zero = move |x: f64| s.value(x);
    // Derivatives of s at 1 are minus those of 1 − s.
    let near_one = move |x: f64| s.complement(x);
    Ok((1..=probe_order)
        .map(|n| {
            let d0 = derivative(&near_zero, 0.0, n);
            let d1 = -derivative(&near_one, 1.0, n);
            DerivativeVerdict {
                order: n,
                at_zero: d0,
                at_one: d1,
                vanishes_at_zero: d0.abs() < DERIVATIVE_TOL,
                vanishes_at_one: d1.abs() < DERIVATIVE_TOL,
            }
        })
        .collect())
}
