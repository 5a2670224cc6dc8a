//! Scaling-law fits over run data.
//!
//! Every fit is an ordinary least-squares line in transformed coordinates.
//! Windows are always explicit and are copied into the result.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max |y − ŷ|`.
    pub max_residual: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} x values, {} y values", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut max_residual: f64 = 0.0;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        max_residual = max_residual.max(r.abs());
        ss_res += r * r;
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LineFit { slope, intercept, max_residual, r_squared })
}

/// `F(N) = exp(−κN − c)` at fixed `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDensityFit {
    pub total_time: f64,
    pub kappa: f64,
    pub c: f64,
    /// `max |−ln F − (κN + c)|`.
    pub residual: f64,
    /// `max |−ln F − (κN + c)| / |−ln F|` over the fitted points.
    pub relative_residual: f64,
    pub n_points: usize,
    /// Sizes whose fidelity was zero and could not enter the fit.
    pub dropped: Vec<f64>,
}

pub fn fit_error_density(points: &[(f64, f64)], total_time: f64) -> Result<ErrorDensityFit> {
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(n, f) in points {
        if !(f > 0.0) || f > 1.0 + 1e-9 || !n.is_finite() {
            dropped.push(n);
            continue;
        }
        xs.push(n);
        ys.push(-f.ln());
    }
    let distinct = {
        let mut v = xs.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        v.dedup();
        v.len()
    };
    if distinct < 3 {
        return Err(Error::Fit(format!("need 3 distinct sizes with F in (0, 1], got {distinct}")));
    }
    let line = fit_line(&xs, &ys)?;
    let relative_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = (y - (line.slope * x + line.intercept)).abs();
            if *y != 0.0 { r / y.abs() } else if r == 0.0 { 0.0 } else { f64::INFINITY }
        })
        .fold(0.0, f64::max);
    Ok(ErrorDensityFit {
        total_time,
        kappa: line.slope,
        c: line.intercept,
        residual: line.max_residual,
        relative_residual,
        n_points: xs.len(),
        dropped,
    })
}

/// Closed window `[lo, hi]` on the independent variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(domain!("window [{lo}, {hi}] is not a finite interval"));
        }
        Ok(Self { lo, hi })
    }

    pub fn all() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// `κ(T) ≈ κ₀ e^{−γT}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub kappa0: f64,
    pub gamma: f64,
    pub window: Window,
    pub r_squared: f64,
    pub n_points: usize,
    pub dropped: Vec<f64>,
}

impl DecayFit {
    pub fn kappa_at(&self, t: f64) -> f64 {
        self.kappa0 * (-self.gamma * t).exp()
    }
}

pub fn fit_exponential_decay(points: &[(f64, f64)], window: Window) -> Result<DecayFit> {
    let mut dropped = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(t, k) in points.iter().filter(|p| window.contains(p.0)) {
        if k > 0.0 && k.is_finite() {
            xs.push(t);
            ys.push(k.ln());
        } else {
            dropped.push(t);
        }
    }
    if xs.len() < 4 {
        return Err(Error::Fit(format!("need 4 positive points in the window, got {}", xs.len())));
    }
    let line = fit_line(&xs, &ys)?;
    Ok(DecayFit {
        kappa0: line.intercept.exp(),
        gamma: -line.slope,
        window,
        r_squared: line.r_squared,
        n_points: xs.len(),
        dropped,
    })
}

/// `1 − F ≈ A·T^{−α}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub prefactor: f64,
    pub window: Window,
    pub r_squared: f64,
    /// `max |ln(1−F) − fit|`.
    pub residual: f64,
    /// The infidelity is not monotone decreasing across the window.
    pub non_monotone: bool,
    pub n_points: usize,
}

pub fn fit_power_law(points: &[(f64, f64)], window: Window) -> Result<PowerLawFit> {
    let mut pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|p| window.contains(p.0)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    if pts.iter().any(|p| !(p.0 > 0.0) || !(p.1 > 0.0)) {
        return Err(Error::Fit("power-law points need T > 0 and infidelity > 0".into()));
    }
    if pts.len() < 4 {
        return Err(Error::Fit(format!("need 4 tail points, got {}", pts.len())));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    let non_monotone = pts.windows(2).any(|w| w[1].1 > w[0].1);
    Ok(PowerLawFit {
        alpha: -line.slope,
        prefactor: line.intercept.exp(),
        window,
        r_squared: line.r_squared,
        residual: line.max_residual,
        non_monotone,
        n_points: pts.len(),
    })
}

/// Window covering the last decade of the largest independent value.
pub fn last_decade(points: &[(f64, f64)]) -> Option<Window> {
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi.is_finite() && hi > 0.0 {
        Some(Window { lo: hi / 10.0, hi })
    } else {
        None
    }
}

/// Result of a bisection search for the time reaching a target fidelity.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSearch {
    pub t_star: f64,
    pub fidelity: f64,
    pub converged: bool,
    /// Every `(T, F)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
    /// Evaluations that broke monotonicity against an earlier bracket end.
    pub monotonicity_violations: usize,
}

pub const FIDELITY_SEARCH_TOL: f64 = 5e-4;
pub const MAX_SEARCH_RUNS: usize = 12;

/// Bisection on `T ↦ F(T)` assumed nondecreasing within `bounds`.
pub fn time_for_fidelity(
    mut final_fidelity: impl FnMut(f64) -> Result<f64>,
    target: f64,
    bounds: (f64, f64),
) -> Result<TimeSearch> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain!("target fidelity must lie in (0, 1), got {target}"));
    }
    let (mut lo, mut hi) = bounds;
    if !(lo > 0.0 && lo < hi) {
        return Err(domain!("search bounds must satisfy 0 < lo < hi"));
    }
    let mut evals = Vec::new();
    let mut f_lo = final_fidelity(lo)?;
    evals.push((lo, f_lo));
    if (f_lo - target).abs() < FIDELITY_SEARCH_TOL {
        return Ok(TimeSearch { t_star: lo, fidelity: f_lo, converged: true, evaluations: evals, monotonicity_violations: 0 });
    }
    let mut f_hi = final_fidelity(hi)?;
    evals.push((hi, f_hi));
    if (f_hi - target).abs() < FIDELITY_SEARCH_TOL {
        return Ok(TimeSearch { t_star: hi, fidelity: f_hi, converged: true, evaluations: evals, monotonicity_violations: 0 });
    }
    if !(f_lo < target && f_hi > target) {
        return Err(Error::Fit(format!(
            "bounds [{lo}, {hi}] do not bracket F = {target}: F(lo) = {f_lo}, F(hi) = {f_hi}"
        )));
    }
    let mut violations = 0;
    while evals.len() < MAX_SEARCH_RUNS {
        let mid = 0.5 * (lo + hi);
        let f = final_fidelity(mid)?;
        evals.push((mid, f));
        if f < f_lo || f > f_hi {
            violations += 1;
        }
        if (f - target).abs() < FIDELITY_SEARCH_TOL {
            return Ok(TimeSearch { t_star: mid, fidelity: f, converged: true, evaluations: evals, monotonicity_violations: violations });
        }
        if f < target {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    // Linear interpolation inside the final bracket.
    let w = (target - f_lo) / (f_hi - f_lo);
    Ok(TimeSearch {
        t_star: lo + w * (hi - lo),
        fidelity: target,
        converged: false,
        evaluations: evals,
        monotonicity_violations: violations,
    })
}

/// Boundary term `c(T)` used when inverting the scaling model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryModel {
    Zero,
    Constant(f64),
    /// `c(T) = c₀ e^{−rate·T}`.
    Exponential { c0: f64, rate: f64 },
}

impl BoundaryModel {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            BoundaryModel::Zero => 0.0,
            BoundaryModel::Constant(c) => c,
            BoundaryModel::Exponential { c0, rate } => c0 * (-rate * t).exp(),
        }
    }
}

/// Time at which the model `F = exp(−κ₀e^{−γT}N − c)` reaches `target`
/// with a constant boundary term.
pub fn model_time_for_fidelity(decay: &DecayFit, c: f64, n: f64, target: f64) -> Result<f64> {
    let budget = -target.ln() - c;
    if !(budget > 0.0) {
        return Err(domain!("boundary term alone exceeds the infidelity budget"));
    }
    Ok((decay.kappa0 * n / budget).ln() / decay.gamma)
}

/// Outcome of the sequential-crossover search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Crossover {
    /// `T*(N) = N` at this size.
    Found(f64),
    /// The adiabatic time already beats `T = N` at `N = 1`.
    BelowRange,
    /// No crossing below the search ceiling.
    AboveRange,
}

pub const CROSSOVER_CEILING: f64 = 1e9;

/// Largest `N` with `κ₀ N e^{−γN} + c(N) = −ln F_target`, the size above which
/// the adiabatic time `T*(N)` stays below the sequential time `N`.
pub fn crossover_size(decay: &DecayFit, boundary: BoundaryModel, target: f64) -> Result<Crossover> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain!("target fidelity must lie in (0, 1)"));
    }
    if !(decay.gamma > 0.0) || !(decay.kappa0 > 0.0) {
        return Err(domain!("crossover needs kappa0 > 0 and gamma > 0"));
    }
    let budget = -target.ln();
    let f = |n: f64| decay.kappa0 * n * (-decay.gamma * n).exp() + boundary.at(n) - budget;
    // κ₀ N e^{−γN} peaks at N = 1/γ and decreases beyond.
    let mut lo = (1.0 / decay.gamma).max(1.0);
    let mut hi = CROSSOVER_CEILING;
    if f(lo) <= 0.0 {
        return Ok(Crossover::BelowRange);
    }
    if f(hi) > 0.0 {
        return Ok(Crossover::AboveRange);
    }
    for _ in 0..300 {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(Crossover::Found(0.5 * (lo + hi)))
}
