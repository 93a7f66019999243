//! G-function of the anisotropic model in the A± coherent-state basis.
//!
//! The eigenstate is expanded on the displaced number states of
//! `A₊† = a† + β`, with upper and lower components carrying coefficients
//! `e_n` and `f_n`. Parity links this expansion to the one on `A₋† = a† − β`,
//! and matching the two at the bare vacuum gives
//!
//! ```text
//! G±(x) = Σ (f_n ∓ e_n) βⁿ,    x = E + λ₊
//! ```
//!
//! whose zeros are the regular eigenvalues. `e_n` carries the factor
//! `1/(n − x)`, so G has simple poles at x = 0, 1, 2, ... A pole is lifted
//! when the numerator of `e_n` vanishes there, which happens exactly at the
//! doubly degenerate exceptional points `E = n − λ₊`.
//!
//! Coefficients are stored scaled, `ẽ_n = e_n βⁿ` and `f̃_n = f_n βⁿ`. In
//! that form the recurrences only involve β², so nothing overflows at strong
//! coupling and the G-function is the plain sum of the scaled terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity};
use crate::roots;

/// Distance below which x counts as sitting on a pole.
pub const POLE_EPS: f64 = 1e-12;

/// Number of trailing terms inspected by the stopping rule.
const TAIL_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Relative size of the trailing terms at which the series is cut.
    pub tol: f64,
    /// Hard cap on the number of terms.
    pub n_max: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            n_max: 2000,
        }
    }
}

/// Scaled expansion coefficients at a fixed spectral variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSeries {
    pub x: f64,
    pub n_terms: usize,
    /// ẽ_n = e_n βⁿ
    pub e_scaled: Vec<f64>,
    /// f̃_n = f_n βⁿ, with f̃₀ = 1.
    pub f_scaled: Vec<f64>,
    pub converged: bool,
    /// Largest magnitude among the last few terms.
    pub tail_estimate: f64,
}

impl CoeffSeries {
    /// Σ (f̃_n ∓ ẽ_n), upper sign for even parity.
    pub fn g_sum(&self, parity: Parity) -> f64 {
        let s = parity.sign();
        self.f_scaled
            .iter()
            .zip(&self.e_scaled)
            .map(|(f, e)| f - s * e)
            .sum()
    }

    /// Components of the same state expanded in the A₋ basis:
    /// upper `(−1)ⁿ f̃_n`, lower `(−1)ⁿ ẽ_n`.
    pub fn a_minus_scaled(&self) -> (Vec<f64>, Vec<f64>) {
        let alt = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .map(|(n, c)| if n % 2 == 0 { *c } else { -*c })
                .collect()
        };
        (alt(&self.f_scaled), alt(&self.e_scaled))
    }
}

/// Value of G± at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GValue {
    pub x: f64,
    pub parity: Parity,
    pub value: f64,
    pub nearest_pole_distance: f64,
}

/// Distance from x to the nearest nonnegative integer.
pub fn nearest_pole(x: f64) -> (usize, f64) {
    if x <= 0.0 {
        return (0, -x);
    }
    let k = x.round();
    (k as usize, (x - k).abs())
}

/// Recurrence constants, all expressed through β² so the scaled form needs
/// no division by β.
#[derive(Debug, Clone, Copy)]
struct Recurrence {
    half_delta: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    beta_sq: f64,
}

impl Recurrence {
    fn new(params: &ModelParams) -> Result<Self> {
        let d = params.derive();
        if !(d.beta > 0.0) {
            return Err(Error::ZeroCoupling {
                g1: params.g1,
                g2: params.g2,
            });
        }
        Ok(Self {
            half_delta: 0.5 * params.delta,
            lambda_plus: d.lambda_plus,
            lambda_minus: d.lambda_minus,
            beta_sq: params.g1 * params.g2,
        })
    }

    /// f̃_m from the coefficients below m.
    fn next_f(&self, m: usize, x: f64, e: &[f64], f: &[f64]) -> f64 {
        if m == 0 {
            return 1.0;
        }
        let e1 = e[m - 1];
        let f1 = f[m - 1];
        let (e2, f2) = if m >= 2 { (e[m - 2], f[m - 2]) } else { (0.0, 0.0) };
        let diag = (m as f64) - 1.0 + 2.0 * self.beta_sq + 2.0 * self.lambda_plus - x;
        ((-self.half_delta - self.lambda_minus) * e1
            + self.lambda_minus * e2
            + diag * f1
            - (self.beta_sq + self.lambda_plus) * f2)
            / (2.0 * m as f64)
    }

    /// Numerator of ẽ_m; ẽ_m itself is this divided by (m − x).
    fn e_numerator(&self, m: usize, e: &[f64], f: &[f64]) -> f64 {
        let mut num = (self.half_delta - self.lambda_minus) * f[m];
        if m >= 1 {
            num += (self.beta_sq - self.lambda_plus) * e[m - 1] + self.lambda_minus * f[m - 1];
        }
        num
    }
}

fn check_pole(x: f64) -> Result<()> {
    let (pole, distance) = nearest_pole(x);
    if x > -POLE_EPS && distance < POLE_EPS {
        return Err(Error::PoleProximity { x, pole, distance });
    }
    Ok(())
}

/// Runs the recurrence either for a fixed number of terms or until the
/// stopping rule fires. Never errors on non-convergence; the flag says.
fn build_series(rec: &Recurrence, x: f64, fixed_terms: Option<usize>, opts: &SeriesOptions) -> CoeffSeries {
    let limit = fixed_terms.unwrap_or(opts.n_max).max(1);
    let mut e: Vec<f64> = Vec::with_capacity(limit.min(256));
    let mut f: Vec<f64> = Vec::with_capacity(limit.min(256));
    let mut sum_e = 0.0;
    let mut sum_f = 0.0;
    let mut converged = false;
    let mut tail = f64::INFINITY;

    for m in 0..limit {
        let fm = rec.next_f(m, x, &e, &f);
        f.push(fm);
        let em = rec.e_numerator(m, &e, &f) / (m as f64 - x);
        e.push(em);
        sum_e += em;
        sum_f += fm;

        if m + 1 >= TAIL_WINDOW {
            tail = e[m + 1 - TAIL_WINDOW..]
                .iter()
                .chain(&f[m + 1 - TAIL_WINDOW..])
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            let scale = (sum_e.abs() + sum_f.abs()).max(1.0);
            // Only trust the tail once every pole below has been passed.
            if (m as f64) > x + TAIL_WINDOW as f64 && tail < opts.tol * scale {
                converged = true;
                if fixed_terms.is_none() {
                    break;
                }
            } else if fixed_terms.is_some() {
                converged = false;
            }
        }
        if !(sum_e.is_finite() && sum_f.is_finite()) {
            break;
        }
    }

    CoeffSeries {
        x,
        n_terms: f.len(),
        e_scaled: e,
        f_scaled: f,
        converged,
        tail_estimate: tail,
    }
}

/// Scaled coefficients {ẽ_n, f̃_n} at spectral variable `x`, extended until
/// the trailing terms are negligible.
pub fn compute_coefficients(params: &ModelParams, x: f64, opts: &SeriesOptions) -> Result<CoeffSeries> {
    let rec = Recurrence::new(params)?;
    check_pole(x)?;
    let series = build_series(&rec, x, None, opts);
    if !series.converged {
        return Err(Error::NonConvergence {
            x,
            terms: series.n_terms,
            tail: series.tail_estimate,
        });
    }
    Ok(series)
}

pub fn g_function(params: &ModelParams, x: f64, parity: Parity, opts: &SeriesOptions) -> Result<GValue> {
    let series = compute_coefficients(params, x, opts)?;
    Ok(GValue {
        x,
        parity,
        value: series.g_sum(parity),
        nearest_pole_distance: nearest_pole(x).1,
    })
}

/// Tunables of the zero scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroScanOptions {
    pub grid_step: f64,
    /// Half-width of the excluded window around each pole.
    pub pole_width: f64,
    pub bisect_tol: f64,
    pub series: SeriesOptions,
}

impl Default for ZeroScanOptions {
    fn default() -> Self {
        Self {
            grid_step: 1e-3,
            pole_width: 1e-6,
            bisect_tol: 1e-10,
            series: SeriesOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScanWarning {
    /// A grid point was dropped because the series failed there.
    SkippedPoint { x: f64, reason: String },
    /// Two neighbouring samples both sit near zero without a sign change.
    SuspectedMissedZero { x_lo: f64, x_hi: f64 },
}

impl std::fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanWarning::SkippedPoint { x, reason } => write!(f, "skipped x = {x}: {reason}"),
            ScanWarning::SuspectedMissedZero { x_lo, x_hi } => {
                write!(f, "possible tangential zero in [{x_lo}, {x_hi}]")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroScan {
    /// Regular eigenvalues E = x − λ₊, ascending.
    pub energies: Vec<f64>,
    pub warnings: Vec<ScanWarning>,
}

/// Pole-free pieces of `[x_lo, x_hi]`: everything below zero, then the
/// open intervals `(k + δ, k + 1 − δ)`.
fn pole_free_segments(x_lo: f64, x_hi: f64, width: f64) -> Vec<(f64, f64)> {
    let mut segs = Vec::new();
    if x_lo < -width {
        segs.push((x_lo, x_hi.min(-width)));
    }
    let mut k = x_lo.max(0.0).floor();
    while k < x_hi {
        let lo = x_lo.max(k + width);
        let hi = x_hi.min(k + 1.0 - width);
        if lo < hi {
            segs.push((lo, hi));
        }
        k += 1.0;
    }
    segs
}

fn scan_segment(
    params: &ModelParams,
    lo: f64,
    hi: f64,
    parity: Parity,
    opts: &ZeroScanOptions,
    out: &mut ZeroScan,
) -> Result<()> {
    let lambda_plus = params.derive().lambda_plus;
    let eval = |x: f64| g_function(params, x, parity, &opts.series).map(|g| g.value);
    let near_zero = 10.0 * opts.bisect_tol;

    let mut prev: Option<(f64, f64)> = None;
    for x in roots::grid(lo, hi, opts.grid_step) {
        let value = match eval(x) {
            Ok(v) => v,
            Err(Error::ZeroCoupling { g1, g2 }) => return Err(Error::ZeroCoupling { g1, g2 }),
            Err(err) => {
                out.warnings.push(ScanWarning::SkippedPoint {
                    x,
                    reason: err.to_string(),
                });
                prev = None;
                continue;
            }
        };
        if let Some((xp, vp)) = prev {
            if vp == 0.0 {
                out.energies.push(xp - lambda_plus);
            } else if vp.signum() != value.signum() && value != 0.0 {
                match roots::bisect(eval, xp, x, opts.bisect_tol, 0.0) {
                    Ok((root, _)) => out.energies.push(root - lambda_plus),
                    Err(err) => out.warnings.push(ScanWarning::SkippedPoint {
                        x: 0.5 * (xp + x),
                        reason: err.to_string(),
                    }),
                }
            } else if vp.abs() < near_zero && value.abs() < near_zero {
                out.warnings.push(ScanWarning::SuspectedMissedZero { x_lo: xp, x_hi: x });
            }
        }
        prev = Some((x, value));
    }
    if let Some((x, v)) = prev {
        if v == 0.0 {
            out.energies.push(x - lambda_plus);
        }
    }
    Ok(())
}

/// Regular eigenvalues of one parity sector whose spectral variable lies in
/// `x_range`. Sign changes across a pole are never reported.
pub fn find_regular_zeros(
    params: &ModelParams,
    x_range: (f64, f64),
    parity: Parity,
    opts: &ZeroScanOptions,
) -> Result<ZeroScan> {
    let (x_lo, x_hi) = x_range;
    if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
        return Err(Error::InvalidParameter(format!("bad x range ({x_lo}, {x_hi})")));
    }
    Recurrence::new(params)?;
    let mut out = ZeroScan::default();
    for (lo, hi) in pole_free_segments(x_lo, x_hi, opts.pole_width) {
        scan_segment(params, lo, hi, parity, opts, &mut out)?;
    }
    out.energies.sort_by(f64::total_cmp);
    out.energies.dedup_by(|a, b| (*a - *b).abs() < opts.bisect_tol);
    Ok(out)
}

/// Lower bound on the spectral variable: the coupling part of H is bounded
/// below by −max(g1², g2²), so E ≥ −|Δ|/2 − max(g1², g2²).
pub fn spectral_lower_bound(params: &ModelParams) -> f64 {
    let d = params.derive();
    -d.lambda_minus.abs() - 0.5 * params.delta.abs()
}

/// The lowest `count` regular eigenvalues of a parity sector, scanning one
/// pole interval at a time from the spectral lower bound upward.
pub fn lowest_regular_levels(
    params: &ModelParams,
    parity: Parity,
    count: usize,
    opts: &ZeroScanOptions,
) -> Result<ZeroScan> {
    Recurrence::new(params)?;
    let start = spectral_lower_bound(params) - 0.25;
    let d = params.derive();
    let x_cap = d.lambda_plus + params.delta.abs() + 2.0 * count as f64 + 10.0;

    let mut out = ZeroScan::default();
    let mut lo = start;
    while out.energies.len() < count && lo < x_cap {
        let hi = if lo < 0.0 { 0.0 } else { lo.floor() + 1.0 };
        for (a, b) in pole_free_segments(lo, hi, opts.pole_width) {
            scan_segment(params, a, b, parity, opts, &mut out)?;
        }
        lo = hi;
    }
    out.energies.sort_by(f64::total_cmp);
    out.energies.dedup_by(|a, b| (*a - *b).abs() < opts.bisect_tol);
    out.energies.truncate(count);
    Ok(out)
}

/// Numerator of ẽ_n at the pole x = n (scaled by βⁿ). It vanishes exactly
/// when E = n − λ₊ is a doubly degenerate eigenvalue.
pub fn exceptional_condition(params: &ModelParams, n: usize) -> Result<f64> {
    let rec = Recurrence::new(params)?;
    let x = n as f64;
    let mut e = Vec::with_capacity(n + 1);
    let mut f = Vec::with_capacity(n + 1);
    for m in 0..n {
        f.push(rec.next_f(m, x, &e, &f));
        e.push(rec.e_numerator(m, &e, &f) / (m as f64 - x));
    }
    f.push(rec.next_f(n, x, &e, &f));
    Ok(rec.e_numerator(n, &e, &f))
}

/// |T_n| at or below this counts as an exceptional level in
/// [`exceptional_levels`].
pub const EXCEPTIONAL_TOL: f64 = 1e-12;

/// Exceptional levels at fixed parameters: every n ≤ `x_max` whose
/// condition vanishes to within `tol`, as (n, n − λ₊). Each such level is
/// shared by both parity sectors and is never a zero of G±.
pub fn exceptional_levels(params: &ModelParams, x_max: f64, tol: f64) -> Result<Vec<(usize, f64)>> {
    let lambda_plus = params.derive().lambda_plus;
    let mut out = Vec::new();
    let mut n = 0usize;
    while n as f64 <= x_max {
        if exceptional_condition(params, n)?.abs() <= tol {
            out.push((n, n as f64 - lambda_plus));
        }
        n += 1;
    }
    Ok(out)
}

/// n = 0 exceptional coupling, g1 = √(Δ/(1 − r²)). Exists only for r < 1
/// and Δ > 0.
pub fn first_crossing_coupling(delta: f64, r: f64) -> Option<f64> {
    let denom = 1.0 - r * r;
    (denom > 0.0 && delta > 0.0).then(|| (delta / denom).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSolution {
    pub n: usize,
    pub g1_star: f64,
    pub g2_star: f64,
    /// n − λ₊ at the root.
    pub energy: f64,
    pub condition_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalOptions {
    pub grid_step: f64,
    /// Target for |T_n| at a reported root.
    pub tol: f64,
}

impl Default for ExceptionalOptions {
    fn default() -> Self {
        Self {
            grid_step: 1e-3,
            tol: 1e-10,
        }
    }
}

/// Roots in g1 of the n-th exceptional condition along the ray g2 = r·g1.
pub fn find_exceptional(
    delta: f64,
    r: f64,
    n: usize,
    g1_range: (f64, f64),
    opts: &ExceptionalOptions,
) -> Result<Vec<ExceptionalSolution>> {
    let (g_lo, g_hi) = g1_range;
    if !(g_lo > 0.0 && g_hi > g_lo && g_hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "g1 range must be a finite positive interval, got ({g_lo}, {g_hi})"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::ZeroCoupling { g1: g_lo, g2: r * g_lo });
    }
    let condition = |g1: f64| -> Result<f64> {
        let p = ModelParams::with_ratio(delta, g1, r)?;
        exceptional_condition(&p, n)
    };
    let solution = |g1: f64, residual: f64| -> Result<ExceptionalSolution> {
        let p = ModelParams::with_ratio(delta, g1, r)?;
        Ok(ExceptionalSolution {
            n,
            g1_star: g1,
            g2_star: p.g2,
            energy: n as f64 - p.derive().lambda_plus,
            condition_residual: residual,
        })
    };

    let grid = roots::grid(g_lo, g_hi, opts.grid_step);
    let values = grid.iter().map(|&g| condition(g)).collect::<Result<Vec<_>>>()?;
    let mut found = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            found.push(solution(grid[i], 0.0)?);
            continue;
        }
        if i + 1 < grid.len() && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
            let (g, t) = roots::bisect(condition, grid[i], grid[i + 1], 1e-15 * grid[i + 1], 0.0)?;
            found.push(solution(g, t)?);
        }
    }
    Ok(found)
}

/// ECS expansion of a regular eigenstate: the A₊ components of the state
/// with energy `energy`, together with the G-value at that energy as a
/// consistency residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wavefunction {
    pub energy: f64,
    pub parity: Parity,
    pub series: CoeffSeries,
    pub g_residual: f64,
}

/// With `n_terms = None` the series length follows the convergence rule.
pub fn wavefunction_coefficients(
    params: &ModelParams,
    energy: f64,
    parity: Parity,
    n_terms: Option<usize>,
    opts: &SeriesOptions,
) -> Result<Wavefunction> {
    let x = params.spectral_variable(energy);
    let series = match n_terms {
        None => compute_coefficients(params, x, opts)?,
        Some(n) => {
            let rec = Recurrence::new(params)?;
            check_pole(x)?;
            build_series(&rec, x, Some(n), opts)
        }
    };
    let g_residual = series.g_sum(parity);
    Ok(Wavefunction {
        energy,
        parity,
        series,
        g_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> ModelParams {
        ModelParams::new(0.7, 0.8, 0.6).unwrap()
    }

    /// Unscaled recurrence, written directly with the 1/β factors.
    fn unscaled(params: &ModelParams, x: f64, terms: usize) -> (Vec<f64>, Vec<f64>) {
        let d = params.derive();
        let (b, lp, lm, hd) = (d.beta, d.lambda_plus, d.lambda_minus, params.delta / 2.0);
        let mut e = vec![(hd - lm) / (0.0 - x)];
        let mut f = vec![1.0];
        for m in 1..terms {
            let em2 = if m >= 2 { e[m - 2] } else { 0.0 };
            let fm2 = if m >= 2 { f[m - 2] } else { 0.0 };
            let fm = ((-hd - lm) * e[m - 1] + lm / b * em2 + (m as f64 - 1.0 + 2.0 * b * b + 2.0 * lp - x) * f[m - 1]
                - (b + lp / b) * fm2)
                / (2.0 * b * m as f64);
            f.push(fm);
            e.push(((b - lp / b) * e[m - 1] + (hd - lm) * fm + lm / b * f[m - 1]) / (m as f64 - x));
        }
        (e, f)
    }

    #[test]
    fn first_coefficients_by_hand() {
        let p = fig1();
        let s = compute_coefficients(&p, 0.5, &SeriesOptions::default()).unwrap();
        assert_eq!(s.f_scaled[0], 1.0);
        assert!((s.e_scaled[0] + 0.42).abs() < 1e-15);
        let beta = p.derive().beta;
        assert!((s.f_scaled[1] / beta - 1.20219).abs() < 1e-5);
    }

    #[test]
    fn scaled_matches_unscaled_recurrence() {
        let p = fig1();
        let beta = p.derive().beta;
        for &x in &[-0.7, 0.5, 2.3, 5.9] {
            let s = compute_coefficients(&p, x, &SeriesOptions::default()).unwrap();
            let (e, f) = unscaled(&p, x, 25);
            for n in 0..25 {
                let bn = beta.powi(n as i32);
                assert!((s.e_scaled[n] - e[n] * bn).abs() <= 1e-12 * (e[n] * bn).abs().max(1e-300) + 1e-15);
                assert!((s.f_scaled[n] - f[n] * bn).abs() <= 1e-12 * (f[n] * bn).abs().max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn series_converges_and_reports() {
        let s = compute_coefficients(&fig1(), 1.5, &SeriesOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.e_scaled.len(), s.n_terms);
        assert_eq!(s.f_scaled.len(), s.n_terms);
        assert!(s.tail_estimate < 1e-14 * 100.0);
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = SeriesOptions { tol: 1e-14, n_max: 8 };
        match compute_coefficients(&fig1(), 0.5, &opts) {
            Err(Error::NonConvergence { terms, .. }) => assert_eq!(terms, 8),
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn poles_and_zero_coupling_are_rejected() {
        let p = fig1();
        assert!(matches!(
            g_function(&p, 2.0, Parity::Even, &SeriesOptions::default()),
            Err(Error::PoleProximity { pole: 2, .. })
        ));
        let jc = ModelParams::new(0.7, 0.8, 0.0).unwrap();
        assert!(matches!(
            g_function(&jc, 0.5, Parity::Even, &SeriesOptions::default()),
            Err(Error::ZeroCoupling { .. })
        ));
    }

    #[test]
    fn weak_coupling_limit() {
        let p = ModelParams::new(0.7, 1e-5, 1e-5).unwrap();
        // The scaled terms stay O(1) as β → 0, so only the zero location of
        // the m = 0 part, x = −Δ/2, survives as a pointwise statement.
        let lp = p.derive().lambda_plus;
        let opts = SeriesOptions::default();
        let g = |x: f64| g_function(&p, x, Parity::Even, &opts).unwrap().value;
        assert!(g(-0.35 + lp - 1e-4).signum() != g(-0.35 + lp + 1e-4).signum());
        let zeros = lowest_regular_levels(&p, Parity::Even, 3, &ZeroScanOptions::default()).unwrap();
        let expected = [-0.35, 1.35, 1.65];
        for (z, e) in zeros.energies.iter().zip(expected) {
            assert!((z - e).abs() < 1e-6, "{z} vs {e}");
        }
        let zeros = lowest_regular_levels(&p, Parity::Odd, 3, &ZeroScanOptions::default()).unwrap();
        let expected = [0.35, 0.65, 2.35];
        for (z, e) in zeros.energies.iter().zip(expected) {
            assert!((z - e).abs() < 1e-6, "{z} vs {e}");
        }
    }

    #[test]
    fn sign_flips_across_poles() {
        let p = fig1();
        let opts = SeriesOptions::default();
        for parity in Parity::BOTH {
            for k in 0..6 {
                let k = k as f64;
                let left = g_function(&p, k - 1e-7, parity, &opts).unwrap().value;
                let right = g_function(&p, k + 1e-7, parity, &opts).unwrap().value;
                assert!(left.signum() != right.signum(), "no flip at {k} ({parity})");
            }
        }
    }

    #[test]
    fn residue_is_finite_from_both_sides() {
        let p = fig1();
        let opts = SeriesOptions::default();
        for k in [1.0, 3.0] {
            let residue = |h: f64| -> f64 { h * g_function(&p, k + h, Parity::Odd, &opts).unwrap().value };
            // first-order Richardson on h and h/2
            let from_right = 2.0 * residue(1e-5) - residue(2e-5);
            let from_left = 2.0 * residue(-1e-5) - residue(-2e-5);
            assert!((from_right - from_left).abs() < 1e-6 * from_right.abs().max(1.0));
            assert!(from_right.is_finite() && from_right.abs() > 0.0);
        }
    }

    #[test]
    fn displaced_oscillator_at_zero_splitting() {
        // Every level m − g² sits on the pole x = m: none is a regular zero
        // and every condition vanishes.
        let g = 0.45;
        let p = ModelParams::new(0.0, g, g).unwrap();
        for parity in Parity::BOTH {
            let zs = find_regular_zeros(&p, (-1.0, 4.5), parity, &ZeroScanOptions::default()).unwrap();
            assert!(zs.energies.is_empty(), "{:?}", zs.energies);
        }
        let levels = exceptional_levels(&p, 4.5, EXCEPTIONAL_TOL).unwrap();
        assert_eq!(levels.len(), 5);
        for (m, e) in levels {
            assert!((e - (m as f64 - g * g)).abs() < 1e-15);
        }
        let generic = ModelParams::new(0.7, 0.8, 0.4).unwrap();
        assert!(exceptional_levels(&generic, 6.0, EXCEPTIONAL_TOL).unwrap().is_empty());
    }

    #[test]
    fn segments_skip_poles() {
        let segs = pole_free_segments(-1.0, 2.5, 1e-6);
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[0], (-1.0, -1e-6));
        assert_eq!(segs[1], (1e-6, 1.0 - 1e-6));
        assert_eq!(segs[3], (2.0 + 1e-6, 2.5));
    }

    #[test]
    fn exceptional_n0_is_linear_condition() {
        let p = ModelParams::new(0.7, 0.9, 0.3).unwrap();
        let t0 = exceptional_condition(&p, 0).unwrap();
        assert!((t0 - (0.35 - p.derive().lambda_minus)).abs() < 1e-15);
    }

    #[test]
    fn exceptional_n0_critical_coupling() {
        let sols = find_exceptional(0.7, 0.5, 0, (0.01, 1.5), &ExceptionalOptions::default()).unwrap();
        assert_eq!(sols.len(), 1);
        let gc = first_crossing_coupling(0.7, 0.5).unwrap();
        assert!((sols[0].g1_star - gc).abs() < 1e-12);
        assert!((gc - 0.9661).abs() < 1e-4);
        assert!(sols[0].condition_residual.abs() < 1e-10);
        let lp = 0.5 * (gc * gc + 0.25 * gc * gc);
        assert!((sols[0].energy + lp).abs() < 1e-12);

        assert!(find_exceptional(0.7, 2.0, 0, (0.01, 1.5), &ExceptionalOptions::default())
            .unwrap()
            .is_empty());
        assert!(first_crossing_coupling(0.7, 2.0).is_none());
    }

    #[test]
    fn exceptional_n1_isotropic_reduction() {
        // T_1 = (Δ/2)·(Δ²/4 + 4g² − 1)/2 when g1 = g2 = g.
        for &(delta, g) in &[(0.7, 0.3), (0.4, 0.8), (1.1, 0.5)] {
            let p = ModelParams::new(delta, g, g).unwrap();
            let t1 = exceptional_condition(&p, 1).unwrap();
            let expected = 0.5 * delta * 0.5 * (0.25 * delta * delta + 4.0 * g * g - 1.0);
            assert!((t1 - expected).abs() < 1e-14, "{t1} vs {expected}");
        }
        let sols = find_exceptional(0.7, 1.0, 1, (0.01, 1.5), &ExceptionalOptions::default()).unwrap();
        let g_exact = ((1.0 - 0.49 / 4.0) / 4.0f64).sqrt();
        assert_eq!(sols.len(), 1);
        assert!((sols[0].g1_star - g_exact).abs() < 1e-12);
        assert!((g_exact - 0.468374).abs() < 1e-6);
        assert!(sols[0].condition_residual.abs() < 1e-10);
    }

    #[test]
    fn exceptional_n1_anisotropic_closed_form() {
        // 2(g1² + g2²) − 1 + (Δ² − (g1² − g2²)²)/4 + 2/(Δ/(g1² − g2²) − 1) = 0
        // has the same roots as T_1.
        let (delta, r) = (0.7, 0.5);
        let closed = |g1: f64| {
            let (a, b) = (g1 * g1, r * r * g1 * g1);
            2.0 * (a + b) - 1.0 + (delta * delta - (a - b).powi(2)) / 4.0 + 2.0 / (delta / (a - b) - 1.0)
        };
        let sols = find_exceptional(delta, r, 1, (0.01, 1.5), &ExceptionalOptions::default()).unwrap();
        assert!(!sols.is_empty());
        for s in sols {
            assert!(closed(s.g1_star).abs() < 1e-9, "closed form {} at {}", closed(s.g1_star), s.g1_star);
        }
    }

    #[test]
    fn wavefunction_series_is_consistent() {
        let p = fig1();
        let ground = lowest_regular_levels(&p, Parity::Even, 1, &ZeroScanOptions::default()).unwrap().energies[0];
        let wf = wavefunction_coefficients(&p, ground, Parity::Even, None, &SeriesOptions::default()).unwrap();
        assert_eq!(wf.series.f_scaled[0], 1.0);
        assert!(wf.g_residual.abs() < 1e-8);
        let last = *wf.series.f_scaled.last().unwrap();
        assert!(last.abs() < 1e-12);

        let (up, down) = wf.series.a_minus_scaled();
        assert_eq!(up[1], -wf.series.f_scaled[1]);
        assert_eq!(down[2], wf.series.e_scaled[2]);

        let fixed = wavefunction_coefficients(&p, ground, Parity::Even, Some(10), &SeriesOptions::default()).unwrap();
        assert_eq!(fixed.series.n_terms, 10);
        assert!(!fixed.series.converged);
    }

    #[test]
    fn spin_flip_exchanges_parities() {
        let p = ModelParams::new(0.9, 0.7, 0.35).unwrap();
        let q = p.spin_flipped();
        let opts = SeriesOptions::default();
        for &x in &[-0.4, 0.3, 1.7, 3.2] {
            let a = g_function(&p, x, Parity::Even, &opts).unwrap().value;
            let b = g_function(&q, x, Parity::Odd, &opts).unwrap().value;
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    proptest::proptest! {
        #[test]
        fn spin_flip_exchanges_sectors(delta in -1.5f64..1.5, g1 in 0.05f64..1.2, g2 in 0.05f64..1.2, x in -0.9f64..4.9) {
            proptest::prop_assume!(nearest_pole(x).1 > 1e-3);
            let p = ModelParams::new(delta, g1, g2).unwrap();
            let opts = SeriesOptions::default();
            let a = g_function(&p, x, Parity::Even, &opts).unwrap().value;
            let b = g_function(&p.spin_flipped(), x, Parity::Odd, &opts).unwrap().value;
            proptest::prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }
}
