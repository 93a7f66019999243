//! Bracketing helpers shared by the zero scans and crossing searches.

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite
/// sign. Stops when the bracket is narrower than `x_tol` or `|f| <= f_tol`.
///
/// Returns the midpoint of the final bracket together with the function
/// value there. Evaluation errors abort the search.
pub fn bisect<F, E>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64, f_tol: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok((lo, 0.0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0.0));
    }
    debug_assert!(f_lo.signum() != f_hi.signum(), "bisect called without a bracket");
    // 200 halvings exhaust any f64 interval.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol || mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid.abs() <= f_tol {
            return Ok((mid, f_mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok((mid, f(mid)?))
}

/// Uniform grid with `step` spacing from `start` through `stop`; the final
/// point is `stop` itself when the step does not divide the interval.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
    if let Some(&last) = out.last() {
        if stop - last > 1e-9 * step {
            out.push(stop);
        }
    }
    out
}
