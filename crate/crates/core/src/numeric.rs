//! Scalar root finding and 1-D minimization helpers.
//!
//! Everything here assumes well-behaved monotone or unimodal inputs; callers
//! are responsible for establishing brackets before calling in.

use crate::error::Error;
use crate::Result;

/// Bisect a continuous function with a sign change over `[lo, hi]` until the
/// bracket is narrower than `xtol` or `|f|` drops below `ftol`.
///
/// Works for either orientation of the sign change. Returns the bracket
/// midpoint. NaN from the callback is treated as a hard failure.
pub(crate) fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    ftol: f64,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::Numerical("bisection callback returned NaN"));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::Numerical("bisection bracket has no sign change"));
    }
    // 200 halvings is enough to exhaust f64 resolution on any finite bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid.is_nan() {
            return Err(Error::Numerical("bisection callback returned NaN"));
        }
        if crate::math::abs(fmid) <= ftol {
            return Ok(mid);
        }
        if (fmid > 0.0) == (fhi > 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    let _ = flo;
    Ok(0.5 * (lo + hi))
}

/// Widen an upper endpoint until `f` turns negative.
///
/// `f(start)` must be `>= 0`; candidates are `start + scale * 2^k`. Returns
/// the first candidate with a negative value, or `None` if the function stays
/// nonnegative after `max_doublings` steps (callers treat that as "the
/// crossing is at infinity").
pub(crate) fn expand_until_negative<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    scale: f64,
    max_doublings: u32,
) -> Option<f64> {
    let mut step = scale.max(1e-12);
    for _ in 0..max_doublings {
        let x = start + step;
        if f(x) < 0.0 {
            return Some(x);
        }
        step *= 2.0;
    }
    None
}

/// Golden-section search for a minimum of a unimodal function on `[a, b]`.
///
/// Shrinks the bracket to width `xtol` and returns `(x, f(x))` for the best
/// probed point. Ties prefer the smaller abscissa so callers get a
/// deterministic leftmost minimizer on flat stretches.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8; // (sqrt(5) - 1) / 2
    if b <= a {
        return (a, f(a));
    }
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    while b - a > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2);
        }
        let (cx, cf) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if cf < best.1 || (cf == best.1 && cx < best.0) {
            best = (cx, cf);
        }
    }
    best
}
