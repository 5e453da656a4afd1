//! Bracketed bisection for monotone scalar equations.

use crate::error::{Error, Result};

/// Settings for [`solve_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct BisectionOptions {
    /// Initial bracket; grown geometrically until it contains the root.
    pub bracket: (f64, f64),
    /// Maximum number of halving steps once bracketed.
    pub max_iter: usize,
    /// Stop when `hi - lo <= rel_tol * hi`.
    pub rel_tol: f64,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            bracket: (1e-12, 1.0),
            max_iter: 200,
            rel_tol: 1e-10,
        }
    }
}

const MAX_BRACKET_STEPS: usize = 2000;

/// Solves `f(x) = target` for `x > 0`, where `f` is strictly increasing.
///
/// The bracket is doubled upward (and halved downward) until it straddles
/// the target, then bisected.
pub fn solve_increasing<F>(f: F, target: f64, opts: BisectionOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !target.is_finite() {
        return Err(Error::numerical(
            "bisection",
            format!("non-finite target {target}"),
        ));
    }
    let (mut lo, mut hi) = opts.bracket;
    let mut steps = 0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(Error::numerical(
                "bisection",
                format!("could not bracket target {target} from above (last hi = {hi})"),
            ));
        }
    }
    steps = 0;
    while f(lo) > target {
        hi = lo;
        lo *= 0.5;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(Error::numerical(
                "bisection",
                format!("target {target} lies below the function's infimum on (0, {hi}]"),
            ));
        }
    }

    for _ in 0..opts.max_iter {
        if hi - lo <= opts.rel_tol * hi {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= opts.rel_tol * hi {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::numerical(
            "bisection",
            format!(
                "no convergence after {} iterations: bracket [{lo}, {hi}]",
                opts.max_iter
            ),
        ))
    }
}

/// Smallest `x` in `[lo, hi]` with `f(x) >= target` for a non-decreasing `f`.
///
/// Returns `lo` if `f(lo) >= target` and `hi` if the target is never reached.
pub fn first_crossing<F>(f: F, target: f64, mut lo: f64, mut hi: f64, iters: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    if f(lo) >= target {
        return lo;
    }
    if f(hi) < target {
        return hi;
    }
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest `x` in `[lo, hi]` with `f(x) <= target` for a non-decreasing `f`.
pub fn last_crossing<F>(f: F, target: f64, mut lo: f64, mut hi: f64, iters: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    if f(hi) <= target {
        return hi;
    }
    if f(lo) > target {
        return lo;
    }
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
