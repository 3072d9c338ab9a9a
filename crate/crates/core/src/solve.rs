//! Root finding for increasing functions on a half-line.

use crate::error::{Error, Result};

const MAX_EXPANSIONS: usize = 2048;
const MAX_BISECTIONS: usize = 400;

/// Finds `x >= lower` with `f(x) = target` for `f` nondecreasing on `[lower, inf)`.
///
/// `f(lower) <= target` is assumed. The upper end of the bracket is pushed out
/// geometrically until `f` reaches the target, then the bracket is bisected
/// until the endpoints are adjacent in floating point (or nearly so).
pub fn solve_increasing<F>(f: F, target: f64, lower: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if f(lower) >= target {
        return Ok(lower);
    }
    let mut lo = lower;
    let mut width = lower.abs().max(1.0);
    let mut hi = lower + width;
    let mut expansions = 0;
    while f(hi) < target {
        lo = hi;
        width *= 2.0;
        hi = lower + width;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::NoConvergence(target));
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    // Return whichever endpoint lands closer to the target.
    let (flo, fhi) = (f(lo), f(hi));
    Ok(if (target - flo).abs() <= (fhi - target).abs() {
        lo
    } else {
        hi
    })
}
