//! Parameter settings derived from the expansion rate `c`.

use crate::error::{RbcError, Result};

// Guards against `ceil` jumping a whole unit on values like 200.00000000000003.
fn ceil_tol(v: f64) -> f64 {
    (v - v.abs() * 1e-12).ceil()
}

fn clamp_count(v: f64, n: usize) -> usize {
    if v.is_nan() {
        return 1;
    }
    (ceil_tol(v).max(1.0) as usize).min(n)
}

fn check_c(c: f64) -> Result<()> {
    if !c.is_finite() || c < 1.0 {
        return Err(RbcError::invalid(format!("expansion rate must be a finite value >= 1, got {c}")));
    }
    Ok(())
}

/// Representative count for exact search: `⌈c^{3/2}·√n⌉`, clamped to
/// `[1, n]`. This balances the two brute-force steps of a query.
pub fn standard_params_exact(n: usize, c: f64) -> Result<usize> {
    if n == 0 {
        return Err(RbcError::invalid("n must be at least 1"));
    }
    check_c(c)?;
    Ok(clamp_count(c.powf(1.5) * (n as f64).sqrt(), n))
}

/// `(n_r, s)` for one-shot search with failure probability at most `delta`:
/// `n_r = s = ⌈c·√n·√ln(1/δ)⌉`, clamped to `[1, n]`.
pub fn one_shot_params(n: usize, c: f64, delta: f64) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(RbcError::invalid("n must be at least 1"));
    }
    check_c(c)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(RbcError::invalid(format!("delta must be in (0, 1), got {delta}")));
    }
    let v = clamp_count(c * (n as f64).sqrt() * (1.0 / delta).ln().sqrt(), n);
    Ok((v, v))
}
