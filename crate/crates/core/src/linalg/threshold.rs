//! Threshold solves for spectrum projections and multiplicity detection.

use crate::error::{CertProjError, Result};

/// Solves `sum_i max(0, s_i - sigma) = tau` for a nonincreasing, nonnegative
/// spectrum `s` with `sum(s) >= tau`, returning the clipped spectrum and the
/// threshold `sigma >= 0`.
///
/// The solve is the exact sort/prefix-scan formula, not a bisection: find the
/// largest head count k with `s_k > (sum_{i<=k} s_i - tau) / k`; the threshold
/// is that ratio at k.
pub fn simplex_threshold(s: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    validate_spectrum(s, tau, true)?;
    let total: f64 = s.iter().sum();
    if total < tau {
        return Err(CertProjError::input(format!(
            "simplex_threshold: spectrum sum {total:.6e} < tau {tau:.6e}; projection is the identity \
             and must be short-circuited by the caller"
        )));
    }
    let (clipped, sigma) = threshold_scan(s, tau);
    // Guard against a tiny negative sigma when sum(s) == tau up to roundoff.
    let sigma = sigma.max(0.0);
    Ok((clipped, sigma))
}

/// Same threshold solve but for spectra that may contain negative values and
/// with no feasibility requirement: for any `tau > 0` there is a unique real
/// `sigma` (possibly negative) with `sum_i max(0, s_i - sigma) = tau`.
///
/// This is the eigenvalue form used by the spectrahedron projection.
pub fn simplex_threshold_signed(s: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    validate_spectrum(s, tau, false)?;
    Ok(threshold_scan(s, tau))
}

fn validate_spectrum(s: &[f64], tau: f64, nonneg: bool) -> Result<()> {
    if s.is_empty() {
        return Err(CertProjError::input("threshold solve: empty spectrum"));
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(CertProjError::input(format!(
            "threshold solve: tau must be positive and finite, got {tau}"
        )));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(CertProjError::input("threshold solve: non-finite value"));
    }
    if s.windows(2).any(|w| w[0] < w[1]) {
        return Err(CertProjError::input(
            "threshold solve: values must be sorted nonincreasing",
        ));
    }
    if nonneg && s[s.len() - 1] < 0.0 {
        return Err(CertProjError::input(
            "threshold solve: negative value in a nonnegative spectrum",
        ));
    }
    Ok(())
}

fn threshold_scan(s: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let mut sigma = s[0] - tau; // k = 1 candidate
    let mut prefix = 0.0;
    for (k, &value) in s.iter().enumerate() {
        prefix += value;
        let candidate = (prefix - tau) / (k + 1) as f64;
        if value > candidate {
            sigma = candidate;
        } else {
            break;
        }
    }
    let clipped: Vec<f64> = s.iter().map(|&x| (x - sigma).max(0.0)).collect();
    (clipped, sigma)
}

/// Multiplicity of the top value in a nonincreasing sequence: the largest k
/// with `values[0] - values[k-1] <= rel_tol * max(|values[0]|, 1)`.
pub fn value_multiplicity(values: &[f64], rel_tol: f64) -> Result<usize> {
    if values.is_empty() {
        return Err(CertProjError::input("value_multiplicity: empty input"));
    }
    if !(0.0..1.0).contains(&rel_tol) || rel_tol <= 0.0 {
        return Err(CertProjError::input(format!(
            "value_multiplicity: rel_tol must be in (0, 1), got {rel_tol}"
        )));
    }
    let scale = values[0].abs().max(1.0);
    let top = values[0];
    let mut count = 0;
    for &v in values {
        if top - v <= rel_tol * scale {
            count += 1;
        } else {
            break;
        }
    }
    Ok(count)
}
