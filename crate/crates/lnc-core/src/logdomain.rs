//! Small log-domain numeric helpers shared by the trellis and soft-detection
//! code paths. All routines treat `f64::NEG_INFINITY` as "probability zero"
//! and are exact up to floating-point rounding (no max-log approximations).

/// `log(sum(exp(x)))` with the usual max-shift; empty or all-`-inf` input
/// yields `-inf`.
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Normalizes a log-weight vector into probabilities (softmax). Returns
/// `None` when every entry is `-inf`.
pub(crate) fn softmax(xs: &[f64]) -> Option<Vec<f64>> {
    let z = logsumexp(xs);
    if !z.is_finite() {
        return None;
    }
    Some(xs.iter().map(|&x| (x - z).exp()).collect())
}

/// Shifts a log vector so its logsumexp is 0 (a proper log-probability
/// vector); all-`-inf` input is returned unchanged.
pub(crate) fn log_normalize(xs: &mut [f64]) {
    let z = logsumexp(xs);
    if z.is_finite() {
        for x in xs.iter_mut() {
            *x -= z;
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum() {
        let xs = [-1.0f64, -2.0, -3.0];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum();
        assert!((logsumexp(&xs) - direct.ln()).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[0.0, 0.0, f64::NEG_INFINITY]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
        assert!(softmax(&[f64::NEG_INFINITY; 2]).is_none());
    }

}
