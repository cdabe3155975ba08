//! Density of a weighted sum of independent Beta-distributed variables.
//!
//! One or two continuous terms are handled exactly (change of variables, or a
//! single convolution quadrature). With more terms, all but the last are folded
//! into one moment-matched Beta (means and variances add, the support follows
//! by interval arithmetic) and the fold is convolved exactly with the last term.

use super::kernel::{KernelProduct, KernelTerm};
use super::BetaMessage;
use crate::quad::QuadConfig;

/// Density of `sum_k c_k X_k` at `target`, with `X_k ~ msg_k` independent.
pub fn weighted_sum_density_at(terms: &[(f64, BetaMessage)], target: f64) -> f64 {
    log_weighted_sum_density_at(terms, target).exp()
}

/// Log of [`weighted_sum_density_at`]; `-inf` outside the achievable range.
pub fn log_weighted_sum_density_at(terms: &[(f64, BetaMessage)], target: f64) -> f64 {
    assert!(!terms.is_empty(), "weighted sum needs at least one term");
    let mut t = target;
    let mut scale = target.abs();
    let mut continuous: Vec<(f64, BetaMessage)> = Vec::with_capacity(terms.len());
    for &(c, msg) in terms {
        assert!(c != 0.0, "weighted sum coefficients must be nonzero");
        if msg.is_point() {
            t -= c * msg.mean();
            scale += (c * msg.mean()).abs();
        } else {
            continuous.push((c, msg));
        }
    }
    match continuous.len() {
        0 => {
            if t.abs() <= 1e-12 * (1.0 + scale) {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
        1 => {
            let (c, msg) = continuous[0];
            msg.log_density(t / c) - c.abs().ln()
        }
        2 => log_pair_density(continuous[0], continuous[1], t),
        k => {
            let folded = fold(&continuous[..k - 1]);
            if folded.is_point() {
                let (c, msg) = continuous[k - 1];
                return msg.log_density((t - folded.mean()) / c) - c.abs().ln();
            }
            log_pair_density((1.0, folded), continuous[k - 1], t)
        }
    }
}

/// Moment-matched Beta for `sum_k c_k X_k`.
fn fold(terms: &[(f64, BetaMessage)]) -> BetaMessage {
    let mut mu = 0.0;
    let mut var = 0.0;
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &(c, msg) in terms {
        mu += c * msg.mean();
        var += c * c * msg.variance();
        let (a, b) = (c * msg.lower(), c * msg.upper());
        lo += a.min(b);
        hi += a.max(b);
    }
    BetaMessage::fit(mu, var, lo, hi)
}

/// Exact density of `c1 X1 + c2 X2` at `t`:
/// `(1/|c2|) int f1(x) f2((t - c1 x) / c2) dx`.
fn log_pair_density(first: (f64, BetaMessage), second: (f64, BetaMessage), t: f64) -> f64 {
    let (c1, m1) = first;
    let (c2, m2) = second;
    // Second density as a kernel in x through x2 = u + v x.
    let u = t / c2;
    let v = -c1 / c2;
    let av = v.abs();
    let (lower, upper, am1, bm1) = if v > 0.0 {
        (
            (m2.lower() - u) / v,
            (m2.upper() - u) / v,
            m2.alpha() - 1.0,
            m2.beta() - 1.0,
        )
    } else {
        (
            (m2.upper() - u) / v,
            (m2.lower() - u) / v,
            m2.beta() - 1.0,
            m2.alpha() - 1.0,
        )
    };
    let mapped = KernelTerm {
        lower,
        upper,
        am1,
        bm1,
        log_scale: (m2.alpha() + m2.beta() - 2.0) * av.ln() - m2.log_norm(),
    };
    // Substituting x1 = (x - c1 ...) is unnecessary: integrate over x1 directly
    // in the scaled frame of the first term.
    let first_term = m1.kernel_term();
    let a = first_term.lower.max(mapped.lower);
    let b = first_term.upper.min(mapped.upper);
    if !(b > a) {
        return f64::NEG_INFINITY;
    }
    let product = KernelProduct::new(vec![first_term, mapped], a, b);
    let r = product.integrate(|_, p| [p], &QuadConfig::default());
    if !(r.value[0] > 0.0) {
        return f64::NEG_INFINITY;
    }
    r.log_peak + r.value[0].ln() - c2.abs().ln()
}
