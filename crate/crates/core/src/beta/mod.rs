//! Truncated generalized Beta distributions: the message family.
//!
//! A message on `[A, B]` has density `(x - A)^(alpha-1) (B - x)^(beta-1) / Z` with
//! `Z = (B - A)^(alpha+beta-1) Beta(alpha, beta)`. Messages whose variance falls
//! below `1e-14 (B - A)^2`, or whose support is narrower than [`PIN_WIDTH`], are
//! point masses (`A == B`).

pub(crate) mod kernel;
mod sum;

pub use sum::{log_weighted_sum_density_at, weighted_sum_density_at};

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::PIN_WIDTH;
use crate::quad::QuadConfig;
use kernel::{xlogy, KernelProduct, KernelTerm};

/// Relative variance below which a message collapses to a point mass.
pub const POINT_MASS_REL_VAR: f64 = 1e-14;

/// A generalized Beta message with cached mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMessage {
    lower: f64,
    upper: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
    sigma2: f64,
}

impl BetaMessage {
    /// Message with the given shape on `[lower, upper]`.
    pub fn new(alpha: f64, beta: f64, lower: f64, upper: f64) -> Result<Self> {
        let (mu, sigma2) = moments_from_shape(alpha, beta, lower, upper)?;
        Ok(Self {
            lower,
            upper,
            alpha,
            beta,
            mu,
            sigma2,
        })
    }

    /// Uniform message; a point mass when the interval is degenerate.
    pub fn uniform(lower: f64, upper: f64) -> Self {
        if upper - lower < PIN_WIDTH {
            return Self::point(0.5 * (lower + upper));
        }
        let w = upper - lower;
        Self {
            lower,
            upper,
            alpha: 1.0,
            beta: 1.0,
            mu: 0.5 * (lower + upper),
            sigma2: w * w / 12.0,
        }
    }

    /// Dirac mass at `x`.
    pub fn point(x: f64) -> Self {
        Self {
            lower: x,
            upper: x,
            alpha: 1.0,
            beta: 1.0,
            mu: x,
            sigma2: 0.0,
        }
    }

    /// Moment-matched message on `[lower, upper]` with shapes clamped to `>= 1`.
    ///
    /// Never fails: degenerate supports and vanishing variances give point
    /// masses, and variances too large for the support give the uniform.
    pub fn fit(mu: f64, sigma2: f64, lower: f64, upper: f64) -> Self {
        let width = upper - lower;
        if !(width >= PIN_WIDTH) {
            return Self::point(0.5 * (lower + upper));
        }
        let mu = if mu.is_finite() {
            mu.clamp(lower, upper)
        } else {
            0.5 * (lower + upper)
        };
        if !(sigma2 >= POINT_MASS_REL_VAR * width * width) {
            return Self::point(mu);
        }
        let (alpha, beta) = clamped_shape(mu, sigma2, lower, upper);
        Self::new(alpha, beta, lower, upper).unwrap_or_else(|_| Self::uniform(lower, upper))
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.sigma2
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    /// `ln Z`, the log of the normalization constant.
    pub fn log_norm(&self) -> f64 {
        (self.alpha + self.beta - 1.0) * self.width().ln() + ln_beta(self.alpha, self.beta)
    }

    /// Log of the unnormalized kernel.
    pub fn log_kernel(&self, x: f64) -> f64 {
        xlogy(self.alpha - 1.0, x - self.lower) + xlogy(self.beta - 1.0, self.upper - x)
    }

    /// Log of the normalized density; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if self.is_point() || !(x >= self.lower && x <= self.upper) {
            return f64::NEG_INFINITY;
        }
        self.log_kernel(x) - self.log_norm()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub(crate) fn kernel_term(&self) -> KernelTerm {
        KernelTerm {
            lower: self.lower,
            upper: self.upper,
            am1: self.alpha - 1.0,
            bm1: self.beta - 1.0,
            log_scale: -self.log_norm(),
        }
    }

    /// Whether `[lo, hi]` contains the whole support.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.lower >= lo && self.upper <= hi
    }
}

fn clamped_shape(mu: f64, sigma2: f64, lower: f64, upper: f64) -> (f64, f64) {
    let width = upper - lower;
    let lambda = (mu - lower) * (upper - mu) / sigma2 - 1.0;
    let alpha = lambda * (mu - lower) / width;
    let beta = lambda * (upper - mu) / width;
    let clamp = |v: f64| if v.is_finite() { v.max(1.0) } else { 1.0 };
    (clamp(alpha), clamp(beta))
}

/// Mean and variance of the Beta(`alpha`, `beta`) law on `[lower, upper]`.
pub fn moments_from_shape(alpha: f64, beta: f64, lower: f64, upper: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Domain(format!("shape ({alpha}, {beta}) must be positive")));
    }
    if !(lower < upper) {
        return Err(Error::Domain(format!("support [{lower}, {upper}] is empty")));
    }
    let s = alpha + beta;
    let w = upper - lower;
    Ok((
        (lower * beta + upper * alpha) / s,
        alpha * beta * w * w / (s * s * (1.0 + s)),
    ))
}

/// Shape parameters matching a mean and variance on `[lower, upper]`, clamped to `>= 1`.
pub fn shape_from_moments(mu: f64, sigma2: f64, lower: f64, upper: f64) -> Result<(f64, f64)> {
    let degenerate = || Error::DegenerateMoments {
        mu,
        sigma2,
        lo: lower,
        hi: upper,
    };
    if !(lower < upper) || !(mu > lower && mu < upper) {
        return Err(degenerate());
    }
    let bound = (mu - lower) * (upper - mu);
    let eps = 1e-15 * (upper - lower).powi(2);
    if !(sigma2 > 0.0) || sigma2 >= bound - eps {
        return Err(degenerate());
    }
    Ok(clamped_shape(mu, sigma2, lower, upper))
}

/// Mean and variance of `msg` restricted and renormalized to `[lo, hi]`.
pub fn truncated_moments(msg: &BetaMessage, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let a = msg.lower.max(lo);
    let b = msg.upper.min(hi);
    if !(b - a > PIN_WIDTH) {
        return Err(Error::EmptyOverlap { lo, hi });
    }
    if msg.within(lo, hi) {
        return Ok((msg.mu, msg.sigma2));
    }
    let product = KernelProduct::new(vec![msg.kernel_term()], a, b);
    product
        .moments(&QuadConfig::default())
        .map(|(_, mean, var)| (mean, var))
        .ok_or(Error::NumericalUnderflow { lo: a, hi: b })
}

/// Moments and log-normalizer of a normalized product of messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductMoments {
    pub mean: f64,
    pub variance: f64,
    /// `ln int prod_c m_c(x) dx`; `+inf` when the product is a point mass.
    pub log_norm: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Support of the product of `msgs` within `[lo, hi]`, or `None` if empty.
pub fn product_support(msgs: &[BetaMessage], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let a = msgs.iter().fold(lo, |m, msg| m.max(msg.lower));
    let b = msgs.iter().fold(hi, |m, msg| m.min(msg.upper));
    (b >= a).then_some((a, b))
}

/// Mean, variance and log-normalizer of `prod_c m_c(x)` on `[lo, hi]`.
pub fn product_moments(msgs: &[BetaMessage], lo: f64, hi: f64) -> Result<ProductMoments> {
    if msgs.is_empty() {
        return Err(Error::Parameter("product of zero messages".into()));
    }
    let (a, b) = product_support(msgs, lo, hi).ok_or(Error::EmptyOverlap { lo, hi })?;
    if b - a < PIN_WIDTH {
        let x = 0.5 * (a + b);
        return Ok(ProductMoments {
            mean: x,
            variance: 0.0,
            log_norm: f64::INFINITY,
            lower: x,
            upper: x,
        });
    }
    if msgs.len() == 1 {
        let m = &msgs[0];
        if m.within(a, b) {
            return Ok(ProductMoments {
                mean: m.mu,
                variance: m.sigma2,
                log_norm: 0.0,
                lower: a,
                upper: b,
            });
        }
    }
    let product = KernelProduct::new(msgs.iter().map(BetaMessage::kernel_term).collect(), a, b);
    let (log_norm, mean, variance) = product
        .moments(&QuadConfig::default())
        .ok_or(Error::NumericalUnderflow { lo: a, hi: b })?;
    if !log_norm.is_finite() {
        return Err(Error::NumericalUnderflow { lo: a, hi: b });
    }
    Ok(ProductMoments {
        mean,
        variance,
        log_norm,
        lower: a,
        upper: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadConfig};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    // Independent oracle: raw quadrature of the normalized density.
    fn quadrature_moments(alpha: f64, beta: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
        let cfg = QuadConfig::with_tol(1e-13, 1e-12);
        let lnz = (alpha + beta - 1.0) * (hi - lo).ln() + ln_beta(alpha, beta);
        let f = |x: f64| ((alpha - 1.0) * (x - lo).ln() + (beta - 1.0) * (hi - x).ln() - lnz).exp();
        let r = integrate(|x| [f(x), x * f(x), x * x * f(x)], lo, hi, &cfg).value;
        (r[0], r[1], r[2] - r[1] * r[1])
    }

    #[test]
    fn uniform_moments() {
        let (mu, s2) = moments_from_shape(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(mu, 0.5);
        assert!(close(s2, 1.0 / 12.0, 1e-15));
    }

    #[test]
    fn symmetric_beta_moments() {
        let (mu, s2) = moments_from_shape(2.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(mu, 0.5);
        assert!(close(s2, 0.05, 1e-15));
    }

    #[test]
    fn skewed_beta_on_shifted_support() {
        // Oracle: density (x + 1) / 2 on [-1, 1]; mean 1/3, variance 1/3 - 1/9 = 2/9.
        let (z, m, v) = quadrature_moments(2.0, 1.0, -1.0, 1.0);
        assert!(close(z, 1.0, 1e-10));
        assert!(close(m, 1.0 / 3.0, 1e-10));
        assert!(close(v, 2.0 / 9.0, 1e-10));
        let (mu, s2) = moments_from_shape(2.0, 1.0, -1.0, 1.0).unwrap();
        assert!(close(mu, 1.0 / 3.0, 1e-14));
        assert!(close(s2, 2.0 / 9.0, 1e-14));
    }

    #[test]
    fn invalid_shape_is_domain_error() {
        assert!(matches!(moments_from_shape(0.0, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(moments_from_shape(1.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn shape_inversion_examples() {
        let (a, b) = shape_from_moments(0.5, 1.0 / 12.0, 0.0, 1.0).unwrap();
        assert!(close(a, 1.0, 1e-12) && close(b, 1.0, 1e-12));
        let (a, b) = shape_from_moments(0.5, 0.05, 0.0, 1.0).unwrap();
        assert!(close(a, 2.0, 1e-12) && close(b, 2.0, 1e-12));
        let (a, b) = shape_from_moments(0.25, 0.01, 0.0, 1.0).unwrap();
        assert!(close(a / b, 1.0 / 3.0, 1e-12));
        let (mu, s2) = moments_from_shape(a, b, 0.0, 1.0).unwrap();
        assert!(close(mu, 0.25, 1e-10) && close(s2, 0.01, 1e-10));
    }

    #[test]
    fn shape_inversion_rejects_degenerate_moments() {
        assert!(matches!(
            shape_from_moments(0.5, 0.0, 0.0, 1.0),
            Err(Error::DegenerateMoments { .. })
        ));
        assert!(matches!(
            shape_from_moments(0.5, 0.25, 0.0, 1.0),
            Err(Error::DegenerateMoments { .. })
        ));
    }

    #[test]
    fn shape_inversion_clamps_to_one() {
        // U-shaped moments (variance above the uniform's) clamp to (1, 1).
        let (a, b) = shape_from_moments(0.5, 0.2, 0.0, 1.0).unwrap();
        assert_eq!((a, b), (1.0, 1.0));
        let m = BetaMessage::fit(0.5, 0.2, 0.0, 1.0);
        assert!(close(m.variance(), 1.0 / 12.0, 1e-14));
    }

    #[test]
    fn fit_collapses_to_point_mass() {
        let m = BetaMessage::fit(0.3, 1e-20, 0.0, 1.0);
        assert!(m.is_point());
        assert_eq!(m.mean(), 0.3);
        assert!(BetaMessage::uniform(0.2, 0.2).is_point());
    }

    #[test]
    fn log_density_examples() {
        let u = BetaMessage::uniform(0.0, 1.0);
        assert!(u.log_density(0.3).abs() < 1e-15);
        let b22 = BetaMessage::new(2.0, 2.0, 0.0, 1.0).unwrap();
        assert!(close(b22.log_density(0.5), 1.5f64.ln(), 1e-14));
        // Oracle: normalize (1+x)^1.5 (1-x)^1.5 on [-1, 1] by quadrature.
        let cfg = QuadConfig::with_tol(1e-14, 1e-13);
        let z = crate::quad::integrate_scalar(|x: f64| ((1.0 + x) * (1.0 - x)).powf(1.5), -1.0, 1.0, &cfg);
        let b = BetaMessage::new(2.5, 2.5, -1.0, 1.0).unwrap();
        assert!(close(b.log_density(0.0), -z.ln(), 1e-10));
        assert!(close(b.density(0.0), 0.848_826_363, 1e-8));
        assert_eq!(b.log_density(1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_uniform() {
        let u = BetaMessage::uniform(0.0, 2.0);
        let (mu, s2) = truncated_moments(&u, 0.0, 1.0).unwrap();
        assert!(close(mu, 0.5, 1e-12));
        assert!(close(s2, 1.0 / 12.0, 1e-10));
    }

    #[test]
    fn truncation_superset_is_identity() {
        let b = BetaMessage::new(3.0, 1.5, -1.0, 2.0).unwrap();
        assert_eq!(truncated_moments(&b, -5.0, 5.0).unwrap(), (b.mean(), b.variance()));
    }

    #[test]
    fn truncation_without_overlap_fails() {
        let b = BetaMessage::uniform(0.0, 1.0);
        assert!(matches!(
            truncated_moments(&b, 2.0, 3.0),
            Err(Error::EmptyOverlap { .. })
        ));
    }

    #[test]
    fn product_examples() {
        let u = BetaMessage::uniform(0.0, 1.0);
        let p = product_moments(&[u], 0.0, 1.0).unwrap();
        assert!(close(p.mean, 0.5, 1e-14) && close(p.variance, 1.0 / 12.0, 1e-14));
        assert_eq!(p.log_norm, 0.0);

        // Two Beta(2,2) kernels multiply to a Beta(3,3) kernel; 36 B(3,3) = 1.2.
        let b = BetaMessage::new(2.0, 2.0, 0.0, 1.0).unwrap();
        let p = product_moments(&[b, b], 0.0, 1.0).unwrap();
        assert!(close(p.mean, 0.5, 1e-10));
        assert!(close(p.variance, 1.0 / 28.0, 1e-10));
        assert!(close(p.log_norm, 1.2f64.ln(), 1e-10));

        let v = BetaMessage::uniform(0.5, 1.5);
        let p = product_moments(&[u, v], 0.0, 2.0).unwrap();
        assert!(close(p.mean, 0.75, 1e-10));
        assert!(close(p.variance, 0.25 / 12.0, 1e-10));
        assert!(close(p.log_norm, 0.5f64.ln(), 1e-10));
        assert_eq!((p.lower, p.upper), (0.5, 1.0));
    }

    #[test]
    fn product_of_disjoint_supports_fails() {
        let u = BetaMessage::uniform(0.0, 1.0);
        let v = BetaMessage::uniform(2.0, 3.0);
        assert!(matches!(
            product_moments(&[u, v], 0.0, 3.0),
            Err(Error::EmptyOverlap { .. })
        ));
    }

    #[test]
    fn product_of_sharp_messages_is_accurate() {
        // Narrow peak far from the support ends: the windowed integration must find it.
        let a = BetaMessage::new(4000.0, 6000.0, 0.0, 10.0).unwrap();
        let b = BetaMessage::new(1.0, 1.0, 0.0, 10.0).unwrap();
        let p = product_moments(&[a, b], 0.0, 10.0).unwrap();
        assert!(close(p.mean, a.mean(), 1e-9));
        assert!(close(p.variance, a.variance(), 1e-8));
        assert!(close(p.log_norm, -(10f64).ln(), 1e-9));
    }

    proptest! {
        #[test]
        fn shape_round_trip(alpha in 1.0f64..50.0, beta in 1.0f64..50.0, lo in -10.0f64..10.0, w in 0.01f64..20.0) {
            let (mu, s2) = moments_from_shape(alpha, beta, lo, lo + w).unwrap();
            let (a, b) = shape_from_moments(mu, s2, lo, lo + w).unwrap();
            prop_assert!((a - alpha).abs() <= 1e-10 * alpha.max(1.0) * 10.0);
            prop_assert!((b - beta).abs() <= 1e-10 * beta.max(1.0) * 10.0);
        }

        #[test]
        fn closed_form_moments_match_quadrature(alpha in 1.0f64..50.0, beta in 1.0f64..50.0, lo in -5.0f64..5.0, w in 0.1f64..10.0) {
            let (mu, s2) = moments_from_shape(alpha, beta, lo, lo + w).unwrap();
            let (z, m, v) = quadrature_moments(alpha, beta, lo, lo + w);
            prop_assert!((z - 1.0).abs() < 1e-8);
            prop_assert!((m - mu).abs() < 1e-9 * (1.0 + mu.abs()));
            prop_assert!((v - s2).abs() < 1e-9 * (1.0 + s2));
        }

        #[test]
        fn density_integrates_to_one(alpha in 1.0f64..30.0, beta in 1.0f64..30.0, lo in -5.0f64..5.0, w in 0.1f64..10.0) {
            let b = BetaMessage::new(alpha, beta, lo, lo + w).unwrap();
            let cfg = QuadConfig::with_tol(1e-12, 1e-11);
            let total = crate::quad::integrate_scalar(|x| b.density(x), lo, lo + w, &cfg);
            prop_assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn product_with_near_unit_exponent_at_the_edge() {
        let msgs = [
            BetaMessage::uniform(0.0, 1.5),
            BetaMessage::new(38.2, 1.0000000000000036, 0.0, 1.5).unwrap(),
            BetaMessage::new(15.0, 1.0, -0.0, 1.5).unwrap(),
        ];
        let pm = product_moments(&msgs, -0.0, 1.5).unwrap();
        assert!(pm.log_norm.is_finite());
        // Power-law oracle: density proportional to x^51.2 on [0, 1.5].
        let k = 51.2;
        assert!((pm.mean - 1.5 * (k + 1.0) / (k + 2.0)).abs() < 1e-6);
    }
}
