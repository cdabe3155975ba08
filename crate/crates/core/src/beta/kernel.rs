//! Products of generalized Beta kernels evaluated in log space.
//!
//! A product of kernels `(x - A)^(a-1) (B - x)^(b-1)` with exponents `>= 0` is
//! log-concave, so it has a single mode and decays monotonically on both sides.
//! Integration is restricted to the window where the log-kernel is within
//! [`WINDOW_DROP`] of its peak and split at the mode.

use crate::quad::{self, QuadConfig};

/// Log-density drop that bounds the integration window (`e^-60 ~ 1e-26`).
pub const WINDOW_DROP: f64 = 60.0;

/// `a * ln(y)` with the convention `0 * ln(0) = 0`.
#[inline]
pub fn xlogy(a: f64, y: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * y.ln()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelTerm {
    pub lower: f64,
    pub upper: f64,
    pub am1: f64,
    pub bm1: f64,
    pub log_scale: f64,
}

impl KernelTerm {
    #[inline]
    fn log_value(&self, x: f64) -> f64 {
        self.log_scale + xlogy(self.am1, x - self.lower) + xlogy(self.bm1, self.upper - x)
    }

    #[inline]
    fn dlog(&self, x: f64) -> f64 {
        let left = if self.am1 == 0.0 {
            0.0
        } else {
            self.am1 / (x - self.lower)
        };
        let right = if self.bm1 == 0.0 {
            0.0
        } else {
            self.bm1 / (self.upper - x)
        };
        left - right
    }
}

/// Product of kernel terms restricted to `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct KernelProduct {
    pub terms: Vec<KernelTerm>,
    pub lo: f64,
    pub hi: f64,
}

/// Integrals against the normalized-to-peak product, plus the peak's log value.
#[derive(Debug, Clone, Copy)]
pub struct Integrated<const K: usize> {
    pub value: [f64; K],
    pub log_peak: f64,
    pub mode: f64,
}

impl KernelProduct {
    pub fn new(mut terms: Vec<KernelTerm>, lo: f64, hi: f64) -> Self {
        // Adding zero turns -0.0 into 0.0, so `x - lower` never has the wrong sign.
        for t in &mut terms {
            t.lower += 0.0;
            t.upper += 0.0;
        }
        Self {
            terms,
            lo: lo + 0.0,
            hi: hi + 0.0,
        }
    }

    #[inline]
    pub fn log_value(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.log_value(x)).sum()
    }

    fn dlog(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.dlog(x)).sum()
    }

    /// Mode of the product on `[lo, hi]` (bisection on the decreasing derivative).
    pub fn mode(&self) -> f64 {
        let (mut a, mut b) = (self.lo, self.hi);
        if !(self.dlog(a) > 0.0) {
            return a;
        }
        if !(self.dlog(b) < 0.0) {
            return b;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.dlog(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        // Exponents just above zero vanish only at the very edge; step back inside.
        [0.5 * (a + b), a, b]
            .into_iter()
            .find(|&x| self.log_value(x).is_finite())
            .unwrap_or(0.5 * (a + b))
    }

    fn edge(&self, inside: f64, outside: f64, threshold: f64) -> f64 {
        if self.log_value(outside) >= threshold {
            return outside;
        }
        let (mut good, mut bad) = (inside, outside);
        for _ in 0..200 {
            let mid = 0.5 * (good + bad);
            if mid == good || mid == bad {
                break;
            }
            if self.log_value(mid) >= threshold {
                good = mid;
            } else {
                bad = mid;
            }
        }
        bad
    }

    /// Integrates `f(x, p(x) / p(mode))` over the window around the mode.
    pub fn integrate<const K: usize, F>(&self, f: F, cfg: &QuadConfig) -> Integrated<K>
    where
        F: Fn(f64, f64) -> [f64; K],
    {
        let mode = self.mode();
        let log_peak = self.log_value(mode);
        let threshold = log_peak - WINDOW_DROP;
        let left = self.edge(mode, self.lo, threshold);
        let right = self.edge(mode, self.hi, threshold);
        let g = |x: f64| {
            let p = (self.log_value(x) - log_peak).exp();
            f(x, p)
        };
        let mut value = [0.0; K];
        for (a, b) in [(left, mode), (mode, right)] {
            if b > a {
                let r = quad::integrate(&g, a, b, cfg);
                for k in 0..K {
                    value[k] += r.value[k];
                }
            }
        }
        Integrated { value, log_peak, mode }
    }

    /// Normalizer, mean, and variance of the product density.
    pub fn moments(&self, cfg: &QuadConfig) -> Option<(f64, f64, f64)> {
        let mode = self.mode();
        let r = self.integrate(
            |x, p| {
                let d = x - mode;
                [p, p * d, p * d * d]
            },
            cfg,
        );
        let z = r.value[0];
        if !(z > 0.0) || !z.is_finite() {
            return None;
        }
        let m1 = r.value[1] / z;
        let var = (r.value[2] / z - m1 * m1).max(0.0);
        let mean = (r.mode + m1).clamp(self.lo, self.hi);
        Some((r.log_peak + z.ln(), mean, var))
    }
}
