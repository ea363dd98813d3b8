//! Ground-up loss distributions.
//!
//! Everything downstream consumes a distribution through four primitives:
//! the survival function, its (left-continuous) quantile, exact layer
//! integrals of the survival function, and inverse-transform sampling. Two
//! parametric families cover the closed-form work (Pareto type II and
//! exponential); a tabulated survival curve covers everything empirical.

use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

use crate::error::Error;
use crate::math;
use crate::Result;

/// How a tabulated curve continues past its final grid point.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tail {
    /// Final grid survival is zero: the support ends at the last abscissa.
    Bounded,
    /// Exponential decay at the rate implied by the last two grid points.
    Exp { tau: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Kind {
    /// S(x) = (eta / (x + eta))^zeta, zeta > 1 so the mean exists.
    Pareto { eta: f64, zeta: f64 },
    /// S(x) = exp(-x / mu).
    Exponential { mu: f64 },
    /// Piecewise-linear survival through `points`, extended by `tail`.
    Tabulated { points: Vec<(f64, f64)>, tail: Tail },
}

/// A nonnegative loss distribution with a continuous, strictly decreasing
/// survival function.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    kind: Kind,
}

impl LossModel {
    /// Pareto type II (Lomax): `S(x) = (eta / (x + eta))^zeta`.
    pub fn pareto(eta: f64, zeta: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParams("pareto scale eta must be positive"));
        }
        if !zeta.is_finite() || zeta <= 1.0 {
            return Err(Error::InvalidParams(
                "pareto shape zeta must exceed 1 so the mean is finite",
            ));
        }
        Ok(Self {
            kind: Kind::Pareto { eta, zeta },
        })
    }

    /// Exponential with mean `mu`.
    pub fn exponential(mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidParams("exponential mean mu must be positive"));
        }
        Ok(Self {
            kind: Kind::Exponential { mu },
        })
    }

    /// Tabulated survival curve.
    ///
    /// `points` must start at `(0, 1)`, have strictly increasing abscissae and
    /// strictly decreasing survival values in `[0, 1]`. If the final survival
    /// value is zero the support is bounded at the final abscissa; otherwise
    /// the curve is extended by exponential decay matched to the last segment.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParams("tabulated curve needs at least 2 points"));
        }
        if points[0] != (0.0, 1.0) {
            return Err(Error::InvalidParams("tabulated curve must start at (0, 1)"));
        }
        for w in points.windows(2) {
            let (x0, s0) = w[0];
            let (x1, s1) = w[1];
            if !x1.is_finite() || !s1.is_finite() {
                return Err(Error::InvalidParams("tabulated point is not finite"));
            }
            if x1 <= x0 {
                return Err(Error::InvalidParams(
                    "tabulated abscissae must be strictly increasing",
                ));
            }
            if s1 >= s0 || s1 < 0.0 {
                return Err(Error::InvalidParams(
                    "tabulated survival values must be strictly decreasing within [0, 1]",
                ));
            }
        }
        let n = points.len();
        let (x_last, s_last) = points[n - 1];
        let tail = if s_last == 0.0 {
            Tail::Bounded
        } else {
            let (x_prev, s_prev) = points[n - 2];
            let tau = (x_last - x_prev) / math::ln(s_prev / s_last);
            Tail::Exp { tau }
        };
        Ok(Self {
            kind: Kind::Tabulated { points, tail },
        })
    }

    pub(crate) fn kind(&self) -> &Kind {
        &self.kind
    }

    /// `P(X > x)`; equals 1 for `x <= 0`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Pareto { eta, zeta } => math::powf(eta / (x + eta), *zeta),
            Kind::Exponential { mu } => math::exp(-x / mu),
            Kind::Tabulated { points, tail } => {
                let n = points.len();
                if x >= points[n - 1].0 {
                    return match tail {
                        Tail::Bounded => 0.0,
                        Tail::Exp { tau } => {
                            points[n - 1].1 * math::exp(-(x - points[n - 1].0) / tau)
                        }
                    };
                }
                // first index with abscissa > x; the segment [i-1, i] brackets x
                let i = points.partition_point(|&(px, _)| px <= x);
                let (x0, s0) = points[i - 1];
                let (x1, s1) = points[i];
                s0 + (s1 - s0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Left-continuous quantile: the `x` with `F(x) = p`. Requires `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain("quantile probability must lie in [0, 1)"));
        }
        let s = 1.0 - p;
        Ok(match &self.kind {
            Kind::Pareto { eta, zeta } => eta * (math::powf(s, -1.0 / zeta) - 1.0),
            Kind::Exponential { mu } => -mu * math::ln(s),
            Kind::Tabulated { points, tail } => {
                let n = points.len();
                if s < points[n - 1].1 {
                    match tail {
                        Tail::Bounded => unreachable!("s > 0 >= final survival"),
                        Tail::Exp { tau } => {
                            points[n - 1].0 + tau * math::ln(points[n - 1].1 / s)
                        }
                    }
                } else {
                    // first index whose survival drops below s
                    let i = points.partition_point(|&(_, ps)| ps >= s).max(1);
                    let (x0, s0) = points[i - 1];
                    let (x1, s1) = points[i.min(n - 1)];
                    if s0 == s1 {
                        x0
                    } else {
                        x0 + (s0 - s) / (s0 - s1) * (x1 - x0)
                    }
                }
            }
        })
    }

    /// Exact `\int_l^u S(x) dx` for `0 <= l <= u` (`u` may be infinite).
    pub fn layer_mean(&self, l: f64, u: f64) -> Result<f64> {
        if l.is_nan() || u.is_nan() || l < 0.0 || u < l {
            return Err(Error::Domain("layer bounds must satisfy 0 <= l <= u"));
        }
        if l == u {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            Kind::Pareto { eta, zeta } => {
                let c = math::powf(*eta, *zeta) / (zeta - 1.0);
                let upper = if u.is_infinite() {
                    0.0
                } else {
                    math::powf(u + eta, 1.0 - zeta)
                };
                c * (math::powf(l + eta, 1.0 - zeta) - upper)
            }
            Kind::Exponential { mu } => {
                let upper = if u.is_infinite() { 0.0 } else { math::exp(-u / mu) };
                mu * (math::exp(-l / mu) - upper)
            }
            Kind::Tabulated { points, tail } => {
                let n = points.len();
                let x_last = points[n - 1].0;
                let mut total = 0.0;
                // grid part: the survival curve is linear on each segment,
                // so the trapezoid rule is exact
                for w in points.windows(2) {
                    let (x0, _) = w[0];
                    let (x1, _) = w[1];
                    let lo = l.max(x0);
                    let hi = u.min(x1);
                    if hi > lo {
                        total += 0.5 * (self.survival(lo) + self.survival(hi)) * (hi - lo);
                    }
                }
                // tail part
                if u > x_last {
                    if let Tail::Exp { tau } = tail {
                        let lo = l.max(x_last);
                        let s_hi = if u.is_infinite() { 0.0 } else { self.survival(u) };
                        total += tau * (self.survival(lo) - s_hi);
                    }
                }
                total
            }
        })
    }

    /// Expected excess over `d`: `E[(X - d)_+] = \int_d^inf S`.
    pub fn stop_loss(&self, d: f64) -> Result<f64> {
        self.layer_mean(d, f64::INFINITY)
    }

    /// `E[X]`.
    pub fn mean(&self) -> f64 {
        self.layer_mean(0.0, f64::INFINITY)
            .expect("mean of a valid model is finite")
    }

    /// The deductible `d` with `E[(X - d)_+] = a`, for `0 < a <= E[X]`.
    pub fn invert_stop_loss(&self, a: f64) -> Result<f64> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::Domain("stop-loss target must be positive"));
        }
        let mean = self.mean();
        if a > mean * (1.0 + 1e-12) {
            return Err(Error::Domain("stop-loss target exceeds the distribution mean"));
        }
        let a = a.min(mean);
        Ok(match &self.kind {
            Kind::Pareto { eta, zeta } => {
                let base = math::powf(*eta, *zeta) / (a * (zeta - 1.0));
                (math::powf(base, 1.0 / (zeta - 1.0)) - eta).max(0.0)
            }
            Kind::Exponential { mu } => (mu * math::ln(mu / a)).max(0.0),
            Kind::Tabulated { points, tail } => {
                let n = points.len();
                let (x_last, s_last) = points[n - 1];
                if let Tail::Exp { tau } = tail {
                    let tail_mass = tau * s_last;
                    if a <= tail_mass {
                        // the whole excess sits in the exponential tail
                        return Ok(x_last + tau * math::ln(tail_mass / a));
                    }
                }
                let residual = |d: f64| {
                    self.stop_loss(d).expect("d >= 0 within bracket") - a
                };
                crate::numeric::bisect(residual, 0.0, x_last, 1e-13 * (1.0 + x_last), 1e-12 * a)?
            }
        })
    }

    /// Largest point of the support, if bounded.
    pub fn ess_sup(&self) -> Option<f64> {
        match &self.kind {
            Kind::Tabulated { points, tail: Tail::Bounded } => {
                Some(points[points.len() - 1].0)
            }
            _ => None,
        }
    }

    /// Inverse-transform sample of size `n`, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.sample_stream(n, seed, 0)
    }

    /// Like [`sample`](Self::sample) but drawing from an independent RNG
    /// stream, so callers can split one master seed across many cases.
    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Domain("sample size must be positive"));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            // 53 uniform bits shifted into the open interval (0, 1)
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0);
            out.push(self.quantile(u).expect("u is strictly inside (0, 1)"));
        }
        Ok(out)
    }
}
