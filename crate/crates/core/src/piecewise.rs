//! Piecewise-linear functions of the ground-up loss.
//!
//! Indemnities, premiums, and both parties' year-end positions are all
//! continuous piecewise-linear transforms of the same loss variable, so one
//! small algebra (evaluate, add, scale, exact expectations against a loss
//! model) serves the whole crate.

use alloc::vec::Vec;

use crate::dist::LossModel;
use crate::error::Error;
use crate::Result;

/// A continuous piecewise-linear function on `[0, inf)`.
///
/// `pieces[i] = (x_i, slope)` gives the slope on `[x_i, x_{i+1})`; the first
/// abscissa is always 0 and the last slope extends to infinity. The value at
/// the origin is stored separately, so functions need not vanish at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFn {
    start: f64,
    pieces: Vec<(f64, f64)>,
}

impl PwlFn {
    /// Build from a value at the origin and `(abscissa, slope-after)` pairs.
    pub fn new(start: f64, pieces: Vec<(f64, f64)>) -> Result<Self> {
        if !start.is_finite() {
            return Err(Error::Domain("origin value must be finite"));
        }
        if pieces.is_empty() || pieces[0].0 != 0.0 {
            return Err(Error::Domain("pieces must begin at abscissa 0"));
        }
        for w in pieces.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Domain("piece abscissae must be strictly increasing"));
            }
        }
        if pieces.iter().any(|&(x, s)| !x.is_finite() || !s.is_finite()) {
            return Err(Error::Domain("piece entries must be finite"));
        }
        let mut f = Self { start, pieces };
        f.coalesce();
        Ok(f)
    }

    /// The identity transform `x -> x`.
    pub fn identity() -> Self {
        Self {
            start: 0.0,
            pieces: alloc::vec![(0.0, 1.0)],
        }
    }

    /// The constant transform `x -> c`.
    pub fn constant(c: f64) -> Self {
        Self {
            start: c,
            pieces: alloc::vec![(0.0, 0.0)],
        }
    }

    fn coalesce(&mut self) {
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.pieces.len());
        for &(x, s) in &self.pieces {
            match merged.last() {
                Some(&(_, ps)) if ps == s => {}
                _ => merged.push((x, s)),
            }
        }
        self.pieces = merged;
    }

    pub fn value_at_origin(&self) -> f64 {
        self.start
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn final_slope(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].1
    }

    /// Largest breakpoint abscissa.
    pub fn last_breakpoint(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].0
    }

    /// Evaluate at `x >= 0` (negative inputs clamp to the origin value).
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.start;
        for (i, &(xi, s)) in self.pieces.iter().enumerate() {
            if x <= xi {
                break;
            }
            let hi = self
                .pieces
                .get(i + 1)
                .map(|&(nx, _)| nx.min(x))
                .unwrap_or(x);
            v += s * (hi - xi);
        }
        v
    }

    /// True when every slope is nonnegative (within a strict tolerance for
    /// slopes assembled by floating-point arithmetic).
    pub fn is_nondecreasing(&self) -> bool {
        self.pieces.iter().all(|&(_, s)| s >= -1e-12)
    }

    /// Pointwise sum.
    pub fn add(&self, other: &PwlFn) -> PwlFn {
        let mut xs: Vec<f64> = self
            .pieces
            .iter()
            .chain(other.pieces.iter())
            .map(|&(x, _)| x)
            .collect();
        xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let pieces = xs
            .iter()
            .map(|&x| (x, self.slope_at(x) + other.slope_at(x)))
            .collect();
        let mut f = PwlFn {
            start: self.start + other.start,
            pieces,
        };
        f.coalesce();
        f
    }

    /// Pointwise scale by `c`.
    pub fn scale(&self, c: f64) -> PwlFn {
        let mut f = PwlFn {
            start: self.start * c,
            pieces: self.pieces.iter().map(|&(x, s)| (x, s * c)).collect(),
        };
        f.coalesce();
        f
    }

    /// Shift by a constant.
    pub fn offset(&self, k: f64) -> PwlFn {
        PwlFn {
            start: self.start + k,
            pieces: self.pieces.clone(),
        }
    }

    /// Slope on the segment containing `x` (taking the segment to the right
    /// of a breakpoint).
    pub(crate) fn slope_at(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|&(px, _)| px <= x);
        self.pieces[i.saturating_sub(1).min(self.pieces.len() - 1)].1
    }

    /// Exact `E[t(X)]` via `t(0) + \int t'(x) S(x) dx`.
    pub fn expectation(&self, m: &LossModel) -> Result<f64> {
        let mut total = self.start;
        for (i, &(xi, s)) in self.pieces.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let hi = self
                .pieces
                .get(i + 1)
                .map(|&(nx, _)| nx)
                .unwrap_or(f64::INFINITY);
            total += s * m.layer_mean(xi, hi)?;
        }
        Ok(total)
    }

    /// Exact `E[(t(X) - c)_+]` for a nondecreasing transform.
    pub fn expected_excess(&self, m: &LossModel, c: f64) -> Result<f64> {
        if !self.is_nondecreasing() {
            return Err(Error::Domain(
                "expected excess requires a nondecreasing transform",
            ));
        }
        if c <= self.start {
            // t(X) >= t(0) >= c almost surely
            return Ok(self.expectation(m)? - c);
        }
        // find where the transform first reaches c
        let mut crossing = None;
        let mut v = self.start;
        for (i, &(xi, s)) in self.pieces.iter().enumerate() {
            let hi = self
                .pieces
                .get(i + 1)
                .map(|&(nx, _)| nx)
                .unwrap_or(f64::INFINITY);
            let v_hi = if hi.is_infinite() {
                if s > 0.0 {
                    f64::INFINITY
                } else {
                    v
                }
            } else {
                v + s * (hi - xi)
            };
            if v_hi >= c && s > 0.0 {
                crossing = Some(xi + (c - v) / s);
                break;
            }
            v = v_hi;
        }
        let Some(xc) = crossing else {
            return Ok(0.0); // the transform never reaches c
        };
        let mut total = 0.0;
        for (i, &(xi, s)) in self.pieces.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let hi = self
                .pieces
                .get(i + 1)
                .map(|&(nx, _)| nx)
                .unwrap_or(f64::INFINITY);
            if hi > xc {
                total += s * m.layer_mean(xi.max(xc), hi)?;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn eval_walks_segments() {
        // 0 on [0,1], slope 1 on [1,3], flat after
        let f = PwlFn::new(0.0, vec![(0.0, 0.0), (1.0, 1.0), (3.0, 0.0)]).unwrap();
        close(f.eval(0.5), 0.0, 0.0, "before kink");
        close(f.eval(2.0), 1.0, 0.0, "mid ramp");
        close(f.eval(10.0), 2.0, 0.0, "capped");
    }

    #[test]
    fn constructor_rejects_malformed_pieces() {
        assert!(PwlFn::new(0.0, vec![]).is_err());
        assert!(PwlFn::new(0.0, vec![(1.0, 1.0)]).is_err(), "must start at 0");
        assert!(PwlFn::new(0.0, vec![(0.0, 1.0), (2.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(PwlFn::new(f64::NAN, vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn add_merges_breakpoints() {
        let a = PwlFn::new(0.0, vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let b = PwlFn::new(2.0, vec![(0.0, 1.0), (2.0, 0.0)]).unwrap();
        let s = a.add(&b);
        close(s.eval(0.0), 2.0, 0.0, "origin");
        close(s.eval(1.5), 0.5 + 3.5, 0.0, "both active");
        close(s.eval(3.0), 2.0 + 4.0, 0.0, "after b caps"); // a=2, b capped at 4
    }

    #[test]
    fn identity_expectation_is_the_mean() {
        let m = LossModel::exponential(2.0).unwrap();
        let id = PwlFn::identity();
        close(id.expectation(&m).unwrap(), 2.0, 1e-12, "E[X]");
    }

    #[test]
    fn expectation_of_layer() {
        let m = LossModel::exponential(2.0).unwrap();
        // (x - 1)_+ capped at 3
        let f = PwlFn::new(0.0, vec![(0.0, 0.0), (1.0, 1.0), (4.0, 0.0)]).unwrap();
        let want = m.layer_mean(1.0, 4.0).unwrap();
        close(f.expectation(&m).unwrap(), want, 1e-14, "layer expectation");
    }

    #[test]
    fn expected_excess_matches_shifted_stop_loss() {
        let m = LossModel::exponential(2.0).unwrap();
        // t(x) = (x - 1)_+, so (t(X) - c)_+ = (X - 1 - c)_+
        let t = PwlFn::new(0.0, vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        for c in [0.0, 0.5, 2.0] {
            let want = m.stop_loss(1.0 + c).unwrap();
            close(t.expected_excess(&m, c).unwrap(), want, 1e-13, "shifted stop-loss");
        }
    }

    #[test]
    fn expected_excess_below_floor_uses_mean_identity() {
        let m = LossModel::exponential(1.0).unwrap();
        let t = PwlFn::new(3.0, vec![(0.0, 1.0)]).unwrap(); // x + 3
        close(
            t.expected_excess(&m, 1.0).unwrap(),
            m.mean() + 2.0,
            1e-13,
            "E[Z] - c when Z >= c",
        );
    }

    #[test]
    fn expected_excess_of_bounded_transform_vanishes() {
        let m = LossModel::exponential(1.0).unwrap();
        let t = PwlFn::new(0.0, vec![(0.0, 1.0), (2.0, 0.0)]).unwrap(); // x ∧ 2
        close(t.expected_excess(&m, 5.0).unwrap(), 0.0, 0.0, "never reaches 5");
    }

    #[test]
    fn scale_and_offset_compose() {
        let f = PwlFn::identity().scale(0.5).offset(1.0);
        close(f.eval(4.0), 3.0, 0.0, "0.5 x + 1");
        assert!(f.is_nondecreasing());
        assert!(!PwlFn::identity().scale(-1.0).is_nondecreasing());
    }
}
