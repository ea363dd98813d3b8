//! Ceded-loss (indemnity) functions.
//!
//! All contracts are continuous, nondecreasing, 1-Lipschitz functions of the
//! ground-up loss with `I(0) = 0`. Beyond a pure stop-loss the crate works
//! with two layered families tied to the premium scheme -- the first ceded
//! layer is exactly as wide as the premium floor band (`FloorLayer`) or cap
//! band (`CapLayer`), followed by an unlimited excess layer -- plus a
//! three-piece `Sandwich` shape used as an intermediate step when improving
//! arbitrary contracts.

use alloc::vec::Vec;

use crate::dist::LossModel;
use crate::error::Error;
use crate::piecewise::PwlFn;
use crate::premium::{PremiumParams, SchemeThresholds};
use crate::Result;

/// Which structural family a contract belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `(x - d)_+`
    StopLoss { d: f64 },
    /// Capped layer of the premium floor width starting at `d1`, then an
    /// unlimited excess layer at `d2` (`None` when there is no upper layer).
    FloorLayer { d1: f64, d2: Option<f64> },
    /// Same shape with the first layer as wide as the premium cap band.
    CapLayer { d1: f64, d2: Option<f64> },
    /// Floor-width layer at `lo`, the remaining band to the cap at `mid`,
    /// then an unlimited excess layer at `hi`.
    Sandwich {
        lo: f64,
        mid: Option<f64>,
        hi: Option<f64>,
    },
    /// Anything else satisfying the slope constraints.
    General,
}

/// A reinsurance contract: the ceded share of each loss outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Indemnity {
    pw: PwlFn,
    family: Family,
}

/// Build the 0/1-slope function covering the given `(start, end)` layers.
fn from_layers(layers: &[(f64, f64)]) -> PwlFn {
    let mut xs: Vec<f64> = alloc::vec![0.0];
    for &(s, e) in layers {
        if e > s {
            xs.push(s);
            if e.is_finite() {
                xs.push(e);
            }
        }
    }
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let pieces = xs
        .iter()
        .map(|&x| {
            let ceding = layers.iter().any(|&(s, e)| s <= x && x < e);
            (x, if ceding { 1.0 } else { 0.0 })
        })
        .collect();
    PwlFn::new(0.0, pieces).expect("layer breakpoints are well formed")
}

impl Indemnity {
    /// The null contract `I = 0`.
    pub fn zero() -> Self {
        Self {
            pw: PwlFn::constant(0.0),
            family: Family::General,
        }
    }

    /// Pure excess of loss: `(x - d)_+`.
    pub fn stop_loss(d: f64) -> Result<Self> {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::Domain("stop-loss deductible must be finite and >= 0"));
        }
        Ok(Self {
            pw: from_layers(&[(d, f64::INFINITY)]),
            family: Family::StopLoss { d },
        })
    }

    fn layered(
        t: &SchemeThresholds,
        width: f64,
        d1: f64,
        d2: Option<f64>,
    ) -> Result<PwlFn> {
        if !width.is_finite() {
            return Err(Error::InvalidParams(
                "layered families need a variable scheme (delta > 0)",
            ));
        }
        if !d1.is_finite() || d1 < 0.0 {
            return Err(Error::Domain("lower attachment must be finite and >= 0"));
        }
        let mut layers = alloc::vec![(d1, d1 + width)];
        if let Some(d2) = d2 {
            if d2 < d1 + width - 1e-9 * (1.0 + d1 + width) {
                return Err(Error::Domain("upper layer must attach above the first layer"));
            }
            layers.push((d2.max(d1 + width), f64::INFINITY));
        }
        let _ = t;
        Ok(from_layers(&layers))
    }

    /// First layer exactly as wide as the premium floor band.
    pub fn floor_layer(t: &SchemeThresholds, d1: f64, d2: Option<f64>) -> Result<Self> {
        Ok(Self {
            pw: Self::layered(t, t.y_floor, d1, d2)?,
            family: Family::FloorLayer { d1, d2 },
        })
    }

    /// First layer exactly as wide as the premium cap band.
    pub fn cap_layer(t: &SchemeThresholds, d1: f64, d2: Option<f64>) -> Result<Self> {
        Ok(Self {
            pw: Self::layered(t, t.y_cap, d1, d2)?,
            family: Family::CapLayer { d1, d2 },
        })
    }

    /// Floor-width layer at `lo`, band-remainder layer at `mid`, excess at `hi`.
    pub fn sandwich(
        t: &SchemeThresholds,
        lo: f64,
        mid: Option<f64>,
        hi: Option<f64>,
    ) -> Result<Self> {
        if !t.y_floor.is_finite() || !t.y_cap.is_finite() {
            return Err(Error::InvalidParams(
                "sandwich contracts need a variable scheme (delta > 0)",
            ));
        }
        if !lo.is_finite() || lo < 0.0 {
            return Err(Error::Domain("lowest attachment must be finite and >= 0"));
        }
        let w1 = t.y_floor;
        let w2 = t.y_cap - t.y_floor;
        let slack = 1e-9 * (1.0 + t.y_cap + lo);
        let mut layers = alloc::vec![(lo, lo + w1)];
        if let Some(mid) = mid {
            if mid < lo + w1 - slack {
                return Err(Error::Domain("middle layer overlaps the first layer"));
            }
            let mid = mid.max(lo + w1);
            layers.push((mid, mid + w2));
            if let Some(hi) = hi {
                if hi < mid + w2 - slack {
                    return Err(Error::Domain("excess layer overlaps the middle layer"));
                }
                layers.push((hi.max(mid + w2), f64::INFINITY));
            }
        } else if hi.is_some() {
            return Err(Error::Domain(
                "an excess layer requires the middle layer to be present",
            ));
        }
        Ok(Self {
            pw: from_layers(&layers),
            family: Family::Sandwich { lo, mid, hi },
        })
    }

    /// Arbitrary piecewise-linear contract; slopes must lie in `[0, 1]`.
    pub fn general(pieces: Vec<(f64, f64)>) -> Result<Self> {
        let pw = PwlFn::new(0.0, pieces)?;
        if pw.pieces().iter().any(|&(_, s)| !(0.0..=1.0).contains(&s)) {
            return Err(Error::Domain("indemnity slopes must lie in [0, 1]"));
        }
        Ok(Self {
            pw,
            family: Family::General,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn pw(&self) -> &PwlFn {
        &self.pw
    }

    /// Ceded amount for a ground-up loss `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.pw.eval(x)
    }

    /// `E[I(X)]`.
    pub fn ceded_mean(&self, m: &LossModel) -> Result<f64> {
        self.pw.expectation(m)
    }

    /// Largest loss `x` with `I(x) <= level` (infinite when the ceded amount
    /// never strictly exceeds `level`).
    pub(crate) fn crossing(&self, level: f64) -> f64 {
        let pieces = self.pw.pieces();
        let mut v = 0.0;
        for (i, &(xi, s)) in pieces.iter().enumerate() {
            let hi = pieces.get(i + 1).map(|&(nx, _)| nx).unwrap_or(f64::INFINITY);
            let v_hi = if hi.is_infinite() {
                if s > 0.0 {
                    f64::INFINITY
                } else {
                    v
                }
            } else {
                v + s * (hi - xi)
            };
            if v_hi > level {
                return xi + (level - v) / s;
            }
            v = v_hi;
        }
        f64::INFINITY
    }

    /// Loss levels where the premium leaves its floor and reaches its cap:
    /// the largest `x` with `I(x) <= y_floor` and with `I(x) <= y_cap`.
    pub fn scheme_crossings(&self, t: &SchemeThresholds) -> (f64, f64) {
        if !t.y_floor.is_finite() {
            return (f64::INFINITY, f64::INFINITY);
        }
        (self.crossing(t.y_floor), self.crossing(t.y_cap))
    }
}

fn complete_layered(
    m: &LossModel,
    p: &PremiumParams,
    a: f64,
    d1: f64,
    floor_width: bool,
) -> Result<Indemnity> {
    if p.is_constant() {
        return Err(Error::InvalidParams(
            "layer completion needs a variable scheme (delta > 0)",
        ));
    }
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain("ceded-mean target must be positive"));
    }
    if !d1.is_finite() || d1 < 0.0 {
        return Err(Error::Domain("lower attachment must be finite and >= 0"));
    }
    if m.stop_loss(d1)? < a * (1.0 - 1e-12) {
        return Err(Error::Infeasible(
            "no contract attaching at d1 can reach the ceded-mean target",
        ));
    }
    let t = p.thresholds(a)?;
    let width = if floor_width { t.y_floor } else { t.y_cap };
    let first = m.layer_mean(d1, d1 + width)?;
    let residual = a - first;
    if residual < -1e-9 * a {
        return Err(Error::Infeasible(
            "the first layer alone exceeds the ceded-mean target",
        ));
    }
    let d2 = if residual <= 0.0 {
        None
    } else {
        Some(m.invert_stop_loss(residual)?.max(d1 + width))
    };
    if floor_width {
        Indemnity::floor_layer(&t, d1, d2)
    } else {
        Indemnity::cap_layer(&t, d1, d2)
    }
}

/// Complete a floor-width layered contract to the ceded-mean target `a` by
/// solving for the upper attachment point.
pub fn complete_floor_layer(
    m: &LossModel,
    p: &PremiumParams,
    a: f64,
    d1: f64,
) -> Result<Indemnity> {
    complete_layered(m, p, a, d1, true)
}

/// Complete a cap-width layered contract to the ceded-mean target `a`.
pub fn complete_cap_layer(m: &LossModel, p: &PremiumParams, a: f64, d1: f64) -> Result<Indemnity> {
    complete_layered(m, p, a, d1, false)
}
