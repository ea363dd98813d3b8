//! The performance-based premium scheme.
//!
//! The reinsurer quotes a variable premium on the ceded loss `Y`: a base
//! loading `(1 + theta0) E[Y]` plus a participation `delta` in the deviation
//! `Y - E[Y]`, clamped between a reward floor `(1 + theta1) E[Y]` and a
//! penalty cap `(1 + theta2) E[Y]`. With `delta = 0` (allowed only when
//! `theta1 = theta0`) the scheme degenerates to the classical constant
//! expected-value premium.

use crate::dist::LossModel;
use crate::error::Error;
use crate::indemnity::{Family, Indemnity};
use crate::piecewise::PwlFn;
use crate::Result;

/// Loadings and participation rate of the premium scheme.
///
/// Validity requires `max(theta0 - delta, 0) <= theta1 <= theta0 < theta2`
/// and `delta` in `[0, 1]`; note that `delta = 0` forces `theta1 = theta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PremiumParams {
    delta: f64,
    theta0: f64,
    theta1: f64,
    theta2: f64,
}

impl PremiumParams {
    pub fn new(delta: f64, theta0: f64, theta1: f64, theta2: f64) -> Result<Self> {
        for v in [delta, theta0, theta1, theta2] {
            if !v.is_finite() {
                return Err(Error::InvalidParams("premium parameters must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParams("participation delta must lie in [0, 1]"));
        }
        if theta0 < 0.0 {
            return Err(Error::InvalidParams("base loading theta0 must be nonnegative"));
        }
        if !(theta1 <= theta0 && theta1 >= (theta0 - delta).max(0.0)) {
            return Err(Error::InvalidParams(
                "reward loading theta1 must satisfy max(theta0 - delta, 0) <= theta1 <= theta0",
            ));
        }
        if !(theta2 > theta0) {
            return Err(Error::InvalidParams(
                "penalty loading theta2 must exceed theta0",
            ));
        }
        Ok(Self {
            delta,
            theta0,
            theta1,
            theta2,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    /// True when the scheme degenerates to a constant premium.
    pub fn is_constant(&self) -> bool {
        self.delta == 0.0
    }

    /// Derived quantities of the scheme for a contract with ceded mean `a`.
    pub fn thresholds(&self, a: f64) -> Result<SchemeThresholds> {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::Domain("ceded mean must be finite and nonnegative"));
        }
        let (y_floor, y_cap) = if self.delta == 0.0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (
                // the constructor guarantees theta1 >= theta0 - delta, so a
                // negative numerator is cancellation noise; clamp it so the
                // degenerate zero-width floor stays exactly zero
                ((self.theta1 - self.theta0 + self.delta) / self.delta * a).max(0.0),
                (self.theta2 - self.theta0 + self.delta) / self.delta * a,
            )
        };
        Ok(SchemeThresholds {
            a,
            y_floor,
            y_cap,
            floor: (1.0 + self.theta1) * a,
            cap: (1.0 + self.theta2) * a,
        })
    }
}

/// Scheme quantities that depend on the contract's ceded mean `a`.
///
/// `y_floor` is the largest ceded loss still earning the floor premium and
/// `y_cap` the smallest one already paying the cap; both are infinite for a
/// constant scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeThresholds {
    pub a: f64,
    pub y_floor: f64,
    pub y_cap: f64,
    pub floor: f64,
    pub cap: f64,
}

/// Premium due for a realized ceded loss `y`.
pub fn realized_premium(p: &PremiumParams, t: &SchemeThresholds, y: f64) -> f64 {
    if t.a == 0.0 {
        return 0.0; // nothing ceded, nothing charged
    }
    if p.delta == 0.0 {
        return (1.0 + p.theta0) * t.a;
    }
    // literal clamp chain so the floor/cap bounds hold exactly; the affine
    // band value can otherwise overshoot a crossing by a rounding ulp
    let band = (1.0 + p.theta0) * t.a + p.delta * (y - t.a);
    band.max(t.floor).min(t.cap)
}

/// Insurer's year-end position `T(x) = x - I(x) + premium(I(x))`.
pub fn insurer_total(p: &PremiumParams, t: &SchemeThresholds, i: &Indemnity, x: f64) -> f64 {
    let y = i.eval(x);
    x - y + realized_premium(p, t, y)
}

/// Reinsurer's year-end position `N(x) = I(x) - premium(I(x))`.
pub fn reinsurer_net(p: &PremiumParams, t: &SchemeThresholds, i: &Indemnity, x: f64) -> f64 {
    let y = i.eval(x);
    y - realized_premium(p, t, y)
}

/// The premium as a piecewise-linear function of the ground-up loss.
pub fn premium_transform(p: &PremiumParams, t: &SchemeThresholds, i: &Indemnity) -> PwlFn {
    if t.a == 0.0 {
        return PwlFn::constant(0.0);
    }
    if p.delta == 0.0 {
        return PwlFn::constant((1.0 + p.theta0) * t.a);
    }
    let (x_floor, x_cap) = i.scheme_crossings(t);
    let mut xs: alloc::vec::Vec<f64> = i.pw().pieces().iter().map(|&(x, _)| x).collect();
    for x in [x_floor, x_cap] {
        if x.is_finite() {
            xs.push(x);
        }
    }
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let pieces = xs
        .iter()
        .map(|&x| {
            let slope = if x < x_floor || x >= x_cap {
                0.0
            } else {
                p.delta * i.pw().slope_at(x)
            };
            (x, slope)
        })
        .collect();
    PwlFn::new(t.floor, pieces).expect("refined premium pieces are well formed")
}

/// `T(x) = x - I(x) + premium(I(x))` as a transform of the ground-up loss.
pub fn insurer_total_transform(p: &PremiumParams, t: &SchemeThresholds, i: &Indemnity) -> PwlFn {
    PwlFn::identity()
        .add(&i.pw().scale(-1.0))
        .add(&premium_transform(p, t, i))
}

/// `N(x) = I(x) - premium(I(x))` as a transform of the ground-up loss.
pub fn reinsurer_net_transform(p: &PremiumParams, t: &SchemeThresholds, i: &Indemnity) -> PwlFn {
    i.pw().add(&premium_transform(p, t, i).scale(-1.0))
}

/// Expected premium `E[premium(I(X))]`, exact through layer integrals.
pub fn expected_premium(
    p: &PremiumParams,
    t: &SchemeThresholds,
    i: &Indemnity,
    m: &LossModel,
) -> Result<f64> {
    premium_transform(p, t, i).expectation(m)
}

/// Distribution of the premium for the layered families.
///
/// The premium of a floor-width or cap-width layered contract (or a pure
/// stop-loss) has a three-piece survival function: 1 below the floor, a
/// shifted copy of the loss survival across the band, and 0 at the cap.
#[derive(Debug, Clone)]
pub struct PremiumSurvival {
    form: SurvivalForm,
}

#[derive(Debug, Clone)]
enum SurvivalForm {
    /// Premium is almost surely `level`.
    Constant { level: f64 },
    /// Banded: `S(z) = S_X(z / delta + offset)` between floor and cap.
    Banded {
        floor: f64,
        cap: f64,
        delta: f64,
        offset: f64,
        model: LossModel,
    },
}

impl PremiumSurvival {
    /// `P(premium > z)`.
    pub fn eval(&self, z: f64) -> f64 {
        match &self.form {
            SurvivalForm::Constant { level } => {
                if z < *level {
                    1.0
                } else {
                    0.0
                }
            }
            SurvivalForm::Banded {
                floor,
                cap,
                delta,
                offset,
                model,
            } => {
                if z < *floor {
                    1.0
                } else if z >= *cap {
                    0.0
                } else {
                    model.survival(z / delta + offset)
                }
            }
        }
    }
}

/// Closed-form premium survival function for the layered families.
///
/// Supported shapes: stop-loss, floor-width layered, cap-width layered.
/// General shapes have no closed form here and are rejected.
pub fn premium_survival(
    p: &PremiumParams,
    t: &SchemeThresholds,
    i: &Indemnity,
    m: &LossModel,
) -> Result<PremiumSurvival> {
    if t.a == 0.0 {
        return Ok(PremiumSurvival {
            form: SurvivalForm::Constant { level: 0.0 },
        });
    }
    if p.delta == 0.0 {
        return Ok(PremiumSurvival {
            form: SurvivalForm::Constant {
                level: (1.0 + p.theta0) * t.a,
            },
        });
    }
    // offset o such that premium > z  <=>  X > z/delta + o inside the band
    let offset = match i.family() {
        Family::StopLoss { d } => d + t.y_floor - t.floor / p.delta,
        Family::FloorLayer { d2: Some(d2), .. } => d2 - t.floor / p.delta,
        Family::FloorLayer { d2: None, .. } => {
            // ceded loss never exceeds the floor threshold: premium is flat
            return Ok(PremiumSurvival {
                form: SurvivalForm::Constant { level: t.floor },
            });
        }
        Family::CapLayer { d1, .. } => {
            d1 - (1.0 + p.theta0 - p.delta) * t.a / p.delta
        }
        Family::Sandwich { .. } | Family::General => {
            return Err(Error::Unsupported(
                "premium survival is only closed-form for the layered families",
            ))
        }
    };
    Ok(PremiumSurvival {
        form: SurvivalForm::Banded {
            floor: t.floor,
            cap: t.cap,
            delta: p.delta,
            offset,
            model: m.clone(),
        },
    })
}
