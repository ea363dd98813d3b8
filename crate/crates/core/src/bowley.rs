//! Leader-follower calibration of the premium sensitivity.
//!
//! The reinsurer (leader) picks the slope `delta` of the variable premium
//! scheme; the insurer (follower) then buys its risk-minimizing contract
//! under that scheme. The reinsurer sweeps a `delta` grid, prices each
//! follower response, and keeps the `delta` minimizing its own risk. When the
//! optimum is flat the smallest `delta` is reported -- it leaves the insurer
//! best off and so is the likeliest point of agreement.
//!
//! The reward loading follows `theta1 = max(theta0 - delta, theta1_bar)`:
//! the discount deepens with `delta` until it hits the floor `theta1_bar`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dist::LossModel;
use crate::error::Error;
use crate::math;
use crate::indemnity::{Family, Indemnity};
use crate::insurer::{solve_insurer, Branch};
use crate::premium::{self, PremiumParams};
use crate::risk::{rho_monotone_transform, Distortion};
use crate::Result;

/// Reward loading as a function of the premium sensitivity.
pub fn theta1_rule(delta: f64, theta0: f64, theta1_bar: f64) -> f64 {
    (theta0 - delta).max(theta1_bar)
}

/// Inputs of the leader-follower sweep.
#[derive(Debug, Clone)]
pub struct BowleyConfig {
    pub model: LossModel,
    pub theta0: f64,
    pub theta1_bar: f64,
    pub theta2: f64,
    /// Follower's (insurer's) risk measure; must be concave.
    pub insurer: Distortion,
    /// Leader's (reinsurer's) risk measure.
    pub reinsurer: Distortion,
    /// Grid step for `delta` in `[0, 1]`.
    pub delta_step: f64,
    /// Ceded-mean grid resolution passed to the insurer solver.
    pub outer_grid: usize,
    /// Rows within this value distance of the best count as optimal.
    pub eps_val: f64,
}

impl BowleyConfig {
    pub fn new(
        model: LossModel,
        theta0: f64,
        theta1_bar: f64,
        theta2: f64,
        insurer: Distortion,
        reinsurer: Distortion,
    ) -> Result<Self> {
        if !(theta0.is_finite() && theta1_bar.is_finite() && theta2.is_finite()) {
            return Err(Error::InvalidParams("loadings must be finite"));
        }
        if !(0.0 <= theta1_bar && theta1_bar <= theta0 && theta0 < theta2) {
            return Err(Error::InvalidParams(
                "loadings must satisfy 0 <= theta1_bar <= theta0 < theta2",
            ));
        }
        let eps_val = 1e-6 * model.mean();
        Ok(Self {
            model,
            theta0,
            theta1_bar,
            theta2,
            insurer,
            reinsurer,
            delta_step: 0.001,
            outer_grid: 200,
            eps_val,
        })
    }

    fn grid_len(&self) -> Result<usize> {
        if !(self.delta_step > 0.0 && self.delta_step <= 1.0) {
            return Err(Error::InvalidParams("delta step must lie in (0, 1]"));
        }
        Ok(math::round(1.0 / self.delta_step).max(1.0) as usize)
    }

    /// The swept `delta` values: `[0, 1]` in `delta_step` increments.
    pub fn delta_grid(&self) -> Result<Vec<f64>> {
        let n = self.grid_len()?;
        Ok((0..=n).map(|k| k as f64 / n as f64).collect())
    }
}

/// One `delta` row of the sweep. Attachment fields are absent when the
/// follower does not trade (`a = 0`) or, for the band width, when `delta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BowleyRow {
    pub delta: f64,
    pub theta1: f64,
    pub a: f64,
    pub d1: Option<f64>,
    pub d_i: Option<f64>,
    pub d2: Option<f64>,
    pub insurer_value: f64,
    pub reinsurer_value: f64,
    pub branch: Option<Branch>,
}

/// Outcome of the full sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BowleyReport {
    pub rows: Vec<BowleyRow>,
    /// Smallest `delta` attaining the best reinsurer value within `eps_val`.
    pub delta_star: f64,
    /// Endpoints of the set of `delta` values within `eps_val` of the best.
    pub optimal_set: (f64, f64),
    /// Follower's contract at `delta_star`.
    pub contract: Indemnity,
    pub insurer_value: f64,
    pub reinsurer_value: f64,
    pub warnings: Vec<String>,
}

/// Leader's risk for a given follower contract: the distorted value of the
/// ceded loss net of premium.
pub fn reinsurer_value(
    m: &LossModel,
    p: &PremiumParams,
    g2: &Distortion,
    i: &Indemnity,
) -> Result<f64> {
    let a = i.ceded_mean(m)?;
    let t = p.thresholds(a)?;
    rho_monotone_transform(g2, m, &premium::reinsurer_net_transform(p, &t, i))
}

/// `(d1, d_i, d2, branch)` labels of a contract; all `None` for no-trade.
type ContractLabel = (Option<f64>, Option<f64>, Option<f64>, Option<Branch>);

fn describe_contract(p: &PremiumParams, a: f64, i: &Indemnity) -> Result<ContractLabel> {
    Ok(match i.family() {
        Family::StopLoss { d } => (Some(*d), None, None, Some(Branch::StopLoss)),
        Family::FloorLayer { d1, d2 } => {
            let d_i = p.thresholds(a)?.y_floor;
            let branch = match d2 {
                Some(d2) if *d2 > d1 + d_i + 1e-9 * (1.0 + d2.abs()) => Branch::TwoLayer,
                _ => Branch::StopLoss,
            };
            (Some(*d1), Some(d_i), *d2, Some(branch))
        }
        _ => (None, None, None, None),
    })
}

struct FollowerResponse {
    delta: f64,
    theta1: f64,
    params: PremiumParams,
    a: f64,
    contract: Indemnity,
    insurer_value: f64,
}

fn follower_response(cfg: &BowleyConfig, delta: f64) -> Result<FollowerResponse> {
    let theta1 = theta1_rule(delta, cfg.theta0, cfg.theta1_bar);
    let params = PremiumParams::new(delta, cfg.theta0, theta1, cfg.theta2)?;
    let r = solve_insurer(&cfg.model, &params, &cfg.insurer, cfg.outer_grid)?;
    Ok(FollowerResponse {
        delta,
        theta1,
        params,
        a: r.a_star,
        contract: r.contract,
        insurer_value: r.value,
    })
}

fn response_row(cfg: &BowleyConfig, f: &FollowerResponse, g2: &Distortion) -> Result<BowleyRow> {
    let reins = if f.a == 0.0 {
        0.0
    } else {
        reinsurer_value(&cfg.model, &f.params, g2, &f.contract)?
    };
    let (d1, d_i, d2, branch) = describe_contract(&f.params, f.a, &f.contract)?;
    Ok(BowleyRow {
        delta: f.delta,
        theta1: f.theta1,
        a: f.a,
        d1,
        d_i,
        d2,
        insurer_value: f.insurer_value,
        reinsurer_value: reins,
        branch,
    })
}

/// One computed grid point of a sweep. `contract` is present whenever the
/// follower solve succeeded; `warning` records a failed stage (follower solve
/// or leader pricing) instead of aborting the whole sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub row: BowleyRow,
    pub contract: Option<Indemnity>,
    pub warning: Option<String>,
}

/// Compute one `delta` grid point. Points are independent of each other, so
/// callers may evaluate them in any order (or in parallel) and hand the
/// grid-ordered list to [`collect_report`].
pub fn sweep_point(cfg: &BowleyConfig, delta: f64) -> SweepPoint {
    match follower_response(cfg, delta) {
        Ok(f) => match response_row(cfg, &f, &cfg.reinsurer) {
            Ok(row) => SweepPoint {
                row,
                contract: Some(f.contract),
                warning: None,
            },
            Err(e) => SweepPoint {
                row: BowleyRow {
                    delta,
                    theta1: f.theta1,
                    a: f.a,
                    d1: None,
                    d_i: None,
                    d2: None,
                    insurer_value: f.insurer_value,
                    reinsurer_value: f64::NAN,
                    branch: None,
                },
                contract: Some(f.contract),
                warning: Some(format!("delta {delta}: leader value failed: {e}")),
            },
        },
        Err(e) => SweepPoint {
            row: BowleyRow {
                delta,
                theta1: theta1_rule(delta, cfg.theta0, cfg.theta1_bar),
                a: f64::NAN,
                d1: None,
                d_i: None,
                d2: None,
                insurer_value: f64::NAN,
                reinsurer_value: f64::NAN,
                branch: None,
            },
            contract: None,
            warning: Some(format!("delta {delta}: follower solve failed: {e}")),
        },
    }
}

/// Pick the leader optimum from grid-ordered points and assemble the report.
pub fn collect_report(cfg: &BowleyConfig, points: Vec<SweepPoint>) -> Result<BowleyReport> {
    let values: Vec<f64> = points.iter().map(|p| p.row.reinsurer_value).collect();
    let opt = optimal_indices(&values, cfg.eps_val)?;
    let (first, last) = (opt[0], *opt.last().unwrap());
    let contract = points[first]
        .contract
        .clone()
        .expect("optimal row has a follower contract");
    let mut rows = Vec::with_capacity(points.len());
    let mut warnings = Vec::new();
    for p in points {
        rows.push(p.row);
        if let Some(w) = p.warning {
            warnings.push(w);
        }
    }
    Ok(BowleyReport {
        delta_star: rows[first].delta,
        optimal_set: (rows[first].delta, rows[last].delta),
        contract,
        insurer_value: rows[first].insurer_value,
        reinsurer_value: rows[first].reinsurer_value,
        rows,
        warnings,
    })
}

/// Indices of the optimal set: rows within `eps` of the best finite value.
fn optimal_indices(values: &[f64], eps: f64) -> Result<Vec<usize>> {
    let vmin = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !vmin.is_finite() {
        return Err(Error::Numerical(
            "no delta produced a finite leader value",
        ));
    }
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= vmin + eps)
        .map(|(k, _)| k)
        .collect())
}

/// Sweep the `delta` grid and pick the leader's optimum.
pub fn sweep(cfg: &BowleyConfig) -> Result<BowleyReport> {
    let points = cfg
        .delta_grid()?
        .into_iter()
        .map(|delta| sweep_point(cfg, delta))
        .collect();
    collect_report(cfg, points)
}

/// One point of the leader-optimum-versus-risk-level curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub beta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

/// Trace the leader's optimal `delta` set as its risk level varies. The
/// follower's side does not depend on the leader's risk measure, so each
/// `delta` is solved once and re-priced per level.
pub fn beta_curve(cfg: &BowleyConfig, betas: &[f64]) -> Result<Vec<BetaRow>> {
    let points = cfg
        .delta_grid()?
        .into_iter()
        .map(|delta| sweep_point(cfg, delta))
        .collect::<Vec<_>>();
    beta_curve_from_points(cfg, &points, betas)
}

/// Re-price precomputed sweep points at each risk level. Every point must
/// carry a follower contract (leader-side pricing warnings are fine — pricing
/// is redone per level here, with divergent levels scored as non-optimal).
pub fn beta_curve_from_points(
    cfg: &BowleyConfig,
    points: &[SweepPoint],
    betas: &[f64],
) -> Result<Vec<BetaRow>> {
    for p in points {
        if p.contract.is_none() {
            return Err(Error::Numerical(
                "a follower solve failed; the beta curve needs every delta grid point",
            ));
        }
    }
    let mut out = Vec::with_capacity(betas.len());
    for &beta in betas {
        let g2 = cfg.reinsurer.with_level(beta)?;
        let mut values = Vec::with_capacity(points.len());
        for p in points {
            let v = if p.row.a == 0.0 {
                0.0
            } else {
                let params =
                    PremiumParams::new(p.row.delta, cfg.theta0, p.row.theta1, cfg.theta2)?;
                let contract = p.contract.as_ref().expect("checked above");
                match reinsurer_value(&cfg.model, &params, &g2, contract) {
                    Ok(v) => v,
                    Err(Error::Divergent(_)) => f64::NAN,
                    Err(e) => return Err(e),
                }
            };
            values.push(v);
        }
        let opt = optimal_indices(&values, cfg.eps_val)?;
        out.push(BetaRow {
            beta,
            delta_min: points[opt[0]].row.delta,
            delta_max: points[*opt.last().unwrap()].row.delta,
        });
    }
    Ok(out)
}
