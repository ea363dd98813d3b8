//! Independent verification machinery: Monte Carlo estimation of distorted
//! values, mean-preserving contract surgery that certifies the layered
//! optima by convex order, a stop-loss-transform convex-order checker, and
//! brute-force grid minimizers.
//!
//! Everything here deliberately avoids the solver's closed-form fast paths,
//! so disagreement between the two sides shows up loudly in tests.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dist::LossModel;
use crate::error::Error;
use crate::indemnity::{complete_cap_layer, complete_floor_layer, Family, Indemnity};
use crate::math;
use crate::numeric;
use crate::piecewise::PwlFn;
use crate::premium::{self, PremiumParams};
use crate::risk::{rho_monotone_transform, rho_of_loss, Distortion};
use crate::Result;

/// How a Monte Carlo estimate was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McKind {
    /// Plain average of the worst tail of the sample.
    TailAverage,
    /// L-statistic weighting descending order statistics by distortion
    /// increments.
    LStatistic,
}

/// A Monte Carlo point estimate with a batching standard error.
#[derive(Debug, Clone, Copy)]
pub struct MCEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
    pub kind: McKind,
}

fn sort_descending(z: &mut [f64]) {
    z.sort_unstable_by(|a, b| b.partial_cmp(a).expect("sample values are not NaN"));
}

/// Estimator on an already descending-sorted sample.
fn estimate_sorted(d: &Distortion, z: &[f64]) -> (f64, McKind) {
    let n = z.len();
    if let Some(alpha) = d.tvar_alpha() {
        let k = (math::ceil(alpha * n as f64) as usize).clamp(1, n);
        (z[..k].iter().sum::<f64>() / k as f64, McKind::TailAverage)
    } else {
        let mut acc = 0.0;
        let mut g_prev = 0.0;
        for (k, &zk) in z.iter().enumerate() {
            let g_k = d.g_eval(((k + 1) as f64 / n as f64).min(1.0));
            acc += (g_k - g_prev) * zk;
            g_prev = g_k;
        }
        (acc, McKind::LStatistic)
    }
}

/// Monte Carlo estimate of the distorted value of `position(X)`.
pub fn mc_rho(
    d: &Distortion,
    position: &PwlFn,
    m: &LossModel,
    n: usize,
    seed: u64,
) -> Result<MCEstimate> {
    mc_rho_stream(d, position, m, n, seed, 0)
}

/// Like [`mc_rho`] but on an independent RNG stream, so many cases can share
/// one master seed deterministically.
pub fn mc_rho_stream(
    d: &Distortion,
    position: &PwlFn,
    m: &LossModel,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<MCEstimate> {
    if n < 1000 {
        return Err(Error::InvalidParams(
            "monte carlo estimation needs at least 1000 samples",
        ));
    }
    let xs = m.sample_stream(n, seed, stream)?;
    let z: Vec<f64> = xs.iter().map(|&x| position.eval(x)).collect();

    let mut sorted = z.clone();
    sort_descending(&mut sorted);
    let (estimate, kind) = estimate_sorted(d, &sorted);

    // nonparametric batching: the spread of 20 sub-estimates scales like the
    // sampling error of the full estimate
    const BATCHES: usize = 20;
    let b = n / BATCHES;
    let mut batch_estimates = [0.0; BATCHES];
    for (j, slot) in batch_estimates.iter_mut().enumerate() {
        let mut batch = z[j * b..(j + 1) * b].to_vec();
        sort_descending(&mut batch);
        *slot = estimate_sorted(d, &batch).0;
    }
    let mean = batch_estimates.iter().sum::<f64>() / BATCHES as f64;
    let var = batch_estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / (BATCHES - 1) as f64;
    let std_error = math::sqrt(var / BATCHES as f64);

    Ok(MCEstimate {
        estimate,
        std_error,
        n,
        seed,
        kind,
    })
}

// ---------------------------------------------------------------------------
// mean-preserving improvement surgery
// ---------------------------------------------------------------------------

/// Pieces of `pw` kept up to `x0`, constant afterwards.
fn truncate_flat(pw: &PwlFn, x0: f64) -> PwlFn {
    if x0 <= 0.0 {
        return PwlFn::constant(pw.value_at_origin());
    }
    let mut pieces: Vec<(f64, f64)> = pw
        .pieces()
        .iter()
        .copied()
        .take_while(|&(x, _)| x < x0)
        .collect();
    pieces.push((x0, 0.0));
    PwlFn::new(pw.value_at_origin(), pieces).expect("truncation keeps abscissae ordered")
}

/// Root of a nonincreasing residual on `[lo, hi]`, tolerant of endpoint noise
/// from the analytic sign guarantees.
fn place_monotone<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, ftol: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(lo);
    }
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::Numerical(
            "mean-matching residual is NaN; the construction bracket is broken",
        ));
    }
    if flo <= 0.0 {
        return Ok(lo);
    }
    if fhi >= 0.0 {
        return Ok(hi);
    }
    numeric::bisect(f, lo, hi, 1e-13 * (1.0 + math::abs(hi)), ftol)
}

/// Reshape a feasible contract into the three-layer form (floor-width ramp,
/// band-width layer, unlimited excess) with the same ceded mean and a total
/// cost that is smaller in convex order.
///
/// The surgery straightens the contract in three mean-preserving steps:
/// first everything above the cap crossing becomes a single excess layer,
/// then the stretch between the floor and cap crossings becomes one
/// band-width layer, and finally everything below becomes a floor-width
/// ramp. Each step's placement parameter is pinned by a monotone
/// mean-matching residual whose bracket signs are guaranteed analytically,
/// so a failed bracket signals a bug rather than bad input.
pub fn improve_to_three_layer(
    i: &Indemnity,
    m: &LossModel,
    p: &PremiumParams,
) -> Result<Indemnity> {
    let scale = m.mean();
    let a = i.ceded_mean(m)?;
    if a <= 1e-12 * scale {
        return Ok(Indemnity::zero());
    }
    if p.is_constant() {
        // constant premium: the classical mean-preserving stop-loss rearrangement
        return Indemnity::stop_loss(m.invert_stop_loss(a)?);
    }
    let t = p.thresholds(a)?;
    let (x_d, x_u) = i.scheme_crossings(&t);
    if !x_d.is_finite() {
        // only reachable when the ceded loss is almost surely constant at the
        // floor edge; there is nothing to straighten
        return Ok(i.clone());
    }
    let w_band = t.y_cap - t.y_floor;
    let ftol = 1e-11 * scale.max(a);

    // step 1: one excess layer above the cap crossing
    let tail_at = if x_u.is_finite() {
        let below = truncate_flat(i.pw(), x_u).expectation(m)?;
        let target = a - below;
        if target <= ftol {
            None
        } else {
            Some(m.invert_stop_loss(target)?.max(x_u))
        }
    } else {
        None
    };
    let tail_mass = match tail_at {
        Some(e) => m.stop_loss(e)?,
        None => 0.0,
    };

    // step 2: one band-width layer between the crossings
    let base = truncate_flat(i.pw(), x_d).expectation(m)?;
    let band_target = (a - base - tail_mass).max(0.0);
    let mid = if w_band <= 0.0 || band_target <= ftol {
        x_d
    } else {
        let resid = |c: f64| {
            m.layer_mean(c, c + w_band)
                .map_or(f64::NAN, |v| v - band_target)
        };
        let hi_c = match tail_at {
            Some(e) => e - w_band,
            None => match numeric::expand_until_negative(resid, x_d, scale.max(w_band), 200) {
                Some(h) => h,
                None => x_d, // no mass left to the right; park at the crossing
            },
        };
        place_monotone(resid, x_d, hi_c, ftol)?
    };
    let band_mass = if w_band <= 0.0 {
        0.0
    } else {
        m.layer_mean(mid, mid + w_band)?
    };

    // step 3: a floor-width ramp below the band
    let ramp_target = (a - band_mass - tail_mass).max(0.0);
    let lo = if t.y_floor <= 0.0 {
        mid
    } else {
        let resid = |s: f64| {
            m.layer_mean(s, s + t.y_floor)
                .map_or(f64::NAN, |v| v - ramp_target)
        };
        place_monotone(resid, 0.0, mid - t.y_floor, ftol)?
    };

    let hi = tail_at.map(|e| e.max(mid + w_band));
    Indemnity::sandwich(&t, lo, Some(mid.max(lo + t.y_floor)), hi)
}

/// Collapse a three-layer contract into a member of one of the two-layer
/// families with the same ceded mean, the same expected total cost, and a
/// total cost that is smaller in convex order.
///
/// The floor-family and cap-family constructions bracket the input's
/// expected total cost from below and above; the returned contract is the
/// family member matching it exactly.
pub fn improve_to_two_layer(
    i3: &Indemnity,
    m: &LossModel,
    p: &PremiumParams,
) -> Result<Indemnity> {
    let scale = m.mean();
    let a = i3.ceded_mean(m)?;
    if a <= 1e-12 * scale {
        return Ok(Indemnity::zero());
    }
    if p.is_constant() {
        return Indemnity::stop_loss(m.invert_stop_loss(a)?);
    }
    // structural points come straight from the family fields: re-deriving
    // them from level crossings is ill-posed on the construction's plateaus
    let (lo, mid, excess_at) = match *i3.family() {
        Family::StopLoss { .. } | Family::FloorLayer { .. } | Family::CapLayer { .. } => {
            return Ok(i3.clone());
        }
        // a band-less sandwich is a bare floor-width ramp, already inside
        // the floor family
        Family::Sandwich { mid: None, .. } => return Ok(i3.clone()),
        Family::Sandwich {
            lo,
            mid: Some(mid),
            hi,
        } => (lo, mid, hi),
        Family::General => {
            return Err(Error::Unsupported(
                "two-layer improvement expects a three-layer input; run the three-layer improvement first",
            ));
        }
    };
    let t = p.thresholds(a)?;
    let ftol = 1e-11 * scale.max(a);

    // lower construction: keep the floor ramp, mean-match the excess attachment
    let h1 = complete_floor_layer(m, p, a, lo)?;

    // upper construction: one contiguous cap-width layer keeping the input's
    // excess tail. Sliding it from the ramp start (over-covers) to the band
    // start (under-covers) brackets the mean match; the excess attachment
    // follows the constructor's clamp, so the residual models it too.
    let resid = |c: f64| {
        let layer = m.layer_mean(c, c + t.y_cap);
        let tail = match excess_at {
            Some(e) => m.stop_loss(e.max(c + t.y_cap)),
            None => Ok(0.0),
        };
        match (layer, tail) {
            (Ok(l), Ok(s)) => l + s - a,
            _ => f64::NAN,
        }
    };
    let c2 = place_monotone(resid, lo, mid, ftol)?;
    let h2 = Indemnity::cap_layer(&t, c2, excess_at.map(|e| e.max(c2 + t.y_cap)))?;

    // interpolate within the family whose side of the stop-loss value the
    // input's expected total cost falls on
    let expected_cost = |ind: &Indemnity| -> Result<f64> {
        Ok(scale - a + premium::expected_premium(p, &t, ind, m)?)
    };
    let et_i3 = expected_cost(i3)?;
    let et_h1 = expected_cost(&h1)?;
    let et_h2 = expected_cost(&h2)?;
    let d_tilde = m.invert_stop_loss(a)?;
    let et_sl = expected_cost(&Indemnity::stop_loss(d_tilde)?)?;
    let vtol = 1e-10 * scale.max(a);

    if et_i3 <= et_sl {
        if et_i3 <= et_h1 + vtol {
            return Ok(h1);
        }
        // expected cost grows with the floor-family attachment point
        let g = |d1: f64| match complete_floor_layer(m, p, a, d1).and_then(|h| expected_cost(&h)) {
            Ok(v) => v - et_i3,
            Err(_) => f64::NAN,
        };
        let d1 = numeric::bisect(g, lo, d_tilde, 1e-13 * (1.0 + d_tilde), vtol)?;
        complete_floor_layer(m, p, a, d1)
    } else {
        if et_i3 >= et_h2 - vtol {
            return Ok(h2);
        }
        // expected cost falls with the cap-family attachment point
        let g = |d1: f64| match complete_cap_layer(m, p, a, d1).and_then(|h| expected_cost(&h)) {
            Ok(v) => v - et_i3,
            Err(_) => f64::NAN,
        };
        let d1 = numeric::bisect(g, c2, d_tilde, 1e-13 * (1.0 + d_tilde), vtol)?;
        complete_cap_layer(m, p, a, d1)
    }
}

// ---------------------------------------------------------------------------
// convex-order certification
// ---------------------------------------------------------------------------

/// Outcome of a convex-order comparison.
#[derive(Debug, Clone, Copy)]
pub struct CxReport {
    pub ok: bool,
    /// Absolute difference of the two means.
    pub mean_gap: f64,
    /// Worst positive amount by which the left stop-loss transform exceeds
    /// the right one across the threshold grid.
    pub max_violation: f64,
}

/// Certify `z1(X)` smaller than `z2(X)` in convex order: equal means, and
/// `E[(z1(X)-t)+] <= E[(z2(X)-t)+]` across a threshold grid covering both
/// ranges plus a tail stretch.
pub fn convex_order_check(
    z1: &PwlFn,
    z2: &PwlFn,
    m: &LossModel,
    t_grid: usize,
) -> Result<CxReport> {
    if !z1.is_nondecreasing() || !z2.is_nondecreasing() {
        return Err(Error::Domain(
            "convex order check expects nondecreasing transforms",
        ));
    }
    if t_grid < 2 {
        return Err(Error::InvalidParams("threshold grid needs at least 2 points"));
    }
    let scale = m.mean().max(1e-12);
    let tol = 1e-7 * scale;
    let mean_gap = math::abs(z1.expectation(m)? - z2.expectation(m)?);

    let lo_t = z1.value_at_origin().min(z2.value_at_origin());
    let mut hi_t = lo_t;
    let mut probes: Vec<f64> = Vec::new();
    for z in [z1, z2] {
        for &(x, _) in z.pieces() {
            let v = z.eval(x);
            probes.push(v);
            hi_t = hi_t.max(v);
        }
    }
    // beyond every kink both transforms are a single ray, so a stretched tail
    // catches any final-slope mismatch
    hi_t += 32.0 * (hi_t - lo_t).max(scale);
    for k in 0..=t_grid {
        probes.push(lo_t + (hi_t - lo_t) * k as f64 / t_grid as f64);
    }

    let mut worst = 0.0f64;
    for &th in &probes {
        let gap = z1.expected_excess(m, th)? - z2.expected_excess(m, th)?;
        worst = worst.max(gap);
    }
    Ok(CxReport {
        ok: mean_gap <= tol && worst <= tol,
        mean_gap,
        max_violation: worst,
    })
}

// ---------------------------------------------------------------------------
// brute-force minimizers
// ---------------------------------------------------------------------------

/// Best contract found by exhaustive search.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub contract: Indemnity,
    pub a: f64,
    pub value: f64,
}

/// Exhaustive minimizer over floor-width two-layer layouts on the given
/// grids, valuing every candidate through the generic transform path only.
pub fn brute_force_insurer(
    m: &LossModel,
    p: &PremiumParams,
    g: &Distortion,
    a_grid: &[f64],
    d1_grid: usize,
) -> Result<BruteForceResult> {
    if a_grid.is_empty() {
        return Err(Error::InvalidParams("ceded-mean grid must be nonempty"));
    }
    if d1_grid < 50 {
        return Err(Error::InvalidParams("attachment grid needs at least 50 points"));
    }
    let mean = m.mean();
    let rho_x = match rho_of_loss(g, m) {
        Ok(v) => v,
        Err(Error::Divergent(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let mut best = BruteForceResult {
        contract: Indemnity::zero(),
        a: 0.0,
        value: rho_x,
    };
    let mut consider = |v: f64, i: Indemnity, a: f64| {
        if v < best.value {
            best = BruteForceResult {
                contract: i,
                a,
                value: v,
            };
        }
    };
    for &a_raw in a_grid {
        if !(a_raw > 0.0) || a_raw > mean * (1.0 + 1e-12) {
            continue;
        }
        let a = a_raw.min(mean);
        let t = p.thresholds(a)?;
        let d_tilde = m.invert_stop_loss(a)?;
        if p.is_constant() {
            let i = Indemnity::stop_loss(d_tilde)?;
            let v = rho_monotone_transform(g, m, &premium::insurer_total_transform(p, &t, &i))?;
            consider(v, i, a);
            continue;
        }
        for k in 0..=d1_grid {
            let d1 = d_tilde * k as f64 / d1_grid as f64;
            let Ok(i) = complete_floor_layer(m, p, a, d1) else {
                continue;
            };
            let Ok(v) = rho_monotone_transform(g, m, &premium::insurer_total_transform(p, &t, &i))
            else {
                continue;
            };
            consider(v, i, a);
        }
    }
    Ok(best)
}

/// Coarse exhaustive search over full three-layer layouts (ramp position x
/// band position, excess mean-matched). Returns the best value found; used
/// to confirm nothing outside the two-layer families wins.
pub fn brute_force_three_layer(
    m: &LossModel,
    p: &PremiumParams,
    g: &Distortion,
    a_grid: &[f64],
    lo_grid: usize,
    mid_grid: usize,
) -> Result<f64> {
    if p.is_constant() {
        return Err(Error::InvalidParams(
            "three-layer search needs a variable scheme",
        ));
    }
    let mean = m.mean();
    let mut best = f64::INFINITY;
    for &a_raw in a_grid {
        if !(a_raw > 0.0) || a_raw > mean * (1.0 + 1e-12) {
            continue;
        }
        let a = a_raw.min(mean);
        let t = p.thresholds(a)?;
        let w1 = t.y_floor;
        let w2 = t.y_cap - t.y_floor;
        let d_tilde = m.invert_stop_loss(a)?;
        // horizon past which a band holds less than a thousandth of the target
        let mid_hi = m.invert_stop_loss(1e-3 * a)?.max(d_tilde + t.y_cap);
        for ki in 0..=lo_grid {
            let lo = d_tilde * ki as f64 / lo_grid as f64;
            let ramp = if w1 > 0.0 {
                m.layer_mean(lo, lo + w1)?
            } else {
                0.0
            };
            let after_ramp = a - ramp;
            if after_ramp < -1e-9 * a {
                continue;
            }
            let mid_lo = lo + w1;
            for kj in 0..=mid_grid {
                let mid = mid_lo + (mid_hi - mid_lo) * kj as f64 / mid_grid as f64;
                let band = m.layer_mean(mid, mid + w2)?;
                let resid = after_ramp - band;
                if resid < -1e-9 * a {
                    continue;
                }
                let hi = if resid <= 0.0 {
                    None
                } else {
                    Some(m.invert_stop_loss(resid)?.max(mid + w2))
                };
                let Ok(i) = Indemnity::sandwich(&t, lo, Some(mid), hi) else {
                    continue;
                };
                let v =
                    rho_monotone_transform(g, m, &premium::insurer_total_transform(p, &t, &i))?;
                best = best.min(v);
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// randomized instances
// ---------------------------------------------------------------------------

/// Deterministic per-case RNG: one master seed, one stream per case index.
pub fn case_rng(seed: u64, case: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case);
    rng
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform draw on `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    math::exp(uniform(rng, math::ln(lo), math::ln(hi)))
}

/// Random loss model with scale parameters log-uniform on `[0.5, 4]` (the
/// heavy-tail shape stays above 1.3 so means and the solver's integrals
/// exist).
pub fn random_model(rng: &mut ChaCha8Rng) -> LossModel {
    if rng.next_u64().is_multiple_of(2) {
        LossModel::exponential(log_uniform(rng, 0.5, 4.0)).expect("scale is positive")
    } else {
        let eta = log_uniform(rng, 0.5, 4.0);
        let zeta = uniform(rng, 1.3, 4.0);
        LossModel::pareto(eta, zeta).expect("parameters are in range")
    }
}

/// Random premium parameters respecting the loading order.
pub fn random_premium(rng: &mut ChaCha8Rng) -> PremiumParams {
    let delta = uniform(rng, 0.2, 1.0);
    let theta0 = uniform(rng, 0.5, 1.5);
    let theta1 = uniform(rng, (theta0 - delta).max(0.0), theta0);
    let theta2 = theta0 + uniform(rng, 0.3, 2.0);
    PremiumParams::new(delta, theta0, theta1, theta2).expect("ranges satisfy the loading order")
}

/// Random feasible contract: up to eight breakpoints on `[0, horizon]` with
/// slopes from `{0, 1/2, 1}` (never identically zero).
pub fn random_indemnity(rng: &mut ChaCha8Rng, horizon: f64) -> Indemnity {
    let n_extra = (rng.next_u64() % 8) as usize;
    let mut xs: Vec<f64> = (0..n_extra).map(|_| uniform(rng, 0.0, horizon)).collect();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * horizon);

    let slopes = [0.0, 0.5, 1.0];
    let pick = |rng: &mut ChaCha8Rng| slopes[(rng.next_u64() % 3) as usize];
    let mut pieces = alloc::vec![(0.0, pick(rng))];
    for &x in &xs {
        if x > 0.0 {
            pieces.push((x, pick(rng)));
        }
    }
    if pieces.iter().all(|&(_, s)| s == 0.0) {
        let last = pieces.len() - 1;
        pieces[last].1 = 1.0;
    }
    Indemnity::general(pieces).expect("slopes lie in [0, 1]")
}
