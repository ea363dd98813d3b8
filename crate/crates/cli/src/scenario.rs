//! Scenario files: the JSON schema, strict parsing, and resolution of the
//! file contents against command-line overrides.
//!
//! A scenario pins everything a run needs -- loss model, premium loadings,
//! risk measures, solver settings -- so results are reproducible from the
//! file alone. Unknown keys are rejected rather than ignored: a typo must
//! fail loudly, not silently fall back to a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use repremia_core::dist::LossModel;
use repremia_core::risk::Distortion;

use crate::CliError;

/// Schema revision understood by this binary.
pub const SCHEMA: u32 = 1;

fn config_err(msg: String) -> CliError {
    CliError::Config(msg)
}

/// Loss distribution block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    Pareto { eta: f64, zeta: f64 },
    Exponential { mu: f64 },
    /// Survival-function knots `[x, s]` starting from `[0, 1]`.
    Tabulated { points: Vec<(f64, f64)> },
}

impl LossSpec {
    pub fn build(&self) -> Result<LossModel, CliError> {
        match self {
            LossSpec::Pareto { eta, zeta } => LossModel::pareto(*eta, *zeta),
            LossSpec::Exponential { mu } => LossModel::exponential(*mu),
            LossSpec::Tabulated { points } => LossModel::tabulated(points.clone()),
        }
        .map_err(|e| config_err(format!("loss block: {e}")))
    }

    /// Whether the n = 10^6 batched Monte-Carlo error bar is trustworthy:
    /// heavy tails without a finite variance make the standard error itself
    /// heavy-tailed.
    pub fn mc_friendly(&self) -> bool {
        match self {
            LossSpec::Pareto { zeta, .. } => *zeta > 2.1,
            _ => true,
        }
    }
}

/// Distortion-function block for either party's risk measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    Var { alpha: f64 },
    Tvar { alpha: f64 },
    Power { beta: f64 },
    /// Distortion knots `[p, g(p)]` from `[0, 0]` to `[1, 1]`.
    Table { knots: Vec<(f64, f64)> },
}

impl DistortionSpec {
    pub fn build(&self, role: &str) -> Result<Distortion, CliError> {
        match self {
            DistortionSpec::Var { alpha } => Distortion::var(*alpha),
            DistortionSpec::Tvar { alpha } => Distortion::tvar(*alpha),
            DistortionSpec::Power { beta } => Distortion::power(*beta),
            DistortionSpec::Table { knots } => Distortion::custom_table(knots.clone()),
        }
        .map_err(|e| config_err(format!("{role} block: {e}")))
    }
}

/// Evenly spaced inclusive grid; `step` must divide the range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn values(&self, what: &str) -> Result<Vec<f64>, CliError> {
        let (s, e, h) = (self.start, self.end, self.step);
        if !(s.is_finite() && e.is_finite() && h.is_finite() && h > 0.0 && e >= s) {
            return Err(config_err(format!(
                "{what}: grid needs finite start <= end and step > 0"
            )));
        }
        let n = ((e - s) / h).round();
        if (n * h - (e - s)).abs() > 1e-9 * (1.0 + e.abs()) {
            return Err(config_err(format!(
                "{what}: step {h} does not divide the range [{s}, {e}] evenly"
            )));
        }
        let n = n as usize;
        if n == 0 {
            return Ok(vec![s]);
        }
        Ok((0..=n)
            .map(|k| {
                if k == 0 {
                    s
                } else if k == n {
                    e
                } else {
                    s + (e - s) * (k as f64 / n as f64)
                }
            })
            .collect())
    }
}

/// Parse the `--delta-grid start:end:step` flag.
pub fn parse_grid_flag(text: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(config_err(format!(
            "--delta-grid wants start:end:step, got `{text}`"
        )));
    }
    let mut nums = [0.0f64; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| config_err(format!("--delta-grid: `{part}` is not a number")))?;
    }
    Ok(GridSpec {
        start: nums[0],
        end: nums[1],
        step: nums[2],
    })
}

/// Premium-scheme block. Exactly one of `theta1` / `theta1_bar` must be
/// present: a fixed reward loading, or the floor from which the loading is
/// derived per delta. `delta` and `delta_grid` are mutually exclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiumSpec {
    pub theta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1_bar: Option<f64>,
    pub theta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<GridSpec>,
}

/// Solver block; every field has a default so the block may be omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_val: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Inputs of the `premium-eval` command: the contract's mean ceded loss and
/// the realized ceded-loss grid to tabulate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiumEvalSpec {
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_values: Option<Vec<f64>>,
}

impl PremiumEvalSpec {
    pub fn ys(&self) -> Result<Vec<f64>, CliError> {
        match (&self.y_grid, &self.y_values) {
            (Some(g), None) => g.values("premium_eval.y_grid"),
            (None, Some(v)) => Ok(v.clone()),
            _ => Err(config_err(
                "premium_eval needs exactly one of y_grid | y_values".into(),
            )),
        }
    }
}

/// Risk-level grid for the `beta-curve` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetasSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_values: Option<Vec<f64>>,
}

impl BetasSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match (&self.beta_grid, &self.beta_values) {
            (Some(g), None) => g.values("betas.beta_grid"),
            (None, Some(v)) if !v.is_empty() => Ok(v.clone()),
            (None, Some(_)) => Err(config_err("betas.beta_values must not be empty".into())),
            _ => Err(config_err(
                "betas needs exactly one of beta_grid | beta_values".into(),
            )),
        }
    }
}

/// Knobs of the `verify` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_n: Option<usize>,
}

/// Output block; the `--out` flag takes precedence over `dir`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// A complete scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub loss: LossSpec,
    pub premium: PremiumSpec,
    pub insurer: DistortionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinsurer: Option<DistortionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premium_eval: Option<PremiumEvalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<BetasSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_err(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        let s: Scenario = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("scenario {}: {e}", path.display())))?;
        if s.schema != SCHEMA {
            return Err(config_err(format!(
                "scenario {}: schema {} is not supported (this build reads schema {SCHEMA})",
                path.display(),
                s.schema
            )));
        }
        let p = &s.premium;
        if p.theta1.is_some() == p.theta1_bar.is_some() {
            return Err(config_err(
                "premium block needs exactly one of theta1 | theta1_bar".into(),
            ));
        }
        if p.delta.is_some() && p.delta_grid.is_some() {
            return Err(config_err(
                "premium block allows at most one of delta | delta_grid".into(),
            ));
        }
        Ok(s)
    }

    pub fn solver(&self) -> SolverSpec {
        self.solver.clone().unwrap_or_default()
    }
}

/// Default delta sweep for leader-side commands when neither the scenario
/// nor the flags narrow it: the whole unit interval at the headline step.
pub fn default_delta_grid() -> GridSpec {
    GridSpec {
        start: 0.0,
        end: 1.0,
        step: 0.001,
    }
}

/// The resolved delta request after merging flags over the scenario.
#[derive(Debug, Clone)]
pub enum DeltaChoice {
    Fixed(f64),
    Grid(GridSpec),
    Unset,
}

impl DeltaChoice {
    pub fn from_parts(
        flag_delta: Option<f64>,
        flag_grid: Option<&str>,
        spec: &PremiumSpec,
    ) -> Result<Self, CliError> {
        if flag_delta.is_some() && flag_grid.is_some() {
            return Err(config_err("--delta conflicts with --delta-grid".into()));
        }
        if let Some(d) = flag_delta {
            return Ok(DeltaChoice::Fixed(d));
        }
        if let Some(g) = flag_grid {
            return Ok(DeltaChoice::Grid(parse_grid_flag(g)?));
        }
        if let Some(d) = spec.delta {
            return Ok(DeltaChoice::Fixed(d));
        }
        if let Some(g) = &spec.delta_grid {
            return Ok(DeltaChoice::Grid(g.clone()));
        }
        Ok(DeltaChoice::Unset)
    }

    /// A single delta, for commands that tabulate or verify one scheme.
    pub fn single(&self, cmd: &str) -> Result<f64, CliError> {
        match self {
            DeltaChoice::Fixed(d) => Ok(*d),
            DeltaChoice::Grid(_) => Err(config_err(format!(
                "{cmd} needs a single delta; use --delta or the scenario's premium.delta"
            ))),
            DeltaChoice::Unset => Err(config_err(format!(
                "{cmd} needs a delta; set premium.delta or pass --delta"
            ))),
        }
    }

    /// One or more deltas, for the contract solver.
    pub fn list(&self, cmd: &str) -> Result<Vec<f64>, CliError> {
        match self {
            DeltaChoice::Fixed(d) => Ok(vec![*d]),
            DeltaChoice::Grid(g) => g.values("delta_grid"),
            DeltaChoice::Unset => Err(config_err(format!(
                "{cmd} needs a delta; set premium.delta, premium.delta_grid, --delta or --delta-grid"
            ))),
        }
    }

    /// A sweep grid, for leader-side commands; defaults to the full unit
    /// interval. A fixed delta degenerates to a one-point sweep.
    pub fn sweep_grid(&self) -> Result<(GridSpec, Vec<f64>), CliError> {
        let g = match self {
            DeltaChoice::Fixed(d) => GridSpec {
                start: *d,
                end: *d,
                step: 1.0,
            },
            DeltaChoice::Grid(g) => g.clone(),
            DeltaChoice::Unset => default_delta_grid(),
        };
        let vals = g.values("delta_grid")?;
        Ok((g, vals))
    }
}
