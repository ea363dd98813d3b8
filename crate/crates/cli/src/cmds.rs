//! The six subcommands: scenario resolution, computation, file emission.
//!
//! Every emitted file carries the resolved configuration (as a `# config:`
//! comment in CSV, a `"config"` field in JSON) so a result can be traced
//! back to its inputs without the scenario file at hand.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use repremia_core::bowley::{
    beta_curve_from_points, collect_report, sweep_point, theta1_rule, BowleyConfig, SweepPoint,
};
use repremia_core::dist::LossModel;
use repremia_core::indemnity::{complete_floor_layer, Family, Indemnity};
use repremia_core::insurer::{solve_insurer, SolveReport};
use repremia_core::oracle::{
    brute_force_insurer, case_rng, convex_order_check, improve_to_three_layer,
    improve_to_two_layer, mc_rho, random_indemnity, random_premium, uniform,
};
use repremia_core::premium::{
    insurer_total_transform, realized_premium, PremiumParams, SchemeThresholds,
};
use repremia_core::risk::{rho_monotone_transform, rho_t_i1_closed, Distortion};
use repremia_core::Error as CoreError;

use crate::format::{csv_file, junit_file, opt12, sig12, JunitCase};
use crate::scenario::{DeltaChoice, GridSpec, PremiumSpec, Scenario, SCHEMA};
use crate::{classify, CliError, CommonOpts, Outcome, OutFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdKind {
    PremiumEval,
    Solve,
    Bowley,
    Sweep,
    BetaCurve,
    Verify,
}

impl CmdKind {
    fn name(self) -> &'static str {
        match self {
            CmdKind::PremiumEval => "premium-eval",
            CmdKind::Solve => "solve",
            CmdKind::Bowley => "bowley",
            CmdKind::Sweep => "sweep",
            CmdKind::BetaCurve => "beta-curve",
            CmdKind::Verify => "verify",
        }
    }
}

/// Everything a command needs, resolved from the scenario and the flags.
pub struct Ctx {
    pub scenario: Scenario,
    pub model: LossModel,
    pub insurer: Distortion,
    pub out_dir: PathBuf,
    pub format: OutFormat,
    pub seed: u64,
    /// Explicit worker cap; `None` lets the pool size itself.
    pub threads: Option<usize>,
    pub pool: rayon::ThreadPool,
    pub outer_grid: usize,
    pub eps_val: Option<f64>,
    pub delta: DeltaChoice,
}

pub fn run(kind: CmdKind, opts: &CommonOpts) -> Result<Outcome, CliError> {
    let scenario = Scenario::load(&opts.scenario)?;
    let solver = scenario.solver();
    let model = scenario.loss.build()?;
    let insurer = scenario.insurer.build("insurer")?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| {
            scenario
                .output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let threads = opts.threads.or(solver.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot build the worker pool: {e}")))?;
    let delta = DeltaChoice::from_parts(opts.delta, opts.delta_grid.as_deref(), &scenario.premium)?;
    let ctx = Ctx {
        model,
        insurer,
        out_dir,
        format: opts.format,
        seed: opts.seed.or(solver.seed).unwrap_or(1729),
        threads,
        pool,
        outer_grid: solver.outer_grid.unwrap_or(200),
        eps_val: solver.eps_val,
        delta,
        scenario,
    };
    log::info!(
        "{} on {} workers, outputs in {}",
        kind.name(),
        ctx.pool.current_num_threads(),
        ctx.out_dir.display()
    );
    match kind {
        CmdKind::PremiumEval => premium_eval(&ctx),
        CmdKind::Solve => solve(&ctx),
        CmdKind::Bowley => bowley(&ctx),
        CmdKind::Sweep => sweep(&ctx),
        CmdKind::BetaCurve => beta_curve(&ctx),
        CmdKind::Verify => verify(&ctx),
    }
}

// ---------------------------------------------------------------- plumbing

/// Reward loading and scheme parameters at one `delta`.
fn params_at(spec: &PremiumSpec, delta: f64) -> Result<(f64, PremiumParams), CliError> {
    let theta1 = match (spec.theta1, spec.theta1_bar) {
        (Some(t1), None) => t1,
        (None, Some(tb)) => theta1_rule(delta, spec.theta0, tb),
        _ => unreachable!("scenario loading enforces exactly one"),
    };
    let p = PremiumParams::new(delta, spec.theta0, theta1, spec.theta2)
        .map_err(|e| CliError::Config(format!("premium block at delta {delta}: {e}")))?;
    Ok((theta1, p))
}

/// The loading floor, required by the leader-side commands.
fn theta1_bar_required(spec: &PremiumSpec, cmd: &str) -> Result<f64, CliError> {
    spec.theta1_bar.ok_or_else(|| {
        CliError::Config(format!(
            "{cmd} derives theta1 per delta and needs premium.theta1_bar, not a fixed theta1"
        ))
    })
}

fn bowley_cfg(ctx: &Ctx, cmd: &str) -> Result<BowleyConfig, CliError> {
    let spec = &ctx.scenario.premium;
    let theta1_bar = theta1_bar_required(spec, cmd)?;
    let reinsurer = ctx
        .scenario
        .reinsurer
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{cmd} needs a reinsurer block")))?
        .build("reinsurer")?;
    let mut cfg = BowleyConfig::new(
        ctx.model.clone(),
        spec.theta0,
        theta1_bar,
        spec.theta2,
        ctx.insurer.clone(),
        reinsurer,
    )
    .map_err(|e| CliError::Config(format!("{cmd}: {e}")))?;
    cfg.outer_grid = ctx.outer_grid;
    if let Some(e) = ctx.eps_val {
        cfg.eps_val = e;
    }
    Ok(cfg)
}

/// Resolved configuration echoed into every output of a command.
fn echo(ctx: &Ctx, command: &str, extras: &[(&str, Value)]) -> Value {
    let mut o = Map::new();
    o.insert("command".into(), json!(command));
    o.insert("schema".into(), json!(SCHEMA));
    o.insert(
        "loss".into(),
        serde_json::to_value(&ctx.scenario.loss).expect("loss spec serializes"),
    );
    let spec = &ctx.scenario.premium;
    let mut prem = Map::new();
    prem.insert("theta0".into(), json!(spec.theta0));
    if let Some(t1) = spec.theta1 {
        prem.insert("theta1".into(), json!(t1));
    }
    if let Some(tb) = spec.theta1_bar {
        prem.insert("theta1_bar".into(), json!(tb));
    }
    prem.insert("theta2".into(), json!(spec.theta2));
    o.insert("premium".into(), Value::Object(prem));
    o.insert(
        "insurer".into(),
        serde_json::to_value(&ctx.scenario.insurer).expect("distortion spec serializes"),
    );
    if let Some(r) = &ctx.scenario.reinsurer {
        o.insert(
            "reinsurer".into(),
            serde_json::to_value(r).expect("distortion spec serializes"),
        );
    }
    o.insert("outer_grid".into(), json!(ctx.outer_grid));
    if let Some(e) = ctx.eps_val {
        o.insert("eps_val".into(), json!(e));
    }
    o.insert("seed".into(), json!(ctx.seed));
    if let Some(t) = ctx.threads {
        o.insert("threads".into(), json!(t));
    }
    o.insert("format".into(), json!(ctx.format.as_str()));
    for (k, v) in extras {
        o.insert((*k).into(), v.clone());
    }
    Value::Object(o)
}

fn grid_echo(g: &GridSpec, points: usize) -> Value {
    json!({"start": g.start, "end": g.end, "step": g.step, "points": points})
}

fn write_out(ctx: &Ctx, name: &str, contents: &str) -> Result<(), CliError> {
    let path = ctx.out_dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json(ctx: &Ctx, name: &str, doc: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    write_out(ctx, name, &text)
}

fn contract_json(i: &Indemnity) -> Value {
    let mut o = Map::new();
    match i.family() {
        Family::StopLoss { d } => {
            o.insert("family".into(), json!("stop-loss"));
            o.insert("d".into(), json!(d));
        }
        Family::FloorLayer { d1, d2 } => {
            o.insert("family".into(), json!("floor-layer"));
            o.insert("d1".into(), json!(d1));
            o.insert("d2".into(), json!(d2));
        }
        Family::CapLayer { d1, d2 } => {
            o.insert("family".into(), json!("cap-layer"));
            o.insert("d1".into(), json!(d1));
            o.insert("d2".into(), json!(d2));
        }
        Family::Sandwich { lo, mid, hi } => {
            o.insert("family".into(), json!("sandwich"));
            o.insert("lo".into(), json!(lo));
            o.insert("mid".into(), json!(mid));
            o.insert("hi".into(), json!(hi));
        }
        Family::General => {
            o.insert("family".into(), json!("general"));
        }
    }
    o.insert("value_at_origin".into(), json!(i.pw().value_at_origin()));
    o.insert("pieces".into(), json!(i.pw().pieces()));
    Value::Object(o)
}

/// `(d1, d_i, d2, branch)` labels of a contract, all absent for no-trade.
type ContractLabel = (Option<f64>, Option<f64>, Option<f64>, Option<&'static str>);

/// Attachment summary of a solved contract, mirroring how sweep rows are
/// labeled.
fn contract_fields(p: &PremiumParams, a: f64, i: &Indemnity) -> Result<ContractLabel, CliError> {
    if a == 0.0 {
        return Ok((None, None, None, None));
    }
    match i.family() {
        Family::StopLoss { d } => Ok((Some(*d), None, None, Some("stop-loss"))),
        Family::FloorLayer { d1, d2 } => {
            let d_i = p
                .thresholds(a)
                .map_err(|e| classify("premium thresholds", e))?
                .y_floor;
            let branch = match d2 {
                Some(x) if *x > d1 + d_i + 1e-9 * (1.0 + x.abs()) => "two-layer",
                _ => "stop-loss",
            };
            Ok((Some(*d1), Some(d_i), *d2, Some(branch)))
        }
        _ => Ok((None, None, None, None)),
    }
}

// ------------------------------------------------------------ premium-eval

fn premium_branch(p: &PremiumParams, t: &SchemeThresholds, y: f64) -> &'static str {
    if t.a == 0.0 || p.is_constant() {
        "constant"
    } else if y <= t.y_floor {
        "floor"
    } else if y >= t.y_cap {
        "cap"
    } else {
        "band"
    }
}

fn premium_eval(ctx: &Ctx) -> Result<Outcome, CliError> {
    let delta = ctx.delta.single("premium-eval")?;
    let (theta1, p) = params_at(&ctx.scenario.premium, delta)?;
    let pe = ctx.scenario.premium_eval.as_ref().ok_or_else(|| {
        CliError::Config("premium-eval needs a premium_eval block in the scenario".into())
    })?;
    let t = p
        .thresholds(pe.a)
        .map_err(|e| CliError::Config(format!("premium_eval.a: {e}")))?;
    let ys = pe.ys()?;
    let cfg = echo(
        ctx,
        "premium-eval",
        &[
            ("delta", json!(delta)),
            ("theta1_resolved", json!(theta1)),
            ("a", json!(pe.a)),
            ("y_points", json!(ys.len())),
        ],
    );
    let rows: Vec<(f64, f64, &'static str)> = ys
        .iter()
        .map(|&y| (y, realized_premium(&p, &t, y), premium_branch(&p, &t, y)))
        .collect();
    match ctx.format {
        OutFormat::Csv => {
            let lines: Vec<String> = rows
                .iter()
                .map(|(y, pi, b)| format!("{},{},{b}", sig12(*y), sig12(*pi)))
                .collect();
            let text = csv_file(
                "premium-eval",
                &cfg.to_string(),
                &[],
                "y,premium,branch",
                &lines,
            );
            write_out(ctx, "premium_eval.csv", &text)?;
        }
        OutFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(y, pi, b)| json!({"y": y, "premium": pi, "branch": b}))
                .collect();
            write_json(
                ctx,
                "premium_eval.json",
                &json!({"config": cfg, "rows": rows}),
            )?;
        }
    }
    println!(
        "premium-eval: {} rows at delta {} (floor {}, cap {})",
        rows.len(),
        sig12(delta),
        sig12(t.floor),
        sig12(t.cap)
    );
    Ok(Outcome::Clean)
}

// ------------------------------------------------------------------- solve

fn solve_row(delta: f64, theta1: f64, p: &PremiumParams, r: &SolveReport) -> Result<String, CliError> {
    let (d1, d_i, d2, branch) = contract_fields(p, r.a_star, &r.contract)?;
    Ok(format!(
        "{},{},{},{},{},{},{},{}",
        sig12(delta),
        sig12(theta1),
        sig12(r.a_star),
        opt12(d1),
        opt12(d_i),
        opt12(d2),
        sig12(r.value),
        branch.unwrap_or("")
    ))
}

fn solve(ctx: &Ctx) -> Result<Outcome, CliError> {
    let deltas = ctx.delta.list("solve")?;
    let spec = &ctx.scenario.premium;
    let solved: Result<Vec<(f64, f64, PremiumParams, SolveReport)>, CliError> =
        ctx.pool.install(|| {
            deltas
                .par_iter()
                .map(|&d| {
                    let (theta1, p) = params_at(spec, d)?;
                    let r = solve_insurer(&ctx.model, &p, &ctx.insurer, ctx.outer_grid)
                        .map_err(|e| classify(&format!("solve at delta {d}"), e))?;
                    Ok((d, theta1, p, r))
                })
                .collect()
        });
    let solved = solved?;

    let mut any_warning = false;
    let mut summary_rows = Vec::with_capacity(solved.len());
    let mut summary_json = Vec::with_capacity(solved.len());
    for (k, (delta, theta1, p, r)) in solved.iter().enumerate() {
        any_warning |= !r.warnings.is_empty();
        let cfg = echo(
            ctx,
            "solve",
            &[("delta", json!(delta)), ("theta1_resolved", json!(theta1))],
        );
        let (d1, d_i, d2, branch) = contract_fields(p, r.a_star, &r.contract)?;
        let mut doc = Map::new();
        doc.insert("config".into(), cfg.clone());
        doc.insert("a_star".into(), json!(r.a_star));
        doc.insert("value".into(), json!(r.value));
        doc.insert("d1".into(), json!(d1));
        doc.insert("d_i".into(), json!(d_i));
        doc.insert("d2".into(), json!(d2));
        doc.insert("branch".into(), json!(branch));
        doc.insert("contract".into(), contract_json(&r.contract));
        doc.insert("warnings".into(), json!(r.warnings));
        let trace_lines: Vec<String> = r
            .trace
            .iter()
            .map(|row| {
                format!(
                    "{},{},{},{},{}",
                    sig12(row.a),
                    opt12(row.d1),
                    opt12(row.d2),
                    sig12(row.value),
                    row.branch.map(|b| b.as_str()).unwrap_or("")
                )
            })
            .collect();
        match ctx.format {
            OutFormat::Csv => {
                doc.insert("trace_rows".into(), json!(r.trace.len()));
                let comments: Vec<String> =
                    r.warnings.iter().map(|w| format!("warning: {w}")).collect();
                let text = csv_file(
                    "solve trace",
                    &cfg.to_string(),
                    &comments,
                    "a,d1,d2,value,branch",
                    &trace_lines,
                );
                write_out(ctx, &format!("solve_{k:03}_trace.csv"), &text)?;
            }
            OutFormat::Json => {
                let rows: Vec<Value> = r
                    .trace
                    .iter()
                    .map(|row| {
                        json!({
                            "a": row.a, "d1": row.d1, "d2": row.d2,
                            "value": row.value,
                            "branch": row.branch.map(|b| b.as_str()),
                        })
                    })
                    .collect();
                doc.insert("trace".into(), Value::Array(rows));
            }
        }
        write_json(ctx, &format!("solve_{k:03}.json"), &Value::Object(doc))?;
        summary_rows.push(solve_row(*delta, *theta1, p, r)?);
        summary_json.push(json!({
            "delta": delta, "theta1": theta1, "a": r.a_star,
            "d1": d1, "d_i": d_i, "d2": d2,
            "value": r.value, "branch": branch,
        }));
        println!(
            "solve: delta {} -> value {}, branch {} (solve_{k:03}.json)",
            sig12(*delta),
            sig12(r.value),
            branch.unwrap_or("none")
        );
    }

    let grid = match &ctx.delta {
        DeltaChoice::Grid(g) => Some(grid_echo(g, deltas.len())),
        _ => None,
    };
    let mut extras = vec![("runs", json!(deltas.len()))];
    if let Some(g) = grid {
        extras.push(("delta_grid", g));
    } else {
        extras.push(("delta", json!(deltas[0])));
    }
    let cfg = echo(ctx, "solve", &extras);
    match ctx.format {
        OutFormat::Csv => {
            let text = csv_file(
                "solve summary",
                &cfg.to_string(),
                &[],
                "delta,theta1,a,d1,d_i,d2,value,branch",
                &summary_rows,
            );
            write_out(ctx, "solve_summary.csv", &text)?;
        }
        OutFormat::Json => {
            write_json(
                ctx,
                "solve_summary.json",
                &json!({"config": cfg, "rows": summary_json}),
            )?;
        }
    }
    Ok(if any_warning {
        Outcome::Warnings
    } else {
        Outcome::Clean
    })
}

// --------------------------------------------------------- bowley & sweep

const SWEEP_HEADER: &str = "delta,theta1,d1,d_i,d2,a,insurer_value,reinsurer_value,branch";

fn sweep_row_line(row: &repremia_core::bowley::BowleyRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        sig12(row.delta),
        sig12(row.theta1),
        opt12(row.d1),
        opt12(row.d_i),
        opt12(row.d2),
        sig12(row.a),
        sig12(row.insurer_value),
        sig12(row.reinsurer_value),
        row.branch.map(|b| b.as_str()).unwrap_or("")
    )
}

fn sweep_row_json(row: &repremia_core::bowley::BowleyRow) -> Value {
    json!({
        "delta": row.delta, "theta1": row.theta1,
        "d1": row.d1, "d_i": row.d_i, "d2": row.d2, "a": row.a,
        "insurer_value": row.insurer_value,
        "reinsurer_value": row.reinsurer_value,
        "branch": row.branch.map(|b| b.as_str()),
    })
}

/// Evaluate the follower's response on every grid point, in parallel; points
/// come back in grid order regardless of completion order.
fn sweep_points(ctx: &Ctx, cfg: &BowleyConfig, deltas: &[f64]) -> Vec<SweepPoint> {
    ctx.pool.install(|| {
        deltas
            .par_iter()
            .map(|&d| sweep_point(cfg, d))
            .collect()
    })
}

fn sweep_table(
    ctx: &Ctx,
    command: &str,
    points: &[SweepPoint],
    grid: &GridSpec,
    stem: &str,
    extra_cfg: &[(&str, Value)],
) -> Result<Value, CliError> {
    let mut extras = vec![("delta_grid", grid_echo(grid, points.len()))];
    extras.extend_from_slice(extra_cfg);
    let cfg = echo(ctx, command, &extras);
    match ctx.format {
        OutFormat::Csv => {
            let comments: Vec<String> = points
                .iter()
                .filter_map(|p| p.warning.as_ref())
                .map(|w| format!("warning: {w}"))
                .collect();
            let rows: Vec<String> = points.iter().map(|p| sweep_row_line(&p.row)).collect();
            let text = csv_file(
                &format!("{command} rows"),
                &cfg.to_string(),
                &comments,
                SWEEP_HEADER,
                &rows,
            );
            write_out(ctx, &format!("{stem}.csv"), &text)?;
        }
        OutFormat::Json => {
            let rows: Vec<Value> = points.iter().map(|p| sweep_row_json(&p.row)).collect();
            let warnings: Vec<&String> =
                points.iter().filter_map(|p| p.warning.as_ref()).collect();
            write_json(
                ctx,
                &format!("{stem}.json"),
                &json!({"config": cfg, "warnings": warnings, "rows": rows}),
            )?;
        }
    }
    Ok(cfg)
}

fn sweep(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = bowley_cfg(ctx, "sweep")?;
    let (grid, deltas) = ctx.delta.sweep_grid()?;
    let points = sweep_points(ctx, &cfg, &deltas);
    sweep_table(ctx, "sweep", &points, &grid, "sweep_rows", &[])?;
    let warned = points.iter().any(|p| p.warning.is_some());
    println!(
        "sweep: {} rows{}",
        points.len(),
        if warned { " (with warnings)" } else { "" }
    );
    Ok(if warned {
        Outcome::Warnings
    } else {
        Outcome::Clean
    })
}

fn bowley(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = bowley_cfg(ctx, "bowley")?;
    let (grid, deltas) = ctx.delta.sweep_grid()?;
    let points = sweep_points(ctx, &cfg, &deltas);
    let report = collect_report(&cfg, points.clone())
        .map_err(|e| classify("bowley optimum selection", e))?;
    let cfg_echo = sweep_table(
        ctx,
        "bowley",
        &points,
        &grid,
        "bowley_rows",
        &[("eps_val", json!(cfg.eps_val))],
    )?;
    let summary = json!({
        "config": cfg_echo,
        "delta_star": report.delta_star,
        "optimal_set": {"min": report.optimal_set.0, "max": report.optimal_set.1},
        "insurer_value": report.insurer_value,
        "reinsurer_value": report.reinsurer_value,
        "contract": contract_json(&report.contract),
        "warnings": report.warnings,
        "rows": report.rows.len(),
    });
    write_json(ctx, "bowley_summary.json", &summary)?;
    println!(
        "bowley: delta* = {} (optimal set [{}, {}]), leader value {}",
        sig12(report.delta_star),
        sig12(report.optimal_set.0),
        sig12(report.optimal_set.1),
        sig12(report.reinsurer_value)
    );
    Ok(if report.warnings.is_empty() {
        Outcome::Clean
    } else {
        Outcome::Warnings
    })
}

// -------------------------------------------------------------- beta-curve

fn beta_curve(ctx: &Ctx) -> Result<Outcome, CliError> {
    let cfg = bowley_cfg(ctx, "beta-curve")?;
    let betas = match &ctx.scenario.betas {
        Some(b) => b.values()?,
        None => GridSpec {
            start: 0.1,
            end: 1.0,
            step: 0.1,
        }
        .values("default betas")?,
    };
    let (grid, deltas) = ctx.delta.sweep_grid()?;
    let points = sweep_points(ctx, &cfg, &deltas);
    let rows = beta_curve_from_points(&cfg, &points, &betas)
        .map_err(|e| classify("beta curve", e))?;
    let cfg_echo = echo(
        ctx,
        "beta-curve",
        &[
            ("delta_grid", grid_echo(&grid, deltas.len())),
            ("betas", json!(betas)),
            ("eps_val", json!(cfg.eps_val)),
        ],
    );
    match ctx.format {
        OutFormat::Csv => {
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{}",
                        sig12(r.beta),
                        sig12(r.delta_min),
                        sig12(r.delta_max)
                    )
                })
                .collect();
            let text = csv_file(
                "beta-curve",
                &cfg_echo.to_string(),
                &[],
                "beta,delta_star,delta_max",
                &lines,
            );
            write_out(ctx, "beta_curve.csv", &text)?;
        }
        OutFormat::Json => {
            let jrows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({"beta": r.beta, "delta_star": r.delta_min, "delta_max": r.delta_max})
                })
                .collect();
            write_json(
                ctx,
                "beta_curve.json",
                &json!({"config": cfg_echo, "rows": jrows}),
            )?;
        }
    }
    println!("beta-curve: {} levels over {} deltas", rows.len(), deltas.len());
    Ok(Outcome::Clean)
}

// ------------------------------------------------------------------ verify

struct CaseRec {
    check: &'static str,
    name: String,
    margin: f64,
    tol: f64,
    note: Option<String>,
}

impl CaseRec {
    fn pass(&self) -> bool {
        self.margin <= self.tol
    }
}

fn rel_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / (1.0 + y.abs())
}

/// Self-check suite on the scenario's own model and scheme: the refined
/// solver against a brute-force grid search, mean-preserving convex-order
/// improvement chains, closed-form pricing against the generic
/// distortion-integral path, exact premium bounds, and a Monte-Carlo
/// cross-check when the tail is light enough for the error bar to mean
/// something.
fn verify(ctx: &Ctx) -> Result<Outcome, CliError> {
    let delta = ctx.delta.single("verify")?;
    let (theta1, p) = params_at(&ctx.scenario.premium, delta)?;
    let m = &ctx.model;
    let g = &ctx.insurer;
    let scale = m.mean();
    let vs = ctx.scenario.verify.clone().unwrap_or(crate::scenario::VerifySpec {
        cases: None,
        mc_n: None,
    });
    let cases = vs.cases.unwrap_or(60);
    let mc_n = vs.mc_n.unwrap_or(200_000);
    let mut recs: Vec<CaseRec> = Vec::new();
    let mut notes: Vec<String> = Vec::new();

    // refined solver vs an independent grid search over (a, d1)
    let solved = solve_insurer(m, &p, g, ctx.outer_grid)
        .map_err(|e| classify("verify: solve", e))?;
    {
        const A_CELLS: usize = 60;
        let a_grid: Vec<f64> = (1..=A_CELLS)
            .map(|k| scale * k as f64 / A_CELLS as f64)
            .collect();
        let rec = match brute_force_insurer(m, &p, g, &a_grid, 60) {
            Ok(brute) => CaseRec {
                check: "solver-vs-brute",
                name: "case-000".into(),
                margin: rel_gap(solved.value, brute.value),
                tol: 5e-3,
                note: Some(format!(
                    "solve {} vs brute {}",
                    sig12(solved.value),
                    sig12(brute.value)
                )),
            },
            Err(e) => CaseRec {
                check: "solver-vs-brute",
                name: "case-000".into(),
                margin: f64::INFINITY,
                tol: 5e-3,
                note: Some(format!("brute force failed: {e}")),
            },
        };
        recs.push(rec);
    }

    // improvement chain: layered reshapes preserve the mean, are certified
    // in convex order, and never raise the tail cost
    let chain_cost_g = Distortion::tvar(0.1).expect("0.1 is a valid level");
    for k in 0..cases {
        let mut rng = case_rng(ctx.seed, k as u64);
        let i = random_indemnity(&mut rng, 4.0 * scale);
        let name = format!("case-{k:03}");
        let a = match i.ceded_mean(m) {
            Ok(a) => a,
            Err(e) => {
                recs.push(CaseRec {
                    check: "improvement-chain",
                    name,
                    margin: f64::INFINITY,
                    tol: 1e-7,
                    note: Some(format!("ceded mean failed: {e}")),
                });
                continue;
            }
        };
        if a <= 1e-6 * scale {
            recs.push(CaseRec {
                check: "improvement-chain",
                name,
                margin: 0.0,
                tol: 1e-7,
                note: Some("degenerate draw, nothing ceded".into()),
            });
            continue;
        }
        let rec = (|| -> Result<CaseRec, CoreError> {
            let t = p.thresholds(a)?;
            let f3 = improve_to_three_layer(&i, m, &p)?;
            let h = improve_to_two_layer(&f3, m, &p)?;
            let mut margin = 0.0f64;
            for ind in [&f3, &h] {
                margin = margin.max((ind.ceded_mean(m)? - a).abs() / scale);
            }
            let total = |ind: &Indemnity| insurer_total_transform(&p, &t, ind);
            for (hi, lo) in [(&f3, &i), (&h, &f3)] {
                let cx = convex_order_check(&total(hi), &total(lo), m, 160)?;
                margin = margin.max(cx.mean_gap / scale).max(cx.max_violation / scale);
            }
            let cost = |ind: &Indemnity| rho_monotone_transform(&chain_cost_g, m, &total(ind));
            let (c_i, c_f3, c_h) = (cost(&i)?, cost(&f3)?, cost(&h)?);
            margin = margin
                .max((c_f3 - c_i) / scale)
                .max((c_h - c_f3) / scale);
            Ok(CaseRec {
                check: "improvement-chain",
                name: name.clone(),
                margin,
                tol: 1e-7,
                note: None,
            })
        })()
        .unwrap_or_else(|e| CaseRec {
            check: "improvement-chain",
            name: format!("case-{k:03}"),
            margin: f64::INFINITY,
            tol: 1e-7,
            note: Some(format!("chain failed: {e}")),
        });
        recs.push(rec);
    }

    // closed-form layered pricing vs the generic distortion integral
    for k in 0..cases {
        let mut rng = case_rng(ctx.seed ^ 0xC105ED, k as u64);
        let pk = random_premium(&mut rng);
        let a = uniform(&mut rng, 0.05, 0.8) * scale;
        let name = format!("case-{k:03}");
        let rec = (|| -> Result<CaseRec, CoreError> {
            let d_tilde = m.invert_stop_loss(a)?;
            let d1 = uniform(&mut rng, 0.0, 0.95 * d_tilde);
            let i = complete_floor_layer(m, &pk, a, d1)?;
            let (d1, d2) = match i.family() {
                Family::FloorLayer { d1, d2 } => (*d1, *d2),
                _ => (d1, None),
            };
            let t = pk.thresholds(a)?;
            let closed = rho_t_i1_closed(g, m, &pk, a, d1, d2);
            let generic = rho_monotone_transform(g, m, &insurer_total_transform(&pk, &t, &i));
            let (margin, note) = match (closed, generic) {
                (Ok(c), Ok(v)) => (rel_gap(c, v), None),
                (Err(CoreError::Divergent(_)), Err(CoreError::Divergent(_))) => {
                    (0.0, Some("both paths diverge".to_owned()))
                }
                (c, v) => (
                    f64::INFINITY,
                    Some(format!("paths disagree: closed {c:?}, generic {v:?}")),
                ),
            };
            Ok(CaseRec {
                check: "closed-vs-generic",
                name: name.clone(),
                margin,
                tol: 1e-8,
                note,
            })
        })()
        .unwrap_or_else(|e| CaseRec {
            check: "closed-vs-generic",
            name: format!("case-{k:03}"),
            margin: f64::INFINITY,
            tol: 1e-8,
            note: Some(format!("layout failed: {e}")),
        });
        recs.push(rec);
    }

    // realized premium: clamped to [floor, cap], monotone in the ceded loss,
    // and exactly 2-homogeneous -- all bitwise properties of the clamp chain
    for k in 0..cases {
        let mut rng = case_rng(ctx.seed ^ 0xB0, k as u64);
        let pk = random_premium(&mut rng);
        let a = uniform(&mut rng, 0.1, 1.0) * scale;
        let name = format!("case-{k:03}");
        let rec = (|| -> Result<CaseRec, CoreError> {
            let t = pk.thresholds(a)?;
            let t2 = pk.thresholds(2.0 * a)?;
            let y_hi = 1.5 * t.y_cap + scale;
            let mut margin = 0.0f64;
            let mut prev = f64::NEG_INFINITY;
            for j in 0..=40 {
                let y = y_hi * j as f64 / 40.0;
                let pi = realized_premium(&pk, &t, y);
                margin = margin.max(t.floor - pi).max(pi - t.cap).max(prev - pi);
                margin = margin.max((realized_premium(&pk, &t2, 2.0 * y) - 2.0 * pi).abs());
                prev = pi;
            }
            Ok(CaseRec {
                check: "premium-bounds",
                name: name.clone(),
                margin: margin.max(0.0),
                tol: 0.0,
                note: None,
            })
        })()
        .unwrap_or_else(|e| CaseRec {
            check: "premium-bounds",
            name: format!("case-{k:03}"),
            margin: f64::INFINITY,
            tol: 0.0,
            note: Some(format!("scheme failed: {e}")),
        });
        recs.push(rec);
    }

    // Monte-Carlo estimate of the solved position against its exact value
    if mc_n >= 1000 && ctx.scenario.loss.mc_friendly() {
        let t = p
            .thresholds(solved.a_star)
            .map_err(|e| classify("verify: thresholds", e))?;
        let position = insurer_total_transform(&p, &t, &solved.contract);
        let rec = match mc_rho(g, &position, m, mc_n, ctx.seed ^ 0x4d43) {
            Ok(est) => {
                // the solved tail position can be exactly constant (stop-loss
                // cession plus a capped premium), which collapses the batch
                // standard error to accumulation noise; floor the denominator
                // at a rounding-level tolerance so an ulp-sized quadrature
                // gap is not divided by ~1e-19
                let eps_abs = 1e-12 * (1.0 + solved.value.abs());
                let denom = est.std_error.max(0.25 * eps_abs);
                let margin = (est.estimate - solved.value).abs() / denom;
                let note = Some(format!(
                    "estimate {} +- {} vs {}",
                    sig12(est.estimate),
                    sig12(est.std_error),
                    sig12(solved.value)
                ));
                CaseRec {
                    check: "mc-agreement",
                    name: "case-000".into(),
                    margin,
                    tol: 4.0,
                    note,
                }
            }
            Err(e) => CaseRec {
                check: "mc-agreement",
                name: "case-000".into(),
                margin: f64::INFINITY,
                tol: 4.0,
                note: Some(format!("sampling failed: {e}")),
            },
        };
        recs.push(rec);
    } else if mc_n == 0 {
        notes.push("mc-agreement skipped: disabled (mc_n = 0)".into());
    } else if !ctx.scenario.loss.mc_friendly() {
        notes.push(
            "mc-agreement skipped: tail too heavy for a trustworthy error bar".into(),
        );
    } else {
        notes.push("mc-agreement skipped: mc_n below the 1000-sample floor".into());
    }

    // emit the per-case margins, the JUnit summary, and the stdout digest
    let cfg_echo = echo(
        ctx,
        "verify",
        &[
            ("delta", json!(delta)),
            ("theta1_resolved", json!(theta1)),
            ("cases", json!(cases)),
            ("mc_n", json!(mc_n)),
        ],
    );
    match ctx.format {
        OutFormat::Csv => {
            let lines: Vec<String> = recs
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{}",
                        r.check,
                        r.name,
                        sig12(r.margin),
                        sig12(r.tol),
                        r.pass()
                    )
                })
                .collect();
            let text = csv_file(
                "verify margins",
                &cfg_echo.to_string(),
                &notes,
                "check,case,margin,tol,pass",
                &lines,
            );
            write_out(ctx, "verify_cases.csv", &text)?;
        }
        OutFormat::Json => {
            let rows: Vec<Value> = recs
                .iter()
                .map(|r| {
                    json!({
                        "check": r.check, "case": r.name, "margin": r.margin,
                        "tol": r.tol, "pass": r.pass(), "note": r.note,
                    })
                })
                .collect();
            write_json(
                ctx,
                "verify_cases.json",
                &json!({"config": cfg_echo, "notes": notes, "rows": rows}),
            )?;
        }
    }
    let junit: Vec<JunitCase> = recs
        .iter()
        .map(|r| JunitCase {
            check: r.check.to_owned(),
            name: r.name.clone(),
            failure: if r.pass() {
                None
            } else {
                Some(format!(
                    "margin {} exceeds tol {}{}",
                    sig12(r.margin),
                    sig12(r.tol),
                    r.note
                        .as_ref()
                        .map(|n| format!(" ({n})"))
                        .unwrap_or_default()
                ))
            },
        })
        .collect();
    write_out(ctx, "verify_junit.xml", &junit_file(&junit))?;

    for check in [
        "solver-vs-brute",
        "improvement-chain",
        "closed-vs-generic",
        "premium-bounds",
        "mc-agreement",
    ] {
        let of_check: Vec<&CaseRec> = recs.iter().filter(|r| r.check == check).collect();
        if of_check.is_empty() {
            continue;
        }
        let passed = of_check.iter().filter(|r| r.pass()).count();
        let worst = of_check
            .iter()
            .map(|r| r.margin)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "verify {check}: {passed}/{} pass (worst margin {:.3e}, tol {:.1e})",
            of_check.len(),
            worst,
            of_check[0].tol
        );
    }
    for n in &notes {
        println!("verify note: {n}");
    }
    let failures = recs.iter().filter(|r| !r.pass()).count();
    if failures > 0 {
        println!("verify: FAIL ({failures} of {} cases)", recs.len());
        return Err(CliError::Numerical(format!(
            "verification failed: {failures} of {} cases (see verify_junit.xml)",
            recs.len()
        )));
    }
    println!("verify: PASS ({} cases)", recs.len());
    Ok(Outcome::Clean)
}
