//! Executes one configured experiment and writes its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use burgers_core::fields::{write_snapshot, Trajectory, VectorField};
use burgers_core::heat::holder_scaling_probe;
use burgers_core::norms::{
    gradient_sup, interpolation_gap, sup_norm, HolderOptions, HolderSamples, InterpolationConstant,
    InterpolationVariant, KCalculus, KConstants, KOptions,
};
use burgers_core::oracle::{cole_hopf, cole_hopf_exact_1d, direct_solve};
use burgers_core::scheme::{
    compute_t_init, physical_bounds, rescale_viscosity, run_picard, transport_step, PicardOutput, SchemeConfig,
    TInitOptions,
};
use burgers_core::transport::{Drift, TransportProblem, ZerothOrder};
use burgers_core::verify::{
    check_gronwall, check_schauder_instance, check_short_time, check_uniform, BoundReport, Bundle, ParabolicBall,
    SchauderBound, SchauderOptions, SpaceTimeField, TrajectoryField,
};
use burgers_core::{Error, Forcing};

use crate::config::{Check, ConfigError, DataSpec, ForcingSpec, RunConfig};
use crate::output::{json_bytes, records_csv, write_atomic};

pub const ORACLE_TOLERANCE: f64 = 1e-5;
pub const SCALING_TOLERANCE: f64 = 0.05;
/// Parabolic ball ratio used by the Schauder check.
const SCHAUDER_M: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Numerical(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            _ if e.is_divergence() => RunError::Divergence(e.to_string()),
            Error::InvalidInput(_) | Error::InvalidGrid(_) | Error::Resolution(_) => {
                RunError::Config(ConfigError::Invalid(e.to_string()))
            }
            Error::Io(io) => RunError::Io(io),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub verdicts: BTreeMap<&'static str, bool>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| *v)
    }
}

struct CheckOutcome {
    check: Check,
    passed: bool,
    files: Vec<(String, Vec<u8>)>,
}

/// Everything the checks read, in unit-viscosity variables.
struct Context<'a> {
    cfg: &'a RunConfig,
    scheme: SchemeConfig,
    u0: VectorField,
    g: Forcing,
    picard: Option<PicardOutput>,
    ks: Vec<KConstants>,
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = std::env::var_os("BURGERS_OUT_DIR").filter(|d| !d.is_empty()) {
        return PathBuf::from(dir);
    }
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("burgers-out").join(&cfg.experiment))
}

pub fn run(cfg: &RunConfig, out_dir: &Path, concurrent: bool) -> Result<RunSummary, RunError> {
    let physical = cfg.scheme_config()?;
    let nu = physical.nu;
    let (u0, g) = rescale_viscosity(&cfg.datum()?, &cfg.forcing()?, nu)?;
    let mut scheme = physical.clone();
    scheme.nu = 1.0;
    scheme.horizon = physical.horizon * nu;
    scheme.dt = physical.dt * nu;
    scheme.validate()?;

    let checks = cfg.checks();
    let need_picard = checks.is_empty() || checks.iter().any(|c| c.needs_picard());
    std::fs::create_dir_all(out_dir)?;

    let mut ctx = Context {
        cfg,
        scheme,
        u0,
        g,
        picard: None,
        ks: Vec::new(),
    };
    let mut summary = BTreeMap::<&str, Value>::new();
    summary.insert("experiment", json!(cfg.experiment));
    summary.insert("nu", json!(nu));
    if need_picard {
        let out = run_picard(&ctx.scheme, &ctx.u0, &ctx.g)?;
        let calc = KCalculus::new(&ctx.u0, &ctx.g, ctx.scheme.c, ctx.scheme.alpha, KOptions::default())?;
        ctx.ks = calc.series(ctx.scheme.dt, ctx.scheme.steps()?)?;
        let t_init = compute_t_init(&ctx.u0, &ctx.g, ctx.scheme.c, ctx.scheme.alpha, &TInitOptions::default())?;
        let k_end = *ctx.ks.last().expect("non-empty series");
        write_atomic(&out_dir.join("records.csv"), records_csv(&out.records).as_bytes())?;
        write_atomic(&out_dir.join("k_constants.json"), &json_bytes(&ctx.ks))?;
        summary.insert("t_init", json!(t_init));
        summary.insert("converged", json!(out.converged));
        summary.insert("iterations", json!(out.records.len()));
        summary.insert("residual", json!(out.residual));
        summary.insert("KConstants", json!(k_end));
        if nu != 1.0 {
            summary.insert("physical_bounds", json!(physical_bounds(&k_end, nu)?));
        }
        if cfg.snapshots {
            write_snapshot(&out_dir.join("final.bfld"), out.fixed_point.last())?;
        }
        ctx.picard = Some(out);
    }
    if cfg.snapshots {
        write_snapshot(&out_dir.join("datum.bfld"), &ctx.u0)?;
    }

    let outcomes: Vec<Result<CheckOutcome, RunError>> = if concurrent {
        std::thread::scope(|s| {
            let handles: Vec<_> = checks.iter().map(|c| s.spawn(|| run_check(&ctx, *c))).collect();
            handles.into_iter().map(|h| h.join().expect("check thread panicked")).collect()
        })
    } else {
        checks.iter().map(|c| run_check(&ctx, *c)).collect()
    };

    let mut verdicts = BTreeMap::new();
    for o in outcomes {
        let o = o?;
        for (name, bytes) in &o.files {
            write_atomic(&out_dir.join(name), bytes)?;
        }
        verdicts.insert(o.check.name(), o.passed);
    }
    summary.insert("checks", json!(verdicts));
    write_atomic(&out_dir.join("summary.json"), &json_bytes(&summary))?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        verdicts,
    })
}

fn picard<'a>(ctx: &'a Context) -> &'a PicardOutput {
    ctx.picard.as_ref().expect("Picard output is computed for this check")
}

fn bound_files(files: &mut Vec<(String, Vec<u8>)>, report: &BoundReport) {
    files.push((format!("{}.csv", report.name), report.slack_csv().into_bytes()));
}

/// Numerical errors other than divergence fail the check; its report carries the message.
fn failed(check: Check, e: Error) -> Result<CheckOutcome, RunError> {
    if e.is_divergence() {
        return Err(e.into());
    }
    Ok(CheckOutcome {
        check,
        passed: false,
        files: vec![(
            format!("{}.json", check.name()),
            json_bytes(&json!({ "check": check.name(), "error": e.to_string() })),
        )],
    })
}

fn run_check(ctx: &Context, check: Check) -> Result<CheckOutcome, RunError> {
    let result = match check {
        Check::Uniform => uniform(ctx),
        Check::ShortTime => short_time(ctx),
        Check::Gronwall => gronwall(ctx),
        Check::Schauder => schauder(ctx),
        Check::Interpolation => interpolation(ctx),
        Check::HeatScaling => heat_scaling(ctx),
        Check::OracleCompare => oracle_compare(ctx),
    };
    match result {
        Ok((passed, files)) => Ok(CheckOutcome { check, passed, files }),
        Err(e) => failed(check, e),
    }
}

type Files = (bool, Vec<(String, Vec<u8>)>);

fn uniform(ctx: &Context) -> burgers_core::Result<Files> {
    let rep = check_uniform(&picard(ctx).records, &ctx.ks, ctx.scheme.c)?;
    let mut files = vec![("uniform.json".to_string(), json_bytes(&rep))];
    for r in rep.reports() {
        bound_files(&mut files, r);
    }
    Ok((rep.passed(), files))
}

fn short_time(ctx: &Context) -> burgers_core::Result<Files> {
    let k_end = ctx.ks.last().expect("non-empty series");
    let rep = check_short_time(&picard(ctx).records, k_end, ctx.scheme.c, ctx.scheme.beta)?;
    let mut files = vec![("short_time.json".to_string(), json_bytes(&rep))];
    for r in [&rep.sup, &rep.gradient, &rep.first_increment] {
        bound_files(&mut files, r);
    }
    Ok((rep.passed(), files))
}

/// Forced heat flow against the transport solve driven by the fixed point.
fn gronwall(ctx: &Context) -> burgers_core::Result<Files> {
    let p = TransportProblem {
        u0: ctx.u0.clone(),
        drift: Drift::Zero,
        zeroth: ZerothOrder::None,
        source: ctx.g.clone(),
        horizon: ctx.scheme.horizon,
        dt: ctx.scheme.dt,
    };
    let pbar = TransportProblem {
        drift: Drift::Frames(picard(ctx).fixed_point.clone()),
        ..p.clone()
    };
    let rep = check_gronwall(&p, &pbar)?;
    let mut files = vec![("gronwall.json".to_string(), json_bytes(&rep))];
    bound_files(&mut files, &rep);
    Ok((rep.passed(), files))
}

fn forcing_frames(g: &Forcing, like: &Trajectory) -> Option<Trajectory> {
    let profile = g.profile()?;
    let frames = (0..like.len()).map(|k| profile.scaled(g.factor(like.time(k)))).collect();
    Some(Trajectory { frames, ..like.clone() })
}

fn schauder(ctx: &Context) -> burgers_core::Result<Files> {
    let out = picard(ctx);
    let u = &out.fixed_point;
    let grid = u.grid;
    let horizon = u.horizon();
    let field = Arc::new(TrajectoryField::new(u.clone())?);
    let minus_u = Trajectory {
        frames: u.frames.iter().map(|f| f.scaled(-1.0)).collect(),
        ..u.clone()
    };
    let f = forcing_frames(&ctx.g, u)
        .map(TrajectoryField::new)
        .transpose()?
        .map(|t| Arc::new(t) as Arc<dyn SpaceTimeField>);
    let bundle = Bundle {
        b: Some(Arc::new(TrajectoryField::new(minus_u)?)),
        f,
        ..Bundle::new(field)
    };
    // Largest ball Q^(j)(T, 0) that fits in time and within half a period.
    let j = horizon.log2().floor().min((2.0 * (grid.l / 2.0).log2()).floor()) as i32;
    let ball = ParabolicBall::new(horizon, vec![0.0; grid.d], j, SCHAUDER_M)?;
    let opts = SchauderOptions {
        residual_tol: (10.0 * out.residual).max(SchauderOptions::default().residual_tol),
        holder: HolderOptions {
            sampled_pairs: ctx.scheme.holder_pairs,
            seed: ctx.scheme.seed,
            ..HolderOptions::default()
        },
        ..SchauderOptions::default()
    };
    let reports = SchauderBound::ALL
        .iter()
        .map(|b| check_schauder_instance(&bundle, &ball, ctx.scheme.alpha, *b, &opts))
        .collect::<burgers_core::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.report.passed());
    let mut files = vec![("schauder.json".to_string(), json_bytes(&reports))];
    for r in &reports {
        bound_files(&mut files, &r.report);
    }
    Ok((passed, files))
}

#[derive(Serialize)]
struct InterpolationReport {
    alpha: f64,
    scale: f64,
    space_as_stated: f64,
    space_corrected: f64,
    spacetime: f64,
    tolerance: f64,
    verdict: &'static str,
}

/// Space variant on the datum, space-time variant on the forced heat flow.
fn interpolation(ctx: &Context) -> burgers_core::Result<Files> {
    let alpha = ctx.scheme.alpha;
    let opts = HolderOptions {
        sampled_pairs: ctx.scheme.holder_pairs,
        seed: ctx.scheme.seed,
        ..HolderOptions::default()
    };
    let space = |c| interpolation_gap(HolderSamples::Field(&ctx.u0), alpha, InterpolationVariant::Space, c, &opts);
    let space_as_stated = space(InterpolationConstant::AsStated)?;
    let space_corrected = space(InterpolationConstant::Corrected)?;
    let heat = transport_step(&ctx.u0, &ctx.g, None, &ctx.scheme)?;
    let stride = ((heat.len() - 1) / (ctx.scheme.holder_frames - 1)).max(1);
    let coarse = Trajectory {
        dt: heat.dt * stride as f64,
        frames: heat.frames.iter().step_by(stride).cloned().collect(),
        ..heat.clone()
    };
    let spacetime = interpolation_gap(
        HolderSamples::Trajectory(&coarse),
        alpha,
        InterpolationVariant::Spacetime,
        InterpolationConstant::AsStated,
        &opts,
    )?;
    let scale = heat
        .frames
        .iter()
        .map(|f| sup_norm(f).max(gradient_sup(f)))
        .fold(0.0, f64::max);
    let tolerance = 1e-10 * scale;
    let passed = space_corrected >= -tolerance && spacetime >= -tolerance;
    let rep = InterpolationReport {
        alpha,
        scale,
        space_as_stated,
        space_corrected,
        spacetime,
        tolerance,
        verdict: if passed { "pass" } else { "fail" },
    };
    Ok((passed, vec![("interpolation.json".into(), json_bytes(&rep))]))
}

fn heat_scaling(ctx: &Context) -> burgers_core::Result<Files> {
    let (alpha, seed) = match ctx.cfg.data {
        DataSpec::Lacunary { alpha, seed } => (alpha, seed),
        _ => (ctx.scheme.alpha, ctx.scheme.seed),
    };
    let times: Vec<f64> = (0..=8).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
    let mut reports = Vec::new();
    for kappa in [1, 2] {
        reports.push(holder_scaling_probe(alpha, kappa, &times, ctx.scheme.grid, seed)?);
    }
    let passed = reports
        .iter()
        .all(|r| (r.slope - r.predicted_slope).abs() <= SCALING_TOLERANCE);
    let doc = json!({ "tolerance": SCALING_TOLERANCE, "probes": reports, "verdict": if passed { "pass" } else { "fail" } });
    Ok((passed, vec![("heat_scaling.json".into(), json_bytes(&doc))]))
}

fn oracle_compare(ctx: &Context) -> burgers_core::Result<Files> {
    let out = picard(ctx);
    let u = &out.fixed_point;
    let nu = ctx.cfg.scheme.nu;
    let potential_lambda = match &ctx.cfg.forcing {
        ForcingSpec::Zero => Some(-2.0),
        ForcingSpec::Gradient { lambda, .. } if *lambda == -2.0 => Some(-2.0),
        _ => None,
    };
    let (kind, reference) = match (&ctx.cfg.data, potential_lambda) {
        (DataSpec::ColeHopf { eps }, Some(_)) if nu == 1.0 && ctx.g.is_zero() => {
            let frames = (0..u.len()).map(|k| cole_hopf_exact_1d(u.grid, *eps, u.time(k))).collect();
            ("closed_form", Trajectory::new(u.grid, u.t0, u.dt, frames)?)
        }
        (DataSpec::ColeHopf { .. }, Some(lambda)) if nu == 1.0 => {
            let phi0 = ctx.cfg.initial_potential().ok().flatten().expect("cole_hopf data has a potential");
            let f = ctx.cfg.potential().ok().flatten().unwrap_or(Forcing::Zero);
            ("potential", cole_hopf(&phi0, &f, ctx.scheme.horizon, ctx.scheme.dt, lambda)?)
        }
        _ => ("direct", direct_solve(&ctx.u0, &ctx.g, &ctx.scheme)?),
    };
    let sup_difference = u
        .frames
        .iter()
        .zip(&reference.frames)
        .map(|(a, b)| sup_norm(&a.sub(b)))
        .fold(0.0, f64::max);
    let passed = sup_difference <= ORACLE_TOLERANCE;
    let doc = json!({
        "reference": kind,
        "sup_difference": sup_difference,
        "tolerance": ORACLE_TOLERANCE,
        "verdict": if passed { "pass" } else { "fail" },
    });
    Ok((passed, vec![("oracle_compare.json".into(), json_bytes(&doc))]))
}
