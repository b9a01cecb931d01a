//! Successive approximations for forced viscous Burgers, the initial horizon and viscosity scaling.

use serde::Serialize;

use crate::fields::{hessian, GridSpec, Trajectory, VectorField};
use crate::forcing::Forcing;
use crate::heat::step_count;
use crate::norms::{
    assemble_bracket, gradient_sup, hessian_sup, holder_seminorm, sup_norm, HolderMode, HolderOptions,
    HolderSamples, KCalculus, KConstants, KOptions,
};
use crate::oracle::residual;
use crate::transport::{solve_transport, Drift, TransportProblem, ZerothOrder};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub nu: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(skip)]
    pub grid: GridSpec,
    pub m_max: usize,
    pub tol_fp: f64,
    pub seed: u64,
    /// Frames (uniformly subsampled, endpoints included) entering the parabolic Hölder diagnostics.
    pub holder_frames: usize,
    pub holder_pairs: usize,
    /// Keep every iterate in the output.
    pub keep_iterates: bool,
}

impl SchemeConfig {
    pub fn new(grid: GridSpec, horizon: f64, dt: f64) -> Self {
        Self {
            nu: 1.0,
            c: 1.0,
            alpha: 0.5,
            beta: 0.25,
            horizon,
            dt,
            grid,
            m_max: 40,
            tol_fp: 1e-10,
            seed: 0,
            holder_frames: 17,
            holder_pairs: 50_000,
            keep_iterates: false,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.horizon, self.dt)
    }

    pub fn validate(&self) -> Result<usize> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("ν = {} must be positive", self.nu));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return bad(format!("c = {} must be >= 1", self.c));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("α = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return bad(format!("β = {} must lie in (0, 1/2)", self.beta));
        }
        if self.m_max < 1 {
            return bad("m_max must be >= 1".into());
        }
        if !(self.tol_fp > 0.0) {
            return bad(format!("tol_fp = {} must be positive", self.tol_fp));
        }
        if self.holder_frames < 2 {
            return bad("holder_frames must be >= 2".into());
        }
        let steps = self.steps()?;
        if steps < 2 {
            return bad("need at least two time steps".into());
        }
        Ok(steps)
    }

    fn holder_options(&self) -> HolderOptions {
        HolderOptions {
            sampled_pairs: self.holder_pairs,
            seed: self.seed,
            ..HolderOptions::default()
        }
    }
}

/// Diagnostics of one iterate `u^(m)` and its increment `v^(m) = u^(m) − u^(m−1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub m: usize,
    pub times: Vec<f64>,
    pub sup_u: Vec<f64>,
    pub sup_grad_u: Vec<f64>,
    pub sup_hess_u: Vec<f64>,
    pub sup_dt_u: Vec<f64>,
    pub sup_v: Vec<f64>,
    pub sup_grad_v: Vec<f64>,
    pub holder_hess_u: f64,
    pub holder_dt_u: f64,
}

impl IterationRecord {
    pub fn max_v(&self) -> f64 {
        self.sup_v.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_grad_v(&self) -> f64 {
        self.sup_grad_v.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutput {
    pub records: Vec<IterationRecord>,
    pub fixed_point: Trajectory,
    pub converged: bool,
    /// Largest per-frame Burgers residual of the last iterate.
    pub residual: f64,
    /// Every iterate, when requested.
    pub iterates: Vec<Trajectory>,
}

fn subsample(traj: &Trajectory, count: usize) -> Trajectory {
    let last = traj.len() - 1;
    let count = count.min(traj.len());
    // Largest stride that divides the step count keeps the frames uniform.
    let mut stride = (last / (count - 1).max(1)).max(1);
    while last % stride != 0 {
        stride -= 1;
    }
    let frames = traj.frames.iter().step_by(stride).cloned().collect();
    Trajectory {
        grid: traj.grid,
        t0: traj.t0,
        dt: traj.dt * stride as f64,
        frames,
    }
}

fn record(m: usize, u: &Trajectory, prev: Option<&Trajectory>, cfg: &SchemeConfig) -> Result<IterationRecord> {
    let du = u.time_derivative()?;
    let v: Vec<VectorField> = match prev {
        Some(p) => u.frames.iter().zip(p.frames.iter()).map(|(a, b)| a.sub(b)).collect(),
        None => u.frames.clone(),
    };
    let opts = cfg.holder_options();
    let coarse = subsample(u, cfg.holder_frames);
    let hess = Trajectory {
        frames: coarse.frames.iter().map(hessian).collect(),
        ..coarse.clone()
    };
    let dt_coarse = subsample(&du, cfg.holder_frames);
    let alpha = cfg.alpha;
    let holder_hess_u = holder_seminorm(HolderSamples::Trajectory(&hess), alpha, HolderMode::Parabolic, &opts)?.value;
    let holder_dt_u = holder_seminorm(HolderSamples::Trajectory(&dt_coarse), alpha, HolderMode::Parabolic, &opts)?.value;
    Ok(IterationRecord {
        m,
        times: u.times(),
        sup_u: u.frames.iter().map(sup_norm).collect(),
        sup_grad_u: u.frames.iter().map(gradient_sup).collect(),
        sup_hess_u: u.frames.iter().map(hessian_sup).collect(),
        sup_dt_u: du.frames.iter().map(sup_norm).collect(),
        sup_v: v.iter().map(sup_norm).collect(),
        sup_grad_v: v.iter().map(gradient_sup).collect(),
        holder_hess_u,
        holder_dt_u,
    })
}

/// One linear transport solve with drift `b` (or the forced heat flow when `b` is absent).
pub fn transport_step(u0: &VectorField, g: &Forcing, drift: Option<&Trajectory>, cfg: &SchemeConfig) -> Result<Trajectory> {
    let p = TransportProblem {
        u0: u0.clone(),
        drift: drift.map_or(Drift::Zero, |b| Drift::Frames(b.clone())),
        zeroth: ZerothOrder::None,
        source: g.clone(),
        horizon: cfg.horizon,
        dt: cfg.dt,
    };
    solve_transport(&p)
}

/// Iterates `(∂_t − Δ + u^(m−1)·∇)u^(m) = g`, `u^(m)(0) = u0`, from `u^(−1) = 0`.
pub fn run_picard(cfg: &SchemeConfig, u0: &VectorField, g: &Forcing) -> Result<PicardOutput> {
    cfg.validate()?;
    if u0.grid != cfg.grid || u0.comps() != cfg.grid.d {
        return Err(Error::InvalidInput("datum must be a d-component field on the configured grid".into()));
    }
    if let Some(p) = g.profile() {
        if !p.same_shape(u0) {
            return Err(Error::InvalidInput("forcing and datum differ in shape".into()));
        }
    }
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let mut prev: Option<Trajectory> = None;
    let mut converged = false;
    for m in 0..=cfg.m_max {
        let wrap = |e: Error| Error::Iterate {
            m,
            source: Box::new(e),
        };
        let u = transport_step(u0, g, prev.as_ref(), cfg).map_err(wrap)?;
        let rec = record(m, &u, prev.as_ref(), cfg).map_err(wrap)?;
        let done = m >= 1 && rec.max_v() < cfg.tol_fp;
        records.push(rec);
        if cfg.keep_iterates {
            iterates.push(u.clone());
        }
        prev = Some(u);
        if done {
            converged = true;
            break;
        }
    }
    let fixed_point = prev.expect("at least one iterate");
    let residual = residual(&fixed_point, g)?.max();
    Ok(PicardOutput {
        records,
        fixed_point,
        converged,
        residual,
        iterates,
    })
}

/// Outcome of the search for `t_init = inf{t > 0 : t·c·K(t) = 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TInit {
    Finite(f64),
    /// `t·c·K(t)` never reaches one.
    Infinite,
    /// No root up to the probed horizon.
    BeyondHorizon(f64),
}

impl TInit {
    pub fn finite(&self) -> Option<f64> {
        match self {
            TInit::Finite(t) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TInitOptions {
    /// Largest time probed when `K` varies.
    pub horizon: f64,
    /// Quadrature panels for every evaluation of `K(t)`.
    pub quad_steps: usize,
    pub k: KOptions,
}

impl Default for TInitOptions {
    fn default() -> Self {
        Self {
            horizon: 1e3,
            quad_steps: 64,
            k: KOptions::default(),
        }
    }
}

/// Root of an increasing `f` with `f(lo) < 1 ≤ f(hi)`; returns the best point found.
pub fn bisect_unit_crossing(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut best = (hi, (f(hi)? - 1.0).abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        let gap = (fm - 1.0).abs();
        if gap < best.1 {
            best = (mid, gap);
        }
        if gap <= 1e-13 {
            break;
        }
        if fm < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.0)
}

pub fn compute_t_init(u0: &VectorField, g: &Forcing, c: f64, alpha: f64, opts: &TInitOptions) -> Result<TInit> {
    let calc = KCalculus::new(u0, g, c, alpha, opts.k)?;
    let k_at = |t: f64| calc.at_with_steps(t, opts.quad_steps).map(|k| k.kbar());
    let kbar0 = k_at(0.0)?;
    if g.is_zero() {
        return Ok(if kbar0 > 0.0 {
            TInit::Finite(1.0 / kbar0)
        } else {
            TInit::Infinite
        });
    }
    let f = |t: f64| k_at(t).map(|k| t * k);
    // K is nondecreasing, so F(1/K̄(0)) ≥ 1 brackets the root.
    let hi = if kbar0 > 0.0 && 1.0 / kbar0 <= opts.horizon {
        1.0 / kbar0
    } else {
        let mut t = opts.horizon.min(if kbar0 > 0.0 { 1.0 / kbar0 } else { 1.0 });
        t = t.min(opts.horizon) / 1024.0;
        loop {
            if f(t)? >= 1.0 {
                break t;
            }
            if t >= opts.horizon {
                return Ok(TInit::BeyondHorizon(opts.horizon));
            }
            t = (2.0 * t).min(opts.horizon);
        }
    };
    Ok(TInit::Finite(bisect_unit_crossing(f, 0.0, hi)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MajorantReport {
    pub m0: u64,
    pub gamma: f64,
    pub ckt: f64,
    pub bound: f64,
    pub empirical: f64,
    pub terms: u64,
}

/// `Σ_{m > m0} (cK·t/m)^{γm}` against `e^γ/(e^γ − 1)`.
pub fn series_majorant(m0: u64, gamma: f64, ckt: f64) -> Result<MajorantReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Precondition(format!("γ = {gamma} must be positive")));
    }
    if !(ckt >= 0.0 && ckt.is_finite()) {
        return Err(Error::Precondition(format!("cK·t = {ckt} must be >= 0")));
    }
    if (m0 as f64) < ckt.floor() {
        return Err(Error::Precondition(format!("m0 = {m0} is below ⌊cK·t⌋ = {}", ckt.floor())));
    }
    let bound = gamma.exp() / gamma.exp_m1();
    let mut sum = 0.0;
    let mut m = m0 + 1;
    let mut terms = 0;
    loop {
        let term = if ckt == 0.0 {
            0.0
        } else {
            (gamma * m as f64 * (ckt / m as f64).ln()).exp()
        };
        sum += term;
        terms += 1;
        // Terms decay at least geometrically past the first one.
        if term <= f64::EPSILON * 1e-3 * sum.max(f64::MIN_POSITIVE) || term == 0.0 || terms > 10_000_000 {
            break;
        }
        m += 1;
    }
    Ok(MajorantReport {
        m0,
        gamma,
        ckt,
        bound,
        empirical: sum,
        terms,
    })
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("ν = {nu} must be positive")))
    }
}

/// Data of the unit-viscosity problem: `ũ0 = u0/ν`, `g̃(t̃) = g(t̃/ν)/ν²`.
pub fn rescale_viscosity(u0: &VectorField, g: &Forcing, nu: f64) -> Result<(VectorField, Forcing)> {
    check_nu(nu)?;
    if nu == 1.0 {
        return Ok((u0.clone(), g.clone()));
    }
    Ok((u0.scaled(1.0 / nu), g.rescaled(1.0 / (nu * nu), 1.0 / nu)?))
}

/// Physical trajectory `u(t) = ν·ũ(νt)` from a unit-viscosity one.
pub fn unrescale(traj: &Trajectory, nu: f64) -> Result<Trajectory> {
    check_nu(nu)?;
    if nu == 1.0 {
        return Ok(traj.clone());
    }
    Trajectory::new(
        traj.grid,
        traj.t0 / nu,
        traj.dt / nu,
        traj.frames.iter().map(|f| f.scaled(nu)).collect(),
    )
}

/// Inverse of [`unrescale`]: `ũ(t̃) = u(t̃/ν)/ν`.
pub fn rescale_trajectory(traj: &Trajectory, nu: f64) -> Result<Trajectory> {
    check_nu(nu)?;
    if nu == 1.0 {
        return Ok(traj.clone());
    }
    Trajectory::new(
        traj.grid,
        traj.t0 * nu,
        traj.dt * nu,
        traj.frames.iter().map(|f| f.scaled(1.0 / nu)).collect(),
    )
}

/// Physical-frame constants and the derivative bounds they control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalBounds {
    pub nu: f64,
    pub t: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "K2alpha")]
    pub k2_alpha: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub sup_u: f64,
    pub sup_grad_u: f64,
    pub sup_dt_u: f64,
    pub sup_hess_u: f64,
}

/// Physical constants at `t = t̃/ν` from unit-viscosity constants evaluated at `t̃`.
pub fn physical_bounds(tilde: &KConstants, nu: f64) -> Result<PhysicalBounds> {
    check_nu(nu)?;
    let a = tilde.alpha;
    let k0 = nu * tilde.k0;
    let k1 = nu * tilde.k1;
    let k2 = nu * nu * tilde.k2;
    let k2_alpha = nu * nu * tilde.k2_alpha;
    let k = k0 * k0 + nu * k1 + (nu * k2).powf(2.0 / 3.0) + (nu.powf(1.0 + a) * k2_alpha).powf(2.0 / (3.0 + a));
    Ok(PhysicalBounds {
        nu,
        t: tilde.t / nu,
        k0,
        k1,
        k2,
        k2_alpha,
        k,
        sup_u: k0,
        sup_grad_u: k / nu,
        sup_dt_u: k.powf(1.5) / nu,
        sup_hess_u: k.powf(1.5) / (nu * nu),
    })
}

/// `ν²·bracket(K̃)`, which equals the physical `K` of [`physical_bounds`].
pub fn physical_k_from_bracket(tilde: &KConstants, nu: f64) -> f64 {
    nu * nu * assemble_bracket(tilde.k0, tilde.k1, tilde.k2, tilde.k2_alpha, tilde.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_trig_field;
    use crate::forcing::Modulation;
    use crate::oracle::{cole_hopf_datum, cole_hopf_exact_1d};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn line(n: usize) -> GridSpec {
        GridSpec::new(1, n, TAU).unwrap()
    }

    #[test]
    fn config_rejects_bad_beta() {
        let mut cfg = SchemeConfig::new(line(16), 0.1, 0.01);
        cfg.beta = 0.6;
        assert!(matches!(cfg.validate(), Err(Error::InvalidInput(m)) if m.contains("β")));
        cfg.beta = 0.5;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.25;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn zero_data_converges_at_one() {
        let g = line(16);
        let cfg = SchemeConfig::new(g, 0.1, 0.01);
        let out = run_picard(&cfg, &VectorField::zeros(g, 1), &Forcing::Zero).unwrap();
        assert!(out.converged);
        assert_eq!(out.records.len(), 2);
        assert!(out.fixed_point.frames.iter().all(|f| sup_norm(f) == 0.0));
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = GridSpec::new(2, 8, TAU).unwrap();
        let cfg = SchemeConfig::new(g, 0.1, 0.01);
        let u0 = VectorField::constant(g, &[0.3, -1.2]);
        let out = run_picard(&cfg, &u0, &Forcing::Zero).unwrap();
        assert!(out.converged);
        assert_eq!(out.records.len(), 2);
        for f in &out.fixed_point.frames {
            assert!(sup_norm(&f.sub(&u0)) < 1e-14);
        }
        assert!(out.records[1].max_v() == 0.0);
    }

    #[test]
    fn matches_cole_hopf_solution() {
        let g = line(64);
        let mut cfg = SchemeConfig::new(g, 0.5, 1e-3);
        cfg.holder_frames = 5;
        let out = run_picard(&cfg, &cole_hopf_datum(g, 0.5).unwrap(), &Forcing::Zero).unwrap();
        assert!(out.converged);
        let err = sup_norm(&out.fixed_point.last().sub(&cole_hopf_exact_1d(g, 0.5, 0.5)));
        assert!(err < 1e-5, "error {err}");
        assert!(out.residual < 1e-4);
    }

    #[test]
    fn telescoping_and_contraction() {
        let g = line(32);
        let mut cfg = SchemeConfig::new(g, 0.2, 2e-3);
        cfg.keep_iterates = true;
        cfg.holder_frames = 5;
        let u0 = make_trig_field(g, 3, 4, 0.5).unwrap();
        let out = run_picard(&cfg, &u0, &Forcing::Zero).unwrap();
        assert!(out.converged);
        for (n, it) in out.iterates.iter().enumerate() {
            for k in (0..it.len()).step_by(20) {
                let mut acc = VectorField::zeros(g, 1);
                for m in 0..=n {
                    let v = match m {
                        0 => out.iterates[0].frames[k].clone(),
                        _ => out.iterates[m].frames[k].sub(&out.iterates[m - 1].frames[k]),
                    };
                    acc.axpy(1.0, &v);
                }
                assert!(sup_norm(&acc.sub(&it.frames[k])) <= 1e-12);
            }
        }
        let v: Vec<f64> = out.records.iter().map(|r| r.max_v()).collect();
        for m in 3..v.len().min(9) {
            if v[m - 1] > 1e-13 {
                assert!(v[m] / v[m - 1] < v[m - 1] / v[m - 2], "{v:?}");
            }
        }
    }

    #[test]
    fn fixed_point_reproduces_itself() {
        let g = line(32);
        let mut cfg = SchemeConfig::new(g, 0.2, 2e-3);
        cfg.holder_frames = 5;
        let u0 = make_trig_field(g, 9, 4, 0.5).unwrap();
        let out = run_picard(&cfg, &u0, &Forcing::Zero).unwrap();
        let again = transport_step(&u0, &Forcing::Zero, Some(&out.fixed_point), &cfg).unwrap();
        let diff = again
            .frames
            .iter()
            .zip(out.fixed_point.frames.iter())
            .map(|(a, b)| sup_norm(&a.sub(b)))
            .fold(0.0, f64::max);
        assert!(diff < 2.0 * cfg.tol_fp, "diff {diff}");
    }

    #[test]
    fn unforced_diagnostics_decay() {
        let g = line(32);
        let mut cfg = SchemeConfig::new(g, 0.5, 5e-3);
        cfg.holder_frames = 5;
        let out = run_picard(&cfg, &make_trig_field(g, 4, 5, 0.8).unwrap(), &Forcing::Zero).unwrap();
        let r = out.records.last().unwrap();
        for series in [&r.sup_u, &r.sup_grad_u, &r.sup_hess_u] {
            for w in series[1..].windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", w);
            }
        }
    }

    #[test]
    fn divergence_carries_iterate_index() {
        let g = line(16);
        let cfg = SchemeConfig::new(g, 1.0, 0.5);
        let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = 40.0 * x[0].sin());
        let err = run_picard(&cfg, &u0, &Forcing::Zero).unwrap_err();
        assert!(matches!(err, Error::Iterate { .. }), "{err:?}");
    }

    #[test]
    fn t_init_closed_form_and_infinite() {
        let g = line(16);
        let zero = VectorField::zeros(g, 1);
        let opts = TInitOptions::default();
        assert_eq!(compute_t_init(&zero, &Forcing::Zero, 1.0, 0.5, &opts).unwrap(), TInit::Infinite);
        let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = x[0].sin());
        let k = crate::norms::compute_k_constants(&u0, &Forcing::Zero, 0.0, 2.0, 0.5, &opts.k).unwrap();
        let t = compute_t_init(&u0, &Forcing::Zero, 2.0, 0.5, &opts).unwrap().finite().unwrap();
        assert_eq!(t, 1.0 / (2.0 * k.k));
        // Bisection on the constant function agrees with the closed form.
        let b = bisect_unit_crossing(|s| Ok(s * 2.0 * k.k), 0.0, 1.0).unwrap();
        assert!((b - t).abs() <= 1e-10);
    }

    #[test]
    fn t_init_with_forcing_hits_the_root() {
        let g = line(16);
        let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = 0.2 * x[0].sin());
        let f = Forcing::separable(
            VectorField::from_fn(g, 1, |x, o| o[0] = (2.0 * x[0]).cos()),
            Modulation {
                mean: 1.0,
                amplitude: 0.5,
                omega: 3.0,
                phase: 0.0,
            },
        )
        .unwrap();
        let opts = TInitOptions::default();
        let t = compute_t_init(&u0, &f, 1.0, 0.5, &opts).unwrap().finite().unwrap();
        let calc = KCalculus::new(&u0, &f, 1.0, 0.5, opts.k).unwrap();
        let val = t * calc.at_with_steps(t, opts.quad_steps).unwrap().kbar();
        assert!((val - 1.0).abs() <= 1e-10, "{val}");
    }

    #[test]
    fn majorant_examples() {
        let r = series_majorant(0, 1.0, 0.0).unwrap();
        assert_eq!(r.empirical, 0.0);
        let r = series_majorant(3, 1.0, 3.7).unwrap();
        assert!(r.empirical <= r.bound);
        assert!((r.bound - 1.0_f64.exp() / (1.0_f64.exp() - 1.0)).abs() < 1e-15);
        let r = series_majorant(10, 0.25, 10.0).unwrap();
        // Direct summation oracle with plain powers.
        let direct: f64 = (11..4000).map(|m| (10.0 / m as f64).powf(0.25 * m as f64)).sum();
        assert!((r.empirical - direct).abs() < 1e-12 * direct);
        assert!(r.empirical <= r.bound);
        assert!(matches!(series_majorant(2, 1.0, 3.7), Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn majorant_never_exceeded(gamma in 0.01f64..5.0, ckt in 0.0f64..50.0) {
            let r = series_majorant(ckt.floor() as u64, gamma, ckt).unwrap();
            prop_assert!(r.empirical <= r.bound);
        }

        #[test]
        fn rescaling_round_trip(nu in 0.05f64..20.0) {
            let g = line(8);
            let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = x[0].sin() + 0.3);
            let (t, _) = rescale_viscosity(&u0, &Forcing::Zero, nu).unwrap();
            let traj = Trajectory::new(g, 0.0, 0.1, vec![t.clone(), t]).unwrap();
            let back = unrescale(&traj, nu).unwrap();
            prop_assert!(sup_norm(&back.frames[0].sub(&u0)) <= 1e-14 * 1.3);
            let again = rescale_trajectory(&back, nu).unwrap();
            prop_assert!((again.dt - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_viscosity_is_identity() {
        let g = line(8);
        let u0 = make_trig_field(g, 1, 2, 1.0).unwrap();
        let f = Forcing::steady(u0.clone()).unwrap();
        let (a, b) = rescale_viscosity(&u0, &f, 1.0).unwrap();
        assert_eq!(a, u0);
        assert_eq!(b, f);
        let traj = Trajectory::new(g, 0.0, 0.1, vec![u0.clone(); 3]).unwrap();
        assert_eq!(unrescale(&traj, 1.0).unwrap(), traj);
        assert!(rescale_viscosity(&u0, &f, 0.0).is_err());
    }

    #[test]
    fn physical_bounds_scaling() {
        let g = line(16);
        let nu = 0.5;
        let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = x[0].sin());
        let prof = VectorField::from_fn(g, 1, |x, o| o[0] = 0.4 * (3.0 * x[0]).cos());
        let f = Forcing::steady(prof).unwrap();
        let (ut, gt) = rescale_viscosity(&u0, &f, nu).unwrap();
        let kt = crate::norms::compute_k_constants(&ut, &gt, 0.3, 1.0, 0.5, &KOptions::default()).unwrap();
        let p = physical_bounds(&kt, nu).unwrap();
        assert!((p.k - physical_k_from_bracket(&kt, nu)).abs() < 1e-12 * p.k);
        assert!((p.sup_grad_u - p.k / nu).abs() < 1e-15 * p.k);
        assert!((p.t - 0.6).abs() < 1e-15);
        // Physical K0 straight from the physical data.
        assert!((p.k0 - (1.0 + 0.6 * 0.4)).abs() < 1e-3);
    }
}
