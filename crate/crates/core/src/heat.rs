//! Exact spectral heat propagator, Duhamel integration and the heat-kernel scaling probe.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fields::{gradient, hessian, GridSpec, ScalarField, Trajectory, VectorField};
use crate::forcing::Forcing;
use crate::norms::{holder_seminorm, sup_norm, HolderMode, HolderOptions, HolderSamples};
use crate::spectral;
use crate::{Error, Result};

/// `e^{τΔ}` on a fixed grid with precomputed multipliers.
#[derive(Clone, Debug)]
pub struct HeatPropagator {
    grid: GridSpec,
    tau: f64,
    multipliers: Vec<f64>,
}

impl HeatPropagator {
    pub fn new(grid: GridSpec, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "heat time {tau} must be finite and >= 0 (backward heat flow is ill-posed)"
            )));
        }
        let table = spectral::modes(&grid);
        let multipliers = table.k2.iter().map(|k2| (-k2 * tau).exp()).collect();
        Ok(Self {
            grid,
            tau,
            multipliers,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn apply(&self, field: &VectorField) -> VectorField {
        self.apply_measured(field).0
    }

    /// Applies the propagator and reports the top-third spectral energy fraction of the result.
    pub fn apply_measured(&self, field: &VectorField) -> (VectorField, f64) {
        if self.tau == 0.0 {
            return (field.clone(), measure_top_fraction(field));
        }
        let grid = self.grid;
        let cut = (grid.n / 3) as i64;
        let table = spectral::modes(&grid);
        let mut total = 0.0;
        let mut top = 0.0;
        let components = field
            .components
            .iter()
            .map(|c| {
                let mut spec = spectral::forward(&grid, c);
                for (k, v) in spec.iter_mut().enumerate() {
                    *v *= self.multipliers[k];
                    let e = v.norm_sqr();
                    total += e;
                    if table.kmax[k] > cut {
                        top += e;
                    }
                }
                spectral::inverse(&grid, spec)
            })
            .collect();
        let fraction = if total > 0.0 { top / total } else { 0.0 };
        (VectorField { grid, components }, fraction)
    }
}

pub(crate) fn measure_top_fraction(field: &VectorField) -> f64 {
    let grid = field.grid;
    let cut = (grid.n / 3) as i64;
    let table = spectral::modes(&grid);
    let mut total = 0.0;
    let mut top = 0.0;
    for c in &field.components {
        let spec = spectral::forward(&grid, c);
        for (k, v) in spec.iter().enumerate() {
            let e = v.norm_sqr();
            total += e;
            if table.kmax[k] > cut {
                top += e;
            }
        }
    }
    if total > 0.0 {
        top / total
    } else {
        0.0
    }
}

/// `e^{τΔ} f`; `τ = 0` returns the input unchanged.
pub fn heat_apply(field: &VectorField, tau: f64) -> Result<VectorField> {
    Ok(HeatPropagator::new(field.grid, tau)?.apply(field))
}

/// Number of steps of size `dt` covering `[0, T]`, rejecting non-commensurate pairs.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must be >= 0")));
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidInput(format!(
            "time step {dt} does not divide horizon {horizon}"
        )));
    }
    Ok(steps as usize)
}

/// `e^{tΔ}u0 + ∫_0^t e^{(t−s)Δ} g_s ds` with the trapezoid rule in `s`.
pub fn duhamel_forced_heat(u0: &VectorField, g: &Forcing, horizon: f64, dt: f64) -> Result<Trajectory> {
    let steps = step_count(horizon, dt)?;
    let grid = u0.grid;
    if let Some(p) = g.profile() {
        if !p.same_shape(u0) {
            return Err(Error::InvalidInput("forcing and data differ in shape".into()));
        }
    }
    let prop = HeatPropagator::new(grid, dt)?;
    // Separable sources: H(dt) g_n = θ_n · H(dt) G.
    let smoothed = g.profile().map(|p| prop.apply(p));
    let mut frames = Vec::with_capacity(steps + 1);
    let mut u = u0.clone();
    frames.push(u.clone());
    for n in 0..steps {
        let (t0, t1) = (n as f64 * dt, (n + 1) as f64 * dt);
        let mut next = prop.apply(&u);
        if let (Some(hp), Some(p)) = (&smoothed, g.profile()) {
            next.axpy(0.5 * dt * g.factor(t0), hp);
            next.axpy(0.5 * dt * g.factor(t1), p);
        }
        if !next.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite forcing sample near t = {t1}")));
        }
        u = next;
        frames.push(u.clone());
    }
    Trajectory::new(grid, 0.0, dt, frames)
}

/// Largest octave index resolved on an `n`-point axis.
pub fn lacunary_octaves(n: usize) -> usize {
    let mut j = 0;
    while (1usize << (j + 1)) < n / 2 {
        j += 1;
    }
    j
}

/// `Σ_j 2^{−jα} cos(2^j·2πx₁/L + θ)` with one seed-derived phase shared by all octaves.
pub fn lacunary_field(grid: GridSpec, alpha: f64, seed: u64) -> Result<ScalarField> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} not in (0, 1)")));
    }
    let theta = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..2.0 * PI);
    let octaves = lacunary_octaves(grid.n);
    let k0 = 2.0 * PI / grid.l;
    Ok(ScalarField::from_fn(grid, |x| {
        (0..=octaves)
            .map(|j| {
                let w = (1u64 << j) as f64;
                w.powf(-alpha) * (w * k0 * x[0] + theta).cos()
            })
            .sum()
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingProbeReport {
    pub alpha: f64,
    pub kappa: u32,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub predicted_slope: f64,
    /// `exp(intercept) / ‖u0‖_α`, the empirical kernel constant.
    pub fitted_constant: f64,
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn derivative_sup(field: &VectorField, kappa: u32) -> f64 {
    match kappa {
        1 => sup_norm(&gradient(field)),
        _ => sup_norm(&hessian(field)),
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidInput("need at least two probe times".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("probe times must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Measures `‖∇^κ e^{tΔ} u0‖_∞` over `times` for an arbitrary field and fits the log-log slope.
pub fn measure_scaling(u0: &VectorField, alpha: f64, kappa: u32, times: &[f64]) -> Result<ScalingProbeReport> {
    if !(kappa == 1 || kappa == 2) {
        return Err(Error::InvalidInput(format!("derivative order {kappa} not in {{1, 2}}")));
    }
    validate_times(times)?;
    let norms: Vec<f64> = times
        .iter()
        .map(|&t| heat_apply(u0, t).map(|f| derivative_sup(&f, kappa)))
        .collect::<Result<_>>()?;
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = linear_fit(&lx, &ly);
    if !slope.is_finite() {
        return Err(Error::Window("scaling fit is not finite (vanishing derivative)".into()));
    }
    let seminorm = holder_seminorm(
        HolderSamples::Field(u0),
        alpha,
        HolderMode::Isotropic,
        &HolderOptions::default(),
    )?
    .value;
    Ok(ScalingProbeReport {
        alpha,
        kappa,
        times: times.to_vec(),
        norms,
        slope,
        predicted_slope: (alpha - kappa as f64) / 2.0,
        fitted_constant: intercept.exp() / seminorm,
    })
}

/// Lacunary-field probe of the heat-kernel bound `‖∇^κ e^{tΔ}u0‖ ≲ t^{(α−κ)/2}‖u0‖_α`.
pub fn holder_scaling_probe(
    alpha: f64,
    kappa: u32,
    times: &[f64],
    grid: GridSpec,
    seed: u64,
) -> Result<ScalingProbeReport> {
    validate_times(times)?;
    let octaves = lacunary_octaves(grid.n);
    let k0 = 2.0 * PI / grid.l;
    let k_top = k0 * (1u64 << octaves) as f64;
    let (t_min, t_max) = (times[0], times[times.len() - 1]);
    if k_top * k_top * t_min < 1.0 {
        return Err(Error::Window(format!(
            "t = {t_min} is below the resolved window: top wavenumber² · t = {:.3} < 1",
            k_top * k_top * t_min
        )));
    }
    if k0 * k0 * t_max > 1.0 {
        return Err(Error::Window(format!(
            "t = {t_max} exceeds the box scale: lowest wavenumber² · t = {:.3} > 1",
            k0 * k0 * t_max
        )));
    }
    let u0 = VectorField::from_scalar(lacunary_field(grid, alpha, seed)?);
    measure_scaling(&u0, alpha, kappa, times)
}

/// `∫_{t'}^{t} ‖∇² e^{(t−s)Δ} g_s‖_γ ds` by the midpoint rule, which avoids the `s = t` endpoint.
pub fn duhamel_hessian_holder(
    g: &Forcing,
    t_start: f64,
    t_end: f64,
    dt: f64,
    gamma: f64,
    opts: &HolderOptions,
) -> Result<f64> {
    let Some(profile) = g.profile() else {
        return Ok(0.0);
    };
    let steps = step_count(t_end - t_start, dt)?;
    let mut total = 0.0;
    for k in 0..steps {
        let s = t_start + (k as f64 + 0.5) * dt;
        let smoothed = heat_apply(&profile.scaled(g.factor(s)), t_end - s)?;
        let h = hessian(&smoothed);
        total += dt * holder_seminorm(HolderSamples::Field(&h), gamma, HolderMode::Isotropic, opts)?.value;
    }
    Ok(total)
}
