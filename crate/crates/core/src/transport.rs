//! Linear parabolic transport `(∂_t − Δ + b·∇ + C)u = f` on the torus.

use num_complex::Complex64;

use crate::fields::{GridSpec, Trajectory, VectorField};
use crate::forcing::{Forcing, Modulation};
use crate::heat::{step_count, HeatPropagator};
use crate::linalg::{mat_vec, operator_norm};
use crate::norms::sup_norm;
use crate::spectral;
use crate::{Error, Result};

/// Largest admissible top-third spectral energy fraction.
pub const BLOCKING_THRESHOLD: f64 = 1e-6;

/// Drift coefficient `b(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Drift {
    Zero,
    Constant(Vec<f64>),
    /// Sampled on the solver's own time grid; frame `k` is used at `t = k·dt`.
    Frames(Trajectory),
    Separable {
        profile: VectorField,
        modulation: Modulation,
    },
}

impl Drift {
    /// Drift at frame index `k` (time `k·dt`), or `None` when identically zero.
    pub fn at(&self, grid: GridSpec, k: usize, dt: f64) -> Option<VectorField> {
        match self {
            Drift::Zero => None,
            Drift::Constant(v) => Some(VectorField::constant(grid, v)),
            Drift::Frames(traj) => Some(traj.frames[k].clone()),
            Drift::Separable {
                profile,
                modulation,
            } => Some(profile.scaled(modulation.value(k as f64 * dt))),
        }
    }

    fn validate(&self, grid: GridSpec, steps: usize, dt: f64) -> Result<()> {
        let d = grid.d;
        match self {
            Drift::Zero => Ok(()),
            Drift::Constant(v) if v.len() == d && v.iter().all(|x| x.is_finite()) => Ok(()),
            Drift::Constant(_) => Err(Error::InvalidInput("constant drift needs d finite entries".into())),
            Drift::Frames(traj) => {
                if traj.grid != grid || traj.frames.iter().any(|f| f.comps() != d) {
                    return Err(Error::InvalidInput("drift frames do not match the grid".into()));
                }
                if traj.t0 != 0.0 || (traj.dt - dt).abs() > 1e-12 * dt || traj.len() < steps + 1 {
                    return Err(Error::InvalidInput(format!(
                        "drift trajectory (t0 = {}, dt = {}, {} frames) does not cover the solve grid (dt = {dt}, {} frames)",
                        traj.t0,
                        traj.dt,
                        traj.len(),
                        steps + 1
                    )));
                }
                Ok(())
            }
            Drift::Separable { profile, .. } => {
                if profile.grid != grid || profile.comps() != d {
                    return Err(Error::InvalidInput("drift profile does not match the grid".into()));
                }
                Ok(())
            }
        }
    }
}

/// A square matrix per node, entries stored as components `i·size + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub grid: GridSpec,
    pub size: usize,
    pub entries: Vec<Vec<f64>>,
}

impl MatrixField {
    pub fn new(grid: GridSpec, size: usize, entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.len() != size * size || entries.iter().any(|e| e.len() != grid.len()) {
            return Err(Error::InvalidInput("matrix field has the wrong shape".into()));
        }
        Ok(Self { grid, size, entries })
    }

    pub fn constant(grid: GridSpec, size: usize, matrix: &[f64]) -> Self {
        Self {
            grid,
            size,
            entries: matrix.iter().map(|&v| vec![v; grid.len()]).collect(),
        }
    }

    pub fn matrix_at(&self, i: usize) -> Vec<f64> {
        self.entries.iter().map(|e| e[i]).collect()
    }

    /// `max_x |||M(x)|||`.
    pub fn sup_operator_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| operator_norm(&self.matrix_at(i), self.size))
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &MatrixField) -> MatrixField {
        let entries = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        MatrixField {
            grid: self.grid,
            size: self.size,
            entries,
        }
    }
}

/// Zeroth-order coefficient `C(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ZerothOrder {
    None,
    /// Same matrix at every node and time.
    Constant { size: usize, matrix: Vec<f64> },
    Field(MatrixField),
    /// One matrix field per solver frame.
    Frames(Vec<MatrixField>),
}

impl ZerothOrder {
    fn validate(&self, grid: GridSpec, comps: usize, steps: usize) -> Result<()> {
        let ok = match self {
            ZerothOrder::None => true,
            ZerothOrder::Constant { size, matrix } => *size == comps && matrix.len() == comps * comps,
            ZerothOrder::Field(m) => m.size == comps && m.grid == grid,
            ZerothOrder::Frames(ms) => ms.len() > steps && ms.iter().all(|m| m.size == comps && m.grid == grid),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "zeroth-order term does not match the solution shape or time grid".into(),
            ))
        }
    }

    /// `out = C(k) w`, overwriting `out`.
    fn apply(&self, k: usize, w: &VectorField, out: &mut VectorField) {
        let comps = w.comps();
        let mut x = vec![0.0; comps];
        let mut y = vec![0.0; comps];
        let field: Option<&MatrixField> = match self {
            ZerothOrder::None => {
                for c in &mut out.components {
                    c.iter_mut().for_each(|v| *v = 0.0);
                }
                return;
            }
            ZerothOrder::Constant { .. } => None,
            ZerothOrder::Field(m) => Some(m),
            ZerothOrder::Frames(ms) => Some(&ms[k]),
        };
        let mut mat = vec![0.0; comps * comps];
        if let ZerothOrder::Constant { matrix, .. } = self {
            mat.copy_from_slice(matrix);
        }
        for i in 0..w.grid.len() {
            if let Some(m) = field {
                for (e, slot) in m.entries.iter().zip(mat.iter_mut()) {
                    *slot = e[i];
                }
            }
            for c in 0..comps {
                x[c] = w.components[c][i];
            }
            mat_vec(&mat, &x, &mut y);
            for c in 0..comps {
                out.components[c][i] = y[c];
            }
        }
    }

    /// `max_x |||C(k, x)|||`.
    pub fn sup_operator_norm(&self, k: usize) -> f64 {
        match self {
            ZerothOrder::None => 0.0,
            ZerothOrder::Constant { size, matrix } => operator_norm(matrix, *size),
            ZerothOrder::Field(m) => m.sup_operator_norm(),
            ZerothOrder::Frames(ms) => ms[k].sup_operator_norm(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ZerothOrder::None)
    }

    /// The coefficient at frame `k` as a matrix field, or `None` when absent.
    pub fn field_at(&self, grid: GridSpec, k: usize) -> Option<MatrixField> {
        match self {
            ZerothOrder::None => None,
            ZerothOrder::Constant { size, matrix } => Some(MatrixField::constant(grid, *size, matrix)),
            ZerothOrder::Field(m) => Some(m.clone()),
            ZerothOrder::Frames(ms) => Some(ms[k].clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    pub u0: VectorField,
    pub drift: Drift,
    pub zeroth: ZerothOrder,
    pub source: Forcing,
    pub horizon: f64,
    pub dt: f64,
}

impl TransportProblem {
    /// Pure heat flow of `u0` with the given step.
    pub fn heat(u0: VectorField, horizon: f64, dt: f64) -> Self {
        Self {
            u0,
            drift: Drift::Zero,
            zeroth: ZerothOrder::None,
            source: Forcing::Zero,
            horizon,
            dt,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.horizon, self.dt)
    }

    pub fn validate(&self) -> Result<usize> {
        let steps = self.steps()?;
        let grid = self.u0.grid;
        if !self.u0.is_finite() {
            return Err(Error::InvalidInput("non-finite initial datum".into()));
        }
        self.drift.validate(grid, steps, self.dt)?;
        self.zeroth.validate(grid, self.u0.comps(), steps)?;
        if let Some(p) = self.source.profile() {
            if !p.same_shape(&self.u0) {
                return Err(Error::InvalidInput("source and datum differ in shape".into()));
            }
        }
        Ok(steps)
    }
}

/// Two-thirds-rule truncated copy of a field.
pub(crate) fn dealiased(field: &VectorField) -> VectorField {
    let grid = field.grid;
    let components = field
        .components
        .iter()
        .map(|c| {
            let mut s = spectral::forward(&grid, c);
            spectral::truncate(&grid, &mut s);
            spectral::inverse(&grid, s)
        })
        .collect();
    VectorField { grid, components }
}

/// `Σ_a b_a ∂_a w` with both factors and the product truncated; `b` must already be truncated.
pub(crate) fn advect(b_truncated: &VectorField, w: &VectorField) -> VectorField {
    let grid = w.grid;
    let d = grid.d;
    let table = spectral::modes(&grid);
    let components = w
        .components
        .iter()
        .map(|c| {
            let mut s = spectral::forward(&grid, c);
            spectral::truncate(&grid, &mut s);
            let mut product = vec![0.0; grid.len()];
            for a in 0..d {
                let ds: Vec<Complex64> = s
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * Complex64::new(0.0, table.odd[k * d + a]))
                    .collect();
                let deriv = spectral::inverse(&grid, ds);
                for ((p, x), y) in product.iter_mut().zip(b_truncated.components[a].iter()).zip(deriv) {
                    *p += x * y;
                }
            }
            let mut ps = spectral::forward(&grid, &product);
            spectral::truncate(&grid, &mut ps);
            spectral::inverse(&grid, ps)
        })
        .collect();
    VectorField { grid, components }
}

/// Strang splitting `H(dt/2) ∘ N(dt) ∘ H(dt/2)` with Heun for `N`.
///
/// `rhs(k, w)` evaluates the non-diffusive part with coefficients frozen at frame `k`.
pub(crate) fn integrate(
    u0: &VectorField,
    dt: f64,
    steps: usize,
    mut rhs: impl FnMut(usize, &VectorField) -> Result<VectorField>,
) -> Result<Trajectory> {
    let grid = u0.grid;
    let half = HeatPropagator::new(grid, 0.5 * dt)?;
    let fraction = crate::heat::measure_top_fraction(u0);
    if fraction > BLOCKING_THRESHOLD {
        return Err(Error::SpectralBlocking { time: 0.0, fraction });
    }
    let mut frames = Vec::with_capacity(steps + 1);
    let mut u = u0.clone();
    frames.push(u.clone());
    for n in 0..steps {
        let time = (n + 1) as f64 * dt;
        let w = half.apply(&u);
        let k1 = rhs(n, &w)?;
        let mut predictor = w.clone();
        predictor.axpy(dt, &k1);
        let k2 = rhs(n + 1, &predictor)?;
        let mut corrected = w;
        corrected.axpy(0.5 * dt, &k1);
        corrected.axpy(0.5 * dt, &k2);
        let (next, fraction) = half.apply_measured(&corrected);
        if !next.is_finite() {
            return Err(Error::Divergence {
                time,
                detail: "non-finite state".into(),
            });
        }
        if fraction > BLOCKING_THRESHOLD {
            return Err(Error::SpectralBlocking { time, fraction });
        }
        u = next;
        frames.push(u.clone());
    }
    Trajectory::new(grid, 0.0, dt, frames)
}

/// Second-order solve of the transport problem.
pub fn solve_transport(p: &TransportProblem) -> Result<Trajectory> {
    let steps = p.validate()?;
    let grid = p.u0.grid;
    let comps = p.u0.comps();
    let dt = p.dt;
    // Drift at the current and next frame, truncated once per frame.
    let mut cache: Vec<(usize, VectorField)> = Vec::with_capacity(2);
    let constant_drift = matches!(p.drift, Drift::Zero | Drift::Constant(_));
    let mut scratch = VectorField::zeros(grid, comps);
    integrate(&p.u0, dt, steps, |k, w| {
        let mut out = VectorField::zeros(grid, comps);
        let key = if constant_drift { 0 } else { k };
        let b = match cache.iter().find(|(i, _)| *i == key) {
            Some((_, b)) => Some(b.clone()),
            None => match p.drift.at(grid, key, dt) {
                Some(raw) => {
                    let b = dealiased(&raw);
                    if cache.len() == 2 {
                        cache.remove(0);
                    }
                    cache.push((key, b.clone()));
                    Some(b)
                }
                None => None,
            },
        };
        if let Some(b) = b {
            out.axpy(-1.0, &advect(&b, w));
        }
        if !p.zeroth.is_none() {
            p.zeroth.apply(k, w, &mut scratch);
            out.axpy(-1.0, &scratch);
        }
        p.source.add_to(k as f64 * dt, 1.0, &mut out);
        Ok(out)
    })
}

/// Discrete slack tolerance `10·dt²·max(scale, 1) + 1e−10`.
pub fn tol_mp(dt: f64, scale: f64) -> f64 {
    10.0 * dt * dt * scale.max(1.0) + 1e-10
}

/// Cumulative trapezoid of `values` on a uniform grid.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len());
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * h * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Per-frame `RHS − ‖u_t‖` of the maximum-principle bound.
pub fn max_principle_slack(traj: &Trajectory, p: &TransportProblem) -> Result<Vec<f64>> {
    let steps = p.validate()?;
    if traj.grid != p.u0.grid || traj.len() != steps + 1 || (traj.dt - p.dt).abs() > 1e-12 * p.dt {
        return Err(Error::InvalidInput("trajectory does not belong to this problem".into()));
    }
    let rate: Vec<f64> = (0..=steps).map(|k| p.zeroth.sup_operator_norm(k)).collect();
    let cum = cumulative_trapezoid(&rate, p.dt);
    let f: Vec<f64> = (0..=steps).map(|k| p.source.sup(k as f64 * p.dt)).collect();
    let u0 = sup_norm(&p.u0);
    let mut out = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let mut integral = 0.0;
        for k in 1..=n {
            let a = f[k - 1] * (cum[n] - cum[k - 1]).exp();
            let b = f[k] * (cum[n] - cum[k]).exp();
            integral += 0.5 * p.dt * (a + b);
        }
        let rhs = cum[n].exp() * u0 + integral;
        out.push(rhs - sup_norm(&traj.frames[n]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_trig_field;
    use crate::heat::duhamel_forced_heat;
    use std::f64::consts::TAU;

    fn line(n: usize) -> GridSpec {
        GridSpec::new(1, n, TAU).unwrap()
    }

    fn max_diff(a: &VectorField, b: &VectorField) -> f64 {
        a.components
            .iter()
            .flatten()
            .zip(b.components.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn heat_eigenfunction() {
        let g = line(32);
        let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = x[0].sin());
        let traj = solve_transport(&TransportProblem::heat(u0, 1.0, 1e-3)).unwrap();
        let exact = VectorField::from_fn(g, 1, |x, o| o[0] = (-1.0f64).exp() * x[0].sin());
        assert!(max_diff(traj.last(), &exact) < 1e-8);
    }

    #[test]
    fn constant_drift_shift_is_second_order() {
        let g = line(32);
        let u0 = VectorField::from_fn(g, 1, |x, o| o[0] = x[0].sin());
        let c0 = 1.5;
        let exact = VectorField::from_fn(g, 1, |x, o| o[0] = (-1.0f64).exp() * (x[0] - c0).sin());
        let err = |dt: f64| {
            let p = TransportProblem {
                drift: Drift::Constant(vec![c0]),
                ..TransportProblem::heat(u0.clone(), 1.0, dt)
            };
            max_diff(solve_transport(&p).unwrap().last(), &exact)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-3);
        let ratio = e1 / e2;
        assert!(ratio > 3.4 && ratio < 4.6, "ratio {ratio}");
    }

    #[test]
    fn constants_are_preserved() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let u0 = VectorField::constant(g, &[0.7, -0.2]);
        let b = make_trig_field(g, 4, 4, 2.0).unwrap();
        let p = TransportProblem {
            drift: Drift::Separable {
                profile: b,
                modulation: Modulation::steady(),
            },
            ..TransportProblem::heat(u0, 0.2, 0.01)
        };
        let traj = solve_transport(&p).unwrap();
        let slack = max_principle_slack(&traj, &p).unwrap();
        assert!(slack.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn heat_slack_nondecreasing() {
        let g = line(64);
        let u0 = make_trig_field(g, 5, 6, 1.0).unwrap();
        let p = TransportProblem::heat(u0, 0.5, 0.01);
        let traj = solve_transport(&p).unwrap();
        let slack = max_principle_slack(&traj, &p).unwrap();
        let tol = tol_mp(p.dt, 1.0);
        for w in slack.windows(2) {
            assert!(w[0] >= -tol);
            assert!(w[1] >= w[0] - 1e-13);
        }
    }

    #[test]
    fn reduces_to_duhamel() {
        let g = line(32);
        let u0 = make_trig_field(g, 3, 5, 1.0).unwrap();
        let src = Forcing::separable(
            make_trig_field(g, 4, 5, 1.0).unwrap(),
            Modulation {
                mean: 0.5,
                amplitude: 1.0,
                omega: 2.0,
                phase: 0.3,
            },
        )
        .unwrap();
        let dt = 0.01;
        let p = TransportProblem {
            source: src.clone(),
            ..TransportProblem::heat(u0.clone(), 1.0, dt)
        };
        let a = solve_transport(&p).unwrap();
        let b = duhamel_forced_heat(&u0, &src, 1.0, dt).unwrap();
        let diff = max_diff(a.last(), b.last());
        assert!(diff < 5.0 * dt * dt, "diff {diff}");
    }

    #[test]
    fn linear_in_data_and_source() {
        let g = line(32);
        let b = make_trig_field(g, 1, 4, 1.0).unwrap();
        let drift = Drift::Separable {
            profile: b,
            modulation: Modulation::steady(),
        };
        let zeroth = ZerothOrder::Constant {
            size: 1,
            matrix: vec![0.4],
        };
        let mk = |u0: VectorField, f: VectorField| TransportProblem {
            u0,
            drift: drift.clone(),
            zeroth: zeroth.clone(),
            source: Forcing::steady(f).unwrap(),
            horizon: 0.3,
            dt: 0.01,
        };
        let (u1, f1) = (make_trig_field(g, 2, 4, 1.0).unwrap(), make_trig_field(g, 3, 4, 1.0).unwrap());
        let (u2, f2) = (make_trig_field(g, 4, 4, 1.0).unwrap(), make_trig_field(g, 5, 4, 1.0).unwrap());
        let (a, bb) = (2.0, -0.5);
        let mut u = u1.scaled(a);
        u.axpy(bb, &u2);
        let mut f = f1.scaled(a);
        f.axpy(bb, &f2);
        let combo = solve_transport(&mk(u, f)).unwrap();
        let s1 = solve_transport(&mk(u1, f1)).unwrap();
        let s2 = solve_transport(&mk(u2, f2)).unwrap();
        let mut lin = s1.last().scaled(a);
        lin.axpy(bb, s2.last());
        assert!(max_diff(combo.last(), &lin) < 1e-10);
    }

    #[test]
    fn blocking_gate_trips_on_unresolved_data() {
        let g = line(32);
        let u0 = make_trig_field(g, 1, 15, 1.0).unwrap();
        let err = solve_transport(&TransportProblem::heat(u0, 0.1, 0.01)).unwrap_err();
        assert!(matches!(err, Error::SpectralBlocking { .. }));
    }

    #[test]
    fn mismatched_drift_grid_is_rejected() {
        let g = line(32);
        let u0 = VectorField::zeros(g, 1);
        let other = Trajectory::new(g, 0.0, 0.02, vec![VectorField::zeros(g, 1); 6]).unwrap();
        let p = TransportProblem {
            drift: Drift::Frames(other),
            ..TransportProblem::heat(u0, 0.1, 0.01)
        };
        assert!(solve_transport(&p).is_err());
    }

    #[test]
    fn zeroth_order_decay_rate() {
        // C = λ on a constant: u(t) = e^{−λt} u0.
        let g = line(16);
        let u0 = VectorField::constant(g, &[2.0]);
        let p = TransportProblem {
            zeroth: ZerothOrder::Constant {
                size: 1,
                matrix: vec![0.8],
            },
            ..TransportProblem::heat(u0, 1.0, 1e-3)
        };
        let traj = solve_transport(&p).unwrap();
        let v = traj.last().components[0][0];
        assert!((v - 2.0 * (-0.8f64).exp()).abs() < 1e-6);
    }
}
