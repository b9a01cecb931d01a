//! Periodic grids, sampled fields, spectral differentiation and snapshots.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{self, unravel};
use crate::{Error, Result};

/// Uniform periodic grid on `[0, L)^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub l: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {n} must be a power of two >= 8"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {l} must be positive and finite")));
        }
        Ok(Self { d, n, l })
    }

    /// Number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `L / n`.
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Physical coordinates of node `flat`.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let mut idx = [0usize; 3];
        unravel(flat, self.n, self.d, &mut idx);
        let h = self.h();
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = idx[a] as f64 * h;
        }
        x
    }

    /// Flat index of the node reached from `flat` by the integer offset `shift`.
    pub fn offset(&self, flat: usize, shift: &[i64]) -> usize {
        let mut idx = [0usize; 3];
        unravel(flat, self.n, self.d, &mut idx);
        let n = self.n as i64;
        let mut out = 0usize;
        for a in 0..self.d {
            let i = (idx[a] as i64 + shift[a]).rem_euclid(n) as usize;
            out = out * self.n + i;
        }
        out
    }

    /// Periodic Euclidean distance between two nodes.
    pub fn node_distance(&self, p: usize, q: usize) -> f64 {
        let mut ip = [0usize; 3];
        let mut iq = [0usize; 3];
        unravel(p, self.n, self.d, &mut ip);
        unravel(q, self.n, self.d, &mut iq);
        let mut s = 0.0;
        for a in 0..self.d {
            let delta = ip[a].abs_diff(iq[a]);
            let delta = delta.min(self.n - delta) as f64 * self.h();
            s += delta * delta;
        }
        s.sqrt()
    }

    /// Periodic Euclidean distance between two points.
    pub fn torus_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.d {
            let delta = (x[a] - y[a]).rem_euclid(self.l);
            let delta = delta.min(self.l - delta);
            s += delta * delta;
        }
        s.sqrt()
    }
}

/// Real samples of a scalar on a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..grid.d])).collect();
        Self { grid, values }
    }

    pub fn gradient(&self) -> VectorField {
        gradient(&VectorField::from_scalar(self.clone()))
    }

    pub fn laplacian(&self) -> ScalarField {
        laplacian(&VectorField::from_scalar(self.clone())).component(0)
    }

    pub fn evaluate_at(&self, x: &[f64]) -> f64 {
        FieldSpectrum::new(&VectorField::from_scalar(self.clone())).value(x)[0]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A tuple of scalar components on one grid, stored component-major.
///
/// Velocity fields carry `d` components; scalars, gradients and Hessians
/// reuse the same container with 1, `c·d` and `c·d·d` components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("field needs at least one component".into()));
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(Error::InvalidInput(format!(
                    "component has {} samples, grid has {}",
                    c.len(),
                    grid.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite sample".into()));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: GridSpec, comps: usize) -> Self {
        Self {
            grid,
            components: vec![vec![0.0; grid.len()]; comps],
        }
    }

    pub fn constant(grid: GridSpec, value: &[f64]) -> Self {
        Self {
            grid,
            components: value.iter().map(|&v| vec![v; grid.len()]).collect(),
        }
    }

    pub fn from_scalar(f: ScalarField) -> Self {
        Self {
            grid: f.grid,
            components: vec![f.values],
        }
    }

    pub fn from_scalars(fields: Vec<ScalarField>) -> Result<Self> {
        let grid = fields
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?
            .grid;
        if fields.iter().any(|f| f.grid != grid) {
            return Err(Error::InvalidInput("components on different grids".into()));
        }
        Ok(Self {
            grid,
            components: fields.into_iter().map(|f| f.values).collect(),
        })
    }

    pub fn from_fn(grid: GridSpec, comps: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut components = vec![vec![0.0; grid.len()]; comps];
        let mut out = vec![0.0; comps];
        for i in 0..grid.len() {
            f(&grid.coords(i)[..grid.d], &mut out);
            for (c, v) in out.iter().enumerate() {
                components[c][i] = *v;
            }
        }
        Self { grid, components }
    }

    pub fn comps(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.components[c].clone(),
        }
    }

    /// Values of every component at node `i`.
    pub fn at(&self, i: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[i]).collect()
    }

    /// Euclidean magnitude at node `i`.
    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &VectorField) -> bool {
        self.grid == other.grid && self.comps() == other.comps()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.components {
            for v in c.iter_mut() {
                *v *= s;
            }
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.components.iter_mut().zip(other.components.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += s * y;
            }
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Cyclic shift of every component by `shift` cells.
    pub fn shifted(&self, shift: &[i64]) -> Self {
        let mut out = self.clone();
        for (dst, src) in out.components.iter_mut().zip(self.components.iter()) {
            for (i, v) in src.iter().enumerate() {
                dst[self.grid.offset(i, shift)] = *v;
            }
        }
        out
    }
}

/// A uniform-in-time sequence of fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub t0: f64,
    pub dt: f64,
    pub frames: Vec<VectorField>,
}

impl Trajectory {
    pub fn new(grid: GridSpec, t0: f64, dt: f64, frames: Vec<VectorField>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
        }
        if frames.iter().any(|f| f.grid != grid) {
            return Err(Error::InvalidInput("frames on different grids".into()));
        }
        Ok(Self { grid, t0, dt, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn last(&self) -> &VectorField {
        self.frames.last().expect("non-empty trajectory")
    }

    /// Frame-wise difference `self - other`.
    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.len() != other.len() || self.grid != other.grid {
            return Err(Error::InvalidInput("trajectories differ in shape".into()));
        }
        let frames = self
            .frames
            .iter()
            .zip(other.frames.iter())
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Trajectory {
            frames,
            ..self.clone()
        })
    }

    /// Centered time differences, one-sided second order at the ends.
    pub fn time_derivative(&self) -> Result<Trajectory> {
        let k = self.len();
        if k < 3 {
            return Err(Error::InvalidInput("time derivative needs at least 3 frames".into()));
        }
        let inv = 1.0 / (2.0 * self.dt);
        let mut frames = Vec::with_capacity(k);
        for i in 0..k {
            let mut out = VectorField::zeros(self.grid, self.frames[i].comps());
            if i == 0 {
                out.axpy(-3.0 * inv, &self.frames[0]);
                out.axpy(4.0 * inv, &self.frames[1]);
                out.axpy(-inv, &self.frames[2]);
            } else if i == k - 1 {
                out.axpy(3.0 * inv, &self.frames[k - 1]);
                out.axpy(-4.0 * inv, &self.frames[k - 2]);
                out.axpy(inv, &self.frames[k - 3]);
            } else {
                out.axpy(inv, &self.frames[i + 1]);
                out.axpy(-inv, &self.frames[i - 1]);
            }
            frames.push(out);
        }
        Ok(Trajectory {
            frames,
            ..self.clone()
        })
    }
}

fn apply_multiplier(
    field: &VectorField,
    out_comps: usize,
    mult: impl Fn(usize, usize) -> Complex64,
) -> VectorField {
    // mult(output slot within the component's block, mode index)
    let grid = field.grid;
    let per = out_comps;
    let mut components = Vec::with_capacity(field.comps() * per);
    for c in &field.components {
        let spec = spectral::forward(&grid, c);
        for slot in 0..per {
            let s: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, v)| v * mult(slot, k))
                .collect();
            components.push(spectral::inverse(&grid, s));
        }
    }
    VectorField { grid, components }
}

/// Jacobian `∂_a u_c`, stored as component `c·d + a`.
pub fn gradient(field: &VectorField) -> VectorField {
    let grid = field.grid;
    let d = grid.d;
    let table = spectral::modes(&grid);
    apply_multiplier(field, d, |a, k| Complex64::new(0.0, table.odd[k * d + a]))
}

/// Second derivatives `∂_a ∂_b u_c`, stored as component `(c·d + a)·d + b`.
pub fn hessian(field: &VectorField) -> VectorField {
    let grid = field.grid;
    let d = grid.d;
    let table = spectral::modes(&grid);
    apply_multiplier(field, d * d, |slot, k| {
        let (a, b) = (slot / d, slot % d);
        let value = if a == b {
            -table.phys[k * d + a] * table.phys[k * d + a]
        } else {
            -table.odd[k * d + a] * table.odd[k * d + b]
        };
        Complex64::new(value, 0.0)
    })
}

/// Component-wise Laplacian, multiplier `-|k|^2`.
pub fn laplacian(field: &VectorField) -> VectorField {
    let table = spectral::modes(&field.grid);
    apply_multiplier(field, 1, |_, k| Complex64::new(-table.k2[k], 0.0))
}

/// Divergence of a `d`-component field.
pub fn divergence(field: &VectorField) -> Result<ScalarField> {
    let d = field.grid.d;
    if field.comps() != d {
        return Err(Error::InvalidInput("divergence needs d components".into()));
    }
    let jac = gradient(field);
    let mut values = vec![0.0; field.grid.len()];
    for a in 0..d {
        for (v, x) in values.iter_mut().zip(jac.components[a * d + a].iter()) {
            *v += x;
        }
    }
    Ok(ScalarField {
        grid: field.grid,
        values,
    })
}

/// Value of the trigonometric interpolant at an arbitrary point.
pub fn evaluate_at(field: &VectorField, x: &[f64]) -> Vec<f64> {
    FieldSpectrum::new(field).value(x)
}

/// Value and spatial derivatives of a field at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialJet {
    pub value: Vec<f64>,
    /// `∂_a f_c` at index `c·d + a`.
    pub gradient: Vec<f64>,
    /// `∂_a ∂_b f_c` at index `(c·d + a)·d + b`.
    pub hessian: Vec<f64>,
}

/// Cached spectrum of a field for repeated off-grid evaluation.
#[derive(Clone, Debug)]
pub struct FieldSpectrum {
    grid: GridSpec,
    spectra: Vec<Vec<Complex64>>,
}

struct AxisFactors {
    e: Vec<Complex64>,
    de: Vec<Complex64>,
    dde: Vec<Complex64>,
}

impl FieldSpectrum {
    pub fn new(field: &VectorField) -> Self {
        let scale = 1.0 / field.grid.len() as f64;
        let spectra = field
            .components
            .iter()
            .map(|c| {
                spectral::forward(&field.grid, c)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect()
            })
            .collect();
        Self {
            grid: field.grid,
            spectra,
        }
    }

    fn factors(&self, x: &[f64]) -> Vec<AxisFactors> {
        let n = self.grid.n;
        let base = 2.0 * PI / self.grid.l;
        (0..self.grid.d)
            .map(|a| {
                let mut e = Vec::with_capacity(n);
                let mut de = Vec::with_capacity(n);
                let mut dde = Vec::with_capacity(n);
                for i in 0..n {
                    let k = base * spectral::wavenumber(i, n) as f64;
                    let phase = k * x[a];
                    if i == n / 2 {
                        let c = Complex64::new(phase.cos(), 0.0);
                        e.push(c);
                        de.push(Complex64::new(0.0, 0.0));
                        dde.push(c * (-k * k));
                    } else {
                        let c = Complex64::from_polar(1.0, phase);
                        e.push(c);
                        de.push(c * Complex64::new(0.0, k));
                        dde.push(c * (-k * k));
                    }
                }
                AxisFactors { e, de, dde }
            })
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let f = self.factors(x);
        let n = self.grid.n;
        let d = self.grid.d;
        let mut idx = [0usize; 3];
        self.spectra
            .iter()
            .map(|spec| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, coeff) in spec.iter().enumerate() {
                    unravel(k, n, d, &mut idx);
                    let mut w = *coeff;
                    for a in 0..d {
                        w *= f[a].e[idx[a]];
                    }
                    acc += w;
                }
                acc.re
            })
            .collect()
    }

    pub fn jet(&self, x: &[f64]) -> SpatialJet {
        let f = self.factors(x);
        let n = self.grid.n;
        let d = self.grid.d;
        let comps = self.spectra.len();
        let mut value = vec![0.0; comps];
        let mut gradient = vec![0.0; comps * d];
        let mut hessian = vec![0.0; comps * d * d];
        let mut idx = [0usize; 3];
        for (c, spec) in self.spectra.iter().enumerate() {
            let mut v = Complex64::new(0.0, 0.0);
            let mut g = [Complex64::new(0.0, 0.0); 3];
            let mut h = [Complex64::new(0.0, 0.0); 9];
            for (k, coeff) in spec.iter().enumerate() {
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                unravel(k, n, d, &mut idx);
                let mut base = *coeff;
                for a in 0..d {
                    base *= f[a].e[idx[a]];
                }
                v += base;
                for a in 0..d {
                    let mut ga = *coeff;
                    for b in 0..d {
                        ga *= if a == b { f[b].de[idx[b]] } else { f[b].e[idx[b]] };
                    }
                    g[a] += ga;
                    for b in 0..d {
                        let mut hab = *coeff;
                        for e in 0..d {
                            hab *= if a == b && e == a {
                                f[e].dde[idx[e]]
                            } else if e == a || e == b {
                                f[e].de[idx[e]]
                            } else {
                                f[e].e[idx[e]]
                            };
                        }
                        h[a * d + b] += hab;
                    }
                }
            }
            value[c] = v.re;
            for a in 0..d {
                gradient[c * d + a] = g[a].re;
                for b in 0..d {
                    hessian[(c * d + a) * d + b] = h[a * d + b].re;
                }
            }
        }
        SpatialJet {
            value,
            gradient,
            hessian,
        }
    }
}

/// One real Fourier mode `cos_coeff·cos(k·x) + sin_coeff·sin(k·x)` per component.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMode {
    pub k: Vec<i64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

/// A real trigonometric polynomial in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    pub grid: GridSpec,
    pub comps: usize,
    pub modes: Vec<TrigMode>,
}

impl TrigPolynomial {
    /// Seeded random polynomial with modes `|k|_∞ ≤ kmax`, `d` components.
    pub fn random(grid: GridSpec, seed: u64, kmax: usize, amplitude: f64) -> Result<Self> {
        Self::random_with_components(grid, grid.d, seed, kmax, amplitude)
    }

    pub fn random_with_components(
        grid: GridSpec,
        comps: usize,
        seed: u64,
        kmax: usize,
        amplitude: f64,
    ) -> Result<Self> {
        if kmax >= grid.n / 2 {
            return Err(Error::Resolution(format!(
                "kmax {kmax} aliases on an n = {} grid (needs kmax < n/2)",
                grid.n
            )));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidInput(format!("amplitude {amplitude} must be >= 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = grid.d;
        let km = kmax as i64;
        let side = 2 * kmax + 1;
        let mut modes = Vec::new();
        for flat in 0..side.pow(d as u32) {
            let mut rem = flat;
            let mut k = vec![0i64; d];
            for a in (0..d).rev() {
                k[a] = (rem % side) as i64 - km;
                rem /= side;
            }
            // Keep one representative of each ±k pair.
            match k.iter().find(|&&v| v != 0) {
                Some(&first) if first < 0 => continue,
                _ => {}
            }
            let zero = k.iter().all(|&v| v == 0);
            let k2: i64 = k.iter().map(|v| v * v).sum();
            let weight = amplitude / (1.0 + k2 as f64);
            let mut cos = Vec::with_capacity(comps);
            let mut sin = Vec::with_capacity(comps);
            for _ in 0..comps {
                cos.push(weight * rng.gen_range(-1.0..1.0));
                let s = weight * rng.gen_range(-1.0..1.0);
                sin.push(if zero { 0.0 } else { s });
            }
            modes.push(TrigMode { k, cos, sin });
        }
        Ok(Self { grid, comps, modes })
    }

    /// Σ |coefficients| over all modes and components, an upper bound on the sup norm.
    pub fn coefficient_sum(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let s: f64 = m
                    .cos
                    .iter()
                    .zip(m.sin.iter())
                    .map(|(a, b)| a * a + b * b)
                    .sum();
                // Per mode the vector |a cos + b sin| is at most sqrt(|a|^2 + |b|^2).
                s.sqrt()
            })
            .sum()
    }

    fn phys(&self, k: &[i64]) -> Vec<f64> {
        let base = 2.0 * PI / self.grid.l;
        k.iter().map(|&v| base * v as f64).collect()
    }

    /// Closed-form value and derivatives at a point.
    pub fn jet(&self, x: &[f64]) -> SpatialJet {
        let d = self.grid.d;
        let c = self.comps;
        let mut value = vec![0.0; c];
        let mut gradient = vec![0.0; c * d];
        let mut hessian = vec![0.0; c * d * d];
        for m in &self.modes {
            let k = self.phys(&m.k);
            let phase: f64 = k.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            let (s, co) = phase.sin_cos();
            for comp in 0..c {
                let (a, b) = (m.cos[comp], m.sin[comp]);
                value[comp] += a * co + b * s;
                let first = -a * s + b * co;
                let second = -(a * co + b * s);
                for i in 0..d {
                    gradient[comp * d + i] += first * k[i];
                    for j in 0..d {
                        hessian[(comp * d + i) * d + j] += second * k[i] * k[j];
                    }
                }
            }
        }
        SpatialJet {
            value,
            gradient,
            hessian,
        }
    }

    pub fn sample(&self) -> VectorField {
        let grid = self.grid;
        let mut components = vec![vec![0.0; grid.len()]; self.comps];
        for i in 0..grid.len() {
            let x = grid.coords(i);
            let v = self.jet_value(&x[..grid.d]);
            for (c, val) in v.into_iter().enumerate() {
                components[c][i] = val;
            }
        }
        VectorField { grid, components }
    }

    fn jet_value(&self, x: &[f64]) -> Vec<f64> {
        let mut value = vec![0.0; self.comps];
        for m in &self.modes {
            let k = self.phys(&m.k);
            let phase: f64 = k.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            let (s, co) = phase.sin_cos();
            for (comp, v) in value.iter_mut().enumerate() {
                *v += m.cos[comp] * co + m.sin[comp] * s;
            }
        }
        value
    }
}

/// Seeded band-limited random field with `d` components.
pub fn make_trig_field(grid: GridSpec, seed: u64, kmax: usize, amplitude: f64) -> Result<VectorField> {
    Ok(TrigPolynomial::random(grid, seed, kmax, amplitude)?.sample())
}

const MAGIC: &[u8; 4] = b"BFLD";
const VERSION: u8 = 1;

/// Serialises a field as a BFLD snapshot.
pub fn encode_snapshot(field: &VectorField) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + 8 * field.comps() * field.grid.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(field.grid.d as u32).to_le_bytes());
    out.extend_from_slice(&(field.grid.n as u32).to_le_bytes());
    out.extend_from_slice(&field.grid.l.to_le_bytes());
    out.extend_from_slice(&(field.comps() as u32).to_le_bytes());
    for c in &field.components {
        for v in c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<VectorField> {
    let bad = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 25 || &bytes[..4] != MAGIC {
        return Err(bad("missing BFLD header"));
    }
    if bytes[4] != VERSION {
        return Err(bad(&format!("unsupported snapshot version {}", bytes[4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let d = u32_at(5);
    let n = u32_at(9);
    let l = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let comps = u32_at(21);
    let grid = GridSpec::new(d, n, l)?;
    let expected = 25 + 8 * comps * grid.len();
    if bytes.len() != expected || comps == 0 {
        return Err(bad(&format!(
            "snapshot has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut components = Vec::with_capacity(comps);
    let mut offset = 25;
    for _ in 0..comps {
        let mut c = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            c.push(f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()));
            offset += 8;
        }
        components.push(c);
    }
    VectorField::new(grid, components)
}

/// Writes a snapshot through a temporary file and an atomic rename.
pub fn write_snapshot(path: &Path, field: &VectorField) -> Result<()> {
    let tmp = path.with_extension("bfld.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_snapshot(field))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<VectorField> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(1, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(4, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 12, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 1.0).is_err());
        assert!(GridSpec::new(2, 16, 0.0).is_err());
        assert!(GridSpec::new(2, 16, f64::INFINITY).is_err());
        assert!(GridSpec::new(3, 8, 1.0).is_ok());
    }

    #[test]
    fn zero_amplitude_is_zero() {
        let f = make_trig_field(GridSpec::new(2, 16, 3.0).unwrap(), 5, 3, 0.0).unwrap();
        assert!(f.components.iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn generator_is_deterministic() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let a = make_trig_field(g, 11, 4, 1.0).unwrap();
        let b = make_trig_field(g, 11, 4, 1.0).unwrap();
        assert_eq!(a, b);
        let c = make_trig_field(g, 12, 4, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_aliasing_kmax() {
        assert!(matches!(
            make_trig_field(grid1(16), 1, 8, 1.0),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn sup_bounded_by_coefficient_sum() {
        let p = TrigPolynomial::random(grid1(64), 7, 4, 1.0).unwrap();
        let f = p.sample();
        let sup = (0..64).map(|i| f.magnitude_at(i)).fold(0.0, f64::max);
        // Independent bound: Σ over modes of sqrt(a² + b²) from the stored coefficients.
        let mut bound = 0.0;
        for m in &p.modes {
            bound += (m.cos[0].powi(2) + m.sin[0].powi(2)).sqrt();
        }
        assert!(sup <= bound + 1e-14);
        assert!(sup > 0.0);
    }

    #[test]
    fn generator_has_no_tail() {
        let g = GridSpec::new(2, 32, 5.0).unwrap();
        let f = make_trig_field(g, 3, 4, 2.0).unwrap();
        let table = spectral::modes(&g);
        for c in &f.components {
            let spec = spectral::forward(&g, c);
            for (k, v) in spec.iter().enumerate() {
                if table.kmax[k] > 4 {
                    assert!(v.norm() / g.len() as f64 <= 1e-13 * 2.0);
                }
            }
        }
    }

    #[test]
    fn sin_derivatives() {
        let l = 3.0;
        let g = GridSpec::new(1, 32, l).unwrap();
        let w = 2.0 * PI / l;
        let f = ScalarField::from_fn(g, |x| (w * x[0]).sin());
        let grad = f.gradient();
        let lap = f.laplacian();
        for i in 0..32 {
            let x = g.coords(i)[0];
            assert!((grad.components[0][i] - w * (w * x).cos()).abs() < 1e-12);
            assert!((lap.values[i] + w * w * (w * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        let f = VectorField::constant(g, &[1.5, -2.0, 0.25]);
        for c in gradient(&f).components.iter().chain(laplacian(&f).components.iter()) {
            assert!(c.iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn gradient_matches_sixth_order_differences() {
        let g = grid1(256);
        let f = make_trig_field(g, 9, 6, 1.0).unwrap();
        let grad = gradient(&f);
        let h = g.h();
        let v = &f.components[0];
        let at = |i: i64| v[i.rem_euclid(256) as usize];
        let mut worst: f64 = 0.0;
        for i in 0..256i64 {
            let fd = (-at(i - 3) + 9.0 * at(i - 2) - 45.0 * at(i - 1) + 45.0 * at(i + 1)
                - 9.0 * at(i + 2)
                + at(i + 3))
                / (60.0 * h);
            worst = worst.max((fd - grad.components[0][i as usize]).abs());
        }
        // Truncation error of the stencil: h^6/140 · max|f^(7)| ≤ h^6/140 · 6^7 · Σ|coeffs|.
        assert!(worst < h.powi(6) / 140.0 * 6f64.powi(7) * 2.0);
    }

    #[test]
    fn laplacian_is_divergence_of_gradient() {
        let g = GridSpec::new(2, 16, 4.0).unwrap();
        for seed in 0..20 {
            let f = make_trig_field(g, seed, 5, 1.0).unwrap().component(0);
            let lap = f.laplacian();
            let div = divergence(&f.gradient()).unwrap();
            let scale = lap.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in lap.values.iter().zip(div.values.iter()) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn evaluate_at_nodes_and_off_grid() {
        let g = grid1(32);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        assert!((f.evaluate_at(&[PI / 4.0]) - (PI / 4.0).sin()).abs() < 1e-12);
        let r = make_trig_field(GridSpec::new(2, 16, 3.0).unwrap(), 4, 7, 1.0).unwrap();
        let spec = FieldSpectrum::new(&r);
        for i in [0usize, 17, 100, 255] {
            let x = r.grid.coords(i);
            let v = spec.value(&x[..2]);
            assert!((v[0] - r.components[0][i]).abs() < 1e-13);
        }
        let c = ScalarField::from_fn(g, |_| 2.5);
        assert!((c.evaluate_at(&[1.234]) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn jet_matches_closed_form() {
        let g = GridSpec::new(2, 32, 2.5).unwrap();
        let p = TrigPolynomial::random(g, 21, 5, 1.0).unwrap();
        let spec = FieldSpectrum::new(&p.sample());
        let x = [0.37, 1.91];
        let a = spec.jet(&x);
        let b = p.jet(&x);
        for (u, v) in a
            .value
            .iter()
            .chain(a.gradient.iter())
            .chain(a.hessian.iter())
            .zip(b.value.iter().chain(b.gradient.iter()).chain(b.hessian.iter()))
        {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn hessian_trace_is_laplacian() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        let f = make_trig_field(g, 2, 3, 1.0).unwrap();
        let h = hessian(&f);
        let lap = laplacian(&f);
        for c in 0..3 {
            for i in 0..g.len() {
                let tr: f64 = (0..3).map(|a| h.components[(c * 3 + a) * 3 + a][i]).sum();
                assert!((tr - lap.components[c][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn time_derivative_is_exact_on_quadratics() {
        let g = grid1(8);
        let frames = (0..5)
            .map(|k| {
                let t = 0.1 * k as f64;
                VectorField::constant(g, &[t * t])
            })
            .collect();
        let traj = Trajectory::new(g, 0.0, 0.1, frames).unwrap();
        let dt = traj.time_derivative().unwrap();
        for k in 0..5 {
            assert!((dt.frames[k].components[0][0] - 0.2 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = GridSpec::new(2, 8, 1.25).unwrap();
        let f = make_trig_field(g, 3, 2, 1.0).unwrap();
        let bytes = encode_snapshot(&f);
        assert_eq!(&bytes[..4], b"BFLD");
        assert_eq!(decode_snapshot(&bytes).unwrap(), f);
        let mut bad = bytes.clone();
        bad.pop();
        assert!(decode_snapshot(&bad).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bfld");
        write_snapshot(&path, &f).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), f);
    }
}
