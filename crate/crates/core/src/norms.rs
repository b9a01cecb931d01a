//! Sup norms, Hölder seminorms, the K-constant calculus and interpolation gaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::{gradient, hessian, GridSpec, Trajectory, VectorField};
use crate::forcing::Forcing;
use crate::spectral::unravel;
use crate::{Error, Result};

/// Largest pointwise Euclidean magnitude.
pub fn sup_norm(field: &VectorField) -> f64 {
    (0..field.grid.len())
        .map(|i| field.magnitude_at(i))
        .fold(0.0, f64::max)
}

pub fn gradient_sup(field: &VectorField) -> f64 {
    sup_norm(&gradient(field))
}

pub fn hessian_sup(field: &VectorField) -> f64 {
    sup_norm(&hessian(field))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderMode {
    Isotropic,
    Parabolic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderOptions {
    /// Exhaustive evaluation when the unordered pair count is at most this.
    pub max_exhaustive_pairs: u64,
    /// Pair budget for the stratified sampler.
    pub sampled_pairs: usize,
    pub seed: u64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            max_exhaustive_pairs: 1 << 24,
            sampled_pairs: 200_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub mode: HolderMode,
    pub value: f64,
    pub pairs: u64,
    /// Sampled estimates are lower bounds of the continuum seminorm.
    pub exhaustive: bool,
}

/// Scattered space-time samples with Euclidean spatial distance.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub comps: usize,
    pub times: Vec<f64>,
    /// `len · dim` coordinates.
    pub coords: Vec<f64>,
    /// `len · comps` values.
    pub values: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, comps: usize) -> Self {
        Self {
            dim,
            comps,
            times: Vec::new(),
            coords: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, x: &[f64], value: &[f64]) {
        self.times.push(t);
        self.coords.extend_from_slice(&x[..self.dim]);
        self.values.extend_from_slice(&value[..self.comps]);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.values
            .chunks(self.comps)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn ratio(&self, i: usize, j: usize, alpha: f64, mode: HolderMode) -> f64 {
        let (d, c) = (self.dim, self.comps);
        let dx: f64 = (0..d)
            .map(|a| (self.coords[i * d + a] - self.coords[j * d + a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let dt = (self.times[i] - self.times[j]).abs();
        let den = match mode {
            HolderMode::Isotropic => {
                if dt > 0.0 {
                    return 0.0;
                }
                dx.powf(alpha)
            }
            HolderMode::Parabolic => dx.powf(alpha) + dt.powf(alpha / 2.0),
        };
        if den == 0.0 {
            return 0.0;
        }
        let diff: f64 = (0..c)
            .map(|k| (self.values[i * c + k] - self.values[j * c + k]).powi(2))
            .sum::<f64>()
            .sqrt();
        diff / den
    }
}

/// Sample sets accepted by [`holder_seminorm`].
#[derive(Clone, Copy, Debug)]
pub enum HolderSamples<'a> {
    Field(&'a VectorField),
    Trajectory(&'a Trajectory),
    Points(&'a PointSet),
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("Hölder exponent {alpha} not in (0, 1]")));
    }
    Ok(())
}

/// Sampled values on a uniform space-time lattice over a periodic grid.
trait Lattice: Sync {
    fn grid(&self) -> GridSpec;
    fn frames(&self) -> usize;
    fn dt(&self) -> f64;
    /// Euclidean magnitude of `f(i, p) − f(j, q)`.
    fn diff(&self, i: usize, p: usize, j: usize, q: usize) -> f64;
}

struct FrameLattice<'a> {
    frames: Vec<&'a VectorField>,
    dt: f64,
}

impl Lattice for FrameLattice<'_> {
    fn grid(&self) -> GridSpec {
        self.frames[0].grid
    }
    fn frames(&self) -> usize {
        self.frames.len()
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn diff(&self, i: usize, p: usize, j: usize, q: usize) -> f64 {
        let (a, b) = (self.frames[i], self.frames[j]);
        a.components
            .iter()
            .zip(b.components.iter())
            .map(|(x, y)| (x[p] - y[q]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

struct SeparableLattice<'a> {
    profile: &'a VectorField,
    thetas: Vec<f64>,
    dt: f64,
}

impl Lattice for SeparableLattice<'_> {
    fn grid(&self) -> GridSpec {
        self.profile.grid
    }
    fn frames(&self) -> usize {
        self.thetas.len()
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn diff(&self, i: usize, p: usize, j: usize, q: usize) -> f64 {
        let (s, r) = (self.thetas[i], self.thetas[j]);
        self.profile
            .components
            .iter()
            .map(|x| (s * x[p] - r * x[q]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Periodic length of an integer displacement.
fn displacement_length(grid: &GridSpec, delta: &[i64]) -> f64 {
    let n = grid.n as i64;
    let h = grid.h();
    delta
        .iter()
        .map(|&v| {
            let m = v.rem_euclid(n);
            let m = m.min(n - m) as f64 * h;
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

struct LatticeResult {
    /// Best ratio among pairs whose later frame is `k`.
    by_frame: Vec<f64>,
    pairs: u64,
    exhaustive: bool,
}

fn lattice_pair_count(lat: &dyn Lattice) -> u128 {
    let p = lat.grid().len() as u128;
    let f = lat.frames() as u128;
    f * p * (p - 1) / 2 + f * (f - 1) / 2 * p * p
}

fn lattice_exhaustive(lat: &dyn Lattice, alpha: f64) -> Vec<f64> {
    let grid = lat.grid();
    let (n, d, len) = (grid.n, grid.d, grid.len());
    let frames = lat.frames();
    // Spatial term per displacement, indexed like the grid.
    let spatial: Vec<f64> = (0..len)
        .map(|flat| {
            let mut idx = [0usize; 3];
            unravel(flat, n, d, &mut idx);
            let delta: Vec<i64> = idx[..d].iter().map(|&v| v as i64).collect();
            displacement_length(&grid, &delta).powf(alpha)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..frames)
        .flat_map(|j| (0..=j).map(move |i| (i, j)))
        .collect();
    let best: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let tau = (j - i) as f64 * lat.dt();
            let time_term = tau.powf(alpha / 2.0);
            let mut local: f64 = 0.0;
            let mut idx = [0usize; 3];
            let mut shift = [0i64; 3];
            for delta in 0..len {
                if i == j && delta == 0 {
                    continue;
                }
                let den = spatial[delta] + time_term;
                unravel(delta, n, d, &mut idx);
                for a in 0..d {
                    shift[a] = idx[a] as i64;
                }
                for p in 0..len {
                    let q = grid.offset(p, &shift[..d]);
                    let r = lat.diff(i, p, j, q) / den;
                    if r > local {
                        local = r;
                    }
                }
            }
            (j, local)
        })
        .collect();
    let mut by_frame = vec![0.0; frames];
    for (j, v) in best {
        by_frame[j] = f64::max(by_frame[j], v);
    }
    by_frame
}

/// Dyadic strata over integer offsets: level 0 is offset 0, level ℓ covers `[2^{ℓ−1}, 2^ℓ)`.
fn dyadic_levels(max_offset: usize) -> Vec<(usize, usize)> {
    let mut levels = vec![(0, 0)];
    let mut lo = 1;
    while lo <= max_offset {
        let hi = (2 * lo - 1).min(max_offset);
        levels.push((lo, hi));
        lo *= 2;
    }
    levels
}

fn lattice_sampled(lat: &dyn Lattice, alpha: f64, opts: &HolderOptions) -> (Vec<f64>, u64) {
    let grid = lat.grid();
    let (n, d, len) = (grid.n, grid.d, grid.len());
    let frames = lat.frames();
    let space = dyadic_levels(n / 2);
    let time = dyadic_levels(frames - 1);
    let strata: Vec<(usize, (usize, usize), (usize, usize))> = space
        .iter()
        .flat_map(|&s| time.iter().map(move |&t| (s, t)))
        .filter(|(s, t)| !(s.1 == 0 && t.1 == 0))
        .enumerate()
        .map(|(k, (s, t))| (k, s, t))
        .collect();
    let quota = opts.sampled_pairs.div_ceil(strata.len().max(1)).max(1);
    let results: Vec<Vec<(usize, f64)>> = strata
        .par_iter()
        .map(|&(k, (slo, shi), (tlo, thi))| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut out: Vec<(usize, f64)> = Vec::new();
            let mut best_by: std::collections::BTreeMap<usize, f64> = Default::default();
            let mut shift = [0i64; 3];
            for _ in 0..quota {
                let tau = if thi == 0 { 0 } else { rng.gen_range(tlo..=thi) };
                let i = rng.gen_range(0..frames - tau);
                let j = i + tau;
                if shi == 0 {
                    shift = [0; 3];
                } else {
                    let axis = rng.gen_range(0..d);
                    for (a, s) in shift.iter_mut().enumerate().take(d) {
                        let mag = if a == axis {
                            rng.gen_range(slo..=shi) as i64
                        } else {
                            rng.gen_range(0..=shi) as i64
                        };
                        *s = if rng.gen_bool(0.5) { mag } else { -mag };
                    }
                }
                let p = rng.gen_range(0..len);
                let q = grid.offset(p, &shift[..d]);
                let den = displacement_length(&grid, &shift[..d]).powf(alpha)
                    + (tau as f64 * lat.dt()).powf(alpha / 2.0);
                if den == 0.0 {
                    continue;
                }
                let r = lat.diff(i, p, j, q) / den;
                let e = best_by.entry(j).or_insert(0.0);
                if r > *e {
                    *e = r;
                }
            }
            out.extend(best_by);
            out
        })
        .collect();
    let mut by_frame = vec![0.0; frames];
    for (j, v) in results.into_iter().flatten() {
        by_frame[j] = f64::max(by_frame[j], v);
    }
    (by_frame, (quota * strata.len()) as u64)
}

fn lattice_estimate(lat: &dyn Lattice, alpha: f64, opts: &HolderOptions) -> LatticeResult {
    let count = lattice_pair_count(lat);
    if count == 0 {
        return LatticeResult {
            by_frame: vec![0.0; lat.frames()],
            pairs: 0,
            exhaustive: true,
        };
    }
    if count <= opts.max_exhaustive_pairs as u128 {
        LatticeResult {
            by_frame: lattice_exhaustive(lat, alpha),
            pairs: count as u64,
            exhaustive: true,
        }
    } else {
        let (by_frame, pairs) = lattice_sampled(lat, alpha, opts);
        LatticeResult {
            by_frame,
            pairs,
            exhaustive: false,
        }
    }
}

fn prefix_max(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|&x| {
            acc = f64::max(acc, x);
            acc
        })
        .collect()
}

/// Seminorm over an explicit pair list.
pub fn holder_over_pairs(points: &PointSet, alpha: f64, mode: HolderMode, pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| points.ratio(i, j, alpha, mode))
        .fold(0.0, f64::max)
}

fn points_estimate(points: &PointSet, alpha: f64, mode: HolderMode, opts: &HolderOptions) -> HolderEstimate {
    let m = points.len() as u64;
    let count = m * m.saturating_sub(1) / 2;
    let (value, pairs, exhaustive) = if count <= opts.max_exhaustive_pairs {
        let v = (0..points.len())
            .into_par_iter()
            .map(|i| {
                (i + 1..points.len())
                    .map(|j| points.ratio(i, j, alpha, mode))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        (v, count, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let pairs: Vec<(usize, usize)> = (0..opts.sampled_pairs)
            .map(|_| (rng.gen_range(0..points.len()), rng.gen_range(0..points.len())))
            .collect();
        (holder_over_pairs(points, alpha, mode, &pairs), pairs.len() as u64, false)
    };
    HolderEstimate {
        alpha,
        mode,
        value,
        pairs,
        exhaustive,
    }
}

/// Isotropic or parabolic α-Hölder seminorm with periodic spatial distance on grids.
pub fn holder_seminorm(
    samples: HolderSamples<'_>,
    alpha: f64,
    mode: HolderMode,
    opts: &HolderOptions,
) -> Result<HolderEstimate> {
    check_alpha(alpha)?;
    match samples {
        HolderSamples::Field(f) => {
            let lat = FrameLattice {
                frames: vec![f],
                dt: 0.0,
            };
            let r = lattice_estimate(&lat, alpha, opts);
            Ok(HolderEstimate {
                alpha,
                mode,
                value: r.by_frame[0],
                pairs: r.pairs,
                exhaustive: r.exhaustive,
            })
        }
        HolderSamples::Trajectory(traj) => {
            if traj.is_empty() {
                return Err(Error::InvalidInput("empty trajectory".into()));
            }
            match mode {
                HolderMode::Parabolic => {
                    let lat = FrameLattice {
                        frames: traj.frames.iter().collect(),
                        dt: traj.dt,
                    };
                    let r = lattice_estimate(&lat, alpha, opts);
                    Ok(HolderEstimate {
                        alpha,
                        mode,
                        value: r.by_frame.iter().copied().fold(0.0, f64::max),
                        pairs: r.pairs,
                        exhaustive: r.exhaustive,
                    })
                }
                HolderMode::Isotropic => {
                    let mut out = HolderEstimate {
                        alpha,
                        mode,
                        value: 0.0,
                        pairs: 0,
                        exhaustive: true,
                    };
                    for f in &traj.frames {
                        let e = holder_seminorm(HolderSamples::Field(f), alpha, mode, opts)?;
                        out.value = out.value.max(e.value);
                        out.pairs += e.pairs;
                        out.exhaustive &= e.exhaustive;
                    }
                    Ok(out)
                }
            }
        }
        HolderSamples::Points(p) => {
            if p.len() < 2 {
                return Err(Error::InvalidInput("need at least two sample points".into()));
            }
            Ok(points_estimate(p, alpha, mode, opts))
        }
    }
}

/// Parabolic seminorm of `θ(s)·G(x)` on a uniform time grid, cumulative in the time index.
pub fn separable_parabolic_cumulative(
    profile: &VectorField,
    thetas: &[f64],
    dt: f64,
    alpha: f64,
    opts: &HolderOptions,
) -> Result<(Vec<f64>, bool)> {
    check_alpha(alpha)?;
    let lat = SeparableLattice {
        profile,
        thetas: thetas.to_vec(),
        dt,
    };
    let r = lattice_estimate(&lat, alpha, opts);
    Ok((prefix_max(&r.by_frame), r.exhaustive))
}

/// The quantities `K0, K1, K2, K_{2+α}, K` at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KConstants {
    pub t: f64,
    pub c: f64,
    pub alpha: f64,
    pub nu: f64,
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
}

impl KConstants {
    /// `K0² + K1 + K2^{2/3} + K_{2+α}^{2/(3+α)}`, i.e. `K / c²`.
    pub fn bracket(&self) -> f64 {
        assemble_bracket(self.k0, self.k1, self.k2, self.k2_alpha, self.alpha)
    }

    /// `K̄ = c·K`.
    pub fn kbar(&self) -> f64 {
        self.c * self.k
    }

    /// Same data with a different constant `c`.
    pub fn with_c(&self, c: f64) -> Self {
        Self {
            c,
            k: c * c * self.bracket(),
            ..*self
        }
    }
}

pub fn assemble_bracket(k0: f64, k1: f64, k2: f64, k2_alpha: f64, alpha: f64) -> f64 {
    k0 * k0 + k1 + k2.powf(2.0 / 3.0) + k2_alpha.powf(2.0 / (3.0 + alpha))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KOptions {
    /// Quadrature step; the number of panels on `[0, t]` is `ceil(t / dt_quad)`.
    pub dt_quad: f64,
    /// Fixed panel count, overriding `dt_quad`.
    pub quad_steps: Option<usize>,
    pub holder: HolderOptions,
    /// Factor applied to sampled seminorms entering the right-hand side.
    pub inflation: f64,
}

impl Default for KOptions {
    fn default() -> Self {
        Self {
            dt_quad: 1e-3,
            quad_steps: None,
            holder: HolderOptions::default(),
            inflation: 1.1,
        }
    }
}

/// Precomputed data terms for evaluating `K(t)` repeatedly.
#[derive(Clone, Debug)]
pub struct KCalculus {
    forcing: Forcing,
    c: f64,
    alpha: f64,
    opts: KOptions,
    u0_sup: f64,
    u0_grad: f64,
    u0_hess: f64,
    u0_hess_holder: f64,
}

impl KCalculus {
    pub fn new(u0: &VectorField, g: &Forcing, c: f64, alpha: f64, opts: KOptions) -> Result<Self> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("c = {c} must be >= 1")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha = {alpha} not in (0, 1)")));
        }
        if let Some(p) = g.profile() {
            if !p.same_shape(u0) {
                return Err(Error::InvalidInput("forcing and data differ in shape".into()));
            }
        }
        let hess = hessian(u0);
        let est = holder_seminorm(HolderSamples::Field(&hess), alpha, HolderMode::Isotropic, &opts.holder)?;
        let u0_hess_holder = if est.exhaustive { est.value } else { est.value * opts.inflation };
        Ok(Self {
            forcing: g.clone(),
            c,
            alpha,
            opts,
            u0_sup: sup_norm(u0),
            u0_grad: sup_norm(&gradient(u0)),
            u0_hess: sup_norm(&hess),
            u0_hess_holder,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    fn assemble(&self, t: f64, k0: f64, k1: f64, k2: f64, k2_alpha: f64) -> KConstants {
        let k = self.c * self.c * assemble_bracket(k0, k1, k2, k2_alpha, self.alpha);
        KConstants {
            t,
            c: self.c,
            alpha: self.alpha,
            nu: 1.0,
            k0,
            k1,
            k2,
            k2_alpha,
            k,
        }
    }

    /// Constants at every node of the uniform grid `s_k = k·h`, `k = 0..=steps`.
    pub fn series(&self, h: f64, steps: usize) -> Result<Vec<KConstants>> {
        let g = &self.forcing;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        let base2 = self.u0_hess + self.u0_sup * self.u0_grad + g.sup(0.0);
        if g.is_zero() {
            let k = self.assemble(0.0, self.u0_sup, self.u0_grad, base2, self.u0_hess_holder);
            return Ok(times.iter().map(|&t| KConstants { t, ..k }).collect());
        }
        let profile = g.profile().expect("non-zero forcing");
        let thetas: Vec<f64> = times.iter().map(|&s| g.factor(s)).collect();
        let (holder, exhaustive) = separable_parabolic_cumulative(profile, &thetas, h, self.alpha, &self.opts.holder)?;
        let inflate = if exhaustive { 1.0 } else { self.opts.inflation };
        let mut out = Vec::with_capacity(times.len());
        let (mut i0, mut i1, mut i2) = (0.0, 0.0, 0.0);
        let f0 = |s: f64| g.sup(s);
        let f1 = |s: f64| g.grad_sup(s);
        let f2 = |s: f64| g.hess_sup(s) + g.dt_sup(s);
        for (k, &t) in times.iter().enumerate() {
            if k > 0 {
                let s = times[k - 1];
                i0 += 0.5 * h * (f0(s) + f0(t));
                i1 += 0.5 * h * (f1(s) + f1(t));
                i2 += 0.5 * h * (f2(s) + f2(t));
            }
            let vals = [i0, i1, i2, holder[k]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-integrable forcing near t = {t}")));
            }
            out.push(self.assemble(
                t,
                self.u0_sup + i0,
                self.u0_grad + i1,
                base2 + i2,
                self.u0_hess_holder + inflate * holder[k],
            ));
        }
        Ok(out)
    }

    /// Constants at `t` using `steps` quadrature panels.
    pub fn at_with_steps(&self, t: f64, steps: usize) -> Result<KConstants> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("time {t} must be >= 0")));
        }
        if t == 0.0 || self.forcing.is_zero() {
            let mut k = self.series(0.0, 0)?[0];
            k.t = t;
            return Ok(k);
        }
        let steps = steps.max(1);
        Ok(*self.series(t / steps as f64, steps)?.last().expect("non-empty series"))
    }

    pub fn at(&self, t: f64) -> Result<KConstants> {
        let steps = self
            .opts
            .quad_steps
            .unwrap_or_else(|| (t / self.opts.dt_quad).ceil().max(1.0) as usize);
        self.at_with_steps(t, steps)
    }
}

/// The K-constants at time `t` for data `u0` and source `g`.
pub fn compute_k_constants(
    u0: &VectorField,
    g: &Forcing,
    t: f64,
    c: f64,
    alpha: f64,
    opts: &KOptions,
) -> Result<KConstants> {
    KCalculus::new(u0, g, c, alpha, *opts)?.at(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationVariant {
    Space,
    Spacetime,
}

/// Which constant multiplies the space-variant right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolationConstant {
    /// `‖u‖_α ≤ ‖u‖^{1−α}‖∇u‖^α` exactly as commonly stated.
    AsStated,
    /// With the factor `2^{1−α}` that the two-point argument actually yields.
    Corrected,
}

/// RHS − LHS of the Hölder interpolation inequality.
pub fn interpolation_gap(
    samples: HolderSamples<'_>,
    alpha: f64,
    variant: InterpolationVariant,
    constant: InterpolationConstant,
    opts: &HolderOptions,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} not in (0, 1)")));
    }
    match (variant, samples) {
        (InterpolationVariant::Space, HolderSamples::Field(f)) => {
            let lhs = holder_seminorm(samples, alpha, HolderMode::Isotropic, opts)?.value;
            let factor = match constant {
                InterpolationConstant::AsStated => 1.0,
                InterpolationConstant::Corrected => 2f64.powf(1.0 - alpha),
            };
            let rhs = factor * sup_norm(f).powf(1.0 - alpha) * gradient_sup(f).powf(alpha);
            Ok(rhs - lhs)
        }
        (InterpolationVariant::Spacetime, HolderSamples::Trajectory(traj)) => {
            let lhs = holder_seminorm(samples, alpha, HolderMode::Parabolic, opts)?.value;
            let u = traj.frames.iter().map(sup_norm).fold(0.0, f64::max);
            let du = traj.frames.iter().map(gradient_sup).fold(0.0, f64::max);
            let dt = traj.time_derivative()?.frames.iter().map(sup_norm).fold(0.0, f64::max);
            let rhs = 2.0 * (u.powf(1.0 - alpha) * du.powf(alpha) + u.powf(1.0 - alpha / 2.0) * dt.powf(alpha / 2.0));
            Ok(rhs - lhs)
        }
        _ => Err(Error::InvalidInput(
            "space variant takes a field, space-time variant a trajectory".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_trig_field;
    use crate::forcing::Modulation;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn line(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    fn sin_field(n: usize) -> VectorField {
        VectorField::from_fn(line(n, TAU), 1, |x, o| o[0] = x[0].sin())
    }

    /// Brute-force seminorm over all node pairs, written independently of the lattice engine.
    fn brute_isotropic(f: &VectorField, alpha: f64) -> f64 {
        let g = f.grid;
        let mut best: f64 = 0.0;
        for p in 0..g.len() {
            for q in 0..p {
                let dist = g.node_distance(p, q);
                let diff: f64 = f
                    .components
                    .iter()
                    .map(|c| (c[p] - c[q]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(diff / dist.powf(alpha));
            }
        }
        best
    }

    #[test]
    fn sup_norm_basics() {
        assert_eq!(sup_norm(&VectorField::zeros(line(8, 1.0), 2)), 0.0);
        assert!((sup_norm(&sin_field(16)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_against_oversampled_evaluation() {
        let g = line(32, TAU);
        let p = crate::fields::TrigPolynomial::random(g, 8, 6, 1.0).unwrap();
        let f = p.sample();
        let dense = (0..256)
            .map(|i| p.jet(&[TAU * i as f64 / 256.0]).value[0].abs())
            .fold(0.0, f64::max);
        assert!((sup_norm(&f) - dense).abs() <= 1e-3 * dense + 0.05 * dense);
        assert!(sup_norm(&f) <= dense + 1e-14);
    }

    #[test]
    fn constant_has_zero_seminorm() {
        let f = VectorField::constant(GridSpec::new(2, 8, 1.0).unwrap(), &[3.0, 4.0]);
        let e = holder_seminorm(HolderSamples::Field(&f), 0.5, HolderMode::Isotropic, &HolderOptions::default()).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.exhaustive);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        for (d, n) in [(1, 32), (2, 8)] {
            let g = GridSpec::new(d, n, 2.5).unwrap();
            let f = make_trig_field(g, 4, 3, 1.0).unwrap();
            let e = holder_seminorm(HolderSamples::Field(&f), 0.4, HolderMode::Isotropic, &HolderOptions::default()).unwrap();
            let b = brute_isotropic(&f, 0.4);
            assert!((e.value - b).abs() <= 1e-13 * b);
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        let f = sin_field(8);
        for a in [0.0, -0.1, 1.5] {
            assert!(holder_seminorm(HolderSamples::Field(&f), a, HolderMode::Isotropic, &HolderOptions::default()).is_err());
        }
    }

    #[test]
    fn time_constant_trajectory_matches_frame() {
        let g = line(32, TAU);
        let f = make_trig_field(g, 2, 4, 1.0).unwrap();
        let traj = Trajectory::new(g, 0.0, 0.1, vec![f.clone(); 5]).unwrap();
        let opts = HolderOptions::default();
        let a = holder_seminorm(HolderSamples::Trajectory(&traj), 0.5, HolderMode::Parabolic, &opts).unwrap();
        let b = holder_seminorm(HolderSamples::Field(&f), 0.5, HolderMode::Isotropic, &opts).unwrap();
        assert!((a.value - b.value).abs() < 1e-14);
    }

    #[test]
    fn sin_half_refinement() {
        let opts = HolderOptions::default();
        let coarse = holder_seminorm(HolderSamples::Field(&sin_field(256)), 0.5, HolderMode::Isotropic, &opts).unwrap();
        let fine = holder_seminorm(HolderSamples::Field(&sin_field(4096)), 0.5, HolderMode::Isotropic, &opts).unwrap();
        assert!(fine.exhaustive);
        assert!((coarse.value - fine.value).abs() <= 0.02 * fine.value);
        // The two-point maximiser on the line gives 2 sin(x)/sqrt(2x) ≈ 1.2035 at x ≈ 1.1656.
        assert!((fine.value - 1.2035).abs() < 1e-3);
    }

    #[test]
    fn lipschitz_limit_from_below() {
        let g = line(512, TAU);
        let f = make_trig_field(g, 5, 8, 1.0).unwrap();
        let e = holder_seminorm(HolderSamples::Field(&f), 1.0, HolderMode::Isotropic, &HolderOptions::default()).unwrap();
        let lip = gradient_sup(&f);
        assert!(e.value <= lip * (1.0 + 1e-12));
        assert!(e.value >= 0.98 * lip);
    }

    #[test]
    fn sampled_is_a_lower_bound_of_exhaustive() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let f = make_trig_field(g, 1, 4, 1.0).unwrap();
        let full = holder_seminorm(HolderSamples::Field(&f), 0.5, HolderMode::Isotropic, &HolderOptions::default()).unwrap();
        let opts = HolderOptions {
            max_exhaustive_pairs: 10,
            sampled_pairs: 5000,
            seed: 3,
        };
        let sampled = holder_seminorm(HolderSamples::Field(&f), 0.5, HolderMode::Isotropic, &opts).unwrap();
        assert!(!sampled.exhaustive);
        assert!(sampled.value <= full.value * (1.0 + 1e-14));
        assert!(sampled.value >= 0.8 * full.value);
        let again = holder_seminorm(HolderSamples::Field(&f), 0.5, HolderMode::Isotropic, &opts).unwrap();
        assert_eq!(sampled.value, again.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn adding_pairs_never_lowers(values in proptest::collection::vec(-1.0f64..1.0, 12),
                                     extra in proptest::collection::vec((0usize..12, 0usize..12), 1..20)) {
            let mut pts = PointSet::new(1, 1);
            for (k, v) in values.iter().enumerate() {
                pts.push(0.1 * (k % 3) as f64, &[k as f64 * 0.3], &[*v]);
            }
            let base: Vec<(usize, usize)> = (0..11).map(|i| (i, i + 1)).collect();
            let mut more = base.clone();
            more.extend(extra);
            for mode in [HolderMode::Isotropic, HolderMode::Parabolic] {
                let a = holder_over_pairs(&pts, 0.5, mode, &base);
                let b = holder_over_pairs(&pts, 0.5, mode, &more);
                prop_assert!(b >= a);
            }
        }
    }

    #[test]
    fn k_constants_zero_data() {
        let g = line(16, TAU);
        let k = compute_k_constants(&VectorField::zeros(g, 1), &Forcing::Zero, 1.0, 1.0, 0.5, &KOptions::default()).unwrap();
        assert_eq!((k.k0, k.k1, k.k2, k.k2_alpha, k.k), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn k_constants_constant_data() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let u0 = VectorField::constant(g, &[3.0, 4.0]);
        let k = compute_k_constants(&u0, &Forcing::Zero, 0.7, 2.0, 0.5, &KOptions::default()).unwrap();
        assert_eq!(k.k0, 5.0);
        assert!(k.k1.abs() < 1e-13 && k.k2.abs() < 1e-12 && k.k2_alpha.abs() < 1e-12);
        assert!((k.k - 4.0 * 25.0 - 4.0 * (k.k1 + k.k2.powf(2.0 / 3.0) + k.k2_alpha.powf(2.0 / 3.5))).abs() < 1e-12);
        assert!((k.k - 100.0).abs() < 1e-6);
    }

    #[test]
    fn k_constants_sine() {
        let u0 = sin_field(128);
        let k = compute_k_constants(&u0, &Forcing::Zero, 0.3, 1.0, 0.5, &KOptions::default()).unwrap();
        assert!((k.k0 - 1.0).abs() < 1e-14);
        assert!((k.k1 - 1.0).abs() < 1e-12);
        assert!((k.k2 - 2.0).abs() < 1e-12);
        let dense = brute_isotropic(&u0, 0.5);
        assert!((k.k2_alpha - dense).abs() < 1e-12);
        let expect = 1.0 + 1.0 + 2f64.powf(2.0 / 3.0) + dense.powf(2.0 / 3.5);
        assert!((k.k - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_constants_are_time_independent() {
        let g = GridSpec::new(2, 16, 5.0).unwrap();
        let u0 = make_trig_field(g, 3, 4, 1.0).unwrap();
        let opts = KOptions::default();
        let a = compute_k_constants(&u0, &Forcing::Zero, 0.1, 1.5, 0.5, &opts).unwrap();
        let b = compute_k_constants(&u0, &Forcing::Zero, 3.0, 1.5, 0.5, &opts).unwrap();
        assert_eq!((a.k0, a.k1, a.k2, a.k2_alpha, a.k), (b.k0, b.k1, b.k2, b.k2_alpha, b.k));
    }

    #[test]
    fn k_constants_nondecreasing_with_forcing() {
        let g = line(32, TAU);
        let u0 = make_trig_field(g, 1, 3, 0.5).unwrap();
        let profile = make_trig_field(g, 2, 3, 0.3).unwrap();
        let src = Forcing::separable(
            profile,
            Modulation {
                mean: 0.2,
                amplitude: 1.0,
                omega: 5.0,
                phase: 0.0,
            },
        )
        .unwrap();
        let calc = KCalculus::new(&u0, &src, 1.0, 0.5, KOptions::default()).unwrap();
        let series = calc.series(0.01, 100).unwrap();
        for w in series.windows(2) {
            assert!(w[1].k0 >= w[0].k0 && w[1].k1 >= w[0].k1 && w[1].k2 >= w[0].k2);
            assert!(w[1].k2_alpha >= w[0].k2_alpha && w[1].k >= w[0].k);
        }
    }

    #[test]
    fn scaling_covariance_of_k() {
        // u0 → λu0(λx), g → λ²g(λ²t, λx) on a box shrunk by λ: K0 scales by λ, K by λ².
        let lambda = 2.0;
        let big = line(64, TAU);
        let small = line(64, TAU / lambda);
        let u0 = VectorField::from_fn(big, 1, |x, o| o[0] = x[0].sin() + 0.3 * (2.0 * x[0]).cos());
        let u0s = VectorField::from_fn(small, 1, |x, o| {
            let y = lambda * x[0];
            o[0] = lambda * (y.sin() + 0.3 * (2.0 * y).cos())
        });
        let opts = KOptions::default();
        let t = 0.0;
        let a = compute_k_constants(&u0, &Forcing::Zero, t, 1.0, 0.5, &opts).unwrap();
        let b = compute_k_constants(&u0s, &Forcing::Zero, t, 1.0, 0.5, &opts).unwrap();
        assert!((b.k0 - lambda * a.k0).abs() < 1e-12);
        assert!((b.k - lambda * lambda * a.k).abs() < 1e-9 * b.k);
    }

    #[test]
    fn interpolation_sine_literal_fails_corrected_holds() {
        let f = sin_field(4096);
        let opts = HolderOptions::default();
        let literal = interpolation_gap(
            HolderSamples::Field(&f),
            0.5,
            InterpolationVariant::Space,
            InterpolationConstant::AsStated,
            &opts,
        )
        .unwrap();
        let corrected = interpolation_gap(
            HolderSamples::Field(&f),
            0.5,
            InterpolationVariant::Space,
            InterpolationConstant::Corrected,
            &opts,
        )
        .unwrap();
        assert!(literal < -0.2);
        assert!(corrected >= 0.0);
    }

    #[test]
    fn interpolation_constant_is_zero_gap() {
        let g = line(16, 1.0);
        let f = VectorField::constant(g, &[2.0]);
        let gap = interpolation_gap(
            HolderSamples::Field(&f),
            0.5,
            InterpolationVariant::Space,
            InterpolationConstant::AsStated,
            &HolderOptions::default(),
        )
        .unwrap();
        assert!(gap.abs() < 1e-12);
    }

    #[test]
    fn interpolation_spacetime_holds_on_heat_flow() {
        let g = line(64, TAU);
        let u0 = make_trig_field(g, 9, 5, 1.0).unwrap();
        let traj = crate::heat::duhamel_forced_heat(&u0, &Forcing::Zero, 0.2, 0.01).unwrap();
        let gap = interpolation_gap(
            HolderSamples::Trajectory(&traj),
            0.5,
            InterpolationVariant::Spacetime,
            InterpolationConstant::AsStated,
            &HolderOptions::default(),
        )
        .unwrap();
        assert!(gap >= 0.0);
    }
}
