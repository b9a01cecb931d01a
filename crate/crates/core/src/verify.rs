//! Numerical checks of the scheme's stated inequalities, each summarised as a [`BoundReport`].

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::fields::{FieldSpectrum, SpatialJet, Trajectory};
use crate::heat::linear_fit;
use crate::norms::{gradient_sup, holder_seminorm, sup_norm, HolderMode, HolderOptions, HolderSamples, KConstants, PointSet};
use crate::scheme::IterationRecord;
use crate::transport::{cumulative_trapezoid, solve_transport, tol_mp, TransportProblem};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One inequality `lhs ≤ rhs` sampled along a series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Iterate index per entry, when entries come from several iterates.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub iterate: Vec<usize>,
    /// Smallest admissible constant making every entry hold.
    pub c_star: Option<f64>,
    /// `max lhs/rhs`, for bounds without a free constant.
    pub implied_constant: Option<f64>,
    pub verdict: Verdict,
    pub worst_t: f64,
    pub worst_ratio: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn ratio(l: f64, r: f64) -> f64 {
    if l == 0.0 {
        0.0
    } else if r > 0.0 {
        l / r
    } else {
        f64::INFINITY
    }
}

impl BoundReport {
    pub fn new(name: &str, times: Vec<f64>, lhs: Vec<f64>, rhs: Vec<f64>, tolerance: f64) -> Self {
        assert_eq!(times.len(), lhs.len());
        assert_eq!(lhs.len(), rhs.len());
        let mut worst = (f64::NAN, 0.0);
        let mut excess = f64::NEG_INFINITY;
        for ((t, l), r) in times.iter().zip(&lhs).zip(&rhs) {
            let q = ratio(*l, *r);
            if worst.0.is_nan() || q > worst.1 {
                worst = (*t, q);
            }
            excess = excess.max(l - r);
        }
        let pass = lhs.iter().all(|v| v.is_finite()) && (lhs.is_empty() || excess <= tolerance);
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            times,
            lhs,
            rhs,
            iterate: Vec::new(),
            c_star: None,
            implied_constant: None,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            worst_t: if worst.0.is_nan() { 0.0 } else { worst.0 },
            worst_ratio: worst.1,
            tolerance,
            seed: None,
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn slack(&self) -> Vec<f64> {
        self.rhs.iter().zip(&self.lhs).map(|(r, l)| r - l).collect()
    }

    pub fn min_slack(&self) -> f64 {
        self.slack().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Two-column `t,slack` table with 17 significant digits.
    pub fn slack_csv(&self) -> String {
        let mut out = String::from("t,slack\n");
        for (t, s) in self.times.iter().zip(self.slack()) {
            out.push_str(&format!("{t:.16e},{s:.16e}\n"));
        }
        out
    }
}

/// Smallest `c ≥ 1` with `lhs ≤ c^p·base` everywhere; `None` if no such `c` exists.
fn power_c_star(lhs: &[f64], base: &[f64], p: f64) -> Option<f64> {
    let mut need: f64 = 1.0;
    for (l, b) in lhs.iter().zip(base) {
        if *l <= 0.0 {
            continue;
        }
        if !(*b > 0.0) || !l.is_finite() {
            return None;
        }
        need = need.max((l / b).powf(1.0 / p));
    }
    Some(need)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformReport {
    pub sup: BoundReport,
    pub gradient: BoundReport,
    pub second_order: BoundReport,
    pub holder: BoundReport,
    pub heat_gradient: BoundReport,
}

impl UniformReport {
    pub fn reports(&self) -> [&BoundReport; 5] {
        [&self.sup, &self.gradient, &self.second_order, &self.holder, &self.heat_gradient]
    }

    /// Largest fitted constant over the sub-reports that carry one.
    pub fn c_star(&self) -> Option<f64> {
        [&self.gradient, &self.second_order, &self.holder]
            .iter()
            .map(|r| r.c_star)
            .try_fold(1.0_f64, |acc, c| c.map(|c| acc.max(c)))
    }

    pub fn passed(&self) -> bool {
        self.reports().iter().all(|r| r.passed())
    }
}

fn check_record_times(records: &[IterationRecord], ks: &[KConstants]) -> Result<()> {
    let Some(first) = records.first() else {
        return Err(Error::InvalidInput("no iteration records".into()));
    };
    if first.times.len() != ks.len() {
        return Err(Error::InvalidInput(format!(
            "{} K-constants for {} record times",
            ks.len(),
            first.times.len()
        )));
    }
    for (t, k) in first.times.iter().zip(ks) {
        if (t - k.t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::InvalidInput(format!("K-constants at t = {} do not match record time {t}", k.t)));
        }
    }
    Ok(())
}

/// Envelope over iterates: per time, the largest value and the iterate attaining it.
fn envelope(records: &[IterationRecord], pick: impl Fn(&IterationRecord) -> &Vec<f64>) -> (Vec<f64>, Vec<usize>) {
    let len = records[0].times.len();
    let mut vals = vec![0.0; len];
    let mut who = vec![0; len];
    for r in records {
        for (k, v) in pick(r).iter().enumerate() {
            if *v > vals[k] {
                vals[k] = *v;
                who[k] = r.m;
            }
        }
    }
    (vals, who)
}

/// Uniform bounds of every iterate against the K-constants on the record time grid.
pub fn check_uniform(records: &[IterationRecord], ks: &[KConstants], c: f64) -> Result<UniformReport> {
    check_record_times(records, ks)?;
    if !(c >= 1.0) {
        return Err(Error::InvalidInput(format!("c = {c} must be >= 1")));
    }
    let times = records[0].times.clone();
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let alpha = ks[0].alpha;
    let bracket: Vec<f64> = ks.iter().map(|k| k.bracket()).collect();
    let k0: Vec<f64> = ks.iter().map(|k| k.k0).collect();
    let scale = k0.iter().copied().fold(0.0, f64::max);

    let (lhs, who) = envelope(records, |r| &r.sup_u);
    let mut sup = BoundReport::new("uniform_sup", times.clone(), lhs.clone(), k0.clone(), tol_mp(dt, scale));
    sup.implied_constant = Some(lhs.iter().zip(&k0).map(|(l, r)| ratio(*l, *r)).fold(0.0, f64::max));
    sup.iterate = who;

    let (lhs, who) = envelope(records, |r| &r.sup_grad_u);
    let rhs: Vec<f64> = bracket.iter().map(|b| c * c * b).collect();
    let mut gradient = BoundReport::new("uniform_gradient", times.clone(), lhs.clone(), rhs, 0.0);
    gradient.c_star = power_c_star(&lhs, &bracket, 2.0);
    gradient.iterate = who;

    let (dtu, who_t) = envelope(records, |r| &r.sup_dt_u);
    let (hess, who_h) = envelope(records, |r| &r.sup_hess_u);
    let lhs: Vec<f64> = dtu.iter().zip(&hess).map(|(a, b)| a.max(*b)).collect();
    let who: Vec<usize> = (0..lhs.len()).map(|k| if dtu[k] >= hess[k] { who_t[k] } else { who_h[k] }).collect();
    let rhs: Vec<f64> = bracket.iter().map(|b| (c * c * c * b).powf(1.5)).collect();
    let base: Vec<f64> = bracket.iter().map(|b| b.powf(1.5)).collect();
    let mut second_order = BoundReport::new("uniform_second_order", times.clone(), lhs.clone(), rhs, 0.0);
    second_order.c_star = power_c_star(&lhs, &base, 4.5);
    second_order.iterate = who;

    let last = *ks.last().expect("non-empty");
    let t_end = *times.last().expect("non-empty");
    let expo = (3.0 + alpha) / 2.0;
    let lhs: Vec<f64> = records.iter().map(|r| r.holder_hess_u.max(r.holder_dt_u)).collect();
    let rhs = vec![(c * c * c * last.bracket()).powf(expo); lhs.len()];
    let base = vec![last.bracket().powf(expo); lhs.len()];
    let mut holder = BoundReport::new("uniform_holder", vec![t_end; lhs.len()], lhs.clone(), rhs, 0.0);
    holder.c_star = power_c_star(&lhs, &base, 3.0 * expo);
    holder.iterate = records.iter().map(|r| r.m).collect();

    let first = records.iter().find(|r| r.m == 0).unwrap_or(&records[0]);
    let k1: Vec<f64> = ks.iter().map(|k| k.k1).collect();
    let mut heat_gradient = BoundReport::new("heat_iterate_gradient", times, first.sup_grad_u.clone(), k1.clone(), 1e-8);
    heat_gradient.implied_constant = Some(first.sup_grad_u.iter().zip(&k1).map(|(l, r)| ratio(*l, *r)).fold(0.0, f64::max));
    heat_gradient.iterate = vec![first.m; heat_gradient.times.len()];

    let mut out = UniformReport {
        sup,
        gradient,
        second_order,
        holder,
        heat_gradient,
    };
    for r in [
        &mut out.sup,
        &mut out.gradient,
        &mut out.second_order,
        &mut out.holder,
        &mut out.heat_gradient,
    ] {
        r.params.insert("c".into(), c);
        r.params.insert("alpha".into(), alpha);
        r.params.insert("T".into(), t_end);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShortTimeReport {
    pub sup: BoundReport,
    pub gradient: BoundReport,
    /// `‖v^(1)_t‖ ≤ ∫_0^t ‖u^(0)‖‖∇u^(0)‖ ≤ K0·K·t`.
    pub first_increment: BoundReport,
    /// `max_t ‖v^(m)‖ / max_t ‖v^(m−1)‖` for `m ≥ 1`, indexed from `m = 1`.
    pub contraction_ratios: Vec<f64>,
    /// Fitted exponent of the sup bound over the fit range.
    pub sup_exponent: Option<f64>,
    /// Fitted exponent of the gradient bound over the fit range.
    pub gradient_exponent: Option<f64>,
    pub fit_time: f64,
    pub fit_range: (usize, usize),
}

impl ShortTimeReport {
    /// Ratios strictly decreasing over `m ∈ [lo, hi]`.
    pub fn ratios_decreasing(&self, lo: usize, hi: usize) -> bool {
        (lo.max(2)..=hi).all(|m| {
            let (a, b) = (self.contraction_ratios.get(m - 2), self.contraction_ratios.get(m - 1));
            matches!((a, b), (Some(a), Some(b)) if b < a)
        })
    }

    pub fn passed(&self) -> bool {
        self.sup.passed() && self.gradient.passed() && self.first_increment.passed()
    }
}

struct ShortEntries {
    times: Vec<f64>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    iterate: Vec<usize>,
}

fn short_entries(records: &[IterationRecord], k0: f64, bracket: f64, c: f64, expo: f64, grad: bool) -> ShortEntries {
    let k = c * c * bracket;
    let lead = if grad { c * k } else { c * k0 };
    let mut out = ShortEntries {
        times: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        iterate: Vec::new(),
    };
    for r in records.iter().filter(|r| r.m >= 1) {
        let edge = r.m as f64 / (c * k);
        let series = if grad { &r.sup_grad_v } else { &r.sup_v };
        for (t, v) in r.times.iter().zip(series) {
            if *t > edge * (1.0 + 1e-12) {
                break;
            }
            out.times.push(*t);
            out.lhs.push(*v);
            out.rhs.push(lead * (c * k * t / r.m as f64).powf(expo * r.m as f64));
            out.iterate.push(r.m);
        }
    }
    out
}

fn short_report(name: &str, e: ShortEntries, tol: f64) -> BoundReport {
    let mut rep = BoundReport::new(name, e.times, e.lhs, e.rhs, tol);
    rep.iterate = e.iterate;
    rep
}

/// Smallest `c ≥ 1` passing the windowed bound, by bisection on a doubling bracket.
fn fit_short_c(records: &[IterationRecord], k0: f64, bracket: f64, expo: f64, grad: bool, tol: f64) -> Option<f64> {
    let passes = |c: f64| {
        let e = short_entries(records, k0, bracket, c, expo, grad);
        e.lhs.iter().zip(&e.rhs).all(|(l, r)| l - r <= tol)
    };
    if passes(1.0) {
        return Some(1.0);
    }
    let mut hi = 2.0;
    while !passes(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    if hi == 2.0 {
        lo = 1.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Short-time increments against `cK0(cKt/m)^m` and `cK(cKt/m)^{βm}` inside `t ≤ m/cK(T)`.
pub fn check_short_time(records: &[IterationRecord], k_end: &KConstants, c: f64, beta: f64) -> Result<ShortTimeReport> {
    check_short_time_with_range(records, k_end, c, beta, (2, 8))
}

pub fn check_short_time_with_range(
    records: &[IterationRecord],
    k_end: &KConstants,
    c: f64,
    beta: f64,
    fit_range: (usize, usize),
) -> Result<ShortTimeReport> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::InvalidInput(format!("β = {beta} must lie in (0, 1/2)")));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidInput(format!("c = {c} must be >= 1")));
    }
    let Some(r0) = records.iter().find(|r| r.m == 0) else {
        return Err(Error::InvalidInput("records must include the heat iterate".into()));
    };
    if !records.iter().any(|r| r.m >= 1) {
        return Err(Error::InvalidInput("records must cover m >= 1".into()));
    }
    let times = &r0.times;
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let t_end = *times.last().expect("non-empty");
    let k0 = k_end.k0;
    let bracket = k_end.bracket();
    let k = c * c * bracket;
    let zero = records.iter().all(|r| r.m == 0 || r.max_v() == 0.0);
    if !zero && !(times.len() > 1 && 1.0 / (c * k) >= times[1]) {
        return Err(Error::Window(format!(
            "short-time window t <= 1/cK = {:e} holds no positive record time (dt = {dt:e})",
            1.0 / (c * k)
        )));
    }
    let scale = k0.max(1.0);
    let tol = tol_mp(dt, scale);
    let mut sup = short_report("short_time_sup", short_entries(records, k0, bracket, c, 1.0, false), tol);
    sup.c_star = fit_short_c(records, k0, bracket, 1.0, false, tol);
    let mut gradient = short_report("short_time_gradient", short_entries(records, k0, bracket, c, beta, true), tol);
    gradient.c_star = fit_short_c(records, k0, bracket, beta, true, tol);

    let integrand: Vec<f64> = r0.sup_u.iter().zip(&r0.sup_grad_u).map(|(a, b)| a * b).collect();
    let integral = cumulative_trapezoid(&integrand, dt);
    let mut first_increment = match records.iter().find(|r| r.m == 1) {
        Some(r1) => BoundReport::new("first_increment", times.clone(), r1.sup_v.clone(), integral.clone(), tol),
        None => BoundReport::new("first_increment", Vec::new(), Vec::new(), Vec::new(), tol),
    };
    first_increment.implied_constant = Some(
        integral
            .iter()
            .zip(times)
            .map(|(i, t)| ratio(*i, k0 * k * t))
            .fold(0.0, f64::max),
    );

    let maxima: Vec<f64> = {
        let mut ms: Vec<&IterationRecord> = records.iter().collect();
        ms.sort_by_key(|r| r.m);
        ms.iter().map(|r| r.max_v()).collect()
    };
    let contraction_ratios: Vec<f64> = maxima.windows(2).map(|w| ratio(w[1], w[0])).collect();

    // Fit at the last record time inside the window of the smallest fitted m.
    let edge = fit_range.0 as f64 / (c * k);
    let fit_index = times.iter().rposition(|t| *t <= edge.min(t_end) * (1.0 + 1e-12)).unwrap_or(0);
    let fit_time = times[fit_index];
    let fit = |grad: bool| -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in records.iter().filter(|r| r.m >= fit_range.0 && r.m <= fit_range.1) {
            let v = if grad { r.sup_grad_v[fit_index] } else { r.sup_v[fit_index] };
            let lead = if grad { c * k } else { c * k0 };
            if v > 0.0 && fit_time > 0.0 && lead > 0.0 {
                xs.push(r.m as f64 * (c * k * fit_time / r.m as f64).ln());
                ys.push((v / lead).ln());
            }
        }
        (xs.len() >= 2).then(|| linear_fit(&xs, &ys).0)
    };
    let sup_exponent = fit(false);
    let gradient_exponent = fit(true);

    let mut out = ShortTimeReport {
        sup,
        gradient,
        first_increment,
        contraction_ratios,
        sup_exponent,
        gradient_exponent,
        fit_time,
        fit_range,
    };
    for r in [&mut out.sup, &mut out.gradient, &mut out.first_increment] {
        r.params.insert("c".into(), c);
        r.params.insert("beta".into(), beta);
        r.params.insert("T".into(), t_end);
    }
    Ok(out)
}

/// `∫_0^{t_n} max_x |||C̄(r, x)||| dr` on the problem's frame grid.
pub fn amplification_exponent(p: &TransportProblem) -> Result<Vec<f64>> {
    let steps = p.validate()?;
    let rate: Vec<f64> = (0..=steps).map(|k| p.zeroth.sup_operator_norm(k)).collect();
    Ok(cumulative_trapezoid(&rate, p.dt))
}

/// Difference bound for two transport problems sharing their initial condition.
pub fn check_gronwall(p: &TransportProblem, pbar: &TransportProblem) -> Result<BoundReport> {
    let steps = p.validate()?;
    let steps_bar = pbar.validate()?;
    if p.u0 != pbar.u0 {
        return Err(Error::Precondition("the two problems must share the initial condition".into()));
    }
    if steps != steps_bar || (p.dt - pbar.dt).abs() > 1e-15 * p.dt {
        return Err(Error::InvalidInput("the two problems must share the time grid".into()));
    }
    let grid = p.u0.grid;
    let dt = p.dt;
    let phi = solve_transport(p)?;
    let phibar = solve_transport(pbar)?;
    let lhs: Vec<f64> = phibar.frames.iter().zip(&phi.frames).map(|(a, b)| sup_norm(&a.sub(b))).collect();
    let cum = amplification_exponent(pbar)?;
    let forcing: Vec<f64> = (0..=steps)
        .map(|k| {
            let drift = match (p.drift.at(grid, k, dt), pbar.drift.at(grid, k, dt)) {
                (None, None) => 0.0,
                (Some(b), None) | (None, Some(b)) => sup_norm(&b),
                (Some(b), Some(bb)) => sup_norm(&bb.sub(&b)),
            };
            let zeroth = match (p.zeroth.field_at(grid, k), pbar.zeroth.field_at(grid, k)) {
                (None, None) => 0.0,
                (Some(m), None) | (None, Some(m)) => m.sup_operator_norm(),
                (Some(m), Some(mb)) => mb.sub(&m).sup_operator_norm(),
            };
            let t = k as f64 * dt;
            let source = match (p.source.at(t), pbar.source.at(t)) {
                (None, None) => 0.0,
                (Some(f), None) | (None, Some(f)) => sup_norm(&f),
                (Some(f), Some(fb)) => sup_norm(&fb.sub(&f)),
            };
            let mut total = zeroth * sup_norm(&phi.frames[k]) + source;
            if drift > 0.0 {
                total += drift * gradient_sup(&phi.frames[k]);
            }
            total
        })
        .collect();
    let rhs: Vec<f64> = (0..=steps)
        .map(|n| {
            (1..=n)
                .map(|k| {
                    let a = forcing[k - 1] * (cum[n] - cum[k - 1]).exp();
                    let b = forcing[k] * (cum[n] - cum[k]).exp();
                    0.5 * dt * (a + b)
                })
                .sum()
        })
        .collect();
    let scale = lhs.iter().chain(rhs.iter()).copied().fold(0.0, f64::max);
    let mut rep = BoundReport::new("gronwall", phi.times(), lhs.clone(), rhs.clone(), tol_mp(dt, scale));
    rep.implied_constant = Some(lhs.iter().zip(&rhs).map(|(l, r)| ratio(*l, *r)).fold(0.0, f64::max));
    Ok(rep.param("T", p.horizon).param("dt", dt))
}

/// Value and first/second derivatives of a space-time field at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: Vec<f64>,
    /// `∂_a f_c` at `c·d + a`.
    pub gradient: Vec<f64>,
    /// `∂_a ∂_b f_c` at `(c·d + a)·d + b`.
    pub hessian: Vec<f64>,
    pub dt: Vec<f64>,
}

impl Jet {
    pub fn zeros(d: usize, comps: usize) -> Self {
        Self {
            value: vec![0.0; comps],
            gradient: vec![0.0; comps * d],
            hessian: vec![0.0; comps * d * d],
            dt: vec![0.0; comps],
        }
    }

    fn scaled(mut self, value: f64, space: f64, time: f64) -> Self {
        self.value.iter_mut().for_each(|v| *v *= value);
        self.gradient.iter_mut().for_each(|v| *v *= value * space);
        self.hessian.iter_mut().for_each(|v| *v *= value * space * space);
        self.dt.iter_mut().for_each(|v| *v *= value * time);
        self
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A field that can be evaluated with derivatives anywhere in its time span.
pub trait SpaceTimeField: Send + Sync {
    fn dim(&self) -> usize;
    fn comps(&self) -> usize;
    fn span(&self) -> (f64, f64);
    /// Spatial period, infinite when none.
    fn period(&self) -> f64;
    fn jet(&self, t: f64, x: &[f64]) -> Result<Jet>;
}

/// Trigonometric interpolation in space and cubic Hermite interpolation in time.
pub struct TrajectoryField {
    traj: Trajectory,
    rate: Trajectory,
    spectra: Vec<OnceLock<FieldSpectrum>>,
    rate_spectra: Vec<OnceLock<FieldSpectrum>>,
}

impl TrajectoryField {
    pub fn new(traj: Trajectory) -> Result<Self> {
        let rate = traj.time_derivative()?;
        let n = traj.len();
        Ok(Self {
            traj,
            rate,
            spectra: (0..n).map(|_| OnceLock::new()).collect(),
            rate_spectra: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    fn frame_jet(&self, k: usize, x: &[f64]) -> SpatialJet {
        self.spectra[k].get_or_init(|| FieldSpectrum::new(&self.traj.frames[k])).jet(x)
    }

    fn rate_jet(&self, k: usize, x: &[f64]) -> SpatialJet {
        self.rate_spectra[k].get_or_init(|| FieldSpectrum::new(&self.rate.frames[k])).jet(x)
    }
}

impl SpaceTimeField for TrajectoryField {
    fn dim(&self) -> usize {
        self.traj.grid.d
    }

    fn comps(&self) -> usize {
        self.traj.frames[0].comps()
    }

    fn span(&self) -> (f64, f64) {
        (self.traj.t0, self.traj.horizon())
    }

    fn period(&self) -> f64 {
        self.traj.grid.l
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<Jet> {
        let (lo, hi) = self.span();
        let h = self.traj.dt;
        let slack = 1e-9 * h;
        if t < lo - slack || t > hi + slack {
            return Err(Error::Window(format!("time {t} outside the trajectory span [{lo}, {hi}]")));
        }
        let pos = ((t - lo) / h).clamp(0.0, (self.traj.len() - 1) as f64);
        let mut k = (pos.floor() as usize).min(self.traj.len() - 2);
        let mut s = pos - k as f64;
        // Snap to a frame when within rounding of it.
        if s < 1e-9 {
            s = 0.0;
        } else if s > 1.0 - 1e-9 {
            k += 1;
            s = 0.0;
        }
        let d = self.dim();
        let comps = self.comps();
        if s == 0.0 {
            let j = self.frame_jet(k, x);
            let r = self.rate_jet(k, x);
            return Ok(Jet {
                value: j.value,
                gradient: j.gradient,
                hessian: j.hessian,
                dt: r.value,
            });
        }
        let (s2, s3) = (s * s, s * s * s);
        let w = [2.0 * s3 - 3.0 * s2 + 1.0, (s3 - 2.0 * s2 + s) * h, -2.0 * s3 + 3.0 * s2, (s3 - s2) * h];
        let dw = [(6.0 * s2 - 6.0 * s) / h, 3.0 * s2 - 4.0 * s + 1.0, (-6.0 * s2 + 6.0 * s) / h, 3.0 * s2 - 2.0 * s];
        let parts = [self.frame_jet(k, x), self.rate_jet(k, x), self.frame_jet(k + 1, x), self.rate_jet(k + 1, x)];
        let mut out = Jet::zeros(d, comps);
        for (i, p) in parts.iter().enumerate() {
            for (o, v) in out.value.iter_mut().zip(&p.value) {
                *o += w[i] * v;
            }
            for (o, v) in out.gradient.iter_mut().zip(&p.gradient) {
                *o += w[i] * v;
            }
            for (o, v) in out.hessian.iter_mut().zip(&p.hessian) {
                *o += w[i] * v;
            }
            for (o, v) in out.dt.iter_mut().zip(&p.value) {
                *o += dw[i] * v;
            }
        }
        Ok(out)
    }
}

type JetFn = dyn Fn(f64, &[f64]) -> Jet + Send + Sync;

/// A field given by a closure returning its jet.
pub struct ClosedForm {
    dim: usize,
    comps: usize,
    span: (f64, f64),
    period: f64,
    f: Box<JetFn>,
}

impl ClosedForm {
    pub fn new(
        dim: usize,
        comps: usize,
        span: (f64, f64),
        period: f64,
        f: impl Fn(f64, &[f64]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            comps,
            span,
            period,
            f: Box::new(f),
        }
    }

    /// A field constant in space and time.
    pub fn constant(dim: usize, value: Vec<f64>) -> Self {
        let comps = value.len();
        Self::new(dim, comps, (f64::NEG_INFINITY, f64::INFINITY), f64::INFINITY, move |_, _| Jet {
            value: value.clone(),
            ..Jet::zeros(dim, comps)
        })
    }
}

impl SpaceTimeField for ClosedForm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn comps(&self) -> usize {
        self.comps
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<Jet> {
        if t < self.span.0 || t > self.span.1 {
            return Err(Error::Window(format!("time {t} outside [{}, {}]", self.span.0, self.span.1)));
        }
        Ok((self.f)(t, x))
    }
}

/// `w·F(τ t̃, σ x̃)`.
pub struct Rescaled {
    inner: Arc<dyn SpaceTimeField>,
    time_scale: f64,
    space_scale: f64,
    weight: f64,
}

impl SpaceTimeField for Rescaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn comps(&self) -> usize {
        self.inner.comps()
    }

    fn span(&self) -> (f64, f64) {
        let (a, b) = self.inner.span();
        (a / self.time_scale, b / self.time_scale)
    }

    fn period(&self) -> f64 {
        self.inner.period() / self.space_scale
    }

    fn jet(&self, t: f64, x: &[f64]) -> Result<Jet> {
        let y: Vec<f64> = x.iter().map(|v| v * self.space_scale).collect();
        Ok(self
            .inner
            .jet(t * self.time_scale, &y)?
            .scaled(self.weight, self.space_scale, self.time_scale))
    }
}

/// Solution and coefficients of `(∂_t − Δ + a)u = b·∇u + f`; absent coefficients vanish.
#[derive(Clone)]
pub struct Bundle {
    pub u: Arc<dyn SpaceTimeField>,
    pub a: Option<Arc<dyn SpaceTimeField>>,
    pub b: Option<Arc<dyn SpaceTimeField>>,
    pub f: Option<Arc<dyn SpaceTimeField>>,
}

impl Bundle {
    pub fn new(u: Arc<dyn SpaceTimeField>) -> Self {
        Self {
            u,
            a: None,
            b: None,
            f: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.u.dim();
        let c = self.u.comps();
        let check = |name: &str, field: &Option<Arc<dyn SpaceTimeField>>, comps: usize| match field {
            Some(f) if f.dim() != d || f.comps() != comps => Err(Error::InvalidInput(format!(
                "coefficient {name} has {} components in dimension {}, expected {comps} in {d}",
                f.comps(),
                f.dim()
            ))),
            _ => Ok(()),
        };
        check("a", &self.a, 1)?;
        check("b", &self.b, d)?;
        check("f", &self.f, c)
    }

    /// `∂_t u − Δu + a·u − b·∇u − f` at one point.
    pub fn residual_at(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.u.dim();
        let u = self.u.jet(t, x)?;
        let mut r = u.dt.clone();
        for (c, slot) in r.iter_mut().enumerate() {
            for a in 0..d {
                *slot -= u.hessian[(c * d + a) * d + a];
            }
        }
        if let Some(a) = &self.a {
            let av = a.jet(t, x)?.value[0];
            for (slot, v) in r.iter_mut().zip(&u.value) {
                *slot += av * v;
            }
        }
        if let Some(b) = &self.b {
            let bv = b.jet(t, x)?.value;
            for (c, slot) in r.iter_mut().enumerate() {
                for (a, bva) in bv.iter().enumerate() {
                    *slot -= bva * u.gradient[c * d + a];
                }
            }
        }
        if let Some(f) = &self.f {
            for (slot, v) in r.iter_mut().zip(f.jet(t, x)?.value) {
                *slot -= v;
            }
        }
        Ok(r)
    }
}

fn rescale_one(f: &Arc<dyn SpaceTimeField>, tau: f64, sigma: f64, weight: f64) -> Arc<dyn SpaceTimeField> {
    Arc::new(Rescaled {
        inner: f.clone(),
        time_scale: tau,
        space_scale: sigma,
        weight,
    })
}

/// `ũ(t̃, x̃) = u(M^j t̃, M^{j/2} x̃)` with `b̃ = M^{j/2} b`, `f̃ = M^j f`, `ã = M^j a` at mapped points.
pub fn parabolic_rescale(bundle: &Bundle, j: i32, m: f64) -> Result<Bundle> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!("M = {m} must exceed 1")));
    }
    bundle.validate()?;
    let tau = m.powi(j);
    let sigma = m.powf(j as f64 / 2.0);
    Ok(Bundle {
        u: rescale_one(&bundle.u, tau, sigma, 1.0),
        a: bundle.a.as_ref().map(|a| rescale_one(a, tau, sigma, tau)),
        b: bundle.b.as_ref().map(|b| rescale_one(b, tau, sigma, sigma)),
        f: bundle.f.as_ref().map(|f| rescale_one(f, tau, sigma, tau)),
    })
}

/// `Q^(j)(t0, x0) = [t0 − M^j, t0] × B̄(x0, M^{j/2})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParabolicBall {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub j: i32,
    pub m: f64,
}

impl ParabolicBall {
    pub fn new(t0: f64, x0: Vec<f64>, j: i32, m: f64) -> Result<Self> {
        if !(m > 1.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("M = {m} must exceed 1")));
        }
        Ok(Self { t0, x0, j, m })
    }

    pub fn duration(&self) -> f64 {
        self.m.powi(self.j)
    }

    pub fn radius(&self) -> f64 {
        self.m.powf(self.j as f64 / 2.0)
    }

    /// The next smaller ball with the same apex.
    pub fn inner(&self) -> Self {
        Self {
            j: self.j - 1,
            ..self.clone()
        }
    }

    /// The same ball seen after `parabolic_rescale` at scale `j`.
    pub fn rescaled(&self, j: i32) -> Self {
        let tau = self.m.powi(j);
        let sigma = self.m.powf(j as f64 / 2.0);
        Self {
            t0: self.t0 / tau,
            x0: self.x0.iter().map(|v| v / sigma).collect(),
            j: self.j - j,
            m: self.m,
        }
    }

    pub fn fits(&self, field: &dyn SpaceTimeField) -> Result<()> {
        let (lo, hi) = field.span();
        let tol = 1e-12 * self.t0.abs().max(1.0);
        if self.x0.len() != field.dim() {
            return Err(Error::InvalidInput("ball centre has the wrong dimension".into()));
        }
        if self.t0 - self.duration() < lo - tol || self.t0 > hi + tol {
            return Err(Error::Window(format!(
                "ball [{}, {}] leaves the data span [{lo}, {hi}]",
                self.t0 - self.duration(),
                self.t0
            )));
        }
        if self.radius() > field.period() / 2.0 * (1.0 + 1e-12) {
            return Err(Error::Window(format!(
                "ball radius {} exceeds half the period {}",
                self.radius(),
                field.period()
            )));
        }
        Ok(())
    }

    /// Lattice of sample points: `nt` times and an `ns`-per-axis grid clipped to the ball.
    pub fn samples(&self, nt: usize, ns: usize) -> Vec<(f64, Vec<f64>)> {
        let d = self.x0.len();
        let (dur, rad) = (self.duration(), self.radius());
        let frac = |i: usize, n: usize| if n < 2 { 0.0 } else { i as f64 / (n - 1) as f64 };
        let mut offsets: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..d {
            offsets = offsets
                .into_iter()
                .flat_map(|o| {
                    (0..ns).map(move |i| {
                        let mut o = o.clone();
                        o.push(if ns < 2 { 0.0 } else { -1.0 + 2.0 * frac(i, ns) });
                        o
                    })
                })
                .collect();
        }
        offsets.retain(|o| norm(o) <= 1.0 + 1e-12);
        let mut out = Vec::with_capacity(nt * offsets.len());
        for i in 0..nt {
            let t = self.t0 - dur * (1.0 - frac(i, nt));
            for o in &offsets {
                out.push((t, self.x0.iter().zip(o).map(|(c, v)| c + rad * v).collect()));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchauderBound {
    /// `sup |∇u|` on the inner ball.
    Gradient,
    /// Hölder seminorm of `∇u` on the inner ball.
    GradientHolder,
    /// `sup |∂_t u|, sup |∇²u|` on the inner ball.
    SecondOrder,
    /// Hölder seminorms of `∂_t u` and `∇²u` on the inner ball.
    SecondOrderHolder,
}

impl SchauderBound {
    pub const ALL: [SchauderBound; 4] = [
        SchauderBound::Gradient,
        SchauderBound::GradientHolder,
        SchauderBound::SecondOrder,
        SchauderBound::SecondOrderHolder,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchauderBound::Gradient => "gradient",
            SchauderBound::GradientHolder => "gradient_holder",
            SchauderBound::SecondOrder => "second_order",
            SchauderBound::SecondOrderHolder => "second_order_holder",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchauderOptions {
    pub time_samples: usize,
    pub space_samples: usize,
    /// Exponent `α' > α` of the second-order Hölder bound; `(α + 1)/2` when absent.
    pub alpha_prime: Option<f64>,
    /// Largest admissible PDE residual on the outer ball.
    pub residual_tol: f64,
    /// Constant the verdict compares the implied constant against.
    pub constant: f64,
    pub holder: HolderOptions,
}

impl Default for SchauderOptions {
    fn default() -> Self {
        Self {
            time_samples: 9,
            space_samples: 9,
            alpha_prime: None,
            residual_tol: 1e-4,
            constant: 10.0,
            holder: HolderOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchauderReport {
    pub bound: SchauderBound,
    pub ball: ParabolicBall,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub implied_constant: f64,
    pub r_b: f64,
    pub sup_u: f64,
    pub holder_f: f64,
    pub holder_a: f64,
    pub holder_b: f64,
    pub residual: f64,
    pub report: BoundReport,
}

fn holder_of(points: &PointSet, alpha: f64, opts: &HolderOptions) -> Result<f64> {
    if points.len() < 2 {
        return Ok(0.0);
    }
    Ok(holder_seminorm(HolderSamples::Points(points), alpha, HolderMode::Parabolic, opts)?.value)
}

fn coefficient_points(
    field: &Option<Arc<dyn SpaceTimeField>>,
    samples: &[(f64, Vec<f64>)],
    d: usize,
) -> Result<Option<PointSet>> {
    let Some(f) = field else {
        return Ok(None);
    };
    let mut ps = PointSet::new(d, f.comps());
    for (t, x) in samples {
        ps.push(*t, x, &f.jet(*t, x)?.value);
    }
    Ok(Some(ps))
}

/// One instance of an interior Schauder bound on `ball`, reported with its implied constant.
pub fn check_schauder_instance(
    bundle: &Bundle,
    ball: &ParabolicBall,
    alpha: f64,
    bound: SchauderBound,
    opts: &SchauderOptions,
) -> Result<SchauderReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("α = {alpha} must lie in (0, 1)")));
    }
    let alpha_prime = opts.alpha_prime.unwrap_or((alpha + 1.0) / 2.0);
    if !(alpha_prime > alpha) {
        return Err(Error::InvalidInput(format!("α' = {alpha_prime} must exceed α = {alpha}")));
    }
    bundle.validate()?;
    let u = &bundle.u;
    let d = u.dim();
    let comps = u.comps();
    ball.fits(u.as_ref())?;
    let outer = ball.samples(opts.time_samples, opts.space_samples);

    let mut residual: f64 = 0.0;
    let mut sup_u: f64 = 0.0;
    for (t, x) in &outer {
        residual = residual.max(norm(&bundle.residual_at(*t, x)?));
        sup_u = sup_u.max(norm(&u.jet(*t, x)?.value));
    }
    if residual > opts.residual_tol {
        return Err(Error::Precondition(format!(
            "PDE residual {residual:e} on the ball exceeds {:e}",
            opts.residual_tol
        )));
    }
    let a_points = coefficient_points(&bundle.a, &outer, d)?;
    if let Some(a) = &a_points {
        if let Some(v) = a.values.iter().find(|v| **v < 0.0) {
            return Err(Error::Precondition(format!("zeroth-order coefficient is negative ({v:e}) on the ball")));
        }
    }
    let b_points = coefficient_points(&bundle.b, &outer, d)?;
    let f_points = coefficient_points(&bundle.f, &outer, d)?;
    let hopt = &opts.holder;
    let holder_a = a_points.map_or(Ok(0.0), |p| holder_of(&p, alpha, hopt))?;
    let holder_b = b_points.map_or(Ok(0.0), |p| holder_of(&p, alpha, hopt))?;
    let holder_f = f_points.map_or(Ok(0.0), |p| holder_of(&p, alpha, hopt))?;
    let b_centre = match &bundle.b {
        Some(b) => norm(&b.jet(ball.t0, &ball.x0)?.value),
        None => 0.0,
    };
    let m = ball.m;
    let j = ball.j as f64;
    let mj = |p: f64| m.powf(j * p);
    let r_b = 1.0 / (1.0 + mj(0.5) * b_centre);
    let inv = 1.0 / r_b;

    let inner = ball.inner().samples(opts.time_samples, opts.space_samples);
    let jets: Vec<(f64, &Vec<f64>, Jet)> = inner
        .iter()
        .map(|(t, x)| u.jet(*t, x).map(|jet| (*t, x, jet)))
        .collect::<Result<_>>()?;
    let lhs = match bound {
        SchauderBound::Gradient => jets.iter().map(|(_, _, jt)| norm(&jt.gradient)).fold(0.0, f64::max),
        SchauderBound::SecondOrder => jets
            .iter()
            .map(|(_, _, jt)| norm(&jt.dt).max(norm(&jt.hessian)))
            .fold(0.0, f64::max),
        SchauderBound::GradientHolder => {
            let mut ps = PointSet::new(d, comps * d);
            for (t, x, jt) in &jets {
                ps.push(*t, x, &jt.gradient);
            }
            holder_of(&ps, alpha, hopt)?
        }
        SchauderBound::SecondOrderHolder => {
            let mut pt = PointSet::new(d, comps);
            let mut ph = PointSet::new(d, comps * d * d);
            for (t, x, jt) in &jets {
                pt.push(*t, x, &jt.dt);
                ph.push(*t, x, &jt.hessian);
            }
            holder_of(&pt, alpha, hopt)?.max(holder_of(&ph, alpha, hopt)?)
        }
    };
    let rhs = match bound {
        SchauderBound::Gradient => {
            mj(0.5)
                * inv
                * (mj(alpha / 2.0) * holder_f
                    + (mj(alpha) * inv * holder_b.powi(2) + mj(alpha / 2.0) * holder_a + mj(-1.0)) * sup_u)
        }
        SchauderBound::GradientHolder => {
            let p = (1.0 + alpha) / alpha;
            mj(-alpha / 2.0)
                * inv.powf((1.0 + alpha) / 2.0)
                * (mj((1.0 + alpha) / 2.0) * holder_f
                    + (mj((1.0 + alpha + alpha * alpha) / (2.0 * alpha)) * inv.powf(0.5 * p) * holder_b.powf(p)
                        + mj((1.0 + alpha) / 2.0) * holder_a
                        + mj(-0.5))
                        * sup_u)
        }
        SchauderBound::SecondOrder => {
            inv * (mj(alpha / 2.0) * holder_f
                + (mj(alpha) * inv * holder_b.powi(2) + mj(alpha / 2.0) * holder_a + mj(-1.0)) * sup_u)
        }
        SchauderBound::SecondOrderHolder => {
            let p = (2.0 + alpha) / (1.0 + alpha);
            mj(-alpha / 2.0)
                * inv.powf(1.0 + alpha_prime / 2.0)
                * (mj(alpha / 2.0) * holder_f
                    + (mj(alpha / 2.0) * inv.powf(0.5 * (2.0 + alpha_prime) / (1.0 + alpha)) * holder_b.powf(p)
                        + mj(alpha / 2.0) * holder_a
                        + mj(-1.0))
                        * sup_u)
        }
    };
    let implied_constant = ratio(lhs, rhs);
    let mut report = BoundReport::new(
        &format!("schauder_{}", bound.name()),
        vec![ball.t0],
        vec![lhs],
        vec![opts.constant * rhs],
        0.0,
    )
    .param("alpha", alpha)
    .param("alpha_prime", alpha_prime)
    .param("M", m)
    .param("j", j)
    .param("constant", opts.constant);
    report.implied_constant = Some(implied_constant);
    report.seed = Some(opts.holder.seed);
    Ok(SchauderReport {
        bound,
        ball: ball.clone(),
        alpha,
        alpha_prime,
        lhs,
        rhs,
        implied_constant,
        r_b,
        sup_u,
        holder_f,
        holder_a,
        holder_b,
        residual,
        report,
    })
}

/// Heat solution `e^{−t} sin x₁` with exact derivatives.
pub fn heat_mode(dim: usize, span: (f64, f64)) -> ClosedForm {
    advected_heat_mode(dim, span, 0.0)
}

/// `e^{−t} sin(x₁ + b0·t)`, which solves `(∂_t − Δ)u = b·∇u` for `b = b0·e₁`.
pub fn advected_heat_mode(dim: usize, span: (f64, f64), b0: f64) -> ClosedForm {
    ClosedForm::new(dim, 1, span, std::f64::consts::TAU, move |t, x| {
        let e = (-t).exp();
        let (s, c) = (x[0] + b0 * t).sin_cos();
        let mut jet = Jet::zeros(dim, 1);
        jet.value[0] = e * s;
        jet.gradient[0] = e * c;
        jet.hessian[0] = -e * s;
        jet.dt[0] = -e * s + b0 * e * c;
        jet
    })
}
