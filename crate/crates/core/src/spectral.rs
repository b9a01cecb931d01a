//! Multi-dimensional FFT plumbing shared by the field operators.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::GridSpec;

struct PlanPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<PlanPair>>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Arc<PlanPair> {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(PlanPair {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    })
}

fn transform(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.n;
    let d = grid.d;
    let pair = plans(n);
    let fft = if inverse { &pair.inverse } else { &pair.forward };
    let total = data.len();
    debug_assert_eq!(total, grid.len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // Last axis is contiguous: transform all lines in one call.
    fft.process_with_scratch(data, &mut scratch);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d.saturating_sub(1) {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, value) in line.iter().enumerate() {
                    data[base + i * stride] = *value;
                }
            }
        }
    }
}

/// Forward transform of real samples (unnormalised).
pub(crate) fn forward(grid: &GridSpec, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, false);
    data
}

/// Inverse transform, normalised, keeping the real part.
pub(crate) fn inverse(grid: &GridSpec, mut spectrum: Vec<Complex64>) -> Vec<f64> {
    transform(grid, &mut spectrum, true);
    let scale = 1.0 / grid.len() as f64;
    spectrum.into_iter().map(|c| c.re * scale).collect()
}

/// Signed integer wavenumber of index `i` on an `n`-point axis.
#[inline]
pub(crate) fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Splits a flat row-major index into per-axis indices.
#[inline]
pub(crate) fn unravel(mut flat: usize, n: usize, d: usize, out: &mut [usize]) {
    for axis in (0..d).rev() {
        out[axis] = flat % n;
        flat /= n;
    }
}

/// Per-mode wavenumber tables for a grid.
pub(crate) struct ModeTable {
    /// Physical wavenumber per axis with the Nyquist entry kept.
    pub phys: Vec<f64>,
    /// Physical wavenumber per axis with the Nyquist entry zeroed.
    pub odd: Vec<f64>,
    /// Squared modulus of the physical wavenumber.
    pub k2: Vec<f64>,
    /// Largest absolute integer wavenumber over axes.
    pub kmax: Vec<i64>,
}

impl ModeTable {
    pub fn new(grid: &GridSpec) -> Self {
        let (n, d) = (grid.n, grid.d);
        let len = grid.len();
        let base = 2.0 * std::f64::consts::PI / grid.l;
        let mut phys = vec![0.0; len * d];
        let mut odd = vec![0.0; len * d];
        let mut k2 = vec![0.0; len];
        let mut kmax = vec![0i64; len];
        let mut idx = [0usize; 3];
        for flat in 0..len {
            unravel(flat, n, d, &mut idx);
            for a in 0..d {
                let k = wavenumber(idx[a], n);
                let kp = base * k as f64;
                phys[flat * d + a] = kp;
                odd[flat * d + a] = if idx[a] == n / 2 { 0.0 } else { kp };
                k2[flat] += kp * kp;
                kmax[flat] = kmax[flat].max(k.abs());
            }
        }
        Self {
            phys,
            odd,
            k2,
            kmax,
        }
    }
}

thread_local! {
    static TABLES: RefCell<HashMap<(usize, usize, u64), Arc<ModeTable>>> = RefCell::new(HashMap::new());
}

pub(crate) fn modes(grid: &GridSpec) -> Arc<ModeTable> {
    TABLES.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry((grid.d, grid.n, grid.l.to_bits()))
            .or_insert_with(|| Arc::new(ModeTable::new(grid)))
            .clone()
    })
}

/// Zeroes every mode with some `|k_i| > n/3`.
pub(crate) fn truncate(grid: &GridSpec, spectrum: &mut [Complex64]) {
    let table = modes(grid);
    let cut = (grid.n / 3) as i64;
    for (c, &km) in spectrum.iter_mut().zip(table.kmax.iter()) {
        if km > cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_dimensions() {
        for d in 1..=3 {
            let grid = GridSpec::new(d, 8, 3.0).unwrap();
            let values: Vec<f64> = (0..grid.len()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
            let back = inverse(&grid, forward(&grid, &values));
            for (a, b) in values.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn wavenumber_layout() {
        let ks: Vec<i64> = (0..8).map(|i| wavenumber(i, 8)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }
}
