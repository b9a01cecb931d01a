//! Small dense matrix helpers (row-major, square).

/// Largest eigenvalue of a symmetric matrix.
pub fn largest_symmetric_eigenvalue(a: &[f64], n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => a[0],
        2 => {
            let (p, q, r) = (a[0], a[1], a[3]);
            0.5 * (p + r) + (0.25 * (p - r) * (p - r) + q * q).sqrt()
        }
        3 => {
            let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
            if p1 == 0.0 {
                return a[0].max(a[4]).max(a[8]);
            }
            let q = (a[0] + a[4] + a[8]) / 3.0;
            let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let b: Vec<f64> = (0..9)
                .map(|i| (a[i] - if i % 4 == 0 { q } else { 0.0 }) / p)
                .collect();
            let det = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6])
                + b[2] * (b[3] * b[7] - b[4] * b[6]);
            let phi = (0.5 * det).clamp(-1.0, 1.0).acos() / 3.0;
            q + 2.0 * p * phi.cos()
        }
        _ => jacobi_eigenvalues(a, n).into_iter().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let scale: f64 = m.iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Spectral norm (largest singular value) of a square matrix.
pub fn operator_norm(a: &[f64], n: usize) -> f64 {
    let mut ata = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum();
            ata[i * n + j] = s;
            ata[j * n + i] = s;
        }
    }
    largest_symmetric_eigenvalue(&ata, n).max(0.0).sqrt()
}

/// `y = A x`.
pub fn mat_vec(a: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_and_rotation() {
        assert!((operator_norm(&[3.0, 0.0, 0.0, -5.0], 2) - 5.0).abs() < 1e-14);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        assert!((operator_norm(&[c, -s, s, c], 2) - 1.0).abs() < 1e-14);
        let a = [2.0, 0.0, 0.0, 0.0, -7.0, 0.0, 0.0, 0.0, 1.0];
        assert!((operator_norm(&a, 3) - 7.0).abs() < 1e-13);
    }

    #[test]
    fn rank_one() {
        // u v^T has norm |u||v|.
        let u = [1.0, 2.0, -2.0];
        let v = [0.5, 0.0, 1.0];
        let a: Vec<f64> = (0..9).map(|k| u[k / 3] * v[k % 3]).collect();
        let expect = 3.0 * (1.25f64).sqrt();
        assert!((operator_norm(&a, 3) - expect).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closed_form_matches_jacobi(entries in proptest::collection::vec(-3.0f64..3.0, 9)) {
            let mut sym = entries.clone();
            for i in 0..3 { for j in 0..3 { sym[i*3+j] = entries[i*3+j] + entries[j*3+i]; } }
            let closed = largest_symmetric_eigenvalue(&sym, 3);
            let jac = jacobi_eigenvalues(&sym, 3).into_iter().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((closed - jac).abs() < 1e-9 * (1.0 + jac.abs()));
        }

        #[test]
        fn norm_bounds_every_image(entries in proptest::collection::vec(-2.0f64..2.0, 9),
                                   x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let nrm = operator_norm(&entries, 3);
            let mut y = [0.0; 3];
            mat_vec(&entries, &x, &mut y);
            let ny = y.iter().map(|v| v*v).sum::<f64>().sqrt();
            let nx = x.iter().map(|v| v*v).sum::<f64>().sqrt();
            prop_assert!(ny <= nrm * nx * (1.0 + 1e-12) + 1e-14);
        }
    }
}
