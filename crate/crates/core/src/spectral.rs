//! Eigenvalue routines for spillover-type matrices.
//!
//! The dense spectrum is assembled block by block over the strongly connected
//! components of the nonzero pattern: a permutation makes the matrix block
//! triangular, so its eigenvalues are those of the diagonal blocks. This keeps
//! nilpotent (acyclic) structures at exactly zero instead of the `eps^(1/k)`
//! scatter a Schur decomposition of a defective matrix produces.

use nalgebra::{Complex, DMatrix};

use crate::structure::strongly_connected_components;

const POWER_MAX_ITER: usize = 200_000;
const POWER_TOL: f64 = 1e-14;

/// Result of a shifted power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn nonzero_pattern(m: &DMatrix<f64>) -> DMatrix<bool> {
    m.map(|x| x != 0.0)
}

/// All eigenvalues, via per-component dense Schur decompositions.
pub fn spectrum(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut out = Vec::with_capacity(m.nrows());
    for comp in strongly_connected_components(&nonzero_pattern(m)) {
        if comp.len() == 1 {
            let i = comp[0];
            out.push(Complex::new(m[(i, i)], 0.0));
            continue;
        }
        let sub = DMatrix::from_fn(comp.len(), comp.len(), |a, b| m[(comp[a], comp[b])]);
        out.extend(sub.complex_eigenvalues().iter().copied());
    }
    out
}

/// Largest real part in a list of eigenvalues.
pub fn max_real_part(eigs: &[Complex<f64>]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Dominant eigenvalue by power iteration on `m + shift I`, with the shift
/// equal to the largest absolute row sum so every eigenvalue moves into the
/// right half plane and periodic structures stop oscillating.
pub fn power_dominant(m: &DMatrix<f64>) -> PowerEstimate {
    let n = m.nrows();
    let shift = (0..n)
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if shift == 0.0 {
        return PowerEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = vec![1.0; n];
    let mut estimate = f64::NAN;
    for it in 1..=POWER_MAX_ITER {
        let mut y: Vec<f64> = (0..n)
            .map(|i| shift * x[i] + (0..n).map(|j| m[(i, j)] * x[j]).sum::<f64>())
            .collect();
        let (k, &peak) = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty");
        if peak == 0.0 {
            return PowerEstimate {
                value: -shift,
                iterations: it,
                converged: true,
            };
        }
        let next = peak / x[k];
        for v in y.iter_mut() {
            *v /= peak;
        }
        let dx = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let d_est = (next - estimate).abs();
        x = y;
        estimate = next;
        if dx < POWER_TOL && d_est < POWER_TOL * shift.max(1.0) {
            return PowerEstimate {
                value: estimate - shift,
                iterations: it,
                converged: true,
            };
        }
    }
    PowerEstimate {
        value: estimate - shift,
        iterations: POWER_MAX_ITER,
        converged: false,
    }
}

/// Perron root (spectral radius) of a nonnegative matrix, taken as the
/// largest power-iteration root over its irreducible diagonal blocks.
pub fn perron_root(m: &DMatrix<f64>) -> f64 {
    debug_assert!(m.iter().all(|&x| x >= 0.0));
    strongly_connected_components(&nonzero_pattern(m))
        .into_iter()
        .map(|comp| {
            if comp.len() == 1 {
                m[(comp[0], comp[0])]
            } else {
                let sub = DMatrix::from_fn(comp.len(), comp.len(), |a, b| m[(comp[a], comp[b])]);
                power_dominant(&sub).value
            }
        })
        .fold(0.0, f64::max)
}
