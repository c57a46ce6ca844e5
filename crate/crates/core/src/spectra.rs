//! Hermitian eigensolves and the spectral diagnostics built on them.
//!
//! Every eigenproblem in the crate goes through [`hermitian_eigen`] (or the
//! internal [`eigh`] for small symbol blocks), so eigenvalues are always real
//! and ascending and eigenvectors are orthonormal with a fixed polarity.
//!
//! The remaining functions measure how close a vector is to being an
//! eigenvector: the residual `‖Mu − λu‖`, the split of `u` into near and far
//! eigenspaces, how much of its Floquet-Bloch mass sits near a given
//! quasiperiodicity, and how localized it is.

use std::ops::Range;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::matrices::FiniteMatrix;
use crate::transform::{projection_profile, BrillouinZone};
use crate::CMatrix;

/// Below this magnitude the leading entry of a unit vector is not used to fix its phase.
pub const POLARITY_PIVOT_TOL: f64 = 1e-8;

/// Eigenvalues closer than this times `‖M‖` are treated as one degenerate cluster.
pub const DEGENERACY_REL_TOL: f64 = 1e-8;

/// Sorted eigenvalues and matching orthonormal eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    vectors: CMatrix,
    source_dim: usize,
}

impl EigenDecomposition {
    pub(crate) fn from_parts(values: Vec<f64>, vectors: CMatrix) -> Self {
        let source_dim = vectors.nrows();
        debug_assert_eq!(values.len(), vectors.ncols());
        Self {
            values,
            vectors,
            source_dim,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvectors as the columns of a matrix, column `i` paired with `values()[i]`.
    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        self.vectors.column(i).iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    /// `V Λ V*`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        scaled * self.vectors.adjoint()
    }

    /// Index ranges of numerically degenerate eigenvalues.
    ///
    /// Consecutive eigenvalues belong to the same cluster when they differ by
    /// less than `rel_tol` times the largest eigenvalue magnitude.
    pub fn clusters(&self, rel_tol: f64) -> Vec<Range<usize>> {
        let scale = self
            .values
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.values.len() {
            if i == self.values.len() || self.values[i] - self.values[i - 1] >= rel_tol * scale {
                out.push(start..i);
                start = i;
            }
        }
        out
    }
}

/// Rotates the global phase of `v` so that its pivot entry is real and positive.
///
/// The pivot is the first entry, unless its magnitude is below
/// [`POLARITY_PIVOT_TOL`], in which case the largest-magnitude entry is used.
pub fn polarize(v: &mut [Complex64]) {
    let Some(first) = v.first() else { return };
    let pivot = if first.norm() >= POLARITY_PIVOT_TOL {
        0
    } else {
        let mut best = 0;
        for (i, z) in v.iter().enumerate() {
            if z.norm() > v[best].norm() {
                best = i;
            }
        }
        best
    };
    let p = v[pivot];
    if p.norm() == 0.0 {
        return;
    }
    let phase = p.conj() / p.norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

/// Dense Hermitian eigensolve: ascending values, unit polarized vectors.
pub(crate) fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut col: Vec<Complex64> = eig.eigenvectors.column(i).iter().copied().collect();
        let norm = l2_norm(&col);
        col.iter_mut().for_each(|z| *z /= norm);
        polarize(&mut col);
        vectors.set_column(c, &DVector::from_vec(col));
    }
    (values, vectors)
}

/// Full eigendecomposition of a Hermitian finite matrix.
pub fn hermitian_eigen(m: &FiniteMatrix) -> Result<EigenDecomposition> {
    if !m.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: m.hermitian_deviation(),
        });
    }
    let (values, vectors) = eigh(m.data());
    Ok(EigenDecomposition::from_parts(values, vectors))
}

pub(crate) fn l2_norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn mat_vec(a: &CMatrix, u: &[Complex64]) -> Vec<Complex64> {
    (a * DVector::from_column_slice(u)).iter().copied().collect()
}

/// `‖M u − λ u‖`.
pub fn residual(m: &FiniteMatrix, lambda: f64, u: &[Complex64]) -> Result<f64> {
    if u.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: u.len(),
        });
    }
    let mu = mat_vec(m.data(), u);
    Ok(mu
        .iter()
        .zip(u)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Orthogonal split of a vector into its near and far eigenspace components.
#[derive(Debug, Clone)]
pub struct NearFarSplit {
    pub u_parallel: Vec<Complex64>,
    pub u_perp: Vec<Complex64>,
    pub epsilon: f64,
    pub center: f64,
}

impl NearFarSplit {
    pub fn parallel_norm(&self) -> f64 {
        l2_norm(&self.u_parallel)
    }

    pub fn perp_norm(&self) -> f64 {
        l2_norm(&self.u_perp)
    }
}

/// Projects `u` onto the span of eigenvectors with `|λ_i − center| ≤ eps`.
pub fn near_far_split(
    eig: &EigenDecomposition,
    center: f64,
    eps: f64,
    u: &[Complex64],
) -> Result<NearFarSplit> {
    if !(eps > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    if u.len() != eig.source_dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.source_dim(),
            found: u.len(),
        });
    }
    let mut u_parallel = vec![Complex64::new(0.0, 0.0); u.len()];
    for (i, &value) in eig.values().iter().enumerate() {
        if (value - center).abs() > eps {
            continue;
        }
        let v = eig.vectors().column(i);
        let coeff: Complex64 = v.iter().zip(u).map(|(a, b)| a.conj() * b).sum();
        for (acc, a) in u_parallel.iter_mut().zip(v.iter()) {
            *acc += a * coeff;
        }
    }
    let u_perp = u.iter().zip(&u_parallel).map(|(a, b)| a - b).collect();
    Ok(NearFarSplit {
        u_parallel,
        u_perp,
        epsilon: eps,
        center,
    })
}

/// Floquet-Bloch mass inside and outside a symmetric quasiperiodicity window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentration {
    pub mass_in: f64,
    pub mass_out: f64,
}

/// Splits `Σ_j ‖T^j(u)‖²` between bins with `α_j ∈ (±α₀ − δ, ±α₀ + δ)` and the rest.
///
/// The masses are normalised by `‖u‖²`, so they sum to one.
pub fn concentration_check(
    u: &[Complex64],
    k: usize,
    alpha0: f64,
    delta: f64,
) -> Result<Concentration> {
    if !(delta > 0.0) {
        return Err(invalid(format!("window half-width must be positive, got {delta}")));
    }
    let profile = projection_profile(u, k)?;
    let zone = BrillouinZone::new(profile.len());
    let total: f64 = profile.iter().sum();
    if total == 0.0 {
        return Err(Error::Empty("zero vector has no Floquet-Bloch mass"));
    }
    let mut mass_in = 0.0;
    for (bin, w) in profile.iter().enumerate() {
        let a = zone.alpha(bin as i64);
        if (a - alpha0).abs() < delta || (a + alpha0).abs() < delta {
            mass_in += w;
        }
    }
    let mass_in = mass_in / total;
    Ok(Concentration {
        mass_in,
        mass_out: 1.0 - mass_in,
    })
}

/// Sup-norm and inverse participation ratio of a normalised vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    pub sup_ratio: f64,
    pub ipr: f64,
}

/// `‖u‖∞ / ‖u‖₂` and `Σ |u_i|⁴ / ‖u‖₂⁴`.
pub fn localization_metrics(u: &[Complex64]) -> Localization {
    let norm = l2_norm(u);
    if norm == 0.0 {
        return Localization {
            sup_ratio: 0.0,
            ipr: 0.0,
        };
    }
    let mut sup = 0.0_f64;
    let mut ipr = 0.0;
    for z in u {
        let a = z.norm() / norm;
        sup = sup.max(a);
        ipr += a.powi(4);
    }
    Localization {
        sup_ratio: sup,
        ipr,
    }
}
