//! The truncated Floquet-Bloch transform and the discrete quasiperiodicity.
//!
//! A vector `u ∈ ℂ^{mk}` describing `m` unit cells of `k` resonators is cut
//! into `k` *sections*: section `p` collects entry `p` of every cell. The
//! transform applies the unitary DFT to each section, and the projection
//! `T^j(u) ∈ ℂ^k` collects bin `j` of every transformed section. Bin `j`
//! corresponds to the quasiperiodicity `α_j` of the discretised Brillouin
//! zone, so `‖T^j(u)‖²` measures how strongly `u` resonates at `α_j`.
//!
//! The discrete quasiperiodicity is the `‖T^j(u)‖²`-weighted mean of `|α_j|`.
//! For a quasiperiodic extension `QP_m(v, α_s)` all the mass sits in bin `s`
//! and `Q` returns `|α_s|` exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectra::l2_norm;

/// Inputs to [`discrete_quasiperiodicity`] must have unit norm to this tolerance.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// The `m` quasiperiodicities `2πj/m`, `j = −⌊m/2⌋, …, m − 1 − ⌊m/2⌋`.
///
/// DFT bin `b ∈ [0, m)` corresponds to the signed index `b` when
/// `b < m − ⌊m/2⌋` and to `b − m` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrillouinZone {
    m: usize,
}

impl BrillouinZone {
    /// # Panics
    /// If `m == 0`.
    pub fn new(m: usize) -> Self {
        assert!(m > 0, "Brillouin zone needs at least one sample");
        Self { m }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed index of a (possibly negative or out-of-range) bin.
    pub fn signed_index(&self, bin: i64) -> i64 {
        let m = self.m as i64;
        let b = bin.rem_euclid(m);
        if b < m - m / 2 {
            b
        } else {
            b - m
        }
    }

    /// Quasiperiodicity of a bin, in `[−π, π)`.
    pub fn alpha(&self, bin: i64) -> f64 {
        2.0 * PI * self.signed_index(bin) as f64 / self.m as f64
    }

    /// DFT bin (in `[0, m)`) of a signed index.
    pub fn bin(&self, index: i64) -> usize {
        index.rem_euclid(self.m as i64) as usize
    }

    /// All quasiperiodicities in ascending order.
    pub fn alphas(&self) -> Vec<f64> {
        let m = self.m as i64;
        (-(m / 2)..m - m / 2)
            .map(|j| 2.0 * PI * j as f64 / self.m as f64)
            .collect()
    }
}

/// Unitary DFT: `(1/√m) Σ_s v_s e^{−2πi js/m}`.
pub fn dft(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    if out.is_empty() {
        return out;
    }
    let fft = FftPlanner::new().plan_fft_forward(out.len());
    fft.process(&mut out);
    let scale = 1.0 / (v.len() as f64).sqrt();
    out.iter_mut().for_each(|z| *z *= scale);
    out
}

/// `k` vectors of length `m`; section `p` holds entries `p, p + k, p + 2k, …`.
///
/// Sections are numbered from zero here, so section `p` is the `(p + 1)`-th
/// resonator of each unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Sections {
    k: usize,
    m: usize,
    data: Vec<Vec<Complex64>>,
}

impl Sections {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of unit cells.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn section(&self, p: usize) -> &[Complex64] {
        &self.data[p]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.iter().map(Vec::as_slice)
    }

    /// `sqrt(Σ_p ‖section_p‖²)`.
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Inverse of [`sections`]: interleaves the sections back into one vector.
    pub fn interleave(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.k * self.m);
        for s in 0..self.m {
            for p in 0..self.k {
                out.push(self.data[p][s]);
            }
        }
        out
    }

    /// `T^j`: bin `j` (taken modulo `m`) of every section.
    pub fn row(&self, j: i64) -> Vec<Complex64> {
        let bin = j.rem_euclid(self.m as i64) as usize;
        self.data.iter().map(|sec| sec[bin]).collect()
    }
}

fn check_divisible(len: usize, k: usize) -> Result<()> {
    if k == 0 || len % k != 0 || len == 0 {
        return Err(Error::NotDivisible { len, k });
    }
    Ok(())
}

/// The section map `Φ`.
pub fn sections(u: &[Complex64], k: usize) -> Result<Sections> {
    check_divisible(u.len(), k)?;
    let m = u.len() / k;
    let data = (0..k)
        .map(|p| u.iter().skip(p).step_by(k).copied().collect())
        .collect();
    Ok(Sections { k, m, data })
}

/// Appends zeros until the length is a multiple of `k`.
pub fn zero_pad(u: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = u.to_vec();
    if k > 1 {
        let rem = out.len() % k;
        if rem != 0 {
            out.resize(out.len() + k - rem, Complex64::new(0.0, 0.0));
        }
    }
    out
}

/// Section-wise DFT of `u`.
pub fn tfbt(u: &[Complex64], k: usize) -> Result<Sections> {
    let mut s = sections(u, k)?;
    for sec in s.data.iter_mut() {
        *sec = dft(sec);
    }
    Ok(s)
}

/// The `j`-th Floquet-Bloch projection `T^j(u) ∈ ℂ^k`; `j` is taken modulo `m`.
pub fn tfb_projection(u: &[Complex64], k: usize, j: i64) -> Result<Vec<Complex64>> {
    Ok(tfbt(u, k)?.row(j))
}

/// `‖T^j(u)‖²` for every DFT bin `j = 0, …, m − 1`.
pub fn projection_profile(u: &[Complex64], k: usize) -> Result<Vec<f64>> {
    let t = tfbt(u, k)?;
    let mut out = vec![0.0; t.m()];
    for sec in t.iter() {
        for (acc, z) in out.iter_mut().zip(sec) {
            *acc += z.norm_sqr();
        }
    }
    Ok(out)
}

/// `(α_j, ‖T^j(u)‖²)` pairs in ascending `α_j`.
pub fn projection_spectrum(u: &[Complex64], k: usize) -> Result<Vec<(f64, f64)>> {
    let profile = projection_profile(u, k)?;
    let zone = BrillouinZone::new(profile.len());
    let m = profile.len() as i64;
    Ok((-(m / 2)..m - m / 2)
        .map(|j| (zone.alpha(j), profile[zone.bin(j)]))
        .collect())
}

/// `QP_m(cell, α) = (1/√m)(cell, e^{iα} cell, …, e^{iα(m−1)} cell)`.
pub fn quasiperiodic_extension(cell: &[Complex64], alpha: f64, m: usize) -> Vec<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    let mut out = Vec::with_capacity(cell.len() * m);
    for n in 0..m {
        let phase = Complex64::from_polar(scale, alpha * n as f64);
        out.extend(cell.iter().map(|c| c * phase));
    }
    out
}

/// `Q_m(u) = Σ_{α_j} |α_j| ‖T^j(u)‖²`, in `[0, π]`.
///
/// `u` must have unit norm up to [`UNIT_NORM_TOL`]; it is renormalised
/// internally so rounding in the norm does not leak into the result.
pub fn discrete_quasiperiodicity(u: &[Complex64], k: usize) -> Result<f64> {
    let norm = l2_norm(u);
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnit { norm });
    }
    let profile = projection_profile(u, k)?;
    Ok(weighted_quasiperiodicity(&profile))
}

/// `Q` from a precomputed profile; the weights need not be normalised.
pub(crate) fn weighted_quasiperiodicity(profile: &[f64]) -> f64 {
    let zone = BrillouinZone::new(profile.len());
    let total: f64 = profile.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let q: f64 = profile
        .iter()
        .enumerate()
        .map(|(bin, w)| zone.alpha(bin as i64).abs() * w)
        .sum();
    (q / total).clamp(0.0, PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    /// Direct O(m²) evaluation of the defining sum.
    fn dft_direct(v: &[Complex64]) -> Vec<Complex64> {
        let m = v.len();
        (0..m)
            .map(|j| {
                v.iter()
                    .enumerate()
                    .map(|(s, x)| x * Complex64::from_polar(1.0, -2.0 * PI * (j * s) as f64 / m as f64))
                    .sum::<Complex64>()
                    / (m as f64).sqrt()
            })
            .collect()
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn brillouin_zone_layout() {
        let z = BrillouinZone::new(4);
        assert_eq!(z.alphas(), vec![-PI, -PI / 2.0, 0.0, PI / 2.0]);
        assert_eq!(z.alpha(2), -PI);
        assert_eq!(z.alpha(3), -PI / 2.0);
        assert_eq!(z.alpha(-1), -PI / 2.0);
        let z = BrillouinZone::new(5);
        assert_eq!(z.alphas().len(), 5);
        assert_eq!(z.signed_index(3), -2);
        assert!(z.alphas().iter().all(|a| (-PI..PI).contains(a)));
        assert!(z.alphas().contains(&0.0));
    }

    #[test]
    fn dft_examples() {
        assert_close(&dft(&real(&[0.5; 4])), &real(&[1.0, 0.0, 0.0, 0.0]), 1e-15);
        let omega = vec![c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        assert_close(&dft(&omega), &real(&[0.0, 1.0, 0.0, 0.0]), 1e-15);
    }

    #[test]
    fn dft_matches_direct_sum() {
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for m in 1..=64 {
            let v: Vec<Complex64> = (0..m).map(|_| c(next(), next())).collect();
            assert_close(&dft(&v), &dft_direct(&v), 1e-12);
        }
    }

    #[test]
    fn sections_examples() {
        let u = real(&[1.0, 2.0, 3.0, 4.0]);
        let s = sections(&u, 2).unwrap();
        assert_eq!(s.section(0), &real(&[1.0, 3.0])[..]);
        assert_eq!(s.section(1), &real(&[2.0, 4.0])[..]);
        assert_abs_diff_eq!(s.norm().powi(2), 30.0, epsilon = 1e-12);
        assert_eq!(s.interleave(), u);
        assert_eq!(sections(&u, 1).unwrap().section(0), &u[..]);
        assert!(matches!(sections(&u, 3), Err(Error::NotDivisible { len: 4, k: 3 })));
    }

    #[test]
    fn zero_pad_examples() {
        let u = real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let p = zero_pad(&u, 2);
        assert_eq!(p.len(), 6);
        assert_eq!(p[5], c(0.0, 0.0));
        assert_eq!(zero_pad(&u, 5), u);
        assert_eq!(zero_pad(&u, 1), u);
        assert_abs_diff_eq!(l2_norm(&p), l2_norm(&u), epsilon = 1e-15);
    }

    #[test]
    fn tfbt_of_quasiperiodic_cell() {
        let u = quasiperiodic_extension(&real(&[1.0, 0.0]), PI / 2.0, 4);
        let t = tfbt(&u, 2).unwrap();
        assert_close(t.section(0), &real(&[0.0, 1.0, 0.0, 0.0]), 1e-15);
        assert_close(t.section(1), &real(&[0.0; 4]), 1e-15);
        let mut impulse = real(&[0.0; 4]);
        impulse[0] = c(1.0, 0.0);
        assert_close(tfbt(&impulse, 1).unwrap().section(0), &real(&[0.5; 4]), 1e-15);
    }

    #[test]
    fn projection_wraps_modulo_m() {
        let u: Vec<Complex64> = (0..12).map(|i| c(i as f64, (i * i) as f64 * 0.1)).collect();
        for j in -6..6 {
            assert_eq!(tfb_projection(&u, 3, j).unwrap(), tfb_projection(&u, 3, j + 4).unwrap());
        }
        let total: f64 = projection_profile(&u, 3).unwrap().iter().sum();
        assert_abs_diff_eq!(total, l2_norm(&u).powi(2), epsilon = 1e-9);
    }

    #[test]
    fn quasiperiodic_extension_examples() {
        let u = quasiperiodic_extension(&real(&[1.0, 0.0]), PI, 2);
        let r = 1.0 / 2f64.sqrt();
        assert_close(&u, &real(&[r, 0.0, -r, 0.0]), 1e-15);
        let p = quasiperiodic_extension(&real(&[1.0, 2.0]), 0.0, 3);
        let s = 1.0 / 3f64.sqrt();
        assert_close(&p, &real(&[s, 2.0 * s, s, 2.0 * s, s, 2.0 * s]), 1e-15);
    }

    #[test]
    fn quasiperiodicity_of_fourier_modes() {
        for m in [4usize, 7, 16] {
            let zone = BrillouinZone::new(m);
            for &alpha in &zone.alphas() {
                let cell = vec![c(0.6, 0.0), c(0.0, 0.8)];
                let u = quasiperiodic_extension(&cell, alpha, m);
                let q = discrete_quasiperiodicity(&u, 2).unwrap();
                assert_abs_diff_eq!(q, alpha.abs(), epsilon = 1e-12);
                let profile = projection_profile(&u, 2).unwrap();
                let bin = zone.bin((alpha * m as f64 / (2.0 * PI)).round() as i64);
                assert_abs_diff_eq!(profile[bin], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quasiperiodicity_of_symmetric_combination() {
        let m = 10;
        let alpha = 2.0 * PI * 3.0 / m as f64;
        let plus = quasiperiodic_extension(&real(&[1.0]), alpha, m);
        let minus = quasiperiodic_extension(&real(&[1.0]), -alpha, m);
        let (c1, c2) = (c(0.6, 0.0), c(0.0, -0.8));
        let u: Vec<Complex64> = plus.iter().zip(&minus).map(|(a, b)| c1 * a + c2 * b).collect();
        assert_abs_diff_eq!(discrete_quasiperiodicity(&u, 1).unwrap(), alpha, epsilon = 1e-12);
    }

    #[test]
    fn quasiperiodicity_of_constant_vector_is_zero() {
        let u = real(&[1.0 / 3.0; 9]);
        assert_abs_diff_eq!(discrete_quasiperiodicity(&u, 1).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn quasiperiodicity_rejects_non_unit_input() {
        let u = real(&[1.0, 1.0]);
        assert!(matches!(discrete_quasiperiodicity(&u, 1), Err(Error::NotUnit { .. })));
        let nearly = real(&[1.0 + 1e-10, 0.0]);
        assert!(discrete_quasiperiodicity(&nearly, 1).is_ok());
    }

    fn vec_strategy(max_cells: usize, k: usize) -> impl Strategy<Value = Vec<Complex64>> {
        (1..=max_cells).prop_flat_map(move |m| {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b)), m * k)
        })
    }

    proptest! {
        #[test]
        fn transforms_preserve_norm(u in vec_strategy(40, 3)) {
            let n = l2_norm(&u);
            prop_assert!((l2_norm(&dft(&u)) - n).abs() < 1e-12 * n.max(1.0));
            prop_assert!((sections(&u, 3).unwrap().norm() - n).abs() < 1e-12 * n.max(1.0));
            prop_assert!((tfbt(&u, 3).unwrap().norm() - n).abs() < 1e-12 * n.max(1.0));
        }

        #[test]
        fn transform_is_linear(u in vec_strategy(16, 2), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let v: Vec<Complex64> = u.iter().rev().copied().collect();
            let (a, b) = (c(a, 0.5), c(-0.25, b));
            let combo: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = tfbt(&combo, 2).unwrap().interleave();
            let tu = tfbt(&u, 2).unwrap().interleave();
            let tv = tfbt(&v, 2).unwrap().interleave();
            for ((l, x), y) in lhs.iter().zip(&tu).zip(&tv) {
                prop_assert!((l - (a * x + b * y)).norm() < 1e-12 * (1.0 + l.norm()));
            }
        }

        #[test]
        fn quasiperiodicity_ignores_global_phase(u in vec_strategy(20, 2), theta in 0.0f64..6.3) {
            let n = l2_norm(&u);
            prop_assume!(n > 1e-6);
            let unit: Vec<Complex64> = u.iter().map(|z| z / n).collect();
            let rotated: Vec<Complex64> = unit.iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect();
            let q = discrete_quasiperiodicity(&unit, 2).unwrap();
            prop_assert!((q - discrete_quasiperiodicity(&rotated, 2).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=PI).contains(&q));
        }
    }
}
