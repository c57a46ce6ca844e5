//! Named numerical checks behind `tfbt verify`.
//!
//! Each [`CheckSpec`] belongs to a group (`symbol`, `matrices`, `transform`,
//! `spectra`, `reconstruct` or `acceptance`) and compares one measured value
//! against a tolerance. Randomized checks draw from a ChaCha stream seeded by
//! [`Settings::seed`], so a run is reproducible.
//!
//! [`Settings::tol_scale`] multiplies every tolerance. Setting it to zero
//! makes every tolerance-based check fail, which is a quick way to confirm
//! the suite can fail at all.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::matrices::{
    chain_capacitance, circulant_matrix, compact_perturbation, dislocated_chain,
    ssh_matrix, toeplitz_matrix, FiniteMatrix, MatrixKind, SshParams,
};
use crate::reconstruct::{
    compare_to_symbol, reconstruct_bands, reconstruct_eigenpairs, run_scenario,
    tridiagonal_mode, Scenario, REFERENCE_GRID,
};
use crate::spectra::{hermitian_eigen, l2_norm, localization_metrics, mat_vec, near_far_split, residual};
use crate::symbol::{hermitian_deviation, Symbol};
use crate::transform::{
    dft, discrete_quasiperiodicity, quasiperiodic_extension, sections, tfbt, BrillouinZone,
};
use crate::CMatrix;

/// Run-wide knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub tol_scale: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            tol_scale: 1.0,
        }
    }
}

impl Settings {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Measured value of one check against its limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Outcome {
    /// Passes when `value < limit · tol_scale`.
    pub fn below(value: f64, limit: f64, s: &Settings, detail: impl Into<String>) -> Self {
        let limit = limit * s.tol_scale;
        Self {
            passed: value < limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    /// Passes when `value > limit / tol_scale`.
    pub fn above(value: f64, limit: f64, s: &Settings, detail: impl Into<String>) -> Self {
        let limit = limit / s.tol_scale;
        Self {
            passed: value > limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    fn and(self, other: Outcome) -> Self {
        match (self.passed, other.passed) {
            (true, false) => other,
            (false, _) => self,
            (true, true) => Self {
                detail: format!("{}; {}", self.detail, other.detail),
                ..self
            },
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self {
            passed: false,
            value: f64::NAN,
            limit: f64::NAN,
            detail: detail.into(),
        }
    }
}

/// A registered check.
pub struct CheckSpec {
    pub id: &'static str,
    pub group: &'static str,
    pub description: &'static str,
    run: fn(&Settings) -> Result<Outcome>,
}

/// Result row of one executed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub group: &'static str,
    pub description: &'static str,
    #[serde(flatten)]
    pub outcome: Outcome,
}

macro_rules! check {
    ($id:literal, $group:literal, $desc:literal, $f:expr) => {
        CheckSpec {
            id: $id,
            group: $group,
            description: $desc,
            run: $f,
        }
    };
}

/// Every check, in report order.
pub fn checks() -> Vec<CheckSpec> {
    vec![
        check!("symbol.hermitian", "symbol", "f(e^ia) is Hermitian to 1e-12", symbol_hermitian),
        check!("symbol.closed_form", "symbol", "band functions match closed-form 2x2/3x3 eigenvalues to 1e-10", symbol_closed_form),
        check!("symbol.symmetry", "symbol", "real symbols have even bands to 1e-10", symbol_symmetry),
        check!("symbol.truncation", "symbol", "sup |f - f^[r]| <= sum_{|s|>r} |a_s|", symbol_truncation),
        check!("matrices.hermitian", "matrices", "Toeplitz and circulant sections are Hermitian to 1e-12", matrices_hermitian),
        check!("matrices.interior", "matrices", "circulant and Toeplitz agree away from the corners", matrices_interior),
        check!("matrices.row_sums", "matrices", "chains have zero row sums and a constant kernel", matrices_row_sums),
        check!("matrices.ssh_mirror", "matrices", "SSH matrices are symmetric and persymmetric", matrices_ssh_mirror),
        check!("matrices.similarity", "matrices", "BC and B^1/2 C B^1/2 share their spectrum to 1e-9", matrices_similarity),
        check!("transform.unitarity", "transform", "dft, sections and tfbt preserve norms to 1e-12", transform_unitarity),
        check!("transform.dft_oracle", "transform", "dft matches direct summation to 1e-10 for m <= 64", transform_dft_oracle),
        check!("transform.linearity", "transform", "tfbt is linear to 1e-12", transform_linearity),
        check!("transform.phase", "transform", "Q is invariant under global phase", transform_phase),
        check!("transform.circulant_q", "transform", "Q of circulant eigenvectors is |a_j| to 1e-10", transform_circulant_q),
        check!("spectra.decomposition", "spectra", "M = V L V* and V*V = I to 1e-9", spectra_decomposition),
        check!("spectra.split", "spectra", "near/far parts are orthogonal and complete", spectra_split),
        check!("spectra.lemma", "spectra", "residual < eps^2 implies |u_perp| < eps", spectra_lemma),
        check!("reconstruct.circulant", "reconstruct", "circulant points lie on the band to 1e-10", reconstruct_circulant),
        check!("reconstruct.convergence", "reconstruct", "bulk error is non-increasing along m = 40, 80, 160", reconstruct_convergence),
        check!("reconstruct.detectors", "reconstruct", "localized points equal gap modes for SSH and dislocated chains", reconstruct_detectors),
        check!("reconstruct.basis", "reconstruct", "points are invariant under degenerate re-bases", reconstruct_basis),
        check!("acceptance.c1", "acceptance", "circulant exactness", accept_c1),
        check!("acceptance.c2", "acceptance", "tridiagonal even-index exactness", accept_c2),
        check!("acceptance.c3", "acceptance", "odd-index convergence", accept_c3),
        check!("acceptance.c4", "acceptance", "exponential symbol at desk scale", accept_c4),
        check!("acceptance.c5", "acceptance", "SSH gap mode", accept_c5),
        check!("acceptance.c6", "acceptance", "dislocated gap mode", accept_c6),
        check!("acceptance.c7", "acceptance", "compact defect", accept_c7),
        check!("acceptance.c8", "acceptance", "near/far eigenspace lemma", accept_c8),
        check!("acceptance.c9", "acceptance", "unitarity suite", accept_c9),
        check!("acceptance.c10", "acceptance", "banded approximation bounds", accept_c10),
        check!("acceptance.c11", "acceptance", "delocalisation trend", accept_c11),
    ]
}

/// Runs the checks whose group or id is listed in `only` (all when empty).
pub fn run_checks(only: &[String], settings: &Settings) -> Vec<CheckResult> {
    let selected: Vec<CheckSpec> = checks()
        .into_iter()
        .filter(|c| only.is_empty() || only.iter().any(|o| o == c.group || o == c.id))
        .collect();
    selected
        .par_iter()
        .map(|c| CheckResult {
            id: c.id,
            group: c.group,
            description: c.description,
            outcome: (c.run)(settings).unwrap_or_else(|e| Outcome::fail(format!("error: {e}"))),
        })
        .collect()
}

/// Runs a single check by id.
pub fn run_check(id: &str, settings: &Settings) -> Option<CheckResult> {
    run_checks(&[id.to_string()], settings).into_iter().find(|r| r.id == id)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| random_complex(rng)).collect()
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| random_complex(rng));
    (&a + a.adjoint()).scale(0.5)
}

fn random_symbol(rng: &mut ChaCha8Rng, k: usize, r: usize) -> Result<Symbol> {
    let mut coeffs = vec![(0, random_hermitian(rng, k))];
    for s in 1..=r as i64 {
        let a = CMatrix::from_fn(k, k, |_, _| random_complex(rng)) / c(s as f64);
        coeffs.push((-s, a.adjoint()));
        coeffs.push((s, a));
    }
    Symbol::new(k, coeffs)
}

/// Real coefficients make `f(−α)` the transpose of `f(α)`, so the bands are even.
fn random_real_symbol(rng: &mut ChaCha8Rng, k: usize, r: usize) -> Result<Symbol> {
    let a0 = CMatrix::from_fn(k, k, |_, _| c(rng.random_range(-1.0..1.0)));
    let mut coeffs = vec![(0, (&a0 + a0.transpose()).scale(0.5))];
    for s in 1..=r as i64 {
        let a = CMatrix::from_fn(k, k, |_, _| c(rng.random_range(-1.0..1.0) / s as f64));
        coeffs.push((-s, a.transpose()));
        coeffs.push((s, a));
    }
    Symbol::new(k, coeffs)
}

fn external(data: CMatrix) -> Result<FiniteMatrix> {
    FiniteMatrix::new(data, 1, MatrixKind::External, "verify")
}

/// Direct `O(m²)` evaluation of the unitary DFT.
fn dft_direct(v: &[Complex64]) -> Vec<Complex64> {
    let m = v.len();
    let scale = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|j| {
            v.iter()
                .enumerate()
                .map(|(s, x)| x * Complex64::from_polar(scale, -2.0 * PI * ((j * s) % m) as f64 / m as f64))
                .sum()
        })
        .collect()
}

/// Eigenvalues of a 2×2 Hermitian matrix.
fn eig2(m: &CMatrix) -> Vec<f64> {
    let (a, d, b) = (m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]);
    let r = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
    vec![0.5 * (a + d) - r, 0.5 * (a + d) + r]
}

/// Eigenvalues of a 3×3 Hermitian matrix from the trigonometric root formula.
fn eig3(m: &CMatrix) -> Vec<f64> {
    let q = (0..3).map(|i| m[(i, i)].re).sum::<f64>() / 3.0;
    let off = m[(0, 1)].norm_sqr() + m[(0, 2)].norm_sqr() + m[(1, 2)].norm_sqr();
    let p = (((0..3).map(|i| (m[(i, i)].re - q).powi(2)).sum::<f64>() + 2.0 * off) / 6.0).sqrt();
    if p == 0.0 {
        return vec![q; 3];
    }
    let b = (m - CMatrix::identity(3, 3) * c(q)) / c(p);
    let phi = (b.determinant().re / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let mut out: Vec<f64> = (0..3)
        .map(|t| q + 2.0 * p * (phi + 2.0 * PI * t as f64 / 3.0).cos())
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn symbol_hermitian(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(1);
    let mut worst = 0.0_f64;
    for k in 1..=3 {
        for _ in 0..10 {
            let sym = random_symbol(&mut rng, k, 3)?;
            for _ in 0..20 {
                worst = worst.max(hermitian_deviation(&sym.evaluate(rng.random_range(-PI..PI))));
            }
        }
    }
    Ok(Outcome::below(worst, 1e-12, s, format!("max deviation {worst:.3e}")))
}

fn symbol_closed_form(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(2);
    let mut worst = 0.0_f64;
    for k in [2usize, 3] {
        for _ in 0..5 {
            let sym = random_symbol(&mut rng, k, 2)?;
            let bs = sym.band_functions(64)?;
            for (j, &alpha) in bs.grid().iter().enumerate() {
                let f = sym.evaluate(alpha);
                let closed = if k == 2 { eig2(&f) } else { eig3(&f) };
                for (p, v) in closed.iter().enumerate() {
                    worst = worst.max((bs.band(p)[j] - v).abs());
                }
            }
        }
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max difference {worst:.3e}")))
}

fn symbol_symmetry(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(3);
    let mut worst = 0.0_f64;
    for k in 1..=3 {
        let sym = random_real_symbol(&mut rng, k, 3)?;
        for m in [16usize, 31, 64] {
            let bs = sym.band_functions(m)?;
            let zone = BrillouinZone::new(m);
            let at = |a: f64| bs.grid().iter().position(|&x| x == a);
            for j in 1..(m as i64 + 1) / 2 {
                if let (Some(a), Some(b)) = (at(zone.alpha(j)), at(zone.alpha(-j))) {
                    for p in 0..k {
                        worst = worst.max((bs.band(p)[a] - bs.band(p)[b]).abs());
                    }
                }
            }
        }
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max asymmetry {worst:.3e}")))
}

fn symbol_truncation(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(4);
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=3 {
        let sym = random_symbol(&mut rng, k, 5)?;
        for r in 0..5 {
            let err = sym.difference(&sym.truncate(r))?.sup_norm(256)?;
            worst = worst.max(err - sym.tail_mass(r));
        }
    }
    // The excess is at most zero; shift so the check is a strict upper bound.
    Ok(Outcome::below(worst + 1e-12, 1e-12, s, format!("max excess over bound {worst:.3e}")))
}

fn matrices_hermitian(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(5);
    let mut worst = 0.0_f64;
    for k in 1..=3 {
        let sym = random_symbol(&mut rng, k, 2)?;
        for m in [5usize, 12] {
            worst = worst.max(toeplitz_matrix(&sym, m).hermitian_deviation());
            worst = worst.max(circulant_matrix(&sym, m)?.hermitian_deviation());
        }
    }
    Ok(Outcome::below(worst, 1e-12, s, format!("max deviation {worst:.3e}")))
}

fn matrices_interior(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(6);
    let mut worst = 0.0_f64;
    for k in 1..=3 {
        let r = 2;
        let sym = random_symbol(&mut rng, k, r)?;
        let m = 11;
        let (t, cm) = (toeplitz_matrix(&sym, m), circulant_matrix(&sym, m)?);
        for i in r * k..(m - r) * k {
            for j in r * k..(m - r) * k {
                worst = worst.max((t.get(i, j) - cm.get(i, j)).norm());
            }
        }
    }
    Ok(Outcome::below(worst, 1e-15, s, format!("max interior difference {worst:.3e}")))
}

fn matrices_row_sums(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(7);
    let mut worst = 0.0_f64;
    for n in [2usize, 9, 40] {
        let spacings: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let m = chain_capacitance(&spacings)?;
        for i in 0..m.dim() {
            worst = worst.max(m.data().row(i).iter().sum::<Complex64>().norm());
        }
        let eig = hermitian_eigen(&m)?;
        let v = eig.vector(0);
        let flat = 1.0 / ((n + 1) as f64).sqrt();
        worst = worst.max(eig.values()[0].abs());
        worst = worst.max(v.iter().map(|z| (z - c(flat)).norm()).fold(0.0, f64::max) * 1e-3);
    }
    Ok(Outcome::below(worst, 1e-12, s, format!("max row sum or kernel defect {worst:.3e}")))
}

fn matrices_ssh_mirror(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(8);
    let mut worst = 0.0_f64;
    for m in 1..10 {
        let p = SshParams {
            alpha: rng.random_range(-2.0..2.0),
            alpha_tilde: rng.random_range(-2.0..2.0),
            eta: rng.random_range(-2.0..2.0),
            beta1: rng.random_range(-2.0..2.0),
            beta2: rng.random_range(-2.0..2.0),
        };
        let mat = ssh_matrix(&p, m)?;
        let n = mat.dim();
        worst = worst.max(mat.hermitian_deviation());
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((mat.get(i, j) - mat.get(n - 1 - j, n - 1 - i)).norm());
            }
        }
    }
    Ok(Outcome::below(worst, 1e-15, s, format!("max mirror defect {worst:.3e}")))
}

fn matrices_similarity(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(9);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let n = rng.random_range(4..30);
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0)));
        let base = external((&a + a.transpose()).scale(0.5))?;
        let pert = compact_perturbation(&base, rng.random_range(1..=n), rng.random_range(-0.9..2.0))?;
        let mut general: Vec<f64> = pert.product.data().map(|z| z.re).complex_eigenvalues().iter().map(|z| z.re).collect();
        general.sort_by(f64::total_cmp);
        let eig = pert.eigenpairs();
        for (a, b) in general.iter().zip(eig.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Outcome::below(worst, 1e-9, s, format!("max spectral difference {worst:.3e}")))
}

fn norm_defects(rng: &mut ChaCha8Rng, count: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let k = rng.random_range(1..=3);
        let m = rng.random_range(1..=64);
        let u = random_vector(rng, m * k);
        let n = l2_norm(&u);
        let rel = |x: f64| (x - n).abs() / n;
        worst = worst.max(rel(l2_norm(&dft(&u))));
        worst = worst.max(rel(sections(&u, k)?.norm()));
        worst = worst.max(rel(tfbt(&u, k)?.norm()));
    }
    Ok(worst)
}

fn oracle_defect(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0_f64;
    for m in 1..=64 {
        let u = random_vector(rng, m);
        let fast = dft(&u);
        for (a, b) in fast.iter().zip(dft_direct(&u)) {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}

fn transform_unitarity(s: &Settings) -> Result<Outcome> {
    let worst = norm_defects(&mut s.rng(10), 200)?;
    Ok(Outcome::below(worst, 1e-12, s, format!("max relative norm change {worst:.3e}")))
}

fn transform_dft_oracle(s: &Settings) -> Result<Outcome> {
    let worst = oracle_defect(&mut s.rng(11));
    Ok(Outcome::below(worst, 1e-10, s, format!("max difference {worst:.3e}")))
}

fn transform_linearity(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(12);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let m = rng.random_range(1..=40);
        let (u, v) = (random_vector(&mut rng, m * k), random_vector(&mut rng, m * k));
        let (a, b) = (random_complex(&mut rng), random_complex(&mut rng));
        let w: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let (tu, tv, tw) = (tfbt(&u, k)?.interleave(), tfbt(&v, k)?.interleave(), tfbt(&w, k)?.interleave());
        for ((x, y), z) in tu.iter().zip(&tv).zip(&tw) {
            worst = worst.max((a * x + b * y - z).norm());
        }
    }
    Ok(Outcome::below(worst, 1e-12, s, format!("max defect {worst:.3e}")))
}

fn transform_phase(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(13);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let len = k * rng.random_range(1..=40);
        let u = random_vector(&mut rng, len);
        let n = l2_norm(&u);
        let unit: Vec<Complex64> = u.iter().map(|z| z / n).collect();
        let phase = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
        let rotated: Vec<Complex64> = unit.iter().map(|z| z * phase).collect();
        worst = worst.max((discrete_quasiperiodicity(&unit, k)? - discrete_quasiperiodicity(&rotated, k)?).abs());
    }
    Ok(Outcome::below(worst, 1e-12, s, format!("max change {worst:.3e}")))
}

fn transform_circulant_q(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(14);
    let mut worst = 0.0_f64;
    for k in 1..=3 {
        let sym = random_symbol(&mut rng, k, 2)?;
        for m in [5usize, 8, 17, 32] {
            let circ = circulant_matrix(&sym, m)?;
            let bands = sym.band_functions(m)?;
            let zone = BrillouinZone::new(m);
            for (j, &alpha) in bands.grid().iter().enumerate() {
                // With block (i, j) = a_{i−j} the eigenpair at α is (λ_p(−α), QP(u_p(−α), α)).
                let minus = zone.alpha(-(j as i64 - (m / 2) as i64));
                let jm = bands.grid().iter().position(|&a| a == minus).unwrap_or(j);
                for p in 0..k {
                    let u = quasiperiodic_extension(bands.vector(jm, p), alpha, m);
                    let res: f64 = mat_vec(circ.data(), &u)
                        .iter()
                        .zip(&u)
                        .map(|(x, y)| (x - y * bands.band(p)[jm]).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    let qe = (discrete_quasiperiodicity(&u, k)? - alpha.abs()).abs();
                    worst = worst.max(res);
                    worst = worst.max(qe);
                }
            }
        }
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max residual or Q error {worst:.3e}")))
}

fn spectra_decomposition(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(15);
    let mut mats = vec![
        ssh_matrix(&SshParams::default(), 20)?,
        dislocated_chain(1.0, 2.0, 4.0, 10)?,
        toeplitz_matrix(&Symbol::exponential(40)?, 200),
        circulant_matrix(&random_symbol(&mut rng, 3, 2)?, 40)?,
    ];
    mats.push(external(random_hermitian(&mut rng, 300))?);
    let mut worst = 0.0_f64;
    for m in &mats {
        let eig = hermitian_eigen(m)?;
        let scale = m.data().norm().max(1.0);
        worst = worst.max((eig.reconstruct() - m.data()).norm() / scale);
        let n = m.dim();
        worst = worst.max((eig.vectors().adjoint() * eig.vectors() - CMatrix::identity(n, n)).norm() / n as f64);
    }
    Ok(Outcome::below(worst, 1e-9, s, format!("max defect {worst:.3e}")))
}

/// A random Hermitian instance with a unit vector whose residual at `center` is below `eps²`.
struct PseudoPair {
    matrix: FiniteMatrix,
    center: f64,
    eps: f64,
    u: Vec<Complex64>,
}

fn pseudo_pair(rng: &mut ChaCha8Rng, n: usize) -> Result<Option<PseudoPair>> {
    let matrix = external(random_hermitian(rng, n))?;
    let eig = hermitian_eigen(&matrix)?;
    let i = rng.random_range(0..n);
    let center = eig.values()[i];
    let eps: f64 = rng.random_range(0.05..0.6);
    let spread = eig.values().iter().map(|v| (v - center).abs()).fold(0.0, f64::max).max(1.0);
    let mut u = vec![c(0.0); n];
    for (j, &v) in eig.values().iter().enumerate() {
        let weight = if (v - center).abs() <= 0.25 * eps * eps {
            random_complex(rng)
        } else {
            random_complex(rng) * (0.3 * eps * eps / (spread * (n as f64).sqrt()))
        };
        for (acc, x) in u.iter_mut().zip(eig.vectors().column(j).iter()) {
            *acc += x * weight;
        }
    }
    let norm = l2_norm(&u);
    u.iter_mut().for_each(|z| *z /= norm);
    if residual(&matrix, center, &u)? >= eps * eps {
        return Ok(None);
    }
    Ok(Some(PseudoPair { matrix, center, eps, u }))
}

/// Largest `‖u⊥‖/ε` and `√(1−ε²)/‖u∥‖` over `count` instances; both must stay below one.
fn lemma_ratios(rng: &mut ChaCha8Rng, count: usize, max_n: usize) -> Result<(f64, usize)> {
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < count {
        let n = rng.random_range(2..=max_n);
        let Some(pair) = pseudo_pair(rng, n)? else { continue };
        let eig = hermitian_eigen(&pair.matrix)?;
        let split = near_far_split(&eig, pair.center, pair.eps, &pair.u)?;
        worst = worst.max(split.perp_norm() / pair.eps);
        worst = worst.max((1.0 - pair.eps * pair.eps).sqrt() / split.parallel_norm());
        done += 1;
    }
    Ok((worst, done))
}

fn spectra_split(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(16);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let n = rng.random_range(2..30);
        let m = external(random_hermitian(&mut rng, n))?;
        let eig = hermitian_eigen(&m)?;
        let u = random_vector(&mut rng, n);
        let norm = l2_norm(&u);
        let u: Vec<Complex64> = u.iter().map(|z| z / norm).collect();
        let split = near_far_split(&eig, rng.random_range(-1.0..1.0), rng.random_range(0.05..1.0), &u)?;
        worst = worst.max((split.parallel_norm().powi(2) + split.perp_norm().powi(2) - 1.0).abs());
        let ip: Complex64 = split.u_parallel.iter().zip(&split.u_perp).map(|(a, b)| a.conj() * b).sum();
        worst = worst.max(ip.norm());
        for ((a, b), x) in split.u_parallel.iter().zip(&split.u_perp).zip(&u) {
            worst = worst.max((a + b - x).norm());
        }
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max defect {worst:.3e}")))
}

fn spectra_lemma(s: &Settings) -> Result<Outcome> {
    let (worst, n) = lemma_ratios(&mut s.rng(17), 30, 30)?;
    Ok(Outcome::below(worst, 1.0, s, format!("{n} instances, worst ratio {worst:.4}")))
}

fn circulant_defect(m: usize, rng: Option<&mut ChaCha8Rng>) -> Result<f64> {
    let circ = circulant_matrix(&Symbol::monomer(2.0, -1.0)?, m)?;
    let eig = hermitian_eigen(&circ)?;
    let mut vectors = eig.vectors().clone();
    if let Some(rng) = rng {
        for cluster in eig.clusters(1e-8) {
            if cluster.len() == 2 {
                let (i, j) = (cluster.start, cluster.start + 1);
                let theta: f64 = rng.random_range(0.0..PI);
                let phase = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
                let (a, b) = (vectors.column(i).clone_owned(), vectors.column(j).clone_owned());
                vectors.set_column(i, &(&a * c(theta.cos()) + &b * (phase * theta.sin())));
                vectors.set_column(j, &(&a * (-phase.conj() * theta.sin()) + &b * c(theta.cos())));
            }
        }
    }
    let rec = reconstruct_eigenpairs(eig.values(), &vectors, 1)?;
    let zone = BrillouinZone::new(m);
    let mut worst = 0.0_f64;
    for p in rec.points() {
        worst = worst.max((p.lambda - (2.0 - 2.0 * p.alpha_est.cos())).abs());
        let nearest = zone.alphas().iter().map(|a| (a.abs() - p.alpha_est).abs()).fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

fn reconstruct_circulant(s: &Settings) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for m in [8usize, 16, 32] {
        worst = worst.max(circulant_defect(m, None)?);
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max defect {worst:.3e}")))
}

fn bulk_max(mat: &FiniteMatrix, sym: &Symbol) -> Result<f64> {
    let mut rec = reconstruct_bands(mat, sym.k())?;
    let bands = sym.band_functions(REFERENCE_GRID)?;
    Ok(compare_to_symbol(&mut rec, &bands)?.bulk.map_or(f64::NAN, |b| b.max))
}

fn reconstruct_convergence(s: &Settings) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut detail = Vec::new();
    for sym in [Symbol::monomer(2.0, -1.0)?, Symbol::dimer(1.0, 2.0)?] {
        let errs: Vec<f64> = [40usize, 80, 160]
            .iter()
            .map(|&m| bulk_max(&toeplitz_matrix(&sym, m), &sym))
            .collect::<Result<_>>()?;
        for w in errs.windows(2) {
            worst = worst.max(w[1] / w[0]);
        }
        detail.push(format!("k={}: {:.4} {:.4} {:.4}", sym.k(), errs[0], errs[1], errs[2]));
    }
    Ok(Outcome::below(worst, 1.1, s, format!("max growth ratio {worst:.3} ({})", detail.join("; "))))
}

fn reconstruct_detectors(s: &Settings) -> Result<Outcome> {
    let mut mismatches = 0.0;
    let mut detail = Vec::new();
    for name in ["ssh", "dislocated"] {
        let scenario = Scenario::default_for(name).expect("built-in scenario");
        let bundle = run_scenario(&scenario, REFERENCE_GRID)?;
        let localized: Vec<usize> = bundle.reconstruction.points().iter().filter(|p| p.localized).map(|p| p.index).collect();
        let modes: Vec<usize> = bundle.gaps.gap_modes.iter().map(|g| g.index).collect();
        if localized != modes {
            mismatches += 1.0;
        }
        detail.push(format!("{name}: localized {localized:?}, gap modes {modes:?}"));
    }
    Ok(Outcome::below(mismatches, 0.5, s, detail.join("; ")))
}

fn reconstruct_basis(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(18);
    let mut worst = 0.0_f64;
    for m in [8usize, 12, 20] {
        worst = worst.max(circulant_defect(m, Some(&mut rng))?);
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max defect {worst:.3e}")))
}

fn accept_c1(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(101);
    let mut worst = 0.0_f64;
    for m in [8usize, 16, 32] {
        worst = worst.max(circulant_defect(m, None)?);
        for _ in 0..5 {
            worst = worst.max(circulant_defect(m, Some(&mut rng))?);
        }
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max |lambda - f(Q)| or grid distance {worst:.3e}")))
}

fn accept_c2(s: &Settings) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut at = (0, 0);
    for m in [20usize, 40, 80] {
        for s_idx in (2..=m).step_by(2) {
            let (_, u) = tridiagonal_mode(2.0, -1.0, m, s_idx);
            let err = (discrete_quasiperiodicity(&u, 1)? - PI * s_idx as f64 / m as f64).abs();
            if err > worst {
                worst = err;
                at = (m, s_idx);
            }
        }
    }
    Ok(Outcome::below(worst, 1e-10, s, format!("max |Q - pi s/m| {worst:.3e} at (m, s) = {at:?}")))
}

/// `round(0.3·m)`, moved up to the next odd integer when even.
pub fn odd_track(m: usize) -> usize {
    let s = (0.3 * m as f64).round() as usize;
    if s % 2 == 0 {
        s + 1
    } else {
        s
    }
}

fn accept_c3(s: &Settings) -> Result<Outcome> {
    let errs: Vec<f64> = [41usize, 81, 161, 321]
        .iter()
        .map(|&m| {
            let s_idx = odd_track(m);
            let (_, u) = tridiagonal_mode(2.0, -1.0, m, s_idx);
            Ok((discrete_quasiperiodicity(&u, 1)? - PI * s_idx as f64 / m as f64).abs())
        })
        .collect::<Result<_>>()?;
    let worst = errs.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
    Ok(Outcome::above(worst, 1.5, s, format!("errors {}, smallest ratio {worst:.3}", errs.iter().map(|e| format!("{e:.4e}")).collect::<Vec<_>>().join(" "))))
}

fn accept_c4(s: &Settings) -> Result<Outcome> {
    let sym = Symbol::exponential(40)?;
    let e30 = bulk_max(&toeplitz_matrix(&sym, 30), &sym)?;
    let e120 = bulk_max(&toeplitz_matrix(&sym, 120), &sym)?;
    let first = Outcome::below(e30, 5e-2, s, format!("m=30 bulk max {e30:.4}"));
    let second = Outcome::below(e120, e30, s, format!("m=120 bulk max {e120:.4}"));
    Ok(first.and(second))
}

fn accept_c5(s: &Settings) -> Result<Outcome> {
    let bundle = run_scenario(&Scenario::default_for("ssh").expect("built-in"), REFERENCE_GRID)?;
    let points = bundle.reconstruction.points();
    let modes = &bundle.gaps.gap_modes;
    let count = Outcome::below((modes.len() as f64 - 1.0).abs(), 0.5, s, format!("{} gap modes", modes.len()));
    let Some(mode) = modes.first() else { return Ok(count) };
    let idx = mode.index - 1;
    let mut iprs: Vec<f64> = points.iter().map(|p| p.ipr).collect();
    iprs.sort_by(f64::total_cmp);
    let median = 0.5 * (iprs[(iprs.len() - 1) / 2] + iprs[iprs.len() / 2]);
    let ipr_ratio = points[idx].ipr / median;
    let max_bin = bundle.reconstruction.profile(idx).iter().fold(0.0_f64, |a, &b| a.max(b));
    let non_gap = points
        .iter()
        .filter(|p| !modes.iter().any(|g| g.index == p.index))
        .map(|p| p.band_error.unwrap_or(f64::INFINITY))
        .fold(0.0_f64, f64::max);
    Ok(count
        .and(Outcome::above(ipr_ratio, 10.0, s, format!("gap mode ipr {ipr_ratio:.2}x median")))
        .and(Outcome::below(max_bin, 0.2, s, format!("max bin weight {max_bin:.4}")))
        .and(Outcome::below(non_gap, 0.1, s, format!("max non-gap band error {non_gap:.4}"))))
}

fn accept_c6(s: &Settings) -> Result<Outcome> {
    let bundle = run_scenario(&Scenario::default_for("dislocated").expect("built-in"), REFERENCE_GRID)?;
    let modes = &bundle.gaps.gap_modes;
    let flagged = modes.iter().all(|g| bundle.reconstruction.points()[g.index - 1].localized);
    let bulk = bundle.stats.as_ref().and_then(|st| st.bulk).map_or(f64::INFINITY, |b| b.max);
    Ok(Outcome::below((modes.len() as f64 - 1.0).abs(), 0.5, s, format!("{} gap modes", modes.len()))
        .and(Outcome::below(if flagged { 0.0 } else { 1.0 }, 0.5, s, "gap mode flagged localized"))
        .and(Outcome::below(bulk, 0.1, s, format!("bulk band error {bulk:.4}"))))
}

fn compact_bundle(delta: f64) -> Result<crate::reconstruct::Bundle> {
    let scenario = Scenario::CompactDefect {
        s1: 1.0,
        s2: 2.0,
        dimers: 20,
        delta,
        index: None,
    };
    run_scenario(&scenario, REFERENCE_GRID)
}

fn accept_c7(s: &Settings) -> Result<Outcome> {
    let negative = compact_bundle(-0.3)?;
    let positive = compact_bundle(0.5)?;
    let neg_modes = negative.gaps.gap_modes.len();
    let neg_bulk = negative.stats.as_ref().and_then(|st| st.bulk).map_or(f64::INFINITY, |b| b.max);
    let pos_modes = &positive.gaps.gap_modes;
    let pos_flagged = pos_modes.iter().all(|g| positive.reconstruction.points()[g.index - 1].localized);
    let neg_lambdas: Vec<String> = negative.gaps.gap_modes.iter().map(|g| format!("{:.4}", g.lambda)).collect();
    Ok(Outcome::below(neg_modes as f64, 0.5, s, format!("delta=-0.3: {neg_modes} gap modes {neg_lambdas:?}"))
        .and(Outcome::below(neg_bulk, 0.1, s, format!("delta=-0.3 bulk error {neg_bulk:.4}")))
        .and(Outcome::above(pos_modes.len() as f64, 0.5, s, format!("delta=+0.5: {} gap modes", pos_modes.len())))
        .and(Outcome::below(if pos_flagged { 0.0 } else { 1.0 }, 0.5, s, "delta=+0.5 gap modes flagged localized")))
}

fn accept_c8(s: &Settings) -> Result<Outcome> {
    let (worst, n) = lemma_ratios(&mut s.rng(108), 100, 50)?;
    Ok(Outcome::below(worst, 1.0, s, format!("{n} instances, worst ratio {worst:.4}")))
}

fn accept_c9(s: &Settings) -> Result<Outcome> {
    let mut rng = s.rng(109);
    let norms = norm_defects(&mut rng, 1000)?;
    let oracle = oracle_defect(&mut rng);
    Ok(Outcome::below(norms, 1e-12, s, format!("max relative norm change {norms:.3e}"))
        .and(Outcome::below(oracle, 1e-10, s, format!("max oracle difference {oracle:.3e}"))))
}

fn accept_c10(s: &Settings) -> Result<Outcome> {
    let sym = Symbol::exponential(40)?;
    let m = 60;
    let eig = hermitian_eigen(&toeplitz_matrix(&sym, m))?;
    let mut sup_err = 0.0_f64;
    let mut excess = f64::NEG_INFINITY;
    for r in 2..=10usize {
        let truncated = sym.truncate(r);
        let sampled = sym.difference(&truncated)?.sup_norm(1024)?;
        let analytic = 2f64.powi(1 - r as i32);
        sup_err = sup_err.max((sampled - analytic).abs());
        let banded = toeplitz_matrix(&truncated, m);
        for i in 0..eig.len() {
            excess = excess.max(residual(&banded, eig.values()[i], &eig.vector(i))? - sampled);
        }
    }
    Ok(Outcome::below(sup_err, 1e-8, s, format!("max |sampled - 2^(1-r)| {sup_err:.3e}"))
        .and(Outcome::below(excess + 1e-12, 1e-12, s, format!("max residual excess over bound {excess:.3e}"))))
}

/// Sup norms of the tracked `s = round(0.3·m)` eigenvector of the tridiagonal family.
pub fn delocalisation_track(sizes: &[usize]) -> Result<Vec<f64>> {
    let sym = Symbol::monomer(2.0, -1.0)?;
    sizes
        .iter()
        .map(|&m| {
            let eig = hermitian_eigen(&toeplitz_matrix(&sym, m))?;
            let s_idx = ((0.3 * m as f64).round() as usize).max(1);
            Ok(localization_metrics(&eig.vector(s_idx - 1)).sup_ratio)
        })
        .collect()
}

fn accept_c11(s: &Settings) -> Result<Outcome> {
    let sups = delocalisation_track(&[40, 80, 160, 320])?;
    let worst = sups.windows(2).map(|w| w[1] / w[0]).fold(0.0_f64, f64::max);
    Ok(Outcome::below(worst, 1.05, s, format!("sup norms {sups:.4?}, max ratio {worst:.3}")))
}
