//! Matrix symbols `f(e^{iα}) = Σ_s a_s e^{iαs}` and their band functions.
//!
//! A [`Symbol`] stores finitely many `k × k` Fourier coefficient blocks. It is
//! always Hermitian (`a_{−s} = a_s^*`), so `f(e^{iα})` is a Hermitian matrix
//! for every `α` and its sorted eigenvalues are the band functions
//! `λ_1(α) ≤ … ≤ λ_k(α)`.
//!
//! ```
//! use tfbt::symbol::Symbol;
//!
//! let sym = Symbol::monomer(2.0, -1.0).unwrap();
//! let bands = sym.band_functions(4).unwrap();
//! // 2 − 2cos α on α ∈ {−π, −π/2, 0, π/2}.
//! let values: Vec<f64> = bands.band(0).iter().map(|x| x.round()).collect();
//! assert_eq!(values, vec![4.0, 2.0, 0.0, 2.0]);
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{num, round15};
use crate::spectra::eigh;
use crate::transform::BrillouinZone;
use crate::CMatrix;

/// Relative tolerance of the Hermitian symbol condition.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Band ranges closer than this count as crossing.
pub const CROSSING_TOL: f64 = 1e-8;

/// Default lower bound on `|λ_p′|` away from `α ∈ {0, ±π}`.
pub const VAN_HOVE_TOL: f64 = 1e-6;

/// Tail bound below which an infinite symbol is considered resolved.
pub const TAIL_TOL: f64 = 1e-10;

/// Decay of the coefficients dropped from an infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// `‖a_s‖ ≤ constant · |s|^{−exponent}`, with `exponent > 1`.
    Power { exponent: f64, constant: f64 },
    /// `‖a_s‖ ≤ constant · ratio^{|s|}`, with `0 < ratio < 1`.
    Geometric { ratio: f64, constant: f64 },
}

impl TailModel {
    /// Upper bound on `Σ_{|s|>r} ‖a_s‖`.
    pub fn bound(&self, r: usize) -> f64 {
        match *self {
            TailModel::Power { exponent, constant } => {
                if exponent <= 1.0 {
                    return f64::INFINITY;
                }
                // Σ_{s>r} s^{−p} ≤ ∫_r^∞ x^{−p} dx, and r = 0 keeps the s = 1 term.
                let integral = if r == 0 {
                    1.0 + 1.0 / (exponent - 1.0)
                } else {
                    (r as f64).powf(1.0 - exponent) / (exponent - 1.0)
                };
                2.0 * constant * integral
            }
            TailModel::Geometric { ratio, constant } => {
                if !(0.0..1.0).contains(&ratio) {
                    return f64::INFINITY;
                }
                2.0 * constant * ratio.powi(r as i32 + 1) / (1.0 - ratio)
            }
        }
    }

    /// Smallest radius whose tail bound is below `tol`.
    pub fn radius_for(&self, tol: f64) -> Option<usize> {
        (0..100_000).find(|&r| self.bound(r) < tol)
    }
}

/// Hermitian matrix symbol with finitely supported coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymbolDoc", into = "SymbolDoc")]
pub struct Symbol {
    k: usize,
    coeffs: BTreeMap<i64, CMatrix>,
    tail: Option<TailModel>,
}

fn real_block(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0))
}

fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise deviation `|a_ij − conj(a_ji)|`.
pub(crate) fn hermitian_deviation(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// Spectral norm of a Hermitian matrix.
fn hermitian_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].norm();
    }
    let (values, _) = eigh(a);
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of an arbitrary block, via its singular values.
fn block_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].norm();
    }
    a.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(*v))
}

impl Symbol {
    /// Validates and stores the coefficient blocks.
    ///
    /// Every block must be `k × k`, the support must be symmetric and
    /// `a_{−s}` must equal `a_s^*` up to [`HERMITIAN_TOL`] relative to the
    /// largest entry.
    pub fn new(k: usize, coeffs: impl IntoIterator<Item = (i64, CMatrix)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSymbol("block size must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for (s, a) in coeffs {
            if a.nrows() != k || a.ncols() != k {
                return Err(Error::InvalidSymbol(format!(
                    "coefficient a_{s} is {}x{}, expected {k}x{k}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if map.insert(s, a).is_some() {
                return Err(Error::InvalidSymbol(format!("coefficient a_{s} given twice")));
            }
        }
        let scale = map.values().map(max_abs).fold(1.0_f64, f64::max);
        for (&s, a) in &map {
            let Some(b) = map.get(&-s) else {
                return Err(Error::InvalidSymbol(format!("a_{s} present but a_{} missing", -s)));
            };
            let dev = max_abs(&(b - a.adjoint()));
            if dev > HERMITIAN_TOL * scale {
                return Err(Error::InvalidSymbol(format!(
                    "a_{} is not the conjugate transpose of a_{s} (deviation {dev:.3e})",
                    -s
                )));
            }
        }
        Ok(Self {
            k,
            coeffs: map,
            tail: None,
        })
    }

    /// `k = 1` symbol from real coefficients `a_s`; `a_{−s}` is filled in for `s > 0`.
    pub fn scalar(coeffs: &[(i64, f64)]) -> Result<Self> {
        let mut map: BTreeMap<i64, CMatrix> = BTreeMap::new();
        for &(s, a) in coeffs {
            for t in [s, -s] {
                if let Some(prev) = map.insert(t, real_block(&[&[a]])) {
                    if prev[(0, 0)].re != a {
                        return Err(Error::InvalidSymbol(format!("conflicting values for a_{t}")));
                    }
                }
            }
        }
        Self::new(1, map)
    }

    /// Nearest-neighbour chain: `a_0` on the diagonal, `a_{±1}` off it.
    pub fn monomer(a0: f64, a1: f64) -> Result<Self> {
        Self::scalar(&[(0, a0), (1, a1)])
    }

    /// Two-site cell with on-site value `diag`, intra-cell coupling `intra`
    /// and inter-cell coupling `inter`.
    ///
    /// Site 1 of cell `n` couples to site 2 of cell `n − 1`, so
    /// `a_1 = [[0, inter], [0, 0]]`.
    pub fn dimer_couplings(diag: f64, intra: f64, inter: f64) -> Result<Self> {
        let a0 = real_block(&[&[diag, intra], &[intra, diag]]);
        let a1 = real_block(&[&[0.0, inter], &[0.0, 0.0]]);
        let am1 = a1.transpose();
        Self::new(2, [(0, a0), (1, a1), (-1, am1)])
    }

    /// Symbol of the infinite dimer chain with alternating spacings `s1`
    /// (inside a cell) and `s2` (between cells).
    pub fn dimer(s1: f64, s2: f64) -> Result<Self> {
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(Error::InvalidSymbol(format!("spacings must be positive, got {s1}, {s2}")));
        }
        Self::dimer_couplings(1.0 / s1 + 1.0 / s2, -1.0 / s1, -1.0 / s2)
    }

    /// `f(e^{iα}) = Σ_p −2^{−|p|} e^{ipα}`, truncated at `|p| ≤ r_max`.
    pub fn exponential(r_max: usize) -> Result<Self> {
        let coeffs: Vec<(i64, f64)> = (0..=r_max as i64)
            .map(|p| (p, -(0.5_f64).powi(p as i32)))
            .collect();
        Ok(Self::scalar(&coeffs)?.with_tail(TailModel::Geometric {
            ratio: 0.5,
            constant: 1.0,
        }))
    }

    /// Records the decay model of the coefficients beyond the stored support.
    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Largest `|s|` with a stored coefficient.
    pub fn radius(&self) -> usize {
        self.coeffs.keys().map(|s| s.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn coeff(&self, s: i64) -> Option<&CMatrix> {
        self.coeffs.get(&s)
    }

    /// Stored coefficients in increasing `s`.
    pub fn coeffs(&self) -> impl Iterator<Item = (i64, &CMatrix)> {
        self.coeffs.iter().map(|(&s, a)| (s, a))
    }

    pub fn tail(&self) -> Option<&TailModel> {
        self.tail.as_ref()
    }

    /// `Σ_s a_s e^{iαs}`.
    pub fn evaluate(&self, alpha: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.k, self.k);
        for (&s, a) in &self.coeffs {
            out += a * Complex64::from_polar(1.0, alpha * s as f64);
        }
        out
    }

    /// The `r`-banded approximation: coefficients with `|s| > r` dropped.
    pub fn truncate(&self, r: usize) -> Symbol {
        Symbol {
            k: self.k,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(s, _)| s.unsigned_abs() as usize <= r)
                .map(|(&s, a)| (s, a.clone()))
                .collect(),
            tail: None,
        }
    }

    /// `Σ_{|s|>r} ‖a_s‖` over the stored coefficients.
    pub fn tail_mass(&self, r: usize) -> f64 {
        self.coeffs
            .iter()
            .filter(|(s, _)| s.unsigned_abs() as usize > r)
            .map(|(_, a)| block_norm(a))
            .sum()
    }

    /// Coefficient-wise difference `self − other`.
    pub fn difference(&self, other: &Symbol) -> Result<Symbol> {
        if self.k != other.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: other.k,
            });
        }
        let mut coeffs = self.coeffs.clone();
        for (&s, b) in &other.coeffs {
            let entry = coeffs.entry(s).or_insert_with(|| CMatrix::zeros(self.k, self.k));
            *entry -= b;
        }
        Ok(Symbol {
            k: self.k,
            coeffs,
            tail: None,
        })
    }

    /// `max_j ‖f(e^{iα_j})‖₂` over a Brillouin grid of `samples` points.
    ///
    /// This is a lower bound on `‖f‖∞` that converges as `samples` grows. The
    /// grid always contains `α = 0`.
    pub fn sup_norm(&self, samples: usize) -> Result<f64> {
        if samples < 64 {
            return Err(Error::InvalidParameter(format!(
                "sup norm needs at least 64 samples, got {samples}"
            )));
        }
        let zone = BrillouinZone::new(samples);
        Ok((0..samples)
            .into_par_iter()
            .map(|j| hermitian_norm(&self.evaluate(zone.alpha(j as i64))))
            .reduce(|| 0.0, f64::max))
    }

    /// Band functions on the discretised Brillouin zone of size `m`.
    pub fn band_functions(&self, m: usize) -> Result<BandStructure> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("band grid needs m >= 2, got {m}")));
        }
        let grid = BrillouinZone::new(m).alphas();
        let scale = self.coeffs.values().map(max_abs).fold(1.0_f64, f64::max);
        let samples: Vec<(f64, Vec<f64>, Vec<Vec<Complex64>>)> = grid
            .par_iter()
            .map(|&alpha| {
                let f = self.evaluate(alpha);
                let dev = hermitian_deviation(&f);
                let (values, vectors) = eigh(&f);
                let vectors = (0..self.k)
                    .map(|p| vectors.column(p).iter().copied().collect())
                    .collect();
                (dev, values, vectors)
            })
            .collect();
        let deviation = samples.iter().fold(0.0_f64, |acc, s| acc.max(s.0));
        if deviation > HERMITIAN_TOL * scale * self.coeffs.len().max(1) as f64 {
            return Err(Error::NotHermitian { deviation });
        }
        let values: Vec<Vec<f64>> = (0..self.k)
            .map(|p| samples.iter().map(|s| s.1[p]).collect())
            .collect();
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let derivatives = values
            .iter()
            .map(|band| {
                (0..m)
                    .map(|j| match j {
                        0 => (band[1] - band[0]) / h,
                        j if j == m - 1 => (band[j] - band[j - 1]) / h,
                        j => (band[j + 1] - band[j - 1]) / (2.0 * h),
                    })
                    .collect()
            })
            .collect();
        let vectors = samples.into_iter().map(|s| s.2).collect();
        Ok(BandStructure {
            k: self.k,
            grid,
            values,
            derivatives,
            vectors,
            hermitian_deviation: deviation,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// `{"k": …, "coeffs": [{"s": …, "re": [[…]], "im": [[…]]}]}`, entries at 15 significant digits.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("symbol serialisation cannot fail")
    }
}

impl From<Symbol> for SymbolDoc {
    fn from(sym: Symbol) -> Self {
        let k = sym.k;
        let part = |a: &CMatrix, f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..k)
                .map(|i| (0..k).map(|j| round15(f(&a[(i, j)]))).collect())
                .collect()
        };
        SymbolDoc {
            k,
            coeffs: sym
                .coeffs
                .iter()
                .map(|(&s, a)| CoeffDoc {
                    s,
                    re: part(a, |z| z.re),
                    im: Some(part(a, |z| z.im)),
                })
                .collect(),
            tail: sym.tail,
        }
    }
}

impl TryFrom<SymbolDoc> for Symbol {
    type Error = Error;

    fn try_from(doc: SymbolDoc) -> Result<Self> {
        doc.into_symbol()
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct CoeffDoc {
    s: i64,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Serialize, Deserialize)]
struct SymbolDoc {
    k: usize,
    coeffs: Vec<CoeffDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailModel>,
}

impl SymbolDoc {
    fn into_symbol(self) -> Result<Symbol> {
        let k = self.k;
        let mut blocks = Vec::with_capacity(self.coeffs.len());
        for c in self.coeffs {
            let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == k && rows.iter().all(|r| r.len() == k);
            if !shape_ok(&c.re) || !c.im.as_ref().map_or(true, shape_ok) {
                return Err(Error::InvalidSymbol(format!("coefficient a_{} is not {k}x{k}", c.s)));
            }
            let block = CMatrix::from_fn(k, k, |i, j| {
                Complex64::new(c.re[i][j], c.im.as_ref().map_or(0.0, |im| im[i][j]))
            });
            blocks.push((c.s, block));
        }
        let sym = Symbol::new(k, blocks)?;
        Ok(match self.tail {
            Some(t) => sym.with_tail(t),
            None => sym,
        })
    }
}

/// Sorted band functions, their derivatives and polarized eigenvectors on a grid.
#[derive(Debug, Clone)]
pub struct BandStructure {
    k: usize,
    grid: Vec<f64>,
    values: Vec<Vec<f64>>,
    derivatives: Vec<Vec<f64>>,
    vectors: Vec<Vec<Vec<Complex64>>>,
    hermitian_deviation: f64,
}

impl BandStructure {
    /// Number of bands.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Ascending quasiperiodicities in `[−π, π)`.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Samples of band `p` (zero-based) on the grid.
    pub fn band(&self, p: usize) -> &[f64] {
        &self.values[p]
    }

    pub fn derivative(&self, p: usize) -> &[f64] {
        &self.derivatives[p]
    }

    /// Polarized unit eigenvector of band `p` at grid point `j`.
    pub fn vector(&self, j: usize, p: usize) -> &[Complex64] {
        &self.vectors[j][p]
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.hermitian_deviation
    }

    /// `λ_p(α)` by periodic piecewise-linear interpolation on the grid.
    pub fn eval(&self, p: usize, alpha: f64) -> f64 {
        let m = self.grid.len();
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let t = (alpha - self.grid[0]) / h;
        let lo = t.floor();
        let frac = t - lo;
        let i = (lo as i64).rem_euclid(m as i64) as usize;
        let band = &self.values[p];
        band[i] * (1.0 - frac) + band[(i + 1) % m] * frac
    }

    /// `min_p |λ − λ_p(α)|`.
    pub fn distance(&self, lambda: f64, alpha: f64) -> f64 {
        (0..self.k)
            .map(|p| (lambda - self.eval(p, alpha)).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `[min, max]` of each band.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .map(|b| {
                b.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .collect()
    }

    /// Distance from the bottom of the first band to the top of the last.
    pub fn span(&self) -> f64 {
        let r = self.ranges();
        r.last().map_or(0.0, |l| l.1) - r.first().map_or(0.0, |f| f.0)
    }

    /// Open intervals between consecutive band ranges, each shrunk by `margin` on both sides.
    ///
    /// Overlapping bands and gaps narrower than `2·margin` produce no interval.
    pub fn gaps(&self, margin: f64) -> Vec<(f64, f64)> {
        let ranges = self.ranges();
        let mut out = Vec::new();
        let mut top = f64::NEG_INFINITY;
        for w in ranges.windows(2) {
            top = top.max(w[0].1);
            let (lo, hi) = (top + margin, w[1].0 - margin);
            if lo < hi {
                out.push((lo, hi));
            }
        }
        out
    }

    /// Checks the no-crossing, no-van-Hove-point and Hermitian assumptions.
    ///
    /// `tol` bounds `|λ_p′|` from below on grid points other than `α = 0` and
    /// the two ends of the grid.
    pub fn check_assumptions(&self, tol: f64) -> AssumptionReport {
        let m = self.grid.len();
        let ranges = self.ranges();
        let separation = ranges
            .windows(2)
            .map(|w| w[1].0 - w[0].1)
            .fold(f64::INFINITY, f64::min);
        let no_crossings = Check {
            passed: separation > CROSSING_TOL,
            value: separation,
            detail: if self.k == 1 {
                "single band".into()
            } else {
                format!("smallest separation between band ranges {separation:.6e}")
            },
        };

        let mut min_slope = f64::INFINITY;
        let mut at = 0.0;
        for deriv in &self.derivatives {
            for j in 1..m.saturating_sub(1) {
                if self.grid[j] == 0.0 {
                    continue;
                }
                if deriv[j].abs() < min_slope {
                    min_slope = deriv[j].abs();
                    at = self.grid[j];
                }
            }
        }
        let no_van_hove = Check {
            passed: min_slope > tol,
            value: min_slope,
            detail: format!("min |dλ/dα| {min_slope:.6e} at α = {at:.6}"),
        };

        let hermitian = Check {
            passed: self.hermitian_deviation <= HERMITIAN_TOL * 16.0,
            value: self.hermitian_deviation,
            detail: format!("max |f − f*| {:.3e}", self.hermitian_deviation),
        };

        let grid = Check {
            passed: m >= 16,
            value: m as f64,
            detail: format!("{m} grid points"),
        };

        AssumptionReport {
            no_crossings,
            no_van_hove,
            hermitian,
            grid,
        }
    }

    /// CSV with header `alpha,band_index,lambda,dlambda`; band indices are 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,band_index,lambda,dlambda\n");
        for p in 0..self.k {
            for (j, &alpha) in self.grid.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    num(alpha),
                    p + 1,
                    num(self.values[p][j]),
                    num(self.derivatives[p][j])
                );
            }
        }
        out
    }
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

/// Per-assumption results of [`BandStructure::check_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub no_crossings: Check,
    pub no_van_hove: Check,
    pub hermitian: Check,
    pub grid: Check,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.no_crossings.passed && self.no_van_hove.passed && self.hermitian.passed && self.grid.passed
    }
}
