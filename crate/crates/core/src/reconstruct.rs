//! From finite eigenpairs to reconstructed band diagrams.
//!
//! [`reconstruct_bands`] turns every eigenpair `(λ, u)` of a finite matrix
//! into a [`ReconstructionPoint`] at `(Q(u), λ)`. Comparing the points with
//! the band functions of the underlying periodic symbol
//! ([`compare_to_symbol`]) measures how well the bands are recovered, and
//! [`detect_gaps`] picks out eigenvalues that sit in band gaps.
//!
//! [`run_scenario`] chains all of this for the built-in systems and returns a
//! [`Bundle`] that can be written to disk.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format::{num, round15};
use crate::matrices::{
    capacitance_1d, chain_capacitance, circulant_matrix, compact_perturbation, dimer_spacings,
    dislocated_chain, load_matrix, ssh_matrix, toeplitz_matrix, CompactPerturbation, FiniteMatrix,
    SshSpec,
};
use crate::spectra::{hermitian_eigen, l2_norm, localization_metrics, EigenDecomposition};
use crate::symbol::{AssumptionReport, BandStructure, Symbol, VAN_HOVE_TOL};
use crate::transform::{projection_profile, weighted_quasiperiodicity, zero_pad};
use crate::CMatrix;

/// Points with `Q` this many grid steps from `0` or `π` are left out of bulk statistics.
pub const EDGE_EXCLUSION_STEPS: f64 = 4.0;

/// An eigenvector is localized when its IPR exceeds this multiple of the median IPR.
pub const IPR_FACTOR: f64 = 10.0;

/// Default gap margin, relative to the total band span.
pub const GAP_MARGIN_REL: f64 = 1e-6;

/// Default size of the reference band grid.
pub const REFERENCE_GRID: usize = 512;

/// One eigenpair placed in the band diagram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionPoint {
    /// 1-based position in the ascending spectrum.
    pub index: usize,
    /// `Q(u)`, in `[0, π]`.
    pub alpha_est: f64,
    pub lambda: f64,
    pub sup_ratio: f64,
    pub ipr: f64,
    pub localized: bool,
    /// Distance to the nearest reference band at `alpha_est`, once compared.
    pub band_error: Option<f64>,
}

/// Reconstructed points together with the vectors and profiles behind them.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    k: usize,
    cells: usize,
    points: Vec<ReconstructionPoint>,
    profiles: Vec<Vec<f64>>,
    vectors: CMatrix,
}

impl Reconstruction {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of unit cells after zero padding.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn points(&self) -> &[ReconstructionPoint] {
        &self.points
    }

    /// `‖T^j(u)‖²` for every DFT bin of the `i`-th (0-based) eigenvector.
    pub fn profile(&self, i: usize) -> &[f64] {
        &self.profiles[i]
    }

    /// The `i`-th (0-based) eigenvector, before padding.
    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        self.vectors.column(i).iter().copied().collect()
    }

    /// Whether `alpha_est` is far enough from `0` and `π` to count as bulk.
    pub fn is_bulk(&self, alpha_est: f64) -> bool {
        let cut = 2.0 * PI * EDGE_EXCLUSION_STEPS / self.cells as f64;
        alpha_est > cut && alpha_est < PI - cut
    }

    /// CSV with header `index,alpha_est,lambda,sup_ratio,ipr,localized,band_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,alpha_est,lambda,sup_ratio,ipr,localized,band_error\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.index,
                num(p.alpha_est),
                num(p.lambda),
                num(p.sup_ratio),
                num(p.ipr),
                p.localized,
                p.band_error.map(num).unwrap_or_default()
            );
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Builds points from eigenvalues and matching eigenvector columns.
///
/// Vectors are zero-padded at the tail to a multiple of `k` and normalised
/// before `Q` is taken. Values are expected in ascending order.
pub fn reconstruct_eigenpairs(values: &[f64], vectors: &CMatrix, k: usize) -> Result<Reconstruction> {
    if k == 0 {
        return Err(invalid("block size must be positive"));
    }
    if values.is_empty() {
        return Err(Error::Empty("no eigenpairs to reconstruct"));
    }
    if vectors.ncols() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: vectors.ncols(),
        });
    }
    let padded_len = zero_pad(&vec![Complex64::new(0.0, 0.0); vectors.nrows()], k).len();
    let cells = padded_len / k;
    let results: Vec<(ReconstructionPoint, Vec<f64>)> = (0..values.len())
        .into_par_iter()
        .map(|i| {
            let u: Vec<Complex64> = vectors.column(i).iter().copied().collect();
            let norm = l2_norm(&u);
            let unit: Vec<Complex64> = zero_pad(&u, k).iter().map(|z| z / norm).collect();
            let profile = projection_profile(&unit, k)?;
            let loc = localization_metrics(&u);
            Ok((
                ReconstructionPoint {
                    index: i + 1,
                    alpha_est: weighted_quasiperiodicity(&profile),
                    lambda: values[i],
                    sup_ratio: loc.sup_ratio,
                    ipr: loc.ipr,
                    localized: false,
                    band_error: None,
                },
                profile,
            ))
        })
        .collect::<Result<_>>()?;
    let (mut points, profiles): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let threshold = IPR_FACTOR * median(&mut points.iter().map(|p| p.ipr).collect::<Vec<_>>());
    for p in &mut points {
        p.localized = p.ipr > threshold;
    }
    Ok(Reconstruction {
        k,
        cells,
        points,
        profiles,
        vectors: vectors.clone(),
    })
}

/// Eigendecomposes a Hermitian matrix and reconstructs every eigenpair.
pub fn reconstruct_bands(m: &FiniteMatrix, k: usize) -> Result<Reconstruction> {
    let eig = hermitian_eigen(m)?;
    reconstruct_from(&eig, k)
}

/// Reconstructs the eigenpairs of `BC`, computed through the symmetric form.
pub fn reconstruct_perturbed(p: &CompactPerturbation, k: usize) -> Result<Reconstruction> {
    reconstruct_from(&p.eigenpairs(), k)
}

pub fn reconstruct_from(eig: &EigenDecomposition, k: usize) -> Result<Reconstruction> {
    reconstruct_eigenpairs(eig.values(), eig.vectors(), k)
}

/// Maximum, mean, median and 95th percentile of a set of errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        let med = median(&mut sorted);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Some(Self {
            count: values.len(),
            max: sorted[sorted.len() - 1],
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: med,
            p95: sorted[rank - 1],
        })
    }

    fn rounded(self) -> Self {
        Self {
            max: round15(self.max),
            mean: round15(self.mean),
            median: round15(self.median),
            p95: round15(self.p95),
            ..self
        }
    }
}

/// Band errors split by point class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStatistics {
    /// Points not flagged as localized.
    pub delocalized: Option<Stats>,
    /// Delocalized points away from `Q ∈ {0, π}`.
    pub bulk: Option<Stats>,
    pub localized: Option<Stats>,
}

/// Fills in `band_error` for every point and summarises the errors.
pub fn compare_to_symbol(rec: &mut Reconstruction, bs: &BandStructure) -> Result<ErrorStatistics> {
    if rec.points.is_empty() {
        return Err(Error::Empty("no points to compare"));
    }
    if bs.k() == 0 || bs.grid().is_empty() {
        return Err(Error::Empty("reference band structure has no samples"));
    }
    for p in &mut rec.points {
        p.band_error = Some(bs.distance(p.lambda, p.alpha_est));
    }
    let (mut deloc, mut bulk, mut loc) = (Vec::new(), Vec::new(), Vec::new());
    for p in &rec.points {
        let err = p.band_error.unwrap_or_default();
        if p.localized {
            loc.push(err);
        } else {
            deloc.push(err);
            if rec.is_bulk(p.alpha_est) {
                bulk.push(err);
            }
        }
    }
    Ok(ErrorStatistics {
        delocalized: Stats::of(&deloc),
        bulk: Stats::of(&bulk),
        localized: Stats::of(&loc),
    })
}

/// An eigenvalue that falls inside a band gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapMode {
    /// 1-based position in the ascending spectrum.
    pub index: usize,
    pub lambda: f64,
    pub alpha_est: f64,
}

/// Band gaps of the reference bands and the eigenvalues found inside them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub gaps: Vec<(f64, f64)>,
    pub gap_modes: Vec<GapMode>,
}

impl GapReport {
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "gaps": self.gaps.iter().map(|(lo, hi)| serde_json::json!({"lo": round15(*lo), "hi": round15(*hi)})).collect::<Vec<_>>(),
            "gap_modes": self.gap_modes.iter().map(|g| serde_json::json!({
                "index": g.index,
                "lambda": round15(g.lambda),
                "alpha_est": round15(g.alpha_est),
            })).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("gap report serialisation cannot fail") + "\n"
    }
}

/// Gaps of `bs` shrunk by `margin`, and the points whose eigenvalue lies strictly inside one.
///
/// Gap modes are also flagged as localized in `rec`.
pub fn detect_gaps(bs: &BandStructure, rec: &mut Reconstruction, margin: f64) -> Result<GapReport> {
    if !(margin >= 0.0) {
        return Err(invalid(format!("gap margin must be non-negative, got {margin}")));
    }
    let gaps = bs.gaps(margin);
    let mut gap_modes = Vec::new();
    for p in &mut rec.points {
        if gaps.iter().any(|&(lo, hi)| lo < p.lambda && p.lambda < hi) {
            p.localized = true;
            gap_modes.push(GapMode {
                index: p.index,
                lambda: p.lambda,
                alpha_est: p.alpha_est,
            });
        }
    }
    Ok(GapReport { gaps, gap_modes })
}

/// Closed-form eigenpairs of the symmetric tridiagonal Toeplitz matrix with
/// diagonal `a0` and off-diagonals `a1`.
///
/// Mode `s = 1, …, m` has eigenvalue `a0 + 2a1 cos(sπ/(m+1))` and entries
/// `sqrt(2/(m+1)) sin(qsπ/(m+1))`. See [`tridiagonal_mode`] for a single mode.
pub fn tridiagonal_eigenpairs_oracle(a0: f64, a1: f64, m: usize) -> EigenDecomposition {
    let mut modes: Vec<(f64, Vec<Complex64>)> = (1..=m).map(|s| tridiagonal_mode(a0, a1, m, s)).collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = modes.iter().map(|m| m.0).collect();
    let mut vectors = CMatrix::zeros(m, m);
    for (c, (_, v)) in modes.into_iter().enumerate() {
        vectors.set_column(c, &DVector::from_vec(v));
    }
    EigenDecomposition::from_parts(values, vectors)
}

/// Mode `s` (1-based) of the tridiagonal Toeplitz matrix of size `m`.
pub fn tridiagonal_mode(a0: f64, a1: f64, m: usize, s: usize) -> (f64, Vec<Complex64>) {
    let theta = s as f64 * PI / (m + 1) as f64;
    let kappa = (2.0 / (m + 1) as f64).sqrt();
    let v = (1..=m)
        .map(|q| Complex64::new(kappa * (q as f64 * theta).sin(), 0.0))
        .collect();
    (a0 + 2.0 * a1 * theta.cos(), v)
}

fn default_a0() -> f64 {
    2.0
}
fn default_a1() -> f64 {
    -1.0
}
fn default_nn_m() -> usize {
    80
}
fn default_symbol_m() -> usize {
    30
}
fn default_s1() -> f64 {
    1.0
}
fn default_s2() -> f64 {
    2.0
}
fn default_ssh_m() -> usize {
    20
}
fn default_d() -> f64 {
    4.0
}
fn default_dps() -> usize {
    10
}
fn default_dimers() -> usize {
    20
}
fn default_delta() -> f64 {
    0.5
}
fn default_k() -> usize {
    1
}

/// Boundary treatment of a periodic chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Plain finite section `T_m(f)`.
    Toeplitz,
    /// Wrapped `C_m(f)`.
    Circulant,
    /// Nearest-neighbour capacitance matrix with corrected corners.
    #[default]
    Capacitance,
}

/// A built-in system, tagged by `"scenario"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    /// Monomer chain with nearest-neighbour couplings.
    PeriodicNn {
        #[serde(default = "default_nn_m")]
        m: usize,
        #[serde(default = "default_a0")]
        a0: f64,
        #[serde(default = "default_a1")]
        a1: f64,
        #[serde(default)]
        boundary: Boundary,
    },
    /// Toeplitz or circulant section of a symbol; the exponential symbol by default.
    PeriodicSymbol {
        #[serde(default = "default_symbol_m")]
        m: usize,
        #[serde(default)]
        symbol: Option<Symbol>,
        #[serde(default)]
        circulant: bool,
    },
    Ssh {
        #[serde(default = "default_ssh_m")]
        m: usize,
        #[serde(flatten)]
        params: SshSpec,
    },
    Dislocated {
        #[serde(default = "default_s1")]
        s1: f64,
        #[serde(default = "default_s2")]
        s2: f64,
        #[serde(default = "default_d")]
        d: f64,
        #[serde(default = "default_dps")]
        dimers_per_side: usize,
    },
    /// Dimer chain with one resonator scaled by `1 + δ`.
    CompactDefect {
        #[serde(default = "default_s1")]
        s1: f64,
        #[serde(default = "default_s2")]
        s2: f64,
        #[serde(default = "default_dimers")]
        dimers: usize,
        #[serde(default = "default_delta")]
        delta: f64,
        /// 1-based; the centre `⌈n/2⌉` by default.
        #[serde(default)]
        index: Option<usize>,
    },
    /// A matrix read from CSV or JSON, optionally compared with a symbol.
    ExternalMatrix {
        path: PathBuf,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        symbol: Option<Symbol>,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PeriodicNn { .. } => "periodic_nn",
            Scenario::PeriodicSymbol { .. } => "periodic_symbol",
            Scenario::Ssh { .. } => "ssh",
            Scenario::Dislocated { .. } => "dislocated",
            Scenario::CompactDefect { .. } => "compact_defect",
            Scenario::ExternalMatrix { .. } => "external_matrix",
        }
    }

    /// The scenario with every parameter at its default; `None` for `external_matrix`.
    pub fn default_for(name: &str) -> Option<Self> {
        let json = format!("{{\"scenario\": \"{name}\"}}");
        serde_json::from_str(&json).ok()
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Scenario::PeriodicNn { m, .. } if *m < 2 => Err(invalid("periodic_nn needs m >= 2")),
            Scenario::PeriodicSymbol { m, .. } if *m < 1 => Err(invalid("periodic_symbol needs m >= 1")),
            Scenario::Ssh { m, .. } if *m < 1 => Err(invalid("ssh needs m >= 1")),
            Scenario::Dislocated { s1, s2, d, dimers_per_side } => {
                positive("s1", *s1)?;
                positive("s2", *s2)?;
                positive("d", *d)?;
                if *dimers_per_side == 0 {
                    return Err(invalid("dislocated needs dimers_per_side >= 1"));
                }
                Ok(())
            }
            Scenario::CompactDefect { s1, s2, dimers, .. } => {
                positive("s1", *s1)?;
                positive("s2", *s2)?;
                if *dimers == 0 {
                    return Err(invalid("compact_defect needs dimers >= 1"));
                }
                Ok(())
            }
            Scenario::ExternalMatrix { k, .. } if *k == 0 => Err(invalid("external_matrix needs k >= 1")),
            _ => Ok(()),
        }
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub scenario: Scenario,
    pub dim: usize,
    pub reconstruction: Reconstruction,
    pub bands: Option<BandStructure>,
    pub assumptions: Option<AssumptionReport>,
    pub gaps: GapReport,
    pub stats: Option<ErrorStatistics>,
}

/// Builds the scenario's matrix and reference bands, then reconstructs,
/// detects gaps and compares. `grid` is the size of the reference band grid.
pub fn run_scenario(scenario: &Scenario, grid: usize) -> Result<Bundle> {
    scenario.validate()?;
    let (rec, symbol, dim) = match scenario {
        Scenario::PeriodicNn { m, a0, a1, boundary } => {
            let sym = Symbol::monomer(*a0, *a1)?;
            let mat = match boundary {
                Boundary::Toeplitz => toeplitz_matrix(&sym, *m),
                Boundary::Circulant => circulant_matrix(&sym, *m)?,
                Boundary::Capacitance => capacitance_1d(*a0, *a1, *a1, *m)?,
            };
            (reconstruct_bands(&mat, 1)?, Some(sym), mat.dim())
        }
        Scenario::PeriodicSymbol { m, symbol, circulant } => {
            let sym = match symbol {
                Some(s) => s.clone(),
                None => Symbol::exponential(40)?,
            };
            let mat = if *circulant {
                circulant_matrix(&sym, *m)?
            } else {
                toeplitz_matrix(&sym, *m)
            };
            (reconstruct_bands(&mat, sym.k())?, Some(sym), mat.dim())
        }
        Scenario::Ssh { m, params } => {
            let p = params.resolve()?;
            let mat = ssh_matrix(&p, *m)?;
            let sym = Symbol::dimer_couplings(p.alpha, p.beta1, p.beta2)?;
            (reconstruct_bands(&mat, 2)?, Some(sym), mat.dim())
        }
        Scenario::Dislocated { s1, s2, d, dimers_per_side } => {
            let mat = dislocated_chain(*s1, *s2, *d, *dimers_per_side)?;
            (reconstruct_bands(&mat, 2)?, Some(Symbol::dimer(*s1, *s2)?), mat.dim())
        }
        Scenario::CompactDefect { s1, s2, dimers, delta, index } => {
            let base = chain_capacitance(&dimer_spacings(*s1, *s2, *dimers))?;
            let index = index.unwrap_or(base.dim().div_ceil(2));
            let pert = compact_perturbation(&base, index, *delta)?;
            (reconstruct_perturbed(&pert, 2)?, Some(Symbol::dimer(*s1, *s2)?), base.dim())
        }
        Scenario::ExternalMatrix { path, k, symbol } => {
            let mat = load_matrix(path)?;
            (reconstruct_bands(&mat, *k)?, symbol.clone(), mat.dim())
        }
    };
    finish(scenario.clone(), rec, symbol.as_ref(), dim, grid)
}

fn finish(
    scenario: Scenario,
    mut rec: Reconstruction,
    symbol: Option<&Symbol>,
    dim: usize,
    grid: usize,
) -> Result<Bundle> {
    let Some(sym) = symbol else {
        return Ok(Bundle {
            scenario,
            dim,
            reconstruction: rec,
            bands: None,
            assumptions: None,
            gaps: GapReport {
                gaps: Vec::new(),
                gap_modes: Vec::new(),
            },
            stats: None,
        });
    };
    if sym.k() != rec.k() {
        return Err(Error::DimensionMismatch {
            expected: rec.k(),
            found: sym.k(),
        });
    }
    let bands = sym.band_functions(grid)?;
    let gaps = detect_gaps(&bands, &mut rec, GAP_MARGIN_REL * bands.span())?;
    let stats = compare_to_symbol(&mut rec, &bands)?;
    Ok(Bundle {
        scenario,
        dim,
        assumptions: Some(bands.check_assumptions(VAN_HOVE_TOL)),
        reconstruction: rec,
        bands: Some(bands),
        gaps,
        stats: Some(stats),
    })
}

impl Bundle {
    /// Counts, error statistics and assumption checks as pretty JSON.
    pub fn summary_json(&self) -> String {
        let points = self.reconstruction.points();
        let stats = self.stats.as_ref().map(|s| {
            serde_json::json!({
                "delocalized": s.delocalized.map(Stats::rounded),
                "bulk": s.bulk.map(Stats::rounded),
                "localized": s.localized.map(Stats::rounded),
            })
        });
        let assumptions = self.assumptions.as_ref().map(|a| {
            let check = |c: &crate::symbol::Check| serde_json::json!({"passed": c.passed, "value": round15(c.value), "detail": c.detail});
            serde_json::json!({
                "no_crossings": check(&a.no_crossings),
                "no_van_hove": check(&a.no_van_hove),
                "hermitian": check(&a.hermitian),
                "grid": check(&a.grid),
            })
        });
        let doc = serde_json::json!({
            "scenario": self.scenario.name(),
            "dim": self.dim,
            "k": self.reconstruction.k(),
            "cells": self.reconstruction.cells(),
            "points": points.len(),
            "localized": points.iter().filter(|p| p.localized).count(),
            "gaps": self.gaps.gaps.len(),
            "gap_modes": self.gaps.gap_modes.len(),
            "errors": stats,
            "assumptions": assumptions,
        });
        serde_json::to_string_pretty(&doc).expect("summary serialisation cannot fail") + "\n"
    }

    /// Writes `points.csv` and `bands.csv` (when `csv`) and `gaps.json` and
    /// `summary.json` (when `json`) into `dir`, returning the paths written.
    pub fn write(&self, dir: &Path, csv: bool, json: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files: Vec<(&str, String)> = Vec::new();
        if csv {
            files.push(("points.csv", self.reconstruction.to_csv()));
            if let Some(b) = &self.bands {
                files.push(("bands.csv", b.to_csv()));
            }
        }
        if json {
            files.push(("gaps.json", self.gaps.to_json()));
            files.push(("summary.json", self.summary_json()));
        }
        let mut written = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{MatrixKind, SshParams};
    use crate::spectra::concentration_check;
    use crate::transform::{discrete_quasiperiodicity, BrillouinZone};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn monomer() -> Symbol {
        Symbol::monomer(2.0, -1.0).unwrap()
    }

    #[test]
    fn circulant_reconstruction_is_exact() {
        let c = circulant_matrix(&monomer(), 16).unwrap();
        let mut rec = reconstruct_bands(&c, 1).unwrap();
        assert_eq!(rec.points().len(), 16);
        for p in rec.points() {
            assert_abs_diff_eq!(p.lambda, 2.0 - 2.0 * p.alpha_est.cos(), epsilon = 1e-10);
            assert!((0.0..=PI).contains(&p.alpha_est));
        }
        let bs = monomer().band_functions(16).unwrap();
        let stats = compare_to_symbol(&mut rec, &bs).unwrap();
        // Every α_est is a grid point of the reference grid, so interpolation is exact.
        assert!(stats.delocalized.unwrap().max < 1e-10);
    }

    #[test]
    fn single_entry_matrix() {
        let m = FiniteMatrix::new(CMatrix::from_element(1, 1, Complex64::new(3.5, 0.0)), 1, MatrixKind::External, "1x1").unwrap();
        let rec = reconstruct_bands(&m, 1).unwrap();
        assert_eq!(rec.points().len(), 1);
        let p = &rec.points()[0];
        assert_eq!((p.index, p.alpha_est, p.lambda, p.localized), (1, 0.0, 3.5, false));
    }

    #[test]
    fn capacitance_chain_traces_cosine_band() {
        let m = capacitance_1d(2.0, -1.0, -1.0, 80).unwrap();
        let mut rec = reconstruct_bands(&m, 1).unwrap();
        let bs = monomer().band_functions(REFERENCE_GRID).unwrap();
        let stats = compare_to_symbol(&mut rec, &bs).unwrap();
        assert!(rec.points().iter().all(|p| !p.localized));
        assert!(stats.bulk.unwrap().max < 0.1, "{stats:?}");
        assert!(rec.points().windows(2).all(|w| w[0].lambda <= w[1].lambda));
    }

    #[test]
    fn tridiagonal_bulk_error_does_not_grow() {
        // Oracle values from the independent sine-mode prototype: 0.107, 0.054, 0.027 (Toeplitz).
        let bs = monomer().band_functions(REFERENCE_GRID).unwrap();
        let mut prev = f64::INFINITY;
        for m in [40, 80, 160] {
            let t = toeplitz_matrix(&monomer(), m);
            let mut rec = reconstruct_bands(&t, 1).unwrap();
            let max = compare_to_symbol(&mut rec, &bs).unwrap().bulk.unwrap().max;
            assert!(max <= prev * 1.1, "m={m}: {max} vs {prev}");
            prev = max;
        }
        assert!(prev < 0.03);
    }

    #[test]
    fn oracle_matches_eigensolver() {
        let oracle = tridiagonal_eigenpairs_oracle(2.0, -1.0, 4);
        let eig = hermitian_eigen(&toeplitz_matrix(&monomer(), 4)).unwrap();
        for (a, b) in oracle.values().iter().zip(eig.values()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
        for n in [4usize, 17, 40] {
            let o = tridiagonal_eigenpairs_oracle(2.0, -1.0, n);
            let gram = o.vectors().adjoint() * o.vectors();
            assert!((gram - CMatrix::identity(n, n)).norm() < 1e-10);
            assert!(o.values().windows(2).all(|w| w[0] <= w[1]));
        }
        let flipped = tridiagonal_eigenpairs_oracle(0.0, 1.0, 5);
        assert!(flipped.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn even_modes_sit_next_to_their_quasiperiodicity() {
        // Padding one zero turns the sine mode into a sum of two circulant modes of size m + 1.
        for m in [20usize, 40] {
            for s in (2..=m).step_by(2) {
                let (_, mut u) = tridiagonal_mode(2.0, -1.0, m, s);
                u.push(Complex64::new(0.0, 0.0));
                let q = discrete_quasiperiodicity(&u, 1).unwrap();
                assert_abs_diff_eq!(q, PI * s as f64 / (m + 1) as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gaps_of_dimer_chain() {
        let bs = Symbol::dimer(1.0, 2.0).unwrap().band_functions(REFERENCE_GRID).unwrap();
        let plain = chain_capacitance(&dimer_spacings(1.0, 2.0, 20)).unwrap();
        let mut rec = reconstruct_bands(&plain, 2).unwrap();
        let report = detect_gaps(&bs, &mut rec, 1e-3).unwrap();
        assert_eq!(report.gaps.len(), 1);
        assert!(report.gap_modes.is_empty());

        let mono = monomer().band_functions(64).unwrap();
        let mut rec = reconstruct_bands(&toeplitz_matrix(&monomer(), 10), 1).unwrap();
        assert!(detect_gaps(&mono, &mut rec, 0.0).unwrap().gaps.is_empty());
        assert!(detect_gaps(&mono, &mut rec, -1.0).is_err());
    }

    #[test]
    fn ssh_gap_mode_stands_out() {
        let bundle = run_scenario(&Scenario::default_for("ssh").unwrap(), REFERENCE_GRID).unwrap();
        assert_eq!(bundle.dim, 81);
        assert_eq!(bundle.gaps.gap_modes.len(), 1);
        let mode = bundle.gaps.gap_modes[0];
        let points = bundle.reconstruction.points();
        let localized: Vec<usize> = points.iter().filter(|p| p.localized).map(|p| p.index).collect();
        assert_eq!(localized, vec![mode.index]);
        let gap_point = &points[mode.index - 1];
        let mut sups: Vec<f64> = points.iter().map(|p| p.sup_ratio).collect();
        assert!(gap_point.sup_ratio > 3.0 * median(&mut sups));
        let bulk_max = bundle.stats.as_ref().unwrap().delocalized.unwrap().max;
        assert!(gap_point.band_error.unwrap() > bulk_max);
    }

    #[test]
    fn dislocated_detectors_agree() {
        let bundle = run_scenario(&Scenario::default_for("dislocated").unwrap(), REFERENCE_GRID).unwrap();
        let localized: Vec<usize> = bundle.reconstruction.points().iter().filter(|p| p.localized).map(|p| p.index).collect();
        let modes: Vec<usize> = bundle.gaps.gap_modes.iter().map(|g| g.index).collect();
        assert_eq!(localized, modes);
        assert_eq!(modes.len(), 1);
    }

    #[test]
    fn compact_defect_with_positive_delta_has_gap_modes() {
        let bundle = run_scenario(&Scenario::default_for("compact_defect").unwrap(), REFERENCE_GRID).unwrap();
        assert!(!bundle.gaps.gap_modes.is_empty());
        for g in &bundle.gaps.gap_modes {
            assert!(bundle.reconstruction.points()[g.index - 1].localized);
        }
    }

    #[test]
    fn reconstruction_ignores_phase_and_degenerate_basis() {
        let c = circulant_matrix(&monomer(), 12).unwrap();
        let eig = hermitian_eigen(&c).unwrap();
        let base = reconstruct_from(&eig, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut vectors = eig.vectors().clone();
        for cluster in eig.clusters(1e-8) {
            if cluster.len() == 2 {
                let (i, j) = (cluster.start, cluster.start + 1);
                let theta: f64 = rng.random_range(0.0..PI);
                let phase = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
                let (a, b) = (vectors.column(i).clone_owned(), vectors.column(j).clone_owned());
                vectors.set_column(i, &(&a * Complex64::new(theta.cos(), 0.0) + &b * (phase * theta.sin())));
                vectors.set_column(j, &(&a * (-phase.conj() * theta.sin()) + &b * Complex64::new(theta.cos(), 0.0)));
            }
        }
        for mut col in vectors.column_iter_mut() {
            let phase = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
            col.apply(|z| *z *= phase);
        }
        let rotated = reconstruct_eigenpairs(eig.values(), &vectors, 1).unwrap();
        for (a, b) in base.points().iter().zip(rotated.points()) {
            assert_abs_diff_eq!(a.alpha_est, b.alpha_est, epsilon = 1e-10);
            assert_abs_diff_eq!(a.lambda, b.lambda, epsilon = 1e-15);
        }
    }

    #[test]
    fn padding_handles_odd_lengths() {
        let s = ssh_matrix(&SshParams::default(), 3).unwrap();
        let rec = reconstruct_bands(&s, 2).unwrap();
        assert_eq!(rec.cells(), 7);
        assert_eq!(rec.profile(0).len(), 7);
        assert_eq!(rec.vector(0).len(), 13);
        let total: f64 = rec.profile(4).iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pseudo_eigenvector_concentrates_near_its_band_point() {
        let m = 64;
        let sym = Symbol::dimer(1.0, 2.0).unwrap();
        let c = circulant_matrix(&sym, m).unwrap();
        let eig = hermitian_eigen(&c).unwrap();
        let bands = sym.band_functions(m).unwrap();
        let zone = BrillouinZone::new(m);
        let s = 10i64;
        let alpha0 = zone.alpha(s);
        let j = bands.grid().iter().position(|&a| a == alpha0).unwrap();
        let lambda = bands.band(0)[j];
        let slope = bands.derivative(0)[j].abs();
        let eps: f64 = 0.05;
        // Exact eigenvector at α₀ plus an ε²-sized admixture of a far eigenvector.
        let exact_idx = (0..eig.len()).min_by(|&a, &b| (eig.values()[a] - lambda).abs().total_cmp(&(eig.values()[b] - lambda).abs())).unwrap();
        let far = eig.len() - 1;
        let weight = 0.5 * eps * eps / (eig.values()[far] - lambda).abs();
        let mut u: Vec<Complex64> = (0..c.dim()).map(|r| eig.vectors()[(r, exact_idx)] + eig.vectors()[(r, far)] * weight).collect();
        let norm = l2_norm(&u);
        u.iter_mut().for_each(|z| *z /= norm);
        let res = crate::spectra::residual(&c, lambda, &u).unwrap();
        assert!(res < eps * eps);
        let delta = 4.0 * eps / slope;
        let mass = concentration_check(&u, 2, alpha0, delta).unwrap();
        assert!(mass.mass_out < eps * eps, "{mass:?}");
    }

    #[test]
    fn stats_of_small_samples() {
        let s = Stats::of(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!((s.count, s.max, s.mean, s.median, s.p95), (4, 4.0, 2.5, 2.5, 4.0));
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn bundle_files() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_scenario(&Scenario::PeriodicNn { m: 20, a0: 2.0, a1: -1.0, boundary: Boundary::Capacitance }, 64).unwrap();
        let written = bundle.write(dir.path(), true, true).unwrap();
        let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["points.csv", "bands.csv", "gaps.json", "summary.json"]);
        let points = std::fs::read_to_string(dir.path().join("points.csv")).unwrap();
        assert_eq!(points.lines().next().unwrap(), "index,alpha_est,lambda,sup_ratio,ipr,localized,band_error");
        assert_eq!(points.lines().count(), 21);
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["scenario"], "periodic_nn");
        assert_eq!(summary["points"], 20);
        let again = run_scenario(&bundle.scenario, 64).unwrap();
        assert_eq!(again.summary_json(), bundle.summary_json());
        assert_eq!(again.reconstruction.to_csv(), points);
    }

    #[test]
    fn scenario_json() {
        let s: Scenario = serde_json::from_str(r#"{"scenario":"ssh","m":5,"beta2":-0.25}"#).unwrap();
        match &s {
            Scenario::Ssh { m, params } => {
                assert_eq!(*m, 5);
                assert_eq!(params.resolve().unwrap().beta2, -0.25);
            }
            other => panic!("{other:?}"),
        }
        assert!(Scenario::default_for("external_matrix").is_none());
        assert!(Scenario::default_for("nonsense").is_none());
        for name in ["periodic_nn", "periodic_symbol", "ssh", "dislocated", "compact_defect"] {
            let s = Scenario::default_for(name).unwrap();
            assert_eq!(s.name(), name);
            let text = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), s);
        }
        let bad = Scenario::Dislocated { s1: 1.0, s2: -2.0, d: 4.0, dimers_per_side: 10 };
        assert!(run_scenario(&bad, 64).is_err());
    }

    #[test]
    fn external_matrix_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.csv");
        chain_capacitance(&dimer_spacings(1.0, 2.0, 10)).unwrap().save(&path).unwrap();
        let s = Scenario::ExternalMatrix { path: path.clone(), k: 2, symbol: Some(Symbol::dimer(1.0, 2.0).unwrap()) };
        let bundle = run_scenario(&s, 256).unwrap();
        assert_eq!(bundle.dim, 20);
        assert!(bundle.stats.is_some());
        let bare = run_scenario(&Scenario::ExternalMatrix { path, k: 2, symbol: None }, 256).unwrap();
        assert!(bare.bands.is_none());
        let wrong_k = Scenario::ExternalMatrix { path: dir.path().join("chain.csv"), k: 1, symbol: Some(Symbol::dimer(1.0, 2.0).unwrap()) };
        assert!(run_scenario(&wrong_k, 256).is_err());
    }
}
