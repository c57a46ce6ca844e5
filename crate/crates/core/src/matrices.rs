//! Finite matrices: Toeplitz sections, circulants and resonator chains.
//!
//! Every constructor returns a [`FiniteMatrix`], which carries the dense data
//! together with the block size, the kind of construction and a short
//! provenance string. The Hermitian flag is measured, never assumed.
//!
//! Indices in documentation and file formats are 1-based; the Rust API uses
//! 1-based indices only where noted (the defect position of
//! [`compact_perturbation`]).

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format::{complex, parse_complex, round15};
use crate::spectra::{eigh, EigenDecomposition};
use crate::symbol::Symbol;
use crate::CMatrix;

/// Relative tolerance behind the Hermitian flag.
pub const HERMITIAN_FLAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Toeplitz,
    Circulant,
    Capacitance1d,
    Chain,
    Ssh,
    Dislocated,
    Perturbed,
    External,
}

/// Dense square complex matrix with structural metadata.
#[derive(Debug, Clone)]
pub struct FiniteMatrix {
    data: CMatrix,
    k: usize,
    kind: MatrixKind,
    hermitian: bool,
    deviation: f64,
    provenance: String,
}

impl FiniteMatrix {
    /// Wraps `data`, measuring its Hermitian deviation.
    ///
    /// Toeplitz and circulant matrices must have a dimension divisible by `k`.
    pub fn new(data: CMatrix, k: usize, kind: MatrixKind, provenance: impl Into<String>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::NonSquare {
                rows: data.nrows(),
                row: 1,
                cols: data.ncols(),
            });
        }
        if k == 0 {
            return Err(invalid("block size must be positive"));
        }
        if matches!(kind, MatrixKind::Toeplitz | MatrixKind::Circulant) && data.nrows() % k != 0 {
            return Err(Error::NotDivisible { len: data.nrows(), k });
        }
        let scale = data.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
        let deviation = crate::symbol::hermitian_deviation(&data);
        Ok(Self {
            hermitian: deviation <= HERMITIAN_FLAG_TOL * scale,
            deviation,
            data,
            k,
            kind,
            provenance: provenance.into(),
        })
    }

    fn real(rows: usize, entries: impl Fn(usize, usize) -> f64, kind: MatrixKind, provenance: String) -> Self {
        let data = CMatrix::from_fn(rows, rows, |i, j| Complex64::new(entries(i, j), 0.0));
        Self::new(data, 1, kind, provenance).expect("square by construction")
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Largest `|m_ij − conj(m_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        self.deviation
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Entry `(i, j)`, zero-based.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    /// Dense CSV, one row per line, complex entries as `a+bj`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim()).map(|j| complex(self.data[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// `{"re": [[…]], "im": [[…]]}`.
    pub fn to_json(&self) -> String {
        let n = self.dim();
        let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| (0..n).map(|j| round15(f(&self.data[(i, j)]))).collect())
                .collect()
        };
        let doc = DenseDoc {
            re: part(|z| z.re),
            im: Some(part(|z| z.im)),
        };
        serde_json::to_string(&doc).expect("matrix serialisation cannot fail")
    }

    /// Writes JSON when the extension is `.json`, CSV otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if is_json(path) { self.to_json() } else { self.to_csv() };
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// `T_{mk}(f)`: block `(i, j)` is `a_{i−j}`, zero outside the support.
///
/// # Panics
/// If `m == 0`.
pub fn toeplitz_matrix(sym: &Symbol, m: usize) -> FiniteMatrix {
    assert!(m >= 1, "Toeplitz matrix needs at least one block");
    let k = sym.k();
    let mut data = CMatrix::zeros(m * k, m * k);
    for (s, a) in sym.coeffs() {
        for i in 0..m as i64 {
            let j = i - s;
            if (0..m as i64).contains(&j) {
                data.view_mut((i as usize * k, j as usize * k), (k, k)).copy_from(a);
            }
        }
    }
    FiniteMatrix::new(data, k, MatrixKind::Toeplitz, format!("toeplitz(k={k}, r={}, m={m})", sym.radius()))
        .expect("square by construction")
}

/// `C_{mk}(f)`: the Toeplitz pattern with block diagonals wrapped cyclically.
///
/// Requires `m > 2·r_max` so that no two coefficients share a wrapped diagonal.
pub fn circulant_matrix(sym: &Symbol, m: usize) -> Result<FiniteMatrix> {
    let r = sym.radius();
    if m <= 2 * r {
        return Err(Error::Wraparound { blocks: m, radius: r });
    }
    let k = sym.k();
    let mut data = CMatrix::zeros(m * k, m * k);
    for (s, a) in sym.coeffs() {
        for i in 0..m as i64 {
            let j = (i - s).rem_euclid(m as i64) as usize;
            data.view_mut((i as usize * k, j * k), (k, k)).copy_from(a);
        }
    }
    FiniteMatrix::new(data, k, MatrixKind::Circulant, format!("circulant(k={k}, r={r}, m={m})"))
}

/// Tridiagonal matrix with diagonal `a0`, superdiagonal `a1` and subdiagonal
/// `am1`, whose corner entries are `a0 + am1` (top) and `a0 + a1` (bottom).
pub fn capacitance_1d(a0: f64, a1: f64, am1: f64, m: usize) -> Result<FiniteMatrix> {
    if m < 2 {
        return Err(invalid(format!("capacitance matrix needs m >= 2, got {m}")));
    }
    Ok(FiniteMatrix::real(
        m,
        |i, j| match (i, j) {
            (0, 0) => a0 + am1,
            (i, j) if i == j && i == m - 1 => a0 + a1,
            (i, j) if i == j => a0,
            (i, j) if j == i + 1 => a1,
            (i, j) if i == j + 1 => am1,
            _ => 0.0,
        },
        MatrixKind::Capacitance1d,
        format!("capacitance_1d(a0={a0}, a1={a1}, am1={am1}, m={m})"),
    ))
}

fn chain_entries(spacings: &[f64]) -> Result<impl Fn(usize, usize) -> f64 + '_> {
    if spacings.is_empty() {
        return Err(Error::Empty("a chain needs at least one spacing"));
    }
    if let Some(s) = spacings.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(invalid(format!("spacings must be positive and finite, got {s}")));
    }
    let n = spacings.len() + 1;
    Ok(move |i: usize, j: usize| {
        if i == j {
            let left = if i > 0 { 1.0 / spacings[i - 1] } else { 0.0 };
            let right = if i + 1 < n { 1.0 / spacings[i] } else { 0.0 };
            left + right
        } else if j == i + 1 {
            -1.0 / spacings[i]
        } else if i == j + 1 {
            -1.0 / spacings[j]
        } else {
            0.0
        }
    })
}

/// Nearest-neighbour capacitance matrix of a chain with the given spacings.
///
/// Resonators `i` and `i + 1` couple with `−1/s_i`, and each diagonal entry
/// makes its row sum to zero.
pub fn chain_capacitance(spacings: &[f64]) -> Result<FiniteMatrix> {
    let entries = chain_entries(spacings)?;
    Ok(FiniteMatrix::real(
        spacings.len() + 1,
        entries,
        MatrixKind::Chain,
        format!("chain({} resonators)", spacings.len() + 1),
    ))
}

/// Coefficients of the SSH interface matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SshParams {
    /// Bulk diagonal entry.
    pub alpha: f64,
    /// Diagonal entry of the two end resonators.
    pub alpha_tilde: f64,
    /// Diagonal entry of the interface resonator.
    pub eta: f64,
    /// Coupling starting at the outer edges.
    pub beta1: f64,
    /// Coupling adjacent to the interface.
    pub beta2: f64,
}

impl SshParams {
    /// Coefficients of the chain with spacings `s1, s2, s1, …` from both ends
    /// meeting at a resonator flanked by two `s2` spacings.
    pub fn from_spacings(s1: f64, s2: f64) -> Result<Self> {
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(invalid(format!("spacings must be positive, got {s1}, {s2}")));
        }
        Ok(Self {
            alpha: 1.0 / s1 + 1.0 / s2,
            alpha_tilde: 1.0 / s1,
            eta: 2.0 / s2,
            beta1: -1.0 / s1,
            beta2: -1.0 / s2,
        })
    }
}

impl Default for SshParams {
    /// The chain with `s1 = 1`, `s2 = 2`.
    fn default() -> Self {
        Self::from_spacings(1.0, 2.0).expect("positive spacings")
    }
}

/// Spacings of the SSH interface chain with `m` dimers on each side.
pub fn ssh_spacings(s1: f64, s2: f64, m: usize) -> Vec<f64> {
    let half: Vec<f64> = (0..2 * m).map(|i| if i % 2 == 0 { s1 } else { s2 }).collect();
    half.iter().chain(half.iter().rev()).copied().collect()
}

/// The `(4m + 1) × (4m + 1)` SSH interface matrix.
///
/// Off-diagonal `(i, i + 1)` (1-based) is `β1` for odd `i ≤ 2m` and `β2` for
/// even `i ≤ 2m`, mirrored about the interface resonator `2m + 1`, whose
/// diagonal entry is `η`. The end resonators carry `α̃`, all others `α`.
pub fn ssh_matrix(p: &SshParams, m: usize) -> Result<FiniteMatrix> {
    if m == 0 {
        return Err(invalid("SSH chain needs at least one dimer per side"));
    }
    let n = 4 * m + 1;
    // 1-based coupling between resonators i and i + 1.
    let coupling = |i: usize| {
        let i = if i > 2 * m { n - i } else { i };
        if i % 2 == 1 {
            p.beta1
        } else {
            p.beta2
        }
    };
    Ok(FiniteMatrix::real(
        n,
        |i, j| {
            let (a, b) = (i + 1, j + 1);
            if a == b {
                if a == 1 || a == n {
                    p.alpha_tilde
                } else if a == 2 * m + 1 {
                    p.eta
                } else {
                    p.alpha
                }
            } else if b == a + 1 {
                coupling(a)
            } else if a == b + 1 {
                coupling(b)
            } else {
                0.0
            }
        },
        MatrixKind::Ssh,
        format!(
            "ssh(m={m}, alpha={}, alpha_tilde={}, eta={}, beta1={}, beta2={})",
            p.alpha, p.alpha_tilde, p.eta, p.beta1, p.beta2
        ),
    ))
}

/// Spacings `s1, s2, s1, …, s1` of a chain of `dimers` dimers.
pub fn dimer_spacings(s1: f64, s2: f64, dimers: usize) -> Vec<f64> {
    (0..(2 * dimers).saturating_sub(1))
        .map(|i| if i % 2 == 0 { s1 } else { s2 })
        .collect()
}

/// Spacings of the dislocated chain with `4·dimers_per_side` resonators.
///
/// The central spacing `c = 2·dimers_per_side` (1-based) is an intra-dimer
/// spacing stretched to `d`; spacing `i` is `s1` when `|i − c|` is even and
/// `s2` otherwise.
pub fn dislocated_spacings(s1: f64, s2: f64, d: f64, dimers_per_side: usize) -> Vec<f64> {
    let c = 2 * dimers_per_side as i64;
    (1..2 * c)
        .map(|i| {
            if i == c {
                d
            } else if (i - c) % 2 == 0 {
                s1
            } else {
                s2
            }
        })
        .collect()
}

/// Dimer chain whose central intra-dimer spacing is stretched to `d`.
pub fn dislocated_chain(s1: f64, s2: f64, d: f64, dimers_per_side: usize) -> Result<FiniteMatrix> {
    if !(s1 > 0.0 && s2 > 0.0 && d > 0.0) {
        return Err(invalid(format!("spacings must be positive, got s1={s1}, s2={s2}, d={d}")));
    }
    if dimers_per_side == 0 {
        return Err(invalid("dislocated chain needs at least one dimer per side"));
    }
    let spacings = dislocated_spacings(s1, s2, d, dimers_per_side);
    let entries = chain_entries(&spacings)?;
    Ok(FiniteMatrix::real(
        spacings.len() + 1,
        entries,
        MatrixKind::Dislocated,
        format!("dislocated(s1={s1}, s2={s2}, d={d}, dimers_per_side={dimers_per_side})"),
    ))
}

/// `BC` with `B = diag(1, …, 1 + δ, …, 1)`, and its symmetric similar form.
#[derive(Debug, Clone)]
pub struct CompactPerturbation {
    /// `BC`; not Hermitian in general.
    pub product: FiniteMatrix,
    /// `B^{1/2} C B^{1/2}`, with the same spectrum as `BC`.
    pub symmetrized: FiniteMatrix,
    /// Diagonal of `B^{1/2}`.
    pub scaling: Vec<f64>,
    /// 1-based defect position.
    pub index: usize,
    pub delta: f64,
}

/// Multiplies row `index` (1-based) of a Hermitian `C` by `1 + δ`.
pub fn compact_perturbation(c: &FiniteMatrix, index: usize, delta: f64) -> Result<CompactPerturbation> {
    let n = c.dim();
    if !(1..=n).contains(&index) {
        return Err(invalid(format!("defect index {index} outside 1..={n}")));
    }
    if !(delta > -1.0 && delta.is_finite()) {
        return Err(invalid(format!("defect strength must satisfy 1 + delta > 0, got delta={delta}")));
    }
    if !c.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: c.hermitian_deviation(),
        });
    }
    let mut scaling = vec![1.0; n];
    scaling[index - 1] = (1.0 + delta).sqrt();
    let mut product = c.data().clone();
    product.row_mut(index - 1).scale_mut(1.0 + delta);
    let symmetrized = CMatrix::from_fn(n, n, |i, j| c.data()[(i, j)] * scaling[i] * scaling[j]);
    let provenance = format!("{} perturbed at {index} by delta={delta}", c.provenance());
    let mut product = FiniteMatrix::new(product, c.k(), MatrixKind::Perturbed, provenance.clone())?;
    // BC is generally not symmetric, so the flag is never inherited.
    product.hermitian = false;
    let mut symmetrized = FiniteMatrix::new(symmetrized, c.k(), MatrixKind::Perturbed, provenance)?;
    // B^{1/2} C B^{1/2} is Hermitian whenever C is; remove rounding noise in the flag.
    symmetrized.hermitian = true;
    Ok(CompactPerturbation {
        product,
        symmetrized,
        scaling,
        index,
        delta,
    })
}

impl CompactPerturbation {
    /// Eigenpairs of `BC` through the symmetric form.
    ///
    /// Values are those of `B^{1/2} C B^{1/2}`. Each vector is `B^{1/2} w`
    /// for an eigenvector `w` of the symmetric form, renormalised to unit
    /// length; these vectors are orthogonal in the `B^{−1}` inner product but
    /// not, in general, in the Euclidean one.
    pub fn eigenpairs(&self) -> EigenDecomposition {
        let (values, mut vectors) = eigh(self.symmetrized.data());
        for mut col in vectors.column_iter_mut() {
            for (z, s) in col.iter_mut().zip(&self.scaling) {
                *z *= *s;
            }
            let norm = col.norm();
            col.unscale_mut(norm);
        }
        EigenDecomposition::from_parts(values, vectors)
    }
}

#[derive(Serialize, Deserialize)]
struct DenseDoc {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn square_from_rows(rows: Vec<Vec<Complex64>>) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty("matrix has no rows"));
    }
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::NonSquare {
            rows: n,
            row: row + 1,
            cols: r.len(),
        });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Parses a dense matrix from CSV text; blank lines and `#` comments are skipped.
pub fn parse_csv_matrix(text: &str) -> Result<CMatrix> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                parse_complex(cell).ok_or_else(|| {
                    Error::Parse(format!("line {}: cannot parse entry {:?}", line_no + 1, cell.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    square_from_rows(rows)
}

/// Parses `{"re": [[…]], "im": [[…]]}` or a constructor descriptor with a `"type"` field.
pub fn parse_json_matrix(text: &str) -> Result<FiniteMatrix> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("type").is_some() {
        let spec: MatrixSpec = serde_json::from_value(value)?;
        return spec.build();
    }
    let doc: DenseDoc = serde_json::from_value(value)?;
    let n = doc.re.len();
    if let Some(im) = &doc.im {
        if im.len() != n || im.iter().zip(&doc.re).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Parse("real and imaginary parts differ in shape".into()));
        }
    }
    let rows = doc
        .re
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, &x)| Complex64::new(x, doc.im.as_ref().map_or(0.0, |im| im[i][j])))
                .collect()
        })
        .collect();
    FiniteMatrix::new(square_from_rows(rows)?, 1, MatrixKind::External, "json")
}

/// Reads a matrix from CSV, or from JSON when the extension is `.json`.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<FiniteMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let provenance = format!("loaded from {}", path.display());
    if is_json(path) {
        let FiniteMatrix { data, k, kind, .. } = parse_json_matrix(&text)?;
        return FiniteMatrix::new(data, k, kind, provenance);
    }
    FiniteMatrix::new(parse_csv_matrix(&text)?, 1, MatrixKind::External, provenance)
}

/// JSON descriptor of a constructor, tagged by `"type"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MatrixSpec {
    Toeplitz {
        symbol: Symbol,
        m: usize,
    },
    Circulant {
        symbol: Symbol,
        m: usize,
    },
    #[serde(rename = "capacitance1d")]
    Capacitance1d {
        a0: f64,
        a1: f64,
        am1: f64,
        m: usize,
    },
    Chain {
        spacings: Vec<f64>,
    },
    Ssh {
        m: usize,
        #[serde(flatten)]
        params: SshSpec,
    },
    Dislocated {
        s1: f64,
        s2: f64,
        d: f64,
        dimers_per_side: usize,
    },
    Perturbed {
        base: Box<MatrixSpec>,
        #[serde(default)]
        index: Option<usize>,
        delta: f64,
    },
}

/// SSH coefficients; any omitted value comes from the spacings `s1`, `s2` (default 1 and 2).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SshSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
}

impl SshSpec {
    pub fn resolve(&self) -> Result<SshParams> {
        let base = SshParams::from_spacings(self.s1.unwrap_or(1.0), self.s2.unwrap_or(2.0))?;
        Ok(SshParams {
            alpha: self.alpha.unwrap_or(base.alpha),
            alpha_tilde: self.alpha_tilde.unwrap_or(base.alpha_tilde),
            eta: self.eta.unwrap_or(base.eta),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
        })
    }
}

impl MatrixSpec {
    /// Runs the constructor; perturbed specs return the `BC` product.
    pub fn build(&self) -> Result<FiniteMatrix> {
        match self {
            MatrixSpec::Toeplitz { symbol, m } => {
                if *m == 0 {
                    return Err(invalid("Toeplitz matrix needs m >= 1"));
                }
                Ok(toeplitz_matrix(symbol, *m))
            }
            MatrixSpec::Circulant { symbol, m } => circulant_matrix(symbol, *m),
            MatrixSpec::Capacitance1d { a0, a1, am1, m } => capacitance_1d(*a0, *a1, *am1, *m),
            MatrixSpec::Chain { spacings } => chain_capacitance(spacings),
            MatrixSpec::Ssh { m, params } => ssh_matrix(&params.resolve()?, *m),
            MatrixSpec::Dislocated {
                s1,
                s2,
                d,
                dimers_per_side,
            } => dislocated_chain(*s1, *s2, *d, *dimers_per_side),
            MatrixSpec::Perturbed { base, index, delta } => {
                let c = base.build()?;
                let index = index.unwrap_or(c.dim().div_ceil(2));
                Ok(compact_perturbation(&c, index, *delta)?.product)
            }
        }
    }
}

#[cfg(test)]
pub(crate) fn dense_eigenvalues(m: &FiniteMatrix) -> Vec<f64> {
    eigh(m.data()).0
}
