//! The four subcommands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};

use tfbt::format::{num, parse_complex, round15};
use tfbt::matrices::load_matrix;
use tfbt::reconstruct::{reconstruct_bands, run_scenario, Bundle, Scenario, GAP_MARGIN_REL};
use tfbt::symbol::{BandStructure, Symbol, VAN_HOVE_TOL};
use tfbt::transform::projection_spectrum;
use tfbt::verify::{run_checks, CheckResult, Settings};
use tfbt::Complex64;

use crate::config::Common;
use crate::svg::{extent, Plot};

/// Built-in symbols available by name wherever a symbol is expected.
pub fn builtin_symbol(name: &str) -> Option<Symbol> {
    match name {
        "monomer" => Symbol::monomer(2.0, -1.0).ok(),
        "dimer" => Symbol::dimer(1.0, 2.0).ok(),
        "exponential" => Symbol::exponential(40).ok(),
        _ => None,
    }
}

/// A symbol given as a file path, inline JSON, or a built-in name.
pub fn resolve_symbol(arg: &str) -> Result<Symbol> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        return Symbol::from_json_str(trimmed).context("parsing inline symbol JSON");
    }
    let path = Path::new(arg);
    if path.exists() {
        return Symbol::load(path).with_context(|| format!("loading symbol {}", path.display()));
    }
    builtin_symbol(arg).with_context(|| format!("no symbol file {arg:?} and no built-in symbol of that name"))
}

/// Config-file symbols may be an inline object or a string naming a file or built-in.
pub fn symbol_from_value(v: &Value) -> Result<Symbol> {
    match v {
        Value::String(s) => resolve_symbol(s),
        other => Symbol::from_json_str(&other.to_string()).context("parsing symbol from config"),
    }
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialise") + "\n"
}

fn band_curves(plot: &mut Plot, bands: &BandStructure) {
    for p in 0..bands.k() {
        let pts: Vec<(f64, f64)> = bands.grid().iter().copied().zip(bands.band(p).iter().copied()).collect();
        plot.polyline(&pts, "band");
    }
}

pub fn bands_svg(bands: &BandStructure, gaps: &[(f64, f64)]) -> String {
    let (lo, hi) = extent(bands.ranges().iter().flat_map(|&(a, b)| [a, b]));
    let mut plot = Plot::new("band functions", (-PI, PI), (lo, hi));
    for &(a, b) in gaps {
        plot.band(a, b, "gap");
    }
    band_curves(&mut plot, bands);
    plot.finish()
}

/// Band functions, ranges, gaps and assumption checks of a symbol.
pub fn bands(symbol: &Symbol, common: &Common) -> Result<Vec<PathBuf>> {
    let bs = symbol.band_functions(common.grid)?;
    let gaps = bs.gaps(GAP_MARGIN_REL * bs.span());
    let report = bs.check_assumptions(VAN_HOVE_TOL);
    let mut written = Vec::new();
    if common.formats.csv {
        write(&common.out, "bands.csv", &bs.to_csv(), &mut written)?;
    }
    if common.formats.json {
        let check = |c: &tfbt::symbol::Check| json!({"passed": c.passed, "value": round15(c.value), "detail": c.detail});
        let summary = json!({
            "k": bs.k(),
            "grid": common.grid,
            "radius": symbol.radius(),
            "ranges": bs.ranges().iter().map(|&(a, b)| json!({"lo": round15(a), "hi": round15(b)})).collect::<Vec<_>>(),
            "gaps": gaps.iter().map(|&(a, b)| json!({"lo": round15(a), "hi": round15(b)})).collect::<Vec<_>>(),
            "assumptions": {
                "no_crossings": check(&report.no_crossings),
                "no_van_hove": check(&report.no_van_hove),
                "hermitian": check(&report.hermitian),
                "grid": check(&report.grid),
            },
        });
        write(&common.out, "summary.json", &pretty(&summary), &mut written)?;
    }
    if common.formats.svg {
        write(&common.out, "bands.svg", &bands_svg(&bs, &gaps), &mut written)?;
    }
    let shown: Vec<String> = gaps.iter().map(|(a, b)| format!("({}, {})", num(*a), num(*b))).collect();
    eprintln!("bands: k={} grid={} gaps=[{}]", bs.k(), common.grid, shown.join(", "));
    Ok(written)
}

/// Builds a scenario from its name and the merged parameter map.
pub fn scenario_from(name: &str, mut params: Map<String, Value>) -> Result<Scenario> {
    params.insert("scenario".into(), Value::String(name.into()));
    serde_json::from_value(Value::Object(params)).with_context(|| format!("invalid parameters for scenario {name:?}"))
}

pub fn overlay_svg(bundle: &Bundle) -> String {
    let points = bundle.reconstruction.points();
    let mut values: Vec<f64> = points.iter().map(|p| p.lambda).collect();
    if let Some(b) = &bundle.bands {
        values.extend(b.ranges().iter().flat_map(|&(a, b)| [a, b]));
    }
    let (lo, hi) = extent(values);
    let mut plot = Plot::new(bundle.scenario.name(), (-PI, PI), (lo, hi));
    for &(a, b) in &bundle.gaps.gaps {
        plot.band(a, b, "gap");
    }
    if let Some(b) = &bundle.bands {
        band_curves(&mut plot, b);
    }
    // Q lies in [0, π]; mirror each point so the picture is symmetric like the bands.
    for p in points.iter().filter(|p| !p.localized) {
        plot.circle(p.alpha_est, p.lambda, "point");
        plot.circle(-p.alpha_est, p.lambda, "point");
    }
    for p in points.iter().filter(|p| p.localized) {
        plot.circle(p.alpha_est, p.lambda, "point localized");
        plot.circle(-p.alpha_est, p.lambda, "point localized");
    }
    plot.finish()
}

pub fn reconstruct(scenario: &Scenario, common: &Common) -> Result<Vec<PathBuf>> {
    let bundle = run_scenario(scenario, common.grid)?;
    let mut written = bundle.write(&common.out, common.formats.csv, common.formats.json)?;
    if common.formats.svg {
        write(&common.out, "overlay.svg", &overlay_svg(&bundle), &mut written)?;
    }
    let bulk = bundle
        .stats
        .as_ref()
        .and_then(|s| s.bulk)
        .map_or_else(|| "n/a".to_string(), |b| num(b.max));
    eprintln!(
        "reconstruct: scenario={} dim={} points={} gap_modes={} bulk_max_error={}",
        scenario.name(),
        bundle.dim,
        bundle.reconstruction.points().len(),
        bundle.gaps.gap_modes.len(),
        bulk
    );
    Ok(written)
}

/// Input of `transform`: a raw vector or the eigenvectors of a matrix.
pub enum TransformInput {
    Vector(PathBuf),
    Matrix { path: PathBuf, only: Vec<usize> },
}

/// Parses one complex entry per line or comma-separated field.
pub fn parse_vector(text: &str) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for field in line.split(',') {
            let z = parse_complex(field).with_context(|| format!("line {}: cannot parse {field:?}", line_no + 1))?;
            out.push(z);
        }
    }
    if out.is_empty() {
        bail!("vector file holds no entries");
    }
    Ok(out)
}

pub fn transform(input: &TransformInput, k: usize, common: &Common) -> Result<Vec<PathBuf>> {
    if k == 0 {
        bail!("--k must be positive");
    }
    // (index, lambda, vector), with vectors of unit norm.
    let mut items: Vec<(usize, Option<f64>, Vec<Complex64>)> = Vec::new();
    let mut input_norm = None;
    match input {
        TransformInput::Vector(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let u = parse_vector(&text)?;
            let n = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                bail!("vector has norm {n}");
            }
            input_norm = Some(n);
            items.push((1, None, u.iter().map(|z| z / n).collect()));
        }
        TransformInput::Matrix { path, only } => {
            let m = load_matrix(path).with_context(|| format!("loading {}", path.display()))?;
            let rec = reconstruct_bands(&m, k)?;
            let count = rec.points().len();
            let selected: Vec<usize> = if only.is_empty() { (1..=count).collect() } else { only.clone() };
            for i in selected {
                if i == 0 || i > count {
                    bail!("eigenvector index {i} out of range 1..={count}");
                }
                items.push((i, Some(rec.points()[i - 1].lambda), rec.vector(i - 1)));
            }
        }
    }

    let mut csv = String::from("index,alpha,weight\n");
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let mut cells = 0;
    for (index, lambda, u) in &items {
        let spectrum = projection_spectrum(u, k)?;
        cells = spectrum.len();
        let total: f64 = spectrum.iter().map(|(_, w)| w).sum();
        let q = spectrum.iter().map(|(a, w)| a.abs() * w).sum::<f64>() / total;
        let peak = spectrum.iter().copied().fold((0.0, f64::NEG_INFINITY), |best, s| if s.1 > best.1 { s } else { best });
        for (a, w) in &spectrum {
            csv.push_str(&format!("{index},{},{}\n", num(*a), num(*w)));
        }
        rows.push(json!({
            "index": index,
            "lambda": lambda.map(round15),
            "q": round15(q),
            "peak_alpha": round15(peak.0),
            "peak_weight": round15(peak.1),
        }));
        profiles.push(spectrum);
    }

    let mut written = Vec::new();
    if common.formats.csv {
        write(&common.out, "profile.csv", &csv, &mut written)?;
    }
    if common.formats.json {
        let doc = json!({
            "k": k,
            "cells": cells,
            "input_norm": input_norm.map(round15),
            "vectors": rows,
        });
        write(&common.out, "transform.json", &pretty(&doc), &mut written)?;
    }
    if common.formats.svg {
        let (_, hi) = extent(profiles.iter().flatten().map(|(_, w)| *w));
        let mut plot = Plot::new("Floquet-Bloch profile", (-PI, PI), (0.0, hi)).labels("alpha", "weight");
        for spectrum in &profiles {
            plot.polyline(spectrum, "profile");
        }
        write(&common.out, "profile.svg", &plot.finish(), &mut written)?;
    }
    eprintln!("transform: k={k} cells={cells} vectors={}", items.len());
    Ok(written)
}

/// Plain-text table of check results.
pub fn verify_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{:<4}  {:<26} {:>12}  {}\n",
            if r.outcome.passed { "PASS" } else { "FAIL" },
            r.id,
            format!("{:.3e}", r.outcome.value),
            r.outcome.detail
        ));
    }
    let passed = results.iter().filter(|r| r.outcome.passed).count();
    out.push_str(&format!("{passed}/{} checks passed\n", results.len()));
    out
}

/// Runs the checks; returns the results and whether all passed.
pub fn verify(only: &[String], settings: &Settings, out: Option<&Path>, json_out: bool) -> Result<(Vec<CheckResult>, bool)> {
    let known: Vec<&str> = tfbt::verify::checks().iter().flat_map(|c| [c.group, c.id]).collect();
    for o in only {
        if !known.contains(&o.as_str()) {
            bail!("--only {o:?} matches no check group or id");
        }
    }
    let results = run_checks(only, settings);
    let ok = results.iter().all(|r| r.outcome.passed);
    if let Some(dir) = out {
        let mut written = Vec::new();
        write(dir, "verify.txt", &verify_table(&results), &mut written)?;
        if json_out {
            let rows: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "id": r.id,
                        "group": r.group,
                        "passed": r.outcome.passed,
                        "value": round15(r.outcome.value),
                        "limit": round15(r.outcome.limit),
                        "detail": r.outcome.detail,
                    })
                })
                .collect();
            write(dir, "verify.json", &pretty(&json!({"seed": settings.seed, "tol_scale": settings.tol_scale, "checks": rows})), &mut written)?;
        }
    }
    Ok((results, ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_parse_lines_and_fields() {
        let v = parse_vector("# header\n1\n0+1j, -2.5e-1-3j\n\n").unwrap();
        assert_eq!(v, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-0.25, -3.0)]);
        assert!(parse_vector("x").is_err());
        assert!(parse_vector("\n# only comments\n").is_err());
    }

    #[test]
    fn symbols_resolve_from_every_source() {
        assert_eq!(resolve_symbol("dimer").unwrap().k(), 2);
        let inline = r#"{"k":1,"coeffs":[{"s":0,"re":[[2.0]],"im":[[0.0]]}]}"#;
        assert_eq!(resolve_symbol(inline).unwrap().coeff(0).unwrap()[(0, 0)].re, 2.0);
        assert!(resolve_symbol("no-such-symbol").is_err());
    }

    #[test]
    fn scenario_params_apply_defaults() {
        let s = scenario_from("compact_defect", json!({"delta": -0.2}).as_object().unwrap().clone()).unwrap();
        match s {
            Scenario::CompactDefect { delta, dimers, .. } => {
                assert_eq!(delta, -0.2);
                assert_eq!(dimers, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(scenario_from("nope", Map::new()).is_err());
    }
}
