//! CSV and JSON formats.
//!
//! * Edge lists: header `src,dst,weight`; a row sets `S[dst][src] = weight`.
//! * Dense matrices and signal ensembles: one header row, then one row per
//!   vertex. Complex entries are written as `a+bi`.
//! * PSDs: `{"p": [...], "method": {...}, "meta": {...}}`.

use std::fs::File;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{NoiseKind, PsdEstimate, PsdMethod, SignalEnsemble};
use crate::spectral::{CMatrix, GraphFilter, GraphShift, ShiftKind, C64};

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let t = s.trim();
    let bad = || Error::Parse(format!("invalid number '{t}'"));
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|v| C64::new(v, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| bad())?;
            let im_str = &body[i..];
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                _ => im_str.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(C64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(C64::new(0.0, im))
        }
    }
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let header = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec?.iter().map(|s| s.to_string()).collect());
    }
    Ok((header, rows))
}

fn parse_matrix(rows: &[Vec<String>], ncols: usize) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Parse(format!("row {} has {} fields, expected {ncols}", i + 1, row.len())));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = parse_complex(v)?;
        }
    }
    Ok(m)
}

fn is_edge_header(header: &[String]) -> bool {
    header.len() == 3 && header[0] == "src" && header[1] == "dst" && header[2] == "weight"
}

/// Reads a graph from an edge-list or dense-matrix CSV.
///
/// Edge lists become an adjacency or, with `ShiftKind::Laplacian`, the
/// combinatorial Laplacian of that adjacency. `n` overrides the vertex count
/// inferred from the largest index. Dense matrices are taken as the shift.
pub fn read_graph(path: &Path, kind: ShiftKind, n: Option<usize>) -> Result<GraphShift> {
    let (header, rows) = read_records(path)?;
    if is_edge_header(&header) {
        let mut edges = Vec::with_capacity(rows.len());
        let mut max = 0;
        for (i, row) in rows.iter().enumerate() {
            let parse_index = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("row {}: bad vertex '{s}'", i + 1)));
            let src = parse_index(&row[0])?;
            let dst = parse_index(&row[1])?;
            let w = row[2].parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad weight '{}'", i + 1, row[2])))?;
            max = max.max(src + 1).max(dst + 1);
            edges.push((src, dst, w));
        }
        let n = n.unwrap_or(max);
        if n < max {
            return Err(Error::InvalidArgument(format!("vertex index {} exceeds n = {n}", max - 1)));
        }
        match kind {
            ShiftKind::Laplacian => GraphShift::laplacian_from_edges(n, &edges),
            _ => GraphShift::adjacency_from_edges(n, &edges),
        }
    } else {
        let m = parse_matrix(&rows, header.len())?;
        if m.iter().all(|z| z.im == 0.0) {
            GraphShift::from_real(m.map(|z| z.re), kind)
        } else {
            GraphShift::from_complex(m, kind)
        }
    }
}

/// Writes the nonzero off-diagonal structure of the adjacency underlying
/// `shift` (for a Laplacian, `−L` off the diagonal).
pub fn write_edge_list(path: &Path, shift: &GraphShift) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["src", "dst", "weight"])?;
    for (src, dst, weight) in shift.edges() {
        w.write_record([src.to_string(), dst.to_string(), format_complex(weight)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix(path: &Path, m: &CMatrix, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.ncols()).map(|j| format!("{prefix}{j}")))?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| format_complex(m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dense_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    write_matrix(path, m, "c")
}

pub fn read_dense_matrix(path: &Path) -> Result<CMatrix> {
    let (header, rows) = read_records(path)?;
    parse_matrix(&rows, header.len())
}

/// Metadata written next to an ensemble CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub n: usize,
    pub r: usize,
    pub seed: Option<u64>,
    pub noise: Option<NoiseKind>,
    pub filter: Option<GraphFilter>,
}

/// `x.csv` → `x.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes an `N × R` ensemble and its JSON sidecar.
pub fn write_signals(path: &Path, ens: &SignalEnsemble) -> Result<()> {
    write_matrix(path, &ens.to_complex(), "r")?;
    let meta = EnsembleMeta {
        n: ens.n(),
        r: ens.r(),
        seed: ens.seed,
        noise: ens.noise_kind,
        filter: ens.generator.clone(),
    };
    serde_json::to_writer_pretty(File::create(sidecar_path(path))?, &meta)?;
    Ok(())
}

/// Reads an ensemble CSV; the sidecar is used when present.
pub fn read_signals(path: &Path) -> Result<SignalEnsemble> {
    let (header, rows) = read_records(path)?;
    let mut ens = SignalEnsemble::from_complex(parse_matrix(&rows, header.len())?)?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: EnsembleMeta = serde_json::from_reader(File::open(side)?)?;
        ens.seed = meta.seed;
        ens.noise_kind = meta.noise;
        ens.generator = meta.filter;
    }
    Ok(ens)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdFile {
    #[serde(with = "crate::serde_vec")]
    pub p: DVector<f64>,
    #[serde(default = "external")]
    pub method: PsdMethod,
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn external() -> PsdMethod {
    PsdMethod::External
}

pub fn write_psd(path: &Path, psd: &PsdEstimate, meta: serde_json::Value) -> Result<()> {
    let file = PsdFile { p: psd.p.clone(), method: psd.method.clone(), meta };
    serde_json::to_writer_pretty(File::create(path)?, &file)?;
    Ok(())
}

pub fn read_psd(path: &Path) -> Result<PsdEstimate> {
    let file: PsdFile = serde_json::from_reader(File::open(path)?)?;
    PsdEstimate::new(file.p, file.method)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(File::create(path)?, value)?;
    Ok(())
}

pub fn read_real_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let m = read_dense_matrix(path)?;
    if m.iter().any(|z| z.im != 0.0) {
        return Err(Error::Parse("expected real entries".into()));
    }
    Ok(m.map(|z| z.re))
}
