//! File formats: edge lists, dense complex CSV, and signal-series CSV.
//!
//! Complex scalars are written as `a+bi` / `a-bi` with full round-trip
//! precision; purely real values omit the imaginary part. Edge lists carry
//! separate real and imaginary columns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{C64, Graph, GraphSignal, SignalSeries};

/// Accepted on-disk graph formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// One edge per line: `src<TAB>dst<TAB>re<TAB>im`, optional `#n=<N>` header.
    EdgeList,
    /// N rows by N columns, complex entries as `a+bi`.
    DenseCsv,
}

/// Formats a complex scalar as `a`, `a+bi`, or `a-bi`.
pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Parses `a`, `a+bi`, `a-bi`, or `bi` (scientific notation allowed).
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    let parse_real = |t: &str| -> std::result::Result<f64, String> {
        let v: f64 = t
            .parse()
            .map_err(|_| format!("invalid number `{t}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite number `{t}`"));
        }
        Ok(v)
    };
    if !s.ends_with('i') {
        return Ok(C64::new(parse_real(s)?, 0.0));
    }
    let body = &s[..s.len() - 1];
    // Split at the last +/- that is not a sign or an exponent marker.
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let b = bytes[k];
        if (b == b'+' || b == b'-') && bytes[k - 1] != b'e' && bytes[k - 1] != b'E' {
            split = Some(k);
            break;
        }
    }
    match split {
        Some(k) => {
            let re = parse_real(&body[..k])?;
            let im = parse_real(&body[k..])?;
            Ok(C64::new(re, im))
        }
        None => Ok(C64::new(0.0, parse_real(body)?)),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Loads a graph from `path`, inferring the narrowest weight class.
pub fn load_graph(path: impl AsRef<Path>, format: GraphFormat) -> Result<Graph> {
    let path = path.as_ref();
    match format {
        GraphFormat::EdgeList => load_graph_edge_list(path),
        GraphFormat::DenseCsv => {
            let m = load_matrix(path)?;
            Graph::from_complex(m)
        }
    }
}

fn load_graph_edge_list(path: &Path) -> Result<Graph> {
    let text = read_to_string(path)?;
    let mut declared_n: Option<usize> = None;
    let mut edges: Vec<(usize, usize, C64, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("n=") {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("invalid vertex count `{v}`")))?;
                if let Some(prev) = declared_n {
                    if prev != n {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("conflicting #n= headers ({prev} then {n})"),
                        ));
                    }
                }
                declared_n = Some(n);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 fields `src dst re im`, got {}", fields.len()),
            ));
        }
        let src: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid index `{}`", fields[0])))?;
        let dst: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid index `{}`", fields[1])))?;
        let re: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid weight `{}`", fields[2])))?;
        let im: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid weight `{}`", fields[3])))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::parse(path, lineno, "weights must be finite"));
        }
        if src == dst {
            return Err(Error::SelfLoop(src));
        }
        edges.push((src, dst, C64::new(re, im), lineno));
    }
    let max_index = edges.iter().map(|e| e.0.max(e.1)).max();
    let n = match (declared_n, max_index) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => {
            return Err(Error::parse(path, 1, "no edges and no #n= header"));
        }
    };
    if n == 0 {
        return Err(Error::parse(path, 1, "vertex count must be >= 1"));
    }
    let mut adj = DMatrix::<C64>::zeros(n, n);
    let mut seen = std::collections::HashSet::new();
    for (src, dst, w, lineno) in edges {
        if src >= n || dst >= n {
            return Err(Error::parse(
                path,
                lineno,
                format!("index {} out of range for n={n}", src.max(dst)),
            ));
        }
        if !seen.insert((src, dst)) {
            return Err(Error::parse(path, lineno, format!("duplicate edge {src} -> {dst}")));
        }
        adj[(src, dst)] = w;
    }
    Graph::from_complex(adj)
}

/// Writes a graph as an edge list with a `#n=` header.
pub fn save_graph_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "#n={}", g.n());
    for i in 0..g.n() {
        for j in 0..g.n() {
            let w = g.adj()[(i, j)];
            if w != C64::new(0.0, 0.0) {
                let _ = writeln!(out, "{i}\t{j}\t{}\t{}", w.re, w.im);
            }
        }
    }
    write_string(path, &out)
}

/// Writes a dense complex matrix as CSV.
pub fn save_matrix(m: &DMatrix<C64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    write_string(path, &out)
}

/// Loads a dense complex matrix from CSV. Rejects ragged rows.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<C64>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            row.push(
                parse_complex(cell).map_err(|msg| Error::parse(path, lineno, msg))?,
            );
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("ragged row: {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "empty matrix file"));
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Writes a signal series as CSV with header `t,v0,...,v{N-1}`.
pub fn save_signal_series(s: &SignalSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = s.signal_len();
    let mut out = String::new();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..n).map(|k| format!("v{k}")))
        .collect();
    let _ = writeln!(out, "{}", header.join(","));
    for (t, frame) in s.times().iter().zip(s.frames()) {
        let mut row = vec![format!("{t}")];
        row.extend(frame.values().iter().map(|z| format_complex(*z)));
        let _ = writeln!(out, "{}", row.join(","));
    }
    write_string(path, &out)
}

/// Loads a signal series from CSV (`t,v0,...,v{N-1}` header, one row per step).
pub fn load_signal_series(path: impl AsRef<Path>) -> Result<SignalSeries> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty series file"))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 2 || cols[0].trim() != "t" {
        return Err(Error::parse(
            path,
            1,
            "expected header `t,v0,...` with at least one signal column",
        ));
    }
    let n = cols.len() - 1;
    let mut times = Vec::new();
    let mut frames = Vec::new();
    for (lineno, raw) in lines {
        let lineno = lineno + 1;
        let cells: Vec<&str> = raw.trim().split(',').collect();
        if cells.len() != n + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("row has {} cells, expected {}", cells.len(), n + 1),
            ));
        }
        let t: f64 = cells[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid timestamp `{}`", cells[0])))?;
        let mut values = Vec::with_capacity(n);
        for cell in &cells[1..] {
            values.push(
                parse_complex(cell).map_err(|msg| Error::parse(path, lineno, msg))?,
            );
        }
        times.push(t);
        frames.push(GraphSignal::from_complex(DVector::from_vec(values))?);
    }
    SignalSeries::new(times, frames)
}

/// Writes a basis directory: `metadata.json` (method, kind, f_max, both
/// dispersions, frequencies, plus a caller-supplied config echo) and
/// `columns.csv` with the orthonormal columns ascending by frequency.
pub fn save_basis(
    basis: &crate::basis::GftBasis,
    dir: impl AsRef<Path>,
    config_echo: &serde_json::Value,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metadata = serde_json::json!({
        "method": basis.method.as_str(),
        "kind": basis.kind.as_str(),
        "n": basis.n(),
        "graph_ref": basis.graph_ref,
        "f_max": basis.f_max,
        "dispersion_endpoint_free": basis.dispersion_endpoint_free(),
        "dispersion_with_endpoints": basis.dispersion_with_endpoints(),
        "frequencies": basis.frequencies,
        "config": config_echo,
    });
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    write_string(&path, &text)?;
    save_matrix(&basis.columns, dir.join("columns.csv"))
}

/// Loads a basis directory written by [`save_basis`].
pub fn load_basis(dir: impl AsRef<Path>) -> Result<crate::basis::GftBasis> {
    use crate::basis::BasisMethod;
    use crate::variation::FrequencyKind;
    let dir = dir.as_ref();
    let meta_path = dir.join("metadata.json");
    let text = read_to_string(&meta_path)?;
    let meta: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&meta_path, e.line(), e.to_string()))?;
    let field = |name: &str| -> Result<&serde_json::Value> {
        meta.get(name)
            .ok_or_else(|| Error::parse(&meta_path, 1, format!("missing field `{name}`")))
    };
    let method = match field("method")?.as_str() {
        Some("greedy") => BasisMethod::Greedy,
        Some("feasible") => BasisMethod::Feasible,
        other => {
            return Err(Error::parse(&meta_path, 1, format!("bad method {other:?}")));
        }
    };
    let kind = match field("kind")?.as_str() {
        Some("idv") => FrequencyKind::Idv,
        Some("cdv") => FrequencyKind::Cdv,
        other => return Err(Error::parse(&meta_path, 1, format!("bad kind {other:?}"))),
    };
    let f_max = field("f_max")?
        .as_f64()
        .ok_or_else(|| Error::parse(&meta_path, 1, "f_max must be a number"))?;
    let graph_ref = field("graph_ref")?
        .as_str()
        .ok_or_else(|| Error::parse(&meta_path, 1, "graph_ref must be a string"))?
        .to_string();
    let frequencies: Vec<f64> = field("frequencies")?
        .as_array()
        .ok_or_else(|| Error::parse(&meta_path, 1, "frequencies must be an array"))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::parse(&meta_path, 1, "frequencies must be numbers"))
        })
        .collect::<Result<_>>()?;
    let columns = load_matrix(dir.join("columns.csv"))?;
    if columns.nrows() != columns.ncols() || columns.ncols() != frequencies.len() {
        return Err(Error::Dimension(format!(
            "columns.csv is {}x{} but metadata lists {} frequencies",
            columns.nrows(),
            columns.ncols(),
            frequencies.len()
        )));
    }
    Ok(crate::basis::GftBasis {
        columns,
        frequencies,
        kind,
        method,
        graph_ref,
        f_max,
    })
}
