//! On-disk dataset layout.
//!
//! A dataset directory holds:
//! - `features.csv`: header `node_id,f0,...,f{d-1}`, then one row per node
//!   with ids 0..n-1 in order.
//! - `edges.txt`: one undirected edge per line as two whitespace-separated
//!   node ids; anything after a `#` is a comment.
//! - `labels.csv`, `sensitive.csv` (each optional on read): header
//!   `node_id,value` with value in {0, 1, -1}; -1 marks a missing value, as
//!   does leaving the node out entirely.
//!
//! Floats are written with their shortest round-tripping representation, so
//! write-then-read reproduces a graph exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::diffmath::Tensor;
use crate::graph::{Attr, Graph};
use crate::{Error, Result};

use super::{Dataset, Provenance};

pub(crate) const FEATURES: &str = "features.csv";
pub(crate) const EDGES: &str = "edges.txt";
pub(crate) const LABELS: &str = "labels.csv";
pub(crate) const SENSITIVE: &str = "sensitive.csv";

const ATTR_HEADER: &str = "node_id,value";

/// Writes `features.csv`, `edges.txt`, and (when present on the graph)
/// `labels.csv` / `sensitive.csv` into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, graph: &Graph) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(FEATURES))?);
    let feats = graph.features();
    let names: Vec<String> = (0..feats.cols()).map(|j| format!("f{}", j)).collect();
    writeln!(w, "node_id,{}", names.join(","))?;
    for i in 0..graph.n() {
        let row: Vec<String> = feats.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", i, row.join(","))?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(EDGES))?);
    for (u, v) in graph.edges() {
        writeln!(w, "{} {}", u, v)?;
    }
    w.flush()?;

    if let Some(labels) = graph.labels() {
        write_attr(&dir.join(LABELS), labels)?;
    }
    if let Some(sensitive) = graph.sensitive() {
        write_attr(&dir.join(SENSITIVE), sensitive)?;
    }
    Ok(())
}

fn write_attr(path: &Path, attr: &Attr) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", ATTR_HEADER)?;
    for (node, &v) in attr.iter().enumerate() {
        writeln!(w, "{},{}", node, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a dataset from four explicit file paths. All four files must exist;
/// use [`read_dataset`] for a directory where the attribute files are
/// optional.
pub fn load_dataset(
    features: &Path,
    edges: &Path,
    labels: &Path,
    sensitive: &Path,
) -> Result<Dataset> {
    let graph = load_graph(features, edges, Some(labels), Some(sensitive))?;
    Ok(Dataset {
        graph,
        provenance: Provenance::Files {
            features: features.to_path_buf(),
            edges: edges.to_path_buf(),
            labels: labels.to_path_buf(),
            sensitive: sensitive.to_path_buf(),
        },
    })
}

/// Loads a dataset directory written by [`write_dataset`]. Missing attribute
/// files simply leave that attribute unset.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let features = dir.join(FEATURES);
    let edges = dir.join(EDGES);
    let labels = dir.join(LABELS);
    let sensitive = dir.join(SENSITIVE);
    let graph = load_graph(
        &features,
        &edges,
        labels.exists().then_some(labels.as_path()),
        sensitive.exists().then_some(sensitive.as_path()),
    )?;
    Ok(Dataset {
        graph,
        provenance: Provenance::Files {
            features,
            edges,
            labels,
            sensitive,
        },
    })
}

fn load_graph(
    features: &Path,
    edges: &Path,
    labels: Option<&Path>,
    sensitive: Option<&Path>,
) -> Result<Graph> {
    let features = read_features(features)?;
    let n = features.rows();
    let edges = read_edges(edges, n)?;
    let mut graph = Graph::build(n, &edges, features)?;
    if let Some(path) = labels {
        graph = graph.with_labels(read_attr(path, n)?)?;
    }
    if let Some(path) = sensitive {
        graph = graph.with_sensitive(read_attr(path, n)?)?;
    }
    Ok(graph)
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines of `path` with 1-based line numbers. Everything after a
/// `#` is treated as a comment when `comments` is set.
fn read_lines(path: &Path, comments: bool) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = if comments {
            line.split('#').next().unwrap_or("")
        } else {
            line.as_str()
        };
        if !text.trim().is_empty() {
            out.push((i + 1, text.to_string()));
        }
    }
    Ok(out)
}

fn read_features(path: &Path) -> Result<Tensor> {
    let lines = read_lines(path, false)?;
    let Some(((header_line, header), rows)) = lines.split_first() else {
        return Err(parse_error(path, 1, "empty features file"));
    };
    let mut fields = header.split(',');
    if fields.next().map(str::trim) != Some("node_id") {
        return Err(parse_error(
            path,
            *header_line,
            "header must start with node_id",
        ));
    }
    let width = fields.count();
    if width == 0 {
        return Err(parse_error(path, *header_line, "header lists no features"));
    }
    if rows.is_empty() {
        return Err(parse_error(path, *header_line, "no feature rows"));
    }
    let mut data = Vec::with_capacity(rows.len() * width);
    for (row_idx, (lineno, line)) in rows.iter().enumerate() {
        let mut fields = line.split(',');
        let id_field = fields.next().unwrap_or("").trim();
        let id: usize = id_field
            .parse()
            .map_err(|_| parse_error(path, *lineno, format!("bad node id {:?}", id_field)))?;
        if id != row_idx {
            return Err(parse_error(
                path,
                *lineno,
                format!("node id {} out of order, expected {}", id, row_idx),
            ));
        }
        let mut count = 0;
        for field in fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, *lineno, format!("bad float {:?}", field.trim())))?;
            if !v.is_finite() {
                return Err(parse_error(path, *lineno, format!("non-finite feature {}", v)));
            }
            data.push(v);
            count += 1;
        }
        if count != width {
            return Err(parse_error(
                path,
                *lineno,
                format!("row has {} features, header lists {}", count, width),
            ));
        }
    }
    Tensor::from_vec(rows.len(), width, data)
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let lines = read_lines(path, true)?;
    let mut edges = Vec::with_capacity(lines.len());
    for (lineno, line) in &lines {
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_error(path, *lineno, "expected exactly two node ids"));
        };
        let u: usize = a
            .parse()
            .map_err(|_| parse_error(path, *lineno, format!("bad node id {:?}", a)))?;
        let v: usize = b
            .parse()
            .map_err(|_| parse_error(path, *lineno, format!("bad node id {:?}", b)))?;
        if u >= n || v >= n {
            return Err(parse_error(
                path,
                *lineno,
                format!("edge ({}, {}) outside 0..{}", u, v, n),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_attr(path: &Path, n: usize) -> Result<Attr> {
    let lines = read_lines(path, false)?;
    let Some(((header_line, header), rows)) = lines.split_first() else {
        return Err(parse_error(path, 1, "empty attribute file"));
    };
    if header.trim() != ATTR_HEADER {
        return Err(parse_error(
            path,
            *header_line,
            format!("header must be {:?}", ATTR_HEADER),
        ));
    }
    let mut attr = vec![-1i8; n];
    let mut seen = vec![false; n];
    for (lineno, line) in rows {
        let Some((node_str, val_str)) = line.split_once(',') else {
            return Err(parse_error(path, *lineno, "expected node_id,value"));
        };
        let node: usize = node_str
            .trim()
            .parse()
            .map_err(|_| parse_error(path, *lineno, format!("bad node id {:?}", node_str.trim())))?;
        if node >= n {
            return Err(parse_error(path, *lineno, format!("node {} outside 0..{}", node, n)));
        }
        let value: i8 = match val_str.trim() {
            "0" => 0,
            "1" => 1,
            "-1" => -1,
            other => {
                return Err(parse_error(
                    path,
                    *lineno,
                    format!("value must be 0, 1, or -1, got {:?}", other),
                ))
            }
        };
        if seen[node] {
            return Err(parse_error(path, *lineno, format!("node {} listed twice", node)));
        }
        seen[node] = true;
        attr[node] = value;
    }
    Ok(attr)
}
