//! Plain-text file formats: edge-list graphs and headerless CSV datasets.
//!
//! Graph files start with a line holding the node count, followed by one
//! `parent child` pair per line, 0-based. The same format carries both DAGs
//! and (possibly cyclic) superstructure edge sets. Datasets are headerless
//! CSV, one sample per row.

use std::fs;
use std::path::Path;

use super::{Dag, Dataset, EdgeSet, ModelError};

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn parse_pairs(path: &Path, text: &str) -> Result<(usize, Vec<(usize, usize)>), ModelError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file; expected node count"))?;
    let m: usize = first
        .trim()
        .parse()
        .map_err(|_| parse_err(path, 1, format!("expected node count, found {first:?}")))?;
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let p = it
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| parse_err(path, line_no, format!("malformed edge line {trimmed:?}")))?;
        let c = it
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| parse_err(path, line_no, format!("malformed edge line {trimmed:?}")))?;
        if it.next().is_some() {
            return Err(parse_err(path, line_no, format!("trailing tokens in {trimmed:?}")));
        }
        if p >= m || c >= m {
            return Err(parse_err(path, line_no, format!("node index out of range in {trimmed:?}")));
        }
        pairs.push((p, c));
    }
    Ok((m, pairs))
}

fn render_pairs<'a>(m: usize, pairs: impl Iterator<Item = &'a (usize, usize)>) -> String {
    let mut out = format!("{m}\n");
    for (p, c) in pairs {
        out.push_str(&format!("{p} {c}\n"));
    }
    out
}

/// Reads a DAG from an edge-list file.
pub fn read_graph(path: impl AsRef<Path>) -> Result<Dag, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let (m, pairs) = parse_pairs(path, &text)?;
    Dag::new(m, &pairs)
}

/// Writes a DAG as an edge-list file.
pub fn write_graph(path: impl AsRef<Path>, dag: &Dag) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, render_pairs(dag.node_count(), dag.edges().iter()))
        .map_err(|e| io_err(path, e))
}

/// Reads a (possibly cyclic) edge set from an edge-list file.
pub fn read_edge_set(path: impl AsRef<Path>) -> Result<EdgeSet, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let (m, pairs) = parse_pairs(path, &text)?;
    EdgeSet::new(m, &pairs)
}

/// Writes an edge set as an edge-list file.
pub fn write_edge_set(path: impl AsRef<Path>, set: &EdgeSet) -> Result<(), ModelError> {
    let path = path.as_ref();
    let pairs: Vec<(usize, usize)> = set.iter().collect();
    fs::write(path, render_pairs(set.node_count(), pairs.iter())).map_err(|e| io_err(path, e))
}

/// Reads a headerless CSV dataset.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in trimmed.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("malformed value {tok:?}")))?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty dataset"));
    }
    let n = rows.len();
    let m = rows[0].len();
    Dataset::new(n, m, rows.into_iter().flatten().collect())
}

/// Writes a dataset as headerless CSV with full float precision.
pub fn write_dataset_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<(), ModelError> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in 0..data.sample_count() {
        for c in 0..data.variable_count() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.17e}", data.get(r, c)));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_data, NoiseKind, SemParameters};

    #[test]
    fn graph_roundtrip() {
        let dir = std::env::temp_dir().join(format!("dagopt-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.txt");
        let dag = Dag::new(4, &[(0, 1), (1, 3), (0, 2)]).unwrap();
        write_graph(&path, &dag).unwrap();
        let back = read_graph(&path).unwrap();
        assert_eq!(dag, back);
    }

    #[test]
    fn graph_parse_reports_line() {
        let dir = std::env::temp_dir().join(format!("dagopt-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.txt");
        fs::write(&path, "3\n0 1\nnot an edge\n").unwrap();
        let err = read_graph(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = std::env::temp_dir().join(format!("dagopt-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        let params = SemParameters::new(vec![vec![0.0, 0.7], vec![0.0, 0.0]], vec![1.0, 0.5]).unwrap();
        let data = generate_data(&params, 20, NoiseKind::Gaussian, 3).unwrap();
        write_dataset_csv(&path, &data).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let dir = std::env::temp_dir().join(format!("dagopt-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ragged.csv");
        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}
