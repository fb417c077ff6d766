//! Text dataset bundles.
//!
//! A bundle is a directory holding:
//!
//! | file           | contents                                              |
//! |----------------|-------------------------------------------------------|
//! | `edges.tsv`    | one `u<TAB>v` pair per line, 0-based node ids         |
//! | `features.csv` | `num_nodes` lines of `d` comma-separated reals        |
//! | `labels.csv`   | `num_nodes` lines, one class id each                  |
//! | `splits.json`  | `{"train": [..], "val": [..], "test": [..]}`          |
//! | `meta.json`    | `{"num_nodes": n, "num_classes": k, "num_features": d}` |
//!
//! Reversed and repeated edge lines collapse to one undirected edge.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Splits};
use crate::nn::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub num_features: usize,
}

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(f)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| Error::io(path, e)))))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

pub fn load_graph_bundle(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta: BundleMeta = read_json(&dir.join("meta.json"))?;
    let n = meta.num_nodes;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (lineno, line) in open_lines(&edges_path)? {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(['\t', ' ']).filter(|s| !s.is_empty());
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(&edges_path, lineno, "expected two node ids"));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(&edges_path, lineno, format!("bad node id {s:?}: {e}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= n || v >= n {
            return Err(parse_err(
                &edges_path,
                lineno,
                format!("node id out of range (num_nodes = {n})"),
            ));
        }
        if u == v {
            return Err(parse_err(&edges_path, lineno, format!("self-loop on node {u}")));
        }
        edges.push((u, v));
    }

    let feat_path = dir.join("features.csv");
    let mut data = Vec::with_capacity(n * meta.num_features);
    let mut rows = 0;
    for (lineno, line) in open_lines(&feat_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| parse_err(&feat_path, lineno, format!("bad feature value {tok:?}: {e}")))?;
            data.push(v);
        }
        if data.len() - before != meta.num_features {
            return Err(parse_err(
                &feat_path,
                lineno,
                format!(
                    "ragged row: {} values, expected {}",
                    data.len() - before,
                    meta.num_features
                ),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            &feat_path,
            rows,
            format!("{rows} feature rows, expected {n}"),
        ));
    }
    let features = DenseMatrix::from_vec(n, meta.num_features, data)?;

    let label_path = dir.join("labels.csv");
    let mut labels = Vec::with_capacity(n);
    for (lineno, line) in open_lines(&label_path)? {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let y: usize = t
            .parse()
            .map_err(|e| parse_err(&label_path, lineno, format!("bad label {t:?}: {e}")))?;
        if y >= meta.num_classes {
            return Err(parse_err(
                &label_path,
                lineno,
                format!("label {y} >= num_classes {}", meta.num_classes),
            ));
        }
        labels.push(y);
    }
    if labels.len() != n {
        return Err(parse_err(
            &label_path,
            labels.len(),
            format!("{} labels, expected {n}", labels.len()),
        ));
    }

    let splits_path = dir.join("splits.json");
    let splits: Splits = read_json(&splits_path)?;
    splits
        .validate(n)
        .map_err(|e| parse_err(&splits_path, 0, e.to_string()))?;

    Graph::new(n, edges, features, labels, meta.num_classes, splits)
}

/// Writes `g` in bundle layout, creating `dir` if needed.
pub fn write_graph_bundle(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: &[u8]| -> Result<()> {
        let p: PathBuf = dir.join(name);
        let mut f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        f.write_all(body).map_err(|e| Error::io(&p, e))
    };
    let mut edges = String::new();
    for &(u, v) in g.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    write("edges.tsv", edges.as_bytes())?;
    let mut feats = String::new();
    for row in g.features().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        feats.push_str(&cells.join(","));
        feats.push('\n');
    }
    write("features.csv", feats.as_bytes())?;
    let labels: String = g.labels().iter().map(|y| format!("{y}\n")).collect();
    write("labels.csv", labels.as_bytes())?;
    write("splits.json", serde_json::to_string(g.splits())?.as_bytes())?;
    let meta = BundleMeta {
        num_nodes: g.num_nodes(),
        num_classes: g.num_classes(),
        num_features: g.num_features(),
    };
    write("meta.json", serde_json::to_string_pretty(&meta)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_minimal(dir: &Path, edges: &str, feats: &str, labels: &str) {
        fs::write(dir.join("edges.tsv"), edges).unwrap();
        fs::write(dir.join("features.csv"), feats).unwrap();
        fs::write(dir.join("labels.csv"), labels).unwrap();
        fs::write(dir.join("splits.json"), r#"{"train":[0],"val":[],"test":[1]}"#).unwrap();
        fs::write(
            dir.join("meta.json"),
            r#"{"num_nodes":2,"num_classes":2,"num_features":1}"#,
        )
        .unwrap();
    }

    #[test]
    fn minimal_bundle_loads() {
        let d = tempfile::tempdir().unwrap();
        write_minimal(d.path(), "0\t1\n1\t0\n", "0.5\n-1\n", "0\n1\n");
        let g = load_graph_bundle(d.path()).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.num_features(), 1);
        assert_eq!(g.num_classes(), 2);
    }

    #[test]
    fn errors_carry_file_and_line() {
        let d = tempfile::tempdir().unwrap();
        write_minimal(d.path(), "0\t1\n0\t5\n", "0.5\n-1\n", "0\n1\n");
        match load_graph_bundle(d.path()) {
            Err(Error::Parse { file, line, .. }) => {
                assert!(file.ends_with("edges.tsv"));
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        write_minimal(d.path(), "1\t1\n", "0.5\n-1\n", "0\n1\n");
        assert!(matches!(
            load_graph_bundle(d.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        write_minimal(d.path(), "0\t1\n", "0.5\n-1,2\n", "0\n1\n");
        assert!(matches!(
            load_graph_bundle(d.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        write_minimal(d.path(), "0\t1\n", "0.5\n-1\n", "0\n2\n");
        assert!(matches!(
            load_graph_bundle(d.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        fs::remove_file(d.path().join("labels.csv")).unwrap();
        assert!(matches!(load_graph_bundle(d.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn write_then_load_is_identity() {
        let g = crate::graph::synthetic_sbm(&crate::graph::SbmConfig {
            blocks: 3,
            nodes_per_block: 5,
            p_in: 0.6,
            p_out: 0.1,
            num_features: 4,
            seed: 11,
        })
        .unwrap();
        let d = tempfile::tempdir().unwrap();
        write_graph_bundle(&g, d.path()).unwrap();
        assert_eq!(load_graph_bundle(d.path()).unwrap(), g);
    }
}
