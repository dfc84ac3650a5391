//! Line-oriented text format for snapshot arrays.
//!
//! ```text
//! tsbm 1 <N> <T>
//! # comment
//! labels <l1> ... <lN>        (optional, 1-based block labels)
//! e <t> <i> <j> [symbol]      (1-based snapshot, 0-based nodes, symbol defaults to 1)
//! ```
//!
//! Only nonzero entries are listed, one line per unordered pair and snapshot.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::sbm::{Labelling, SnapshotArray};

#[derive(Debug, Error)]
pub enum TsbmError {
    #[error("malformed header at line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("malformed record at line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("self-loop at line {line}: node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("index out of range at line {line}: {what} = {value}, limit {limit}")]
    IndexOutOfRange { line: usize, what: &'static str, value: usize, limit: usize },
    #[error("duplicate entry at line {line}: snapshot {t}, pair ({i}, {j})")]
    DuplicateEdge { line: usize, t: usize, i: usize, j: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TsbmError>;

/// Writes `array` with an optional labels line.
pub fn write_snapshots_to<W: Write>(mut out: W, array: &SnapshotArray, labels: Option<&Labelling>) -> Result<()> {
    writeln!(out, "tsbm 1 {} {}", array.n(), array.t())?;
    writeln!(out, "# nodes {} snapshots {} alphabet {}", array.n(), array.t(), array.alphabet())?;
    if let Some(lab) = labels {
        write_labels_line(&mut out, lab)?;
    }
    for s in 0..array.t() {
        for (i, j, pattern) in array.pairs() {
            match pattern[s] {
                0 => {}
                1 => writeln!(out, "e {} {} {}", s + 1, i, j)?,
                x => writeln!(out, "e {} {} {} {}", s + 1, i, j, x)?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_snapshots(path: &Path, array: &SnapshotArray, labels: Option<&Labelling>) -> Result<()> {
    write_snapshots_to(BufWriter::new(File::create(path)?), array, labels)
}

pub(crate) fn write_labels_line<W: Write>(out: &mut W, lab: &Labelling) -> std::io::Result<()> {
    write!(out, "labels")?;
    for &l in lab.labels() {
        write!(out, " {}", l + 1)?;
    }
    writeln!(out)
}

/// Writes a sidecar file containing only a labels line.
pub fn write_labels(path: &Path, lab: &Labelling) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_labels_line(&mut out, lab)?;
    out.flush()?;
    Ok(())
}

fn parse_labels(tokens: &[&str], line: usize, n: Option<usize>) -> Result<Labelling> {
    let mut labels = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let v: usize =
            tok.parse().map_err(|_| TsbmError::MalformedLine { line, reason: format!("label {tok:?} is not a positive integer") })?;
        if v == 0 {
            return Err(TsbmError::MalformedLine { line, reason: "labels are 1-based".into() });
        }
        labels.push(v - 1);
    }
    if let Some(n) = n {
        if labels.len() != n {
            return Err(TsbmError::MalformedLine { line, reason: format!("expected {n} labels, found {}", labels.len()) });
        }
    }
    Ok(Labelling::from_labels(labels))
}

/// Reads a sidecar labels file.
pub fn read_labels(path: &Path) -> Result<Labelling> {
    let reader = BufReader::new(File::open(path)?);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first() {
            None => continue,
            Some(t) if t.starts_with('#') => continue,
            Some(&"labels") => return parse_labels(&tokens[1..], idx + 1, None),
            Some(_) => {
                return Err(TsbmError::MalformedLine { line: idx + 1, reason: "expected a labels line".into() });
            }
        }
    }
    Err(TsbmError::MalformedLine { line: 0, reason: "no labels line".into() })
}

pub fn read_snapshots_from<R: BufRead>(reader: R) -> Result<(SnapshotArray, Option<Labelling>)> {
    let mut header: Option<(usize, usize)> = None;
    let mut labels = None;
    let mut edges: Vec<(usize, usize, usize, u8)> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some(&head) = tokens.first() else { continue };
        if head.starts_with('#') {
            continue;
        }
        let Some((n, t)) = header else {
            header = Some(parse_header(&tokens, line_no)?);
            continue;
        };
        match head {
            "labels" => {
                if labels.is_some() {
                    return Err(TsbmError::MalformedLine { line: line_no, reason: "second labels line".into() });
                }
                labels = Some(parse_labels(&tokens[1..], line_no, Some(n))?);
            }
            "e" => {
                if tokens.len() != 4 && tokens.len() != 5 {
                    return Err(TsbmError::MalformedLine { line: line_no, reason: "expected `e t i j [symbol]`".into() });
                }
                let field = |k: usize| -> Result<usize> {
                    tokens[k].parse().map_err(|_| TsbmError::MalformedLine {
                        line: line_no,
                        reason: format!("{:?} is not a non-negative integer", tokens[k]),
                    })
                };
                let (s, i, j) = (field(1)?, field(2)?, field(3)?);
                let symbol = if tokens.len() == 5 { field(4)? } else { 1 };
                if s == 0 || s > t {
                    return Err(TsbmError::IndexOutOfRange { line: line_no, what: "snapshot", value: s, limit: t });
                }
                for (what, v) in [("node", i), ("node", j)] {
                    if v >= n {
                        return Err(TsbmError::IndexOutOfRange { line: line_no, what, value: v, limit: n });
                    }
                }
                if i == j {
                    return Err(TsbmError::SelfLoop { line: line_no, node: i });
                }
                if symbol == 0 || symbol > u8::MAX as usize {
                    return Err(TsbmError::IndexOutOfRange { line: line_no, what: "symbol", value: symbol, limit: u8::MAX as usize });
                }
                let (a, b) = (i.min(j), i.max(j));
                if !seen.insert((s, a, b)) {
                    return Err(TsbmError::DuplicateEdge { line: line_no, t: s, i: a, j: b });
                }
                edges.push((s - 1, a, b, symbol as u8));
            }
            other => {
                return Err(TsbmError::MalformedLine { line: line_no, reason: format!("unknown record {other:?}") });
            }
        }
    }
    let Some((n, t)) = header else {
        return Err(TsbmError::MalformedHeader { line: 0, reason: "missing `tsbm` header".into() });
    };
    let alphabet = edges.iter().map(|e| e.3 as usize + 1).max().unwrap_or(2);
    let mut array = SnapshotArray::zeros(n, t, alphabet);
    for (s, i, j, x) in edges {
        array.set(s, i, j, x);
    }
    Ok((array, labels))
}

fn parse_header(tokens: &[&str], line: usize) -> Result<(usize, usize)> {
    let bad = |reason: &str| TsbmError::MalformedHeader { line, reason: reason.to_string() };
    if tokens.len() != 4 || tokens[0] != "tsbm" {
        return Err(bad("expected `tsbm 1 N T`"));
    }
    if tokens[1] != "1" {
        return Err(bad("unsupported version"));
    }
    let n: usize = tokens[2].parse().map_err(|_| bad("N is not an integer"))?;
    let t: usize = tokens[3].parse().map_err(|_| bad("T is not an integer"))?;
    if t == 0 {
        return Err(bad("T must be at least 1"));
    }
    Ok((n, t))
}

pub fn read_snapshots(path: &Path) -> Result<(SnapshotArray, Option<Labelling>)> {
    read_snapshots_from(BufReader::new(File::open(path)?))
}
