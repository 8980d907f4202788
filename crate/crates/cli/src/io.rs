//! Dataset files: points-jsonl, matrix and uncertain-jsonl.
//!
//! Readers report the first problem with its line and column; writers emit
//! the shortest round-tripping decimal for every real, so parsing a written
//! file gives back the same records.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use partclust::uncertain::UncertainNode;
use partclust::{MetricSpace, PointRef};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(path: &str, line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// Guess from the first record.
    Auto,
    PointsJsonl,
    Matrix,
    UncertainJsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub id: u64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointsFile {
    pub records: Vec<PointRecord>,
}

impl PointsFile {
    pub fn from_coords(coords: Vec<Vec<f64>>) -> Self {
        Self {
            records: coords
                .into_iter()
                .enumerate()
                .map(|(i, coords)| PointRecord { id: i as u64, coords })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn space(&self) -> partclust::Result<MetricSpace> {
        MetricSpace::euclidean(self.records.iter().map(|r| r.coords.clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatrixFile {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: u64,
    /// Ids of universe points.
    pub support: Vec<u64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UncertainData {
    pub universe: PointsFile,
    pub records: Vec<NodeRecord>,
}

impl UncertainData {
    /// Nodes over the universe's point indices.
    pub fn nodes(&self) -> partclust::Result<Vec<UncertainNode>> {
        let index: HashMap<u64, usize> = self.universe.records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        self.records
            .iter()
            .map(|r| {
                let support = r
                    .support
                    .iter()
                    .map(|id| {
                        index.get(id).map(|&i| PointRef(i)).ok_or_else(|| partclust::Error::InvalidNode {
                            node: r.id as usize,
                            reason: format!("unknown universe point {id}"),
                        })
                    })
                    .collect::<partclust::Result<Vec<_>>>()?;
                UncertainNode::new(r.id as usize, support, r.probs.clone())
            })
            .collect()
    }
}

/// A loaded input.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Points(PointsFile),
    Matrix(MatrixFile),
    Uncertain(UncertainData),
}

impl Dataset {
    /// Number of items to cluster: points, or nodes for uncertain data.
    pub fn len(&self) -> usize {
        match self {
            Dataset::Points(p) => p.len(),
            Dataset::Matrix(m) => m.rows.len(),
            Dataset::Uncertain(u) => u.records.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// External ids of the clustered items; matrix rows are numbered from 0.
    pub fn item_ids(&self) -> Vec<u64> {
        match self {
            Dataset::Points(p) => p.records.iter().map(|r| r.id).collect(),
            Dataset::Matrix(m) => (0..m.rows.len() as u64).collect(),
            Dataset::Uncertain(u) => u.records.iter().map(|r| r.id).collect(),
        }
    }

    /// External ids of the points centers are drawn from.
    pub fn point_ids(&self) -> Vec<u64> {
        match self {
            Dataset::Points(p) => p.records.iter().map(|r| r.id).collect(),
            Dataset::Matrix(m) => (0..m.rows.len() as u64).collect(),
            Dataset::Uncertain(u) => u.universe.records.iter().map(|r| r.id).collect(),
        }
    }

    pub fn space(&self) -> partclust::Result<MetricSpace> {
        match self {
            Dataset::Points(p) => p.space(),
            Dataset::Matrix(m) => MetricSpace::from_matrix(m.rows.clone()),
            Dataset::Uncertain(u) => u.universe.space(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, ParseError> {
    fs::read_to_string(path).map_err(|e| err(&path.display().to_string(), 0, 0, e.to_string()))
}

/// Loads a dataset; uncertain data needs the universe file.
pub fn load(path: &Path, format: InputFormat, universe: Option<&Path>) -> Result<Dataset, ParseError> {
    let label = path.display().to_string();
    let text = read_text(path)?;
    let format = match format {
        InputFormat::Auto => detect(&text),
        f => f,
    };
    match format {
        InputFormat::Matrix => parse_matrix(&text, &label).map(Dataset::Matrix),
        InputFormat::UncertainJsonl => {
            let Some(upath) = universe else {
                return Err(err(&label, 1, 1, "uncertain input needs a universe points file (--universe)"));
            };
            let universe = parse_points(&read_text(upath)?, &upath.display().to_string())?;
            let records = parse_uncertain(&text, &label, &universe)?;
            Ok(Dataset::Uncertain(UncertainData { universe, records }))
        }
        _ => parse_points(&text, &label).map(Dataset::Points),
    }
}

fn detect(text: &str) -> InputFormat {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if first.parse::<usize>().is_ok() {
        InputFormat::Matrix
    } else if first.starts_with('{') && first.contains("\"support\"") {
        InputFormat::UncertainJsonl
    } else {
        InputFormat::PointsJsonl
    }
}

fn json_line<T: for<'de> Deserialize<'de>>(line: &str, path: &str, lineno: usize) -> Result<T, ParseError> {
    serde_json::from_str(line).map_err(|e| {
        let mut msg = e.to_string();
        // serde_json appends its own position; ours replaces it
        if let Some(cut) = msg.find(" at line ") {
            msg.truncate(cut);
        }
        err(path, lineno, e.column().max(1), msg)
    })
}

fn field_column(line: &str, field: &str) -> usize {
    line.find(&format!("\"{field}\"")).map_or(1, |c| c + 1)
}

/// One `{"id", "coords"}` object per line; blank lines are skipped.
pub fn parse_points(text: &str, path: &str) -> Result<PointsFile, ParseError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PointRecord = json_line(line, path, lineno)?;
        if !seen.insert(rec.id) {
            return Err(err(path, lineno, field_column(line, "id"), format!("duplicate id {}", rec.id)));
        }
        if rec.coords.is_empty() {
            return Err(err(path, lineno, field_column(line, "coords"), "empty coordinate list"));
        }
        match dim {
            None => dim = Some(rec.coords.len()),
            Some(d) if d != rec.coords.len() => {
                return Err(err(
                    path,
                    lineno,
                    field_column(line, "coords"),
                    format!("point has {} coordinates, expected {d}", rec.coords.len()),
                ))
            }
            _ => {}
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(err(path, 1, 1, "no points"));
    }
    Ok(PointsFile { records })
}

/// First line `n`, then `n` rows of `n` whitespace-separated reals forming a
/// symmetric matrix with zero diagonal and non-negative entries.
pub fn parse_matrix(text: &str, path: &str) -> Result<MatrixFile, ParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((i0, header)) = lines.next() else {
        return Err(err(path, 1, 1, "empty matrix file"));
    };
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| err(path, i0 + 1, 1, format!("expected the point count, found {:?}", header.trim())))?;
    if n == 0 {
        return Err(err(path, i0 + 1, 1, "matrix needs at least one point"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for r in 0..n {
        let Some((i, line)) = lines.next() else {
            return Err(err(path, i0 + 2 + r, 1, format!("missing row {r} of {n}")));
        };
        let mut row = Vec::with_capacity(n);
        let mut cols = Vec::with_capacity(n);
        for (col, tok) in tokens(line) {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(path, i + 1, col, format!("not a number: {tok:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(err(path, i + 1, col, "entries must be finite and non-negative"));
            }
            row.push(v);
            cols.push(col);
        }
        if row.len() != n {
            return Err(err(path, i + 1, 1, format!("row {r} has {} entries, expected {n}", row.len())));
        }
        if row[r] != 0.0 {
            return Err(err(path, i + 1, cols[r], "diagonal entry must be zero"));
        }
        for c in 0..r {
            if row[c] != rows[c][r] {
                return Err(err(path, i + 1, cols[c], format!("matrix is not symmetric at ({r},{c})")));
            }
        }
        rows.push(row);
    }
    if let Some((i, _)) = lines.next() {
        return Err(err(path, i + 1, 1, format!("unexpected content after {n} rows")));
    }
    Ok(MatrixFile { rows })
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let skip = rest.len() - rest.trim_start().len();
        rest = &rest[skip..];
        offset += skip;
        if rest.is_empty() {
            return None;
        }
        let len = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let tok = &rest[..len];
        let col = offset + 1;
        rest = &rest[len..];
        offset += len;
        Some((col, tok))
    })
}

/// One `{"id", "support", "probs"}` object per line; support entries are
/// ids of `universe` points.
pub fn parse_uncertain(text: &str, path: &str, universe: &PointsFile) -> Result<Vec<NodeRecord>, ParseError> {
    let known: HashSet<u64> = universe.records.iter().map(|r| r.id).collect();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeRecord = json_line(line, path, lineno)?;
        let at = |field: &str, msg: String| err(path, lineno, field_column(line, field), msg);
        if !seen.insert(rec.id) {
            return Err(at("id", format!("duplicate id {}", rec.id)));
        }
        if rec.support.is_empty() {
            return Err(at("support", "empty support".into()));
        }
        if rec.support.len() != rec.probs.len() {
            return Err(at(
                "probs",
                format!("{} probabilities for {} support points", rec.probs.len(), rec.support.len()),
            ));
        }
        let mut distinct = HashSet::new();
        for p in &rec.support {
            if !known.contains(p) {
                return Err(at("support", format!("unknown universe point {p}")));
            }
            if !distinct.insert(*p) {
                return Err(at("support", format!("repeated support point {p}")));
            }
        }
        if rec.probs.iter().any(|&p| !(p > 0.0)) {
            return Err(at("probs", "probabilities must be positive".into()));
        }
        let total: f64 = rec.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(at("probs", format!("probabilities sum to {total}")));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(err(path, 1, 1, "no nodes"));
    }
    Ok(records)
}

pub fn write_points<W: Write>(points: &PointsFile, mut out: W) -> std::io::Result<()> {
    for r in &points.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_matrix<W: Write>(m: &MatrixFile, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", m.rows.len())?;
    for row in &m.rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_uncertain<W: Write>(records: &[NodeRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Site labels for `--partition by-file`: one non-negative integer per
/// line, in input order.
pub fn parse_labels(text: &str, path: &str) -> Result<Vec<usize>, ParseError> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        let col = line.len() - line.trim_start().len() + 1;
        labels.push(
            tok.parse()
                .map_err(|_| err(path, i + 1, col, format!("expected a site label, found {tok:?}")))?,
        );
    }
    Ok(labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>, ParseError> {
    parse_labels(&read_text(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_errors_carry_positions() {
        let e = parse_points("{\"id\": 0, \"coords\": [1.0]}\n{\"id\": 1, \"coords\": [1.0, x]}\n", "p").unwrap_err();
        assert_eq!((e.line, e.path.as_str()), (2, "p"));
        assert!(e.column > 20, "{e}");
        let e = parse_points("{\"id\": 0, \"coords\": [1.0]}\n\n{\"id\": 0, \"coords\": [2.0]}", "p").unwrap_err();
        assert_eq!((e.line, e.column), (3, 2));
        let e = parse_points("{\"id\": 0, \"coords\": [1.0]}\n{\"id\": 1, \"coords\": [1.0, 2.0]}", "p").unwrap_err();
        assert!(e.message.contains("expected 1"));
    }

    #[test]
    fn matrix_checks() {
        let m = parse_matrix("2\n0 1.5\n1.5 0\n", "m").unwrap();
        assert_eq!(m.rows, vec![vec![0.0, 1.5], vec![1.5, 0.0]]);
        let e = parse_matrix("2\n0 1\n2 0\n", "m").unwrap_err();
        assert_eq!((e.line, e.column), (3, 1));
        let e = parse_matrix("2\n0   1\n1  z\n", "m").unwrap_err();
        assert_eq!((e.line, e.column), (3, 4));
        assert!(parse_matrix("3\n0 1 1\n1 0 1\n", "m").is_err());
        assert!(parse_matrix("1\n0\n0\n", "m").is_err());
    }

    #[test]
    fn uncertain_checks() {
        let u = PointsFile::from_coords(vec![vec![0.0], vec![1.0]]);
        let ok = parse_uncertain("{\"id\": 5, \"support\": [0, 1], \"probs\": [0.25, 0.75]}", "u", &u).unwrap();
        assert_eq!(ok[0].support, vec![0, 1]);
        let e = parse_uncertain("{\"id\": 5, \"support\": [0, 7], \"probs\": [0.5, 0.5]}", "u", &u).unwrap_err();
        assert!(e.message.contains("unknown"));
        let e = parse_uncertain("{\"id\": 5, \"support\": [0, 1], \"probs\": [0.5, 0.4]}", "u", &u).unwrap_err();
        assert_eq!(e.column, field_column("{\"id\": 5, \"support\": [0, 1], \"probs\": [0.5, 0.4]}", "probs"));
    }

    #[test]
    fn detection() {
        assert_eq!(detect("3\n0 1 2"), InputFormat::Matrix);
        assert_eq!(detect("{\"id\":0,\"support\":[1],\"probs\":[1]}"), InputFormat::UncertainJsonl);
        assert_eq!(detect("{\"id\":0,\"coords\":[1]}"), InputFormat::PointsJsonl);
    }

    #[test]
    fn token_columns() {
        let t: Vec<_> = tokens("  a bb\tc").collect();
        assert_eq!(t, vec![(3, "a"), (5, "bb"), (8, "c")]);
    }
}
