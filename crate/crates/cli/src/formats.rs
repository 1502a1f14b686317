//! Text file formats.
//!
//! * QUBO (sparse): `F nnz`, then `nnz` lines `i j value` with `i <= j`.
//! * QUBO (dense, `.csv`): `F` lines of `F` comma-separated values.
//! * Item content matrix: `I F nnz`, then `nnz` lines `i j`.
//! * Similarity matrix: `I nnz`, then `nnz` lines `i j value`.
//!
//! Indices are 0-based. Blank lines and lines starting with `#` are ignored.
//! Values are written in shortest round-trip form, so a write followed by a
//! read reproduces every coefficient exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use ttopt_qubo::qubo::{CsrMatrix, SimilarityMatrix, SparseBinaryMatrix};
use ttopt_qubo::QuboProblem;

use crate::error::{CliError, CliResult};

/// A problem read from disk with the comment lines found in the file.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: QuboProblem,
    pub comments: Vec<String>,
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    comments: Vec<String>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self { path, inner: text.lines().enumerate(), comments: Vec::new(), last: 1 }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::Parse { path: self.path.to_path_buf(), line, message: message.into() }
    }

    /// Next data line, trimmed, with its 1-based number.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (n, raw) in self.inner.by_ref() {
            self.last = n + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                self.comments.push(c.trim().to_string());
                continue;
            }
            return Some((n + 1, line));
        }
        None
    }

    /// Next data line split into whitespace-separated fields.
    fn next_record(&mut self) -> Option<(usize, Vec<&'a str>)> {
        self.next_line().map(|(n, l)| (n, l.split_whitespace().collect()))
    }

    fn expect_record(&mut self, what: &str) -> CliResult<(usize, Vec<&'a str>)> {
        self.next_record().ok_or_else(|| self.err(self.last, format!("unexpected end of file, expected {what}")))
    }

    fn field<T: FromStr>(&self, line: usize, fields: &[&str], k: usize, what: &str) -> CliResult<T> {
        let raw = fields.get(k).ok_or_else(|| self.err(line, format!("missing {what}")))?;
        raw.parse().map_err(|_| self.err(line, format!("invalid {what} `{raw}`")))
    }

    fn arity(&self, line: usize, fields: &[&str], n: usize) -> CliResult<()> {
        if fields.len() != n {
            return Err(self.err(line, format!("expected {n} fields, found {}", fields.len())));
        }
        Ok(())
    }

    fn finish(mut self) -> CliResult<Vec<String>> {
        if let Some((line, _)) = self.next_record() {
            return Err(self.err(line, "unexpected data after the declared entries"));
        }
        Ok(self.comments)
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Reads a QUBO file, choosing the dense reader for `.csv` files.
pub fn read_problem(path: &Path) -> CliResult<LoadedProblem> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_dense_csv(path, &text)
    } else {
        parse_qubo(path, &text)
    }
}

pub fn parse_qubo(path: &Path, text: &str) -> CliResult<LoadedProblem> {
    let mut lines = Lines::new(path, text);
    let (hl, header) = lines.expect_record("header `F nnz`")?;
    lines.arity(hl, &header, 2)?;
    let f: usize = lines.field(hl, &header, 0, "variable count")?;
    let nnz: usize = lines.field(hl, &header, 1, "entry count")?;
    if f == 0 {
        return Err(lines.err(hl, "a QUBO needs at least one variable"));
    }
    let mut seen = vec![0u64; (f * f).div_ceil(64)];
    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (ln, rec) = lines.expect_record("an `i j value` entry")?;
        lines.arity(ln, &rec, 3)?;
        let i: usize = lines.field(ln, &rec, 0, "row index")?;
        let j: usize = lines.field(ln, &rec, 1, "column index")?;
        let v: f64 = lines.field(ln, &rec, 2, "value")?;
        if i > j || j >= f {
            return Err(lines.err(ln, format!("entry ({i}, {j}) is not in the upper triangle of a {f}x{f} matrix")));
        }
        if !v.is_finite() {
            return Err(lines.err(ln, format!("non-finite value {v}")));
        }
        let k = i * f + j;
        if seen[k / 64] >> (k % 64) & 1 == 1 {
            return Err(lines.err(ln, format!("duplicate entry ({i}, {j})")));
        }
        seen[k / 64] |= 1 << (k % 64);
        triplets.push((i, j, v));
    }
    let comments = lines.finish()?;
    let problem = QuboProblem::from_upper_triplets(f, &triplets)?;
    Ok(LoadedProblem { problem, comments })
}

pub fn parse_dense_csv(path: &Path, text: &str) -> CliResult<LoadedProblem> {
    let mut lines = Lines::new(path, text);
    let mut values = Vec::new();
    let mut f = None;
    let mut rows = 0;
    while let Some((ln, raw)) = lines.next_line() {
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        let width = *f.get_or_insert(cells.len());
        if cells.len() != width {
            return Err(lines.err(ln, format!("expected {width} values, found {}", cells.len())));
        }
        for (k, c) in cells.iter().enumerate() {
            let v: f64 = c.parse().map_err(|_| lines.err(ln, format!("invalid value `{c}` in column {}", k + 1)))?;
            if !v.is_finite() {
                return Err(lines.err(ln, format!("non-finite value in column {}", k + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let f = f.ok_or_else(|| lines.err(1, "empty matrix"))?;
    if rows != f {
        return Err(lines.err(lines.last, format!("matrix has {rows} rows and {f} columns")));
    }
    let comments = lines.comments.clone();
    Ok(LoadedProblem { problem: QuboProblem::new(f, values)?, comments })
}

/// Sparse QUBO text; each comment becomes a leading `# ...` line.
pub fn format_qubo(q: &QuboProblem, comments: &[String]) -> String {
    let entries = q.upper_triplets();
    let mut out = String::with_capacity(entries.len() * 24 + 32);
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    writeln!(out, "{} {}", q.size(), entries.len()).unwrap();
    for (i, j, v) in entries {
        writeln!(out, "{i} {j} {v:?}").unwrap();
    }
    out
}

pub fn format_dense_csv(q: &QuboProblem) -> String {
    let f = q.size();
    let mut out = String::new();
    for i in 0..f {
        for j in 0..f {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:?}", q.entry(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes a problem, dense for `.csv` paths and sparse otherwise.
pub fn write_problem(path: &Path, q: &QuboProblem, comments: &[String]) -> CliResult<()> {
    let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        format_dense_csv(q)
    } else {
        format_qubo(q, comments)
    };
    write_atomic(path, text.as_bytes())
}

pub fn read_icm(path: &Path) -> CliResult<SparseBinaryMatrix> {
    let text = read_text(path)?;
    let mut lines = Lines::new(path, &text);
    let (hl, header) = lines.expect_record("header `I F nnz`")?;
    lines.arity(hl, &header, 3)?;
    let items: usize = lines.field(hl, &header, 0, "item count")?;
    let features: usize = lines.field(hl, &header, 1, "feature count")?;
    let nnz: usize = lines.field(hl, &header, 2, "entry count")?;
    let mut coords = Vec::with_capacity(nnz);
    let mut seen = std::collections::HashSet::with_capacity(nnz);
    for _ in 0..nnz {
        let (ln, rec) = lines.expect_record("an `i j` entry")?;
        lines.arity(ln, &rec, 2)?;
        let i: usize = lines.field(ln, &rec, 0, "item index")?;
        let j: usize = lines.field(ln, &rec, 1, "feature index")?;
        if i >= items || j >= features {
            return Err(lines.err(ln, format!("entry ({i}, {j}) outside a {items}x{features} matrix")));
        }
        if !seen.insert((i, j)) {
            return Err(lines.err(ln, format!("duplicate entry ({i}, {j})")));
        }
        coords.push((i, j));
    }
    lines.finish()?;
    Ok(SparseBinaryMatrix::from_coords(items, features, &coords)?)
}

pub fn format_icm(icm: &SparseBinaryMatrix) -> String {
    let mut out = format!("{} {} {}\n", icm.rows(), icm.cols(), icm.nnz());
    for (i, j) in icm.coords() {
        writeln!(out, "{i} {j}").unwrap();
    }
    out
}

pub fn read_similarity(path: &Path) -> CliResult<SimilarityMatrix> {
    let text = read_text(path)?;
    let mut lines = Lines::new(path, &text);
    let (hl, header) = lines.expect_record("header `I nnz`")?;
    lines.arity(hl, &header, 2)?;
    let n: usize = lines.field(hl, &header, 0, "item count")?;
    let nnz: usize = lines.field(hl, &header, 1, "entry count")?;
    let mut triplets = Vec::with_capacity(nnz);
    let mut seen = std::collections::HashSet::with_capacity(nnz);
    for _ in 0..nnz {
        let (ln, rec) = lines.expect_record("an `i j value` entry")?;
        lines.arity(ln, &rec, 3)?;
        let i: usize = lines.field(ln, &rec, 0, "row index")?;
        let j: usize = lines.field(ln, &rec, 1, "column index")?;
        let v: f64 = lines.field(ln, &rec, 2, "value")?;
        if i >= n || j >= n {
            return Err(lines.err(ln, format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(lines.err(ln, format!("similarity must be finite and non-negative, got {v}")));
        }
        if !seen.insert((i, j)) {
            return Err(lines.err(ln, format!("duplicate entry ({i}, {j})")));
        }
        triplets.push((i, j, v));
    }
    lines.finish()?;
    Ok(CsrMatrix::from_triplets(n, n, &triplets)?)
}

pub fn format_similarity(m: &CsrMatrix) -> String {
    let t = m.triplets();
    let mut out = format!("{} {}\n", m.rows(), t.len());
    for (i, j, v) in t {
        writeln!(out, "{i} {j} {v:?}").unwrap();
    }
    out
}

/// An assignment as a single line of `0`/`1` characters.
pub fn format_solution(x: &[u8]) -> String {
    let mut s: String = x.iter().map(|&b| if b != 0 { '1' } else { '0' }).collect();
    s.push('\n');
    s
}

pub fn read_solution(path: &Path) -> CliResult<Vec<u8>> {
    let text = read_text(path)?;
    let mut lines = Lines::new(path, &text);
    let (ln, rec) = lines.expect_record("a line of 0/1 characters")?;
    lines.arity(ln, &rec, 1)?;
    let x = rec[0]
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(lines.err(ln, format!("unexpected character `{other}`"))),
        })
        .collect::<CliResult<Vec<u8>>>()?;
    lines.finish()?;
    Ok(x)
}
