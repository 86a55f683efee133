//! The `UOP 1` text format for multipartite operators.
//!
//! ```text
//! UOP 1
//! # optional comment lines
//! dims 2 2
//! 1.0,0.0 0.0,0.0 0.0,0.0 0.0,0.0
//! ...
//! ```
//!
//! After the header and the `dims` line come `D` rows of `D`
//! whitespace-separated `re,im` tokens. Entries are written with 17
//! significant digits, which round-trips every `f64`.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use ctrlrank_core::{CMatrix, MultipartiteOperator, PartyDims, C64};

pub const MAGIC: &str = "UOP 1";

#[derive(Debug, thiserror::Error)]
pub enum UopError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> UopError {
    UopError::Syntax { line, column, message: message.into() }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Tokens with their 1-based starting columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices().chain([(line.len(), ' ')]) {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((line[..s].chars().count() + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    out.into_iter()
}

fn parse_entry(token: &str, line: usize, column: usize) -> Result<C64, UopError> {
    let (re, im) = token
        .split_once(',')
        .ok_or_else(|| syntax(line, column, format!("expected `re,im`, found `{token}`")))?;
    let num = |s: &str, col: usize| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| syntax(line, col, format!("malformed number `{s}`")))
    };
    Ok(C64::new(num(re, column)?, num(im, column + re.len() + 1)?))
}

pub fn parse_uop(text: &str) -> Result<MultipartiteOperator, UopError> {
    let mut lines = content_lines(text);
    let last_line = text.lines().count().max(1);

    let (ln, header) = lines.next().ok_or_else(|| syntax(1, 1, "empty input, expected `UOP 1`"))?;
    if header.trim() != MAGIC {
        return Err(syntax(ln, 1, format!("bad magic `{}`, expected `{MAGIC}`", header.trim())));
    }

    let (ln, dims_line) = lines.next().ok_or_else(|| syntax(last_line, 1, "missing `dims` line"))?;
    let mut toks = tokens(dims_line);
    match toks.next() {
        Some((_, "dims")) => {}
        Some((col, t)) => return Err(syntax(ln, col, format!("expected `dims`, found `{t}`"))),
        None => unreachable!("content lines are nonblank"),
    }
    let mut dims = Vec::new();
    for (col, t) in toks {
        let d: usize = t.parse().map_err(|_| syntax(ln, col, format!("malformed dimension `{t}`")))?;
        if d == 0 {
            return Err(syntax(ln, col, "dimensions must be >= 1"));
        }
        dims.push(d);
    }
    if dims.is_empty() {
        return Err(syntax(ln, dims_line.len() + 1, "no dimensions given"));
    }
    let dims = PartyDims::new(dims).map_err(|e| syntax(ln, 1, e.to_string()))?;
    let n = dims.total();

    let mut entries = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (ln, line) in lines {
        if rows == n {
            return Err(syntax(ln, 1, format!("extra row; dims give {n} rows")));
        }
        let row: Vec<(usize, &str)> = tokens(line).collect();
        if row.len() != n {
            let col = row.get(n).map_or(line.len() + 1, |t| t.0);
            return Err(syntax(ln, col, format!("row has {} entries, expected {n}", row.len())));
        }
        for (col, t) in row {
            entries.push(parse_entry(t, ln, col)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(syntax(last_line, 1, format!("found {rows} rows, expected {n}")));
    }
    let m = CMatrix::from_row_slice(n, n, &entries);
    MultipartiteOperator::new(dims, m).map_err(|e| syntax(1, 1, e.to_string()))
}

pub fn read_uop(mut r: impl Read) -> Result<MultipartiteOperator, UopError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    parse_uop(&text)
}

pub fn format_uop(u: &MultipartiteOperator) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str("dims");
    for d in u.dims().dims() {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
    let m = u.matrix();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let z = m[(i, j)];
            let _ = write!(out, "{:.16e},{:.16e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

pub fn write_uop(u: &MultipartiteOperator, mut w: impl Write) -> io::Result<()> {
    w.write_all(format_uop(u).as_bytes())
}
