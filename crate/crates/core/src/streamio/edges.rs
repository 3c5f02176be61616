//! Pipe-delimited edge stream files.
//!
//! ```text
//! #sjstream-edges v1
//! 5|a101|article||k7|keyword|fire|has_kw
//! ```
//!
//! Fields: timestamp, source id, source type, source label, target id,
//! target type, target label, edge type. An empty label means unlabeled.
//! The header is written always and accepted optionally; other `#` lines are
//! comments.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::graph::{StreamEdge, VertexSpec};

pub const EDGE_HEADER: &str = "#sjstream-edges v1";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {reason}")]
    Syntax { line: usize, column: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl ParseError {
    fn at(line: usize, column: usize, reason: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            reason: reason.into(),
        }
    }
}

/// Iterator over the edges of a stream, in file order.
pub struct EdgeStreamReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
}

pub fn parse_edge_stream<R: BufRead>(source: R) -> EdgeStreamReader<R> {
    EdgeStreamReader {
        lines: source.lines(),
        line_no: 0,
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<StreamEdge, ParseError> {
    let mut fields = Vec::with_capacity(8);
    let mut start = 0;
    for (i, c) in line.char_indices() {
        if c == '|' {
            fields.push((start, &line[start..i]));
            start = i + 1;
        }
    }
    fields.push((start, &line[start..]));
    if fields.len() != 8 {
        return Err(ParseError::at(line_no, 1, format!("expected 8 fields, found {}", fields.len())));
    }
    let col = |i: usize| fields[i].0 + 1;
    let timestamp = fields[0]
        .1
        .trim()
        .parse()
        .map_err(|_| ParseError::at(line_no, col(0), format!("bad timestamp {:?}", fields[0].1)))?;
    for i in [1, 2, 4, 5, 7] {
        if fields[i].1.is_empty() {
            return Err(ParseError::at(line_no, col(i), "required field is empty"));
        }
    }
    Ok(StreamEdge {
        timestamp,
        src: VertexSpec::new(fields[1].1, fields[2].1, fields[3].1),
        dst: VertexSpec::new(fields[4].1, fields[5].1, fields[6].1),
        etype: fields[7].1.to_string(),
    })
}

impl<R: BufRead> Iterator for EdgeStreamReader<R> {
    type Item = Result<StreamEdge, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#sjstream-edges") {
                if rest.trim() != "v1" {
                    return Some(Err(ParseError::at(self.line_no, 1, format!("unsupported version {:?}", rest.trim()))));
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            return Some(parse_line(line, self.line_no));
        }
    }
}

pub fn read_edge_file(path: impl AsRef<Path>) -> Result<Vec<StreamEdge>, ParseError> {
    let file = File::open(path)?;
    parse_edge_stream(BufReader::new(file)).collect()
}

fn check_field(s: &str) -> io::Result<&str> {
    if s.contains(['|', '\n', '\r']) {
        Err(io::Error::new(io::ErrorKind::InvalidInput, format!("field {s:?} contains a separator")))
    } else {
        Ok(s)
    }
}

/// Writes the header and one line per edge.
pub fn write_edge_stream<'a, W: Write>(mut out: W, edges: impl IntoIterator<Item = &'a StreamEdge>) -> io::Result<()> {
    writeln!(out, "{EDGE_HEADER}")?;
    for e in edges {
        writeln!(
            out,
            "{}|{}|{}|{}|{}|{}|{}|{}",
            e.timestamp,
            check_field(&e.src.key)?,
            check_field(&e.src.vtype)?,
            check_field(&e.src.label)?,
            check_field(&e.dst.key)?,
            check_field(&e.dst.vtype)?,
            check_field(&e.dst.label)?,
            check_field(&e.etype)?
        )?;
    }
    Ok(())
}
