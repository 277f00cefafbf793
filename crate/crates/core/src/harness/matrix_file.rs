//! Plain-text matrices: the dimension `d` on the first line, then `d` rows
//! of `d` whitespace-separated reals. Blank lines and lines starting with
//! `#` are ignored.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symcore::SymMatrix;

/// Asymmetry above which parsing warns before averaging with the transpose.
pub const ASYMMETRY_WARN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMatrix {
    pub matrix: SymMatrix,
    /// `max |m_ij − m_ji|` of the input.
    pub asymmetry: f64,
    pub warning: Option<String>,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Tokens of a line with their 1-based starting columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(move |(s, t)| (line[..s].chars().count() + 1, t))
}

pub fn parse_matrix(text: &str) -> Result<ParsedMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let (dline, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty matrix file"))?;
    let mut dtoks = tokens(first);
    let (dcol, dtok) = dtoks.next().expect("line is not blank");
    let d: usize = dtok.parse().map_err(|_| {
        parse_err(
            dline,
            dcol,
            format!("expected the dimension, found {dtok:?}"),
        )
    })?;
    if d == 0 {
        return Err(parse_err(dline, dcol, "dimension must be at least 1"));
    }
    if let Some((col, t)) = dtoks.next() {
        return Err(parse_err(
            dline,
            col,
            format!("unexpected {t:?} after the dimension"),
        ));
    }

    let mut m = DMatrix::zeros(d, d);
    let mut last_line = dline;
    for i in 0..d {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(last_line + 1, 1, format!("expected {d} rows, found {i}")))?;
        last_line = ln;
        let mut count = 0;
        let mut end_col = 1;
        for (col, t) in tokens(line) {
            if count == d {
                return Err(parse_err(ln, col, format!("row has more than {d} entries")));
            }
            let v: f64 = t
                .parse()
                .map_err(|_| parse_err(ln, col, format!("not a number: {t:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(ln, col, format!("non-finite entry {t:?}")));
            }
            m[(i, count)] = v;
            count += 1;
            end_col = col + t.chars().count();
        }
        if count < d {
            return Err(parse_err(
                ln,
                end_col,
                format!("row has {count} entries, expected {d}"),
            ));
        }
    }
    if let Some((ln, line)) = lines.next() {
        let col = tokens(line).next().map_or(1, |(c, _)| c);
        return Err(parse_err(
            ln,
            col,
            format!("unexpected content after {d} rows"),
        ));
    }

    let asymmetry = (&m - m.transpose()).amax();
    let warning = (asymmetry > ASYMMETRY_WARN).then(|| {
        format!("input not symmetric (max asymmetry {asymmetry:e}); averaged with its transpose")
    });
    Ok(ParsedMatrix {
        matrix: SymMatrix::symmetrize(m),
        asymmetry,
        warning,
    })
}

pub fn read_matrix_file(path: &Path) -> Result<ParsedMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(text: &str) -> (usize, usize) {
        match parse_matrix(text).unwrap_err() {
            Error::Parse { line, column, .. } => (line, column),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn parses_symmetric() {
        let p = parse_matrix("2\n1 0.5\n0.5 2\n").unwrap();
        assert_eq!(
            p.matrix,
            SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap()
        );
        assert_eq!(p.asymmetry, 0.0);
        assert!(p.warning.is_none());
        let p = parse_matrix("# comment\n\n1\n  3e-1  \n").unwrap();
        assert_eq!(p.matrix.get(0, 0), 0.3);
    }

    #[test]
    fn symmetrizes_with_warning() {
        let p = parse_matrix("2\n1 0.4\n0.6 1\n").unwrap();
        assert!((p.matrix.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((p.asymmetry - 0.2).abs() < 1e-15);
        assert!(p.warning.is_some());
        let p = parse_matrix("2\n1 0.5\n0.5000000000000001 1\n").unwrap();
        assert!(p.warning.is_none());
    }

    #[test]
    fn error_positions() {
        assert_eq!(pos(""), (1, 1));
        assert_eq!(pos("x\n"), (1, 1));
        assert_eq!(pos("2 3\n"), (1, 3));
        assert_eq!(pos("0\n"), (1, 1));
        assert_eq!(pos("2\n1 2\n3 abc\n"), (3, 3));
        assert_eq!(pos("2\n1 2 3\n"), (2, 5));
        assert_eq!(pos("2\n1\n"), (2, 2));
        assert_eq!(pos("2\n1 2\n"), (3, 1));
        assert_eq!(pos("1\n1\n  5\n"), (3, 3));
        assert_eq!(pos("1\nnan\n"), (2, 1));
    }

    #[test]
    fn file_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        std::fs::write(&path, "2\n1 0\n0 q\n").unwrap();
        let e = read_matrix_file(&path).unwrap_err().to_string();
        assert!(e.contains("line 3, column 3") && e.contains("m.txt"), "{e}");
        assert!(read_matrix_file(&dir.path().join("missing")).is_err());
    }
}
