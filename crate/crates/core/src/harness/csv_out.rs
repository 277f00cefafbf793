use std::io::Write;

use crate::error::{Error, Result};
use crate::symcore::{lebesgue_coord_names, lebesgue_coords, SymMatrix};

use super::Record;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("write failed: {e}"))
}

/// One row per draw: the isometric coordinates (diagonal entries, then
/// `√2·x_ij` for `i < j`), then the weight when there is one.
pub fn write_samples_csv<W: Write>(
    out: W,
    d: usize,
    draws: &[(SymMatrix, Option<f64>)],
) -> Result<()> {
    let weighted = draws.first().is_some_and(|(_, w)| w.is_some());
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = lebesgue_coord_names(d);
    if weighted {
        header.push("weight".into());
    }
    wtr.write_record(&header).map_err(io_err)?;
    for (m, w) in draws {
        if m.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: m.dim(),
            });
        }
        let mut row: Vec<String> = lebesgue_coords(m).into_iter().map(fmt_f64).collect();
        if weighted {
            row.push(fmt_f64(w.ok_or_else(|| {
                Error::Invalid("mixed weighted and unweighted draws".into())
            })?));
        }
        wtr.write_record(&row).map_err(io_err)?;
    }
    wtr.flush().map_err(io_err)
}

pub fn write_records_csv<W: Write>(out: W, records: &[Record]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "name",
        "value",
        "expected",
        "error",
        "tolerance",
        "metric",
        "pass",
        "provenance",
        "anchor",
    ])
    .map_err(io_err)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in records {
        wtr.write_record([
            r.name.clone(),
            fmt_f64(r.value),
            opt(r.expected),
            opt(r.error),
            opt(r.tolerance),
            tag(&r.metric),
            r.pass.to_string(),
            tag(&r.provenance),
            r.anchor.clone(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// The serde name of a unit enum variant.
fn tag<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Provenance;

    #[test]
    fn floats_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn sample_rows() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, 2, &[(m.clone(), Some(3.0))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x11,x22,sqrt2_x12,weight");
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(row, vec![1.0, 2.0, std::f64::consts::SQRT_2 * 0.5, 3.0]);

        let mut buf = Vec::new();
        write_samples_csv(&mut buf, 2, &[(m.clone(), None)]).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("x11,x22,sqrt2_x12\n"));
        assert!(write_samples_csv(Vec::new(), 3, &[(m.clone(), None)]).is_err());
        assert!(write_samples_csv(Vec::new(), 2, &[(m.clone(), Some(1.0)), (m, None)]).is_err());
    }

    #[test]
    fn record_rows() {
        let recs = [Record::rel(
            "a, b",
            2.0,
            2.0,
            1e-9,
            Provenance::MonteCarlo,
            "x = y",
        )];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.starts_with("\"a, b\",2.0000000000000000e0,"), "{row}");
        assert!(row.contains(",rel_err,true,monte-carlo,x = y"), "{row}");
    }
}
