//! CSV emission and parsing. Floats use Rust's shortest round-trip
//! formatting; a missing value is an empty field.

use crate::error::{io_err, HarnessError, Result};
use crate::metrics::MetricsRecord;
use std::io::{Read, Write};
use std::path::Path;

pub const SERIES_HEADER: [&str; 9] = [
    "step",
    "bid_id",
    "accept",
    "r_hat",
    "score",
    "cum_theoretical_regret",
    "cum_acceptance_regret",
    "cum_oracle_regret",
    "acceptance_rate",
];

fn num(x: f64) -> String {
    // Adding zero turns -0 into 0.
    (x + 0.0).to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_series<W: Write>(out: W, rows: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.bid_id.to_string(),
            u8::from(r.accept).to_string(),
            opt(r.r_hat),
            opt(r.score),
            opt(r.cum_theoretical_regret),
            opt(r.cum_acceptance_regret),
            opt(r.cum_oracle_regret),
            num(r.acceptance_rate),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn read_series<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(SERIES_HEADER) {
        return Err(HarnessError::Config(format!("unexpected series header {:?}", header)));
    }
    let bad = |row: usize, col: &str| HarnessError::Config(format!("series row {row}: bad `{col}`"));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let f = |c: usize| -> Result<Option<f64>> {
            let s = &rec[c];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(i + 1, SERIES_HEADER[c]))
            }
        };
        rows.push(MetricsRecord {
            step: rec[0].parse().map_err(|_| bad(i + 1, "step"))?,
            bid_id: rec[1].parse().map_err(|_| bad(i + 1, "bid_id"))?,
            accept: match &rec[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(i + 1, "accept")),
            },
            r_hat: f(3)?,
            score: f(4)?,
            cum_theoretical_regret: f(5)?,
            cum_acceptance_regret: f(6)?,
            cum_oracle_regret: f(7)?,
            acceptance_rate: f(8)?.ok_or_else(|| bad(i + 1, "acceptance_rate"))?,
        });
    }
    Ok(rows)
}

/// Writes a table of string cells with a header row.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite_opt() -> impl Strategy<Value = Option<f64>> {
        prop::option::of(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL)
    }

    prop_compose! {
        fn record()(step in 0usize..100_000, bid_id in any::<u64>(), accept in any::<bool>(),
                    r_hat in finite_opt(), score in finite_opt(), a in finite_opt(), b in finite_opt(),
                    c in finite_opt(), rate in 0.0f64..=1.0) -> MetricsRecord {
            MetricsRecord { step, bid_id, accept, r_hat, score, cum_theoretical_regret: a,
                            cum_acceptance_regret: b, cum_oracle_regret: c, acceptance_rate: rate }
        }
    }

    proptest! {
        #[test]
        fn series_round_trip(rows in prop::collection::vec(record(), 0..20)) {
            let mut buf = Vec::new();
            write_series(&mut buf, &rows).unwrap();
            prop_assert_eq!(read_series(buf.as_slice()).unwrap(), rows);
        }
    }

    #[test]
    fn missing_score_is_an_empty_field() {
        let row = MetricsRecord {
            step: 1,
            bid_id: 7,
            accept: true,
            r_hat: Some(0.1),
            score: None,
            cum_theoretical_regret: None,
            cum_acceptance_regret: Some(0.9),
            cum_oracle_regret: Some(0.0),
            acceptance_rate: 1.0,
        };
        let mut buf = Vec::new();
        write_series(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,bid_id,accept,r_hat,score,cum_theoretical_regret,cum_acceptance_regret,cum_oracle_regret,acceptance_rate\n\
             1,7,1,0.1,,,0.9,0,1\n"
        );
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(read_series("a,b\n1,2\n".as_bytes()).is_err());
    }
}
