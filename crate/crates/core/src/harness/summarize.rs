use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::sweep::{ResultRow, CSV_HEADER};
use crate::quantizer::Bits;
use crate::{Error, Result};

/// Reads a result CSV written by the sweep.
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {CSV_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            field(j).parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column {} is not a number: {:?}", expected[j], field(j)),
            })
        };
        let count = |j: usize| -> Result<usize> {
            field(j).parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column {} is not a count: {:?}", expected[j], field(j)),
            })
        };
        rows.push(ResultRow {
            receiver: field(0).to_string(),
            bits: field(1).parse().map_err(|e: Error| Error::Parse {
                line,
                msg: e.to_string(),
            })?,
            ebn0_db: num(2)?,
            mismatch_db: num(3)?,
            ber: num(4)?,
            nmse: num(5)?,
            frames: count(7)?,
            bit_errors: count(8)?,
            info_bits: count(9)?,
            mean_turbo_iters: num(10)?,
            mean_eq_iters: num(11)?,
            wall_time_s: num(12)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::invalid("result file has no rows"));
    }
    Ok(rows)
}

type PointKey = (String, String, String);

fn point_key(r: &ResultRow) -> PointKey {
    (r.bits.to_string(), format!("{}", r.ebn0_db), format!("{}", r.mismatch_db))
}

/// Fixed-width table of the rows. With more than one receiver, every row
/// also shows its BER and NMSE difference from the first receiver at the
/// same `(bits, Eb/N0, mismatch)` point.
pub fn summary_table(rows: &[ResultRow]) -> String {
    let baseline = rows.first().map(|r| r.receiver.clone()).unwrap_or_default();
    let paired = rows.iter().any(|r| r.receiver != baseline);
    let base: BTreeMap<PointKey, &ResultRow> = rows
        .iter()
        .filter(|r| r.receiver == baseline)
        .map(|r| (point_key(r), r))
        .collect();
    let mut out = String::new();
    let _ = write!(
        out,
        "{:<18} {:>4} {:>7} {:>6} {:>11} {:>9} {:>7} {:>7} {:>8}",
        "receiver", "bits", "ebn0_db", "mm_db", "ber", "nmse_db", "frames", "turbo", "eq_iters"
    );
    if paired {
        let _ = write!(out, " {:>11} {:>9}", format!("dber:{baseline}"), "dnmse_db");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{:<18} {:>4} {:>7.2} {:>6.2} {:>11.4e} {:>9.2} {:>7} {:>7.2} {:>8.1}",
            r.receiver,
            r.bits.to_string(),
            r.ebn0_db,
            r.mismatch_db,
            r.ber,
            r.nmse_db(),
            r.frames,
            r.mean_turbo_iters,
            r.mean_eq_iters
        );
        if paired {
            match base.get(&point_key(r)) {
                Some(b) => {
                    let _ = write!(out, " {:>11.4e} {:>9.2}", r.ber - b.ber, r.nmse_db() - b.nmse_db());
                }
                None => {
                    let _ = write!(out, " {:>11} {:>9}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// One whitespace-separated file per `(receiver, bits, mismatch)` curve with
/// columns `ebn0_db ber nmse_db`, sorted by Eb/N0. Returns the file names.
pub fn write_gnuplot(rows: &[ResultRow], dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut curves: BTreeMap<(String, String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let mm = format!("{}", r.mismatch_db);
        curves
            .entry((r.receiver.clone(), bits_label(r.bits), mm))
            .or_default()
            .push(r);
    }
    let mut names = Vec::new();
    for ((receiver, bits, mm), mut pts) in curves {
        pts.sort_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db));
        let name = format!("{receiver}_b{bits}_mm{mm}.dat");
        let mut text = String::from("# ebn0_db ber nmse_db\n");
        for p in pts {
            let _ = writeln!(text, "{} {:.6e} {:.4}", p.ebn0_db, p.ber, p.nmse_db());
        }
        let path = dir.join(&name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        names.push(name);
    }
    Ok(names)
}

fn bits_label(b: Bits) -> String {
    match b {
        Bits::Infinite => "inf".into(),
        Bits::Finite(n) => n.to_string(),
    }
}
