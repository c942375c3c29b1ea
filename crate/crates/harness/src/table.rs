//! The trial CSV format. The first line is a `#` comment with the write
//! time; every later line is deterministic.

use std::io::{self, Read, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::experiment::TrialRow;

pub const HEADER: [&str; 10] = [
    "algorithm",
    "n",
    "seed",
    "profile",
    "cost",
    "failed",
    "failure_type",
    "degenerate",
    "phases",
    "elapsed_ns",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_record(r: &TrialRow) -> [String; 10] {
    [
        r.algorithm.clone(),
        r.n.to_string(),
        r.seed.to_string(),
        r.profile.clone(),
        format_float(r.cost),
        r.failed.to_string(),
        r.failure_type.clone(),
        r.degenerate.to_string(),
        r.phases.to_string(),
        r.elapsed_ns.to_string(),
    ]
}

pub fn write_rows<W: Write>(mut w: W, rows: &[TrialRow]) -> io::Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(w, "# stochsort trials written at unix time {secs}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(HEADER)?;
    for r in rows {
        csv.write_record(to_record(r))?;
    }
    csv.flush()?;
    Ok(())
}

/// The data lines of a CSV produced by [`write_rows`], without the
/// timestamp comment.
pub fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> io::Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad `{}` value `{raw}`", HEADER[i])))
}

pub fn read_rows<R: Read>(r: R) -> io::Result<Vec<TrialRow>> {
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = csv.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected CSV header"));
    }
    let mut rows = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        rows.push(TrialRow {
            algorithm: field(&rec, 0)?,
            n: field(&rec, 1)?,
            seed: field(&rec, 2)?,
            profile: field(&rec, 3)?,
            cost: field(&rec, 4)?,
            failed: field(&rec, 5)?,
            failure_type: field(&rec, 6)?,
            degenerate: field(&rec, 7)?,
            phases: field(&rec, 8)?,
            elapsed_ns: field(&rec, 9)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cost: f64) -> TrialRow {
        TrialRow {
            algorithm: "alg_final".into(),
            n: 4096,
            seed: 17,
            profile: "practical".into(),
            cost,
            failed: true,
            failure_type: "no_cell".into(),
            degenerate: false,
            phases: 4,
            elapsed_ns: 0,
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# "));
        assert_eq!(
            lines.next().unwrap(),
            "algorithm,n,seed,profile,cost,failed,failure_type,degenerate,phases,elapsed_ns"
        );
    }

    #[test]
    fn floats_round_trip() {
        let rows = vec![row(1.0 / 3.0), row(0.1 + 0.2), row(0.0), row(1e-300)];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(data_lines(&text)[0], "alg_final,4096,17,practical,3.3333333333333331e-1,true,no_cell,false,4,0");
        assert_eq!(read_rows(text.as_bytes()).unwrap(), rows);
    }

    #[test]
    fn rejects_other_headers() {
        assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
    }
}
