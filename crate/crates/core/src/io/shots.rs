use crate::error::{Error, Result};
use crate::histogram::{JointHistogram, ShotRecord};
use std::io::{Read, Write};
use std::path::Path;

const HEADER: [&str; 2] = ["m_s", "m_i"];

fn field(raw: &str, line: usize, name: &str) -> Result<u64> {
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    if raw.parse::<i64>().is_ok() {
        return Err(Error::Validation {
            line,
            message: format!("{name} = {raw} is negative"),
        });
    }
    if raw.parse::<f64>().is_ok() {
        return Err(Error::Validation {
            line,
            message: format!("{name} = {raw} is not an integer count"),
        });
    }
    Err(Error::Parse {
        line,
        message: format!("cannot read {name} from {raw:?}"),
    })
}

/// Reads shot records from CSV text with header `m_s,m_i`.
pub fn read_shots<R: Read>(reader: R) -> Result<Vec<ShotRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !header_seen {
            if rec.len() != 2 || rec[0] != *HEADER[0] || rec[1] != *HEADER[1] {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "expected header \"m_s,m_i\", found {:?}",
                        rec.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
            header_seen = true;
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        out.push(ShotRecord::new(
            field(&rec[0], line, "m_s")?,
            field(&rec[1], line, "m_i")?,
        ));
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 1,
            message: "missing header \"m_s,m_i\"".into(),
        });
    }
    Ok(out)
}

pub fn load_shots(path: impl AsRef<Path>) -> Result<Vec<ShotRecord>> {
    read_shots(std::fs::File::open(path)?)
}

pub fn write_shots<W: Write>(writer: W, records: &[ShotRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "m_s,m_i")?;
    for r in records {
        writeln!(w, "{},{}", r.m_s, r.m_i)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_shots(path: impl AsRef<Path>, records: &[ShotRecord]) -> Result<()> {
    write_shots(std::fs::File::create(path)?, records)
}

/// Tallies records; the cutoffs are the largest observed counts.
pub fn histogram_from_shots(records: &[ShotRecord]) -> Result<JointHistogram> {
    if records.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    Ok(JointHistogram::from_records(records))
}
