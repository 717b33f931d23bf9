//! CSV interaction logs.
//!
//! Header `theta_1..theta_m,x_1..x_m,y[,group]`, one row per round, LF line
//! endings. Numbers use Rust's shortest round-trip formatting so a write/read
//! cycle reproduces every bit. Line numbers in errors count the header as 1.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{AssessmentRule, Interaction};

/// Ordered interaction records with optional per-record group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLog {
    pub m: usize,
    pub records: Vec<Interaction>,
    pub groups: Option<Vec<String>>,
}

impl InteractionLog {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            records: Vec::new(),
            groups: None,
        }
    }

    pub fn from_records(m: usize, records: Vec<Interaction>) -> Result<Self> {
        for r in &records {
            crate::error::check_dim("log record", m, r.features.len())?;
            crate::error::check_dim("log record rule", m, r.rule.dim())?;
        }
        Ok(Self {
            m,
            records,
            groups: None,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The first `t` rounds.
    pub fn prefix(&self, t: usize) -> Self {
        let t = t.min(self.len());
        Self {
            m: self.m,
            records: self.records[..t].to_vec(),
            groups: self.groups.as_ref().map(|g| g[..t].to_vec()),
        }
    }
}

fn header(m: usize, with_group: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=m).map(|i| format!("theta_{i}")).collect();
    h.extend((1..=m).map(|i| format!("x_{i}")));
    h.push("y".into());
    if with_group {
        h.push("group".into());
    }
    h
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_log<W: Write>(log: &InteractionLog, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(header(log.m, log.groups.is_some())).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(2 * log.m + 2);
    for (t, rec) in log.records.iter().enumerate() {
        row.clear();
        row.extend(rec.rule.weights.iter().map(|v| v.to_string()));
        row.extend(rec.features.iter().map(|v| v.to_string()));
        row.push(rec.outcome.to_string());
        if let Some(groups) = &log.groups {
            row.push(groups[t].clone());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a log, inferring `m` from the header.
pub fn read_log<R: Read>(reader: R) -> Result<InteractionLog> {
    read_impl(reader, None)
}

/// Reads a log whose header must describe exactly `m` features.
pub fn read_log_with_dim<R: Read>(reader: R, m: usize) -> Result<InteractionLog> {
    read_impl(reader, Some(m))
}

fn read_impl<R: Read>(reader: R, want_m: Option<usize>) -> Result<InteractionLog> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = r.records();
    let head = match rows.next() {
        Some(h) => h.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let cols = head.len();
    let with_group = head.iter().next_back() == Some("group");
    let numeric = if with_group { cols - 1 } else { cols };
    let m = if numeric >= 3 && numeric % 2 == 1 {
        (numeric - 1) / 2
    } else {
        0
    };
    if let Some(want) = want_m {
        let expected = 2 * want + 1 + usize::from(with_group);
        if cols != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("header has {cols} columns, expected {expected} for m = {want}"),
            });
        }
    }
    if m == 0 || head.iter().ne(header(m, with_group).iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unrecognized header: {}", head.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut log = InteractionLog::new(m);
    let mut groups = with_group.then(Vec::new);
    for row in rows {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != cols {
            return Err(Error::Parse {
                line,
                message: format!("expected {cols} columns, found {}", row.len()),
            });
        }
        let mut nums = Vec::with_capacity(numeric);
        for (j, field) in row.iter().take(numeric).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} is not a number: {field:?}", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {} is not finite", j + 1),
                });
            }
            nums.push(v);
        }
        let rule = AssessmentRule::new(DVector::from_column_slice(&nums[..m]));
        let x = DVector::from_column_slice(&nums[m..2 * m]);
        log.records.push(Interaction {
            rule,
            features: x,
            outcome: nums[2 * m],
        });
        if let Some(g) = groups.as_mut() {
            g.push(row[numeric].to_string());
        }
    }
    log.groups = groups;
    Ok(log)
}
