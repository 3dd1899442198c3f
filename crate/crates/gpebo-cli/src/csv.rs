//! Trace persistence: one CSV row per grid node.
//!
//! Columns: `t, x1..xn (simulation mode), xhat1..xhatn,
//! thetahat1..thetahat4n, z, Fnorm, frozen`. Numbers are rendered with 17
//! significant digits, which round-trips every binary double exactly, so a
//! rerun with identical inputs produces byte-identical files.

use std::fmt;
use std::io::{self, Write};

use gpebo::observer::TraceRecord;

/// 17-significant-digit decimal rendering (exact round trip for f64).
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Errors from reading a trace CSV back.
#[derive(Debug)]
pub enum CsvError {
    Io(io::Error),
    Malformed { line: usize, message: String },
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsvError::Io(e) => write!(f, "{e}"),
            CsvError::Malformed { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for CsvError {}

impl From<io::Error> for CsvError {
    fn from(e: io::Error) -> Self {
        CsvError::Io(e)
    }
}

/// Writes the header and one row per record. `n` fixes the column layout so
/// an empty trace still produces a well-formed header-only file.
pub fn write_trace_csv(
    w: &mut impl Write,
    n: usize,
    with_truth: bool,
    trace: &[TraceRecord],
) -> io::Result<()> {
    let mut header = String::from("t");
    if with_truth {
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
    }
    for i in 1..=n {
        header.push_str(&format!(",xhat{i}"));
    }
    for i in 1..=4 * n {
        header.push_str(&format!(",thetahat{i}"));
    }
    header.push_str(",z,Fnorm,frozen");
    writeln!(w, "{header}")?;

    for rec in trace {
        let mut row = format_g17(rec.t);
        if with_truth {
            let x = rec.x.as_ref().expect("simulation-mode trace");
            for v in x {
                row.push(',');
                row.push_str(&format_g17(*v));
            }
        }
        for v in &rec.x_hat {
            row.push(',');
            row.push_str(&format_g17(*v));
        }
        for v in &rec.theta_hat {
            row.push(',');
            row.push_str(&format_g17(*v));
        }
        row.push(',');
        row.push_str(&format_g17(rec.z));
        row.push(',');
        row.push_str(&format_g17(rec.f_norm));
        row.push(',');
        row.push(if rec.frozen { '1' } else { '0' });
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// In-memory rendering, used for determinism checks and tests.
pub fn trace_csv_string(n: usize, with_truth: bool, trace: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, n, with_truth, trace).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

/// Reads a trace CSV produced by [`write_trace_csv`] back into records.
///
/// The regressor is not part of the CSV schema, so `psi` comes back empty.
pub fn read_trace_csv(text: &str) -> Result<(usize, bool, Vec<TraceRecord>), CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CsvError::Malformed {
        line: 1,
        message: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let with_truth = cols.iter().any(|c| *c == "x1");
    let n = cols.iter().filter(|c| c.starts_with("xhat")).count();
    if n == 0 {
        return Err(CsvError::Malformed {
            line: 1,
            message: "no xhat columns".into(),
        });
    }
    let expected = 1 + if with_truth { n } else { 0 } + n + 4 * n + 3;
    if cols.len() != expected {
        return Err(CsvError::Malformed {
            line: 1,
            message: format!("expected {expected} columns, found {}", cols.len()),
        });
    }

    let mut trace = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != expected {
            return Err(CsvError::Malformed {
                line,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let mut it = fields.into_iter();
        let mut num = |what: &str| -> Result<f64, CsvError> {
            let field = it.next().expect("length checked");
            field.parse().map_err(|_| CsvError::Malformed {
                line,
                message: format!("bad {what}: {field:?}"),
            })
        };
        let t = num("t")?;
        let x = if with_truth {
            let mut x = Vec::with_capacity(n);
            for i in 0..n {
                x.push(num(&format!("x{}", i + 1))?);
            }
            Some(x)
        } else {
            None
        };
        let mut x_hat = Vec::with_capacity(n);
        for i in 0..n {
            x_hat.push(num(&format!("xhat{}", i + 1))?);
        }
        let mut theta_hat = Vec::with_capacity(4 * n);
        for i in 0..4 * n {
            theta_hat.push(num(&format!("thetahat{}", i + 1))?);
        }
        let z = num("z")?;
        let f_norm = num("Fnorm")?;
        let frozen_field = it.next().expect("length checked");
        let frozen = match frozen_field {
            "0" => false,
            "1" => true,
            other => {
                return Err(CsvError::Malformed {
                    line,
                    message: format!("bad frozen flag: {other:?}"),
                })
            }
        };
        trace.push(TraceRecord {
            t,
            x,
            x_hat,
            theta_hat,
            z,
            psi: Vec::new(),
            f_norm,
            frozen,
        });
    }
    Ok((n, with_truth, trace))
}
