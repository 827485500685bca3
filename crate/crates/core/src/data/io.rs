use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{RunTrace, TraceRecord};
use crate::problem::Dataset;
use crate::scalar::Scalar;

/// How libsvm labels are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Classification labels mapped to `{-1, +1}`: positive values become
    /// `+1`, everything else (including 0) `-1`.
    #[default]
    Binary,
    /// Regression targets kept as is.
    Real,
}

/// Reads a libsvm file (`label idx:val ...`, 1-based indices) into a sparse
/// dataset. The dimension is the largest index seen unless `dim` is given.
pub fn read_libsvm<T: Scalar>(path: impl AsRef<Path>, mode: LabelMode, dim: Option<usize>) -> Result<Dataset<T>> {
    let file = fs::File::open(path.as_ref())?;
    parse_libsvm(file, mode, dim)
}

pub fn parse_libsvm<T: Scalar, R: Read>(reader: R, mode: LabelMode, dim: Option<usize>) -> Result<Dataset<T>> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad label `{label_tok}`"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                message: "non-finite label".into(),
            });
        }
        labels.push(T::lit(match mode {
            LabelMode::Binary if label > 0.0 => 1.0,
            LabelMode::Binary => -1.0,
            LabelMode::Real => label,
        }));
        let mut row: Vec<(usize, T)> = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected idx:val, got `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad value `{val}`"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: "non-finite value".into(),
                });
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, T::lit(val)));
        }
        if row.windows(2).any(|w| w[0].0 >= w[1].0) {
            log::warn!("libsvm line {lineno}: indices not increasing, sorting");
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Parse {
                    line: lineno,
                    message: "duplicate feature index".into(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("no samples in libsvm input".into()));
    }
    let p = match dim {
        Some(d) if d < max_index => {
            return Err(Error::InvalidDataset(format!(
                "index {max_index} exceeds the declared dimension {d}"
            )))
        }
        Some(d) => d,
        None => max_index.max(1),
    };
    Dataset::sparse(p, rows, labels)
}

/// Writes a dataset in libsvm format; zero entries are skipped and values use
/// the shortest round-trip representation.
pub fn write_libsvm<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..data.n() {
        write!(out, "{:?}", data.responses()[i].to_f64_lossy()).unwrap();
        let row = data.row(i).to_dense(data.p());
        for (j, v) in row.iter().enumerate() {
            if *v != T::zero() {
                write!(out, " {}:{:?}", j + 1, v.to_f64_lossy()).unwrap();
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Json,
}

pub const TRACE_HEADER: &str = "epoch,passes,objective,gap,grad_evals,wallclock_ms";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a trace as CSV (`TRACE_HEADER` columns, 17 significant digits,
/// blank gap without a reference) or JSON.
pub fn write_trace<T: Scalar + Serialize>(trace: &RunTrace<T>, path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
    let text = match format {
        TraceFormat::Csv => {
            let mut s = String::from(TRACE_HEADER);
            s.push('\n');
            for r in &trace.records {
                writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.epoch,
                    num(r.passes),
                    num(r.objective),
                    r.gap.map(num).unwrap_or_default(),
                    r.grad_evals,
                    num(r.wallclock_ms)
                )
                .unwrap();
            }
            s
        }
        TraceFormat::Json => {
            let mut s = serde_json::to_string_pretty(trace).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    fs::write(path, text)?;
    Ok(())
}

/// Reads the records of a CSV trace.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing trace header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: k + 1,
            message: m.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        out.push(TraceRecord {
            epoch: f[0].parse().map_err(|_| bad("bad epoch"))?,
            passes: float(f[1])?,
            objective: float(f[2])?,
            gap: if f[3].is_empty() { None } else { Some(float(f[3])?) },
            grad_evals: f[4].parse().map_err(|_| bad("bad grad_evals"))?,
            wallclock_ms: float(f[5])?,
        });
    }
    Ok(out)
}

/// Reads a JSON trace.
pub fn read_trace_json<T: Scalar + for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<RunTrace<T>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libsvm_lines() {
        let d: Dataset<f64> = parse_libsvm("1 3:0.5 7:-2\n0 1:1\n-1\n".as_bytes(), LabelMode::Binary, None).unwrap();
        assert_eq!(d.responses(), &[1.0, -1.0, -1.0]);
        assert_eq!(d.p(), 7);
        let r0 = d.row(0).to_dense(7);
        assert_eq!(r0[2], 0.5);
        assert_eq!(r0[6], -2.0);
        assert_eq!(d.row(2).to_dense(7), vec![0.0; 7]);
    }

    #[test]
    fn libsvm_errors() {
        let e = parse_libsvm::<f64, _>("1 1:1\n1 2:x\n".as_bytes(), LabelMode::Binary, None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_libsvm::<f64, _>("1 0:1\n".as_bytes(), LabelMode::Binary, None).is_err());
        assert!(parse_libsvm::<f64, _>("1 2:1 2:3\n".as_bytes(), LabelMode::Binary, None).is_err());
        let d: Dataset<f64> = parse_libsvm("2.5 4:1 2:3\n".as_bytes(), LabelMode::Real, None).unwrap();
        assert_eq!(d.responses(), &[2.5]);
        assert_eq!(d.row(0).to_dense(4), vec![0.0, 3.0, 0.0, 1.0]);
    }
}
