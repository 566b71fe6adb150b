//! CSV and JSON artifacts.
//!
//! Every float is written with 17 significant digits so files re-parse to the
//! exact values in memory. Non-finite values are written as `nan`, `inf` and
//! `-inf`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{TimeGrid, Trajectory};
use crate::predictor::{EnvelopeBands, TrajectoryEnvelope};
use crate::trainer::LogEntry;

pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_owned()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x:.16e}")
    }
}

pub fn component_names(dim: usize) -> Vec<String> {
    if dim == 3 {
        ["x", "y", "z"].map(String::from).to_vec()
    } else {
        (1..=dim).map(|i| format!("u{i}")).collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    }
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_owned()];
    header.extend(component_names(traj.dim()));
    w.write_record(&header)?;
    for (t, s) in traj.grid().times().iter().zip(traj.states()) {
        w.write_record(std::iter::once(*t).chain(s.iter().copied()).map(format_f64))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory(create(path)?, traj)
}

/// Rows of floats below a header, with the header names.
fn read_table<R: Read>(input: R, source: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(source, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_err(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: source.to_owned(),
                    line,
                    message: format!("column {} ({}): cannot parse {field:?} as a number", col + 1, header[col]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: source.to_owned(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok((header, rows))
}

fn grid_from_rows(rows: &[Vec<f64>], source: &Path) -> Result<TimeGrid> {
    TimeGrid::from_times(rows.iter().map(|r| r[0]).collect()).map_err(|e| Error::Parse {
        path: source.to_owned(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_trajectory<R: Read>(input: R, source: &Path) -> Result<Trajectory> {
    let (header, rows) = read_table(input, source)?;
    if header.len() < 2 || header[0] != "t" {
        return Err(Error::Parse {
            path: source.to_owned(),
            line: 1,
            message: format!("expected header `t,<components>`, got {}", header.join(",")),
        });
    }
    let dim = header.len() - 1;
    let grid = grid_from_rows(&rows, source)?;
    let states = rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    Trajectory::new(grid, dim, states)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    read_trajectory(open(path)?, path)
}

pub fn write_envelope<W: Write>(out: W, env: &TrajectoryEnvelope) -> Result<()> {
    let bands = &env.bands;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_owned()];
    for name in component_names(bands.dim) {
        header.extend([format!("mean_{name}"), format!("lo_{name}"), format!("hi_{name}")]);
    }
    w.write_record(&header)?;
    for (i, t) in bands.grid.times().iter().enumerate() {
        let mut row = vec![format_f64(*t)];
        for c in 0..bands.dim {
            let idx = i * bands.dim + c;
            row.extend([bands.mean[idx], bands.lower[idx], bands.upper[idx]].map(format_f64));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_envelope_csv(path: &Path, env: &TrajectoryEnvelope) -> Result<()> {
    write_envelope(create(path)?, env)
}

pub fn read_envelope<R: Read>(input: R, source: &Path) -> Result<EnvelopeBands> {
    let (header, rows) = read_table(input, source)?;
    let cols = header.len();
    let valid = cols >= 4
        && (cols - 1) % 3 == 0
        && header[0] == "t"
        && header[1..]
            .chunks(3)
            .all(|c| c[0].starts_with("mean_") && c[1].starts_with("lo_") && c[2].starts_with("hi_"));
    if !valid {
        return Err(Error::Parse {
            path: source.to_owned(),
            line: 1,
            message: format!("expected header `t,mean_*,lo_*,hi_*,...`, got {}", header.join(",")),
        });
    }
    let dim = (cols - 1) / 3;
    let grid = grid_from_rows(&rows, source)?;
    let pick = |offset: usize| -> Vec<f64> {
        rows.iter()
            .flat_map(|r| (0..dim).map(move |c| r[1 + 3 * c + offset]))
            .collect()
    };
    Ok(EnvelopeBands {
        grid,
        dim,
        mean: pick(0),
        lower: pick(1),
        upper: pick(2),
    })
}

pub fn read_envelope_csv(path: &Path) -> Result<EnvelopeBands> {
    read_envelope(open(path)?, path)
}

pub fn write_loss_csv(path: &Path, log: &[LogEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["iter", "loss"])?;
    for e in log {
        w.write_record([e.iter.to_string(), format_f64(e.loss)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: PathBuf::from(path),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(values: Vec<f64>) -> Trajectory {
        let grid = TimeGrid::uniform(0.0, 0.1, values.len() / 3).unwrap();
        Trajectory::new(grid, 3, values).unwrap()
    }

    #[test]
    fn header_and_tokens() {
        let t = traj(vec![1.0, -2.5, 0.1, f64::NAN, f64::INFINITY, f64::NEG_INFINITY]);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,z"));
        assert_eq!(lines.next(), Some("0.0000000000000000e0,1.0000000000000000e0,-2.5000000000000000e0,1.0000000000000001e-1"));
        assert!(lines.next().unwrap().ends_with(",nan,inf,-inf"));
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = "t,x,y,z\n0,1,2,3\n0.5,1,oops,3\n";
        match read_trajectory(text.as_bytes(), Path::new("data.csv")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let ragged = "t,x,y,z\n0,1,2,3\n0.5,1,2\n";
        assert!(matches!(
            read_trajectory(ragged.as_bytes(), Path::new("r.csv")),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn envelope_header_is_checked() {
        let text = "t,mean_x,hi_x,lo_x\n0,1,2,0\n1,1,2,0\n";
        assert!(read_envelope(text.as_bytes(), Path::new("e.csv")).is_err());
    }

    proptest! {
        #[test]
        fn trajectory_csv_round_trips_exactly(
            values in proptest::collection::vec(
                prop_oneof![any::<f64>(), Just(f64::NAN), Just(f64::INFINITY)], 3..60)
        ) {
            let n = values.len() / 3 * 3;
            let t = traj(values[..n].to_vec());
            let mut buf = Vec::new();
            write_trajectory(&mut buf, &t).unwrap();
            let back = read_trajectory(buf.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.grid(), t.grid());
            for (a, b) in back.values().iter().zip(t.values()) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
