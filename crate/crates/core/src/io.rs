//! Plain-text trajectory, snapshot and receiver files.
//!
//! Trajectory format: a header line `Nx Ny Nt stride`, then every recorded
//! field row-major, one value per line with 17 significant digits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::simulator::Trajectory;

/// Mantissa with six decimals and a signed two-digit exponent: `3.964201e-05`.
pub fn fmt_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let n = traj.n();
    let io = |e| Error::io(path, e);
    writeln!(w, "{n} {n} {} {}", traj.steps, traj.stride).map_err(io)?;
    for f in &traj.fields {
        for v in f.as_slice() {
            writeln!(w, "{v:.16e}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::TrajectoryFormat("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::TrajectoryFormat(format!("bad header {header:?}")))?;
    let [nx, ny, steps, stride] = nums[..] else {
        return Err(Error::TrajectoryFormat(format!("bad header {header:?}")));
    };
    if nx != ny || nx == 0 {
        return Err(Error::TrajectoryFormat(format!("unsupported grid {nx}x{ny}")));
    }
    let mut values = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(
            t.parse::<f64>()
                .map_err(|_| Error::TrajectoryFormat(format!("not a number: {t:?}")))?,
        );
    }
    let per = nx * ny;
    if values.len() % per != 0 {
        return Err(Error::TrajectoryFormat(format!(
            "{} values is not a whole number of {nx}x{ny} fields",
            values.len()
        )));
    }
    let fields = values
        .chunks(per)
        .map(|c| Field::from_vec(nx, c.to_vec()))
        .collect::<Result<_>>()?;
    Ok(Trajectory {
        stride,
        steps,
        fields,
    })
}

/// One snapshot as `i,j,u` rows.
pub fn write_snapshot_csv(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "i,j,u").map_err(io)?;
    let n = field.n();
    for i in 0..n {
        for j in 0..n {
            writeln!(w, "{i},{j},{:.16e}", field.get(i, j)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Receiver time series as `t,u` rows.
pub fn write_receiver_csv(path: impl AsRef<Path>, series: &[(f64, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "t,u").map_err(io)?;
    for (t, u) in series {
        writeln!(w, "{t:.12e},{u:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format_mirrors_tables() {
        assert_eq!(fmt_sci(3.964201e-05), "3.964201e-05");
        assert_eq!(fmt_sci(8.119670e-02), "8.119670e-02");
        assert_eq!(fmt_sci(1.5e3), "1.500000e+03");
        assert_eq!(fmt_sci(0.0), "0.000000e+00");
    }

    #[test]
    fn trajectory_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let traj = Trajectory {
            stride: 2,
            steps: 4,
            fields: (0..3)
                .map(|k| Field::from_fn(5, |i, j| (k as f64 + 0.1) * (i as f64).sin() / (1.0 + j as f64)))
                .collect(),
        };
        let path = dir.path().join("t.txt");
        write_trajectory(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("5 5 4 2\n"));
        assert_eq!(read_trajectory(&path).unwrap(), traj);
    }

    #[test]
    fn malformed_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "3 3 1 1\n1\n2\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::TrajectoryFormat(_))));
        std::fs::write(&path, "3 3 1\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::TrajectoryFormat(_))));
    }
}
