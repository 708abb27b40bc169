//! Diagnostics CSV, grid snapshots and config echo.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::CellKind;
use crate::sim::Simulation;

/// Column order of `diagnostics.csv`.
pub const CSV_COLUMNS: [&str; 22] = [
    "step", "body", "x", "y", "z", "heel_deg", "vx", "vy", "vz", "wx", "wy", "wz", "fx", "fy", "fz", "tx", "ty",
    "tz", "covered_cells", "mass_balance", "max_interface_speed", "max_speed",
];

/// One diagnostics sample for one body. Runs without bodies produce rows
/// with `body = -1` and zero body columns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRow {
    pub step: u64,
    pub body: i64,
    pub position: [f64; 3],
    pub heel_deg: f64,
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub force: [f64; 3],
    pub torque: [f64; 3],
    pub covered_cells: u64,
    pub mass_balance: f64,
    pub max_interface_speed: f64,
    pub max_speed: f64,
}

fn push3(s: &mut String, v: &[f64; 3]) {
    for x in v {
        let _ = write!(s, ",{x:.16e}");
    }
}

impl DiagnosticsRow {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}", self.step, self.body);
        push3(&mut s, &self.position);
        let _ = write!(s, ",{:.16e}", self.heel_deg);
        push3(&mut s, &self.velocity);
        push3(&mut s, &self.angular_velocity);
        push3(&mut s, &self.force);
        push3(&mut s, &self.torque);
        let _ = write!(
            s,
            ",{},{:.16e},{:.16e},{:.16e}",
            self.covered_cells, self.mass_balance, self.max_interface_speed, self.max_speed
        );
        s
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} columns, found {}",
                CSV_COLUMNS.len(),
                f.len()
            )));
        }
        let bad = |k: usize| Error::InvalidArgument(format!("column {} unparsable: '{}'", CSV_COLUMNS[k], f[k]));
        let x = |k: usize| f[k].parse::<f64>().map_err(|_| bad(k));
        let v = |k: usize| -> Result<[f64; 3]> { Ok([x(k)?, x(k + 1)?, x(k + 2)?]) };
        Ok(Self {
            step: f[0].parse().map_err(|_| bad(0))?,
            body: f[1].parse().map_err(|_| bad(1))?,
            position: v(2)?,
            heel_deg: x(5)?,
            velocity: v(6)?,
            angular_velocity: v(9)?,
            force: v(12)?,
            torque: v(15)?,
            covered_cells: f[18].parse().map_err(|_| bad(18))?,
            mass_balance: x(19)?,
            max_interface_speed: x(20)?,
            max_speed: x(21)?,
        })
    }
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn write_csv(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = csv_header();
    body.push('\n');
    for r in rows {
        body.push_str(&r.to_csv());
        body.push('\n');
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == csv_header() => {}
        _ => return Err(Error::InvalidArgument(format!("{}: missing or wrong header", path.display()))),
    }
    lines.filter(|l| !l.is_empty()).map(DiagnosticsRow::from_csv).collect()
}

/// Legacy VTK structured-points file with one point per cell center:
/// `state` (0 liquid, 1 interface, 2 gas, 3 obstacle), `fill` and `velocity`.
pub fn write_vtk_snapshot(path: &Path, sim: &Simulation) -> Result<()> {
    let d = sim.dims();
    let mut s = String::with_capacity(d.len() * 48);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "free-surface lattice snapshot step {}", sim.step);
    let _ = writeln!(s, "ASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", d.nx, d.ny, d.nz);
    let _ = writeln!(s, "ORIGIN 0.5 0.5 0.5\nSPACING 1 1 1");
    let _ = writeln!(s, "POINT_DATA {}", d.len());
    let _ = writeln!(s, "SCALARS state int 1\nLOOKUP_TABLE default");
    for k in &sim.cells.kind {
        let _ = writeln!(s, "{}", k.code());
    }
    let _ = writeln!(s, "SCALARS fill double 1\nLOOKUP_TABLE default");
    for f in &sim.cells.fill {
        let _ = writeln!(s, "{f:.9e}");
    }
    let _ = writeln!(s, "VECTORS velocity double");
    for (k, u) in sim.cells.kind.iter().zip(&sim.vel) {
        let u = if k.is_fluid() { *u } else { [0.0; 3] };
        let _ = writeln!(s, "{:.9e} {:.9e} {:.9e}", u[0], u[1], u[2]);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes the config echo on creation, snapshots on demand and the CSV at
/// the end.
#[derive(Debug)]
pub struct OutputWriter {
    pub dir: PathBuf,
    pub snapshot_every: u64,
    pub snapshots: Vec<PathBuf>,
}

impl OutputWriter {
    pub fn create(dir: &Path, config_echo: &str, snapshot_every: u64) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let echo = dir.join("config.echo");
        fs::write(&echo, config_echo).map_err(|e| Error::io(&echo, e))?;
        Ok(Self { dir: dir.to_path_buf(), snapshot_every, snapshots: Vec::new() })
    }

    /// Writes a snapshot if the current step is on the cadence.
    pub fn maybe_snapshot(&mut self, sim: &Simulation) -> Result<()> {
        if self.snapshot_every > 0 && sim.step % self.snapshot_every == 0 {
            let p = self.dir.join(format!("snapshot_{:08}.vtk", sim.step));
            write_vtk_snapshot(&p, sim)?;
            self.snapshots.push(p);
        }
        Ok(())
    }

    pub fn finish(&self, rows: &[DiagnosticsRow]) -> Result<PathBuf> {
        let p = self.dir.join("diagnostics.csv");
        write_csv(&p, rows)?;
        Ok(p)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }
}

/// Writes the echo, the CSV and (optionally) one final snapshot in one go.
pub fn write_outputs(
    dir: &Path,
    config_echo: &str,
    rows: &[DiagnosticsRow],
    grid: Option<&Simulation>,
) -> Result<()> {
    let w = OutputWriter::create(dir, config_echo, 0)?;
    w.finish(rows)?;
    if let Some(sim) = grid {
        write_vtk_snapshot(&dir.join(format!("snapshot_{:08}.vtk", sim.step)), sim)?;
    }
    Ok(())
}

/// Cell-kind counts, handy for logs.
pub fn kind_summary(sim: &Simulation) -> String {
    [CellKind::Liquid, CellKind::Interface, CellKind::Gas, CellKind::Obstacle]
        .iter()
        .map(|k| format!("{}={}", k.label(), sim.count(*k)))
        .collect::<Vec<_>>()
        .join(" ")
}
