//! Building simulations from a [`ScenarioConfig`] and running the
//! free-advection, floating-equilibrium and righting-moment experiments.

use log::{info, warn};
use nalgebra::{Unit, UnitQuaternion};

use crate::body::{arr, RigidBody, Shape, Vec3};
use crate::config::{FillMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grid::CellKind;
use crate::hydrostatics::{stability_curve, FloatingCuboid};
use crate::lattice::{check_stability, StabilityLimits, StabilityReport};
use crate::output::{DiagnosticsRow, OutputWriter};
use crate::sim::Simulation;

/// World axis a body heels about: its single unlocked rotation axis, or x.
pub fn heel_axis(body: &RigidBody) -> Vec3 {
    let free: Vec<usize> = (0..3).filter(|&k| !body.constraints.lock_rotation[k]).collect();
    let mut a = Vec3::zeros();
    a[if free.len() == 1 { free[0] } else { 0 }] = 1.0;
    a
}

/// Folds a heel angle of a square section onto [0, 45] degrees.
pub fn fold_square_heel(deg: f64) -> f64 {
    let h = deg.abs().rem_euclid(90.0);
    if h > 45.0 {
        90.0 - h
    } else {
        h
    }
}

pub fn build_simulation(cfg: &ScenarioConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut sim = Simulation::new(cfg.dims(), cfg.boundaries, cfg.params())?;
    sim.parallel = cfg.run.parallel;
    if cfg.run.audit {
        sim.auditor = Some(crate::audit::TransitionAuditor::new());
    }
    for b in &cfg.bodies {
        sim.add_body(b.build()?)?;
    }
    let a = cfg.gravity;
    let u = cfg.fill.velocity;
    let rho_g = cfg.rho_gas;
    let hydro = cfg.fill.hydrostatic;
    match cfg.fill.mode {
        FillMode::Gas => {}
        FillMode::Liquid => {
            let zr = cfg.fill.reference_level.unwrap_or(cfg.size[2] as f64 / 2.0);
            sim.init_fluid(
                |_| 1.0,
                |c| if hydro { (3.0 * a[2] * (c[2] - zr) + 3.0 * (a[0] * c[0] + a[1] * c[1])).exp() } else { 1.0 },
                |_| u,
            )?;
        }
        FillMode::Basin => {
            let level = cfg.fill.level;
            let slope = cfg.fill.slope_x;
            let xm = cfg.size[0] as f64 / 2.0;
            let g = -a[2];
            let surface = move |c: [f64; 3]| level + slope * (c[0] - xm);
            sim.init_fluid(
                |c| surface(c) - (c[2] - 0.5),
                |c| if hydro { rho_g * (3.0 * g * (surface(c) - c[2]).max(0.0)).exp() } else { rho_g },
                |_| u,
            )?;
        }
    }
    Ok(sim)
}

/// Incompressibility and Mach checks for a config.
pub fn check_config(cfg: &ScenarioConfig) -> StabilityReport {
    let mut vmax = cfg.fill.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
    for f in cfg.boundaries.faces {
        if let crate::grid::FaceBoundary::NoSlip { velocity } = f {
            vmax = vmax.max(velocity.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    for b in &cfg.bodies {
        vmax = vmax.max(Vec3::from(b.velocity).norm());
    }
    check_stability(cfg.size, cfg.tau, cfg.gravity, vmax, StabilityLimits::default())
}

/// Diagnostics rows for the current state.
pub fn sample(sim: &Simulation) -> Vec<DiagnosticsRow> {
    let base = DiagnosticsRow {
        step: sim.step,
        body: -1,
        mass_balance: sim.mass_balance(),
        max_interface_speed: sim.max_speed(CellKind::Interface),
        max_speed: sim.max_speed(CellKind::Liquid).max(sim.max_speed(CellKind::Interface)),
        ..Default::default()
    };
    if sim.bodies.is_empty() {
        return vec![base];
    }
    sim.bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let load = sim.loads.get(i).copied().unwrap_or_default();
            DiagnosticsRow {
                body: i as i64,
                position: arr(&b.state.position),
                heel_deg: b.state.twist_angle_deg(&heel_axis(b)),
                velocity: arr(&b.state.velocity),
                angular_velocity: arr(&b.state.angular_velocity),
                force: load.force,
                torque: load.torque,
                covered_cells: sim.covered_cells(i) as u64,
                ..base
            }
        })
        .collect()
}

/// State and samples of a finished (or aborted) run.
#[derive(Debug)]
pub struct RunOutcome {
    pub sim: Simulation,
    pub rows: Vec<DiagnosticsRow>,
    /// Set if the run stopped on an error; rows hold the last valid samples.
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<Self> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Steps `sim` up to `steps` times, sampling on the cadence. `after_step`
/// returns true to stop early. A zero-step run produces no samples.
fn drive(
    mut sim: Simulation,
    steps: u64,
    every: u64,
    mut writer: Option<&mut OutputWriter>,
    mut after_step: impl FnMut(&Simulation) -> bool,
) -> RunOutcome {
    if steps == 0 {
        return RunOutcome { sim, rows: Vec::new(), error: None };
    }
    let mut rows = sample(&sim);
    let mut error = None;
    if let Some(w) = writer.as_deref_mut() {
        if let Err(e) = w.maybe_snapshot(&sim) {
            return RunOutcome { sim, rows, error: Some(e) };
        }
    }
    for _ in 0..steps {
        if let Err(e) = sim.step() {
            warn!("run stopped at step {}: {e}", sim.step);
            error = Some(e);
            break;
        }
        let stop = after_step(&sim);
        if every > 0 && sim.step % every == 0 {
            rows.extend(sample(&sim));
        }
        if let Some(w) = writer.as_deref_mut() {
            if let Err(e) = w.maybe_snapshot(&sim) {
                error = Some(e);
                break;
            }
        }
        if stop {
            break;
        }
    }
    if error.is_none() && rows.last().map(|r| r.step) != Some(sim.step) {
        rows.extend(sample(&sim));
    }
    RunOutcome { sim, rows, error }
}

pub fn run_plain(cfg: &ScenarioConfig, writer: Option<&mut OutputWriter>) -> Result<RunOutcome> {
    let sim = build_simulation(cfg)?;
    Ok(drive(sim, cfg.run.steps, cfg.run.output_every, writer, |_| false))
}

/// Config of one free-advection variant:
/// 1 all liquid without gravity, 2 all liquid with gravity and a neutrally
/// buoyant body, 3 free surface without body, 4 free surface with body.
pub fn free_advection_stage(cfg: &ScenarioConfig, stage: u8) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.run.stage = stage;
    match stage {
        1 => {
            c.fill.mode = FillMode::Liquid;
            c.gravity = [0.0; 3];
        }
        2 => {
            c.fill.mode = FillMode::Liquid;
            for b in &mut c.bodies {
                b.density = 1.0;
            }
            if let Some(b) = c.bodies.first() {
                c.fill.reference_level = Some(b.position[2]);
            }
        }
        3 => {
            c.fill.mode = FillMode::Basin;
            c.bodies.clear();
        }
        _ => c.fill.mode = FillMode::Basin,
    }
    c
}

#[derive(Debug)]
pub struct FreeAdvectionResult {
    pub outcome: RunOutcome,
    /// Body velocity after every step.
    pub velocity_trace: Vec<[f64; 3]>,
    /// Largest interface-cell speed after every step.
    pub interface_speed_trace: Vec<f64>,
    /// Body velocity averaged over the last `average_steps` steps.
    pub terminal_velocity: [f64; 3],
}

pub fn run_free_advection(cfg: &ScenarioConfig, writer: Option<&mut OutputWriter>) -> Result<FreeAdvectionResult> {
    let c = free_advection_stage(cfg, cfg.run.stage);
    let sim = build_simulation(&c)?;
    let mut vel = Vec::with_capacity(c.run.steps as usize);
    let mut ispeed = Vec::with_capacity(c.run.steps as usize);
    let outcome = drive(sim, c.run.steps, c.run.output_every, writer, |s| {
        if let Some(b) = s.bodies.first() {
            vel.push(arr(&b.state.velocity));
        }
        ispeed.push(s.max_speed(CellKind::Interface));
        false
    });
    let n = (c.run.average_steps as usize).clamp(1, vel.len().max(1));
    let mut terminal = [0.0; 3];
    if !vel.is_empty() {
        for v in &vel[vel.len() - n.min(vel.len())..] {
            for k in 0..3 {
                terminal[k] += v[k] / n as f64;
            }
        }
    }
    info!("free advection stage {} terminal velocity {:?}", c.run.stage, terminal);
    Ok(FreeAdvectionResult { outcome, velocity_trace: vel, interface_speed_trace: ispeed, terminal_velocity: terminal })
}

/// Mean liquid column height over columns away from all bodies.
pub fn free_surface_height(sim: &Simulation) -> f64 {
    let d = sim.dims();
    let mut boxes = Vec::new();
    for b in &sim.bodies {
        let r = b.shape.bounding_radius() + 1.0;
        boxes.push((b.state.position.x - r, b.state.position.x + r, b.state.position.y - r, b.state.position.y + r));
    }
    let column = |x: usize, y: usize| -> f64 {
        (0..d.nz)
            .map(|z| {
                let i = d.idx(x, y, z);
                match sim.cells.kind[i] {
                    CellKind::Liquid => 1.0,
                    CellKind::Interface => sim.cells.mass[i] / sim.rho[i],
                    _ => 0.0,
                }
            })
            .sum()
    };
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..d.ny {
        for x in 0..d.nx {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            if boxes.iter().any(|b| cx > b.0 && cx < b.1 && cy > b.2 && cy < b.3) {
                continue;
            }
            sum += column(x, y);
            n += 1;
        }
    }
    if n == 0 {
        for y in 0..d.ny {
            for x in 0..d.nx {
                sum += column(x, y);
                n += 1;
            }
        }
    }
    sum / n as f64
}

/// Lowest point of a body.
pub fn lowest_point(body: &RigidBody) -> f64 {
    match body.shape {
        Shape::Sphere { radius } => body.state.position.z - radius,
        Shape::Cuboid { length, width, height } => {
            let mut lo = f64::INFINITY;
            for sx in [-0.5, 0.5] {
                for sy in [-0.5, 0.5] {
                    for sz in [-0.5, 0.5] {
                        let p = body.state.position
                            + body.state.orientation * Vec3::new(sx * length, sy * width, sz * height);
                        lo = lo.min(p.z);
                    }
                }
            }
            lo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyEquilibrium {
    pub heel_deg: f64,
    pub draft: f64,
    pub position: [f64; 3],
}

#[derive(Debug)]
pub struct EquilibriumResult {
    pub outcome: RunOutcome,
    pub bodies: Vec<BodyEquilibrium>,
    /// The kinetic-energy criterion was met before the step limit.
    pub converged: bool,
    pub waterline: f64,
}

pub fn run_equilibrium_box(cfg: &ScenarioConfig, writer: Option<&mut OutputWriter>) -> Result<EquilibriumResult> {
    let sim = build_simulation(cfg)?;
    let thr = cfg.run.ke_threshold;
    let window = cfg.run.ke_window;
    let mut quiet = 0u64;
    let mut converged = false;
    let outcome = drive(sim, cfg.run.steps, cfg.run.output_every, writer, |s| {
        let ke = s.bodies.iter().map(|b| b.kinetic_energy()).fold(0.0, f64::max);
        quiet = if ke < thr { quiet + 1 } else { 0 };
        converged = quiet >= window;
        converged
    });
    let waterline = free_surface_height(&outcome.sim);
    let bodies = outcome
        .sim
        .bodies
        .iter()
        .map(|b| BodyEquilibrium {
            heel_deg: b.state.twist_angle_deg(&heel_axis(b)),
            draft: waterline - lowest_point(b),
            position: arr(&b.state.position),
        })
        .collect();
    if !converged {
        warn!("equilibrium run hit the step limit of {} before coming to rest", cfg.run.steps);
    }
    Ok(EquilibriumResult { outcome, bodies, converged, waterline })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha_deg: f64,
    /// Time-averaged righting moment `-T . axis`.
    pub measured: f64,
    pub oracle: f64,
    /// `(measured - oracle) / |oracle|`, zero where the oracle vanishes.
    pub rel_error: f64,
    /// Means over the two halves of the averaging window agree within 5 %.
    pub stationary: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// RMS relative error over rows with non-zero oracle moment.
    pub fn rms_rel_error(&self) -> f64 {
        let e: Vec<f64> = self.rows.iter().filter(|r| r.oracle != 0.0).map(|r| r.rel_error).collect();
        if e.is_empty() {
            return 0.0;
        }
        (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha_deg,measured,oracle,rel_error,stationary\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.alpha_deg, r.measured, r.oracle, r.rel_error, r.stationary
            ));
        }
        s
    }
}

/// Oracle cuboid for a sweep config: the body heels about its length axis.
pub fn sweep_cuboid(cfg: &ScenarioConfig) -> Result<FloatingCuboid> {
    let b = cfg.bodies.first().ok_or_else(|| Error::InvalidArgument("sweep needs a body".into()))?;
    let Shape::Cuboid { length, width, height } = b.shape else {
        return Err(Error::InvalidArgument("sweep needs a cuboid".into()));
    };
    let g = Vec3::from(cfg.gravity).norm();
    FloatingCuboid::new(width, height, length, b.density, g)
}

/// Config of one sweep angle: the box is turned about its length axis
/// around the center of its upright waterplane and held fixed.
pub fn sweep_angle_config(cfg: &ScenarioConfig, alpha_deg: f64) -> Result<ScenarioConfig> {
    let cub = sweep_cuboid(cfg)?;
    let mut c = cfg.clone();
    let b = &mut c.bodies[0];
    let upright = b.orientation();
    let axis = upright * Vec3::x();
    let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), alpha_deg.to_radians()) * upright;
    let lever = upright * Vec3::new(0.0, 0.0, cub.h / 2.0 - cub.draft());
    let pivot = Vec3::from(b.position) - lever;
    b.position = arr(&(pivot + q * (upright.inverse() * lever)));
    let (ax, ang) = q.axis_angle().map(|(a, t)| (arr(&a.into_inner()), t.to_degrees())).unwrap_or(([1.0, 0.0, 0.0], 0.0));
    b.orientation_axis = ax;
    b.orientation_deg = ang;
    b.velocity = [0.0; 3];
    b.angular_velocity = [0.0; 3];
    b.lock_translation = [true; 3];
    b.lock_rotation = [true; 3];
    Ok(c)
}

pub fn run_stability_sweep(cfg: &ScenarioConfig, mut writer: Option<&mut OutputWriter>) -> Result<SweepResult> {
    let cub = sweep_cuboid(cfg)?;
    let oracle = stability_curve(&cub, &cfg.run.sweep_angles)?;
    let mut rows = Vec::new();
    for (k, &alpha) in cfg.run.sweep_angles.iter().enumerate() {
        let c = sweep_angle_config(cfg, alpha)?;
        let axis = c.bodies[0].orientation() * Vec3::x();
        let mut sim = build_simulation(&c)?;
        sim.run(cfg.run.warmup_steps)?;
        let n = cfg.run.average_steps.max(2);
        let (mut first, mut second) = (0.0, 0.0);
        for i in 0..n {
            sim.step()?;
            let m = -Vec3::from(sim.loads[0].torque).dot(&axis);
            if i < n / 2 {
                first += m;
            } else {
                second += m;
            }
        }
        let (h1, h2) = (first / (n / 2) as f64, second / (n - n / 2) as f64);
        let measured = (first + second) / n as f64;
        let o = oracle[k].moment;
        let rel_error = if o != 0.0 { (measured - o) / o.abs() } else { 0.0 };
        let scale = o.abs().max(measured.abs()).max(f64::MIN_POSITIVE);
        let stationary = (h1 - h2).abs() <= 0.05 * scale;
        info!("sweep alpha={alpha} measured={measured:.6e} oracle={o:.6e} rel={rel_error:.4}");
        if let Some(w) = writer.as_deref_mut() {
            w.maybe_snapshot(&sim)?;
        }
        rows.push(SweepRow { alpha_deg: alpha, measured, oracle: o, rel_error, stationary });
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BodyConfig;
    use crate::grid::Face;
    use approx::assert_relative_eq;

    #[test]
    fn folding() {
        assert_eq!(fold_square_heel(-30.0), 30.0);
        assert_eq!(fold_square_heel(60.0), 30.0);
        assert_eq!(fold_square_heel(135.0), 45.0);
        assert_eq!(fold_square_heel(2.86), 2.86);
    }

    #[test]
    fn basin_build() {
        let mut c = ScenarioConfig::new([8, 6, 10]);
        c.gravity = [0.0, 0.0, -1e-4];
        c.fill.mode = FillMode::Basin;
        c.fill.level = 5.0;
        let sim = build_simulation(&c).unwrap();
        assert_eq!(sim.count(CellKind::Liquid) + sim.count(CellKind::Interface), 8 * 6 * 5);
        assert_relative_eq!(free_surface_height(&sim), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_pivot_keeps_waterplane_center() {
        let mut c = ScenarioConfig::new([2, 96, 72]);
        c.boundaries.set(Face::XMin, crate::grid::FaceBoundary::Periodic);
        c.boundaries.set(Face::XMax, crate::grid::FaceBoundary::Periodic);
        c.gravity = [0.0, 0.0, -1e-4];
        c.bodies.push(BodyConfig {
            shape: Shape::Cuboid { length: 2.0, width: 24.0, height: 16.0 },
            density: 0.25,
            position: [1.0, 48.0, 36.0],
            ..Default::default()
        });
        let a = sweep_angle_config(&c, 20.0).unwrap();
        let b = a.bodies[0].build().unwrap();
        // waterplane center sits 4 above the keel center in body coordinates
        let wp = b.state.position + b.state.orientation * Vec3::new(0.0, 0.0, -8.0 + 4.0);
        assert_relative_eq!(wp, Vec3::new(1.0, 48.0, 32.0), epsilon = 1e-12);
        assert_relative_eq!(b.state.twist_angle_deg(&Vec3::x()), 20.0, epsilon = 1e-12);
        assert!(b.constraints.all_locked());
    }

    #[test]
    fn plain_run_samples_on_cadence() {
        let mut c = ScenarioConfig::new([6, 6, 6]);
        c.fill.mode = FillMode::Liquid;
        c.run.steps = 25;
        c.run.output_every = 10;
        let out = run_plain(&c, None).unwrap().into_result().unwrap();
        let steps: Vec<u64> = out.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
    }
}
