//! Line-oriented scenario configuration.
//!
//! ```text
//! # comment
//! [domain]
//! size = 60 40 30
//! tau = 1.1
//! gravity = 0 0 -1e-5
//!
//! [boundary]
//! x = periodic
//! y = noslip 1e-4 0 0
//!
//! [fill]
//! mode = basin
//! level = 19.5
//!
//! [body]
//! shape = sphere
//! radius = 6
//! position = 30 20 19.5
//!
//! [run]
//! steps = 10000
//! ```
//!
//! Every `[body]` header starts a new body. Unknown sections or keys are
//! rejected with their line number. [`ScenarioConfig::to_text`] writes the
//! canonical form, which parses back to an identical config.

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::{Unit, UnitQuaternion};

use crate::body::{BodyState, Constraints, RigidBody, Shape, Vec3};
use crate::error::{Error, Result};
use crate::grid::{Boundaries, Dims, Face, FaceBoundary};
use crate::sim::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMode {
    Gas,
    Liquid,
    Basin,
}

impl FillMode {
    fn name(self) -> &'static str {
        match self {
            FillMode::Gas => "gas",
            FillMode::Liquid => "liquid",
            FillMode::Basin => "basin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillConfig {
    pub mode: FillMode,
    /// Free-surface height of a basin.
    pub level: f64,
    /// Surface tilt `dz/dx` of a basin.
    pub slope_x: f64,
    pub velocity: [f64; 3],
    /// Initialize a hydrostatic density profile under gravity.
    pub hydrostatic: bool,
    /// Height at which an all-liquid column has unit density. Defaults to
    /// mid-height.
    pub reference_level: Option<f64>,
}

impl Default for FillConfig {
    fn default() -> Self {
        Self {
            mode: FillMode::Gas,
            level: 0.0,
            slope_x: 0.0,
            velocity: [0.0; 3],
            hydrostatic: true,
            reference_level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyConfig {
    pub shape: Shape,
    pub density: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    /// Rotation axis (need not be normalized) and angle in degrees.
    pub orientation_axis: [f64; 3],
    pub orientation_deg: f64,
    pub lock_translation: [bool; 3],
    pub lock_rotation: [bool; 3],
}

impl Default for BodyConfig {
    fn default() -> Self {
        Self {
            shape: Shape::Sphere { radius: 1.0 },
            density: 1.0,
            position: [0.0; 3],
            velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            orientation_axis: [1.0, 0.0, 0.0],
            orientation_deg: 0.0,
            lock_translation: [false; 3],
            lock_rotation: [false; 3],
        }
    }
}

impl BodyConfig {
    pub fn orientation(&self) -> UnitQuaternion<f64> {
        let a = Vec3::from(self.orientation_axis);
        if self.orientation_deg == 0.0 || a.norm() == 0.0 {
            return UnitQuaternion::identity();
        }
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(a), self.orientation_deg.to_radians())
    }

    pub fn build(&self) -> Result<RigidBody> {
        let mut state = BodyState::at_rest(Vec3::from(self.position), self.orientation(), self.density);
        state.velocity = Vec3::from(self.velocity);
        state.angular_velocity = Vec3::from(self.angular_velocity);
        let constraints = Constraints { lock_translation: self.lock_translation, lock_rotation: self.lock_rotation };
        RigidBody::new(self.shape, state, constraints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Run the configured setup for `steps` steps.
    Plain,
    FreeAdvection,
    Equilibrium,
    StabilitySweep,
}

impl ScenarioKind {
    fn name(self) -> &'static str {
        match self {
            ScenarioKind::Plain => "plain",
            ScenarioKind::FreeAdvection => "free_advection",
            ScenarioKind::Equilibrium => "equilibrium",
            ScenarioKind::StabilitySweep => "stability_sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Free-advection variant, 1 to 4.
    pub stage: u8,
    /// Step count, or the step limit of an equilibrium run.
    pub steps: u64,
    /// Diagnostics sample cadence (0 = only the final state).
    pub output_every: u64,
    /// Grid snapshot cadence (0 = none).
    pub snapshot_every: u64,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Body kinetic energy below which an equilibrium run counts as at rest.
    pub ke_threshold: f64,
    /// Consecutive quiet steps that end an equilibrium run.
    pub ke_window: u64,
    /// Heel angles of a stability sweep, degrees.
    pub sweep_angles: Vec<f64>,
    pub warmup_steps: u64,
    pub average_steps: u64,
    pub parallel: bool,
    /// Check every step's cell-state transitions and the closed interface.
    pub audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Plain,
            stage: 4,
            steps: 0,
            output_every: 100,
            snapshot_every: 0,
            output_dir: PathBuf::from("out"),
            seed: 0,
            ke_threshold: 1e-12,
            ke_window: 2000,
            sweep_angles: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            warmup_steps: 5000,
            average_steps: 5000,
            parallel: true,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub size: [usize; 3],
    pub tau: f64,
    pub gravity: [f64; 3],
    pub rho_gas: f64,
    pub epsilon: f64,
    /// Drive bodies with the mean of the last two steps' fluid loads.
    pub average_loads: bool,
    pub boundaries: Boundaries,
    pub fill: FillConfig,
    pub bodies: Vec<BodyConfig>,
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn new(size: [usize; 3]) -> Self {
        let p = SimParams::default();
        Self {
            size,
            tau: p.tau,
            gravity: p.gravity,
            rho_gas: p.rho_gas,
            epsilon: p.epsilon,
            average_loads: p.average_loads,
            boundaries: Boundaries::walls(),
            fill: FillConfig::default(),
            bodies: Vec::new(),
            run: RunConfig::default(),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.size[0], self.size[1], self.size[2])
    }

    pub fn params(&self) -> SimParams {
        SimParams {
            tau: self.tau,
            gravity: self.gravity,
            rho_gas: self.rho_gas,
            epsilon: self.epsilon,
            average_loads: self.average_loads,
            ..SimParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("domain size must be positive".into()));
        }
        self.params().validate()?;
        self.boundaries.validate()?;
        if self.fill.mode == FillMode::Basin && !(self.fill.level > 0.0 && self.fill.level <= self.size[2] as f64) {
            return Err(Error::InvalidArgument(format!("basin level {} outside the domain", self.fill.level)));
        }
        if !(1..=4).contains(&self.run.stage) {
            return Err(Error::InvalidArgument(format!("stage must be 1..4, got {}", self.run.stage)));
        }
        for b in &self.bodies {
            b.shape.validate()?;
            if !(b.density > 0.0 && b.density.is_finite()) {
                return Err(Error::InvalidArgument("body density must be positive".into()));
            }
        }
        if self.run.scenario == ScenarioKind::StabilitySweep && self.bodies.len() != 1 {
            return Err(Error::InvalidArgument("a stability sweep needs exactly one body".into()));
        }
        if self.run.scenario == ScenarioKind::FreeAdvection && self.bodies.len() > 1 {
            return Err(Error::InvalidArgument("free advection takes at most one body".into()));
        }
        Ok(())
    }

    /// Canonical text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let v = |a: &[f64; 3]| format!("{:?} {:?} {:?}", a[0], a[1], a[2]);
        let flags = |f: &[bool; 3]| {
            let t: String = ['x', 'y', 'z'].iter().zip(f).filter(|(_, b)| **b).map(|(c, _)| *c).collect();
            if t.is_empty() {
                "none".to_string()
            } else {
                t
            }
        };
        let _ = writeln!(s, "[domain]");
        let _ = writeln!(s, "size = {} {} {}", self.size[0], self.size[1], self.size[2]);
        let _ = writeln!(s, "tau = {:?}", self.tau);
        let _ = writeln!(s, "gravity = {}", v(&self.gravity));
        let _ = writeln!(s, "rho_gas = {:?}", self.rho_gas);
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "average_loads = {}", self.average_loads);
        let _ = writeln!(s, "\n[boundary]");
        for f in Face::ALL {
            match self.boundaries.face(f) {
                FaceBoundary::Periodic => {
                    let _ = writeln!(s, "{} = periodic", f.name());
                }
                FaceBoundary::NoSlip { velocity } => {
                    let _ = writeln!(s, "{} = noslip {}", f.name(), v(&velocity));
                }
            }
        }
        let _ = writeln!(s, "\n[fill]");
        let _ = writeln!(s, "mode = {}", self.fill.mode.name());
        let _ = writeln!(s, "level = {:?}", self.fill.level);
        let _ = writeln!(s, "slope_x = {:?}", self.fill.slope_x);
        let _ = writeln!(s, "velocity = {}", v(&self.fill.velocity));
        let _ = writeln!(s, "hydrostatic = {}", self.fill.hydrostatic);
        if let Some(r) = self.fill.reference_level {
            let _ = writeln!(s, "reference_level = {r:?}");
        }
        for b in &self.bodies {
            let _ = writeln!(s, "\n[body]");
            match b.shape {
                Shape::Sphere { radius } => {
                    let _ = writeln!(s, "shape = sphere\nradius = {radius:?}");
                }
                Shape::Cuboid { length, width, height } => {
                    let _ = writeln!(s, "shape = cuboid\nsize = {length:?} {width:?} {height:?}");
                }
            }
            let _ = writeln!(s, "density = {:?}", b.density);
            let _ = writeln!(s, "position = {}", v(&b.position));
            let _ = writeln!(s, "velocity = {}", v(&b.velocity));
            let _ = writeln!(s, "angular_velocity = {}", v(&b.angular_velocity));
            let _ = writeln!(s, "orientation = {} {:?}", v(&b.orientation_axis), b.orientation_deg);
            let _ = writeln!(s, "lock_translation = {}", flags(&b.lock_translation));
            let _ = writeln!(s, "lock_rotation = {}", flags(&b.lock_rotation));
        }
        let r = &self.run;
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "scenario = {}", r.scenario.name());
        let _ = writeln!(s, "stage = {}", r.stage);
        let _ = writeln!(s, "steps = {}", r.steps);
        let _ = writeln!(s, "output_every = {}", r.output_every);
        let _ = writeln!(s, "snapshot_every = {}", r.snapshot_every);
        let _ = writeln!(s, "output_dir = {}", r.output_dir.display());
        let _ = writeln!(s, "seed = {}", r.seed);
        let _ = writeln!(s, "ke_threshold = {:?}", r.ke_threshold);
        let _ = writeln!(s, "ke_window = {}", r.ke_window);
        let angles: Vec<String> = r.sweep_angles.iter().map(|a| format!("{a:?}")).collect();
        let _ = writeln!(s, "sweep_angles = {}", angles.join(" "));
        let _ = writeln!(s, "warmup_steps = {}", r.warmup_steps);
        let _ = writeln!(s, "average_steps = {}", r.average_steps);
        let _ = writeln!(s, "parallel = {}", r.parallel);
        let _ = writeln!(s, "audit = {}", r.audit);
        s
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Domain,
    Boundary,
    Fill,
    Body,
    Run,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| err(line, format!("{key}: cannot parse '{}'", s.trim())))
}

fn nums(line: usize, key: &str, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(|t| num::<f64>(line, key, t)).collect()
}

fn vec3(line: usize, key: &str, s: &str) -> Result<[f64; 3]> {
    let v = nums(line, key, s)?;
    v.try_into().map_err(|_| err(line, format!("{key}: expected three numbers")))
}

fn boolean(line: usize, key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(err(line, format!("{key}: expected true or false, got '{o}'"))),
    }
}

fn axis_flags(line: usize, key: &str, s: &str) -> Result<[bool; 3]> {
    let s = s.trim();
    let mut f = [false; 3];
    if s == "none" {
        return Ok(f);
    }
    if s == "all" {
        return Ok([true; 3]);
    }
    for ch in s.chars() {
        match ch {
            'x' => f[0] = true,
            'y' => f[1] = true,
            'z' => f[2] = true,
            _ => return Err(err(line, format!("{key}: expected a subset of 'xyz', 'all' or 'none'"))),
        }
    }
    Ok(f)
}

fn face_boundary(line: usize, key: &str, s: &str) -> Result<FaceBoundary> {
    let mut it = s.split_whitespace();
    match it.next() {
        Some("periodic") if it.next().is_none() => Ok(FaceBoundary::Periodic),
        Some("noslip") => {
            let rest: Vec<&str> = it.collect();
            if rest.is_empty() {
                Ok(FaceBoundary::NoSlip { velocity: [0.0; 3] })
            } else {
                Ok(FaceBoundary::NoSlip { velocity: vec3(line, key, &rest.join(" "))? })
            }
        }
        _ => Err(err(line, format!("{key}: expected 'periodic' or 'noslip [ux uy uz]'"))),
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::new([0; 3]);
    let mut section = Section::None;
    let mut have_size = false;
    let mut body: Option<(usize, BodyConfig, bool)> = None;
    let mut last_line = 0;

    let finish_body = |b: Option<(usize, BodyConfig, bool)>, cfg: &mut ScenarioConfig| -> Result<()> {
        if let Some((line, bc, has_shape)) = b {
            if !has_shape {
                return Err(err(line, "body needs a shape"));
            }
            cfg.bodies.push(bc);
        }
        Ok(())
    };

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = match name.trim() {
                "domain" => Section::Domain,
                "boundary" => Section::Boundary,
                "fill" => Section::Fill,
                "body" => Section::Body,
                "run" => Section::Run,
                o => return Err(err(line, format!("unknown section [{o}]"))),
            };
            finish_body(body.take(), &mut cfg)?;
            if section == Section::Body {
                body = Some((line, BodyConfig::default(), false));
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(line, format!("expected 'key = value', got '{content}'")));
        };
        let key = key.trim();
        let value = value.trim();
        match section {
            Section::None => return Err(err(line, format!("'{key}' outside of a section"))),
            Section::Domain => match key {
                "size" => {
                    let v: Vec<usize> =
                        value.split_whitespace().map(|t| num(line, key, t)).collect::<Result<_>>()?;
                    cfg.size = v.try_into().map_err(|_| err(line, "size: expected three integers"))?;
                    if cfg.size.iter().any(|&n| n == 0) {
                        return Err(err(line, "size: extents must be positive"));
                    }
                    have_size = true;
                }
                "tau" => cfg.tau = num(line, key, value)?,
                "gravity" => cfg.gravity = vec3(line, key, value)?,
                "rho_gas" => cfg.rho_gas = num(line, key, value)?,
                "epsilon" => cfg.epsilon = num(line, key, value)?,
                "average_loads" => cfg.average_loads = boolean(line, key, value)?,
                _ => return Err(err(line, format!("unknown key '{key}' in [domain]"))),
            },
            Section::Boundary => {
                let b = face_boundary(line, key, value)?;
                let faces: Vec<Face> = match key {
                    "x" => vec![Face::XMin, Face::XMax],
                    "y" => vec![Face::YMin, Face::YMax],
                    "z" => vec![Face::ZMin, Face::ZMax],
                    "all" => Face::ALL.to_vec(),
                    k => match Face::ALL.iter().find(|f| f.name() == k) {
                        Some(f) => vec![*f],
                        None => return Err(err(line, format!("unknown key '{key}' in [boundary]"))),
                    },
                };
                for f in faces {
                    cfg.boundaries.set(f, b);
                }
            }
            Section::Fill => match key {
                "mode" => {
                    cfg.fill.mode = match value {
                        "gas" => FillMode::Gas,
                        "liquid" => FillMode::Liquid,
                        "basin" => FillMode::Basin,
                        o => return Err(err(line, format!("mode: unknown fill mode '{o}'"))),
                    }
                }
                "level" => cfg.fill.level = num(line, key, value)?,
                "slope_x" => cfg.fill.slope_x = num(line, key, value)?,
                "velocity" => cfg.fill.velocity = vec3(line, key, value)?,
                "hydrostatic" => cfg.fill.hydrostatic = boolean(line, key, value)?,
                "reference_level" => cfg.fill.reference_level = Some(num(line, key, value)?),
                _ => return Err(err(line, format!("unknown key '{key}' in [fill]"))),
            },
            Section::Body => {
                let (_, b, has_shape) = body.as_mut().expect("body section open");
                match key {
                    "shape" => {
                        b.shape = match value {
                            "sphere" => Shape::Sphere { radius: 1.0 },
                            "cuboid" => Shape::Cuboid { length: 1.0, width: 1.0, height: 1.0 },
                            o => return Err(err(line, format!("shape: unknown shape '{o}'"))),
                        };
                        *has_shape = true;
                    }
                    "radius" => match &mut b.shape {
                        Shape::Sphere { radius } if *has_shape => *radius = num(line, key, value)?,
                        _ => return Err(err(line, "radius needs 'shape = sphere' first")),
                    },
                    "size" => match &mut b.shape {
                        Shape::Cuboid { length, width, height } if *has_shape => {
                            [*length, *width, *height] = vec3(line, key, value)?;
                        }
                        _ => return Err(err(line, "size needs 'shape = cuboid' first")),
                    },
                    "density" => b.density = num(line, key, value)?,
                    "position" => b.position = vec3(line, key, value)?,
                    "velocity" => b.velocity = vec3(line, key, value)?,
                    "angular_velocity" => b.angular_velocity = vec3(line, key, value)?,
                    "orientation" => {
                        let v = nums(line, key, value)?;
                        if v.len() != 4 {
                            return Err(err(line, "orientation: expected 'ax ay az angle_deg'"));
                        }
                        b.orientation_axis = [v[0], v[1], v[2]];
                        b.orientation_deg = v[3];
                    }
                    "lock_translation" => b.lock_translation = axis_flags(line, key, value)?,
                    "lock_rotation" => b.lock_rotation = axis_flags(line, key, value)?,
                    _ => return Err(err(line, format!("unknown key '{key}' in [body]"))),
                }
                if let Err(e) = b.shape.validate() {
                    if key == "radius" || key == "size" {
                        return Err(err(line, e.to_string()));
                    }
                }
            }
            Section::Run => {
                let r = &mut cfg.run;
                match key {
                    "scenario" => {
                        r.scenario = match value {
                            "plain" => ScenarioKind::Plain,
                            "free_advection" => ScenarioKind::FreeAdvection,
                            "equilibrium" => ScenarioKind::Equilibrium,
                            "stability_sweep" => ScenarioKind::StabilitySweep,
                            o => return Err(err(line, format!("scenario: unknown scenario '{o}'"))),
                        }
                    }
                    "stage" => r.stage = num(line, key, value)?,
                    "steps" => r.steps = num(line, key, value)?,
                    "output_every" => r.output_every = num(line, key, value)?,
                    "snapshot_every" => r.snapshot_every = num(line, key, value)?,
                    "output_dir" => r.output_dir = PathBuf::from(value),
                    "seed" => r.seed = num(line, key, value)?,
                    "ke_threshold" => r.ke_threshold = num(line, key, value)?,
                    "ke_window" => r.ke_window = num(line, key, value)?,
                    "sweep_angles" => r.sweep_angles = nums(line, key, value)?,
                    "warmup_steps" => r.warmup_steps = num(line, key, value)?,
                    "average_steps" => r.average_steps = num(line, key, value)?,
                    "parallel" => r.parallel = boolean(line, key, value)?,
                    "audit" => r.audit = boolean(line, key, value)?,
                    _ => return Err(err(line, format!("unknown key '{key}' in [run]"))),
                }
            }
        }
    }
    finish_body(body.take(), &mut cfg)?;
    if !have_size {
        return Err(err(last_line.max(1), "missing required key 'size' in [domain]"));
    }
    cfg.validate().map_err(|e| match e {
        Error::Config { .. } => e,
        other => err(0, other.to_string()),
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHANNEL: &str = "
# free advection channel
[domain]
size = 60 40 30
tau = 1.1
gravity = 0 0 -1e-5

[boundary]
x = periodic
y = noslip 1e-4 0 0
z_min = noslip 1e-4 0 0
z_max = noslip 1e-4 0 0

[fill]
mode = basin
level = 19.5
velocity = 1e-4 0 0

[body]
shape = sphere
radius = 6
density = 0.5
position = 30 20 19.5

[run]
scenario = free_advection
stage = 4
steps = 10000
";

    #[test]
    fn minimal_defaults() {
        let c = parse_config("[domain]\nsize = 8 8 8\n[boundary]\nall = periodic\n[fill]\nmode = liquid\n").unwrap();
        assert_eq!(c.tau, 1.0);
        assert_eq!(c.gravity, [0.0; 3]);
        assert_eq!(c.rho_gas, 1.0);
        assert_eq!(c.epsilon, 0.01);
        assert!(c.bodies.is_empty());
        assert!((0..3).all(|a| c.boundaries.periodic(a)));
    }

    #[test]
    fn channel_parses() {
        let c = parse_config(CHANNEL).unwrap();
        assert_eq!(c.size, [60, 40, 30]);
        assert_eq!(c.bodies.len(), 1);
        assert_eq!(c.bodies[0].shape, Shape::Sphere { radius: 6.0 });
        assert_eq!(c.boundaries.face(Face::YMax), FaceBoundary::NoSlip { velocity: [1e-4, 0.0, 0.0] });
        assert_eq!(c.run.scenario, ScenarioKind::FreeAdvection);
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config(CHANNEL).unwrap();
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("[domain]\nsize = 4 4 4\ncolour = red\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        let e = parse_config("[domain]\nsize = 4 4 4\n[body]\nradius = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 4, .. }), "{e}");
        let e = parse_config("[domain]\ntau = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
        let e = parse_config("[domain]\nsize = 4 4 4\ntau = 0.3\n").unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
        let e = parse_config("[weird]\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
    }

    #[test]
    fn rejects_one_sided_periodicity() {
        assert!(parse_config("[domain]\nsize = 4 4 4\n[boundary]\nx_min = periodic\n").is_err());
    }
}
