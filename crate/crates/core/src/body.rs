//! Rigid bodies: shapes, mass properties, membership queries and the
//! per-step 6-DOF integrator.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

#[inline]
pub fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[inline]
pub fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Body shape in lattice units. Cuboid extents are along the body-frame
/// x (length), y (width) and z (height) axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Cuboid { length: f64, width: f64, height: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Cuboid { length, width, height } => [length, width, height]
                .iter()
                .all(|v| *v > 0.0 && v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Setup(format!("shape extents must be positive: {self:?}")))
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            Shape::Cuboid { length, width, height } => length * width * height,
        }
    }

    /// Radius of the bounding sphere around the center.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Cuboid { length, width, height } => {
                0.5 * (length * length + width * width + height * height).sqrt()
            }
        }
    }

    fn half_extents(&self) -> Vec3 {
        match *self {
            Shape::Sphere { radius } => Vec3::repeat(radius),
            Shape::Cuboid { length, width, height } => Vec3::new(length, width, height) * 0.5,
        }
    }

    /// Strict interior test for a point given in the body frame.
    pub fn contains_local(&self, p: &Vec3) -> bool {
        match *self {
            Shape::Sphere { radius } => p.norm_squared() < radius * radius,
            Shape::Cuboid { .. } => {
                let h = self.half_extents();
                p.x.abs() < h.x && p.y.abs() < h.y && p.z.abs() < h.z
            }
        }
    }

    /// Closest point on the surface, body frame.
    pub fn closest_surface_point_local(&self, p: &Vec3) -> Vec3 {
        match *self {
            Shape::Sphere { radius } => {
                let n = p.norm();
                if n < 1e-300 {
                    Vec3::new(0.0, 0.0, radius)
                } else {
                    p * (radius / n)
                }
            }
            Shape::Cuboid { .. } => {
                let h = self.half_extents();
                let clamped = Vec3::new(
                    p.x.clamp(-h.x, h.x),
                    p.y.clamp(-h.y, h.y),
                    p.z.clamp(-h.z, h.z),
                );
                if clamped != *p {
                    return clamped;
                }
                // inside: push out through the nearest face
                let gaps = [h.x - p.x.abs(), h.y - p.y.abs(), h.z - p.z.abs()];
                let k = (0..3).min_by(|&a, &b| gaps[a].total_cmp(&gaps[b])).unwrap();
                let mut q = *p;
                q[k] = h[k].copysign(if p[k] == 0.0 { 1.0 } else { p[k] });
                q
            }
        }
    }
}

/// Mass and body-frame inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProps {
    pub mass: f64,
    pub inertia_body: Matrix3<f64>,
}

impl MassProps {
    pub fn inverse_inertia_body(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia_body.diagonal().map(|v| 1.0 / v))
    }
}

/// Mass properties of a homogeneous body.
pub fn inertia_tensor(shape: &Shape, density: f64) -> MassProps {
    let mass = density * shape.volume();
    let inertia_body = match *shape {
        Shape::Sphere { radius } => Matrix3::identity() * (0.4 * mass * radius * radius),
        Shape::Cuboid { length: l, width: b, height: h } => Matrix3::from_diagonal(&Vec3::new(
            mass * (b * b + h * h) / 12.0,
            mass * (l * l + h * h) / 12.0,
            mass * (l * l + b * b) / 12.0,
        )),
    };
    MassProps { mass, inertia_body }
}

/// Kinematic state. `orientation` maps body frame to world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub density: f64,
}

impl BodyState {
    pub fn at_rest(position: Vec3, orientation: UnitQuaternion<f64>, density: f64) -> Self {
        Self {
            position,
            orientation,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            density,
        }
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    /// Rotation about `axis` (unit, world frame) carried by the orientation,
    /// in degrees within (-180, 180].
    pub fn twist_angle_deg(&self, axis: &Vec3) -> f64 {
        let q = self.orientation.quaternion();
        let proj = q.imag().dot(axis);
        let mut ang = 2.0 * proj.atan2(q.w);
        if ang > std::f64::consts::PI {
            ang -= 2.0 * std::f64::consts::PI;
        } else if ang <= -std::f64::consts::PI {
            ang += 2.0 * std::f64::consts::PI;
        }
        ang.to_degrees()
    }
}

/// Per-axis (world frame) motion locks. A locked component keeps its current
/// velocity and ignores forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Constraints {
    pub lock_translation: [bool; 3],
    pub lock_rotation: [bool; 3],
}

impl Constraints {
    pub fn fixed() -> Self {
        Self { lock_translation: [true; 3], lock_rotation: [true; 3] }
    }

    pub fn all_locked(&self) -> bool {
        self.lock_translation.iter().chain(&self.lock_rotation).all(|b| *b)
    }
}

/// True iff `p` lies strictly inside the body.
pub fn contains_point(shape: &Shape, state: &BodyState, p: &Vec3) -> bool {
    shape.contains_local(&state.to_local(p))
}

/// Rigid-body velocity field `v + w x (x - o)`.
pub fn surface_velocity(state: &BodyState, x: &Vec3) -> Vec3 {
    state.velocity + state.angular_velocity.cross(&(x - state.position))
}

/// Closest point on the body surface, world frame.
pub fn closest_surface_point(shape: &Shape, state: &BodyState, p: &Vec3) -> Vec3 {
    let local = shape.closest_surface_point_local(&state.to_local(p));
    state.position + state.orientation.transform_vector(&local)
}

fn world_inertia(props: &MassProps, q: &UnitQuaternion<f64>) -> Matrix3<f64> {
    let r = q.to_rotation_matrix();
    r.matrix() * props.inertia_body * r.matrix().transpose()
}

/// One semi-implicit Euler step of length `dt` under net fluid force and
/// torque plus uniform gravity.
pub fn integrate_body(
    state: &BodyState,
    force: &Vec3,
    torque: &Vec3,
    props: &MassProps,
    gravity: &Vec3,
    dt: f64,
    constraints: &Constraints,
) -> Result<BodyState> {
    integrate_body_damped(state, force, torque, &Matrix6::zeros(), props, gravity, dt, constraints)
}

/// Like [`integrate_body`], with the velocity-proportional part of the load
/// (`-damping * [v, w]`, already contained in `force`/`torque` at the old
/// velocity) taken at the new velocity:
/// `(M + damping dt) dV = (F + m g, T) dt` on the unlocked components.
#[allow(clippy::too_many_arguments)]
pub fn integrate_body_damped(
    state: &BodyState,
    force: &Vec3,
    torque: &Vec3,
    damping: &Matrix6<f64>,
    props: &MassProps,
    gravity: &Vec3,
    dt: f64,
    constraints: &Constraints,
) -> Result<BodyState> {
    if !(force.iter().all(|v| v.is_finite()) && torque.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("body force/torque".into()));
    }
    if !damping.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("body damping".into()));
    }
    let mut next = *state;
    let iw = world_inertia(props, &state.orientation);
    let free: Vec<usize> = (0..6)
        .filter(|&k| if k < 3 { !constraints.lock_translation[k] } else { !constraints.lock_rotation[k - 3] })
        .collect();
    let mut dv = [0.0; 6];
    if !free.is_empty() {
        let rhs_full = [
            (force[0] + props.mass * gravity[0]) * dt,
            (force[1] + props.mass * gravity[1]) * dt,
            (force[2] + props.mass * gravity[2]) * dt,
            torque[0] * dt,
            torque[1] * dt,
            torque[2] * dt,
        ];
        let n = free.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (r, &kr) in free.iter().enumerate() {
            rhs[r] = rhs_full[kr];
            for (c, &kc) in free.iter().enumerate() {
                let m = match (kr < 3, kc < 3) {
                    (true, true) if kr == kc => props.mass,
                    (false, false) => iw[(kr - 3, kc - 3)],
                    _ => 0.0,
                };
                a[(r, c)] = m + damping[(kr, kc)] * dt;
            }
        }
        let sol = a.lu().solve(&rhs).ok_or_else(|| Error::NonFinite("body velocity solve".into()))?;
        for (r, &k) in free.iter().enumerate() {
            dv[k] = sol[r];
        }
    }

    for k in 0..3 {
        next.velocity[k] += dv[k];
    }
    next.position += next.velocity * dt;

    let locked = constraints.lock_rotation;
    let dw = Vec3::new(dv[3], dv[4], dv[5]);
    if locked.iter().all(|b| !b) {
        // angular momentum form: L is conserved exactly when torque-free
        let l = iw * (state.angular_velocity + dw);
        let w_mid = iw.try_inverse().expect("inertia is positive definite") * l;
        next.orientation = advance_orientation(&state.orientation, &w_mid, dt);
        let iw_new = world_inertia(props, &next.orientation);
        next.angular_velocity = iw_new.try_inverse().expect("inertia is positive definite") * l;
    } else {
        next.angular_velocity += dw;
        if next.angular_velocity != Vec3::zeros() {
            next.orientation = advance_orientation(&state.orientation, &next.angular_velocity, dt);
        }
    }

    let finite = next.position.iter().chain(next.velocity.iter()).chain(next.angular_velocity.iter())
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("body state".into()));
    }
    Ok(next)
}

fn advance_orientation(q: &UnitQuaternion<f64>, w: &Vec3, dt: f64) -> UnitQuaternion<f64> {
    if *w == Vec3::zeros() {
        return *q;
    }
    let dq = UnitQuaternion::from_scaled_axis(w * dt);
    let mut out = dq * q;
    out.renormalize();
    out
}

/// A body in the simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBody {
    pub shape: Shape,
    pub state: BodyState,
    pub props: MassProps,
    pub constraints: Constraints,
}

impl RigidBody {
    pub fn new(shape: Shape, state: BodyState, constraints: Constraints) -> Result<Self> {
        shape.validate()?;
        if !(state.density > 0.0) {
            return Err(Error::Setup(format!("body density must be positive, got {}", state.density)));
        }
        let props = inertia_tensor(&shape, state.density);
        Ok(Self { shape, state, props, constraints })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        contains_point(&self.shape, &self.state, p)
    }

    pub fn kinetic_energy(&self) -> f64 {
        let iw = world_inertia(&self.props, &self.state.orientation);
        let w = self.state.angular_velocity;
        0.5 * self.props.mass * self.state.velocity.norm_squared() + 0.5 * w.dot(&(iw * w))
    }

    pub fn angular_momentum(&self) -> Vec3 {
        world_inertia(&self.props, &self.state.orientation) * self.state.angular_velocity
    }
}
