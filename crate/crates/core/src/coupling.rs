//! Solid/fluid coupling: momentum exchange on links into bodies, mapping of
//! bodies onto the lattice, and refilling of cells a body leaves behind.

use crate::body::{arr, closest_surface_point, surface_velocity, v3, RigidBody, Vec3};
use crate::error::{Error, Result};
use crate::free_surface::ExcessWeighting;
use crate::grid::{CellIdx, CellKind, Neighbor, NO_BODY};
use crate::lattice::{cdot, equilibrium_unchecked, CF, Q, W};
use crate::sim::{BodyLoad, ConversionLog, Simulation};

/// Momentum handed to a body when the population `f_toward`, travelling along
/// `dir` into the body, is bounced back by a wall moving with `u_wall`.
/// Points along `c_dir`.
#[inline]
pub fn momentum_exchange_link(f_toward: f64, dir: usize, u_wall: [f64; 3], rho: f64) -> [f64; 3] {
    let s = 2.0 * (f_toward - 3.0 * W[dir] * cdot(dir, u_wall) * rho);
    [CF[dir][0] * s, CF[dir][1] * s, CF[dir][2] * s]
}

/// Momentum handed to a body across a link from an interface cell with fill
/// `phi`: the liquid population is blended with the gas equilibrium.
#[inline]
pub fn momentum_exchange_interface(
    phi: f64,
    f_toward: f64,
    dir: usize,
    rho_gas: f64,
    u_wall: [f64; 3],
    rho: f64,
) -> [f64; 3] {
    let s = 2.0 * (phi * f_toward + (1.0 - phi) * W[dir] * rho_gas - 3.0 * phi * rho * W[dir] * cdot(dir, u_wall));
    [CF[dir][0] * s, CF[dir][1] * s, CF[dir][2] * s]
}

/// Gas-pressure momentum across a link from a gas cell into a body.
#[inline]
pub fn momentum_exchange_gas(dir: usize, rho_gas: f64) -> [f64; 3] {
    let s = 2.0 * W[dir] * rho_gas;
    [CF[dir][0] * s, CF[dir][1] * s, CF[dir][2] * s]
}

/// Covered and uncovered cells produced by re-mapping one body.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObstacleDelta {
    pub covered: Vec<CellIdx>,
    pub uncovered: Vec<CellIdx>,
}

impl Simulation {
    /// Adds a body and marks the cells it covers as obstacles. Intended for
    /// setup; fluid in covered cells is discarded.
    pub fn add_body(&mut self, body: RigidBody) -> Result<usize> {
        let id = self.bodies.len();
        self.bodies.push(body);
        self.loads.push(BodyLoad::default());
        let cells = match self.cells_inside(id) {
            Ok(c) => c,
            Err(e) => {
                self.bodies.pop();
                self.loads.pop();
                return Err(e);
            }
        };
        for &idx in &cells {
            if self.cells.kind[idx] == CellKind::Obstacle {
                self.bodies.pop();
                self.loads.pop();
                return Err(Error::Setup(format!(
                    "body {id} overlaps another body at {:?}",
                    self.dims().coords(idx)
                )));
            }
        }
        for idx in cells {
            self.set_cell(idx, CellKind::Obstacle, 0.0, self.params.rho_gas, [0.0; 3]);
            self.cells.owner[idx] = id as u32;
        }
        Ok(id)
    }

    /// Cells whose centers lie strictly inside body `id`, ascending.
    pub fn cells_inside(&self, id: usize) -> Result<Vec<CellIdx>> {
        let body = &self.bodies[id];
        let d = self.dims();
        let n = d.as_array();
        let (lo, hi) = aabb(body);
        let mut ranges = [(0i64, 0i64); 3];
        for k in 0..3 {
            let periodic = self.topo.boundaries.periodic(k);
            if !periodic && (lo[k] < 0.0 || hi[k] > n[k] as f64) {
                return Err(Error::Setup(format!(
                    "body {id} extends beyond the domain wall on axis {k} ({:.3}..{:.3})",
                    lo[k], hi[k]
                )));
            }
            let a = (lo[k] - 0.5).floor() as i64;
            let b = (hi[k] - 0.5).ceil() as i64;
            ranges[k] = if periodic && b - a + 1 >= n[k] as i64 { (0, n[k] as i64 - 1) } else { (a, b) };
        }
        let o = arr(&body.state.position);
        let mut out = Vec::new();
        for z in ranges[2].0..=ranges[2].1 {
            for y in ranges[1].0..=ranges[1].1 {
                for x in ranges[0].0..=ranges[0].1 {
                    let p = [x, y, z];
                    let mut q = [0usize; 3];
                    let mut valid = true;
                    for k in 0..3 {
                        let v = p[k].rem_euclid(n[k] as i64);
                        if v != p[k] && !self.topo.boundaries.periodic(k) {
                            valid = false;
                        }
                        q[k] = v as usize;
                    }
                    if !valid {
                        continue;
                    }
                    let idx = d.idx(q[0], q[1], q[2]);
                    let c = d.center(idx);
                    let r = self.topo.displacement(o, c);
                    if body.contains(&(body.state.position + v3(r))) {
                        out.push(idx);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Covered/uncovered cell sets for body `id` at its current pose.
    pub fn map_body_to_grid(&self, id: usize) -> Result<ObstacleDelta> {
        let inside = self.cells_inside(id)?;
        let owner = id as u32;
        let mut delta = ObstacleDelta::default();
        for &idx in &inside {
            if self.cells.owner[idx] != owner {
                if self.cells.kind[idx] == CellKind::Obstacle {
                    return Err(Error::Consistency {
                        step: self.step,
                        cell: self.dims().coords(idx),
                        message: format!("body {id} runs into body {}", self.cells.owner[idx]),
                    });
                }
                delta.covered.push(idx);
            }
        }
        // previously owned cells that are no longer inside
        let mut k = 0;
        for idx in 0..self.dims().len() {
            if self.cells.owner[idx] == owner {
                while k < inside.len() && inside[k] < idx {
                    k += 1;
                }
                if k >= inside.len() || inside[k] != idx {
                    delta.uncovered.push(idx);
                }
            }
        }
        Ok(delta)
    }

    /// Fluid loads on every body from the current post-collision populations,
    /// the same sums the streaming pass accumulates.
    pub fn net_force_torque(&self) -> Vec<BodyLoad> {
        let mut loads = vec![BodyLoad::default(); self.bodies.len()];
        let d = self.dims();
        for idx in 0..d.len() {
            let kind = self.cells.kind[idx];
            if kind == CellKind::Obstacle {
                continue;
            }
            for dir in 1..Q {
                let Neighbor::Cell(s) = self.topo.neighbor(idx, dir) else { continue };
                if self.cells.kind[s] != CellKind::Obstacle {
                    continue;
                }
                let body = self.cells.owner[s] as usize;
                let b = &self.bodies[body];
                let c = d.center(idx);
                let r = self.topo.displacement(arr(&b.state.position), c);
                let mid = b.state.position
                    + Vec3::new(r[0] + 0.5 * CF[dir][0], r[1] + 0.5 * CF[dir][1], r[2] + 0.5 * CF[dir][2]);
                let uw = arr(&surface_velocity(&b.state, &mid));
                let f = self.pdfs.src[idx * Q + dir];
                let dj = match kind {
                    CellKind::Liquid => momentum_exchange_link(f, dir, uw, self.rho[idx]),
                    CellKind::Interface => momentum_exchange_interface(
                        self.cells.fill[idx],
                        f,
                        dir,
                        self.params.rho_gas,
                        uw,
                        self.rho[idx],
                    ),
                    CellKind::Gas => momentum_exchange_gas(dir, self.params.rho_gas),
                    CellKind::Obstacle => unreachable!(),
                };
                let l = &mut loads[body];
                for k in 0..3 {
                    l.force[k] += dj[k];
                }
                l.torque[0] += r[1] * dj[2] - r[2] * dj[1];
                l.torque[1] += r[2] * dj[0] - r[0] * dj[2];
                l.torque[2] += r[0] * dj[1] - r[1] * dj[0];
            }
        }
        loads
    }

    /// Re-maps every body after integration: newly covered cells give their
    /// mass away and become obstacles, newly uncovered cells are refilled.
    pub(crate) fn remap_bodies(&mut self, log: &mut ConversionLog) -> Result<()> {
        let mut deltas = Vec::with_capacity(self.bodies.len());
        for id in 0..self.bodies.len() {
            if self.bodies[id].constraints.all_locked()
                && self.bodies[id].state.velocity == Vec3::zeros()
                && self.bodies[id].state.angular_velocity == Vec3::zeros()
            {
                deltas.push(ObstacleDelta::default());
                continue;
            }
            deltas.push(self.map_body_to_grid(id)?);
        }

        for (id, delta) in deltas.iter().enumerate() {
            for &idx in &delta.covered {
                let excess = if self.cells.kind[idx].is_fluid() { self.cells.mass[idx] } else { 0.0 };
                self.set_cell(idx, CellKind::Obstacle, 0.0, self.params.rho_gas, [0.0; 3]);
                self.cells.owner[idx] = id as u32;
                self.distribute_excess_mass(idx, excess, ExcessWeighting::Uniform);
                log.covered.push(idx);
            }
        }

        let mut pending: Vec<(CellIdx, usize)> = Vec::new();
        for (id, delta) in deltas.iter().enumerate() {
            for &idx in &delta.uncovered {
                // still tagged obstacle so it is excluded from neighborhoods
                self.cells.owner[idx] = NO_BODY;
                pending.push((idx, id));
            }
        }
        pending.sort_unstable();
        while !pending.is_empty() {
            let mut rest = Vec::new();
            for &(idx, id) in &pending {
                match self.refill_uncovered_cell(idx, id) {
                    Some(kind) => log.uncovered.push((idx, kind)),
                    None => rest.push((idx, id)),
                }
            }
            if rest.len() == pending.len() {
                let idx = rest[0].0;
                return Err(Error::Consistency {
                    step: self.step,
                    cell: self.dims().coords(idx),
                    message: "uncovered cell has no fluid neighbor".into(),
                });
            }
            pending = rest;
        }

        // a refill next to another refill can leave liquid facing gas
        let mut fix = Vec::new();
        for &(idx, _) in &log.uncovered {
            for i in 0..Q {
                if let Neighbor::Cell(m) = self.topo.neighbor(idx, i) {
                    if self.cells.kind[m] == CellKind::Liquid && self.touches(m, CellKind::Gas) {
                        fix.push(m);
                    }
                }
            }
        }
        fix.sort_unstable();
        fix.dedup();
        for m in fix {
            self.cells.kind[m] = CellKind::Interface;
            self.cells.fill[m] = 1.0;
            self.cells.mass[m] = self.rho[m];
            log.liquid_to_interface.push(m);
        }
        self.release_residue();
        Ok(())
    }

    /// Spreads the residue evenly over the interface layer. Mass a body
    /// swallows or frees below the surface then shows up as a level change
    /// instead of piling up in the accumulator.
    pub fn release_residue(&mut self) {
        if self.mass_residue == 0.0 {
            return;
        }
        let n = self.cells.kind.iter().filter(|k| **k == CellKind::Interface).count();
        if n == 0 {
            return;
        }
        let share = self.mass_residue / n as f64;
        let mut given = 0.0;
        for idx in 0..self.cells.kind.len() {
            if self.cells.kind[idx] == CellKind::Interface {
                let before = self.cells.mass[idx];
                self.cells.mass[idx] += share;
                given += self.cells.mass[idx] - before;
                self.cells.fill[idx] = self.cells.mass[idx] / self.rho[idx];
            }
        }
        self.mass_residue -= given;
    }

    /// Turns a cell a body just left into gas, liquid or interface depending
    /// on its non-obstacle neighborhood. Returns `None` if the neighborhood is
    /// empty (the caller retries after other refills).
    pub fn refill_uncovered_cell(&mut self, idx: CellIdx, body: usize) -> Option<CellKind> {
        let mut any = false;
        let mut liquid = false;
        let mut gas = false;
        let mut rho_sum = 0.0;
        let mut rho_n = 0usize;
        let mut phi_sum = 0.0;
        let mut phi_n = 0usize;
        for i in 1..Q {
            let Neighbor::Cell(m) = self.topo.neighbor(idx, i) else { continue };
            match self.cells.kind[m] {
                CellKind::Obstacle => continue,
                CellKind::Gas => gas = true,
                CellKind::Liquid => {
                    liquid = true;
                    rho_sum += self.rho[m];
                    rho_n += 1;
                }
                CellKind::Interface => {
                    rho_sum += self.rho[m];
                    rho_n += 1;
                    phi_sum += self.cells.fill[m];
                    phi_n += 1;
                }
            }
            any = true;
        }
        if !any {
            return None;
        }
        let rho_g = self.params.rho_gas;
        if !liquid {
            self.set_cell(idx, CellKind::Gas, 0.0, rho_g, [0.0; 3]);
            return Some(CellKind::Gas);
        }
        let rho = rho_sum / rho_n as f64;
        let b = &self.bodies[body];
        let c = v3(self.dims().center(idx));
        let unwrapped = b.state.position + v3(self.topo.displacement(arr(&b.state.position), arr(&c)));
        let p = closest_surface_point(&b.shape, &b.state, &unwrapped);
        let uw = arr(&surface_velocity(&b.state, &p));
        let kind = if gas { CellKind::Interface } else { CellKind::Liquid };
        let phi = if kind == CellKind::Liquid {
            1.0
        } else if phi_n > 0 {
            phi_sum / phi_n as f64
        } else {
            0.5
        };
        self.set_cell(idx, kind, phi, rho, uw);
        self.mass_residue -= self.cells.mass[idx];
        Some(kind)
    }
}

/// World-frame bounding box of a body.
pub fn aabb(body: &RigidBody) -> ([f64; 3], [f64; 3]) {
    let o = body.state.position;
    let ext = match body.shape {
        crate::body::Shape::Sphere { radius } => Vec3::repeat(radius),
        crate::body::Shape::Cuboid { length, width, height } => {
            let r = body.state.orientation.to_rotation_matrix();
            let h = Vec3::new(length, width, height) * 0.5;
            let m = r.matrix().abs();
            m * h
        }
    };
    (arr(&(o - ext)), arr(&(o + ext)))
}

/// Equilibrium populations of a refilled cell, exposed for tests.
pub fn refill_populations(rho: f64, u_wall: [f64; 3]) -> [f64; Q] {
    equilibrium_unchecked(rho, u_wall)
}
