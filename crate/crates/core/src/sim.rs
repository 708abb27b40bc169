//! Simulation state and the coupled time step.
//!
//! One step runs, in order: streaming (bounce-back, free-surface
//! reconstruction, interface mass exchange and momentum exchange on body
//! links), BGK collision, free-surface cell conversion, body integration and
//! finally body re-mapping with obstacle refills. Streaming and collision are
//! cell-parallel over z-slabs; all reductions combine per-slab partial sums in
//! slab order so results do not depend on the worker count.

use nalgebra::Matrix6;
use rayon::prelude::*;

use crate::audit::TransitionAuditor;
use crate::body::{arr, surface_velocity, v3, RigidBody, Vec3};
use crate::coupling::{momentum_exchange_gas, momentum_exchange_interface, momentum_exchange_link};
use crate::error::{Error, Result};
use crate::free_surface::{mass_exchange, reconstruct_interface_pdfs, surface_normal, FillStencil};
use crate::grid::{
    Boundaries, CellIdx, CellKind, CellStateField, Dims, Neighbor, PdfField, Topology, NO_BODY,
};
use crate::lattice::{self, collide_cell, equilibrium_unchecked, CF, OPP, Q, W};

/// Physical and numerical parameters, lattice units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub tau: f64,
    pub gravity: [f64; 3],
    /// Gas reference density; gas pressure is `c_s^2 * rho_gas`.
    pub rho_gas: f64,
    /// Fill-level hysteresis for interface conversions.
    pub epsilon: f64,
    /// Full-field finiteness scan interval in steps.
    pub finite_check_every: u64,
    /// Integrate the moving-wall part of the momentum exchange implicitly.
    pub implicit_wall_damping: bool,
    /// Drive bodies with the mean of the current and previous step's loads.
    pub average_loads: bool,
    /// Empty interface cells that touch neither liquid nor an obstacle.
    pub remove_droplets: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            gravity: [0.0; 3],
            rho_gas: 1.0,
            epsilon: 0.01,
            finite_check_every: 100,
            implicit_wall_damping: true,
            average_loads: false,
            remove_droplets: true,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.5) || !self.tau.is_finite() {
            return Err(Error::Setup(format!("tau must exceed 1/2, got {}", self.tau)));
        }
        if !(self.rho_gas > 0.0) {
            return Err(Error::Setup(format!("rho_gas must be positive, got {}", self.rho_gas)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 0.5) {
            return Err(Error::Setup(format!("epsilon must lie in [0, 0.5), got {}", self.epsilon)));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(Error::Setup("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Unit vector opposite to gravity, `+z` when gravity vanishes.
    pub fn up(&self) -> [f64; 3] {
        let g = self.gravity;
        let n = lattice::dot(g, g).sqrt();
        if n > 0.0 {
            [-g[0] / n, -g[1] / n, -g[2] / n]
        } else {
            [0.0, 0.0, 1.0]
        }
    }
}

/// Fluid force and torque on one body, measured during the last stream.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BodyLoad {
    pub force: [f64; 3],
    pub torque: [f64; 3],
    /// Sensitivity of the load to the body velocity: the moving-wall part of
    /// the exchange equals `-damping * [v, w]`.
    pub damping: [[f64; 6]; 6],
}

impl BodyLoad {
    pub(crate) fn add(&mut self, o: &BodyLoad) {
        for k in 0..3 {
            self.force[k] += o.force[k];
            self.torque[k] += o.torque[k];
        }
        for (a, b) in self.damping.iter_mut().zip(&o.damping) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Counts of the cell conversions performed in one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConversionLog {
    pub interface_to_liquid: Vec<CellIdx>,
    pub interface_to_gas: Vec<CellIdx>,
    pub gas_to_interface: Vec<CellIdx>,
    pub liquid_to_interface: Vec<CellIdx>,
    pub covered: Vec<CellIdx>,
    pub uncovered: Vec<(CellIdx, CellKind)>,
}

impl ConversionLog {
    pub fn is_empty(&self) -> bool {
        self.interface_to_liquid.is_empty()
            && self.interface_to_gas.is_empty()
            && self.gas_to_interface.is_empty()
            && self.liquid_to_interface.is_empty()
            && self.covered.is_empty()
            && self.uncovered.is_empty()
    }
}

/// Complete simulation state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: SimParams,
    pub topo: Topology,
    pub cells: CellStateField,
    pub pdfs: PdfField,
    /// Density of each fluid cell after its last collision.
    pub rho: Vec<f64>,
    /// Plain first-moment velocity of each fluid cell after its last collision.
    pub vel: Vec<[f64; 3]>,
    pub bodies: Vec<RigidBody>,
    /// Loads measured during the most recent step.
    pub loads: Vec<BodyLoad>,
    prev_loads: Vec<BodyLoad>,
    pub step: u64,
    /// Mass that could not be handed to an interface cell, minus mass created
    /// by obstacle refills. `total_mass() + mass_residue` is conserved. Body
    /// remapping releases it into the interface layer every step.
    pub mass_residue: f64,
    pub last_conversions: ConversionLog,
    pub auditor: Option<TransitionAuditor>,
    /// Evaluate slabs on the rayon pool. Output is identical either way.
    pub parallel: bool,
    mass_next: Vec<f64>,
}

/// Number of z-slabs; the unit of parallel work and of reductions.
fn slab_len(d: &Dims) -> usize {
    d.nx * d.ny
}

impl Simulation {
    /// All-gas domain with no bodies. Use the `init_*` helpers to add liquid.
    pub fn new(dims: Dims, boundaries: Boundaries, params: SimParams) -> Result<Self> {
        params.validate()?;
        boundaries.validate()?;
        if dims.is_empty() {
            return Err(Error::Setup("domain must have at least one cell".into()));
        }
        let n = dims.len();
        Ok(Self {
            params,
            topo: Topology::new(dims, boundaries),
            cells: CellStateField::new(n, CellKind::Gas),
            pdfs: PdfField::new(n),
            rho: vec![params.rho_gas; n],
            vel: vec![[0.0; 3]; n],
            bodies: Vec::new(),
            loads: Vec::new(),
            prev_loads: Vec::new(),
            step: 0,
            mass_residue: 0.0,
            last_conversions: ConversionLog::default(),
            auditor: None,
            parallel: true,
            mass_next: vec![0.0; n],
        })
    }

    pub fn dims(&self) -> Dims {
        self.topo.dims
    }

    pub fn omega(&self) -> f64 {
        1.0 / self.params.tau
    }

    /// Fill the domain from per-cell liquid fraction, density and velocity
    /// functions of the cell center. Cells with fraction 1 become liquid,
    /// 0 gas, anything between interface; liquid cells touching gas are
    /// turned into full interface cells. Obstacle cells are left alone.
    pub fn init_fluid(
        &mut self,
        fraction: impl Fn([f64; 3]) -> f64,
        density: impl Fn([f64; 3]) -> f64,
        velocity: impl Fn([f64; 3]) -> [f64; 3],
    ) -> Result<()> {
        let d = self.dims();
        for idx in 0..d.len() {
            if self.cells.kind[idx] == CellKind::Obstacle {
                continue;
            }
            let c = d.center(idx);
            let phi = fraction(c).clamp(0.0, 1.0);
            let kind = if phi >= 1.0 {
                CellKind::Liquid
            } else if phi <= 0.0 {
                CellKind::Gas
            } else {
                CellKind::Interface
            };
            let (rho, u) = if kind == CellKind::Gas {
                (self.params.rho_gas, [0.0; 3])
            } else {
                (density(c), velocity(c))
            };
            if !(rho > 0.0) || u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Setup(format!("invalid initial state at {:?}", d.coords(idx))));
            }
            self.set_cell(idx, kind, phi, rho, u);
        }
        self.close_interface_layer_everywhere();
        Ok(())
    }

    /// Uniform liquid everywhere (except obstacles).
    pub fn init_all_liquid(&mut self, rho: f64, u: [f64; 3]) -> Result<()> {
        self.init_fluid(|_| 1.0, |_| rho, |_| u)
    }

    /// Basin filled below a (possibly tilted) plane with hydrostatic density.
    ///
    /// The free surface height is `level + slope * (x - x_mid)` along the
    /// upward axis, which must be `+z`.
    pub fn init_basin(&mut self, level: f64, slope_x: f64) -> Result<()> {
        let g = -self.params.gravity[2];
        let rho_g = self.params.rho_gas;
        let xm = self.dims().nx as f64 / 2.0;
        let surface = move |c: [f64; 3]| level + slope_x * (c[0] - xm);
        self.init_fluid(
            |c| surface(c) - (c[2] - 0.5),
            |c| hydrostatic_density(rho_g, g, (surface(c) - c[2]).max(0.0)),
            |_| [0.0; 3],
        )
    }

    pub(crate) fn set_cell(&mut self, idx: CellIdx, kind: CellKind, phi: f64, rho: f64, u: [f64; 3]) {
        self.cells.kind[idx] = kind;
        self.cells.owner[idx] = NO_BODY;
        match kind {
            CellKind::Liquid => {
                self.cells.fill[idx] = 1.0;
                self.cells.mass[idx] = rho;
            }
            CellKind::Interface => {
                self.cells.fill[idx] = phi;
                self.cells.mass[idx] = phi * rho;
            }
            CellKind::Gas | CellKind::Obstacle => {
                self.cells.fill[idx] = 0.0;
                self.cells.mass[idx] = 0.0;
            }
        }
        self.rho[idx] = rho;
        self.vel[idx] = u;
        let f = if kind.is_fluid() { equilibrium_unchecked(rho, u) } else { [0.0; Q] };
        self.pdfs.cell_mut(idx).copy_from_slice(&f);
    }

    fn close_interface_layer_everywhere(&mut self) {
        let n = self.dims().len();
        let mut to_interface = Vec::new();
        for idx in 0..n {
            if self.cells.kind[idx] == CellKind::Liquid && self.touches(idx, CellKind::Gas) {
                to_interface.push(idx);
            }
        }
        for idx in to_interface {
            self.cells.kind[idx] = CellKind::Interface;
            self.cells.fill[idx] = 1.0;
            self.cells.mass[idx] = self.rho[idx];
        }
    }

    /// True if any of the 18 lattice neighbors has the given kind.
    pub fn touches(&self, idx: CellIdx, kind: CellKind) -> bool {
        (1..Q).any(|i| match self.topo.neighbor(idx, i) {
            Neighbor::Cell(n) => self.cells.kind[n] == kind,
            Neighbor::Wall(_) => false,
        })
    }

    /// Liquid mass in liquid and interface cells, summed in cell order.
    pub fn total_mass(&self) -> f64 {
        // Neumaier summation keeps the bookkeeping checks tight on large grids
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (k, m) in self.cells.kind.iter().zip(&self.cells.mass) {
            if k.is_fluid() {
                let t = sum + m;
                if sum.abs() >= m.abs() {
                    comp += (sum - t) + m;
                } else {
                    comp += (m - t) + sum;
                }
                sum = t;
            }
        }
        sum + comp
    }

    /// Conserved quantity: fluid mass plus the residue accumulator.
    pub fn mass_balance(&self) -> f64 {
        self.total_mass() + self.mass_residue
    }

    /// Total fluid momentum over liquid and interface cells.
    pub fn fluid_momentum(&self) -> [f64; 3] {
        let mut j = [0.0; 3];
        for idx in 0..self.dims().len() {
            if self.cells.kind[idx].is_fluid() {
                let f = self.pdfs.cell(idx);
                for i in 0..Q {
                    for k in 0..3 {
                        j[k] += CF[i][k] * f[i];
                    }
                }
            }
        }
        j
    }

    /// Largest velocity magnitude over cells of the given kind.
    /// Fluid velocity with the half-step force shift, `u + a/2`. This is
    /// exactly zero in a resting hydrostatic column.
    pub fn fluid_velocity(&self, idx: CellIdx) -> [f64; 3] {
        let (u, a) = (self.vel[idx], self.params.gravity);
        [u[0] + 0.5 * a[0], u[1] + 0.5 * a[1], u[2] + 0.5 * a[2]]
    }

    /// Largest [`Self::fluid_velocity`] magnitude over cells of `kind`.
    pub fn max_speed(&self, kind: CellKind) -> f64 {
        (0..self.dims().len())
            .filter(|&i| self.cells.kind[i] == kind)
            .map(|i| {
                let u = self.fluid_velocity(i);
                lattice::dot(u, u).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.count(kind)
    }

    pub fn covered_cells(&self, body: usize) -> usize {
        self.cells.owner.iter().filter(|&&o| o == body as u32).count()
    }

    /// Checks every fluid population for finiteness.
    pub fn check_finite(&self) -> Result<()> {
        let d = self.dims();
        for idx in 0..d.len() {
            if self.cells.kind[idx].is_fluid() {
                let f = self.pdfs.cell(idx);
                if f.iter().any(|v| !v.is_finite()) || !self.rho[idx].is_finite() {
                    return Err(Error::Divergence {
                        step: self.step,
                        message: format!("non-finite populations at cell {:?}", d.coords(idx)),
                    });
                }
            }
        }
        Ok(())
    }

    /// Scans the whole grid for liquid cells adjacent to gas.
    pub fn check_closed_interface(&self) -> Result<()> {
        for idx in 0..self.dims().len() {
            if self.cells.kind[idx] == CellKind::Liquid && self.touches(idx, CellKind::Gas) {
                return Err(Error::Consistency {
                    step: self.step,
                    cell: self.dims().coords(idx),
                    message: "liquid cell adjacent to gas".into(),
                });
            }
        }
        Ok(())
    }

    /// Streaming pass: writes post-stream populations for every fluid cell to
    /// the destination buffer, updated interface masses, and returns the
    /// fluid loads on each body.
    pub fn stream(&mut self) -> Vec<BodyLoad> {
        let d = self.dims();
        let slab = slab_len(&d);
        let nb = self.bodies.len();
        let ctx = StreamCtx {
            topo: &self.topo,
            cells: &self.cells,
            src: &self.pdfs.src,
            rho: &self.rho,
            vel: &self.vel,
            bodies: &self.bodies,
            params: &self.params,
            up: self.params.up(),
        };
        let dst = &mut self.pdfs.dst;
        let mass_next = &mut self.mass_next;
        let work = |(z, (dst_slab, mass_slab)): (usize, (&mut [f64], &mut [f64]))| {
            let mut loads = vec![BodyLoad::default(); nb];
            for local in 0..slab {
                let idx = z * slab + local;
                let out: &mut [f64; Q] = (&mut dst_slab[local * Q..(local + 1) * Q]).try_into().unwrap();
                mass_slab[local] = ctx.stream_cell(idx, out, &mut loads);
            }
            loads
        };
        let partial: Vec<Vec<BodyLoad>> = if self.parallel {
            dst.par_chunks_mut(slab * Q)
                .zip(mass_next.par_chunks_mut(slab))
                .enumerate()
                .map(work)
                .collect()
        } else {
            dst.chunks_mut(slab * Q).zip(mass_next.chunks_mut(slab)).enumerate().map(work).collect()
        };
        std::mem::swap(&mut self.cells.mass, &mut self.mass_next);
        let mut total = vec![BodyLoad::default(); nb];
        for p in &partial {
            for (t, l) in total.iter_mut().zip(p) {
                t.add(l);
            }
        }
        total
    }

    /// Collision pass on the destination buffer, then buffer swap. Updates
    /// cached moments and interface fill levels.
    pub fn collide(&mut self) {
        let d = self.dims();
        let slab = slab_len(&d);
        let omega = self.omega();
        let a = self.params.gravity;
        let kinds = &self.cells.kind;
        let work = |(z, (((f_slab, rho_slab), vel_slab), (fill_slab, mass_slab))): (
            usize,
            (((&mut [f64], &mut [f64]), &mut [[f64; 3]]), (&mut [f64], &mut [f64])),
        )| {
            for local in 0..slab {
                let idx = z * slab + local;
                let kind = kinds[idx];
                if !kind.is_fluid() {
                    continue;
                }
                let f: &mut [f64; Q] = (&mut f_slab[local * Q..(local + 1) * Q]).try_into().unwrap();
                let m = collide_cell(f, omega, a);
                rho_slab[local] = m.rho;
                vel_slab[local] = m.u;
                if kind == CellKind::Liquid {
                    mass_slab[local] = m.rho;
                    fill_slab[local] = 1.0;
                } else {
                    fill_slab[local] = mass_slab[local] / m.rho;
                }
            }
        };
        let dst = &mut self.pdfs.dst;
        if self.parallel {
            dst.par_chunks_mut(slab * Q)
                .zip(self.rho.par_chunks_mut(slab))
                .zip(self.vel.par_chunks_mut(slab))
                .zip(self.cells.fill.par_chunks_mut(slab).zip(self.cells.mass.par_chunks_mut(slab)))
                .enumerate()
                .for_each(work);
        } else {
            dst.chunks_mut(slab * Q)
                .zip(self.rho.chunks_mut(slab))
                .zip(self.vel.chunks_mut(slab))
                .zip(self.cells.fill.chunks_mut(slab).zip(self.cells.mass.chunks_mut(slab)))
                .enumerate()
                .for_each(work);
        }
        self.pdfs.swap();
    }

    /// One full coupled time step.
    pub fn step(&mut self) -> Result<()> {
        let before = self.auditor.as_ref().map(|_| self.cells.kind.clone());

        let loads = self.stream();
        self.collide();
        let mut log = self.convert_cells()?;
        self.prev_loads = std::mem::replace(&mut self.loads, loads);
        self.integrate_bodies()?;
        self.remap_bodies(&mut log)?;
        self.verify_layer_near(&log)?;
        self.last_conversions = log;
        self.step += 1;

        if self.params.finite_check_every > 0 && self.step % self.params.finite_check_every == 0 {
            self.check_finite()?;
        }
        if let Some(prev) = before {
            let step = self.step;
            let dims = self.dims();
            let closed = self.check_closed_interface();
            let auditor = self.auditor.as_mut().unwrap();
            auditor.record(step, dims, &prev, &self.cells.kind);
            closed?;
            auditor.result()?;
        }
        Ok(())
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn integrate_bodies(&mut self) -> Result<()> {
        let g = v3(self.params.gravity);
        let implicit = self.params.implicit_wall_damping;
        let driving: Vec<BodyLoad> = if self.params.average_loads && self.step > 0 && self.prev_loads.len() == self.loads.len() {
            self.loads
                .iter()
                .zip(&self.prev_loads)
                .map(|(a, b)| {
                    let mut m = *a;
                    for k in 0..3 {
                        m.force[k] = 0.5 * (a.force[k] + b.force[k]);
                        m.torque[k] = 0.5 * (a.torque[k] + b.torque[k]);
                    }
                    m
                })
                .collect()
        } else {
            self.loads.clone()
        };
        for (b, load) in self.bodies.iter_mut().zip(&driving) {
            let damping = if implicit { Matrix6::from_fn(|r, c| load.damping[r][c]) } else { Matrix6::zeros() };
            b.state = crate::body::integrate_body_damped(
                &b.state,
                &v3(load.force),
                &v3(load.torque),
                &damping,
                &b.props,
                &g,
                1.0,
                &b.constraints,
            )
            .map_err(|e| Error::Divergence { step: self.step, message: e.to_string() })?;
        }
        Ok(())
    }

    /// Liquid cells next to gas around recently converted cells are a broken
    /// interface layer.
    fn verify_layer_near(&self, log: &ConversionLog) -> Result<()> {
        let touched = log
            .interface_to_gas
            .iter()
            .chain(&log.interface_to_liquid)
            .chain(&log.gas_to_interface)
            .chain(&log.covered)
            .chain(log.uncovered.iter().map(|(i, _)| i));
        for &idx in touched {
            for i in 0..Q {
                if let Neighbor::Cell(n) = self.topo.neighbor(idx, i) {
                    if self.cells.kind[n] == CellKind::Liquid && self.touches(n, CellKind::Gas) {
                        return Err(Error::Consistency {
                            step: self.step,
                            cell: self.dims().coords(n),
                            message: "interface layer hole after conversion".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Density of a hydrostatic column at the given depth below a free surface
/// held at `rho_gas`.
pub fn hydrostatic_density(rho_gas: f64, g: f64, depth: f64) -> f64 {
    rho_gas * (3.0 * g * depth).exp()
}

struct StreamCtx<'a> {
    topo: &'a Topology,
    cells: &'a CellStateField,
    src: &'a [f64],
    rho: &'a [f64],
    vel: &'a [[f64; 3]],
    bodies: &'a [RigidBody],
    params: &'a SimParams,
    up: [f64; 3],
}

impl StreamCtx<'_> {
    #[inline(always)]
    fn out(&self, idx: CellIdx) -> &[f64; Q] {
        self.src[idx * Q..(idx + 1) * Q].try_into().unwrap()
    }

    /// Adds one link's exchange. `wall_coef` scales the moving-wall term,
    /// `6 w_d rho phi` along `c_d`.
    fn link_load(&self, idx: CellIdx, body: usize, dj: [f64; 3], d: usize, wall_coef: f64, loads: &mut [BodyLoad]) {
        let b = &self.bodies[body];
        let x = self.topo.dims.center(idx);
        let r = self.topo.displacement(arr(&b.state.position), x);
        let l = &mut loads[body];
        for k in 0..3 {
            l.force[k] += dj[k];
        }
        l.torque[0] += r[1] * dj[2] - r[2] * dj[1];
        l.torque[1] += r[2] * dj[0] - r[0] * dj[2];
        l.torque[2] += r[0] * dj[1] - r[1] * dj[0];
        if wall_coef != 0.0 {
            let c = CF[d];
            let g = [c[0], c[1], c[2], r[1] * c[2] - r[2] * c[1], r[2] * c[0] - r[0] * c[2], r[0] * c[1] - r[1] * c[0]];
            for (a, ga) in g.iter().enumerate() {
                for (k, gk) in g.iter().enumerate() {
                    l.damping[a][k] += wall_coef * ga * gk;
                }
            }
        }
    }

    fn wall_point_velocity(&self, body: usize, idx: CellIdx, dir: usize) -> [f64; 3] {
        let b = &self.bodies[body];
        let c = self.topo.dims.center(idx);
        // link midpoint, unwrapped relative to the body center
        let r = self.topo.displacement(arr(&b.state.position), c);
        let p = b.state.position
            + Vec3::new(r[0] + 0.5 * CF[dir][0], r[1] + 0.5 * CF[dir][1], r[2] + 0.5 * CF[dir][2]);
        arr(&surface_velocity(&b.state, &p))
    }

    /// Streams into one cell; returns the cell's updated liquid mass.
    fn stream_cell(&self, idx: CellIdx, f: &mut [f64; Q], loads: &mut [BodyLoad]) -> f64 {
        let kind = self.cells.kind[idx];
        match kind {
            CellKind::Obstacle => {
                *f = [0.0; Q];
                return 0.0;
            }
            CellKind::Gas => {
                *f = [0.0; Q];
                if !self.bodies.is_empty() {
                    for d in 1..Q {
                        if let Neighbor::Cell(n) = self.topo.neighbor(idx, d) {
                            if self.cells.kind[n] == CellKind::Obstacle {
                                let dj = momentum_exchange_gas(d, self.params.rho_gas);
                                self.link_load(idx, self.cells.owner[n] as usize, dj, d, 0.0, loads);
                            }
                        }
                    }
                }
                return 0.0;
            }
            CellKind::Liquid | CellKind::Interface => {}
        }

        let out = self.out(idx);
        let rho_x = self.rho[idx];
        let phi_x = self.cells.fill[idx];
        let interface = kind == CellKind::Interface;
        let mut dm = 0.0;
        // links whose incoming value must not be replaced by reconstruction
        let mut blocked = [false; Q];
        let mut missing = [false; Q];
        f[0] = out[0];
        for i in 1..Q {
            match self.topo.source(idx, i) {
                Neighbor::Wall(face) => {
                    let uw = self.topo.wall_velocity(face);
                    f[i] = lattice::apply_noslip(out[OPP[i]], i, uw, rho_x);
                    blocked[i] = true;
                }
                Neighbor::Cell(s) => match self.cells.kind[s] {
                    CellKind::Obstacle => {
                        let body = self.cells.owner[s] as usize;
                        // the population leaving towards the body travels along OPP[i]
                        let d = OPP[i];
                        let uw = self.wall_point_velocity(body, idx, d);
                        f[i] = lattice::apply_noslip(out[d], i, uw, rho_x);
                        blocked[i] = true;
                        let (dj, phi) = if interface {
                            (momentum_exchange_interface(phi_x, out[d], d, self.params.rho_gas, uw, rho_x), phi_x)
                        } else {
                            (momentum_exchange_link(out[d], d, uw, rho_x), 1.0)
                        };
                        self.link_load(idx, body, dj, d, 6.0 * W[d] * rho_x * phi, loads);
                    }
                    CellKind::Gas => {
                        f[i] = out[OPP[i]];
                        missing[i] = true;
                    }
                    nk @ (CellKind::Liquid | CellKind::Interface) => {
                        let incoming = self.src[s * Q + i];
                        f[i] = incoming;
                        if interface {
                            dm += mass_exchange(nk, phi_x, self.cells.fill[s], incoming, out[OPP[i]]);
                        }
                    }
                },
            }
        }

        if !interface {
            return self.cells.mass[idx];
        }

        let stencil = FillStencil::gather(self.topo, self.cells, idx);
        let n = surface_normal(&stencil, self.up);
        reconstruct_interface_pdfs(f, out, self.params.rho_gas, self.vel[idx], n, &missing, &blocked);
        self.cells.mass[idx] + dm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Face, FaceBoundary};
    use approx::assert_relative_eq;

    fn periodic_box(n: usize) -> Simulation {
        let mut b = Boundaries::walls();
        for a in 0..3 {
            b.set_periodic(a);
        }
        Simulation::new(Dims::new(n, n, n), b, SimParams::default()).unwrap()
    }

    #[test]
    fn uniform_field_is_invariant() {
        let mut sim = periodic_box(6);
        sim.init_all_liquid(1.0, [0.01, -0.02, 0.005]).unwrap();
        let before = sim.pdfs.src.clone();
        sim.run(20).unwrap();
        for (a, b) in before.iter().zip(&sim.pdfs.src) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn pulse_moves_one_cell() {
        let mut sim = periodic_box(5);
        sim.init_all_liquid(1.0, [0.0; 3]).unwrap();
        let d = sim.dims();
        let at = d.idx(2, 2, 2);
        sim.pdfs.src[at * Q + 1] += 0.01;
        sim.stream();
        let next = d.idx(3, 2, 2);
        assert_relative_eq!(sim.pdfs.dst[next * Q + 1], 1.0 / 18.0 + 0.01, epsilon = 1e-16);
        assert_relative_eq!(sim.pdfs.dst[at * Q + 1], 1.0 / 18.0, epsilon = 1e-16);
        // rest population stays put
        assert_eq!(sim.pdfs.dst[at * Q], sim.pdfs.src[at * Q]);
    }

    #[test]
    fn periodic_wrap_east() {
        let mut sim = periodic_box(4);
        sim.init_all_liquid(1.0, [0.0; 3]).unwrap();
        let d = sim.dims();
        sim.pdfs.src[d.idx(3, 1, 1) * Q + 1] = 0.5;
        sim.stream();
        assert_eq!(sim.pdfs.dst[d.idx(0, 1, 1) * Q + 1], 0.5);
    }

    #[test]
    fn stream_conserves_mass_and_momentum() {
        let mut sim = periodic_box(6);
        sim.init_all_liquid(1.0, [0.0; 3]).unwrap();
        let n = sim.dims().len();
        for idx in 0..n {
            for i in 0..Q {
                sim.pdfs.src[idx * Q + i] += 1e-3 * (((idx * 31 + i * 7) % 13) as f64 - 6.0);
            }
        }
        let sums = |buf: &[f64]| {
            let mut m = 0.0;
            let mut j = [0.0; 3];
            for idx in 0..n {
                for i in 0..Q {
                    m += buf[idx * Q + i];
                    for k in 0..3 {
                        j[k] += CF[i][k] * buf[idx * Q + i];
                    }
                }
            }
            (m, j)
        };
        let (m0, j0) = sums(&sim.pdfs.src);
        sim.stream();
        let (m1, j1) = sums(&sim.pdfs.dst);
        assert_relative_eq!(m0, m1, epsilon = 1e-11);
        for k in 0..3 {
            assert_relative_eq!(j0[k], j1[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn serial_and_parallel_paths_agree_bitwise() {
        let build = |parallel: bool| {
            let mut b = Boundaries::walls();
            b.set_periodic(0);
            b.set(Face::ZMin, FaceBoundary::NoSlip { velocity: [1e-3, 0.0, 0.0] });
            let p = SimParams { tau: 0.8, gravity: [0.0, 0.0, -1e-4], ..Default::default() };
            let mut sim = Simulation::new(Dims::new(8, 6, 10), b, p).unwrap();
            sim.init_basin(5.3, 0.2).unwrap();
            sim.parallel = parallel;
            sim.run(30).unwrap();
            sim
        };
        let a = build(true);
        let b = build(false);
        assert_eq!(a.pdfs.src, b.pdfs.src);
        assert_eq!(a.cells.mass, b.cells.mass);
        assert_eq!(a.cells.kind, b.cells.kind);
    }

    #[test]
    fn hydrostatic_profile_is_exponential() {
        assert_relative_eq!(hydrostatic_density(1.0, 0.0, 10.0), 1.0);
        assert_relative_eq!(hydrostatic_density(1.0, 1e-4, 10.0), (3e-3f64).exp());
    }

    #[test]
    fn init_closes_layer() {
        let p = SimParams { gravity: [0.0, 0.0, -1e-4], ..Default::default() };
        let mut sim = Simulation::new(Dims::new(4, 4, 8), Boundaries::walls(), p).unwrap();
        sim.init_basin(4.0, 0.0).unwrap();
        sim.check_closed_interface().unwrap();
        let d = sim.dims();
        assert_eq!(sim.cells.kind[d.idx(1, 1, 3)], CellKind::Interface);
        assert_eq!(sim.cells.fill[d.idx(1, 1, 3)], 1.0);
        assert_eq!(sim.cells.kind[d.idx(1, 1, 2)], CellKind::Liquid);
        assert_eq!(sim.cells.kind[d.idx(1, 1, 4)], CellKind::Gas);
    }
}
