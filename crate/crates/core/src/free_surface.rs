//! Volume-of-fluid interface tracking: interface mass exchange, surface
//! normals, reconstruction of populations coming from the gas side, and the
//! liquid/interface/gas conversion rules.

use crate::error::{Error, Result};
use crate::grid::{CellIdx, CellKind, CellStateField, Neighbor, Topology};
use crate::lattice::{cdot, equilibrium_unchecked, OPP, Q};
use crate::sim::{ConversionLog, Simulation};

/// Mass crossing the link between a cell and one neighbor during streaming.
///
/// `incoming` is the population the neighbor sends to the cell, `outgoing`
/// the one the cell sends back along the same link.
#[inline]
pub fn mass_exchange(neighbor: CellKind, phi: f64, phi_neighbor: f64, incoming: f64, outgoing: f64) -> f64 {
    match neighbor {
        CellKind::Gas | CellKind::Obstacle => 0.0,
        CellKind::Liquid => incoming - outgoing,
        CellKind::Interface => 0.5 * (phi + phi_neighbor) * (incoming - outgoing),
    }
}

/// Fill levels of the 3x3x3 block around a cell, `values[dz][dy][dx]` with
/// offsets shifted by one. Obstacles and domain walls take the center value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillStencil {
    pub values: [[[f64; 3]; 3]; 3],
}

impl FillStencil {
    pub fn from_fn(f: impl Fn(i32, i32, i32) -> f64) -> Self {
        let mut values = [[[0.0; 3]; 3]; 3];
        for (dz, plane) in values.iter_mut().enumerate() {
            for (dy, row) in plane.iter_mut().enumerate() {
                for (dx, v) in row.iter_mut().enumerate() {
                    *v = f(dx as i32 - 1, dy as i32 - 1, dz as i32 - 1);
                }
            }
        }
        Self { values }
    }

    pub fn gather(topo: &Topology, cells: &CellStateField, idx: CellIdx) -> Self {
        let d = topo.dims;
        let [x, y, z] = d.coords(idx);
        let center = cells.fill[idx];
        let n = [d.nx as i64, d.ny as i64, d.nz as i64];
        Self::from_fn(|dx, dy, dz| {
            let mut p = [x as i64 + dx as i64, y as i64 + dy as i64, z as i64 + dz as i64];
            for k in 0..3 {
                if p[k] < 0 || p[k] >= n[k] {
                    if topo.boundaries.periodic(k) {
                        p[k] = p[k].rem_euclid(n[k]);
                    } else {
                        return center;
                    }
                }
            }
            let j = d.idx(p[0] as usize, p[1] as usize, p[2] as usize);
            match cells.kind[j] {
                CellKind::Liquid => 1.0,
                CellKind::Gas => 0.0,
                CellKind::Interface => cells.fill[j],
                CellKind::Obstacle => center,
            }
        })
    }

    #[inline]
    fn at(&self, dx: i32, dy: i32, dz: i32) -> f64 {
        self.values[(dz + 1) as usize][(dy + 1) as usize][(dx + 1) as usize]
    }
}

/// Unit interface normal pointing from liquid towards gas, from central
/// differences of the fill levels. Falls back to `fallback` (the direction
/// opposite to gravity) when the gradient vanishes.
pub fn surface_normal(stencil: &FillStencil, fallback: [f64; 3]) -> [f64; 3] {
    let g = [
        0.5 * (stencil.at(1, 0, 0) - stencil.at(-1, 0, 0)),
        0.5 * (stencil.at(0, 1, 0) - stencil.at(0, -1, 0)),
        0.5 * (stencil.at(0, 0, 1) - stencil.at(0, 0, -1)),
    ];
    let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if norm < 1e-12 {
        return fallback;
    }
    [-g[0] / norm, -g[1] / norm, -g[2] / norm]
}

/// Replaces the populations entering an interface cell from the gas side.
///
/// A link is reconstructed when it points into the liquid (`c_i . n <= 0`) or
/// its source is gas, unless it is `blocked` (bounced back from a wall or
/// body). The counterpart is the incoming population along the reversed
/// link; if that link is reconstructed too, the cell's own outgoing
/// population is used instead.
pub fn reconstruct_interface_pdfs(
    f: &mut [f64; Q],
    outgoing: &[f64; Q],
    rho_gas: f64,
    u: [f64; 3],
    normal: [f64; 3],
    missing: &[bool; Q],
    blocked: &[bool; Q],
) {
    let mut mark = [false; Q];
    for i in 1..Q {
        mark[i] = !blocked[i] && (missing[i] || cdot(i, normal) <= 0.0);
    }
    let feq = equilibrium_unchecked(rho_gas, u);
    let incoming = *f;
    for i in 1..Q {
        if mark[i] {
            let o = OPP[i];
            let partner = if mark[o] { outgoing[o] } else { incoming[o] };
            f[i] = feq[i] + feq[o] - partner;
        }
    }
}

/// How excess mass is apportioned among interface neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcessWeighting {
    /// Cell filled up: favour neighbors along the normal (towards gas).
    Filled([u64; 3]),
    /// Cell emptied: favour neighbors against the normal.
    Emptied([u64; 3]),
    Uniform,
}

impl ExcessWeighting {
    pub fn filled(n: [f64; 3]) -> Self {
        ExcessWeighting::Filled(n.map(f64::to_bits))
    }

    pub fn emptied(n: [f64; 3]) -> Self {
        ExcessWeighting::Emptied(n.map(f64::to_bits))
    }

    fn weight(&self, i: usize) -> f64 {
        match self {
            ExcessWeighting::Filled(n) => cdot(i, n.map(f64::from_bits)).max(0.0),
            ExcessWeighting::Emptied(n) => (-cdot(i, n.map(f64::from_bits))).max(0.0),
            ExcessWeighting::Uniform => 1.0,
        }
    }
}

impl Simulation {
    /// Hands `excess` mass from `idx` to its interface neighbors. Returns the
    /// part that found no receiver; it is booked on the residue accumulator.
    pub fn distribute_excess_mass(&mut self, idx: CellIdx, excess: f64, weighting: ExcessWeighting) -> f64 {
        if excess == 0.0 {
            return 0.0;
        }
        let mut recv: [(CellIdx, f64); Q] = [(0, 0.0); Q];
        let mut count = 0;
        let mut total = 0.0;
        for i in 1..Q {
            if let Neighbor::Cell(n) = self.topo.neighbor(idx, i) {
                if self.cells.kind[n] == CellKind::Interface {
                    let w = weighting.weight(i);
                    recv[count] = (n, w);
                    total += w;
                    count += 1;
                }
            }
        }
        if count == 0 {
            self.mass_residue += excess;
            return excess;
        }
        if total <= 0.0 {
            for r in recv.iter_mut().take(count) {
                r.1 = 1.0;
            }
            total = count as f64;
        }
        for &(n, w) in recv.iter().take(count) {
            self.cells.mass[n] += excess * w / total;
            self.cells.fill[n] = self.cells.mass[n] / self.rho[n];
        }
        0.0
    }

    fn normal_at(&self, idx: CellIdx) -> [f64; 3] {
        surface_normal(&FillStencil::gather(&self.topo, &self.cells, idx), self.params.up())
    }

    /// Interface cells crossing the fill thresholds become liquid or gas;
    /// neighbors are converted to interface to keep the layer closed and the
    /// leftover mass is redistributed.
    /// A detached interface cell. Nothing slows its fall, so it would
    /// accelerate until the lattice gives out.
    fn is_droplet(&self, idx: CellIdx) -> bool {
        !(1..Q).any(|i| match self.topo.neighbor(idx, i) {
            Neighbor::Cell(m) => matches!(self.cells.kind[m], CellKind::Liquid | CellKind::Obstacle),
            Neighbor::Wall(_) => true,
        })
    }

    pub fn convert_cells(&mut self) -> Result<ConversionLog> {
        let eps = self.params.epsilon;
        let n = self.dims().len();
        let mut to_liquid = Vec::new();
        let mut to_gas = Vec::new();
        for idx in 0..n {
            if self.cells.kind[idx] == CellKind::Interface {
                let phi = self.cells.fill[idx];
                if phi >= 1.0 + eps {
                    to_liquid.push(idx);
                } else if phi <= -eps || (self.params.remove_droplets && self.is_droplet(idx)) {
                    to_gas.push(idx);
                }
            }
        }
        let mut log = ConversionLog::default();
        if to_liquid.is_empty() && to_gas.is_empty() {
            return Ok(log);
        }

        // resolve: a filling cell keeps its emptying neighbors as interface
        let mut keep = vec![false; to_gas.len()];
        {
            let filling: std::collections::HashSet<CellIdx> = to_liquid.iter().copied().collect();
            for (k, &idx) in to_gas.iter().enumerate() {
                keep[k] = (1..Q).any(|i| matches!(self.topo.neighbor(idx, i), Neighbor::Cell(m) if filling.contains(&m)));
            }
        }
        let to_gas: Vec<CellIdx> = to_gas.into_iter().zip(keep).filter(|(_, k)| !k).map(|(i, _)| i).collect();

        let normals_l: Vec<[f64; 3]> = to_liquid.iter().map(|&i| self.normal_at(i)).collect();
        let normals_g: Vec<[f64; 3]> = to_gas.iter().map(|&i| self.normal_at(i)).collect();

        // new interface cells around filled cells
        let mut from_gas = Vec::new();
        for &idx in &to_liquid {
            for i in 1..Q {
                if let Neighbor::Cell(m) = self.topo.neighbor(idx, i) {
                    if self.cells.kind[m] == CellKind::Gas && !from_gas.contains(&m) {
                        from_gas.push(m);
                    }
                }
            }
        }
        from_gas.sort_unstable();
        // average velocity of fluid neighbors, taken before any state changes
        let init: Vec<[f64; 3]> = from_gas.iter().map(|&m| self.mean_fluid_velocity(m)).collect();
        for (&m, u) in from_gas.iter().zip(init) {
            let rho_g = self.params.rho_gas;
            self.set_cell(m, CellKind::Interface, 0.0, rho_g, u);
        }

        for &idx in &to_liquid {
            self.cells.kind[idx] = CellKind::Liquid;
        }
        let mut from_liquid = Vec::new();
        for &idx in &to_gas {
            self.cells.kind[idx] = CellKind::Gas;
            for i in 1..Q {
                if let Neighbor::Cell(m) = self.topo.neighbor(idx, i) {
                    if self.cells.kind[m] == CellKind::Liquid && !from_liquid.contains(&m) {
                        from_liquid.push(m);
                    }
                }
            }
        }
        from_liquid.sort_unstable();
        for &m in &from_liquid {
            self.cells.kind[m] = CellKind::Interface;
            self.cells.fill[m] = 1.0;
            self.cells.mass[m] = self.rho[m];
        }

        for (&idx, nrm) in to_liquid.iter().zip(normals_l) {
            let excess = self.cells.mass[idx] - self.rho[idx];
            self.cells.mass[idx] = self.rho[idx];
            self.cells.fill[idx] = 1.0;
            self.distribute_excess_mass(idx, excess, ExcessWeighting::filled(nrm));
        }
        for (&idx, nrm) in to_gas.iter().zip(normals_g) {
            let excess = self.cells.mass[idx];
            self.cells.mass[idx] = 0.0;
            self.cells.fill[idx] = 0.0;
            self.distribute_excess_mass(idx, excess, ExcessWeighting::emptied(nrm));
        }

        for &idx in to_liquid.iter().chain(&to_gas) {
            for i in 1..Q {
                if let Neighbor::Cell(m) = self.topo.neighbor(idx, i) {
                    if self.cells.kind[m] == CellKind::Liquid && self.touches(m, CellKind::Gas) {
                        return Err(Error::Consistency {
                            step: self.step,
                            cell: self.dims().coords(m),
                            message: "conversion left a liquid cell next to gas".into(),
                        });
                    }
                }
            }
        }

        log.interface_to_liquid = to_liquid;
        log.interface_to_gas = to_gas;
        log.gas_to_interface = from_gas;
        log.liquid_to_interface = from_liquid;
        Ok(log)
    }

    /// Mean cached velocity over liquid and interface neighbors.
    pub(crate) fn mean_fluid_velocity(&self, idx: CellIdx) -> [f64; 3] {
        let mut u = [0.0; 3];
        let mut k = 0usize;
        for i in 1..Q {
            if let Neighbor::Cell(m) = self.topo.neighbor(idx, i) {
                if self.cells.kind[m].is_fluid() {
                    for a in 0..3 {
                        u[a] += self.vel[m][a];
                    }
                    k += 1;
                }
            }
        }
        if k > 0 {
            u.map(|v| v / k as f64)
        } else {
            u
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundaries, Dims};
    use crate::lattice::{equilibrium, momentum_flux, W};
    use crate::sim::SimParams;
    use approx::assert_relative_eq;

    #[test]
    fn mass_exchange_cases() {
        assert_eq!(mass_exchange(CellKind::Gas, 0.5, 0.0, 0.3, 0.1), 0.0);
        assert_eq!(mass_exchange(CellKind::Obstacle, 0.5, 0.0, 0.3, 0.1), 0.0);
        assert_eq!(mass_exchange(CellKind::Liquid, 0.5, 1.0, 0.05, 0.05), 0.0);
        assert_relative_eq!(mass_exchange(CellKind::Interface, 1.0, 1.0, 0.06, 0.05), 0.01, epsilon = 1e-16);
        // antisymmetric seen from the other side of the link
        let a = mass_exchange(CellKind::Interface, 0.3, 0.7, 0.061, 0.049);
        let b = mass_exchange(CellKind::Interface, 0.7, 0.3, 0.049, 0.061);
        assert_eq!(a, -b);
    }

    #[test]
    fn planar_normals() {
        let s = FillStencil::from_fn(|_, _, dz| match dz {
            -1 => 1.0,
            0 => 0.5,
            _ => 0.0,
        });
        assert_eq!(surface_normal(&s, [1.0, 0.0, 0.0]), [0.0, 0.0, 1.0]);
        let m = FillStencil::from_fn(|_, _, dz| match dz {
            1 => 1.0,
            0 => 0.5,
            _ => 0.0,
        });
        assert_eq!(surface_normal(&m, [1.0, 0.0, 0.0]), [0.0, 0.0, -1.0]);
    }

    #[test]
    fn diagonal_normal() {
        // liquid where x + z < 0, center on the surface
        let s = FillStencil::from_fn(|dx, _, dz| {
            let v = dx + dz;
            if v < 0 {
                1.0
            } else if v == 0 {
                0.5
            } else {
                0.0
            }
        });
        let n = surface_normal(&s, [0.0, 0.0, 1.0]);
        let r = 1.0 / 2f64.sqrt();
        assert_relative_eq!(n[0], r, epsilon = 1e-12);
        assert_relative_eq!(n[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(n[2], r, epsilon = 1e-12);
    }

    #[test]
    fn flat_fill_uses_fallback() {
        let s = FillStencil::from_fn(|_, _, _| 0.5);
        assert_eq!(surface_normal(&s, [0.0, 0.0, 1.0]), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn reconstruction_fixed_point() {
        let u = [0.01, 0.0, -0.02];
        let feq = equilibrium(1.0, u).unwrap();
        let mut f = feq;
        let out = feq;
        let n = [0.2, 0.3, 0.93];
        reconstruct_interface_pdfs(&mut f, &out, 1.0, u, n, &[false; Q], &[false; Q]);
        for i in 0..Q {
            assert_relative_eq!(f[i], feq[i], epsilon = 1e-16);
        }
    }

    #[test]
    fn reconstruction_imposes_gas_stress() {
        // generic normal: no link is tangential
        let n = {
            let v = [0.31f64, -0.47, 0.83];
            let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.map(|c| c / l)
        };
        for i in 1..Q {
            assert!(cdot(i, n).abs() > 1e-3);
        }
        let rho_g = 0.98;
        for u in [[0.0; 3], [0.02, -0.01, 0.03]] {
            let mut f = [0.0; Q];
            for i in 0..Q {
                f[i] = W[i] * (1.0 + 0.1 * ((i * 7 % 5) as f64 - 2.0));
            }
            let out = f.map(|v| v * 0.9);
            reconstruct_interface_pdfs(&mut f, &out, rho_g, u, n, &[false; Q], &[false; Q]);
            let pi = momentum_flux(&f);
            let target = momentum_flux(&equilibrium(rho_g, u).unwrap());
            // the rest population does not enter the second moment
            for a in 0..3 {
                for b in 0..3 {
                    assert_relative_eq!(pi[a][b], target[a][b], epsilon = 1e-14);
                }
            }
            if u == [0.0; 3] {
                let p = (pi[0][0] + pi[1][1] + pi[2][2]) / 3.0;
                assert_relative_eq!(p, rho_g / 3.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn blocked_links_survive_reconstruction() {
        let mut f = [0.1; Q];
        let out = [0.05; Q];
        let mut blocked = [false; Q];
        blocked[6] = true;
        reconstruct_interface_pdfs(&mut f, &out, 1.0, [0.0; 3], [0.0, 0.0, 1.0], &[false; Q], &blocked);
        assert_eq!(f[6], 0.1);
        // c_5 . n > 0 and not missing: untouched
        assert_eq!(f[5], 0.1);
        assert!(f[1] != 0.1);
    }

    fn small_sim() -> Simulation {
        let p = SimParams { gravity: [0.0, 0.0, -1e-4], ..Default::default() };
        let mut sim = Simulation::new(Dims::new(5, 5, 6), Boundaries::walls(), p).unwrap();
        sim.init_basin(3.5, 0.0).unwrap();
        sim
    }

    #[test]
    fn excess_mass_bookkeeping() {
        let mut sim = small_sim();
        let d = sim.dims();
        let before = sim.mass_balance();
        let idx = d.idx(2, 2, 3);
        assert_eq!(sim.cells.kind[idx], CellKind::Interface);
        assert_eq!(sim.distribute_excess_mass(idx, 0.0, ExcessWeighting::Uniform), 0.0);
        sim.cells.mass[idx] += 0.2;
        sim.distribute_excess_mass(idx, -0.2, ExcessWeighting::filled([0.0, 0.0, 1.0]));
        assert_relative_eq!(sim.mass_balance(), before, epsilon = 1e-12 * before);
    }

    #[test]
    fn lone_receiver_gets_everything() {
        let mut sim = small_sim();
        let d = sim.dims();
        // isolate: make every neighbor gas except one interface cell
        let idx = d.idx(2, 2, 4);
        let target = d.idx(3, 2, 4);
        for i in 1..Q {
            if let Neighbor::Cell(m) = sim.topo.neighbor(idx, i) {
                let rg = sim.params.rho_gas;
                sim.set_cell(m, CellKind::Gas, 0.0, rg, [0.0; 3]);
            }
        }
        sim.set_cell(target, CellKind::Interface, 0.3, 1.0, [0.0; 3]);
        let m0 = sim.cells.mass[target];
        let left = sim.distribute_excess_mass(idx, 0.05, ExcessWeighting::Uniform);
        assert_eq!(left, 0.0);
        assert_relative_eq!(sim.cells.mass[target], m0 + 0.05, epsilon = 1e-16);
        // no receiver at all: residue takes it
        sim.set_cell(target, CellKind::Gas, 0.0, 1.0, [0.0; 3]);
        let r0 = sim.mass_residue;
        assert_eq!(sim.distribute_excess_mass(idx, 0.05, ExcessWeighting::Uniform), 0.05);
        assert_relative_eq!(sim.mass_residue, r0 + 0.05);
    }

    #[test]
    fn no_threshold_no_conversion() {
        let mut sim = small_sim();
        let kinds = sim.cells.kind.clone();
        let mass = sim.cells.mass.clone();
        let log = sim.convert_cells().unwrap();
        assert!(log.is_empty());
        assert_eq!(kinds, sim.cells.kind);
        assert_eq!(mass, sim.cells.mass);
    }

    #[test]
    fn overfull_interface_becomes_liquid() {
        let mut sim = small_sim();
        let d = sim.dims();
        let idx = d.idx(2, 2, 3);
        let rho = sim.rho[idx];
        sim.cells.mass[idx] = 1.02 * rho;
        sim.cells.fill[idx] = 1.02;
        let before = sim.mass_balance();
        let log = sim.convert_cells().unwrap();
        assert_eq!(log.interface_to_liquid, vec![idx]);
        assert_eq!(sim.cells.kind[idx], CellKind::Liquid);
        let above = d.idx(2, 2, 4);
        assert!(log.gas_to_interface.contains(&above));
        assert_eq!(sim.cells.kind[above], CellKind::Interface);
        // received part of the excess on top of its zero initial fill
        assert!(sim.cells.fill[above] > 0.0);
        sim.check_closed_interface().unwrap();
        assert_relative_eq!(sim.mass_balance(), before, epsilon = 1e-12 * before);
    }

    #[test]
    fn emptied_interface_becomes_gas() {
        let mut sim = small_sim();
        let d = sim.dims();
        let idx = d.idx(2, 2, 3);
        sim.cells.mass[idx] = -0.02;
        sim.cells.fill[idx] = -0.02 / sim.rho[idx];
        let before = sim.mass_balance();
        let log = sim.convert_cells().unwrap();
        assert_eq!(log.interface_to_gas, vec![idx]);
        assert!(log.liquid_to_interface.contains(&d.idx(2, 2, 2)));
        sim.check_closed_interface().unwrap();
        assert_relative_eq!(sim.mass_balance(), before, epsilon = 1e-12 * before);
    }

    #[test]
    fn detached_droplet_is_emptied() {
        let tall = |remove_droplets| {
            let p = SimParams { gravity: [0.0, 0.0, -1e-4], remove_droplets, ..Default::default() };
            let mut sim = Simulation::new(Dims::new(6, 6, 10), Boundaries::walls(), p).unwrap();
            sim.init_basin(3.5, 0.0).unwrap();
            sim
        };
        let mut sim = tall(true);
        let d = sim.dims();
        let drop = [d.idx(2, 2, 7), d.idx(2, 3, 7)];
        for &i in &drop {
            sim.set_cell(i, CellKind::Interface, 0.6, 1.0, [0.0, 0.0, -0.05]);
        }
        let before = sim.mass_balance();
        let log = sim.convert_cells().unwrap();
        assert_eq!(log.interface_to_gas, drop.to_vec());
        assert!(drop.iter().all(|&i| sim.cells.kind[i] == CellKind::Gas));
        assert_relative_eq!(sim.mass_balance(), before, epsilon = 1e-12 * before);

        let mut keep = tall(false);
        for &i in &drop {
            keep.set_cell(i, CellKind::Interface, 0.6, 1.0, [0.0; 3]);
        }
        assert!(keep.convert_cells().unwrap().is_empty());
    }
}
