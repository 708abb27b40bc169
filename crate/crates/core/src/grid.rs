//! Cell indexing, domain faces and the per-cell state arrays.

use crate::error::{Error, Result};
use crate::lattice::{C, Q};

/// Linear cell index, x fastest.
pub type CellIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline(always)]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> CellIdx {
        x + self.nx * (y + self.ny * z)
    }

    #[inline(always)]
    pub fn coords(&self, idx: CellIdx) -> [usize; 3] {
        let x = idx % self.nx;
        let r = idx / self.nx;
        [x, r % self.ny, r / self.ny]
    }

    /// Cell center in lattice coordinates.
    #[inline(always)]
    pub fn center(&self, idx: CellIdx) -> [f64; 3] {
        let [x, y, z] = self.coords(idx);
        [x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5]
    }

    /// Linear index offset of each lattice link for interior cells.
    pub fn link_offsets(&self) -> [isize; Q] {
        let sx = 1isize;
        let sy = self.nx as isize;
        let sz = (self.nx * self.ny) as isize;
        let mut out = [0isize; Q];
        for i in 0..Q {
            out[i] = C[i][0] as isize * sx + C[i][1] as isize * sy + C[i][2] as isize * sz;
        }
        out
    }
}

/// One of the six domain faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn axis(self) -> usize {
        self.index() / 2
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::XMin => "x_min",
            Face::XMax => "x_max",
            Face::YMin => "y_min",
            Face::YMax => "y_max",
            Face::ZMin => "z_min",
            Face::ZMax => "z_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceBoundary {
    /// No-slip wall moving tangentially with the given velocity.
    NoSlip { velocity: [f64; 3] },
    Periodic,
}

impl Default for FaceBoundary {
    fn default() -> Self {
        FaceBoundary::NoSlip { velocity: [0.0; 3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Boundaries {
    pub faces: [FaceBoundary; 6],
}

impl Boundaries {
    pub fn walls() -> Self {
        Self::default()
    }

    pub fn face(&self, f: Face) -> FaceBoundary {
        self.faces[f.index()]
    }

    pub fn set(&mut self, f: Face, b: FaceBoundary) {
        self.faces[f.index()] = b;
    }

    pub fn set_periodic(&mut self, axis: usize) {
        self.faces[2 * axis] = FaceBoundary::Periodic;
        self.faces[2 * axis + 1] = FaceBoundary::Periodic;
    }

    pub fn periodic(&self, axis: usize) -> bool {
        matches!(self.faces[2 * axis], FaceBoundary::Periodic)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            let a = matches!(self.faces[2 * axis], FaceBoundary::Periodic);
            let b = matches!(self.faces[2 * axis + 1], FaceBoundary::Periodic);
            if a != b {
                return Err(Error::Setup(format!(
                    "periodic boundary on axis {axis} must be set on both faces"
                )));
            }
        }
        Ok(())
    }
}

/// Where a lattice link starting at a cell ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(CellIdx),
    Wall(Face),
}

/// Neighbor resolution with periodic wrapping.
#[derive(Debug, Clone)]
pub struct Topology {
    pub dims: Dims,
    pub boundaries: Boundaries,
    offsets: [isize; Q],
}

impl Topology {
    pub fn new(dims: Dims, boundaries: Boundaries) -> Self {
        Self { dims, boundaries, offsets: dims.link_offsets() }
    }

    #[inline(always)]
    pub fn is_interior(&self, x: usize, y: usize, z: usize) -> bool {
        x > 0 && y > 0 && z > 0 && x + 1 < self.dims.nx && y + 1 < self.dims.ny && z + 1 < self.dims.nz
    }

    /// Neighbor of cell `(x, y, z)` along `dir * C[i]`, `dir` being +1 or -1.
    #[inline]
    pub fn neighbor_xyz(&self, x: usize, y: usize, z: usize, i: usize, dir: i32) -> Neighbor {
        let d = self.dims;
        if self.is_interior(x, y, z) {
            let off = self.offsets[i] * dir as isize;
            return Neighbor::Cell((d.idx(x, y, z) as isize + off) as usize);
        }
        let p = [x as i64, y as i64, z as i64];
        let n = [d.nx as i64, d.ny as i64, d.nz as i64];
        let mut q = [0i64; 3];
        for k in 0..3 {
            let mut v = p[k] + (C[i][k] * dir) as i64;
            if v < 0 {
                if self.boundaries.periodic(k) {
                    v += n[k];
                } else {
                    return Neighbor::Wall(Face::ALL[2 * k]);
                }
            } else if v >= n[k] {
                if self.boundaries.periodic(k) {
                    v -= n[k];
                } else {
                    return Neighbor::Wall(Face::ALL[2 * k + 1]);
                }
            }
            q[k] = v;
        }
        Neighbor::Cell(d.idx(q[0] as usize, q[1] as usize, q[2] as usize))
    }

    #[inline]
    pub fn neighbor(&self, idx: CellIdx, i: usize) -> Neighbor {
        let [x, y, z] = self.dims.coords(idx);
        self.neighbor_xyz(x, y, z, i, 1)
    }

    /// The cell a population arriving along `i` comes from.
    #[inline]
    pub fn source(&self, idx: CellIdx, i: usize) -> Neighbor {
        let [x, y, z] = self.dims.coords(idx);
        self.neighbor_xyz(x, y, z, i, -1)
    }

    /// Velocity of a wall face (zero for periodic faces).
    pub fn wall_velocity(&self, f: Face) -> [f64; 3] {
        match self.boundaries.face(f) {
            FaceBoundary::NoSlip { velocity } => velocity,
            FaceBoundary::Periodic => [0.0; 3],
        }
    }

    /// Offset from `a` to `b` using the minimum image on periodic axes.
    pub fn displacement(&self, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        let n = self.dims.as_array();
        let mut d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        for k in 0..3 {
            if self.boundaries.periodic(k) {
                let l = n[k] as f64;
                d[k] -= l * (d[k] / l).round();
            }
        }
        d
    }
}

/// Cell state tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum CellKind {
    Liquid,
    Interface,
    Gas,
    Obstacle,
}

impl CellKind {
    pub fn is_fluid(self) -> bool {
        matches!(self, CellKind::Liquid | CellKind::Interface)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            CellKind::Liquid => "liquid",
            CellKind::Interface => "interface",
            CellKind::Gas => "gas",
            CellKind::Obstacle => "obstacle",
        }
    }
}

/// Body id stored for non-obstacle cells.
pub const NO_BODY: u32 = u32::MAX;

/// Per-cell state tags, fill levels and liquid mass.
#[derive(Debug, Clone)]
pub struct CellStateField {
    pub kind: Vec<CellKind>,
    pub owner: Vec<u32>,
    pub fill: Vec<f64>,
    pub mass: Vec<f64>,
}

impl CellStateField {
    pub fn new(n: usize, kind: CellKind) -> Self {
        Self {
            kind: vec![kind; n],
            owner: vec![NO_BODY; n],
            fill: vec![if kind == CellKind::Liquid { 1.0 } else { 0.0 }; n],
            mass: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }

    pub fn count(&self, k: CellKind) -> usize {
        self.kind.iter().filter(|&&c| c == k).count()
    }
}

/// Double-buffered populations, cell-major with 19 values per cell.
#[derive(Debug, Clone)]
pub struct PdfField {
    pub src: Vec<f64>,
    pub dst: Vec<f64>,
}

impl PdfField {
    pub fn new(n: usize) -> Self {
        Self { src: vec![0.0; n * Q], dst: vec![0.0; n * Q] }
    }

    #[inline(always)]
    pub fn cell(&self, idx: CellIdx) -> &[f64; Q] {
        self.src[idx * Q..(idx + 1) * Q].try_into().unwrap()
    }

    #[inline(always)]
    pub fn cell_mut(&mut self, idx: CellIdx) -> &mut [f64; Q] {
        (&mut self.src[idx * Q..(idx + 1) * Q]).try_into().unwrap()
    }

    pub fn swap(&mut self) {
        std::mem::swap(&mut self.src, &mut self.dst);
    }
}
