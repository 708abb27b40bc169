//! Analytic statics of floating cuboids: buoyancy, metacentric height and
//! righting moments for wall-sided heel, plus a brute-force equilibrium search
//! on the 2-D cross-section.

use crate::error::{Error, Result};

/// A homogeneous floating box. `b` is the width across the heel axis, `h` the
/// height and `l` the length along the heel axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloatingCuboid {
    pub b: f64,
    pub h: f64,
    pub l: f64,
    pub rho_s: f64,
    pub rho: f64,
    pub g: f64,
}

impl FloatingCuboid {
    pub fn new(b: f64, h: f64, l: f64, rho_s: f64, g: f64) -> Result<Self> {
        let c = Self { b, h, l, rho_s, rho: 1.0, g };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("h", self.h), ("l", self.l), ("rho", self.rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho_s > 0.0 && self.rho_s < 1.0) {
            return Err(Error::InvalidArgument(format!("rho_s must lie in (0, 1), got {}", self.rho_s)));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::InvalidArgument(format!("g must be non-negative, got {}", self.g)));
        }
        Ok(())
    }

    /// Upright draft.
    pub fn draft(&self) -> f64 {
        self.rho_s * self.h
    }

    /// Immersed volume in the upright position.
    pub fn displaced_volume(&self) -> f64 {
        self.b * self.l * self.draft()
    }

    /// Heel angle (degrees) at which the deck edge dips or the bilge emerges,
    /// whichever comes first.
    pub fn wall_sided_limit_deg(&self) -> f64 {
        let d = self.draft();
        let deck = (2.0 * (self.h - d) / self.b).atan();
        let bilge = (2.0 * d / self.b).atan();
        deck.min(bilge).to_degrees()
    }

    fn check_heel(&self, alpha_deg: f64) -> Result<()> {
        let limit = self.wall_sided_limit_deg();
        if !alpha_deg.is_finite() || alpha_deg.abs() >= limit {
            return Err(Error::WallSided { alpha_deg, limit_deg: limit });
        }
        Ok(())
    }
}

/// Distance from the upright buoyancy center to the metacenter of a
/// wall-sided hull heeled by `alpha_deg`.
pub fn scribanti_b0m(waterplane_inertia: f64, volume: f64, alpha_deg: f64) -> f64 {
    let t = alpha_deg.to_radians().tan();
    waterplane_inertia / volume * (1.0 + 0.5 * t * t)
}

/// Checked metacenter distance for a cuboid.
pub fn cuboid_b0m(c: &FloatingCuboid, alpha_deg: f64) -> Result<f64> {
    c.check_heel(alpha_deg)?;
    let inertia = c.l * c.b.powi(3) / 12.0;
    Ok(scribanti_b0m(inertia, c.displaced_volume(), alpha_deg))
}

/// Metacentric height `KB0 + B0M - KG`.
pub fn cuboid_gm(c: &FloatingCuboid, alpha_deg: f64) -> Result<f64> {
    let b0m = cuboid_b0m(c, alpha_deg)?;
    Ok(c.draft() / 2.0 + b0m - c.h / 2.0)
}

/// Upward buoyancy at draft `d`.
pub fn analytic_buoyancy(c: &FloatingCuboid, d: f64) -> Result<f64> {
    if !(0.0..=c.h).contains(&d) {
        return Err(Error::InvalidArgument(format!("draft {d} outside [0, {}]", c.h)));
    }
    Ok(c.rho * c.g * c.b * c.l * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub alpha_deg: f64,
    pub moment: f64,
}

/// Righting moment `rho g V GM(alpha) sin(alpha)` at each heel angle.
pub fn stability_curve(c: &FloatingCuboid, alphas_deg: &[f64]) -> Result<Vec<CurvePoint>> {
    let fb = c.rho * c.g * c.displaced_volume();
    alphas_deg
        .iter()
        .map(|&a| {
            let gm = cuboid_gm(c, a)?;
            Ok(CurvePoint { alpha_deg: a, moment: fb * gm * a.to_radians().sin() })
        })
        .collect()
}

/// A stable floating attitude of the cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeelEquilibrium {
    pub heel_deg: f64,
    /// Depth of the lowest corner below the waterline.
    pub draft: f64,
}

type Pt = [f64; 2];

fn clip_below(poly: &[Pt], level: f64) -> Vec<Pt> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let ina = a[1] <= level;
        let inb = b[1] <= level;
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (level - a[1]) / (b[1] - a[1]);
            out.push([a[0] + t * (b[0] - a[0]), level]);
        }
    }
    out
}

/// Signed area and centroid of a simple polygon.
pub fn polygon_area_centroid(poly: &[Pt]) -> (f64, Pt) {
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let cr = p[0] * q[1] - q[0] * p[1];
        a += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    a *= 0.5;
    if a.abs() < 1e-300 {
        return (0.0, [0.0, 0.0]);
    }
    (a, [cx / (6.0 * a), cy / (6.0 * a)])
}

fn section(b: f64, h: f64, heel_deg: f64) -> [Pt; 4] {
    let (s, c) = heel_deg.to_radians().sin_cos();
    let rot = |x: f64, y: f64| [c * x - s * y, s * x + c * y];
    [rot(-b / 2.0, -h / 2.0), rot(b / 2.0, -h / 2.0), rot(b / 2.0, h / 2.0), rot(-b / 2.0, h / 2.0)]
}

/// Waterline height and horizontal buoyancy-centroid offset (relative to the
/// section center) for a section heeled counter-clockwise by `heel_deg`.
pub fn heeled_section_balance(b: f64, h: f64, rho_s: f64, heel_deg: f64) -> (f64, f64) {
    let poly = section(b, h, heel_deg);
    let target = rho_s * b * h;
    let mut lo = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let mut hi = poly.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (a, _) = polygon_area_centroid(&clip_below(&poly, mid));
        if a < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (b + h) {
            break;
        }
    }
    let level = 0.5 * (lo + hi);
    let (_, cen) = polygon_area_centroid(&clip_below(&poly, level));
    (level, cen[0])
}

/// Stable heel angles in [0°, 90°] of a uniform `b`×`h` section of relative
/// density `rho_s`, found by scanning the buoyancy offset on a 0.01° grid.
/// At a stable angle the offset changes from positive to negative as the heel
/// increases.
pub fn equilibrium_heel_oracle(b: f64, h: f64, rho_s: f64) -> Result<Vec<HeelEquilibrium>> {
    if !(b > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument("section sides must be positive".into()));
    }
    if !(rho_s > 0.0 && rho_s < 1.0) {
        return Err(Error::InvalidArgument(format!("rho_s must lie in (0, 1), got {rho_s}")));
    }
    const STEP: f64 = 0.01;
    let tol = 1e-10 * (b + h);
    let offset = |deg: f64| heeled_section_balance(b, h, rho_s, deg).1;
    let sign = |v: f64| if v > tol { 1 } else if v < -tol { -1 } else { 0 };
    let grid: Vec<f64> = (-1..=9001).map(|k| k as f64 * STEP).collect();
    let vals: Vec<f64> = grid.iter().map(|&a| offset(a)).collect();

    let mut out = Vec::new();
    let mut k = 0;
    while k < grid.len() {
        if sign(vals[k]) != 1 {
            k += 1;
            continue;
        }
        let mut j = k + 1;
        while j < grid.len() && sign(vals[j]) == 0 {
            j += 1;
        }
        if j < grid.len() && sign(vals[j]) == -1 {
            let root = if j == k + 1 {
                let (mut lo, mut hi) = (grid[k], grid[j]);
                for _ in 0..60 {
                    let m = 0.5 * (lo + hi);
                    if offset(m) > 0.0 {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                0.5 * (lo + hi)
            } else {
                0.5 * (grid[k + 1] + grid[j - 1])
            };
            if (0.0..=90.0).contains(&root) {
                let poly = section(b, h, root);
                let (level, _) = heeled_section_balance(b, h, rho_s, root);
                let bottom = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
                out.push(HeelEquilibrium { heel_deg: root, draft: level - bottom });
            }
        }
        k = j;
    }
    Ok(out)
}
