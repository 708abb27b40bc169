//! D3Q19 stencil and the per-cell BGK building blocks.
//!
//! Everything here works on a single cell's 19 populations; the field-wide
//! stream and collide passes live in [`crate::sim`].

use crate::error::{Error, Result};

/// Number of discrete velocities.
pub const Q: usize = 19;

/// Squared lattice speed of sound.
pub const CS2: f64 = 1.0 / 3.0;

/// Lattice velocities: rest, six axis links, twelve diagonals.
pub const C: [[i32; 3]; Q] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

/// Lattice weights.
pub const W: [f64; Q] = [
    1.0 / 3.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

/// Index of the reversed velocity, `C[OPP[i]] == -C[i]`.
pub const OPP: [usize; Q] = [0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17];

/// Velocities as floating point vectors.
pub const CF: [[f64; 3]; Q] = {
    let mut out = [[0.0; 3]; Q];
    let mut i = 0;
    while i < Q {
        out[i] = [C[i][0] as f64, C[i][1] as f64, C[i][2] as f64];
        i += 1;
    }
    out
};

/// Thin handle on the stencil constants, for code that prefers a value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil;

impl Stencil {
    pub fn velocity(self, i: usize) -> [i32; 3] {
        C[i]
    }

    pub fn weight(self, i: usize) -> f64 {
        W[i]
    }

    pub fn opposite(self, i: usize) -> usize {
        OPP[i]
    }

    pub fn speed_of_sound(self) -> f64 {
        CS2.sqrt()
    }
}

#[inline(always)]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
pub fn cdot(i: usize, v: [f64; 3]) -> f64 {
    dot(CF[i], v)
}

/// Macroscopic state of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroState {
    pub rho: f64,
    pub u: [f64; 3],
}

impl MacroState {
    pub fn pressure(&self) -> f64 {
        CS2 * self.rho
    }

    /// Squared Mach number `|u|^2 / c_s^2`.
    pub fn mach2(&self) -> f64 {
        dot(self.u, self.u) / CS2
    }
}

/// Single equilibrium population.
#[inline(always)]
pub fn equilibrium_i(i: usize, rho: f64, u: [f64; 3]) -> f64 {
    let cu = cdot(i, u);
    let uu = dot(u, u);
    W[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * uu)
}

/// Second-order equilibrium for all 19 directions. No input validation.
#[inline]
pub fn equilibrium_unchecked(rho: f64, u: [f64; 3]) -> [f64; Q] {
    let uu = 1.5 * dot(u, u);
    let mut f = [0.0; Q];
    for i in 0..Q {
        let cu = cdot(i, u);
        f[i] = W[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - uu);
    }
    f
}

/// Checked equilibrium: rejects non-finite input, non-positive density and
/// velocities at or above the lattice speed of sound.
pub fn equilibrium(rho: f64, u: [f64; 3]) -> Result<[f64; Q]> {
    if !rho.is_finite() || u.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("equilibrium input".into()));
    }
    if rho <= 0.0 {
        return Err(Error::InvalidArgument(format!("density must be positive, got {rho}")));
    }
    if dot(u, u) >= CS2 {
        return Err(Error::InvalidArgument(format!(
            "velocity {u:?} reaches the lattice speed of sound"
        )));
    }
    Ok(equilibrium_unchecked(rho, u))
}

/// Density and plain first-moment velocity, without validation.
#[inline]
pub fn moments_unchecked(f: &[f64; Q]) -> MacroState {
    let mut rho = 0.0;
    let mut j = [0.0; 3];
    for i in 0..Q {
        rho += f[i];
        j[0] += CF[i][0] * f[i];
        j[1] += CF[i][1] * f[i];
        j[2] += CF[i][2] * f[i];
    }
    MacroState { rho, u: [j[0] / rho, j[1] / rho, j[2] / rho] }
}

/// Density and velocity moments. A non-positive density means the cell is
/// corrupted.
pub fn moments(f: &[f64; Q]) -> Result<MacroState> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pdf moments".into()));
    }
    let m = moments_unchecked(f);
    if m.rho <= 0.0 {
        return Err(Error::InvalidArgument(format!("non-positive cell density {}", m.rho)));
    }
    Ok(m)
}

/// Second moment `sum_i c_i c_i^T f_i`.
pub fn momentum_flux(f: &[f64; Q]) -> [[f64; 3]; 3] {
    let mut pi = [[0.0; 3]; 3];
    for i in 0..Q {
        for a in 0..3 {
            for b in 0..3 {
                pi[a][b] += CF[i][a] * CF[i][b] * f[i];
            }
        }
    }
    pi
}

/// Shear part `S = Pi - rho u u^T - p 1` of the second moment.
pub fn shear_stress(f: &[f64; Q]) -> Result<[[f64; 3]; 3]> {
    let m = moments(f)?;
    let mut s = momentum_flux(f);
    for a in 0..3 {
        for b in 0..3 {
            s[a][b] -= m.rho * m.u[a] * m.u[b];
        }
        s[a][a] -= m.pressure();
    }
    Ok(s)
}

/// Body-force populations for a cell accelerated by `a`.
#[inline]
pub fn force_term(rho: f64, u: [f64; 3], a: [f64; 3]) -> [f64; Q] {
    let mut out = [0.0; Q];
    if a == [0.0; 3] {
        return out;
    }
    for i in 0..Q {
        let cu = cdot(i, u);
        let mut t = 0.0;
        for k in 0..3 {
            t += (3.0 * (CF[i][k] - u[k]) + 9.0 * cu * CF[i][k]) * a[k];
        }
        out[i] = W[i] * rho * t;
    }
    out
}

/// BGK relaxation of one cell in place; returns the pre-collision moments.
///
/// The forcing populations are added so that the cell momentum gains
/// `rho * a` per step.
#[inline]
pub fn collide_cell(f: &mut [f64; Q], omega: f64, a: [f64; 3]) -> MacroState {
    let m = moments_unchecked(f);
    let uu = 1.5 * dot(m.u, m.u);
    let forced = a != [0.0; 3];
    for i in 0..Q {
        let cu = cdot(i, m.u);
        let feq = W[i] * m.rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - uu);
        let mut v = f[i] - omega * (f[i] - feq);
        if forced {
            let mut t = 0.0;
            for k in 0..3 {
                t += (3.0 * (CF[i][k] - m.u[k]) + 9.0 * cu * CF[i][k]) * a[k];
            }
            v += W[i] * m.rho * t;
        }
        f[i] = v;
    }
    m
}

/// Moving-wall bounce-back: the population re-entering along `i` after the
/// population `f_reverse` (travelling along `OPP[i]`) hit the wall.
#[inline(always)]
pub fn apply_noslip(f_reverse: f64, i: usize, u_wall: [f64; 3], rho: f64) -> f64 {
    f_reverse + 6.0 * W[i] * cdot(i, u_wall) * rho
}

/// Kinematic viscosity for a relaxation time.
pub fn viscosity(tau: f64) -> f64 {
    CS2 * (tau - 0.5)
}

/// Relaxation time for a kinematic viscosity.
pub fn relaxation_time(nu: f64) -> f64 {
    nu / CS2 + 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityLevel {
    Pass,
    Warn,
    /// Projected hydrostatic term exceeds `c_s^2` itself.
    Severe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `(l_x, l_y, l_z) . |a|`, the projected hydrostatic density jump.
    pub projected: f64,
    /// `projected / c_s^2`.
    pub ratio: f64,
    pub max_mach2: f64,
    pub level: StabilityLevel,
    pub messages: Vec<String>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.level == StabilityLevel::Pass
    }
}

/// Thresholds for [`check_stability`].
#[derive(Debug, Clone, Copy)]
pub struct StabilityLimits {
    /// Warn when the projected term exceeds this fraction of `c_s^2`.
    pub warn_ratio: f64,
    /// Warn when `|u|^2 / c_s^2` exceeds this.
    pub mach2_warn: f64,
}

impl Default for StabilityLimits {
    fn default() -> Self {
        Self { warn_ratio: 0.1, mach2_warn: 0.01 }
    }
}

/// Incompressibility check relating domain extent, body force and the
/// expected peak velocity.
pub fn check_stability(
    dims: [usize; 3],
    tau: f64,
    gravity: [f64; 3],
    max_velocity: f64,
    limits: StabilityLimits,
) -> StabilityReport {
    let projected: f64 = (0..3).map(|k| dims[k] as f64 * gravity[k].abs()).sum();
    let ratio = projected / CS2;
    let max_mach2 = max_velocity * max_velocity / CS2;
    let mut messages = Vec::new();
    let mut level = StabilityLevel::Pass;
    if ratio >= 1.0 {
        level = StabilityLevel::Severe;
        messages.push(format!(
            "projected hydrostatic term {projected:.4e} exceeds c_s^2 = {CS2:.4e}"
        ));
    } else if ratio > limits.warn_ratio {
        level = StabilityLevel::Warn;
        messages.push(format!(
            "projected hydrostatic term {projected:.4e} above {} c_s^2",
            limits.warn_ratio
        ));
    }
    if max_mach2 > limits.mach2_warn {
        if level == StabilityLevel::Pass {
            level = StabilityLevel::Warn;
        }
        messages.push(format!("expected |u|^2/c_s^2 = {max_mach2:.4e} is not small"));
    }
    if tau <= 0.5 {
        level = StabilityLevel::Severe;
        messages.push(format!("relaxation time {tau} must exceed 1/2"));
    }
    StabilityReport { projected, ratio, max_mach2, level, messages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn stencil_shape() {
        let zero = C.iter().filter(|c| **c == [0, 0, 0]).count();
        let axis = C.iter().filter(|c| c.iter().map(|v| v.abs()).sum::<i32>() == 1).count();
        let diag = C.iter().filter(|c| c.iter().map(|v| v.abs()).sum::<i32>() == 2).count();
        assert_eq!((zero, axis, diag), (1, 6, 12));
        assert_relative_eq!(W.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for i in 0..Q {
            let n2: i32 = C[i].iter().map(|v| v * v).sum();
            let expected = match n2 {
                0 => 1.0 / 3.0,
                1 => 1.0 / 18.0,
                _ => 1.0 / 36.0,
            };
            assert_eq!(W[i], expected);
            for k in 0..3 {
                assert_eq!(C[OPP[i]][k], -C[i][k]);
            }
        }
        assert_relative_eq!(Stencil.speed_of_sound(), 1.0 / 3f64.sqrt());
    }

    #[test]
    fn equilibrium_at_rest_is_weights() {
        let f = equilibrium(1.0, [0.0; 3]).unwrap();
        assert_eq!(f[0], 1.0 / 3.0);
        assert_eq!(f[1], 1.0 / 18.0);
        assert_eq!(f[7], 1.0 / 36.0);
    }

    #[test]
    fn equilibrium_east_value() {
        let f = equilibrium(1.0, [0.1, 0.0, 0.0]).unwrap();
        // w (1 + 3 cu + 4.5 cu^2 - 1.5 u^2) evaluated by hand
        assert_relative_eq!(f[1], (1.0 / 18.0) * (1.0 + 0.3 + 0.045 - 0.015), epsilon = 1e-15);
        assert_relative_eq!(f[1], 0.0738889, epsilon = 1e-7);
    }

    #[test]
    fn equilibrium_rejects_bad_input() {
        assert!(equilibrium(f64::NAN, [0.0; 3]).is_err());
        assert!(equilibrium(1.0, [0.0, f64::INFINITY, 0.0]).is_err());
        assert!(equilibrium(-1.0, [0.0; 3]).is_err());
        assert!(equilibrium(1.0, [0.6, 0.0, 0.0]).is_err());
    }

    #[test]
    fn moments_of_perturbed_rest_state() {
        let mut f = equilibrium(1.0, [0.0; 3]).unwrap();
        f[1] += 0.01;
        f[2] -= 0.01;
        let m = moments(&f).unwrap();
        assert_relative_eq!(m.rho, 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.u[0], 0.02, epsilon = 1e-15);
        assert_eq!(m.u[1], 0.0);
        assert_eq!(m.u[2], 0.0);
        assert_relative_eq!(m.pressure(), 1.0 / 3.0, epsilon = 1e-15);

        // Direct summation oracle for the second moment: the east/west pair
        // contributes c_x^2 (f_E + f_W), which is unchanged by the antisymmetric
        // perturbation, so the tensor stays (1/3) I.
        let pi = momentum_flux(&f);
        let mut brute = [[0.0; 3]; 3];
        for i in 0..Q {
            for a in 0..3 {
                for b in 0..3 {
                    brute[a][b] += (C[i][a] * C[i][b]) as f64 * f[i];
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert_relative_eq!(pi[a][b], brute[a][b], epsilon = 1e-15);
                if a != b {
                    assert_eq!(pi[a][b], 0.0);
                }
            }
            assert_relative_eq!(pi[a][a], 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn moments_reject_corrupted_cell() {
        let f = [-0.01; Q];
        assert!(moments(&f).is_err());
        let mut g = [0.05; Q];
        g[3] = f64::NAN;
        assert!(moments(&g).is_err());
    }

    #[test]
    fn rest_momentum_flux_is_pressure() {
        let pi = momentum_flux(&equilibrium(1.0, [0.0; 3]).unwrap());
        for a in 0..3 {
            for b in 0..3 {
                let e = if a == b { 1.0 / 3.0 } else { 0.0 };
                assert_relative_eq!(pi[a][b], e, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn force_term_values() {
        let g = 7.5e-4;
        let a = [0.0, 0.0, -g];
        let f = force_term(1.0, [0.0; 3], a);
        assert_relative_eq!(f[5], -g / 6.0, epsilon = 1e-18);
        let s: f64 = f.iter().sum();
        assert!(s.abs() < 1e-18);
    }

    #[test]
    fn noslip_values() {
        assert_eq!(apply_noslip(0.3, 1, [0.0; 3], 1.0), 0.3);
        assert_eq!(apply_noslip(0.3, 1, [0.0, 0.2, -0.1], 1.0), 0.3);
        let v = apply_noslip(1.0 / 18.0, 1, [0.01, 0.0, 0.0], 1.0);
        assert_relative_eq!(v, 1.0 / 18.0 + 6.0 / 18.0 * 0.01, epsilon = 1e-16);
        assert_relative_eq!(v, 0.0588889, epsilon = 1e-7);
    }

    #[test]
    fn viscosity_relation() {
        assert_relative_eq!(viscosity(1.0), 1.0 / 6.0, epsilon = 1e-16);
        assert_relative_eq!(relaxation_time(viscosity(0.62)), 0.62, epsilon = 1e-15);
    }

    #[test]
    fn stability_examples() {
        let r = check_stability([1, 1, 40], 1.0, [0.0, 0.0, -7.5e-4], 0.0, Default::default());
        assert_relative_eq!(r.projected, 0.03, epsilon = 1e-15);
        assert!(r.passed());
        let r = check_stability([130, 40, 40], 1.0, [0.0; 3], 0.0, Default::default());
        assert!(r.passed());
        let r = check_stability([1, 1, 1000], 1.0, [0.0, 0.0, -1e-3], 0.0, Default::default());
        assert_relative_eq!(r.projected, 1.0, epsilon = 1e-15);
        assert_eq!(r.level, StabilityLevel::Severe);
        let r = check_stability([1, 1, 200], 1.0, [0.0, 0.0, -1e-3], 0.0, Default::default());
        assert_eq!(r.level, StabilityLevel::Warn);
        let r = check_stability([4, 4, 4], 0.5, [0.0; 3], 0.0, Default::default());
        assert_eq!(r.level, StabilityLevel::Severe);
    }

    #[test]
    fn full_relaxation_yields_equilibrium() {
        let mut f = equilibrium(1.01, [0.02, -0.01, 0.005]).unwrap();
        f[3] += 0.004;
        f[12] -= 0.001;
        let m = moments(&f).unwrap();
        let expected = equilibrium(m.rho, m.u).unwrap();
        collide_cell(&mut f, 1.0, [0.0; 3]);
        for i in 0..Q {
            assert_relative_eq!(f[i], expected[i], epsilon = 1e-16);
        }
    }

    fn admissible() -> impl Strategy<Value = (f64, [f64; 3])> {
        (0.5f64..2.0, -0.15f64..0.15, -0.15f64..0.15, -0.15f64..0.15)
            .prop_map(|(r, a, b, c)| (r, [a, b, c]))
    }

    proptest! {
        #[test]
        fn equilibrium_moment_round_trip((rho, u) in admissible()) {
            let f = equilibrium(rho, u).unwrap();
            let m = moments(&f).unwrap();
            prop_assert!(((m.rho - rho) / rho).abs() < 1e-12);
            for k in 0..3 {
                prop_assert!((m.u[k] - u[k]).abs() < 1e-12 * (1.0 + u[k].abs()));
            }
        }

        #[test]
        fn equilibrium_has_no_shear((rho, u) in admissible()) {
            let s = shear_stress(&equilibrium(rho, u).unwrap()).unwrap();
            for row in s {
                for v in row {
                    prop_assert!(v.abs() < 1e-12 * rho);
                }
            }
        }

        #[test]
        fn force_moments((rho, u) in admissible(), ax in -1e-3f64..1e-3, az in -1e-3f64..1e-3) {
            let a = [ax, 0.0, az];
            let f = force_term(rho, u, a);
            let mut m1 = [0.0; 3];
            for i in 0..Q {
                for k in 0..3 {
                    m1[k] += CF[i][k] * f[i];
                }
            }
            for k in 0..3 {
                prop_assert!((m1[k] - rho * a[k]).abs() < 1e-15);
            }
            let m0: f64 = f.iter().sum();
            prop_assert!(m0.abs() < 1e-15);
        }

        #[test]
        fn equilibrium_is_collision_fixed_point((rho, u) in admissible(), tau in 0.51f64..2.0) {
            let f0 = equilibrium(rho, u).unwrap();
            let mut f = f0;
            let m = collide_cell(&mut f, 1.0 / tau, [0.0; 3]);
            prop_assert!((m.rho - rho).abs() < 1e-12 * rho);
            for i in 0..Q {
                prop_assert!((f[i] - f0[i]).abs() < 1e-12 * f0[i].abs().max(1e-3));
            }
        }

        #[test]
        fn collision_conserves_mass_and_momentum(
            (rho, u) in admissible(),
            tau in 0.51f64..2.0,
            noise in proptest::collection::vec(-1e-3f64..1e-3, Q),
        ) {
            let mut f = equilibrium(rho, u).unwrap();
            for i in 0..Q {
                f[i] += noise[i];
            }
            let before = moments(&f).unwrap();
            collide_cell(&mut f, 1.0 / tau, [0.0; 3]);
            let after = moments(&f).unwrap();
            prop_assert!((after.rho - before.rho).abs() < 1e-13);
            for k in 0..3 {
                prop_assert!((after.rho * after.u[k] - before.rho * before.u[k]).abs() < 1e-13);
            }
        }
    }
}
