//! Initial data, velocity fields and exact solutions of the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::advect::ScenarioField;
use crate::norms::Sample;

fn length(x: [f64; 2]) -> f64 {
    x[0].hypot(x[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Signed distance of Zalesak's slotted disk, positive inside the body.
/// A line-by-line port of the reference listing.
pub fn zalesak_initial_data(x: [f64; 2]) -> f64 {
    let a = [0.0, 0.0];
    let b = [0.0, 0.25];
    let c = [-0.025, 0.35];
    let d = [0.025, 0.35];
    let r = 0.15;
    let phi = (0.025f64 / 0.15).asin();
    let e = [-0.025, 0.25 - r * phi.cos()];
    let f = [0.025, 0.25 - r * phi.cos()];

    let is_in_cone = |x: [f64; 2]| {
        let xb = sub(x, b);
        let ab = sub(a, b);
        ((xb[0] * ab[0] + xb[1] * ab[1]) / (length(xb) * length(ab))).acos() < phi
    };
    let is_in_box = |x: [f64; 2]| x[0] > c[0] && x[0] < d[0] && x[1] < d[1];

    if length(sub(x, b)) < r {
        if is_in_box(x) {
            if x[1] < f[1] {
                -length(sub(x, e)).min(length(sub(x, f)))
            } else {
                -(x[0] - e[0]).min(f[0] - x[0]).min(c[1] - x[1])
            }
        } else if x[1] > d[1] {
            let dist = length(sub(x, c)).min(length(sub(x, d))).min(r - length(sub(x, b)));
            if c[0] < x[0] && x[0] < d[0] {
                dist.min(x[1] - c[1])
            } else {
                dist
            }
        } else if x[0] < b[0] {
            (c[0] - x[0]).min(r - length(sub(x, b)))
        } else {
            (x[0] - d[0]).min(r - length(sub(x, b)))
        }
    } else if is_in_cone(x) {
        -length(sub(x, e)).min(length(sub(x, f)))
    } else {
        -(length(sub(x, b)) - r)
    }
}

/// Area of the slotted disk `{u₀ > 0}`: the disk minus the slot.
pub fn zalesak_area() -> f64 {
    let r: f64 = 0.15;
    let w: f64 = 0.025;
    let phi = (w / r).asin();
    // slot: rectangle from the chord at the bottom up to y = 0.35, clipped to the disk
    let y_bottom = 0.25 - r * phi.cos();
    let rect = 2.0 * w * (0.35 - y_bottom);
    // circular segment below the chord of half-width w
    let segment = r * r * phi - w * r * phi.cos();
    PI * r * r - rect - segment
}

/// Vorticity `100 max{1 − 2|x|, 0}` of the steady disc flow.
pub fn disc_vorticity(x: &[f64; 2]) -> f64 {
    100.0 * (1.0 - 2.0 * x[0].hypot(x[1])).max(0.0)
}

/// Azimuthal speed `u_θ(r) = r⁻¹ ∫₀^r ω(s) s ds` of the disc flow.
pub fn disc_azimuthal_speed(r: f64) -> f64 {
    if r <= 0.5 {
        100.0 * (r / 2.0 - 2.0 * r * r / 3.0)
    } else {
        100.0 / (24.0 * r)
    }
}

/// The steady, divergence-free velocity induced by [`disc_vorticity`].
pub fn disc_field() -> ScenarioField<2> {
    ScenarioField::new(Arc::new(|x: &[f64; 2], _| {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = disc_azimuthal_speed(r) / r;
        [-s * x[1], s * x[0]]
    }))
}

/// Smooth Gaussian bump used by the advection convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub width: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Self { center: [0.4, 0.0], width: 0.2 }
    }
}

impl Bump {
    pub fn value(&self, x: &[f64; 2]) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        (-(dx * dx + dy * dy) / (self.width * self.width)).exp()
    }

    pub fn sample(&self, x: &[f64; 2]) -> Sample<2> {
        let v = self.value(x);
        let s = -2.0 * v / (self.width * self.width);
        Sample { value: v, grad: [s * (x[0] - self.center[0]), s * (x[1] - self.center[1])] }
    }

    /// Exact solution under rotation with angular speed `omega` about the
    /// origin: `u(x, t) = u₀(R(−ωt) x)`.
    pub fn rotated(&self, omega: f64, t: f64, x: &[f64; 2]) -> Sample<2> {
        let (s, c) = (omega * t).sin_cos();
        let y = [c * x[0] + s * x[1], -s * x[0] + c * x[1]];
        let g = self.sample(&y);
        // ∇_x = R(ωt) ∇_y
        Sample { value: g.value, grad: [c * g.grad[0] - s * g.grad[1], s * g.grad[0] + c * g.grad[1]] }
    }
}

/// `u₀ = (sin 2πx₁ sin 2πx₂, cos 2πx₁ cos 2πx₂)` of the periodic 2D flow.
pub fn shear_velocity(x: &[f64; 2]) -> [f64; 2] {
    let (s0, c0) = (2.0 * PI * x[0]).sin_cos();
    let (s1, c1) = (2.0 * PI * x[1]).sin_cos();
    [s0 * s1, c0 * c1]
}

/// `ω₀ = ∂₁u₂ − ∂₂u₁ = −4π sin 2πx₁ cos 2πx₂`.
pub fn shear_vorticity(x: &[f64; 2]) -> f64 {
    -4.0 * PI * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
}

/// Exact velocity `e^{−8π²νt} u₀` with gradients, one sample per component.
pub fn shear_exact(nu: f64, t: f64, x: &[f64; 2]) -> [Sample<2>; 2] {
    let a = (-8.0 * PI * PI * nu * t).exp();
    let k = 2.0 * PI;
    let (s0, c0) = (k * x[0]).sin_cos();
    let (s1, c1) = (k * x[1]).sin_cos();
    [
        Sample { value: a * s0 * s1, grad: [a * k * c0 * s1, a * k * s0 * c1] },
        Sample { value: a * c0 * c1, grad: [-a * k * s0 * c1, -a * k * c0 * s1] },
    ]
}

/// ABC velocity `(sin x₃ + cos x₂, sin x₁ + cos x₃, sin x₂ + cos x₁)`; it is
/// its own curl.
pub fn abc_velocity(x: &[f64; 3]) -> [f64; 3] {
    [x[2].sin() + x[1].cos(), x[0].sin() + x[2].cos(), x[1].sin() + x[0].cos()]
}

/// Exact velocity `e^{−νt} u₀` with gradients.
pub fn abc_exact(nu: f64, t: f64, x: &[f64; 3]) -> [Sample<3>; 3] {
    let a = (-nu * t).exp();
    let u = abc_velocity(x);
    [
        Sample { value: a * u[0], grad: [0.0, -a * x[1].sin(), a * x[2].cos()] },
        Sample { value: a * u[1], grad: [a * x[0].cos(), 0.0, -a * x[2].sin()] },
        Sample { value: a * u[2], grad: [-a * x[0].sin(), a * x[1].cos(), 0.0] },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zalesak_listing_values() {
        assert!((zalesak_initial_data([0.0, 0.25]) + 0.025).abs() < 1e-15);
        assert!((zalesak_initial_data([0.45, 0.25]) + 0.30).abs() < 1e-15);
        // frozen from executing the listing: outside the disk, inside the cone
        let v = zalesak_initial_data([0.0, 0.05]);
        let phi = (0.025f64 / 0.15).asin();
        let ey = 0.25 - 0.15 * phi.cos();
        assert!((v + (0.025f64).hypot(0.05 - ey)).abs() < 1e-15);
        assert!((v + 0.057_786).abs() < 1e-6);
    }

    #[test]
    fn zalesak_signs() {
        assert!(zalesak_initial_data([0.1, 0.25]) > 0.0);
        assert!(zalesak_initial_data([0.0, 0.3]) < 0.0);
        assert!(zalesak_initial_data([0.0, 0.39]) > 0.0);
        assert!(zalesak_initial_data([0.3, -0.3]) < 0.0);
    }

    #[test]
    fn zalesak_area_matches_fine_count() {
        let n = 2000;
        let h = 0.4 / n as f64;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = [-0.2 + (i as f64 + 0.5) * h, 0.05 + (j as f64 + 0.5) * h];
                if zalesak_initial_data(x) > 0.0 {
                    count += 1;
                }
            }
        }
        let area = count as f64 * h * h;
        assert!((area - zalesak_area()).abs() < 1e-4, "{area} vs {}", zalesak_area());
    }

    #[test]
    fn disc_speed_at_half_radius() {
        assert!((disc_azimuthal_speed(0.5) - 25.0 / 3.0).abs() < 1e-12);
        // continuous across the support edge
        assert!((disc_azimuthal_speed(0.5 + 1e-12) - 25.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn disc_speed_integrates_vorticity() {
        // circulation 2π r u_θ(r) equals ∫_{|x|<r} ω
        let r = 0.37;
        let m = 4000;
        let ds = r / m as f64;
        let mut total = 0.0;
        for i in 0..m {
            let s = (i as f64 + 0.5) * ds;
            total += disc_vorticity(&[s, 0.0]) * 2.0 * PI * s * ds;
        }
        assert!((total - 2.0 * PI * r * disc_azimuthal_speed(r)).abs() < 1e-5 * total);
    }

    #[test]
    fn shear_vorticity_is_curl() {
        let x = [0.13, 0.71];
        let e = 1e-6;
        let d1u2 = (shear_velocity(&[x[0] + e, x[1]])[1] - shear_velocity(&[x[0] - e, x[1]])[1]) / (2.0 * e);
        let d2u1 = (shear_velocity(&[x[0], x[1] + e])[0] - shear_velocity(&[x[0], x[1] - e])[0]) / (2.0 * e);
        assert!((d1u2 - d2u1 - shear_vorticity(&x)).abs() < 1e-6);
    }

    #[test]
    fn abc_is_beltrami() {
        let x = [0.4, 2.2, 5.1];
        let s = abc_exact(0.0, 0.0, &x);
        let g = |a: usize, b: usize| s[a].grad[b];
        let curl = [g(2, 1) - g(1, 2), g(0, 2) - g(2, 0), g(1, 0) - g(0, 1)];
        let u = abc_velocity(&x);
        for k in 0..3 {
            assert!((curl[k] - u[k]).abs() < 1e-14);
        }
        let e = 1e-6;
        for a in 0..3 {
            for b in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[b] += e;
                xm[b] -= e;
                let fd = (abc_velocity(&xp)[a] - abc_velocity(&xm)[a]) / (2.0 * e);
                assert!((fd - g(a, b)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bump_rotation_gradient() {
        let b = Bump::default();
        let x = [0.1, 0.35];
        let s = b.rotated(2.0 * PI, 0.3, &x);
        let e = 1e-6;
        let fx = (b.rotated(2.0 * PI, 0.3, &[x[0] + e, x[1]]).value - b.rotated(2.0 * PI, 0.3, &[x[0] - e, x[1]]).value) / (2.0 * e);
        let fy = (b.rotated(2.0 * PI, 0.3, &[x[0], x[1] + e]).value - b.rotated(2.0 * PI, 0.3, &[x[0], x[1] - e]).value) / (2.0 * e);
        assert!((fx - s.grad[0]).abs() < 1e-7 && (fy - s.grad[1]).abs() < 1e-7);
        // after a full period the bump is back
        assert!((b.rotated(2.0 * PI, 1.0, &x).value - b.value(&x)).abs() < 1e-12);
    }
}
