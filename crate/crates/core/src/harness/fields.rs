//! Closed-form fields of the numerical experiments.

use std::f64::consts::PI;

use nalgebra::{Point2, Vector2};

/// Taylor-Green vortex with amplitude `e^{−2π²εt}`.
pub fn taylor_green(eps: f64, t: f64, x: &Point2<f64>) -> Vector2<f64> {
    let (sx, cx) = (PI * x.x).sin_cos();
    let (sy, cy) = (PI * x.y).sin_cos();
    Vector2::new(cx * sy, -sx * cy) * (-2.0 * PI * PI * eps * t).exp()
}

/// `curl u = ∂₁u₂ − ∂₂u₁` of the stationary Taylor-Green vortex.
pub fn taylor_green_curl(x: &Point2<f64>) -> f64 {
    -2.0 * PI * (PI * x.x).cos() * (PI * x.y).cos()
}

/// `(u·∇)u` of the stationary Taylor-Green vortex.
pub fn taylor_green_advection(x: &Point2<f64>) -> Vector2<f64> {
    Vector2::new(-0.5 * PI * (2.0 * PI * x.x).sin(), -0.5 * PI * (2.0 * PI * x.y).sin())
}

/// Forcing that makes the stationary vortex an exact solution with zero
/// pressure: `f = (u·∇)u − εΔu`, and `Δu = −2π²u`.
pub fn taylor_green_forcing(eps: f64, x: &Point2<f64>) -> Vector2<f64> {
    taylor_green_advection(x) + 2.0 * PI * PI * eps * taylor_green(0.0, 0.0, x)
}

/// Outward unit normal of the axis-aligned square centered at the origin,
/// chosen by the dominant coordinate.
pub fn square_normal(x: &Point2<f64>) -> Vector2<f64> {
    if x.x.abs() >= x.y.abs() {
        Vector2::new(x.x.signum(), 0.0)
    } else {
        Vector2::new(0.0, x.y.signum())
    }
}

pub fn rotating_hump(x: &Point2<f64>) -> Vector2<f64> {
    let e = x.x.exp();
    let (sx, cx) = (PI * x.x).sin_cos();
    let (sy, cy) = (PI * x.y).sin_cos();
    Vector2::new(-PI * e * cx * sy, PI * e * sx * cy - e * cx * cy)
}

/// Lid profile `v(x₂)` of the cavity forcing.
pub fn lid_profile(y: f64) -> f64 {
    let d = 1.0 - 100.0 * (0.5 - y) * (0.5 - y);
    if d > 0.0 {
        (1.0 - 1.0 / d).exp()
    } else {
        0.0
    }
}

pub fn lid_forcing(x: &Point2<f64>) -> Vector2<f64> {
    Vector2::new(lid_profile(x.y), 0.0)
}

pub fn swirl(x: &Point2<f64>) -> Vector2<f64> {
    let r = x.x.hypot(x.y);
    let th = x.y.atan2(x.x);
    Vector2::new((2.0 * r.cos() - th).sin(), (r.cos() - 2.0 * th).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_advection(u: impl Fn(&Point2<f64>) -> Vector2<f64>, x: &Point2<f64>) -> Vector2<f64> {
        let h = 1e-6;
        let ux = (u(&Point2::new(x.x + h, x.y)) - u(&Point2::new(x.x - h, x.y))) / (2.0 * h);
        let uy = (u(&Point2::new(x.x, x.y + h)) - u(&Point2::new(x.x, x.y - h))) / (2.0 * h);
        let v = u(x);
        ux * v.x + uy * v.y
    }

    fn fd_divergence(u: impl Fn(&Point2<f64>) -> Vector2<f64>, x: &Point2<f64>) -> f64 {
        let h = 1e-6;
        (u(&Point2::new(x.x + h, x.y)).x - u(&Point2::new(x.x - h, x.y)).x + u(&Point2::new(x.x, x.y + h)).y
            - u(&Point2::new(x.x, x.y - h)).y)
            / (2.0 * h)
    }

    #[test]
    fn taylor_green_values() {
        assert_eq!(taylor_green(0.0, 0.0, &Point2::origin()), Vector2::zeros());
        let u = taylor_green(0.1, 0.5, &Point2::new(0.0, 0.5));
        assert!((u.x - (-PI * PI * 0.1).exp()).abs() < 1e-15);
        // squared amplitude gives the energy decay rate 4π²ε
        let a = taylor_green(0.01, 1.0, &Point2::new(0.1, 0.3)).norm_squared() / taylor_green(0.0, 0.0, &Point2::new(0.1, 0.3)).norm_squared();
        assert!((a - (-4.0 * PI * PI * 0.01_f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn advection_matches_finite_differences() {
        let u = |x: &Point2<f64>| taylor_green(0.0, 0.0, x);
        assert!(taylor_green_advection(&Point2::origin()).norm() < 1e-15);
        for p in [Point2::new(0.1, 0.2), Point2::new(-0.7, 0.35), Point2::new(0.9, -0.95)] {
            assert!((taylor_green_advection(&p) - fd_advection(u, &p)).norm() < 1e-7);
        }
    }

    #[test]
    fn curl_matches_finite_differences() {
        let h = 1e-6;
        let p = Point2::new(0.3, -0.4);
        let u = |x: f64, y: f64| taylor_green(0.0, 0.0, &Point2::new(x, y));
        let fd = (u(p.x + h, p.y).y - u(p.x - h, p.y).y) / (2.0 * h) - (u(p.x, p.y + h).x - u(p.x, p.y - h).x) / (2.0 * h);
        assert!((taylor_green_curl(&p) - fd).abs() < 1e-7);
    }

    #[test]
    fn forcing_includes_viscous_term() {
        let p = Point2::new(0.25, 0.6);
        let f = taylor_green_forcing(0.5, &p) - taylor_green_advection(&p);
        assert!((f - PI * PI * taylor_green(0.0, 0.0, &p)).norm() < 1e-14);
    }

    #[test]
    fn hump_is_divergence_free() {
        for p in [Point2::new(0.1, 0.2), Point2::new(-0.4, 0.35), Point2::new(0.45, -0.45)] {
            assert!(fd_divergence(rotating_hump, &p).abs() < 1e-6);
        }
    }

    #[test]
    fn lid_profile_values() {
        assert_eq!(lid_profile(0.5), 1.0);
        assert_eq!(lid_profile(0.4), 0.0);
        assert_eq!(lid_profile(-0.3), 0.0);
        assert!(lid_profile(0.45) > 0.0 && lid_profile(0.45) < 1.0);
    }

    #[test]
    fn swirl_at_unit_point() {
        let w = swirl(&Point2::new(1.0, 0.0));
        assert!((w.x - (2.0 * 1f64.cos()).sin()).abs() < 1e-15);
        assert!((w.y - 1f64.cos().sin()).abs() < 1e-15);
        // continuous across the branch cut of atan2
        let a = swirl(&Point2::new(-0.5, 1e-12));
        let b = swirl(&Point2::new(-0.5, -1e-12));
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn square_normals() {
        assert_eq!(square_normal(&Point2::new(1.0, 0.3)), Vector2::new(1.0, 0.0));
        assert_eq!(square_normal(&Point2::new(-0.2, -1.0)), Vector2::new(0.0, -1.0));
    }
}
