//! Free-space 3D wave traces of a KB initial pressure.
//!
//! For a radially symmetric initial pressure `psi` and a point at distance `d`
//! from the blob center, the spherical mean over the sphere of radius `t` is
//!
//! ```text
//! M(d, t) = 1/(2 t d) * integral_{|t-d|}^{min(t+d, R)} rho psi(rho) drho
//! ```
//!
//! and the pressure is `p(d, t) = d/dt [t M(d, t)]`. Differentiating the
//! integral limits gives a closed form that involves only boundary values.

use std::sync::OnceLock;

use super::kb::KBParams;

const GL_ORDER: usize = 8;
const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 30;
/// Below this distance the sensor is treated as sitting on the blob center.
const CENTER_EPS: f64 = 1e-12;

/// Pressure at time `t` of the wave started by the blob centered at `center`,
/// observed at `sensor`.
pub fn wave_trace(p: &KBParams, center: [f64; 2], sensor: [f64; 2], t: f64) -> f64 {
    let d = (sensor[0] - center[0]).hypot(sensor[1] - center[1]);
    wave_trace_radial(p, d, t)
}

/// [`wave_trace`] as a function of center-to-sensor distance only.
pub fn wave_trace_radial(p: &KBParams, d: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let r = p.radius;
    if d < CENTER_EPS {
        // sphere about the center: t M = t psi(t)
        if t >= r {
            return 0.0;
        }
        return p.profile(t) + t * p.profile_derivative(t);
    }
    let lower = (t - d).abs();
    let upper_raw = t + d;
    let upper = upper_raw.min(r);
    if lower >= upper {
        return 0.0;
    }
    let mut value = 0.0;
    if upper_raw < r {
        value += upper_raw * p.profile(upper_raw);
    }
    // d/dt |t - d| = sign(t - d)
    value -= (t - d) * p.profile(lower);
    value / (2.0 * d)
}

/// `t * M(d, t)`, the time antiderivative of the trace, by adaptive
/// Gauss–Legendre quadrature.
pub fn trace_potential(p: &KBParams, d: f64, t: f64) -> f64 {
    if d < CENTER_EPS {
        return t * p.profile(t);
    }
    let lower = (t - d).abs();
    let upper = (t + d).min(p.radius);
    if lower >= upper {
        return 0.0;
    }
    integrate(|rho| rho * p.profile(rho), lower, upper) / (2.0 * d)
}

/// Spherical mean `M(d, t)` of the blob profile.
pub fn spherical_mean(p: &KBParams, d: f64, t: f64) -> f64 {
    if t == 0.0 {
        return p.profile(d);
    }
    trace_potential(p, d, t) / t
}

fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn gl_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive Gauss–Legendre quadrature to absolute tolerance `1e-12`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = gl_panel(f, a, mid);
        let right = gl_panel(f, mid, b);
        if depth >= QUAD_MAX_DEPTH || (left + right - whole).abs() <= tol {
            return left + right;
        }
        recurse(f, a, mid, left, 0.5 * tol, depth + 1) + recurse(f, mid, b, right, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gl_panel(&f, a, b);
    recurse(&f, a, b, whole, QUAD_TOL, 0)
}
