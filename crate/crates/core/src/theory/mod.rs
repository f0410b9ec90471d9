//! Numerical checks of the convergence theory: derivatives and absolute
//! Bregman distances of regularizers, the quasi-triangle inequality of the
//! data distance, discretization ladders and convergence-rate experiments.

mod ladder;
mod rate;

pub use ladder::{
    approx_errors, multiscale_convergence, prolong, restrict, ApproxRecord, DiscretizationLadder, Level,
    MultiscaleRecord, ProlongedRegularizer, SamplingConfig, ScheduleStep, write_approx_csv, write_multiscale_csv,
};
pub use rate::{fit_slope, rate_experiment, write_rate_csv, RateRecord, RateStudy, ToyProblem};

use crate::error::{NettError, Result};
use crate::linops::{dot, norm};
use crate::regularizer::Regularizer;
use crate::rng::{self, purpose};

/// `1/2 ||a - b||^2`.
pub fn half_squared_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * squared_distance(a, b)
}

/// `||a - b||^2`.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
}

fn checked_value<R: Regularizer + ?Sized>(reg: &R, x: &[f64]) -> Result<f64> {
    let v = reg.value(x)?;
    if !v.is_finite() {
        return Err(NettError::NonFinite("regularizer value".into()));
    }
    Ok(v)
}

/// Directional derivative of `reg` at `x_star` along `h` by central
/// differences with one Richardson extrapolation step.
pub fn gateaux_derivative<R: Regularizer + ?Sized>(reg: &R, x_star: &[f64], h: &[f64]) -> Result<f64> {
    if x_star.len() != h.len() {
        return Err(NettError::dims("gateaux direction", x_star.len(), h.len()));
    }
    let hn = norm(h);
    if hn == 0.0 {
        return Ok(0.0);
    }
    let t = 1e-5 * (norm(x_star) / hn).max(1.0);
    let central = |t: f64| -> Result<f64> {
        let plus: Vec<f64> = x_star.iter().zip(h).map(|(x, d)| x + t * d).collect();
        let minus: Vec<f64> = x_star.iter().zip(h).map(|(x, d)| x - t * d).collect();
        Ok((checked_value(reg, &plus)? - checked_value(reg, &minus)?) / (2.0 * t))
    };
    let coarse = central(t)?;
    let fine = central(0.5 * t)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// How `R'(x_star)` is obtained in [`bregman_abs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativePath {
    #[default]
    Gradient,
    FiniteDifference,
}

/// `|R(x) - R(x_star) - <R'(x_star), x - x_star>|`.
pub fn bregman_abs<R: Regularizer + ?Sized>(
    reg: &R,
    x: &[f64],
    x_star: &[f64],
    path: DerivativePath,
) -> Result<f64> {
    if x.len() != x_star.len() {
        return Err(NettError::dims("bregman_abs", x_star.len(), x.len()));
    }
    let diff: Vec<f64> = x.iter().zip(x_star).map(|(a, b)| a - b).collect();
    let (r_star, linear) = match path {
        DerivativePath::Gradient => {
            let (v, g) = reg.value_and_grad(x_star)?;
            (v, dot(&g, &diff))
        }
        DerivativePath::FiniteDifference => (checked_value(reg, x_star)?, gateaux_derivative(reg, x_star, &diff)?),
    };
    let value = (checked_value(reg, x)? - r_star - linear).abs();
    if !value.is_finite() {
        return Err(NettError::NonFinite("Bregman distance".into()));
    }
    Ok(value)
}

/// Result of [`check_quasi_triangle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiTriangle {
    pub worst_ratio: f64,
    pub tau: f64,
    pub passes: bool,
}

/// Worst ratio `D(y1, y2) / (D(y1, y3) + D(y3, y2))` over the given triples.
/// Triples whose denominator vanishes are skipped.
pub fn check_quasi_triangle(
    d: impl Fn(&[f64], &[f64]) -> f64,
    triples: &[[Vec<f64>; 3]],
    tau: f64,
) -> Result<QuasiTriangle> {
    if !(tau >= 1.0) {
        return Err(NettError::InvalidParameter(format!("tau must be >= 1, got {tau}")));
    }
    let mut worst = 0.0f64;
    for [y1, y2, y3] in triples {
        let den = d(y1, y3) + d(y3, y2);
        if den > 0.0 {
            worst = worst.max(d(y1, y2) / den);
        }
    }
    Ok(QuasiTriangle {
        worst_ratio: worst,
        tau,
        passes: worst <= tau,
    })
}

/// Seeded standard normal triples in dimension `dim`.
pub fn random_triples(dim: usize, count: usize, seed: u64) -> Vec<[Vec<f64>; 3]> {
    (0..count)
        .map(|k| {
            let mut rng = rng::stream(seed, purpose::THEORY, k as u64);
            let mut draw = || (0..dim).map(|_| rng::normal(&mut rng)).collect::<Vec<f64>>();
            [draw(), draw(), draw()]
        })
        .collect()
}
