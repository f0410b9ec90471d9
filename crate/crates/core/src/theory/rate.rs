use std::io::Write;

use crate::error::{NettError, Result};
use crate::linops::{apply, apply_adjoint, svd_truncate, DenseMatrix, ForwardOperator, ShiftedSolver};
use crate::rng::{self, purpose};

use super::squared_distance;

/// A linear problem with `R = ||x||^2` and `x_plus = A^T w`, so
/// `R'(x_plus) = A^T (2w)` lies in the range of the adjoint.
#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub a: ForwardOperator,
    pub w: Vec<f64>,
    pub x_plus: Vec<f64>,
}

impl ToyProblem {
    /// Square `dim x dim` operator with random orthogonal singular vectors and
    /// singular values spread log-uniformly over `[sigma_min, 1]`.
    pub fn source_condition(dim: usize, sigma_min: f64, w_scale: f64, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(NettError::InvalidParameter("toy dimension must be >= 2".into()));
        }
        if !(sigma_min > 0.0 && sigma_min < 1.0) {
            return Err(NettError::InvalidParameter(format!(
                "sigma_min must lie in (0, 1), got {sigma_min}"
            )));
        }
        let mut rng = rng::stream(seed, purpose::THEORY, u64::MAX);
        let g = DenseMatrix::from_fn(dim, dim, |_, _| rng::normal(&mut rng));
        let basis = svd_truncate(&g, 1e-12)?;
        if basis.rank() != dim {
            return Err(NettError::SvdFailed);
        }
        let log_min = sigma_min.ln();
        let sigma: Vec<f64> = (0..dim)
            .map(|k| (log_min * k as f64 / (dim - 1) as f64).exp())
            .collect();
        let a = ForwardOperator::from_factors(basis.u().clone(), sigma, basis.vt().clone(), sigma_min * 0.5)?;
        let w: Vec<f64> = (0..dim).map(|_| w_scale * rng::normal(&mut rng)).collect();
        let x_plus = apply_adjoint(&a, &w)?;
        Ok(Self { a, w, x_plus })
    }

    /// Closed-form Tikhonov solution `(A^T A + alpha I)^{-1} A^T y`.
    pub fn tikhonov(&self, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let rhs = apply_adjoint(&self.a, y)?;
        ShiftedSolver::new(&self.a, alpha)?.solve(&self.a, &rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRecord {
    pub delta: f64,
    pub alpha: f64,
    /// Dimension of the discretization used.
    pub n: usize,
    /// Mean absolute Bregman distance over the trials.
    pub bregman: f64,
    /// Mean per-component squared error.
    pub mse: f64,
    /// Mean `||A x - y_delta||`.
    pub data_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub records: Vec<RateRecord>,
    pub slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let points: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if points.len() < 3 {
        return Err(NettError::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NettError::InvalidParameter("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// For each noise level `delta` draws `trials` noise vectors scaled so that
/// `1/2 ||eta||^2 = delta`, reconstructs with `alpha = c sqrt(delta)` and
/// averages the Bregman distance `||x - x_plus||^2`. The slope is fitted over
/// the positive noise levels.
pub fn rate_experiment(toy: &ToyProblem, deltas: &[f64], trials: usize, c: f64, seed: u64) -> Result<RateStudy> {
    if trials == 0 {
        return Err(NettError::InvalidParameter("trials must be >= 1".into()));
    }
    if !(c > 0.0) {
        return Err(NettError::InvalidParameter(format!("rate constant must be > 0, got {c}")));
    }
    if deltas.iter().any(|d| !(*d >= 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(NettError::InvalidParameter(
            "noise levels must be non-negative and strictly decreasing".into(),
        ));
    }
    let positive = deltas.iter().filter(|d| **d > 0.0).count();
    if positive < 3 {
        return Err(NettError::InsufficientPoints {
            needed: 3,
            got: positive,
        });
    }
    let y = apply(&toy.a, &toy.x_plus)?;
    let dim = toy.x_plus.len();
    let mut records = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        let alpha = c * delta.sqrt();
        let (mut breg, mut res) = (0.0, 0.0);
        let runs = if delta == 0.0 { 1 } else { trials };
        for trial in 0..runs {
            let mut rng = rng::stream(seed, purpose::NOISE, ((k as u64) << 32) | trial as u64);
            let mut eta: Vec<f64> = (0..y.len()).map(|_| rng::normal(&mut rng)).collect();
            let scale = (2.0 * delta).sqrt() / eta.iter().map(|v| v * v).sum::<f64>().sqrt();
            eta.iter_mut().for_each(|v| *v *= scale);
            let y_delta: Vec<f64> = y.iter().zip(&eta).map(|(a, b)| a + b).collect();
            let x = if alpha > 0.0 {
                toy.tikhonov(&y_delta, alpha)?
            } else {
                crate::linops::pseudo_inverse_apply(&toy.a, &y_delta)?
            };
            breg += squared_distance(&x, &toy.x_plus);
            res += squared_distance(&apply(&toy.a, &x)?, &y_delta).sqrt();
        }
        let bregman = breg / runs as f64;
        records.push(RateRecord {
            delta,
            alpha,
            n: dim,
            bregman,
            mse: bregman / dim as f64,
            data_residual: res / runs as f64,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.delta > 0.0)
        .map(|r| (r.delta, r.bregman))
        .unzip();
    let slope = fit_slope(&x, &y)?;
    Ok(RateStudy { records, slope })
}

pub fn write_rate_csv<W: Write>(mut w: W, records: &[RateRecord]) -> Result<()> {
    writeln!(w, "delta,alpha,n,bregman,mse,residual")?;
    for r in records {
        writeln!(
            w,
            "{:e},{:e},{},{:e},{:e},{:e}",
            r.delta, r.alpha, r.n, r.bregman, r.mse, r.data_residual
        )?;
    }
    Ok(())
}
