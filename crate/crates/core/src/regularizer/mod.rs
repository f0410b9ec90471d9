//! The learned regularizer `R(x) = ||x - Phi(x)||^2 + beta TV_eps(x)`.

mod conv;
mod net;
mod tv;

pub use conv::{Conv2d, ConvGrad, Tensor};
pub use net::{
    net_backward, net_forward, net_forward_traced, net_pullback, Architecture, NetEvaluation,
    NetGradient, NetParams, NET_MAGIC,
};
pub use tv::{tv_grad, tv_smooth};

use crate::error::{NettError, Result};

/// Weight and smoothing of the total-variation term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TVParams {
    pub beta: f64,
    pub epsilon: f64,
}

impl TVParams {
    pub fn new(beta: f64, epsilon: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(NettError::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        if !(epsilon > 0.0) {
            return Err(NettError::InvalidParameter(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(Self { beta, epsilon })
    }
}

impl Default for TVParams {
    fn default() -> Self {
        Self {
            beta: 15.0,
            epsilon: 1e-3,
        }
    }
}

/// `||x - Phi(x)||^2 + beta TV_eps(x)`.
pub fn reg_value(theta: &NetParams, tv: &TVParams, x: &[f64], side: usize) -> Result<f64> {
    let phi = net_forward(theta, x, side)?;
    let residual: f64 = x.iter().zip(&phi).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(residual + tv.beta * tv_smooth(x, side, tv.epsilon))
}

/// Gradient of [`reg_value`]: `2 r - 2 J_Phi^T r + beta grad TV` with
/// `r = x - Phi(x)`.
pub fn reg_grad(theta: &NetParams, tv: &TVParams, x: &[f64], side: usize) -> Result<Vec<f64>> {
    Ok(reg_value_and_grad(theta, tv, x, side)?.1)
}

pub fn reg_value_and_grad(
    theta: &NetParams,
    tv: &TVParams,
    x: &[f64],
    side: usize,
) -> Result<(f64, Vec<f64>)> {
    let eval = net_forward_traced(theta, x, side)?;
    let r: Vec<f64> = x.iter().zip(&eval.output).map(|(a, b)| a - b).collect();
    let value = r.iter().map(|v| v * v).sum::<f64>() + tv.beta * tv_smooth(x, side, tv.epsilon);
    let mut scratch = NetGradient::zeros_like(theta);
    let jt_r = net_pullback(theta, &eval, &r, &mut scratch, true)?.expect("input gradient");
    let tvg = tv_grad(x, side, tv.epsilon);
    let grad = r
        .iter()
        .zip(&jt_r)
        .zip(&tvg)
        .map(|((r, j), t)| 2.0 * r - 2.0 * j + tv.beta * t)
        .collect();
    Ok((value, grad))
}

/// A differentiable penalty on flat images or vectors.
pub trait Regularizer {
    fn value(&self, x: &[f64]) -> Result<f64>;

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.grad(x)?))
    }

    /// The learned map used for initialization and post-processing; the
    /// identity unless a network is attached.
    fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

/// `scale * ||x||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub scale: f64,
}

impl Default for Quadratic {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl Regularizer for Quadratic {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.scale * x.iter().map(|v| v * v).sum::<f64>())
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| 2.0 * self.scale * v).collect())
    }
}

/// A NETT regularizer bound to an image side.
#[derive(Debug, Clone, PartialEq)]
pub struct NettRegularizer {
    pub theta: NetParams,
    pub tv: TVParams,
    pub side: usize,
}

impl NettRegularizer {
    pub fn new(theta: NetParams, tv: TVParams, side: usize) -> Result<Self> {
        theta.check_side(side, side * side)?;
        Ok(Self { theta, tv, side })
    }

}

impl Regularizer for NettRegularizer {
    fn value(&self, x: &[f64]) -> Result<f64> {
        reg_value(&self.theta, &self.tv, x, self.side)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        reg_grad(&self.theta, &self.tv, x, self.side)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        reg_value_and_grad(&self.theta, &self.tv, x, self.side)
    }

    fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        net_forward(&self.theta, x, self.side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_net_leaves_only_tv() {
        let theta = NetParams::init(Architecture::standard(), 1);
        let tv = TVParams::new(15.0, 1e-3).unwrap();
        let v = reg_value(&theta, &tv, &[0.4; 64], 8).unwrap();
        assert!((v - 15.0 * 64.0 * 1e-3).abs() < 1e-12);
        let x: Vec<f64> = (0..64).map(|k| (k as f64 * 0.37).sin()).collect();
        let g = reg_grad(&theta, &tv, &x, 8).unwrap();
        let t = tv_grad(&x, 8, 1e-3);
        for (a, b) in g.iter().zip(&t) {
            assert!((a - 15.0 * b).abs() < 1e-12);
        }
        let zero_beta = TVParams::new(0.0, 1e-3).unwrap();
        assert_eq!(reg_value(&theta, &zero_beta, &x, 8).unwrap(), 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(TVParams::new(-1.0, 1e-3).is_err());
        assert!(TVParams::new(1.0, 0.0).is_err());
    }
}
