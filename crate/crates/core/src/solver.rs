//! Forward-backward minimization of `1/2 ||Ax - y||^2 + alpha R(x)`.

use std::io::Write;

use crate::error::{NettError, Result};
use crate::linops::{apply, apply_adjoint, norm, pseudo_inverse_apply, ForwardOperator, ShiftedSolver};
use crate::regularizer::Regularizer;

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// `Phi(A^T y)`.
    #[default]
    NetAdjoint,
    PseudoInverse,
    Zero,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub alpha: f64,
    pub s: f64,
    pub n_iter: usize,
    pub init: Init,
    /// Use `(A^T A - s I)^{-1}` in the backward step instead of `+ s I`.
    pub paper_sign: bool,
    /// Stop early once the relative objective change drops below this.
    pub tolerance: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            alpha: 0.015,
            s: 0.25,
            n_iter: 15,
            init: Init::NetAdjoint,
            paper_sign: false,
            tolerance: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(NettError::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(NettError::InvalidParameter(format!("s must be > 0, got {}", self.s)));
        }
        if self.n_iter == 0 {
            return Err(NettError::InvalidParameter("n_iter must be >= 1".into()));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0) {
                return Err(NettError::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
            }
        }
        Ok(())
    }
}

/// Objective split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub total: f64,
    pub data: f64,
    /// `R(x)`, not scaled by alpha.
    pub reg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Entry 0 is the initial guess, entry `l` the `l`-th iterate.
    pub objective: Vec<ObjectiveTerms>,
    pub image: Vec<f64>,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.objective.len() - 1
    }

    pub fn final_objective(&self) -> ObjectiveTerms {
        *self.objective.last().expect("report holds the initial objective")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,total,data,reg")?;
        for (i, o) in self.objective.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e},{:e}", o.total, o.data, o.reg)?;
        }
        Ok(())
    }
}

/// `1/2 ||Ax - y||^2`.
pub fn data_term(a: &ForwardOperator, y: &[f64], x: &[f64]) -> Result<f64> {
    Ok(0.5 * data_residual(a, y, x)?.powi(2))
}

/// `||Ax - y||`.
pub fn data_residual(a: &ForwardOperator, y: &[f64], x: &[f64]) -> Result<f64> {
    let ax = apply(a, x)?;
    if ax.len() != y.len() {
        return Err(NettError::dims("data", ax.len(), y.len()));
    }
    Ok(ax.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
}

/// `1/2 ||Ax - y||^2 + alpha R(x)`.
pub fn objective<R: Regularizer + ?Sized>(
    a: &ForwardOperator,
    y: &[f64],
    reg: &R,
    alpha: f64,
    x: &[f64],
) -> Result<ObjectiveTerms> {
    let data = data_term(a, y, x)?;
    let r = reg.value(x)?;
    Ok(ObjectiveTerms {
        total: data + alpha * r,
        data,
        reg: r,
    })
}

/// Runs `x_half = x - s alpha grad R(x)`, `x = (A^T A + s I)^{-1}(A^T y + s x_half)`
/// for `config.n_iter` iterations.
pub fn nett_reconstruct<R: Regularizer + ?Sized>(
    a: &ForwardOperator,
    y: &[f64],
    reg: &R,
    config: &SolveConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let aty = apply_adjoint(a, y)?;
    let mut x = match &config.init {
        Init::NetAdjoint => reg.phi(&aty)?,
        Init::PseudoInverse => pseudo_inverse_apply(a, y)?,
        Init::Zero => vec![0.0; a.cols()],
        Init::Custom(x0) => {
            if x0.len() != a.cols() {
                return Err(NettError::dims("initial guess", a.cols(), x0.len()));
            }
            x0.clone()
        }
    };
    let shift = if config.paper_sign { -config.s } else { config.s };
    let solver = ShiftedSolver::new(a, shift)?;
    let mut report = Vec::with_capacity(config.n_iter + 1);
    for iter in 0..=config.n_iter {
        let last = iter == config.n_iter;
        let (r, g) = if config.alpha == 0.0 || last {
            (reg.value(&x)?, None)
        } else {
            let (r, g) = reg.value_and_grad(&x)?;
            (r, Some(g))
        };
        let data = data_term(a, y, &x)?;
        let terms = ObjectiveTerms {
            total: data + config.alpha * r,
            data,
            reg: r,
        };
        if !terms.total.is_finite() {
            return Err(NettError::NonFinite(format!("objective at iteration {iter}")));
        }
        let converged = match (config.tolerance, report.last()) {
            (Some(tol), Some(prev)) => {
                let prev: &ObjectiveTerms = prev;
                (prev.total - terms.total).abs() <= tol * prev.total.abs().max(f64::MIN_POSITIVE)
            }
            _ => false,
        };
        report.push(terms);
        if last || converged {
            break;
        }
        let step = config.s * config.alpha;
        let mut rhs = aty.clone();
        match g {
            Some(g) => {
                for ((b, xi), gi) in rhs.iter_mut().zip(&x).zip(&g) {
                    *b += config.s * (xi - step * gi);
                }
            }
            None => {
                for (b, xi) in rhs.iter_mut().zip(&x) {
                    *b += config.s * xi;
                }
            }
        }
        x = solver.solve(a, &rhs)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NettError::NonFinite(format!("iterate {}", iter + 1)));
        }
    }
    Ok(SolveReport {
        objective: report,
        image: x,
    })
}

/// `Phi(A^+ y)`.
pub fn postprocess_reconstruct<R: Regularizer + ?Sized>(
    a: &ForwardOperator,
    y: &[f64],
    reg: &R,
) -> Result<Vec<f64>> {
    reg.phi(&pseudo_inverse_apply(a, y)?)
}

/// `A^+ y`.
pub fn pseudo_inverse_reconstruct(a: &ForwardOperator, y: &[f64]) -> Result<Vec<f64>> {
    pseudo_inverse_apply(a, y)
}

/// `||A^T A x - A^T y||`.
pub fn normal_residual(a: &ForwardOperator, y: &[f64], x: &[f64]) -> Result<f64> {
    let lhs = apply_adjoint(a, &apply(a, x)?)?;
    let rhs = apply_adjoint(a, y)?;
    Ok(norm(&crate::linops::sub(&lhs, &rhs)))
}
