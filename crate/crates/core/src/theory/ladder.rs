use std::io::Write;

use crate::error::{NettError, Result};
use crate::linops::{apply, ForwardOperator};
use crate::regularizer::Regularizer;
use crate::rng::{self, purpose};
use crate::solver::{nett_reconstruct, SolveConfig};

use super::half_squared_distance;

fn scale_factor(side: usize, target: usize) -> Result<usize> {
    if target == 0 || side % target != 0 || !(side / target).is_power_of_two() {
        return Err(NettError::InvalidParameter(format!(
            "grid side {target} is not {side} divided by a power of two"
        )));
    }
    Ok(side / target)
}

/// Averages `side x side` image blocks down to `target x target`.
pub fn restrict(x: &[f64], side: usize, target: usize) -> Result<Vec<f64>> {
    if x.len() != side * side {
        return Err(NettError::dims("restrict", side * side, x.len()));
    }
    let f = scale_factor(side, target)?;
    let mut out = vec![0.0; target * target];
    for i in 0..side {
        for j in 0..side {
            out[(i / f) * target + j / f] += x[i * side + j];
        }
    }
    let inv = 1.0 / (f * f) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// Nearest-neighbour replication from `side x side` up to `target x target`.
pub fn prolong(x: &[f64], side: usize, target: usize) -> Result<Vec<f64>> {
    if x.len() != side * side {
        return Err(NettError::dims("prolong", side * side, x.len()));
    }
    let f = scale_factor(target, side)?;
    let mut out = vec![0.0; target * target];
    for i in 0..target {
        for j in 0..target {
            out[i * target + j] = x[(i / f) * side + j / f];
        }
    }
    Ok(out)
}

/// `R_n(z) = R(P z)` for a coarse image `z` and the prolongation `P`.
pub struct ProlongedRegularizer<'a> {
    pub inner: &'a dyn Regularizer,
    pub side: usize,
    pub fine_side: usize,
}

impl Regularizer for ProlongedRegularizer<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.inner.value(&prolong(x, self.side, self.fine_side)?)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_grad(x)?.1)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.inner.value_and_grad(&prolong(x, self.side, self.fine_side)?)?;
        // P^T sums blocks, which is restriction times the block size
        let f = (self.fine_side / self.side).pow(2) as f64;
        let mut g = restrict(&g, self.fine_side, self.side)?;
        g.iter_mut().for_each(|v| *v *= f);
        Ok((v, g))
    }

    fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.inner.phi(&prolong(x, self.side, self.fine_side)?)?;
        restrict(&out, self.fine_side, self.side)
    }
}

struct Borrowed<'a>(&'a dyn Regularizer);

impl Regularizer for Borrowed<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.0.value(x)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.grad(x)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.0.value_and_grad(x)
    }

    fn phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.phi(x)
    }
}

/// One discretization level: an image side, its operator and optionally its
/// own regularizer (otherwise the finest regularizer on prolonged images).
pub struct Level {
    pub side: usize,
    pub operator: ForwardOperator,
    pub regularizer: Option<Box<dyn Regularizer>>,
}

/// Nested grids sharing one data space. The last level is the reference
/// discretization: its operator is `A` and its regularizer `R`.
pub struct DiscretizationLadder {
    levels: Vec<Level>,
    regularizer: Box<dyn Regularizer>,
}

impl DiscretizationLadder {
    pub fn new(levels: Vec<Level>, regularizer: Box<dyn Regularizer>) -> Result<Self> {
        let fine = levels
            .last()
            .ok_or_else(|| NettError::InvalidParameter("ladder needs at least one level".into()))?;
        let rows = fine.operator.rows();
        for (k, level) in levels.iter().enumerate() {
            if k > 0 && level.side <= levels[k - 1].side {
                return Err(NettError::InvalidParameter("ladder sides must increase".into()));
            }
            scale_factor(fine.side, level.side)?;
            if level.operator.cols() != level.side * level.side {
                return Err(NettError::dims("level operator columns", level.side * level.side, level.operator.cols()));
            }
            if level.operator.rows() != rows {
                return Err(NettError::dims("level operator rows", rows, level.operator.rows()));
            }
        }
        Ok(Self { levels, regularizer })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn fine_side(&self) -> usize {
        self.levels.last().expect("non-empty").side
    }

    pub fn fine_operator(&self) -> &ForwardOperator {
        &self.levels.last().expect("non-empty").operator
    }

    pub fn regularizer(&self) -> &dyn Regularizer {
        self.regularizer.as_ref()
    }

    /// `R_n` of level `k`.
    pub fn level_regularizer(&self, k: usize) -> Box<dyn Regularizer + '_> {
        let level = &self.levels[k];
        match &level.regularizer {
            Some(r) => Box::new(Borrowed(r.as_ref())),
            None if level.side == self.fine_side() => Box::new(Borrowed(self.regularizer.as_ref())),
            None => Box::new(ProlongedRegularizer {
                inner: self.regularizer.as_ref(),
                side: level.side,
                fine_side: self.fine_side(),
            }),
        }
    }

    pub fn restrict_to(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        restrict(x, self.fine_side(), self.levels[k].side)
    }

    pub fn prolong_from(&self, k: usize, z: &[f64]) -> Result<Vec<f64>> {
        prolong(z, self.levels[k].side, self.fine_side())
    }
}

/// Parameters of the rejection sampler for `{x : R_n(x) <= M}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub bound: f64,
    pub samples: usize,
    /// Initial standard deviation of the Gaussian perturbation; halved after
    /// each rejection.
    pub perturbation: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            bound: f64::INFINITY,
            samples: 200,
            perturbation: 0.1,
            max_attempts: 20,
            seed: 0,
        }
    }
}

/// Approximation quantities of one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxRecord {
    pub side: usize,
    /// `|R_n(z_n) - R(x_plus)|`.
    pub lambda: f64,
    /// Sampled `sup |R_n(x) - R(x)|`.
    pub rho: f64,
    /// `D(A_n z_n, A x_plus)`.
    pub gamma: f64,
    /// Sampled `sup |D(A_n x, A x_plus) - D(A x, A x_plus)|`.
    pub a: f64,
    pub accepted: usize,
}

/// Computes `lambda_n, rho_n, gamma_n, a_n` with `z_n` the restriction of
/// `x_plus` and `D = 1/2 ||.||^2`. The suprema are lower estimates from
/// `sampling.samples` admissible draws around `z_n`.
pub fn approx_errors(ladder: &DiscretizationLadder, x_plus: &[f64], sampling: &SamplingConfig) -> Result<Vec<ApproxRecord>> {
    let fine = ladder.fine_side();
    if x_plus.len() != fine * fine {
        return Err(NettError::dims("x_plus", fine * fine, x_plus.len()));
    }
    let a = ladder.fine_operator();
    let reg = ladder.regularizer();
    let r_plus = reg.value(x_plus)?;
    if !(sampling.bound > r_plus) {
        return Err(NettError::InvalidParameter(format!(
            "bound M = {} must exceed R(x_plus) = {r_plus}",
            sampling.bound
        )));
    }
    let y_plus = apply(a, x_plus)?;
    let mut out = Vec::with_capacity(ladder.levels().len());
    for (k, level) in ladder.levels().iter().enumerate() {
        let r_n = ladder.level_regularizer(k);
        let own = level.regularizer.is_some();
        let z = ladder.restrict_to(k, x_plus)?;
        let lambda = (r_n.value(&z)? - r_plus).abs();
        let gamma = half_squared_distance(&apply(&level.operator, &z)?, &y_plus);
        let (mut rho, mut a_n, mut accepted) = (0.0f64, 0.0f64, 0usize);
        for s in 0..sampling.samples {
            let mut rng = rng::stream(sampling.seed, purpose::SAMPLING, ((k as u64) << 32) | s as u64);
            let mut scale = sampling.perturbation;
            for _ in 0..sampling.max_attempts {
                let x: Vec<f64> = z.iter().map(|v| v + scale * rng::normal(&mut rng)).collect();
                let rx = r_n.value(&x)?;
                if rx <= sampling.bound {
                    let px = ladder.prolong_from(k, &x)?;
                    if own {
                        rho = rho.max((rx - reg.value(&px)?).abs());
                    }
                    let coarse = half_squared_distance(&apply(&level.operator, &x)?, &y_plus);
                    let fine_d = half_squared_distance(&apply(a, &px)?, &y_plus);
                    a_n = a_n.max((coarse - fine_d).abs());
                    accepted += 1;
                    break;
                }
                scale *= 0.5;
            }
        }
        if accepted == 0 && sampling.samples > 0 {
            return Err(NettError::SamplingFailure {
                level: level.side,
                bound: sampling.bound,
            });
        }
        out.push(ApproxRecord {
            side: level.side,
            lambda,
            rho,
            gamma,
            a: a_n,
            accepted,
        });
    }
    Ok(out)
}

/// One step of a parameter choice: noise level, regularization weight and
/// ladder level index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStep {
    pub delta: f64,
    pub alpha: f64,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiscaleRecord {
    pub delta: f64,
    pub alpha: f64,
    pub side: usize,
    /// `||P x_k - x_plus|| / ||x_plus||`.
    pub error: f64,
    pub reg_value: f64,
    /// `(delta + gamma_n) / alpha`.
    pub ratio: f64,
}

/// Reconstructs `x_plus` along the schedule and records the relative error of
/// each reconstruction on the finest grid.
pub fn multiscale_convergence(
    ladder: &DiscretizationLadder,
    x_plus: &[f64],
    schedule: &[ScheduleStep],
    solve: &SolveConfig,
    seed: u64,
) -> Result<Vec<MultiscaleRecord>> {
    let fine = ladder.fine_side();
    if x_plus.len() != fine * fine {
        return Err(NettError::dims("x_plus", fine * fine, x_plus.len()));
    }
    if schedule.is_empty() {
        return Err(NettError::InvalidParameter("empty parameter schedule".into()));
    }
    for w in schedule.windows(2) {
        if w[1].delta > w[0].delta || w[1].alpha >= w[0].alpha || w[1].level < w[0].level {
            return Err(NettError::InvalidParameter(
                "schedule must have non-increasing delta, decreasing alpha and non-decreasing level".into(),
            ));
        }
    }
    if let Some(s) = schedule.iter().find(|s| !(s.alpha > 0.0) || !(s.delta >= 0.0) || s.level >= ladder.levels().len()) {
        return Err(NettError::InvalidParameter(format!("invalid schedule step {s:?}")));
    }
    let a = ladder.fine_operator();
    let y = apply(a, x_plus)?;
    let ratios: Vec<f64> = schedule
        .iter()
        .map(|s| {
            let level = &ladder.levels()[s.level];
            let z = ladder.restrict_to(s.level, x_plus)?;
            let gamma = half_squared_distance(&apply(&level.operator, &z)?, &y);
            Ok((s.delta + gamma) / s.alpha)
        })
        .collect::<Result<_>>()?;
    if schedule.len() > 1 && ratios[ratios.len() - 1] > ratios[0] {
        return Err(NettError::InvalidParameter(format!(
            "(delta + gamma_n) / alpha grows along the schedule: {} -> {}",
            ratios[0],
            ratios[ratios.len() - 1]
        )));
    }
    let x_norm = x_plus.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = Vec::with_capacity(schedule.len());
    for (k, (step, ratio)) in schedule.iter().zip(ratios).enumerate() {
        let mut rng = rng::stream(seed, purpose::NOISE, (1 << 40) | k as u64);
        let mut eta: Vec<f64> = (0..y.len()).map(|_| rng::normal(&mut rng)).collect();
        let len = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = (2.0 * step.delta).sqrt() / len;
        eta.iter_mut().for_each(|v| *v *= scale);
        let y_delta: Vec<f64> = y.iter().zip(&eta).map(|(p, q)| p + q).collect();
        let level = &ladder.levels()[step.level];
        let r_n = ladder.level_regularizer(step.level);
        let config = SolveConfig {
            alpha: step.alpha,
            ..solve.clone()
        };
        let report = nett_reconstruct(&level.operator, &y_delta, r_n.as_ref(), &config)?;
        let px = ladder.prolong_from(step.level, &report.image)?;
        let err = px.iter().zip(x_plus).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        out.push(MultiscaleRecord {
            delta: step.delta,
            alpha: step.alpha,
            side: level.side,
            error: if x_norm > 0.0 { err / x_norm } else { err },
            reg_value: report.final_objective().reg,
            ratio,
        });
    }
    Ok(out)
}

pub fn write_multiscale_csv<W: Write>(mut w: W, records: &[MultiscaleRecord]) -> Result<()> {
    writeln!(w, "delta,alpha,n,error,reg,ratio")?;
    for r in records {
        writeln!(w, "{:e},{:e},{},{:e},{:e},{:e}", r.delta, r.alpha, r.side, r.error, r.reg_value, r.ratio)?;
    }
    Ok(())
}

pub fn write_approx_csv<W: Write>(mut w: W, records: &[ApproxRecord]) -> Result<()> {
    writeln!(w, "n,lambda,rho,gamma,a,accepted")?;
    for r in records {
        writeln!(w, "{},{:e},{:e},{:e},{:e},{}", r.side, r.lambda, r.rho, r.gamma, r.a, r.accepted)?;
    }
    Ok(())
}
