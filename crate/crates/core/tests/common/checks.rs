//! Worst-case errors of the oracle comparisons, shared by the per-module
//! suites and the acceptance run.

use super::*;
use nett_core::linops::{apply, pseudo_inverse_apply, solve_shifted, svd_truncate, DenseMatrix};
use nett_core::pat::{wave_trace, KBParams};
use nett_core::regularizer::{
    net_backward, net_forward, reg_grad, reg_value, tv_grad, tv_smooth, Architecture, NetParams, TVParams,
};

pub const SIDES: [usize; 5] = [8, 10, 12, 14, 16];
pub const INSTANCES: u64 = 20;

fn side(seed: u64) -> usize {
    SIDES[seed as usize % SIDES.len()]
}

/// Small network with every weight perturbed so no layer is trivial.
pub fn random_net(seed: u64) -> NetParams {
    let mut theta = NetParams::init(Architecture::new(vec![3, 4]).unwrap(), seed);
    let noise = normal_vec(theta.parameter_count(), 1000 + seed);
    for (w, n) in theta.iter_mut().zip(noise) {
        *w += 0.2 * n;
    }
    theta
}

/// Per-instance relative errors of `tv_grad`.
pub fn tv_grad_errors() -> Vec<f64> {
    (0..INSTANCES)
        .map(|seed| {
            let n = side(seed);
            let x = normal_vec(n * n, seed);
            let eps = [1e-2, 0.1, 1.0][seed as usize % 3];
            let g = tv_grad(&x, n, eps);
            let fd = fd_gradient(|v| tv_smooth(v, n, eps), &x, 1e-6);
            max_rel_error(&g, &fd, 1e-12)
        })
        .collect()
}

/// Per-instance relative errors of the input gradient of `net_backward`.
pub fn net_input_grad_errors() -> Vec<f64> {
    (0..INSTANCES)
        .map(|seed| {
            let n = side(seed);
            let theta = random_net(seed);
            let x = normal_vec(n * n, 50 + seed);
            let c = normal_vec(n * n, 90 + seed);
            let (_, gx) = net_backward(&theta, &x, n, &c).unwrap();
            let f = |v: &[f64]| net_forward(&theta, v, n).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            let fd = fd_gradient_piecewise(f, &x, 1e-6);
            max_rel_error(&gx, &fd, 1e-12)
        })
        .collect()
}

/// Per-instance relative errors of the weight gradient of `net_backward`,
/// along random directions and single weights.
pub fn net_weight_grad_errors() -> Vec<f64> {
    (0..INSTANCES)
        .map(|seed| {
            let n = side(seed);
            let theta = random_net(seed);
            let x = normal_vec(n * n, 130 + seed);
            let c = normal_vec(n * n, 170 + seed);
            let (gw, _) = net_backward(&theta, &x, n, &c).unwrap();
            let gw: Vec<f64> = gw.iter().copied().collect();
            let w0: Vec<f64> = theta.iter().copied().collect();
            let f = |w: &[f64]| {
                let mut t = theta.clone();
                t.iter_mut().zip(w).for_each(|(a, b)| *a = *b);
                net_forward(&t, &x, n).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
            };
            let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
            for k in 0..4 {
                let dir = normal_vec(w0.len(), 210 + 4 * seed + k);
                analytic.push(gw.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>());
                numeric.push(directional_fd_piecewise(f, &w0, &dir, 1e-6));
            }
            for idx in [0, w0.len() / 2, w0.len() - 1] {
                let mut e = vec![0.0; w0.len()];
                e[idx] = 1.0;
                analytic.push(gw[idx]);
                numeric.push(directional_fd_piecewise(f, &w0, &e, 1e-6));
            }
            max_rel_error(&analytic, &numeric, 1e-12)
        })
        .collect()
}

/// Per-instance relative errors of `reg_grad`.
pub fn reg_grad_errors() -> Vec<f64> {
    (0..INSTANCES)
        .map(|seed| {
            let n = side(seed);
            let theta = random_net(300 + seed);
            let tv = TVParams::new([0.0, 1.0, 15.0][seed as usize % 3], [1e-2, 0.1][seed as usize % 2]).unwrap();
            let x = normal_vec(n * n, 340 + seed);
            let g = reg_grad(&theta, &tv, &x, n).unwrap();
            let fd = fd_gradient_piecewise(|v| reg_value(&theta, &tv, v, n).unwrap(), &x, 1e-6);
            max_rel_error(&g, &fd, 1e-12)
        })
        .collect()
}

/// Worst singular value error against the Jacobi oracle over 20 random 20 x 12 matrices.
pub fn svd_spectral_error() -> f64 {
    (0..20)
        .map(|seed| {
            let m = random_matrix(20, 12, seed);
            let a = svd_truncate(&m, 1e-12).unwrap();
            assert_eq!(a.rank(), 12);
            let oracle = jacobi_singular_values(&m);
            a.sigma().iter().zip(&oracle).fold(0.0f64, |e, (s, o)| e.max((s - o).abs()))
        })
        .fold(0.0, f64::max)
}

/// Worst `|A A^+ A e_j - A e_j|` over the columns of 20 random 20 x 12 matrices.
pub fn pinv_reproduction_error() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let a = svd_truncate(&random_matrix(20, 12, 100 + seed), 1e-12).unwrap();
        for j in 0..12 {
            let mut e = vec![0.0; 12];
            e[j] = 1.0;
            let col = apply(&a, &e).unwrap();
            let back = apply(&a, &pseudo_inverse_apply(&a, &col).unwrap()).unwrap();
            worst = back.iter().zip(&col).fold(worst, |m, (x, y)| m.max((x - y).abs()));
        }
    }
    worst
}

/// Worst relative residual of `(A^T A + s I) z = b` on rank-deficient operators.
pub fn shifted_solve_residual() -> f64 {
    let mut worst = 0.0f64;
    for (seed, s) in [(0u64, 0.25), (1, 1e-3), (2, 10.0)] {
        let left = random_matrix(20, 8, 300 + seed);
        let right = random_matrix(8, 12, 400 + seed);
        let m = left.matmul(&right).unwrap();
        let a = svd_truncate(&m, 1e-10).unwrap();
        assert_eq!(a.rank(), 8);
        let b = normal_vec(12, 500 + seed);
        let z = solve_shifted(&a, s, &b).unwrap();
        let mtm = m.transpose().matmul(&m).unwrap();
        let lhs = DenseMatrix::from_fn(12, 12, |i, j| mtm.get(i, j) + if i == j { s } else { 0.0 })
            .matvec(&z)
            .unwrap();
        let res = lhs.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(res / bn);
    }
    worst
}

/// 5 x 5 grid of distances and times, including `|t - d| = R +- 1e-3`.
pub fn wave_grid(p: &KBParams) -> Vec<(f64, f64)> {
    let r = p.radius;
    let mut out = Vec::new();
    for d in [0.3, 0.6, 1.0, 1.4, 1.9] {
        for off in [-r + 1e-3, -0.37 * r, 0.41 * r, r - 1e-3, r + 1e-3] {
            out.push((d, d + off));
        }
    }
    out
}

/// Worst error of `wave_trace` against the quadrature oracle on [`wave_grid`],
/// relative to `max(|oracle|, largest oracle value)`.
pub fn wave_trace_error() -> f64 {
    let p = KBParams::new(2, 8.0, 0.1).unwrap();
    let grid = wave_grid(&p);
    let values: Vec<(f64, f64)> = grid
        .iter()
        .map(|&(d, t)| (wave_trace(&p, [0.0, 0.0], [d, 0.0], t), trace_oracle(&p, d, t, 1e-4)))
        .collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.1.abs()));
    assert!(scale > 0.0);
    values.iter().fold(0.0f64, |m, &(got, want)| m.max((got - want).abs() / want.abs().max(scale)))
}
