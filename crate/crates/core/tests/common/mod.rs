//! Independent oracles shared by the integration suites.

#![allow(dead_code)]

pub mod checks;

use nett_core::linops::DenseMatrix;
use nett_core::pat::KBParams;
use nett_core::regularizer::{Conv2d, Tensor};
use nett_core::rng::{self, purpose};

/// Seeded standard normal vector.
pub fn normal_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, purpose::THEORY, 0xA11CE);
    (0..len).map(|_| rng::normal(&mut r)).collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    DenseMatrix::from_row_major(rows, cols, normal_vec(rows * cols, seed)).unwrap()
}

/// Singular values by one-sided Jacobi rotations, descending.
pub fn jacobi_singular_values(m: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = (m.rows(), m.cols());
    // columns of the working matrix
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|v| v * v).sum();
                let beta: f64 = a[q].iter().map(|v| v * v).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[p][i], a[q][i]);
                    a[p][i] = c * x - s * y;
                    a[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s: Vec<f64> = a.iter().map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// `t M(d, t)` as an integral over the sphere of radius `t` about the sensor,
/// parameterized by the cosine `u` of the polar angle:
/// `t/2 * int_{-1}^{1} psi(sqrt(d^2 + t^2 + 2 d t u)) du`, cut where the
/// argument leaves the support.
pub fn potential_oracle(p: &KBParams, d: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let r = p.radius;
    let u_hi = ((r * r - d * d - t * t) / (2.0 * d * t)).min(1.0);
    if u_hi <= -1.0 {
        return 0.0;
    }
    // clamp so rounding at the cut cannot drop a non-zero boundary value
    let f = |u: f64| p.profile((d * d + t * t + 2.0 * d * t * u).max(0.0).sqrt().min(r));
    0.5 * t * simpson(f, -1.0, u_hi, 4000)
}

/// Pressure trace by a fourth-order central difference of the potential.
pub fn trace_oracle(p: &KBParams, d: f64, t: f64, h: f64) -> f64 {
    let g = |s: f64| potential_oracle(p, d, s);
    (g(t - 2.0 * h) - 8.0 * g(t - h) + 8.0 * g(t + h) - g(t + 2.0 * h)) / (12.0 * h)
}

/// Same-padded convolution by direct loops.
pub fn conv_loops(conv: &Conv2d, x: &Tensor) -> Tensor {
    let (h, w, k) = (x.height, x.width, conv.kernel);
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(conv.out_channels, h, w);
    for o in 0..conv.out_channels {
        for i in 0..h {
            for j in 0..w {
                let mut acc = conv.bias[o];
                for c in 0..conv.in_channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let si = i as isize + ky as isize - pad;
                            let sj = j as isize + kx as isize - pad;
                            if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                                continue;
                            }
                            let wv = conv.weight[((o * conv.in_channels + c) * k + ky) * k + kx];
                            acc += wv * x.data[(c * h + si as usize) * w + sj as usize];
                        }
                    }
                }
                out.data[(o * h + i) * w + j] = acc;
            }
        }
    }
    out
}

/// Central difference `(f(x + h e) - f(x - h e)) / 2h` along `e`.
pub fn directional_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], e: &[f64], h: f64) -> f64 {
    let plus: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(e).map(|(a, b)| a - h * b).collect();
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Componentwise central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut e = vec![0.0; x.len()];
    (0..x.len())
        .map(|i| {
            e[i] = 1.0;
            let g = directional_fd(&f, x, &e, h);
            e[i] = 0.0;
            g
        })
        .collect()
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn max_rel_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(floor, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Central difference that shrinks the step while the estimates at `h` and
/// `h/2` disagree, which happens when the stencil straddles a ReLU kink.
pub fn directional_fd_piecewise(f: impl Fn(&[f64]) -> f64, x: &[f64], e: &[f64], h: f64) -> f64 {
    let mut h = h;
    let mut coarse = directional_fd(&f, x, e, h);
    for _ in 0..4 {
        let fine = directional_fd(&f, x, e, 0.5 * h);
        if (fine - coarse).abs() <= 1e-6 * fine.abs().max(1.0) {
            return (4.0 * fine - coarse) / 3.0;
        }
        h *= 0.1;
        coarse = directional_fd(&f, x, e, h);
    }
    coarse
}

/// Componentwise [`directional_fd_piecewise`].
pub fn fd_gradient_piecewise(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut e = vec![0.0; x.len()];
    (0..x.len())
        .map(|i| {
            e[i] = 1.0;
            let g = directional_fd_piecewise(&f, x, &e, h);
            e[i] = 0.0;
            g
        })
        .collect()
}
