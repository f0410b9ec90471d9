//! Smoothed total variation with forward differences and replicate boundary
//! (differences that would leave the image are zero).

/// `sum_{i1,i2} sqrt(dx^2 + dy^2 + eps^2)`.
pub fn tv_smooth(x: &[f64], side: usize, epsilon: f64) -> f64 {
    let eps2 = epsilon * epsilon;
    let mut total = 0.0;
    for i in 0..side {
        for j in 0..side {
            let (dx, dy) = differences(x, side, i, j);
            total += (dx * dx + dy * dy + eps2).sqrt();
        }
    }
    total
}

/// Exact gradient of [`tv_smooth`].
pub fn tv_grad(x: &[f64], side: usize, epsilon: f64) -> Vec<f64> {
    let eps2 = epsilon * epsilon;
    let mut g = vec![0.0; x.len()];
    for i in 0..side {
        for j in 0..side {
            let (dx, dy) = differences(x, side, i, j);
            let inv = 1.0 / (dx * dx + dy * dy + eps2).sqrt();
            let k = i * side + j;
            if i + 1 < side {
                g[k + side] += dx * inv;
                g[k] -= dx * inv;
            }
            if j + 1 < side {
                g[k + 1] += dy * inv;
                g[k] -= dy * inv;
            }
        }
    }
    g
}

#[inline]
fn differences(x: &[f64], side: usize, i: usize, j: usize) -> (f64, f64) {
    let k = i * side + j;
    let dx = if i + 1 < side { x[k + side] - x[k] } else { 0.0 };
    let dy = if j + 1 < side { x[k + 1] - x[k] } else { 0.0 };
    (dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_minimal_value_and_zero_gradient() {
        for side in [1, 3, 8] {
            let x = vec![0.7; side * side];
            let v = tv_smooth(&x, side, 1e-3);
            assert!((v - (side * side) as f64 * 1e-3).abs() < 1e-15);
            assert!(tv_grad(&x, side, 1e-3).iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn large_epsilon_dominates() {
        let x: Vec<f64> = (0..64).map(|k| ((k * 37) % 11) as f64 / 10.0).collect();
        let eps = 1e3;
        let v = tv_smooth(&x, 8, eps);
        let base = 64.0 * eps;
        assert!((v - base) / base < 1e-6);
    }

    #[test]
    fn interior_shift_equivariance() {
        let side = 12;
        let bump = |ci: usize, cj: usize| {
            let mut x = vec![0.0; side * side];
            x[ci * side + cj] = 1.0;
            x[(ci + 1) * side + cj] = 0.5;
            x[ci * side + cj + 1] = 0.25;
            x
        };
        let g1 = tv_grad(&bump(4, 4), side, 1e-2);
        let g2 = tv_grad(&bump(5, 6), side, 1e-2);
        for i in 2..8 {
            for j in 2..8 {
                assert!((g1[i * side + j] - g2[(i + 1) * side + j + 2]).abs() < 1e-14);
            }
        }
    }
}
