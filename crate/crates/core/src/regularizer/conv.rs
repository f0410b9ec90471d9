//! Feature maps and the convolution, pooling and resampling kernels of the
//! network, each with its reverse-mode counterpart.

/// Channel-major feature map (`C x H x W`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_image(side: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), side * side);
        Self {
            channels: 1,
            height: side,
            width: side,
            data,
        }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn relu_in_place(&mut self) {
        self.data.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// Stacks `self` and `other` along the channel axis.
    pub fn concat(&self, other: &Tensor) -> Tensor {
        debug_assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Inverse of [`Tensor::concat`] for gradients.
    pub fn split(self, first_channels: usize) -> (Tensor, Tensor) {
        let cut = first_channels * self.plane();
        let (h, w) = (self.height, self.width);
        let mut data = self.data;
        let tail = data.split_off(cut);
        (
            Tensor {
                channels: first_channels,
                height: h,
                width: w,
                data,
            },
            Tensor {
                channels: self.channels - first_channels,
                height: h,
                width: w,
                data: tail,
            },
        )
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    /// Zeroes the entries where the (post-activation) `output` is not positive.
    pub fn mask_relu(&mut self, output: &Tensor) {
        self.data
            .iter_mut()
            .zip(&output.data)
            .for_each(|(g, &o)| if o <= 0.0 { *g = 0.0 });
    }
}

/// 2x2 average pooling.
pub fn avg_pool(x: &Tensor) -> Tensor {
    let (h, w) = (x.height / 2, x.width / 2);
    let mut out = Tensor::zeros(x.channels, h, w);
    for c in 0..x.channels {
        let src = &x.data[c * x.plane()..(c + 1) * x.plane()];
        let dst = &mut out.data[c * h * w..(c + 1) * h * w];
        for i in 0..h {
            for j in 0..w {
                let a = src[2 * i * x.width + 2 * j];
                let b = src[2 * i * x.width + 2 * j + 1];
                let cc = src[(2 * i + 1) * x.width + 2 * j];
                let d = src[(2 * i + 1) * x.width + 2 * j + 1];
                dst[i * w + j] = 0.25 * (a + b + cc + d);
            }
        }
    }
    out
}

pub fn avg_pool_backward(g: &Tensor) -> Tensor {
    let (h, w) = (g.height * 2, g.width * 2);
    let mut out = Tensor::zeros(g.channels, h, w);
    for c in 0..g.channels {
        for i in 0..h {
            for j in 0..w {
                out.data[c * h * w + i * w + j] = 0.25 * g.data[c * g.plane() + (i / 2) * g.width + j / 2];
            }
        }
    }
    out
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample(x: &Tensor) -> Tensor {
    let (h, w) = (x.height * 2, x.width * 2);
    let mut out = Tensor::zeros(x.channels, h, w);
    for c in 0..x.channels {
        for i in 0..h {
            for j in 0..w {
                out.data[c * h * w + i * w + j] = x.data[c * x.plane() + (i / 2) * x.width + j / 2];
            }
        }
    }
    out
}

pub fn upsample_backward(g: &Tensor) -> Tensor {
    let (h, w) = (g.height / 2, g.width / 2);
    let mut out = Tensor::zeros(g.channels, h, w);
    for c in 0..g.channels {
        let src = &g.data[c * g.plane()..(c + 1) * g.plane()];
        for i in 0..h {
            for j in 0..w {
                let a = src[2 * i * g.width + 2 * j];
                let b = src[2 * i * g.width + 2 * j + 1];
                let cc = src[(2 * i + 1) * g.width + 2 * j];
                let d = src[(2 * i + 1) * g.width + 2 * j + 1];
                out.data[c * h * w + i * w + j] = a + b + cc + d;
            }
        }
    }
    out
}

/// Square convolution with zero "same" padding and unit stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `out x in x k x k`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients of one [`Conv2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Unfolds `x` into a `(in k k) x (H W)` patch matrix.
    fn im2col(&self, x: &Tensor) -> Vec<f64> {
        let (h, w, k) = (x.height, x.width, self.kernel);
        let pad = (k / 2) as isize;
        let hw = h * w;
        let mut cols = vec![0.0; self.patch_len() * hw];
        for c in 0..x.channels {
            let src = &x.data[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * hw..(row + 1) * hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for i in 0..h {
                        let si = i as isize + dy;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        let si = si as usize;
                        for j in 0..w {
                            let sj = j as isize + dx;
                            if sj >= 0 && sj < w as isize {
                                dst[i * w + j] = src[si * w + sj as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize) -> Tensor {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        let mut out = Tensor::zeros(self.in_channels, h, w);
        for c in 0..self.in_channels {
            let dst = &mut out.data[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * hw..(row + 1) * hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for i in 0..h {
                        let si = i as isize + dy;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        let si = si as usize;
                        for j in 0..w {
                            let sj = j as isize + dx;
                            if sj >= 0 && sj < w as isize {
                                dst[si * w + sj as usize] += src[i * w + j];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        debug_assert_eq!(x.channels, self.in_channels);
        let hw = x.plane();
        let mut out = Tensor::zeros(self.out_channels, x.height, x.width);
        for (o, b) in self.bias.iter().enumerate() {
            out.data[o * hw..(o + 1) * hw].fill(*b);
        }
        let owned;
        let cols: &[f64] = if self.kernel == 1 {
            &x.data
        } else {
            owned = self.im2col(x);
            &owned
        };
        let kk = self.patch_len();
        // out (o x hw) += W (o x kk) * cols (kk x hw)
        unsafe {
            matrixmultiply::dgemm(
                self.out_channels,
                kk,
                hw,
                1.0,
                self.weight.as_ptr(),
                kk as isize,
                1,
                cols.as_ptr(),
                hw as isize,
                1,
                1.0,
                out.data.as_mut_ptr(),
                hw as isize,
                1,
            );
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient when `need_input` is set.
    pub fn backward(
        &self,
        x: &Tensor,
        g_out: &Tensor,
        grad: &mut ConvGrad,
        need_input: bool,
    ) -> Option<Tensor> {
        let hw = x.plane();
        let kk = self.patch_len();
        let owned;
        let cols: &[f64] = if self.kernel == 1 {
            &x.data
        } else {
            owned = self.im2col(x);
            &owned
        };
        for o in 0..self.out_channels {
            grad.bias[o] += g_out.data[o * hw..(o + 1) * hw].iter().sum::<f64>();
        }
        // dW (o x kk) += dOut (o x hw) * cols^T (hw x kk)
        unsafe {
            matrixmultiply::dgemm(
                self.out_channels,
                hw,
                kk,
                1.0,
                g_out.data.as_ptr(),
                hw as isize,
                1,
                cols.as_ptr(),
                1,
                hw as isize,
                1.0,
                grad.weight.as_mut_ptr(),
                kk as isize,
                1,
            );
        }
        if !need_input {
            return None;
        }
        // dcols (kk x hw) = W^T (kk x o) * dOut (o x hw)
        let mut dcols = vec![0.0; kk * hw];
        unsafe {
            matrixmultiply::dgemm(
                kk,
                self.out_channels,
                hw,
                1.0,
                self.weight.as_ptr(),
                1,
                kk as isize,
                g_out.data.as_ptr(),
                hw as isize,
                1,
                0.0,
                dcols.as_mut_ptr(),
                hw as isize,
                1,
            );
        }
        if self.kernel == 1 {
            return Some(Tensor {
                channels: self.in_channels,
                height: x.height,
                width: x.width,
                data: dcols,
            });
        }
        Some(self.col2im(&dcols, x.height, x.width))
    }
}

impl ConvGrad {
    pub fn zeros_like(conv: &Conv2d) -> Self {
        Self {
            weight: vec![0.0; conv.weight.len()],
            bias: vec![0.0; conv.bias.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_and_upsample_are_adjoint_up_to_scale() {
        let x = Tensor {
            channels: 2,
            height: 4,
            width: 4,
            data: (0..32).map(|v| v as f64 * 0.3 - 2.0).collect(),
        };
        let y = Tensor {
            channels: 2,
            height: 2,
            width: 2,
            data: (0..8).map(|v| (v as f64).cos()).collect(),
        };
        let lhs: f64 = avg_pool(&x).data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&avg_pool_backward(&y).data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let lhs: f64 = upsample(&y).data.iter().zip(&x.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = y.data.iter().zip(&upsample_backward(&x).data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn identity_kernel_copies_input() {
        let mut conv = Conv2d::zeros(1, 1, 3);
        conv.weight[4] = 1.0;
        let x = Tensor::from_image(3, (0..9).map(f64::from).collect());
        assert_eq!(conv.forward(&x), x);
    }

    #[test]
    fn concat_split_round_trip() {
        let a = Tensor::zeros(2, 2, 2);
        let mut b = Tensor::zeros(3, 2, 2);
        b.data[5] = 1.0;
        let (a2, b2) = a.concat(&b).split(2);
        assert_eq!((a2, b2), (a, b));
    }
}
