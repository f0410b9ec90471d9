//! Residual U-Net `Phi(x) = x + Net(x)` with hand-written reverse mode.
//!
//! Per scale: two `3x3 conv -> bias -> ReLU` blocks. Scales are linked by 2x2
//! average pooling on the way down and nearest-neighbour upsampling plus
//! channel concatenation with the matching encoder output on the way up. A
//! `1x1` convolution maps the top decoder features to one channel.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::conv::{avg_pool, avg_pool_backward, upsample, upsample_backward, Conv2d, ConvGrad, Tensor};
use crate::error::{NettError, Result};
use crate::linops::io::{read_f64s, read_u64};
use crate::rng::{self, purpose};

pub const NET_MAGIC: &[u8; 8] = b"NETTNET1";

/// Depth and per-scale channel counts of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    channels: Vec<usize>,
}

impl Architecture {
    pub fn new(channels: Vec<usize>) -> Result<Self> {
        if channels.is_empty() || channels.contains(&0) {
            return Err(NettError::InvalidParameter(
                "architecture needs at least one scale with positive channel counts".into(),
            ));
        }
        Ok(Self { channels })
    }

    /// Depth 3 with (16, 32, 64) channels.
    pub fn standard() -> Self {
        Self {
            channels: vec![16, 32, 64],
        }
    }

    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    /// Image sides must be divisible by this factor.
    pub fn side_multiple(&self) -> usize {
        1 << (self.depth() - 1)
    }

    fn encoder(&self, scale: usize, which: usize) -> usize {
        2 * scale + which
    }

    fn decoder(&self, scale: usize, which: usize) -> usize {
        2 * self.depth() + 2 * (self.depth() - 2 - scale) + which
    }

    fn output_layer(&self) -> usize {
        4 * self.depth() - 2
    }

    /// `(in, out, kernel)` for every layer in declaration order.
    fn layer_shapes(&self) -> Vec<(usize, usize, usize)> {
        let ch = &self.channels;
        let mut shapes = Vec::new();
        for s in 0..self.depth() {
            let cin = if s == 0 { 1 } else { ch[s - 1] };
            shapes.push((cin, ch[s], 3));
            shapes.push((ch[s], ch[s], 3));
        }
        for s in (0..self.depth() - 1).rev() {
            shapes.push((ch[s + 1] + ch[s], ch[s], 3));
            shapes.push((ch[s], ch[s], 3));
        }
        shapes.push((ch[0], 1, 1));
        shapes
    }
}

/// Network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    arch: Architecture,
    layers: Vec<Conv2d>,
}

/// Gradient with respect to every weight, laid out like [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub layers: Vec<ConvGrad>,
}

impl NetGradient {
    pub fn zeros_like(theta: &NetParams) -> Self {
        Self {
            layers: theta.layers.iter().map(ConvGrad::zeros_like).collect(),
        }
    }

    /// Flattened in declaration order (per layer: weights, then biases).
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(&l.bias))
    }

    pub fn add_assign(&mut self, other: &NetGradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }
}

impl NetParams {
    /// He-scaled Gaussian weights, zero biases and a zero output layer, so the
    /// fresh network is the identity map.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = rng::stream(seed, purpose::NET_INIT, 0);
        let shapes = arch.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .into_iter()
            .enumerate()
            .map(|(i, (cin, cout, k))| {
                let mut conv = Conv2d::zeros(cin, cout, k);
                if i != last {
                    let std = (2.0 / (cin * k * k) as f64).sqrt();
                    conv.weight.iter_mut().for_each(|w| *w = std * rng::normal(&mut rng));
                }
                conv
            })
            .collect();
        Self { arch, layers }
    }

    /// All-zero weights of the given architecture.
    pub fn zeros(arch: Architecture) -> Self {
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(cin, cout, k)| Conv2d::zeros(cin, cout, k))
            .collect();
        Self { arch, layers }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Conv2d] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Conv2d] {
        &mut self.layers
    }

    /// Output convolution (the last layer).
    pub fn output_layer_mut(&mut self) -> &mut Conv2d {
        self.layers.last_mut().expect("network has an output layer")
    }

    /// Zeroes the output layer, turning `Phi` into the identity.
    pub fn zero_output_layer(&mut self) {
        let out = self.output_layer_mut();
        out.weight.fill(0.0);
        out.bias.fill(0.0);
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(&l.bias))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn check_side(&self, side: usize, len: usize) -> Result<()> {
        if len != side * side {
            return Err(NettError::dims("network input", side * side, len));
        }
        let m = self.arch.side_multiple();
        if side == 0 || side % m != 0 {
            return Err(NettError::InvalidParameter(format!(
                "image side {side} is not divisible by {m} (network depth {})",
                self.arch.depth()
            )));
        }
        Ok(())
    }

    /// Runs `Net(x)` (without the residual), recording layer inputs and
    /// outputs when `trace` is given.
    fn run(&self, x: Tensor, mut trace: Option<&mut Trace>) -> Tensor {
        let arch = &self.arch;
        let depth = arch.depth();
        let mut record = |layer: usize, input: &Tensor, output: &Tensor| {
            if let Some(t) = trace.as_deref_mut() {
                t.inputs[layer] = Some(input.clone());
                t.outputs[layer] = Some(output.clone());
            }
        };
        let mut conv_relu = |layer: usize, input: Tensor| {
            let mut out = self.layers[layer].forward(&input);
            out.relu_in_place();
            record(layer, &input, &out);
            out
        };
        let mut skips: Vec<Tensor> = Vec::with_capacity(depth.saturating_sub(1));
        let mut h = x;
        for s in 0..depth {
            if s > 0 {
                h = avg_pool(&h);
            }
            h = conv_relu(arch.encoder(s, 0), h);
            h = conv_relu(arch.encoder(s, 1), h);
            if s + 1 < depth {
                skips.push(h.clone());
            }
        }
        for s in (0..depth - 1).rev() {
            h = upsample(&h).concat(&skips[s]);
            h = conv_relu(arch.decoder(s, 0), h);
            h = conv_relu(arch.decoder(s, 1), h);
        }
        let out_layer = arch.output_layer();
        let out = self.layers[out_layer].forward(&h);
        if let Some(t) = trace {
            t.inputs[out_layer] = Some(h);
        }
        out
    }

    /// Reverse pass of [`NetParams::run`]; returns the gradient with respect
    /// to the network input when requested.
    fn reverse(
        &self,
        trace: &Trace,
        g_out: Tensor,
        grad: &mut NetGradient,
        need_input: bool,
    ) -> Option<Tensor> {
        let arch = &self.arch;
        let depth = arch.depth();
        let conv_back = |layer: usize, mut g: Tensor, relu: bool, grad: &mut NetGradient, need: bool| {
            let input = trace.inputs[layer].as_ref().expect("traced input");
            if relu {
                g.mask_relu(trace.outputs[layer].as_ref().expect("traced output"));
            }
            self.layers[layer].backward(input, &g, &mut grad.layers[layer], need)
        };
        let out_layer = arch.output_layer();
        let mut g = conv_back(out_layer, g_out, false, grad, true).expect("input grad");
        let mut skip_grads: Vec<Option<Tensor>> = vec![None; depth.saturating_sub(1)];
        for s in 0..depth - 1 {
            g = conv_back(arch.decoder(s, 1), g, true, grad, true).expect("input grad");
            g = conv_back(arch.decoder(s, 0), g, true, grad, true).expect("input grad");
            let (g_up, g_skip) = g.split(arch.channels[s + 1]);
            skip_grads[s] = Some(g_skip);
            g = upsample_backward(&g_up);
        }
        for s in (0..depth).rev() {
            if let Some(extra) = skip_grads.get(s).and_then(Option::as_ref) {
                g.add_assign(extra);
            }
            g = conv_back(arch.encoder(s, 1), g, true, grad, true).expect("input grad");
            let need = s > 0 || need_input;
            let next = conv_back(arch.encoder(s, 0), g, true, grad, need);
            match next {
                Some(gi) if s > 0 => g = avg_pool_backward(&gi),
                other => return other,
            }
        }
        unreachable!("encoder loop returns at scale 0")
    }
}

struct Trace {
    inputs: Vec<Option<Tensor>>,
    outputs: Vec<Option<Tensor>>,
}

impl Trace {
    fn new(layers: usize) -> Self {
        Self {
            inputs: vec![None; layers],
            outputs: vec![None; layers],
        }
    }
}

/// `Phi(x) = x + Net(x)` for a square image of side `side`.
pub fn net_forward(theta: &NetParams, x: &[f64], side: usize) -> Result<Vec<f64>> {
    theta.check_side(side, x.len())?;
    let out = theta.run(Tensor::from_image(side, x.to_vec()), None);
    Ok(x.iter().zip(&out.data).map(|(a, b)| a + b).collect())
}

/// Result of a forward pass kept for a later reverse pass.
pub struct NetEvaluation {
    side: usize,
    trace: Trace,
    /// `Phi(x)`.
    pub output: Vec<f64>,
}

/// Forward pass that keeps what the reverse pass needs.
pub fn net_forward_traced(theta: &NetParams, x: &[f64], side: usize) -> Result<NetEvaluation> {
    theta.check_side(side, x.len())?;
    let mut trace = Trace::new(theta.layers.len());
    let out = theta.run(Tensor::from_image(side, x.to_vec()), Some(&mut trace));
    let output = x.iter().zip(&out.data).map(|(a, b)| a + b).collect();
    Ok(NetEvaluation {
        side,
        trace,
        output,
    })
}

/// Pulls `cotangent` back through a traced evaluation of `Phi`, adding the
/// weight gradient to `grad`; returns `J_Phi^T cotangent` when `need_input`.
pub fn net_pullback(
    theta: &NetParams,
    eval: &NetEvaluation,
    cotangent: &[f64],
    grad: &mut NetGradient,
    need_input: bool,
) -> Result<Option<Vec<f64>>> {
    if cotangent.len() != eval.side * eval.side {
        return Err(NettError::dims("cotangent", eval.side * eval.side, cotangent.len()));
    }
    let g = Tensor::from_image(eval.side, cotangent.to_vec());
    let gx = theta.reverse(&eval.trace, g, grad, need_input);
    Ok(gx.map(|gx| cotangent.iter().zip(&gx.data).map(|(c, g)| c + g).collect()))
}

/// Exact reverse-mode gradients of `<cotangent, Phi(x)>` with respect to the
/// weights and the input.
pub fn net_backward(
    theta: &NetParams,
    x: &[f64],
    side: usize,
    cotangent: &[f64],
) -> Result<(NetGradient, Vec<f64>)> {
    let eval = net_forward_traced(theta, x, side)?;
    let mut grad = NetGradient::zeros_like(theta);
    let gx = net_pullback(theta, &eval, cotangent, &mut grad, true)?.expect("input gradient requested");
    Ok((grad, gx))
}

impl NetParams {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(NET_MAGIC)?;
        w.write_all(&(self.arch.depth() as u64).to_le_bytes())?;
        for &c in self.arch.channels() {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        w.write_all(&(self.layers.len() as u64).to_le_bytes())?;
        for l in &self.layers {
            for v in [l.in_channels, l.out_channels, l.kernel] {
                w.write_all(&(v as u64).to_le_bytes())?;
            }
        }
        for v in self.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != NET_MAGIC {
            return Err(NettError::Format("missing NETTNET1 magic".into()));
        }
        let depth = read_u64(&mut r)? as usize;
        if depth == 0 || depth > 16 {
            return Err(NettError::Format(format!("implausible network depth {depth}")));
        }
        let channels = (0..depth)
            .map(|_| read_u64(&mut r).map(|c| c as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = Architecture::new(channels)?;
        let mut theta = NetParams::zeros(arch);
        let count = read_u64(&mut r)? as usize;
        if count != theta.layers.len() {
            return Err(NettError::Format(format!(
                "layer count {count} does not match architecture ({})",
                theta.layers.len()
            )));
        }
        for l in &theta.layers {
            let shape = [read_u64(&mut r)?, read_u64(&mut r)?, read_u64(&mut r)?];
            if shape != [l.in_channels as u64, l.out_channels as u64, l.kernel as u64] {
                return Err(NettError::Format("layer shape does not match architecture".into()));
            }
        }
        let values = read_f64s(&mut r, theta.parameter_count())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NettError::NonFinite("network weights".into()));
        }
        theta.iter_mut().zip(values).for_each(|(p, v)| *p = v);
        Ok(theta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|_| NettError::MissingArtifact(format!("weights file {}", path.display())))?;
        Self::read_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(side: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, purpose::THEORY, 99);
        (0..side * side).map(|_| rng::normal(&mut rng)).collect()
    }

    #[test]
    fn fresh_network_is_identity() {
        let theta = NetParams::init(Architecture::standard(), 3);
        let x = image(8, 1);
        assert_eq!(net_forward(&theta, &x, 8).unwrap(), x);
    }

    #[test]
    fn zero_input_maps_to_zero_without_biases() {
        let mut theta = NetParams::init(Architecture::standard(), 3);
        theta.output_layer_mut().weight.iter_mut().for_each(|w| *w = 0.3);
        let out = net_forward(&theta, &[0.0; 64], 8).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut theta = NetParams::init(Architecture::standard(), 5);
        theta.output_layer_mut().weight.iter_mut().for_each(|w| *w = -0.2);
        let (g, gx) = net_backward(&theta, &image(8, 2), 8, &[0.0; 64]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_network_passes_cotangent_through() {
        let theta = NetParams::init(Architecture::standard(), 5);
        let c = image(8, 7);
        let (_, gx) = net_backward(&theta, &image(8, 2), 8, &c).unwrap();
        assert_eq!(gx, c);
    }

    #[test]
    fn side_must_match_depth() {
        let theta = NetParams::init(Architecture::standard(), 0);
        assert!(net_forward(&theta, &[0.0; 36], 6).is_err());
        assert!(net_forward(&theta, &[0.0; 10], 4).is_err());
    }

    #[test]
    fn weights_round_trip() {
        let mut theta = NetParams::init(Architecture::new(vec![2, 3]).unwrap(), 11);
        theta.output_layer_mut().bias[0] = 0.125;
        let mut bytes = Vec::new();
        theta.write_to(&mut bytes).unwrap();
        let back = NetParams::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, theta);
        bytes[8] = 9;
        assert!(NetParams::read_from(bytes.as_slice()).is_err());
    }
}
