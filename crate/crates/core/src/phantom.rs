//! Synthetic phantoms, noisy data and training pairs.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{NettError, Result};
use crate::linops::io::{read_f64s, read_u64};
use crate::linops::{apply, pseudo_inverse_apply, ForwardOperator};
use crate::pat::ImageGrid;
use crate::rng::{self, purpose, Rng, StreamRng};

/// Ranges of the ring generator, in unit-disc lengths.
pub mod ring_ranges {
    pub const COUNT: (u32, u32) = (1, 3);
    pub const SIDE: (f64, f64) = (0.3, 0.9);
    pub const THICKNESS: (f64, f64) = (0.05, 0.15);
    pub const AMPLITUDE: (f64, f64) = (0.5, 1.0);
}

/// Ranges of the out-of-distribution circles generator.
pub mod circle_ranges {
    pub const COUNT: (u32, u32) = (2, 5);
    pub const RADIUS: (f64, f64) = (0.05, 0.25);
    pub const AMPLITUDE: (f64, f64) = (0.5, 1.0);
}

/// Shapes stay this far inside the unit circle.
const DISC_MARGIN: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Ring,
    Circles,
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::Ring => "ring",
            PhantomKind::Circles => "circles",
        })
    }
}

impl std::str::FromStr for PhantomKind {
    type Err = NettError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(PhantomKind::Ring),
            "circles" => Ok(PhantomKind::Circles),
            other => Err(NettError::InvalidParameter(format!("unknown phantom kind '{other}'"))),
        }
    }
}

/// Ground-truth coefficient image with values in `[0, 1]`, supported in the
/// unit disc.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Vec<f64>,
    pub side: usize,
    pub seed: u64,
    pub kind: PhantomKind,
}

/// Phantom together with its pseudo-inverse reconstruction from noisy data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub truth: Phantom,
    pub corrupted: Vec<f64>,
    pub noise_sigma: f64,
}

fn uniform(rng: &mut StreamRng, range: (f64, f64)) -> f64 {
    range.0 + (range.1 - range.0) * rng.random::<f64>()
}

fn point_in_disc(rng: &mut StreamRng, radius: f64) -> [f64; 2] {
    loop {
        let p = [2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0];
        if p[0].hypot(p[1]) <= 1.0 {
            return [radius * p[0], radius * p[1]];
        }
    }
}

fn check_side(n: usize) -> Result<ImageGrid> {
    if n < 16 {
        return Err(NettError::InvalidParameter(format!(
            "phantoms need N >= 16, got {n}"
        )));
    }
    ImageGrid::new(n)
}

struct SquareRing {
    center: [f64; 2],
    half_side: f64,
    thickness: f64,
    amp: (f64, f64),
    dir: [f64; 2],
}

impl SquareRing {
    fn value(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let cheb = dx.abs().max(dy.abs());
        if cheb > self.half_side || cheb < self.half_side - self.thickness {
            return 0.0;
        }
        let half_diag = self.half_side * std::f64::consts::SQRT_2;
        let s = ((dx * self.dir[0] + dy * self.dir[1]) / half_diag).clamp(-1.0, 1.0);
        self.amp.0 + (self.amp.1 - self.amp.0) * 0.5 * (s + 1.0)
    }
}

/// One to three axis-aligned square annuli whose amplitude varies linearly
/// along a random direction.
pub fn gen_ring_phantom(n: usize, seed: u64) -> Result<Phantom> {
    gen_ring_phantom_indexed(n, seed, 0)
}

/// Ring phantom from stream `index` of `seed`.
pub fn gen_ring_phantom_indexed(n: usize, seed: u64, index: u64) -> Result<Phantom> {
    let grid = check_side(n)?;
    let mut rng = rng::stream(seed, purpose::RING_PHANTOM, index);
    let count = rng.random_range(ring_ranges::COUNT.0..=ring_ranges::COUNT.1);
    let rings: Vec<SquareRing> = (0..count)
        .map(|_| {
            let side = uniform(&mut rng, ring_ranges::SIDE);
            let thickness = uniform(&mut rng, ring_ranges::THICKNESS).min(0.5 * side);
            let center = point_in_disc(&mut rng, DISC_MARGIN - side * std::f64::consts::FRAC_1_SQRT_2);
            let amp = (
                uniform(&mut rng, ring_ranges::AMPLITUDE),
                uniform(&mut rng, ring_ranges::AMPLITUDE),
            );
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            SquareRing {
                center,
                half_side: 0.5 * side,
                thickness,
                amp,
                dir: [phi.cos(), phi.sin()],
            }
        })
        .collect();
    let image = grid
        .centers()
        .map(|p| rings.iter().map(|r| r.value(p)).fold(0.0, f64::max))
        .collect();
    Ok(Phantom {
        image,
        side: n,
        seed,
        kind: PhantomKind::Ring,
    })
}

/// Two to five filled discs of constant amplitude.
pub fn gen_circles_phantom(n: usize, seed: u64) -> Result<Phantom> {
    let grid = check_side(n)?;
    let mut rng = rng::stream(seed, purpose::CIRCLES_PHANTOM, 0);
    let count = rng.random_range(circle_ranges::COUNT.0..=circle_ranges::COUNT.1);
    let discs: Vec<([f64; 2], f64, f64)> = (0..count)
        .map(|_| {
            let radius = uniform(&mut rng, circle_ranges::RADIUS);
            let center = point_in_disc(&mut rng, DISC_MARGIN - radius);
            let amp = uniform(&mut rng, circle_ranges::AMPLITUDE);
            (center, radius, amp)
        })
        .collect();
    let image = grid
        .centers()
        .map(|p| {
            discs
                .iter()
                .filter(|(c, r, _)| (p[0] - c[0]).hypot(p[1] - c[1]) <= *r)
                .map(|d| d.2)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(Phantom {
        image,
        side: n,
        seed,
        kind: PhantomKind::Circles,
    })
}

fn check_operator(a: &ForwardOperator, x: &[f64]) -> Result<()> {
    if a.cols() != x.len() {
        return Err(NettError::dims("phantom vs operator", a.cols(), x.len()));
    }
    Ok(())
}

fn add_noise(mut data: Vec<f64>, sigma: f64, rng: &mut StreamRng) -> Vec<f64> {
    if sigma > 0.0 {
        let scale = sigma * data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &mut data {
            *v += scale * rng::normal(rng);
        }
    }
    data
}

/// `A x + eta` with i.i.d. Gaussian `eta` of standard deviation
/// `sigma * ||A x||_inf`.
pub fn simulate_data(a: &ForwardOperator, x: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    simulate_data_indexed(a, x, sigma, seed, 0)
}

/// [`simulate_data`] drawing from noise stream `index` of `seed`.
pub fn simulate_data_indexed(
    a: &ForwardOperator,
    x: &[f64],
    sigma: f64,
    seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(NettError::InvalidParameter(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    check_operator(a, x)?;
    let mut rng = rng::stream(seed, purpose::NOISE, index);
    Ok(add_noise(apply(a, x)?, sigma, &mut rng))
}

/// Ring phantoms `x_a` with pseudo-inverse reconstructions
/// `h_a = A^+ (A x_a + eta_a)`. Item `a` uses phantom and noise streams `a`,
/// so any subset can be regenerated independently.
pub fn make_training_set(
    a: &ForwardOperator,
    n: usize,
    count: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if count == 0 {
        return Err(NettError::InvalidParameter("training set needs count >= 1".into()));
    }
    (0..count as u64)
        .map(|idx| {
            let truth = gen_ring_phantom_indexed(n, seed, idx)?;
            let y = simulate_data_indexed(a, &truth.image, sigma, seed, idx)?;
            let corrupted = pseudo_inverse_apply(a, &y)?;
            Ok(TrainingPair {
                truth,
                corrupted,
                noise_sigma: sigma,
            })
        })
        .collect()
}

/// Magic prefix of image/dataset files.
pub const IMAGE_MAGIC: &[u8; 8] = b"NETTIMG1";

/// A stack of equally sized square images with free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub side: usize,
    pub images: Vec<Vec<f64>>,
    pub meta: Vec<(String, String)>,
}

impl ImageStack {
    pub fn new(side: usize, images: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = images.iter().find(|im| im.len() != side * side) {
            return Err(NettError::dims("image stack entry", side * side, bad.len()));
        }
        Ok(Self {
            side,
            images,
            meta: Vec::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(IMAGE_MAGIC)?;
        w.write_all(&(self.side as u64).to_le_bytes())?;
        w.write_all(&(self.images.len() as u64).to_le_bytes())?;
        for v in self.images.iter().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != IMAGE_MAGIC {
            return Err(NettError::Format("missing NETTIMG1 magic".into()));
        }
        let side = read_u64(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let flat = read_f64s(&mut r, side * side * count)?;
        let images = if side == 0 {
            vec![Vec::new(); count]
        } else {
            flat.chunks_exact(side * side).map(<[f64]>::to_vec).collect()
        };
        Ok(Self {
            side,
            images,
            meta: Vec::new(),
        })
    }

    /// Writes the binary file and its `.meta` key-value sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_to(BufWriter::new(File::create(path)?))?;
        let mut text = String::new();
        for (k, v) in &self.meta {
            text.push_str(&format!("{k} = {v}\n"));
        }
        fs::write(sidecar_path(path), text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|_| NettError::MissingArtifact(format!("image file {}", path.display())))?;
        let mut stack = Self::read_from(BufReader::new(file))?;
        if let Ok(text) = fs::read_to_string(sidecar_path(path)) {
            stack.meta = text
                .lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect();
        }
        Ok(stack)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Per-pixel mean squared error.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{svd_truncate, DenseMatrix};

    fn inside_disc_and_bounded(p: &Phantom) -> bool {
        let grid = ImageGrid::new(p.side).unwrap();
        let ok = p.image.iter().zip(grid.centers()).all(|(&v, c)| {
            (0.0..=1.0).contains(&v) && (v == 0.0 || c[0].hypot(c[1]) < 1.0)
        });
        ok
    }

    #[test]
    fn ring_phantoms_are_deterministic_and_bounded() {
        assert_eq!(gen_ring_phantom(32, 9).unwrap(), gen_ring_phantom(32, 9).unwrap());
        assert_ne!(gen_ring_phantom(32, 9).unwrap().image, gen_ring_phantom(32, 10).unwrap().image);
        for seed in 0..100 {
            let p = gen_ring_phantom(32, seed).unwrap();
            assert!(inside_disc_and_bounded(&p), "seed {seed}");
            assert!(p.image.iter().any(|&v| v > 0.0));
        }
    }

    #[test]
    fn circles_phantoms_are_deterministic_and_bounded() {
        assert_eq!(gen_circles_phantom(32, 3).unwrap(), gen_circles_phantom(32, 3).unwrap());
        for seed in 0..100 {
            assert!(inside_disc_and_bounded(&gen_circles_phantom(32, seed).unwrap()));
        }
    }

    #[test]
    fn small_grids_rejected() {
        assert!(gen_ring_phantom(8, 0).is_err());
        assert!(gen_circles_phantom(15, 0).is_err());
    }

    #[test]
    fn zero_noise_gives_exact_data() {
        let a = svd_truncate(&DenseMatrix::from_fn(6, 4, |i, j| (i as f64 - j as f64).sin()), 1e-9).unwrap();
        let x = [0.5, -1.0, 2.0, 0.25];
        assert_eq!(simulate_data(&a, &x, 0.0, 1).unwrap(), apply(&a, &x).unwrap());
        assert!(simulate_data(&a, &x, -0.1, 1).is_err());
        assert!(simulate_data(&a, &x[..3], 0.1, 1).is_err());
    }

    #[test]
    fn image_stack_round_trip() {
        let stack = ImageStack::new(2, vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 4]])
            .unwrap()
            .with_meta("kind", PhantomKind::Ring)
            .with_meta("seed", 4);
        let mut bytes = Vec::new();
        stack.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 16 + 8 * 8);
        let back = ImageStack::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.images, stack.images);
        assert!(ImageStack::new(3, vec![vec![0.0; 4]]).is_err());
    }
}
