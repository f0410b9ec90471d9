use super::geometry::{ImageGrid, ScanGeometry, StripeMask};
use super::kb::KBParams;
use super::wave::wave_trace;
use crate::error::{NettError, Result};
use crate::linops::{svd_truncate, DenseMatrix, ForwardOperator};

/// Model matrix `W` with entry `(N_t k + j, N i1 + i2)` equal to the trace of
/// the blob at pixel `(i1, i2)` seen by sensor `k` at time `j`.
pub fn assemble_model_matrix(grid: &ImageGrid, geom: &ScanGeometry, p: &KBParams) -> DenseMatrix {
    let n_t = geom.times().len();
    let cols = grid.pixels();
    let centers: Vec<[f64; 2]> = grid.centers().collect();
    let mut w = DenseMatrix::zeros(geom.data_len(), cols);
    for (k, &sensor) in geom.sensors().iter().enumerate() {
        for (col, &center) in centers.iter().enumerate() {
            let d = (sensor[0] - center[0]).hypot(sensor[1] - center[1]);
            for (j, &t) in geom.times().iter().enumerate() {
                if (t - d).abs() >= p.radius {
                    continue;
                }
                w.set(n_t * k + j, col, wave_trace(p, center, sensor, t));
            }
        }
    }
    w
}

/// `M * M_I`: zeroes the columns of masked pixels.
pub fn apply_mask(mask: &StripeMask, grid: &ImageGrid, m: &DenseMatrix) -> Result<DenseMatrix> {
    if m.cols() != grid.pixels() {
        return Err(NettError::dims("apply_mask columns", grid.pixels(), m.cols()));
    }
    if mask.indicator().len() != grid.pixels() {
        return Err(NettError::dims("mask length", grid.pixels(), mask.indicator().len()));
    }
    let mut out = m.clone();
    let cols = m.cols();
    let kept = mask.indicator();
    for row in out.as_mut_slice().chunks_exact_mut(cols) {
        for (v, &k) in row.iter_mut().zip(kept) {
            if !k {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Truncation threshold for the singular values of `W M_I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Absolute(f64),
    /// Fraction of the largest singular value.
    Relative(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Relative(1e-3)
    }
}

/// Assembles `W`, masks it and truncates its SVD.
pub fn build_forward(
    grid: &ImageGrid,
    geom: &ScanGeometry,
    p: &KBParams,
    mask: &StripeMask,
    truncation: Truncation,
) -> Result<ForwardOperator> {
    let w = assemble_model_matrix(grid, geom, p);
    let masked = apply_mask(mask, grid, &w)?;
    match truncation {
        Truncation::Absolute(s) => svd_truncate(&masked, s),
        Truncation::Relative(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(NettError::InvalidParameter(format!(
                    "relative truncation must lie in (0, 1), got {f}"
                )));
            }
            // The threshold depends on sigma_max, so factor once with a
            // tiny absolute threshold and cut afterwards.
            let full = svd_truncate(&masked, f64::MIN_POSITIVE)?;
            let cut = f * full.sigma_max();
            truncate_further(full, cut)
        }
    }
}

fn truncate_further(a: ForwardOperator, sigma_star: f64) -> Result<ForwardOperator> {
    let keep = a.sigma().iter().take_while(|&&s| s >= sigma_star).count();
    if keep == 0 {
        return Err(NettError::OperatorAnnihilated { sigma_star });
    }
    let (m, n) = (a.rows(), a.cols());
    let u = DenseMatrix::from_fn(m, keep, |i, k| a.u().get(i, k));
    let vt = DenseMatrix::from_row_major(keep, n, a.vt().as_slice()[..keep * n].to_vec())?;
    ForwardOperator::from_factors(u, a.sigma()[..keep].to_vec(), vt, sigma_star)
}

/// Everything that defines a masked PAT operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PatSetup {
    pub grid: ImageGrid,
    pub geometry: ScanGeometry,
    pub kb: KBParams,
    pub mask: StripeMask,
    pub truncation: Truncation,
}

impl PatSetup {
    /// Default desk setup: diagonal stripe of the given width, KB blobs with
    /// a two-pixel radius, relative truncation `1e-3`.
    pub fn standard(n: usize, n_sensors: usize, n_times: usize, mask_width: f64) -> Result<Self> {
        let grid = ImageGrid::new(n)?;
        let geometry = ScanGeometry::uniform(n_sensors, n_times)?;
        let kb = KBParams::for_spacing(grid.spacing());
        let mask = StripeMask::diagonal(&grid, mask_width)?;
        Ok(Self {
            grid,
            geometry,
            kb,
            mask,
            truncation: Truncation::default(),
        })
    }

    pub fn build(&self) -> Result<ForwardOperator> {
        build_forward(&self.grid, &self.geometry, &self.kb, &self.mask, self.truncation)
    }
}
