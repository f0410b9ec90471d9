use std::f64::consts::PI;

use crate::error::{NettError, Result};

/// `N x N` grid of blob centers covering `[-1, 1]^2` with spacing `2/N`.
///
/// Pixel `(i1, i2)` sits at `(-1 + (2 i1 + 1)/N, -1 + (2 i2 + 1)/N)` and has
/// flat index `N i1 + i2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    n: usize,
}

impl ImageGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(NettError::InvalidParameter("grid size must be positive".into()));
        }
        Ok(Self { n })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn pixels(&self) -> usize {
        self.n * self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -1.0 + (2 * i + 1) as f64 / self.n as f64
    }

    pub fn center(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.coordinate(i1), self.coordinate(i2)]
    }

    pub fn center_of(&self, flat: usize) -> [f64; 2] {
        self.center(flat / self.n, flat % self.n)
    }

    pub fn centers(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.pixels()).map(move |k| self.center_of(k))
    }
}

/// Sensor positions on the unit circle and sampling times in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGeometry {
    sensors: Vec<[f64; 2]>,
    times: Vec<f64>,
}

impl ScanGeometry {
    /// `n_sensors` equispaced sensors starting at angle 0, `n_times` uniform
    /// samples from 0 to 2 inclusive.
    pub fn uniform(n_sensors: usize, n_times: usize) -> Result<Self> {
        if n_sensors == 0 || n_times == 0 {
            return Err(NettError::InvalidParameter(
                "need at least one sensor and one time sample".into(),
            ));
        }
        let sensors = (0..n_sensors)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n_sensors as f64;
                [phi.cos(), phi.sin()]
            })
            .collect();
        let times = if n_times == 1 {
            vec![0.0]
        } else {
            (0..n_times)
                .map(|j| 2.0 * j as f64 / (n_times - 1) as f64)
                .collect()
        };
        Ok(Self { sensors, times })
    }

    pub fn from_parts(sensors: Vec<[f64; 2]>, times: Vec<f64>) -> Result<Self> {
        if sensors.is_empty() || times.is_empty() {
            return Err(NettError::InvalidParameter(
                "need at least one sensor and one time sample".into(),
            ));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NettError::InvalidParameter(
                "times must be non-negative and strictly increasing".into(),
            ));
        }
        Ok(Self { sensors, times })
    }

    pub fn sensors(&self) -> &[[f64; 2]] {
        &self.sensors
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Length of the flattened data vector, `N_s * N_t`.
    pub fn data_len(&self) -> usize {
        self.sensors.len() * self.times.len()
    }
}

/// Band around a line through the origin whose pixels produce no data.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeMask {
    width: f64,
    direction: [f64; 2],
    kept: Vec<bool>,
}

impl StripeMask {
    /// Masks every pixel whose distance to the axis is below `width / 2`.
    pub fn new(grid: &ImageGrid, width: f64, direction: [f64; 2]) -> Result<Self> {
        if !(width >= 0.0) {
            return Err(NettError::InvalidParameter(format!(
                "mask width must be non-negative, got {width}"
            )));
        }
        let len = direction[0].hypot(direction[1]);
        if !(len > 0.0) {
            return Err(NettError::InvalidParameter("mask direction must be non-zero".into()));
        }
        let direction = [direction[0] / len, direction[1] / len];
        let kept = grid
            .centers()
            .map(|r| (r[0] * direction[1] - r[1] * direction[0]).abs() >= 0.5 * width)
            .collect();
        Ok(Self {
            width,
            direction,
            kept,
        })
    }

    /// Stripe along the main diagonal `(1, 1)/sqrt(2)`.
    pub fn diagonal(grid: &ImageGrid, width: f64) -> Result<Self> {
        Self::new(grid, width, [1.0, 1.0])
    }

    pub fn all_kept(grid: &ImageGrid) -> Self {
        Self {
            width: 0.0,
            direction: [std::f64::consts::FRAC_1_SQRT_2; 2],
            kept: vec![true; grid.pixels()],
        }
    }

    pub fn from_indicator(kept: Vec<bool>) -> Self {
        Self {
            width: f64::NAN,
            direction: [f64::NAN; 2],
            kept,
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    /// `true` where the pixel contributes data.
    pub fn indicator(&self) -> &[bool] {
        &self.kept
    }

    pub fn masked_count(&self) -> usize {
        self.kept.iter().filter(|k| !**k).count()
    }

    /// Multiplies an image by the indicator of the kept region.
    pub fn apply_to_image(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.kept)
            .map(|(&v, &k)| if k { v } else { 0.0 })
            .collect()
    }
}
