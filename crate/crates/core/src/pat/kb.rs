use crate::error::{NettError, Result};

/// Generalized Kaiser–Bessel blob parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KBParams {
    /// Bessel order, controls smoothness at the support boundary.
    pub order: u32,
    /// Window taper.
    pub taper: f64,
    /// Support radius.
    pub radius: f64,
}

impl KBParams {
    pub fn new(order: u32, taper: f64, radius: f64) -> Result<Self> {
        if !(taper > 0.0 && taper.is_finite()) {
            return Err(NettError::InvalidParameter(format!(
                "KB taper must be positive, got {taper}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(NettError::InvalidParameter(format!(
                "KB radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            order,
            taper,
            radius,
        })
    }

    /// Defaults for a grid with the given pixel spacing: order 2, taper 8,
    /// support radius of two pixels.
    pub fn for_spacing(spacing: f64) -> Self {
        Self {
            order: 2,
            taper: 8.0,
            radius: 2.0 * spacing,
        }
    }

    /// Radial profile `psi(rho)`.
    pub fn profile(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        if rho > self.radius {
            return 0.0;
        }
        let u = (1.0 - (rho / self.radius).powi(2)).max(0.0);
        let w = u.sqrt();
        let m = self.order as i32;
        w.powi(m) * bessel_i(self.order, self.taper * w) / bessel_i(self.order, self.taper)
    }

    /// Derivative `psi'(rho)` of the radial profile.
    ///
    /// Uses `d/dz [z^m I_m(z)] = z^m I_{m-1}(z)`, with `I_{-1} = I_1`.
    pub fn profile_derivative(&self, rho: f64) -> f64 {
        if rho.abs() >= self.radius {
            return 0.0;
        }
        let r2 = self.radius * self.radius;
        let w = (1.0 - rho * rho / r2).max(0.0).sqrt();
        let lower = if self.order == 0 { 1 } else { self.order - 1 };
        // w > 0 here, so w^(m-1) is finite for m = 0 as well
        let wpow = w.powi(self.order as i32 - 1);
        -self.taper * rho * wpow * bessel_i(lower, self.taper * w)
            / (r2 * bessel_i(self.order, self.taper))
    }
}

/// Modified Bessel function of the first kind `I_m(z)` by its power series
/// `sum_k (z/2)^(2k+m) / (k! (k+m)!)`, summed until the term drops below
/// `1e-17` relative to the partial sum (at least 25 terms).
pub fn bessel_i(order: u32, z: f64) -> f64 {
    let half = 0.5 * z;
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if (k >= 25 && term.abs() < 1e-17 * sum.abs()) || k > 500 {
            break;
        }
    }
    sum
}

/// Evaluates the blob at a planar offset `r` from its center.
pub fn kb_eval(p: &KBParams, r: [f64; 2]) -> f64 {
    p.profile(r[0].hypot(r[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_value_at_center() {
        let p = KBParams::new(2, 8.0, 0.1).unwrap();
        assert!((kb_eval(&p, [0.0, 0.0]) - 1.0).abs() < 1e-15);
        let p0 = KBParams::new(0, 3.0, 0.5).unwrap();
        assert!((kb_eval(&p0, [0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vanishes_on_and_beyond_boundary() {
        let p = KBParams::new(2, 8.0, 0.1).unwrap();
        assert_eq!(kb_eval(&p, [0.1, 0.0]), 0.0);
        assert_eq!(kb_eval(&p, [0.0, 0.2]), 0.0);
        let p1 = KBParams::new(1, 8.0, 0.1).unwrap();
        assert_eq!(kb_eval(&p1, [0.0, -0.1]), 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(KBParams::new(2, 0.0, 1.0).is_err());
        assert!(KBParams::new(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn bessel_small_orders() {
        // I_0(1), I_1(1), I_2(8) reference values
        assert!((bessel_i(0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i(1, 1.0) - 0.565_159_103_992_485_0).abs() < 1e-15);
        assert!((bessel_i(2, 8.0) / 327.595_831_526_164_6 - 1.0).abs() < 1e-13);
        assert_eq!(bessel_i(2, 0.0), 0.0);
        assert_eq!(bessel_i(0, 0.0), 1.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        for order in 0..4 {
            let p = KBParams::new(order, 6.0, 0.3).unwrap();
            for &rho in &[0.0, 0.05, 0.12, 0.2, 0.29] {
                let h = 1e-6;
                let fd = (p.profile(rho + h) - p.profile(rho - h)) / (2.0 * h);
                let an = p.profile_derivative(rho);
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + an.abs()),
                    "order {order} rho {rho}: {fd} vs {an}"
                );
            }
        }
    }
}
