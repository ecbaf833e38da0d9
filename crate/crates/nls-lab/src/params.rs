//! Physical parameters of the model.

use crate::error::{Error, Result};

/// Admissible coupling range. The lower end is where the Strichartz-based
/// local theory (and with it the whole threshold analysis) is available in
/// d = 3; the operator itself only needs a > -1/4.
pub const A_MIN: f64 = -0.25 + 4.0 / 25.0;
pub const A_MAX: f64 = 0.0;

/// Coupling `a` of the inverse-square potential -Δ + a/|x|² in d = 3,
/// together with the derived exponent β = √(1+4a).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    a: f64,
    beta: f64,
}

impl PhysParams {
    /// Dimension is fixed to 3 throughout the laboratory.
    pub const DIM: usize = 3;

    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= A_MIN || a >= A_MAX {
            return Err(Error::config(format!(
                "coupling a = {a} outside the admissible interval ({A_MIN}, {A_MAX})"
            )));
        }
        Ok(Self {
            a,
            beta: (1.0 + 4.0 * a).sqrt(),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// β = √(1+4a) ∈ (0.8, 1) on the admissible range.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Angular eigenvalue μ_ℓ = ℓ(ℓ+1) of the sector ℓ.
    pub fn mu_ell(ell: usize) -> f64 {
        (ell * (ell + 1)) as f64
    }

    /// Effective coupling a + μ_ℓ seen by the radial operator in sector ℓ.
    pub fn coupling_in_sector(&self, ell: usize) -> f64 {
        self.a + Self::mu_ell(ell)
    }

    /// β_ℓ = √(1 + 4(a+μ_ℓ)); β_0 = β.
    pub fn beta_ell(&self, ell: usize) -> f64 {
        (1.0 + 4.0 * self.coupling_in_sector(ell)).sqrt()
    }

    /// Indicial roots s_± = (-1 ± β_ℓ)/2 of the Cauchy-Euler equation at the
    /// origin. `s_plus` is the branch carried by finite-energy fields.
    pub fn indicial_roots(&self, ell: usize) -> (f64, f64) {
        let b = self.beta_ell(ell);
        ((-1.0 + b) / 2.0, (-1.0 - b) / 2.0)
    }

    pub fn s_plus(&self, ell: usize) -> f64 {
        self.indicial_roots(ell).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_is_consistent() {
        let p = PhysParams::new(-0.04).unwrap();
        assert!((p.beta() * p.beta() - (1.0 + 4.0 * p.a())).abs() < 1e-15);
    }

    #[test]
    fn beta_closed_form_value() {
        // a = -0.2 sits outside the admissible window for the dynamics but
        // the closed form β = √(1+4a) = √0.2 is still worth pinning.
        let beta = (1.0_f64 + 4.0 * -0.2).sqrt();
        assert!((beta - 0.447_213_595_499_958).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(PhysParams::new(-0.3).is_err());
        assert!(PhysParams::new(0.0).is_err());
        assert!(PhysParams::new(0.1).is_err());
        assert!(PhysParams::new(f64::NAN).is_err());
    }

    #[test]
    fn indicial_roots_match_appendix_exponents() {
        // Sector ℓ = 1 carries ±½√(9+4a) - ½.
        let p = PhysParams::new(-0.04).unwrap();
        let (sp, sm) = p.indicial_roots(1);
        let expect = (-1.0 + (9.0_f64 + 4.0 * -0.04).sqrt()) / 2.0;
        assert!((sp - expect).abs() < 1e-14);
        assert!((sp + sm + 1.0).abs() < 1e-14);
    }
}
