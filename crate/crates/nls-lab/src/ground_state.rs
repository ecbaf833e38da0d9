//! The explicit ground state W, its scaling generator W₁, the symmetry
//! action, energies, and the variational (sharp-Sobolev) checks.
//!
//! In d = 3 with β = √(1+4a),
//!
//!     W(r) = (3β²)^{1/4} r^{(β-1)/2} (1 + r^{2β})^{-1/2},
//!
//! which satisfies 𝓛_a W = W⁵. In the log coordinate the profile is
//! g_W(x) = (3β²)^{1/4} (2 cosh βx)^{-1/2} — a constant times the sector-0
//! gauge — so W is represented by a constant coefficient vector and the
//! discrete operator annihilates it exactly.

use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::sector::{PotentialCoeff, RadialField, SectorHandle};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Closed-form W(r).
pub fn w_of_r(params: PhysParams, r: f64) -> f64 {
    let b = params.beta();
    (3.0 * b * b).powf(0.25) * r.powf((b - 1.0) / 2.0) / (1.0 + r.powf(2.0 * b)).sqrt()
}

/// Closed-form W'(r).
pub fn w_prime_of_r(params: PhysParams, r: f64) -> f64 {
    let b = params.beta();
    let rb = r.powf(2.0 * b);
    w_of_r(params, r) * ((b - 1.0) / (2.0 * r) - b * rb / (r * (1.0 + rb)))
}

/// Scaling generator W₁ = r W' + W/2.
pub fn w1_of_r(params: PhysParams, r: f64) -> f64 {
    r * w_prime_of_r(params, r) + 0.5 * w_of_r(params, r)
}

/// ‖W‖²_{Ḣ¹ₐ} = ∫W⁶ in closed form: (3√3/4) π² β².
pub fn analytic_mass(params: PhysParams) -> f64 {
    let b = params.beta();
    0.75 * 3.0f64.sqrt() * PI * PI * b * b
}

/// Energy E(u) = ½‖u‖²_{Ḣ¹ₐ} - (1/6)∫|u|⁶ of a sector-0 field.
pub fn energy(u: &RadialField) -> f64 {
    0.5 * u.norm_a_sq() - u.lp_integral(6.0) / 6.0
}

/// Phase-and-scaling symmetry g_{θ,μ} f = e^{iθ} μ^{-1/2} f(·/μ).
#[derive(Debug, Clone, Copy)]
pub struct SymmetryAction {
    pub theta: f64,
    pub mu: f64,
}

impl SymmetryAction {
    pub fn new(theta: f64, mu: f64) -> Self {
        Self { theta, mu }
    }

    pub fn apply(&self, f: &RadialField) -> Result<RadialField> {
        f.symmetry_action(self.theta, self.mu)
    }

    pub fn inverse(&self) -> Self {
        Self {
            theta: -self.theta,
            mu: 1.0 / self.mu,
        }
    }
}

/// Ground state on a grid, with cached norms.
pub struct GroundState {
    space: SectorHandle,
    w: RadialField,
    w1: RadialField,
    /// ‖W‖²_{Ḣ¹ₐ} on this grid
    m: f64,
    /// ∫W⁶ by quadrature
    s6: f64,
    /// ‖W‖₆
    l6: f64,
    energy_w: f64,
}

impl GroundState {
    pub fn new(space: SectorHandle) -> Result<Self> {
        if space.ell() != 0 {
            return Err(Error::usage("the ground state lives in sector 0"));
        }
        let params = space.params();
        let b = params.beta();
        let c4 = (3.0 * b * b).powf(0.25);
        let n = space.n();
        let w = RadialField::from_h_real(space.clone(), &vec![c4; n]);
        let xs = space.grid().x().to_vec();
        let h1: Vec<f64> = xs
            .iter()
            .map(|&x| -c4 * 0.5 * b * (b * x).tanh())
            .collect();
        let w1 = RadialField::from_h_real(space.clone(), &h1);
        let m = w.norm_a_sq();
        let s6 = w.lp_integral(6.0);
        let l6 = s6.powf(1.0 / 6.0);
        let energy_w = 0.5 * m - s6 / 6.0;
        Ok(GroundState {
            space,
            w,
            w1,
            m,
            s6,
            l6,
            energy_w,
        })
    }

    pub fn space(&self) -> &SectorHandle {
        &self.space
    }
    pub fn params(&self) -> PhysParams {
        self.space.params()
    }
    pub fn w(&self) -> &RadialField {
        &self.w
    }
    pub fn w1(&self) -> &RadialField {
        &self.w1
    }
    /// ‖W‖²_{Ḣ¹ₐ} = ∫W⁶ (grid value).
    pub fn mass(&self) -> f64 {
        self.m
    }
    pub fn sextic(&self) -> f64 {
        self.s6
    }
    pub fn l6_norm(&self) -> f64 {
        self.l6
    }
    pub fn energy_w(&self) -> f64 {
        self.energy_w
    }

    /// i W as a field (the phase direction of the kernel).
    pub fn iw(&self) -> RadialField {
        self.w.scaled(Complex64::new(0.0, 1.0))
    }

    /// W⁵ as a field.
    pub fn w5(&self) -> RadialField {
        let amp = self.space.amp();
        let h: Vec<Complex64> = self
            .w
            .h()
            .iter()
            .zip(amp)
            .map(|(&h, &a)| {
                let u = h.re * a;
                Complex64::new(u.powi(5) / a, 0.0)
            })
            .collect();
        RadialField::from_h(self.space.clone(), h)
    }

    /// Relative discrete-L² residual ‖(𝓛_a - W⁴)W‖ / ‖W⁵‖. The scheme
    /// annihilates W by construction, so this measures roundoff plus any
    /// assembly bug.
    pub fn residual(&self) -> f64 {
        residual_l2(&self.space, PotentialCoeff::Single, &self.w, None) / self.norm_l2(&self.w5())
    }

    /// Relative residual ‖(𝓛_a - 5W⁴)W₁‖ / ‖W⁴W₁‖ — the honest fourth-order
    /// figure of the discretization.
    pub fn residual_w1(&self) -> f64 {
        let amp = self.space.amp();
        let w4w1: Vec<Complex64> = self
            .w
            .h()
            .iter()
            .zip(self.w1.h())
            .zip(amp)
            .map(|((&hw, &h1), &a)| {
                let w4 = (hw.re * a).powi(4);
                h1 * w4
            })
            .collect();
        let scale = RadialField::from_h(self.space.clone(), w4w1);
        residual_l2(&self.space, PotentialCoeff::Quintuple, &self.w1, None)
            / self.norm_l2(&scale)
    }

    fn norm_l2(&self, f: &RadialField) -> f64 {
        f.norm_l2_sq().sqrt()
    }

    /// Distance surrogate 𝐝(f) = |‖f‖²_{Ḣ¹ₐ} - ‖W‖²_{Ḣ¹ₐ}|.
    pub fn distance(&self, f: &RadialField) -> f64 {
        (f.norm_a_sq() - self.m).abs()
    }

    /// Newton cross-check of the discrete ground-state equation, starting
    /// from the closed form. The linearization 𝓛_a - 5W⁴ is singular along
    /// the scaling direction W₁, so we solve the bordered system that pins
    /// the Newton step orthogonal to W₁ in Ḣ¹ₐ. Returns the Ḣ¹ₐ-relative
    /// distance between the closed form and the discrete solution; a large
    /// value separates a formula bug from a discretization bug.
    pub fn newton_cross_check(&self, max_iter: usize) -> Result<f64> {
        use faer::prelude::Solve;
        use faer::Mat;
        let n = self.space.n();
        let mass = self.space.mass();
        let amp = self.space.amp();
        let mut h: Vec<f64> = self.w.h().iter().map(|z| z.re).collect();
        let h0 = h.clone();
        // Ḣ¹ₐ-gradient direction of the scaling constraint
        let h1: Vec<f64> = self.w1.h().iter().map(|z| z.re).collect();
        let mut g1 = vec![0.0; n];
        self.space.apply_form(PotentialCoeff::Free, &h1, &mut g1);
        for _ in 0..max_iter {
            // F(h) = A₀ h - mass ⊙ amp⁴ h⁵ (form-weighted residual)
            let mut f = vec![0.0; n];
            self.space.apply_form(PotentialCoeff::Free, &h, &mut f);
            for i in 0..n {
                f[i] -= mass[i] * (amp[i] * h[i]).powi(4) * h[i];
            }
            let res: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if res < 1e-13 * self.m {
                break;
            }
            let mut big = Mat::zeros(n + 1, n + 1);
            let jac = self.space.form_matrix(PotentialCoeff::Free);
            for i in 0..n {
                for j in 0..n {
                    big[(i, j)] = jac[(i, j)];
                }
                big[(i, i)] -= 5.0 * mass[i] * (amp[i] * h[i]).powi(4);
                big[(i, n)] = g1[i];
                big[(n, i)] = g1[i];
            }
            let rhs = Mat::from_fn(n + 1, 1, |i, _| if i < n { f[i] } else { 0.0 });
            let delta = big.partial_piv_lu().solve(&rhs);
            for i in 0..n {
                h[i] -= delta[(i, 0)];
            }
        }
        let diff: Vec<f64> = h.iter().zip(&h0).map(|(a, b)| a - b).collect();
        let df = RadialField::from_h_real(self.space.clone(), &diff);
        Ok((df.norm_a_sq() / self.m).sqrt())
    }

    /// Sharp Sobolev and coercivity checks on a set of sample fields.
    pub fn sharp_sobolev_check(&self, samples: &[RadialField]) -> Result<SobolevReport> {
        if samples.is_empty() {
            return Err(Error::usage("sharp_sobolev_check needs at least one sample"));
        }
        let c_best = self.l6 / self.m.sqrt();
        let mut rows = Vec::with_capacity(samples.len());
        for f in samples {
            f.require_same_space(&self.w)?;
            let na = f.norm_a_sq().sqrt();
            let l6 = f.lp_integral(6.0).powf(1.0 / 6.0);
            let slack = c_best * na - l6;
            let coercivity = if na <= self.m.sqrt() {
                let e = energy(f);
                let lo = na * na / 3.0;
                let hi = na * na / 2.0;
                Some(e >= lo - 1e-9 * self.m && e <= hi + 1e-9 * self.m)
            } else {
                None
            };
            rows.push(SobolevSample {
                norm_a: na,
                norm_l6: l6,
                slack,
                coercivity_ok: coercivity,
            });
        }
        Ok(SobolevReport {
            best_constant: c_best,
            rows,
        })
    }
}

/// Relative L² residual of (𝓛_a - cW⁴) f = rhs on the scheme's grid.
/// With `rhs = None` the plain norm ‖(𝓛_a - cW⁴) f‖ is returned.
pub fn residual_l2(
    space: &SectorHandle,
    c: PotentialCoeff,
    f: &RadialField,
    rhs: Option<&RadialField>,
) -> f64 {
    let n = space.n();
    let mass = space.mass();
    let (hr, hi): (Vec<f64>, Vec<f64>) = (
        f.h().iter().map(|z| z.re).collect(),
        f.h().iter().map(|z| z.im).collect(),
    );
    let mut ar = vec![0.0; n];
    let mut ai = vec![0.0; n];
    space.apply_operator_form(c, &hr, &mut ar);
    space.apply_operator_form(c, &hi, &mut ai);
    let mut s = 0.0;
    for i in 0..n {
        let mut re = ar[i] / mass[i];
        let mut im = ai[i] / mass[i];
        if let Some(g) = rhs {
            re -= g.h()[i].re;
            im -= g.h()[i].im;
        }
        s += mass[i] * (re * re + im * im);
    }
    s.sqrt()
}

pub struct SobolevSample {
    pub norm_a: f64,
    pub norm_l6: f64,
    /// C‖f‖_{Ḣ¹ₐ} - ‖f‖₆ ≥ 0 up to quadrature noise
    pub slack: f64,
    /// Some(ok) when ‖f‖_{Ḣ¹ₐ} ≤ ‖W‖_{Ḣ¹ₐ} so the bracket applies
    pub coercivity_ok: Option<bool>,
}

pub struct SobolevReport {
    pub best_constant: f64,
    pub rows: Vec<SobolevSample>,
}

impl SobolevReport {
    pub fn all_hold(&self, slack_tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.slack >= -slack_tol && r.coercivity_ok.unwrap_or(true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::sector::SectorScheme;

    fn ground(a: f64, n: usize) -> GroundState {
        let grid = RadialGrid::default_log(n, 200.0).unwrap();
        let params = PhysParams::new(a).unwrap();
        let space = SectorScheme::new(grid, params, 0).unwrap();
        GroundState::new(space).unwrap()
    }

    #[test]
    fn closed_form_limit_small_a() {
        // As a→0⁻, W → 3^{1/4}(1+r²)^{-1/2}, which satisfies -Δu = u⁵.
        let params = PhysParams::new(-1e-9).unwrap();
        for &r in &[0.1, 1.0, 5.0] {
            let w = w_of_r(params, r);
            let w0 = 3.0f64.powf(0.25) / (1.0 + r * r).sqrt();
            assert!((w - w0).abs() < 1e-7);
        }
    }

    #[test]
    fn mass_matches_closed_form() {
        for &a in &[-0.08, -0.04, -0.02] {
            let gs = ground(a, 1024);
            let exact = analytic_mass(gs.params());
            let rel = (gs.mass() - exact).abs() / exact;
            assert!(rel < 1e-5, "a={a}: rel err {rel:.2e}");
        }
    }

    #[test]
    fn energy_identity_is_discretely_exact() {
        let gs = ground(-0.05, 512);
        let rel = (gs.energy_w() - gs.mass() / 3.0).abs() / gs.mass();
        assert!(rel < 1e-12, "E(W) - M/3 relative {rel:.2e}");
    }

    #[test]
    fn residual_is_roundoff_level() {
        // the scheme annihilates W exactly; what remains is roundoff
        // amplified by the tiny masses near the origin
        let gs = ground(-0.04, 512);
        assert!(gs.residual() < 1e-9, "residual {:.2e}", gs.residual());
    }

    #[test]
    fn w1_residual_high_order() {
        // the kernel identity (L_a - 5W^4)W1 = 0, on a box wide enough that
        // the boundary flux defects sit below the interior truncation error
        let mk = |n: usize| {
            let grid = RadialGrid::build(
                n,
                600.0,
                crate::grid::Grading::LogUniform { r_min: 1e-6 },
            )
            .unwrap();
            let params = PhysParams::new(-0.04).unwrap();
            let space = crate::sector::SectorScheme::new(grid, params, 0).unwrap();
            GroundState::new(space).unwrap()
        };
        let r1 = mk(512).residual_w1();
        let r2 = mk(1024).residual_w1();
        assert!(r2 < 1e-6, "residual at n=1024: {r2:.2e}");
        assert!(r2 < r1 / 4.0, "r1={r1:.2e} r2={r2:.2e}");
    }

    #[test]
    fn energy_along_ray_is_polynomial() {
        let gs = ground(-0.04, 512);
        let mut rng = crate::rng::SplitMix64::new(17);
        for _ in 0..5 {
            let c = rng.uniform(0.05, 1.5);
            let f = gs.w().scaled(Complex64::new(c, 0.0));
            let want = (c * c / 2.0 - c.powi(6) / 6.0) * gs.mass();
            // E(cW) uses M for both terms since ∫W⁶ = M
            let got = energy(&f);
            assert!(
                (got - want).abs() < 1e-9 * gs.mass(),
                "c={c}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn scaling_kills_w5_w1_pairing() {
        // ⟨W, W₁⟩_{Ḣ¹ₐ} = ∫W⁵W₁ = 0, forced by scaling invariance of ∫W⁶
        let gs = ground(-0.06, 512);
        let p = gs.w().inner_a(gs.w1()).unwrap();
        assert!(p.abs() < 1e-8 * gs.mass(), "pairing {p:.2e}");
        let q = gs.iw().inner_a(gs.w()).unwrap();
        assert!(q.abs() < 1e-12 * gs.mass());
    }

    #[test]
    fn symmetry_action_preserves_invariants() {
        let gs = ground(-0.04, 1024);
        let m = gs.mass();
        for &(theta, mu) in &[(0.0, 1.0), (1.0, 3.0), (0.7, 0.4), (2.2, 1.7)] {
            let g = SymmetryAction::new(theta, mu).apply(gs.w()).unwrap();
            let d = gs.distance(&g);
            assert!(d < 1e-6 * m, "theta={theta} mu={mu}: d = {:.2e}·M", d / m);
            let e = energy(&g);
            assert!(
                (e - gs.energy_w()).abs() < 1e-6 * m,
                "energy drift {:.2e}",
                (e - gs.energy_w()).abs() / m
            );
            let l6 = g.lp_integral(6.0);
            assert!(((l6 - gs.sextic()) / gs.sextic()).abs() < 1e-6);
        }
    }

    #[test]
    fn asymptotic_slopes() {
        // log W vs log r has slope (β-1)/2 near 0 and -(1+β)/2 at infinity
        let gs = ground(-0.05, 1024);
        let b = gs.params().beta();
        let u = gs.w().u_values();
        let xs = gs.space().grid().x();
        let slope = |i: usize, j: usize| (u[j].re.ln() - u[i].re.ln()) / (xs[j] - xs[i]);
        let near0 = slope(5, 80);
        let inf = slope(gs.space().n() - 80, gs.space().n() - 5);
        assert!((near0 - (b - 1.0) / 2.0).abs() < 0.02 * (b - 1.0).abs() / 2.0 + 1e-4);
        assert!((inf + (1.0 + b) / 2.0).abs() < 0.02 * (1.0 + b) / 2.0);
    }

    #[test]
    fn sharp_sobolev_report() {
        let gs = ground(-0.04, 512);
        let gauss = RadialField::from_radial_fn(gs.space().clone(), |r| {
            Complex64::new((-r * r).exp(), 0.0)
        });
        let half_w = gs.w().scaled(Complex64::new(0.5, 0.0));
        let report = gs
            .sharp_sobolev_check(&[gs.w().clone(), gauss.clone(), half_w])
            .unwrap();
        assert!(report.all_hold(1e-8));
        // equality on W itself
        assert!(report.rows[0].slack.abs() < 1e-6 * report.rows[0].norm_l6);
        // strict inequality on the Gaussian
        assert!(report.rows[1].slack > 1e-3 * report.rows[1].norm_l6);
        assert!(gs.sharp_sobolev_check(&[]).is_err());
    }

    #[test]
    fn newton_confirms_formula() {
        let gs = ground(-0.04, 256);
        let drift = gs.newton_cross_check(6).unwrap();
        assert!(drift < 1e-5, "newton drift {drift:.2e}");
    }
}
