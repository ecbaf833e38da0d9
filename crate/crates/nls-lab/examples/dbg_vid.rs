use nls_lab::evolution::{evolve, EvolveControls, PropagatorCache, SimState};
use nls_lab::scenario::{second_difference_mismatch, tune_to_threshold_energy};
use nls_lab::spectral::solve_trichotomy;
use nls_lab::threshold::{branch_seed, Branch, LpOptions};
use nls_lab::virial::{virial_sample, CutoffProfile};
use nls_lab::*;
use num_complex::Complex64;
use std::f64::consts::PI;

fn main() {
    let gs = {
        let grid = RadialGrid::default_log(512, 200.0).unwrap();
        let params = PhysParams::new(-0.04).unwrap();
        GroundState::new(SectorScheme::new(grid, params, 0).unwrap()).unwrap()
    };
    let trich = solve_trichotomy(&gs).unwrap();
    let prop = PropagatorCache::new(gs.space().clone()).unwrap();
    let lp = branch_seed(&gs, &trich, &prop, Branch::Minus, 5e-3, &LpOptions::default()).unwrap();
    let mut u0 = gs.w().clone();
    u0.add_scaled(Complex64::new(1.0, 0.0), &lp.v0);
    let u0 = tune_to_threshold_energy(&gs, &u0).unwrap();
    let r_cut = 5.0f64;
    let phi = CutoffProfile;
    let a = gs.params().a();
    for dt in [2.5e-4, 1e-4, 5e-5] {
        let controls = EvolveControls { dt_max: dt, sample_every: 1e-3, ..Default::default() };
        let state = SimState::new(u0.clone(), dt);
        let mut ts = Vec::new(); let mut vr = Vec::new(); let mut dtt = Vec::new(); let mut direct = Vec::new();
        let (_, _r) = evolve(&gs, &prop, state, 0.5, &controls, |st, row| {
            let vs = virial_sample(&gs, &st.u, r_cut).unwrap();
            ts.push(row.t); vr.push(vs.v_r); dtt.push(vs.dtt_v_r);
            // direct four-term display
            let grid = gs.space().grid();
            let xs = grid.x();
            let du = st.u.radial_derivative();
            let mut acc = 0.0;
            for i in 0..grid.n() {
                let r = grid.nodes()[i];
                let s = r / r_cut;
                let tr = if i == 0 || i == grid.n() - 1 { 0.5 } else { 1.0 };
                let w3 = 4.0 * PI * (3.0 * xs[i]).exp() * grid.dx() * tr;
                let u2 = st.u.u(i).norm_sqr();
                let u6 = u2 * u2 * u2;
                acc += (4.0 * phi.d2phi(s) * du[i].norm_sqr()
                    - (4.0 / 3.0) * phi.laplacian(s) * u6
                    - phi.bilaplacian(s) / (r_cut * r_cut) * u2
                    + 4.0 * a * r_cut * phi.dphi(s) / (r * r * r) * u2)
                    * w3;
            }
            direct.push(acc);
        }).unwrap();
        let m_id = second_difference_mismatch(&ts, &vr, &dtt);
        let m_dir = second_difference_mismatch(&ts, &vr, &direct);
        // also identity-vs-direct
        let rels: Vec<f64> = dtt.iter().zip(&direct).map(|(a, b)| ((a - b) / b.abs().max(1e-300)).abs()).collect();
        let mut r2 = rels.clone(); r2.sort_by(|x, y| x.partial_cmp(y).unwrap());
        println!("dt={dt:.1e}: FD-vs-identity {m_id:.3e}, FD-vs-direct {m_dir:.3e}, identity-vs-direct median {:.3e}", r2[r2.len()/2]);
    }
}
