use std::sync::OnceLock;

use proptest::prelude::*;

use dplab::linops::{apply_lc, assemble_lc, constrained_minimum, resolvent_g, resolvent_solution, OperatorMatrix};
use dplab::profile::{build_profile, SolitaryWave, WaveParams, DEFAULT_TOL};
use dplab::spectral::{lagrangian_q, random_band_limited, Field, Grid};
use dplab::stability::{
    apriori_linfty_check, foliation_decompose, gamma, measured_alpha, orbital_distance, stability_certificate,
};

fn wave() -> &'static SolitaryWave {
    static W: OnceLock<SolitaryWave> = OnceLock::new();
    W.get_or_init(|| {
        let p = WaveParams::new(3.0, 1.0).unwrap();
        build_profile(&p, &Grid::new(48.0, 512).unwrap(), DEFAULT_TOL).unwrap()
    })
}

fn operator() -> &'static OperatorMatrix {
    static A: OnceLock<OperatorMatrix> = OnceLock::new();
    A.get_or_init(|| assemble_lc(wave()))
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.grid().spacing() * a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>()
}

/// Smooth perturbation of unit L² norm.
fn bump(seed: u64) -> Field {
    let w = wave();
    let g = random_band_limited(&w.grid, 24, seed);
    let envelope = Field::from_fn(&w.grid, |x| (-(x / 8.0).powi(2)).exp());
    let f = g.zip_map(&envelope, |a, b| a * b).unwrap();
    &f * (1.0 / f.l2_norm())
}

fn orthogonal_to(f: &Field, v: &Field) -> Field {
    let t = dot(f, v) / dot(v, v);
    let out = f - &(v * t);
    &out * (1.0 / out.l2_norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn orbital_distance_beats_every_shift(a in -20.0f64..20.0, eps in 0.0f64..0.3, seed in any::<u64>(), b in -40.0f64..40.0) {
        let w = wave();
        let u = &w.phi.shifted(a) + &(&bump(seed) * eps);
        let od = orbital_distance(&u, w).unwrap();
        for shift in [a, b, od.x0 + 0.05, od.x0 - 0.05] {
            let other = (&u - &w.phi.shifted(shift)).l2_norm();
            prop_assert!(od.d2 <= other + 1e-10, "d2 {} vs shift {shift}: {other}", od.d2);
        }
        prop_assert!(od.x0 >= -w.grid.half_length() && od.x0 < w.grid.half_length());
    }

    #[test]
    fn operator_matrix_matches_symbols(seed in any::<u64>(), modes in 1usize..200) {
        let w = wave();
        let h = random_band_limited(&w.grid, modes, seed);
        let a = operator().apply(&h);
        let b = apply_lc(w, &h);
        prop_assert!((&a - &b).linf_norm() <= 1e-10 * (1.0 + b.linf_norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn foliation_is_orthogonal_and_near_the_orbital_shift(a in -15.0f64..15.0, eps in 1e-4f64..0.14, seed in any::<u64>()) {
        let w = wave();
        let u = &w.phi.shifted(a) + &(&bump(seed) * eps);
        let fol = foliation_decompose(&u, w).unwrap();
        let od = orbital_distance(&u, w).unwrap();
        let px = &w.phi_x;
        prop_assert!(dot(&fol.h, px).abs() <= 1e-9 * dot(px, px));
        // both shifts solve the same stationarity condition
        prop_assert!((fol.r - od.x0).abs() <= 1e-9, "r {} x0 {}", fol.r, od.x0);
        let rebuilt = &w.phi.shifted(fol.r) + &fol.h.shifted(fol.r);
        prop_assert!((&rebuilt - &u).linf_norm() < 1e-9);
    }
}

#[test]
fn foliation_shift_is_linear_in_the_kernel_component() {
    let w = wave();
    let g = bump(5);
    let r_at = |g: &Field, eps: f64| foliation_decompose(&(&w.phi + &(g * eps)), w).unwrap().r;
    let ratio = r_at(&g, 1e-2) / r_at(&g, 5e-3);
    assert!((ratio - 2.0).abs() < 0.02, "r(eps)/r(eps/2) = {ratio}");
    let transverse = orthogonal_to(&g, &w.phi_x);
    assert!(r_at(&transverse, 1e-2).abs() < 1e-12);
}

#[test]
fn alpha_is_independent_of_the_constraint_basis() {
    let w = wave();
    let a = operator();
    let plain = constrained_minimum(a, &[&w.phi_x, &w.psi_tilde]);
    let mixed1 = &w.phi_x + &(&w.psi_tilde * 0.3);
    let mixed2 = &(&w.psi_tilde * 2.0) - &(&w.phi_x * 5.0);
    let mixed = constrained_minimum(a, &[&mixed2, &mixed1]);
    assert!(plain > 0.0);
    assert!((plain - mixed).abs() <= 1e-10, "{plain} vs {mixed}");
    // a constraint set containing the kernel alone admits the negative direction
    assert!(constrained_minimum(a, &[&w.phi_x]) < 0.0);
}

#[test]
fn measured_alpha_matches_the_dense_minimum() {
    let w = wave();
    let alpha = measured_alpha(w).unwrap();
    let dense = constrained_minimum(operator(), &[&w.phi_x, &w.psi_tilde]);
    assert!((alpha - dense).abs() < 1e-10);
}

#[test]
fn resolvent_derivative_is_the_squared_norm() {
    let w = wave();
    let a = operator();
    let delta = 1e-5;
    for lambda in [-0.2, 0.0, 0.05, 0.12] {
        let fd = (resolvent_g(a, w, lambda + delta).unwrap() - resolvent_g(a, w, lambda).unwrap()) / delta;
        let x = resolvent_solution(a, w, lambda).unwrap();
        let exact = dot(&x, &x);
        assert!((fd - exact).abs() <= 1e-3 * exact, "lambda {lambda}: {fd} vs {exact}");
    }
}

#[test]
fn resolvent_is_increasing_between_poles() {
    let w = wave();
    let a = operator();
    let lambda_star = a.eigensystem().values[0];
    // (λ*, 0.15] holds no other pole seen by ψ̃
    let gs: Vec<f64> = (1..=20)
        .map(|i| lambda_star + f64::from(i) / 20.0 * (0.15 - lambda_star))
        .map(|l| resolvent_g(a, w, l).unwrap())
        .collect();
    assert!(gs.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn translation_direction_has_cubic_lagrangian_change() {
    let w = wave();
    let q0 = lagrangian_q(&w.phi, w.c(), w.k());
    for eps in [1e-2, 1e-3] {
        let dq = lagrangian_q(&(&w.phi + &(&w.phi_x * eps)), w.c(), w.k()) - q0;
        assert!(dq.abs() <= eps.powi(3) + 1e-12, "eps {eps}: dQ {dq:e}");
    }
}

#[test]
fn certificate_root_scales_like_square_root() {
    let w = wave();
    let alpha = measured_alpha(w).unwrap();
    let g = gamma(w);
    let pts: Vec<(f64, f64)> = [1e-16, 1e-15, 1e-14, 1e-13, 1e-12]
        .iter()
        .map(|&q: &f64| {
            let r = stability_certificate(alpha, 0.0, g, q).unwrap().unwrap();
            assert!(r.r2 > 0.05 && r.r2 < 1.0, "r2 {}", r.r2);
            (q.ln(), r.r1.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 0.5).abs() <= 0.02, "slope {slope}");
}

#[test]
fn linfty_estimate_flags_a_narrow_spike() {
    let p = WaveParams::new(3.0, 1.0).unwrap();
    let w = build_profile(&p, &Grid::new(32.0, 16384).unwrap(), 1e-6).unwrap();
    let spike = Field::from_fn(&w.grid, |x| if x.abs() < 0.5 * w.grid.spacing() { 1.0 } else { 0.0 });
    let u = &w.phi + &spike;
    assert!(apriori_linfty_check(&u, &w, 0.0, w.k()) < 0.0);

    let smooth = &w.phi + &Field::from_fn(&w.grid, |x| 0.1 * (-x * x).exp());
    assert!(apriori_linfty_check(&smooth, &w, 0.0, w.k()) > 0.0);
}
