use ms_contact::dtn::{apply_dtn, apply_ntd, assemble_ntd_matrix, dtn_symbol};
use ms_contact::equilibria::{orthogonal_arc, Wall};
use ms_contact::evolution::{evolve_with, monitor_invariants, ModalPropagator};
use ms_contact::forms::{form_value, min_form_meanfree};
use ms_contact::kernel::{element_residuals, kernel};
use ms_contact::model::{mean, Grid1D, HeightField, ModelParams};
use ms_contact::spectrum::{
    assemble_operator, classify, energy_terms, full_operator_matrix, leading_eigenvalues, mean_defect, realness_defect,
    solve_spectrum,
};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn grid(n: usize, l: f64) -> Arc<Grid1D> {
    Arc::new(Grid1D::chebyshev(n, l).unwrap())
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.5..2.0f64, 0.5..4.0f64, -3.0..3.0f64, -3.0..3.0f64, -2.0..2.0f64)
        .prop_map(|(l, h, w1, w2, k)| ModelParams::new(l, h, w1, w2, k).unwrap())
}

/// Mean-free cosine combination with modes 1..=coef.len().
fn band_limited(g: &Arc<Grid1D>, coef: &[f64]) -> HeightField {
    let l = g.l();
    HeightField::from_fn(g.clone(), |x| {
        coef.iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * PI * x / l).cos())
            .sum()
    })
}

fn nodal_field(g: &Arc<Grid1D>, vals: &[f64]) -> HeightField {
    let mut h = HeightField::new(g.clone(), nalgebra::DVector::from_column_slice(vals)).unwrap();
    let m = h.mean();
    h.values.add_scalar_mut(-m);
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, f in prop::collection::vec(-1.0..1.0f64, 17),
                      g in prop::collection::vec(-1.0..1.0f64, 17)) {
        let gr = grid(17, 1.3);
        let hf = HeightField::new(gr.clone(), f.clone().into()).unwrap();
        let hg = HeightField::new(gr.clone(), g.clone().into()).unwrap();
        let combo = HeightField::new(gr, &hf.values * a + &hg.values * b).unwrap();
        let lhs = mean(&combo);
        let rhs = a * mean(&hf) + b * mean(&hg);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn ntd_self_adjoint_positive_and_inverse(
        l in 0.5..2.0f64, h in 0.3..3.0f64,
        a in prop::collection::vec(-1.0..1.0f64, 6),
        b in prop::collection::vec(-1.0..1.0f64, 6),
    ) {
        let p = ModelParams::new(l, h, 0.0, 0.0, 0.0).unwrap();
        let g = grid(33, l);
        let sym = dtn_symbol(&p, 32).unwrap();
        let u = band_limited(&g, &a);
        let v = band_limited(&g, &b);
        let nu = apply_ntd(&u, &sym).unwrap();
        let nv = apply_ntd(&v, &sym).unwrap();
        let dot = |x: &HeightField, y: &HeightField| g.integrate(x.values.component_mul(&y.values).as_slice());
        let (s1, s2) = (dot(&nu, &v), dot(&u, &nv));
        prop_assert!((s1 - s2).abs() <= 1e-10 * (dot(&nu, &u) * dot(&nv, &v)).sqrt().max(1e-300));
        let uu = dot(&u, &u);
        prop_assert!(dot(&nu, &u) >= uu / sym.value(32) * (1.0 - 1e-12));
        let back = apply_ntd(&apply_dtn(&u, &sym).unwrap(), &sym).unwrap();
        prop_assert!((&back.values - &u.values).amax() <= 1e-10 * u.values.amax().max(1e-300));
        let m = assemble_ntd_matrix(&g, &sym).unwrap();
        let fu = u.values.dot(&(&m.form * &u.values));
        prop_assert!((fu - dot(&nu, &u)).abs() <= 1e-10 * fu.abs());
    }

    #[test]
    fn form_scales_quadratically(p in params(), c in -10.0..10.0f64, v in prop::collection::vec(-1.0..1.0f64, 17)) {
        let g = grid(17, p.l);
        let h = HeightField::new(g.clone(), v.into()).unwrap();
        let ch = HeightField::new(g, &h.values * c).unwrap();
        let (a, b) = (form_value(&ch, &p), c * c * form_value(&h, &p));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn min_form_monotone(p in params(), dw in 0.1..2.0f64, dk in 0.05..0.5f64) {
        let g = grid(33, p.l);
        let mu = |q: &ModelParams| min_form_meanfree(q, &g).unwrap().0;
        let base = mu(&p);
        let tol = 1e-9 * (1.0 + base.abs());
        let w1 = ModelParams { omega1: p.omega1 + dw, ..p };
        let w2 = ModelParams { omega2: p.omega2 + dw, ..p };
        prop_assert!(mu(&w1) <= base + tol);
        prop_assert!(mu(&w2) <= base + tol);
        let k = (p.kappa.abs() + dk).min(0.99 * 2.0 * PI / p.l);
        let kp = ModelParams { kappa: k, ..p };
        if k > p.kappa.abs() {
            prop_assert!(mu(&kp) <= base + tol);
        }
    }

    #[test]
    fn positive_minimum_implies_positive_form(p in params(), seeds in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 33), 100)) {
        let g = grid(33, p.l);
        let (mu, _) = min_form_meanfree(&p, &g).unwrap();
        prop_assume!(mu > 1e-8);
        for s in &seeds {
            let h = nodal_field(&g, s);
            prop_assert!(form_value(&h, &p) > 0.0);
        }
    }

    #[test]
    fn kernel_elements_solve_the_problem(p in params()) {
        let g = grid(33, p.l);
        let k = kernel(&p, &g).unwrap();
        for e in &k.basis {
            let (ode, r0, rl) = element_residuals(e, &p);
            let scale = e.field.values.amax();
            prop_assert!(ode <= 1e-8 * e.c.abs().max(scale), "ode {ode}");
            prop_assert!(r0 <= 1e-10 * scale.max(1.0) && rl <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn kernel_dimension_matches_operator(p in params()) {
        let g = grid(17, p.l);
        let k = kernel(&p, &g).unwrap();
        prop_assume!(!k.degenerate);
        let asm = assemble_operator(&p, &g).unwrap();
        let a = full_operator_matrix(&asm).unwrap();
        let sv = a.singular_values();
        let smax = sv.max();
        let numeric = sv.iter().filter(|&&s| s <= 1e-9 * smax).count();
        // a non-semisimple zero eigenvalue still has one eigenvector
        prop_assert_eq!(numeric, k.dimension);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn spectrum_real_mean_free_and_accurate(p in params()) {
        let g = grid(49, p.l);
        let asm = assemble_operator(&p, &g).unwrap();
        let spec = solve_spectrum(&asm).unwrap();
        prop_assert!(realness_defect(&asm, &spec).unwrap() <= 1e-8);
        prop_assert!(mean_defect(&asm, &spec) <= 1e-8);
        for e in leading_eigenvalues(&p, &g, 5).unwrap() {
            prop_assert!(e.residual <= 1e-8, "residual {}", e.residual);
            prop_assert!(e.energy_defect <= 1e-6, "energy {}", e.energy_defect);
            prop_assert!((e.h.norm_l2() - 1.0).abs() < 1e-12);
            let (a, b) = energy_terms(&asm, e.h.values.as_slice(), e.lambda);
            prop_assert!(b >= 0.0 && (a + b).abs() <= 1e-6 * b.max(a.abs()));
        }
    }

    #[test]
    fn spectral_and_variational_signs_agree(p in params()) {
        let g = grid(33, p.l);
        let v = classify(&p, &g).unwrap();
        let scale = dtn_symbol(&p, 1).unwrap().value(1) * (PI / p.l).powi(2);
        prop_assume!(v.leading_lambda.abs() > 1e-6 * scale);
        prop_assert_eq!(v.leading_lambda > 0.0, v.threshold_margin < 0.0);
    }

    #[test]
    fn verdict_independent_of_depth(p in params()) {
        let g = grid(33, p.l);
        let classes: Vec<_> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&h| classify(&ModelParams { h, ..p }, &g).unwrap().class)
            .collect();
        prop_assert!(classes.windows(2).all(|w| w[0] == w[1]), "{classes:?}");
    }

    #[test]
    fn evolution_conserves_mean_and_dissipates(p in params(), c in prop::collection::vec(-1.0..1.0f64, 4), t in 0.01..0.2f64) {
        let g = grid(33, p.l);
        let Ok(prop) = ModalPropagator::new(&p, &g) else { return Ok(()) };
        let l = p.l;
        let h0 = HeightField::from_fn(g.clone(), |x| {
            c[0] + c[1] * (PI * x / l).cos() + c[2] * (2.0 * PI * x / l).sin() + c[3] * x * x
        });
        let Ok(traj) = evolve_with(&prop, &h0, t, 40) else { return Ok(()) };
        let r = monitor_invariants(&traj);
        prop_assert!(r.mean_drift <= 1e-10);
        prop_assert!(r.nonincreasing, "max increase {}", r.max_increase);
        let s = prop.propagate(&traj.states[0], 0.3 * t).unwrap();
        let twice = prop.propagate(&s, 0.7 * t).unwrap();
        let once = traj.states.last().unwrap();
        let scale = once.values.amax().max(1.0);
        prop_assert!((&twice.values - &once.values).amax() <= 1e-10 * scale);
    }

    #[test]
    fn orthogonal_circles(cx in 1.5..3.0f64, cy in -0.3..0.3f64, r1 in 0.3..1.0f64, r2 in 0.3..1.0f64, m in -0.15..0.15f64) {
        let left = Wall::circle([-cx, 0.0], r1).unwrap();
        let right = Wall::circle([cx, cy], r2).unwrap();
        let Ok(arc) = orthogonal_arc(left, right, m) else { return Ok(()) };
        let scale = (cx * cx).max(arc.radius.min(1e6).powi(2));
        for d in arc.orthogonality_defects() {
            prop_assert!(d <= 1e-12 * scale, "defect {d}");
        }
        prop_assert!((arc.m - m).abs() == 0.0);
    }
}

#[test]
fn semisimplicity_integral_matches_matrix_test() {
    use ms_contact::kernel::{check_semisimple, semisimple_integral};
    for &l in &[0.5, 1.0, 2.0] {
        for &w1 in &[-2.0, -1.0, -0.5] {
            for &w2 in &[-2.0, -1.0, -0.5] {
                let p = ModelParams::new(l, 1.0, w1, w2, 0.0).unwrap();
                let g = grid(17, l);
                let asm = assemble_operator(&p, &g).unwrap();
                let a = full_operator_matrix(&asm).unwrap();
                let k = kernel(&p, &g).unwrap();
                let integral = semisimple_integral(&p, k.basis[0].c).unwrap();
                assert_eq!(integral.abs() > 1e-10, check_semisimple(&a, 1e-10), "{p:?}");
            }
        }
    }
}
