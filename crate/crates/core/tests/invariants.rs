use nehari_core::{
    evaluate, fiber_scale, fibered_J, gradient_I, grad_seminorm_p, integral_abs_p, make_mesh, nehari_project,
    sign_partition, weighted_integral_q, GridFn, Mesh, ProblemSpec, Weight,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn mesh() -> Mesh {
    make_mesh(0.0, 1.0, 64).unwrap()
}

fn series(mesh: &Mesh, c: &[f64]) -> GridFn {
    GridFn::from_fn(mesh, |x| {
        c.iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * PI * x).sin()).sum()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..6)
}

fn exponents() -> impl Strategy<Value = (f64, f64)> {
    (1.1f64..5.0, 0.05f64..0.95).prop_map(|(p, r)| (p, 1.0 + r * (p - 1.0)))
}

fn spec(p: f64, q: f64, lambda: f64, shift: f64) -> ProblemSpec {
    let m = mesh();
    let a = Weight::from_fn(&m, |x| (2.0 * PI * x).cos() + shift).unwrap();
    ProblemSpec::new(p, q, lambda, a, m).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn integrals_are_homogeneous(c in coeffs(), s in 0.1f64..10.0, (p, q) in exponents()) {
        let m = mesh();
        let u = series(&m, &c);
        let a = Weight::from_fn(&m, |x| x - 0.4).unwrap();
        let us = u.scaled(-s);
        prop_assert!(close(grad_seminorm_p(&m, &us, p), s.powf(p) * grad_seminorm_p(&m, &u, p), 1e-12));
        prop_assert!(close(integral_abs_p(&m, &us, p), s.powf(p) * integral_abs_p(&m, &u, p), 1e-12));
        let us = u.scaled(s);
        prop_assert!(close(weighted_integral_q(&m, &us, &a, q, false), s.powf(q) * weighted_integral_q(&m, &u, &a, q, false), 1e-12));
    }

    #[test]
    fn projection_lands_on_nehari_set(c in coeffs(), (p, q) in exponents(), lambda in 0.0f64..30.0, shift in -0.5f64..0.5) {
        let s = spec(p, q, lambda, shift);
        let u = series(&s.mesh, &c);
        if let Ok(w) = nehari_project(&u, &s) {
            let b = evaluate(&w, &s).unwrap();
            prop_assert!(b.nehari_residual.abs() < 1e-10 * (b.e.abs() + b.weight_term.abs()));
            let gap = b.i + (p - q) / (p * q) * b.e;
            prop_assert!(gap.abs() < 1e-10 * (1.0 + b.e.abs()));
            prop_assert!(close(fibered_J(&u, &s).unwrap(), b.i, 1e-10));
        }
    }

    #[test]
    fn fibered_functional_is_scale_invariant(c in coeffs(), (p, q) in exponents(), lambda in 0.0f64..30.0, k in 0.05f64..20.0) {
        let s = spec(p, q, lambda, 0.1);
        let u = series(&s.mesh, &c);
        if let Ok(j) = fibered_J(&u, &s) {
            prop_assert!(close(fibered_J(&u.scaled(k), &s).unwrap(), j, 1e-12));
            let t = fiber_scale(&u, &s).unwrap();
            prop_assert!(close(fiber_scale(&u.scaled(k), &s).unwrap() * k, t, 1e-12));
        }
    }

    #[test]
    fn fiber_scale_extremizes_along_the_ray(c in coeffs(), (p, q) in exponents(), lambda in 0.0f64..30.0, shift in -0.5f64..0.5) {
        let s = spec(p, q, lambda, shift);
        let u = series(&s.mesh, &c);
        let b = evaluate(&u, &s).unwrap();
        if let Ok(t) = fiber_scale(&u, &s) {
            let f = |r: f64| evaluate(&u.scaled(r), &s).unwrap().i;
            let ts: Vec<f64> = (1..=400).map(|k| 4.0 * t * k as f64 / 400.0).collect();
            let vals: Vec<f64> = ts.iter().map(|&r| f(r)).collect();
            let pick = if b.e > 0.0 {
                vals.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap().0
            } else {
                vals.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0
            };
            prop_assert!((ts[pick] - t).abs() <= 4.0 * t / 400.0 + 1e-12);
        }
    }

    #[test]
    fn full_energy_is_even(c in coeffs(), (p, q) in exponents(), lambda in 0.0f64..30.0) {
        let s = spec(p, q, lambda, 0.2);
        let u = series(&s.mesh, &c);
        let plus = evaluate(&u, &s).unwrap();
        let minus = evaluate(&u.scaled(-1.0), &s).unwrap();
        prop_assert_eq!(plus.i, minus.i);
        prop_assert_eq!(plus.e, minus.e);
    }

    #[test]
    fn truncation_is_invisible_on_nonnegative_functions(c in coeffs(), (p, q) in exponents(), lambda in 0.0f64..30.0) {
        let s = spec(p, q, lambda, -0.1);
        let u = series(&s.mesh, &c).abs();
        let b = evaluate(&u, &s).unwrap();
        prop_assert_eq!(b.i, b.i_trunc);
        prop_assert_eq!(b.e, b.e_trunc);
        let g = gradient_I(&u, &s, false).unwrap();
        let gt = gradient_I(&u, &s, true).unwrap();
        for (x, y) in g.values().iter().zip(gt.values()) {
            prop_assert!((x - y).abs() <= 1e-14 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn breakdown_fields_are_consistent(c in coeffs(), (p, q) in exponents(), lambda in 0.0f64..30.0) {
        let s = spec(p, q, lambda, 0.0);
        let u = series(&s.mesh, &c);
        let b = evaluate(&u, &s).unwrap();
        prop_assert!(close(b.e, b.grad_term - lambda * b.mass_term, 1e-14));
        prop_assert!(close(b.i, b.e / p - b.weight_term / q, 1e-14));
        prop_assert!(close(b.e_trunc, b.grad_term - lambda * b.mass_term_plus, 1e-14));
        prop_assert!(close(b.i_trunc, b.e_trunc / p - b.weight_term_plus / q, 1e-14));
        prop_assert!(close(b.nehari_residual, b.e - b.weight_term, 1e-14));
    }

    #[test]
    fn sign_partition_covers_interior(vals in prop::collection::vec(-1.0f64..1.0, 3..80), threshold in 0.0f64..0.3) {
        let n = vals.len();
        let a = Weight::from_values(vals.clone()).unwrap();
        let part = sign_partition(&a, threshold);
        let mut seen = vec![0u8; n];
        let mut last_end = 0usize;
        let mut comps: Vec<(usize, usize, i8)> = part.plus_components.iter().map(|&(a, b)| (a, b, 1)).collect();
        comps.extend(part.minus_components.iter().map(|&(a, b)| (a, b, -1)));
        comps.sort();
        for &(lo, hi, sgn) in &comps {
            prop_assert!(lo <= hi && lo >= 1 && hi <= n - 2);
            prop_assert!(lo > last_end || last_end == 0);
            last_end = hi;
            for i in lo..=hi {
                let inside = if sgn > 0 { vals[i] > threshold } else { vals[i] < -threshold };
                prop_assert!(inside);
                seen[i] += 1;
            }
            // maximal: neighbours outside the run have a different sign class
            for j in [lo - 1, hi + 1] {
                if (1..n - 1).contains(&j) {
                    let outside = if sgn > 0 { vals[j] <= threshold } else { vals[j] >= -threshold };
                    prop_assert!(outside);
                }
            }
        }
        for &i in &part.zero_set {
            seen[i] += 1;
        }
        prop_assert!(seen[1..n - 1].iter().all(|&k| k == 1));
        prop_assert!(seen[0] == 0 && seen[n - 1] == 0);
    }
}
