//! Directional derivatives of the discrete energies against central finite
//! differences on random smooth pairs.

use nehari_core::{energy, fibered_J, gradient_I, make_mesh, GridFn, Mesh, ProblemSpec, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_fn(mesh: &Mesh, rng: &mut ChaCha8Rng, modes: usize) -> GridFn {
    let c: Vec<f64> = (1..=modes).map(|k| rng.gen_range(-1.0..1.0) / k as f64).collect();
    GridFn::from_fn(mesh, |x| {
        c.iter()
            .enumerate()
            .map(|(k, ck)| ck * ((k + 1) as f64 * PI * x).sin())
            .sum()
    })
}

fn dot(a: &GridFn, b: &GridFn) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

fn spec(p: f64, q: f64, lambda: f64) -> ProblemSpec {
    let mesh = make_mesh(0.0, 1.0, 200).unwrap();
    let a = Weight::from_fn(&mesh, |x| (3.0 * PI * x).cos() + 0.2).unwrap();
    ProblemSpec::new(p, q, lambda, a, mesh).unwrap()
}

fn check_pairs(p: f64, q: f64, truncated: bool, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let s = spec(p, q, rng.gen_range(0.0..40.0));
        let u = random_fn(&s.mesh, &mut rng, 8);
        let v = random_fn(&s.mesh, &mut rng, 8);
        let g = gradient_I(&u, &s, truncated).unwrap();
        let analytic = dot(&g, &v);
        let eps = 1e-6;
        let fp = energy(&u.axpy(eps, &v), &s, truncated).unwrap();
        let fm = energy(&u.axpy(-eps, &v), &s, truncated).unwrap();
        let fd = (fp - fm) / (2.0 * eps);
        // guard against directions nearly orthogonal to the gradient
        let scale = analytic.abs().max(1e-2 * g.values().iter().map(|x| x.abs()).sum::<f64>() * v.sup_norm());
        worst = worst.max((fd - analytic).abs() / scale);
    }
    worst
}

#[test]
fn truncated_energy_gradient() {
    for (k, (p, q)) in [(2.0, 1.5), (3.0, 2.0), (5.0, 2.0), (2.5, 1.5), (2.5, 2.0)].into_iter().enumerate() {
        let err = check_pairs(p, q, true, 100, 17 + k as u64);
        assert!(err < 1e-6, "p = {p}, q = {q}: relative error {err:e}");
    }
}

#[test]
fn full_energy_gradient() {
    for (k, (p, q)) in [(2.0, 1.5), (3.0, 2.0), (5.0, 2.0)].into_iter().enumerate() {
        let err = check_pairs(p, q, false, 100, 99 + k as u64);
        assert!(err < 1e-6, "p = {p}, q = {q}: relative error {err:e}");
    }
}

#[test]
fn fibered_gradient_from_energy_gradient() {
    // ∇J(u) = t ∇I(t u) with t the fiber scale
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = spec(3.0, 2.0, 5.0);
    let mut checked = 0;
    while checked < 20 {
        let u = random_fn(&s.mesh, &mut rng, 6);
        let Ok(t) = nehari_core::fiber_scale(&u, &s) else {
            continue;
        };
        let v = random_fn(&s.mesh, &mut rng, 6);
        let g = gradient_I(&u.scaled(t), &s, false).unwrap().scaled(t);
        let analytic = dot(&g, &v);
        let eps = 1e-6;
        let fd = (fibered_J(&u.axpy(eps, &v), &s).unwrap() - fibered_J(&u.axpy(-eps, &v), &s).unwrap()) / (2.0 * eps);
        let scale = analytic.abs().max(1e-2 * g.values().iter().map(|x| x.abs()).sum::<f64>() * v.sup_norm());
        assert!((fd - analytic).abs() < 1e-6 * scale, "{fd} vs {analytic}");
        checked += 1;
    }
}
