//! First eigenvalue against an independent shooting integration of
//! `-(|u'|^{p-2} u')' = λ |u|^{p-2} u`, `u(0) = 0`, `u'(0) = 1`.

use nehari_core::eigen::first_eigenpair_from;
use nehari_core::{first_eigenpair, make_mesh, rayleigh, GridFn};
use proptest::prelude::*;
use std::f64::consts::PI;

fn spow(x: f64, r: f64) -> f64 {
    x.signum() * x.abs().powf(r)
}

/// Integrate `(u, w)` with `w = |u'|^{p-2}u'` over `(0, 1)` by RK4 and report
/// whether `u` stays positive on `(0, 1]`.
fn stays_positive(p: f64, lambda: f64, steps: usize) -> bool {
    let h = 1.0 / steps as f64;
    let rhs = |u: f64, w: f64| (spow(w, 1.0 / (p - 1.0)), -lambda * spow(u, p - 1.0));
    let (mut u, mut w) = (0.0, 1.0);
    for _ in 0..steps {
        let (k1u, k1w) = rhs(u, w);
        let (k2u, k2w) = rhs(u + 0.5 * h * k1u, w + 0.5 * h * k1w);
        let (k3u, k3w) = rhs(u + 0.5 * h * k2u, w + 0.5 * h * k2w);
        let (k4u, k4w) = rhs(u + h * k3u, w + h * k3w);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        if u <= 0.0 {
            return false;
        }
    }
    true
}

fn shooting_eigenvalue(p: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, 2.0);
    while stays_positive(p, hi, 200_000) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if stays_positive(p, mid, 200_000) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn closed_form(p: f64) -> f64 {
    (p - 1.0) * (2.0 * PI / (p * (PI / p).sin())).powf(p)
}

#[test]
fn shooting_oracle_reproduces_known_values() {
    assert!((shooting_eigenvalue(2.0) / (PI * PI) - 1.0).abs() < 1e-4);
    for p in [1.5, 3.0, 5.0] {
        let s = shooting_eigenvalue(p);
        assert!((s / closed_form(p) - 1.0).abs() < 1e-3, "p = {p}: {s}");
    }
}

#[test]
fn laplacian_eigenvalue_is_pi_squared() {
    let mesh = make_mesh(0.0, 1.0, 1024).unwrap();
    let e = first_eigenpair(&mesh, 2.0, 1e-9).unwrap();
    assert!((e.lambda1 / (PI * PI) - 1.0).abs() < 1e-3);
}

#[test]
fn matches_shooting_oracle() {
    let mesh = make_mesh(0.0, 1.0, 1024).unwrap();
    for p in [1.5, 3.0, 5.0] {
        let e = first_eigenpair(&mesh, p, 1e-9).unwrap();
        let s = shooting_eigenvalue(p);
        eprintln!("p = {p}: fem {} shooting {s} ({} iterations)", e.lambda1, e.iterations);
        assert!((e.lambda1 / s - 1.0).abs() < 5e-3);
        assert!(e.phi.values()[1..1024].iter().all(|&v| v > 0.0));
    }
}

#[test]
fn rescaling_the_domain() {
    let p = 3.0;
    let unit = first_eigenpair(&make_mesh(0.0, 1.0, 256).unwrap(), p, 1e-9).unwrap();
    let long = first_eigenpair(&make_mesh(0.0, 2.5, 256).unwrap(), p, 1e-9).unwrap();
    assert!((long.lambda1 * 2.5f64.powf(p) / unit.lambda1 - 1.0).abs() < 1e-7);
}

#[test]
fn mesh_convergence_is_monotone() {
    let p = 3.0;
    let vals: Vec<f64> = [64, 128, 256, 512, 1024]
        .iter()
        .map(|&n| first_eigenpair(&make_mesh(0.0, 1.0, n).unwrap(), p, 1e-9).unwrap().lambda1)
        .collect();
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    for w in diffs.windows(2) {
        assert!(w[1] < w[0], "{vals:?}");
    }
}

#[test]
fn distinct_positive_starts_agree() {
    let mesh = make_mesh(0.0, 1.0, 256).unwrap();
    let p = 2.5;
    let tol = 1e-9;
    let reference = first_eigenpair(&mesh, p, tol).unwrap();
    for k in 1..=10 {
        let c = k as f64;
        let start = GridFn::from_fn(&mesh, |x| (x * (1.0 - x)).powf(0.3 + 0.1 * c) * (1.0 + c * x));
        let e = first_eigenpair_from(&mesh, p, tol, &start).unwrap();
        assert!((e.lambda1 - reference.lambda1).abs() < 2.0 * tol * reference.lambda1.max(1.0));
        assert!(e.phi.sup_distance(&reference.phi) < 1e-5 * reference.phi.sup_norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rayleigh_is_bounded_below_by_the_eigenvalue(coeffs in prop::collection::vec(-1.0f64..1.0, 1..8), p in 1.5f64..5.0) {
        let mesh = make_mesh(0.0, 1.0, 128).unwrap();
        let e = first_eigenpair(&mesh, p, 1e-9).unwrap();
        let u = GridFn::from_fn(&mesh, |x| {
            coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * PI * x).sin()).sum()
        });
        prop_assume!(u.sup_norm() > 1e-6);
        prop_assert!(rayleigh(&mesh, &u, p).unwrap() >= e.lambda1 * (1.0 - 1e-9));
    }
}
