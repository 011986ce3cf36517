//! First Dirichlet eigenpair of the one-dimensional p-Laplacian.

use serde::{Deserialize, Serialize};

use crate::descent::{minimize, Objective, Options, Stop};
use crate::error::{Error, Result};
use crate::functionals::normalize_grad;
use crate::grid::{
    abs_pow, grad_seminorm_p, integral_abs_p, integrate_pointwise, signed_pow, GridFn, Mesh,
    Weight, GAUSS,
};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Positive, normalized by `‖φ'‖_p = 1`.
    pub phi: GridFn,
    pub p: f64,
    pub mesh: Mesh,
    pub residual: f64,
    pub iterations: usize,
}

/// `∫|u'|^p / ∫|u|^p`.
pub fn rayleigh(mesh: &Mesh, u: &GridFn, p: f64) -> Result<f64> {
    u.check_mesh(mesh)?;
    let b = integral_abs_p(mesh, u, p);
    if b == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(grad_seminorm_p(mesh, u, p) / b)
}

struct Rayleigh<'a> {
    mesh: &'a Mesh,
    p: f64,
}

impl Objective for Rayleigh<'_> {
    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (p, h) = (self.p, self.mesh.h());
        let n = x.len();
        let mut a = 0.0;
        let mut b = 0.0;
        let mut da = vec![0.0; n];
        let mut db = vec![0.0; n];
        for c in 0..n - 1 {
            let s = (x[c + 1] - x[c]) / h;
            a += h * abs_pow(s, p);
            let flux = p * signed_pow(s, p - 1.0);
            da[c] -= flux;
            da[c + 1] += flux;
            for xi in GAUSS {
                let v = (1.0 - xi) * x[c] + xi * x[c + 1];
                b += 0.5 * h * abs_pow(v, p);
                let dv = 0.5 * h * p * signed_pow(v, p - 1.0);
                db[c] += (1.0 - xi) * dv;
                db[c + 1] += xi * dv;
            }
        }
        if !(b > 0.0) {
            return None;
        }
        let r = a / b;
        let mut g: Vec<f64> = da.iter().zip(&db).map(|(x, y)| (x - r * y) / b).collect();
        g[0] = 0.0;
        g[n - 1] = 0.0;
        Some((r, g))
    }

    fn retract(&self, x: &mut [f64]) {
        normalize_grad(x, self.mesh, self.p);
    }
}

/// First eigenpair from the positive constant initial guess.
pub fn first_eigenpair(mesh: &Mesh, p: f64, tol: f64) -> Result<EigenPair> {
    first_eigenpair_from(mesh, p, tol, &GridFn::from_fn(mesh, |_| 1.0))
}

/// First eigenpair from a caller-supplied nonnegative initial guess.
pub fn first_eigenpair_from(mesh: &Mesh, p: f64, tol: f64, start: &GridFn) -> Result<EigenPair> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponents { p, q: f64::NAN });
    }
    start.check_mesh(mesh)?;
    if start.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let obj = Rayleigh { mesh, p };
    let mut opts = Options::new(tol);
    opts.value_window = Some(5);
    let out = minimize(&obj, start.values().to_vec(), mesh, &opts);
    if out.stop != Stop::Converged {
        return Err(Error::NotConverged {
            what: "first eigenpair",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    let mut phi = out.x;
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    normalize_grad(&mut phi, mesh, p);
    let phi = GridFn::from_raw(phi);
    let lambda1 = rayleigh(mesh, &phi, p)?;
    Ok(EigenPair {
        lambda1,
        phi,
        p,
        mesh: *mesh,
        residual: out.residual,
        iterations: out.iterations,
    })
}

/// `∫ a φ^q`.
pub fn pairing(a: &Weight, pair: &EigenPair, q: f64) -> Result<f64> {
    a.check_mesh(&pair.mesh)?;
    Ok(integrate_pointwise(
        &pair.mesh,
        pair.phi.values(),
        a.values(),
        |u, w| w * abs_pow(u, q),
    ))
}

/// Shift `a_raw` by a constant so that its pairing with `φ^q` vanishes.
pub fn orthogonalize_weight(a_raw: &Weight, pair: &EigenPair, q: f64) -> Result<Weight> {
    let num = pairing(a_raw, pair, q)?;
    let den = integrate_pointwise(&pair.mesh, pair.phi.values(), a_raw.values(), |u, _| {
        abs_pow(u, q)
    });
    let shifted = Weight::from_values(a_raw.shifted(num / den))?;
    if !shifted.is_sign_changing() {
        return Err(Error::WeightNotSignChanging);
    }
    Ok(shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_mesh;
    use std::f64::consts::PI;

    #[test]
    fn rayleigh_basics() {
        let m = make_mesh(0.0, 1.0, 1024).unwrap();
        let s = GridFn::from_fn(&m, |x| (PI * x).sin());
        let r = rayleigh(&m, &s, 2.0).unwrap();
        assert!((r / (PI * PI) - 1.0).abs() < 1e-3);
        let r3 = rayleigh(&m, &s.scaled(-3.5), 2.0).unwrap();
        assert!((r3 - r).abs() < 1e-12 * r);
        let hat = GridFn::from_fn(&m, |x| 1.0 - (2.0 * x - 1.0).abs());
        assert!((rayleigh(&m, &hat, 2.0).unwrap() - 12.0).abs() < 1e-6);
        assert_eq!(rayleigh(&m, &GridFn::zeros(&m), 2.0), Err(Error::ZeroFunction));
    }

    #[test]
    fn laplacian_eigenvalue() {
        let m = make_mesh(0.0, 1.0, 256).unwrap();
        let e = first_eigenpair(&m, 2.0, 1e-9).unwrap();
        assert!((e.lambda1 / (PI * PI) - 1.0).abs() < 1e-3, "{}", e.lambda1);
        assert!((grad_seminorm_p(&m, &e.phi, 2.0) - 1.0).abs() < 1e-10);
        assert!(e.phi.values()[1..256].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn orthogonalization() {
        let m = make_mesh(0.0, 1.0, 128).unwrap();
        let e = first_eigenpair(&m, 3.0, 1e-9).unwrap();
        let raw = Weight::from_fn(&m, |x| if x < 0.5 { 3.0 } else { -0.5 }).unwrap();
        let w = orthogonalize_weight(&raw, &e, 2.0).unwrap();
        let scale = pairing(&raw, &e, 2.0).unwrap().abs();
        assert!(pairing(&w, &e, 2.0).unwrap().abs() < 1e-12 * scale);
        assert!(w.is_sign_changing());
        let w2 = orthogonalize_weight(&w, &e, 2.0).unwrap();
        let d = w.values().iter().zip(w2.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-13);
        let flat = Weight::from_fn(&m, |_| 2.0).unwrap();
        assert!(orthogonalize_weight(&flat, &e, 2.0).is_err());
        let one = Weight::from_fn(&m, |_| 1.0).unwrap();
        assert!(pairing(&one, &e, 2.0).unwrap() > 0.0);
        assert!(pairing(&one.perturbed(-2.0, &one).unwrap(), &e, 2.0).unwrap() < 0.0);
    }
}
