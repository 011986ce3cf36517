//! Energy functionals of the indefinite problem, their nodal gradients, the
//! fiber map along rays and the fibered functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{abs_pow, signed_pow, weight_at_gauss, GridFn, Mesh, Weight, GAUSS};

/// Relative tolerance under which `E` or `G` counts as zero for the fiber map.
pub const FIBER_ZERO_TOL: f64 = 1e-12;

/// One instance of the problem: exponents, parameter, weight and mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub a: Weight,
    pub mesh: Mesh,
}

impl ProblemSpec {
    pub fn new(p: f64, q: f64, lambda: f64, a: Weight, mesh: Mesh) -> Result<Self> {
        if !(q > 1.0 && q < p && p.is_finite()) {
            return Err(Error::InvalidExponents { p, q });
        }
        if !lambda.is_finite() {
            return Err(Error::Precondition(format!("lambda = {lambda}")));
        }
        a.check_mesh(&mesh)?;
        Ok(ProblemSpec {
            p,
            q,
            lambda,
            a,
            mesh,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> ProblemSpec {
        ProblemSpec {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_weight(&self, a: Weight) -> Result<ProblemSpec> {
        a.check_mesh(&self.mesh)?;
        Ok(ProblemSpec { a, ..self.clone() })
    }

    /// `(p - q) / (p q)`, the constant linking `I` and `E` on the Nehari set.
    pub fn nehari_constant(&self) -> f64 {
        (self.p - self.q) / (self.p * self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub grad_term: f64,
    pub mass_term: f64,
    pub mass_term_plus: f64,
    pub weight_term: f64,
    pub weight_term_plus: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "I")]
    pub i: f64,
    pub e_trunc: f64,
    pub i_trunc: f64,
    pub nehari_residual: f64,
    pub nehari_residual_trunc: f64,
}

/// The three raw integrals, in either the full or the positive-part form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Parts {
    pub grad: f64,
    pub mass: f64,
    pub weight: f64,
    /// `∫|u|^q`, the scale against which `weight` is judged to be zero.
    pub abs_q: f64,
}

impl Parts {
    pub fn energy(&self, lambda: f64) -> f64 {
        self.grad - lambda * self.mass
    }
}

/// Raw integrals and their nodal gradients.
pub(crate) struct PartsGrad {
    pub parts: Parts,
    pub d_grad: Vec<f64>,
    pub d_mass: Vec<f64>,
    pub d_weight: Vec<f64>,
}

fn check(u: &GridFn, spec: &ProblemSpec) -> Result<()> {
    u.check_mesh(&spec.mesh)
}

/// `∫|u'|^p`, `∫|u|^p` and `∫a|u|^q` (positive parts when `truncated`).
pub(crate) fn parts(u: &[f64], spec: &ProblemSpec, truncated: bool) -> Parts {
    let (p, q) = (spec.p, spec.q);
    let h = spec.mesh.h();
    let a = spec.a.values();
    let mut grad = 0.0;
    let mut mass = 0.0;
    let mut weight = 0.0;
    let mut abs_q = 0.0;
    for c in 0..u.len() - 1 {
        let (ul, ur) = (u[c], u[c + 1]);
        grad += abs_pow((ur - ul) / h, p);
        if ul == 0.0 && ur == 0.0 {
            continue;
        }
        for xi in GAUSS {
            let v = (1.0 - xi) * ul + xi * ur;
            let m = if truncated { v.max(0.0) } else { v.abs() };
            if m > 0.0 {
                let av = (1.0 - xi) * a[c] + xi * a[c + 1];
                let mq = m.powf(q);
                mass += m.powf(p);
                weight += av * mq;
                abs_q += mq;
            }
        }
    }
    Parts {
        grad: h * grad,
        mass: 0.5 * h * mass,
        weight: 0.5 * h * weight,
        abs_q: 0.5 * h * abs_q,
    }
}

pub(crate) fn parts_grad(u: &[f64], spec: &ProblemSpec, truncated: bool) -> PartsGrad {
    let (p, q) = (spec.p, spec.q);
    let h = spec.mesh.h();
    let n = u.len();
    let ag = weight_at_gauss(spec.a.values());
    let mut d_grad = vec![0.0; n];
    let mut d_mass = vec![0.0; n];
    let mut d_weight = vec![0.0; n];
    let mut grad = 0.0;
    let mut mass = 0.0;
    let mut weight = 0.0;
    let mut abs_q = 0.0;
    for c in 0..n - 1 {
        let (ul, ur) = (u[c], u[c + 1]);
        let s = (ur - ul) / h;
        grad += abs_pow(s, p);
        let flux = p * signed_pow(s, p - 1.0);
        d_grad[c] -= flux;
        d_grad[c + 1] += flux;
        if ul == 0.0 && ur == 0.0 {
            continue;
        }
        for (k, xi) in GAUSS.iter().enumerate() {
            let v = (1.0 - xi) * ul + xi * ur;
            if v == 0.0 || (truncated && v < 0.0) {
                continue;
            }
            let av = ag[2 * c + k];
            let m = v.abs();
            let mq = m.powf(q);
            mass += m.powf(p);
            weight += av * mq;
            abs_q += mq;
            let dm = 0.5 * h * p * signed_pow(v, p - 1.0);
            let dw = 0.5 * h * av * q * signed_pow(v, q - 1.0);
            d_mass[c] += (1.0 - xi) * dm;
            d_mass[c + 1] += xi * dm;
            d_weight[c] += (1.0 - xi) * dw;
            d_weight[c + 1] += xi * dw;
        }
    }
    for d in [&mut d_grad, &mut d_mass, &mut d_weight] {
        d[0] = 0.0;
        d[n - 1] = 0.0;
    }
    PartsGrad {
        parts: Parts {
            grad: h * grad,
            mass: 0.5 * h * mass,
            weight: 0.5 * h * weight,
            abs_q: 0.5 * h * abs_q,
        },
        d_grad,
        d_mass,
        d_weight,
    }
}

/// Tridiagonal Hessian of the discrete `I_λ` (or `Ĩ_λ`): the diagonal and
/// the couplings `(i, i + 1)`. Boundary rows are the identity. Powers of
/// `|v|` with negative exponent are evaluated at `|v| ≥ floor`.
pub(crate) fn hessian_i(u: &[f64], spec: &ProblemSpec, truncated: bool, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let (p, q, lambda) = (spec.p, spec.q, spec.lambda);
    let h = spec.mesh.h();
    let n = u.len();
    let ag = weight_at_gauss(spec.a.values());
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for c in 0..n - 1 {
        let (ul, ur) = (u[c], u[c + 1]);
        let s = (ur - ul) / h;
        let k = (p - 1.0) * s.abs().max(floor).powf(p - 2.0) / h;
        diag[c] += k;
        diag[c + 1] += k;
        off[c] -= k;
        for (j, xi) in GAUSS.iter().enumerate() {
            let v = (1.0 - xi) * ul + xi * ur;
            if truncated && v <= 0.0 {
                continue;
            }
            let m = v.abs().max(floor);
            if m == 0.0 {
                continue;
            }
            let w = 0.5 * h * (lambda * (p - 1.0) * m.powf(p - 2.0) + ag[2 * c + j] * (q - 1.0) * m.powf(q - 2.0));
            diag[c] -= (1.0 - xi) * (1.0 - xi) * w;
            diag[c + 1] -= xi * xi * w;
            off[c] -= (1.0 - xi) * xi * w;
        }
    }
    for i in [0, n - 1] {
        diag[i] = 1.0;
    }
    off[0] = 0.0;
    off[n - 2] = 0.0;
    (diag, off)
}

pub fn evaluate(u: &GridFn, spec: &ProblemSpec) -> Result<EnergyBreakdown> {
    check(u, spec)?;
    let full = parts(u.values(), spec, false);
    let plus = parts(u.values(), spec, true);
    let lambda = spec.lambda;
    let e = full.grad - lambda * full.mass;
    let e_trunc = full.grad - lambda * plus.mass;
    Ok(EnergyBreakdown {
        grad_term: full.grad,
        mass_term: full.mass,
        mass_term_plus: plus.mass,
        weight_term: full.weight,
        weight_term_plus: plus.weight,
        e,
        i: e / spec.p - full.weight / spec.q,
        e_trunc,
        i_trunc: e_trunc / spec.p - plus.weight / spec.q,
        nehari_residual: e - full.weight,
        nehari_residual_trunc: e_trunc - plus.weight,
    })
}

/// `I_λ(u)` or its truncated form.
pub fn energy(u: &GridFn, spec: &ProblemSpec, truncated: bool) -> Result<f64> {
    check(u, spec)?;
    let pt = parts(u.values(), spec, truncated);
    Ok(pt.energy(spec.lambda) / spec.p - pt.weight / spec.q)
}

/// Nodal partial derivatives of the discrete `I_λ` (or `Ĩ_λ`); boundary
/// slots are zero.
#[allow(non_snake_case)]
pub fn gradient_I(u: &GridFn, spec: &ProblemSpec, truncated: bool) -> Result<GridFn> {
    check(u, spec)?;
    let pg = parts_grad(u.values(), spec, truncated);
    Ok(GridFn::from_raw(combine_i(&pg, spec)))
}

pub(crate) fn combine_i(pg: &PartsGrad, spec: &ProblemSpec) -> Vec<f64> {
    let (p, q, lambda) = (spec.p, spec.q, spec.lambda);
    pg.d_grad
        .iter()
        .zip(&pg.d_mass)
        .zip(&pg.d_weight)
        .map(|((dg, dm), dw)| (dg - lambda * dm) / p - dw / q)
        .collect()
}

fn fiber_parts(u: &GridFn, spec: &ProblemSpec, truncated: bool) -> Result<(f64, f64)> {
    check(u, spec)?;
    let pt = parts(u.values(), spec, truncated);
    let e = pt.energy(spec.lambda);
    let g = pt.weight;
    fiber_admissible(e, g, &pt, spec)?;
    Ok((e, g))
}

/// Reject `E`, `G` that are zero within tolerance or of opposite sign.
pub(crate) fn fiber_admissible(e: f64, g: f64, pt: &Parts, spec: &ProblemSpec) -> Result<()> {
    let e_scale = pt.grad + spec.lambda.abs() * pt.mass;
    let g_scale = spec.a.sup_norm() * pt.abs_q;
    let tiny_e = e.abs() <= FIBER_ZERO_TOL * e_scale || e == 0.0;
    let tiny_g = g.abs() <= FIBER_ZERO_TOL * g_scale || g == 0.0;
    if tiny_e || tiny_g || e.signum() != g.signum() {
        return Err(Error::FiberUndefined {
            energy: e,
            weight: g,
        });
    }
    Ok(())
}

fn scale_from(e: f64, g: f64, spec: &ProblemSpec) -> f64 {
    (g / e).powf(1.0 / (spec.p - spec.q))
}

pub(crate) fn j_from(e: f64, g: f64, spec: &ProblemSpec) -> f64 {
    let (p, q) = (spec.p, spec.q);
    -e.signum() * spec.nehari_constant() * g.abs().powf(p / (p - q)) / e.abs().powf(q / (p - q))
}

/// `t_λ(u)`, the critical point of `t ↦ I_λ(t u)` on `t > 0`.
pub fn fiber_scale(u: &GridFn, spec: &ProblemSpec) -> Result<f64> {
    let (e, g) = fiber_parts(u, spec, false)?;
    Ok(scale_from(e, g, spec))
}

pub fn fiber_scale_trunc(u: &GridFn, spec: &ProblemSpec) -> Result<f64> {
    let (e, g) = fiber_parts(u, spec, true)?;
    Ok(scale_from(e, g, spec))
}

/// The 0-homogeneous fibered functional `J_λ(u) = I_λ(t_λ(u) u)`.
#[allow(non_snake_case)]
pub fn fibered_J(u: &GridFn, spec: &ProblemSpec) -> Result<f64> {
    let (e, g) = fiber_parts(u, spec, false)?;
    Ok(j_from(e, g, spec))
}

/// `J` built from the truncated integrals.
#[allow(non_snake_case)]
pub fn fibered_J_trunc(u: &GridFn, spec: &ProblemSpec) -> Result<f64> {
    let (e, g) = fiber_parts(u, spec, true)?;
    Ok(j_from(e, g, spec))
}

/// `t_λ(u) u`.
pub fn nehari_project(u: &GridFn, spec: &ProblemSpec) -> Result<GridFn> {
    Ok(u.scaled(fiber_scale(u, spec)?))
}

pub fn nehari_project_trunc(u: &GridFn, spec: &ProblemSpec) -> Result<GridFn> {
    Ok(u.scaled(fiber_scale_trunc(u, spec)?))
}

/// Normalize to `‖u'‖_p = 1`.
pub(crate) fn normalize_grad(u: &mut [f64], mesh: &Mesh, p: f64) {
    let h = mesh.h();
    let a: f64 = u.windows(2).map(|w| h * abs_pow((w[1] - w[0]) / h, p)).sum();
    if a > 0.0 {
        let c = a.powf(-1.0 / p);
        u.iter_mut().for_each(|v| *v *= c);
    }
}
