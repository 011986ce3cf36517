//! Critical parameter values, the polynomial Picone condition, the eigenvalue
//! bound on the positive set of the weight and the Picone certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descent::{minimize, Objective, Options};
use crate::eigen::{first_eigenpair, pairing, EigenPair, DEFAULT_EIGEN_TOL};
use crate::error::{Error, Result};
use crate::functionals::{normalize_grad, ProblemSpec};
use crate::grid::{
    abs_pow, integrate_pointwise, signed_pow, weight_at_gauss, GridFn, SignPartition, GAUSS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingSign {
    Negative,
    Zero,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub lambda1: f64,
    pub lambda_star: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub lambda_zero: f64,
    pub pairing: f64,
    pub pairing_sign: PairingSign,
    /// Gap between the constrained infimum and `λ₁` (zero when not computed).
    pub margin: f64,
    /// Whether the constrained minimization converged (true when not needed).
    pub converged: bool,
}

/// Options of the penalized constrained Rayleigh minimization.
#[derive(Debug, Clone)]
pub struct PenaltyOptions {
    pub starts: usize,
    pub stages: usize,
    pub rho0: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions {
            starts: 8,
            stages: 6,
            rho0: 10.0,
            tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

pub fn pairing_sign(value: f64, scale: f64) -> PairingSign {
    if value.abs() <= 1e-10 * scale {
        PairingSign::Zero
    } else if value > 0.0 {
        PairingSign::Positive
    } else {
        PairingSign::Negative
    }
}

pub fn compute_critical_values(spec: &ProblemSpec, pair: &EigenPair) -> Result<CriticalValues> {
    compute_critical_values_with(spec, pair, &PenaltyOptions::default())
}

pub fn compute_critical_values_with(
    spec: &ProblemSpec,
    pair: &EigenPair,
    opts: &PenaltyOptions,
) -> Result<CriticalValues> {
    if !spec.a.is_sign_changing() {
        return Err(Error::WeightNotSignChanging);
    }
    let l1 = pair.lambda1;
    let value = pairing(&spec.a, pair, spec.q)?;
    let scale = integrate_pointwise(&pair.mesh, pair.phi.values(), spec.a.values(), |u, a| {
        a.abs() * abs_pow(u, spec.q)
    });
    let sign = pairing_sign(value, scale);
    let out = |star, plus, minus, zero, margin, converged| CriticalValues {
        lambda1: l1,
        lambda_star: star,
        lambda_plus: plus,
        lambda_minus: minus,
        lambda_zero: zero,
        pairing: value,
        pairing_sign: sign,
        margin,
        converged,
    };
    Ok(match sign {
        PairingSign::Zero => out(l1, l1, l1, l1, 0.0, true),
        PairingSign::Positive => {
            // the constrained infimum over {∫a|u|^q ≤ 0}
            let c = constrained_infimum(spec, pair, -1.0, opts)?;
            out(l1, l1, c.value, c.value, c.value - l1, c.converged)
        }
        PairingSign::Negative => {
            let c = constrained_infimum(spec, pair, 1.0, opts)?;
            out(c.value, c.value, l1, c.value, c.value - l1, c.converged)
        }
    })
}

pub(crate) struct Constrained {
    pub value: f64,
    pub converged: bool,
}

/// Rayleigh quotient plus `ρ λ₁ max(0, -c(u))²` where
/// `c(u) = σ∫a|u|^q / ∫|a||u|^q`.
struct Penalized<'a> {
    spec: &'a ProblemSpec,
    ag: Vec<f64>,
    sigma: f64,
    rho: f64,
}

impl Penalized<'_> {
    fn eval(&self, x: &[f64], want_grad: bool) -> Option<(f64, f64, Vec<f64>)> {
        let (p, q) = (self.spec.p, self.spec.q);
        let h = self.spec.mesh.h();
        let n = x.len();
        let (mut a, mut b, mut g, mut d) = (0.0, 0.0, 0.0, 0.0);
        let mut grads = if want_grad {
            vec![vec![0.0; n]; 4]
        } else {
            Vec::new()
        };
        for c in 0..n - 1 {
            let s = (x[c + 1] - x[c]) / h;
            a += h * abs_pow(s, p);
            if want_grad {
                let flux = p * signed_pow(s, p - 1.0);
                grads[0][c] -= flux;
                grads[0][c + 1] += flux;
            }
            for (k, xi) in GAUSS.iter().enumerate() {
                let v = (1.0 - xi) * x[c] + xi * x[c + 1];
                if v == 0.0 {
                    continue;
                }
                let av = self.ag[2 * c + k];
                let w = 0.5 * h;
                let vq = abs_pow(v, q);
                b += w * abs_pow(v, p);
                g += w * av * vq;
                d += w * av.abs() * vq;
                if want_grad {
                    let dp = w * p * signed_pow(v, p - 1.0);
                    let dq = w * q * signed_pow(v, q - 1.0);
                    for (slot, val) in [(1, dp), (2, av * dq), (3, av.abs() * dq)] {
                        grads[slot][c] += (1.0 - xi) * val;
                        grads[slot][c + 1] += xi * val;
                    }
                }
            }
        }
        if !(b > 0.0 && d > 0.0) {
            return None;
        }
        let r = a / b;
        let cval = self.sigma * g / d;
        let viol = (-cval).max(0.0);
        let weight = self.rho;
        let f = r + weight * viol * viol;
        if !want_grad {
            return Some((f, r, Vec::new()));
        }
        let mut grad = vec![0.0; n];
        for i in 1..n - 1 {
            let dr = (grads[0][i] - r * grads[1][i]) / b;
            let dc = self.sigma * (grads[2][i] * d - g * grads[3][i]) / (d * d);
            grad[i] = dr - 2.0 * weight * viol * dc;
        }
        Some((f, r, grad))
    }
}

impl Objective for Penalized<'_> {
    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.eval(x, true).map(|(f, _, g)| (f, g))
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        self.eval(x, false).map(|(f, _, _)| f)
    }

    fn retract(&self, x: &mut [f64]) {
        normalize_grad(x, &self.spec.mesh, self.spec.p);
    }
}

/// Random positive perturbation of `φ`: `φ · exp(Σ c_k sin(kπ(x - x_lo)/L))`.
pub(crate) fn perturbed_phi(pair: &EigenPair, seed: u64, index: usize, amplitude: f64) -> GridFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let coeffs: Vec<f64> = (1..=6)
        .map(|k| amplitude * rng.gen_range(-1.0..1.0) / k as f64)
        .collect();
    let mesh = pair.mesh;
    let (x0, len) = (mesh.x_lo(), mesh.length());
    let phi = pair.phi.values();
    let vals: Vec<f64> = (0..mesh.n_nodes())
        .map(|i| {
            let t = (mesh.node(i) - x0) / len;
            let e: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * t).sin())
                .sum();
            phi[i] * e.exp()
        })
        .collect();
    GridFn::from_raw(vals)
}

/// `inf { R(u) : σ ∫a|u|^q ≥ 0 }` by exterior penalty with continuation.
pub(crate) fn constrained_infimum(
    spec: &ProblemSpec,
    pair: &EigenPair,
    sigma: f64,
    opts: &PenaltyOptions,
) -> Result<Constrained> {
    let ag = weight_at_gauss(spec.a.values());
    let l1 = pair.lambda1;
    let mut best: Option<Constrained> = None;
    for k in 0..opts.starts.max(1) {
        let start = if k == 0 {
            pair.phi.clone()
        } else {
            perturbed_phi(pair, opts.seed, k, 1.0)
        };
        let mut x = start.into_values();
        let mut converged = true;
        let mut rho = opts.rho0;
        let mut values = Vec::with_capacity(opts.stages);
        for stage in 0..opts.stages {
            let obj = Penalized {
                spec,
                ag: ag.clone(),
                sigma,
                rho: rho * l1,
            };
            let o = Options::new(opts.tol * l1);
            let res = minimize(&obj, x, &spec.mesh, &o);
            // the last, stiffest stage may stall short of tol; accept the
            // same 10x slack the line search uses
            converged &= res.converged() || (stage + 1 == opts.stages && res.residual < 10.0 * o.tol);
            x = res.x;
            values.push(obj.eval(&x, false).map(|v| v.1).unwrap_or(f64::NAN));
            rho *= 10.0;
        }
        // exterior-penalty values increase towards the infimum, so the last
        // one is kept as is; extrapolating it overshoots into the region
        // where the constraint set of the branch is empty
        let r = match values[..] {
            [.., a, b, c] => {
                converged &= (c - b).abs() <= 0.5 * (b - a).abs() + opts.tol * l1;
                c
            }
            [.., c] => c,
            [] => f64::NAN,
        };
        if r.is_finite() && best.as_ref().is_none_or(|b| r < b.value) {
            best = Some(Constrained { value: r, converged });
        }
    }
    best.ok_or(Error::NotConverged {
        what: "constrained Rayleigh minimization",
        iterations: 0,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiconeReport {
    pub p: f64,
    pub q: f64,
    pub holds: bool,
    pub min_value: f64,
    pub argmin_s: f64,
}

/// `(q-1) s^p + q s^{p-1} - (p-q) s + (q-p+1)`.
pub fn picone_polynomial(p: f64, q: f64, s: f64) -> f64 {
    (q - 1.0) * s.powf(p) + q * s.powf(p - 1.0) - (p - q) * s + (q - p + 1.0)
}

fn picone_derivative(p: f64, q: f64, s: f64) -> f64 {
    p * (q - 1.0) * s.powf(p - 1.0) + q * (p - 1.0) * s.powf(p - 2.0) - (p - q)
}

pub fn picone_condition(p: f64, q: f64) -> PiconeReport {
    let report = |min_value: f64, argmin_s| PiconeReport {
        p,
        q,
        holds: min_value >= -1e-12,
        min_value,
        argmin_s,
    };
    let f0 = picone_polynomial(p, q, 0.0);
    let s_max = 2f64.max(((p - q) / (q - 1.0)).powf(1.0 / (p - 1.0)) + 1.0);
    let (mut best, mut arg) = (f0, 0.0);
    let consider = |s: f64, best: &mut f64, arg: &mut f64| {
        let v = picone_polynomial(p, q, s);
        if v < *best {
            *best = v;
            *arg = s;
        }
    };
    consider(1.0, &mut best, &mut arg);
    consider(s_max, &mut best, &mut arg);
    const POINTS: usize = 10_000;
    let lo = 1e-12f64.ln();
    let hi = s_max.ln();
    let grid = |k: usize| (lo + (hi - lo) * k as f64 / (POINTS - 1) as f64).exp();
    let mut prev_s = grid(0);
    let mut prev_d = picone_derivative(p, q, prev_s);
    for k in 1..POINTS {
        let s = grid(k);
        let d = picone_derivative(p, q, s);
        if prev_d < 0.0 && d >= 0.0 {
            let (mut a, mut b) = (prev_s, s);
            while b - a > 1e-12 * b.max(1.0) {
                let m = 0.5 * (a + b);
                if picone_derivative(p, q, m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            consider(0.5 * (a + b), &mut best, &mut arg);
        }
        prev_s = s;
        prev_d = d;
    }
    report(best, arg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ExistenceRegime,
    NonexistenceRegime,
    Undetermined,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ExistenceRegime => "existence_regime",
            Regime::NonexistenceRegime => "nonexistence_regime",
            Regime::Undetermined => "undetermined",
        }
    }
}

pub fn region_classify(p: f64, q: f64) -> Result<Regime> {
    if !(q > 1.0 && q < p) {
        return Err(Error::InvalidExponents { p, q });
    }
    let existence = p > 2.0 * q;
    let nonexistence = picone_condition(p, q).holds;
    assert!(
        !(existence && nonexistence),
        "existence and nonexistence regimes overlap at p = {p}, q = {q}"
    );
    Ok(if existence {
        Regime::ExistenceRegime
    } else if nonexistence {
        Regime::NonexistenceRegime
    } else {
        Regime::Undetermined
    })
}

/// Smallest first eigenvalue over the positive components of the weight.
pub fn nonexistence_bound(spec: &ProblemSpec, partition: &SignPartition) -> Result<f64> {
    if partition.plus_components.is_empty() {
        return Err(Error::EmptyPlusSet);
    }
    let mut best = f64::INFINITY;
    for &(i0, i1) in &partition.plus_components {
        let sub = spec.mesh.submesh(i0 - 1, i1 + 1)?;
        let e = first_eigenpair(&sub, spec.p, DEFAULT_EIGEN_TOL)?;
        best = best.min(e.lambda1);
    }
    Ok(best)
}

/// Default dead-core threshold relative to `‖u‖∞`.
pub const DEAD_CORE_REL: f64 = 1e-8;

/// `(λ₁ - λ)∫u^{p-q}φ^q - ∫_{u>0} aφ^q`; negative values contradict `u` being a
/// nonnegative solution.
pub fn picone_certificate(u: &GridFn, spec: &ProblemSpec, pair: &EigenPair) -> Result<f64> {
    u.check_mesh(&spec.mesh)?;
    pair.phi.check_mesh(&spec.mesh)?;
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Err(Error::ZeroFunction);
    }
    if u.min_value() < -1e-12 * sup {
        return Err(Error::Precondition("certificate needs a nonnegative function".into()));
    }
    if !picone_condition(spec.p, spec.q).holds {
        return Err(Error::Precondition(format!(
            "polynomial condition fails for p = {}, q = {}",
            spec.p, spec.q
        )));
    }
    let (p, q) = (spec.p, spec.q);
    let thr = DEAD_CORE_REL * sup;
    let mesh = &spec.mesh;
    let (uv, phi, a) = (u.values(), pair.phi.values(), spec.a.values());
    let h = mesh.h();
    let (mut left, mut right) = (0.0, 0.0);
    for c in 0..uv.len() - 1 {
        for xi in GAUSS {
            let lerp = |v: &[f64]| (1.0 - xi) * v[c] + xi * v[c + 1];
            let (us, ps, as_) = (lerp(uv).max(0.0), lerp(phi).max(0.0), lerp(a));
            left += 0.5 * h * us.powf(p - q) * ps.powf(q);
            if us > thr {
                right += 0.5 * h * as_ * ps.powf(q);
            }
        }
    }
    Ok((pair.lambda1 - spec.lambda) * left - right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_at_one() {
        for (p, q) in [(2.0, 1.5), (5.0, 2.0), (3.3, 1.1), (7.0, 6.5)] {
            assert!((picone_polynomial(p, q, 1.0) - 2.0 * (2.0 * q - p)).abs() < 1e-12);
            assert!((picone_polynomial(p, q, 0.0) - (q - p + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn known_cases() {
        assert!(picone_condition(2.0, 1.5).holds);
        assert!(!picone_condition(5.0, 2.0).holds);
        // f(s) = s (s² + 2s - 1) dips below zero near the origin
        let r = picone_condition(3.0, 2.0);
        assert!(!r.holds);
        // f'(s) = 3s² + 4s - 1
        let exact_arg = (-4.0 + 28f64.sqrt()) / 6.0;
        assert!((r.argmin_s - exact_arg).abs() < 1e-9, "{}", r.argmin_s);
    }

    #[test]
    fn regions() {
        assert_eq!(region_classify(5.0, 2.0).unwrap(), Regime::ExistenceRegime);
        assert_eq!(region_classify(2.0, 1.5).unwrap(), Regime::NonexistenceRegime);
        assert_eq!(region_classify(3.0, 2.0).unwrap(), Regime::Undetermined);
        assert_ne!(region_classify(4.0, 2.0).unwrap(), Regime::ExistenceRegime);
        assert!(region_classify(2.0, 2.0).is_err());
    }
}
