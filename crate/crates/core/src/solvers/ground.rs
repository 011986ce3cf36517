//! Minimization of the fibered functional: ground states on the branch where
//! `E > 0` and the weight integral is positive, and the `M⁻` level on the
//! branch where both are negative.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{descend_energy, descend_energy_capped, make_report, SolutionKind, SolveReport, SolverConfig};
use crate::critical::perturbed_phi;
use crate::descent::{minimize, sup, Objective, Outcome, Stop};
use crate::eigen::{first_eigenpair, EigenPair, DEFAULT_EIGEN_TOL};
use crate::error::{Error, Result};
use crate::functionals::{fiber_admissible, j_from, normalize_grad, parts, parts_grad, ProblemSpec};
use crate::grid::{sign_partition, GridFn};

/// Reaching `DIVERGENCE_FACTOR` times the best starting value of `J` counts
/// as unboundedness.
const DIVERGENCE_FACTOR: f64 = 1e4;
/// Candidates whose sup norm grows past this multiple of the start are
/// abandoned as runaway descents.
const RUNAWAY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    /// `E > 0`, `∫a|u|^q > 0`: fiber minima, `J < 0`.
    Plus,
    /// `E < 0`, `∫a|u|^q < 0`: fiber maxima, `J > 0`.
    Minus,
}

struct Fibered<'a> {
    spec: &'a ProblemSpec,
    truncated: bool,
    branch: Branch,
    floor: f64,
    /// First point seen with positive weight integral and `E ≤ 0`: the
    /// energy is unbounded below along its ray.
    witness: RefCell<Option<Vec<f64>>>,
}

impl Fibered<'_> {
    fn eval(&self, x: &[f64], want_grad: bool) -> Option<(f64, Vec<f64>)> {
        let spec = self.spec;
        let (p, q) = (spec.p, spec.q);
        let (pt, pg) = if want_grad {
            let pg = parts_grad(x, spec, self.truncated);
            (pg.parts, Some(pg))
        } else {
            (parts(x, spec, self.truncated), None)
        };
        let e = pt.energy(spec.lambda);
        let g = pt.weight;
        if self.branch == Branch::Plus
            && g > 1e-6 * spec.a.sup_norm() * pt.abs_q
            && e <= 1e-9 * pt.grad
        {
            let mut w = self.witness.borrow_mut();
            if w.is_none() {
                *w = Some(x.to_vec());
            }
            return None;
        }
        fiber_admissible(e, g, &pt, spec).ok()?;
        if (self.branch == Branch::Plus) != (e > 0.0) {
            return None;
        }
        let j = j_from(e, g, spec);
        let Some(pg) = pg else {
            return Some((j, Vec::new()));
        };
        let alpha = p / (p - q);
        let beta = q / (p - q);
        let grad = pg
            .d_grad
            .iter()
            .zip(&pg.d_mass)
            .zip(&pg.d_weight)
            .map(|((dg, dm), dw)| j * (alpha * dw / g - beta * (dg - spec.lambda * dm) / e))
            .collect();
        Some((j, grad))
    }
}

impl Objective for Fibered<'_> {
    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.eval(x, true)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        self.eval(x, false).map(|v| v.0)
    }

    /// `∇J(u) = t ∇I(t u)`, so dividing by the fiber scale measures the
    /// energy residual at the projected point.
    fn residual(&self, x: &[f64], g: &[f64]) -> f64 {
        let pt = parts(x, self.spec, self.truncated);
        let t = (pt.weight / pt.energy(self.spec.lambda)).powf(1.0 / (self.spec.p - self.spec.q));
        sup(g) / t
    }

    fn retract(&self, x: &mut [f64]) {
        normalize_grad(x, &self.spec.mesh, self.spec.p);
    }

    fn abort(&self, _x: &[f64], value: f64) -> bool {
        self.witness.borrow().is_some() || value < self.floor
    }
}

fn j_at(x: &[f64], spec: &ProblemSpec, truncated: bool) -> Option<f64> {
    let pt = parts(x, spec, truncated);
    let (e, g) = (pt.energy(spec.lambda), pt.weight);
    fiber_admissible(e, g, &pt, spec).ok()?;
    Some(j_from(e, g, spec))
}

fn eigenpair_for(spec: &ProblemSpec) -> Result<EigenPair> {
    first_eigenpair(&spec.mesh, spec.p, DEFAULT_EIGEN_TOL)
}

/// `sin` bump supported on the node range `i0 - 1 ..= i1 + 1`.
pub(crate) fn component_bump(spec: &ProblemSpec, (i0, i1): (usize, usize)) -> GridFn {
    let n = spec.mesh.n_nodes();
    let (lo, hi) = (i0 - 1, i1 + 1);
    let width = (hi - lo) as f64;
    let vals = (0..n)
        .map(|i| {
            if i > lo && i < hi {
                (std::f64::consts::PI * (i - lo) as f64 / width).sin()
            } else {
                0.0
            }
        })
        .collect();
    GridFn::from_raw(vals)
}

/// Nonnegative starts: one bump per plus component, `φ`, then random
/// positive perturbations of `φ`, some with extra mass on a plus component.
pub(crate) fn plus_seeds(spec: &ProblemSpec, pair: &EigenPair, count: usize, seed: u64) -> Result<Vec<GridFn>> {
    let partition = sign_partition(&spec.a, 0.0);
    if partition.plus_components.is_empty() {
        return Err(Error::EmptyPlusSet);
    }
    let bumps: Vec<GridFn> = partition
        .plus_components
        .iter()
        .map(|&c| component_bump(spec, c))
        .collect();
    let phi_sup = pair.phi.sup_norm();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        if k < bumps.len() {
            out.push(bumps[k].scaled(phi_sup));
            continue;
        }
        if k == bumps.len() {
            out.push(pair.phi.clone());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let base = perturbed_phi(pair, seed, k, 0.5);
        if k % 2 == 1 && parts(base.values(), spec, true).weight > 0.0 {
            // stays close to φ: reaches the branch that bifurcates from λ₁
            out.push(base);
            continue;
        }
        let bump = &bumps[k % bumps.len()];
        let mut c = rng.gen_range(0.2..1.5) * phi_sup;
        let mut u = base.axpy(c, bump);
        // push mass onto the plus set until the weight integral is positive
        for _ in 0..20 {
            let pt = parts(u.values(), spec, true);
            if pt.weight > 0.0 {
                break;
            }
            c *= 2.0;
            u = base.axpy(c, bump);
        }
        out.push(u);
    }
    Ok(out)
}

pub fn ground_state(spec: &ProblemSpec, starts: usize) -> Result<SolveReport> {
    let cfg = SolverConfig {
        starts,
        ..SolverConfig::default()
    };
    ground_state_with(spec, &cfg, true, None)
}

/// Ground state by minimizing `J` over the positive cone, then projecting to
/// the Nehari set and polishing on the energy. `truncated` selects `Ĩ`/`I`.
pub fn ground_state_with(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    truncated: bool,
    pair: Option<&EigenPair>,
) -> Result<SolveReport> {
    let owned;
    let pair = match pair {
        Some(p) => p,
        None => {
            owned = eigenpair_for(spec)?;
            &owned
        }
    };
    let seeds = plus_seeds(spec, pair, cfg.starts.max(1), cfg.seed)?;
    let j0 = seeds
        .iter()
        .filter_map(|s| j_at(s.values(), spec, truncated))
        .filter(|j| *j < 0.0)
        .fold(f64::INFINITY, f64::min);
    if !j0.is_finite() {
        if seeds.iter().any(|s| {
            let pt = parts(s.values(), spec, truncated);
            pt.weight > 0.0 && pt.energy(spec.lambda) <= 0.0
        }) {
            return Err(Error::Diverged {
                lambda: spec.lambda,
                level: f64::NEG_INFINITY,
            });
        }
        return Err(Error::Precondition("no start in the positive cone".into()));
    }
    let floor = DIVERGENCE_FACTOR * j0;
    let mut best: Option<Outcome> = None;
    let mut total_iter = 0;
    for s in &seeds {
        let out = fibered_descent(spec, s, truncated, Branch::Plus, floor, cfg);
        total_iter += out.iterations;
        match out.stop {
            Stop::Aborted => {
                return Err(Error::Diverged {
                    lambda: spec.lambda,
                    level: out.value,
                })
            }
            Stop::Converged if best.as_ref().is_none_or(|b| out.value < b.value) => best = Some(out),
            _ => {}
        }
    }
    let best = best.ok_or(Error::NotConverged {
        what: "fibered minimization",
        iterations: total_iter,
        residual: f64::NAN,
    })?;
    let u = polish(spec, &best.x, truncated, cfg, &mut total_iter)?;
    make_report(u, spec, SolutionKind::Ground, total_iter, truncated, cfg)
}

fn fibered_descent(
    spec: &ProblemSpec,
    start: &GridFn,
    truncated: bool,
    branch: Branch,
    floor: f64,
    cfg: &SolverConfig,
) -> Outcome {
    fibered_descent_witness(spec, start, truncated, branch, floor, cfg).0
}

fn fibered_descent_witness(
    spec: &ProblemSpec,
    start: &GridFn,
    truncated: bool,
    branch: Branch,
    floor: f64,
    cfg: &SolverConfig,
) -> (Outcome, Option<Vec<f64>>) {
    let obj = Fibered {
        spec,
        truncated,
        branch,
        floor,
        witness: RefCell::new(None),
    };
    let mut opts = cfg.options();
    opts.max_step = Some(0.25);
    let mut out = minimize(&obj, start.values().to_vec(), &spec.mesh, &opts);
    let witness = obj.witness.into_inner();
    if witness.is_some() {
        out.stop = Stop::Aborted;
    }
    (out, witness)
}

/// A nonnegative function with `Ĩ_λ` below `target < 0`, reached by
/// descending the truncated fibered functional from `start`, then from `φ`
/// tilted toward each plus component, then from the ground-state seeds.
pub fn descend_below(
    spec: &ProblemSpec,
    start: &GridFn,
    target: f64,
    cfg: &SolverConfig,
    pair: Option<&EigenPair>,
) -> Result<GridFn> {
    if !(target < 0.0) {
        return Err(Error::Precondition("target level must be negative".into()));
    }
    let owned;
    let pair = match pair {
        Some(p) => p,
        None => {
            owned = eigenpair_for(spec)?;
            &owned
        }
    };
    let mut starts = vec![start.clone()];
    let partition = sign_partition(&spec.a, 0.0);
    let phi_sup = pair.phi.sup_norm();
    for &c in &partition.plus_components {
        let bump = component_bump(spec, c);
        for eps in [0.01, 0.1, 1.0] {
            starts.push(pair.phi.axpy(eps * phi_sup, &bump));
        }
    }
    starts.extend(plus_seeds(spec, pair, cfg.starts.max(1), cfg.seed)?);
    let mut best = f64::INFINITY;
    for s in &starts {
        if let Some(v) = below_from(spec, s, target, cfg)? {
            return Ok(v);
        }
        if let Some(j) = j_at(s.values(), spec, true) {
            best = best.min(j);
        }
    }
    Err(Error::Precondition(format!(
        "no descent reached the target level {target:e} (best start {best:e})"
    )))
}

fn below_from(spec: &ProblemSpec, start: &GridFn, target: f64, cfg: &SolverConfig) -> Result<Option<GridFn>> {
    let (out, witness) = fibered_descent_witness(spec, start, true, Branch::Plus, target, cfg);
    if let Some(w) = witness {
        // energy is unbounded below along this ray; walk out until below target
        let u = GridFn::from_raw(w).positive_part();
        let mut t = 1.0;
        for _ in 0..200 {
            let v = u.scaled(t);
            if crate::functionals::energy(&v, spec, true)? < target {
                return Ok(Some(v));
            }
            t *= 2.0;
        }
        return Ok(None);
    }
    if !(out.value < target) {
        return Ok(None);
    }
    let pt = parts(&out.x, spec, true);
    let t = (pt.weight / pt.energy(spec.lambda)).powf(1.0 / (spec.p - spec.q));
    let v = GridFn::from_raw(out.x.iter().map(|v| t * v).collect()).positive_part();
    Ok((crate::functionals::energy(&v, spec, true)? < target).then_some(v))
}

/// Scale onto the Nehari set and descend the energy to the requested residual.
fn polish(
    spec: &ProblemSpec,
    x: &[f64],
    truncated: bool,
    cfg: &SolverConfig,
    iterations: &mut usize,
) -> Result<GridFn> {
    let pt = parts(x, spec, truncated);
    let t = (pt.weight / pt.energy(spec.lambda)).powf(1.0 / (spec.p - spec.q));
    let u = GridFn::from_raw(x.iter().map(|v| t * v).collect());
    let mut opts = cfg.options();
    opts.max_step = Some(0.05);
    let out = descend_energy(spec, &u, truncated, &opts);
    *iterations += out.iterations;
    if !out.converged() {
        return Err(Error::NotConverged {
            what: "energy polish",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    Ok(GridFn::from_raw(out.x))
}

pub fn m_minus(spec: &ProblemSpec, starts: usize) -> Result<SolveReport> {
    let cfg = SolverConfig {
        starts,
        ..SolverConfig::default()
    };
    m_minus_with(spec, &cfg, None)
}

/// Minimize `J > 0` over `{E < 0, ∫a|u|^q < 0}`; the minimizer projected to
/// its fiber maximum is a saddle-type solution with positive energy.
pub fn m_minus_with(spec: &ProblemSpec, cfg: &SolverConfig, pair: Option<&EigenPair>) -> Result<SolveReport> {
    let owned;
    let pair = match pair {
        Some(p) => p,
        None => {
            owned = eigenpair_for(spec)?;
            &owned
        }
    };
    let mut seeds = vec![pair.phi.clone()];
    for k in 1..cfg.starts.max(1) {
        seeds.push(perturbed_phi(pair, cfg.seed, k, 0.5));
    }
    let admissible: Vec<&GridFn> = seeds
        .iter()
        .filter(|s| {
            let pt = parts(s.values(), spec, false);
            pt.energy(spec.lambda) < 0.0 && pt.weight < 0.0
        })
        .collect();
    if admissible.is_empty() {
        return Err(Error::EmptyConstraintSet);
    }
    let mut best: Option<Outcome> = None;
    let mut total_iter = 0;
    for s in admissible {
        let out = fibered_descent(spec, s, false, Branch::Minus, f64::NEG_INFINITY, cfg);
        total_iter += out.iterations;
        if out.converged() && best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(out);
        }
    }
    let best = best.ok_or(Error::NotConverged {
        what: "fibered minimization on the negative branch",
        iterations: total_iter,
        residual: f64::NAN,
    })?;
    let pt = parts(&best.x, spec, false);
    let t = (pt.weight / pt.energy(spec.lambda)).powf(1.0 / (spec.p - spec.q));
    let mut u: Vec<f64> = best.x.iter().map(|v| t * v).collect();
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    make_report(GridFn::from_raw(u), spec, SolutionKind::MMinus, total_iter, false, cfg)
}

/// Outcome of a multi-start search for nonnegative critical points of `Ĩ_λ`.
#[derive(Debug, Clone)]
pub struct CandidateSearch {
    /// Converged nontrivial critical points.
    pub converged: Vec<SolveReport>,
    /// Last iterates of starts that did not converge (runaway or stalled
    /// descents), positive parts.
    pub terminal: Vec<GridFn>,
}

/// From each ground-state seed: projected descent of `Ĩ_λ` over `u ≥ 0`
/// started at a tenth of the seed, then Newton's method on `∇Ĩ_λ = 0` from
/// the seed at several scales. Critical points collapsing to zero are
/// discarded.
pub fn nonnegative_candidates(spec: &ProblemSpec, cfg: &SolverConfig, pair: Option<&EigenPair>) -> Result<CandidateSearch> {
    let owned;
    let pair = match pair {
        Some(p) => p,
        None => {
            owned = eigenpair_for(spec)?;
            &owned
        }
    };
    let seeds = plus_seeds(spec, pair, cfg.starts.max(1), cfg.seed)?;
    let n = spec.mesh.n_nodes();
    let mut search = CandidateSearch {
        converged: Vec::new(),
        terminal: Vec::new(),
    };
    let obj = super::Energy {
        spec,
        truncated: true,
        cap: f64::INFINITY,
    };
    for s in &seeds {
        let mut opts = cfg.options();
        opts.max_step = Some(0.25);
        opts.bounds = Some(crate::descent::Bounds {
            lo: Some(vec![0.0; n]),
            hi: None,
        });
        let start = s.scaled(0.1);
        let res = descend_energy_capped(spec, &start, true, &opts, RUNAWAY * start.sup_norm().max(1.0));
        let floor = 1e-6 * start.sup_norm();
        if res.converged() && sup(&res.x) > floor {
            let r = make_report(GridFn::from_raw(res.x), spec, SolutionKind::LocalMin, res.iterations, true, cfg)?;
            if r.residual_sup < 10.0 * cfg.tol {
                search.converged.push(r);
            }
        } else if !res.converged() {
            search.terminal.push(GridFn::from_raw(res.x).positive_part());
        }
        for c in [0.3, 1.0, 3.0] {
            let x0 = s.scaled(c);
            let Some(x) = super::newton_polish(spec, &obj, x0.values(), cfg.tol) else {
                continue;
            };
            let top = sup(&x);
            let low = x.iter().cloned().fold(f64::INFINITY, f64::min);
            if top > 1e-6 * x0.sup_norm() && low > -1e-8 * top {
                let u = GridFn::from_raw(x).positive_part();
                let r = make_report(u, spec, SolutionKind::LocalMin, 0, true, cfg)?;
                if r.residual_sup < 10.0 * cfg.tol {
                    search.converged.push(r);
                }
            }
        }
    }
    Ok(search)
}
