//! Sampled minimizer set at `λ*` and local-minimum continuation past `λ*`
//! inside a sup-norm tube around it.

use serde::{Deserialize, Serialize};

use super::{descend_energy, ground_state_with, make_report, SolutionKind, SolveReport, SolverConfig};
use crate::descent::Bounds;
use crate::eigen::{first_eigenpair, EigenPair, DEFAULT_EIGEN_TOL};
use crate::error::{Error, Result};
use crate::functionals::ProblemSpec;
use crate::grid::GridFn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSet {
    /// One representative per sup-norm cluster of sampled minimizers.
    pub members: Vec<GridFn>,
    pub delta: f64,
    pub level: f64,
    /// `λ` at which the members minimize.
    pub lambda: f64,
}

impl MinimizerSet {
    /// Sup-norm distance to the nearest member and that member's index.
    pub fn distance(&self, u: &GridFn) -> (f64, usize) {
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| (m.sup_distance(u), i))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

/// Run `sample_count` ground-state minimizations at `λ*` with distinct seeds
/// and cluster the minimizers. `delta` overrides the data-driven radius.
pub fn minimizer_set_at_star(
    spec_at_star: &ProblemSpec,
    sample_count: usize,
    delta: Option<f64>,
) -> Result<MinimizerSet> {
    minimizer_set_with(spec_at_star, sample_count, delta, &SolverConfig::default(), None)
}

pub fn minimizer_set_with(
    spec: &ProblemSpec,
    sample_count: usize,
    delta: Option<f64>,
    cfg: &SolverConfig,
    pair: Option<&EigenPair>,
) -> Result<MinimizerSet> {
    let owned;
    let pair = match pair {
        Some(p) => p,
        None => {
            owned = first_eigenpair(&spec.mesh, spec.p, DEFAULT_EIGEN_TOL)?;
            &owned
        }
    };
    let mut reports: Vec<SolveReport> = Vec::new();
    let mut last_err = None;
    for k in 0..sample_count.max(1) {
        let run_cfg = SolverConfig {
            starts: 2,
            seed: cfg.seed.wrapping_add(1_000 * k as u64),
            ..cfg.clone()
        };
        match ground_state_with(spec, &run_cfg, true, Some(pair)) {
            Ok(r) => reports.push(r),
            Err(e) => last_err = Some(e),
        }
    }
    if reports.is_empty() {
        return Err(last_err.unwrap_or(Error::Diverged {
            lambda: spec.lambda,
            level: f64::NEG_INFINITY,
        }));
    }
    let level = reports.iter().map(|r| r.level()).fold(f64::INFINITY, f64::min);
    let max_norm = reports.iter().map(|r| r.linf_norm()).fold(0.0, f64::max);
    // keep only minimizers, not other critical points found from bad seeds
    let scale = level.abs().max(1e-300);
    let mut members: Vec<GridFn> = Vec::new();
    let radius = 10.0 * cfg.tol * max_norm.max(1.0);
    for r in reports {
        if r.level() - level > 1e-6 * scale {
            continue;
        }
        if members.iter().all(|m| m.sup_distance(&r.u) > radius) {
            members.push(r.u);
        }
    }
    let delta = delta.unwrap_or_else(|| default_delta(&members, max_norm));
    Ok(MinimizerSet {
        members,
        delta,
        level,
        lambda: spec.lambda,
    })
}

/// Half the smallest inter-cluster distance (half the smallest member norm
/// for a single cluster), floored at 5% of the largest member norm.
fn default_delta(members: &[GridFn], max_norm: f64) -> f64 {
    let mut d = members.iter().map(|m| 0.5 * m.sup_norm()).fold(f64::INFINITY, f64::min);
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            d = d.min(0.5 * a.sup_distance(b));
        }
    }
    d.max(0.05 * max_norm)
}

/// Descend `Ĩ_λ` from every member inside its `δ`-tube; succeed when the
/// minimizer stays clear of the tube boundary.
pub fn local_min_continuation(spec: &ProblemSpec, kset: &MinimizerSet) -> Result<SolveReport> {
    local_min_continuation_with(spec, kset, &SolverConfig::default())
}

pub fn local_min_continuation_with(
    spec: &ProblemSpec,
    kset: &MinimizerSet,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if kset.members.is_empty() {
        return Err(Error::Precondition("empty minimizer set".into()));
    }
    let delta = kset.delta;
    let mut best: Option<SolveReport> = None;
    let mut nearest_fail = f64::INFINITY;
    for m in &kset.members {
        let mut opts = cfg.options();
        opts.bounds = Some(Bounds {
            lo: Some(m.values().iter().map(|v| v - delta).collect()),
            hi: Some(m.values().iter().map(|v| v + delta).collect()),
        });
        let out = descend_energy(spec, m, true, &opts);
        let converged = out.converged();
        let u = GridFn::from_raw(out.x);
        let dist = u.sup_distance(m);
        if !converged || dist >= 0.9 * delta {
            nearest_fail = nearest_fail.min(dist);
            continue;
        }
        let r = make_report(u, spec, SolutionKind::LocalMin, out.iterations, true, cfg)?;
        if r.residual_sup >= 10.0 * cfg.tol || r.breakdown.i_trunc >= 0.0 {
            nearest_fail = nearest_fail.min(dist);
            continue;
        }
        if best.as_ref().is_none_or(|b| r.level() < b.level()) {
            best = Some(r);
        }
    }
    best.ok_or(Error::ContinuationWindowExceeded {
        distance: nearest_fail,
        delta,
    })
}
