//! Solution-producing algorithms and their common report type.

mod ground;
mod kset;
mod mountain;
mod order;

use serde::{Deserialize, Serialize};

pub use ground::{
    descend_below, ground_state, ground_state_with, m_minus, m_minus_with, nonnegative_candidates, CandidateSearch,
};
pub use kset::{
    local_min_continuation, local_min_continuation_with, minimizer_set_at_star, minimizer_set_with,
    MinimizerSet,
};
pub use mountain::{mountain_pass, mountain_pass_with, q_mean_path, MountainPassRun, PathState, DEFAULT_BEADS};
pub use order::{order_interval_min, order_interval_min_with};

use crate::critical::DEAD_CORE_REL;
use crate::descent::{minimize, sup, tridiag_solve, Objective, Options, Outcome};
use crate::error::Result;
use crate::functionals::{combine_i, evaluate, gradient_I, hessian_i, parts, parts_grad, EnergyBreakdown, ProblemSpec};
use crate::grid::{sign_partition, GridFn, SignPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Ground,
    LocalMin,
    OrderIntervalMin,
    MountainPass,
    MMinus,
}

impl SolutionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionKind::Ground => "ground",
            SolutionKind::LocalMin => "local_min",
            SolutionKind::OrderIntervalMin => "order_interval",
            SolutionKind::MountainPass => "mountain_pass",
            SolutionKind::MMinus => "m_minus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub u: GridFn,
    pub breakdown: EnergyBreakdown,
    pub residual_sup: f64,
    pub kind: SolutionKind,
    pub iterations: usize,
    /// One flag per plus component of the weight.
    pub positive_on_plus: Vec<bool>,
    pub dead_core_components: Vec<(usize, usize)>,
    /// Plus components where `u` is neither positive nor identically small.
    pub ambiguous_components: Vec<(usize, usize)>,
    pub lambda: f64,
    /// Whether the energies and residual refer to the truncated functional.
    pub truncated: bool,
}

impl SolveReport {
    /// `Ĩ` or `I`, whichever functional the solver worked with.
    pub fn level(&self) -> f64 {
        if self.truncated {
            self.breakdown.i_trunc
        } else {
            self.breakdown.i
        }
    }

    pub fn linf_norm(&self) -> f64 {
        self.u.sup_norm()
    }

    pub fn positive_on_all_plus(&self) -> bool {
        !self.positive_on_plus.is_empty() && self.positive_on_plus.iter().all(|&b| b)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub dead_core_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            starts: 8,
            seed: 0x5eed,
            max_iter: 50_000,
            dead_core_rel: DEAD_CORE_REL,
        }
    }
}

impl SolverConfig {
    pub(crate) fn options(&self) -> Options {
        let mut o = Options::new(self.tol);
        o.max_iter = self.max_iter;
        o
    }
}

/// Fill the positivity and dead-core fields against `partition`.
pub fn classify(report: SolveReport, partition: &SignPartition, threshold: f64) -> SolveReport {
    let v = report.u.values();
    let mut positive = Vec::with_capacity(partition.plus_components.len());
    let mut dead = Vec::new();
    let mut ambiguous = Vec::new();
    for &(i0, i1) in &partition.plus_components {
        let seg = &v[i0..=i1];
        let pos = seg.iter().all(|&x| x > threshold);
        positive.push(pos);
        if seg.iter().all(|&x| x.abs() < threshold) {
            dead.push((i0, i1));
        } else if !pos {
            ambiguous.push((i0, i1));
        }
    }
    SolveReport {
        positive_on_plus: positive,
        dead_core_components: dead,
        ambiguous_components: ambiguous,
        ..report
    }
}

/// Assemble and classify a report for `u`.
pub(crate) fn make_report(
    u: GridFn,
    spec: &ProblemSpec,
    kind: SolutionKind,
    iterations: usize,
    truncated: bool,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let breakdown = evaluate(&u, spec)?;
    let residual_sup = gradient_I(&u, spec, truncated)?.sup_norm();
    let threshold = cfg.dead_core_rel * u.sup_norm();
    let report = SolveReport {
        u,
        breakdown,
        residual_sup,
        kind,
        iterations,
        positive_on_plus: Vec::new(),
        dead_core_components: Vec::new(),
        ambiguous_components: Vec::new(),
        lambda: spec.lambda,
        truncated,
    };
    Ok(classify(report, &sign_partition(&spec.a, 0.0), threshold))
}

/// `I_λ` (or `Ĩ_λ`) as a descent objective.
pub(crate) struct Energy<'a> {
    pub spec: &'a ProblemSpec,
    pub truncated: bool,
    /// Abort once `‖u‖∞` exceeds this (runaway descent of an unbounded energy).
    pub cap: f64,
}

impl Objective for Energy<'_> {
    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let pg = parts_grad(x, self.spec, self.truncated);
        let f = pg.parts.energy(self.spec.lambda) / self.spec.p - pg.parts.weight / self.spec.q;
        Some((f, combine_i(&pg, self.spec)))
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        let pt = parts(x, self.spec, self.truncated);
        Some(pt.energy(self.spec.lambda) / self.spec.p - pt.weight / self.spec.q)
    }

    fn abort(&self, x: &[f64], _value: f64) -> bool {
        crate::descent::sup(x) > self.cap
    }
}

/// Damped Newton iteration on `∇Ĩ = 0`, each step accepted only if it
/// lowers the sup-norm residual. Returns the point once the residual is
/// below `tol`.
pub(crate) fn newton_polish(spec: &ProblemSpec, obj: &Energy, x0: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let (_, mut g) = obj.value_grad(&x)?;
    let floor = 1e-10 * sup(&x);
    for _ in 0..100 {
        let res = sup(&g);
        if res < tol {
            return Some(x);
        }
        let (diag, off) = hessian_i(&x, spec, obj.truncated, floor);
        let mut rhs = g.clone();
        let n = rhs.len();
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        let d = tridiag_solve(&diag, &off, &rhs)?;
        let mut a = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(v, dv)| v - a * dv).collect();
            if let Some((_, gt)) = obj.value_grad(&xt) {
                if sup(&gt) < res {
                    x = xt;
                    g = gt;
                    moved = true;
                    break;
                }
            }
            a *= 0.5;
        }
        if !moved {
            return None;
        }
    }
    (sup(&g) < tol).then_some(x)
}

/// Plain descent on the energy from `x0`.
pub(crate) fn descend_energy(
    spec: &ProblemSpec,
    x0: &GridFn,
    truncated: bool,
    opts: &Options,
) -> Outcome {
    descend_energy_capped(spec, x0, truncated, opts, f64::INFINITY)
}

pub(crate) fn descend_energy_capped(
    spec: &ProblemSpec,
    x0: &GridFn,
    truncated: bool,
    opts: &Options,
    cap: f64,
) -> Outcome {
    let obj = Energy { spec, truncated, cap };
    minimize(&obj, x0.values().to_vec(), &spec.mesh, opts)
}
