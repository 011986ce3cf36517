//! Experiment drivers behind the CLI subcommands.

use nehari_core::solvers::{
    descend_below, ground_state_with, local_min_continuation_with, m_minus_with, minimizer_set_with,
    mountain_pass_with, nonnegative_candidates, order_interval_min_with, MinimizerSet, SolveReport,
    SolverConfig,
};
use nehari_core::{
    compute_critical_values, evaluate, gradient_I, picone_certificate, picone_condition, region_classify,
    sign_partition, CriticalValues, Error as CoreError, GridFn, PairingSign, ProblemSpec, Regime,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, WeightFamily};
use crate::error::{LabError, Result};
use crate::presets::{build, Problem};
use crate::table::{Branch, BranchRow, BranchTable};

/// Independent ground-state samples used to represent the minimizer set.
pub const KSET_SAMPLES: usize = 4;
/// Downward scan for the three-solutions window: `λ₁(1 − STEP·k)`, `k = 1..=STEPS`.
pub const THREE_STEP: f64 = 0.005;
pub const THREE_STEPS: usize = 10;

/// Rows at one λ and, when the continuation converged, its endpoint.
type Solved = (Vec<BranchRow>, Option<(f64, GridFn)>);

pub fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        tol: cfg.tol,
        starts: cfg.starts,
        seed: cfg.seed,
        ..SolverConfig::default()
    }
}

fn status(e: &CoreError) -> String {
    match e {
        CoreError::Diverged { .. } => "diverged".into(),
        CoreError::ContinuationWindowExceeded { .. } => "window_exceeded".into(),
        CoreError::EmptyConstraintSet => "empty_constraint_set".into(),
        e => format!("failed: {e}"),
    }
}

fn row(r: std::result::Result<SolveReport, CoreError>, lambda: f64, branch: Branch, tol: f64) -> BranchRow {
    match r {
        Ok(r) => BranchRow::from_report(&r, tol),
        Err(e) => BranchRow::failure(lambda, branch, status(&e)),
    }
}

/// Ground states below `λ*`, `M⁻` minimizers on `(λ₁, λ*)` when the pairing is
/// negative, and above `λ*` the continued local minimum, a mountain pass
/// from it, and order-interval minimizers under the continued solution at
/// the largest λ where continuation converged.
pub fn run_sweep(cfg: &RunConfig) -> Result<BranchTable> {
    let pb = build(cfg)?;
    let lambdas = cfg.lambdas(pb.lambda1())?;
    let cv = compute_critical_values(&pb.spec, &pb.pair)?;
    sweep_with(cfg, &pb, &cv, &lambdas)
}

pub fn sweep_with(cfg: &RunConfig, pb: &Problem, cv: &CriticalValues, lambdas: &[f64]) -> Result<BranchTable> {
    let sc = solver_config(cfg);
    let tol = sc.tol;
    let ls = cv.lambda_star;
    let kset = if lambdas.iter().any(|&l| l > ls) && cv.pairing_sign != PairingSign::Positive {
        Some(minimizer_set_with(&pb.spec.with_lambda(ls), KSET_SAMPLES, None, &sc, Some(&pb.pair)))
    } else {
        None
    };
    let solved: Vec<Solved> = lambdas
        .par_iter()
        .map(|&lambda| {
            let spec = pb.spec.with_lambda(lambda);
            let mut rows = Vec::new();
            let mut cont = None;
            if lambda <= ls {
                rows.push(row(ground_state_with(&spec, &sc, true, Some(&pb.pair)), lambda, Branch::Ground, tol));
            }
            if cv.pairing_sign == PairingSign::Negative && lambda > cv.lambda1 && lambda < ls {
                rows.push(row(m_minus_with(&spec, &sc, Some(&pb.pair)), lambda, Branch::MMinus, tol));
            }
            if lambda > ls {
                match &kset {
                    Some(Ok(ks)) => {
                        let (r, mp, u) = continue_and_climb(&spec, ks, cfg, &sc, pb);
                        rows.push(row(r, lambda, Branch::LocalMin, tol));
                        rows.push(row(mp, lambda, Branch::MountainPass, tol));
                        cont = u.map(|u| (lambda, u));
                    }
                    Some(Err(e)) => rows.push(BranchRow::failure(lambda, Branch::LocalMin, status(e))),
                    None => rows.push(BranchRow::failure(lambda, Branch::LocalMin, "no_minimizer_set")),
                }
            }
            (rows, cont)
        })
        .collect();
    let mut rows: Vec<BranchRow> = Vec::new();
    let mut upper: Option<(f64, GridFn)> = None;
    for (r, c) in solved {
        rows.extend(r);
        if let Some((l, u)) = c {
            if upper.as_ref().is_none_or(|(lu, _)| l > *lu) {
                upper = Some((l, u));
            }
        }
    }
    if let Some((lbar, ubar)) = &upper {
        let below: Vec<f64> = lambdas.iter().copied().filter(|&l| l > ls && l < *lbar).collect();
        let extra: Vec<BranchRow> = below
            .par_iter()
            .map(|&lambda| {
                let spec = pb.spec.with_lambda(lambda);
                row(order_interval_min_with(&spec, ubar, &sc), lambda, Branch::OrderInterval, tol)
            })
            .collect();
        rows.extend(extra);
    }
    Ok(BranchTable::new(rows))
}

type Solve = std::result::Result<SolveReport, CoreError>;

fn continue_and_climb(
    spec: &ProblemSpec,
    ks: &MinimizerSet,
    cfg: &RunConfig,
    sc: &SolverConfig,
    pb: &Problem,
) -> (Solve, Solve, Option<GridFn>) {
    let u = match local_min_continuation_with(spec, ks, sc) {
        Ok(u) => u,
        Err(e) => {
            let mp = Err(CoreError::Precondition("no local minimum to start from".into()));
            return (Err(e), mp, None);
        }
    };
    let mp = descend_below(spec, &u.u, 2.0 * u.level(), sc, Some(&pb.pair))
        .and_then(|omega| mountain_pass_with(spec, &u.u, &omega, cfg.beads, sc))
        .map(|run| run.report);
    let keep = u.positive_on_all_plus().then(|| u.u.clone());
    (Ok(u), mp, keep)
}

/// The three solutions at one λ.
#[derive(Debug, Clone)]
pub struct Triple {
    pub lambda: f64,
    pub w: SolveReport,
    pub u: SolveReport,
    pub v: SolveReport,
}

impl Triple {
    /// Smallest pairwise sup-norm distance.
    pub fn separation(&self) -> f64 {
        let d = |a: &SolveReport, b: &SolveReport| a.u.sup_distance(&b.u);
        d(&self.w, &self.u).min(d(&self.u, &self.v)).min(d(&self.w, &self.v))
    }
}

#[derive(Debug, Clone)]
pub struct ThreeRun {
    pub table: BranchTable,
    pub triple: Option<Triple>,
}

/// Scan `λ = λ₁(1 − 0.005k)` downward for a global ground state `w`, the
/// local minimum `u` continued from the minimizer set of the unperturbed
/// weight, and a mountain pass `v` between them.
pub fn run_three_solutions(cfg: &RunConfig) -> Result<ThreeRun> {
    if !(cfg.p > 2.0 * cfg.q) {
        return Err(LabError::Config(format!(
            "three solutions need p > 2q, got p = {}, q = {}",
            cfg.p, cfg.q
        )));
    }
    if !matches!(cfg.weight, WeightFamily::Perturbed | WeightFamily::OrthogonalTwoBump) {
        return Err(LabError::Config(
            "three solutions need an orthogonalized base weight (perturbed or orthogonal-two-bump)".into(),
        ));
    }
    let pb = build(cfg)?;
    let sc = solver_config(cfg);
    let l1 = pb.lambda1();
    let base = pb.unperturbed()?.with_lambda(l1);
    let ks = minimizer_set_with(&base, KSET_SAMPLES, None, &sc, Some(&pb.pair))?;
    let mut rows = Vec::new();
    for k in 1..=THREE_STEPS {
        let lambda = l1 * (1.0 - THREE_STEP * k as f64);
        match three_at(&pb.spec.with_lambda(lambda), &ks, cfg, &sc, &pb) {
            Ok(t) => {
                rows.extend([&t.w, &t.u, &t.v].map(|r| BranchRow::from_report(r, sc.tol)));
                return Ok(ThreeRun {
                    table: BranchTable::new(rows),
                    triple: Some(t),
                });
            }
            Err(reason) => rows.push(BranchRow::failure(lambda, Branch::MountainPass, reason)),
        }
    }
    Ok(ThreeRun {
        table: BranchTable::new(rows),
        triple: None,
    })
}

fn three_at(
    spec: &ProblemSpec,
    ks: &MinimizerSet,
    cfg: &RunConfig,
    sc: &SolverConfig,
    pb: &Problem,
) -> std::result::Result<Triple, String> {
    let sep = 100.0 * sc.tol;
    let w = ground_state_with(spec, sc, true, Some(&pb.pair)).map_err(|e| format!("ground: {}", status(&e)))?;
    let u = local_min_continuation_with(spec, ks, sc).map_err(|e| format!("local_min: {}", status(&e)))?;
    if w.u.sup_distance(&u.u) <= sep || !(w.level() < u.level()) {
        return Err("local_min coincides with the ground state".into());
    }
    let v = mountain_pass_with(spec, &u.u, &w.u, cfg.beads, sc)
        .map_err(|e| format!("mountain_pass: {}", status(&e)))?
        .report;
    let t = Triple {
        lambda: spec.lambda,
        w,
        u,
        v,
    };
    let gap = 10.0 * sc.tol;
    let ordered = t.w.level() < t.u.level() - gap && t.u.level() < t.v.level() - gap && t.v.level() < 0.0;
    let converged = [&t.w, &t.u, &t.v].iter().all(|r| r.residual_sup < sc.tol);
    if !ordered {
        return Err("energies out of order".into());
    }
    if !converged {
        return Err("residual above tolerance".into());
    }
    if t.separation() <= sep {
        return Err("solutions not separated".into());
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub p: f64,
    pub q: f64,
    pub regime: Regime,
    pub picone_holds: bool,
    pub min_value: f64,
}

/// Classify every pair with `1 < q < p`; other pairs are skipped.
pub fn run_region_map(p_grid: &[f64], q_grid: &[f64]) -> Vec<RegionRow> {
    let mut out = Vec::new();
    for &p in p_grid {
        for &q in q_grid {
            let Ok(regime) = region_classify(p, q) else {
                continue;
            };
            let r = picone_condition(p, q);
            out.push(RegionRow {
                p,
                q,
                regime,
                picone_holds: r.holds,
                min_value: r.min_value,
            });
        }
    }
    out
}

pub fn region_csv(rows: &[RegionRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "q", "regime", "picone_holds", "min_value"]).expect("writing to memory");
    for r in rows {
        w.write_record([
            crate::table::fmt_f64(r.p),
            crate::table::fmt_f64(r.q),
            r.regime.as_str().to_string(),
            r.picone_holds.to_string(),
            crate::table::fmt_f64(r.min_value),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("UTF-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Not positive on the whole positive set of the weight.
    DeadCore,
    /// Certificate below `−tol`: not a solution positive on the positive set.
    CertificateFails,
    /// Neither: would contradict nonexistence.
    Certified,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::DeadCore => "dead_core",
            Verdict::CertificateFails => "certificate_fails",
            Verdict::Certified => "certified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    /// `converged` critical point or `terminal` iterate of a failed start.
    pub source: String,
    pub index: usize,
    pub energy: f64,
    pub linf_norm: f64,
    pub residual: f64,
    pub positive_on_plus: bool,
    pub dead_cores: usize,
    pub certificate: f64,
    pub verdict: Verdict,
}

/// Multi-start search for nonnegative solutions at `lambda`, each judged by
/// its dead cores and the Picone certificate.
pub fn certify(cfg: &RunConfig) -> Result<Vec<CertRow>> {
    let pb = build(cfg)?;
    let lambda = cfg.single_lambda(pb.lambda1())?;
    let spec = pb.spec.with_lambda(lambda);
    if !picone_condition(spec.p, spec.q).holds {
        return Err(LabError::Config(format!(
            "the polynomial condition fails for p = {}, q = {}",
            spec.p, spec.q
        )));
    }
    let sc = solver_config(cfg);
    let search = nonnegative_candidates(&spec, &sc, Some(&pb.pair))?;
    let mut rows = Vec::new();
    for (i, r) in search.converged.iter().enumerate() {
        rows.push(cert_row("converged", i, &r.u, &spec, &pb, sc.tol)?);
    }
    for (i, u) in search.terminal.iter().enumerate() {
        if !u.is_zero() {
            rows.push(cert_row("terminal", i, u, &spec, &pb, sc.tol)?);
        }
    }
    Ok(rows)
}

fn cert_row(source: &str, index: usize, u: &GridFn, spec: &ProblemSpec, pb: &Problem, tol: f64) -> Result<CertRow> {
    let b = evaluate(u, spec)?;
    let residual = gradient_I(u, spec, true)?.sup_norm();
    let thr = nehari_core::critical::DEAD_CORE_REL * u.sup_norm();
    let part = sign_partition(&spec.a, 0.0);
    let mut positive = !part.plus_components.is_empty();
    let mut dead = 0;
    for &(i0, i1) in &part.plus_components {
        let seg = &u.values()[i0..=i1];
        positive &= seg.iter().all(|&x| x > thr);
        dead += seg.iter().all(|&x| x.abs() < thr) as usize;
    }
    let certificate = picone_certificate(u, spec, &pb.pair)?;
    let verdict = if dead > 0 || !positive {
        Verdict::DeadCore
    } else if certificate < -tol {
        Verdict::CertificateFails
    } else {
        Verdict::Certified
    };
    Ok(CertRow {
        source: source.into(),
        index,
        energy: b.i_trunc,
        linf_norm: u.sup_norm(),
        residual,
        positive_on_plus: positive,
        dead_cores: dead,
        certificate,
        verdict,
    })
}
