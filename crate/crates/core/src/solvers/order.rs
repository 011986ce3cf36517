//! Minimization of the energy over the order interval `{0 ≤ u ≤ ū}`.

use super::ground::component_bump;
use super::{descend_energy, make_report, SolutionKind, SolveReport, SolverConfig};
use crate::descent::Bounds;
use crate::error::{Error, Result};
use crate::functionals::{energy, ProblemSpec};
use crate::grid::{sign_partition, GridFn};

/// Projected descent of `I_λ` clipped into `[0, upper]`, seeded with a small
/// bump in the plus component where `upper` is largest.
pub fn order_interval_min(spec: &ProblemSpec, upper: &GridFn) -> Result<SolveReport> {
    order_interval_min_with(spec, upper, &SolverConfig::default())
}

pub fn order_interval_min_with(spec: &ProblemSpec, upper: &GridFn, cfg: &SolverConfig) -> Result<SolveReport> {
    upper.check_mesh(&spec.mesh)?;
    let sup = upper.sup_norm();
    if sup == 0.0 {
        return Err(Error::Precondition("upper function is identically zero".into()));
    }
    if upper.min_value() < -1e-12 * sup {
        return Err(Error::Precondition("upper function is not nonnegative".into()));
    }
    let upper = upper.positive_part();
    let partition = sign_partition(&spec.a, 0.0);
    let comp = partition
        .plus_components
        .iter()
        .copied()
        .max_by(|a, b| {
            let m = |c: &(usize, usize)| upper.values()[c.0..=c.1].iter().cloned().fold(0.0, f64::max);
            m(a).total_cmp(&m(b))
        })
        .ok_or(Error::EmptyPlusSet)?;
    let bump = component_bump(spec, comp);
    // shrink until the clipped seed has negative energy
    let mut seed = GridFn::zeros(&spec.mesh);
    let mut c = 0.5 * sup;
    for _ in 0..60 {
        let trial = GridFn::from_raw(
            bump.values()
                .iter()
                .zip(upper.values())
                .map(|(b, u)| (c * b).min(*u))
                .collect(),
        );
        if energy(&trial, spec, false)? < 0.0 {
            seed = trial;
            break;
        }
        c *= 0.5;
    }
    if seed.is_zero() {
        return Err(Error::Precondition("no seed with negative energy in the order interval".into()));
    }
    let n = spec.mesh.n_nodes();
    let mut opts = cfg.options();
    opts.bounds = Some(Bounds {
        lo: Some(vec![0.0; n]),
        hi: Some(upper.values().to_vec()),
    });
    let out = descend_energy(spec, &seed, false, &opts);
    if !out.converged() {
        return Err(Error::NotConverged {
            what: "order-interval minimization",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    make_report(GridFn::from_raw(out.x), spec, SolutionKind::OrderIntervalMin, out.iterations, false, cfg)
}
