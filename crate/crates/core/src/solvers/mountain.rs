//! String method with a climbing image for the mountain-pass critical point
//! of `Ĩ_λ` between two nonnegative low-energy states.

use serde::{Deserialize, Serialize};

use super::{make_report, newton_polish, Energy, SolutionKind, SolveReport, SolverConfig};
use crate::descent::{dot, stiffness_norm2, stiffness_solve, sup, Objective};
use crate::error::{Error, Result};
use crate::functionals::{energy, ProblemSpec};
use crate::grid::GridFn;

pub const DEFAULT_BEADS: usize = 17;
const REPARAM_EVERY: usize = 10;
const MAX_ZOOM: usize = 12;
/// Climbing steps between attempts to finish the saddle with Newton's method.
const NEWTON_EVERY: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub beads: Vec<GridFn>,
    pub energies: Vec<f64>,
}

impl PathState {
    pub fn max_index(&self) -> usize {
        self.energies
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &e)| if e > a.1 { (i, e) } else { a })
            .0
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Beads on `ξ(s) = ((1 - s) u^q + s ω^q)^{1/q}` at uniform `s`.
pub fn q_mean_path(u: &GridFn, omega: &GridFn, q: f64, beads: usize) -> Vec<GridFn> {
    let n = beads.max(2);
    (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            if k == 0 {
                return u.clone();
            }
            if k == n - 1 {
                return omega.clone();
            }
            let vals = u
                .values()
                .iter()
                .zip(omega.values())
                .map(|(a, b)| {
                    let a = a.max(0.0).powf(q);
                    let b = b.max(0.0).powf(q);
                    ((1.0 - s) * a + s * b).powf(1.0 / q)
                })
                .collect();
            GridFn::from_raw(vals)
        })
        .collect()
}

/// Result of a string relaxation.
#[derive(Debug, Clone)]
pub struct MountainPassRun {
    pub report: SolveReport,
    pub path: PathState,
    /// Maximum bead energy after every step of the relaxation phase, before
    /// the climbing image is released.
    pub max_history: Vec<f64>,
}

pub fn mountain_pass(spec: &ProblemSpec, u: &GridFn, omega: &GridFn, beads: usize) -> Result<SolveReport> {
    mountain_pass_with(spec, u, omega, beads, &SolverConfig::default()).map(|r| r.report)
}

fn k_apply(x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![0.0; n];
    for i in 1..n - 1 {
        y[i] = (2.0 * x[i] - x[i - 1] - x[i + 1]) / h;
    }
    y
}

/// `(a - b) / ‖a - b‖_K`, or zero when the beads coincide.
fn unit_tangent(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let t: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = stiffness_norm2(&t, h).sqrt();
    if n > 0.0 {
        t.iter().map(|v| v / n).collect()
    } else {
        vec![0.0; t.len()]
    }
}

/// Redistribute beads `lo..=hi` uniformly in H¹₀ arclength, endpoints fixed.
fn reparametrize(beads: &mut [Vec<f64>], lo: usize, hi: usize, h: f64) {
    if hi <= lo + 1 {
        return;
    }
    let mut cum = vec![0.0];
    for k in lo..hi {
        let d: Vec<f64> = beads[k + 1].iter().zip(&beads[k]).map(|(a, b)| a - b).collect();
        cum.push(cum.last().unwrap() + stiffness_norm2(&d, h).sqrt());
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return;
    }
    let old: Vec<Vec<f64>> = beads[lo..=hi].to_vec();
    let m = hi - lo;
    for j in 1..m {
        let target = total * j as f64 / m as f64;
        let seg = cum.partition_point(|&c| c <= target).clamp(1, m) - 1;
        let len = cum[seg + 1] - cum[seg];
        let w = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        beads[lo + j] = old[seg]
            .iter()
            .zip(&old[seg + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
    }
}

/// Relax the q-mean path between `u` and `omega`, then climb the highest
/// bead to the saddle.
pub fn mountain_pass_with(
    spec: &ProblemSpec,
    u: &GridFn,
    omega: &GridFn,
    beads: usize,
    cfg: &SolverConfig,
) -> Result<MountainPassRun> {
    u.check_mesh(&spec.mesh)?;
    omega.check_mesh(&spec.mesh)?;
    if beads < 9 {
        return Err(Error::Precondition(format!("need at least 9 beads, got {beads}")));
    }
    if u.min_value() < 0.0 || omega.min_value() < 0.0 {
        return Err(Error::Precondition("path endpoints must be nonnegative".into()));
    }
    let (eu, ew) = (energy(u, spec, true)?, energy(omega, spec, true)?);
    if !(ew < eu) {
        return Err(Error::Precondition(format!(
            "far endpoint energy {ew:e} is not below the local minimum energy {eu:e}"
        )));
    }
    // When the barrier is narrower than the bead spacing the first bead slides
    // past it; the saddle then lies between u and that bead, so zoom in.
    let mut far = omega.clone();
    for _ in 0..MAX_ZOOM {
        match relax(spec, u, &far, beads, cfg)? {
            Relaxed::Done(run) => {
                let sep = 100.0 * cfg.tol;
                if run.report.u.sup_distance(u) < sep || run.report.u.sup_distance(omega) < sep {
                    return Err(Error::SaddleNotFound("path collapsed onto an endpoint".into()));
                }
                return Ok(*run);
            }
            Relaxed::Zoom(next) => far = next,
        }
    }
    Err(Error::SaddleNotFound("highest bead stays at the local minimum".into()))
}

enum Relaxed {
    Done(Box<MountainPassRun>),
    Zoom(GridFn),
}

fn relax(spec: &ProblemSpec, u: &GridFn, omega: &GridFn, beads: usize, cfg: &SolverConfig) -> Result<Relaxed> {
    let h = spec.mesh.h();
    let obj = Energy {
        spec,
        truncated: true,
        cap: f64::INFINITY,
    };
    let eval = |x: &[f64]| obj.value_grad(x).expect("energy is defined everywhere");
    let mut x: Vec<Vec<f64>> = q_mean_path(u, omega, spec.q, beads)
        .into_iter()
        .map(GridFn::into_values)
        .collect();
    let nb = x.len();
    let mut f: Vec<f64> = x.iter().map(|b| eval(b).0).collect();
    let mut g: Vec<Vec<f64>> = x.iter().map(|b| eval(b).1).collect();
    let mut step = vec![1.0; nb];
    // initial step: move 1% of the bead norm
    for k in 1..nb - 1 {
        let d = stiffness_solve(&g[k], h);
        step[k] = 0.01 * sup(&x[k]).max(1e-3) / sup(&d).max(1e-300);
    }
    let mut history = vec![f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)];
    let mut climb: Option<usize> = None;
    let mut climb_prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut best_res = f64::INFINITY;
    let mut climb_start = 0;
    let max_iter = cfg.max_iter;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        // relaxation: monotone preconditioned descent across the path
        for k in 1..nb - 1 {
            if Some(k) == climb {
                continue;
            }
            let tau = unit_tangent(&x[k + 1], &x[k - 1], h);
            let gt = dot(&g[k], &tau);
            let d: Vec<f64> = stiffness_solve(&g[k], h)
                .iter()
                .zip(&tau)
                .map(|(a, t)| a - gt * t)
                .collect();
            let slope = dot(&g[k], &d);
            if !(slope > 0.0) {
                continue;
            }
            let mut a = step[k];
            for _ in 0..50 {
                let xt: Vec<f64> = x[k].iter().zip(&d).map(|(v, dv)| v - a * dv).collect();
                let (ft, gt) = eval(&xt);
                if ft <= f[k] - 1e-4 * a * slope {
                    x[k] = xt;
                    f[k] = ft;
                    g[k] = gt;
                    step[k] = (2.0 * a).min(1e6);
                    break;
                }
                a *= 0.5;
                step[k] = a;
            }
        }
        if let Some(c) = climb {
            // climbing image: ascend along the path tangent, descend across it
            let tau = unit_tangent(&x[c + 1], &x[c - 1], h);
            let gt = dot(&g[c], &tau);
            let d: Vec<f64> = stiffness_solve(&g[c], h)
                .iter()
                .zip(&tau)
                .map(|(a, t)| a - 2.0 * gt * t)
                .collect();
            if let Some((px, pd)) = &climb_prev {
                let s: Vec<f64> = x[c].iter().zip(px).map(|(a, b)| a - b).collect();
                let y = k_apply(&d.iter().zip(pd).map(|(a, b)| a - b).collect::<Vec<_>>(), h);
                let sy = dot(&s, &y);
                if sy > 0.0 {
                    step[c] = (stiffness_norm2(&s, h) / sy).min(4.0 * step[c]);
                }
            }
            let res = sup(&g[c]);
            if res > 10.0 * best_res {
                step[c] *= 0.25;
            }
            best_res = best_res.min(res);
            climb_prev = Some((x[c].clone(), d.clone()));
            x[c] = x[c].iter().zip(&d).map(|(v, dv)| v - step[c] * dv).collect();
            let (fc, gc) = eval(&x[c]);
            f[c] = fc;
            g[c] = gc;
        }
        if it % REPARAM_EVERY == 0 {
            let before = f.clone();
            let saved = x.clone();
            match climb {
                Some(c) => {
                    reparametrize(&mut x, 0, c, h);
                    reparametrize(&mut x, c, nb - 1, h);
                }
                None => reparametrize(&mut x, 0, nb - 1, h),
            }
            let fx: Vec<(f64, Vec<f64>)> = x.iter().map(|b| eval(b)).collect();
            let new_max = fx.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
            let old_max = before.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if climb.is_none() && new_max > old_max {
                // keep the barrier monotone: discard this redistribution
                x = saved;
            } else {
                for (k, (fk, gk)) in fx.into_iter().enumerate() {
                    f[k] = fk;
                    g[k] = gk;
                }
            }
        }
        let max_e = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if climb.is_none() {
            history.push(max_e);
            let settled = history.len() > 200 && {
                let old = history[history.len() - 101];
                (old - max_e).abs() <= 1e-6 * max_e.abs().max(1e-300)
            };
            if settled || it > max_iter / 4 {
                let path = PathState {
                    beads: Vec::new(),
                    energies: f.clone(),
                };
                let c = path.max_index();
                if c == 0 && f[1] < f[0] {
                    return Ok(Relaxed::Zoom(GridFn::from_raw(x[1].clone()).positive_part()));
                }
                if c == 0 || c == nb - 1 {
                    return Err(Error::SaddleNotFound("highest bead is an endpoint".into()));
                }
                climb = Some(c);
                climb_start = it;
            }
        } else if let Some(c) = climb {
            if sup(&g[c]) < cfg.tol {
                break;
            }
            if (it - climb_start) % NEWTON_EVERY == 1 {
                if let Some(xn) = newton_polish(spec, &obj, &x[c], cfg.tol) {
                    let (fn_, gn) = eval(&xn);
                    let far = |b: &[f64]| xn.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if fn_ > f[0] && fn_ > f[nb - 1] && far(&x[0]) > 100.0 * cfg.tol && far(&x[nb - 1]) > 100.0 * cfg.tol {
                        x[c] = xn;
                        f[c] = fn_;
                        g[c] = gn;
                        break;
                    }
                }
            }
        }
    }
    let c = climb.ok_or_else(|| Error::SaddleNotFound("string did not settle".into()))?;
    let res = sup(&g[c]);
    if res >= cfg.tol {
        return Err(Error::NotConverged {
            what: "climbing image",
            iterations: it,
            residual: res,
        });
    }
    let v = GridFn::from_raw(x[c].clone());
    let report = make_report(v, spec, SolutionKind::MountainPass, it, true, cfg)?;
    let path = PathState {
        beads: x.into_iter().map(GridFn::from_raw).collect(),
        energies: f,
    };
    Ok(Relaxed::Done(Box::new(MountainPassRun {
        report,
        path,
        max_history: history,
    })))
}
