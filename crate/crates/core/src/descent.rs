//! First-order minimization shared by every solver: Barzilai–Borwein steps
//! in the discrete H¹₀ metric with a nonmonotone (max over a window)
//! Armijo line search, optional retraction and optional projection.

use crate::grid::Mesh;

/// Smooth objective on nodal vectors with zero boundary slots.
pub(crate) trait Objective {
    /// Value and nodal gradient, or `None` where the objective is undefined.
    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;

    /// Value only; defaults to discarding the gradient.
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.value_grad(x).map(|(v, _)| v)
    }

    /// Stationarity measure; sup-norm of the gradient by default.
    fn residual(&self, _x: &[f64], g: &[f64]) -> f64 {
        sup(g)
    }

    /// Applied to every accepted iterate (e.g. rescaling 0-homogeneous
    /// objectives).
    fn retract(&self, _x: &mut [f64]) {}

    /// Request early termination, e.g. when values signal unboundedness.
    fn abort(&self, _x: &[f64], _value: f64) -> bool {
        false
    }
}

/// Nodal box `lo ≤ x ≤ hi` (either side optional).
#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        if let Some(lo) = &self.lo {
            x.iter_mut().zip(lo).for_each(|(v, l)| *v = v.max(*l));
        }
        if let Some(hi) = &self.hi {
            x.iter_mut().zip(hi).for_each(|(v, h)| *v = v.min(*h));
        }
    }

    /// Nodes not pinned at a bound by the sign of the gradient.
    pub fn free(&self, x: &[f64], g: &[f64]) -> Vec<bool> {
        (0..x.len())
            .map(|i| {
                let at_lo = self.lo.as_ref().is_some_and(|l| x[i] <= l[i] && g[i] > 0.0);
                let at_hi = self.hi.as_ref().is_some_and(|u| x[i] >= u[i] && g[i] < 0.0);
                !(at_lo || at_hi)
            })
            .collect()
    }

    /// Sup-norm of `x - P(x - g)`: the projected-gradient residual.
    pub fn residual(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        self.project(&mut y);
        x.iter().zip(&y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Options {
    pub tol: f64,
    pub max_iter: usize,
    pub window: usize,
    pub precondition: bool,
    /// Cap on the sup-norm of a single step, relative to `max(‖x‖∞, 1)`.
    pub max_step: Option<f64>,
    /// Additionally require the relative value change over this many
    /// iterations to stay below `tol`.
    pub value_window: Option<usize>,
    pub bounds: Option<Bounds>,
}

impl Options {
    pub fn new(tol: f64) -> Self {
        Options {
            tol,
            max_iter: 50_000,
            window: 10,
            precondition: true,
            max_step: None,
            value_window: None,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Converged,
    MaxIter,
    Stalled,
    Aborted,
    Undefined,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub stop: Stop,
}

impl Outcome {
    pub fn converged(&self) -> bool {
        self.stop == Stop::Converged
    }
}

pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `K z = g` on the interior nodes, `K = tridiag(-1, 2, -1) / h`.
pub(crate) fn stiffness_solve(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let mut z = vec![0.0; n];
    solve_segment(g, h, 1, n - 1, &mut z);
    z
}

/// Same solve restricted to the nodes flagged `free`; the others are held
/// at zero like boundary nodes.
pub(crate) fn stiffness_solve_free(g: &[f64], h: f64, free: &[bool]) -> Vec<f64> {
    let n = g.len();
    let mut z = vec![0.0; n];
    let mut i = 1;
    while i < n - 1 {
        if !free[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n - 1 && free[i] {
            i += 1;
        }
        solve_segment(g, h, start, i, &mut z);
    }
    z
}

/// Thomas algorithm for `tridiag(-1, 2, -1) z = h g` on nodes `start..end`.
fn solve_segment(g: &[f64], h: f64, start: usize, end: usize, z: &mut [f64]) {
    let m = end - start;
    if m == 0 {
        return;
    }
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = 2.0;
    c[0] = -1.0 / denom;
    d[0] = g[start] * h / denom;
    for i in 1..m {
        denom = 2.0 + c[i - 1];
        c[i] = -1.0 / denom;
        d[i] = (g[start + i] * h + d[i - 1]) / denom;
    }
    z[start + m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        z[start + i] = d[i] - c[i] * z[start + i + 1];
    }
}

/// Thomas algorithm for a general tridiagonal system without pivoting;
/// `None` on a vanishing pivot.
pub(crate) fn tridiag_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - off[i - 1] * c[i - 1];
        }
        if !(denom.abs() > 1e-300) || !denom.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { off[i - 1] * d[i - 1] } else { 0.0 }) / denom;
    }
    let mut z = d;
    for i in (0..n - 1).rev() {
        z[i] -= c[i] * z[i + 1];
    }
    Some(z)
}

/// `⟨s, K s⟩` for the stiffness matrix above.
pub(crate) fn stiffness_norm2(s: &[f64], h: f64) -> f64 {
    s.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h
}

pub(crate) fn minimize(obj: &impl Objective, x0: Vec<f64>, mesh: &Mesh, opts: &Options) -> Outcome {
    let h = mesh.h();
    let mut x = x0;
    if let Some(b) = &opts.bounds {
        b.project(&mut x);
    }
    obj.retract(&mut x);
    let Some((mut f, mut g)) = obj.value_grad(&x) else {
        return Outcome {
            value: f64::NAN,
            residual: f64::INFINITY,
            x,
            iterations: 0,
            stop: Stop::Undefined,
        };
    };
    let residual_of = |x: &[f64], g: &[f64]| match &opts.bounds {
        Some(b) => b.residual(x, g),
        None => obj.residual(x, g),
    };
    let mut history = vec![f];
    let mut values = vec![f];
    let mut res = residual_of(&x, &g);
    let mut alpha = {
        let d = direction(&g, h, opts.precondition);
        0.01 * sup(&x).max(1e-3) / sup(&d).max(1e-300)
    };
    let mut stop = Stop::MaxIter;
    let mut it = 0;
    while it < opts.max_iter {
        let window_ok = match opts.value_window {
            Some(w) if values.len() > w => {
                let old = values[values.len() - 1 - w];
                (old - f).abs() <= opts.tol * f.abs().max(1e-300)
            }
            Some(_) => false,
            None => true,
        };
        if res < opts.tol && window_ok {
            stop = Stop::Converged;
            break;
        }
        if obj.abort(&x, f) {
            stop = Stop::Aborted;
            break;
        }
        it += 1;
        let dir = match (&opts.bounds, opts.precondition) {
            (Some(b), true) => stiffness_solve_free(&g, h, &b.free(&x, &g)),
            _ => direction(&g, h, opts.precondition),
        };
        let mut trial_dir = step_direction(&x, &dir, alpha, opts);
        let mut slope = dot(&g, &trial_dir);
        if slope >= 0.0 && opts.precondition {
            // preconditioned step is not a descent direction for the box;
            // fall back to the plain projected gradient
            trial_dir = step_direction(&x, &g, 0.5 * alpha * h, opts);
            slope = dot(&g, &trial_dir);
        }
        if !(slope < 0.0) {
            stop = if res < opts.tol { Stop::Converged } else { Stop::Stalled };
            break;
        }
        let fmax = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xt: Vec<f64> = x.iter().zip(&trial_dir).map(|(a, d)| a + t * d).collect();
            if let Some(b) = &opts.bounds {
                b.project(&mut xt);
            }
            if let Some(ft) = obj.value(&xt) {
                if ft.is_finite() && ft <= fmax + 1e-4 * t * slope {
                    accepted = Some((xt, t));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((mut xn, _t)) = accepted else {
            stop = if res < 10.0 * opts.tol { Stop::Converged } else { Stop::Stalled };
            break;
        };
        let Some((_, gn_pre)) = obj.value_grad(&xn) else {
            stop = Stop::Undefined;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_pre.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = if opts.precondition {
            stiffness_norm2(&s, h)
        } else {
            dot(&s, &s)
        };
        alpha = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-30, 1e30)
        } else {
            (alpha * 2.0).min(1e30)
        };
        obj.retract(&mut xn);
        let Some((fn_, gn)) = obj.value_grad(&xn) else {
            stop = Stop::Undefined;
            break;
        };
        x = xn;
        f = fn_;
        g = gn;
        res = residual_of(&x, &g);
        history.push(f);
        if history.len() > opts.window {
            history.remove(0);
        }
        values.push(f);
    }
    Outcome {
        x,
        value: f,
        residual: res,
        iterations: it,
        stop,
    }
}

fn direction(g: &[f64], h: f64, precondition: bool) -> Vec<f64> {
    if precondition {
        stiffness_solve(g, h)
    } else {
        g.to_vec()
    }
}

/// `P(x - alpha d) - x`, with the optional step cap applied before projection.
fn step_direction(x: &[f64], d: &[f64], alpha: f64, opts: &Options) -> Vec<f64> {
    let mut scale = alpha;
    if let Some(cap) = opts.max_step {
        let m = sup(d) * alpha;
        let limit = cap * sup(x).max(1.0);
        if m > limit {
            scale *= limit / m;
        }
    }
    let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a - scale * b).collect();
    if let Some(b) = &opts.bounds {
        b.project(&mut y);
    }
    y.iter().zip(x).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_mesh;

    /// ½⟨Ku, u⟩ - ⟨f, u⟩ with the stiffness matrix; minimizer solves K u = f.
    struct Quadratic {
        h: f64,
        f: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            let n = x.len();
            let mut g = vec![0.0; n];
            for i in 1..n - 1 {
                g[i] = (2.0 * x[i] - x[i - 1] - x[i + 1]) / self.h - self.f[i];
            }
            Some((0.5 * stiffness_norm2(x, self.h) - dot(&self.f, x), g))
        }
    }

    #[test]
    fn thomas_solve_inverts_stiffness() {
        let h = 0.1;
        let g: Vec<f64> = (0..11).map(|i| if i == 0 || i == 10 { 0.0 } else { (i as f64).sin() }).collect();
        let z = stiffness_solve(&g, h);
        for i in 1..10 {
            let kz = (2.0 * z[i] - z[i - 1] - z[i + 1]) / h;
            assert!((kz - g[i]).abs() < 1e-12);
        }
        assert_eq!(z[0], 0.0);
        assert_eq!(z[10], 0.0);
    }

    #[test]
    fn quadratic_converges_fast_with_preconditioning() {
        let mesh = make_mesh(0.0, 1.0, 200).unwrap();
        let h = mesh.h();
        let f: Vec<f64> = mesh.nodes().iter().map(|x| h * x.cos()).collect();
        let obj = Quadratic { h, f };
        let out = minimize(&obj, vec![0.0; 201], &mesh, &Options::new(1e-12));
        assert!(out.converged());
        assert!(out.iterations < 20, "{}", out.iterations);
    }

    #[test]
    fn projection_respects_bounds() {
        let mesh = make_mesh(0.0, 1.0, 50).unwrap();
        let h = mesh.h();
        let f = vec![h * 40.0; 51];
        let obj = Quadratic { h, f };
        let mut opts = Options::new(1e-10);
        opts.bounds = Some(Bounds {
            lo: Some(vec![0.0; 51]),
            hi: Some(vec![1.0; 51]),
        });
        let out = minimize(&obj, vec![0.0; 51], &mesh, &opts);
        assert!(out.converged(), "{:?} {}", out.stop, out.residual);
        assert!(out.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(out.x[25] == 1.0);
    }
}
