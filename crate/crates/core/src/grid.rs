//! Uniform 1D mesh, nodal P1 functions and the quadratures used by every
//! energy in the crate.
//!
//! Gradient energies are integrated exactly (the derivative of a P1 function
//! is constant per cell). Zero-order nonlinear terms use the composite
//! two-point Gauss rule applied to the interpolant.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};

/// Reference-cell abscissae of the two-point Gauss rule on [0, 1].
pub(crate) const GAUSS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9,
    0.5 + 0.288_675_134_594_812_9,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    x_lo: f64,
    x_hi: f64,
    n_cells: usize,
    h: f64,
}

impl Mesh {
    pub fn new(x_lo: f64, x_hi: f64, n_cells: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi {
            return Err(Error::InvalidMesh(format!(
                "interval ({x_lo}, {x_hi}) is not increasing"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 cells, got {n_cells}"
            )));
        }
        Ok(Mesh {
            x_lo,
            x_hi,
            n_cells,
            h: (x_hi - x_lo) / n_cells as f64,
        })
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Interior node indices.
    pub fn interior(&self) -> Range<usize> {
        1..self.n_cells
    }

    /// Mesh on the node range `first..=last`, sharing this mesh's spacing.
    pub fn submesh(&self, first: usize, last: usize) -> Result<Mesh> {
        if last > self.n_cells || last < first + 2 {
            return Err(Error::InvalidMesh(format!(
                "node range {first}..={last} is not a valid submesh"
            )));
        }
        Mesh::new(self.node(first), self.node(last), last - first)
    }
}

/// Make a uniform mesh of `n_cells` cells on `(x_lo, x_hi)`.
pub fn make_mesh(x_lo: f64, x_hi: f64, n_cells: usize) -> Result<Mesh> {
    Mesh::new(x_lo, x_hi, n_cells)
}

/// Nodal values of a continuous piecewise-linear function vanishing at both
/// ends of its mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    values: Vec<f64>,
}

impl GridFn {
    pub fn zeros(mesh: &Mesh) -> Self {
        GridFn {
            values: vec![0.0; mesh.n_nodes()],
        }
    }

    /// Wrap nodal values; both end values must be exactly zero.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "{} nodal values cannot carry a mesh",
                values.len()
            )));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
            return Err(Error::NonzeroTrace);
        }
        Ok(GridFn { values })
    }

    /// Sample `f` at the interior nodes; boundary values are set to zero.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Self {
        let mut values = vec![0.0; mesh.n_nodes()];
        for i in mesh.interior() {
            values[i] = f(mesh.node(i));
        }
        GridFn { values }
    }

    /// Build from a full-length vector, forcing the trace to zero.
    pub(crate) fn from_raw(mut values: Vec<f64>) -> Self {
        let n = values.len();
        values[0] = 0.0;
        values[n - 1] = 0.0;
        GridFn { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_nodes() {
            return Err(Error::MeshMismatch {
                expected: mesh.n_nodes(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> GridFn {
        GridFn {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn::from_raw(self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &GridFn) -> GridFn {
        assert_eq!(self.len(), other.len(), "grid functions on different meshes");
        GridFn {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn sup_distance(&self, other: &GridFn) -> f64 {
        assert_eq!(self.len(), other.len(), "grid functions on different meshes");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn positive_part(&self) -> GridFn {
        self.map(|v| v.max(0.0))
    }

    pub fn abs(&self) -> GridFn {
        self.map(f64::abs)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Nodal samples of the weight `a`, interpolated like solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    values: Vec<f64>,
}

impl Weight {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("weight has non-finite values".into()));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroWeight);
        }
        Ok(Weight { values })
    }

    /// Sample `f` at every node, boundary nodes included.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        Weight::from_values(mesh.nodes().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_nodes() {
            return Err(Error::MeshMismatch {
                expected: mesh.n_nodes(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Both signs occur at interior nodes.
    pub fn is_sign_changing(&self) -> bool {
        let n = self.values.len();
        let inner = &self.values[1..n - 1];
        inner.iter().any(|&v| v > 0.0) && inner.iter().any(|&v| v < 0.0)
    }

    /// `self + mu * b`.
    pub fn perturbed(&self, mu: f64, b: &Weight) -> Result<Weight> {
        if self.len() != b.len() {
            return Err(Error::MeshMismatch {
                expected: self.len(),
                got: b.len(),
            });
        }
        Weight::from_values(
            self.values
                .iter()
                .zip(&b.values)
                .map(|(a, b)| a + mu * b)
                .collect(),
        )
    }

    pub(crate) fn shifted(&self, c: f64) -> Vec<f64> {
        self.values.iter().map(|v| v - c).collect()
    }
}

/// Maximal runs of interior nodes by the sign of the weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPartition {
    /// Inclusive node-index ranges where `a > threshold`.
    pub plus_components: Vec<(usize, usize)>,
    /// Inclusive node-index ranges where `a < -threshold`.
    pub minus_components: Vec<(usize, usize)>,
    pub zero_set: Vec<usize>,
}

impl SignPartition {
    pub fn plus_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.plus_components.iter().flat_map(|&(a, b)| a..=b)
    }
}

pub fn sign_partition(a: &Weight, threshold: f64) -> SignPartition {
    let v = a.values();
    let n = v.len();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut zero = Vec::new();
    let mut run: Option<(i8, usize)> = None;
    let close = |run: Option<(i8, usize)>, end: usize, plus: &mut Vec<_>, minus: &mut Vec<_>| {
        if let Some((s, start)) = run {
            if s > 0 {
                plus.push((start, end));
            } else {
                minus.push((start, end));
            }
        }
    };
    for (i, &ai) in v.iter().enumerate().take(n - 1).skip(1) {
        let s: i8 = if ai > threshold {
            1
        } else if ai < -threshold {
            -1
        } else {
            0
        };
        match run {
            Some((rs, _)) if rs == s => {}
            _ => {
                close(run, i - 1, &mut plus, &mut minus);
                run = if s != 0 { Some((s, i)) } else { None };
            }
        }
        if s == 0 {
            zero.push(i);
        }
    }
    close(run, n - 2, &mut plus, &mut minus);
    SignPartition {
        plus_components: plus,
        minus_components: minus,
        zero_set: zero,
    }
}

#[inline]
pub(crate) fn abs_pow(x: f64, r: f64) -> f64 {
    x.abs().powf(r)
}

/// `sign(x) |x|^r`, zero at the origin for every `r > 0`.
#[inline]
pub(crate) fn signed_pow(x: f64, r: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(r)
    }
}

/// Exact `∫ |u'|^p` of the interpolant.
pub fn grad_seminorm_p(mesh: &Mesh, u: &GridFn, p: f64) -> f64 {
    let h = mesh.h();
    u.values()
        .windows(2)
        .map(|w| h * abs_pow((w[1] - w[0]) / h, p))
        .sum()
}

/// Gauss-quadrature value of `∫ F(u)` where `F` is applied pointwise to the
/// interpolant.
fn gauss_integral(mesh: &Mesh, u: &[f64], f: impl Fn(usize, f64) -> f64) -> f64 {
    let h = mesh.h();
    let mut total = 0.0;
    for c in 0..u.len() - 1 {
        let (ul, ur) = (u[c], u[c + 1]);
        if ul == 0.0 && ur == 0.0 {
            continue;
        }
        for (k, xi) in GAUSS.iter().enumerate() {
            total += f(2 * c + k, (1.0 - xi) * ul + xi * ur);
        }
    }
    0.5 * h * total
}

pub fn integral_abs_p(mesh: &Mesh, u: &GridFn, p: f64) -> f64 {
    gauss_integral(mesh, u.values(), |_, v| abs_pow(v, p))
}

/// `∫ u₊^p`.
pub fn integral_pos_p(mesh: &Mesh, u: &GridFn, p: f64) -> f64 {
    gauss_integral(mesh, u.values(), |_, v| if v > 0.0 { v.powf(p) } else { 0.0 })
}

/// Weight interpolated at the Gauss points of every cell, in cell order.
pub(crate) fn weight_at_gauss(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * (a.len() - 1));
    for c in 0..a.len() - 1 {
        for xi in GAUSS {
            out.push((1.0 - xi) * a[c] + xi * a[c + 1]);
        }
    }
    out
}

/// `∫ a|u|^q` (or `∫ a u₊^q` when `positive_part` is set).
pub fn weighted_integral_q(
    mesh: &Mesh,
    u: &GridFn,
    a: &Weight,
    q: f64,
    positive_part: bool,
) -> f64 {
    let ag = weight_at_gauss(a.values());
    gauss_integral(mesh, u.values(), |k, v| {
        let m = if positive_part { v.max(0.0) } else { v.abs() };
        if m == 0.0 {
            0.0
        } else {
            ag[k] * m.powf(q)
        }
    })
}

/// General Gauss integral of `g(u, a)` for callers that need other integrands
/// (certificates, pairings).
pub(crate) fn integrate_pointwise(
    mesh: &Mesh,
    u: &[f64],
    a: &[f64],
    g: impl Fn(f64, f64) -> f64,
) -> f64 {
    let h = mesh.h();
    let mut total = 0.0;
    for c in 0..u.len() - 1 {
        for xi in GAUSS {
            let uv = (1.0 - xi) * u[c] + xi * u[c + 1];
            let av = (1.0 - xi) * a[c] + xi * a[c + 1];
            total += g(uv, av);
        }
    }
    0.5 * h * total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hat(mesh: &Mesh) -> GridFn {
        GridFn::from_fn(mesh, |x| 1.0 - (2.0 * x - 1.0).abs())
    }

    #[test]
    fn uniform_nodes() {
        let m = make_mesh(0.0, 1.0, 4).unwrap();
        assert_eq!(m.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(make_mesh(0.0, 1.0, 1).is_err());
        assert!(make_mesh(1.0, 1.0, 4).is_err());
        assert!(make_mesh(1.0, 0.0, 4).is_err());
        assert_eq!(make_mesh(-1.0, 1.0, 2).unwrap().h(), 1.0);
    }

    #[test]
    fn trace_is_enforced() {
        assert_eq!(
            GridFn::from_values(vec![0.0, 1.0, 0.5]),
            Err(Error::NonzeroTrace)
        );
        let m = make_mesh(0.0, 1.0, 8).unwrap();
        let u = GridFn::from_fn(&m, |_| 3.0);
        assert_eq!(u.values()[0], 0.0);
        assert_eq!(u.values()[8], 0.0);
        let v = u.axpy(2.0, &u).scaled(-1.5);
        assert_eq!(v.values()[0], 0.0);
        assert_eq!(v.values()[8], 0.0);
    }

    #[test]
    fn hat_gradient_energies() {
        let m = make_mesh(0.0, 1.0, 16).unwrap();
        let u = hat(&m);
        assert!((grad_seminorm_p(&m, &u, 2.0) - 4.0).abs() < 1e-12);
        assert!((grad_seminorm_p(&m, &u, 3.0) - 8.0).abs() < 1e-12);
        assert_eq!(grad_seminorm_p(&m, &GridFn::zeros(&m), 2.0), 0.0);
    }

    #[test]
    fn hat_mass_integral() {
        // two-point Gauss is exact for the piecewise quadratic |u|^2
        let m = make_mesh(0.0, 1.0, 64).unwrap();
        let u = hat(&m);
        assert!((integral_abs_p(&m, &u, 2.0) - 1.0 / 3.0).abs() < 1e-13);
        assert_eq!(integral_abs_p(&m, &GridFn::zeros(&m), 2.0), 0.0);
        let s = integral_abs_p(&m, &u.scaled(2.0), 2.7) / integral_abs_p(&m, &u, 2.7);
        assert!((s - 2f64.powf(2.7)).abs() < 1e-12);
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        // ∫ hat^p = 1/(p+1)
        let p = 2.5;
        let exact = 1.0 / (p + 1.0);
        let mut errs = Vec::new();
        for n in [5usize, 11, 23, 47] {
            let m = make_mesh(0.0, 1.0, n).unwrap();
            let v = hat(&m);
            errs.push((integral_abs_p(&m, &v, p) - exact).abs());
        }
        // odd cell counts: the kink sits inside a cell, the interpolant error dominates
        for w in errs.windows(2) {
            assert!(w[1] < w[0] / 3.0, "{errs:?}");
        }
    }

    #[test]
    fn weighted_integral_reductions() {
        let m = make_mesh(0.0, 1.0, 64).unwrap();
        let u = hat(&m);
        let one = Weight::from_fn(&m, |_| 1.0).unwrap();
        let q = 1.7;
        let wq = weighted_integral_q(&m, &u, &one, q, false);
        assert!((wq - integral_abs_p(&m, &u, q)).abs() < 1e-14);
        let neg = u.scaled(-1.0);
        assert_eq!(weighted_integral_q(&m, &neg, &one, q, true), 0.0);
        let odd = Weight::from_fn(&m, |x| x - 0.5).unwrap();
        assert!(weighted_integral_q(&m, &u, &odd, q, false).abs() < 1e-14);
    }

    #[test]
    fn partition_components() {
        let m = make_mesh(0.0, 1.0, 20).unwrap();
        let a = Weight::from_fn(&m, |x| (2.0 * std::f64::consts::PI * x).sin()).unwrap();
        let sp = sign_partition(&a, 1e-12);
        assert_eq!(sp.plus_components, vec![(1, 9)]);
        assert_eq!(sp.minus_components, vec![(11, 19)]);
        assert_eq!(sp.zero_set, vec![10]);

        let one = Weight::from_fn(&m, |_| 1.0).unwrap();
        let sp = sign_partition(&one, 0.0);
        assert_eq!(sp.plus_components, vec![(1, 19)]);
        assert!(sp.minus_components.is_empty());

        let sp = sign_partition(&a, 2.0);
        assert!(sp.plus_components.is_empty() && sp.minus_components.is_empty());
        assert_eq!(sp.zero_set.len(), 19);
    }
}
