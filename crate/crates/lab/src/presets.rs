//! Named weight families and the problem instance built from a config.

use std::f64::consts::PI;
use std::path::Path;

use nehari_core::{first_eigenpair, make_mesh, orthogonalize_weight, EigenPair, Mesh, ProblemSpec, Weight};

use crate::config::{RunConfig, WeightFamily};
use crate::error::{LabError, Result};

/// Largest perturbation, in units of `‖a‖∞`, the perturbed preset accepts.
/// Beyond it the pairing is far from zero and the three-solutions window
/// below `λ₁` is no longer expected.
pub const MU_MAX: f64 = 0.2;

pub const EIGEN_TOL: f64 = 1e-9;

/// A problem instance at `λ = 0` with its first eigenpair.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub pair: EigenPair,
    /// The unperturbed weight, when the family is `perturbed`.
    pub base: Option<Weight>,
}

impl Problem {
    pub fn mesh(&self) -> &Mesh {
        &self.spec.mesh
    }

    pub fn lambda1(&self) -> f64 {
        self.pair.lambda1
    }

    /// The same instance with the unperturbed weight.
    pub fn unperturbed(&self) -> Result<ProblemSpec> {
        match &self.base {
            Some(b) => Ok(self.spec.with_weight(b.clone())?),
            None => Ok(self.spec.clone()),
        }
    }
}

/// `A₊` times a half-sine on the first `width` of the interval, `−A₋` times a
/// half-sine on the rest.
pub fn two_bump(mesh: &Mesh, width: f64, a_plus: f64, a_minus: f64) -> Result<Weight> {
    let (lo, len) = (mesh.x_lo(), mesh.length());
    Ok(Weight::from_fn(mesh, |x| {
        let s = (x - lo) / len;
        if s < width {
            a_plus * (PI * s / width).sin()
        } else {
            -a_minus * (PI * (s - width) / (1.0 - width)).sin()
        }
    })?)
}

/// Nonnegative half-sine supported on the minus region of [`two_bump`].
pub fn minus_bump(mesh: &Mesh, width: f64) -> Result<Weight> {
    let (lo, len) = (mesh.x_lo(), mesh.length());
    Ok(Weight::from_fn(mesh, |x| {
        let s = (x - lo) / len;
        if s > width {
            (PI * (s - width) / (1.0 - width)).sin().max(0.0)
        } else {
            0.0
        }
    })?)
}

/// Whitespace-separated nodal values; `#` starts a comment.
pub fn read_weight_file(path: &Path, mesh: &Mesh) -> Result<Weight> {
    let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|e| {
                LabError::Config(format!("{}:{}: {tok:?}: {e}", path.display(), i + 1))
            })?);
        }
    }
    if values.len() != mesh.n_nodes() {
        return Err(LabError::Config(format!(
            "{} has {} values, mesh has {} nodes",
            path.display(),
            values.len(),
            mesh.n_nodes()
        )));
    }
    Ok(Weight::from_values(values)?)
}

pub fn build(cfg: &RunConfig) -> Result<Problem> {
    cfg.validate()?;
    let mesh = make_mesh(cfg.x_lo, cfg.x_hi, cfg.n_cells)?;
    let pair = first_eigenpair(&mesh, cfg.p, EIGEN_TOL)?;
    let shape = || two_bump(&mesh, cfg.plus_width, cfg.a_plus, cfg.a_minus);
    let (a, base) = match cfg.weight {
        WeightFamily::TwoBump => (shape()?, None),
        WeightFamily::OrthogonalTwoBump => (orthogonalize_weight(&shape()?, &pair, cfg.q)?, None),
        WeightFamily::Perturbed => {
            if cfg.mu > MU_MAX {
                return Err(LabError::Config(format!(
                    "mu = {} exceeds {MU_MAX}: the perturbed weight is too far from orthogonal",
                    cfg.mu
                )));
            }
            let a0 = orthogonalize_weight(&shape()?, &pair, cfg.q)?;
            let b = minus_bump(&mesh, cfg.plus_width)?;
            let a = a0.perturbed(cfg.mu * a0.sup_norm(), &b)?;
            (a, Some(a0))
        }
        WeightFamily::File => {
            let path = cfg.weight_file.as_ref().expect("validated");
            (read_weight_file(path, &mesh)?, None)
        }
    };
    let spec = ProblemSpec::new(cfg.p, cfg.q, 0.0, a, mesh)?;
    Ok(Problem { spec, pair, base })
}
