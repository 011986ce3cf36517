//! Discrete variational toolkit for the one-dimensional problem
//!
//! ```text
//! -(|u'|^{p-2} u')' = λ |u|^{p-2} u + a(x) |u|^{q-2} u   in (x_lo, x_hi),
//! u(x_lo) = u(x_hi) = 0,
//! ```
//!
//! with `1 < q < p` and a sign-changing weight `a`.

pub mod critical;
pub(crate) mod descent;
pub mod eigen;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod solvers;

pub use critical::{
    compute_critical_values, nonexistence_bound, picone_certificate, picone_condition,
    picone_polynomial, region_classify, CriticalValues, PairingSign, PiconeReport, Regime,
};
pub use eigen::{first_eigenpair, orthogonalize_weight, pairing, rayleigh, EigenPair};
pub use error::{Error, Result};
pub use functionals::{
    energy, evaluate, fiber_scale, fiber_scale_trunc, fibered_J, fibered_J_trunc, gradient_I, nehari_project,
    nehari_project_trunc, EnergyBreakdown, ProblemSpec,
};
pub use grid::{
    grad_seminorm_p, integral_abs_p, make_mesh, sign_partition, weighted_integral_q, GridFn, Mesh,
    SignPartition, Weight,
};
