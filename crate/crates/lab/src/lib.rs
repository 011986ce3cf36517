//! Presets, sweeps and tabular output on top of `nehari-core`.

pub mod config;
pub mod error;
pub mod presets;
pub mod runs;
pub mod table;

pub use config::{Format, RunConfig, WeightFamily};
pub use error::{LabError, Result};
pub use presets::{build, Problem};
pub use runs::{certify, run_region_map, run_sweep, run_three_solutions, CertRow, RegionRow, ThreeRun, Triple, Verdict};
pub use table::{Branch, BranchRow, BranchTable};
