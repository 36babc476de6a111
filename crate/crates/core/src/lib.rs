//! Data-driven output regulation of NARX systems.
//!
//! An inverse model `u = c([y+; zeta])` is learned by kernel interpolation from
//! input/output data. Error bounds on that model give, for each data point, a ball
//! of augmented states from which steering towards the point's recorded output is
//! guaranteed to land near its recorded successor. Chaining those balls backwards
//! from the slab `|y| <= delta` yields level sets `A^0, A^1, ...` and the online
//! controller walks down the levels.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod controller;
pub mod data;
pub mod error;
pub mod interpolant;
pub mod kernels;
pub mod level_sets;
pub mod plants;

pub use bounds::{BoundSet, EtaMode, GammaMode};
pub use controller::{ControllerConfig, Descent, FallbackPolicy, StepCertificate};
pub use data::{build_dataset, build_merged, merge, AugmentedState, Delay, NarxDataset, Record, Trajectory};
pub use error::{Error, Result};
pub use interpolant::{fit_hyperparameters, Interpolant, KernelSearch};
pub use kernels::{ArdMatern52Kernel, IsotropicKernel, Kernel, KernelFamily};
pub use level_sets::{build_level_family, Ball, BallIndex, IndexedEntry, LevelFamily};
pub use plants::{closed_loop, rmse, ClosedLoopRun, NoiseSpec, NumericalPlant, Pendulum, Plant, StepLog};
