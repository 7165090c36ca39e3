//! Levi parametrix construction of the fundamental solution in d = 1.

pub mod assemble;
pub mod check;
pub mod grid;
pub mod kernels;
pub mod model;
pub mod ops;
pub mod series;

pub use grid::{SpaceGrid, TimeGrid};
pub use kernels::{FrozenKernels, KernelKind};
pub use model::{preset, ModelSpec, ScalarFn, PRESETS};
pub use series::{sum_series, LevelStats, Lattice, ParametrixConfig, ParametrixState};
pub use assemble::{assemble_p, KernelTable};
pub use ops::{frozen_kernel, q0, three_p_inequality_check, ThreePForm};
