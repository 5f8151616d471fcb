//! Numerical toolkit for studying how hard linear-quadratic control is to
//! learn: linear algebra kernel, system model and simulation, controllability
//! analysis, Riccati solvers, hard-instance generators, theoretical bounds,
//! and a learning pipeline.

pub mod bounds;
pub mod ctrbl;
pub mod instances;
pub mod learnpipe;
pub mod numkernel;
pub mod riccati;
pub mod sysmodel;
pub mod tolerance;

pub use numkernel::{LinalgError, Matrix};
pub use tolerance::Tolerances;
