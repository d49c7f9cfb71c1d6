//! Zonal DC power-flow toolkit.
//!
//! Implements a two-zone decomposition of DC dispatch and unit commitment
//! built on injection shift factors: each zone keeps its own network model
//! and shares only boundary exchange quantities with its neighbour. The
//! crates' modules follow the data path:
//!
//! - [`casefile`]: on-disk case formats (native JSON, MATPOWER subset)
//! - [`network`]: internal model, incidence/Laplacian assembly, partitions
//! - [`linsolve`]: dense Cholesky / LU kernel
//! - [`isf`]: shift-factor matrices, outage distribution factors, contingencies
//! - [`gamma`]: boundary aggregation factors for external buses
//! - [`formulations`]: dispatch/commitment quadratic programs
//! - [`solver`]: operator-splitting QP solver and branch & bound
//! - [`admm`]: the exchange coordinator, release-and-fix, and security updates
//! - [`uc`]: multi-period commitment assembly and schedule evaluation
//! - [`partition_milp`]: optimal boundary-minimizing network splits

pub mod admm;
pub mod casefile;
pub mod fixtures;
pub mod formulations;
pub mod gamma;
pub mod isf;
pub mod linsolve;
pub mod network;
pub mod partition_milp;
pub mod solver;
pub mod uc;
