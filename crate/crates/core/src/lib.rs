//! Bell-inequality maximization and entanglement geometry for bipartite qudits.
//!
//! The crate is organised bottom-up:
//!
//! * [`qstate`]: Weyl operators, generalized Bell projectors, magic-simplex
//!   mixtures, the named state families and the partial trace/transpose.
//! * [`uparam`]: the composite parameterization of `U(d)` used as the search
//!   space for every optimization.
//! * [`cglmp`]: joint probabilities, the CGLMP quantity `I_d`, its Bell
//!   operator, the analytic maximum and the local bound.
//! * [`optimize`]: Nelder-Mead with restarts, Bell maximization and the
//!   noise-scaling boundary solver.
//! * [`entgeo`]: PPT, closed-form boundaries, classification and the
//!   m-concurrence lower bound.
//! * [`scan`] and [`verify`]: batch grids and verification suites used by the
//!   command-line front end.
//!
//! Batch work (scans, sweeps, grids) is spread over a rayon pool when the
//! `parallel` feature is enabled; see [`par`].

pub mod cglmp;
pub mod entgeo;
mod error;
pub mod linalg;
pub mod optimize;
pub mod par;
pub mod qstate;
pub mod scan;
pub mod uparam;
pub mod verify;

pub use error::{Error, Result};
