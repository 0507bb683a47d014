//! Multigrid reduction in time with a full approximation scheme.
//!
//! A user problem implements [`Application`] (a one-step time integrator on
//! a [`TimeGrid`]) over a [`StateVector`]. [`build_uniform_hierarchy`] turns
//! it into a multilevel time hierarchy, and [`Mgrit`] solves the resulting
//! all-at-once system with V- or F-cycles on one worker or on several worker
//! threads ([`solve_with_threads`]).
//!
//! ```
//! use mgrit::apps::Dahlquist;
//! use mgrit::{build_uniform_hierarchy, solve, Coarsening, MgritSettings, TimeGrid};
//!
//! let app = Dahlquist::new(-1.0, TimeGrid::uniform(0.0, 5.0, 101).unwrap());
//! let hierarchy = build_uniform_hierarchy(app, 2, &Coarsening::Uniform(2)).unwrap();
//! let out = solve(&hierarchy, &MgritSettings::default()).unwrap();
//! assert!(out.info.converged);
//! ```

pub mod application;
pub mod apps;
pub mod engine;
pub mod error;
pub mod grid;
pub mod hierarchy;
pub mod runtime;
pub mod vector;

pub use application::{sequential_solve, Application, IdentityTransfer, SpatialTransfer};
pub use engine::{
    cycle_shape, random_guess, residual_norm, residual_norms_at, solve, solve_with_threads,
    CycleType, LevelState, Mgrit, MgritSettings, ParallelOutcome, SolveInfo, SolveOutcome,
    TraceEvent,
};
pub use error::{MgritError, Result};
pub use grid::TimeGrid;
pub use hierarchy::{
    build_hierarchy_from_grids, build_uniform_hierarchy, cf_splitting, Coarsening, Hierarchy,
    LevelProblem,
};
pub use runtime::{
    distribute_points, split_communicator, CommunicatorSplit, Phase, SerialTransport, Tag,
    ThreadTransport, TimeDecomposition, Transport, TransportStats,
};
pub use vector::{GridVector, ScalarVector, StateVector};
