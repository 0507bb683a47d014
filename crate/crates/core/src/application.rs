//! The problem-side contracts: a time grid with a one-step integrator, and
//! optional spatial grid transfers between levels.

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::vector::StateVector;

/// A time-dependent problem `u_i = Φ(u_{i-1}) + forcing` on a time grid.
///
/// Implementations are shared read-only between workers, so `step` must be
/// deterministic and free of interior state that changes results.
pub trait Application: Send + Sync {
    type Vector: StateVector;

    fn time_grid(&self) -> &TimeGrid;

    /// Prototype used to allocate vectors on this level.
    fn vector_template(&self) -> &Self::Vector;

    /// Initial condition.
    fn vector_t_start(&self) -> &Self::Vector;

    /// Propagate `u_start` from `t_start` to `t_stop`, forcing included.
    fn step(&self, u_start: &Self::Vector, t_start: f64, t_stop: f64) -> Result<Self::Vector>;

    /// Same problem re-discretized on `grid`, used for coarse time levels.
    fn with_time_grid(&self, grid: TimeGrid) -> Self
    where
        Self: Sized;
}

/// Spatial restriction/interpolation between the grids of two adjacent levels.
pub trait SpatialTransfer<V>: Send + Sync {
    /// Fine space to coarse space.
    fn restrict(&self, fine: &V) -> Result<V>;

    /// Coarse space to fine space.
    fn interpolate(&self, coarse: &V) -> Result<V>;
}

/// No spatial coarsening.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityTransfer;

impl<V: Clone> SpatialTransfer<V> for IdentityTransfer {
    fn restrict(&self, fine: &V) -> Result<V> {
        Ok(fine.clone())
    }

    fn interpolate(&self, coarse: &V) -> Result<V> {
        Ok(coarse.clone())
    }
}

/// Sequential time stepping over the whole grid of `app`: the reference every
/// MGRIT result is compared against.
pub fn sequential_solve<A: Application>(app: &A) -> Result<Vec<A::Vector>> {
    let t = app.time_grid().points();
    let mut u = Vec::with_capacity(t.len());
    u.push(app.vector_t_start().clone());
    for i in 1..t.len() {
        let next = app.step(&u[i - 1], t[i - 1], t[i])?;
        u.push(next);
    }
    Ok(u)
}
