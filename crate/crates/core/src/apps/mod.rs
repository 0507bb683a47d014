//! Shipped problems: Dahlquist's test equation and forced 1D/2D heat
//! equations, plus a 1D spatial transfer for spatial coarsening.

mod dahlquist;
mod heat1d;
mod heat2d;
pub mod linalg;
mod transfer;

pub use dahlquist::Dahlquist;
pub use heat1d::{heat1d_exact, heat1d_forcing, Heat1D};
pub use heat2d::{heat2d_exact, heat2d_forcing, Heat2D};
pub use transfer::Heat1DTransfer;

use crate::error::{MgritError, Result};
use crate::vector::GridVector;

fn check_interval(t_start: f64, t_stop: f64) -> Result<()> {
    if t_stop > t_start {
        Ok(())
    } else {
        Err(MgritError::Step {
            t_start,
            t_stop,
            reason: "t_stop must exceed t_start".into(),
        })
    }
}

fn check_state(u: &GridVector, expected: usize, t_start: f64, t_stop: f64) -> Result<()> {
    if u.len() != expected {
        return Err(MgritError::Structure {
            expected,
            actual: u.len(),
        });
    }
    if let Some(j) = u.values().iter().position(|v| !v.is_finite()) {
        return Err(MgritError::Step {
            t_start,
            t_stop,
            reason: format!("non-finite start value at entry {j}"),
        });
    }
    Ok(())
}
