use crate::error::{MgritError, Result};

/// Strictly increasing set of time points with at least two entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(MgritError::TimeGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().position(|t| !t.is_finite()) {
            return Err(MgritError::TimeGrid(format!(
                "non-finite time value at index {bad}"
            )));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(MgritError::TimeGrid(format!(
                "not strictly increasing at index {}: {} then {}",
                i + 1,
                points[i],
                points[i + 1]
            )));
        }
        Ok(Self { points })
    }

    /// `n_points` equidistant points from `t_start` to `t_stop`, both included.
    pub fn uniform(t_start: f64, t_stop: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(MgritError::TimeGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        if t_stop.partial_cmp(&t_start) != Some(std::cmp::Ordering::Greater) {
            return Err(MgritError::TimeGrid(format!(
                "t_stop ({t_stop}) must exceed t_start ({t_start})"
            )));
        }
        let intervals = (n_points - 1) as f64;
        let dt = (t_stop - t_start) / intervals;
        let mut points: Vec<f64> = (0..n_points).map(|i| t_start + i as f64 * dt).collect();
        points[n_points - 1] = t_stop;
        Self::new(points)
    }

    /// Keep the points at `indices` (which must be strictly increasing).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn t_start(&self) -> f64 {
        self.points[0]
    }

    pub fn t_stop(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}
