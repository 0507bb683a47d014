use crate::application::Application;
use crate::error::{MgritError, Result};
use crate::grid::TimeGrid;
use crate::vector::ScalarVector;

/// Dahlquist's test equation `u' = λu`, `u(0) = 1`, stepped with backward Euler.
#[derive(Debug, Clone)]
pub struct Dahlquist {
    lambda: f64,
    grid: TimeGrid,
    template: ScalarVector,
    initial: ScalarVector,
}

impl Dahlquist {
    pub fn new(lambda: f64, grid: TimeGrid) -> Self {
        Self {
            lambda,
            grid,
            template: ScalarVector::new(0.0),
            initial: ScalarVector::new(1.0),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Application for Dahlquist {
    type Vector = ScalarVector;

    fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn vector_template(&self) -> &ScalarVector {
        &self.template
    }

    fn vector_t_start(&self) -> &ScalarVector {
        &self.initial
    }

    fn step(&self, u_start: &ScalarVector, t_start: f64, t_stop: f64) -> Result<ScalarVector> {
        super::check_interval(t_start, t_stop)?;
        if !u_start.value.is_finite() {
            return Err(MgritError::Step {
                t_start,
                t_stop,
                reason: format!("non-finite start value {}", u_start.value),
            });
        }
        let factor = 1.0 / (1.0 - (t_stop - t_start) * self.lambda);
        Ok(ScalarVector::new(factor * u_start.value))
    }

    fn with_time_grid(&self, grid: TimeGrid) -> Self {
        Self::new(self.lambda, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::application::sequential_solve;

    fn app(lambda: f64) -> Dahlquist {
        Dahlquist::new(lambda, TimeGrid::uniform(0.0, 0.1, 3).unwrap())
    }

    #[test]
    fn backward_euler_step() {
        let u = app(-1.0).step(&ScalarVector::new(1.0), 0.0, 0.05).unwrap();
        assert_eq!(u.value, 0.9523809523809523);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let u = app(0.0).step(&ScalarVector::new(3.25), 0.3, 1.7).unwrap();
        assert_eq!(u.value, 3.25);
    }

    #[test]
    fn two_steps_match_sequential_recursion() {
        let a = app(-1.0);
        let u = sequential_solve(&a).unwrap();
        let s1 = a.step(&ScalarVector::new(1.0), 0.0, 0.05).unwrap();
        let s2 = a.step(&s1, 0.05, 0.1).unwrap();
        assert_eq!(u[2], s2);
    }

    #[test]
    fn rejects_non_finite_and_reversed_interval() {
        let a = app(-1.0);
        assert!(a.step(&ScalarVector::new(f64::NAN), 0.0, 0.05).is_err());
        assert!(a.step(&ScalarVector::new(1.0), 0.05, 0.0).is_err());
    }
}
