use std::f64::consts::PI;

use super::linalg::thomas_solve;
use crate::application::Application;
use crate::error::{MgritError, Result};
use crate::grid::TimeGrid;
use crate::vector::GridVector;

/// `sin(πx) cos(t)`: the exact solution of the forced problem with `a = 1`.
pub fn heat1d_exact(x: f64, t: f64) -> f64 {
    (PI * x).sin() * t.cos()
}

/// `b(x, t) = -sin(πx) (sin t - π² cos t)`.
pub fn heat1d_forcing(x: f64, t: f64) -> f64 {
    -(PI * x).sin() * (t.sin() - PI * PI * t.cos())
}

/// `u_t - a u_xx = b(x, t)` on `[0, 1]` with homogeneous Dirichlet boundaries,
/// central differences in space and backward Euler in time.
///
/// The state holds all `n_x` grid values, boundaries included (always zero).
#[derive(Debug, Clone)]
pub struct Heat1D {
    a: f64,
    n_x: usize,
    forced: bool,
    grid: TimeGrid,
    template: GridVector,
    initial: GridVector,
}

impl Heat1D {
    /// Forced problem with initial condition `sin(πx)`.
    pub fn new(a: f64, n_x: usize, grid: TimeGrid) -> Result<Self> {
        if n_x < 3 {
            return Err(MgritError::Settings(format!(
                "heat1d needs at least 3 spatial points, got {n_x}"
            )));
        }
        if a.is_nan() || a <= 0.0 {
            return Err(MgritError::Settings(format!(
                "conductivity must be positive, got {a}"
            )));
        }
        let h = 1.0 / (n_x - 1) as f64;
        let mut init: Vec<f64> = (0..n_x).map(|j| (PI * j as f64 * h).sin()).collect();
        init[0] = 0.0;
        init[n_x - 1] = 0.0;
        Ok(Self {
            a,
            n_x,
            forced: true,
            grid,
            template: GridVector::zeros(n_x),
            initial: GridVector::new(init),
        })
    }

    /// Drop the forcing term (`b ≡ 0`).
    pub fn without_forcing(mut self) -> Self {
        self.forced = false;
        self
    }

    pub fn with_initial(mut self, initial: GridVector) -> Result<Self> {
        if initial.len() != self.n_x {
            return Err(MgritError::Structure {
                expected: self.n_x,
                actual: initial.len(),
            });
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_x - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Exact solution sampled on this grid at time `t`.
    pub fn exact(&self, t: f64) -> GridVector {
        let mut v: Vec<f64> = (0..self.n_x).map(|j| heat1d_exact(self.x(j), t)).collect();
        v[0] = 0.0;
        v[self.n_x - 1] = 0.0;
        GridVector::new(v)
    }
}

impl Application for Heat1D {
    type Vector = GridVector;

    fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn vector_template(&self) -> &GridVector {
        &self.template
    }

    fn vector_t_start(&self) -> &GridVector {
        &self.initial
    }

    /// Solves `(I - Δt a L_h) u' = u + Δt b(·, t_stop)` on the interior.
    fn step(&self, u_start: &GridVector, t_start: f64, t_stop: f64) -> Result<GridVector> {
        super::check_interval(t_start, t_stop)?;
        super::check_state(u_start, self.n_x, t_start, t_stop)?;
        let n = self.n_x - 2;
        let dt = t_stop - t_start;
        let h = self.spacing();
        let r = dt * self.a / (h * h);
        let u = u_start.values();
        let rhs: Vec<f64> = (1..=n)
            .map(|j| {
                let b = if self.forced {
                    heat1d_forcing(self.x(j), t_stop)
                } else {
                    0.0
                };
                u[j] + dt * b
            })
            .collect();
        let interior = thomas_solve(&vec![-r; n], &vec![1.0 + 2.0 * r; n], &vec![-r; n], &rhs);
        let mut out = Vec::with_capacity(self.n_x);
        out.push(0.0);
        out.extend(interior);
        out.push(0.0);
        Ok(GridVector::new(out))
    }

    fn with_time_grid(&self, grid: TimeGrid) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::application::sequential_solve;

    fn max_err(a: &GridVector, b: &GridVector) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn exact_solution_values() {
        assert_eq!(heat1d_exact(0.5, 0.0), 1.0);
        assert_eq!(heat1d_exact(0.0, 1.3), 0.0);
        assert!(heat1d_exact(1.0, 0.7).abs() < 1e-15);
        assert!((heat1d_exact(0.25, 0.0) - (PI / 4.0).sin()).abs() < 1e-16);
    }

    #[test]
    fn forcing_matches_residual_of_exact_solution() {
        // u_t - u_xx for u = sin(πx)cos(t), by finite differences on the exact function.
        let (x, t, e) = (0.3, 0.8, 1e-4);
        let ut = (heat1d_exact(x, t + e) - heat1d_exact(x, t - e)) / (2.0 * e);
        let uxx =
            (heat1d_exact(x + e, t) - 2.0 * heat1d_exact(x, t) + heat1d_exact(x - e, t)) / (e * e);
        assert!((ut - uxx - heat1d_forcing(x, t)).abs() < 1e-5);
    }

    #[test]
    fn zero_state_without_forcing_stays_zero() {
        let app = Heat1D::new(1.0, 17, TimeGrid::uniform(0.0, 1.0, 5).unwrap())
            .unwrap()
            .without_forcing();
        let u = app.step(&GridVector::zeros(17), 0.0, 0.25).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundaries_stay_zero() {
        let app = Heat1D::new(1.0, 33, TimeGrid::uniform(0.0, 2.0, 9).unwrap()).unwrap();
        let u = sequential_solve(&app).unwrap();
        for v in &u {
            assert_eq!(v.values()[0], 0.0);
            assert_eq!(v.values()[32], 0.0);
        }
    }

    #[test]
    fn step_is_deterministic() {
        let app = Heat1D::new(1.0, 65, TimeGrid::uniform(0.0, 2.0, 9).unwrap()).unwrap();
        let u0 = app.exact(0.0);
        let a = app.step(&u0, 0.0, 0.25).unwrap();
        let b = app.step(&u0, 0.0, 0.25).unwrap();
        let bits = |v: &GridVector| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn one_step_error_shrinks_with_dt() {
        // Local error of one backward-Euler step is O(dt^2) once h is fine.
        let app = Heat1D::new(1.0, 1025, TimeGrid::uniform(0.0, 2.0, 1025).unwrap()).unwrap();
        let u0 = app.exact(0.0);
        let mut errs = Vec::new();
        for k in 0..3 {
            let dt = 2.0 / 1024.0 * 2f64.powi(3 - k);
            let u1 = app.step(&u0, 0.0, dt).unwrap();
            errs.push(max_err(&u1, &app.exact(dt)));
        }
        assert!(errs[0] < 1e-3, "{errs:?}");
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 2.0, "{errs:?}");
        }
    }

    #[test]
    fn global_error_is_first_order_in_time() {
        let mut errs = Vec::new();
        for nt in [33, 65] {
            let app = Heat1D::new(1.0, 513, TimeGrid::uniform(0.0, 2.0, nt).unwrap()).unwrap();
            let u = sequential_solve(&app).unwrap();
            errs.push(max_err(&u[nt - 1], &app.exact(2.0)));
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (1.7..=2.3).contains(&ratio),
            "ratio {ratio}, errors {errs:?}"
        );
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let app = Heat1D::new(1.0, 9, TimeGrid::uniform(0.0, 1.0, 3).unwrap()).unwrap();
        assert!(app.step(&GridVector::zeros(8), 0.0, 0.5).is_err());
        let mut bad = GridVector::zeros(9);
        bad.values_mut()[3] = f64::INFINITY;
        let err = app.step(&bad, 0.0, 0.5).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }
}
