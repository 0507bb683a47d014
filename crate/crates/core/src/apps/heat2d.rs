use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use super::linalg::BandCholesky;
use crate::application::Application;
use crate::error::{MgritError, Result};
use crate::grid::TimeGrid;
use crate::vector::GridVector;

/// `sin(2πx) sin(2πy) cos(t)`.
pub fn heat2d_exact(x: f64, y: f64, t: f64) -> f64 {
    (2.0 * PI * x).sin() * (2.0 * PI * y).sin() * t.cos()
}

/// Forcing for which [`heat2d_exact`] solves `u_t - Δu = b`:
/// `b = -S sin(t) + 8π² S cos(t)` with `S = sin(2πx) sin(2πy)`.
pub fn heat2d_forcing(x: f64, y: f64, t: f64) -> f64 {
    let s = (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
    -s * t.sin() + 8.0 * PI * PI * s * t.cos()
}

/// Forced 2D heat equation on the unit square, homogeneous Dirichlet
/// boundaries, 5-point Laplacian, backward Euler.
///
/// State layout is row-major over the full `n_x × n_y` grid (index
/// `j * n_x + i` for `x_i, y_j`), boundary values included.
#[derive(Debug, Clone)]
pub struct Heat2D {
    n_x: usize,
    n_y: usize,
    grid: TimeGrid,
    template: GridVector,
    initial: GridVector,
    // Factorizations of (I - Δt L_h), keyed by the bits of Δt. Shared by clones.
    factors: Arc<Mutex<HashMap<u64, Arc<BandCholesky>>>>,
}

impl Heat2D {
    pub fn new(n_x: usize, n_y: usize, grid: TimeGrid) -> Result<Self> {
        if n_x < 3 || n_y < 3 {
            return Err(MgritError::Settings(format!(
                "heat2d needs at least 3x3 points, got {n_x}x{n_y}"
            )));
        }
        let mut app = Self {
            n_x,
            n_y,
            grid,
            template: GridVector::zeros(n_x * n_y),
            initial: GridVector::zeros(n_x * n_y),
            factors: Arc::default(),
        };
        app.initial = app.exact(app.grid.t_start());
        Ok(app)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_x, self.n_y)
    }

    fn hx(&self) -> f64 {
        1.0 / (self.n_x - 1) as f64
    }

    fn hy(&self) -> f64 {
        1.0 / (self.n_y - 1) as f64
    }

    pub fn exact(&self, t: f64) -> GridVector {
        let mut v = vec![0.0; self.n_x * self.n_y];
        for j in 1..self.n_y - 1 {
            for i in 1..self.n_x - 1 {
                v[j * self.n_x + i] = heat2d_exact(i as f64 * self.hx(), j as f64 * self.hy(), t);
            }
        }
        GridVector::new(v)
    }

    fn interior_dims(&self) -> (usize, usize) {
        (self.n_x - 2, self.n_y - 2)
    }

    /// Lower band of `I - Δt L_h` on the interior unknowns (row-major).
    fn operator_entry(&self, dt: f64, row: usize, col: usize) -> f64 {
        let (nix, _) = self.interior_dims();
        let rx = dt / (self.hx() * self.hx());
        let ry = dt / (self.hy() * self.hy());
        if row == col {
            1.0 + 2.0 * rx + 2.0 * ry
        } else if row - col == 1 && !row.is_multiple_of(nix) {
            -rx
        } else if row - col == nix {
            -ry
        } else {
            0.0
        }
    }

    fn factor_for(&self, dt: f64) -> Result<Arc<BandCholesky>> {
        let key = dt.to_bits();
        let mut cache = self.factors.lock().expect("factor cache poisoned");
        if let Some(f) = cache.get(&key) {
            return Ok(Arc::clone(f));
        }
        let (nix, niy) = self.interior_dims();
        let f = BandCholesky::factor(nix * niy, nix, |r, c| self.operator_entry(dt, r, c))
            .ok_or_else(|| MgritError::Step {
                t_start: 0.0,
                t_stop: dt,
                reason: "implicit operator is not positive definite".into(),
            })?;
        let f = Arc::new(f);
        cache.insert(key, Arc::clone(&f));
        Ok(f)
    }

    /// `‖A x - b‖ / ‖b‖` for the implicit system of a step of size `dt`.
    pub fn relative_residual(&self, dt: f64, x: &[f64], b: &[f64]) -> f64 {
        let (nix, niy) = self.interior_dims();
        let rx = dt / (self.hx() * self.hx());
        let ry = dt / (self.hy() * self.hy());
        let mut num = 0.0;
        let mut den = 0.0;
        for jy in 0..niy {
            for ix in 0..nix {
                let k = jy * nix + ix;
                let mut ax = (1.0 + 2.0 * rx + 2.0 * ry) * x[k];
                if ix > 0 {
                    ax -= rx * x[k - 1];
                }
                if ix + 1 < nix {
                    ax -= rx * x[k + 1];
                }
                if jy > 0 {
                    ax -= ry * x[k - nix];
                }
                if jy + 1 < niy {
                    ax -= ry * x[k + nix];
                }
                num += (ax - b[k]).powi(2);
                den += b[k] * b[k];
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    fn interior_rhs(&self, u: &[f64], dt: f64, t_stop: f64) -> Vec<f64> {
        let (nix, niy) = self.interior_dims();
        let mut rhs = Vec::with_capacity(nix * niy);
        for j in 1..=niy {
            for i in 1..=nix {
                let b = heat2d_forcing(i as f64 * self.hx(), j as f64 * self.hy(), t_stop);
                rhs.push(u[j * self.n_x + i] + dt * b);
            }
        }
        rhs
    }
}

impl Application for Heat2D {
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

    fn step(&self, u_start: &GridVector, t_start: f64, t_stop: f64) -> Result<GridVector> {
        super::check_interval(t_start, t_stop)?;
        super::check_state(u_start, self.n_x * self.n_y, t_start, t_stop)?;
        let dt = t_stop - t_start;
        let factor = self.factor_for(dt).map_err(|_| MgritError::Step {
            t_start,
            t_stop,
            reason: "factorization of the implicit operator failed".into(),
        })?;
        let rhs = self.interior_rhs(u_start.values(), dt, t_stop);
        let x = factor.solve(&rhs);
        let (nix, niy) = self.interior_dims();
        let mut out = vec![0.0; self.n_x * self.n_y];
        for jy in 0..niy {
            let row = (jy + 1) * self.n_x + 1;
            out[row..row + nix].copy_from_slice(&x[jy * nix..(jy + 1) * nix]);
        }
        Ok(GridVector::new(out))
    }

    fn with_time_grid(&self, grid: TimeGrid) -> Self {
        let mut app = Self {
            grid,
            ..self.clone()
        };
        app.initial = app.exact(app.grid.t_start());
        app
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
    fn forcing_matches_residual_of_exact_solution() {
        let (x, y, t, e) = (0.31, 0.62, 0.4, 1e-4);
        let ut = (heat2d_exact(x, y, t + e) - heat2d_exact(x, y, t - e)) / (2.0 * e);
        let lap = (heat2d_exact(x + e, y, t)
            + heat2d_exact(x - e, y, t)
            + heat2d_exact(x, y + e, t)
            + heat2d_exact(x, y - e, t)
            - 4.0 * heat2d_exact(x, y, t))
            / (e * e);
        assert!((ut - lap - heat2d_forcing(x, y, t)).abs() < 1e-4);
    }

    #[test]
    fn exact_initial_and_boundary() {
        assert!((heat2d_exact(0.25, 0.25, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(heat2d_exact(0.0, 0.3, 0.2), 0.0);
    }

    #[test]
    fn implicit_solve_residual_below_1e12() {
        let app = Heat2D::new(33, 33, TimeGrid::uniform(0.0, 1.0, 1025).unwrap()).unwrap();
        let u0 = app.exact(0.0);
        for dt in [1.0 / 1024.0, 1.0 / 32.0, 0.5] {
            let rhs = app.interior_rhs(u0.values(), dt, dt);
            let x = app.factor_for(dt).unwrap().solve(&rhs);
            let res = app.relative_residual(dt, &x, &rhs);
            assert!(res <= 1e-12, "dt {dt}: residual {res}");
        }
    }

    #[test]
    fn boundaries_stay_zero_and_zero_stays_small() {
        let app = Heat2D::new(9, 7, TimeGrid::uniform(0.0, 1.0, 5).unwrap()).unwrap();
        let u = app.step(&app.exact(0.0), 0.0, 0.25).unwrap();
        let (nx, ny) = app.dims();
        for i in 0..nx {
            assert_eq!(u.values()[i], 0.0);
            assert_eq!(u.values()[(ny - 1) * nx + i], 0.0);
        }
        for j in 0..ny {
            assert_eq!(u.values()[j * nx], 0.0);
            assert_eq!(u.values()[j * nx + nx - 1], 0.0);
        }
    }

    #[test]
    fn time_error_is_first_order() {
        // Spatial error dominates the distance to the exact solution here, so
        // compare against a fine-step reference on the same spatial grid.
        let end = |nt: usize| {
            let app = Heat2D::new(33, 33, TimeGrid::uniform(0.0, 1.0, nt).unwrap()).unwrap();
            sequential_solve(&app).unwrap().pop().unwrap()
        };
        let reference = end(1025);
        let e1 = max_err(&end(17), &reference);
        let e2 = max_err(&end(33), &reference);
        let ratio = e1 / e2;
        assert!(
            (1.7..=2.3).contains(&ratio),
            "ratio {ratio}, errors {e1} {e2}"
        );
    }
}
