use crate::application::SpatialTransfer;
use crate::error::{MgritError, Result};
use crate::vector::GridVector;

/// Grid transfer between nested 1D grids with `n_fine = 2 n_coarse - 1`
/// points: full weighting (¼, ½, ¼) for restriction, linear interpolation for
/// prolongation. End points are injected.
#[derive(Debug, Clone, Copy)]
pub struct Heat1DTransfer {
    n_fine: usize,
    n_coarse: usize,
}

impl Heat1DTransfer {
    pub fn new(n_fine: usize, n_coarse: usize) -> Result<Self> {
        if n_coarse < 2 || n_fine != 2 * n_coarse - 1 {
            return Err(MgritError::Settings(format!(
                "grids of {n_fine} and {n_coarse} points are not nested (need n_fine = 2 n_coarse - 1)"
            )));
        }
        Ok(Self { n_fine, n_coarse })
    }

    fn check(&self, v: &GridVector, expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(MgritError::Structure {
                expected,
                actual: v.len(),
            });
        }
        Ok(())
    }
}

impl SpatialTransfer<GridVector> for Heat1DTransfer {
    fn restrict(&self, fine: &GridVector) -> Result<GridVector> {
        self.check(fine, self.n_fine)?;
        let f = fine.values();
        let nc = self.n_coarse;
        let mut c = vec![0.0; nc];
        c[0] = f[0];
        c[nc - 1] = f[self.n_fine - 1];
        for j in 1..nc - 1 {
            c[j] = 0.25 * f[2 * j - 1] + 0.5 * f[2 * j] + 0.25 * f[2 * j + 1];
        }
        Ok(GridVector::new(c))
    }

    fn interpolate(&self, coarse: &GridVector) -> Result<GridVector> {
        self.check(coarse, self.n_coarse)?;
        let c = coarse.values();
        let mut f = vec![0.0; self.n_fine];
        for j in 0..self.n_coarse {
            f[2 * j] = c[j];
        }
        for j in 0..self.n_coarse - 1 {
            f[2 * j + 1] = 0.5 * (c[j] + c[j + 1]);
        }
        Ok(GridVector::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_nested_sizes() {
        assert!(Heat1DTransfer::new(129, 64).is_err());
        assert!(Heat1DTransfer::new(129, 65).is_ok());
        let t = Heat1DTransfer::new(9, 5).unwrap();
        assert!(t.restrict(&GridVector::zeros(5)).is_err());
        assert!(t.interpolate(&GridVector::zeros(9)).is_err());
    }

    #[test]
    fn constant_field_survives_round_trip() {
        let t = Heat1DTransfer::new(17, 9).unwrap();
        let f = GridVector::new(vec![2.5; 17]);
        let back = t.interpolate(&t.restrict(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_linear_functions(a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let t = Heat1DTransfer::new(33, 17).unwrap();
            let coarse = GridVector::new((0..17).map(|j| a + b * j as f64 / 16.0).collect());
            let fine = t.interpolate(&coarse).unwrap();
            for (i, v) in fine.values().iter().enumerate() {
                let exact = a + b * i as f64 / 32.0;
                prop_assert!((v - exact).abs() <= 1e-13 * (1.0 + exact.abs()));
            }
            let back = t.restrict(&fine).unwrap();
            for (x, y) in back.values().iter().zip(coarse.values()) {
                prop_assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
            }
        }
    }
}
