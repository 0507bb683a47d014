mod common;

use mgrit::apps::{Dahlquist, Heat1D, Heat2D};
use mgrit::vector::check_vector_contract;
use mgrit::{
    build_uniform_hierarchy, solve, Application, Coarsening, GridVector, MgritError, MgritSettings,
    ScalarVector, StateVector, TimeGrid,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn scalar_vector_contract(x in -1e6..1e6f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(check_vector_contract(&ScalarVector::new(x), &mut rng), Ok(()));
    }

    #[test]
    fn grid_vector_contract(values in prop::collection::vec(-1e6..1e6f64, 1..40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(check_vector_contract(&GridVector::new(values), &mut rng), Ok(()));
    }

    #[test]
    fn grid_vector_pack_round_trip_is_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..32)) {
        let v = GridVector::new(values);
        let back = v.unpack(&v.pack()).unwrap();
        prop_assert_eq!(back.sub(&v).norm(), 0.0);
        prop_assert_eq!(back, v);
    }

    #[test]
    fn uniform_grid_spacing_within_4_ulp(t0 in -10.0..10.0f64, len in 0.01..100.0f64, n in 2usize..300) {
        let g = TimeGrid::uniform(t0, t0 + len, n).unwrap();
        let dt = len / (n - 1) as f64;
        prop_assert_eq!(g.t_start(), t0);
        prop_assert_eq!(g.t_stop(), t0 + len);
        // Points are rounded at the magnitude of the grid's end points.
        let scale = t0.abs().max((t0 + len).abs()).max(dt);
        for w in g.points().windows(2) {
            let d = w[1] - w[0];
            let ulp = 4.0 * f64::EPSILON * scale;
            prop_assert!((d - dt).abs() <= ulp, "spacing {d} vs {dt}");
        }
    }
}

#[test]
fn norm_examples() {
    assert_eq!(GridVector::zeros(5).norm(), 0.0);
    assert_eq!(GridVector::zeros(5).pack(), vec![0.0; 5]);
    assert_eq!(GridVector::new(vec![3.0, 4.0]).norm(), 5.0);
    assert_eq!(GridVector::new(vec![1.0; 4]).norm(), 2.0);
    assert_eq!(ScalarVector::new(1.0).pack(), vec![1.0]);
}

#[test]
fn unpack_rejects_wrong_length() {
    let err = GridVector::zeros(3).unpack(&[1.0, 2.0]).unwrap_err();
    assert!(matches!(
        err,
        MgritError::Structure {
            expected: 3,
            actual: 2
        }
    ));
}

#[test]
fn template_and_initial_condition_are_compatible() {
    let grid = TimeGrid::uniform(0.0, 1.0, 5).unwrap();
    let d = Dahlquist::new(-1.0, grid.clone());
    assert_eq!(
        d.vector_template().packed_len(),
        d.vector_t_start().packed_len()
    );
    let h1 = Heat1D::new(1.0, 17, grid.clone()).unwrap();
    assert_eq!(
        h1.vector_template().packed_len(),
        h1.vector_t_start().packed_len()
    );
    let h2 = Heat2D::new(9, 7, grid).unwrap();
    assert_eq!(h2.vector_template().packed_len(), 63);
    assert_eq!(h2.vector_t_start().packed_len(), 63);
}

fn assert_bitwise_deterministic<A: Application>(app: &A) {
    let t = app.time_grid().points();
    let u = app.vector_t_start();
    let a = app.step(u, t[0], t[1]).unwrap().pack();
    let b = app.step(u, t[0], t[1]).unwrap().pack();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn steps_are_bitwise_deterministic() {
    let grid = TimeGrid::uniform(0.0, 1.0, 9).unwrap();
    assert_bitwise_deterministic(&Dahlquist::new(-1.0, grid.clone()));
    assert_bitwise_deterministic(&Heat1D::new(1.0, 33, grid.clone()).unwrap());
    assert_bitwise_deterministic(&Heat2D::new(17, 17, grid).unwrap());
}

#[test]
fn step_rejects_non_finite_input() {
    let grid = TimeGrid::uniform(0.0, 1.0, 9).unwrap();
    let d = Dahlquist::new(-1.0, grid.clone());
    assert!(d.step(&ScalarVector::new(f64::NAN), 0.0, 0.1).is_err());
    let h = Heat1D::new(1.0, 9, grid).unwrap();
    let mut bad = GridVector::zeros(9);
    bad.values_mut()[4] = f64::INFINITY;
    let err = h.step(&bad, 0.0, 0.125).unwrap_err();
    assert!(err.to_string().contains("0.125"), "{err}");
}

/// Application whose step fails at one time, to check error context.
struct Failing {
    inner: Dahlquist,
    bad_time: f64,
}

impl Application for Failing {
    type Vector = ScalarVector;

    fn time_grid(&self) -> &TimeGrid {
        self.inner.time_grid()
    }

    fn vector_template(&self) -> &ScalarVector {
        self.inner.vector_template()
    }

    fn vector_t_start(&self) -> &ScalarVector {
        self.inner.vector_t_start()
    }

    fn step(&self, u: &ScalarVector, t0: f64, t1: f64) -> mgrit::Result<ScalarVector> {
        if t1 == self.bad_time {
            return Err(MgritError::Step {
                t_start: t0,
                t_stop: t1,
                reason: "inner solve failed".into(),
            });
        }
        self.inner.step(u, t0, t1)
    }

    fn with_time_grid(&self, grid: TimeGrid) -> Self {
        Self {
            inner: self.inner.with_time_grid(grid),
            bad_time: self.bad_time,
        }
    }
}

#[test]
fn step_failure_is_reported_with_level_and_index() {
    let grid = TimeGrid::uniform(0.0, 1.6, 17).unwrap();
    let bad_time = grid.points()[6];
    let app = Failing {
        inner: Dahlquist::new(-1.0, grid),
        bad_time,
    };
    let h = build_uniform_hierarchy(app, 2, &Coarsening::Uniform(4)).unwrap();
    let err = solve(&h, &MgritSettings::default()).unwrap_err();
    match &err {
        MgritError::Propagation {
            level,
            index,
            source,
            ..
        } => {
            assert_eq!(*level, 0);
            assert_eq!(*index, 6);
            assert!(matches!(**source, MgritError::Step { .. }));
        }
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("inner solve failed"));
}
