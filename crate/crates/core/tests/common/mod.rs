#![allow(dead_code)]

use mgrit::apps::{Dahlquist, Heat1D, Heat1DTransfer};
use mgrit::{
    build_hierarchy_from_grids, build_uniform_hierarchy, Coarsening, CycleType, GridVector,
    Hierarchy, MgritSettings, StateVector, TimeGrid,
};
use std::sync::Arc;

pub fn dahlquist(n_points: usize, t_stop: f64, levels: usize, m: usize) -> Hierarchy<Dahlquist> {
    let app = Dahlquist::new(-1.0, TimeGrid::uniform(0.0, t_stop, n_points).unwrap());
    build_uniform_hierarchy(app, levels, &Coarsening::Uniform(m)).unwrap()
}

pub fn heat1d(n_x: usize, n_points: usize, levels: usize, m: usize) -> Hierarchy<Heat1D> {
    let app = Heat1D::new(1.0, n_x, TimeGrid::uniform(0.0, 2.0, n_points).unwrap()).unwrap();
    build_uniform_hierarchy(app, levels, &Coarsening::Uniform(m)).unwrap()
}

/// Heat1D hierarchy with time factor `m` on every level and spatial grids
/// halved per level.
pub fn heat1d_spatial(n_xs: &[usize], n_points: usize, m: usize) -> Hierarchy<Heat1D> {
    let fine = TimeGrid::uniform(0.0, 2.0, n_points).unwrap();
    let mut grids = vec![fine];
    for _ in 1..n_xs.len() {
        let prev = grids.last().unwrap();
        let idx: Vec<usize> = (0..prev.len()).step_by(m).collect();
        grids.push(prev.select(&idx).unwrap());
    }
    let apps = n_xs
        .iter()
        .zip(grids)
        .map(|(&n_x, g)| Heat1D::new(1.0, n_x, g).unwrap())
        .collect();
    let transfers = n_xs
        .windows(2)
        .map(|w| {
            Arc::new(Heat1DTransfer::new(w[0], w[1]).unwrap())
                as Arc<dyn mgrit::SpatialTransfer<GridVector>>
        })
        .collect();
    build_hierarchy_from_grids(apps)
        .unwrap()
        .with_transfers(transfers)
        .unwrap()
}

pub fn settings(cycle: CycleType, cf_iter: usize) -> MgritSettings {
    MgritSettings {
        cycle_type: cycle,
        cf_iter,
        ..Default::default()
    }
}

pub fn max_diff<V: StateVector>(a: &[V], b: &[V]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.pack()
                .iter()
                .zip(y.pack())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Backward Euler for `u' = λu` over `[t0, t1]`.
pub fn be(lambda: f64, u: f64, t0: f64, t1: f64) -> f64 {
    u / (1.0 - (t1 - t0) * lambda)
}

/// Textbook Parareal on a uniform grid `t`: coarse propagator is one backward
/// Euler step over `m` fine intervals, fine propagator is `m` fine steps.
/// Returns the C-point iterates `U^1..U^iters` starting from `u0`.
pub fn parareal(lambda: f64, t: &[f64], m: usize, u0: &[f64], iters: usize) -> Vec<Vec<f64>> {
    let n = u0.len();
    let tc = |n: usize| t[n * m];
    let coarse = |u: f64, n: usize| be(lambda, u, tc(n), tc(n + 1));
    let fine = |mut u: f64, n: usize| {
        for i in n * m..(n + 1) * m {
            u = be(lambda, u, t[i], t[i + 1]);
        }
        u
    };
    let mut history = Vec::new();
    let mut old = u0.to_vec();
    for _ in 0..iters {
        let mut new = vec![old[0]; n];
        for k in 0..n - 1 {
            new[k + 1] = coarse(new[k], k) + fine(old[k], k) - coarse(old[k], k);
        }
        history.push(new.clone());
        old = new;
    }
    history
}

/// One two-grid iteration of a linear correction scheme on Dahlquist's
/// equation: F-relax, compute residuals at C-points, solve the coarse error
/// equation `e_n - G e_{n-1} = r_n` from `e_0 = 0`, correct, F-relax.
pub fn linear_two_grid(lambda: f64, t: &[f64], m: usize, u: &mut [f64], cf_iter: usize) {
    let n = u.len();
    let f_relax = |u: &mut [f64]| {
        for i in 1..n {
            if i % m != 0 {
                u[i] = be(lambda, u[i - 1], t[i - 1], t[i]);
            }
        }
    };
    let c_relax = |u: &mut [f64]| {
        for i in (m..n).step_by(m) {
            u[i] = be(lambda, u[i - 1], t[i - 1], t[i]);
        }
    };
    f_relax(u);
    for _ in 0..cf_iter {
        c_relax(u);
        f_relax(u);
    }
    let cs: Vec<usize> = (0..n).step_by(m).collect();
    let mut e = vec![0.0; cs.len()];
    for k in 1..cs.len() {
        let i = cs[k];
        let r = be(lambda, u[i - 1], t[i - 1], t[i]) - u[i];
        e[k] = be(lambda, e[k - 1], t[cs[k - 1]], t[i]) + r;
    }
    for k in 1..cs.len() {
        u[cs[k]] += e[k];
    }
    f_relax(u);
}
