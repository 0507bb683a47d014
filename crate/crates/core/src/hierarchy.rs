//! Multilevel time-grid hierarchies and the C/F splitting between levels.
//!
//! Level 0 is the finest grid. Every coarse level holds a subset of the time
//! points of the level above it; `cf_map` records, for each point of the next
//! coarser level, the index it injects from on this level.

use std::ops::Range;
use std::sync::Arc;

use crate::application::{Application, IdentityTransfer, SpatialTransfer};
use crate::error::{MgritError, Result};
use crate::vector::StateVector;

/// Temporal coarsening factors: one factor for all levels, or one per level pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coarsening {
    Uniform(usize),
    PerLevel(Vec<usize>),
}

impl Coarsening {
    fn factor(&self, level: usize) -> Option<usize> {
        match self {
            Coarsening::Uniform(m) => Some(*m),
            Coarsening::PerLevel(ms) => ms.get(level).copied(),
        }
    }
}

/// One level of the hierarchy.
pub struct LevelProblem<A> {
    app: A,
    cf_map: Vec<usize>,
    f_blocks: Vec<Range<usize>>,
    is_c: Vec<bool>,
}

impl<A: Application> LevelProblem<A> {
    fn new(app: A, cf_map: Vec<usize>) -> Self {
        let n = app.time_grid().len();
        let f_blocks = cf_splitting(n, &cf_map);
        let mut is_c = vec![false; n];
        for &i in &cf_map {
            is_c[i] = true;
        }
        Self {
            app,
            cf_map,
            f_blocks,
            is_c,
        }
    }

    pub fn app(&self) -> &A {
        &self.app
    }

    pub fn len(&self) -> usize {
        self.is_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_c.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        self.app.time_grid().points()
    }

    /// Indices on this level kept by the next coarser level. On the coarsest
    /// level every point counts as a C-point.
    pub fn cf_map(&self) -> &[usize] {
        &self.cf_map
    }

    pub fn f_blocks(&self) -> &[Range<usize>] {
        &self.f_blocks
    }

    pub fn is_c_point(&self, i: usize) -> bool {
        self.is_c[i]
    }
}

/// Ordered list of levels, index 0 finest, plus the spatial transfer for each
/// adjacent pair of levels.
pub struct Hierarchy<A: Application> {
    levels: Vec<LevelProblem<A>>,
    factors: Vec<Option<usize>>,
    transfers: Vec<Arc<dyn SpatialTransfer<A::Vector>>>,
    spatial_coarsening: bool,
}

impl<A: Application> Hierarchy<A> {
    pub fn levels(&self) -> &[LevelProblem<A>] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &LevelProblem<A> {
        &self.levels[l]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }

    /// Uniform factor between level `l` and `l + 1`, if the coarse grid is
    /// every m-th point of the fine one.
    pub fn factor(&self, l: usize) -> Option<usize> {
        self.factors.get(l).copied().flatten()
    }

    /// Transfer between level `l` and `l + 1`.
    pub fn transfer(&self, l: usize) -> &dyn SpatialTransfer<A::Vector> {
        self.transfers[l].as_ref()
    }

    pub fn has_spatial_coarsening(&self) -> bool {
        self.spatial_coarsening
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    /// Install spatial transfers, one per adjacent level pair.
    pub fn with_transfers(
        mut self,
        transfers: Vec<Arc<dyn SpatialTransfer<A::Vector>>>,
    ) -> Result<Self> {
        if transfers.len() != self.levels.len() - 1 {
            return Err(MgritError::Hierarchy {
                level: 0,
                reason: format!(
                    "expected {} spatial transfers, got {}",
                    self.levels.len() - 1,
                    transfers.len()
                ),
            });
        }
        self.transfers = transfers;
        self.spatial_coarsening = true;
        Ok(self)
    }

    fn from_levels(
        apps: Vec<A>,
        cf_maps: Vec<Vec<usize>>,
        factors: Vec<Option<usize>>,
    ) -> Result<Self> {
        for (l, app) in apps.iter().enumerate() {
            let (a, b) = (
                app.vector_template().packed_len(),
                app.vector_t_start().packed_len(),
            );
            if a != b {
                return Err(MgritError::Hierarchy {
                    level: l,
                    reason: format!(
                        "vector_template packs to {a} values but vector_t_start to {b}"
                    ),
                });
            }
        }
        let transfers: Vec<Arc<dyn SpatialTransfer<A::Vector>>> = (1..apps.len())
            .map(|_| Arc::new(IdentityTransfer) as Arc<dyn SpatialTransfer<A::Vector>>)
            .collect();
        let levels = apps
            .into_iter()
            .zip(cf_maps)
            .map(|(app, cf)| LevelProblem::new(app, cf))
            .collect();
        Ok(Self {
            levels,
            factors,
            transfers,
            spatial_coarsening: false,
        })
    }

    /// Fails when adjacent levels differ in spatial size but no transfers
    /// were installed.
    pub(crate) fn check_spatial_shapes(&self) -> Result<()> {
        if self.spatial_coarsening {
            for l in 0..self.levels.len() - 1 {
                let fine = self.levels[l].app.vector_template();
                let coarse = self.levels[l + 1].app.vector_template();
                let mismatch = |e: MgritError| MgritError::Hierarchy {
                    level: l + 1,
                    reason: format!("spatial transfer does not fit the level sizes: {e}"),
                };
                let r = self.transfers[l].restrict(fine).map_err(mismatch)?;
                let p = self.transfers[l].interpolate(coarse).map_err(mismatch)?;
                if r.packed_len() != coarse.packed_len() || p.packed_len() != fine.packed_len() {
                    return Err(MgritError::Hierarchy {
                        level: l + 1,
                        reason: format!(
                            "spatial transfer maps {} to {} values, level sizes are {} and {}",
                            fine.packed_len(),
                            r.packed_len(),
                            fine.packed_len(),
                            coarse.packed_len()
                        ),
                    });
                }
            }
            return Ok(());
        }
        let n0 = self.levels[0].app.vector_template().packed_len();
        for (l, level) in self.levels.iter().enumerate().skip(1) {
            let n = level.app.vector_template().packed_len();
            if n != n0 {
                return Err(MgritError::Hierarchy {
                    level: l,
                    reason: format!(
                        "spatial size {n} differs from finest size {n0} and no transfers were given"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Maximal runs of F-points between consecutive C-points, including a trailing
/// run after the last C-point.
pub fn cf_splitting(fine_count: usize, coarse_indices: &[usize]) -> Vec<Range<usize>> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for &c in coarse_indices {
        if c > start {
            blocks.push(start..c);
        }
        start = c + 1;
    }
    if start < fine_count {
        blocks.push(start..fine_count);
    }
    blocks
}

/// Build `levels` levels where level `l` keeps every `m_l`-th point of level
/// `l - 1`, and each coarse application is `problem` re-discretized on the
/// coarse grid.
pub fn build_uniform_hierarchy<A: Application>(
    problem: A,
    levels: usize,
    coarsening: &Coarsening,
) -> Result<Hierarchy<A>> {
    if levels == 0 {
        return Err(MgritError::Hierarchy {
            level: 0,
            reason: "at least one level is required".into(),
        });
    }
    if let Coarsening::PerLevel(ms) = coarsening {
        if ms.len() != levels - 1 {
            return Err(MgritError::Hierarchy {
                level: 0,
                reason: format!(
                    "{} levels need {} coarsening factors, got {}",
                    levels,
                    levels - 1,
                    ms.len()
                ),
            });
        }
    }

    let mut apps = vec![problem];
    let mut cf_maps = Vec::new();
    let mut factors = Vec::new();
    for l in 1..levels {
        let m = coarsening.factor(l - 1).expect("length checked above");
        if m < 2 {
            return Err(MgritError::Hierarchy {
                level: l,
                reason: format!("coarsening factor must be at least 2, got {m}"),
            });
        }
        let fine = apps[l - 1].time_grid();
        let n_fine = fine.len();
        let cf: Vec<usize> = (0..n_fine).step_by(m).collect();
        if cf.len() < 2 {
            return Err(MgritError::Hierarchy {
                level: l,
                reason: format!(
                    "coarsening {} points by factor {m} leaves {} point(s); at least 2 are required",
                    n_fine,
                    cf.len()
                ),
            });
        }
        let grid = fine.select(&cf)?;
        let coarse = apps[l - 1].with_time_grid(grid);
        cf_maps.push(cf);
        factors.push(Some(m));
        apps.push(coarse);
    }
    let n_last = apps[levels - 1].time_grid().len();
    cf_maps.push((0..n_last).collect());
    Hierarchy::from_levels(apps, cf_maps, factors)
}

/// Build a hierarchy from explicitly constructed per-level problems. Each
/// level's time points must be a proper subset of the previous level's and
/// share its start time.
pub fn build_hierarchy_from_grids<A: Application>(apps: Vec<A>) -> Result<Hierarchy<A>> {
    if apps.is_empty() {
        return Err(MgritError::Hierarchy {
            level: 0,
            reason: "at least one level is required".into(),
        });
    }
    let mut cf_maps = Vec::with_capacity(apps.len());
    let mut factors = Vec::with_capacity(apps.len());
    for l in 1..apps.len() {
        let fine = apps[l - 1].time_grid().points();
        let coarse = apps[l].time_grid().points();
        if coarse.len() >= fine.len() {
            return Err(MgritError::Hierarchy {
                level: l,
                reason: format!(
                    "level has {} points, not fewer than the {} of the finer level",
                    coarse.len(),
                    fine.len()
                ),
            });
        }
        let cf = match_subset(fine, coarse).map_err(|t| MgritError::Hierarchy {
            level: l,
            reason: format!("time value {t} is not a point of level {}", l - 1),
        })?;
        if cf[0] != 0 {
            return Err(MgritError::Hierarchy {
                level: l,
                reason: format!("first time value {} is not the start time", coarse[0]),
            });
        }
        factors.push(uniform_factor(&cf));
        cf_maps.push(cf);
    }
    let n_last = apps[apps.len() - 1].time_grid().len();
    cf_maps.push((0..n_last).collect());
    Hierarchy::from_levels(apps, cf_maps, factors)
}

/// Indices of `coarse` within `fine` by exact value match; both sorted.
fn match_subset(fine: &[f64], coarse: &[f64]) -> std::result::Result<Vec<usize>, f64> {
    let mut out = Vec::with_capacity(coarse.len());
    let mut j = 0;
    for &t in coarse {
        while j < fine.len() && fine[j] < t {
            j += 1;
        }
        if j == fine.len() || fine[j] != t {
            return Err(t);
        }
        out.push(j);
        j += 1;
    }
    Ok(out)
}

fn uniform_factor(cf: &[usize]) -> Option<usize> {
    let m = cf.get(1)? - cf[0];
    cf.windows(2).all(|w| w[1] - w[0] == m).then_some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::Dahlquist;
    use crate::grid::TimeGrid;

    fn dahlquist(n: usize) -> Dahlquist {
        Dahlquist::new(-1.0, TimeGrid::uniform(0.0, 5.0, n).unwrap())
    }

    #[test]
    fn listing_two_coarse_level_has_51_points() {
        let h = build_uniform_hierarchy(dahlquist(101), 2, &Coarsening::Uniform(2)).unwrap();
        assert_eq!(h.level_sizes(), vec![101, 51]);
        assert_eq!(h.factor(0), Some(2));
    }

    #[test]
    fn thirteen_points_factor_four() {
        let h = build_uniform_hierarchy(dahlquist(13), 2, &Coarsening::Uniform(4)).unwrap();
        assert_eq!(h.level(0).cf_map(), &[0, 4, 8, 12]);
        assert_eq!(h.level(0).f_blocks(), &[1..4, 5..8, 9..12]);
    }

    #[test]
    fn single_level() {
        let h = build_uniform_hierarchy(dahlquist(10), 1, &Coarsening::Uniform(2)).unwrap();
        assert_eq!(h.num_levels(), 1);
        assert_eq!(h.level(0).cf_map().len(), 10);
        assert!(h.level(0).f_blocks().is_empty());
    }

    #[test]
    fn exhausted_coarsening_names_level() {
        let err = build_uniform_hierarchy(
            dahlquist(1025),
            5,
            &Coarsening::PerLevel(vec![32, 16, 4, 4]),
        )
        .err()
        .unwrap();
        match err {
            MgritError::Hierarchy { level, .. } => assert_eq!(level, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn factor_one_rejected() {
        assert!(build_uniform_hierarchy(dahlquist(9), 2, &Coarsening::Uniform(1)).is_err());
        let a = dahlquist(9);
        let b = dahlquist(9);
        assert!(build_hierarchy_from_grids(vec![a, b]).is_err());
    }

    #[test]
    fn per_level_schedule_on_16385_points() {
        // floor(N/m)+1 on intervals, repeated: 16384/32 = 512, 512/16 = 32, 32/4 = 8, 8/4 = 2.
        let h = build_uniform_hierarchy(
            dahlquist(16385),
            5,
            &Coarsening::PerLevel(vec![32, 16, 4, 4]),
        )
        .unwrap();
        assert_eq!(h.level_sizes(), vec![16385, 513, 33, 9, 3]);
    }

    #[test]
    fn from_grids_subset_violation() {
        let fine = dahlquist(11);
        let coarse = Dahlquist::new(-1.0, TimeGrid::new(vec![0.0, 2.5, 4.9]).unwrap());
        let err = build_hierarchy_from_grids(vec![fine, coarse])
            .err()
            .unwrap();
        let msg = err.to_string();
        assert!(msg.contains("4.9"), "{msg}");
        assert!(msg.contains("level 1"), "{msg}");
    }

    #[test]
    fn from_grids_non_uniform_and_trailing_tail() {
        let fine = dahlquist(6);
        let pts = fine.time_grid().points().to_vec();
        let coarse = Dahlquist::new(-1.0, TimeGrid::new(vec![pts[0], pts[4]]).unwrap());
        let h = build_hierarchy_from_grids(vec![fine, coarse]).unwrap();
        assert_eq!(h.level(0).cf_map(), &[0, 4]);
        assert_eq!(h.level(0).f_blocks(), &[1..4, 5..6]);
        assert_eq!(h.factor(0), Some(4));
        let single = build_hierarchy_from_grids(vec![dahlquist(4)]).unwrap();
        assert_eq!(single.num_levels(), 1);
    }

    #[test]
    fn cf_splitting_examples() {
        assert_eq!(cf_splitting(13, &[0, 4, 8, 12]), vec![1..4, 5..8, 9..12]);
        assert_eq!(cf_splitting(6, &[0, 4]), vec![1..4, 5..6]);
        assert!(cf_splitting(2, &[0, 1]).is_empty());
    }
}
