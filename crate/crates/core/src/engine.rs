//! The MGRIT-FAS iteration.
//!
//! Every level stores, for the time points this worker owns, the current
//! approximation `u`, on coarse levels a snapshot `v` of the restricted
//! approximation, and the FAS right-hand side `g`. All levels use the
//! per-point form `u_i - Φ(u_{i-1}) = g_i` (with `u_0 = g_0`), so relaxation,
//! the coarsest-level solve and the residual share one code path. On the
//! finest level `g_0` is the initial condition and every other `g_i` is zero,
//! stored as `None`.
//!
//! The engine sees only its own slice of each level plus values received from
//! the left neighbour, and runs unchanged on one worker or many.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::application::Application;
use crate::error::{MgritError, Result};
use crate::hierarchy::Hierarchy;
use crate::runtime::{Phase, SerialTransport, Tag, TimeDecomposition, Transport};
use crate::vector::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleType {
    V,
    F,
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleType::V => write!(f, "V"),
            CycleType::F => write!(f, "F"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgritSettings {
    pub cycle_type: CycleType,
    /// Number of CF sweeps after the leading F sweep (0 = F, 1 = FCF, 2 = FCFCF).
    pub cf_iter: usize,
    /// Stop once the space-time residual drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub nested_iteration: bool,
    /// Seed for the random initial guess used without nested iteration.
    pub random_seed: u64,
    /// Omit the leading finest-level F sweep from the third iteration on; its
    /// updates were already made by the previous interpolation.
    pub skip_redundant_f_relax: bool,
    /// Record a per-operation trace.
    pub trace: bool,
}

impl Default for MgritSettings {
    fn default() -> Self {
        Self {
            cycle_type: CycleType::V,
            cf_iter: 1,
            tol: 1e-7,
            max_iter: 100,
            nested_iteration: true,
            random_seed: 0,
            skip_redundant_f_relax: true,
            trace: false,
        }
    }
}

impl MgritSettings {
    pub fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(MgritError::Settings(format!(
                "tol must be positive and finite, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(MgritError::Settings("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Statistics of one solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Space-time residual after every completed iteration.
    pub residual_history: Vec<f64>,
    /// Residual of the initial guess, after setup.
    pub initial_residual: f64,
    /// Seconds since the start of the solve phase after each iteration.
    pub cumulative_seconds: Vec<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub converged: bool,
}

impl SolveInfo {
    pub fn final_residual(&self) -> f64 {
        self.residual_history
            .last()
            .copied()
            .unwrap_or(self.initial_residual)
    }
}

/// One line of the operation trace: `level,op,first_index,last_index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub level: usize,
    pub op: &'static str,
    pub first: usize,
    pub last: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.level, self.op, self.first, self.last)
    }
}

/// Sequence of levels visited, read off the restrict / coarse_solve /
/// interpolate events of a trace.
pub fn cycle_shape(trace: &[TraceEvent]) -> Vec<usize> {
    let mut shape: Vec<usize> = Vec::new();
    let mut visit = |level: usize| {
        if shape.last() != Some(&level) {
            shape.push(level);
        }
    };
    for e in trace {
        match e.op {
            "restrict" => {
                visit(e.level - 1);
                visit(e.level);
            }
            "coarse_solve" => visit(e.level),
            "interpolate" => {
                visit(e.level + 1);
                visit(e.level);
            }
            _ => {}
        }
    }
    shape
}

/// Deterministic random vector for time index `index`, independent of which
/// worker draws it.
pub fn random_guess<V: StateVector>(template: &V, seed: u64, index: usize) -> V {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    template.clone_rand(&mut rng)
}

/// Per-level storage for the points `[lo, hi)` owned by this worker.
#[derive(Debug, Clone)]
pub struct LevelState<V> {
    lo: usize,
    hi: usize,
    u: Vec<V>,
    v: Vec<V>,
    g: Vec<Option<V>>,
}

impl<V: StateVector> LevelState<V> {
    fn new(lo: usize, hi: usize, template: &V, initial: &V, with_v: bool) -> Self {
        let len = hi - lo;
        let mut u: Vec<V> = (0..len).map(|_| template.clone_zero()).collect();
        let mut g: Vec<Option<V>> = vec![None; len];
        if lo == 0 && len > 0 {
            u[0] = initial.clone();
            g[0] = Some(initial.clone());
        }
        let v = if with_v { u.clone() } else { Vec::new() };
        Self { lo, hi, u, v, g }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.lo..self.hi
    }

    pub fn owns(&self, i: usize) -> bool {
        (self.lo..self.hi).contains(&i)
    }

    /// Current approximation at the owned points.
    pub fn u(&self) -> &[V] {
        &self.u
    }

    /// Restricted snapshot (coarse levels only).
    pub fn v(&self) -> &[V] {
        &self.v
    }

    /// FAS right-hand side; `None` is zero.
    pub fn g(&self) -> &[Option<V>] {
        &self.g
    }

    fn at(&self, i: usize) -> &V {
        &self.u[i - self.lo]
    }

    fn set(&mut self, i: usize, value: V) {
        let k = i - self.lo;
        self.u[k] = value;
    }

    fn rhs(&self, i: usize) -> Option<&V> {
        self.g[i - self.lo].as_ref()
    }
}

fn plus_rhs<V: StateVector>(phi: V, g: Option<&V>) -> V {
    match g {
        Some(g) => phi.add(g),
        None => phi,
    }
}

/// `g_i - (u_i - Φ(u_{i-1}))`, computed as `(Φ(u_{i-1}) + g_i) - u_i`.
fn point_residual<A: Application>(
    app: &A,
    prev: &A::Vector,
    current: &A::Vector,
    g: Option<&A::Vector>,
    t_prev: f64,
    t: f64,
) -> Result<A::Vector> {
    let phi = app.step(prev, t_prev, t)?;
    Ok(plus_rhs(phi, g).sub(current))
}

/// Forward substitution `u_0 = g_0`, `u_i = Φ(u_{i-1}) + g_i`.
fn forward_solve<A: Application>(
    app: &A,
    level: usize,
    g: &[Option<A::Vector>],
) -> Result<Vec<A::Vector>> {
    let t = app.time_grid().points();
    let mut u = Vec::with_capacity(g.len());
    u.push(
        g[0].clone()
            .unwrap_or_else(|| app.vector_template().clone_zero()),
    );
    for i in 1..g.len() {
        let phi = app
            .step(&u[i - 1], t[i - 1], t[i])
            .map_err(|e| e.at(level, "coarse_solve", i))?;
        u.push(plus_rhs(phi, g[i].as_ref()));
    }
    Ok(u)
}

/// Per-point residual norms of the finest-level system
/// (`u_0 = initial condition`, `u_i - Φ(u_{i-1}) = 0`) at `indices`.
pub fn residual_norms_at<A: Application>(
    app: &A,
    u: &[A::Vector],
    indices: &[usize],
) -> Result<Vec<f64>> {
    let t = app.time_grid().points();
    if u.len() != t.len() {
        return Err(MgritError::Structure {
            expected: t.len(),
            actual: u.len(),
        });
    }
    indices
        .iter()
        .map(|&i| {
            if i == 0 {
                Ok(app.vector_t_start().sub(&u[0]).norm())
            } else {
                point_residual(app, &u[i - 1], &u[i], None, t[i - 1], t[i]).map(|r| r.norm())
            }
        })
        .collect()
}

fn pack_all<V: StateVector>(values: &[V]) -> Vec<f64> {
    values.iter().flat_map(|v| v.pack()).collect()
}

fn unpack_all<V: StateVector>(template: &V, buf: &[f64], count: usize) -> Result<Vec<V>> {
    let n = template.packed_len();
    if buf.len() != n * count {
        return Err(MgritError::Structure {
            expected: n * count,
            actual: buf.len(),
        });
    }
    buf.chunks(n.max(1))
        .take(count)
        .map(|c| template.unpack(c))
        .collect()
}

/// Optional vectors are framed with a leading 0/1 flag per entry.
fn pack_optional<V: StateVector>(values: &[Option<V>]) -> Vec<f64> {
    let mut out = Vec::new();
    for v in values {
        match v {
            Some(v) => {
                out.push(1.0);
                out.extend(v.pack());
            }
            None => out.push(0.0),
        }
    }
    out
}

fn unpack_optional<V: StateVector>(template: &V, buf: &[f64]) -> Result<Vec<Option<V>>> {
    let n = template.packed_len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < buf.len() {
        let flag = buf[k];
        k += 1;
        if flag == 0.0 {
            out.push(None);
        } else {
            let end = k + n;
            if end > buf.len() {
                return Err(MgritError::Structure {
                    expected: end,
                    actual: buf.len(),
                });
            }
            out.push(Some(template.unpack(&buf[k..end])?));
            k = end;
        }
    }
    Ok(out)
}

/// MGRIT-FAS solver for one time worker.
pub struct Mgrit<'h, A: Application> {
    hierarchy: &'h Hierarchy<A>,
    settings: MgritSettings,
    comm: Box<dyn Transport + 'h>,
    decomposition: TimeDecomposition,
    levels: Vec<LevelState<A::Vector>>,
    trace: Vec<TraceEvent>,
    sweeps: BTreeMap<Tag, usize>,
}

impl<'h, A: Application> Mgrit<'h, A> {
    /// Single-worker solver.
    pub fn new(hierarchy: &'h Hierarchy<A>, settings: MgritSettings) -> Result<Self> {
        Self::with_transport(hierarchy, settings, Box::new(SerialTransport))
    }

    pub fn with_transport(
        hierarchy: &'h Hierarchy<A>,
        settings: MgritSettings,
        comm: Box<dyn Transport + 'h>,
    ) -> Result<Self> {
        settings.validate()?;
        hierarchy.check_spatial_shapes()?;
        let decomposition = TimeDecomposition::for_hierarchy(hierarchy, comm.size())?;
        let rank = comm.rank();
        let levels = hierarchy
            .levels()
            .iter()
            .enumerate()
            .map(|(l, level)| {
                let r = decomposition.range(l, rank);
                let app = level.app();
                LevelState::new(
                    r.start,
                    r.end,
                    app.vector_template(),
                    app.vector_t_start(),
                    l > 0,
                )
            })
            .collect();
        Ok(Self {
            hierarchy,
            settings,
            comm,
            decomposition,
            levels,
            trace: Vec::new(),
            sweeps: BTreeMap::new(),
        })
    }

    pub fn settings(&self) -> &MgritSettings {
        &self.settings
    }

    pub fn decomposition(&self) -> &TimeDecomposition {
        &self.decomposition
    }

    pub fn level_state(&self, l: usize) -> &LevelState<A::Vector> {
        &self.levels[l]
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Relaxation/residual sweeps performed, keyed like transport messages.
    pub fn sweep_counts(&self) -> &BTreeMap<Tag, usize> {
        &self.sweeps
    }

    pub fn transport_stats(&self) -> crate::runtime::TransportStats {
        self.comm.stats()
    }

    pub fn rank(&self) -> usize {
        self.comm.rank()
    }

    fn record(&mut self, level: usize, op: &'static str, first: usize, last: usize) {
        if self.settings.trace {
            self.trace.push(TraceEvent {
                level,
                op,
                first,
                last,
            });
        }
    }

    fn count_sweep(&mut self, level: usize, phase: Phase) {
        *self.sweeps.entry(Tag::new(level, phase)).or_default() += 1;
    }

    /// Overwrite the owned part of the finest level from a full-length array.
    /// Index 0 is left at the initial condition.
    pub fn set_finest(&mut self, values: &[A::Vector]) -> Result<()> {
        let n = self.hierarchy.level(0).len();
        if values.len() != n {
            return Err(MgritError::Structure {
                expected: n,
                actual: values.len(),
            });
        }
        let level = &mut self.levels[0];
        for i in level.range() {
            if i > 0 {
                level.set(i, values[i].clone());
            }
        }
        Ok(())
    }

    /// Random initial guess at every finest point except the initial one.
    pub fn set_random_guess(&mut self) {
        let template = self.hierarchy.level(0).app().vector_template().clone();
        let seed = self.settings.random_seed;
        let level = &mut self.levels[0];
        for i in level.range() {
            if i > 0 {
                level.set(i, random_guess(&template, seed, i));
            }
        }
    }

    // ---- boundary exchange -------------------------------------------------

    /// Does the first owned point on `level` need its left neighbour's value in
    /// this phase?
    fn needs_left(&self, level: usize, phase: Phase, first: usize) -> bool {
        let lp = self.hierarchy.level(level);
        first > 0
            && match phase {
                Phase::FRelax => !lp.is_c_point(first),
                Phase::CRelax | Phase::Residual => lp.is_c_point(first),
                Phase::CoarseBoundary => true,
                Phase::Collective => false,
            }
    }

    fn send_right(&mut self, level: usize, phase: Phase) -> Result<()> {
        let st = &self.levels[level];
        let n = self.hierarchy.level(level).len();
        if st.lo == st.hi || st.hi >= n || !self.needs_left(level, phase, st.hi) {
            return Ok(());
        }
        let to = self.decomposition.owner(level, st.hi);
        let data = st.at(st.hi - 1).pack();
        self.comm.send(to, Tag::new(level, phase), data)
    }

    fn recv_left(&mut self, level: usize, phase: Phase) -> Result<Option<A::Vector>> {
        let st = &self.levels[level];
        if st.lo == st.hi || !self.needs_left(level, phase, st.lo) {
            return Ok(None);
        }
        let from = self.decomposition.owner(level, st.lo - 1);
        let buf = self.comm.recv(from, Tag::new(level, phase))?;
        let template = self.hierarchy.level(level).app().vector_template();
        template.unpack(&buf).map(Some)
    }

    /// Send the last owned value right and receive the left neighbour's value,
    /// for phases where the sent value is not modified by the sweep.
    pub fn exchange_left_boundary(
        &mut self,
        level: usize,
        phase: Phase,
    ) -> Result<Option<A::Vector>> {
        self.send_right(level, phase)?;
        self.recv_left(level, phase)
    }

    fn prev_value<'a>(
        st: &'a LevelState<A::Vector>,
        ghost: &'a Option<A::Vector>,
        i: usize,
    ) -> &'a A::Vector {
        if i == st.lo {
            ghost.as_ref().expect("left boundary value was exchanged")
        } else {
            st.at(i - 1)
        }
    }

    // ---- relaxation ----------------------------------------------------------

    /// Propagate from every C-point through the following F-points.
    pub fn f_relax(&mut self, level: usize) -> Result<()> {
        let lp = self.hierarchy.level(level);
        if let (Some(first), Some(last)) = (lp.f_blocks().first(), lp.f_blocks().last()) {
            self.record(level, "f_relax", first.start, last.end - 1);
        }
        self.count_sweep(level, Phase::FRelax);
        let (lo, hi) = (self.levels[level].lo, self.levels[level].hi);
        if lo == hi {
            return Ok(());
        }
        // The last owned value is final before the sweep if it is a C-point.
        let early = lp.is_c_point(hi - 1);
        if early {
            self.send_right(level, Phase::FRelax)?;
        }
        let ghost = self.recv_left(level, Phase::FRelax)?;
        let app = lp.app();
        let t = lp.times();
        let st = &mut self.levels[level];
        for i in lo..hi {
            if lp.is_c_point(i) {
                continue;
            }
            let prev = Self::prev_value(st, &ghost, i);
            let phi = app
                .step(prev, t[i - 1], t[i])
                .map_err(|e| e.at(level, "f_relax", i))?;
            let value = plus_rhs(phi, st.rhs(i));
            st.set(i, value);
        }
        if !early {
            self.send_right(level, Phase::FRelax)?;
        }
        Ok(())
    }

    /// Update every C-point (except index 0) from its preceding point.
    pub fn c_relax(&mut self, level: usize) -> Result<()> {
        let lp = self.hierarchy.level(level);
        let cf = lp.cf_map();
        if cf.len() > 1 {
            self.record(level, "c_relax", cf[1], cf[cf.len() - 1]);
        }
        self.count_sweep(level, Phase::CRelax);
        let ghost = self.exchange_left_boundary(level, Phase::CRelax)?;
        let app = lp.app();
        let t = lp.times();
        let st = &self.levels[level];
        // All new values are computed from the values before the sweep.
        let mut updates = Vec::new();
        for i in st.range() {
            if i == 0 || !lp.is_c_point(i) {
                continue;
            }
            let prev = Self::prev_value(st, &ghost, i);
            let phi = app
                .step(prev, t[i - 1], t[i])
                .map_err(|e| e.at(level, "c_relax", i))?;
            updates.push((i, plus_rhs(phi, st.rhs(i))));
        }
        let st = &mut self.levels[level];
        for (i, value) in updates {
            st.set(i, value);
        }
        Ok(())
    }

    /// F-relaxation followed by `cf_iter` rounds of C- then F-relaxation.
    /// With `leading_f = false` the first F sweep is left out.
    pub fn relax(&mut self, level: usize, cf_iter: usize, leading_f: bool) -> Result<()> {
        if leading_f {
            self.f_relax(level)?;
        }
        for _ in 0..cf_iter {
            self.c_relax(level)?;
            self.f_relax(level)?;
        }
        Ok(())
    }

    // ---- residual --------------------------------------------------------------

    /// Residual vectors at the owned C-points of `level` (index 0 excluded), in
    /// index order.
    fn c_point_residuals(&mut self, level: usize) -> Result<Vec<(usize, A::Vector)>> {
        self.count_sweep(level, Phase::Residual);
        let ghost = self.exchange_left_boundary(level, Phase::Residual)?;
        let lp = self.hierarchy.level(level);
        let app = lp.app();
        let t = lp.times();
        let st = &self.levels[level];
        let mut out = Vec::new();
        for i in st.range() {
            if i == 0 || !lp.is_c_point(i) {
                continue;
            }
            let prev = Self::prev_value(st, &ghost, i);
            let r = point_residual(app, prev, st.at(i), st.rhs(i), t[i - 1], t[i])
                .map_err(|e| e.at(level, "residual", i))?;
            out.push((i, r));
        }
        Ok(out)
    }

    /// Norms of the finest-level residual at the owned C-points, index 0
    /// (always zero) included when owned.
    pub fn residual_at_c_points(&mut self) -> Result<Vec<f64>> {
        let lp = self.hierarchy.level(0);
        let cf = lp.cf_map();
        self.record(0, "residual", 0, cf[cf.len() - 1]);
        let mut norms = Vec::new();
        if self.levels[0].owns(0) {
            let st = &self.levels[0];
            let g0 = st.rhs(0).cloned().unwrap_or_else(|| st.at(0).clone_zero());
            norms.push(g0.sub(st.at(0)).norm());
        }
        norms.extend(
            self.c_point_residuals(0)?
                .into_iter()
                .map(|(_, r)| r.norm()),
        );
        Ok(norms)
    }

    /// Global space-time residual `(Σ ‖r_ic‖²)^½`. The squares are summed by
    /// one worker in global index order, so the value does not depend on the
    /// number of workers.
    pub fn residual_norm(&mut self) -> Result<f64> {
        let local = self.residual_at_c_points()?;
        if self.comm.size() == 1 {
            return Ok(residual_norm(&local));
        }
        let root = self.decomposition.coarse_root();
        let gathered = self.comm.gather(root, local)?;
        let value = gathered.map(|parts| vec![residual_norm(&parts.concat())]);
        let result = self.comm.broadcast(root, value)?;
        Ok(result[0])
    }

    // ---- grid transfer -----------------------------------------------------

    /// Inject the approximation and its residual from `level` to `level + 1`
    /// and set the coarse FAS right-hand side so that the coarse system reads
    /// `u_i - Φ_c(u_{i-1}) = g_i`.
    pub fn restrict_fas(&mut self, level: usize) -> Result<()> {
        let coarse = level + 1;
        let n_coarse = self.hierarchy.level(coarse).len();
        self.record(coarse, "restrict", 0, n_coarse - 1);
        let residuals = self.c_point_residuals(level)?;
        let transfer = self.hierarchy.transfer(level);
        let spatial = self.hierarchy.has_spatial_coarsening();
        let cf = self.hierarchy.level(level).cf_map();

        {
            let (fine_levels, coarse_levels) = self.levels.split_at_mut(coarse);
            let fine = &fine_levels[level];
            let cst = &mut coarse_levels[0];
            for ic in cst.range() {
                let value = fine.at(cf[ic]);
                let value = if spatial {
                    transfer
                        .restrict(value)
                        .map_err(|e| e.at(level, "restrict", cf[ic]))?
                } else {
                    value.clone()
                };
                cst.set(ic, value);
            }
            cst.v = cst.u.clone();
        }

        self.count_sweep(coarse, Phase::CoarseBoundary);
        let ghost = self.exchange_left_boundary(coarse, Phase::CoarseBoundary)?;
        let capp = self.hierarchy.level(coarse).app();
        let tc = self.hierarchy.level(coarse).times();
        let cst = &self.levels[coarse];
        let mut residuals = residuals.into_iter().peekable();
        let mut g = Vec::with_capacity(cst.hi - cst.lo);
        for ic in cst.range() {
            if ic == 0 {
                g.push(Some(cst.at(0).clone()));
                continue;
            }
            let (i, r) = residuals
                .next()
                .expect("every owned coarse point has a fine residual");
            debug_assert_eq!(i, cf[ic]);
            let r = if spatial {
                transfer
                    .restrict(&r)
                    .map_err(|e| e.at(level, "restrict", i))?
            } else {
                r
            };
            let prev = Self::prev_value(cst, &ghost, ic);
            let phi = capp
                .step(prev, tc[ic - 1], tc[ic])
                .map_err(|e| e.at(coarse, "restrict", ic))?;
            g.push(Some(r.add(&cst.at(ic).sub(&phi))));
        }
        debug_assert!(residuals.peek().is_none());
        self.levels[coarse].g = g;
        Ok(())
    }

    /// Sequential forward solve of the coarsest level, run by one worker after
    /// gathering the right-hand side; each worker gets back its own slice.
    pub fn coarse_solve(&mut self, level: usize) -> Result<()> {
        let n = self.hierarchy.level(level).len();
        self.record(level, "coarse_solve", 0, n - 1);
        let app = self.hierarchy.level(level).app();
        if self.comm.size() == 1 {
            let u = forward_solve(app, level, &self.levels[level].g)?;
            self.levels[level].u = u;
            return Ok(());
        }
        let template = app.vector_template();
        let root = self.decomposition.coarse_root();
        let local = pack_optional(&self.levels[level].g);
        let gathered = self.comm.gather(root, local)?;
        let parts = match gathered {
            Some(parts) => {
                let mut g = Vec::with_capacity(n);
                for p in &parts {
                    g.extend(unpack_optional(template, p)?);
                }
                if g.len() != n {
                    return Err(MgritError::Structure {
                        expected: n,
                        actual: g.len(),
                    });
                }
                let u = forward_solve(app, level, &g)?;
                let parts = self
                    .decomposition
                    .ranges(level)
                    .iter()
                    .map(|r| pack_all(&u[r.clone()]))
                    .collect();
                Some(parts)
            }
            None => None,
        };
        let mine = self.comm.scatter(root, parts)?;
        let st = &mut self.levels[level];
        st.u = unpack_all(template, &mine, st.hi - st.lo)?;
        Ok(())
    }

    /// Add the coarse-grid error `u - v` of `level + 1` at the C-points of
    /// `level`, then F-relax (ideal interpolation).
    pub fn correct_and_interpolate(&mut self, level: usize) -> Result<()> {
        let coarse = level + 1;
        let cf = self.hierarchy.level(level).cf_map();
        self.record(level, "interpolate", 0, cf[cf.len() - 1]);
        let transfer = self.hierarchy.transfer(level);
        let spatial = self.hierarchy.has_spatial_coarsening();
        let (fine_levels, coarse_levels) = self.levels.split_at_mut(coarse);
        let fine = &mut fine_levels[level];
        let cst = &coarse_levels[0];
        for ic in cst.range() {
            if ic == 0 {
                continue;
            }
            let k = ic - cst.lo;
            let e = cst.u[k].sub(&cst.v[k]);
            let e = if spatial {
                transfer
                    .interpolate(&e)
                    .map_err(|err| err.at(level, "interpolate", cf[ic]))?
            } else {
                e
            };
            let i = cf[ic];
            let updated = fine.at(i).add(&e);
            fine.set(i, updated);
        }
        self.f_relax(level)
    }

    /// Replace the C-point values of `level` by the (spatially interpolated)
    /// values of `level + 1`; used by nested iteration.
    fn inject_up(&mut self, level: usize) -> Result<()> {
        let coarse = level + 1;
        let cf = self.hierarchy.level(level).cf_map();
        self.record(level, "interpolate", 0, cf[cf.len() - 1]);
        let transfer = self.hierarchy.transfer(level);
        let spatial = self.hierarchy.has_spatial_coarsening();
        let (fine_levels, coarse_levels) = self.levels.split_at_mut(coarse);
        let fine = &mut fine_levels[level];
        let cst = &coarse_levels[0];
        for ic in cst.range() {
            if ic == 0 {
                continue;
            }
            let value = cst.at(ic);
            let value = if spatial {
                transfer
                    .interpolate(value)
                    .map_err(|e| e.at(level, "interpolate", cf[ic]))?
            } else {
                value.clone()
            };
            fine.set(cf[ic], value);
        }
        self.f_relax(level)
    }

    // ---- cycles --------------------------------------------------------------

    /// One multigrid cycle starting at `level`. `iteration` is 1-based on the
    /// finest level and 0 inside nested iteration.
    pub fn cycle(&mut self, level: usize, cycle_type: CycleType, iteration: usize) -> Result<()> {
        let coarsest = self.hierarchy.coarsest();
        if level == coarsest {
            return self.coarse_solve(level);
        }
        let skip = level == 0 && self.settings.skip_redundant_f_relax && iteration >= 3;
        self.relax(level, self.settings.cf_iter, !skip)?;
        self.restrict_fas(level)?;
        self.cycle(level + 1, cycle_type, iteration)?;
        self.correct_and_interpolate(level)?;
        if level > 0 && cycle_type == CycleType::F {
            self.cycle(level, CycleType::V, iteration)?;
        }
        Ok(())
    }

    pub fn v_cycle(&mut self, level: usize, iteration: usize) -> Result<()> {
        self.cycle(level, CycleType::V, iteration)
    }

    pub fn f_cycle(&mut self, iteration: usize) -> Result<()> {
        self.cycle(0, CycleType::F, iteration)
    }

    /// Coarse-to-fine initial guess: solve the re-discretized problem on the
    /// coarsest level, then on each finer level inject, F-relax and (except
    /// on the finest level) run one V-cycle.
    pub fn nested_iteration(&mut self) -> Result<()> {
        let coarsest = self.hierarchy.coarsest();
        self.coarse_solve(coarsest)?;
        for level in (0..coarsest).rev() {
            self.inject_up(level)?;
            if level > 0 {
                self.v_cycle(level, 0)?;
            }
        }
        Ok(())
    }

    /// Run setup and iterate until the residual drops below `tol`.
    pub fn solve(&mut self) -> Result<SolveInfo> {
        let setup_start = Instant::now();
        let mut info = SolveInfo::default();
        if self.hierarchy.num_levels() == 1 {
            self.coarse_solve(0)?;
            info.initial_residual = self.residual_norm()?;
            info.setup_seconds = setup_start.elapsed().as_secs_f64();
            info.converged = true;
            return Ok(info);
        }
        if self.settings.nested_iteration {
            self.nested_iteration()?;
        } else {
            self.set_random_guess();
        }
        info.initial_residual = self.residual_norm()?;
        if !info.initial_residual.is_finite() {
            return Err(MgritError::Divergence { iteration: 0 });
        }
        info.setup_seconds = setup_start.elapsed().as_secs_f64();

        let solve_start = Instant::now();
        info.converged = info.initial_residual < self.settings.tol;
        let mut k = 0;
        while !info.converged && k < self.settings.max_iter {
            k += 1;
            self.cycle(0, self.settings.cycle_type, k)?;
            let r = self.residual_norm()?;
            if !r.is_finite() {
                return Err(MgritError::Divergence { iteration: k });
            }
            info.residual_history.push(r);
            info.cumulative_seconds
                .push(solve_start.elapsed().as_secs_f64());
            info.converged = r < self.settings.tol;
        }
        info.iterations = k;
        info.solve_seconds = solve_start.elapsed().as_secs_f64();
        Ok(info)
    }

    /// Collect the finest-level solution on rank 0 (`None` elsewhere).
    pub fn gather_finest(&mut self) -> Result<Option<Vec<A::Vector>>> {
        if self.comm.size() == 1 {
            return Ok(Some(self.levels[0].u.clone()));
        }
        let template = self.hierarchy.level(0).app().vector_template();
        let local = pack_all(&self.levels[0].u);
        let gathered = self.comm.gather(0, local)?;
        match gathered {
            None => Ok(None),
            Some(parts) => {
                let mut out = Vec::new();
                for (w, p) in parts.iter().enumerate() {
                    let count = self.decomposition.range(0, w).len();
                    out.extend(unpack_all(template, p, count)?);
                }
                Ok(Some(out))
            }
        }
    }
}

/// Euclidean combination of per-point residual norms, summed in order.
pub fn residual_norm(per_point: &[f64]) -> f64 {
    per_point.iter().map(|r| r * r).sum::<f64>().sqrt()
}

/// Result of a complete solve: statistics, the finest-level solution and, if
/// requested, the operation trace.
#[derive(Debug, Clone)]
pub struct SolveOutcome<V> {
    pub info: SolveInfo,
    pub solution: Vec<V>,
    pub trace: Vec<TraceEvent>,
}

/// Solve on a single worker.
pub fn solve<A: Application>(
    hierarchy: &Hierarchy<A>,
    settings: &MgritSettings,
) -> Result<SolveOutcome<A::Vector>> {
    let mut mgrit = Mgrit::new(hierarchy, settings.clone())?;
    let info = mgrit.solve()?;
    let solution = mgrit.gather_finest()?.expect("single worker is root");
    Ok(SolveOutcome {
        info,
        solution,
        trace: mgrit.trace().to_vec(),
    })
}

/// Result of a threaded solve: rank-0 statistics and solution plus the
/// transport statistics of every worker.
#[derive(Debug, Clone)]
pub struct ParallelOutcome<V> {
    pub outcome: SolveOutcome<V>,
    pub stats: Vec<crate::runtime::TransportStats>,
    /// Sweeps performed per level and phase (identical on every worker).
    pub sweeps: BTreeMap<Tag, usize>,
}

/// Solve with `workers` time workers, each on its own thread, connected by
/// in-process channels.
pub fn solve_with_threads<A: Application>(
    hierarchy: &Hierarchy<A>,
    settings: &MgritSettings,
    workers: usize,
) -> Result<ParallelOutcome<A::Vector>> {
    if workers == 0 {
        return Err(MgritError::Decomposition("need at least one worker".into()));
    }
    if workers == 1 {
        let mut mgrit = Mgrit::new(hierarchy, settings.clone())?;
        let info = mgrit.solve()?;
        let solution = mgrit.gather_finest()?.expect("single worker is root");
        let stats = vec![mgrit.transport_stats()];
        let trace = mgrit.trace().to_vec();
        return Ok(ParallelOutcome {
            outcome: SolveOutcome {
                info,
                solution,
                trace,
            },
            stats,
            sweeps: mgrit.sweep_counts().clone(),
        });
    }
    let transports = crate::runtime::ThreadTransport::mesh(workers);
    type WorkerResult<V> = Result<(
        Option<(SolveOutcome<V>, BTreeMap<Tag, usize>)>,
        crate::runtime::TransportStats,
    )>;
    let results: Vec<WorkerResult<A::Vector>> = std::thread::scope(|scope| {
        let handles: Vec<_> = transports
            .into_iter()
            .map(|comm| {
                scope.spawn(move || {
                    let mut mgrit =
                        Mgrit::with_transport(hierarchy, settings.clone(), Box::new(comm))?;
                    let info = mgrit.solve()?;
                    let solution = mgrit.gather_finest()?;
                    let stats = mgrit.transport_stats();
                    let outcome = solution.map(|solution| {
                        let outcome = SolveOutcome {
                            info,
                            solution,
                            trace: mgrit.trace().to_vec(),
                        };
                        (outcome, mgrit.sweep_counts().clone())
                    });
                    Ok((outcome, stats))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    Err(MgritError::Transport {
                        context: "worker thread".into(),
                        reason: "panicked".into(),
                    })
                })
            })
            .collect()
    });
    // Report the first root-cause error; peers usually fail with a dropped
    // channel as a consequence.
    if results.iter().any(|r| r.is_err()) {
        let mut errors: Vec<MgritError> = results.into_iter().filter_map(|r| r.err()).collect();
        let primary = errors
            .iter()
            .position(|e| !matches!(e, MgritError::Transport { .. }))
            .unwrap_or(0);
        return Err(errors.swap_remove(primary));
    }
    let mut outcome = None;
    let mut stats = Vec::with_capacity(workers);
    for r in results {
        let (o, s) = r?;
        if o.is_some() {
            outcome = o;
        }
        stats.push(s);
    }
    let (outcome, sweeps) = outcome.expect("rank 0 returns the solution");
    Ok(ParallelOutcome {
        outcome,
        stats,
        sweeps,
    })
}
