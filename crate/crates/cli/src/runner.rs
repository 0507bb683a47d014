use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mgrit::apps::{Dahlquist, Heat1D, Heat1DTransfer, Heat2D};
use mgrit::{
    build_hierarchy_from_grids, build_uniform_hierarchy, solve_with_threads, Application,
    GridVector, Hierarchy, MgritError, SolveInfo, SolveOutcome, SpatialTransfer, StateVector,
    TimeGrid, TraceEvent,
};
use thiserror::Error;

use crate::config::{ConfigError, Problem, RunConfig, TransportKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("setup error: {0}")]
    Setup(String),
    #[error("solver error: {0}")]
    Solve(MgritError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Solve(_) | RunError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn setup<T>(r: mgrit::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Setup(e.to_string()))
}

/// What a run produced, for the console report.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub info: SolveInfo,
    pub level_sizes: Vec<usize>,
    pub output_dir: PathBuf,
}

pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    if cfg.transport == TransportKind::Mpi {
        return Err(RunError::Setup(
            "transport `mpi` is not available in this build; use `threads`".into(),
        ));
    }
    if cfg.workers_space != 1 {
        return Err(RunError::Setup(format!(
            "workers_space = {}: the shipped applications are serial in space",
            cfg.workers_space
        )));
    }
    let grid = setup(TimeGrid::uniform(cfg.t_start, cfg.t_stop, cfg.nt))?;
    match cfg.problem {
        Problem::Dahlquist => {
            let app = Dahlquist::new(cfg.lambda, grid);
            let h = setup(build_uniform_hierarchy(app, cfg.levels, &cfg.coarsening()))?;
            execute(&h, cfg)
        }
        Problem::Heat1D => {
            let app = setup(Heat1D::new(cfg.a, cfg.n_x, grid))?;
            let h = setup(build_uniform_hierarchy(app, cfg.levels, &cfg.coarsening()))?;
            if cfg.spatial_coarsening {
                let h = with_spatial_coarsening(&h, cfg)?;
                execute(&h, cfg)
            } else {
                execute(&h, cfg)
            }
        }
        Problem::Heat2D => {
            let app = setup(Heat2D::new(cfg.n_x, cfg.n_y, grid))?;
            let h = setup(build_uniform_hierarchy(app, cfg.levels, &cfg.coarsening()))?;
            execute(&h, cfg)
        }
    }
}

/// Rebuild a Heat1D time hierarchy with one spatial grid per level.
fn with_spatial_coarsening(
    time_only: &Hierarchy<Heat1D>,
    cfg: &RunConfig,
) -> Result<Hierarchy<Heat1D>, RunError> {
    let apps = time_only
        .levels()
        .iter()
        .zip(&cfg.spatial_n_x)
        .map(|(level, &n_x)| Heat1D::new(cfg.a, n_x, level.app().time_grid().clone()))
        .collect::<mgrit::Result<Vec<_>>>();
    let transfers = cfg
        .spatial_n_x
        .windows(2)
        .map(|w| {
            Heat1DTransfer::new(w[0], w[1])
                .map(|t| Arc::new(t) as Arc<dyn SpatialTransfer<GridVector>>)
        })
        .collect::<mgrit::Result<Vec<_>>>();
    let h = setup(build_hierarchy_from_grids(setup(apps)?))?;
    setup(h.with_transfers(setup(transfers)?))
}

fn execute<A: Application>(h: &Hierarchy<A>, cfg: &RunConfig) -> Result<RunReport, RunError> {
    let out = solve_with_threads(h, &cfg.settings(), cfg.workers_time)
        .map_err(RunError::Solve)?
        .outcome;
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_file(&dir.join("convergence.csv"), &convergence_csv(&out.info))?;
    write_file(
        &dir.join("solution.txt"),
        &solution_text(h.level(0).app().time_grid().points(), &out),
    )?;
    write_file(
        &dir.join("summary.txt"),
        &summary_text(&out.info, &h.level_sizes(), cfg),
    )?;
    if cfg.trace {
        write_file(&dir.join("trace.txt"), &trace_text(&out.trace))?;
    }
    Ok(RunReport {
        info: out.info,
        level_sizes: h.level_sizes(),
        output_dir: dir,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row 0 is the residual after setup; its time is the setup time. Later rows
/// add the solve time elapsed after each iteration.
pub fn convergence_csv(info: &SolveInfo) -> String {
    let mut s = String::from("iteration,residual,cumulative_seconds\n");
    writeln!(
        s,
        "0,{},{}",
        real(info.initial_residual),
        real(info.setup_seconds)
    )
    .unwrap();
    for (k, (r, t)) in info
        .residual_history
        .iter()
        .zip(&info.cumulative_seconds)
        .enumerate()
    {
        writeln!(s, "{},{},{}", k + 1, real(*r), real(info.setup_seconds + t)).unwrap();
    }
    s
}

pub fn solution_text<V: StateVector>(times: &[f64], out: &SolveOutcome<V>) -> String {
    let mut s = String::new();
    for (i, (t, u)) in times.iter().zip(&out.solution).enumerate() {
        write!(s, "{i} {}", real(*t)).unwrap();
        for v in u.pack() {
            write!(s, " {}", real(v)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn summary_text(info: &SolveInfo, level_sizes: &[usize], cfg: &RunConfig) -> String {
    let sizes = level_sizes
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "converged = {}\niterations = {}\ninitial_residual = {}\nfinal_residual = {}\n\
         setup_seconds = {}\nsolve_seconds = {}\nlevel_sizes = {sizes}\n\n[config]\n{}",
        info.converged,
        info.iterations,
        real(info.initial_residual),
        real(info.final_residual()),
        real(info.setup_seconds),
        real(info.solve_seconds),
        cfg.echo()
    )
}

pub fn trace_text(trace: &[TraceEvent]) -> String {
    let mut s = String::from("level,op,first_index,last_index\n");
    for e in trace {
        writeln!(s, "{e}").unwrap();
    }
    s
}

/// Turn `convergence.csv` into a whitespace-separated `iteration residual`
/// file. Values are copied verbatim.
pub fn plot_data(csv: &str) -> Result<String, String> {
    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h.trim() == "iteration,residual,cumulative_seconds" => {}
        Some(h) => return Err(format!("line 1: unexpected header `{h}`")),
        None => return Err("empty file: missing header".into()),
    }
    let mut out = String::from("# iteration residual\n");
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(format!(
                "line {}: expected 3 columns, found {}",
                n + 2,
                cols.len()
            ));
        }
        writeln!(out, "{} {}", cols[0].trim(), cols[1].trim()).unwrap();
    }
    Ok(out)
}
