//! Run configuration: flat `key = value` text with `#` comments.
//!
//! A file may contain a `[config]` line; only the lines after it are read, so
//! the echo at the end of `summary.txt` can be fed back to `mgrit run`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use mgrit::{Coarsening, CycleType, MgritSettings};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
    Env(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => write!(f, "--override"),
            Origin::Env(var) => write!(f, "environment variable {var}"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Syntax { origin: Origin, message: String },
    #[error("{origin}: field `{field}`: {message}")]
    Field {
        origin: Origin,
        field: String,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Dahlquist,
    Heat1D,
    Heat2D,
}

impl Problem {
    fn name(self) -> &'static str {
        match self {
            Problem::Dahlquist => "dahlquist",
            Problem::Heat1D => "heat1d",
            Problem::Heat2D => "heat2d",
        }
    }

    fn default_t_stop(self) -> f64 {
        match self {
            Problem::Dahlquist => 5.0,
            Problem::Heat1D => 2.0,
            Problem::Heat2D => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Threads,
    Mpi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub lambda: f64,
    pub a: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub t_start: f64,
    pub t_stop: f64,
    /// Number of time points, end points included.
    pub nt: usize,
    pub levels: usize,
    pub coarsening: Vec<usize>,
    pub cycle_type: CycleType,
    pub cf_iter: usize,
    pub nested_iteration: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub skip_first_f_relax_after_two_iters: bool,
    pub workers_time: usize,
    pub workers_space: usize,
    pub transport: TransportKind,
    pub output_dir: String,
    pub trace: bool,
    pub spatial_coarsening: bool,
    /// Spatial points per level when `spatial_coarsening` is on.
    pub spatial_n_x: Vec<usize>,
}

const KEYS: &[&str] = &[
    "problem",
    "lambda",
    "a",
    "n_x",
    "n_y",
    "t_start",
    "t_stop",
    "nt",
    "levels",
    "coarsening",
    "cycle_type",
    "cf_iter",
    "nested_iteration",
    "tol",
    "max_iter",
    "seed",
    "skip_first_f_relax_after_two_iters",
    "workers_time",
    "workers_space",
    "transport",
    "output_dir",
    "trace",
    "spatial_coarsening",
    "spatial_n_x",
];

#[derive(Debug, Clone)]
pub struct Assignment {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

/// Split config text into assignments, checking syntax and rejecting
/// unknown or repeated keys.
pub fn parse_text(text: &str) -> Result<Vec<Assignment>, ConfigError> {
    let body_start = text
        .lines()
        .position(|l| l.trim() == "[config]")
        .map_or(0, |i| i + 1);
    let mut out: Vec<Assignment> = Vec::new();
    for (n, raw) in text.lines().enumerate().skip(body_start) {
        let origin = Origin::Line(n + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin,
                message: format!("expected `key = value`, found `{line}`"),
            });
        };
        let key = key.trim();
        check_key(key, &origin)?;
        if let Some(prev) = out.iter().find(|a| a.key == key) {
            return Err(ConfigError::Field {
                origin,
                field: key.into(),
                message: format!("already set at {}", prev.origin),
            });
        }
        out.push(Assignment {
            key: key.into(),
            value: value.trim().into(),
            origin,
        });
    }
    Ok(out)
}

/// Parse a `key=value` override.
pub fn parse_override(text: &str) -> Result<Assignment, ConfigError> {
    let Some((key, value)) = text.split_once('=') else {
        return Err(ConfigError::Syntax {
            origin: Origin::Override,
            message: format!("expected `key=value`, found `{text}`"),
        });
    };
    let key = key.trim();
    check_key(key, &Origin::Override)?;
    Ok(Assignment {
        key: key.into(),
        value: value.trim().into(),
        origin: Origin::Override,
    })
}

fn check_key(key: &str, origin: &Origin) -> Result<(), ConfigError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError::Field {
            origin: origin.clone(),
            field: key.into(),
            message: "unknown key".into(),
        })
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, found `{v}`")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

fn parse_list(v: &str) -> Result<Vec<usize>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| parse_num(p.trim())).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = MgritSettings::default();
        Self {
            problem: Problem::Dahlquist,
            lambda: -1.0,
            a: 1.0,
            n_x: 65,
            n_y: 65,
            t_start: 0.0,
            t_stop: Problem::Dahlquist.default_t_stop(),
            nt: 101,
            levels: 2,
            coarsening: vec![2],
            cycle_type: s.cycle_type,
            cf_iter: s.cf_iter,
            nested_iteration: s.nested_iteration,
            tol: s.tol,
            max_iter: s.max_iter,
            seed: s.random_seed,
            skip_first_f_relax_after_two_iters: s.skip_redundant_f_relax,
            workers_time: 1,
            workers_space: 1,
            transport: TransportKind::Threads,
            output_dir: "output".into(),
            trace: false,
            spatial_coarsening: false,
            spatial_n_x: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Apply assignments in order on top of the defaults, then validate.
    pub fn from_assignments(assignments: &[Assignment]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut t_stop_set = false;
        let mut n_y_set = false;
        for a in assignments {
            cfg.assign(&a.key, &a.value)
                .map_err(|message| ConfigError::Field {
                    origin: a.origin.clone(),
                    field: a.key.clone(),
                    message,
                })?;
            t_stop_set |= a.key == "t_stop";
            n_y_set |= a.key == "n_y";
        }
        if !t_stop_set {
            cfg.t_stop = cfg.problem.default_t_stop();
        }
        if !n_y_set {
            cfg.n_y = cfg.n_x;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_assignments(&parse_text(text)?)
    }

    fn assign(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "problem" => {
                self.problem = match v.to_ascii_lowercase().as_str() {
                    "dahlquist" => Problem::Dahlquist,
                    "heat1d" => Problem::Heat1D,
                    "heat2d" => Problem::Heat2D,
                    _ => return Err(format!("expected dahlquist, heat1d or heat2d, found `{v}`")),
                }
            }
            "lambda" => self.lambda = parse_num(v)?,
            "a" => self.a = parse_num(v)?,
            "n_x" => self.n_x = parse_num(v)?,
            "n_y" => self.n_y = parse_num(v)?,
            "t_start" => self.t_start = parse_num(v)?,
            "t_stop" => self.t_stop = parse_num(v)?,
            "nt" => self.nt = parse_num(v)?,
            "levels" => self.levels = parse_num(v)?,
            "coarsening" => self.coarsening = parse_list(v)?,
            "cycle_type" => {
                self.cycle_type = match v {
                    "V" | "v" => CycleType::V,
                    "F" | "f" => CycleType::F,
                    _ => return Err(format!("expected V or F, found `{v}`")),
                }
            }
            "cf_iter" => self.cf_iter = parse_num(v)?,
            "nested_iteration" => self.nested_iteration = parse_bool(v)?,
            "tol" => self.tol = parse_num(v)?,
            "max_iter" => self.max_iter = parse_num(v)?,
            "seed" => self.seed = parse_num(v)?,
            "skip_first_f_relax_after_two_iters" => {
                self.skip_first_f_relax_after_two_iters = parse_bool(v)?
            }
            "workers_time" => self.workers_time = parse_num(v)?,
            "workers_space" => self.workers_space = parse_num(v)?,
            "transport" => {
                self.transport = match v {
                    "threads" => TransportKind::Threads,
                    "mpi" => TransportKind::Mpi,
                    _ => return Err(format!("expected threads or mpi, found `{v}`")),
                }
            }
            "output_dir" => {
                if v.is_empty() {
                    return Err("must not be empty".into());
                }
                self.output_dir = v.into()
            }
            "trace" => self.trace = parse_bool(v)?,
            "spatial_coarsening" => self.spatial_coarsening = parse_bool(v)?,
            "spatial_n_x" => self.spatial_n_x = parse_list(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.levels == 0 {
            return Err(invalid("levels", "must be at least 1"));
        }
        if self.nt < 2 {
            return Err(invalid("nt", "need at least 2 time points"));
        }
        if self.t_stop.partial_cmp(&self.t_start) != Some(std::cmp::Ordering::Greater) {
            return Err(invalid("t_stop", "must exceed t_start"));
        }
        if self.coarsening.is_empty() {
            return Err(invalid(
                "coarsening",
                "give one factor or one per level pair",
            ));
        }
        if self.coarsening.len() > 1 && self.coarsening.len() != self.levels - 1 {
            return Err(invalid(
                "coarsening",
                format!(
                    "{} factors given for {} levels (need {})",
                    self.coarsening.len(),
                    self.levels,
                    self.levels - 1
                ),
            ));
        }
        if let Some(m) = self.coarsening.iter().find(|&&m| m < 2) {
            return Err(invalid("coarsening", format!("factor {m} is below 2")));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(invalid("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if self.workers_time == 0 {
            return Err(invalid("workers_time", "must be at least 1"));
        }
        if self.workers_space == 0 {
            return Err(invalid("workers_space", "must be at least 1"));
        }
        if self.a <= 0.0 {
            return Err(invalid("a", "must be positive"));
        }
        if self.problem != Problem::Dahlquist && (self.n_x < 3 || self.n_y < 3) {
            return Err(invalid("n_x", "need at least 3 spatial points"));
        }
        if self.spatial_coarsening {
            if self.problem != Problem::Heat1D {
                return Err(invalid(
                    "spatial_coarsening",
                    "only available for problem = heat1d",
                ));
            }
            if self.spatial_n_x.len() != self.levels {
                return Err(invalid(
                    "spatial_n_x",
                    format!("need one grid size per level ({})", self.levels),
                ));
            }
            if self.spatial_n_x[0] != self.n_x {
                return Err(invalid("spatial_n_x", "first entry must equal n_x"));
            }
        }
        Ok(())
    }

    pub fn coarsening(&self) -> Coarsening {
        match self.coarsening.as_slice() {
            [m] => Coarsening::Uniform(*m),
            list => Coarsening::PerLevel(list.to_vec()),
        }
    }

    pub fn settings(&self) -> MgritSettings {
        MgritSettings {
            cycle_type: self.cycle_type,
            cf_iter: self.cf_iter,
            tol: self.tol,
            max_iter: self.max_iter,
            nested_iteration: self.nested_iteration,
            random_seed: self.seed,
            skip_redundant_f_relax: self.skip_first_f_relax_after_two_iters,
            trace: self.trace,
        }
    }

    /// Every key with its resolved value, in `key = value` form.
    pub fn echo(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let values: BTreeMap<&str, String> = [
            ("problem", self.problem.name().to_string()),
            ("lambda", format!("{:?}", self.lambda)),
            ("a", format!("{:?}", self.a)),
            ("n_x", self.n_x.to_string()),
            ("n_y", self.n_y.to_string()),
            ("t_start", format!("{:?}", self.t_start)),
            ("t_stop", format!("{:?}", self.t_stop)),
            ("nt", self.nt.to_string()),
            ("levels", self.levels.to_string()),
            ("coarsening", list(&self.coarsening)),
            ("cycle_type", self.cycle_type.to_string()),
            ("cf_iter", self.cf_iter.to_string()),
            ("nested_iteration", self.nested_iteration.to_string()),
            ("tol", format!("{:?}", self.tol)),
            ("max_iter", self.max_iter.to_string()),
            ("seed", self.seed.to_string()),
            (
                "skip_first_f_relax_after_two_iters",
                self.skip_first_f_relax_after_two_iters.to_string(),
            ),
            ("workers_time", self.workers_time.to_string()),
            ("workers_space", self.workers_space.to_string()),
            (
                "transport",
                match self.transport {
                    TransportKind::Threads => "threads",
                    TransportKind::Mpi => "mpi",
                }
                .to_string(),
            ),
            ("output_dir", self.output_dir.clone()),
            ("trace", self.trace.to_string()),
            ("spatial_coarsening", self.spatial_coarsening.to_string()),
            ("spatial_n_x", list(&self.spatial_n_x)),
        ]
        .into_iter()
        .collect();
        let mut out = String::new();
        for key in KEYS {
            writeln!(out, "{key} = {}", values[key]).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = "\
# Dahlquist test problem
problem = dahlquist
t_start = 0
t_stop = 5
nt = 101
levels = 2
coarsening = 2
tol = 1e-10   # solver tolerance
";

    #[test]
    fn parses_listing_config() {
        let cfg = RunConfig::parse(LISTING).unwrap();
        assert_eq!(cfg.problem, Problem::Dahlquist);
        assert_eq!(cfg.nt, 101);
        assert_eq!(cfg.tol, 1e-10);
        assert_eq!(cfg.coarsening(), Coarsening::Uniform(2));
        assert_eq!(cfg.settings().cf_iter, 1);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::parse(LISTING).unwrap();
        assert_eq!(RunConfig::parse(&cfg.echo()).unwrap(), cfg);
        cfg = RunConfig::parse(
            "problem = heat1d\nn_x = 129\nnt = 257\nlevels = 3\ncoarsening = 4\n\
             spatial_coarsening = true\nspatial_n_x = 129,65,33\ncycle_type = F\ntol = 3.3e-9\n",
        )
        .unwrap();
        assert_eq!(RunConfig::parse(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn summary_section_is_read() {
        let cfg = RunConfig::parse(LISTING).unwrap();
        let summary = format!(
            "converged = true\niterations = 3\n\n[config]\n{}",
            cfg.echo()
        );
        assert_eq!(RunConfig::parse(&summary).unwrap(), cfg);
    }

    #[test]
    fn problem_defaults_apply_after_assignments() {
        let cfg = RunConfig::parse("problem = heat2d\nn_x = 17").unwrap();
        assert_eq!(cfg.t_stop, 1.0);
        assert_eq!(cfg.n_y, 17);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("problem = dahlquist\n\nlamda = 2\n").unwrap_err();
        assert_eq!(err.to_string(), "line 3: field `lamda`: unknown key");
    }

    #[test]
    fn bad_value_reports_line_and_field() {
        let err = RunConfig::parse("tol = small\n").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Field { origin: Origin::Line(1), ref field, .. } if field == "tol"
        ));
        let err = RunConfig::parse("cycle_type = W\n").unwrap_err();
        assert!(err.to_string().contains("expected V or F"));
    }

    #[test]
    fn syntax_and_duplicates_rejected() {
        let err = RunConfig::parse("levels 2\n").unwrap_err();
        assert!(err.to_string().starts_with("line 1:"));
        let err = RunConfig::parse("levels = 2\nlevels = 3\n").unwrap_err();
        assert!(err.to_string().contains("already set at line 1"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut a = parse_text(LISTING).unwrap();
        a.push(parse_override("tol=1e-6").unwrap());
        assert_eq!(RunConfig::from_assignments(&a).unwrap().tol, 1e-6);
        assert!(parse_override("tol").is_err());
        assert!(parse_override("nope=1").is_err());
    }

    #[test]
    fn invariants_checked() {
        assert!(RunConfig::parse("tol = 0").is_err());
        assert!(RunConfig::parse("max_iter = 0").is_err());
        assert!(RunConfig::parse("levels = 3\ncoarsening = 4,4,4").is_err());
        assert!(RunConfig::parse("coarsening = 1").is_err());
        assert!(RunConfig::parse("spatial_coarsening = true").is_err());
        assert!(RunConfig::parse("problem = heat1d\nn_x = 2").is_err());
    }
}
