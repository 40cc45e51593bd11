//! Run configuration file.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are
//! comma-separated. Unknown or duplicated keys and keys that do not apply to
//! the selected drift or initial-data kind are errors.
//!
//! | key | type | default |
//! |---|---|---|
//! | `grid.dim` | 2 or 3 | 3 |
//! | `grid.period` | real | 1 |
//! | `grid.points` | int | 32 |
//! | `grid.t_start`, `grid.t_end` | real | 0, 0.25 |
//! | `grid.steps` | int | 64 |
//! | `drift.kind` | `none`, `constant`, `random`, `log`, `lacunary` | `none` |
//! | `drift.form` | `tensor`, `stream` | `tensor` |
//! | `drift.value` | real (constant) | 0 |
//! | `drift.modes`, `drift.seed` | int (random) | 3, seed |
//! | `drift.amplitude` | real (random, log, lacunary) | 1 |
//! | `drift.depth`, `drift.center` | int, 3 reals (log) | 4, `0,0,0` |
//! | `drift.levels` | int (lacunary) | 3 |
//! | `initial.kind` | `zero`, `single_mode`, `taylor_green`, `random` | `taylor_green` |
//! | `initial.mode`, `initial.component` | 3 ints, int (single_mode) | `1,0,0`, 1 |
//! | `initial.amplitude` | real (all but zero) | 1 |
//! | `initial.modes`, `initial.seed` | int (random) | 3, seed |
//! | `stepper.theta`, `stepper.cfl` | real | 1, 0.5 |
//! | `seed` | int | 0 |
//! | `verify.ensemble_size`, `verify.ensemble_seed` | int | 64, seed |
//! | `verify.radii` | reals (empty: ladder from `2h`) | empty |
//! | `verify.l`, `verify.s` | reals | `1.3,1.5,1.9`, `1.05,1.1,1.15` |
//! | `verify.rh_margin`, `verify.llogl_margin`, `verify.caccioppoli_margin` | real | 2, 5, 2 |
//! | `verify.fields`, `verify.cz_factors` | int, reals | 100, `1,2,4` |
//! | `verify.triples`, `verify.mazver_points` | int | 200, 16 |
//! | `verify.iteration_samples` | int | 33 |
//! | `output.dir` | path | `out` |

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bmo::CatalogSpec;
use crate::error::{Error, Result};
use crate::stokes::{InitialData, StepperParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftForm {
    /// Catalog fields are the independent entries of `d`.
    Tensor,
    /// Catalog fields are a stream `omega` with `d_ij = eps_ijk omega_k`.
    Stream,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub period: f64,
    pub points: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    /// `None` is the zero drift.
    pub drift: Option<CatalogSpec>,
    pub drift_form: DriftForm,
    pub initial: InitialData,
    pub stepper: StepperParams,
    pub seed: u64,
    pub ensemble_size: usize,
    pub ensemble_seed: Option<u64>,
    pub radii: Vec<f64>,
    pub l_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub rh_margin: f64,
    pub llogl_margin: f64,
    pub caccioppoli_margin: f64,
    pub fields: usize,
    pub cz_factors: Vec<f64>,
    pub triples: usize,
    pub mazver_points: usize,
    pub iteration_samples: usize,
    pub output_dir: PathBuf,
    /// Explicit drift / initial seeds, kept apart from the overridable `seed`.
    drift_seed: Option<u64>,
    initial_seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            period: 1.0,
            points: 32,
            t_start: 0.0,
            t_end: 0.25,
            steps: 64,
            drift: None,
            drift_form: DriftForm::Tensor,
            initial: InitialData::TaylorGreen { amplitude: 1.0 },
            stepper: StepperParams::default(),
            seed: 0,
            ensemble_size: crate::verify::DEFAULT_ENSEMBLE_SIZE,
            ensemble_seed: None,
            radii: Vec::new(),
            l_values: vec![1.3, 1.5, 1.9],
            s_values: vec![1.05, 1.1, 1.15],
            rh_margin: 2.0,
            llogl_margin: 5.0,
            caccioppoli_margin: 2.0,
            fields: 100,
            cz_factors: vec![1.0, 2.0, 4.0],
            triples: 200,
            mazver_points: 16,
            iteration_samples: 33,
            output_dir: PathBuf::from("out"),
            drift_seed: None,
            initial_seed: None,
        }
    }
}

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.period",
    "grid.points",
    "grid.t_start",
    "grid.t_end",
    "grid.steps",
    "drift.kind",
    "drift.form",
    "drift.value",
    "drift.modes",
    "drift.seed",
    "drift.amplitude",
    "drift.depth",
    "drift.center",
    "drift.levels",
    "initial.kind",
    "initial.mode",
    "initial.component",
    "initial.amplitude",
    "initial.modes",
    "initial.seed",
    "stepper.theta",
    "stepper.cfl",
    "seed",
    "verify.ensemble_size",
    "verify.ensemble_seed",
    "verify.radii",
    "verify.l",
    "verify.s",
    "verify.rh_margin",
    "verify.llogl_margin",
    "verify.caccioppoli_margin",
    "verify.fields",
    "verify.cz_factors",
    "verify.triples",
    "verify.mazver_points",
    "verify.iteration_samples",
    "output.dir",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse `{key} = {v}`"))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse list `{key} = {v}`"))),
        }
    }

    fn reject_prefix(&self, prefix: &str, why: &str) -> Result<()> {
        if let Some((k, (line, _))) = self.map.iter().find(|(k, _)| k.starts_with(prefix)) {
            return Err(Error::Config(format!("line {line}: `{k}` does not apply to {why}")));
        }
        Ok(())
    }
}

fn triple<T: Copy + Default>(v: Vec<T>, key: &str) -> Result<[T; 3]> {
    if v.len() != 3 {
        return Err(Error::Config(format!("`{key}` needs three entries")));
    }
    Ok([v[0], v[1], v[2]])
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", i + 1)));
            }
            if map.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        let mut e = Entries { map };
        let mut c = RunConfig::default();
        c.dim = e.take("grid.dim")?.unwrap_or(c.dim);
        c.period = e.take("grid.period")?.unwrap_or(c.period);
        c.points = e.take("grid.points")?.unwrap_or(c.points);
        c.t_start = e.take("grid.t_start")?.unwrap_or(c.t_start);
        c.t_end = e.take("grid.t_end")?.unwrap_or(c.t_end);
        c.steps = e.take("grid.steps")?.unwrap_or(c.steps);
        c.seed = e.take("seed")?.unwrap_or(c.seed);

        let form: Option<String> = e.take("drift.form")?;
        c.drift_form = match form.as_deref() {
            None | Some("tensor") => DriftForm::Tensor,
            Some("stream") => DriftForm::Stream,
            Some(o) => return Err(Error::Config(format!("unknown drift.form `{o}`"))),
        };
        let kind: String = e.take("drift.kind")?.unwrap_or_else(|| "none".into());
        c.drift_seed = None;
        c.drift = match kind.as_str() {
            "none" => {
                e.reject_prefix("drift.", "drift.kind = none")?;
                None
            }
            "constant" => Some(CatalogSpec::Constant { value: e.take("drift.value")?.unwrap_or(0.0) }),
            "random" => {
                c.drift_seed = e.take("drift.seed")?;
                Some(CatalogSpec::Random {
                    modes: e.take("drift.modes")?.unwrap_or(3),
                    amplitude: e.take("drift.amplitude")?.unwrap_or(1.0),
                    seed: 0,
                })
            }
            "log" => Some(CatalogSpec::Log {
                depth: e.take("drift.depth")?.unwrap_or(4),
                amplitude: e.take("drift.amplitude")?.unwrap_or(1.0),
                center: match e.list::<f64>("drift.center")? {
                    Some(v) => triple(v, "drift.center")?,
                    None => [0.0; 3],
                },
            }),
            "lacunary" => Some(CatalogSpec::Lacunary {
                levels: e.take("drift.levels")?.unwrap_or(3),
                amplitude: e.take("drift.amplitude")?.unwrap_or(1.0),
            }),
            o => return Err(Error::UnknownKind(format!("drift kind `{o}`"))),
        };
        e.reject_prefix("drift.", &format!("drift.kind = {kind}"))?;

        let ikind: String = e.take("initial.kind")?.unwrap_or_else(|| "taylor_green".into());
        c.initial = match ikind.as_str() {
            "zero" => InitialData::Zero,
            "single_mode" => InitialData::SingleMode {
                mode: match e.list::<i64>("initial.mode")? {
                    Some(v) => triple(v, "initial.mode")?,
                    None => [1, 0, 0],
                },
                component: e.take("initial.component")?.unwrap_or(1),
                amplitude: e.take("initial.amplitude")?.unwrap_or(1.0),
            },
            "taylor_green" => InitialData::TaylorGreen { amplitude: e.take("initial.amplitude")?.unwrap_or(1.0) },
            "random" => {
                c.initial_seed = e.take("initial.seed")?;
                InitialData::Random {
                    modes: e.take("initial.modes")?.unwrap_or(3),
                    amplitude: e.take("initial.amplitude")?.unwrap_or(1.0),
                    seed: 0,
                }
            }
            o => return Err(Error::UnknownKind(format!("initial kind `{o}`"))),
        };
        e.reject_prefix("initial.", &format!("initial.kind = {ikind}"))?;

        c.stepper.imex_theta = e.take("stepper.theta")?.unwrap_or(c.stepper.imex_theta);
        c.stepper.cfl_safety = e.take("stepper.cfl")?.unwrap_or(c.stepper.cfl_safety);
        c.ensemble_size = e.take("verify.ensemble_size")?.unwrap_or(c.ensemble_size);
        c.ensemble_seed = e.take("verify.ensemble_seed")?;
        c.radii = e.list("verify.radii")?.unwrap_or_default();
        c.l_values = e.list("verify.l")?.unwrap_or(c.l_values);
        c.s_values = e.list("verify.s")?.unwrap_or(c.s_values);
        c.rh_margin = e.take("verify.rh_margin")?.unwrap_or(c.rh_margin);
        c.llogl_margin = e.take("verify.llogl_margin")?.unwrap_or(c.llogl_margin);
        c.caccioppoli_margin = e.take("verify.caccioppoli_margin")?.unwrap_or(c.caccioppoli_margin);
        c.fields = e.take("verify.fields")?.unwrap_or(c.fields);
        c.cz_factors = e.list("verify.cz_factors")?.unwrap_or(c.cz_factors);
        c.triples = e.take("verify.triples")?.unwrap_or(c.triples);
        c.mazver_points = e.take("verify.mazver_points")?.unwrap_or(c.mazver_points);
        c.iteration_samples = e.take("verify.iteration_samples")?.unwrap_or(c.iteration_samples);
        c.output_dir = e.take::<String>("output.dir")?.map(PathBuf::from).unwrap_or(c.output_dir);
        debug_assert!(e.map.is_empty());
        c.resolve_seeds();
        Ok(c)
    }

    /// Seeds of random drift and initial data default to `seed`.
    fn resolve_seeds(&mut self) {
        let s = self.seed;
        if let Some(CatalogSpec::Random { seed, .. }) = &mut self.drift {
            *seed = self.drift_seed.unwrap_or(s);
        }
        if let InitialData::Random { seed, .. } = &mut self.initial {
            *seed = self.initial_seed.unwrap_or(s);
        }
    }

    pub fn ensemble_seed(&self) -> u64 {
        self.ensemble_seed.unwrap_or(self.seed)
    }

    /// Fail-fast validation: builds the solver inputs and checks every
    /// verification parameter without running anything.
    pub fn validate(&mut self) -> Result<()> {
        self.resolve_seeds();
        self.solver_config(1, false)?;
        let bad = |what: String| Err(Error::Config(what));
        if let Some(l) = self.l_values.iter().find(|&&l| !(l > 1.2 && l < 2.0)) {
            return bad(format!("verify.l entry {l} not in (6/5, 2)"));
        }
        if let Some(s) = self.s_values.iter().find(|&&s| !(s > 1.0 && s < 1.2)) {
            return bad(format!("verify.s entry {s} not in (1, 6/5)"));
        }
        if self.rh_margin < 2.0 || self.llogl_margin < 5.0 || self.caccioppoli_margin <= 1.0 {
            return bad("margins must satisfy rh >= 2, llogl >= 5, caccioppoli > 1".into());
        }
        if self.ensemble_size == 0 {
            return bad("verify.ensemble_size must be positive".into());
        }
        let h = self.period / self.points as f64;
        if let Some(r) = self.radii.iter().find(|&&r| !(r >= h)) {
            return bad(format!("verify.radii entry {r} is below the spacing {h}"));
        }
        if self.cz_factors.iter().any(|&f| !(f >= 1.0)) {
            return bad("verify.cz_factors entries must be >= 1".into());
        }
        if self.mazver_points < 4 || self.iteration_samples < 2 {
            return bad("verify.mazver_points must be >= 4 and verify.iteration_samples >= 2".into());
        }
        Ok(())
    }
}
