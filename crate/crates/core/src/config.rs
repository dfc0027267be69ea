//! TOML run configuration.
//!
//! A file holds a `[model]` table (keys as in [`ModelParams`]) plus one
//! table per command: `[run]` and `[observables]` for a trajectory,
//! `[sweep]`, `[fit]`, `[boundstate]` and `[kernel]`; `[lorentzian]` supplies
//! the parameters of the Lorentzian kernel wherever it is selected. Every
//! error names the file and line of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{FitModel, SolverPair, SweepConfig};
use crate::io::fmt_f64;
use crate::kernels::{CorrelationKernel, LorentzianParams, MarkovMode};
use crate::model::ModelParams;
use crate::simulate::{named_state, AtomicAmplitudes, EdMethod, RunSpec, Solver};
use crate::{Error, Result, C64};

const MODEL_KEYS: [&str; 8] = ["A", "B", "g_coupling", "M", "h0", "atom_positions", "omega_S", "periodic"];

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: Option<ModelParams>,
    pub run: Option<RunSection>,
    pub observables: Option<ObservablesSection>,
    pub sweep: Option<SweepSection>,
    pub fit: Option<FitSection>,
    pub boundstate: Option<BoundStateSection>,
    pub kernel: Option<KernelSection>,
    pub lorentzian: Option<LorentzianSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub solver: String,
    /// Named state or bitstring; alternatively `amplitudes`.
    pub initial_state: Option<String>,
    /// Explicit `[bitstring, re, im]` components.
    pub amplitudes: Option<Vec<(String, f64, f64)>>,
    pub t_max: f64,
    pub dt: Option<f64>,
    pub output_dt: Option<f64>,
    pub kernel: Option<String>,
    pub markov: Option<String>,
    pub n_exc: Option<u32>,
    pub n_max: Option<u32>,
    pub ed_method: Option<String>,
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    #[serde(default = "yes")]
    pub populations: bool,
    #[serde(default)]
    pub entropy: bool,
    #[serde(default)]
    pub concurrence: bool,
}

impl Default for ObservablesSection {
    fn default() -> Self {
        Self { populations: true, entropy: false, concurrence: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SweepSection {
    pub pair: String,
    pub L_values: Option<Vec<i64>>,
    /// Inclusive `[first, last]`.
    pub L_range: Option<(i64, i64)>,
    /// Detunings from the lower band edge.
    pub Delta_values: Option<Vec<f64>>,
    /// `[first, last, count]`, evenly spaced.
    pub Delta_range: Option<(f64, f64, usize)>,
    pub omega_S_values: Option<Vec<f64>>,
    pub T: Option<f64>,
    pub steady_window: Option<f64>,
    pub sample_dt: Option<f64>,
    pub auto_bath: Option<bool>,
    pub workers: Option<usize>,
    pub output: Option<String>,
    pub checkpoint: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub input: String,
    pub column: Option<String>,
    /// `F(0)`; defaults to the first sample.
    pub initial: Option<f64>,
    pub models: Option<Vec<String>>,
    pub output: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct BoundStateSection {
    pub n_atoms: Option<usize>,
    pub L: Option<i64>,
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct KernelSection {
    pub kernel: Option<String>,
    pub L: Option<i64>,
    pub t_max: f64,
    pub dt: Option<f64>,
    pub output: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzianSection {
    pub beta: f64,
    pub gamma_w: f64,
    pub omega0: f64,
    #[serde(default)]
    pub delay_per_site: f64,
}

/// A trajectory request.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulateJob {
    pub spec: RunSpec,
    pub populations: bool,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepJob {
    pub config: SweepConfig,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitJob {
    pub input: PathBuf,
    pub column: String,
    pub initial: Option<f64>,
    pub models: Vec<FitModel>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundStateJob {
    pub params: ModelParams,
    pub n_atoms: usize,
    pub l: i64,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelJob {
    pub params: ModelParams,
    pub kernel: CorrelationKernel,
    pub l: i64,
    pub t_max: f64,
    pub dt: f64,
    pub output: Option<PathBuf>,
}

/// Parsed configuration file with its source kept for error locations.
#[derive(Clone, Debug)]
pub struct ConfigFile {
    label: String,
    text: String,
    base: PathBuf,
    pub raw: RawConfig,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: cannot read: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_with_base(&path.display().to_string(), &text, base)
    }

    /// Parse `text`; `label` is used in error messages and relative paths
    /// resolve against the working directory.
    pub fn parse(label: &str, text: &str) -> Result<Self> {
        Self::parse_with_base(label, text, PathBuf::new())
    }

    fn parse_with_base(label: &str, text: &str, base: PathBuf) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of_offset(text, s.start));
            Error::Config(format!("{label}:{line}: {}", e.message().trim()))
        })?;
        Ok(Self { label: label.to_string(), text: text.to_string(), base, raw })
    }

    /// Line of `key` inside `[section]`, else of the section header, else 1.
    pub fn line_of(&self, section: &str, key: Option<&str>) -> usize {
        let mut current = String::new();
        let mut header = None;
        for (i, line) in self.text.lines().enumerate() {
            let t = line.trim();
            if let Some(name) = t.strip_prefix('[').and_then(|r| r.split(']').next()) {
                current = name.trim().to_string();
                if current == section && header.is_none() {
                    header = Some(i + 1);
                }
                continue;
            }
            if current != section {
                continue;
            }
            if let Some(k) = key {
                if let Some(rest) = t.strip_prefix(k) {
                    if rest.trim_start().starts_with('=') {
                        return i + 1;
                    }
                }
            }
        }
        header.unwrap_or(1)
    }

    fn error_at(&self, section: &str, key: Option<&str>, msg: impl std::fmt::Display) -> Error {
        let line = self.line_of(section, key);
        match key {
            Some(k) => Error::Config(format!("{}:{line}: [{section}] {k}: {msg}", self.label)),
            None => Error::Config(format!("{}:{line}: [{section}] {msg}", self.label)),
        }
    }

    /// Attach a location to a validation error raised for `section`.
    fn locate(&self, section: &str, keys: &[(&str, &str)], e: Error) -> Error {
        match e {
            Error::InvalidParameter { field, reason } => {
                if MODEL_KEYS.contains(&field) {
                    return self.error_at("model", Some(field), reason);
                }
                if ["populations", "entropy", "concurrence"].contains(&field) && self.raw.observables.is_some() {
                    return self.error_at("observables", Some(field), reason);
                }
                let key = keys.iter().find(|(f, _)| *f == field).map_or(field, |(_, k)| *k);
                self.error_at(section, Some(key), reason)
            }
            Error::InvalidState(msg) if section == "run" => {
                let key = if self.raw.run.as_ref().is_some_and(|r| r.amplitudes.is_some()) {
                    "amplitudes"
                } else {
                    "initial_state"
                };
                self.error_at(section, Some(key), msg)
            }
            Error::Config(msg) => self.error_at(section, None, msg),
            other => other,
        }
    }

    fn path(&self, p: &Option<String>) -> Option<PathBuf> {
        p.as_ref().map(|s| {
            let p = Path::new(s);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.base.join(p)
            }
        })
    }

    fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref().ok_or_else(|| Error::Config(format!("{}:1: missing [{name}] table", self.label)))
    }

    pub fn model(&self) -> Result<ModelParams> {
        let p = self.section(&self.raw.model, "model")?.clone();
        p.validate().map_err(|e| self.locate("model", &[], e))?;
        Ok(p)
    }

    fn kernel_from(&self, section: &str, name: Option<&str>) -> Result<CorrelationKernel> {
        match name.unwrap_or("closed-bessel") {
            "closed-bessel" => Ok(CorrelationKernel::ClosedBessel),
            "discrete-sum" => Ok(CorrelationKernel::DiscreteSum),
            "lorentzian" => {
                let l = self.raw.lorentzian.ok_or_else(|| {
                    self.error_at(section, Some("kernel"), "the lorentzian kernel needs a [lorentzian] table")
                })?;
                Ok(CorrelationKernel::Lorentzian(LorentzianParams {
                    beta: l.beta,
                    gamma_w: l.gamma_w,
                    omega0: l.omega0,
                    delay_per_site: l.delay_per_site,
                }))
            }
            other => Err(self.error_at(
                section,
                Some("kernel"),
                format!("unknown kernel `{other}` (closed-bessel, discrete-sum, lorentzian)"),
            )),
        }
    }

    pub fn simulate_job(&self) -> Result<SimulateJob> {
        let params = self.model()?;
        let run = self.section(&self.raw.run, "run")?;
        let obs = self.raw.observables.clone().unwrap_or_default();
        let solver: Solver = run.solver.parse().map_err(|e| self.locate("run", &[], e))?;
        let initial = match (&run.initial_state, &run.amplitudes) {
            (Some(name), None) => named_state(name, params.n_atoms()).map_err(|e| self.locate("run", &[], e))?,
            (None, Some(list)) => self.amplitudes(list, params.n_atoms())?,
            (Some(_), Some(_)) => {
                return Err(self.error_at("run", Some("amplitudes"), "give either initial_state or amplitudes"))
            }
            (None, None) => return Err(self.error_at("run", None, "needs initial_state or amplitudes")),
        };
        let markov = match run.markov.as_deref().unwrap_or("analytic") {
            "analytic" => MarkovMode::Analytic,
            "numeric" => MarkovMode::Numeric,
            other => {
                return Err(self.error_at("run", Some("markov"), format!("unknown mode `{other}` (analytic, numeric)")))
            }
        };
        let ed_method = match &run.ed_method {
            Some(m) => m.parse::<EdMethod>().map_err(|e| self.locate("run", &[], e))?,
            None => EdMethod::Krylov,
        };
        let mut spec = RunSpec::new(params, solver, initial, run.t_max);
        spec.dt = run.dt;
        spec.output_dt = run.output_dt;
        spec.kernel = self.kernel_from("run", run.kernel.as_deref())?;
        spec.markov = markov;
        spec.n_exc = run.n_exc;
        spec.n_max = run.n_max;
        spec.ed_method = ed_method;
        spec.entropy = obs.entropy;
        spec.concurrence = obs.concurrence;
        spec.validate().map_err(|e| self.locate("run", &[("dt", "dt")], e))?;
        Ok(SimulateJob { spec, populations: obs.populations, output: self.path(&run.output) })
    }

    fn amplitudes(&self, list: &[(String, f64, f64)], n_atoms: usize) -> Result<AtomicAmplitudes> {
        let mut out = Vec::with_capacity(list.len());
        for (bits, re, im) in list {
            let comp = named_state(bits, n_atoms)
                .ok()
                .filter(|_| bits.chars().all(|c| c == '0' || c == '1'))
                .ok_or_else(|| {
                    self.error_at("run", Some("amplitudes"), format!("`{bits}` is not a {n_atoms}-atom bitstring"))
                })?;
            out.push((comp[0].0, C64::new(*re, *im)));
        }
        Ok(out)
    }

    pub fn sweep_job(&self) -> Result<SweepJob> {
        let model = self.section(&self.raw.model, "model")?.clone();
        let s = self.section(&self.raw.sweep, "sweep")?;
        let pair: SolverPair = s.pair.parse().map_err(|e| self.locate("sweep", &[], e))?;
        let l_values = match (&s.L_values, s.L_range) {
            (Some(v), None) => v.clone(),
            (None, Some((a, b))) if a <= b => (a..=b).collect(),
            (None, Some(_)) => return Err(self.error_at("sweep", Some("L_range"), "first must not exceed last")),
            _ => return Err(self.error_at("sweep", None, "give exactly one of L_values, L_range")),
        };
        let edge = model.lower_edge();
        let omega_values = match (&s.Delta_values, s.Delta_range, &s.omega_S_values) {
            (Some(v), None, None) => v.iter().map(|d| edge + d).collect(),
            (None, Some((a, b, n)), None) => {
                if n < 1 || (n == 1 && a != b) {
                    return Err(self.error_at("sweep", Some("Delta_range"), "count must be >= 2 unless first == last"));
                }
                (0..n).map(|i| edge + if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
            }
            (None, None, Some(v)) => v.clone(),
            _ => {
                return Err(self.error_at("sweep", None, "give exactly one of Delta_values, Delta_range, omega_S_values"))
            }
        };
        let mut cfg = SweepConfig::new(model, l_values, omega_values, pair);
        cfg.t_max = s.T.unwrap_or(cfg.t_max);
        cfg.steady_window = s.steady_window;
        cfg.sample_dt = s.sample_dt.unwrap_or(cfg.sample_dt);
        cfg.auto_bath = s.auto_bath.unwrap_or(cfg.auto_bath);
        cfg.workers = s.workers.unwrap_or(cfg.workers);
        // the model's own M and positions are replaced per cell; check the rest
        let probe = cfg.cell_params(cfg.l_values.iter().copied().max().unwrap_or(0).max(0), cfg.model.omega_s);
        probe.validate().map_err(|e| self.locate("model", &[], e))?;
        let keys = [("t_max", "T"), ("grid", "pair"), ("L", "L_values"), ("omega_S", "omega_S_values")];
        cfg.validate().map_err(|e| self.locate("sweep", &keys, e))?;
        let output = self.path(&s.output);
        let checkpoint = self.path(&s.checkpoint);
        Ok(SweepJob { config: cfg, output, checkpoint })
    }

    pub fn fit_job(&self) -> Result<FitJob> {
        let f = self.section(&self.raw.fit, "fit")?;
        let models = f
            .models
            .clone()
            .unwrap_or_else(|| vec!["full".into()])
            .iter()
            .map(|m| match m.as_str() {
                "full" => Ok(FitModel::Full),
                "reduced" => Ok(FitModel::Reduced),
                other => Err(self.error_at("fit", Some("models"), format!("unknown model `{other}` (full, reduced)"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if models.is_empty() {
            return Err(self.error_at("fit", Some("models"), "need at least one model"));
        }
        let input = self.path(&Some(f.input.clone())).unwrap_or_default();
        Ok(FitJob {
            input,
            column: f.column.clone().unwrap_or_else(|| "P_1".into()),
            initial: f.initial,
            models,
            output: self.path(&f.output),
        })
    }

    pub fn boundstate_job(&self) -> Result<BoundStateJob> {
        let params = self.model()?;
        let b = self.raw.boundstate.clone().unwrap_or_default();
        let n_atoms = b.n_atoms.unwrap_or(params.n_atoms());
        if !(1..=2).contains(&n_atoms) {
            return Err(self.error_at("boundstate", Some("n_atoms"), format!("must be 1 or 2, got {n_atoms}")));
        }
        let l = b.L.unwrap_or_else(|| match params.atom_positions.as_slice() {
            [a, b, ..] if n_atoms == 2 => (b - a).abs(),
            _ => 0,
        });
        if l < 0 {
            return Err(self.error_at("boundstate", Some("L"), "separation must be non-negative"));
        }
        Ok(BoundStateJob { params, n_atoms, l, output: self.path(&b.output) })
    }

    pub fn kernel_job(&self) -> Result<KernelJob> {
        let params = self.model()?;
        let k = self.section(&self.raw.kernel, "kernel")?;
        let kernel = self.kernel_from("kernel", k.kernel.as_deref())?;
        let dt = k.dt.unwrap_or(0.01);
        if !(k.t_max > 0.0) || !k.t_max.is_finite() {
            return Err(self.error_at("kernel", Some("t_max"), "must be positive"));
        }
        if !(dt > 0.0) {
            return Err(self.error_at("kernel", Some("dt"), "must be positive"));
        }
        Ok(KernelJob { params, kernel, l: k.L.unwrap_or(0), t_max: k.t_max, dt, output: self.path(&k.output) })
    }
}

/// `# model.key = value` lines for a parameter set.
pub fn model_header(p: &ModelParams) -> Vec<(String, String)> {
    let positions = p.atom_positions.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    vec![
        ("model.A".into(), fmt_f64(p.band_center)),
        ("model.B".into(), fmt_f64(p.half_width)),
        ("model.g_coupling".into(), fmt_f64(p.g_coupling)),
        ("model.M".into(), p.sites.to_string()),
        ("model.h0".into(), fmt_f64(p.h0)),
        ("model.atom_positions".into(), positions),
        ("model.omega_S".into(), fmt_f64(p.omega_s)),
        ("model.periodic".into(), p.periodic.to_string()),
    ]
}

fn kernel_header(prefix: &str, k: &CorrelationKernel) -> Vec<(String, String)> {
    let mut h = vec![(format!("{prefix}.kernel"), k.label().to_string())];
    if let CorrelationKernel::Lorentzian(l) = k {
        h.push(("lorentzian.beta".into(), fmt_f64(l.beta)));
        h.push(("lorentzian.gamma_w".into(), fmt_f64(l.gamma_w)));
        h.push(("lorentzian.omega0".into(), fmt_f64(l.omega0)));
        h.push(("lorentzian.delay_per_site".into(), fmt_f64(l.delay_per_site)));
    }
    h
}

/// Fully resolved settings of a trajectory run.
pub fn simulate_header(job: &SimulateJob) -> Vec<(String, String)> {
    let s = &job.spec;
    let mut h = model_header(&s.params);
    let amps = s
        .initial
        .iter()
        .map(|(m, c)| {
            let bits: String = (0..s.params.n_atoms()).map(|j| if m >> j & 1 == 1 { '1' } else { '0' }).collect();
            format!("{bits}:{}:{}", fmt_f64(c.re), fmt_f64(c.im))
        })
        .collect::<Vec<_>>()
        .join(" ");
    h.push(("run.solver".into(), s.solver.name().into()));
    h.push(("run.initial_state".into(), amps));
    h.push(("run.t_max".into(), fmt_f64(s.t_max)));
    h.push(("run.dt".into(), fmt_f64(s.step())));
    h.push(("run.output_dt".into(), fmt_f64(s.output_dt.unwrap_or(s.step()))));
    h.extend(kernel_header("run", &s.kernel));
    h.push(("run.markov".into(), format!("{:?}", s.markov).to_lowercase()));
    h.push(("run.ed_method".into(), s.ed_method.name().into()));
    if let Ok(sector) = s.sector() {
        h.push(("run.sector".into(), sector.label().into()));
    }
    h.push(("observables.populations".into(), job.populations.to_string()));
    h.push(("observables.entropy".into(), s.entropy.to_string()));
    h.push(("observables.concurrence".into(), s.concurrence.to_string()));
    h
}

pub fn kernel_job_header(job: &KernelJob) -> Vec<(String, String)> {
    let mut h = model_header(&job.params);
    h.extend(kernel_header("kernel", &job.kernel));
    h.push(("kernel.L".into(), job.l.to_string()));
    h.push(("kernel.t_max".into(), fmt_f64(job.t_max)));
    h.push(("kernel.dt".into(), fmt_f64(job.dt)));
    h
}

pub fn boundstate_header(job: &BoundStateJob) -> Vec<(String, String)> {
    let mut h = model_header(&job.params);
    h.push(("boundstate.n_atoms".into(), job.n_atoms.to_string()));
    h.push(("boundstate.L".into(), job.l.to_string()));
    h
}

pub fn fit_header(job: &FitJob, initial: f64) -> Vec<(String, String)> {
    let models = job.models.iter().map(|m| m.name()).collect::<Vec<_>>().join(" ");
    vec![
        ("fit.input".into(), job.input.display().to_string()),
        ("fit.column".into(), job.column.clone()),
        ("fit.initial".into(), fmt_f64(initial)),
        ("fit.models".into(), models),
    ]
}
