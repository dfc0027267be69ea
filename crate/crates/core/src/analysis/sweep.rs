//! Error-metric maps over separations `L` and atomic frequencies `ω_S`.
//!
//! Cells are independent and run on the worker pool; each finished cell is
//! appended to the checkpoint file by a single writer, so an interrupted
//! sweep resumes where it stopped and reproduces the uninterrupted table.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metric::error_metric;
use crate::dynamics::minimum_bath_sites;
use crate::io::{fmt_f64, read_table, write_header};
use crate::kernels::CorrelationKernel;
use crate::model::ModelParams;
use crate::simulate::{named_state, simulate, EdMethod, RunSpec, Solver};
use crate::{par, Error, Result};

/// Approximate solver compared against exact propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPair {
    Tcl2VsEd,
    DickeVsEd,
    LindbladVsEd,
}

impl SolverPair {
    pub fn name(&self) -> &'static str {
        match self {
            SolverPair::Tcl2VsEd => "tcl2-vs-ed",
            SolverPair::DickeVsEd => "dicke-vs-ed",
            SolverPair::LindbladVsEd => "lindblad-vs-ed",
        }
    }

    fn approximate(&self) -> Solver {
        match self {
            SolverPair::Tcl2VsEd => Solver::Tcl2,
            SolverPair::DickeVsEd => Solver::DickeEd,
            SolverPair::LindbladVsEd => Solver::Lindblad,
        }
    }
}

impl std::str::FromStr for SolverPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SolverPair::Tcl2VsEd, SolverPair::DickeVsEd, SolverPair::LindbladVsEd]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("pair", format!("unknown solver pair `{s}`")))
    }
}

/// Grid and run settings of a sweep. Atom 1 sits at site 0 and starts
/// excited (`|10⟩`); atom 2 sits at site `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Band, coupling and boundary settings; positions and `ω_S` are
    /// replaced per cell, `M` too when `auto_bath` is set.
    pub model: ModelParams,
    pub l_values: Vec<i64>,
    pub omega_values: Vec<f64>,
    pub pair: SolverPair,
    /// Averaging time `T`.
    pub t_max: f64,
    /// Steady-state window fraction; runs then extend to `2T`.
    pub steady_window: Option<f64>,
    /// Output spacing of both series.
    pub sample_dt: f64,
    /// Size the ring per cell so no wave front wraps around before the end.
    pub auto_bath: bool,
    pub workers: usize,
}

impl SweepConfig {
    pub fn new(model: ModelParams, l_values: Vec<i64>, omega_values: Vec<f64>, pair: SolverPair) -> Self {
        Self {
            model,
            l_values,
            omega_values,
            pair,
            t_max: 100.0,
            steady_window: None,
            sample_dt: 0.05,
            auto_bath: true,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_values.is_empty() || self.omega_values.is_empty() {
            return Err(Error::param("grid", "both axes need at least one value"));
        }
        if self.l_values.iter().any(|&l| l < 0) {
            return Err(Error::param("L", "separations must be non-negative"));
        }
        if self.omega_values.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("omega_S", "frequencies must be finite"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::param("t_max", "must be positive"));
        }
        let ratio = self.sample_dt / 0.01;
        if !(self.sample_dt > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::param("sample_dt", "must be a positive multiple of 0.01"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers", "need at least one worker"));
        }
        Ok(())
    }

    /// Time up to which both solvers run.
    pub fn run_time(&self) -> f64 {
        if self.steady_window.is_some() {
            2.0 * self.t_max
        } else {
            self.t_max
        }
    }

    /// Parameters of one cell.
    pub fn cell_params(&self, l: i64, omega_s: f64) -> ModelParams {
        let mut p = self.model.with_positions(vec![0, l]).with_omega_s(omega_s);
        if self.auto_bath {
            let need = minimum_bath_sites(p.half_width, self.run_time(), l);
            // atoms also keep M/4 sites from either chain end
            let margin = 4 * (l as usize + 2);
            p.sites = need.max(margin + margin % 2);
        }
        p
    }

    /// Key/value record echoed into every output header.
    pub fn describe(&self) -> Vec<(String, String)> {
        let m = &self.model;
        let list_l = self.l_values.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
        let list_w = self.omega_values.iter().map(|&w| fmt_f64(w)).collect::<Vec<_>>().join(" ");
        vec![
            ("pair".into(), self.pair.name().into()),
            ("A".into(), fmt_f64(m.band_center)),
            ("B".into(), fmt_f64(m.half_width)),
            ("g_coupling".into(), fmt_f64(m.g_coupling)),
            ("h0".into(), fmt_f64(m.h0)),
            ("periodic".into(), m.periodic.to_string()),
            ("exact".into(), if m.periodic { "ed spectral".into() } else { "ed krylov".into() }),
            ("M".into(), if self.auto_bath { "auto".into() } else { m.sites.to_string() }),
            ("T".into(), fmt_f64(self.t_max)),
            ("steady_window".into(), self.steady_window.map_or("none".into(), fmt_f64)),
            ("sample_dt".into(), fmt_f64(self.sample_dt)),
            ("L_values".into(), list_l),
            ("omega_S_values".into(), list_w),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Done,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub l: i64,
    pub omega_s: f64,
    pub delta: f64,
    pub value: f64,
    pub status: CellStatus,
}

impl SweepCell {
    fn row(&self) -> Vec<String> {
        let status = match &self.status {
            CellStatus::Done => "done",
            CellStatus::Failed(_) => "failed",
        };
        vec![self.l.to_string(), fmt_f64(self.omega_s), fmt_f64(self.delta), fmt_f64(self.value), status.into()]
    }
}

/// Cells in `L`-major order (`cells[i * |ω| + j]` is `(L_i, ω_j)`).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub l_axis: Vec<i64>,
    pub omega_axis: Vec<f64>,
    pub cells: Vec<SweepCell>,
    pub provenance: Vec<(String, String)>,
}

pub const SWEEP_COLUMNS: [&str; 5] = ["L", "omega_S", "Delta", "value", "status"];

impl SweepTable {
    pub fn cell(&self, l_idx: usize, w_idx: usize) -> &SweepCell {
        &self.cells[l_idx * self.omega_axis.len() + w_idx]
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, &self.provenance)?;
        writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
        for c in &self.cells {
            writeln!(w, "{}", c.row().join(","))?;
        }
        for c in &self.cells {
            if let CellStatus::Failed(msg) = &c.status {
                writeln!(w, "# failed L = {} omega_S = {}: {}", c.l, fmt_f64(c.omega_s), msg.replace('\n', " "))?;
            }
        }
        Ok(())
    }
}

/// `P₁` series of the exact and the approximate solver for one cell.
pub fn cell_series(cfg: &SweepConfig, l: i64, omega_s: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let p = cfg.cell_params(l, omega_s);
    let init = named_state("10", 2)?;
    let mut exact = RunSpec::new(p.clone(), Solver::Ed, init, cfg.run_time());
    exact.output_dt = Some(cfg.sample_dt);
    // one excitation on a ring: exact diagonalization in the Bloch basis is
    // far cheaper than Krylov stepping at the bath sizes a long run needs
    if p.periodic {
        exact.ed_method = EdMethod::Spectral;
    }
    let mut approx = exact.clone();
    approx.solver = cfg.pair.approximate();
    approx.kernel = CorrelationKernel::ClosedBessel;
    let a = simulate(&exact)?;
    let b = simulate(&approx)?;
    Ok((a.t_grid, a.populations[0].clone(), b.populations[0].clone()))
}

/// Error metric of one cell.
pub fn evaluate_cell(cfg: &SweepConfig, l: i64, omega_s: f64) -> Result<f64> {
    let (t, exact, approx) = cell_series(cfg, l, omega_s)?;
    let m = error_metric(&t, &exact, &approx, cfg.t_max, cfg.steady_window)?;
    if !m.value.is_finite() {
        return Err(Error::Numerical(format!("non-finite error metric at L = {l}, omega_S = {omega_s}")));
    }
    Ok(m.value)
}

const CHECKPOINT_COLUMNS: [&str; 6] = ["L", "omega_S", "Delta", "value", "status", "completed"];

fn load_checkpoint(path: &Path, provenance: &[(String, String)]) -> Result<HashMap<(i64, u64), SweepCell>> {
    let table = read_table(path)?;
    if table.header != provenance {
        return Err(Error::Config(format!(
            "{}: checkpoint was written for a different sweep configuration",
            path.display()
        )));
    }
    let mut done = HashMap::new();
    for row in &table.rows {
        if row.len() != CHECKPOINT_COLUMNS.len() || row[5] != "1" {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{s}` in checkpoint")));
        let l: i64 = row[0].parse().map_err(|_| Error::Config(format!("bad L `{}` in checkpoint", row[0])))?;
        let omega_s = parse(&row[1])?;
        let status = match row[4].as_str() {
            "done" => CellStatus::Done,
            _ => CellStatus::Failed(failure_note(&table.trailing_comments, l, &row[1])),
        };
        let cell = SweepCell { l, omega_s, delta: parse(&row[2])?, value: parse(&row[3])?, status };
        done.insert((l, omega_s.to_bits()), cell);
    }
    Ok(done)
}

fn failure_note(comments: &[String], l: i64, omega: &str) -> String {
    let prefix = format!("failed L = {l} omega_S = {omega}: ");
    comments.iter().find_map(|c| c.strip_prefix(&prefix)).unwrap_or_default().to_string()
}

/// Run every cell not already in the checkpoint (when resuming), appending
/// results to `checkpoint` as they finish.
pub fn run_sweep(cfg: &SweepConfig, checkpoint: Option<&Path>, resume: bool) -> Result<SweepTable> {
    cfg.validate()?;
    let provenance = cfg.describe();
    let mut finished = HashMap::new();
    let writer = match checkpoint {
        Some(path) => {
            let file = if resume && path.exists() {
                finished = load_checkpoint(path, &provenance)?;
                OpenOptions::new().append(true).open(path)?
            } else {
                let mut f = File::create(path)?;
                write_header(&mut f, &provenance)?;
                writeln!(f, "{}", CHECKPOINT_COLUMNS.join(","))?;
                f
            };
            Some(Mutex::new(BufWriter::new(file)))
        }
        None => None,
    };
    let edge = cfg.model.lower_edge();
    let grid: Vec<(i64, f64)> =
        cfg.l_values.iter().flat_map(|&l| cfg.omega_values.iter().map(move |&w| (l, w))).collect();
    let pending: Vec<(i64, f64)> =
        grid.iter().copied().filter(|&(l, w)| !finished.contains_key(&(l, w.to_bits()))).collect();
    log::info!("sweep: {} cells, {} already done", grid.len(), grid.len() - pending.len());

    let fresh: Vec<Result<SweepCell>> = par::with_workers(cfg.workers, || {
        par::map(&pending, |&(l, w)| {
            let (value, status) = match evaluate_cell(cfg, l, w) {
                Ok(v) => (v, CellStatus::Done),
                Err(e) => {
                    log::warn!("cell L = {l}, omega_S = {w} failed: {e}");
                    (f64::NAN, CellStatus::Failed(e.to_string()))
                }
            };
            let cell = SweepCell { l, omega_s: w, delta: w - edge, value, status };
            if let Some(wr) = &writer {
                let mut guard = wr.lock().map_err(|_| Error::Numerical("checkpoint writer poisoned".into()))?;
                let mut row = cell.row();
                row.push("1".into());
                writeln!(guard, "{}", row.join(","))?;
                if let CellStatus::Failed(msg) = &cell.status {
                    writeln!(guard, "# failed L = {l} omega_S = {}: {}", fmt_f64(w), msg.replace('\n', " "))?;
                }
                guard.flush()?;
            }
            Ok(cell)
        })
    });
    for cell in fresh {
        let cell = cell?;
        finished.insert((cell.l, cell.omega_s.to_bits()), cell);
    }
    let cells = grid
        .iter()
        .map(|&(l, w)| finished.remove(&(l, w.to_bits())).expect("every cell evaluated"))
        .collect();
    Ok(SweepTable { l_axis: cfg.l_values.clone(), omega_axis: cfg.omega_values.clone(), cells, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        let mut cfg = SweepConfig::new(ModelParams::standard(40, vec![0], 50.0), vec![1, 2], vec![49.5, 51.0], SolverPair::Tcl2VsEd);
        cfg.t_max = 0.5;
        cfg.sample_dt = 0.05;
        cfg
    }

    #[test]
    fn single_cell_equals_direct_metric() {
        let mut cfg = small();
        cfg.l_values = vec![2];
        cfg.omega_values = vec![51.0];
        let table = run_sweep(&cfg, None, false).unwrap();
        assert_eq!(table.cells.len(), 1);
        assert_eq!(table.cells[0].value, evaluate_cell(&cfg, 2, 51.0).unwrap());
        assert_eq!(table.cells[0].status, CellStatus::Done);
        assert_eq!(table.cells[0].delta, 1.0);
    }

    #[test]
    fn resume_reproduces_table() {
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("sweep.ckpt");
        let cfg = small();
        let full = run_sweep(&cfg, Some(&ck), false).unwrap();
        // keep the header and the first two finished cells, as if interrupted
        let text = std::fs::read_to_string(&ck).unwrap();
        let keep: Vec<&str> = text.lines().filter(|l| l.starts_with('#') || l.starts_with('L')).collect();
        let cells: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('L')).take(2).collect();
        std::fs::write(&ck, format!("{}\n{}\n", keep.join("\n"), cells.join("\n"))).unwrap();
        let resumed = run_sweep(&cfg, Some(&ck), true).unwrap();
        assert_eq!(full, resumed);
        let mut other = cfg.clone();
        other.t_max = 0.4;
        assert!(run_sweep(&other, Some(&ck), true).is_err());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = small();
        cfg.pair = SolverPair::LindbladVsEd;
        // M = 40 leaves no room for an atom 15 sites out
        cfg.auto_bath = false;
        cfg.l_values = vec![1, 15];
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("sweep.ckpt");
        let t = run_sweep(&cfg, Some(&ck), false).unwrap();
        assert_eq!(t.cells.len(), 4);
        assert_eq!(t.cell(0, 1).status, CellStatus::Done);
        assert!(matches!(t.cell(1, 0).status, CellStatus::Failed(_)) && t.cell(1, 0).value.is_nan());
        let again = run_sweep(&cfg, Some(&ck), true).unwrap();
        assert_eq!(format!("{:?}", again.cells), format!("{:?}", t.cells));
    }
}
