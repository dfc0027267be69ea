//! One-call front end over the solvers: resolve an initial state, run, and
//! collect observables on a uniform output grid.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    check_bath_size, density_from_atomic, evolve_lindblad_opts, evolve_tcl2_opts, propagate_krylov_with, propagate_spectral,
    solve_decay_amplitude_opts, solve_two_atom_amplitudes_opts, uniform_grid, Frames, KrylovOptions, MasterOptions,
    PureState, StateTrajectory, VolterraOptions,
};
use crate::kernels::{markov_rates, CorrelationKernel, MarkovMode};
use crate::model::{build_hamiltonian_with, BasisIndex, HamiltonianOptions, ModelParams, Sector};
use crate::observables::{atomic_populations, concurrence, frame_populations, reduce_to_atoms, von_neumann_entropy};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Krylov propagation in the single-excitation sector.
    Ed,
    /// Krylov propagation in a truncated Fock sector.
    TruncatedEd,
    Tcl2,
    Lindblad,
    /// Krylov propagation with the Dicke coupling.
    DickeEd,
    /// Collective amplitudes `c±` of two atoms (memory-kernel equations).
    Cpm,
    /// Single-atom decay amplitude `q(t)`.
    Qt,
}

impl Solver {
    pub const ALL: [Solver; 7] =
        [Solver::Ed, Solver::TruncatedEd, Solver::Tcl2, Solver::Lindblad, Solver::DickeEd, Solver::Cpm, Solver::Qt];

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Ed => "ed",
            Solver::TruncatedEd => "truncated-ed",
            Solver::Tcl2 => "tcl2",
            Solver::Lindblad => "lindblad",
            Solver::DickeEd => "dicke-ed",
            Solver::Cpm => "cpm",
            Solver::Qt => "qt",
        }
    }

    fn default_step(&self) -> f64 {
        match self {
            Solver::Cpm | Solver::Qt => VolterraOptions::default().h,
            _ => 0.01,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::param("solver", format!("unknown solver `{s}`")))
    }
}

/// Atomic part of an initial product state `|ψ_S⟩ ⊗ |vac⟩`, as
/// `(bitmask, amplitude)` pairs with bit `j` set when atom `j` is excited.
pub type AtomicAmplitudes = Vec<(u32, C64)>;

/// Named two-atom states, `psi1 = |11⟩`, `psi2 = (|10⟩ + |01⟩)/√2`,
/// `psi2tilde = (|10⟩ - |01⟩)/√2`, `psi3 = (|0⟩ + |1⟩)⊗(|0⟩ + |1⟩)/2`, or a
/// bitstring such as `"10"` whose `j`-th character is atom `j`.
pub fn named_state(name: &str, n_atoms: usize) -> Result<AtomicAmplitudes> {
    let r = C64::new(0.5f64.sqrt(), 0.0);
    let two = |v: AtomicAmplitudes| {
        if n_atoms == 2 {
            Ok(v)
        } else {
            Err(Error::param("initial_state", format!("`{name}` is a two-atom state, model has {n_atoms} atoms")))
        }
    };
    match name {
        "psi1" => two(vec![(0b11, C64::new(1.0, 0.0))]),
        "psi2" => two(vec![(0b01, r), (0b10, r)]),
        "psi2tilde" => two(vec![(0b01, r), (0b10, -r)]),
        "psi3" => two((0..4).map(|m| (m, C64::new(0.5, 0.0))).collect()),
        bits if !bits.is_empty() && bits.chars().all(|c| c == '0' || c == '1') => {
            if bits.len() != n_atoms {
                return Err(Error::param(
                    "initial_state",
                    format!("bitstring `{bits}` has {} atoms, model has {n_atoms}", bits.len()),
                ));
            }
            let mask = bits.chars().enumerate().filter(|(_, c)| *c == '1').fold(0u32, |m, (j, _)| m | 1 << j);
            Ok(vec![(mask, C64::new(1.0, 0.0))])
        }
        other => Err(Error::param("initial_state", format!("unknown state `{other}`"))),
    }
}

fn check_amplitudes(amps: &AtomicAmplitudes, n_atoms: usize) -> Result<()> {
    if amps.iter().any(|(m, _)| m >> n_atoms != 0) {
        return Err(Error::param("initial_state", format!("component outside the {n_atoms}-atom space")));
    }
    let norm: f64 = amps.iter().map(|(_, c)| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("initial state has norm² {norm}, expected 1")));
    }
    Ok(())
}

fn max_excitations(amps: &AtomicAmplitudes) -> u32 {
    amps.iter().filter(|(_, c)| c.norm_sqr() > 0.0).map(|(m, _)| m.count_ones()).max().unwrap_or(0)
}

/// How the single-excitation `ed` and `dicke-ed` runs are propagated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdMethod {
    /// Short-time Krylov steps on the sparse Hamiltonian (any sector).
    #[default]
    Krylov,
    /// Full diagonalization in the Bloch basis; one excitation, one or two
    /// atoms, periodic ring only.
    Spectral,
}

impl EdMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EdMethod::Krylov => "krylov",
            EdMethod::Spectral => "spectral",
        }
    }
}

impl FromStr for EdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [EdMethod::Krylov, EdMethod::Spectral]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param("ed_method", format!("unknown method `{s}` (krylov, spectral)")))
    }
}

/// Everything one solver run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub params: ModelParams,
    pub solver: Solver,
    pub initial: AtomicAmplitudes,
    pub t_max: f64,
    /// Solver step; `None` picks the solver default (0.01, or 0.005 for the
    /// memory-kernel solvers).
    pub dt: Option<f64>,
    /// Output sampling; `None` samples every step.
    pub output_dt: Option<f64>,
    /// Kernel of the tcl2, cpm and qt solvers.
    pub kernel: CorrelationKernel,
    pub markov: MarkovMode,
    /// Truncated sectors: excitation cutoff (default: excitations of the
    /// initial state) and per-site cutoff (default: equal to it).
    pub n_exc: Option<u32>,
    pub n_max: Option<u32>,
    pub entropy: bool,
    pub concurrence: bool,
    pub ed_method: EdMethod,
}

impl RunSpec {
    pub fn new(params: ModelParams, solver: Solver, initial: AtomicAmplitudes, t_max: f64) -> Self {
        Self {
            params,
            solver,
            initial,
            t_max,
            dt: None,
            output_dt: None,
            kernel: CorrelationKernel::ClosedBessel,
            markov: MarkovMode::Analytic,
            n_exc: None,
            n_max: None,
            entropy: false,
            concurrence: false,
            ed_method: EdMethod::Krylov,
        }
    }

    pub fn step(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.solver.default_step())
    }

    pub fn output_grid(&self) -> Result<Vec<f64>> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::param("t_max", format!("must be positive, got {}", self.t_max)));
        }
        let dt = self.step();
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let out = self.output_dt.unwrap_or(dt);
        let ratio = out / dt;
        if !(out > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::param("output_dt", format!("{out} is not a positive multiple of the step {dt}")));
        }
        Ok(uniform_grid(self.t_max, out))
    }

    /// Every check that does not need a run: parameters, state, grid and
    /// solver/state compatibility.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        p.validate()?;
        let n = p.n_atoms();
        check_amplitudes(&self.initial, n)?;
        self.output_grid()?;
        if self.concurrence && n != 2 {
            return Err(Error::param("concurrence", format!("needs two atoms, model has {n}")));
        }
        let no_field = |what: &str| {
            if self.entropy {
                Err(Error::param("entropy", format!("{} tracks {what} only", self.solver)))
            } else {
                Ok(())
            }
        };
        match self.solver {
            Solver::Ed | Solver::TruncatedEd | Solver::DickeEd => {
                let sector = self.sector()?;
                if self.ed_method == EdMethod::Spectral {
                    if !matches!(sector, Sector::SingleExcitation | Sector::DickeSingle) {
                        return Err(Error::param(
                            "ed_method",
                            format!("the spectral method covers one excitation only, not the {} sector", sector.label()),
                        ));
                    }
                    if !p.periodic || n > 2 {
                        return Err(Error::param("ed_method", "the spectral method needs a periodic ring and 1 or 2 atoms"));
                    }
                }
                Ok(())
            }
            Solver::Tcl2 | Solver::Lindblad => no_field("the atomic density operator"),
            Solver::Cpm => {
                if n != 2 {
                    return Err(Error::param("solver", format!("cpm needs two atoms, model has {n}")));
                }
                if self.initial.iter().any(|&(m, c)| m != 0b01 && m != 0b10 && c.norm_sqr() > 0.0) {
                    return Err(Error::param("initial_state", "cpm needs a state in the span of |10⟩ and |01⟩"));
                }
                no_field("atomic amplitudes")
            }
            Solver::Qt => {
                if n != 1 {
                    return Err(Error::param("solver", format!("qt needs one atom, model has {n}")));
                }
                if self.initial.iter().any(|&(m, c)| m != 1 && c.norm_sqr() > 0.0) {
                    return Err(Error::param("initial_state", "qt starts from the excited atom"));
                }
                no_field("the atomic amplitude")
            }
        }
    }

    /// ED sector implied by the solver and the initial state.
    pub fn sector(&self) -> Result<Sector> {
        let exc = max_excitations(&self.initial);
        let truncated = || {
            let n_exc = self.n_exc.unwrap_or(exc.max(1));
            let n_max = self.n_max.unwrap_or(n_exc);
            if n_exc < exc {
                return Err(Error::param("n_exc", format!("{n_exc} is below the {exc} initial excitations")));
            }
            Ok((n_max, n_exc))
        };
        match self.solver {
            Solver::Ed if exc <= 1 => Ok(Sector::SingleExcitation),
            Solver::Ed => Err(Error::param(
                "solver",
                format!("ed holds one excitation, the initial state has {exc}; use truncated-ed"),
            )),
            Solver::TruncatedEd => truncated().map(|(n_max, n_exc)| Sector::TruncatedFock { n_max, n_exc }),
            Solver::DickeEd if exc <= 1 && self.n_exc.is_none() => Ok(Sector::DickeSingle),
            Solver::DickeEd => truncated().map(|(n_max, n_exc)| Sector::DickeTruncated { n_max, n_exc }),
            _ => Err(Error::param("solver", format!("{} has no Hilbert-space sector", self.solver))),
        }
    }
}

/// Observables of one run on the output grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub t_grid: Vec<f64>,
    /// `populations[j][i]`: atom `j` at `t_grid[i]`.
    pub populations: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub entropy: Option<Vec<f64>>,
    pub concurrence: Option<Vec<f64>>,
    /// Most negative density eigenvalue met (master equations only).
    pub min_eigenvalue: Option<f64>,
    /// Short description of the representation actually used.
    pub representation: String,
}

pub fn simulate(spec: &RunSpec) -> Result<SimulationOutput> {
    spec.validate()?;
    let grid = spec.output_grid()?;
    match spec.solver {
        Solver::Ed | Solver::TruncatedEd | Solver::DickeEd => run_ed(spec, &grid),
        Solver::Tcl2 | Solver::Lindblad => run_master(spec, &grid),
        Solver::Cpm => run_cpm(spec, &grid),
        Solver::Qt => run_qt(spec, &grid),
    }
}

fn run_ed(spec: &RunSpec, grid: &[f64]) -> Result<SimulationOutput> {
    let p = &spec.params;
    let sector = spec.sector()?;
    check_bath_size(p, spec.t_max);
    if spec.ed_method == EdMethod::Spectral {
        return run_spectral(spec, sector, grid);
    }
    let basis = BasisIndex::new(sector, p.n_atoms(), p.sites)?;
    let h = build_hamiltonian_with(p, &basis, HamiltonianOptions { allow_occupation_truncation: true })?;
    let psi0 = PureState::from_atomic(&basis, &spec.initial)?;
    let opts = KrylovOptions { dt: spec.step(), ..KrylovOptions::default() };
    let mut pops = Vec::with_capacity(grid.len());
    let mut entropy = Vec::new();
    let mut conc = Vec::new();
    let mut failure = None;
    propagate_krylov_with(&h, &psi0, grid, opts, |_, _, s| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            pops.push(frame_populations(s, &basis)?);
            if spec.entropy || spec.concurrence {
                let rho = reduce_to_atoms(s, &basis)?;
                if spec.entropy {
                    entropy.push(von_neumann_entropy(&rho));
                }
                if spec.concurrence {
                    conc.push(concurrence(&rho)?);
                }
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let representation = format!("{} (dim {})", sector.label(), basis.dim());
    Ok(assemble(grid, pops, spec.entropy.then_some(entropy), spec.concurrence.then_some(conc), None, representation))
}

fn run_spectral(spec: &RunSpec, sector: Sector, grid: &[f64]) -> Result<SimulationOutput> {
    let mut p = spec.params.clone();
    match sector {
        Sector::DickeSingle => {
            let site = p.atom_positions[0];
            p.atom_positions.iter_mut().for_each(|x| *x = site);
        }
        _ => {}
    }
    let n = p.n_atoms();
    let mut c0 = vec![C64::new(0.0, 0.0); n];
    let mut vacuum = C64::new(0.0, 0.0);
    for &(mask, c) in &spec.initial {
        match mask {
            0 => vacuum += c,
            m => c0[m.trailing_zeros() as usize] += c,
        }
    }
    let amps = propagate_spectral(&p, &c0, grid)?;
    let frames: Vec<Vec<f64>> = (0..grid.len()).map(|i| amps.iter().map(|a| a[i].norm_sqr()).collect()).collect();
    let mut entropy = Vec::new();
    let mut conc = Vec::new();
    if spec.entropy || spec.concurrence {
        for i in 0..grid.len() {
            let mut coeffs: Vec<(u32, C64)> = (0..n).map(|j| (1u32 << j, amps[j][i])).collect();
            coeffs.push((0, vacuum));
            // the photon-carrying remainder traces out to the atomic ground state
            let mut rho = density_from_atomic(n, &coeffs);
            let field = 1.0 - rho.trace().re;
            let last = rho.nrows() - 1;
            rho[(last, last)] += C64::new(field.max(0.0), 0.0);
            if spec.entropy {
                entropy.push(von_neumann_entropy(&rho));
            }
            if spec.concurrence {
                conc.push(concurrence(&rho)?);
            }
        }
    }
    let representation = format!("{} (Bloch-basis diagonalization, M = {})", sector.label(), p.sites);
    Ok(assemble(grid, frames, spec.entropy.then_some(entropy), spec.concurrence.then_some(conc), None, representation))
}

fn run_master(spec: &RunSpec, grid: &[f64]) -> Result<SimulationOutput> {
    let p = &spec.params;
    let rho0 = density_from_atomic(p.n_atoms(), &spec.initial);
    let opts = MasterOptions { dt: spec.step(), ..MasterOptions::default() };
    let traj = match spec.solver {
        Solver::Tcl2 => evolve_tcl2_opts(p, &spec.kernel, &rho0, grid, opts)?,
        _ => {
            let mode = if p.derived().delta == 0.0 { MarkovMode::Numeric } else { spec.markov };
            evolve_lindblad_opts(p, &markov_rates(p, mode)?, &rho0, grid, opts)?
        }
    };
    let conc = if spec.concurrence { Some(density_concurrence(&traj)?) } else { None };
    let pops = atomic_populations(&traj)?;
    let frames = (0..grid.len()).map(|i| pops.per_atom.iter().map(|s| s[i]).collect()).collect();
    let label = match spec.solver {
        Solver::Tcl2 => format!("density operator, {} kernel", spec.kernel.label()),
        _ => "density operator, constant rates".to_string(),
    };
    Ok(assemble(grid, frames, None, conc, traj.min_eigenvalue, label))
}

/// Concurrence of master-equation frames; frames pushed outside the positive
/// cone by TCL2 are reported as NaN instead of aborting the run.
fn density_concurrence(traj: &StateTrajectory) -> Result<Vec<f64>> {
    let Frames::Density(rhos) = &traj.frames else {
        return Err(Error::InvalidState("expected density frames".into()));
    };
    Ok(rhos.iter().map(|r| concurrence(r).unwrap_or(f64::NAN)).collect())
}

fn run_cpm(spec: &RunSpec, grid: &[f64]) -> Result<SimulationOutput> {
    let p = &spec.params;
    let mut c1 = C64::new(0.0, 0.0);
    let mut c2 = C64::new(0.0, 0.0);
    for &(m, c) in &spec.initial {
        match m {
            0b01 => c1 += c,
            0b10 => c2 += c,
            _ => {}
        }
    }
    let r = 0.5f64.sqrt();
    let init = ((c1 + c2) * r, (c1 - c2) * r);
    let l = p.atom_positions[1] - p.atom_positions[0];
    let opts = VolterraOptions { h: spec.step(), ..VolterraOptions::default() };
    let amps = solve_two_atom_amplitudes_opts(p, &spec.kernel, init, l, grid, opts)?;
    let (a1, a2) = (amps.c1(), amps.c2());
    let frames: Vec<Vec<f64>> = a1.iter().zip(&a2).map(|(x, y)| vec![x.norm_sqr(), y.norm_sqr()]).collect();
    let conc = spec.concurrence.then(|| a1.iter().zip(&a2).map(|(x, y)| 2.0 * (x * y.conj()).norm()).collect());
    Ok(assemble(grid, frames, None, conc, None, format!("c± amplitudes, {} kernel", spec.kernel.label())))
}

fn run_qt(spec: &RunSpec, grid: &[f64]) -> Result<SimulationOutput> {
    let p = &spec.params;
    let opts = VolterraOptions { h: spec.step(), ..VolterraOptions::default() };
    let q = solve_decay_amplitude_opts(p, &spec.kernel, grid, opts)?;
    let frames = q.iter().map(|q| vec![q.norm_sqr()]).collect();
    Ok(assemble(grid, frames, None, None, None, format!("q(t), {} kernel", spec.kernel.label())))
}

fn assemble(
    grid: &[f64],
    frames: Vec<Vec<f64>>,
    entropy: Option<Vec<f64>>,
    concurrence: Option<Vec<f64>>,
    min_eigenvalue: Option<f64>,
    representation: String,
) -> SimulationOutput {
    let n = frames.first().map_or(0, |f| f.len());
    let populations = (0..n).map(|j| frames.iter().map(|f| f[j]).collect()).collect();
    let total = frames.iter().map(|f| f.iter().sum()).collect();
    SimulationOutput { t_grid: grid.to_vec(), populations, total, entropy, concurrence, min_eigenvalue, representation }
}

/// `|ψ⟩⟨ψ|` of an atomic state in the computational ordering.
pub fn initial_density(n_atoms: usize, amps: &AtomicAmplitudes) -> DMatrix<C64> {
    density_from_atomic(n_atoms, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_states() {
        assert_eq!(named_state("10", 2).unwrap(), vec![(0b01, C64::new(1.0, 0.0))]);
        assert_eq!(named_state("011", 3).unwrap(), vec![(0b110, C64::new(1.0, 0.0))]);
        assert!(named_state("psi1", 3).is_err());
        assert!(named_state("1", 2).is_err());
        assert!(named_state("bogus", 2).is_err());
        let psi3 = named_state("psi3", 2).unwrap();
        assert!((psi3.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
    }

    #[test]
    fn uncoupled_runs_keep_populations() {
        let p = ModelParams::standard(40, vec![0, 3], 51.0).with_coupling(0.0);
        for solver in [Solver::Ed, Solver::Tcl2, Solver::Cpm, Solver::DickeEd] {
            let mut spec = RunSpec::new(p.clone(), solver, named_state("10", 2).unwrap(), 1.0);
            spec.output_dt = Some(0.1);
            spec.markov = MarkovMode::Numeric;
            let out = simulate(&spec).unwrap();
            for v in &out.populations[0] {
                assert!((v - 1.0).abs() < 1e-12, "{solver}: {v}");
            }
        }
    }

    #[test]
    fn sector_selection() {
        let p = ModelParams::standard(40, vec![0, 3], 49.0);
        let spec = RunSpec::new(p.clone(), Solver::Ed, named_state("psi1", 2).unwrap(), 1.0);
        assert!(spec.sector().is_err());
        let spec = RunSpec { solver: Solver::TruncatedEd, ..spec };
        assert_eq!(spec.sector().unwrap(), Sector::truncated(2));
        let spec = RunSpec { solver: Solver::DickeEd, initial: named_state("10", 2).unwrap(), ..spec };
        assert_eq!(spec.sector().unwrap(), Sector::DickeSingle);
    }

    #[test]
    fn incompatible_requests() {
        let p = ModelParams::standard(40, vec![0], 49.0);
        let spec = RunSpec::new(p.clone(), Solver::Cpm, named_state("1", 1).unwrap(), 1.0);
        assert!(simulate(&spec).is_err());
        let spec = RunSpec { solver: Solver::Qt, initial: named_state("0", 1).unwrap(), ..spec };
        assert!(simulate(&spec).is_err());
        let mut spec = RunSpec { solver: Solver::Ed, initial: named_state("1", 1).unwrap(), ..spec };
        spec.output_dt = Some(0.015);
        assert!(simulate(&spec).is_err());
    }

    #[test]
    fn spectral_and_krylov_agree() {
        let p = ModelParams::standard(160, vec![0, 4], 50.5);
        let mut a = RunSpec::new(p, Solver::Ed, named_state("10", 2).unwrap(), 3.0);
        a.output_dt = Some(0.1);
        a.entropy = true;
        a.concurrence = true;
        let mut b = a.clone();
        b.ed_method = EdMethod::Spectral;
        let (x, y) = (simulate(&a).unwrap(), simulate(&b).unwrap());
        for (u, v) in [
            (&x.populations[0], &y.populations[0]),
            (&x.populations[1], &y.populations[1]),
            (x.entropy.as_ref().unwrap(), y.entropy.as_ref().unwrap()),
            (x.concurrence.as_ref().unwrap(), y.concurrence.as_ref().unwrap()),
        ] {
            assert!(u.iter().zip(v).all(|(p, q)| (p - q).abs() < 1e-7));
        }
        let mut d = RunSpec { solver: Solver::DickeEd, ..a.clone() };
        let dk = simulate(&d).unwrap();
        d.ed_method = EdMethod::Spectral;
        let ds = simulate(&d).unwrap();
        assert!(dk.populations[0].iter().zip(&ds.populations[0]).all(|(p, q)| (p - q).abs() < 1e-8));
        b.initial = named_state("psi1", 2).unwrap();
        assert!(simulate(&b).is_err());
    }

    #[test]
    fn ed_and_memory_kernel_agree() {
        let p = ModelParams::standard(120, vec![0, 2], 51.0);
        let mut ed = RunSpec::new(p.clone(), Solver::Ed, named_state("10", 2).unwrap(), 1.0);
        ed.output_dt = Some(0.05);
        let mut cpm = ed.clone();
        cpm.solver = Solver::Cpm;
        cpm.kernel = CorrelationKernel::DiscreteSum;
        let a = simulate(&ed).unwrap();
        let b = simulate(&cpm).unwrap();
        for (x, y) in a.populations[0].iter().zip(&b.populations[0]) {
            assert!((x - y).abs() < 1e-4);
        }
    }
}
