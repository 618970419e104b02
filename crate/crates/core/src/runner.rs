//! Run configuration, validation and orchestration of the three run modes,
//! with artifact emission and a checksummed manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aligned::{
    ensemble_predict, load_ensemble, vortex_tube_scenario, OdeOptions, TubeParams,
};
use crate::error::{Error, Result};
use crate::flow::{write_snapshot, FlowState, Preset, CFL_NUMBER};
use crate::functionals::{
    doubly_aligned_monitor, enstrophy_functionals, hessian_aligned_monitor, inequality_check,
    reduce_probes, reduce_state, spectral_enstrophy, Condition, MonitorParams, Region,
};
use crate::probes::{
    fmt_num, material_derivative_checks, sample_probes, seed_probes, trajectories_csv, FramePolicy,
    IdentityReport, ProbeTrajectory, SeedSpec, MIN_IDENTITY_SAMPLES,
};
use crate::scalar::Real;
use crate::spectral::Grid;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "EULERLAB_OUT";

/// Run mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Odemodel,
    Tube,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Odemodel => "odemodel",
            Mode::Tube => "tube",
        }
    }
}

/// Floating point precision of the field solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

/// Alignment monitor selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    HessianAligned,
    DoublyAligned,
}

/// Run configuration. Every field is optional so that a TOML file and
/// command-line flags can be layered; [`RunConfig::resolved`] fills defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[arg(skip)]
    pub mode: Option<Mode>,
    /// Grid points per axis (power of two, at least 16).
    #[arg(long)]
    pub n: Option<usize>,
    /// Initial condition: taylor_green, abc, random_solenoidal, uniform, zero.
    #[arg(long)]
    pub preset: Option<String>,
    /// ABC coefficients `a,b,c`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub abc: Option<Vec<f64>>,
    /// Energy spectrum exponent of the random preset.
    #[arg(long)]
    pub spectrum_slope: Option<f64>,
    /// Largest wavenumber magnitude of the random preset.
    #[arg(long)]
    pub spectrum_cutoff: Option<f64>,
    /// Velocity `u1,u2,u3` of the uniform preset.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub velocity: Option<Vec<f64>>,
    /// Fixed time step; derived from `cfl` when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    /// CFL number used to derive `dt` from the initial state.
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Time between recorded samples (rounded to whole steps).
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Probe placement: `uniform:M` or `random:COUNT`.
    #[arg(long)]
    pub probes: Option<String>,
    /// Explicit probe positions (config file only).
    #[arg(skip)]
    pub probe_positions: Option<Vec<[f64; 3]>>,
    /// Integration region of the functionals.
    #[arg(long, value_enum)]
    pub region: Option<Region>,
    /// Exponent of the `φ` functional.
    #[arg(long)]
    pub phi_exponent: Option<u32>,
    /// Alignment constant for the doubly aligned monitor and the ensemble.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Monitors to run.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub monitors: Option<Vec<MonitorKind>>,
    /// Start of the monitor window.
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub eps_align: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// Also write the final velocity snapshot.
    #[arg(long)]
    pub snapshot: Option<bool>,
    /// Ensemble file for `odemodel`.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long)]
    pub ode_dt: Option<f64>,
    #[arg(long)]
    pub blowup_threshold: Option<f64>,
    #[arg(long)]
    pub mu_a: Option<f64>,
    #[arg(long)]
    pub mu_bc: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub omega0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub hessian_offsets: Option<Vec<f64>>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Parse TOML text; errors carry line and field information.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            mode,
            n,
            preset,
            abc,
            spectrum_slope,
            spectrum_cutoff,
            velocity,
            dt,
            cfl,
            t_end,
            sample_interval,
            probes,
            probe_positions,
            region,
            phi_exponent,
            c0,
            monitors,
            t0,
            eps_align,
            output_dir,
            seed,
            precision,
            snapshot,
            ensemble,
            ode_dt,
            blowup_threshold,
            mu_a,
            mu_bc,
            omega0,
            hessian_offsets
        );
        self
    }

    /// Fill every unset field with its default. Required fields (`mode`,
    /// and `ensemble` for `odemodel`) stay unset.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.n.get_or_insert(32);
        c.preset.get_or_insert_with(|| "taylor_green".into());
        c.cfl.get_or_insert(0.25);
        c.t_end.get_or_insert(match c.mode {
            Some(Mode::Tube) => 2.0,
            _ => 0.5,
        });
        c.sample_interval.get_or_insert(0.01);
        if c.probe_positions.is_none() {
            c.probes.get_or_insert_with(|| "random:8".into());
        }
        c.region.get_or_insert(Region::WholeBox);
        c.phi_exponent.get_or_insert(1);
        c.monitors
            .get_or_insert_with(|| vec![MonitorKind::HessianAligned]);
        c.t0.get_or_insert(0.0);
        c.eps_align.get_or_insert(1e-3);
        c.seed.get_or_insert(0);
        c.precision.get_or_insert(Precision::F64);
        c.snapshot.get_or_insert(false);
        c.ode_dt.get_or_insert(crate::aligned::ELEMENT_DT);
        c.blowup_threshold
            .get_or_insert(crate::aligned::BLOWUP_THRESHOLD);
        let tube = TubeParams::default();
        c.mu_a.get_or_insert(tube.mu_a);
        c.mu_bc.get_or_insert(tube.mu_bc);
        c.omega0.get_or_insert_with(|| tube.omega0.to_vec());
        c.hessian_offsets.get_or_insert_with(|| vec![0.0; 3]);
        if c.output_dir.is_none() {
            let root = std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("eulerlab-out"));
            c.output_dir = Some(root.join(c.mode.map_or("run", Mode::name)));
        }
        c
    }

    /// Initial condition described by the preset fields.
    pub fn preset(&self) -> Result<Preset> {
        let name = self.preset.as_deref().unwrap_or("taylor_green");
        let base = Preset::from_name(name)?;
        Ok(match base {
            Preset::Abc { a, b, c } => {
                let v = self.abc.clone().unwrap_or_else(|| vec![a, b, c]);
                Preset::Abc {
                    a: v[0],
                    b: v[1],
                    c: v[2],
                }
            }
            Preset::RandomSolenoidal { slope, cutoff, .. } => Preset::RandomSolenoidal {
                seed: self.seed.unwrap_or(0),
                slope: self.spectrum_slope.unwrap_or(slope),
                cutoff: self.spectrum_cutoff.unwrap_or(cutoff),
            },
            Preset::Uniform { velocity } => {
                let v = self.velocity.clone().unwrap_or_else(|| velocity.to_vec());
                Preset::Uniform {
                    velocity: [v[0], v[1], v[2]],
                }
            }
            other => other,
        })
    }

    /// Probe placement.
    pub fn seed_spec(&self) -> Result<SeedSpec> {
        if let Some(p) = &self.probe_positions {
            return Ok(SeedSpec::Explicit {
                positions: p.clone(),
            });
        }
        let text = self.probes.as_deref().unwrap_or("random:8");
        let (kind, arg) = text.split_once(':').ok_or_else(|| {
            Error::Config(format!(
                "probes: expected `uniform:M` or `random:COUNT`, got `{text}`"
            ))
        })?;
        let count: usize = arg
            .parse()
            .map_err(|_| Error::Config(format!("probes: `{arg}` is not a count")))?;
        match kind {
            "uniform" => Ok(SeedSpec::Uniform { per_axis: count }),
            "random" => Ok(SeedSpec::Random {
                count,
                seed: self.seed.unwrap_or(0),
            }),
            _ => Err(Error::Config(format!("probes: unknown placement `{kind}`"))),
        }
    }

    pub fn tube_params(&self) -> TubeParams {
        let d = TubeParams::default();
        let triple = |v: &Option<Vec<f64>>, dflt: [f64; 3]| {
            v.as_ref()
                .filter(|v| v.len() == 3)
                .map_or(dflt, |v| [v[0], v[1], v[2]])
        };
        TubeParams {
            mu_a: self.mu_a.unwrap_or(d.mu_a),
            mu_bc: self.mu_bc.unwrap_or(d.mu_bc),
            omega0: triple(&self.omega0, d.omega0),
            t_end: self.t_end.unwrap_or(d.t_end),
            dt: self.dt.unwrap_or(d.dt),
            hessian_offsets: triple(&self.hessian_offsets, [0.0; 3]),
            sample_every: 1,
        }
    }
}

/// Every problem with a configuration, one message per offending field.
pub fn validate(config: &RunConfig) -> Vec<String> {
    let mut errs = Vec::new();
    let mut need = |ok: bool, msg: String| {
        if !ok {
            errs.push(msg);
        }
    };
    let positive = |v: Option<f64>| v.is_none_or(|v| v > 0.0 && v.is_finite());
    need(
        config.mode.is_some(),
        "mode: required (simulate, odemodel or tube)".into(),
    );
    if let Some(n) = config.n {
        need(
            n >= 16 && n.is_power_of_two(),
            format!("n: grid size must be a power of two >= 16, got {n}"),
        );
    } else if config.mode.is_none() || config.mode == Some(Mode::Simulate) {
        need(
            false,
            "n: required for simulate (power of two >= 16)".into(),
        );
    }
    if let Some(p) = &config.preset {
        need(
            Preset::from_name(p).is_ok(),
            format!("preset: unknown `{p}` (taylor_green, abc, random_solenoidal, uniform, zero)"),
        );
    } else if config.mode.is_none() || config.mode == Some(Mode::Simulate) {
        need(false, "preset: required for simulate".into());
    }
    if config.t_end.is_none() && config.mode.is_none() {
        need(false, "t_end: required".into());
    }
    for (name, v) in [
        ("dt", config.dt),
        ("t_end", config.t_end),
        ("sample_interval", config.sample_interval),
        ("spectrum_cutoff", config.spectrum_cutoff),
        ("ode_dt", config.ode_dt),
        ("blowup_threshold", config.blowup_threshold),
        ("eps_align", config.eps_align),
    ] {
        need(
            positive(v),
            format!(
                "{name}: must be positive and finite, got {}",
                v.unwrap_or(0.0)
            ),
        );
    }
    if let Some(c) = config.cfl {
        need(
            c > 0.0 && c <= CFL_NUMBER,
            format!("cfl: must lie in (0, {CFL_NUMBER}], got {c}"),
        );
    }
    if let Some(e) = config.eps_align {
        need(e < 1.0, format!("eps_align: must be below 1, got {e}"));
    }
    if let Some(k) = config.phi_exponent {
        need(k >= 1, "phi_exponent: must be a positive integer".into());
    }
    for (name, v) in [
        ("abc", &config.abc),
        ("velocity", &config.velocity),
        ("omega0", &config.omega0),
        ("hessian_offsets", &config.hessian_offsets),
    ] {
        if let Some(v) = v {
            need(
                v.len() == 3 && v.iter().all(|x| x.is_finite()),
                format!("{name}: expected three finite numbers"),
            );
        }
    }
    if let (Some(dt), Some(si)) = (config.dt, config.sample_interval) {
        need(
            si >= dt,
            format!("sample_interval: {si} is shorter than dt = {dt}"),
        );
    }
    if let (Some(te), Some(si)) = (config.t_end, config.sample_interval) {
        let samples = (te / si).floor() as usize + 1;
        if config.mode != Some(Mode::Tube) {
            need(
                samples >= MIN_IDENTITY_SAMPLES,
                format!(
                    "sample_interval: t_end / sample_interval gives {samples} samples, at least {MIN_IDENTITY_SAMPLES} are needed"
                ),
            );
        }
    }
    if config.probes.is_some() || config.probe_positions.is_some() {
        match config.seed_spec() {
            Err(e) => need(false, e.to_string().replace("config error: ", "")),
            Ok(SeedSpec::Uniform { per_axis: 0 }) | Ok(SeedSpec::Random { count: 0, .. }) => {
                need(false, "probes: probe set is empty".into())
            }
            Ok(SeedSpec::Explicit { positions }) if positions.is_empty() => {
                need(false, "probe_positions: probe set is empty".into())
            }
            _ => {}
        }
    }
    let wants_c0 = config.mode == Some(Mode::Odemodel)
        || config
            .monitors
            .as_ref()
            .is_some_and(|m| m.contains(&MonitorKind::DoublyAligned));
    match config.c0 {
        Some(c0) if wants_c0 && !(c0 > 3.0) => need(
            false,
            format!("c0: the doubly aligned condition requires c₀ > 3, got {c0}"),
        ),
        None if wants_c0 => need(false, "c0: required (must satisfy c₀ > 3)".into()),
        _ => {}
    }
    if config.mode == Some(Mode::Odemodel) {
        need(
            config.ensemble.is_some(),
            "ensemble: required for odemodel".into(),
        );
    }
    if config.mode == Some(Mode::Tube) {
        let p = config.tube_params();
        need(
            p.mu_a > 0.0 && p.mu_bc < 0.0,
            format!(
                "mu_a, mu_bc: need mu_a > 0 > mu_bc, got {} and {}",
                p.mu_a, p.mu_bc
            ),
        );
        need(
            (p.mu_a + 2.0 * p.mu_bc).abs() <= 1e-12 * p.mu_a.abs(),
            "mu_a, mu_bc: strain must be trace free (mu_a + 2 mu_bc = 0)".into(),
        );
    }
    errs
}

/// One written artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    /// Fully resolved configuration; rerunning it reproduces the outputs.
    pub config: RunConfig,
    pub wall_time_seconds: f64,
    pub outputs: Vec<ArtifactEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.entries.push(ArtifactEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn finish(self, config: &RunConfig, mode: Mode, started: Instant) -> Result<RunSummary> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode,
            config: config.clone(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            outputs: self.entries,
        };
        fs::write(
            self.dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(RunSummary {
            output_dir: self.dir,
            manifest,
        })
    }
}

/// What a successful run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

/// Validate, resolve and execute a configuration.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let errs = validate(config);
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("; ")));
    }
    let config = config.resolved();
    match config.mode.expect("validated") {
        Mode::Simulate => match config.precision.unwrap_or(Precision::F64) {
            Precision::F64 => run_simulate::<f64>(&config),
            Precision::F32 => run_simulate::<f32>(&config),
        },
        Mode::Odemodel => run_odemodel(&config),
        Mode::Tube => run_tube(&config),
    }
}

/// Per-sample integral diagnostics of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub helicity: f64,
    pub enstrophy: f64,
    pub max_vorticity: f64,
    /// Trapezoidal `∫ max|ω| dt` from the first sample.
    pub bkm_integral: f64,
    pub max_divergence: f64,
    pub max_gradient: f64,
    /// `max|tr P − (|ω|²/2 − S:S)| / max|P|`.
    pub trace_defect: f64,
    /// Relative gap between grid and Parseval enstrophy.
    pub quadrature_gap: f64,
}

const DIAGNOSTICS_HEADER: &str =
    "t,energy,helicity,enstrophy,max_vorticity,bkm_integral,max_divergence,max_gradient,trace_defect,quadrature_gap";

/// Identity residuals of every probe, plus inequality and quadrature checks.
#[derive(Clone, Debug, Serialize)]
struct SimulationSummary {
    dt: f64,
    steps: usize,
    sample_every: usize,
    identity_reports: Vec<IdentityReport>,
    inequalities: crate::functionals::InequalityReport,
    max_trace_defect: f64,
    max_quadrature_gap: f64,
}

fn run_simulate<T: Real>(config: &RunConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let n = config.n.expect("resolved");
    let grid = Grid::<T>::new(n)?;
    let mut state = FlowState::init(&config.preset()?, &grid)?;
    let mut positions = seed_probes(&grid, &config.seed_spec()?)?;
    let t_end = config.t_end.expect("resolved");
    let dt = match config.dt {
        Some(dt) => dt,
        None => {
            let limit = state.max_stable_dt().to_f64_lossy();
            let derived = config.cfl.expect("resolved") / CFL_NUMBER * limit;
            if derived.is_finite() {
                derived.min(t_end)
            } else {
                // a fluid at rest has no CFL limit
                config.sample_interval.expect("resolved")
            }
        }
    };
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let sample_every = ((config.sample_interval.expect("resolved") / dt).round() as usize).max(1);
    let params = MonitorParams {
        eps_align: config.eps_align.expect("resolved"),
        c0: config.c0,
    };
    let region = config.region.expect("resolved");
    let out_dir = config.output_dir.clone().expect("resolved");
    let mut artifacts = Artifacts::new(&out_dir)?;

    let mut trajs: Vec<ProbeTrajectory<T>> =
        (0..positions.len()).map(ProbeTrajectory::new).collect();
    let mut snaps = Vec::new();
    let mut diag_rows: Vec<DiagnosticsRow> = Vec::new();
    let dt_t = T::lit(dt);
    for step in 0..=steps {
        if step > 0 {
            if let Err(e) = state.advance(dt_t, &mut positions) {
                return Err(dump_on_fault(e, &state, &out_dir));
            }
        }
        if step % sample_every != 0 && step != steps {
            continue;
        }
        let samples = sample_probes(&mut state, &positions)?;
        let snap = match region {
            Region::WholeBox => reduce_state(&mut state, &params)?,
            Region::ProbeVolume => reduce_probes(&samples, grid.volume(), &params)?,
        };
        for (tr, s) in trajs.iter_mut().zip(samples) {
            tr.push(s)?;
        }
        let d = state.diagnostics()?;
        let (defect, pmax) = state.trace_identity_defect()?;
        let spectral = spectral_enstrophy(&mut state)?;
        let quadrature_gap = if d.enstrophy > 0.0 {
            (spectral - d.enstrophy).abs() / d.enstrophy
        } else {
            0.0
        };
        let bkm = diag_rows.last().map_or(0.0, |p| {
            p.bkm_integral + 0.5 * (d.t - p.t) * (d.max_vorticity + p.max_vorticity)
        });
        diag_rows.push(DiagnosticsRow {
            t: d.t,
            energy: d.energy,
            helicity: d.helicity,
            enstrophy: d.enstrophy,
            max_vorticity: d.max_vorticity,
            bkm_integral: bkm,
            max_divergence: d.max_divergence,
            max_gradient: d.max_gradient,
            trace_defect: if pmax > T::zero() {
                (defect / pmax).to_f64_lossy()
            } else {
                0.0
            },
            quadrature_gap,
        });
        snaps.push(snap);
    }

    let series = enstrophy_functionals(&snaps, region, config.phi_exponent.expect("resolved"))?;
    let inequalities = inequality_check(&series)?;
    let t0 = config.t0.expect("resolved");
    let mut monitor_files = Vec::new();
    for m in config.monitors.clone().expect("resolved") {
        let verdict = match m {
            MonitorKind::HessianAligned => hessian_aligned_monitor(&snaps, t0, params.eps_align)?,
            MonitorKind::DoublyAligned => {
                doubly_aligned_monitor(&snaps, t0, config.c0.expect("validated"), params.eps_align)?
            }
        };
        let name = match verdict.condition {
            Condition::HessianAligned => "monitor_hessian_aligned.json",
            Condition::DoublyAligned => "monitor_doubly_aligned.json",
        };
        monitor_files.push((name, verdict.to_json()?));
    }
    let identity_reports = trajs
        .iter()
        .map(material_derivative_checks)
        .collect::<Result<Vec<_>>>()?;
    let summary = SimulationSummary {
        dt,
        steps,
        sample_every,
        identity_reports,
        inequalities,
        max_trace_defect: diag_rows.iter().map(|r| r.trace_defect).fold(0.0, f64::max),
        max_quadrature_gap: diag_rows
            .iter()
            .map(|r| r.quadrature_gap)
            .fold(0.0, f64::max),
    };

    let mut diag_csv = String::from(DIAGNOSTICS_HEADER);
    diag_csv.push('\n');
    for r in &diag_rows {
        let vals = [
            r.t,
            r.energy,
            r.helicity,
            r.enstrophy,
            r.max_vorticity,
            r.bkm_integral,
            r.max_divergence,
            r.max_gradient,
            r.trace_defect,
            r.quadrature_gap,
        ];
        diag_csv.push_str(&vals.map(fmt_num).join(","));
        diag_csv.push('\n');
    }
    artifacts.write("functionals.csv", series.to_csv().as_bytes())?;
    artifacts.write(
        "trajectories.csv",
        trajectories_csv(&trajs, FramePolicy::PrincipalAxes).as_bytes(),
    )?;
    artifacts.write("diagnostics.csv", diag_csv.as_bytes())?;
    for (name, json) in monitor_files {
        artifacts.write(name, json.as_bytes())?;
    }
    artifacts.write(
        "summary.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    if config.snapshot == Some(true) {
        let mut buf = Vec::new();
        write_snapshot(&state, &mut buf)?;
        artifacts.write("final_state.eulb", &buf)?;
    }
    artifacts.finish(config, Mode::Simulate, started)
}

/// Write the offending state next to the other outputs and attach its path.
fn dump_on_fault<T: Real>(err: Error, state: &FlowState<T>, dir: &Path) -> Error {
    if !matches!(err, Error::NumericalFault(_) | Error::Conservation(_)) {
        return err;
    }
    let path = dir.join("fault_state.eulb");
    let mut buf = Vec::new();
    match write_snapshot(state, &mut buf).and_then(|_| fs::write(&path, &buf).map_err(Error::from))
    {
        Ok(()) => Error::WithDump {
            source: Box::new(err),
            dump: path,
        },
        Err(_) => err,
    }
}

fn run_odemodel(config: &RunConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let path = config.ensemble.clone().expect("validated");
    let specs = load_ensemble(&path)?;
    let opts = OdeOptions {
        dt: config.ode_dt.expect("resolved"),
        threshold: config.blowup_threshold.expect("resolved"),
    };
    let report = ensemble_predict(
        &specs,
        config.c0.expect("validated"),
        config.t0.expect("resolved"),
        &opts,
    )?;
    let mut artifacts = Artifacts::new(config.output_dir.as_ref().expect("resolved"))?;
    artifacts.write(
        "blowup_report.json",
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    artifacts.finish(config, Mode::Odemodel, started)
}

fn run_tube(config: &RunConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let report = vortex_tube_scenario(&config.tube_params())?;
    let mut artifacts = Artifacts::new(config.output_dir.as_ref().expect("resolved"))?;
    artifacts.write("tube.csv", report.to_csv().as_bytes())?;
    #[derive(Serialize)]
    struct TubeSummary<'a> {
        params: &'a TubeParams,
        c1_max_abs: f64,
        c2_relative_drift: f64,
        c3_relative_drift: f64,
        reconstruction_residual: f64,
        omega_a_monotone_growth: bool,
        aligned: bool,
    }
    let summary = TubeSummary {
        params: &report.params,
        c1_max_abs: report.c1_max_abs,
        c2_relative_drift: report.c2_relative_drift,
        c3_relative_drift: report.c3_relative_drift,
        reconstruction_residual: report.reconstruction_residual,
        omega_a_monotone_growth: report.omega_a_monotone_growth,
        aligned: report.aligned,
    };
    artifacts.write(
        "tube_report.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    artifacts.finish(config, Mode::Tube, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig {
            mode: Some(Mode::Simulate),
            n: Some(32),
            preset: Some("abc".into()),
            abc: Some(vec![1.0, 0.5, 0.25]),
            monitors: Some(vec![
                MonitorKind::HessianAligned,
                MonitorKind::DoublyAligned,
            ]),
            c0: Some(4.0),
            probe_positions: Some(vec![[0.1, 0.2, 0.3]]),
            ..RunConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_field_reports_location() {
        let err = RunConfig::from_toml("mode = \"simulate\"\ngrid = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("grid"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn validation_lists_everything() {
        let errs = validate(&RunConfig::default());
        assert!(errs.len() >= 3, "{errs:?}");
        let cfg = RunConfig {
            mode: Some(Mode::Simulate),
            n: Some(17),
            preset: Some("taylor_green".into()),
            monitors: Some(vec![MonitorKind::DoublyAligned]),
            c0: Some(3.0),
            ..RunConfig::default()
        };
        let errs = validate(&cfg);
        assert!(errs.iter().any(|e| e.contains("power of two")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("c₀ > 3")), "{errs:?}");
    }

    #[test]
    fn probe_spec_parsing() {
        let cfg = RunConfig {
            probes: Some("uniform:2".into()),
            ..RunConfig::default()
        };
        assert_eq!(cfg.seed_spec().unwrap(), SeedSpec::Uniform { per_axis: 2 });
        let cfg = RunConfig {
            probes: Some("grid:2".into()),
            ..RunConfig::default()
        };
        assert!(cfg.seed_spec().is_err());
    }
}
