//! Reduced Lagrangian dynamics in which vorticity stays aligned with strain
//! and pressure-Hessian eigenvectors. Here singularities do form in finite
//! time, so every blow-up prediction can be compared with an integration.
//!
//! Along an aligned element with `Sω = μω` and `Pω = −c₀μ²ω` the stretching
//! rate obeys `μ′ = (c₀ − 1)μ²` and `(log|ω|)′ = μ`, which blow up at
//! `T* = t₀ + 1/((c₀ − 1)μ⁰)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigen::Sym3;
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::functionals::{
    check_c0, reduce_points, MonitorParams, QuadraturePoint, SnapshotReduction,
};
use crate::probes::{ProbeSample, ProbeTrajectory};
use crate::scalar::Vec3;

/// Default threshold on `μ` at which an element counts as blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Default element time step.
pub const ELEMENT_DT: f64 = 1e-5;

/// One entry of an ensemble file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSpec {
    #[serde(default)]
    pub id: Option<usize>,
    pub mu0: f64,
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default = "unit")]
    pub omega0: f64,
}

fn unit() -> f64 {
    1.0
}

/// Read an ensemble file: a JSON array of `{mu0, position, omega0}`.
pub fn load_ensemble(path: &Path) -> Result<Vec<ElementSpec>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read ensemble {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("ensemble {}: {e}", path.display())))
}

/// Whether an element is still regular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ElementStatus {
    Regular,
    /// Threshold crossing time estimated by linear interpolation of `1/μ`.
    BlownUp {
        t: f64,
    },
}

/// Aligned fluid element.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluidElement {
    pub id: usize,
    /// Initial position, used as a label.
    pub alpha: [f64; 3],
    pub mu0: f64,
    pub c0: f64,
    pub t0: f64,
    pub t: f64,
    pub mu: f64,
    pub log_omega: f64,
    pub status: ElementStatus,
    t_star: f64,
}

impl FluidElement {
    pub fn new(
        id: usize,
        alpha: [f64; 3],
        mu0: f64,
        omega0: f64,
        c0: f64,
        t0: f64,
    ) -> Result<Self> {
        if !(mu0 > 0.0) || !mu0.is_finite() {
            return Err(Error::Hypothesis(format!(
                "element {id}: initial stretching rate mu0 = {mu0} must be positive"
            )));
        }
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::Config(format!(
                "element {id}: initial vorticity magnitude {omega0} must be positive"
            )));
        }
        if !c0.is_finite() || !t0.is_finite() {
            return Err(Error::Config(format!(
                "element {id}: c0 and t0 must be finite"
            )));
        }
        let t_star = if c0 > 1.0 {
            t0 + 1.0 / ((c0 - 1.0) * mu0)
        } else {
            f64::INFINITY
        };
        Ok(Self {
            id,
            alpha,
            mu0,
            c0,
            t0,
            t: t0,
            mu: mu0,
            log_omega: omega0.ln(),
            status: ElementStatus::Regular,
            t_star,
        })
    }

    /// Closed-form singular time; infinite when `c₀ ≤ 1`.
    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    /// Closed-form `μ(t) = μ⁰ / (1 − (c₀ − 1)μ⁰(t − t₀))`.
    pub fn mu_exact(&self, t: f64) -> f64 {
        self.mu0 / (1.0 - (self.c0 - 1.0) * self.mu0 * (t - self.t0))
    }

    pub fn omega(&self) -> f64 {
        self.log_omega.exp()
    }
}

fn rates(c0: f64, mu: f64) -> [f64; 2] {
    [(c0 - 1.0) * mu * mu, mu]
}

/// Advance an element by one RK4 step. Crossing `threshold` marks it blown
/// up. Fixed-step RK4 lags the exact solution, so the crossing step may
/// start slightly after `T*`; starting a step more than one `dt` past `T*`
/// is refused.
pub fn element_ode_step(e: &mut FluidElement, dt: f64, threshold: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!(
            "element time step must be positive, got {dt}"
        )));
    }
    if let ElementStatus::BlownUp { t } = e.status {
        return Err(Error::PastSingularTime {
            t,
            dt,
            t_star: e.t_star,
        });
    }
    if e.t - e.t_star > dt {
        return Err(Error::PastSingularTime {
            t: e.t,
            dt,
            t_star: e.t_star,
        });
    }
    let y = [e.mu, e.log_omega];
    let stage = |y: [f64; 2], k: [f64; 2], h: f64| [y[0] + h * k[0], y[1] + h * k[1]];
    let k1 = rates(e.c0, y[0]);
    let k2 = rates(e.c0, stage(y, k1, dt / 2.0)[0]);
    let k3 = rates(e.c0, stage(y, k2, dt / 2.0)[0]);
    let k4 = rates(e.c0, stage(y, k3, dt)[0]);
    let next: [f64; 2] =
        std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let t_next = e.t + dt;
    if next[0].is_nan() || next[1].is_nan() {
        return Err(Error::NumericalFault(format!(
            "element {} state not finite after step to t = {t_next}",
            e.id
        )));
    }
    if next[0] >= threshold {
        // 1/μ is nearly linear in t close to the singularity
        let (a, b) = (1.0 / e.mu, 1.0 / next[0]);
        let target = 1.0 / threshold;
        let frac = if a > b {
            ((a - target) / (a - b)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        e.status = ElementStatus::BlownUp { t: e.t + frac * dt };
    }
    e.mu = next[0];
    e.log_omega = next[1];
    e.t = t_next;
    Ok(())
}

/// Integrate until the threshold is crossed or `t_max` is reached.
/// Returns the numeric blow-up time, if any.
pub fn integrate_to_blowup(
    e: &mut FluidElement,
    dt: f64,
    threshold: f64,
    t_max: f64,
) -> Result<Option<f64>> {
    while e.t < t_max {
        element_ode_step(e, dt, threshold)?;
        if let ElementStatus::BlownUp { t } = e.status {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Integration controls for ensemble runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub dt: f64,
    pub threshold: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            dt: ELEMENT_DT,
            threshold: BLOWUP_THRESHOLD,
        }
    }
}

/// Per-element part of a [`BlowupReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementVerdict {
    pub id: usize,
    pub mu0: f64,
    #[serde(rename = "Tstar")]
    pub t_star: f64,
    pub passes_filter: bool,
    pub blowup_time_numeric: Option<f64>,
    pub position: [f64; 3],
}

/// Ensemble prediction record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T0")]
    pub t0_bound: f64,
    pub mu1_sup: f64,
    pub mu_beta: f64,
    pub filter_threshold: f64,
    pub elements: Vec<ElementVerdict>,
    pub c0: f64,
    pub t0: f64,
    pub varpi0: f64,
    pub v0: f64,
    /// Element whose `μ⁰` is closest to `mu_beta` (first on ties).
    pub beta_nearest_id: usize,
    /// Unique supremum element; `None` when the supremum is shared.
    pub singular_id: Option<usize>,
    pub x1: Option<[f64; 3]>,
    pub min_numeric_blowup: Option<f64>,
    pub dt: f64,
    pub threshold: f64,
}

fn build_elements(specs: &[ElementSpec], c0: f64, t0: f64) -> Result<Vec<FluidElement>> {
    if specs.is_empty() {
        return Err(Error::Config("ensemble is empty".into()));
    }
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| FluidElement::new(s.id.unwrap_or(i), s.position, s.mu0, s.omega0, c0, t0))
        .collect()
}

/// `(ϖ₀, v₀)` of an ensemble of equal-volume aligned elements.
pub fn ensemble_functionals(specs: &[ElementSpec]) -> (f64, f64) {
    let ens: f64 = specs.iter().map(|s| s.omega0 * s.omega0).sum();
    let stretch: f64 = specs.iter().map(|s| s.mu0 * s.omega0 * s.omega0).sum();
    (ens, stretch / (ens * ens))
}

/// `T₁`, `T₀`, the participation filter and numeric blow-up times.
pub fn ensemble_predict(
    specs: &[ElementSpec],
    c0: f64,
    t0: f64,
    opts: &OdeOptions,
) -> Result<BlowupReport> {
    check_c0(c0)?;
    let elements = build_elements(specs, c0, t0)?;
    let mu1_sup = elements
        .iter()
        .map(|e| e.mu0)
        .fold(f64::NEG_INFINITY, f64::max);
    let t1 = t0 + 1.0 / ((c0 - 1.0) * mu1_sup);
    let (varpi0, v0) = ensemble_functionals(specs);
    let c = c0 - 3.0;
    let mu_beta = c * varpi0 * v0 / (c0 - 3.0);
    let t0_bound = t0 + 1.0 / ((c0 - 3.0) * mu_beta);
    if !(t1 < t0_bound) {
        return Err(Error::Contract(format!(
            "first singular time T1 = {t1} does not precede the bound T0 = {t0_bound}"
        )));
    }
    let filter_threshold = mu_beta * (c0 - 3.0) / (c0 - 1.0);
    let beta_nearest_id = elements
        .iter()
        .fold((f64::INFINITY, elements[0].id), |(best, id), e| {
            let d = (e.mu0 - mu_beta).abs();
            if d < best {
                (d, e.id)
            } else {
                (best, id)
            }
        })
        .1;
    let mut verdicts = Vec::with_capacity(elements.len());
    for mut e in elements.iter().cloned() {
        let t_max = e.t_star() + 10.0 * opts.dt;
        let numeric = integrate_to_blowup(&mut e, opts.dt, opts.threshold, t_max)?;
        verdicts.push(ElementVerdict {
            id: e.id,
            mu0: e.mu0,
            t_star: e.t_star(),
            passes_filter: e.mu0 >= filter_threshold,
            blowup_time_numeric: numeric,
            position: e.alpha,
        });
    }
    let min_numeric_blowup = verdicts
        .iter()
        .filter_map(|v| v.blowup_time_numeric)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
    let singular = singular_point(&elements, &IdentityMap).ok();
    Ok(BlowupReport {
        t1,
        t0_bound,
        mu1_sup,
        mu_beta,
        filter_threshold,
        elements: verdicts,
        c0,
        t0,
        varpi0,
        v0,
        beta_nearest_id,
        singular_id: singular.as_ref().map(|s| s.id),
        x1: singular.map(|s| s.position),
        min_numeric_blowup,
        dt: opts.dt,
        threshold: opts.threshold,
    })
}

/// Maps an initial label to its position at a later time.
pub trait FlowMap {
    fn position(&self, alpha: [f64; 3], t0: f64, t: f64) -> Result<[f64; 3]>;
}

/// Elements do not move.
pub struct IdentityMap;

impl FlowMap for IdentityMap {
    fn position(&self, alpha: [f64; 3], _t0: f64, _t: f64) -> Result<[f64; 3]> {
        Ok(alpha)
    }
}

/// Frozen uniform translation `x = α + U(t − t₀)`.
pub struct Translation(pub [f64; 3]);

impl FlowMap for Translation {
    fn position(&self, alpha: [f64; 3], t0: f64, t: f64) -> Result<[f64; 3]> {
        Ok(std::array::from_fn(|d| alpha[d] + self.0[d] * (t - t0)))
    }
}

/// Positions obtained by advecting a probe through a simulated flow that
/// starts at the map's `t₀`. Results are wrapped into the periodic box.
pub struct ProbeMap {
    pub state: FlowState<f64>,
    pub dt: f64,
}

impl FlowMap for ProbeMap {
    fn position(&self, alpha: [f64; 3], _t0: f64, t: f64) -> Result<[f64; 3]> {
        let mut state = self.state.clone();
        let mut pts = [state.grid().wrap_point(alpha)];
        while state.t() < t {
            let remaining = t - state.t();
            let h = if remaining < self.dt * (1.0 + 1e-12) {
                remaining
            } else {
                self.dt
            };
            if h <= 0.0 {
                break;
            }
            state.advance(h, &mut pts)?;
        }
        Ok(pts[0])
    }
}

/// Position and time at which the first singularity forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularPoint {
    pub id: usize,
    pub position: [f64; 3],
    pub t1: f64,
}

/// Locate the element with the largest `μ⁰` at its singular time. The
/// supremum must be attained by exactly one element.
pub fn singular_point(elements: &[FluidElement], map: &dyn FlowMap) -> Result<SingularPoint> {
    let Some(top) = elements.iter().max_by(|a, b| a.mu0.total_cmp(&b.mu0)) else {
        return Err(Error::Config("ensemble is empty".into()));
    };
    let ties: Vec<usize> = elements
        .iter()
        .filter(|e| e.mu0 == top.mu0)
        .map(|e| e.id)
        .collect();
    if ties.len() > 1 {
        return Err(Error::Ambiguous(format!(
            "elements {ties:?} share the largest mu0 = {}; a single singular element is assumed",
            top.mu0
        )));
    }
    let t1 = top.t_star();
    Ok(SingularPoint {
        id: top.id,
        position: map.position(top.alpha, top.t0, t1)?,
        t1,
    })
}

/// Build [`FluidElement`]s from specs.
pub fn elements_from_specs(specs: &[ElementSpec], c0: f64, t0: f64) -> Result<Vec<FluidElement>> {
    build_elements(specs, c0, t0)
}

/// Point values of an aligned element: `ω = |ω|e₁`, `S = diag(μ, −μ/2, −μ/2)`
/// and `P` with `Pe₁ = −c₀μ² e₁` and trace `|ω|²/2 − S:S`.
pub fn aligned_point(mu: f64, omega: f64, c0: f64) -> QuadraturePoint<f64> {
    let strain = Sym3::diag(mu, -0.5 * mu, -0.5 * mu);
    let lambda = c0 * mu * mu;
    let trace = 0.5 * omega * omega - strain.double_dot();
    let rest = 0.5 * (trace + lambda);
    QuadraturePoint {
        weight: 1.0,
        vorticity: [omega, 0.0, 0.0],
        strain,
        hessian: Sym3::diag(-lambda, rest, rest),
    }
}

/// Snapshots of an equal-volume aligned ensemble at the given times,
/// integrated element by element with RK4. Stops at the first time an
/// element has crossed the blow-up threshold; that time is returned too.
pub fn synthetic_snapshots(
    specs: &[ElementSpec],
    c0: f64,
    t0: f64,
    times: &[f64],
    opts: &OdeOptions,
    params: &MonitorParams,
) -> Result<(Vec<SnapshotReduction>, Option<f64>)> {
    let mut elements = build_elements(specs, c0, t0)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        for e in elements.iter_mut() {
            while e.t < t - 1e-12 * t.abs().max(1.0) {
                let h = (t - e.t).min(opts.dt);
                element_ode_step(e, h, opts.threshold)?;
                if let ElementStatus::BlownUp { t: tb } = e.status {
                    return Ok((out, Some(tb)));
                }
            }
        }
        let points = elements.iter().map(|e| aligned_point(e.mu, e.omega(), c0));
        out.push(reduce_points(t, points, params)?);
    }
    Ok((out, None))
}

/// Parameters of the vortex-tube scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeParams {
    /// Positive principal strain rate.
    pub mu_a: f64,
    /// Common negative rate of the two other axes.
    pub mu_bc: f64,
    pub omega0: [f64; 3],
    pub t_end: f64,
    pub dt: f64,
    /// Deviation of the Hessian from isotropy, `P = −λI + diag(δ)`;
    /// unequal entries misalign ω and `P`.
    #[serde(default)]
    pub hessian_offsets: [f64; 3],
    /// Store every `sample_every`-th step.
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn one() -> usize {
    1
}

impl Default for TubeParams {
    fn default() -> Self {
        Self {
            mu_a: 1.0,
            mu_bc: -0.5,
            omega0: [1.0, 1.0, 1.0],
            t_end: 2.0,
            dt: 1e-3,
            hessian_offsets: [0.0; 3],
            sample_every: 1,
        }
    }
}

/// State of the tube at one time, in the fixed principal frame `(a, b, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TubeSample {
    pub t: f64,
    pub omega: [f64; 3],
    pub mu: [f64; 3],
    /// Components of `ω ∧ Sω` along `a, b, c`.
    pub components: [f64; 3],
    /// `c₂ / (ω_c (μ_a + |μ_c|))`, which reproduces `ω_a`.
    pub omega_a_reconstructed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeReport {
    pub params: TubeParams,
    pub samples: Vec<TubeSample>,
    pub c1_max_abs: f64,
    pub c2_relative_drift: f64,
    pub c3_relative_drift: f64,
    /// Largest `|ω_a − reconstruction| / |ω_a|`.
    pub reconstruction_residual: f64,
    pub omega_a_monotone_growth: bool,
    pub aligned: bool,
}

fn tube_components(w: &[f64; 3], mu: &[f64; 3]) -> [f64; 3] {
    [
        w[1] * w[2] * (mu[2] - mu[1]),
        w[2] * w[0] * (mu[0] - mu[2]),
        w[0] * w[1] * (mu[1] - mu[0]),
    ]
}

fn tube_sample(t: f64, omega: [f64; 3], mu: [f64; 3]) -> TubeSample {
    let components = tube_components(&omega, &mu);
    TubeSample {
        t,
        omega,
        mu,
        components,
        omega_a_reconstructed: components[1] / (omega[2] * (mu[0] + mu[2].abs())),
    }
}

/// Vortex tube with one stretching axis and two equal compressing axes.
/// Principal axes stay fixed; `ω_i′ = μ_iω_i` and `μ_i′ = λ − μ_i² − δ_i`,
/// with `λ` fixed by keeping `S` trace free.
pub fn vortex_tube_scenario(p: &TubeParams) -> Result<TubeReport> {
    if !(p.mu_a > 0.0 && p.mu_bc < 0.0) {
        return Err(Error::Config(format!(
            "tube needs mu_a > 0 > mu_bc, got mu_a = {}, mu_bc = {}",
            p.mu_a, p.mu_bc
        )));
    }
    if (p.mu_a + 2.0 * p.mu_bc).abs() > 1e-12 * p.mu_a {
        return Err(Error::Config(format!(
            "tube strain must be trace free: mu_a + 2 mu_bc = {}",
            p.mu_a + 2.0 * p.mu_bc
        )));
    }
    if p.omega0.iter().any(|w| *w == 0.0 || !w.is_finite()) {
        return Err(Error::Config(
            "tube vorticity components must be nonzero".into(),
        ));
    }
    if !(p.dt > 0.0 && p.t_end > 0.0) || p.sample_every == 0 {
        return Err(Error::Config(
            "tube needs dt > 0, t_end > 0, sample_every >= 1".into(),
        ));
    }
    let d = p.hessian_offsets;
    let dsum: f64 = d.iter().sum();
    let rhs = |y: &[f64; 6]| -> [f64; 6] {
        let lambda = (y[3] * y[3] + y[4] * y[4] + y[5] * y[5] + dsum) / 3.0;
        [
            y[3] * y[0],
            y[4] * y[1],
            y[5] * y[2],
            lambda - y[3] * y[3] - d[0],
            lambda - y[4] * y[4] - d[1],
            lambda - y[5] * y[5] - d[2],
        ]
    };
    let mut y = [
        p.omega0[0],
        p.omega0[1],
        p.omega0[2],
        p.mu_a,
        p.mu_bc,
        p.mu_bc,
    ];
    let steps = (p.t_end / p.dt).round() as usize;
    let mut samples = vec![tube_sample(0.0, p.omega0, [p.mu_a, p.mu_bc, p.mu_bc])];
    for step in 1..=steps {
        let h = p.dt;
        let add = |y: &[f64; 6], k: &[f64; 6], s: f64| -> [f64; 6] {
            std::array::from_fn(|i| y[i] + s * k[i])
        };
        let k1 = rhs(&y);
        let k2 = rhs(&add(&y, &k1, h / 2.0));
        let k3 = rhs(&add(&y, &k2, h / 2.0));
        let k4 = rhs(&add(&y, &k3, h));
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault(format!(
                "tube state not finite at t = {}",
                step as f64 * h
            )));
        }
        if step % p.sample_every == 0 || step == steps {
            samples.push(tube_sample(
                step as f64 * h,
                [y[0], y[1], y[2]],
                [y[3], y[4], y[5]],
            ));
        }
    }
    let first = samples[0].components;
    let mut c1_max_abs = 0.0f64;
    let mut drift = [0.0f64; 2];
    let mut recon = 0.0f64;
    let mut monotone = true;
    for (i, s) in samples.iter().enumerate() {
        c1_max_abs = c1_max_abs.max(s.components[0].abs());
        for k in 0..2 {
            drift[k] =
                drift[k].max((s.components[k + 1] - first[k + 1]).abs() / first[k + 1].abs());
        }
        recon = recon.max((s.omega_a_reconstructed - s.omega[0]).abs() / s.omega[0].abs());
        if i > 0 && s.omega[0].abs() < samples[i - 1].omega[0].abs() {
            monotone = false;
        }
    }
    Ok(TubeReport {
        params: p.clone(),
        samples,
        c1_max_abs,
        c2_relative_drift: drift[0],
        c3_relative_drift: drift[1],
        reconstruction_residual: recon,
        omega_a_monotone_growth: monotone,
        aligned: d[0] == d[1] && d[1] == d[2],
    })
}

impl TubeReport {
    /// The scenario as a probe trajectory with the principal frame taken
    /// as the Cartesian axes.
    pub fn trajectory(&self) -> Result<ProbeTrajectory<f64>> {
        let d = self.params.hessian_offsets;
        let mut tr = ProbeTrajectory::new(0);
        for s in &self.samples {
            let lambda = (s.mu.iter().map(|m| m * m).sum::<f64>() + d.iter().sum::<f64>()) / 3.0;
            let hessian = Sym3::diag(d[0] - lambda, d[1] - lambda, d[2] - lambda);
            let zero: Vec3<f64> = [0.0; 3];
            tr.push(ProbeSample::new(
                s.t,
                zero,
                zero,
                s.omega,
                Sym3::diag(s.mu[0], s.mu[1], s.mu[2]),
                hessian,
            )?)?;
        }
        Ok(tr)
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("t,w_a,w_b,w_c,mu_a,mu_b,mu_c,c1,c2,c3,w_a_reconstructed\n");
        for s in &self.samples {
            let vals: Vec<String> = [s.t]
                .iter()
                .chain(&s.omega)
                .chain(&s.mu)
                .chain(&s.components)
                .chain(std::iter::once(&s.omega_a_reconstructed))
                .map(|v| crate::probes::fmt_num(*v))
                .collect();
            let _ = writeln!(out, "{}", vals.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mu0: f64) -> ElementSpec {
        ElementSpec {
            id: None,
            mu0,
            position: [0.0; 3],
            omega0: 1.0,
        }
    }

    #[test]
    fn closed_form_at_start_and_later() {
        let e = FluidElement::new(0, [0.0; 3], 1.0, 1.0, 4.0, 0.0).unwrap();
        assert!((e.t_star() - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.mu_exact(0.0) - 1.0).abs() < 1e-15);
        assert!((e.mu_exact(0.3) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_tracks_closed_form() {
        let mut e = FluidElement::new(0, [0.0; 3], 1.0, 1.0, 4.0, 0.0).unwrap();
        for _ in 0..3000 {
            element_ode_step(&mut e, 1e-4, BLOWUP_THRESHOLD).unwrap();
        }
        assert!((e.mu - 10.0).abs() / 10.0 < 1e-3);
        // |ω| = (1 − 3t)^{−1/3}
        assert!((e.omega() - 10f64.powf(1.0 / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn unit_c0_is_a_fixed_point() {
        let mut e = FluidElement::new(0, [0.0; 3], 0.7, 1.0, 1.0, 0.0).unwrap();
        assert!(e.t_star().is_infinite());
        for _ in 0..100 {
            element_ode_step(&mut e, 0.01, BLOWUP_THRESHOLD).unwrap();
        }
        assert_eq!(e.mu, 0.7);
    }

    #[test]
    fn refuses_after_blowup() {
        let mut e = FluidElement::new(0, [0.0; 3], 1.0, 1.0, 4.0, 0.0).unwrap();
        let t = integrate_to_blowup(&mut e, 1e-4, BLOWUP_THRESHOLD, 1.0)
            .unwrap()
            .unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-3 / 3.0);
        assert!(matches!(
            element_ode_step(&mut e, 1e-4, BLOWUP_THRESHOLD),
            Err(Error::PastSingularTime { .. })
        ));
    }

    #[test]
    fn packaged_style_ensemble() {
        let specs = [spec(0.5), spec(1.0), spec(2.0)];
        let r = ensemble_predict(
            &specs,
            4.0,
            0.0,
            &OdeOptions {
                dt: 1e-4,
                threshold: 1e6,
            },
        )
        .unwrap();
        assert_eq!(r.mu1_sup, 2.0);
        assert!((r.t1 - 1.0 / 6.0).abs() < 1e-15);
        assert!(r.t1 < r.t0_bound);
        assert!(r.elements.iter().all(|e| e.passes_filter));
        assert_eq!(r.singular_id, Some(2));
        let json = serde_json::to_string(&r).unwrap();
        for key in [
            "\"T1\"",
            "\"T0\"",
            "mu1_sup",
            "mu_beta",
            "filter_threshold",
            "\"Tstar\"",
            "passes_filter",
            "blowup_time_numeric",
        ] {
            assert!(json.contains(key), "{key}");
        }
    }

    #[test]
    fn hypothesis_and_config_errors() {
        assert!(matches!(
            ensemble_predict(&[spec(1.0), spec(-0.1)], 4.0, 0.0, &OdeOptions::default()),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            ensemble_predict(&[spec(1.0)], 3.0, 0.0, &OdeOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tied_supremum_is_ambiguous() {
        let els = elements_from_specs(&[spec(2.0), spec(2.0), spec(1.0)], 4.0, 0.0).unwrap();
        assert!(matches!(
            singular_point(&els, &IdentityMap),
            Err(Error::Ambiguous(_))
        ));
    }

    #[test]
    fn tube_identities_at_start() {
        let r = vortex_tube_scenario(&TubeParams {
            t_end: 0.01,
            ..TubeParams::default()
        })
        .unwrap();
        let s0 = r.samples[0];
        assert_eq!(s0.components, [0.0, 1.5, -1.5]);
        assert_eq!(s0.omega_a_reconstructed, 1.0);
    }

    #[test]
    fn tube_rejects_bad_signs() {
        let p = TubeParams {
            mu_a: -1.0,
            mu_bc: 0.5,
            ..TubeParams::default()
        };
        assert!(matches!(vortex_tube_scenario(&p), Err(Error::Config(_))));
    }
}
