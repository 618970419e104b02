//! Enstrophy functionals over a region, the Cauchy–Schwarz and
//! second-derivative inequalities they satisfy, and the two alignment
//! monitors that predict a finite critical time.
//!
//! Every field snapshot is reduced once, at its sample time, to a
//! [`SnapshotReduction`]: a handful of integrals plus pointwise monitor
//! statistics. Series and monitors are built from those reductions, so no
//! full fields are retained.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eigen::{alignment_with_frame, decompose, mu_max, Sym3, TensorKind};
use crate::error::{Error, Result};
use crate::flow::{FlowState, ENSTROPHY_FLOOR};
use crate::probes::{fmt_num, ProbeSample};
use crate::scalar::{centered_weights, dot, CompensatedSum, Real, Vec3};

/// Integration region for the functionals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// All grid points, each weighted by the cell volume.
    WholeBox,
    /// Probe positions, each weighted by its share of the initial volume.
    ProbeVolume,
}

/// Parameters of the pointwise monitor statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorParams {
    /// Largest alignment residual at which a Rayleigh quotient is accepted
    /// as an eigenvalue.
    pub eps_align: f64,
    /// Proportionality constant tested by the strain-aligned monitor.
    pub c0: Option<f64>,
}

impl Default for MonitorParams {
    fn default() -> Self {
        Self {
            eps_align: 1e-3,
            c0: None,
        }
    }
}

/// Values needed at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct QuadraturePoint<T> {
    pub weight: T,
    pub vorticity: Vec3<T>,
    pub strain: Sym3<T>,
    pub hessian: Sym3<T>,
}

/// Integrals and monitor statistics of one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReduction {
    pub t: f64,
    pub volume: f64,
    /// `∫|ω|²`.
    pub enstrophy: f64,
    /// `∫ω·Sω`.
    pub stretching: f64,
    /// `∫|Sω|²`.
    pub stretching_sq: f64,
    /// `∫ω·Pω`.
    pub hessian_work: f64,
    /// Volume fraction where `λ > 3μ_m²` holds with accepted Hessian alignment.
    pub hessian_aligned_fraction: f64,
    /// Smallest `λ − 3μ_m²` over points with accepted alignment (NaN if none).
    pub hessian_aligned_margin_min: f64,
    pub hessian_aligned_margin_mean: f64,
    /// Smallest `λ/μ_m² − 3` over the region (NaN if undefined somewhere).
    pub hessian_aligned_ratio_min: f64,
    /// Volume fraction where both alignments are accepted and `λ, μ > 0`.
    pub doubly_aligned_fraction: f64,
    /// Largest and mean `|λ − c₀μ²| / (c₀μ²)` over those points.
    pub doubly_aligned_deviation_max: f64,
    pub doubly_aligned_deviation_mean: f64,
}

impl SnapshotReduction {
    /// `v = ∫ω·Sω / ϖ²`.
    pub fn v(&self) -> f64 {
        self.stretching / (self.enstrophy * self.enstrophy)
    }

    /// `v′` from the instantaneous integrals.
    pub fn v_prime(&self) -> f64 {
        let w = self.enstrophy;
        ((self.stretching_sq - self.hessian_work) * w - 4.0 * self.stretching * self.stretching)
            / (w * w * w)
    }
}

/// Reduce weighted point values to a [`SnapshotReduction`].
pub fn reduce_points<T: Real, I>(
    t: T,
    points: I,
    params: &MonitorParams,
) -> Result<SnapshotReduction>
where
    I: IntoIterator<Item = QuadraturePoint<T>>,
{
    let eps = T::lit(params.eps_align);
    let three = T::lit(3.0);
    let mut volume = CompensatedSum::<f64>::new();
    let mut ens = CompensatedSum::new();
    let mut ws = CompensatedSum::new();
    let mut sw2 = CompensatedSum::new();
    let mut wp = CompensatedSum::new();
    let mut sat_hessian = CompensatedSum::new();
    let mut margin_sum = CompensatedSum::new();
    let mut margin_weight = CompensatedSum::new();
    let mut margin_min = f64::INFINITY;
    let mut ratio_min = f64::INFINITY;
    let mut ratio_defined = true;
    let mut sat_doubly = CompensatedSum::new();
    let mut dev_sum = CompensatedSum::new();
    let mut dev_max = 0.0f64;
    for q in points {
        let w = q.weight.to_f64_lossy();
        let sw = q.strain.mul_vec(&q.vorticity);
        let pw = q.hessian.mul_vec(&q.vorticity);
        let w2 = dot(&q.vorticity, &q.vorticity);
        volume.add(w);
        ens.add(w * w2.to_f64_lossy());
        ws.add(w * dot(&q.vorticity, &sw).to_f64_lossy());
        sw2.add(w * dot(&sw, &sw).to_f64_lossy());
        wp.add(w * dot(&q.vorticity, &pw).to_f64_lossy());
        if !(w2 > T::zero()) {
            ratio_defined = false;
            continue;
        }
        let hframe = decompose(&q.hessian, TensorKind::Hessian);
        let hal = alignment_with_frame(&q.hessian, &hframe, &q.vorticity)?;
        let lambda = -hal.rayleigh;
        let sframe = decompose(&q.strain, TensorKind::Strain);
        let mu_m = mu_max(&sframe);
        if hal.residual <= eps {
            let margin = (lambda - three * mu_m * mu_m).to_f64_lossy();
            margin_min = margin_min.min(margin);
            margin_sum.add(w * margin);
            margin_weight.add(w);
            if lambda > T::zero() && margin > 0.0 {
                sat_hessian.add(w);
            }
            if mu_m > T::zero() {
                ratio_min = ratio_min.min((lambda / (mu_m * mu_m)).to_f64_lossy() - 3.0);
            } else {
                ratio_defined = false;
            }
        } else {
            ratio_defined = false;
        }
        if let Some(c0) = params.c0 {
            let sal = alignment_with_frame(&q.strain, &sframe, &q.vorticity)?;
            let mu = sal.rayleigh;
            if sal.residual <= eps && hal.residual <= eps && mu > T::zero() && lambda > T::zero() {
                let target = T::lit(c0) * mu * mu;
                let dev = ((lambda - target).abs() / target).to_f64_lossy();
                sat_doubly.add(w);
                dev_sum.add(w * dev);
                dev_max = dev_max.max(dev);
            }
        }
    }
    let volume = volume.value();
    if !(volume > 0.0) {
        return Err(Error::Contract("reduction over an empty region".into()));
    }
    let frac = |s: CompensatedSum<f64>| s.value() / volume;
    let mw = margin_weight.value();
    let s_doubly = sat_doubly.value();
    Ok(SnapshotReduction {
        t: t.to_f64_lossy(),
        volume,
        enstrophy: ens.value(),
        stretching: ws.value(),
        stretching_sq: sw2.value(),
        hessian_work: wp.value(),
        hessian_aligned_fraction: frac(sat_hessian),
        hessian_aligned_margin_min: if mw > 0.0 { margin_min } else { f64::NAN },
        hessian_aligned_margin_mean: if mw > 0.0 {
            margin_sum.value() / mw
        } else {
            f64::NAN
        },
        hessian_aligned_ratio_min: if ratio_defined { ratio_min } else { f64::NAN },
        doubly_aligned_fraction: s_doubly / volume,
        doubly_aligned_deviation_max: if s_doubly > 0.0 { dev_max } else { f64::NAN },
        doubly_aligned_deviation_mean: if s_doubly > 0.0 {
            dev_sum.value() / s_doubly
        } else {
            f64::NAN
        },
    })
}

/// Reduce a flow state over the whole box.
pub fn reduce_state<T: Real>(
    state: &mut FlowState<T>,
    params: &MonitorParams,
) -> Result<SnapshotReduction> {
    let len = state.grid().len();
    let dv = state.grid().cell_volume();
    let t = state.t();
    let w = state.vorticity()?.physical().to_vec();
    let s = state.strain()?.clone();
    let p = state.hessian()?;
    let points = (0..len).map(|x| QuadraturePoint {
        weight: dv,
        vorticity: [w[x], w[len + x], w[2 * len + x]],
        strain: s.at(x),
        hessian: p.at(x),
    });
    reduce_points(t, points, params)
}

/// Reduce probe samples taken at one time; every probe carries an equal
/// share of `total_volume`.
pub fn reduce_probes<T: Real>(
    samples: &[ProbeSample<T>],
    total_volume: T,
    params: &MonitorParams,
) -> Result<SnapshotReduction> {
    let Some(first) = samples.first() else {
        return Err(Error::Config(
            "probe volume needs at least one probe".into(),
        ));
    };
    let weight = total_volume / T::from_usize_lossy(samples.len());
    let points = samples.iter().map(|s| QuadraturePoint {
        weight,
        vorticity: s.vorticity,
        strain: s.strain,
        hessian: s.hessian,
    });
    reduce_points(first.t, points, params)
}

/// Enstrophy from the Fourier coefficients of ω, for quadrature
/// consistency checks against [`reduce_state`].
pub fn spectral_enstrophy<T: Real>(state: &mut FlowState<T>) -> Result<f64> {
    let dv = state.grid().cell_volume().to_f64_lossy();
    let mut w = state.vorticity()?.clone();
    Ok(w.spectral_sum_squares()?.to_f64_lossy() * dv)
}

/// One row of the functional series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalRow {
    pub t: f64,
    pub enstrophy: f64,
    /// `1 / (2 ϖ^{1/n})`.
    pub phi_n: f64,
    /// `∫ω·Sω / ϖ²`.
    pub v_direct: f64,
    /// `−dφ₁/dt` by centered differences (NaN at the ends).
    pub v_from_phi: f64,
    /// `dv/dt` by centered differences (NaN at the ends).
    pub vprime_fd: f64,
    /// `v′` from the instantaneous integrals.
    pub vprime_integral: f64,
    /// `‖Sω‖`, which equals `‖Dω/Dt‖`.
    pub dwdt_l2: f64,
    pub cs_lhs: f64,
    pub cs_rhs: f64,
    pub growth_lhs: f64,
    pub growth_rhs: f64,
    pub hessian_aligned_fraction: f64,
    pub hessian_aligned_margin_min: f64,
}

/// Time series of the enstrophy functionals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalSeries {
    pub exponent: u32,
    pub region: Region,
    pub rows: Vec<FunctionalRow>,
}

pub const SERIES_HEADER: &str = "t,enstrophy,phi_n,v_direct,v_from_phi,vprime_fd,vprime_integral,dwdt_l2,cs_lhs,cs_rhs,growth_lhs,growth_rhs,hessian_aligned_fraction,hessian_aligned_margin_min";

/// Build the series from snapshot reductions.
pub fn enstrophy_functionals(
    snaps: &[SnapshotReduction],
    region: Region,
    exponent: u32,
) -> Result<FunctionalSeries> {
    if exponent == 0 {
        return Err(Error::Config(
            "functional exponent must be a positive integer".into(),
        ));
    }
    if snaps.len() < 3 {
        return Err(Error::Contract(format!(
            "functional series needs at least 3 samples, got {}",
            snaps.len()
        )));
    }
    for s in snaps {
        if !(s.enstrophy > ENSTROPHY_FLOOR) {
            return Err(Error::Hypothesis(format!(
                "enstrophy {:e} at t = {} is below {:e}; the functionals require nonvanishing enstrophy",
                s.enstrophy, s.t, ENSTROPHY_FLOOR
            )));
        }
    }
    for w in snaps.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::Contract(
                "sample times must increase strictly".into(),
            ));
        }
    }
    let phi1: Vec<f64> = snaps.iter().map(|s| 0.5 / s.enstrophy).collect();
    let v: Vec<f64> = snaps.iter().map(|s| s.v()).collect();
    let diff = |f: &[f64], i: usize| -> f64 {
        if i == 0 || i + 1 == f.len() {
            return f64::NAN;
        }
        let w = centered_weights(snaps[i - 1].t, snaps[i].t, snaps[i + 1].t);
        w[0] * f[i - 1] + w[1] * f[i] + w[2] * f[i + 1]
    };
    let rows = snaps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ens = s.enstrophy;
            let vprime = s.v_prime();
            FunctionalRow {
                t: s.t,
                enstrophy: ens,
                phi_n: 0.5 / ens.powf(1.0 / exponent as f64),
                v_direct: v[i],
                v_from_phi: -diff(&phi1, i),
                vprime_fd: diff(&v, i),
                vprime_integral: vprime,
                dwdt_l2: s.stretching_sq.sqrt(),
                cs_lhs: v[i] * ens.powf(1.5),
                cs_rhs: s.stretching_sq.sqrt(),
                growth_lhs: vprime * ens * ens,
                growth_rhs: -s.hessian_work - 3.0 * s.stretching_sq,
                hessian_aligned_fraction: s.hessian_aligned_fraction,
                hessian_aligned_margin_min: s.hessian_aligned_margin_min,
            }
        })
        .collect();
    Ok(FunctionalSeries {
        exponent,
        region,
        rows,
    })
}

impl FunctionalSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SERIES_HEADER);
        out.push('\n');
        for r in &self.rows {
            let vals = [
                r.t,
                r.enstrophy,
                r.phi_n,
                r.v_direct,
                r.v_from_phi,
                r.vprime_fd,
                r.vprime_integral,
                r.dwdt_l2,
                r.cs_lhs,
                r.cs_rhs,
                r.growth_lhs,
                r.growth_rhs,
                r.hessian_aligned_fraction,
                r.hessian_aligned_margin_min,
            ];
            let line: Vec<String> = vals.iter().map(|v| fmt_num(*v)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Relative roundoff allowance in the Cauchy–Schwarz check.
pub const CAUCHY_SCHWARZ_SLACK: f64 = 1e-12;

/// Per-sample outcome of the two inequalities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    /// `(rhs − lhs)/rhs` of `vϖ^{3/2} ≤ ‖Sω‖` (0 where rhs vanishes).
    pub cs_margin: Vec<f64>,
    pub cs_holds: Vec<bool>,
    /// `lhs − rhs` of the second-derivative inequality using `v′` from
    /// the integrals.
    pub growth_margin_direct: Vec<f64>,
    pub growth_holds_direct: Vec<bool>,
    /// Same with `v′` from differences of `v` (NaN at the ends).
    pub growth_margin_fd: Vec<f64>,
}

/// Check both inequalities on every sample. A Cauchy–Schwarz failure is a
/// quadrature error and aborts.
pub fn inequality_check(series: &FunctionalSeries) -> Result<InequalityReport> {
    let mut rep = InequalityReport {
        cs_margin: Vec::new(),
        cs_holds: Vec::new(),
        growth_margin_direct: Vec::new(),
        growth_holds_direct: Vec::new(),
        growth_margin_fd: Vec::new(),
    };
    for r in &series.rows {
        let margin = if r.cs_rhs > 0.0 {
            (r.cs_rhs - r.cs_lhs) / r.cs_rhs
        } else {
            0.0
        };
        let holds = r.cs_lhs <= r.cs_rhs * (1.0 + CAUCHY_SCHWARZ_SLACK) + f64::MIN_POSITIVE;
        if !holds {
            return Err(Error::Quadrature(format!(
                "Cauchy-Schwarz fails at t = {}: v*enstrophy^1.5 = {:e} > ||S w|| = {:e}",
                r.t, r.cs_lhs, r.cs_rhs
            )));
        }
        rep.cs_margin.push(margin);
        rep.cs_holds.push(holds);
        let scale = r.growth_lhs.abs().max(r.growth_rhs.abs());
        let d = r.growth_lhs - r.growth_rhs;
        rep.growth_margin_direct.push(d);
        rep.growth_holds_direct.push(d >= -1e-12 * scale);
        rep.growth_margin_fd
            .push(r.vprime_fd * r.enstrophy * r.enstrophy - r.growth_rhs);
    }
    Ok(rep)
}

/// Which monitor produced a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Hessian alignment with `λ > 3μ_m²`.
    HessianAligned,
    /// Both alignments with `λ = c₀μ²`, `c₀ > 3`.
    DoublyAligned,
}

/// Outcome of a monitor over a window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorVerdict {
    pub condition: Condition,
    pub t0: f64,
    pub t_end: f64,
    pub c0: Option<f64>,
    pub c: Option<f64>,
    pub varpi0: f64,
    pub v0: f64,
    #[serde(rename = "T0")]
    pub t_critical: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    /// Hypotheses hold on the whole region over the whole window.
    pub applicable: bool,
    pub satisfied_fraction_min: f64,
    /// Diagnostic only: hypotheses hold on at least 99% of the region.
    pub relaxed_applicable: bool,
    pub fractions: Vec<f64>,
    pub margin_min: f64,
    pub margin_mean: f64,
    pub eps_align: f64,
    pub verdict: String,
}

impl MonitorVerdict {
    /// Lower bounds `(A/(T₀−t), B/(T₀−t))` on `v` and `‖Dω/Dt‖`;
    /// `None` when no critical time was emitted or `t ≥ T₀`.
    pub fn bounds_at(&self, t: f64) -> Option<(f64, f64)> {
        let (t_crit, a, b) = (self.t_critical?, self.a?, self.b?);
        if t >= t_crit {
            return None;
        }
        Some((a / (t_crit - t), b / (t_crit - t)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn window(snaps: &[SnapshotReduction], t0: f64) -> Result<&[SnapshotReduction]> {
    let start = snaps
        .iter()
        .position(|s| s.t >= t0 - 1e-12 * t0.abs().max(1.0))
        .ok_or_else(|| Error::Config(format!("no samples at or after t0 = {t0}")))?;
    let w = &snaps[start..];
    if !(w[0].enstrophy > ENSTROPHY_FLOOR) {
        return Err(Error::Hypothesis(format!(
            "enstrophy {:e} at t0 is below {:e}",
            w[0].enstrophy, ENSTROPHY_FLOOR
        )));
    }
    Ok(w)
}

fn critical_time(t0: f64, c: f64, varpi0: f64, v0: f64) -> (f64, f64, f64) {
    (
        t0 + 1.0 / (c * varpi0 * v0),
        1.0 / (c * varpi0),
        varpi0.sqrt() / c,
    )
}

/// Monitor for the Hessian-aligned condition `λ > 3μ_m²`. The constant
/// `c = min(λ/μ_m²) − 3` over the window is capped at 1.
pub fn hessian_aligned_monitor(
    snaps: &[SnapshotReduction],
    t0: f64,
    eps_align: f64,
) -> Result<MonitorVerdict> {
    let w = window(snaps, t0)?;
    let fractions: Vec<f64> = w.iter().map(|s| s.hessian_aligned_fraction).collect();
    let fmin = fractions.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin_min = w
        .iter()
        .map(|s| s.hessian_aligned_margin_min)
        .fold(f64::INFINITY, |a, b| if b.is_nan() { a } else { a.min(b) });
    let margin_mean = w.iter().map(|s| s.hessian_aligned_margin_mean).sum::<f64>() / w.len() as f64;
    let (varpi0, v0) = (w[0].enstrophy, w[0].v());
    let mut verdict = MonitorVerdict {
        condition: Condition::HessianAligned,
        t0: w[0].t,
        t_end: w[w.len() - 1].t,
        c0: None,
        c: None,
        varpi0,
        v0,
        t_critical: None,
        a: None,
        b: None,
        applicable: false,
        satisfied_fraction_min: fmin,
        relaxed_applicable: fmin >= 0.99,
        fractions,
        margin_min,
        margin_mean,
        eps_align,
        verdict: String::new(),
    };
    if fmin < 1.0 {
        verdict.verdict = "condition not met".into();
        return Ok(verdict);
    }
    if !(v0 > 0.0) {
        verdict.verdict = "hypotheses not met at t0".into();
        return Ok(verdict);
    }
    let ratio = w
        .iter()
        .map(|s| s.hessian_aligned_ratio_min)
        .fold(f64::INFINITY, f64::min);
    let c = if ratio.is_finite() && ratio > 0.0 {
        ratio.min(1.0)
    } else {
        1.0
    };
    let (tc, a, b) = critical_time(verdict.t0, c, varpi0, v0);
    verdict.c = Some(c);
    verdict.t_critical = Some(tc);
    verdict.a = Some(a);
    verdict.b = Some(b);
    verdict.applicable = true;
    verdict.verdict = "condition met".into();
    Ok(verdict)
}

/// Monitor for the doubly aligned condition `λ = c₀μ²`; `c = c₀ − 3`.
pub fn doubly_aligned_monitor(
    snaps: &[SnapshotReduction],
    t0: f64,
    c0: f64,
    eps_align: f64,
) -> Result<MonitorVerdict> {
    check_c0(c0)?;
    let w = window(snaps, t0)?;
    let fractions: Vec<f64> = w.iter().map(|s| s.doubly_aligned_fraction).collect();
    let fmin = fractions.iter().cloned().fold(f64::INFINITY, f64::min);
    let dev_max = w
        .iter()
        .map(|s| s.doubly_aligned_deviation_max)
        .fold(0.0f64, |a, b| if b.is_nan() { a } else { a.max(b) });
    let dev_mean = w
        .iter()
        .filter(|s| !s.doubly_aligned_deviation_mean.is_nan())
        .map(|s| s.doubly_aligned_deviation_mean)
        .sum::<f64>()
        / w.len() as f64;
    let (varpi0, v0) = (w[0].enstrophy, w[0].v());
    let c = c0 - 3.0;
    let mut verdict = MonitorVerdict {
        condition: Condition::DoublyAligned,
        t0: w[0].t,
        t_end: w[w.len() - 1].t,
        c0: Some(c0),
        c: Some(c),
        varpi0,
        v0,
        t_critical: None,
        a: None,
        b: None,
        applicable: false,
        satisfied_fraction_min: fmin,
        relaxed_applicable: fmin >= 0.99,
        fractions,
        // for this monitor the margins are the relative deviations of λ from c₀μ²
        margin_min: dev_max,
        margin_mean: dev_mean,
        eps_align,
        verdict: String::new(),
    };
    if fmin < 1.0 {
        verdict.verdict = "condition not met".into();
        return Ok(verdict);
    }
    if !(v0 > 0.0) {
        verdict.verdict = "hypotheses not met at t0".into();
        return Ok(verdict);
    }
    let (tc, a, b) = critical_time(verdict.t0, c, varpi0, v0);
    verdict.t_critical = Some(tc);
    verdict.a = Some(a);
    verdict.b = Some(b);
    verdict.applicable = true;
    verdict.verdict = "condition met".into();
    Ok(verdict)
}

/// The doubly aligned monitor and ensemble prediction need `c₀ > 3`.
pub fn check_c0(c0: f64) -> Result<()> {
    if c0 > 3.0 && c0.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "c0 = {c0} violates the hypothesis c₀ > 3 of the doubly aligned blow-up condition"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(t: f64, enstrophy: f64, stretching: f64) -> SnapshotReduction {
        SnapshotReduction {
            t,
            volume: 1.0,
            enstrophy,
            stretching,
            stretching_sq: 0.0,
            hessian_work: 0.0,
            hessian_aligned_fraction: 1.0,
            hessian_aligned_margin_min: 1.0,
            hessian_aligned_margin_mean: 1.0,
            hessian_aligned_ratio_min: 1.0,
            doubly_aligned_fraction: 1.0,
            doubly_aligned_deviation_max: 0.0,
            doubly_aligned_deviation_mean: 0.0,
        }
    }

    #[test]
    fn stretching_rate_field() {
        // ω = 2e₁ on a unit volume, Sω = 2ω: ϖ = 4, v = 2/4
        let q = QuadraturePoint {
            weight: 1.0,
            vorticity: [2.0, 0.0, 0.0],
            strain: Sym3::diag(2.0, -1.0, -1.0),
            hessian: Sym3::diag(-16.0, 1.0, 1.0),
        };
        let r = reduce_points(0.0, [q], &MonitorParams::default()).unwrap();
        assert_eq!(r.enstrophy, 4.0);
        assert_eq!(r.v(), 0.5);
        assert!(enstrophy_functionals(&[r, r, r], Region::WholeBox, 2).is_err());
        let snaps: Vec<_> = (0..3)
            .map(|i| SnapshotReduction { t: i as f64, ..r })
            .collect();
        let s = enstrophy_functionals(&snaps, Region::WholeBox, 2).unwrap();
        let row = s.rows[1];
        assert_eq!(row.phi_n, 0.25);
        assert_eq!(row.cs_lhs, 4.0);
        assert_eq!(row.cs_rhs, 4.0);
        let rep = inequality_check(&s).unwrap();
        assert!(rep.cs_margin.iter().all(|m| m.abs() <= 1e-12));
        // λ = 16 = 4μ_m²
        assert_eq!(r.hessian_aligned_ratio_min, 1.0);
    }

    #[test]
    fn orthogonal_stretching_gives_zero_v() {
        let q = QuadraturePoint {
            weight: 1.0,
            vorticity: [1.0, 0.0, 0.0],
            strain: Sym3::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
            hessian: Sym3::zero(),
        };
        let r = reduce_points(0.0, [q], &MonitorParams::default()).unwrap();
        assert_eq!(r.v(), 0.0);
        assert_eq!(r.stretching_sq, 1.0);
    }

    #[test]
    fn enstrophy_underflow_is_hypothesis_error() {
        let snaps = [
            snap(0.0, 0.0, 0.0),
            snap(1.0, 1.0, 0.0),
            snap(2.0, 1.0, 0.0),
        ];
        assert!(matches!(
            enstrophy_functionals(&snaps, Region::WholeBox, 1),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn critical_time_hand_values() {
        // c = 1, ϖ₀ = 2, v₀ = 0.5 → T₀ = 1, A = 0.5, B = √2
        let s = snap(0.0, 2.0, 0.5 * 4.0);
        let v = hessian_aligned_monitor(&[s, s], 0.0, 1e-3).unwrap();
        assert_eq!(v.t_critical, Some(1.0));
        assert_eq!(v.a, Some(0.5));
        assert!((v.b.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let json = v.to_json().unwrap();
        for key in [
            "condition",
            "t0",
            "c0",
            "\"c\"",
            "varpi0",
            "v0",
            "T0",
            "\"A\"",
            "\"B\"",
            "applicable",
            "satisfied_fraction_min",
        ] {
            assert!(json.contains(key), "{key}");
        }
    }

    #[test]
    fn doubly_aligned_hand_values() {
        let s = snap(0.0, 1.0, 1.0);
        let v = doubly_aligned_monitor(&[s], 0.0, 4.0, 1e-3).unwrap();
        assert_eq!(v.c, Some(1.0));
        assert_eq!(v.t_critical, Some(1.0));
        assert!(matches!(
            doubly_aligned_monitor(&[s], 0.0, 3.0, 1e-3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nonpositive_v0_blocks_prediction() {
        let s = snap(0.0, 1.0, -0.1);
        let v = hessian_aligned_monitor(&[s], 0.0, 1e-3).unwrap();
        assert!(!v.applicable);
        assert_eq!(v.verdict, "hypotheses not met at t0");
        assert!(v.t_critical.is_none());
    }
}
