//! Lagrangian probes: passive points carried by the flow, sampled for
//! vorticity, strain and pressure-Hessian data, and used to test the
//! material-derivative identities along trajectories.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::eigen::{
    alignment_with_frame, decompose, AlignmentMetrics, EigenFrame, Sym3, TensorKind,
};
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::scalar::{centered_weights, cross, dot, norm, scale, sub, Real, Vec3};
use crate::spectral::{Grid, SpectralField};

/// How probes are placed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedSpec {
    /// `per_axis³` probes at the centers of a regular lattice of cells.
    Uniform { per_axis: usize },
    /// Uniformly distributed positions from a seeded generator.
    Random { count: usize, seed: u64 },
    /// Explicit positions, wrapped into the box.
    Explicit { positions: Vec<[f64; 3]> },
}

/// Initial probe positions.
pub fn seed_probes<T: Real>(grid: &Grid<T>, spec: &SeedSpec) -> Result<Vec<Vec3<T>>> {
    let l = grid.box_length();
    let pts: Vec<Vec3<T>> = match spec {
        SeedSpec::Uniform { per_axis } => {
            let m = *per_axis;
            let h = l / T::from_usize_lossy(m.max(1));
            let centre = |i: usize| (T::from_usize_lossy(i) + T::lit(0.5)) * h;
            let mut v = Vec::with_capacity(m * m * m);
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        v.push([centre(a), centre(b), centre(c)]);
                    }
                }
            }
            v
        }
        SeedSpec::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .map(|_| {
                    let r: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                    r.map(|u| T::lit(u) * l)
                })
                .collect()
        }
        SeedSpec::Explicit { positions } => positions
            .iter()
            .map(|p| grid.wrap_point(p.map(T::lit)))
            .collect(),
    };
    if pts.is_empty() {
        return Err(Error::Config("probe set is empty".into()));
    }
    if pts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("probe position is not finite".into()));
    }
    Ok(pts)
}

/// Field data recorded for one probe at one time.
#[derive(Clone, Copy, Debug)]
pub struct ProbeSample<T> {
    pub t: T,
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub vorticity: Vec3<T>,
    pub strain: Sym3<T>,
    pub hessian: Sym3<T>,
    /// `Sω`.
    pub stretching: Vec3<T>,
    /// `Pω`.
    pub hessian_action: Vec3<T>,
    pub strain_frame: EigenFrame<T>,
    pub hessian_frame: EigenFrame<T>,
    /// `None` where ω vanishes.
    pub strain_alignment: Option<AlignmentMetrics<T>>,
    pub hessian_alignment: Option<AlignmentMetrics<T>>,
    /// `ω ∧ Sω`.
    pub invariant: Vec3<T>,
}

impl<T: Real> ProbeSample<T> {
    /// Derive every per-sample quantity from raw point values.
    pub fn new(
        t: T,
        position: Vec3<T>,
        velocity: Vec3<T>,
        vorticity: Vec3<T>,
        strain: Sym3<T>,
        hessian: Sym3<T>,
    ) -> Result<Self> {
        let raw = position
            .iter()
            .chain(&velocity)
            .chain(&vorticity)
            .chain(&strain.c)
            .chain(&hessian.c);
        if raw.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFault(format!(
                "non-finite interpolated value at t = {t}, x = {position:?}"
            )));
        }
        let strain_frame = decompose(&strain, TensorKind::Strain);
        let hessian_frame = decompose(&hessian, TensorKind::Hessian);
        let stretching = strain.mul_vec(&vorticity);
        let hessian_action = hessian.mul_vec(&vorticity);
        let nonzero = norm(&vorticity) > T::zero();
        let strain_alignment = if nonzero {
            Some(alignment_with_frame(&strain, &strain_frame, &vorticity)?)
        } else {
            None
        };
        let hessian_alignment = if nonzero {
            Some(alignment_with_frame(&hessian, &hessian_frame, &vorticity)?)
        } else {
            None
        };
        Ok(Self {
            t,
            position,
            velocity,
            vorticity,
            strain,
            hessian,
            stretching,
            hessian_action,
            strain_frame,
            hessian_frame,
            strain_alignment,
            hessian_alignment,
            invariant: cross(&vorticity, &stretching),
        })
    }

    /// `−λ` followed by the two remaining Hessian eigenvalues (descending),
    /// where `−λ` belongs to the eigenvector best aligned with ω.
    pub fn hessian_split(&self) -> [T; 3] {
        let best = self.hessian_alignment.map(|a| a.best_index).unwrap_or(2);
        let ev = self.hessian_frame.eigenvalues;
        let rest: Vec<T> = (0..3).filter(|i| *i != best).map(|i| ev[i]).collect();
        [ev[best], rest[0], rest[1]]
    }
}

/// Time history of one probe.
#[derive(Clone, Debug)]
pub struct ProbeTrajectory<T> {
    pub id: usize,
    pub samples: Vec<ProbeSample<T>>,
}

impl<T: Real> ProbeTrajectory<T> {
    pub fn new(id: usize) -> Self {
        Self {
            id,
            samples: Vec::new(),
        }
    }

    /// Append a sample; times must increase strictly.
    pub fn push(&mut self, s: ProbeSample<T>) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::Contract(format!(
                    "probe {} sample at t = {} does not follow t = {}",
                    self.id, s.t, last.t
                )));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Sample every probe at the current flow state.
pub fn sample_probes<T: Real>(
    state: &mut FlowState<T>,
    positions: &[Vec3<T>],
) -> Result<Vec<ProbeSample<T>>> {
    let t = state.t();
    state
        .sample_many(positions)?
        .into_iter()
        .map(|v| ProbeSample::new(t, v.position, v.velocity, v.vorticity, v.strain, v.hessian))
        .collect()
}

/// Advance the flow and its probes together for `steps` RK4 steps of `dt`,
/// recording a sample at the start and after every `sample_every` steps.
pub fn track<T: Real>(
    state: &mut FlowState<T>,
    positions: &mut [Vec3<T>],
    dt: T,
    steps: usize,
    sample_every: usize,
) -> Result<Vec<ProbeTrajectory<T>>> {
    if sample_every == 0 {
        return Err(Error::Config("sample_every must be at least 1".into()));
    }
    let mut trajs: Vec<ProbeTrajectory<T>> =
        (0..positions.len()).map(ProbeTrajectory::new).collect();
    let record =
        |state: &mut FlowState<T>, pos: &[Vec3<T>], trajs: &mut Vec<ProbeTrajectory<T>>| {
            for (tr, s) in trajs.iter_mut().zip(sample_probes(state, pos)?) {
                tr.push(s)?;
            }
            Ok::<_, Error>(())
        };
    record(state, positions, &mut trajs)?;
    for step in 1..=steps {
        state.advance(dt, positions)?;
        if step % sample_every == 0 {
            record(state, positions, &mut trajs)?;
        }
    }
    Ok(trajs)
}

fn fd3<T: Real>(w: &[T; 3], a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> Vec3<T> {
    std::array::from_fn(|d| w[0] * a[d] + w[1] * b[d] + w[2] * c[d])
}

/// Aggregated residual of one identity over the interior samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    /// `sqrt Σ‖residual‖²`.
    pub numerator: f64,
    /// `sqrt Σ‖reference term‖²`.
    pub denominator: f64,
}

impl IdentityResidual {
    /// Relative residual; NaN when the reference term vanishes.
    pub fn ratio(&self) -> f64 {
        if self.denominator > 0.0 {
            self.numerator / self.denominator
        } else if self.numerator == 0.0 {
            0.0
        } else {
            f64::NAN
        }
    }
}

/// Residuals of the three trajectory identities
/// `Dω/Dt = Sω`, `D(Sω)/Dt = −Pω` and `D(ω∧Sω)/Dt = −ω∧Pω`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// Formal order of the time differences.
    pub order: u32,
    pub stretching: IdentityResidual,
    pub hessian: IdentityResidual,
    pub invariant: IdentityResidual,
    /// Per-sample relative residuals `[r₁, r₂, r₃]`; NaN at the endpoints.
    pub per_sample: Vec<[f64; 3]>,
}

impl IdentityReport {
    pub fn ratios(&self) -> [f64; 3] {
        [
            self.stretching.ratio(),
            self.hessian.ratio(),
            self.invariant.ratio(),
        ]
    }
}

/// Fewest samples accepted by [`material_derivative_checks`].
pub const MIN_IDENTITY_SAMPLES: usize = 5;

/// Compare centered time differences along a trajectory with the
/// instantaneous right-hand sides of the three identities.
pub fn material_derivative_checks<T: Real>(traj: &ProbeTrajectory<T>) -> Result<IdentityReport> {
    let s = &traj.samples;
    if s.len() < MIN_IDENTITY_SAMPLES {
        return Err(Error::Contract(format!(
            "identity checks need at least {MIN_IDENTITY_SAMPLES} samples, probe {} has {}",
            traj.id,
            s.len()
        )));
    }
    let mut sums = [[0.0f64; 2]; 3];
    let mut per_sample = vec![[f64::NAN; 3]; s.len()];
    for i in 1..s.len() - 1 {
        let w = centered_weights(s[i - 1].t, s[i].t, s[i + 1].t);
        let dw = fd3(
            &w,
            &s[i - 1].vorticity,
            &s[i].vorticity,
            &s[i + 1].vorticity,
        );
        let dsw = fd3(
            &w,
            &s[i - 1].stretching,
            &s[i].stretching,
            &s[i + 1].stretching,
        );
        let dinv = fd3(
            &w,
            &s[i - 1].invariant,
            &s[i].invariant,
            &s[i + 1].invariant,
        );
        let wpw = cross(&s[i].vorticity, &s[i].hessian_action);
        let pairs = [
            (sub(&dw, &s[i].stretching), s[i].stretching),
            (
                crate::scalar::add(&dsw, &s[i].hessian_action),
                s[i].hessian_action,
            ),
            (crate::scalar::add(&dinv, &wpw), wpw),
        ];
        for (k, (num, den)) in pairs.iter().enumerate() {
            let (a, b) = (norm(num).to_f64_lossy(), norm(den).to_f64_lossy());
            sums[k][0] += a * a;
            sums[k][1] += b * b;
            per_sample[i][k] = if b > 0.0 {
                a / b
            } else if a == 0.0 {
                0.0
            } else {
                f64::NAN
            };
        }
    }
    let agg = |k: usize| IdentityResidual {
        numerator: sums[k][0].sqrt(),
        denominator: sums[k][1].sqrt(),
    };
    Ok(IdentityReport {
        order: 2,
        stretching: agg(0),
        hessian: agg(1),
        invariant: agg(2),
        per_sample,
    })
}

/// Basis in which `ω ∧ Sω` is resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramePolicy {
    PrincipalAxes,
    FixedCartesian,
}

/// Relative eigenvalue gap below which two strain axes are treated as one
/// degenerate pair.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Components `(c₁, c₂, c₃)` of `ω ∧ Sω` per sample. Under
/// [`FramePolicy::PrincipalAxes`] the strain eigenvectors are relabelled
/// from sample to sample by best overlap with the previous labelled axes,
/// so `a, b, c` follow the same physical directions. A component whose axis
/// is part of a degenerate eigenvalue pair is `None`.
pub fn invariant_components<T: Real>(
    traj: &ProbeTrajectory<T>,
    policy: FramePolicy,
) -> Vec<[Option<T>; 3]> {
    match policy {
        FramePolicy::FixedCartesian => traj.samples.iter().map(|s| s.invariant.map(Some)).collect(),
        FramePolicy::PrincipalAxes => {
            let mut prev: Option<[Vec3<T>; 3]> = None;
            let mut out = Vec::with_capacity(traj.samples.len());
            for s in &traj.samples {
                let frame = &s.strain_frame;
                let (axes, vals) = match prev {
                    None => (frame.eigenvectors, frame.eigenvalues),
                    Some(p) => relabel(frame, &p),
                };
                prev = Some(axes);
                let scale_v = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                let tol = T::lit(DEGENERACY_TOL) * scale_v;
                let all_equal = (vals[0] - vals[1]).abs() <= tol
                    && (vals[1] - vals[2]).abs() <= tol
                    && (vals[0] - vals[2]).abs() <= tol;
                let comps: [Option<T>; 3] = std::array::from_fn(|i| {
                    if all_equal {
                        // S is isotropic, so Sω ∥ ω
                        return Some(T::zero());
                    }
                    let degenerate = (0..3).any(|j| j != i && (vals[i] - vals[j]).abs() <= tol);
                    if degenerate {
                        None
                    } else {
                        Some(dot(&axes[i], &s.invariant))
                    }
                });
                out.push(comps);
            }
            out
        }
    }
}

/// Reorder and re-sign `frame` to best match `previous` axes.
fn relabel<T: Real>(frame: &EigenFrame<T>, previous: &[Vec3<T>; 3]) -> ([Vec3<T>; 3], [T; 3]) {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = PERMS[0];
    let mut best_score = T::neg_infinity();
    for p in PERMS {
        let score = (0..3).fold(T::zero(), |acc, i| {
            acc + dot(&previous[i], &frame.eigenvectors[p[i]]).abs()
        });
        if score > best_score {
            best_score = score;
            best = p;
        }
    }
    let axes: [Vec3<T>; 3] = std::array::from_fn(|i| {
        let e = frame.eigenvectors[best[i]];
        if dot(&previous[i], &e) < T::zero() {
            scale(&e, -T::one())
        } else {
            e
        }
    });
    (axes, best.map(|j| frame.eigenvalues[j]))
}

/// Outcome of checking that `ω ∧ Sω` is frozen where ω is aligned with an
/// eigenvector of `P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrozenInvariantCheck {
    /// Interior samples with Hessian alignment residual within tolerance
    /// and enough neighbours for the error estimate.
    pub checked: usize,
    pub violations: usize,
    /// Largest `‖d(ω∧Sω)/dt‖ / bound` seen.
    pub worst_ratio: f64,
}

/// Where the Hessian alignment residual is at most `eps_align`, the measured
/// rate of change of `ω ∧ Sω` must be bounded by the misalignment term
/// `|ω|·residual·‖Pω‖` plus twice the estimated finite-difference error
/// and a rounding allowance.
pub fn frozen_invariant_check<T: Real>(
    traj: &ProbeTrajectory<T>,
    eps_align: T,
) -> FrozenInvariantCheck {
    let s = &traj.samples;
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for i in 2..s.len().saturating_sub(2) {
        let Some(al) = s[i].hessian_alignment else {
            continue;
        };
        if al.residual > eps_align {
            continue;
        }
        let wf = centered_weights(s[i - 1].t, s[i].t, s[i + 1].t);
        let fine = fd3(
            &wf,
            &s[i - 1].invariant,
            &s[i].invariant,
            &s[i + 1].invariant,
        );
        let coarse = fd3(
            &centered_weights(s[i - 2].t, s[i].t, s[i + 2].t),
            &s[i - 2].invariant,
            &s[i].invariant,
            &s[i + 2].invariant,
        );
        // coarse − fine ≈ 3× the fine-spacing truncation error
        let trunc = norm(&sub(&coarse, &fine)).to_f64_lossy() / 3.0;
        let misalign =
            (norm(&s[i].vorticity) * al.residual * norm(&s[i].hessian_action)).to_f64_lossy();
        // rounding in ω ∧ Sω amplified by the difference weights
        let roundoff: f64 = (0..3)
            .map(|k| {
                let q = &s[i - 1 + k];
                (wf[k].abs() * norm(&q.vorticity) * norm(&q.stretching)).to_f64_lossy()
            })
            .sum::<f64>()
            * 8.0
            * T::epsilon().to_f64_lossy();
        let bound = misalign + 2.0 * trunc + roundoff;
        let rate = norm(&fine).to_f64_lossy();
        checked += 1;
        let ratio = if bound > 0.0 {
            rate / bound
        } else if rate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if rate > bound * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    FrozenInvariantCheck {
        checked,
        violations,
        worst_ratio: worst,
    }
}

/// Volume of the tetrahedron spanned by four points, using the
/// periodic image of each vertex nearest the first one.
pub fn tetrahedron_volume<T: Real>(grid: &Grid<T>, pts: &[Vec3<T>; 4]) -> T {
    let l = grid.box_length();
    let half = l / T::lit(2.0);
    let edge = |p: &Vec3<T>| -> Vec3<T> {
        std::array::from_fn(|d| {
            let mut v = p[d] - pts[0][d];
            while v > half {
                v -= l;
            }
            while v < -half {
                v += l;
            }
            v
        })
    };
    let (a, b, c) = (edge(&pts[1]), edge(&pts[2]), edge(&pts[3]));
    dot(&a, &cross(&b, &c)).abs() / T::lit(6.0)
}

/// Four probes forming a right-angled tetrahedron with legs `edge`.
pub fn tetrahedron_cloud<T: Real>(grid: &Grid<T>, corner: Vec3<T>, edge: T) -> [Vec3<T>; 4] {
    [
        grid.wrap_point(corner),
        grid.wrap_point([corner[0] + edge, corner[1], corner[2]]),
        grid.wrap_point([corner[0], corner[1] + edge, corner[2]]),
        grid.wrap_point([corner[0], corner[1], corner[2] + edge]),
    ]
}

/// Interpolator that zero-pads a field to a grid twice as fine and then
/// interpolates trilinearly. Accuracy is second order in the refined
/// spacing; [`crate::spectral::evaluate_modes`] is the exact alternative.
#[derive(Clone, Debug)]
pub struct RefinedTrilinear<T: Real> {
    fine: SpectralField<T>,
}

impl<T: Real> RefinedTrilinear<T> {
    pub fn new(field: &SpectralField<T>) -> Result<Self> {
        let coarse = field.grid();
        let n = coarse.n();
        let m = 2 * n;
        let fine_grid = Grid::with_box_length(m, coarse.box_length())?;
        let comps = field.components();
        let (clen, flen) = (coarse.len(), fine_grid.len());
        let mut owned;
        let src = if field.is_fourier_current() {
            field.fourier()
        } else {
            owned = field.clone();
            owned.to_fourier()?;
            owned.fourier()
        };
        let mut modes = vec![Complex::new(T::zero(), T::zero()); comps * flen];
        let map = |i: usize| -> Option<usize> {
            let k = coarse.wavenumber(i);
            if coarse.is_nyquist(i) {
                None
            } else if k >= 0 {
                Some(k as usize)
            } else {
                Some((m as i64 + k) as usize)
            }
        };
        // both grids use the unnormalized forward transform, so amplitudes scale by (m/n)³
        let gain = T::lit(8.0);
        for c in 0..comps {
            for idx in 0..clen {
                let [a, b, cc] = coarse.unravel(idx);
                let (Some(fa), Some(fb), Some(fc)) = (map(a), map(b), map(cc)) else {
                    continue;
                };
                modes[c * flen + fine_grid.index(fa, fb, fc)] = src[c * clen + idx] * gain;
            }
        }
        let mut fine = SpectralField::from_fourier(&fine_grid, comps, modes);
        fine.to_physical()?;
        Ok(Self { fine })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.fine.grid()
    }

    /// Interpolated value of component `comp` at `x`.
    pub fn eval(&self, comp: usize, x: Vec3<T>) -> T {
        let g = self.fine.grid();
        let n = g.n();
        let h = g.spacing();
        let data = self.fine.physical_component(comp);
        let mut base = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for d in 0..3 {
            let s = g.wrap(x[d]) / h;
            let f = s.floor();
            base[d] = f.to_usize().unwrap_or(0) % n;
            frac[d] = s - f;
        }
        let mut acc = T::zero();
        for corner in 0..8 {
            let mut w = T::one();
            let mut ix = [0usize; 3];
            for d in 0..3 {
                let up = (corner >> d) & 1 == 1;
                ix[d] = if up { (base[d] + 1) % n } else { base[d] };
                w *= if up { frac[d] } else { T::one() - frac[d] };
            }
            acc += w * data[g.index(ix[0], ix[1], ix[2])];
        }
        acc
    }
}

/// Header of the trajectory CSV.
pub const TRAJECTORY_HEADER: &str = "id,t,x1,x2,x3,w1,w2,w3,mu1,mu2,mu3,lamneg,lamzeta,lameta,cos_s,cos_p,c1,c2,c3,res_stretching,res_hessian,res_invariant";

/// Shortest round-trip representation; `nan` for missing values.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "nan".to_string()
    }
}

/// Render trajectories as CSV, one row per sample.
pub fn trajectories_csv<T: Real>(trajs: &[ProbeTrajectory<T>], policy: FramePolicy) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for tr in trajs {
        let comps = invariant_components(tr, policy);
        let residuals = material_derivative_checks(tr)
            .map(|r| r.per_sample)
            .unwrap_or_else(|_| vec![[f64::NAN; 3]; tr.samples.len()]);
        for (i, s) in tr.samples.iter().enumerate() {
            let split = s.hessian_split();
            let cos = |a: &Option<AlignmentMetrics<T>>| {
                a.map(|m| m.best_cosine().to_f64_lossy())
                    .unwrap_or(f64::NAN)
            };
            let mut row: Vec<f64> = vec![s.t.to_f64_lossy()];
            row.extend(s.position.iter().map(|v| v.to_f64_lossy()));
            row.extend(s.vorticity.iter().map(|v| v.to_f64_lossy()));
            row.extend(s.strain_frame.eigenvalues.iter().map(|v| v.to_f64_lossy()));
            row.extend(split.iter().map(|v| v.to_f64_lossy()));
            row.push(cos(&s.strain_alignment));
            row.push(cos(&s.hessian_alignment));
            row.extend(
                comps[i]
                    .iter()
                    .map(|c| c.map(|v| v.to_f64_lossy()).unwrap_or(f64::NAN)),
            );
            row.extend(residuals[i]);
            let _ = write!(out, "{}", tr.id);
            for v in row {
                out.push(',');
                out.push_str(&fmt_num(v));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Preset;

    #[test]
    fn uniform_seeding_uses_cell_centres() {
        let g = Grid::<f64>::new(16).unwrap();
        let p = seed_probes(&g, &SeedSpec::Uniform { per_axis: 2 }).unwrap();
        assert_eq!(p.len(), 8);
        let q = std::f64::consts::FRAC_PI_2;
        assert_eq!(p[0], [q, q, q]);
        assert_eq!(p[7], [3.0 * q, 3.0 * q, 3.0 * q]);
        assert!(seed_probes(&g, &SeedSpec::Uniform { per_axis: 0 }).is_err());
    }

    #[test]
    fn random_seeding_is_reproducible() {
        let g = Grid::<f64>::new(16).unwrap();
        let spec = SeedSpec::Random { count: 10, seed: 7 };
        assert_eq!(
            seed_probes(&g, &spec).unwrap(),
            seed_probes(&g, &spec).unwrap()
        );
    }

    #[test]
    fn explicit_positions_are_wrapped() {
        let g = Grid::<f64>::new(16).unwrap();
        let tau = std::f64::consts::TAU;
        let spec = SeedSpec::Explicit {
            positions: vec![[-1.0, tau + 0.5, 2.0]],
        };
        let p = seed_probes(&g, &spec).unwrap();
        assert!((p[0][0] - (tau - 1.0)).abs() < 1e-14);
        assert!((p[0][1] - 0.5).abs() < 1e-14);
        assert_eq!(p[0][2], 2.0);
    }

    #[test]
    fn stagnation_point_stays_put() {
        let g = Grid::<f64>::new(16).unwrap();
        let mut s = FlowState::init(&Preset::TaylorGreen, &g).unwrap();
        let mut pts = vec![[0.0, 0.0, 0.0]];
        let trajs = track(&mut s, &mut pts, 0.01, 5, 1).unwrap();
        assert_eq!(trajs[0].samples.len(), 6);
        for d in 0..3 {
            let x = pts[0][d];
            assert!(x.min(std::f64::consts::TAU - x) < 1e-13);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let g = Grid::<f64>::new(16).unwrap();
        let mut s = FlowState::init(&Preset::Zero, &g).unwrap();
        let mut pts = vec![[1.0, 1.0, 1.0]];
        let trajs = track(&mut s, &mut pts, 0.1, 3, 1).unwrap();
        assert!(matches!(
            material_derivative_checks(&trajs[0]),
            Err(Error::Contract(_))
        ));
        let trajs = track(&mut s, &mut pts, 0.1, 4, 1).unwrap();
        let r = material_derivative_checks(&trajs[0]).unwrap();
        assert_eq!(r.stretching.numerator, 0.0);
        assert_eq!(r.hessian.numerator, 0.0);
        assert_eq!(r.invariant.numerator, 0.0);
    }

    #[test]
    fn degenerate_pair_gives_zero_first_component() {
        let s = ProbeSample::new(
            0.0,
            [0.0; 3],
            [0.0; 3],
            [1.0, 1.0, 1.0],
            Sym3::diag(1.0, -0.5, -0.5),
            Sym3::diag(-1.0, -1.0, -1.0),
        )
        .unwrap();
        let tr = ProbeTrajectory {
            id: 0,
            samples: vec![s],
        };
        let c = invariant_components(&tr, FramePolicy::PrincipalAxes);
        assert_eq!(c[0][0], Some(0.0));
        assert_eq!(c[0][1], None);
        assert_eq!(c[0][2], None);
        let c = invariant_components(&tr, FramePolicy::FixedCartesian);
        assert_eq!(c[0], [Some(0.0), Some(1.5), Some(-1.5)]);
    }

    #[test]
    fn csv_header_and_rows() {
        let g = Grid::<f64>::new(16).unwrap();
        let mut s = FlowState::init(&Preset::TaylorGreen, &g).unwrap();
        let mut pts = vec![[0.3, 0.7, 1.1]];
        let trajs = track(&mut s, &mut pts, 0.01, 4, 1).unwrap();
        let csv = trajectories_csv(&trajs, FramePolicy::PrincipalAxes);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1].split(',').count(), 22);
    }
}
