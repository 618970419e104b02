//! Pseudo-spectral incompressible Euler solver.
//!
//! The prognostic variable is the Fourier velocity `û`, always kept
//! solenoidal and truncated to the 2/3-rule cube. The nonlinear term is
//! evaluated in rotational form, `∂u/∂t = P[u × ω]`, where `P` is the
//! Leray projector; pressure never enters the time stepping and is only
//! reconstructed for diagnostics.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::eigen::Sym3;
use crate::error::{Error, Result};
use crate::scalar::{csum, Real, Vec3};
use crate::spectral::{evaluate_modes, Axis, Grid, SpectralField};

/// CFL number: `max|u| · dt · n / L` may not exceed this.
pub const CFL_NUMBER: f64 = 0.5;

/// Enstrophy below which the diagnostics refuse to divide by it.
pub const ENSTROPHY_FLOOR: f64 = 1e-14;

/// Initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// `u = (sin x cos y cos z, −cos x sin y cos z, 0)`.
    TaylorGreen,
    /// Arnold–Beltrami–Childress flow, a steady Beltrami field (`ω = u`).
    Abc {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Gaussian random solenoidal field with energy spectrum `∝ k^slope`
    /// for `1 ≤ |k| ≤ cutoff`, normalized to unit rms speed.
    RandomSolenoidal {
        seed: u64,
        slope: f64,
        cutoff: f64,
    },
    /// Constant velocity.
    Uniform {
        velocity: [f64; 3],
    },
    Zero,
}

impl Preset {
    /// Parse a preset name; parameters take their documented defaults.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "taylor_green" => Ok(Preset::TaylorGreen),
            "abc" => Ok(Preset::Abc {
                a: 1.0,
                b: 1.0,
                c: 1.0,
            }),
            "random_solenoidal" => Ok(Preset::RandomSolenoidal {
                seed: 0,
                slope: -5.0 / 3.0,
                cutoff: 4.0,
            }),
            "uniform" => Ok(Preset::Uniform {
                velocity: [1.0, 0.0, 0.0],
            }),
            "zero" => Ok(Preset::Zero),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected taylor_green, abc, random_solenoidal, uniform or zero)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::TaylorGreen => "taylor_green",
            Preset::Abc { .. } => "abc",
            Preset::RandomSolenoidal { .. } => "random_solenoidal",
            Preset::Uniform { .. } => "uniform",
            Preset::Zero => "zero",
        }
    }
}

/// Symmetric tensor field stored as six scalar fields `(11, 22, 33, 12, 13, 23)`,
/// both representations current.
#[derive(Clone, Debug)]
pub struct TensorField<T: Real> {
    pub comps: [SpectralField<T>; 6],
}

impl<T: Real> TensorField<T> {
    /// Tensor at grid point `idx`.
    pub fn at(&self, idx: usize) -> Sym3<T> {
        let c = &self.comps;
        Sym3::new(
            c[0].physical()[idx],
            c[1].physical()[idx],
            c[2].physical()[idx],
            c[3].physical()[idx],
            c[4].physical()[idx],
            c[5].physical()[idx],
        )
    }

    pub fn max_abs(&self) -> T {
        self.comps.iter().fold(T::zero(), |m, f| {
            f.physical().iter().fold(m, |m, v| m.max(v.abs()))
        })
    }

    /// Fourier modes of the six components, in storage order.
    pub fn spectra(&self) -> [&[Complex<T>]; 6] {
        [
            self.comps[0].fourier(),
            self.comps[1].fourier(),
            self.comps[2].fourier(),
            self.comps[3].fourier(),
            self.comps[4].fourier(),
            self.comps[5].fourier(),
        ]
    }
}

/// Pairs `(i, j)` for the six stored tensor components.
pub const TENSOR_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[derive(Clone, Debug, Default)]
struct DerivedCache<T: Real> {
    vorticity: Option<SpectralField<T>>,
    strain: Option<TensorField<T>>,
    pressure: Option<(SpectralField<T>, TensorField<T>)>,
}

/// Velocity field plus lazily derived ω, S, p and P at time `t`.
#[derive(Clone, Debug)]
pub struct FlowState<T: Real> {
    t: T,
    u: SpectralField<T>,
    cache: DerivedCache<T>,
}

/// Integral diagnostics of a flow state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub t: f64,
    /// `½ ∫ |u|² dx`.
    pub energy: f64,
    /// `∫ u·ω dx`.
    pub helicity: f64,
    /// `∫ |ω|² dx`.
    pub enstrophy: f64,
    pub max_vorticity: f64,
    pub max_divergence: f64,
    pub max_gradient: f64,
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `i k_axis · v` with Nyquist excluded.
#[inline]
fn ik<T: Real>(k: T, v: Complex<T>) -> Complex<T> {
    Complex::new(-k * v.im, k * v.re)
}

impl<T: Real> FlowState<T> {
    /// Build a state from a preset.
    pub fn init(preset: &Preset, grid: &Arc<Grid<T>>) -> Result<Self> {
        let k0 = grid.k0();
        let u = match preset {
            Preset::TaylorGreen => SpectralField::vector_from_fn(grid, |p| {
                let [x, y, z] = [k0 * p[0], k0 * p[1], k0 * p[2]];
                [
                    x.sin() * y.cos() * z.cos(),
                    -x.cos() * y.sin() * z.cos(),
                    T::zero(),
                ]
            }),
            Preset::Abc { a, b, c } => {
                let (a, b, c) = (T::lit(*a), T::lit(*b), T::lit(*c));
                SpectralField::vector_from_fn(grid, |p| {
                    let [x, y, z] = [k0 * p[0], k0 * p[1], k0 * p[2]];
                    [
                        a * z.sin() + c * y.cos(),
                        b * x.sin() + a * z.cos(),
                        c * y.sin() + b * x.cos(),
                    ]
                })
            }
            Preset::Uniform { velocity } => {
                let v = velocity.map(T::lit);
                SpectralField::vector_from_fn(grid, |_| v)
            }
            Preset::Zero => SpectralField::zeros(grid, 3),
            Preset::RandomSolenoidal {
                seed,
                slope,
                cutoff,
            } => random_solenoidal(grid, *seed, *slope, *cutoff)?,
        };
        Self::from_velocity(u, T::zero())
    }

    /// Wrap an arbitrary velocity field. It is projected onto solenoidal
    /// fields and truncated to the 2/3 cube.
    pub fn from_velocity(mut u: SpectralField<T>, t: T) -> Result<Self> {
        if u.components() != 3 {
            return Err(Error::Contract("velocity must have 3 components".into()));
        }
        u.to_fourier()?;
        let grid = Arc::clone(u.grid());
        let len = grid.len();
        {
            let modes = u.fourier_mut();
            project_and_truncate(&grid, modes, len);
        }
        u.to_physical()?;
        Ok(Self {
            t,
            u,
            cache: DerivedCache::default(),
        })
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.u.grid()
    }

    pub fn velocity(&self) -> &SpectralField<T> {
        &self.u
    }

    /// Fourier velocity, component-major.
    pub fn u_hat(&self) -> &[Complex<T>] {
        self.u.fourier()
    }

    /// Largest admissible step for the current state.
    pub fn max_stable_dt(&self) -> T {
        let umax = max_speed(&self.u);
        if umax == T::zero() {
            return T::infinity();
        }
        T::lit(CFL_NUMBER) * self.grid().box_length()
            / (umax * T::from_usize_lossy(self.grid().n()))
    }

    /// `P[u × ω]` for a velocity given in Fourier space, 2/3-truncated.
    pub fn tendency(grid: &Arc<Grid<T>>, u_hat: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let len = grid.len();
        let mut w_hat = vec![czero::<T>(); 3 * len];
        for idx in 0..len {
            let k = grid.k_vector(idx);
            let u = [u_hat[idx], u_hat[len + idx], u_hat[2 * len + idx]];
            w_hat[idx] = ik(k[1], u[2]) - ik(k[2], u[1]);
            w_hat[len + idx] = ik(k[2], u[0]) - ik(k[0], u[2]);
            w_hat[2 * len + idx] = ik(k[0], u[1]) - ik(k[1], u[0]);
        }
        let mut u = SpectralField::from_fourier(grid, 3, u_hat.to_vec());
        let mut w = SpectralField::from_fourier(grid, 3, w_hat);
        u.to_physical()?;
        w.to_physical()?;
        let (up, wp) = (u.physical(), w.physical());
        let mut cross = vec![T::zero(); 3 * len];
        for i in 0..len {
            let a = [up[i], up[len + i], up[2 * len + i]];
            let b = [wp[i], wp[len + i], wp[2 * len + i]];
            cross[i] = a[1] * b[2] - a[2] * b[1];
            cross[len + i] = a[2] * b[0] - a[0] * b[2];
            cross[2 * len + i] = a[0] * b[1] - a[1] * b[0];
        }
        let mut n = SpectralField::from_physical(grid, 3, cross);
        n.to_fourier()?;
        let mut out = n.fourier().to_vec();
        project_and_truncate(grid, &mut out, len);
        Ok(out)
    }

    /// One classical RK4 step of length `dt`.
    pub fn step(&mut self, dt: T) -> Result<()> {
        self.advance(dt, &mut [])
    }

    /// One RK4 step of the flow coupled with passive points `dx/dt = u(x, t)`.
    /// Points are advanced with the same stages as the velocity and wrapped
    /// back into the box.
    pub fn advance(&mut self, dt: T, points: &mut [Vec3<T>]) -> Result<()> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let limit = self.max_stable_dt();
        if dt > limit {
            return Err(Error::Cfl {
                dt: dt.to_f64_lossy(),
                suggested: limit.to_f64_lossy(),
            });
        }
        let grid = Arc::clone(self.grid());
        let len3 = 3 * grid.len();
        let u0 = self.u.fourier().to_vec();
        let half = dt / T::lit(2.0);
        let sixth = dt / T::lit(6.0);

        let x0: Vec<Vec3<T>> = points.to_vec();
        let point_velocity = |uh: &[Complex<T>], xs: &[Vec3<T>]| -> Vec<Vec3<T>> {
            let comps = [
                &uh[..len3 / 3],
                &uh[len3 / 3..2 * len3 / 3],
                &uh[2 * len3 / 3..],
            ];
            xs.iter()
                .map(|x| {
                    let v = evaluate_modes(&grid, &comps, *x);
                    [v[0], v[1], v[2]]
                })
                .collect()
        };
        let offset = |base: &[Vec3<T>], k: &[Vec3<T>], h: T| -> Vec<Vec3<T>> {
            base.iter()
                .zip(k)
                .map(|(x, v)| [x[0] + h * v[0], x[1] + h * v[1], x[2] + h * v[2]])
                .collect()
        };
        let axpy = |k: &[Complex<T>], h: T| -> Vec<Complex<T>> {
            u0.iter().zip(k).map(|(a, b)| *a + *b * h).collect()
        };

        let k1 = Self::tendency(&grid, &u0)?;
        let p1 = point_velocity(&u0, &x0);
        let u2 = axpy(&k1, half);
        let x2 = offset(&x0, &p1, half);
        let k2 = Self::tendency(&grid, &u2)?;
        let p2 = point_velocity(&u2, &x2);
        let u3 = axpy(&k2, half);
        let x3 = offset(&x0, &p2, half);
        let k3 = Self::tendency(&grid, &u3)?;
        let p3 = point_velocity(&u3, &x3);
        let u4 = axpy(&k3, dt);
        let x4 = offset(&x0, &p3, dt);
        let k4 = Self::tendency(&grid, &u4)?;
        let p4 = point_velocity(&u4, &x4);

        let two = T::lit(2.0);
        let mut next = u0.clone();
        for i in 0..len3 {
            next[i] = u0[i] + (k1[i] + k2[i] * two + k3[i] * two + k4[i]) * sixth;
        }
        let t_next = self.t + dt;
        if next.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NumericalFault(format!(
                "non-finite velocity after step to t = {t_next}"
            )));
        }
        for (i, p) in points.iter_mut().enumerate() {
            let mut q = [T::zero(); 3];
            for d in 0..3 {
                q[d] = x0[i][d] + (p1[i][d] + two * p2[i][d] + two * p3[i][d] + p4[i][d]) * sixth;
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFault(format!(
                    "non-finite point position after step to t = {t_next}"
                )));
            }
            *p = grid.wrap_point(q);
        }
        let mut u = SpectralField::from_fourier(&grid, 3, next);
        u.to_physical()?;
        self.u = u;
        self.t = t_next;
        self.cache = DerivedCache::default();
        Ok(())
    }

    /// Vorticity `ω = ∇ × u`, both representations current.
    pub fn vorticity(&mut self) -> Result<&SpectralField<T>> {
        if self.cache.vorticity.is_none() {
            let grid = Arc::clone(self.grid());
            let len = grid.len();
            let uh = self.u.fourier();
            let mut w_hat = vec![czero::<T>(); 3 * len];
            for idx in 0..len {
                let k = grid.k_vector(idx);
                let u = [uh[idx], uh[len + idx], uh[2 * len + idx]];
                w_hat[idx] = ik(k[1], u[2]) - ik(k[2], u[1]);
                w_hat[len + idx] = ik(k[2], u[0]) - ik(k[0], u[2]);
                w_hat[2 * len + idx] = ik(k[0], u[1]) - ik(k[1], u[0]);
            }
            let mut w = SpectralField::from_fourier(&grid, 3, w_hat);
            w.to_physical()?;
            self.cache.vorticity = Some(w);
        }
        Ok(self.cache.vorticity.as_ref().unwrap())
    }

    /// Strain rate `Sᵢⱼ = ½(∂ᵢuⱼ + ∂ⱼuᵢ)`.
    pub fn strain(&mut self) -> Result<&TensorField<T>> {
        if self.cache.strain.is_none() {
            let grid = Arc::clone(self.grid());
            let len = grid.len();
            let uh = self.u.fourier();
            let h = T::lit(0.5);
            let comps = TENSOR_PAIRS.map(|(i, j)| {
                let modes: Vec<Complex<T>> = (0..len)
                    .map(|idx| {
                        let k = grid.k_vector(idx);
                        (ik(k[j], uh[i * len + idx]) + ik(k[i], uh[j * len + idx])) * h
                    })
                    .collect();
                SpectralField::from_fourier(&grid, 1, modes)
            });
            let mut comps = comps;
            for c in comps.iter_mut() {
                c.to_physical()?;
            }
            self.cache.strain = Some(TensorField { comps });
        }
        Ok(self.cache.strain.as_ref().unwrap())
    }

    /// Velocity gradient `Aᵢⱼ = ∂uᵢ/∂xⱼ` in physical space, `[i][j]`.
    pub fn velocity_gradient(&self) -> Result<Vec<Vec<Vec<T>>>> {
        let grid = Arc::clone(self.grid());
        let len = grid.len();
        let uh = self.u.fourier();
        let mut out = Vec::with_capacity(3);
        for i in 0..3 {
            let mut row = Vec::with_capacity(3);
            for j in 0..3 {
                let modes: Vec<Complex<T>> = (0..len)
                    .map(|idx| ik(grid.k_vector(idx)[j], uh[i * len + idx]))
                    .collect();
                let mut f = SpectralField::from_fourier(&grid, 1, modes);
                f.to_physical()?;
                row.push(f.physical().to_vec());
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Pressure `p` (mean zero) and its Hessian `Pᵢⱼ = ∂ᵢ∂ⱼp`.
    ///
    /// Taking the divergence of the momentum equation gives
    /// `Δp = −(∂ⱼuᵢ)(∂ᵢuⱼ)`, evaluated pointwise from the velocity gradient.
    pub fn pressure_and_hessian(&mut self) -> Result<(&SpectralField<T>, &TensorField<T>)> {
        if self.cache.pressure.is_none() {
            let grid = Arc::clone(self.grid());
            let len = grid.len();
            let a = self.velocity_gradient()?;
            // −Δp = AᵢⱼAⱼᵢ
            let rhs: Vec<T> = (0..len)
                .map(|x| {
                    let mut s = T::zero();
                    for i in 0..3 {
                        for j in 0..3 {
                            s += a[i][j][x] * a[j][i][x];
                        }
                    }
                    s
                })
                .collect();
            let mut rhs = SpectralField::from_physical(&grid, 1, rhs);
            let mut p = rhs.solve_poisson()?;
            p.to_physical()?;
            let mut ready = Vec::with_capacity(6);
            for (i, j) in TENSOR_PAIRS {
                let mut f = p.second_derivative(Axis::ALL[i], Axis::ALL[j])?;
                f.to_physical()?;
                ready.push(f);
            }
            let comps: [SpectralField<T>; 6] = ready.try_into().expect("six components");
            self.cache.pressure = Some((p, TensorField { comps }));
        }
        let (p, h) = self.cache.pressure.as_ref().unwrap();
        Ok((p, h))
    }

    /// Pressure Hessian only.
    pub fn hessian(&mut self) -> Result<&TensorField<T>> {
        Ok(self.pressure_and_hessian()?.1)
    }

    /// Largest pointwise `|tr P − (|ω|²/2 − S:S)|`, together with `max|P|`.
    pub fn trace_identity_defect(&mut self) -> Result<(T, T)> {
        let len = self.grid().len();
        let w = self.vorticity()?.physical().to_vec();
        let s = self.strain()?.clone();
        let h = self.hessian()?;
        let mut worst = T::zero();
        for x in 0..len {
            let wv = [w[x], w[len + x], w[2 * len + x]];
            let w2 = wv[0] * wv[0] + wv[1] * wv[1] + wv[2] * wv[2];
            let expected = w2 / T::lit(2.0) - s.at(x).double_dot();
            worst = worst.max((h.at(x).trace() - expected).abs());
        }
        Ok((worst, h.max_abs()))
    }

    /// Largest pointwise divergence and largest velocity-gradient entry.
    pub fn divergence_check(&self) -> Result<(T, T)> {
        let a = self.velocity_gradient()?;
        let len = self.grid().len();
        let mut div = T::zero();
        let mut grad = T::zero();
        for x in 0..len {
            div = div.max((a[0][0][x] + a[1][1][x] + a[2][2][x]).abs());
            for row in &a {
                for col in row {
                    grad = grad.max(col[x].abs());
                }
            }
        }
        Ok((div, grad))
    }

    pub fn diagnostics(&mut self) -> Result<FlowDiagnostics> {
        let len = self.grid().len();
        let dv = self.grid().cell_volume();
        let (max_divergence, max_gradient) = self.divergence_check()?;
        let u = self.u.physical().to_vec();
        let w = self.vorticity()?.physical();
        let energy = csum((0..3 * len).map(|i| u[i] * u[i])) * dv / T::lit(2.0);
        let helicity = csum((0..3 * len).map(|i| u[i] * w[i])) * dv;
        let enstrophy = csum((0..3 * len).map(|i| w[i] * w[i])) * dv;
        let max_vorticity = (0..len).fold(T::zero(), |m, x| {
            let s = w[x] * w[x] + w[len + x] * w[len + x] + w[2 * len + x] * w[2 * len + x];
            m.max(s.sqrt())
        });
        Ok(FlowDiagnostics {
            t: self.t.to_f64_lossy(),
            energy: energy.to_f64_lossy(),
            helicity: helicity.to_f64_lossy(),
            enstrophy: enstrophy.to_f64_lossy(),
            max_vorticity: max_vorticity.to_f64_lossy(),
            max_divergence: max_divergence.to_f64_lossy(),
            max_gradient: max_gradient.to_f64_lossy(),
        })
    }

    /// Velocity, vorticity, strain and pressure Hessian at an arbitrary
    /// point by spectral interpolation.
    pub fn sample_at(&mut self, x: Vec3<T>) -> Result<PointValues<T>> {
        Ok(self.sample_many(&[x])?.pop().unwrap())
    }

    pub fn sample_many(&mut self, xs: &[Vec3<T>]) -> Result<Vec<PointValues<T>>> {
        let grid = Arc::clone(self.grid());
        let len = grid.len();
        self.vorticity()?;
        self.strain()?;
        self.hessian()?;
        let uh = self.u.fourier();
        let wh = self.cache.vorticity.as_ref().unwrap().fourier();
        let sh = self.cache.strain.as_ref().unwrap().spectra();
        let ph = self.cache.pressure.as_ref().unwrap().1.spectra();
        let mut spectra: Vec<&[Complex<T>]> = Vec::with_capacity(18);
        for c in 0..3 {
            spectra.push(&uh[c * len..(c + 1) * len]);
        }
        for c in 0..3 {
            spectra.push(&wh[c * len..(c + 1) * len]);
        }
        spectra.extend_from_slice(&sh);
        spectra.extend_from_slice(&ph);
        Ok(xs
            .iter()
            .map(|x| {
                let v = evaluate_modes(&grid, &spectra, *x);
                PointValues {
                    position: *x,
                    velocity: [v[0], v[1], v[2]],
                    vorticity: [v[3], v[4], v[5]],
                    strain: Sym3::new(v[6], v[7], v[8], v[9], v[10], v[11]),
                    hessian: Sym3::new(v[12], v[13], v[14], v[15], v[16], v[17]),
                }
            })
            .collect())
    }
}

/// Field values at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointValues<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub vorticity: Vec3<T>,
    pub strain: Sym3<T>,
    pub hessian: Sym3<T>,
}

/// Magic bytes opening a binary velocity snapshot.
pub const SNAPSHOT_MAGIC: &[u8; 5] = b"EULB1";

/// Write the physical velocity as a little-endian binary snapshot:
/// magic, `n` (u64), box length (f64), `t` (f64), component count (u64),
/// then component-major, row-major `f64` samples.
pub fn write_snapshot<T: Real, W: Write>(state: &FlowState<T>, mut out: W) -> Result<()> {
    let grid = state.grid();
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&(grid.n() as u64).to_le_bytes())?;
    out.write_all(&grid.box_length().to_f64_lossy().to_le_bytes())?;
    out.write_all(&state.t().to_f64_lossy().to_le_bytes())?;
    out.write_all(&3u64.to_le_bytes())?;
    for v in state.velocity().physical() {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

/// Read a snapshot produced by [`write_snapshot`].
pub fn read_snapshot<T: Real, R: Read>(mut input: R) -> Result<FlowState<T>> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Config("not a velocity snapshot (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let box_length = f64::from_le_bytes(next(&mut input)?);
    let t = f64::from_le_bytes(next(&mut input)?);
    let comps = u64::from_le_bytes(next(&mut input)?) as usize;
    if comps != 3 {
        return Err(Error::Config(format!(
            "snapshot has {comps} components, expected 3"
        )));
    }
    let grid = Grid::with_box_length(n, T::lit(box_length))?;
    let mut data = Vec::with_capacity(3 * grid.len());
    for _ in 0..3 * grid.len() {
        data.push(T::lit(f64::from_le_bytes(next(&mut input)?)));
    }
    FlowState::from_velocity(SpectralField::from_physical(&grid, 3, data), T::lit(t))
}

fn max_speed<T: Real>(u: &SpectralField<T>) -> T {
    let len = u.grid().len();
    let p = u.physical();
    (0..len).fold(T::zero(), |m, i| {
        let s = p[i] * p[i] + p[len + i] * p[len + i] + p[2 * len + i] * p[2 * len + i];
        m.max(s.sqrt())
    })
}

/// Leray projection and 2/3 truncation of a Fourier vector field in place.
/// The mean mode is kept.
fn project_and_truncate<T: Real>(grid: &Grid<T>, modes: &mut [Complex<T>], len: usize) {
    for idx in 0..len {
        if !grid.is_retained(idx) {
            for c in 0..3 {
                modes[c * len + idx] = czero();
            }
            continue;
        }
        if idx == 0 {
            continue;
        }
        let k = grid.k_vector(idx);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let kdotu = modes[idx] * k[0] + modes[len + idx] * k[1] + modes[2 * len + idx] * k[2];
        for c in 0..3 {
            modes[c * len + idx] = modes[c * len + idx] - kdotu * (k[c] / k2);
        }
    }
}

fn random_solenoidal<T: Real>(
    grid: &Arc<Grid<T>>,
    seed: u64,
    slope: f64,
    cutoff: f64,
) -> Result<SpectralField<T>> {
    if !(cutoff >= 1.0) || !slope.is_finite() {
        return Err(Error::Config(format!(
            "random_solenoidal needs cutoff >= 1 and finite slope, got cutoff {cutoff}, slope {slope}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    let mut modes = vec![czero::<T>(); 3 * len];
    for idx in 0..len {
        let [a, b, c] = grid.unravel(idx);
        let kk = [grid.wavenumber(a), grid.wavenumber(b), grid.wavenumber(c)];
        let kmag = ((kk[0] * kk[0] + kk[1] * kk[1] + kk[2] * kk[2]) as f64).sqrt();
        // draw for every mode so the stream does not depend on the cutoff
        let draws: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        if kmag < 1.0 || kmag > cutoff {
            continue;
        }
        // per-mode amplitude for an energy spectrum ∝ k^slope on shells of area ∝ k²
        let amp = kmag.powf((slope - 2.0) / 2.0);
        for comp in 0..3 {
            modes[comp * len + idx] = Complex::new(
                T::lit(amp * draws[2 * comp]),
                T::lit(amp * draws[2 * comp + 1]),
            );
        }
    }
    // real part of the synthesized field enforces Hermitian symmetry
    let mut f = SpectralField::from_fourier(grid, 3, modes);
    f.to_physical()?;
    let mut f = SpectralField::from_physical(grid, 3, f.physical().to_vec());
    f.to_fourier()?;
    project_and_truncate(grid, f.fourier_mut(), len);
    f.to_physical()?;
    let rms = (f.grid_sum_squares()? / T::from_usize_lossy(len)).sqrt();
    if rms == T::zero() {
        return Err(Error::Config(
            "random_solenoidal produced a zero field".into(),
        ));
    }
    let scale = T::one() / rms;
    let data: Vec<T> = f.physical().iter().map(|v| *v * scale).collect();
    Ok(SpectralField::from_physical(grid, 3, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<Grid<f64>> {
        Grid::new(n).unwrap()
    }

    #[test]
    fn unknown_preset_is_config_error() {
        assert!(matches!(Preset::from_name("kida"), Err(Error::Config(_))));
        assert_eq!(
            Preset::from_name("taylor_green").unwrap(),
            Preset::TaylorGreen
        );
    }

    #[test]
    fn zero_velocity_is_fixed_point() {
        let g = grid(16);
        let mut s = FlowState::init(&Preset::Zero, &g).unwrap();
        s.step(0.1).unwrap();
        assert!(s.u_hat().iter().all(|v| v.norm() == 0.0));
        let (p, h) = s.pressure_and_hessian().unwrap();
        assert!(p.physical().iter().all(|v| *v == 0.0));
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn cfl_violation_suggests_dt() {
        let g = grid(16);
        let mut s = FlowState::init(&Preset::TaylorGreen, &g).unwrap();
        let err = s.step(1.0).unwrap_err();
        match err {
            Error::Cfl { suggested, .. } => {
                let expected = 0.5 * std::f64::consts::TAU / 16.0;
                assert!((suggested - expected).abs() < 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(s.step(-0.1), Err(Error::Config(_))));
    }

    #[test]
    fn shear_strain_and_vorticity() {
        let g = grid(16);
        let u = SpectralField::vector_from_fn(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let mut s = FlowState::from_velocity(u, 0.0).unwrap();
        let strain = s.strain().unwrap().clone();
        for idx in 0..g.len() {
            let y = g.point(idx)[1];
            let m = strain.at(idx);
            assert!((m.get(0, 1) - 0.5 * y.cos()).abs() < 1e-13);
            assert!(m.trace().abs() < 1e-14);
        }
        let w = s.vorticity().unwrap();
        for idx in 0..g.len() {
            let y = g.point(idx)[1];
            assert!((w.physical_component(2)[idx] + y.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn random_preset_is_deterministic() {
        let g = grid(16);
        let p = Preset::RandomSolenoidal {
            seed: 11,
            slope: -2.0,
            cutoff: 4.0,
        };
        let a = FlowState::init(&p, &g).unwrap();
        let b = FlowState::init(&p, &g).unwrap();
        assert_eq!(a.velocity().physical(), b.velocity().physical());
        let (div, grad) = a.divergence_check().unwrap();
        assert!(div <= 1e-12 * grad);
    }

    #[test]
    fn uniform_flow_translates_points() {
        let g = grid(16);
        let mut s = FlowState::init(
            &Preset::Uniform {
                velocity: [0.3, -0.2, 0.1],
            },
            &g,
        )
        .unwrap();
        let mut pts = [[1.0, 2.0, 3.0]];
        s.advance(0.05, &mut pts).unwrap();
        let expected = [1.0 + 0.015, 2.0 - 0.01, 3.0 + 0.005];
        for d in 0..3 {
            assert!((pts[0][d] - expected[d]).abs() < 1e-14);
        }
    }
    #[test]
    fn snapshot_round_trip() {
        let g = grid(16);
        let s = FlowState::init(&Preset::TaylorGreen, &g).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&s, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"EULB1");
        assert_eq!(buf.len(), 5 + 32 + 8 * 3 * g.len());
        let back: FlowState<f64> = read_snapshot(buf.as_slice()).unwrap();
        for (a, b) in back
            .velocity()
            .physical()
            .iter()
            .zip(s.velocity().physical())
        {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(read_snapshot::<f64, _>(&b"EULB2xxxxxxxx"[..]).is_err());
    }

    #[test]
    fn taylor_green_pressure_closed_form() {
        let g = grid(16);
        let mut s = FlowState::init(&Preset::TaylorGreen, &g).unwrap();
        let (p, _) = s.pressure_and_hessian().unwrap();
        let p = p.physical().to_vec();
        for idx in 0..g.len() {
            let [x, y, z] = g.point(idx);
            let exact = ((2.0 * x).cos() + (2.0 * y).cos()) * ((2.0 * z).cos() + 2.0) / 16.0;
            assert!((p[idx] - exact).abs() < 1e-13, "{} vs {}", p[idx], exact);
        }
        let (defect, scale) = s.trace_identity_defect().unwrap();
        assert!(defect <= 1e-10 * scale);
    }

    #[test]
    fn energy_conserved_over_short_run() {
        let g = grid(16);
        let mut s = FlowState::init(&Preset::TaylorGreen, &g).unwrap();
        let e0 = s.diagnostics().unwrap().energy;
        for _ in 0..10 {
            s.step(0.05).unwrap();
        }
        let e1 = s.diagnostics().unwrap().energy;
        assert!(((e1 - e0) / e0).abs() < 1e-8);
    }
}
