//! Periodic-box discretization and Fourier machinery.
//!
//! Transform convention: the forward transform is unnormalized,
//! `f̂(k) = Σ_x f(x) e^{-i k·x}`, so a constant field `c` has `f̂(0) = c·n³`.
//! The inverse divides by `n³`. Parseval then reads
//! `Σ_x f(x)² = n⁻³ Σ_k |f̂(k)|²`.
//!
//! Wavenumber indices use the symmetric layout `0, 1, …, n/2-1, -n/2, …, -1`.
//! First derivatives zero the Nyquist index; even-order operators
//! (Laplacian, `∂ᵢ²`) keep it, since `cos(n x / 2)` has a well-defined second
//! derivative on the grid. That makes `solve_poisson ∘ (−Δ)` the identity on
//! every zero-mean grid function.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{csum, Real};

/// Spatial axis of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X1 = 0,
    X2 = 1,
    X3 = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::X3];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<usize> for Axis {
    type Error = Error;

    /// Accepts the 1-based axis numbers used in the documentation (1, 2, 3).
    fn try_from(axis: usize) -> Result<Self> {
        match axis {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            3 => Ok(Axis::X3),
            _ => Err(Error::Contract(format!(
                "axis must be 1, 2 or 3, got {axis}"
            ))),
        }
    }
}

/// Cubic periodic grid with `n` points per axis.
pub struct Grid<T: Real> {
    n: usize,
    box_length: T,
    wavenumbers: Vec<i64>,
    dealias_cut: i64,
    k_even_table: Vec<T>,
    k_first_table: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl<T: Real> Grid<T> {
    /// Grid on the default `2π` box.
    pub fn new(n: usize) -> Result<Arc<Self>> {
        Self::with_box_length(n, T::TAU())
    }

    pub fn with_box_length(n: usize, box_length: T) -> Result<Arc<Self>> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size n must be a power of two >= 16, got {n}"
            )));
        }
        if !(box_length > T::zero()) || !box_length.is_finite() {
            return Err(Error::Config(format!(
                "box length must be positive and finite, got {box_length}"
            )));
        }
        let half = (n / 2) as i64;
        let wavenumbers: Vec<i64> = (0..n as i64)
            .map(|i| if i < half { i } else { i - n as i64 })
            .collect();
        let k0 = T::TAU() / box_length;
        let k_even_table: Vec<T> = wavenumbers
            .iter()
            .map(|k| k0 * T::from_i64(*k).expect("wavenumber representable"))
            .collect();
        let mut k_first_table = k_even_table.clone();
        k_first_table[n / 2] = T::zero();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n,
            box_length,
            wavenumbers,
            dealias_cut: (n as i64 - 1) / 3,
            k_even_table,
            k_first_table,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> T {
        self.box_length
    }

    /// Total number of grid points, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> T {
        self.box_length / T::from_usize_lossy(self.n)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        h * h * h
    }

    pub fn volume(&self) -> T {
        self.box_length * self.box_length * self.box_length
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n + i2) * self.n + i3
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Physical coordinates of grid point `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> [T; 3] {
        let h = self.spacing();
        let [a, b, c] = self.unravel(idx);
        [
            h * T::from_usize_lossy(a),
            h * T::from_usize_lossy(b),
            h * T::from_usize_lossy(c),
        ]
    }

    /// Integer mode index stored at array position `i` along one axis.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        self.wavenumbers[i]
    }

    pub fn wavenumbers(&self) -> &[i64] {
        &self.wavenumbers
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// `2π / L`, the fundamental wavenumber.
    #[inline]
    pub fn k0(&self) -> T {
        T::TAU() / self.box_length
    }

    /// Physical wavenumber used by first derivatives (Nyquist forced to zero).
    #[inline]
    pub fn k_first(&self, i: usize) -> T {
        self.k_first_table[i]
    }

    /// Physical wavenumber used by even-order operators (Nyquist kept).
    #[inline]
    pub fn k_even(&self, i: usize) -> T {
        self.k_even_table[i]
    }

    /// `|k|²` for the Laplacian symbol at flattened mode `idx`.
    #[inline]
    pub fn k_squared(&self, idx: usize) -> T {
        let [a, b, c] = self.unravel(idx);
        let (ka, kb, kc) = (self.k_even(a), self.k_even(b), self.k_even(c));
        ka * ka + kb * kb + kc * kc
    }

    /// First-derivative wavevector at flattened mode `idx`.
    #[inline]
    pub fn k_vector(&self, idx: usize) -> [T; 3] {
        let [a, b, c] = self.unravel(idx);
        [self.k_first(a), self.k_first(b), self.k_first(c)]
    }

    /// Largest retained integer mode under the 2/3 rule.
    pub fn dealias_cut(&self) -> i64 {
        self.dealias_cut
    }

    /// True when mode `idx` survives 2/3-rule truncation.
    #[inline]
    pub fn is_retained(&self, idx: usize) -> bool {
        let [a, b, c] = self.unravel(idx);
        let cut = self.dealias_cut;
        self.wavenumbers[a].abs() <= cut
            && self.wavenumbers[b].abs() <= cut
            && self.wavenumbers[c].abs() <= cut
    }

    /// Wrap a coordinate into `[0, L)`.
    pub fn wrap(&self, x: T) -> T {
        let l = self.box_length;
        let mut r = x % l;
        if r < T::zero() {
            r += l;
        }
        if r >= l {
            r -= l;
        }
        r
    }

    pub fn wrap_point(&self, p: [T; 3]) -> [T; 3] {
        [self.wrap(p[0]), self.wrap(p[1]), self.wrap(p[2])]
    }

    /// In-place unnormalized 3D FFT of one component block of length `n³`.
    pub(crate) fn fft3(&self, data: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n * n);
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        // axis 3 is contiguous
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        // axis 2
        for a in 0..n {
            for c in 0..n {
                for b in 0..n {
                    line[b] = data[(a * n + b) * n + c];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for b in 0..n {
                    data[(a * n + b) * n + c] = line[b];
                }
            }
        }
        // axis 1
        for b in 0..n {
            for c in 0..n {
                for a in 0..n {
                    line[a] = data[(a * n + b) * n + c];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for a in 0..n {
                    data[(a * n + b) * n + c] = line[a];
                }
            }
        }
    }
}

/// A scalar (1 component) or vector (3 component) field holding both
/// physical and Fourier representations, each with a currency flag.
///
/// Component data is stored component-major: component `c` occupies
/// `[c·n³, (c+1)·n³)` in both buffers, each block row-major in `(i1, i2, i3)`.
#[derive(Clone)]
pub struct SpectralField<T: Real> {
    grid: Arc<Grid<T>>,
    components: usize,
    physical: Vec<T>,
    fourier: Vec<Complex<T>>,
    physical_current: bool,
    fourier_current: bool,
}

impl<T: Real> fmt::Debug for SpectralField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("n", &self.grid.n)
            .field("components", &self.components)
            .field("physical_current", &self.physical_current)
            .field("fourier_current", &self.fourier_current)
            .finish()
    }
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &Arc<Grid<T>>, components: usize) -> Self {
        assert!(
            components == 1 || components == 3,
            "fields have 1 or 3 components"
        );
        let len = grid.len() * components;
        Self {
            grid: Arc::clone(grid),
            components,
            physical: vec![T::zero(); len],
            fourier: vec![czero(); len],
            physical_current: true,
            fourier_current: true,
        }
    }

    pub fn from_physical(grid: &Arc<Grid<T>>, components: usize, data: Vec<T>) -> Self {
        assert!(components == 1 || components == 3);
        assert_eq!(data.len(), grid.len() * components, "physical data length");
        Self {
            grid: Arc::clone(grid),
            components,
            physical: data,
            fourier: vec![czero(); grid.len() * components],
            physical_current: true,
            fourier_current: false,
        }
    }

    pub fn from_fourier(grid: &Arc<Grid<T>>, components: usize, modes: Vec<Complex<T>>) -> Self {
        assert!(components == 1 || components == 3);
        assert_eq!(modes.len(), grid.len() * components, "fourier data length");
        Self {
            grid: Arc::clone(grid),
            components,
            physical: vec![T::zero(); grid.len() * components],
            fourier: modes,
            physical_current: false,
            fourier_current: true,
        }
    }

    /// Sample a scalar function at the grid points.
    pub fn scalar_from_fn(grid: &Arc<Grid<T>>, f: impl Fn([T; 3]) -> T) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_physical(grid, 1, data)
    }

    /// Sample a vector function at the grid points.
    pub fn vector_from_fn(grid: &Arc<Grid<T>>, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let len = grid.len();
        let mut data = vec![T::zero(); 3 * len];
        for i in 0..len {
            let v = f(grid.point(i));
            for c in 0..3 {
                data[c * len + i] = v[c];
            }
        }
        Self::from_physical(grid, 3, data)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_physical_current(&self) -> bool {
        self.physical_current
    }

    pub fn is_fourier_current(&self) -> bool {
        self.fourier_current
    }

    /// Populate the Fourier representation. No-op when already current.
    pub fn to_fourier(&mut self) -> Result<()> {
        if self.fourier_current {
            return Ok(());
        }
        let len = self.grid.len();
        if let Some(pos) = self.physical.iter().position(|v| !v.is_finite()) {
            let p = self.grid.unravel(pos % len);
            return Err(Error::NumericalFault(format!(
                "non-finite value {} at grid point {:?} of component {}",
                self.physical[pos],
                p,
                pos / len
            )));
        }
        for c in 0..self.components {
            let block = &mut self.fourier[c * len..(c + 1) * len];
            for (dst, &src) in block.iter_mut().zip(&self.physical[c * len..(c + 1) * len]) {
                *dst = Complex::new(src, T::zero());
            }
            self.grid.fft3(block, false);
        }
        self.fourier_current = true;
        Ok(())
    }

    /// Populate the physical representation. No-op when already current.
    pub fn to_physical(&mut self) -> Result<()> {
        if self.physical_current {
            return Ok(());
        }
        let len = self.grid.len();
        if let Some(pos) = self
            .fourier
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            let [a, b, c] = self.grid.unravel(pos % len);
            let g = &self.grid;
            return Err(Error::NumericalFault(format!(
                "non-finite Fourier coefficient at mode ({}, {}, {}) of component {}",
                g.wavenumber(a),
                g.wavenumber(b),
                g.wavenumber(c),
                pos / len
            )));
        }
        let norm = T::one() / T::from_usize_lossy(len);
        let mut work = vec![czero(); len];
        for c in 0..self.components {
            work.copy_from_slice(&self.fourier[c * len..(c + 1) * len]);
            self.grid.fft3(&mut work, true);
            for (dst, src) in self.physical[c * len..(c + 1) * len].iter_mut().zip(&work) {
                *dst = src.re * norm;
            }
        }
        self.physical_current = true;
        Ok(())
    }

    /// Physical values. Panics if the physical representation is stale.
    pub fn physical(&self) -> &[T] {
        assert!(self.physical_current, "physical representation is stale");
        &self.physical
    }

    pub fn physical_component(&self, c: usize) -> &[T] {
        let len = self.grid.len();
        &self.physical()[c * len..(c + 1) * len]
    }

    /// Fourier modes. Panics if the Fourier representation is stale.
    pub fn fourier(&self) -> &[Complex<T>] {
        assert!(self.fourier_current, "fourier representation is stale");
        &self.fourier
    }

    pub fn fourier_component(&self, c: usize) -> &[Complex<T>] {
        let len = self.grid.len();
        &self.fourier()[c * len..(c + 1) * len]
    }

    /// Mutable physical data; marks the Fourier side stale.
    pub fn physical_mut(&mut self) -> &mut [T] {
        assert!(self.physical_current, "physical representation is stale");
        self.fourier_current = false;
        &mut self.physical
    }

    /// Mutable Fourier data; marks the physical side stale.
    pub fn fourier_mut(&mut self) -> &mut [Complex<T>] {
        assert!(self.fourier_current, "fourier representation is stale");
        self.physical_current = false;
        &mut self.fourier
    }

    /// Extract component `c` as a scalar field carrying whichever
    /// representations are current.
    pub fn component(&self, c: usize) -> Self {
        assert!(c < self.components);
        let len = self.grid.len();
        Self {
            grid: Arc::clone(&self.grid),
            components: 1,
            physical: self.physical[c * len..(c + 1) * len].to_vec(),
            fourier: self.fourier[c * len..(c + 1) * len].to_vec(),
            physical_current: self.physical_current,
            fourier_current: self.fourier_current,
        }
    }

    /// `∂f/∂x_axis` by multiplication with `i k`, Nyquist zeroed.
    pub fn derivative(&mut self, axis: Axis) -> Result<Self> {
        self.to_fourier()?;
        let g = Arc::clone(&self.grid);
        let len = g.len();
        let ax = axis.index();
        let mut out = vec![czero(); self.fourier.len()];
        for c in 0..self.components {
            for idx in 0..len {
                let k = g.k_vector(idx)[ax];
                let v = self.fourier[c * len + idx];
                out[c * len + idx] = Complex::new(-k * v.im, k * v.re);
            }
        }
        Ok(Self::from_fourier(&g, self.components, out))
    }

    /// `∂²f/∂xᵢ∂xⱼ`. Pure second derivatives keep the Nyquist mode; mixed
    /// ones are products of first-derivative symbols.
    pub fn second_derivative(&mut self, i: Axis, j: Axis) -> Result<Self> {
        self.to_fourier()?;
        let g = Arc::clone(&self.grid);
        let len = g.len();
        let mut out = vec![czero(); self.fourier.len()];
        for c in 0..self.components {
            for idx in 0..len {
                let sym = if i == j {
                    let k = g.k_even(g.unravel(idx)[i.index()]);
                    -(k * k)
                } else {
                    let kv = g.k_vector(idx);
                    -(kv[i.index()] * kv[j.index()])
                };
                out[c * len + idx] = self.fourier[c * len + idx] * sym;
            }
        }
        Ok(Self::from_fourier(&g, self.components, out))
    }

    /// `Δf`, Nyquist kept.
    pub fn laplacian(&mut self) -> Result<Self> {
        self.to_fourier()?;
        let g = Arc::clone(&self.grid);
        let len = g.len();
        let mut out = self.fourier.clone();
        for c in 0..self.components {
            for idx in 0..len {
                out[c * len + idx] = out[c * len + idx] * (-g.k_squared(idx));
            }
        }
        Ok(Self::from_fourier(&g, self.components, out))
    }

    /// Solve `−Δφ = rhs` with zero mean. The right-hand side must itself have
    /// zero mean: `|mean| ≤ 1e-10 · rms(rhs)`.
    pub fn solve_poisson(&mut self) -> Result<Self> {
        self.to_fourier()?;
        let g = Arc::clone(&self.grid);
        let len = g.len();
        let n3 = T::from_usize_lossy(len);
        let tol = T::lit(1e-10);
        let mut out = vec![czero(); self.fourier.len()];
        for c in 0..self.components {
            let block = &self.fourier[c * len..(c + 1) * len];
            let mean = block[0].norm() / n3;
            let rms = (csum(block.iter().map(|v| v.norm_sqr())) / n3).sqrt() / n3.sqrt();
            if mean > tol * rms {
                return Err(Error::Conservation(format!(
                    "Poisson right-hand side has nonzero mean {mean:e} (rms {rms:e})"
                )));
            }
            for idx in 1..len {
                out[c * len + idx] = block[idx] / g.k_squared(idx);
            }
        }
        Ok(Self::from_fourier(&g, self.components, out))
    }

    /// Zero every mode outside the 2/3-rule cube.
    pub fn dealias(&mut self) -> Result<()> {
        self.to_fourier()?;
        let g = Arc::clone(&self.grid);
        let len = g.len();
        let modes = self.fourier_mut();
        for c in 0..modes.len() / len {
            for idx in 0..len {
                if !g.is_retained(idx) {
                    modes[c * len + idx] = czero();
                }
            }
        }
        Ok(())
    }

    /// Largest absolute physical value over all components.
    pub fn max_abs(&mut self) -> Result<T> {
        self.to_physical()?;
        Ok(self.physical.iter().fold(T::zero(), |m, v| m.max(v.abs())))
    }

    /// `Σ_x f²` over grid points and components.
    pub fn grid_sum_squares(&mut self) -> Result<T> {
        self.to_physical()?;
        Ok(csum(self.physical.iter().map(|&v| v * v)))
    }

    /// `n⁻³ Σ_k |f̂|²`; equals [`grid_sum_squares`](Self::grid_sum_squares) by Parseval.
    pub fn spectral_sum_squares(&mut self) -> Result<T> {
        self.to_fourier()?;
        let n3 = T::from_usize_lossy(self.grid.len());
        Ok(csum(self.fourier.iter().map(|v| v.norm_sqr())) / n3)
    }

    /// Largest deviation from Hermitian symmetry `f̂(−k) = conj f̂(k)`.
    pub fn hermitian_defect(&mut self) -> Result<T> {
        self.to_fourier()?;
        let g = &self.grid;
        let n = g.n();
        let len = g.len();
        let mut worst = T::zero();
        for c in 0..self.components {
            for idx in 0..len {
                let [a, b, cc] = g.unravel(idx);
                let mirror = g.index((n - a) % n, (n - b) % n, (n - cc) % n);
                let d = self.fourier[c * len + idx] - self.fourier[c * len + mirror].conj();
                worst = worst.max(d.norm());
            }
        }
        Ok(worst)
    }
}

/// Evaluate several real fields, given by their Fourier modes on the same
/// grid, at an arbitrary point by direct summation of the Fourier series.
/// This is exact trigonometric interpolation: for band-limited data it
/// reproduces the underlying smooth field to roundoff.
pub fn evaluate_modes<T: Real>(grid: &Grid<T>, spectra: &[&[Complex<T>]], x: [T; 3]) -> Vec<T> {
    let n = grid.n();
    let len = grid.len();
    let phases: Vec<Vec<Complex<T>>> = (0..3)
        .map(|d| {
            (0..n)
                .map(|i| {
                    let arg = grid.k_even(i) * x[d];
                    Complex::new(arg.cos(), arg.sin())
                })
                .collect()
        })
        .collect();
    let mut acc = vec![czero::<T>(); spectra.len()];
    for a in 0..n {
        for b in 0..n {
            let pab = phases[0][a] * phases[1][b];
            let row = (a * n + b) * n;
            for c in 0..n {
                let idx = row + c;
                let mut any = false;
                for s in spectra {
                    let v = s[idx];
                    if v.re != T::zero() || v.im != T::zero() {
                        any = true;
                        break;
                    }
                }
                if !any {
                    continue;
                }
                let ph = pab * phases[2][c];
                for (out, s) in acc.iter_mut().zip(spectra) {
                    *out = *out + s[idx] * ph;
                }
            }
        }
    }
    let norm = T::one() / T::from_usize_lossy(len);
    acc.into_iter().map(|v| v.re * norm).collect()
}
