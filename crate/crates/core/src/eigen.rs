//! Symmetric 3×3 eigen-decomposition and vorticity alignment metrics.
//!
//! Eigenvalues come from the trigonometric closed form of the
//! characteristic cubic. The eigenvector of the most isolated eigenvalue is
//! taken from the best cross product of the rows of `M − λI`; the remaining
//! pair is obtained from the exact 2×2 problem in its orthogonal complement.
//! When two eigenvalues are within `1e-9` relative of each other the cyclic
//! Jacobi iteration takes over. Final eigenvalues are the Rayleigh quotients
//! of the returned vectors.
//!
//! Sign convention: the first two eigenvectors have their largest-magnitude
//! component positive (ties go to the lowest index); the third is
//! `e₁ × e₂`, so the frame is always right-handed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cross, dot, norm, scale, sub, Real, Vec3};

/// Symmetric 3×3 tensor stored as its six independent components
/// `(11, 22, 33, 12, 13, 23)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym3<T> {
    pub c: [T; 6],
}

impl<T: Real> Sym3<T> {
    pub fn new(xx: T, yy: T, zz: T, xy: T, xz: T, yz: T) -> Self {
        Self {
            c: [xx, yy, zz, xy, xz, yz],
        }
    }

    pub fn zero() -> Self {
        Self { c: [T::zero(); 6] }
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self::new(o, o, o, z, z, z)
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Self::new(a, b, c, z, z, z)
    }

    /// Build from a full matrix, which must be symmetric to `1e-12` relative.
    pub fn from_matrix(m: [[T; 3]; 3]) -> Result<Self> {
        let scale = m
            .iter()
            .flatten()
            .fold(T::zero(), |acc, v| acc.max(v.abs()));
        let tol = T::lit(1e-12) * scale;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if !m[i][j].is_finite() || !m[j][i].is_finite() {
                return Err(Error::Contract("tensor entries must be finite".into()));
            }
            if (m[i][j] - m[j][i]).abs() > tol {
                return Err(Error::Contract(format!(
                    "tensor is not symmetric: M[{i}][{j}] = {}, M[{j}][{i}] = {}",
                    m[i][j], m[j][i]
                )));
            }
        }
        let h = T::lit(0.5);
        Ok(Self::new(
            m[0][0],
            m[1][1],
            m[2][2],
            h * (m[0][1] + m[1][0]),
            h * (m[0][2] + m[2][0]),
            h * (m[1][2] + m[2][1]),
        ))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (0, 0) => self.c[0],
            (1, 1) => self.c[1],
            (2, 2) => self.c[2],
            (0, 1) | (1, 0) => self.c[3],
            (0, 2) | (2, 0) => self.c[4],
            (1, 2) | (2, 1) => self.c[5],
            _ => panic!("index out of range"),
        }
    }

    pub fn to_matrix(&self) -> [[T; 3]; 3] {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let c = &self.c;
        [
            c[0] * v[0] + c[3] * v[1] + c[4] * v[2],
            c[3] * v[0] + c[1] * v[1] + c[5] * v[2],
            c[4] * v[0] + c[5] * v[1] + c[2] * v[2],
        ]
    }

    pub fn trace(&self) -> T {
        self.c[0] + self.c[1] + self.c[2]
    }

    /// `M:M = Σᵢⱼ Mᵢⱼ²`.
    pub fn double_dot(&self) -> T {
        let c = &self.c;
        c[0] * c[0]
            + c[1] * c[1]
            + c[2] * c[2]
            + T::lit(2.0) * (c[3] * c[3] + c[4] * c[4] + c[5] * c[5])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.double_dot().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.c.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = *self;
        for v in &mut out.c {
            *v *= s;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.c.iter_mut().zip(other.c) {
            *a -= b;
        }
        out
    }

    /// `R M Rᵀ` for a 3×3 matrix `R`.
    pub fn rotated(&self, r: &[[T; 3]; 3]) -> Self {
        let m = self.to_matrix();
        let mut out = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    for l in 0..3 {
                        s += r[i][k] * m[k][l] * r[j][l];
                    }
                }
                out[i][j] = s;
            }
        }
        let h = T::lit(0.5);
        Self::new(
            out[0][0],
            out[1][1],
            out[2][2],
            h * (out[0][1] + out[1][0]),
            h * (out[0][2] + out[2][0]),
            h * (out[1][2] + out[2][1]),
        )
    }
}

/// Which physical tensor a frame was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Strain,
    Hessian,
    Other,
}

/// Eigenvalues sorted descending with a right-handed orthonormal eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenFrame<T> {
    pub eigenvalues: [T; 3],
    pub eigenvectors: [Vec3<T>; 3],
    pub source: TensorKind,
}

impl<T: Real> EigenFrame<T> {
    /// `Σᵢ λᵢ eᵢeᵢᵀ`.
    pub fn reconstruct(&self) -> Sym3<T> {
        let mut m = [[T::zero(); 3]; 3];
        for (lam, e) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += *lam * e[i] * e[j];
                }
            }
        }
        let h = T::lit(0.5);
        Sym3::new(
            m[0][0],
            m[1][1],
            m[2][2],
            h * (m[0][1] + m[1][0]),
            h * (m[0][2] + m[2][0]),
            h * (m[1][2] + m[2][1]),
        )
    }

    /// Index of the eigenvector most parallel to `w`.
    pub fn best_aligned(&self, w: &Vec3<T>) -> usize {
        let mut best = 0;
        let mut best_cos = T::neg_infinity();
        for (i, e) in self.eigenvectors.iter().enumerate() {
            let c = dot(e, w).abs();
            if c > best_cos {
                best_cos = c;
                best = i;
            }
        }
        best
    }

    /// Components of `v` in this eigenbasis.
    pub fn components(&self, v: &Vec3<T>) -> Vec3<T> {
        [
            dot(&self.eigenvectors[0], v),
            dot(&self.eigenvectors[1], v),
            dot(&self.eigenvectors[2], v),
        ]
    }
}

/// `μ_m = max |λᵢ|`.
pub fn mu_max<T: Real>(frame: &EigenFrame<T>) -> T {
    frame
        .eigenvalues
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Eigen-decomposition of a symmetric tensor.
pub fn decompose<T: Real>(m: &Sym3<T>, source: TensorKind) -> EigenFrame<T> {
    let scale = m.max_abs();
    if scale == T::zero() {
        return EigenFrame {
            eigenvalues: [T::zero(); 3],
            eigenvectors: identity_basis(),
            source,
        };
    }
    // work on M/scale to keep the cubic well conditioned
    let a = m.scaled(T::one() / scale);
    let vals = closed_form_eigenvalues(&a);
    let spread = vals[0]
        .abs()
        .max(vals[2].abs())
        .max(T::min_positive_value());
    let gap = (vals[0] - vals[1]).min(vals[1] - vals[2]);
    let vecs = if gap <= T::lit(1e-9) * spread {
        jacobi_eigenvectors(&a)
    } else {
        closed_form_eigenvectors(&a, &vals)
    };
    finish_frame(m, vecs, source)
}

/// Decomposition through the cyclic Jacobi iteration only. Used as the
/// fallback near degeneracy and as an independent route in tests.
pub fn decompose_jacobi<T: Real>(m: &Sym3<T>, source: TensorKind) -> EigenFrame<T> {
    let scale = m.max_abs();
    if scale == T::zero() {
        return EigenFrame {
            eigenvalues: [T::zero(); 3],
            eigenvectors: identity_basis(),
            source,
        };
    }
    let a = m.scaled(T::one() / scale);
    finish_frame(m, jacobi_eigenvectors(&a), source)
}

fn identity_basis<T: Real>() -> [Vec3<T>; 3] {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

/// Eigenvalues of a symmetric matrix via the trigonometric solution, descending.
fn closed_form_eigenvalues<T: Real>(a: &Sym3<T>) -> [T; 3] {
    let c = &a.c;
    let p1 = c[3] * c[3] + c[4] * c[4] + c[5] * c[5];
    let q = a.trace() / T::lit(3.0);
    let (d0, d1, d2) = (c[0] - q, c[1] - q, c[2] - q);
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + T::lit(2.0) * p1;
    if p2 == T::zero() {
        return [q, q, q];
    }
    let p = (p2 / T::lit(6.0)).sqrt();
    let inv = T::one() / p;
    let b = Sym3::new(
        d0 * inv,
        d1 * inv,
        d2 * inv,
        c[3] * inv,
        c[4] * inv,
        c[5] * inv,
    );
    let bm = b.to_matrix();
    let det = bm[0][0] * (bm[1][1] * bm[2][2] - bm[1][2] * bm[2][1])
        - bm[0][1] * (bm[1][0] * bm[2][2] - bm[1][2] * bm[2][0])
        + bm[0][2] * (bm[1][0] * bm[2][1] - bm[1][1] * bm[2][0]);
    let r = (det / T::lit(2.0)).max(-T::one()).min(T::one());
    let phi = r.acos() / T::lit(3.0);
    let two = T::lit(2.0);
    let l1 = q + two * p * phi.cos();
    let l3 = q + two * p * (phi + T::TAU() / T::lit(3.0)).cos();
    let l2 = T::lit(3.0) * q - l1 - l3;
    let mut v = [l1, l2, l3];
    v.sort_by(|x, y| y.partial_cmp(x).unwrap());
    v
}

/// Unit vector spanning the null space of `a − λI` from the largest
/// pairwise cross product of its rows.
fn null_vector<T: Real>(a: &Sym3<T>, lambda: T) -> Option<Vec3<T>> {
    let mut m = a.to_matrix();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let cands = [
        cross(&m[0], &m[1]),
        cross(&m[0], &m[2]),
        cross(&m[1], &m[2]),
    ];
    let best = cands
        .iter()
        .max_by(|x, y| dot(x, x).partial_cmp(&dot(y, y)).unwrap())
        .copied()?;
    let len = norm(&best);
    (len > T::zero()).then(|| scale(&best, T::one() / len))
}

/// Any unit vector orthogonal to `v`.
fn orthogonal_unit<T: Real>(v: &Vec3<T>) -> Vec3<T> {
    let (o, z) = (T::one(), T::zero());
    let axis = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
        [o, z, z]
    } else if v[1].abs() <= v[2].abs() {
        [z, o, z]
    } else {
        [z, z, o]
    };
    let u = cross(v, &axis);
    scale(&u, T::one() / norm(&u))
}

fn closed_form_eigenvectors<T: Real>(a: &Sym3<T>, vals: &[T; 3]) -> [Vec3<T>; 3] {
    // the eigenvalue farther from the middle one is the better isolated
    let isolated = if vals[0] - vals[1] >= vals[1] - vals[2] {
        0
    } else {
        2
    };
    let Some(v) = null_vector(a, vals[isolated]) else {
        return jacobi_eigenvectors(a);
    };
    let u1 = orthogonal_unit(&v);
    let u2 = cross(&v, &u1);
    // 2×2 problem in span(u1, u2)
    let a11 = dot(&u1, &a.mul_vec(&u1));
    let a22 = dot(&u2, &a.mul_vec(&u2));
    let a12 = dot(&u1, &a.mul_vec(&u2));
    let (c, s) = jacobi_rotation(a11, a22, a12);
    let w1 = sub(&scale(&u1, c), &scale(&u2, s));
    let w2 = [
        s * u1[0] + c * u2[0],
        s * u1[1] + c * u2[1],
        s * u1[2] + c * u2[2],
    ];
    [v, w1, w2]
}

/// Rotation `(c, s)` that diagonalizes `[[a11, a12], [a12, a22]]`.
fn jacobi_rotation<T: Real>(a11: T, a22: T, a12: T) -> (T, T) {
    if a12 == T::zero() {
        return (T::one(), T::zero());
    }
    let theta = (a22 - a11) / (T::lit(2.0) * a12);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    (c, t * c)
}

/// Cyclic Jacobi; returns unsorted eigenvectors.
fn jacobi_eigenvectors<T: Real>(a: &Sym3<T>) -> [Vec3<T>; 3] {
    let mut m = a.to_matrix();
    let mut v = [[T::zero(); 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let total = a.norm().max(T::min_positive_value());
    for _sweep in 0..64 {
        let off = (m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]).sqrt();
        if off <= T::epsilon() * T::lit(1e-2) * total {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == T::zero() {
                continue;
            }
            let (c, s) = jacobi_rotation(m[p][p], m[q][q], m[p][q]);
            // m <- Jᵀ m J with J the rotation in the (p, q) plane
            for k in 0..3 {
                let mkp = m[k][p];
                let mkq = m[k][q];
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let mpk = m[p][k];
                let mqk = m[q][k];
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            m[p][q] = T::zero();
            m[q][p] = T::zero();
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    // columns of v are eigenvectors
    [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ]
}

fn fix_sign<T: Real>(e: Vec3<T>) -> Vec3<T> {
    let mut idx = 0;
    for i in 1..3 {
        if e[i].abs() > e[idx].abs() {
            idx = i;
        }
    }
    if e[idx] < T::zero() {
        scale(&e, -T::one())
    } else {
        e
    }
}

fn finish_frame<T: Real>(m: &Sym3<T>, vecs: [Vec3<T>; 3], source: TensorKind) -> EigenFrame<T> {
    // orthonormalize (Gram–Schmidt) before reading off Rayleigh quotients
    let e0 = scale(&vecs[0], T::one() / norm(&vecs[0]));
    let mut e1 = sub(&vecs[1], &scale(&e0, dot(&e0, &vecs[1])));
    e1 = scale(&e1, T::one() / norm(&e1));
    let e2 = cross(&e0, &e1);
    let mut pairs: Vec<(T, Vec3<T>)> = [e0, e1, e2]
        .into_iter()
        .map(|e| (dot(&e, &m.mul_vec(&e)), e))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let first = fix_sign(pairs[0].1);
    let second = fix_sign(pairs[1].1);
    let third = cross(&first, &second);
    EigenFrame {
        eigenvalues: [pairs[0].0, pairs[1].0, dot(&third, &m.mul_vec(&third))],
        eigenvectors: [first, second, third],
        source,
    }
}

/// How a vector sits relative to a symmetric tensor's eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics<T> {
    /// `|cos|` of the angle between `w` and each eigenvector.
    pub cosines: [T; 3],
    pub best_index: usize,
    /// `(w·Mw)/|w|²`.
    pub rayleigh: T,
    /// `‖Mw − rayleigh·w‖ / ‖Mw‖`; zero when `Mw = 0`.
    pub residual: T,
}

impl<T: Real> AlignmentMetrics<T> {
    pub fn best_cosine(&self) -> T {
        self.cosines[self.best_index]
    }

    /// Declared aligned when the best cosine is within `eps` of one.
    pub fn is_aligned(&self, eps: T) -> bool {
        self.best_cosine() >= T::one() - eps
    }
}

/// Alignment of `w` with the eigenbasis of `m`.
pub fn alignment<T: Real>(m: &Sym3<T>, w: &Vec3<T>) -> Result<AlignmentMetrics<T>> {
    let frame = decompose(m, TensorKind::Other);
    alignment_with_frame(m, &frame, w)
}

/// Same as [`alignment`] with a precomputed frame of `m`.
pub fn alignment_with_frame<T: Real>(
    m: &Sym3<T>,
    frame: &EigenFrame<T>,
    w: &Vec3<T>,
) -> Result<AlignmentMetrics<T>> {
    let wn = norm(w);
    if !(wn > T::zero()) {
        return Err(Error::Contract("alignment needs a nonzero vector".into()));
    }
    let unit = scale(w, T::one() / wn);
    let mut cosines = [T::zero(); 3];
    for (c, e) in cosines.iter_mut().zip(&frame.eigenvectors) {
        *c = dot(e, &unit).abs().min(T::one());
    }
    let mut best_index = 0;
    for i in 1..3 {
        if cosines[i] > cosines[best_index] {
            best_index = i;
        }
    }
    let mw = m.mul_vec(&unit);
    let rayleigh = dot(&unit, &mw);
    let mw_norm = norm(&mw);
    let residual = if mw_norm > T::zero() {
        norm(&sub(&mw, &scale(&unit, rayleigh))) / mw_norm
    } else {
        T::zero()
    };
    Ok(AlignmentMetrics {
        cosines,
        best_index,
        rayleigh,
        residual,
    })
}
