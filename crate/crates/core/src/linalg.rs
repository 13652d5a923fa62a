//! Small dense complex matrices.
//!
//! Everything here targets the d ≤ ~10 regime of few-level working media, so
//! the storage is a flat row-major `Vec` and products are naive triple loops.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, CoreResult};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> CoreResult<Self> {
        let dim = rows.len();
        if dim == 0 {
            return invalid("matrix must have at least one row");
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return invalid(format!(
                "matrix is not square: row {bad} has {} entries, expected {dim}",
                rows[bad].len()
            ));
        }
        if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("matrix has non-finite entries");
        }
        Ok(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Pauli matrices σx, σy, σz.
    pub fn pauli_x() -> Self {
        Self::from_fn(2, |i, j| if i != j { ONE } else { ZERO })
    }

    pub fn pauli_y() -> Self {
        Self::from_fn(2, |i, j| match (i, j) {
            (0, 1) => -I,
            (1, 0) => I,
            _ => ZERO,
        })
    }

    pub fn pauli_z() -> Self {
        Self::diagonal(&[ONE, -ONE])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.dim)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (i..self.dim).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol))
    }

    /// `max |U†U − I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }

    /// Upper bound on the spectral norm of a Hermitian matrix; exact for 2×2.
    pub fn hermitian_norm(&self) -> f64 {
        if self.dim == 2 {
            let [c0, cx, cy, cz] = pauli_coefficients(self);
            c0.re.abs() + (cx.re * cx.re + cy.re * cy.re + cz.re * cz.re).sqrt()
        } else {
            self.frobenius_norm()
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{}) [", self.dim, self.dim)?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|z| format!("{:+.6}{:+.6}i", z.re, z.im)).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Coefficients `(c0, cx, cy, cz)` with `m = c0·I + cx·σx + cy·σy + cz·σz`.
pub fn pauli_coefficients(m: &CMatrix) -> [Complex64; 4] {
    assert_eq!(m.dim(), 2, "Pauli decomposition needs a 2x2 matrix");
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    [(a + d) * 0.5, (b + c) * 0.5, (b - c) * I * 0.5, (a - d) * 0.5]
}

/// `exp(−i·h·dt)` for Hermitian `h`.
///
/// 2×2 matrices use the closed form `e^{−i c0 dt} [cos(|c|dt) − i sin(|c|dt) ĉ·σ]`;
/// larger ones fall back to scaling and squaring.
pub fn exp_hermitian_step(h: &CMatrix, dt: f64) -> CMatrix {
    if h.dim() != 2 {
        return expm(&h.scale(Complex64::new(0.0, -dt)));
    }
    let [c0, cx, cy, cz] = pauli_coefficients(h);
    let (x, y, z) = (cx.re, cy.re, cz.re);
    let r = (x * x + y * y + z * z).sqrt();
    let global = Complex64::from_polar(1.0, -c0.re * dt);
    let (s, c) = (r * dt).sin_cos();
    // sin(r dt)/r, with the r → 0 limit
    let sinc = if r * dt < 1e-8 {
        dt * (1.0 - (r * dt).powi(2) / 6.0)
    } else {
        s / r
    };
    let a = Complex64::new(c, -z * sinc);
    let d = Complex64::new(c, z * sinc);
    let b = Complex64::new(-y * sinc, -x * sinc);
    let cc = Complex64::new(y * sinc, -x * sinc);
    CMatrix {
        dim: 2,
        data: vec![global * a, global * b, global * cc, global * d],
    }
}

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
pub fn expm(a: &CMatrix) -> CMatrix {
    let d = a.dim();
    let norm = a.one_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(Complex64::new(0.5f64.powi(squarings as i32), 0.0));

    // ‖scaled‖ ≤ 1/2, so 20 terms put the truncation error far below round-off
    let mut result = CMatrix::identity(d);
    let mut term = CMatrix::identity(d);
    for k in 1..=20 {
        term = term.matmul(&scaled).scale(Complex64::new(1.0 / k as f64, 0.0));
        result = &result + &term;
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Haar-distributed random unitary: QR (modified Gram–Schmidt) of a complex
/// Ginibre matrix with the diagonal phases of R divided out.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // columns
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| Complex64::new(standard_normal(rng) * scale, standard_normal(rng) * scale))
                .collect()
        })
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: Complex64 = cols[k].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum();
            let basis = cols[k].clone();
            for (z, b) in cols[j].iter_mut().zip(&basis) {
                *z -= proj * b;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    // Gram–Schmidt already yields a positive real diagonal for R, which is the
    // phase convention that makes the distribution Haar.
    CMatrix::from_fn(dim, |i, j| cols[j][i])
}

/// Box–Muller standard normal deviate.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_decomposition_roundtrip() {
        let h = CMatrix::from_rows(vec![
            vec![Complex64::new(0.3, 0.0), Complex64::new(0.5, -0.2)],
            vec![Complex64::new(0.5, 0.2), Complex64::new(-1.1, 0.0)],
        ])
        .unwrap();
        let [c0, cx, cy, cz] = pauli_coefficients(&h);
        let rebuilt = &(&CMatrix::identity(2).scale(c0) + &CMatrix::pauli_x().scale(cx))
            + &(&CMatrix::pauli_y().scale(cy) + &CMatrix::pauli_z().scale(cz));
        assert!(rebuilt.max_abs_diff(&h) < 1e-15);
        for c in [c0, cx, cy, cz] {
            assert!(c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_step_matches_taylor() {
        let h = CMatrix::from_rows(vec![
            vec![Complex64::new(0.7, 0.0), Complex64::new(1.3, 0.4)],
            vec![Complex64::new(1.3, -0.4), Complex64::new(-0.2, 0.0)],
        ])
        .unwrap();
        for dt in [1e-6, 0.01, 0.3, 2.0] {
            let closed = exp_hermitian_step(&h, dt);
            let series = expm(&h.scale(Complex64::new(0.0, -dt)));
            assert!(closed.max_abs_diff(&series) < 1e-13, "dt = {dt}");
            assert!(closed.unitarity_defect() < 1e-14);
        }
    }

    #[test]
    fn expm_of_diagonal() {
        let a = CMatrix::diagonal(&[
            Complex64::new(0.0, 2.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(3.0, -1.0),
        ]);
        let e = expm(&a);
        for i in 0..3 {
            assert!((e[(i, i)] - a[(i, i)].exp()).norm() < 1e-12 * a[(i, i)].exp().norm().max(1.0));
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..=5 {
            let u = haar_unitary(d, &mut rng);
            assert!(u.unitarity_defect() < 1e-13, "d = {d}");
        }
    }

    #[test]
    fn from_rows_rejects_ragged() {
        let rows = vec![vec![ONE, ZERO], vec![ONE]];
        assert!(CMatrix::from_rows(rows).is_err());
    }
}
