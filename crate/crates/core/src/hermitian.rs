//! Dense complex Hermitian matrices and the block maps behind the cone tests.
//!
//! Everything here is small (at most 12x12 complex) and immutable after
//! construction.  Eigenvalue work goes through the real symmetric embedding
//! `M = P + iQ  ->  [[P, -Q], [Q, P]]`, which doubles every eigenvalue's
//! multiplicity and carries `<U, V> = tr(UV)` to `2 <U, V>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense complex Hermitian matrix, row-major storage.
///
/// The Hermitian invariant `M[i][j] == conj(M[j][i])` is enforced by every
/// constructor and mutator; diagonal entries are kept strictly real.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

/// JSON shape used by the CLI: `{"n": .., "re": [[..]], "im": [[..]]}`.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n);
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds from a full square array of entries, rejecting inputs whose
    /// asymmetry exceeds `1e-10 * (1 + max|entry|)`.  The stored matrix is
    /// the exact Hermitian part.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::SizeMismatch("matrix rows must form a square".into()));
        }
        let mut scale: f64 = 0.0;
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(rows[i][j].norm());
                asym = asym.max((rows[i][j] - rows[j][i].conj()).norm());
            }
        }
        if asym > 1e-10 * (1.0 + scale) {
            return Err(Error::NotHermitian(asym));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = 0.5 * (rows[i][j] + rows[j][i].conj());
            }
            m.data[i * n + i].im = 0.0;
        }
        Ok(m)
    }

    /// Builds from a function giving the upper triangle (including diagonal);
    /// the lower triangle is filled in by conjugation.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if i == j {
                    m.data[i * n + i] = Complex64::new(v.re, 0.0);
                } else {
                    m.data[i * n + j] = v;
                    m.data[j * n + i] = v.conj();
                }
            }
        }
        m
    }

    /// Rank-1 outer product `v v*` (always Hermitian PSD).
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        Self::from_upper_fn(n, |i, j| v[i] * v[j].conj())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Sets entry (i, j) and its mirror (j, i); on the diagonal only the
    /// real part is kept.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        if i == j {
            self.data[i * self.n + i] = Complex64::new(v.re, 0.0);
        } else {
            self.data[i * self.n + j] = v;
            self.data[j * self.n + i] = v.conj();
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: Complex64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * t).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    /// Frobenius inner product `tr(UV)`; real for Hermitian arguments.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Real symmetric embedding `[[P, -Q], [Q, P]]` of `M = P + iQ`.
    pub fn embed_real(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.data[i * n + j];
                out[(i, j)] = z.re;
                out[(n + i, n + j)] = z.re;
                out[(i, n + j)] = -z.im;
                out[(n + i, j)] = z.im;
            }
        }
        out
    }

    /// Inverse of [`embed_real`](Self::embed_real) extended to arbitrary
    /// symmetric matrices of size `2n`: orthogonal projection onto the
    /// embedded subspace followed by un-embedding.  `from_embedded(embed(M))`
    /// recovers `M` exactly.
    pub fn from_embedded(y: &DMatrix<f64>) -> Result<Self> {
        let two_n = y.nrows();
        if two_n % 2 != 0 || y.ncols() != two_n {
            return Err(Error::SizeMismatch("embedded matrix must be square of even size".into()));
        }
        let n = two_n / 2;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let p = 0.5 * (y[(i, j)] + y[(n + i, n + j)]);
                let q = 0.5 * (y[(n + i, j)] - y[(i, n + j)]);
                m.data[i * n + j] = Complex64::new(p, q);
            }
        }
        // re-hermitize to kill the antisymmetric remainder of a generic input
        for i in 0..n {
            for j in (i + 1)..n {
                let h = 0.5 * (m.data[i * n + j] + m.data[j * n + i].conj());
                m.data[i * n + j] = h;
                m.data[j * n + i] = h.conj();
            }
            m.data[i * n + i].im = 0.0;
        }
        Ok(m)
    }

    /// Smallest eigenvalue, via the real embedding.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::SizeMismatch("empty matrix".into()));
        }
        let eig = self
            .embed_real()
            .try_symmetric_eigen(1e-14, 10_000)
            .ok_or(Error::EigenFailure)?;
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// PSD test with the relative tolerance `eps_psd = 1e-8 * (1 + ||M||_F)`.
    pub fn is_psd(&self) -> Result<bool> {
        let eps = 1e-8 * (1.0 + self.norm_fro());
        Ok(self.min_eigenvalue()? >= -eps)
    }

    /// Full eigen decomposition, eigenvalues descending, with complex
    /// orthonormal eigenvectors.  Pairs of the doubled real spectrum are
    /// collapsed by complex Gram-Schmidt.
    pub fn eigenpairs_desc(&self) -> Result<Vec<(f64, Vec<Complex64>)>> {
        let n = self.n;
        let eig = self
            .embed_real()
            .try_symmetric_eigen(1e-14, 10_000)
            .ok_or(Error::EigenFailure)?;
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut picked: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(n);
        for &k in &order {
            if picked.len() == n {
                break;
            }
            let col = eig.eigenvectors.column(k);
            let mut w: Vec<Complex64> =
                (0..n).map(|i| Complex64::new(col[i], col[n + i])).collect();
            // remove components along already selected vectors; the discarded
            // half of each doubled eigenvalue projects to (numerically) zero
            for (_, u) in &picked {
                let c: Complex64 = u.iter().zip(&w).map(|(ui, wi)| ui.conj() * wi).sum();
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
            let norm2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            if norm2 > 0.5 {
                let inv = 1.0 / norm2.sqrt();
                for wi in &mut w {
                    *wi *= inv;
                }
                picked.push((eig.eigenvalues[k], w));
            }
        }
        if picked.len() != n {
            return Err(Error::EigenFailure);
        }
        Ok(picked)
    }

    /// Real coordinate vector: diagonal entries first, then for each upper
    /// pair (i < j, row-major) the real and imaginary part.  Length `n^2`.
    pub fn vec_h(&self) -> DVector<f64> {
        let n = self.n;
        let mut v = DVector::<f64>::zeros(n * n);
        for i in 0..n {
            v[i] = self.data[i * n + i].re;
        }
        let mut k = n;
        for i in 0..n {
            for j in (i + 1)..n {
                let z = self.data[i * n + j];
                v[k] = z.re;
                v[k + 1] = z.im;
                k += 2;
            }
        }
        v
    }

    /// Inverse of [`vec_h`](Self::vec_h).
    pub fn unvec_h(n: usize, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(v[i], 0.0);
        }
        let mut k = n;
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, Complex64::new(v[k], v[k + 1]));
                k += 2;
            }
        }
        m
    }

    /// The list of (i, j) upper pairs in `vec_h` order, for size `n`.
    pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push((i, j));
            }
        }
        out
    }

    /// The `alpha`-th basis matrix of the `vec_h` coordinates.
    pub fn basis_element(n: usize, alpha: usize) -> Self {
        let mut v = DVector::<f64>::zeros(n * n);
        v[alpha] = 1.0;
        Self::unvec_h(n, &v)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(MatrixJson::from(self)).expect("matrix serialization")
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let mj: MatrixJson = serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidInput(format!("matrix JSON: {e}")))?;
        Self::try_from(mj)
    }
}

impl From<&HermitianMatrix> for MatrixJson {
    fn from(m: &HermitianMatrix) -> Self {
        let n = m.n;
        MatrixJson {
            n,
            re: (0..n)
                .map(|i| (0..n).map(|j| m.get(i, j).re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| m.get(i, j).im).collect())
                .collect(),
        }
    }
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;
    fn try_from(mj: MatrixJson) -> Result<Self> {
        if mj.re.len() != mj.n || mj.im.len() != mj.n {
            return Err(Error::SizeMismatch("re/im row count must equal n".into()));
        }
        let rows: Vec<Vec<Complex64>> = mj
            .re
            .iter()
            .zip(&mj.im)
            .map(|(r, i)| {
                if r.len() != mj.n || i.len() != mj.n {
                    return Err(Error::SizeMismatch("re/im column count must equal n".into()));
                }
                Ok(r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect())
            })
            .collect::<Result<_>>()?;
        Self::from_rows(&rows)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mj = MatrixJson::deserialize(d)?;
        Self::try_from(mj).map_err(serde::de::Error::custom)
    }
}

/// 2x2-block Hermitian matrix of half-block size `d`, produced by
/// [`duplicate_center`].
#[derive(Clone, Debug)]
pub struct BlockHermitian2xd {
    d: usize,
    mat: HermitianMatrix,
}

impl BlockHermitian2xd {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> HermitianMatrix {
        self.mat
    }

    /// Block-wise partial transpose: swaps the off-diagonal corner blocks.
    pub fn partial_transpose(&self) -> HermitianMatrix {
        partial_transpose(&self.mat).expect("even size by construction")
    }
}

/// Row/column index of `A` feeding row `i` of `G_A` (half-block size `d`).
fn dup_row(i: usize, d: usize) -> usize {
    if i < d {
        i
    } else {
        i - d + 1
    }
}

/// Rows of `G_A` fed by row `a` of `A`.
fn dup_preimage(a: usize, d: usize) -> Vec<usize> {
    if a == 0 {
        vec![0]
    } else if a == d {
        vec![2 * d - 1]
    } else {
        vec![a, a + d - 1]
    }
}

/// `A (size d+1)  ->  G_A (size 2d)`, duplicating the central `d-1` rows and
/// columns.  The corners of `G_A` are the four size-`d` corners of `A`.
pub fn duplicate_center(a: &HermitianMatrix) -> Result<BlockHermitian2xd> {
    if a.n() < 2 {
        return Err(Error::SizeMismatch(format!(
            "duplicate_center needs size >= 2, got {}",
            a.n()
        )));
    }
    let d = a.n() - 1;
    let g = HermitianMatrix::from_upper_fn(2 * d, |i, j| a.get(dup_row(i, d), dup_row(j, d)));
    Ok(BlockHermitian2xd { d, mat: g })
}

/// Partial transpose of an even-size Hermitian matrix viewed as a 2x2 block
/// matrix: `[[ul, ur], [ll, lr]] -> [[ul, ll], [ur, lr]]`.  An involution.
pub fn partial_transpose(g: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = g.n();
    if n % 2 != 0 {
        return Err(Error::SizeMismatch("partial transpose needs even size".into()));
    }
    let d = n / 2;
    Ok(HermitianMatrix::from_upper_fn(n, |i, j| {
        match (i < d, j < d) {
            (true, false) => g.get(i + d, j - d), // ur' = ll
            (false, true) => g.get(i - d, j + d), // ll' = ur
            _ => g.get(i, j),
        }
    }))
}

/// Convenience: `G_A^Gamma` in one step.
pub fn dup_gamma(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(duplicate_center(a)?.partial_transpose())
}

/// Adjoint of `A -> G_A` under the Frobenius product: entry (a, b) sums the
/// entries of `Y` over the duplicated index preimages.
pub fn dup_adjoint(y: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = y.n();
    if n % 2 != 0 {
        return Err(Error::SizeMismatch("dup_adjoint needs even size".into()));
    }
    let d = n / 2;
    let mut out = HermitianMatrix::zeros(d + 1);
    for a in 0..=d {
        for b in a..=d {
            let mut s = Complex64::new(0.0, 0.0);
            for &i in &dup_preimage(a, d) {
                for &j in &dup_preimage(b, d) {
                    s += y.get(i, j);
                }
            }
            out.set(a, b, s);
        }
    }
    Ok(out)
}

/// Adjoint `L*` of `A -> G_A^Gamma`: satisfies `<G_A^Gamma, C> = <A, L*(C)>`.
pub fn gamma_dup_adjoint(c: &HermitianMatrix) -> Result<HermitianMatrix> {
    dup_adjoint(&partial_transpose(c)?)
}

/// Kernel vectors of `G_A` coming from the duplicated coordinates:
/// `xi_j` has `+1` at index `j` and `-1` at index `d+j-1`, `j = 1..d-1`.
pub fn duplication_kernel(d: usize) -> Vec<Vec<Complex64>> {
    (1..d)
        .map(|j| {
            let mut v = vec![Complex64::new(0.0, 0.0); 2 * d];
            v[j] = Complex64::new(1.0, 0.0);
            v[d + j - 1] = Complex64::new(-1.0, 0.0);
            v
        })
        .collect()
}
