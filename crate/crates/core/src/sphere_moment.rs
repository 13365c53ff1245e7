//! Stereographic identification of the 2-sphere with the Riemann sphere,
//! rank-1 moment matrices `Z(z)`, and the linear bijection between 4x4
//! Hermitian matrices and cubic coefficient vectors.
//!
//! A point `x` on `S2` maps to `z(x) = (-i x2 + x3) / (1 + x1)`, with
//! `x = (-1, 0, 0)` going to infinity.  The moment matrix is
//! `Z(z) = v v^* / (1 + |z|^2)^d` with `v = (1, z, ..., z^d)`; at infinity it
//! degenerates to the single entry 1 at `(d, d)`.  Every `H` in `H^{d+1}`
//! induces a polynomial `p_H(x) = <H, Z(x)>` of degree at most `d` on the
//! sphere, and for `d = 3` this is a linear bijection onto the 16-dimensional
//! space spanned by the monomials of total degree 2 and 3.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::hermitian::HermitianMatrix;
use crate::{Error, Result};

/// Finite moduli above this are collapsed to the point at infinity when
/// building moment matrices (the reciprocal-vector form of `Z` is used well
/// before that, so no accuracy is lost).
pub const INFINITY_MODULUS: f64 = 1e8;

/// A point on the unit sphere, normalized at construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: [f64; 3],
}

impl SpherePoint {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        let norm = (x1 * x1 + x2 * x2 + x3 * x3).sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            x: [x1 / norm, x2 / norm, x3 / norm],
        })
    }

    pub fn distance(&self, other: &SpherePoint) -> f64 {
        let d: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d.sqrt()
    }
}

/// A point of the Riemann sphere: a finite complex number or infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RiemannPoint {
    Finite(Complex64),
    Infinity,
}

impl RiemannPoint {
    pub fn finite(re: f64, im: f64) -> Self {
        RiemannPoint::Finite(Complex64::new(re, im))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, RiemannPoint::Infinity)
    }

    /// Distance in the chordal (sphere) metric; handles infinity.
    pub fn chordal_distance(&self, other: &RiemannPoint) -> f64 {
        to_sphere(self).distance(&to_sphere(other))
    }
}

/// Stereographic projection `x -> z`.
pub fn to_riemann(x: &SpherePoint) -> RiemannPoint {
    let [x1, x2, x3] = x.x;
    if 1.0 + x1 <= 1e-12 {
        RiemannPoint::Infinity
    } else {
        RiemannPoint::Finite(Complex64::new(x3, -x2) / (1.0 + x1))
    }
}

/// Inverse stereographic projection `z -> x`, with
/// `x1 = (1 - |z|^2) / (1 + |z|^2)`, `x2 = -(1 + x1) Im z`,
/// `x3 = (1 + x1) Re z`.
pub fn to_sphere(zp: &RiemannPoint) -> SpherePoint {
    match zp {
        RiemannPoint::Infinity => SpherePoint { x: [-1.0, 0.0, 0.0] },
        RiemannPoint::Finite(z) => {
            let q = z.norm_sqr();
            if q > 1.0 {
                // write the formulas in terms of w = 1/z so large moduli
                // stay well conditioned
                let w = 1.0 / z;
                let t = 2.0 / (1.0 + w.norm_sqr());
                return SpherePoint {
                    x: [t * w.norm_sqr() - 1.0, t * w.im, t * w.re],
                };
            }
            let x1 = (1.0 - q) / (1.0 + q);
            let s = 1.0 + x1; // = 2 / (1 + |z|^2)
            SpherePoint { x: [x1, -s * z.im, s * z.re] }
        }
    }
}

/// Moment matrix `Z(z)` of degree `d`: a rank-1 PSD Hermitian matrix of size
/// `d + 1` with unit pairing against `diag(binom(d, k))`.
pub fn moment_matrix(zp: &RiemannPoint, d: usize) -> HermitianMatrix {
    assert!(d >= 1, "degree must be at least 1");
    match zp {
        RiemannPoint::Infinity => {
            let mut m = HermitianMatrix::zeros(d + 1);
            m.set(d, d, Complex64::new(1.0, 0.0));
            m
        }
        RiemannPoint::Finite(z) => {
            if z.norm() > INFINITY_MODULUS {
                return moment_matrix(&RiemannPoint::Infinity, d);
            }
            if z.norm() <= 1.0 {
                let mut v = vec![Complex64::new(1.0, 0.0); d + 1];
                for k in 1..=d {
                    v[k] = v[k - 1] * z;
                }
                let scale = 1.0 / (1.0 + z.norm_sqr()).powi(d as i32);
                HermitianMatrix::outer(&v).scale(scale)
            } else {
                // reciprocal form, numerically stable for |z| > 1
                let w = 1.0 / z;
                let mut v = vec![Complex64::new(1.0, 0.0); d + 1];
                for k in (0..d).rev() {
                    v[k] = v[k + 1] * w;
                }
                let scale = 1.0 / (1.0 + w.norm_sqr()).powi(d as i32);
                HermitianMatrix::outer(&v).scale(scale)
            }
        }
    }
}

/// Moment matrix evaluated directly from sphere coordinates through the
/// polynomial closed form `Z_kl = (-ix2+x3)^(k-m) (ix2+x3)^(l-m)
/// (1-x1)^m (1+x1)^(d-M) / 2^d` with `m = min(k,l)`, `M = max(k,l)`.
pub fn moment_matrix_from_x(x: &SpherePoint, d: usize) -> HermitianMatrix {
    assert!((1..=3).contains(&d), "closed form implemented for d in 1..=3");
    let [x1, x2, x3] = x.x;
    let zbar_num = Complex64::new(x3, x2); // i x2 + x3
    let z_num = Complex64::new(x3, -x2); // -i x2 + x3
    let scale = 1.0 / 2f64.powi(d as i32);
    HermitianMatrix::from_upper_fn(d + 1, |k, l| {
        let m = k.min(l);
        let mm = k.max(l);
        // upper triangle has k <= l: entry Z_kl carries z^k zbar^l
        z_num.powu((k - m) as u32)
            * zbar_num.powu((l - m) as u32)
            * (1.0 - x1).powi(m as i32)
            * (1.0 + x1).powi((d - mm) as i32)
            * scale
    })
}

/// Normalizing functional: `H1(d) = diag(binom(d, 0), ..., binom(d, d))`,
/// the Hermitian matrix representing the constant 1 on the sphere
/// (`<H1, Z(z)> = 1` for every `z`).
pub fn h_one(d: usize) -> HermitianMatrix {
    let mut b = vec![1.0; d + 1];
    for k in 1..=d {
        b[k] = b[k - 1] * ((d - k + 1) as f64) / (k as f64);
    }
    HermitianMatrix::diag(&b)
}

/// Monomial exponents `(j, k, l)` of the 16-dimensional coefficient basis,
/// ordered by (total degree, j, k, l) lexicographically.
pub const MONOMIALS: [(u8, u8, u8); 16] = [
    (0, 0, 2),
    (0, 1, 1),
    (0, 2, 0),
    (1, 0, 1),
    (1, 1, 0),
    (2, 0, 0),
    (0, 0, 3),
    (0, 1, 2),
    (0, 2, 1),
    (0, 3, 0),
    (1, 0, 2),
    (1, 1, 1),
    (1, 2, 0),
    (2, 0, 1),
    (2, 1, 0),
    (3, 0, 0),
];

/// Index of monomial `x1^j x2^k x3^l` in [`MONOMIALS`], if it belongs to the
/// quotient basis (total degree 2 or 3).
pub fn monomial_index(j: u8, k: u8, l: u8) -> Option<usize> {
    MONOMIALS.iter().position(|&m| m == (j, k, l))
}

/// An inhomogeneous ternary cubic on the sphere in the 16-coefficient
/// quotient representation (monomials of total degree 2 and 3).
#[derive(Clone, Debug, PartialEq)]
pub struct CubicOnSphere {
    pub coeffs: [f64; 16],
}

impl CubicOnSphere {
    pub fn zero() -> Self {
        Self { coeffs: [0.0; 16] }
    }

    pub fn from_terms(terms: &[((u8, u8, u8), f64)]) -> Result<Self> {
        let mut c = Self::zero();
        for &((j, k, l), v) in terms {
            let idx = monomial_index(j, k, l).ok_or_else(|| Error::BadCoefficient {
                key: format!("{j}{k}{l}"),
                reason: "total degree must be 2 or 3".into(),
            })?;
            c.coeffs[idx] += v;
        }
        Ok(c)
    }

    /// The constant `kappa` on the sphere is `kappa * ||x||^2`.
    pub fn constant(kappa: f64) -> Self {
        Self::from_terms(&[((2, 0, 0), kappa), ((0, 2, 0), kappa), ((0, 0, 2), kappa)]).unwrap()
    }

    pub fn eval_xyz(&self, x: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for (idx, &(j, k, l)) in MONOMIALS.iter().enumerate() {
            let c = self.coeffs[idx];
            if c != 0.0 {
                s += c * x[0].powi(j as i32) * x[1].powi(k as i32) * x[2].powi(l as i32);
            }
        }
        s
    }

    pub fn eval(&self, x: &SpherePoint) -> f64 {
        self.eval_xyz(&x.x)
    }

    /// Euclidean gradient at an arbitrary point of R^3.
    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (idx, &(j, k, l)) in MONOMIALS.iter().enumerate() {
            let c = self.coeffs[idx];
            if c == 0.0 {
                continue;
            }
            let (j, k, l) = (j as i32, k as i32, l as i32);
            if j > 0 {
                g[0] += c * j as f64 * x[0].powi(j - 1) * x[1].powi(k) * x[2].powi(l);
            }
            if k > 0 {
                g[1] += c * k as f64 * x[0].powi(j) * x[1].powi(k - 1) * x[2].powi(l);
            }
            if l > 0 {
                g[2] += c * l as f64 * x[0].powi(j) * x[1].powi(k) * x[2].powi(l - 1);
            }
        }
        g
    }

    pub fn neg(&self) -> Self {
        let mut c = self.clone();
        for v in &mut c.coeffs {
            *v = -*v;
        }
        c
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut c = self.clone();
        for (a, b) in c.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        c
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut c = self.clone();
        for v in &mut c.coeffs {
            *v *= t;
        }
        c
    }

    /// The homogeneous degree-3 part, as the 10 cubic coefficients in
    /// [`MONOMIALS`] order.
    pub fn cubic_part(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        out.copy_from_slice(&self.coeffs[6..16]);
        out
    }

    pub fn is_homogeneous_cubic(&self) -> bool {
        self.coeffs[..6].iter().all(|&c| c == 0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// JSON shape `{"coeffs": {"jkl": value, ...}}`; missing keys are zero.
#[derive(Serialize, Deserialize)]
struct CubicJson {
    coeffs: BTreeMap<String, f64>,
}

impl From<&CubicOnSphere> for CubicJson {
    fn from(c: &CubicOnSphere) -> Self {
        let mut coeffs = BTreeMap::new();
        for (idx, &(j, k, l)) in MONOMIALS.iter().enumerate() {
            if c.coeffs[idx] != 0.0 {
                coeffs.insert(format!("{j}{k}{l}"), c.coeffs[idx]);
            }
        }
        CubicJson { coeffs }
    }
}

impl TryFrom<CubicJson> for CubicOnSphere {
    type Error = Error;
    fn try_from(cj: CubicJson) -> Result<Self> {
        let mut c = CubicOnSphere::zero();
        for (key, value) in cj.coeffs {
            let digits: Vec<u8> = key
                .chars()
                .map(|ch| ch.to_digit(10).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::BadCoefficient {
                    key: key.clone(),
                    reason: "key must be three decimal digits jkl".into(),
                })?;
            if digits.len() != 3 {
                return Err(Error::BadCoefficient {
                    key,
                    reason: "key must be three decimal digits jkl".into(),
                });
            }
            let (j, k, l) = (digits[0], digits[1], digits[2]);
            let deg = j + k + l;
            let idx = monomial_index(j, k, l).ok_or_else(|| Error::BadCoefficient {
                key: key.clone(),
                reason: if deg < 2 {
                    format!(
                        "total degree {deg} is below the quotient basis; on the sphere multiply \
                         by ||x||^2 first (a constant k becomes k*(200+020+002), a linear term \
                         x1 becomes 300+120+102)"
                    )
                } else {
                    format!("total degree {deg} is not 2 or 3")
                },
            })?;
            if !value.is_finite() {
                return Err(Error::BadCoefficient {
                    key,
                    reason: "value must be a finite number".into(),
                });
            }
            c.coeffs[idx] = value;
        }
        Ok(c)
    }
}

impl Serialize for CubicOnSphere {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubicJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CubicOnSphere {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cj = CubicJson::deserialize(d)?;
        Self::try_from(cj).map_err(serde::de::Error::custom)
    }
}

mod symbolic {
    //! Exact trivariate polynomial arithmetic over complex rationals, used
    //! once to generate the 16x16 coefficient-matching matrix.  All
    //! denominators are powers of two, so i64 rationals are ample.

    use num_rational::Ratio;
    use std::collections::BTreeMap;

    pub type Rat = Ratio<i64>;

    #[derive(Clone, Copy, PartialEq)]
    pub struct CRat {
        pub re: Rat,
        pub im: Rat,
    }

    impl CRat {
        pub fn zero() -> Self {
            Self { re: Rat::from_integer(0), im: Rat::from_integer(0) }
        }
        pub fn real(n: i64, d: i64) -> Self {
            Self { re: Ratio::new(n, d), im: Rat::from_integer(0) }
        }
        pub fn imag(n: i64, d: i64) -> Self {
            Self { re: Rat::from_integer(0), im: Ratio::new(n, d) }
        }
        pub fn is_zero(&self) -> bool {
            self.re == Rat::from_integer(0) && self.im == Rat::from_integer(0)
        }
        pub fn add(&self, o: &CRat) -> Self {
            Self { re: self.re + o.re, im: self.im + o.im }
        }
        pub fn mul(&self, o: &CRat) -> Self {
            Self {
                re: self.re * o.re - self.im * o.im,
                im: self.re * o.im + self.im * o.re,
            }
        }
    }

    /// Polynomial in x1, x2, x3 with complex rational coefficients, keyed by
    /// exponents.
    pub type Poly = BTreeMap<(u8, u8, u8), CRat>;

    pub fn poly_const(c: CRat) -> Poly {
        let mut p = Poly::new();
        if !c.is_zero() {
            p.insert((0, 0, 0), c);
        }
        p
    }

    pub fn poly_add_term(p: &mut Poly, mono: (u8, u8, u8), c: CRat) {
        let entry = p.entry(mono).or_insert_with(CRat::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            p.remove(&mono);
        }
    }

    pub fn poly_mul(a: &Poly, b: &Poly) -> Poly {
        let mut out = Poly::new();
        for (&(j1, k1, l1), ca) in a {
            for (&(j2, k2, l2), cb) in b {
                poly_add_term(&mut out, (j1 + j2, k1 + k2, l1 + l2), ca.mul(cb));
            }
        }
        out
    }

    pub fn poly_pow(a: &Poly, e: usize) -> Poly {
        let mut out = poly_const(CRat::real(1, 1));
        for _ in 0..e {
            out = poly_mul(&out, a);
        }
        out
    }

    pub fn poly_scale(a: &Poly, c: CRat) -> Poly {
        let mut out = Poly::new();
        for (&m, v) in a {
            let w = v.mul(&c);
            if !w.is_zero() {
                out.insert(m, w);
            }
        }
        out
    }

    /// Reduces a polynomial of total degree <= 3 modulo `||x||^2 - 1` into
    /// the span of the degree-2 and degree-3 monomials: degree-0 and
    /// degree-1 terms are multiplied by `x1^2 + x2^2 + x3^2`.
    pub fn reduce_mod_sphere(p: &Poly) -> Poly {
        let mut out = Poly::new();
        for (&(j, k, l), &c) in p {
            let deg = j + k + l;
            match deg {
                2 | 3 => poly_add_term(&mut out, (j, k, l), c),
                0 | 1 => {
                    poly_add_term(&mut out, (j + 2, k, l), c);
                    poly_add_term(&mut out, (j, k + 2, l), c);
                    poly_add_term(&mut out, (j, k, l + 2), c);
                }
                _ => panic!("unexpected degree {deg} during reduction"),
            }
        }
        out
    }
}

use symbolic::{poly_mul, poly_pow, poly_scale, reduce_mod_sphere, CRat, Poly};

/// Symbolic entry `Z_kl(x)` for degree `d`, as an exact polynomial.
fn z_entry_poly(k: usize, l: usize, d: usize) -> Poly {
    use symbolic::poly_add_term;
    // -i x2 + x3  (multiplies z powers), i x2 + x3 (conjugate powers)
    let mut z_num = Poly::new();
    poly_add_term(&mut z_num, (0, 1, 0), CRat::imag(-1, 1));
    poly_add_term(&mut z_num, (0, 0, 1), CRat::real(1, 1));
    let mut zbar_num = Poly::new();
    poly_add_term(&mut zbar_num, (0, 1, 0), CRat::imag(1, 1));
    poly_add_term(&mut zbar_num, (0, 0, 1), CRat::real(1, 1));
    let mut one_minus = Poly::new();
    poly_add_term(&mut one_minus, (0, 0, 0), CRat::real(1, 1));
    poly_add_term(&mut one_minus, (1, 0, 0), CRat::real(-1, 1));
    let mut one_plus = Poly::new();
    poly_add_term(&mut one_plus, (0, 0, 0), CRat::real(1, 1));
    poly_add_term(&mut one_plus, (1, 0, 0), CRat::real(1, 1));

    let m = k.min(l);
    let mm = k.max(l);
    let mut p = poly_pow(&z_num, k - m);
    p = poly_mul(&p, &poly_pow(&zbar_num, l - m));
    p = poly_mul(&p, &poly_pow(&one_minus, m));
    p = poly_mul(&p, &poly_pow(&one_plus, d - mm));
    poly_scale(&p, CRat::real(1, 1 << d))
}

/// Exact coefficient column (in [`MONOMIALS`] order) of `<E_alpha, Z(x)>`
/// for the `vec_h` basis element `alpha`, `d = 3`.
fn bijection_column(alpha: usize) -> [f64; 16] {
    let d = 3usize;
    let real_part = |p: &Poly| -> Poly {
        let mut out = Poly::new();
        for (&m, c) in p {
            if c.re != symbolic::Rat::from_integer(0) {
                out.insert(m, CRat { re: c.re, im: symbolic::Rat::from_integer(0) });
            }
        }
        out
    };
    let imag_part = |p: &Poly| -> Poly {
        let mut out = Poly::new();
        for (&m, c) in p {
            if c.im != symbolic::Rat::from_integer(0) {
                out.insert(m, CRat { re: c.im, im: symbolic::Rat::from_integer(0) });
            }
        }
        out
    };

    let pairs = HermitianMatrix::upper_pairs(d + 1);
    let poly = if alpha <= d {
        // diagonal basis element: <E, Z> = Z_aa, which is real
        let p = z_entry_poly(alpha, alpha, d);
        debug_assert!(imag_part(&p).is_empty(), "diagonal entry must be real");
        real_part(&p)
    } else {
        let pair_idx = (alpha - (d + 1)) / 2;
        let (i, j) = pairs[pair_idx];
        let p = z_entry_poly(i, j, d);
        if (alpha - (d + 1)) % 2 == 0 {
            // real off-diagonal basis element: <E, Z> = 2 Re Z_ij
            poly_scale(&real_part(&p), CRat::real(2, 1))
        } else {
            // imaginary off-diagonal basis element: <E, Z> = 2 Im Z_ij
            poly_scale(&imag_part(&p), CRat::real(2, 1))
        }
    };

    let reduced = reduce_mod_sphere(&poly);
    let mut col = [0.0; 16];
    for (&(j, k, l), c) in &reduced {
        let idx = monomial_index(j, k, l).expect("reduction leaves only degree 2/3 monomials");
        debug_assert!(c.im == symbolic::Rat::from_integer(0));
        col[idx] = *c.re.numer() as f64 / *c.re.denom() as f64;
    }
    col
}

/// The 16x16 coefficient-matching matrix `M_bij`: column `alpha` holds the
/// coefficient vector of `<E_alpha, Z(x)>` for the `vec_h` basis of `H^4`.
/// Generated exactly over rationals, then converted to floats (all entries
/// are small multiples of 1/8, hence exact in f64).
pub static M_BIJ: Lazy<DMatrix<f64>> = Lazy::new(|| {
    let mut m = DMatrix::<f64>::zeros(16, 16);
    for alpha in 0..16 {
        let col = bijection_column(alpha);
        for (row, &v) in col.iter().enumerate() {
            m[(row, alpha)] = v;
        }
    }
    m
});

static M_BIJ_INV: Lazy<DMatrix<f64>> = Lazy::new(|| {
    M_BIJ
        .clone()
        .try_inverse()
        .expect("coefficient-matching matrix is a bijection and must invert")
});

/// `H -> p_H`: coefficient vector of `<H, Z(x)>` in the quotient basis.
pub fn h_to_poly(h: &HermitianMatrix) -> Result<CubicOnSphere> {
    if h.n() != 4 {
        return Err(Error::SizeMismatch(format!("h_to_poly needs size 4, got {}", h.n())));
    }
    let c = &*M_BIJ * h.vec_h();
    let mut coeffs = [0.0; 16];
    for i in 0..16 {
        coeffs[i] = c[i];
    }
    Ok(CubicOnSphere { coeffs })
}

/// Inverse of [`h_to_poly`]: the unique `H` with `<H, Z(x)> = p(x)` on `S2`.
pub fn poly_to_h(p: &CubicOnSphere) -> HermitianMatrix {
    let c = DVector::from_row_slice(&p.coeffs);
    let v = &*M_BIJ_INV * c;
    HermitianMatrix::unvec_h(4, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sphere_point(rng: &mut impl Rng) -> SpherePoint {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            if let Ok(p) = SpherePoint::new(v[0], v[1], v[2]) {
                let n: f64 = v.iter().map(|a| a * a).sum::<f64>();
                if n > 0.01 {
                    return p;
                }
            }
        }
    }

    pub(crate) fn random_cubic(rng: &mut impl Rng) -> CubicOnSphere {
        let mut c = CubicOnSphere::zero();
        for v in &mut c.coeffs {
            *v = rng.gen_range(-1.0..1.0);
        }
        c
    }

    #[test]
    fn projection_examples() {
        let z = to_riemann(&SpherePoint::new(1.0, 0.0, 0.0).unwrap());
        assert_eq!(z, RiemannPoint::finite(0.0, 0.0));
        let z = to_riemann(&SpherePoint::new(0.0, 0.0, 1.0).unwrap());
        assert_eq!(z, RiemannPoint::finite(1.0, 0.0));
        let z = to_riemann(&SpherePoint::new(-1.0, 0.0, 0.0).unwrap());
        assert!(z.is_infinity());

        assert_eq!(to_sphere(&RiemannPoint::finite(0.0, 0.0)).x, [1.0, 0.0, 0.0]);
        let p = to_sphere(&RiemannPoint::finite(1.0, 0.0));
        assert!(p.distance(&SpherePoint::new(0.0, 0.0, 1.0).unwrap()) < 1e-15);
        let p = to_sphere(&RiemannPoint::finite(0.0, 1.0));
        assert!(p.distance(&SpherePoint::new(0.0, -1.0, 0.0).unwrap()) < 1e-15);
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let x = random_sphere_point(&mut rng);
            let back = to_sphere(&to_riemann(&x));
            assert!(back.distance(&x) < 1e-10);
        }
        // the antipode of e1
        let x = SpherePoint::new(-1.0, 0.0, 0.0).unwrap();
        assert!(to_sphere(&to_riemann(&x)).distance(&x) < 1e-12);
        // riemann -> sphere -> riemann
        for z in [
            RiemannPoint::finite(0.3, -2.0),
            RiemannPoint::finite(0.0, 0.0),
            RiemannPoint::Infinity,
        ] {
            let back = to_riemann(&to_sphere(&z));
            assert!(back.chordal_distance(&z) < 1e-12);
        }
    }

    #[test]
    fn stereographic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x = random_sphere_point(&mut rng);
            if x.x[0] < -0.999 {
                continue;
            }
            if let RiemannPoint::Finite(z) = to_riemann(&x) {
                let [x1, x2, x3] = x.x;
                let zbar = Complex64::new(x3, x2) / (1.0 + x1);
                assert!((z.conj() - zbar).norm() < 1e-12);
                assert!((z.norm_sqr() - (1.0 - x1) / (1.0 + x1)).abs() < 1e-12 * (1.0 + z.norm_sqr()));
                assert!((1.0 + z.norm_sqr() - 2.0 / (1.0 + x1)).abs() < 1e-12 * (1.0 + z.norm_sqr()));
            } else {
                panic!("expected finite point");
            }
        }
    }

    #[test]
    fn moment_matrix_landmarks() {
        let z0 = moment_matrix(&RiemannPoint::finite(0.0, 0.0), 3);
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
                assert!((z0.get(i, j).re - want).abs() < 1e-15 && z0.get(i, j).im == 0.0);
            }
        }
        let zinf = moment_matrix(&RiemannPoint::Infinity, 3);
        assert_eq!(zinf.get(3, 3), Complex64::new(1.0, 0.0));
        assert!((zinf.norm_fro() - 1.0).abs() < 1e-15);

        let z1 = moment_matrix(&RiemannPoint::finite(1.0, 0.0), 3);
        for i in 0..4 {
            for j in 0..4 {
                assert!((z1.get(i, j) - Complex64::new(0.125, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn moment_matrix_is_psd_rank1_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h1 = h_one(3);
        for _ in 0..100 {
            let z = RiemannPoint::finite(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let m = moment_matrix(&z, 3);
            let lmin = m.min_eigenvalue().unwrap();
            assert!(lmin.abs() < 1e-12, "rank 1 PSD has zero min eigenvalue");
            assert!((h1.inner(&m) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_matrix_large_modulus_stable() {
        let m = moment_matrix(&RiemannPoint::finite(3e9, 0.0), 3);
        let inf = moment_matrix(&RiemannPoint::Infinity, 3);
        assert!(m.sub(&inf).norm_fro() < 1e-6);
        let m = moment_matrix(&RiemannPoint::finite(1e7, 0.0), 3);
        assert!(m.norm_fro().is_finite());
        assert!((h_one(3).inner(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_matrix_from_x_examples() {
        let x = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let m = moment_matrix_from_x(&x, 3);
        assert_eq!(m.get(0, 0), Complex64::new(1.0, 0.0));
        assert!((m.norm_fro() - 1.0).abs() < 1e-15);

        // x = (0, 1, 0) maps to z = -i; entry (0,1) = i/8, entry (0,3) = -i/8
        let x = SpherePoint::new(0.0, 1.0, 0.0).unwrap();
        let m = moment_matrix_from_x(&x, 3);
        assert!((m.get(0, 1) - Complex64::new(0.0, 0.125)).norm() < 1e-15);
        assert!((m.get(0, 3) - Complex64::new(0.0, -0.125)).norm() < 1e-15);
    }

    #[test]
    fn moment_matrix_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..=3usize {
            for _ in 0..50 {
                let x = random_sphere_point(&mut rng);
                let a = moment_matrix_from_x(&x, d);
                let b = moment_matrix(&to_riemann(&x), d);
                assert!(a.sub(&b).norm_fro() < 1e-12);
            }
        }
    }

    #[test]
    fn kronecker_structure_of_gamma() {
        use crate::hermitian::dup_gamma;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=3usize {
            for _ in 0..50 {
                let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let zm = moment_matrix(&RiemannPoint::Finite(z), d);
                let g = dup_gamma(&zm).unwrap();
                // [[1, z], [conj z, |z|^2]] (x) Z_ul
                for i in 0..2 * d {
                    for j in 0..2 * d
                    {
                        let (bi, li) = (i / d, i % d);
                        let (bj, lj) = (j / d, j % d);
                        let factor = match (bi, bj) {
                            (0, 0) => Complex64::new(1.0, 0.0),
                            (0, 1) => z,
                            (1, 0) => z.conj(),
                            _ => Complex64::new(z.norm_sqr(), 0.0),
                        };
                        let want = factor * zm.get(li, lj);
                        assert!((g.get(i, j) - want).norm() < 1e-12 * (1.0 + zm.norm_fro()));
                    }
                }
            }
        }
    }

    #[test]
    fn span_of_moment_matrices_is_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = DMatrix::<f64>::zeros(16, 16);
        for col in 0..16 {
            let z = RiemannPoint::finite(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let v = moment_matrix(&z, 3).vec_h();
            m.set_column(col, &v);
        }
        let rank = m.svd(false, false).rank(1e-9);
        assert_eq!(rank, 16);
    }

    #[test]
    fn bijection_constant_one() {
        let h = h_one(3);
        assert_eq!(h, HermitianMatrix::diag(&[1.0, 3.0, 3.0, 1.0]));
        let p = h_to_poly(&h).unwrap();
        let want = CubicOnSphere::constant(1.0);
        for (a, b) in p.coeffs.iter().zip(&want.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = poly_to_h(&want);
        assert!(back.sub(&h).norm_fro() < 1e-12);
    }

    #[test]
    fn bijection_e00_column() {
        // H = e0 e0^*: p = (1 + x1)^3 / 8 reduced mod ||x||^2 - 1
        let mut h = HermitianMatrix::zeros(4);
        h.set(0, 0, Complex64::new(1.0, 0.0));
        let p = h_to_poly(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_sphere_point(&mut rng);
            let want = (1.0 + x.x[0]).powi(3) / 8.0;
            assert!((p.eval(&x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bijection_zero() {
        let p = h_to_poly(&HermitianMatrix::zeros(4)).unwrap();
        assert!(p.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn bijection_evaluation_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let p = random_cubic(&mut rng);
            let h = poly_to_h(&p);
            for _ in 0..50 {
                let x = random_sphere_point(&mut rng);
                let via_h = h.inner(&moment_matrix(&to_riemann(&x), 3));
                assert!((via_h - p.eval(&x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bijection_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = random_cubic(&mut rng);
            let back = h_to_poly(&poly_to_h(&p)).unwrap();
            for (a, b) in back.coeffs.iter().zip(&p.coeffs) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn poly_x1_times_norm() {
        let p = CubicOnSphere::from_terms(&[((3, 0, 0), 1.0), ((1, 2, 0), 1.0), ((1, 0, 2), 1.0)])
            .unwrap();
        let h = poly_to_h(&p);
        let zplus = moment_matrix(&RiemannPoint::finite(0.0, 0.0), 3);
        let zminus = moment_matrix(&RiemannPoint::Infinity, 3);
        assert!((h.inner(&zplus) - 1.0).abs() < 1e-12);
        assert!((h.inner(&zminus) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_parity_split() {
        // even part of p_H on the sphere = quadratic coefficients,
        // odd part = cubic coefficients
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = random_cubic(&mut rng);
        for _ in 0..50 {
            let x = random_sphere_point(&mut rng);
            let neg = SpherePoint::new(-x.x[0], -x.x[1], -x.x[2]).unwrap();
            let even = 0.5 * (p.eval(&x) + p.eval(&neg));
            let odd = 0.5 * (p.eval(&x) - p.eval(&neg));
            let mut quad = p.clone();
            quad.coeffs[6..].fill(0.0);
            let mut cubic = p.clone();
            cubic.coeffs[..6].fill(0.0);
            assert!((even - quad.eval(&x)).abs() < 1e-12);
            assert!((odd - cubic.eval(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_json_round_trip_and_rejection() {
        let p: CubicOnSphere =
            serde_json::from_str(r#"{"coeffs":{"300":1.0,"111":-2.5}}"#).unwrap();
        assert_eq!(p.coeffs[monomial_index(3, 0, 0).unwrap()], 1.0);
        assert_eq!(p.coeffs[monomial_index(1, 1, 1).unwrap()], -2.5);
        let s = serde_json::to_string(&p).unwrap();
        let back: CubicOnSphere = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);

        let bad: std::result::Result<CubicOnSphere, _> =
            serde_json::from_str(r#"{"coeffs":{"100":1.0}}"#);
        let msg = format!("{}", bad.unwrap_err());
        assert!(msg.contains("300+120+102"), "hint for degree-1 keys: {msg}");
        assert!(serde_json::from_str::<CubicOnSphere>(r#"{"coeffs":{"400":1.0}}"#).is_err());
        assert!(serde_json::from_str::<CubicOnSphere>(r#"{"coeffs":{"30":1.0}}"#).is_err());
    }
}
