//! The spectrahedral cones and their certificates.
//!
//! A cubic `p` on the sphere corresponds to a Hermitian 4x4 matrix `H` with
//! `<H, Z(x)> = p(x)`; nonnegativity of `p` is equivalent (degree 3 is
//! exact) to `H = B + L*(C)` with `B` PSD 4x4 and `C` PSD 6x6, where `L*`
//! is the adjoint of `A -> G_A^Gamma`.  This module provides:
//!
//! * the explicit 16-row real linear system for the nonnegativity cone and
//!   its unit-ball specialization, both hard-coded and machine-generated
//!   from the coefficient-matching matrix (the two constructions are
//!   compared entrywise in the tests);
//! * membership tests for the moment cone `C_d` (two eigenvalue checks)
//!   and its dual (a small SDP), with verifiable [`NonnegCertificate`]s and
//!   separating moment matrices on rejection;
//! * independent certificate verification by pure linear algebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use crate::hermitian::{dup_gamma, gamma_dup_adjoint, HermitianMatrix};
use crate::sdp::{self, SdpProblem, SdpStatus};
use crate::sphere_moment::{h_one, monomial_index, poly_to_h, CubicOnSphere, M_BIJ, MONOMIALS};
use crate::{Error, Result};

/// Verdicts within this distance of the cone boundary are reported as
/// boundary-tolerance rather than a hard inside/outside call.
pub const BOUNDARY_TOL: f64 = 1e-7;

/// Pass thresholds for independent certificate verification.
pub const CERT_PSD_TOL: f64 = 1e-7;
pub const CERT_RESIDUAL_TOL: f64 = 1e-7;

// ---------------------------------------------------------------------------
// linear constraint systems
// ---------------------------------------------------------------------------

/// One real equality `<F_B, B> + <F_C, C> = rhs_coeffs . c + rhs_const`
/// over the certificate pair and the 16 cubic coefficients.
#[derive(Clone, Debug)]
pub struct SystemRow {
    pub label: String,
    pub f_b: HermitianMatrix,
    pub f_c: HermitianMatrix,
    pub rhs_coeffs: [f64; 16],
    pub rhs_const: f64,
}

impl SystemRow {
    pub fn rhs(&self, p: &CubicOnSphere) -> f64 {
        self.rhs_const
            + self
                .rhs_coeffs
                .iter()
                .zip(&p.coeffs)
                .map(|(a, c)| a * c)
                .sum::<f64>()
    }

    pub fn lhs(&self, b: &HermitianMatrix, c: &HermitianMatrix) -> f64 {
        self.f_b.inner(b) + self.f_c.inner(c)
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub rows: Vec<SystemRow>,
}

impl ConstraintSystem {
    /// The feasibility SDP for this system at the cubic `p`: blocks are the
    /// real embeddings of `B` (8x8) and `C` (12x12); the objective
    /// `tr B + tr C` regularizes the (pure feasibility) question so that the
    /// dual always has a strictly feasible point.
    pub fn to_sdp_problem(&self, p: &CubicOnSphere) -> SdpProblem {
        let mut prob = SdpProblem::new(vec![8, 12]);
        prob.objective = vec![
            DMatrix::identity(8, 8) * 0.5,
            DMatrix::identity(12, 12) * 0.5,
        ];
        for row in &self.rows {
            prob.add_constraint(
                vec![row.f_b.embed_real() * 0.5, row.f_c.embed_real() * 0.5],
                row.rhs(p),
            );
        }
        prob
    }

    /// Largest entrywise deviation from `other`, rows compared in order.
    pub fn max_row_deviation(&self, other: &ConstraintSystem) -> f64 {
        assert_eq!(self.rows.len(), other.rows.len());
        let mut dev = 0.0f64;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            dev = dev.max(a.f_b.sub(&b.f_b).norm_fro());
            dev = dev.max(a.f_c.sub(&b.f_c).norm_fro());
            for m in 0..16 {
                dev = dev.max((a.rhs_coeffs[m] - b.rhs_coeffs[m]).abs());
            }
            dev = dev.max((a.rhs_const - b.rhs_const).abs());
        }
        dev
    }

    /// Largest deviation between each row of `self` and the linear
    /// combination of `generated` rows prescribed by its right-hand side
    /// coefficients (the generated system has one row per monomial, in
    /// `MONOMIALS` order, with unit right-hand sides).
    pub fn max_deviation_from_generated(&self, generated: &ConstraintSystem) -> f64 {
        assert_eq!(generated.rows.len(), 16);
        let mut dev = 0.0f64;
        for row in &self.rows {
            let mut fb = HermitianMatrix::zeros(4);
            let mut fc = HermitianMatrix::zeros(6);
            for m in 0..16 {
                let w = row.rhs_coeffs[m];
                if w != 0.0 {
                    fb = fb.add(&generated.rows[m].f_b.scale(w));
                    fc = fc.add(&generated.rows[m].f_c.scale(w));
                }
            }
            dev = dev.max(row.f_b.sub(&fb).norm_fro());
            dev = dev.max(row.f_c.sub(&fc).norm_fro());
        }
        dev
    }
}

/// Builder for one row; index pairs are 0-based with `i <= j` (references
/// to lower-triangle entries in a displayed equation are rewritten as
/// conjugates of the stored upper triangle before reaching here).
struct Row {
    r: SystemRow,
}

impl Row {
    fn new(label: &str) -> Self {
        Row {
            r: SystemRow {
                label: label.to_string(),
                f_b: HermitianMatrix::zeros(4),
                f_c: HermitianMatrix::zeros(6),
                rhs_coeffs: [0.0; 16],
                rhs_const: 0.0,
            },
        }
    }

    /// Adds `w * Re B_ij` to the left-hand side.
    fn b_re(mut self, i: usize, j: usize, w: f64) -> Self {
        add_re(&mut self.r.f_b, i, j, w);
        self
    }

    /// Adds `w * Im B_ij` to the left-hand side.
    fn b_im(mut self, i: usize, j: usize, w: f64) -> Self {
        add_im(&mut self.r.f_b, i, j, w);
        self
    }

    fn c_re(mut self, i: usize, j: usize, w: f64) -> Self {
        add_re(&mut self.r.f_c, i, j, w);
        self
    }

    fn c_im(mut self, i: usize, j: usize, w: f64) -> Self {
        add_im(&mut self.r.f_c, i, j, w);
        self
    }

    fn rhs(mut self, j: u8, k: u8, l: u8, w: f64) -> Self {
        let idx = monomial_index(j, k, l).expect("known monomial");
        self.r.rhs_coeffs[idx] += w;
        self
    }

    fn konst(mut self, v: f64) -> Self {
        self.r.rhs_const += v;
        self
    }

    fn done(self) -> SystemRow {
        self.r
    }
}

/// `<F, M> += w * Re M_ij` (for `i == j` the entry itself, which is real).
fn add_re(f: &mut HermitianMatrix, i: usize, j: usize, w: f64) {
    assert!(i <= j);
    if i == j {
        f.add_to(i, i, Complex64::new(w, 0.0));
    } else {
        f.add_to(i, j, Complex64::new(w / 2.0, 0.0));
    }
}

/// `<F, M> += w * Im M_ij` for `i < j`.
fn add_im(f: &mut HermitianMatrix, i: usize, j: usize, w: f64) {
    assert!(i < j);
    f.add_to(i, j, Complex64::new(0.0, w / 2.0));
}

/// The displayed nonnegativity system for d = 3, transcribed with the
/// 1-based subscripts of the source shifted to 0-based and complex
/// equations split into real and imaginary parts (16 real rows).
pub fn theorem_nonneg_system() -> ConstraintSystem {
    let rows = vec![
        // B11 + C11 = c200 + c300
        Row::new("E1").b_re(0, 0, 1.0).c_re(0, 0, 1.0).rhs(2, 0, 0, 1.0).rhs(3, 0, 0, 1.0).done(),
        // B44 + C66 = c200 - c300
        Row::new("E2").b_re(3, 3, 1.0).c_re(5, 5, 1.0).rhs(2, 0, 0, 1.0).rhs(3, 0, 0, -1.0).done(),
        // B12 + C12 + C41 = c201 + c101 + i(c210 + c110)
        Row::new("E3.re")
            .b_re(0, 1, 1.0).c_re(0, 1, 1.0).c_re(0, 3, 1.0)
            .rhs(2, 0, 1, 1.0).rhs(1, 0, 1, 1.0)
            .done(),
        Row::new("E3.im")
            .b_im(0, 1, 1.0).c_im(0, 1, 1.0).c_im(0, 3, -1.0)
            .rhs(2, 1, 0, 1.0).rhs(1, 1, 0, 1.0)
            .done(),
        // B34 + C63 + C56 = c201 - c101 + i(c210 - c110)
        Row::new("E4.re")
            .b_re(2, 3, 1.0).c_re(2, 5, 1.0).c_re(4, 5, 1.0)
            .rhs(2, 0, 1, 1.0).rhs(1, 0, 1, -1.0)
            .done(),
        Row::new("E4.im")
            .b_im(2, 3, 1.0).c_im(2, 5, -1.0).c_im(4, 5, 1.0)
            .rhs(2, 1, 0, 1.0).rhs(1, 1, 0, -1.0)
            .done(),
        // B22 + C22 + C44 + C15 + C51 = 2c020 + 2c002 - c200 + 2c120 + 2c102 - 3c300
        Row::new("E5")
            .b_re(1, 1, 1.0).c_re(1, 1, 1.0).c_re(3, 3, 1.0).c_re(0, 4, 2.0)
            .rhs(0, 2, 0, 2.0).rhs(0, 0, 2, 2.0).rhs(2, 0, 0, -1.0)
            .rhs(1, 2, 0, 2.0).rhs(1, 0, 2, 2.0).rhs(3, 0, 0, -3.0)
            .done(),
        // B33 + C33 + C55 + C26 + C62 = 2c020 + 2c002 - c200 - 2c120 - 2c102 + 3c300
        Row::new("E6")
            .b_re(2, 2, 1.0).c_re(2, 2, 1.0).c_re(4, 4, 1.0).c_re(1, 5, 2.0)
            .rhs(0, 2, 0, 2.0).rhs(0, 0, 2, 2.0).rhs(2, 0, 0, -1.0)
            .rhs(1, 2, 0, -2.0).rhs(1, 0, 2, -2.0).rhs(3, 0, 0, 3.0)
            .done(),
        // B23 + C16 + C23 + C52 + C45 = 3c003 + c021 - 2c201 + i(3c030 + c012 - 2c210)
        Row::new("E7.re")
            .b_re(1, 2, 1.0).c_re(0, 5, 1.0).c_re(1, 2, 1.0).c_re(1, 4, 1.0).c_re(3, 4, 1.0)
            .rhs(0, 0, 3, 3.0).rhs(0, 2, 1, 1.0).rhs(2, 0, 1, -2.0)
            .done(),
        Row::new("E7.im")
            .b_im(1, 2, 1.0).c_im(0, 5, 1.0).c_im(1, 2, 1.0).c_im(1, 4, -1.0).c_im(3, 4, 1.0)
            .rhs(0, 3, 0, 3.0).rhs(0, 1, 2, 1.0).rhs(2, 1, 0, -2.0)
            .done(),
        // B41 + C34 = c003 - c021 + i(c030 - c012)
        Row::new("E8.re")
            .b_re(0, 3, 1.0).c_re(2, 3, 1.0)
            .rhs(0, 0, 3, 1.0).rhs(0, 2, 1, -1.0)
            .done(),
        Row::new("E8.im")
            .b_im(0, 3, -1.0).c_im(2, 3, 1.0)
            .rhs(0, 3, 0, 1.0).rhs(0, 1, 2, -1.0)
            .done(),
        // B24 + C53 + C46 = c002 - c020 + c120 - c102 + i(c011 - c111)
        Row::new("E9.re")
            .b_re(1, 3, 1.0).c_re(2, 4, 1.0).c_re(3, 5, 1.0)
            .rhs(0, 0, 2, 1.0).rhs(0, 2, 0, -1.0).rhs(1, 2, 0, 1.0).rhs(1, 0, 2, -1.0)
            .done(),
        Row::new("E9.im")
            .b_im(1, 3, 1.0).c_im(2, 4, -1.0).c_im(3, 5, 1.0)
            .rhs(0, 1, 1, 1.0).rhs(1, 1, 1, -1.0)
            .done(),
        // B13 + C13 + C42 = c002 - c020 - c120 + c102 + i(c011 + c111)
        Row::new("E10.re")
            .b_re(0, 2, 1.0).c_re(0, 2, 1.0).c_re(1, 3, 1.0)
            .rhs(0, 0, 2, 1.0).rhs(0, 2, 0, -1.0).rhs(1, 2, 0, -1.0).rhs(1, 0, 2, 1.0)
            .done(),
        Row::new("E10.im")
            .b_im(0, 2, 1.0).c_im(0, 2, 1.0).c_im(1, 3, -1.0)
            .rhs(0, 1, 1, 1.0).rhs(1, 1, 1, 1.0)
            .done(),
    ];
    ConstraintSystem { rows }
}

/// The displayed unit-ball system for homogeneous cubics (the nonnegativity
/// system of `||x||^2 + p`), transcribed independently; rows are ordered to
/// line up with [`theorem_nonneg_system`] under the substitution
/// `c200 = c020 = c002 = 1`, `c110 = c101 = c011 = 0`.
pub fn theorem_unit_ball_system() -> ConstraintSystem {
    let rows = vec![
        // B11 + C11 = 1 + c300
        Row::new("U1").b_re(0, 0, 1.0).c_re(0, 0, 1.0).konst(1.0).rhs(3, 0, 0, 1.0).done(),
        // B44 + C66 = 1 - c300
        Row::new("U2").b_re(3, 3, 1.0).c_re(5, 5, 1.0).konst(1.0).rhs(3, 0, 0, -1.0).done(),
        // B12 + C12 + C41 = B34 + C63 + C56 = c201 + i c210
        Row::new("U3a.re")
            .b_re(0, 1, 1.0).c_re(0, 1, 1.0).c_re(0, 3, 1.0)
            .rhs(2, 0, 1, 1.0)
            .done(),
        Row::new("U3a.im")
            .b_im(0, 1, 1.0).c_im(0, 1, 1.0).c_im(0, 3, -1.0)
            .rhs(2, 1, 0, 1.0)
            .done(),
        Row::new("U3b.re")
            .b_re(2, 3, 1.0).c_re(2, 5, 1.0).c_re(4, 5, 1.0)
            .rhs(2, 0, 1, 1.0)
            .done(),
        Row::new("U3b.im")
            .b_im(2, 3, 1.0).c_im(2, 5, -1.0).c_im(4, 5, 1.0)
            .rhs(2, 1, 0, 1.0)
            .done(),
        // B22 + C22 + C44 + C15 + C51 = 3 + 2c120 + 2c102 - 3c300
        Row::new("U4")
            .b_re(1, 1, 1.0).c_re(1, 1, 1.0).c_re(3, 3, 1.0).c_re(0, 4, 2.0)
            .konst(3.0).rhs(1, 2, 0, 2.0).rhs(1, 0, 2, 2.0).rhs(3, 0, 0, -3.0)
            .done(),
        // B33 + C33 + C55 + C26 + C62 = 3 - 2c120 - 2c102 + 3c300
        Row::new("U5")
            .b_re(2, 2, 1.0).c_re(2, 2, 1.0).c_re(4, 4, 1.0).c_re(1, 5, 2.0)
            .konst(3.0).rhs(1, 2, 0, -2.0).rhs(1, 0, 2, -2.0).rhs(3, 0, 0, 3.0)
            .done(),
        // B23 + C16 + C23 + C52 + C45 = 3c003 + c021 - 2c201 + i(3c030 + c012 - 2c210)
        Row::new("U6.re")
            .b_re(1, 2, 1.0).c_re(0, 5, 1.0).c_re(1, 2, 1.0).c_re(1, 4, 1.0).c_re(3, 4, 1.0)
            .rhs(0, 0, 3, 3.0).rhs(0, 2, 1, 1.0).rhs(2, 0, 1, -2.0)
            .done(),
        Row::new("U6.im")
            .b_im(1, 2, 1.0).c_im(0, 5, 1.0).c_im(1, 2, 1.0).c_im(1, 4, -1.0).c_im(3, 4, 1.0)
            .rhs(0, 3, 0, 3.0).rhs(0, 1, 2, 1.0).rhs(2, 1, 0, -2.0)
            .done(),
        // B41 + C34 = c003 - c021 + i(c030 - c012)
        Row::new("U7.re")
            .b_re(0, 3, 1.0).c_re(2, 3, 1.0)
            .rhs(0, 0, 3, 1.0).rhs(0, 2, 1, -1.0)
            .done(),
        Row::new("U7.im")
            .b_im(0, 3, -1.0).c_im(2, 3, 1.0)
            .rhs(0, 3, 0, 1.0).rhs(0, 1, 2, -1.0)
            .done(),
        // B24 + C53 + C46 = -(B13 + C13 + C42) = c120 - c102 - i c111
        Row::new("U8a.re")
            .b_re(1, 3, 1.0).c_re(2, 4, 1.0).c_re(3, 5, 1.0)
            .rhs(1, 2, 0, 1.0).rhs(1, 0, 2, -1.0)
            .done(),
        Row::new("U8a.im")
            .b_im(1, 3, 1.0).c_im(2, 4, -1.0).c_im(3, 5, 1.0)
            .rhs(1, 1, 1, -1.0)
            .done(),
        Row::new("U8b.re")
            .b_re(0, 2, 1.0).c_re(0, 2, 1.0).c_re(1, 3, 1.0)
            .rhs(1, 2, 0, -1.0).rhs(1, 0, 2, 1.0)
            .done(),
        Row::new("U8b.im")
            .b_im(0, 2, 1.0).c_im(0, 2, 1.0).c_im(1, 3, -1.0)
            .rhs(1, 1, 1, 1.0)
            .done(),
    ];
    ConstraintSystem { rows }
}

/// Applies the quadratic-part substitution `c200 = c020 = c002 = 1`,
/// `c110 = c101 = c011 = 0` to every row of a system.
pub fn substitute_unit_ball(sys: &ConstraintSystem) -> ConstraintSystem {
    let fixed_one = [
        monomial_index(2, 0, 0).unwrap(),
        monomial_index(0, 2, 0).unwrap(),
        monomial_index(0, 0, 2).unwrap(),
    ];
    let fixed_zero = [
        monomial_index(1, 1, 0).unwrap(),
        monomial_index(1, 0, 1).unwrap(),
        monomial_index(0, 1, 1).unwrap(),
    ];
    let rows = sys
        .rows
        .iter()
        .map(|r| {
            let mut row = r.clone();
            for &m in &fixed_one {
                row.rhs_const += row.rhs_coeffs[m];
                row.rhs_coeffs[m] = 0.0;
            }
            for &m in &fixed_zero {
                row.rhs_coeffs[m] = 0.0;
            }
            row
        })
        .collect();
    ConstraintSystem { rows }
}

/// Machine-generated replacement for [`theorem_nonneg_system`]: one row per
/// monomial, derived from the coefficient-matching matrix and the adjoint
/// of `A -> G_A^Gamma`.  Row `m` states that the coefficient of monomial
/// `m` in `<B, Z(x)> + <C, G_{Z(x)}^Gamma>` equals `c_m`.
pub fn generated_nonneg_system() -> Result<ConstraintSystem> {
    let mbij_t = M_BIJ.transpose();
    let mut rows = Vec::with_capacity(16);
    for m in 0..16 {
        // vec_h(F_B) = D^-1 M^T e_m, where D carries the Frobenius weight
        // 1 on diagonal coordinates and 2 off the diagonal
        let mut v = mbij_t.column(m).clone_owned();
        for a in 4..16 {
            v[a] /= 2.0;
        }
        let f_b = HermitianMatrix::unvec_h(4, &v);
        let f_c = dup_gamma(&f_b)?;
        let mut rhs_coeffs = [0.0; 16];
        rhs_coeffs[m] = 1.0;
        let (j, k, l) = MONOMIALS[m];
        rows.push(SystemRow {
            label: format!("m{j}{k}{l}"),
            f_b,
            f_c,
            rhs_coeffs,
            rhs_const: 0.0,
        });
    }
    Ok(ConstraintSystem { rows })
}

/// The feasibility SDP of the nonnegativity theorem for `p` (feasible iff
/// `p >= 0` on the sphere).
pub fn nonneg_cubic_system(p: &CubicOnSphere) -> SdpProblem {
    theorem_nonneg_system().to_sdp_problem(p)
}

/// The feasibility SDP of the unit-ball theorem (feasible iff
/// `max |p| <= 1` on the sphere); `p` must be a homogeneous cubic.
pub fn unit_ball_system(p: &CubicOnSphere) -> Result<SdpProblem> {
    if !p.is_homogeneous_cubic() {
        return Err(Error::InvalidInput(
            "unit-ball membership is defined for homogeneous cubics (degree-3 keys only)".into(),
        ));
    }
    Ok(theorem_unit_ball_system().to_sdp_problem(p))
}

// ---------------------------------------------------------------------------
// certificates
// ---------------------------------------------------------------------------

/// PSD pair `(B, C)` witnessing `H = B + L*(C)`, i.e. nonnegativity of the
/// cubic represented by `H`.
#[derive(Clone, Debug)]
pub struct NonnegCertificate {
    pub b: HermitianMatrix,
    pub c: HermitianMatrix,
    pub residual: f64,
    pub psd_margins: [f64; 2],
}

impl NonnegCertificate {
    pub fn to_json_value(&self) -> serde_json::Value {
        json!({
            "B": self.b.to_json_value(),
            "C": self.c.to_json_value(),
            "residual": self.residual,
            "psd_margins": self.psd_margins,
        })
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::InvalidInput("certificate must be a JSON object".into()))?;
        let b = HermitianMatrix::from_json_value(
            obj.get("B").ok_or_else(|| Error::InvalidInput("certificate missing \"B\"".into()))?,
        )?;
        let c = HermitianMatrix::from_json_value(
            obj.get("C").ok_or_else(|| Error::InvalidInput("certificate missing \"C\"".into()))?,
        )?;
        let residual = obj.get("residual").and_then(|x| x.as_f64()).unwrap_or(f64::NAN);
        let psd_margins = match obj.get("psd_margins").and_then(|x| x.as_array()) {
            Some(a) if a.len() == 2 => [
                a[0].as_f64().unwrap_or(f64::NAN),
                a[1].as_f64().unwrap_or(f64::NAN),
            ],
            _ => [f64::NAN, f64::NAN],
        };
        Ok(NonnegCertificate { b, c, residual, psd_margins })
    }
}

/// Independent verification report (pure linear algebra, no solver state).
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub residual: f64,
    pub psd_margin_b: f64,
    pub psd_margin_c: f64,
    pub pass: bool,
    pub failures: Vec<String>,
}

/// Recomputes the eigenvalue margins of `B`, `C` and the equation residual
/// `||H - B - L*(C)||_F` from scratch.
pub fn verify_certificate(h: &HermitianMatrix, cert: &NonnegCertificate) -> Result<VerifyReport> {
    if cert.b.n() != h.n() || cert.c.n() != 2 * (h.n() - 1) {
        return Err(Error::SizeMismatch(format!(
            "certificate sizes ({}, {}) do not fit H of size {}",
            cert.b.n(),
            cert.c.n(),
            h.n()
        )));
    }
    let margin_b = cert.b.min_eigenvalue()?;
    let margin_c = cert.c.min_eigenvalue()?;
    let residual = h.sub(&cert.b).sub(&gamma_dup_adjoint(&cert.c)?).norm_fro();
    let mut failures = Vec::new();
    if margin_b < -CERT_PSD_TOL {
        failures.push(format!("B has eigenvalue {margin_b:.3e} below -{CERT_PSD_TOL:.0e}"));
    }
    if margin_c < -CERT_PSD_TOL {
        failures.push(format!("C has eigenvalue {margin_c:.3e} below -{CERT_PSD_TOL:.0e}"));
    }
    if !(residual <= CERT_RESIDUAL_TOL) {
        failures.push(format!("equation residual {residual:.3e} exceeds {CERT_RESIDUAL_TOL:.0e}"));
    }
    Ok(VerifyReport {
        residual,
        psd_margin_b: margin_b,
        psd_margin_c: margin_c,
        pass: failures.is_empty(),
        failures,
    })
}

// ---------------------------------------------------------------------------
// cone membership
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Inside,
    Outside,
    /// Within [`BOUNDARY_TOL`] of the boundary; treated as inside by
    /// [`ConeMembershipResult::is_inside`] but flagged for the caller.
    Boundary,
}

#[derive(Clone, Debug)]
pub struct ConeMembershipResult {
    pub verdict: Verdict,
    /// Signed margin: eigenvalue floor for `C_d`, the certified sphere
    /// minimum of the represented polynomial for the dual cone.
    pub margin: f64,
    /// False for d >= 4, where the conditions are sufficient only.
    pub exact: bool,
    pub certificate: Option<NonnegCertificate>,
    /// On rejection from the dual cone: a separating `A` in `C_d` with
    /// `<H, A> = margin < 0`.
    pub separating: Option<HermitianMatrix>,
}

impl ConeMembershipResult {
    pub fn is_inside(&self) -> bool {
        !matches!(self.verdict, Verdict::Outside)
    }
}

fn classify(margin: f64) -> Verdict {
    if margin.abs() <= BOUNDARY_TOL {
        Verdict::Boundary
    } else if margin > 0.0 {
        Verdict::Inside
    } else {
        Verdict::Outside
    }
}

/// Membership of `A` in the moment cone `C_d`: both `A` and `G_A^Gamma`
/// must be PSD (exact for d <= 3, necessary only beyond).
pub fn in_cone_cd(a: &HermitianMatrix, d: usize) -> Result<ConeMembershipResult> {
    if a.n() != d + 1 {
        return Err(Error::SizeMismatch(format!("expected size {}, got {}", d + 1, a.n())));
    }
    let lam_a = a.min_eigenvalue()?;
    let lam_g = dup_gamma(a)?.min_eigenvalue()?;
    let margin = lam_a.min(lam_g);
    Ok(ConeMembershipResult {
        verdict: classify(margin),
        margin,
        exact: d <= 3,
        certificate: None,
        separating: None,
    })
}

/// Output of the moment-side SDP `min <H, A>` over `A` in `C_d` with
/// `<H_1, A> = 1`: the certified optimum, the optimal moment matrix, and
/// the dual certificate pair for `H - t H_1 = B + L*(C)`.
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub t: f64,
    pub a_opt: HermitianMatrix,
    pub b: HermitianMatrix,
    pub c: HermitianMatrix,
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the moment SDP for `H` of size d+1.  Primal variables are the
/// real embeddings of `A` (size d+1) and `M` (size 2d), with `M = G_A^Gamma`
/// imposed coordinate-wise; both sides of this program are strictly
/// feasible, so the interior-point method is reliable even when the
/// feasibility system for `H` itself has empty interior.
pub fn moment_minimize(h: &HermitianMatrix, tol_gap: f64, tol_feas: f64) -> Result<MomentReport> {
    let d = h.n().checked_sub(1).filter(|&d| d >= 1).ok_or_else(|| {
        Error::SizeMismatch("moment SDP needs a matrix of size at least 2".into())
    })?;
    let na = d + 1;
    let nm = 2 * d;
    // normalize the objective scale; t and the dual pair scale back linearly
    let scale = h.norm_fro().max(1e-12);
    let hs = h.scale(1.0 / scale);
    let mut prob = SdpProblem::new(vec![2 * na, 2 * nm]);
    prob.objective = vec![hs.embed_real() * 0.5, DMatrix::zeros(2 * nm, 2 * nm)];
    prob.add_constraint(
        vec![h_one(d).embed_real() * 0.5, DMatrix::zeros(2 * nm, 2 * nm)],
        1.0,
    );
    // <E_beta, M> - <L*(E_beta), A> = 0 over a real basis of Hermitian 2d x 2d
    for beta in 0..nm * nm {
        let e = HermitianMatrix::basis_element(nm, beta);
        let lstar = gamma_dup_adjoint(&e)?;
        prob.add_constraint(
            vec![lstar.embed_real() * -0.5, e.embed_real() * 0.5],
            0.0,
        );
    }
    let sol = sdp::solve(&prob, tol_gap, tol_feas, sdp::DEFAULT_MAX_ITER)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::InfeasibleCertificate => {
            return Err(Error::NumericalFailure(
                "moment SDP reported infeasible although it is feasible by construction".into(),
            ))
        }
        SdpStatus::NumericalFailure => {
            // accept a near-converged iterate: the verdict tolerances
            // (1e-7 band, independently verified certificates) are far
            // looser than the solver targets, so a small multiple of the
            // requested accuracy is still decisive
            let near = sol.gap <= 100.0 * tol_gap
                && sol.primal_infeas <= 100.0 * tol_feas
                && sol.dual_infeas <= 100.0 * tol_feas;
            if !near {
                return Err(Error::NumericalFailure(format!(
                    "moment SDP did not converge (gap {:.2e}, residuals {:.2e}/{:.2e})",
                    sol.gap, sol.primal_infeas, sol.dual_infeas
                )));
            }
        }
    }
    // dual slacks: S_A = H - t H_1 - L*(C) with t = y_0 and C = 2 herm(S_M)
    let t = sol.y[0] * scale;
    let a_opt = HermitianMatrix::from_embedded(&sol.x[0])?;
    let b = HermitianMatrix::from_embedded(&sol.s[0])?.scale(2.0 * scale);
    let c = HermitianMatrix::from_embedded(&sol.s[1])?.scale(2.0 * scale);
    Ok(MomentReport { t, a_opt, b, c, gap: sol.gap, iterations: sol.iterations })
}

/// Membership of `H` in the dual cone `C_d*` (nonnegativity of the
/// represented polynomial).  Returns the certified margin
/// `t = min_{S^2} <H, Z(x)>`; on acceptance a certificate for `H` itself,
/// on rejection the separating optimal moment matrix.
pub fn in_dual_cone(h: &HermitianMatrix, tol_gap: f64, tol_feas: f64) -> Result<ConeMembershipResult> {
    let d = h.n() - 1;
    let report = moment_minimize(h, tol_gap, tol_feas)?;
    let t = report.t;
    let verdict = classify(t);
    let mut certificate = None;
    let mut separating = None;
    if t >= -BOUNDARY_TOL {
        // H = (B + t H_1) + L*(C); t >= 0 (up to tolerance) keeps B' PSD
        let b = report.b.add(&h_one(d).scale(t));
        let c = report.c;
        let residual = h.sub(&b).sub(&gamma_dup_adjoint(&c)?).norm_fro();
        let psd_margins = [b.min_eigenvalue()?, c.min_eigenvalue()?];
        certificate = Some(NonnegCertificate { b, c, residual, psd_margins });
    }
    if t < BOUNDARY_TOL {
        separating = Some(report.a_opt);
    }
    Ok(ConeMembershipResult {
        verdict,
        margin: t,
        exact: d <= 3,
        certificate,
        separating,
    })
}

/// Unit-ball membership for a homogeneous cubic: `max |p| <= 1` on the
/// sphere iff `||x||^2 + p` is nonnegative (odd parity of cubics makes the
/// one-sided check sufficient).  The returned margin is `1 - max |p|`.
pub fn in_unit_ball(p: &CubicOnSphere, tol_gap: f64, tol_feas: f64) -> Result<ConeMembershipResult> {
    if !p.is_homogeneous_cubic() {
        return Err(Error::InvalidInput(
            "unit-ball membership is defined for homogeneous cubics (degree-3 keys only)".into(),
        ));
    }
    let shifted = p.add(&CubicOnSphere::constant(1.0));
    in_dual_cone(&poly_to_h(&shifted), tol_gap, tol_feas)
}
