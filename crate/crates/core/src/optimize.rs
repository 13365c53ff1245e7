//! Global optimization of cubics over the sphere and atom extraction from
//! optimal moment matrices.
//!
//! The minimum of `p` over the sphere equals the optimal value of the
//! moment SDP (see [`crate::cones::moment_minimize`]); the optimal moment
//! matrix `A*` is supported on the minimizers, which are recovered through
//! the Vandermonde shift structure of the power vectors `(1, z, z^2, z^3)`:
//! the finite support points are the eigenvalues of the pencil
//! `pinv(U_up) U_down` built from a range basis `U` of `A*`.  A point at
//! infinity (the sphere point `(-1, 0, 0)`) defeats the plain pencil, so
//! extraction is attempted in several Mobius-transformed coordinate frames
//! and the best reconstruction wins.
//!
//! An independent Fibonacci-lattice sampling oracle with projected-gradient
//! polishing cross-checks every optimization result.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use crate::cones::{moment_minimize, NonnegCertificate};
use crate::hermitian::{gamma_dup_adjoint, HermitianMatrix};
use crate::sphere_moment::{
    h_one, moment_matrix, poly_to_h, to_sphere, CubicOnSphere, RiemannPoint, SpherePoint,
    INFINITY_MODULUS,
};
use crate::{Error, Result};

/// Relative eigenvalue threshold determining the numerical rank of a
/// moment matrix.
pub const DEFAULT_RANK_TOL: f64 = 1e-7;
/// Weights below this after the least-squares fit are dropped.
pub const WEIGHT_CLIP: f64 = 1e-9;
/// Acceptable relative reconstruction residual for an extracted measure.
pub const EXTRACT_RESIDUAL_TOL: f64 = 1e-6;

/// A finitely supported measure on the Riemann sphere: `sum_k w_k Z(z_k)`.
#[derive(Clone, Debug)]
pub struct AtomMeasure {
    pub atoms: Vec<(f64, RiemannPoint)>,
}

impl AtomMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(w, _)| w).sum()
    }

    /// `sum_k w_k Z(z_k)` for degree `d`.
    pub fn reconstruct(&self, d: usize) -> HermitianMatrix {
        let mut a = HermitianMatrix::zeros(d + 1);
        for (w, z) in &self.atoms {
            a = a.add(&moment_matrix(z, d).scale(*w));
        }
        a
    }
}

// ---------------------------------------------------------------------------
// small complex helpers
// ---------------------------------------------------------------------------

fn to_cmat(h: &HermitianMatrix) -> DMatrix<Complex64> {
    let n = h.n();
    DMatrix::from_fn(n, n, |i, j| h.get(i, j))
}

fn hermitize(m: &DMatrix<Complex64>) -> HermitianMatrix {
    let n = m.nrows();
    HermitianMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            Complex64::new(m[(i, i)].re, 0.0)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    })
}

/// Roots of the monic polynomial with the given complex coefficients
/// (degree 1..3), closed form.
fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    match coeffs.len() {
        // z + c0
        1 => vec![-coeffs[0]],
        // z^2 + c1 z + c0
        2 => {
            let (b, c) = (coeffs[1], coeffs[0]);
            let disc = (b * b - 4.0 * c).sqrt();
            // pick the branch avoiding cancellation
            let q = if (b + disc).norm() >= (b - disc).norm() {
                -(b + disc) * 0.5
            } else {
                -(b - disc) * 0.5
            };
            if q.norm() < 1e-300 {
                vec![Complex64::new(0.0, 0.0), -b]
            } else {
                vec![q, c / q]
            }
        }
        // z^3 + c2 z^2 + c1 z + c0, Cardano over the complex numbers
        3 => {
            let a = coeffs[2];
            let b = coeffs[1];
            let c = coeffs[0];
            let p = b - a * a / 3.0;
            let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
            let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
            let shift = a / 3.0;
            if p.norm() < 1e-14 * (1.0 + q.norm()) {
                // t^3 = -q
                let u = (-q).powf(1.0 / 3.0);
                return (0..3).map(|k| u * omega.powu(k) - shift).collect();
            }
            let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
            let u3 = if (-q / 2.0 + disc).norm() >= (-q / 2.0 - disc).norm() {
                -q / 2.0 + disc
            } else {
                -q / 2.0 - disc
            };
            let u = u3.powf(1.0 / 3.0);
            (0..3)
                .map(|k| {
                    let uk = u * omega.powu(k);
                    uk - p / (3.0 * uk) - shift
                })
                .collect()
        }
        _ => unreachable!("pencil size is at most 3"),
    }
}

/// Eigenvalues of a small complex matrix via its characteristic polynomial.
fn small_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let r = m.nrows();
    match r {
        1 => vec![m[(0, 0)]],
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            poly_roots(&[det, -tr])
        }
        3 => {
            let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
            let m2 = m * m;
            let tr2 = m2[(0, 0)] + m2[(1, 1)] + m2[(2, 2)];
            let c2 = -tr;
            let c1 = (tr * tr - tr2) * 0.5;
            let det = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
            poly_roots(&[-det, c1, c2])
        }
        _ => unreachable!("pencil size is at most 3"),
    }
}

// ---------------------------------------------------------------------------
// atom extraction
// ---------------------------------------------------------------------------

/// Lift of the Mobius map `z -> (g00 z + g01)/(g10 z + g11)` to power
/// vectors of degree `d`: `T_{jk}` is the coefficient of `z^k` in
/// `(g00 z + g01)^j (g10 z + g11)^{d-j}`, so that `v(g(z))` is proportional
/// to `T v(z)`.
fn mobius_lift(g: &[[Complex64; 2]; 2], d: usize) -> DMatrix<Complex64> {
    let n = d + 1;
    let mut t = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        // multiply out (g00 z + g01)^j (g10 z + g11)^{d-j}
        let mut poly = vec![Complex64::new(0.0, 0.0); n];
        poly[0] = Complex64::new(1.0, 0.0);
        let mut deg = 0;
        for _ in 0..j {
            let mut next = vec![Complex64::new(0.0, 0.0); n];
            for k in 0..=deg {
                next[k + 1] += poly[k] * g[0][0];
                next[k] += poly[k] * g[0][1];
            }
            poly = next;
            deg += 1;
        }
        for _ in 0..(d - j) {
            let mut next = vec![Complex64::new(0.0, 0.0); n];
            for k in 0..=deg {
                next[k + 1] += poly[k] * g[1][0];
                next[k] += poly[k] * g[1][1];
            }
            poly = next;
            deg += 1;
        }
        for k in 0..n {
            t[(j, k)] = poly[k];
        }
    }
    t
}

fn mobius_apply_inverse(g: &[[Complex64; 2]; 2], w: Complex64) -> RiemannPoint {
    // inverse of [[a,b],[c,d]] up to scale: [[d,-b],[-c,a]]
    let num = g[1][1] * w - g[0][1];
    let den = -g[1][0] * w + g[0][0];
    if den.norm() <= 1e-14 * (1.0 + num.norm()) {
        return RiemannPoint::Infinity;
    }
    let z = num / den;
    if z.norm() > INFINITY_MODULUS {
        RiemannPoint::Infinity
    } else {
        RiemannPoint::Finite(z)
    }
}

/// Deterministic coordinate frames tried in order: identity, the reversal
/// `z -> 1/z` (moves an atom at infinity to 0), and two generic rotations
/// for measures containing both 0 and infinity.
fn mobius_candidates() -> Vec<[[Complex64; 2]; 2]> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let s = 5f64.sqrt().recip();
    vec![
        [[one, zero], [zero, one]],
        [[zero, one], [one, zero]],
        [
            [Complex64::new(2.0 * s, 0.0), Complex64::new(s, 0.0)],
            [Complex64::new(-s, 0.0), Complex64::new(2.0 * s, 0.0)],
        ],
        [
            [Complex64::new(s, 0.0), Complex64::new(0.0, -2.0 * s)],
            [Complex64::new(0.0, -2.0 * s), Complex64::new(s, 0.0)],
        ],
    ]
}

/// Nonnegative least-squares fit of weights for fixed atoms (active-set on
/// at most d+1 variables); returns weights aligned with `atoms`.
fn fit_weights(a: &HermitianMatrix, atoms: &[RiemannPoint], d: usize) -> Vec<f64> {
    let zs: Vec<HermitianMatrix> = atoms.iter().map(|z| moment_matrix(z, d)).collect();
    let mut active: Vec<usize> = (0..atoms.len()).collect();
    loop {
        let k = active.len();
        if k == 0 {
            return vec![0.0; atoms.len()];
        }
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(k);
        for (i, &ai) in active.iter().enumerate() {
            for (j, &aj) in active.iter().enumerate() {
                gram[(i, j)] = zs[ai].inner(&zs[aj]);
            }
            rhs[i] = zs[ai].inner(a);
        }
        // ridge for coincident atoms
        for i in 0..k {
            gram[(i, i)] += 1e-14;
        }
        let w = gram
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| nalgebra::DVector::zeros(k));
        if let Some((worst, _)) = w
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0.0)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            active.remove(worst);
            continue;
        }
        let mut out = vec![0.0; atoms.len()];
        for (i, &ai) in active.iter().enumerate() {
            out[ai] = w[i];
        }
        return out;
    }
}

/// Recovers a finitely supported measure from a moment matrix `A` of size
/// `d+1` (`d <= 3`) with numerical rank at most `d`; see the module
/// documentation for the method.  Fails honestly when the rank exceeds `d`
/// or no coordinate frame reconstructs `A` within the residual tolerance.
pub fn extract_atoms(a: &HermitianMatrix, rank_tol: f64) -> Result<AtomMeasure> {
    let d = a.n() - 1;
    if d < 1 || d > 3 {
        return Err(Error::SizeMismatch(format!(
            "atom extraction supports sizes 2..4, got {}",
            a.n()
        )));
    }
    let norm_a = a.norm_fro();
    if norm_a < 1e-14 {
        return Ok(AtomMeasure { atoms: Vec::new() });
    }
    let pairs = a.eigenpairs_desc()?;
    let lam_max = pairs[0].0;
    if lam_max <= 0.0 {
        return Err(Error::ExtractionFailed("matrix has no positive eigenvalue".into()));
    }
    let r = pairs.iter().filter(|(l, _)| *l > rank_tol * lam_max).count();
    if r > d {
        return Err(Error::ExtractionFailed(format!(
            "numerical rank {r} exceeds the identifiability bound {d}"
        )));
    }

    let am = to_cmat(a);
    let mut best: Option<(f64, AtomMeasure)> = None;
    for g in mobius_candidates() {
        let t = mobius_lift(&g, d);
        let ag_raw = &t * &am * t.adjoint();
        let ag = hermitize(&ag_raw);
        let Ok(pairs_g) = ag.eigenpairs_desc() else { continue };
        let lam_max_g = pairs_g[0].0;
        if lam_max_g <= 0.0 {
            continue;
        }
        let rg = pairs_g.iter().filter(|(l, _)| *l > rank_tol * lam_max_g).count();
        if rg > d || rg == 0 {
            continue;
        }
        // scaled range basis
        let mut u = DMatrix::<Complex64>::zeros(d + 1, rg);
        for (col, (lam, vec)) in pairs_g.iter().take(rg).enumerate() {
            let s = lam.max(0.0).sqrt();
            for row in 0..=d {
                u[(row, col)] = vec[row] * s;
            }
        }
        let u_up = u.rows(0, d).clone_owned();
        let u_down = u.rows(1, d).clone_owned();
        // U_up loses rank exactly when an atom sits at infinity in this
        // frame; skip to the next candidate in that case
        let m_up = u_up.adjoint() * &u_up;
        let h_up = hermitize(&m_up);
        let Ok(min_up) = h_up.min_eigenvalue() else { continue };
        let scale_up = h_up.trace().max(1e-300);
        if min_up <= 1e-10 * scale_up {
            continue;
        }
        let Some(phi) = m_up.lu().solve(&(u_up.adjoint() * &u_down)) else { continue };
        let ws = small_eigenvalues(&phi);
        let atoms: Vec<RiemannPoint> = ws.iter().map(|&w| mobius_apply_inverse(&g, w)).collect();
        let weights = fit_weights(a, &atoms, d);
        let measure = AtomMeasure {
            atoms: atoms
                .into_iter()
                .zip(weights)
                .filter(|(_, w)| *w > WEIGHT_CLIP)
                .map(|(z, w)| (w, z))
                .collect(),
        };
        let residual = a.sub(&measure.reconstruct(d)).norm_fro();
        if best.as_ref().map_or(true, |(b, _)| residual < *b) {
            best = Some((residual, measure));
        }
        if residual <= 1e-12 * norm_a {
            break;
        }
    }
    match best {
        Some((residual, measure)) if residual <= EXTRACT_RESIDUAL_TOL * norm_a => Ok(measure),
        Some((residual, _)) => Err(Error::ExtractionFailed(format!(
            "best reconstruction residual {residual:.3e} exceeds {:.3e}",
            EXTRACT_RESIDUAL_TOL * norm_a
        ))),
        None => Err(Error::ExtractionFailed("no coordinate frame admitted a pencil".into())),
    }
}

// ---------------------------------------------------------------------------
// sampling oracle
// ---------------------------------------------------------------------------

/// Projected-gradient polish of a single point: descends `p` on the sphere
/// with backtracking until the Riemannian gradient norm falls below 1e-10.
pub fn polish_point(p: &CubicOnSphere, start: &SpherePoint) -> (f64, SpherePoint) {
    let mut x = start.x;
    let mut fx = p.eval_xyz(&x);
    for _ in 0..500 {
        let g = p.gradient(&x);
        let gx: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rg = [g[0] - gx * x[0], g[1] - gx * x[1], g[2] - gx * x[2]];
        let gn2: f64 = rg.iter().map(|v| v * v).sum();
        if gn2.sqrt() <= 1e-10 {
            break;
        }
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-18 {
            let mut y = [x[0] - step * rg[0], x[1] - step * rg[1], x[2] - step * rg[2]];
            let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            y = [y[0] / n, y[1] / n, y[2] / n];
            let fy = p.eval_xyz(&y);
            if fy <= fx - 0.5 * step * gn2 {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let point = SpherePoint::new(x[0], x[1], x[2]).expect("polish keeps unit norm");
    (fx, point)
}

/// Deterministic Fibonacci lattice of `n` points on the sphere.
pub fn fibonacci_lattice(n: usize) -> impl Iterator<Item = SpherePoint> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n).map(move |i| {
        let x1 = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - x1 * x1).max(0.0).sqrt();
        let theta = 2.0 * PI * (i as f64 / golden).fract();
        SpherePoint::new(x1, r * theta.cos(), r * theta.sin()).expect("lattice point on sphere")
    })
}

/// Independent upper bound on `min_{S^2} p`: dense lattice evaluation
/// followed by projected-gradient polish of the best candidates.
pub fn oracle_minimum(p: &CubicOnSphere, n_grid: usize, n_polish: usize) -> (f64, SpherePoint) {
    assert!(n_grid >= 1000, "oracle needs at least 1000 grid points");
    let mut scored: Vec<(f64, SpherePoint)> = fibonacci_lattice(n_grid)
        .map(|x| (p.eval(&x), x))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best = scored[0];
    for cand in scored.iter().take(n_polish.max(1)) {
        let (v, x) = polish_point(p, &cand.1);
        if v < best.0 {
            best = (v, x);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// optimization
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct OptimizeOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub n_grid: usize,
    pub n_polish: usize,
    pub rank_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            tol_gap: crate::sdp::DEFAULT_TOL_GAP,
            tol_feas: crate::sdp::DEFAULT_TOL_FEAS,
            n_grid: 20_000,
            n_polish: 20,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    /// Certified optimum of `p` over the sphere.
    pub value: f64,
    /// Optimizer points (minimizers for `minimize_on_sphere`); recovered by
    /// atom extraction, or from the oracle when extraction fails.
    pub minimizers: Vec<SpherePoint>,
    /// Certificate that `p - value >= 0` on the sphere (for minimization).
    pub certificate: NonnegCertificate,
    /// Independent sampling-oracle optimum.
    pub oracle_value: f64,
    pub gap_to_oracle: f64,
    /// Set when atom extraction failed and minimizers fall back to the
    /// oracle (e.g. non-isolated optima yielding a full-rank moment matrix).
    pub extraction_warning: Option<String>,
}

impl OptimizationResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut v = json!({
            "value": self.value,
            "minimizers": self.minimizers.iter().map(|p| p.x.to_vec()).collect::<Vec<_>>(),
            "certificate": self.certificate.to_json_value(),
            "oracle_value": self.oracle_value,
            "gap_to_oracle": self.gap_to_oracle,
        });
        if let Some(w) = &self.extraction_warning {
            v["extraction_warning"] = json!(w);
        }
        v
    }
}

fn dedupe_points(points: &mut Vec<SpherePoint>) {
    points.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    points.dedup_by(|a, b| a.distance(b) < 1e-6);
}

/// Certified global minimum of `p` over the sphere via the moment SDP,
/// with minimizers, certificate, and the independent oracle cross-check.
pub fn minimize_on_sphere(p: &CubicOnSphere, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    let h = poly_to_h(p);
    let report = moment_minimize(&h, opts.tol_gap, opts.tol_feas)?;
    let value = report.t;

    // certificate for p - value: H - value*H_1 = B + L*(C)
    let h_shift = h.sub(&h_one(3).scale(value));
    let residual = h_shift
        .sub(&report.b)
        .sub(&gamma_dup_adjoint(&report.c)?)
        .norm_fro();
    let certificate = NonnegCertificate {
        psd_margins: [report.b.min_eigenvalue()?, report.c.min_eigenvalue()?],
        b: report.b,
        c: report.c,
        residual,
    };

    let (oracle_value, oracle_argmin) = oracle_minimum(p, opts.n_grid, opts.n_polish);

    let mut minimizers = Vec::new();
    let mut extraction_warning = None;
    match extract_atoms(&report.a_opt, opts.rank_tol) {
        Ok(measure) => {
            for (_, z) in &measure.atoms {
                let x = to_sphere(z);
                let (fx, x) = polish_point(p, &x);
                if (fx - value).abs() <= 1e-6 {
                    minimizers.push(x);
                }
            }
        }
        Err(e) => {
            extraction_warning = Some(format!(
                "atom extraction failed ({e}); minimizers recovered from the sampling oracle"
            ));
        }
    }
    if minimizers.is_empty() {
        // non-isolated optima (or extraction failure): fall back to the
        // polished lattice candidates at the optimal level set
        for x in fibonacci_lattice(opts.n_grid.min(5000)) {
            if p.eval(&x) <= value + 1e-3 {
                let (fx, y) = polish_point(p, &x);
                if (fx - value).abs() <= 1e-6 {
                    minimizers.push(y);
                }
            }
        }
        let (fx, y) = polish_point(p, &oracle_argmin);
        if (fx - value).abs() <= 1e-6 {
            minimizers.push(y);
        }
    }
    dedupe_points(&mut minimizers);

    Ok(OptimizationResult {
        value,
        minimizers,
        certificate,
        oracle_value,
        gap_to_oracle: oracle_value - value,
        extraction_warning,
    })
}

/// `max_{S^2} p = -min_{S^2} (-p)`; the returned points are maximizers and
/// the certificate witnesses `value - p >= 0`.
pub fn maximize_on_sphere(p: &CubicOnSphere, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    let mut r = minimize_on_sphere(&p.neg(), opts)?;
    r.value = -r.value;
    r.oracle_value = -r.oracle_value;
    r.gap_to_oracle = -r.gap_to_oracle;
    Ok(r)
}

/// Result of scaling a homogeneous cubic to the unit-ball boundary.
#[derive(Clone, Debug)]
pub struct ScaleReport {
    /// `sup { lambda >= 0 : lambda p` has modulus at most 1 on the sphere `}`.
    pub lambda: f64,
    /// Independent value `1 / max_{S^2} p` from the optimization path.
    pub cross_check: f64,
}

/// Computes the boundary scale of a homogeneous cubic as a single SDP: with
/// the unit-ball equations linear in `lambda`, maximize `lambda` subject to
/// feasibility of `(B, C, lambda)`.  Cross-checked against the reciprocal
/// of `max |p| = max p` (odd parity).
pub fn scale_to_ball_boundary(p: &CubicOnSphere, opts: &OptimizeOptions) -> Result<ScaleReport> {
    if !p.is_homogeneous_cubic() {
        return Err(Error::InvalidInput(
            "boundary scaling is defined for homogeneous cubics (degree-3 keys only)".into(),
        ));
    }
    if p.max_abs_coeff() == 0.0 {
        return Err(Error::InvalidInput("the zero cubic scales without bound".into()));
    }
    let sys = crate::cones::theorem_unit_ball_system();
    // blocks: B (8x8 embedded), C (12x12 embedded), lambda (1x1)
    let mut prob = crate::sdp::SdpProblem::new(vec![8, 12, 1]);
    prob.maximize = true;
    prob.objective = vec![
        DMatrix::zeros(8, 8),
        DMatrix::zeros(12, 12),
        DMatrix::from_element(1, 1, 1.0),
    ];
    for row in &sys.rows {
        let coeff: f64 = row
            .rhs_coeffs
            .iter()
            .zip(&p.coeffs)
            .map(|(a, c)| a * c)
            .sum();
        // <F_B, B> + <F_C, C> - coeff * lambda = rhs_const
        prob.add_constraint(
            vec![
                row.f_b.embed_real() * 0.5,
                row.f_c.embed_real() * 0.5,
                DMatrix::from_element(1, 1, -coeff),
            ],
            row.rhs_const,
        );
    }
    let sol = crate::sdp::solve(&prob, opts.tol_gap, opts.tol_feas, crate::sdp::DEFAULT_MAX_ITER)?;
    if sol.status != crate::sdp::SdpStatus::Optimal {
        return Err(Error::NumericalFailure(format!(
            "boundary-scaling SDP did not converge (status {:?})",
            sol.status
        )));
    }
    let lambda = sol.primal_obj;
    let max_p = maximize_on_sphere(p, opts)?.value;
    if max_p <= 0.0 {
        return Err(Error::NumericalFailure(
            "maximum of a nonzero odd cubic must be positive".into(),
        ));
    }
    Ok(ScaleReport { lambda, cross_check: 1.0 / max_p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> OptimizeOptions {
        OptimizeOptions { n_grid: 5000, ..OptimizeOptions::default() }
    }

    fn x1_poly() -> CubicOnSphere {
        // x1 ||x||^2
        CubicOnSphere::from_terms(&[((3, 0, 0), 1.0), ((1, 2, 0), 1.0), ((1, 0, 2), 1.0)]).unwrap()
    }

    fn c111() -> CubicOnSphere {
        CubicOnSphere::from_terms(&[((1, 1, 1), 1.0)]).unwrap()
    }

    #[test]
    fn extract_single_atom() {
        let z = RiemannPoint::finite(1.0, 1.0);
        let a = moment_matrix(&z, 3);
        let m = extract_atoms(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert!((m.atoms[0].0 - 1.0).abs() < 1e-9);
        assert!(m.atoms[0].1.chordal_distance(&z) < 1e-9);
    }

    #[test]
    fn extract_zero_and_infinity() {
        let a = moment_matrix(&RiemannPoint::finite(0.0, 0.0), 3)
            .scale(0.5)
            .add(&moment_matrix(&RiemannPoint::Infinity, 3).scale(0.5));
        let m = extract_atoms(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(m.atoms.len(), 2);
        let res = a.sub(&m.reconstruct(3)).norm_fro();
        assert!(res <= 1e-10, "residual {res:.3e}");
        let has_inf = m.atoms.iter().any(|(w, z)| z.is_infinity() && (w - 0.5).abs() < 1e-8);
        let has_zero = m.atoms.iter().any(|(w, z)| {
            !z.is_infinity() && z.chordal_distance(&RiemannPoint::finite(0.0, 0.0)) < 1e-8 && (w - 0.5).abs() < 1e-8
        });
        assert!(has_inf && has_zero);
    }

    #[test]
    fn extract_three_real_atoms() {
        let zs = [
            RiemannPoint::finite(0.0, 0.0),
            RiemannPoint::finite(1.0, 0.0),
            RiemannPoint::finite(-1.0, 0.0),
        ];
        let mut a = HermitianMatrix::zeros(4);
        for z in &zs {
            a = a.add(&moment_matrix(z, 3).scale(1.0 / 3.0));
        }
        let m = extract_atoms(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(m.atoms.len(), 3);
        for z in &zs {
            let (w, _) = m
                .atoms
                .iter()
                .map(|(w, zz)| (*w, zz.chordal_distance(z)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!((w - 1.0 / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn extract_random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..40 {
            let r = rng.gen_range(1..=3usize);
            let mut atoms: Vec<(f64, RiemannPoint)> = Vec::new();
            for k in 0..r {
                let w = rng.gen_range(0.1..1.0);
                // include infinity in a quarter of the multi-atom cases
                let z = if k == 0 && trial % 4 == 0 && r > 1 {
                    RiemannPoint::Infinity
                } else {
                    RiemannPoint::finite(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
                };
                atoms.push((w, z));
            }
            // skip nearly coincident support
            let mut ok = true;
            for i in 0..atoms.len() {
                for j in (i + 1)..atoms.len() {
                    if atoms[i].1.chordal_distance(&atoms[j].1) < 0.1 {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            let truth = AtomMeasure { atoms };
            let a = truth.reconstruct(3);
            let m = extract_atoms(&a, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(m.atoms.len(), truth.atoms.len(), "trial {trial}");
            assert!(a.sub(&m.reconstruct(3)).norm_fro() <= 1e-6 * a.norm_fro());
            for (w, z) in &truth.atoms {
                let (wr, dist) = m
                    .atoms
                    .iter()
                    .map(|(wr, zr)| (*wr, zr.chordal_distance(z)))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                assert!(dist < 1e-6, "trial {trial}: atom distance {dist:.3e}");
                assert!((wr - w).abs() < 1e-6, "trial {trial}: weight error");
            }
        }
    }

    #[test]
    fn extraction_rejects_full_rank() {
        // a full-rank matrix in the cone: mix of 4 distinct atoms
        let zs = [
            RiemannPoint::finite(0.0, 0.0),
            RiemannPoint::finite(1.0, 0.0),
            RiemannPoint::finite(0.0, 1.0),
            RiemannPoint::Infinity,
        ];
        let mut a = HermitianMatrix::zeros(4);
        for z in &zs {
            a = a.add(&moment_matrix(z, 3).scale(0.25));
        }
        match extract_atoms(&a, DEFAULT_RANK_TOL) {
            Err(Error::ExtractionFailed(_)) => {}
            other => panic!("expected extraction failure, got {other:?}"),
        }
    }

    #[test]
    fn oracle_landmarks() {
        let (v, x) = oracle_minimum(&x1_poly(), 5000, 20);
        assert!(v <= -1.0 + 1e-8);
        assert!((x.x[0] - -1.0).abs() < 1e-6);

        let target = -1.0 / 27f64.sqrt();
        let (v, _) = oracle_minimum(&c111(), 5000, 20);
        assert!((v - target).abs() < 1e-8, "{v} vs {target}");

        let (v, _) = oracle_minimum(&CubicOnSphere::constant(1.0), 5000, 5);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimize_x1() {
        let r = minimize_on_sphere(&x1_poly(), &opts()).unwrap();
        assert!((r.value - -1.0).abs() < 1e-7, "value {}", r.value);
        assert!(!r.minimizers.is_empty());
        for m in &r.minimizers {
            assert!((m.x[0] - -1.0).abs() < 1e-5, "minimizer {:?}", m.x);
        }
        assert!(r.gap_to_oracle.abs() < 1e-6);
        let h = poly_to_h(&x1_poly()).sub(&h_one(3).scale(r.value));
        assert!(crate::cones::verify_certificate(&h, &r.certificate).unwrap().pass);
    }

    #[test]
    fn minimize_c111_has_four_minimizers() {
        let r = minimize_on_sphere(&c111(), &opts()).unwrap();
        let target = -1.0 / 27f64.sqrt();
        assert!((r.value - target).abs() < 1e-6, "value {}", r.value);
        assert_eq!(r.minimizers.len(), 4, "minimizers {:?}", r.minimizers);
        let s = 1.0 / 3f64.sqrt();
        for m in &r.minimizers {
            for c in m.x {
                assert!((c.abs() - s).abs() < 1e-5);
            }
            let negs = m.x.iter().filter(|&&c| c < 0.0).count();
            assert!(negs % 2 == 1, "odd sign pattern expected, got {:?}", m.x);
        }
    }

    #[test]
    fn minimize_constant_returns_a_point() {
        let r = minimize_on_sphere(&CubicOnSphere::constant(1.0), &opts()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-7);
        assert!(!r.minimizers.is_empty());
    }

    #[test]
    fn maximize_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let mut p = CubicOnSphere::zero();
            for m in 6..16 {
                p.coeffs[m] = rng.gen_range(-1.0..1.0);
            }
            let mn = minimize_on_sphere(&p, &opts()).unwrap();
            let mx = maximize_on_sphere(&p, &opts()).unwrap();
            assert!((mx.value + mn.value).abs() < 1e-8, "parity violated");
        }
    }

    #[test]
    fn scale_landmarks() {
        let x1c = CubicOnSphere::from_terms(&[((3, 0, 0), 1.0)]).unwrap();
        let r = scale_to_ball_boundary(&x1c, &opts()).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-7, "lambda {}", r.lambda);
        assert!((r.cross_check - 1.0).abs() < 1e-6);

        let r = scale_to_ball_boundary(&x1c.scale(2.0), &opts()).unwrap();
        assert!((r.lambda - 0.5).abs() < 1e-7, "lambda {}", r.lambda);

        let r = scale_to_ball_boundary(&c111(), &opts()).unwrap();
        let target = 27f64.sqrt();
        assert!((r.lambda - target).abs() < 1e-5, "lambda {}", r.lambda);
        assert!((r.cross_check - target).abs() < 1e-5);

        assert!(scale_to_ball_boundary(&CubicOnSphere::zero(), &opts()).is_err());
        assert!(scale_to_ball_boundary(&CubicOnSphere::constant(1.0), &opts()).is_err());
    }
}
