//! Small-scale primal-dual interior-point solver for block-diagonal
//! semidefinite programs with linear equality constraints.
//!
//! Standard form: minimize `<C, X>` subject to `<A_i, X> = b_i` and `X`
//! positive semidefinite on each block.  The solver runs an infeasible-start
//! HKM (XZ) direction with a Mehrotra predictor-corrector step and a dense
//! Schur complement; primal infeasibility is reported through a verified
//! Farkas ray (`A*(y) <= 0`, `b'y > 0`) extracted from diverging dual
//! iterates.  Everything is deterministic: fixed scaled-identity starting
//! point, no randomization.
//!
//! All data lives in real symmetric blocks; complex Hermitian problems are
//! embedded by the callers, which also own the factor-2 inner-product
//! convention of the embedding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

pub const DEFAULT_TOL_GAP: f64 = 1e-9;
pub const DEFAULT_TOL_FEAS: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Boundary fraction for the primal/dual line searches.
const STEP_FRACTION: f64 = 0.99;

/// One linear equality constraint `sum_b <mats[b], X_b> = rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub mats: Vec<DMatrix<f64>>,
    pub rhs: f64,
}

/// A block-diagonal SDP with equality constraints.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub objective: Vec<DMatrix<f64>>,
    pub constraints: Vec<Constraint>,
    pub maximize: bool,
}

impl SdpProblem {
    pub fn new(block_sizes: Vec<usize>) -> Self {
        let objective = block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        Self {
            block_sizes,
            objective,
            constraints: Vec::new(),
            maximize: false,
        }
    }

    pub fn add_constraint(&mut self, mats: Vec<DMatrix<f64>>, rhs: f64) {
        self.constraints.push(Constraint { mats, rhs });
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.block_sizes.iter().map(|n| n * n).sum();
        if total > 10_000 {
            return Err(Error::InvalidInput(format!(
                "total dimension {total} exceeds the small-scale limit 10000"
            )));
        }
        let check_blocks = |mats: &[DMatrix<f64>]| -> Result<()> {
            if mats.len() != self.block_sizes.len() {
                return Err(Error::SizeMismatch("wrong number of blocks".into()));
            }
            for (m, &n) in mats.iter().zip(&self.block_sizes) {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::SizeMismatch(format!(
                        "block of size {}x{} where {n}x{n} expected",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let asym = (m - m.transpose()).norm();
                if asym > 1e-10 * (1.0 + m.norm()) {
                    return Err(Error::InvalidInput("constraint blocks must be symmetric".into()));
                }
            }
            Ok(())
        };
        check_blocks(&self.objective)?;
        for c in &self.constraints {
            check_blocks(&c.mats)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Optimal,
    InfeasibleCertificate,
    NumericalFailure,
}

/// Primal-dual answer.  `y` and `s` always refer to the minimization form
/// (the objective is negated internally when `maximize` is set); the two
/// objective values are reported in the user's sense.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub iterations: usize,
    /// On `InfeasibleCertificate`: `y` with `b'y = 1` and `-A*(y)` PSD
    /// within `tol_feas` (indices refer to the original constraint list).
    pub infeasibility_ray: Option<DVector<f64>>,
}

/// Per-iteration record for the optional debug dump.
#[derive(Clone, Debug, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub mu: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub rel_gap: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
}

type BlockMat = Vec<DMatrix<f64>>;

fn bdot(a: &BlockMat, b: &BlockMat) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn bnorm(a: &BlockMat) -> f64 {
    bdot(a, a).max(0.0).sqrt()
}

fn bsym(a: &mut BlockMat) {
    for m in a.iter_mut() {
        let t = m.transpose();
        *m = 0.5 * (&*m + t);
    }
}

fn a_apply(cons: &[Constraint], x: &BlockMat) -> DVector<f64> {
    DVector::from_iterator(cons.len(), cons.iter().map(|c| bdot(&c.mats, x)))
}

fn at_apply(cons: &[Constraint], y: &DVector<f64>, block_sizes: &[usize]) -> BlockMat {
    let mut out: BlockMat = block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for (c, &yi) in cons.iter().zip(y.iter()) {
        if yi != 0.0 {
            for (o, m) in out.iter_mut().zip(&c.mats) {
                *o += m * yi;
            }
        }
    }
    out
}

/// Symmetric vectorization (off-diagonal entries scaled by sqrt(2)),
/// concatenated over blocks; used by the presolve rank filter.
fn svec_all(mats: &[DMatrix<f64>]) -> DVector<f64> {
    let dim: usize = mats.iter().map(|m| m.nrows() * (m.nrows() + 1) / 2).sum();
    let mut v = DVector::zeros(dim);
    let mut k = 0;
    let r2 = 2f64.sqrt();
    for m in mats {
        let n = m.nrows();
        for i in 0..n {
            v[k] = m[(i, i)];
            k += 1;
            for j in (i + 1)..n {
                v[k] = r2 * m[(i, j)];
                k += 1;
            }
        }
    }
    v
}

fn min_eig_sym(m: &DMatrix<f64>) -> Result<f64> {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.try_symmetric_eigen(1e-14, 10_000).ok_or(Error::EigenFailure)?;
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Largest step `alpha` with `X + alpha * D` staying PSD, via eigenvalues of
/// `L^-1 D L^-T` for the Cholesky factor `L` of `X`.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    let mut shift = 0.0;
    let chol = loop {
        let candidate = (x + DMatrix::<f64>::identity(n, n) * shift).cholesky();
        match candidate {
            Some(c) => break c,
            None => {
                shift = if shift == 0.0 { 1e-14 * (1.0 + x.norm()) } else { shift * 10.0 };
                if shift > 1e-4 * (1.0 + x.norm()) {
                    return Err(Error::NumericalFailure("iterate left the PSD cone".into()));
                }
            }
        }
    };
    let l = chol.l();
    let b = l.solve_lower_triangular(d).ok_or(Error::NumericalFailure("singular factor".into()))?;
    let w = l
        .solve_lower_triangular(&b.transpose())
        .ok_or(Error::NumericalFailure("singular factor".into()))?;
    let lam = min_eig_sym(&w)?;
    Ok(if lam >= -1e-13 { f64::INFINITY } else { -1.0 / lam })
}

fn block_max_step(x: &BlockMat, d: &BlockMat) -> Result<f64> {
    let mut a = f64::INFINITY;
    for (xb, db) in x.iter().zip(d) {
        a = a.min(max_step(xb, db)?);
    }
    Ok(a)
}

struct Presolve {
    kept: Vec<usize>,
    /// Farkas ray over the original rows when the system is inconsistent.
    inconsistent_ray: Option<DVector<f64>>,
}

/// Sequential Gram-Schmidt over constraint rows; a row whose residual falls
/// below `1e-12 * ||row||` is dependent and is dropped after checking that
/// its right-hand side is consistent.
fn presolve_rows(cons: &[Constraint], b: &DVector<f64>) -> Presolve {
    let m = cons.len();
    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    // expansion of each orthonormal vector over the original rows
    let mut expansion: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        let row = svec_all(&cons[i].mats);
        let row_norm = row.norm();
        let mut r = row.clone();
        let mut proj = DVector::<f64>::zeros(m);
        for (u, e) in basis.iter().zip(&expansion) {
            let p = u.dot(&r);
            r -= u * p;
            proj += e * p;
        }
        // second orthogonalization pass for accuracy
        for (u, e) in basis.iter().zip(&expansion) {
            let p = u.dot(&r);
            r -= u * p;
            proj += e * p;
        }
        let res = r.norm();
        if res > 1e-12 * row_norm.max(1e-300) {
            // u_new = (row_i - sum_t p_t u_t) / res over the original rows
            let mut acc = -proj;
            acc[i] += 1.0;
            basis.push(r / res);
            expansion.push(acc / res);
            kept.push(i);
        } else {
            // dependent: row_i = sum_k proj-combination of earlier rows
            let implied_b: f64 = proj.dot(b);
            let scale = 1.0 + b[i].abs() + proj.iter().zip(b.iter()).map(|(g, bb)| (g * bb).abs()).sum::<f64>();
            if (b[i] - implied_b).abs() > 1e-8 * scale {
                // inconsistent equality system: y = e_i - proj is a Farkas ray
                let mut y = -proj;
                y[i] += 1.0;
                if y.dot(b) < 0.0 {
                    y = -y;
                }
                return Presolve { kept, inconsistent_ray: Some(y) };
            }
        }
    }
    Presolve { kept, inconsistent_ray: None }
}

/// Attempts to turn the current dual iterate into a verified Farkas ray for
/// primal infeasibility: returns `y / (b'y)` when `-A*(y)` is PSD within
/// `tol` after normalization.
fn try_farkas(
    cons: &[Constraint],
    b: &DVector<f64>,
    block_sizes: &[usize],
    y: &DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let bty = b.dot(y);
    if bty <= 1e-10 * (1.0 + y.norm() * b.norm()) {
        return None;
    }
    let yr = y / bty;
    let s_ray = at_apply(cons, &yr, block_sizes);
    let mut scale = 1.0f64;
    let mut min_lam = f64::INFINITY;
    for m in &s_ray {
        scale = scale.max(m.norm());
        min_lam = min_lam.min(min_eig_sym(&(-m)).ok()?);
    }
    if min_lam >= -tol * scale {
        Some(yr)
    } else {
        None
    }
}

/// Solves the problem with the given tolerances.  `status == Optimal`
/// guarantees relative gap below `tol_gap` and residuals below `tol_feas`;
/// `InfeasibleCertificate` carries a verified dual improving ray; anything
/// else is an honest `NumericalFailure`.
pub fn solve(prob: &SdpProblem, tol_gap: f64, tol_feas: f64, max_iter: usize) -> Result<SdpSolution> {
    solve_traced(prob, tol_gap, tol_feas, max_iter, None)
}

pub fn solve_traced(
    prob: &SdpProblem,
    tol_gap: f64,
    tol_feas: f64,
    max_iter: usize,
    mut trace: Option<&mut Vec<IterRecord>>,
) -> Result<SdpSolution> {
    if tol_gap <= 0.0 || tol_feas <= 0.0 {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    prob.validate()?;
    let sense = if prob.maximize { -1.0 } else { 1.0 };
    let sizes = &prob.block_sizes;
    let nblocks = sizes.len();
    let n_tot: usize = sizes.iter().sum();
    let c: BlockMat = prob.objective.iter().map(|m| m * sense).collect();
    let m_all = prob.constraints.len();
    let b_all = DVector::from_iterator(m_all, prob.constraints.iter().map(|cst| cst.rhs));

    // drop linearly dependent rows, catching inconsistent systems early
    let pre = presolve_rows(&prob.constraints, &b_all);
    if let Some(ray) = pre.inconsistent_ray {
        let bty = b_all.dot(&ray);
        let ray = &ray / bty;
        return Ok(SdpSolution {
            status: SdpStatus::InfeasibleCertificate,
            x: sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            y: DVector::zeros(m_all),
            s: sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            primal_obj: f64::NAN,
            dual_obj: f64::NAN,
            gap: f64::NAN,
            primal_infeas: f64::INFINITY,
            dual_infeas: 0.0,
            iterations: 0,
            infeasibility_ray: Some(ray),
        });
    }
    let cons: Vec<Constraint> = pre.kept.iter().map(|&i| prob.constraints[i].clone()).collect();
    let b = DVector::from_iterator(cons.len(), pre.kept.iter().map(|&i| b_all[i]));
    let m = cons.len();

    let expand_y = |yk: &DVector<f64>| -> DVector<f64> {
        let mut y = DVector::zeros(m_all);
        for (slot, &i) in pre.kept.iter().enumerate() {
            y[i] = yk[slot];
        }
        y
    };

    // unconstrained corner case: optimal iff the objective is PSD, at X = 0
    if m == 0 {
        let mut min_lam = f64::INFINITY;
        for cb in &c {
            min_lam = min_lam.min(min_eig_sym(cb)?);
        }
        if min_lam < -tol_feas {
            return Err(Error::NumericalFailure(
                "unconstrained problem is unbounded below".into(),
            ));
        }
        return Ok(SdpSolution {
            status: SdpStatus::Optimal,
            x: sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            y: DVector::zeros(m_all),
            s: c.iter().map(|cb| cb.clone()).collect(),
            primal_obj: 0.0,
            dual_obj: 0.0,
            gap: 0.0,
            primal_infeas: 0.0,
            dual_infeas: 0.0,
            iterations: 0,
            infeasibility_ray: None,
        });
    }

    // scaled-identity start
    let norm_c = bnorm(&c);
    let mut a_norms = Vec::with_capacity(m);
    for cst in &cons {
        a_norms.push(bnorm(&cst.mats));
    }
    let sqrt_n = (n_tot as f64).sqrt();
    let xi = {
        let mut v: f64 = 10f64.max(sqrt_n);
        for (i, cst) in cons.iter().enumerate() {
            let _ = cst;
            v = v.max((n_tot as f64) * (1.0 + b[i].abs()) / (1.0 + a_norms[i]));
        }
        v
    };
    let eta = 10f64
        .max(sqrt_n)
        .max(a_norms.iter().cloned().fold(0.0, f64::max).max(norm_c) / sqrt_n);

    let mut x: BlockMat = sizes.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut s: BlockMat = sizes.iter().map(|&n| DMatrix::identity(n, n) * eta).collect();
    let mut y = DVector::<f64>::zeros(m);

    let norm_b = b.norm();
    let mut best: Option<(f64, BlockMat, DVector<f64>, BlockMat, usize)> = None;
    let mut last_quality = f64::INFINITY;
    let mut stall = 0usize;

    let finish = |status: SdpStatus,
                  x: BlockMat,
                  y: DVector<f64>,
                  s: BlockMat,
                  iters: usize,
                  ray: Option<DVector<f64>>|
     -> SdpSolution {
        let pobj = bdot(&c, &x);
        let dobj = b.dot(&y);
        let rp = &b - a_apply(&cons, &x);
        let mut rd: BlockMat = Vec::with_capacity(nblocks);
        let aty = at_apply(&cons, &y, sizes);
        for blk in 0..nblocks {
            rd.push(&c[blk] - &aty[blk] - &s[blk]);
        }
        SdpSolution {
            status,
            x,
            y: expand_y(&y),
            s,
            primal_obj: sense * pobj,
            dual_obj: sense * dobj,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            primal_infeas: rp.norm() / (1.0 + norm_b),
            dual_infeas: bnorm(&rd) / (1.0 + norm_c),
            iterations: iters,
            infeasibility_ray: ray,
        }
    };

    for iter in 0..max_iter {
        // residuals and merit quantities
        let rp = &b - a_apply(&cons, &x);
        let aty = at_apply(&cons, &y, sizes);
        let mut rd: BlockMat = Vec::with_capacity(nblocks);
        for blk in 0..nblocks {
            rd.push(&c[blk] - &aty[blk] - &s[blk]);
        }
        let mu = bdot(&x, &s) / (n_tot as f64);
        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = bnorm(&rd) / (1.0 + norm_c);
        let pobj = bdot(&c, &x);
        let dobj = b.dot(&y);
        let relgap = bdot(&x, &s) / (1.0 + pobj.abs() + dobj.abs());

        if let Some(t) = trace.as_deref_mut() {
            t.push(IterRecord {
                iter,
                mu,
                primal_infeas: pinf,
                dual_infeas: dinf,
                rel_gap: relgap,
                primal_obj: sense * pobj,
                dual_obj: sense * dobj,
            });
        }

        if pinf <= tol_feas && dinf <= tol_feas && relgap <= tol_gap {
            return Ok(finish(SdpStatus::Optimal, x, y, s, iter, None));
        }

        let quality = pinf.max(dinf).max(relgap);
        if best.as_ref().map_or(true, |(q, ..)| quality < *q) {
            best = Some((quality, x.clone(), y.clone(), s.clone(), iter));
        }
        if quality > 0.9999 * last_quality {
            stall += 1;
        } else {
            stall = 0;
        }
        last_quality = quality;

        // primal infeasibility: duals diverge along an improving ray
        if iter >= 3 && pinf > 100.0 * tol_feas {
            if let Some(ray) = try_farkas(&cons, &b, sizes, &y, tol_feas) {
                return Ok(finish(
                    SdpStatus::InfeasibleCertificate,
                    x,
                    expand_y(&ray).clone_owned(),
                    s,
                    iter,
                    Some(expand_y(&ray)),
                ));
            }
        }
        if stall > 20 {
            break;
        }

        // S^{-1} per block
        let mut s_inv: BlockMat = Vec::with_capacity(nblocks);
        let mut failed = false;
        for sb in &s {
            match sb.clone().cholesky() {
                Some(ch) => s_inv.push(ch.inverse()),
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            break;
        }

        // Schur complement M_ij = sum_b tr(A_i X A_j S^-1)
        let t_mats: Vec<BlockMat> = (0..m)
            .map(|j| {
                (0..nblocks)
                    .map(|blk| &x[blk] * &cons[j].mats[blk] * &s_inv[blk])
                    .collect()
            })
            .collect();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                schur[(i, j)] = bdot(&cons[i].mats, &t_mats[j]);
            }
        }
        let schur = 0.5 * (&schur + schur.transpose());
        let schur_chol = {
            let base = 1.0 + schur.norm();
            let mut shift = 0.0f64;
            loop {
                if !base.is_finite() || !shift.is_finite() {
                    break None;
                }
                match (schur.clone() + DMatrix::identity(m, m) * shift).cholesky() {
                    Some(ch) => break Some(ch),
                    None => {
                        shift = if shift == 0.0 { 1e-13 * base } else { shift * 100.0 };
                        if shift > 1e-5 * base {
                            break None;
                        }
                    }
                }
            }
        };
        let schur_chol = match schur_chol {
            Some(c) => c,
            None => break,
        };

        // common term A(X Rd S^-1)
        let xrds: BlockMat = (0..nblocks)
            .map(|blk| &x[blk] * &rd[blk] * &s_inv[blk])
            .collect();
        let a_xrds = a_apply(&cons, &xrds);

        let direction = |rc: &BlockMat| -> (DVector<f64>, BlockMat, BlockMat) {
            // M dy = rp - A(Rc S^-1) + A(X Rd S^-1)
            let rcs: BlockMat = (0..nblocks).map(|blk| &rc[blk] * &s_inv[blk]).collect();
            let rhs = &rp - a_apply(&cons, &rcs) + &a_xrds;
            let mut dy = schur_chol.solve(&rhs);
            // iterative refinement; the Schur matrix gets very
            // ill-conditioned near convergence
            for _ in 0..2 {
                let resid = &rhs - &schur * &dy;
                dy += schur_chol.solve(&resid);
            }
            let atdy = at_apply(&cons, &dy, sizes);
            let mut ds: BlockMat = Vec::with_capacity(nblocks);
            let mut dx: BlockMat = Vec::with_capacity(nblocks);
            for blk in 0..nblocks {
                let dsb = &rd[blk] - &atdy[blk];
                let dxb = (&rc[blk] - &x[blk] * &dsb) * &s_inv[blk];
                ds.push(dsb);
                dx.push(dxb);
            }
            bsym(&mut dx);
            (dy, dx, ds)
        };

        // predictor: Rc = -X S
        let rc_aff: BlockMat = (0..nblocks).map(|blk| -(&x[blk] * &s[blk])).collect();
        let (_dy_aff, dx_aff, ds_aff) = direction(&rc_aff);
        let ap_aff = block_max_step(&x, &dx_aff).unwrap_or(0.0).min(1.0);
        let ad_aff = block_max_step(&s, &ds_aff).unwrap_or(0.0).min(1.0);
        let mut gap_aff = 0.0;
        for blk in 0..nblocks {
            let xn = &x[blk] + &dx_aff[blk] * ap_aff;
            let sn = &s[blk] + &ds_aff[blk] * ad_aff;
            gap_aff += xn.dot(&sn);
        }
        let sigma = (gap_aff / bdot(&x, &s)).clamp(0.0, 1.0).powi(3).max(1e-12);

        // corrector: Rc = sigma mu I - X S - dX_aff dS_aff
        let rc: BlockMat = (0..nblocks)
            .map(|blk| {
                let n = sizes[blk];
                DMatrix::identity(n, n) * (sigma * mu)
                    - &x[blk] * &s[blk]
                    - &dx_aff[blk] * &ds_aff[blk]
            })
            .collect();
        let (dy, dx, ds) = direction(&rc);

        // push closer to the boundary once the barrier parameter is small
        let frac = if mu < 1e-7 { 0.998 } else { STEP_FRACTION };
        let ap = match block_max_step(&x, &dx) {
            Ok(a) => (frac * a).min(1.0),
            Err(_) => break,
        };
        let ad = match block_max_step(&s, &ds) {
            Ok(a) => (frac * a).min(1.0),
            Err(_) => break,
        };
        if ap < 1e-10 && ad < 1e-10 {
            break;
        }
        for blk in 0..nblocks {
            x[blk] += &dx[blk] * ap;
            s[blk] += &ds[blk] * ad;
        }
        y += dy * ad;
        bsym(&mut x);
        bsym(&mut s);
    }

    // no convergence: last chance for an infeasibility certificate, else
    // report the best iterate as a failure
    if let Some(ray) = try_farkas(&cons, &b, sizes, &y, tol_feas) {
        return Ok(finish(
            SdpStatus::InfeasibleCertificate,
            x,
            expand_y(&ray).clone_owned(),
            s,
            max_iter,
            Some(expand_y(&ray)),
        ));
    }
    let (_, bx, by, bs, biter) = best.expect("at least one iterate recorded");
    Ok(finish(SdpStatus::NumericalFailure, bx, by, bs, biter, None))
}

/// Independent KKT residual report; recomputed from the problem data alone.
#[derive(Clone, Debug, Serialize)]
pub struct KktReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub x_psd_margin: f64,
    pub s_psd_margin: f64,
    pub primal_pass: bool,
    pub dual_pass: bool,
    pub complementarity_pass: bool,
    pub pass: bool,
}

pub fn check_kkt(prob: &SdpProblem, sol: &SdpSolution, tol_gap: f64, tol_feas: f64) -> Result<KktReport> {
    let sense = if prob.maximize { -1.0 } else { 1.0 };
    let c: BlockMat = prob.objective.iter().map(|m| m * sense).collect();
    let b = DVector::from_iterator(
        prob.constraints.len(),
        prob.constraints.iter().map(|cst| cst.rhs),
    );
    let rp = &b - a_apply(&prob.constraints, &sol.x);
    let aty = at_apply(&prob.constraints, &sol.y, &prob.block_sizes);
    let mut rd_norm2 = 0.0;
    for blk in 0..prob.block_sizes.len() {
        let rd = &c[blk] - &aty[blk] - &sol.s[blk];
        rd_norm2 += rd.dot(&rd);
    }
    let norm_c = bnorm(&c);
    let pobj = bdot(&c, &sol.x);
    let dobj = b.dot(&sol.y);
    let primal_residual = rp.norm() / (1.0 + b.norm());
    let dual_residual = rd_norm2.sqrt() / (1.0 + norm_c);
    let complementarity = bdot(&sol.x, &sol.s).abs() / (1.0 + pobj.abs() + dobj.abs());
    let mut x_psd_margin = f64::INFINITY;
    let mut s_psd_margin = f64::INFINITY;
    for blk in 0..prob.block_sizes.len() {
        x_psd_margin = x_psd_margin.min(min_eig_sym(&sol.x[blk])?);
        s_psd_margin = s_psd_margin.min(min_eig_sym(&sol.s[blk])?);
    }
    let primal_pass = primal_residual <= 10.0 * tol_feas && x_psd_margin >= -10.0 * tol_feas;
    let dual_pass = dual_residual <= 10.0 * tol_feas && s_psd_margin >= -10.0 * tol_feas;
    let complementarity_pass = complementarity <= 10.0 * tol_gap;
    Ok(KktReport {
        primal_residual,
        dual_residual,
        complementarity,
        x_psd_margin,
        s_psd_margin,
        primal_pass,
        dual_pass,
        complementarity_pass,
        pass: primal_pass && dual_pass && complementarity_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e_mat(n: usize, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        if i == j {
            m[(i, i)] = 1.0;
        } else {
            m[(i, j)] = 0.5;
            m[(j, i)] = 0.5;
        }
        m
    }

    #[test]
    fn trace_minimization() {
        // min tr(X) s.t. X >= 0 (2x2), X_00 = 1  ->  value 1, X = E_00
        let mut prob = SdpProblem::new(vec![2]);
        prob.objective = vec![DMatrix::identity(2, 2)];
        prob.add_constraint(vec![e_mat(2, 0, 0)], 1.0);
        let sol = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_obj - 1.0).abs() < 1e-7);
        assert!((sol.x[0][(0, 0)] - 1.0).abs() < 1e-6);
        assert!(sol.x[0][(1, 1)].abs() < 1e-6);
        let kkt = check_kkt(&prob, &sol, 1e-9, 1e-9).unwrap();
        assert!(kkt.pass, "{kkt:?}");
        assert!(kkt.primal_residual <= 1e-8 && kkt.dual_residual <= 1e-8);
    }

    #[test]
    fn diagonal_infeasibility_certificate() {
        // X >= 0 with X_00 = -1 is infeasible
        let mut prob = SdpProblem::new(vec![2]);
        prob.add_constraint(vec![e_mat(2, 0, 0)], -1.0);
        let sol = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::InfeasibleCertificate);
        let ray = sol.infeasibility_ray.unwrap();
        // b'y = 1 and -A*(y) PSD
        assert!((ray[0] * -1.0 - 1.0).abs() < 1e-9);
        let s_ray = -(&e_mat(2, 0, 0) * ray[0]);
        assert!(min_eig_sym(&s_ray).unwrap() >= -1e-9);
    }

    #[test]
    fn perturbed_solution_flags_residual() {
        let mut prob = SdpProblem::new(vec![2]);
        prob.objective = vec![DMatrix::identity(2, 2)];
        prob.add_constraint(vec![e_mat(2, 0, 0)], 1.0);
        let mut sol = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        sol.x[0][(0, 0)] += 1e-3;
        let kkt = check_kkt(&prob, &sol, 1e-9, 1e-9).unwrap();
        assert!(!kkt.primal_pass);
        assert!((kkt.primal_residual - 1e-3 / 2.0).abs() < 1e-4);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let mut prob = SdpProblem::new(vec![2]);
        prob.objective = vec![DMatrix::identity(2, 2)];
        prob.add_constraint(vec![e_mat(2, 0, 0)], 1.0);
        prob.add_constraint(vec![e_mat(2, 0, 0) * 2.0], 2.0); // consistent duplicate
        let sol = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_obj - 1.0).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_duplicate_is_infeasible() {
        let mut prob = SdpProblem::new(vec![2]);
        prob.add_constraint(vec![e_mat(2, 0, 0)], 1.0);
        prob.add_constraint(vec![e_mat(2, 0, 0)], 2.0);
        let sol = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::InfeasibleCertificate);
    }

    #[test]
    fn deterministic_repeat() {
        let mut prob = SdpProblem::new(vec![3]);
        prob.objective = vec![DMatrix::identity(3, 3)];
        prob.add_constraint(vec![e_mat(3, 0, 1)], 0.4);
        prob.add_constraint(vec![e_mat(3, 1, 2)], -0.2);
        let a = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        let b = solve(&prob, 1e-9, 1e-9, 200).unwrap();
        assert_eq!(a.primal_obj.to_bits(), b.primal_obj.to_bits());
        assert_eq!(a.iterations, b.iterations);
        for (xa, xb) in a.x.iter().zip(&b.x) {
            assert_eq!(xa.as_slice(), xb.as_slice());
        }
    }

    #[test]
    fn diagonal_sdp_matches_lp() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            // min c'x s.t. sum x_i = 1, x >= 0 encoded as a diagonal SDP;
            // the optimum is min_i c_i
            let n = 4;
            let cvals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut prob = SdpProblem::new(vec![n]);
            prob.objective = vec![DMatrix::from_diagonal(&DVector::from_row_slice(&cvals))];
            prob.add_constraint(vec![DMatrix::identity(n, n)], 1.0);
            // pin off-diagonals to zero so the SDP is exactly the LP
            for i in 0..n {
                for j in (i + 1)..n {
                    prob.add_constraint(vec![e_mat(n, i, j)], 0.0);
                }
            }
            let sol = solve(&prob, 1e-9, 1e-9, 200).unwrap();
            assert_eq!(sol.status, SdpStatus::Optimal);
            let want = cvals.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((sol.primal_obj - want).abs() < 1e-8, "{} vs {}", sol.primal_obj, want);
        }
    }
}
