//! Small dense complex semidefinite programs with a handful of linear
//! constraints:
//!
//! ```text
//! maximize    tr(C W) + offset
//! subject to  tr(A_k W) {≤, ≥, =} b_k,   W ⪰ 0
//! ```
//!
//! Solved by an infeasible-start primal-dual interior-point method with the
//! HKM search direction and Mehrotra predictor-corrector steps. Inequalities
//! carry explicit nonnegative slacks, so the cone is one Hermitian PSD block
//! times a small nonnegative orthant. Data are normalized before solving:
//! each constraint row and the objective are scaled to unit Frobenius norm and
//! the variable is scaled so the right-hand sides are of order one.
//!
//! The interior-point loop is generic over the matrix dimension, so 1×1 and
//! 2×2 instances run on stack-allocated matrices.

use nalgebra::allocator::Allocator;
use nalgebra::{Cholesky, Const, DMatrix, DVector, DefaultAllocator, Dim, Dyn, OMatrix, OVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fix_phase, CVector};

/// Dense complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

const HERMITIAN_TOL: f64 = 1e-12;

impl HermitianMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "Hermitian matrix columns",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let n = m.nrows();
        for i in 0..n {
            for j in 0..=i {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                    return Err(Error::InvalidScenario(format!("matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }

    /// Hermitian part of `m`, without checking.
    pub fn from_matrix_unchecked(m: DMatrix<Complex64>) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self(h)
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&v))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// `v vᴴ`
    pub fn outer(v: &CVector) -> Self {
        Self(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    /// `Re tr(self · other)`
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        trace_product(&self.0, &other.0)
    }

    /// `vᴴ self v`
    pub fn quadratic(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(&self.0 * Complex64::new(a, 0.0))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Eigenvalues in descending order with matching unit eigenvectors.
    pub fn eigen_descending(&self) -> (Vec<f64>, Vec<CVector>) {
        hermitian_eigen(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn slack_sign(self) -> f64 {
        match self {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    pub matrix: HermitianMatrix,
    pub sense: Sense,
    pub bound: f64,
}

/// `maximize tr(C W) + offset` subject to the listed constraints and `W ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpInstance {
    pub objective: HermitianMatrix,
    pub constraints: Vec<SdpConstraint>,
    pub offset: f64,
}

impl SdpInstance {
    pub fn new(objective: HermitianMatrix, offset: f64) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
            offset,
        }
    }

    pub fn constrain(mut self, matrix: HermitianMatrix, sense: Sense, bound: f64) -> Self {
        self.constraints.push(SdpConstraint { matrix, sense, bound });
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for c in &self.constraints {
            if c.matrix.dim() != n {
                return Err(Error::DimensionMismatch {
                    what: "SDP constraint matrix",
                    expected: n,
                    found: c.matrix.dim(),
                });
            }
            if !c.bound.is_finite() {
                return Err(Error::InvalidScenario("SDP bound is not finite".into()));
            }
        }
        Ok(())
    }

    pub fn value_at(&self, w: &HermitianMatrix) -> f64 {
        self.objective.inner(w) + self.offset
    }

    /// Largest relative constraint violation of `w`.
    pub fn violation(&self, w: &HermitianMatrix) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs = c.matrix.inner(w);
                let scale = 1.0_f64.max(c.bound.abs()).max(c.matrix.frobenius() * frob(w));
                let v = match c.sense {
                    Sense::Le => lhs - c.bound,
                    Sense::Ge => c.bound - lhs,
                    Sense::Eq => (lhs - c.bound).abs(),
                };
                v.max(0.0) / scale
            })
            .fold(0.0, f64::max)
    }
}

fn frob(w: &HermitianMatrix) -> f64 {
    w.frobenius()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOptimum {
    pub w: HermitianMatrix,
    pub value: f64,
    /// Constraint multipliers in the original scaling.
    pub multipliers: Vec<f64>,
    /// `|primal − dual| / max(1, |primal|, |dual|)` in normalized units.
    pub relative_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdpOutcome {
    Optimal(SdpOptimum),
    Infeasible,
    Unbounded,
}

impl SdpOutcome {
    pub fn optimal(self) -> Option<SdpOptimum> {
        match self {
            SdpOutcome::Optimal(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Relative tolerance on residuals and duality gap, normalized units.
    pub tolerance: f64,
    /// Looser tolerance accepted when the iteration stalls at its numerical
    /// floor before reaching `tolerance`.
    pub acceptable: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            acceptable: 1e-8,
            max_iter: 80,
        }
    }
}

pub fn solve_sdp(inst: &SdpInstance) -> Result<SdpOutcome> {
    solve_sdp_with(inst, &SdpOptions::default())
}

pub fn solve_sdp_with(inst: &SdpInstance, opts: &SdpOptions) -> Result<SdpOutcome> {
    inst.validate()?;
    let n = inst.dim();

    // Drop constraints with a zero matrix, or detect that they are violated.
    let mut kept = Vec::new();
    for (k, c) in inst.constraints.iter().enumerate() {
        let norm = c.matrix.frobenius();
        if norm == 0.0 {
            let ok = match c.sense {
                Sense::Le => 0.0 <= c.bound,
                Sense::Ge => 0.0 >= c.bound,
                Sense::Eq => c.bound == 0.0,
            };
            if !ok {
                return Ok(SdpOutcome::Infeasible);
            }
        } else {
            kept.push((k, norm));
        }
    }

    let c_norm = inst.objective.frobenius();
    if kept.is_empty() {
        // Only the cone: bounded iff C ⪯ 0, optimum W = 0.
        let (vals, _) = inst.objective.eigen_descending();
        if vals.first().is_some_and(|&v| v > 1e-14 * c_norm) {
            return Ok(SdpOutcome::Unbounded);
        }
        return Ok(SdpOutcome::Optimal(SdpOptimum {
            w: HermitianMatrix::zeros(n),
            value: inst.offset,
            multipliers: vec![0.0; inst.constraints.len()],
            relative_gap: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
        }));
    }

    let b: Vec<f64> = kept.iter().map(|&(k, nk)| inst.constraints[k].bound / nk).collect();
    let xi = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let xi = if xi > 0.0 { xi } else { 1.0 };
    let c_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    let problem = Normalized {
        c: inst.objective.0.map(|z| z / c_scale),
        a: kept
            .iter()
            .map(|&(k, nk)| inst.constraints[k].matrix.0.map(|z| z / nk))
            .collect(),
        b: b.iter().map(|v| v / xi).collect(),
        sigma: kept.iter().map(|&(k, _)| inst.constraints[k].sense.slack_sign()).collect(),
    };

    type Runner = fn(&Normalized, &SdpOptions) -> Result<IpmResult>;
    let runner: Runner = match (n, problem.a.len()) {
        (1, 1) => run_fixed::<Const<1>, Const<1>>,
        (1, 2) => run_fixed::<Const<1>, Const<2>>,
        (1, _) => run_fixed::<Const<1>, Dyn>,
        (2, 1) => run_fixed::<Const<2>, Const<1>>,
        (2, 2) => run_fixed::<Const<2>, Const<2>>,
        (2, _) => run_fixed::<Const<2>, Dyn>,
        _ => run_fixed::<Dyn, Dyn>,
    };
    let raw = runner(&problem, opts)?;

    Ok(match raw {
        IpmResult::Infeasible => SdpOutcome::Infeasible,
        IpmResult::Unbounded => SdpOutcome::Unbounded,
        IpmResult::Optimal {
            x,
            y,
            gap,
            primal_residual,
            dual_residual,
            iterations,
        } => {
            let w = HermitianMatrix::from_matrix_unchecked(x * Complex64::new(xi, 0.0));
            let mut multipliers = vec![0.0; inst.constraints.len()];
            for (&(k, nk), yk) in kept.iter().zip(&y) {
                multipliers[k] = yk * c_scale / nk;
            }
            SdpOutcome::Optimal(SdpOptimum {
                value: inst.value_at(&w),
                w,
                multipliers,
                relative_gap: gap,
                primal_residual,
                dual_residual,
                iterations,
            })
        }
    })
}

struct Normalized {
    c: DMatrix<Complex64>,
    a: Vec<DMatrix<Complex64>>,
    b: Vec<f64>,
    sigma: Vec<f64>,
}

enum IpmResult {
    Optimal {
        x: DMatrix<Complex64>,
        y: Vec<f64>,
        gap: f64,
        primal_residual: f64,
        dual_residual: f64,
        iterations: usize,
    },
    Infeasible,
    Unbounded,
}

type Mat<D> = OMatrix<Complex64, D, D>;

fn trace_product<R: Dim, C: Dim, S1, S2>(
    a: &nalgebra::Matrix<Complex64, R, C, S1>,
    b: &nalgebra::Matrix<Complex64, C, R, S2>,
) -> f64
where
    S1: nalgebra::storage::Storage<Complex64, R, C>,
    S2: nalgebra::storage::Storage<Complex64, C, R>,
{
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let p = a[(i, j)];
            let q = b[(j, i)];
            acc += p.re * q.re - p.im * q.im;
        }
    }
    acc
}

fn hermitian_part<D: Dim>(m: &Mat<D>) -> Mat<D>
where
    DefaultAllocator: Allocator<D, D>,
{
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn frobenius<D: Dim>(m: &Mat<D>) -> f64
where
    DefaultAllocator: Allocator<D, D>,
{
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Smallest eigenvalue of a Hermitian matrix.
fn min_eigenvalue<D: Dim>(m: &Mat<D>) -> f64
where
    DefaultAllocator: Allocator<D, D>,
{
    let n = m.nrows();
    match n {
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let off = 0.5 * (m[(0, 1)].norm() + m[(1, 0)].norm());
            let mid = 0.5 * (a + d);
            let half = (0.25 * (a - d) * (a - d) + off * off).sqrt();
            mid - half
        }
        _ => {
            let dense = DMatrix::<Complex64>::from_fn(n, n, |i, j| m[(i, j)]);
            let eig = SymmetricEigen::<Complex64, Dyn>::new(dense);
            eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
        }
    }
}

/// Largest `α` with `X + α ΔX ⪰ 0` (`∞` if unbounded).
fn max_step_psd<D: Dim>(chol: &Cholesky<Complex64, D>, dx: &Mat<D>) -> f64
where
    DefaultAllocator: Allocator<D, D>,
{
    let l = chol.l();
    let Some(t1) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(t) = l.solve_lower_triangular(&t1.adjoint()) else {
        return 0.0;
    };
    let e = min_eigenvalue(&hermitian_part(&t));
    if e >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / e
    }
}

fn to_fixed<D: Dim>(m: &DMatrix<Complex64>, d: D) -> Mat<D>
where
    DefaultAllocator: Allocator<D, D>,
{
    Mat::<D>::from_fn_generic(d, d, |i, j| m[(i, j)])
}

type Vm<M> = OVector<f64, M>;

struct Direction<D: Dim, M: Dim>
where
    DefaultAllocator: Allocator<D, D> + Allocator<M>,
{
    dx: Mat<D>,
    dz: Mat<D>,
    dy: Vm<M>,
    ds: Vm<M>,
    dzl: Vm<M>,
}

const STEP_FRACTION: f64 = 0.98;
const DIVERGENCE: f64 = 1e10;
const CERTIFICATE_TOL: f64 = 1e-7;
/// Iterations without a better acceptable iterate before giving up on `tolerance`.
const STALL_ITERATIONS: usize = 6;

fn max_step_lp<M: Dim>(v: &Vm<M>, dv: &Vm<M>, sigma: &Vm<M>) -> f64
where
    DefaultAllocator: Allocator<M>,
{
    let mut alpha = f64::INFINITY;
    for k in 0..v.len() {
        if sigma[k] != 0.0 && dv[k] < 0.0 {
            alpha = alpha.min(-v[k] / dv[k]);
        }
    }
    alpha
}

/// Infeasible-start primal-dual path following (HKM direction, Mehrotra
/// predictor-corrector), generic over the matrix size `D` and the number of
/// constraints `M` so that small problems stay on the stack.
fn run_fixed<D: Dim, M: Dim>(p: &Normalized, opts: &SdpOptions) -> Result<IpmResult>
where
    DefaultAllocator: Allocator<D, D> + Allocator<M> + Allocator<M, M>,
{
    let n = p.c.nrows();
    let d = D::from_usize(n);
    let m = p.a.len();
    let md = M::from_usize(m);
    let vector = |f: &dyn Fn(usize) -> f64| Vm::<M>::from_fn_generic(md, Const::<1>, |k, _| f(k));
    let c: Mat<D> = to_fixed(&p.c, d);
    let a: Vec<Mat<D>> = p.a.iter().map(|ak| to_fixed(ak, d)).collect();
    let b = vector(&|k| p.b[k]);
    let sigma = vector(&|k| p.sigma[k]);
    let n_ineq = sigma.iter().filter(|&&s| s != 0.0).count();
    let degree = (n + n_ineq) as f64;
    let b_norm = b.norm();
    let c_norm = frobenius(&c);

    let eye = Mat::<D>::identity_generic(d, d);
    let mut x = eye.clone();
    let mut z = eye.clone();
    let mut y = Vm::<M>::zeros_generic(md, Const::<1>);
    let mut s = sigma.map(|g| if g != 0.0 { 1.0 } else { 0.0 });
    let mut zl = s.clone();

    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    // best iterate by its worst optimality measure
    let mut fallback: Option<(f64, usize, IpmResult)> = None;
    for iter in 0..opts.max_iter {
        // residuals
        let rp = vector(&|k| b[k] - trace_product(&a[k], &x) - sigma[k] * s[k]);
        let mut rd = -&c - &z;
        for k in 0..m {
            rd += &a[k] * Complex64::new(y[k], 0.0);
        }
        let rz = vector(&|k| if sigma[k] != 0.0 { sigma[k] * y[k] - zl[k] } else { 0.0 });

        let pobj = trace_product(&c, &x);
        let dobj = b.dot(&y);
        let compl = trace_product(&x, &z) + s.dot(&zl);
        let mu = compl / degree;

        let pres = rp.norm() / (1.0 + b_norm);
        let dres = (frobenius(&rd) + rz.norm()) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / 1f64.max(pobj.abs()).max(dobj.abs());
        last = (pres, dres, gap);
        let worst = pres.max(dres).max(gap).max(compl / (1.0 + pobj.abs()));
        let snapshot = || IpmResult::Optimal {
            x: DMatrix::from_fn(n, n, |i, j| x[(i, j)]),
            y: y.iter().copied().collect(),
            gap,
            primal_residual: pres,
            dual_residual: dres,
            iterations: iter,
        };
        if worst <= opts.tolerance {
            return Ok(snapshot());
        }
        if worst <= opts.acceptable && fallback.as_ref().is_none_or(|(w, _, _)| worst < *w) {
            fallback = Some((worst, iter, snapshot()));
        }
        if fallback.as_ref().is_some_and(|(_, at, _)| iter >= at + STALL_ITERATIONS) {
            break;
        }

        // divergence checks
        let x_norm = frobenius(&x);
        if x_norm > DIVERGENCE && unbounded_certificate(&c, &a, sigma.as_slice(), &x, s.as_slice(), x_norm) {
            return Ok(IpmResult::Unbounded);
        }
        let y_norm = y.norm();
        if y_norm > DIVERGENCE && infeasible_certificate(&a, b.as_slice(), sigma.as_slice(), y.as_slice(), y_norm) {
            return Ok(IpmResult::Infeasible);
        }

        let Some(chol_x) = Cholesky::new(x.clone()) else {
            break;
        };
        let Some(chol_z) = Cholesky::new(z.clone()) else {
            break;
        };
        let z_inv = chol_z.inverse();

        // Schur complement
        let mut schur = OMatrix::<f64, M, M>::zeros_generic(md, md);
        for l in 0..m {
            let xa_zinv = &x * &a[l] * &z_inv;
            for k in 0..=l {
                let v = trace_product(&a[k], &xa_zinv);
                schur[(k, l)] = v;
                schur[(l, k)] = v;
            }
            if sigma[l] != 0.0 {
                schur[(l, l)] += s[l] / zl[l];
            }
        }
        let Some(schur_chol) = Cholesky::<f64, M>::new(schur) else {
            break;
        };
        let x_rd_zinv = &x * &rd * &z_inv;

        let direction = |target: &Mat<D>, lp_target: &Vm<M>| -> Direction<D, M> {
            // target = complementarity right-hand side for X Z, lp_target for s z
            let t_zinv = target * &z_inv;
            let mut dy = vector(&|k| {
                let mut v = trace_product(&a[k], &t_zinv) - trace_product(&a[k], &x_rd_zinv) - rp[k];
                if sigma[k] != 0.0 {
                    v += sigma[k] * (lp_target[k] - s[k] * rz[k]) / zl[k];
                }
                v
            });
            schur_chol.solve_mut(&mut dy);
            let mut dz = rd.clone();
            for k in 0..m {
                dz += &a[k] * Complex64::new(dy[k], 0.0);
            }
            let dx = hermitian_part(&(t_zinv - &x * &dz * &z_inv));
            let dzl = vector(&|k| if sigma[k] != 0.0 { sigma[k] * dy[k] + rz[k] } else { 0.0 });
            let ds = vector(&|k| if sigma[k] != 0.0 { (lp_target[k] - s[k] * dzl[k]) / zl[k] } else { 0.0 });
            Direction { dx, dz: hermitian_part(&dz), dy, ds, dzl }
        };

        let xz = &x * &z;
        // predictor
        let aff = direction(&(-&xz), &vector(&|k| -s[k] * zl[k]));
        let ap = max_step_psd(&chol_x, &aff.dx).min(max_step_lp(&s, &aff.ds, &sigma)).min(1.0);
        let ad = max_step_psd(&chol_z, &aff.dz).min(max_step_lp(&zl, &aff.dzl, &sigma)).min(1.0);
        let x_aff = &x + &aff.dx * Complex64::new(ap, 0.0);
        let z_aff = &z + &aff.dz * Complex64::new(ad, 0.0);
        let compl_aff = trace_product(&x_aff, &z_aff)
            + (0..m).map(|k| (s[k] + ap * aff.ds[k]) * (zl[k] + ad * aff.dzl[k])).sum::<f64>();
        let mu_aff = compl_aff.max(0.0) / degree;
        let centering = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };
        let tau = centering * mu;

        // corrector
        let target = &eye * Complex64::new(tau, 0.0) - &xz - &aff.dx * &aff.dz;
        let lp_target = vector(&|k| tau - s[k] * zl[k] - aff.ds[k] * aff.dzl[k]);
        let dir = direction(&target, &lp_target);
        let ap = (STEP_FRACTION * max_step_psd(&chol_x, &dir.dx).min(max_step_lp(&s, &dir.ds, &sigma))).min(1.0);
        let ad = (STEP_FRACTION * max_step_psd(&chol_z, &dir.dz).min(max_step_lp(&zl, &dir.dzl, &sigma))).min(1.0);

        x = hermitian_part(&(&x + &dir.dx * Complex64::new(ap, 0.0)));
        z = hermitian_part(&(&z + &dir.dz * Complex64::new(ad, 0.0)));
        for k in 0..m {
            y[k] += ad * dir.dy[k];
            if sigma[k] != 0.0 {
                s[k] += ap * dir.ds[k];
                zl[k] += ad * dir.dzl[k];
            }
        }
    }

    if let Some((_, _, best)) = fallback {
        return Ok(best);
    }
    // Final chance: a diverging iterate may still certify infeasibility.
    let y_norm = y.norm();
    if y_norm > 1e6 && infeasible_certificate(&a, b.as_slice(), sigma.as_slice(), y.as_slice(), y_norm) {
        return Ok(IpmResult::Infeasible);
    }
    let x_norm = frobenius(&x);
    if x_norm > 1e6 && unbounded_certificate(&c, &a, sigma.as_slice(), &x, s.as_slice(), x_norm) {
        return Ok(IpmResult::Unbounded);
    }
    Err(Error::SdpNumerical {
        iterations: opts.max_iter,
        primal_residual: last.0,
        dual_residual: last.1,
        gap: last.2,
    })
}

/// `Σ y_k A_k ⪰ 0`, `σ_k y_k ≥ 0`, `bᵀy < 0` for the normalized direction of `y`.
fn infeasible_certificate<D: Dim>(a: &[Mat<D>], b: &[f64], sigma: &[f64], y: &[f64], y_norm: f64) -> bool
where
    DefaultAllocator: Allocator<D, D>,
{
    let yh: Vec<f64> = y.iter().map(|v| v / y_norm).collect();
    let mut agg = a[0].clone() * Complex64::new(0.0, 0.0);
    for (ak, yk) in a.iter().zip(&yh) {
        agg += ak * Complex64::new(*yk, 0.0);
    }
    let sign_ok = sigma.iter().zip(&yh).all(|(s, v)| *s == 0.0 || s * v >= -CERTIFICATE_TOL);
    let by: f64 = b.iter().zip(&yh).map(|(bk, v)| bk * v).sum();
    sign_ok && min_eigenvalue(&hermitian_part(&agg)) >= -CERTIFICATE_TOL && by < -CERTIFICATE_TOL
}

/// `tr(A_k X̂) + σ_k ŝ_k = 0` and `tr(C X̂) > 0` for the normalized direction of `X`.
fn unbounded_certificate<D: Dim>(c: &Mat<D>, a: &[Mat<D>], sigma: &[f64], x: &Mat<D>, s: &[f64], x_norm: f64) -> bool
where
    DefaultAllocator: Allocator<D, D>,
{
    let xh = x / Complex64::new(x_norm, 0.0);
    let ok = a.iter().enumerate().all(|(k, ak)| {
        let v = trace_product(ak, &xh) + sigma[k] * s[k] / x_norm;
        v.abs() <= CERTIFICATE_TOL
    });
    ok && trace_product(c, &xh) > CERTIFICATE_TOL
}

/// Eigenvalues of a Hermitian matrix in descending order with unit eigenvectors.
fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, Vec<CVector>) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], vec![CVector::from_element(1, Complex64::new(1.0, 0.0))]);
    }
    if n == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
        let mid = 0.5 * (a + d);
        let half = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        let (l1, l2) = (mid + half, mid - half);
        if b.norm() <= 1e-300 {
            let e0 = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
            let e1 = CVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
            return if a >= d { (vec![a, d], vec![e0, e1]) } else { (vec![d, a], vec![e1, e0]) };
        }
        // (A − l I) v = 0 → v = [b, l − a] or [l − d, b̄]; pick the better-conditioned form
        let vec_for = |l: f64| -> CVector {
            let v1 = CVector::from_vec(vec![b, Complex64::new(l - a, 0.0)]);
            let v2 = CVector::from_vec(vec![Complex64::new(l - d, 0.0), b.conj()]);
            let v = if v1.norm_squared() >= v2.norm_squared() { v1 } else { v2 };
            let nrm = v.norm();
            v / Complex64::new(nrm, 0.0)
        };
        let u1 = vec_for(l1);
        // second vector orthogonal to the first
        let u2 = CVector::from_vec(vec![-u1[1].conj(), u1[0].conj()]);
        return (vec![l1, l2], vec![u1, u2]);
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (vals, vecs)
}

/// Relative threshold below which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Rank-one factor `ω` of an optimal `W`, with `ωωᴴ` preserving the objective
/// and every constraint value of `inst`.
///
/// Higher-rank optima are purified first: writing `W = V Vᴴ`, a Hermitian
/// direction `Δ` with `tr(Vᴴ A V Δ) = 0` for the objective and all constraint
/// matrices keeps every value fixed along `V (I + tΔ) Vᴴ`; stepping until an
/// eigenvalue of `I + tΔ` reaches zero lowers the rank by at least one. With
/// `k` linear constraints such a `Δ` exists while `rank² > k + 1`.
pub fn extract_rank_one(w: &HermitianMatrix, inst: &SdpInstance) -> Result<CVector> {
    Ok(extract_rank_one_report(w, inst)?.omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneReport {
    pub omega: CVector,
    /// `λ₂/λ₁` of the input.
    pub initial_ratio: f64,
    /// `λ₂/λ₁` of the purified matrix before truncation to its top eigenpair.
    pub final_ratio: f64,
    pub purification_steps: usize,
}

fn second_ratio(vals: &[f64]) -> f64 {
    match vals {
        [top, second, ..] if *top > 0.0 => (second.max(0.0)) / top,
        _ => 0.0,
    }
}

/// [`extract_rank_one`] with the spectra before and after purification.
pub fn extract_rank_one_report(w: &HermitianMatrix, inst: &SdpInstance) -> Result<RankOneReport> {
    let n = w.dim();
    let mut current = w.0.clone();
    let mut initial_ratio = None;
    for step in 0..n {
        let (vals, vecs) = hermitian_eigen(&current);
        let ratio = second_ratio(&vals);
        let initial = *initial_ratio.get_or_insert(ratio);
        let top = vals[0].max(0.0);
        if top == 0.0 {
            return Ok(RankOneReport {
                omega: CVector::from_element(n, Complex64::new(0.0, 0.0)),
                initial_ratio: initial,
                final_ratio: 0.0,
                purification_steps: step,
            });
        }
        let rank = vals.iter().filter(|&&v| v > RANK_TOL * top).count();
        if rank <= 1 {
            return Ok(RankOneReport {
                omega: fix_phase(&(&vecs[0] * Complex64::new(top.sqrt(), 0.0))),
                initial_ratio: initial,
                final_ratio: ratio,
                purification_steps: step,
            });
        }
        let mut factor = DMatrix::<Complex64>::zeros(n, rank);
        for j in 0..rank {
            factor.set_column(j, &(&vecs[j] * Complex64::new(vals[j].sqrt(), 0.0)));
        }
        let mut mats: Vec<&DMatrix<Complex64>> = vec![&inst.objective.0];
        mats.extend(inst.constraints.iter().map(|c| &c.matrix.0));
        let Some(delta) = purification_direction(&factor, &mats) else {
            return Err(Error::RankReduction { spectrum: vals });
        };
        let (dvals, _) = hermitian_eigen(&delta);
        let e = dvals
            .iter()
            .copied()
            .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if e == 0.0 {
            return Err(Error::RankReduction { spectrum: vals });
        }
        let inner = DMatrix::<Complex64>::identity(rank, rank) - delta * Complex64::new(1.0 / e, 0.0);
        let next = &factor * inner * factor.adjoint();
        current = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
    }
    let (vals, _) = hermitian_eigen(&current);
    Err(Error::RankReduction { spectrum: vals })
}

/// Nonzero Hermitian `Δ` (rank×rank) with `Re tr(Vᴴ A V Δ) = 0` for every `A`.
fn purification_direction(v: &DMatrix<Complex64>, mats: &[&DMatrix<Complex64>]) -> Option<DMatrix<Complex64>> {
    let r = v.ncols();
    let params = r * r;
    if mats.len() >= params {
        return None;
    }
    let mut t = DMatrix::<f64>::zeros(mats.len(), params);
    for (row, a) in mats.iter().enumerate() {
        let b = v.adjoint() * *a * v;
        let mut col = 0;
        for j in 0..r {
            t[(row, col)] = b[(j, j)].re;
            col += 1;
        }
        for j in 0..r {
            for l in (j + 1)..r {
                // Δ_jl = p + i q contributes 2 Re(B_lj (p + i q))
                t[(row, col)] = 2.0 * b[(l, j)].re;
                t[(row, col + 1)] = -2.0 * b[(l, j)].im;
                col += 2;
            }
        }
    }
    // row scaling keeps the Gram matrix well conditioned
    for mut row in t.row_iter_mut() {
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    let gram = t.transpose() * &t;
    let eig = SymmetricEigen::new(gram);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))?;
    let p = eig.eigenvectors.column(idx);
    let mut delta = DMatrix::<Complex64>::zeros(r, r);
    let mut col = 0;
    for j in 0..r {
        delta[(j, j)] = Complex64::new(p[col], 0.0);
        col += 1;
    }
    for j in 0..r {
        for l in (j + 1)..r {
            let z = Complex64::new(p[col], p[col + 1]);
            delta[(j, l)] = z;
            delta[(l, j)] = z.conj();
            col += 2;
        }
    }
    Some(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn herm(rows: &[&[Complex64]]) -> HermitianMatrix {
        let n = rows.len();
        HermitianMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn diagonal_objective_picks_the_positive_axis() {
        let inst = SdpInstance::new(HermitianMatrix::from_real_diagonal(&[1.0, -1.0]), 0.0)
            .constrain(HermitianMatrix::identity(2), Sense::Le, 1.0);
        let opt = solve_sdp(&inst).unwrap().optimal().unwrap();
        assert!((opt.value - 1.0).abs() < 1e-8);
        let w = opt.w.matrix();
        assert!((w[(0, 0)].re - 1.0).abs() < 1e-8 && w[(1, 1)].re.abs() < 1e-8);
        assert!(opt.relative_gap <= 1e-8);
    }

    #[test]
    fn negative_objective_stays_at_zero() {
        let cm = herm(&[&[c(-2.0, 0.0), c(0.5, 0.5)], &[c(0.5, -0.5), c(-1.0, 0.0)]]);
        let inst = SdpInstance::new(cm, 0.25).constrain(HermitianMatrix::identity(2), Sense::Le, 0.1);
        let opt = solve_sdp(&inst).unwrap().optimal().unwrap();
        assert!((opt.value - 0.25).abs() < 1e-9);
        assert!(opt.w.frobenius() < 1e-8);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let inst = SdpInstance::new(HermitianMatrix::identity(2), 0.0)
            .constrain(HermitianMatrix::identity(2), Sense::Le, 1.0)
            .constrain(HermitianMatrix::identity(2), Sense::Ge, 2.0);
        assert_eq!(solve_sdp(&inst).unwrap(), SdpOutcome::Infeasible);

        let f = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let inst = SdpInstance::new(HermitianMatrix::identity(2), 0.0).constrain(f, Sense::Le, 1.0);
        assert_eq!(solve_sdp(&inst).unwrap(), SdpOutcome::Unbounded);
    }

    #[test]
    fn ge_constraint_and_larger_dimension() {
        // maximize −tr(W) s.t. W₁₁ ≥ 2 on a 4×4 block → −2
        let mut d = vec![0.0; 4];
        d[0] = 1.0;
        let inst = SdpInstance::new(HermitianMatrix::identity(4).scaled(-1.0), 0.0)
            .constrain(HermitianMatrix::from_real_diagonal(&d), Sense::Ge, 2.0)
            .constrain(HermitianMatrix::identity(4), Sense::Le, 10.0);
        let opt = solve_sdp(&inst).unwrap().optimal().unwrap();
        assert!((opt.value + 2.0).abs() < 1e-8, "{}", opt.value);
        assert!(opt.relative_gap <= 1e-8);
    }

    #[test]
    fn equality_constraint() {
        let cm = herm(&[&[c(1.0, 0.0), c(0.0, 1.0)], &[c(0.0, -1.0), c(1.0, 0.0)]]);
        let inst = SdpInstance::new(cm, 0.0).constrain(HermitianMatrix::identity(2), Sense::Eq, 3.0);
        let opt = solve_sdp(&inst).unwrap().optimal().unwrap();
        // top eigenvalue of C is 2 → value 6
        assert!((opt.value - 6.0).abs() < 1e-7, "{}", opt.value);
    }

    #[test]
    fn rank_one_input_returns_top_eigenpair() {
        let w0 = CVector::from_vec(vec![c(0.3, -0.4), c(1.2, 0.5)]);
        let inst = SdpInstance::new(HermitianMatrix::identity(2), 0.0);
        let w = HermitianMatrix::outer(&w0);
        let out = extract_rank_one(&w, &inst).unwrap();
        let back = HermitianMatrix::outer(&out);
        assert!((back.matrix() - w.matrix()).norm() < 1e-12);
        assert!(out[1].im.abs() < 1e-15 && out[1].re > 0.0);
    }

    #[test]
    fn two_atom_mixture_is_purified() {
        // two atoms with equal objective and constraint values
        let a1 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let a2 = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let obj = HermitianMatrix::from_real_diagonal(&[2.0, 2.0, -1.0]);
        let f = HermitianMatrix::from_real_diagonal(&[1.0, 1.0, 3.0]);
        let inst = SdpInstance::new(obj.clone(), 0.0)
            .constrain(f.clone(), Sense::Ge, 1.0)
            .constrain(HermitianMatrix::identity(3), Sense::Le, 1.0);
        let w = HermitianMatrix::outer(&a1).add(&HermitianMatrix::outer(&a2)).scaled(0.5);
        let omega = extract_rank_one(&w, &inst).unwrap();
        let atom = HermitianMatrix::outer(&omega);
        assert!((obj.inner(&atom) - obj.inner(&w)).abs() < 1e-12);
        assert!((f.inner(&atom) - f.inner(&w)).abs() < 1e-12);
        assert!((atom.frobenius() - 1.0).abs() < 1e-12);
    }
}
