//! Exact solution of `min ||w^T Y||_1 subject to r^T w = 1`.
//!
//! Two routes to the same optimum:
//!
//! * [`to_standard_form`] + [`simplex`]: the textbook encoding with split
//!   variables and epigraph bounds (`w = w+ - w-`, `t_k >= +-(Y^T w)_k`),
//!   solved by a dense two-phase tableau simplex using Bland's rule. Exact
//!   and simple, but the tableau has `2p + 1` rows, so it only scales to
//!   small instances.
//! * [`solve_l1`]: a bounded-variable two-phase simplex on the equivalent
//!   problem `max lambda s.t. Y d = lambda r, d in [-1, 1]^p`, whose basis
//!   is `n x n`. Pricing is largest-violation with an automatic switch to
//!   Bland's rule under degeneracy (so termination is still guaranteed),
//!   and the optimal `w` is the vector of simplex multipliers. This is the
//!   production path; it agrees with the tableau route on the optimal value
//!   and returns a vertex of the sign arrangement (`n - 1` coordinates of
//!   `w^T Y` are exactly zero at a generic optimum).
//!
//! Optima need not be unique; either route returns whichever optimal vertex
//! its pivoting reaches. Downstream consumers only rely on optimality.

use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::{dot, DenseMatrix, DenseVector};
use crate::{Error, Result};

/// The problem `min ||w^T Y||_1 subject to r^T w = 1` for an `n x p` matrix
/// `Y` and an `n`-vector `r`.
#[derive(Debug, Clone)]
pub struct L1Problem {
    pub y: DenseMatrix,
    pub r: DenseVector,
}

impl L1Problem {
    pub fn new(y: DenseMatrix, r: DenseVector) -> Result<Self> {
        if r.len() != y.rows() {
            return Err(Error::Dimension("constraint vector length must equal the row count of Y"));
        }
        Ok(Self { y, r })
    }
}

/// A standard-form linear program `min c^T x s.t. A x = b, x >= 0`.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Simplex tolerances and the pivot budget.
///
/// `max_pivots = 0` selects the default budget: `200 * (n + 2p)` for the l1
/// drivers, `200 * (rows + cols)` for a raw standard-form solve.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Feasibility tolerance: phase-1 optimum above this is infeasible.
    pub feas_tol: f64,
    /// Certification tolerance on the final objective.
    pub opt_tol: f64,
    /// Entering threshold: reduced costs within this of zero do not pivot.
    pub reduced_cost_tol: f64,
    /// Hard pivot budget; exceeding it yields [`LpStatus::Degenerate`].
    pub max_pivots: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-8, opt_tol: 1e-8, reduced_cost_tol: 1e-9, max_pivots: 0 }
    }
}

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    /// Optimality certified by nonnegative reduced costs at a feasible basis.
    Optimal,
    /// Phase 1 could not reach feasibility.
    Infeasible,
    /// Terminated without a certificate (pivot budget exhausted or numerical
    /// breakdown); solution fields are best-effort.
    Degenerate,
}

/// Solution of an LP; `w` is the minimizer of whichever problem was solved.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub w: DenseVector,
    pub objective: f64,
    pub status: LpStatus,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-9;

/// Encodes an [`L1Problem`] as a standard-form LP.
///
/// Variable layout: `[w+ (n) | w- (n) | t (p) | u (p) | v (p)]` with
/// `w = w+ - w-`; rows `2k` and `2k + 1` pin `t_k >= |(Y^T w)_k|` via slacks
/// `u_k, v_k`, and the last row is `r^T (w+ - w-) = 1`. The objective is
/// `sum_k t_k`.
pub fn to_standard_form(prob: &L1Problem) -> Result<StandardLp> {
    let n = prob.y.rows();
    let p = prob.y.cols();
    let nv = 2 * n + 3 * p;
    let m = 2 * p + 1;
    let mut a = vec![0.0; m * nv];
    for k in 0..p {
        let row_neg = 2 * k * nv;
        let row_pos = (2 * k + 1) * nv;
        for i in 0..n {
            let yik = prob.y.get(i, k);
            a[row_neg + i] = -yik;
            a[row_neg + n + i] = yik;
            a[row_pos + i] = yik;
            a[row_pos + n + i] = -yik;
        }
        a[row_neg + 2 * n + k] = 1.0;
        a[row_neg + 2 * n + p + k] = -1.0;
        a[row_pos + 2 * n + k] = 1.0;
        a[row_pos + 2 * n + 2 * p + k] = -1.0;
    }
    let last = (m - 1) * nv;
    for i in 0..n {
        a[last + i] = prob.r.get(i);
        a[last + n + i] = -prob.r.get(i);
    }
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    let mut c = vec![0.0; nv];
    for k in 0..p {
        c[2 * n + k] = 1.0;
    }
    Ok(StandardLp { a: DenseMatrix::new(m, nv, a)?, b, c })
}

/// Dense two-phase tableau simplex with Bland's rule.
///
/// Returns the minimizer over `x >= 0` of `c^T x` subject to `A x = b`, with
/// status [`LpStatus::Infeasible`] when phase 1 cannot close the gap and
/// [`LpStatus::Degenerate`] when the pivot budget runs out.
pub fn simplex(lp: &StandardLp, opts: &SolverOptions) -> Result<LpSolution> {
    let m = lp.a.rows();
    let nv = lp.a.cols();
    if lp.b.len() != m {
        return Err(Error::Dimension("right-hand side length must equal the row count"));
    }
    if lp.c.len() != nv {
        return Err(Error::Dimension("cost length must equal the column count"));
    }
    if !lp.b.iter().all(|v| v.is_finite()) || !lp.c.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("LP data must be finite"));
    }
    let budget = if opts.max_pivots == 0 { 200 * (m + nv) } else { opts.max_pivots };
    let width = nv + m + 1;
    let mut tab = vec![0.0; (m + 1) * width];
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            tab[i * width + j] = sign * lp.a.get(i, j);
        }
        tab[i * width + nv + i] = 1.0;
        tab[i * width + width - 1] = sign * lp.b[i];
    }
    // Phase-1 reduced costs for the all-artificial basis.
    for j in 0..nv {
        let col_sum: f64 = (0..m).map(|i| tab[i * width + j]).sum();
        tab[m * width + j] = -col_sum;
    }
    let rhs_sum: f64 = (0..m).map(|i| tab[i * width + width - 1]).sum();
    tab[m * width + width - 1] = -rhs_sum;

    let mut pivots = 0usize;
    let phase1_cols = nv + m;
    if !run_tableau(&mut tab, &mut basis, m, width, phase1_cols, opts, budget, &mut pivots)? {
        return Ok(LpSolution {
            w: DenseVector::new(vec![0.0; nv]).expect("zero vector"),
            objective: 0.0,
            status: LpStatus::Degenerate,
            pivots,
        });
    }
    let phase1_obj = -tab[m * width + width - 1];
    if phase1_obj > opts.feas_tol {
        return Ok(LpSolution {
            w: DenseVector::new(vec![0.0; nv]).expect("zero vector"),
            objective: 0.0,
            status: LpStatus::Infeasible,
            pivots,
        });
    }
    // Drive artificials out of the basis where a real pivot exists. Rows
    // that stay artificial are redundant combinations; with artificial
    // columns barred from entering, those rows never change again.
    for i in 0..m {
        if basis[i] >= nv {
            if let Some(j) = (0..nv).find(|&j| tab[i * width + j].abs() > PIVOT_TOL) {
                pivot(&mut tab, &mut basis, m, width, i, j);
                pivots += 1;
            }
        }
    }
    // Phase-2 reduced costs from the real objective.
    for j in 0..width {
        tab[m * width + j] = 0.0;
    }
    for j in 0..nv {
        tab[m * width + j] = lp.c[j];
    }
    for i in 0..m {
        let cb = if basis[i] < nv { lp.c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                tab[m * width + j] -= cb * tab[i * width + j];
            }
        }
    }
    let finished = run_tableau(&mut tab, &mut basis, m, width, nv, opts, budget, &mut pivots)?;
    let mut x = vec![0.0; nv];
    for i in 0..m {
        if basis[i] < nv {
            x[basis[i]] = tab[i * width + width - 1];
        }
    }
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let objective = dot(&lp.c, &x);
    Ok(LpSolution {
        w: DenseVector::new(x)?,
        objective,
        status: if finished { LpStatus::Optimal } else { LpStatus::Degenerate },
        pivots,
    })
}

/// Bland pivot loop over the first `allowed` columns. Returns `Ok(true)` on
/// optimality, `Ok(false)` when the budget runs out.
#[allow(clippy::too_many_arguments)]
fn run_tableau(
    tab: &mut [f64],
    basis: &mut [usize],
    m: usize,
    width: usize,
    allowed: usize,
    opts: &SolverOptions,
    budget: usize,
    pivots: &mut usize,
) -> Result<bool> {
    loop {
        let mut entering = None;
        for j in 0..allowed {
            if tab[m * width + j] < -opts.reduced_cost_tol {
                entering = Some(j);
                break;
            }
        }
        let e = match entering {
            Some(e) => e,
            None => return Ok(true),
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..m {
            let a = tab[i * width + e];
            if a > PIVOT_TOL {
                let ratio = tab[i * width + width - 1] / a;
                let better = match best {
                    None => true,
                    Some((br, bvar, _)) => {
                        ratio < br - 1e-12 || ((ratio - br).abs() <= 1e-12 && basis[i] < bvar)
                    }
                };
                if better {
                    best = Some((ratio, basis[i], i));
                }
            }
        }
        let (_, _, row) = best.ok_or(Error::Unbounded)?;
        pivot(tab, basis, m, width, row, e);
        *pivots += 1;
        if *pivots >= budget {
            return Ok(false);
        }
    }
}

fn pivot(tab: &mut [f64], basis: &mut [usize], m: usize, width: usize, row: usize, col: usize) {
    let d = tab[row * width + col];
    for j in 0..width {
        tab[row * width + j] /= d;
    }
    for r in 0..=m {
        if r == row {
            continue;
        }
        let f = tab[r * width + col];
        if f != 0.0 {
            for j in 0..width {
                tab[r * width + j] -= f * tab[row * width + j];
            }
        }
    }
    basis[row] = col;
}

/// Solves an [`L1Problem`] through the standard-form encoding.
///
/// Reference route used for cross-checking; cost grows with `(2p + 1)^2 * p`
/// per solve, so prefer [`solve_l1`] beyond toy sizes.
pub fn solve_l1_via_standard_form(prob: &L1Problem, opts: &SolverOptions) -> Result<LpSolution> {
    if prob.r.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroConstraint);
    }
    let n = prob.y.rows();
    let p = prob.y.cols();
    let mut lp_opts = opts.clone();
    if lp_opts.max_pivots == 0 {
        lp_opts.max_pivots = 200 * (n + 2 * p);
    }
    let lp = to_standard_form(prob)?;
    let sol = simplex(&lp, &lp_opts)?;
    if sol.status != LpStatus::Optimal {
        return Ok(LpSolution {
            w: DenseVector::new(vec![0.0; n]).expect("zero vector"),
            objective: 0.0,
            status: sol.status,
            pivots: sol.pivots,
        });
    }
    let x = sol.w.as_slice();
    let w: Vec<f64> = (0..n).map(|i| x[i] - x[n + i]).collect();
    let objective = objective_of(&prob.y, &w);
    Ok(LpSolution { w: DenseVector::new(w)?, objective, status: sol.status, pivots: sol.pivots })
}

/// `||w^T Y||_1`.
pub fn objective_of(y: &DenseMatrix, w: &[f64]) -> f64 {
    let p = y.cols();
    let n = y.rows();
    let mut total = 0.0;
    for k in 0..p {
        let mut acc = 0.0;
        for i in 0..n {
            acc += w[i] * y.get(i, k);
        }
        total += acc.abs();
    }
    total
}

/// Solves `min ||w^T Y||_1 s.t. r^T w = 1` exactly.
///
/// Errors with [`Error::ZeroConstraint`] when `r` is identically zero (the
/// constraint `0 = 1` is infeasible). Otherwise the problem is always
/// feasible and bounded, and the returned `w` is a vertex-optimal solution
/// with `|r^T w - 1| <= feas_tol` and `objective = ||w^T Y||_1` recomputed
/// from `w`.
pub fn solve_l1(prob: &L1Problem, opts: &SolverOptions) -> Result<LpSolution> {
    if prob.r.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroConstraint);
    }
    let dual = DualL1::new(&prob.y);
    let mut opts = opts.clone();
    if opts.max_pivots == 0 {
        opts.max_pivots = 200 * (prob.y.rows() + 2 * prob.y.cols());
    }
    let start = dual.phase1(&opts)?;
    let mut ws = LpWorkspace::new();
    let raw = dual.phase2(&start, prob.r.as_slice(), &opts, &mut ws)?;
    Ok(LpSolution {
        w: DenseVector::new(raw.w)?,
        objective: raw.objective,
        status: raw.status,
        pivots: start.pivots + raw.pivots,
    })
}

// ---------------------------------------------------------------------------
// Bounded-variable simplex on the dual problem.
//
// Variables: u_k in [0, 1] for k < p (the substitution d = 2u - 1 maps the
// box [-1, 1]^p to the unit box), lambda >= 0 with column -r, and one
// artificial per row for phase 1. Constraints: 2 Y u - lambda r = Y 1.
// Phase 1 never prices lambda, so its result depends on Y alone and can be
// shared by every pair subproblem on the same Y.
// ---------------------------------------------------------------------------

pub(crate) const STATE_LOWER: u8 = 0;
pub(crate) const STATE_UPPER: u8 = 1;
pub(crate) const STATE_BASIC: u8 = 2;
const REFACTOR_EVERY: usize = 64;

/// Immutable per-`Y` data for the dual solver.
pub(crate) struct DualL1 {
    n: usize,
    p: usize,
    /// Columns of `Y`, each contiguous: entry `(i, k)` of `Y` at `yt[k*n+i]`.
    yt: Vec<f64>,
    /// Rows of `Y`, each contiguous: entry `(i, k)` of `Y` at `ytr[i*p+k]`.
    ytr: Vec<f64>,
    /// `Y * ones(p)`.
    b0: Vec<f64>,
}

/// Reusable scratch buffers so the per-pair solve does not allocate.
#[derive(Default)]
pub(crate) struct LpWorkspace {
    rc: Vec<f64>,
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    pi: Vec<f64>,
    col: Vec<f64>,
    yhat: Vec<f64>,
    rho: Vec<f64>,
    ratio: Vec<f64>,
    heap: Vec<(f64, f64, u32)>,
    /// Sign each nonbasic box must see on a pivot-row entry to be an
    /// entering candidate: -1 at lower bound, +1 at upper, 0 if basic.
    req: Vec<f64>,
    basis: Option<DualBasis>,
}

impl LpWorkspace {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, n: usize, p: usize) {
        self.rc.resize(p, 0.0);
        self.gamma.resize(p, 0.0);
        self.alpha.resize(p, 0.0);
        self.pi.resize(n, 0.0);
        self.col.resize(n, 0.0);
        self.yhat.resize(n, 0.0);
        self.rho.resize(n, 0.0);
        self.ratio.resize(n.max(p), 0.0);
        self.heap.resize(p + 1, (0.0, 0.0, 0));
        self.req.resize(p, 0.0);
    }
}

/// Heap entries order by the ratio `num/den` (both nonnegative, `den > 0`)
/// without dividing: `a < b  iff  a.num * b.den < b.num * a.den`, ties by
/// variable id so the order is total and deterministic.
fn ratio_less(a: &(f64, f64, u32), b: &(f64, f64, u32)) -> bool {
    let ab = a.0 * b.1;
    let ba = b.0 * a.1;
    ab < ba || (ab == ba && a.2 < b.2)
}

/// Restores the min-heap property downward from `pos`.
fn sift_down(h: &mut [(f64, f64, u32)], mut pos: usize) {
    loop {
        let l = 2 * pos + 1;
        if l >= h.len() {
            return;
        }
        let mut child = l;
        if l + 1 < h.len() && ratio_less(&h[l + 1], &h[l]) {
            child = l + 1;
        }
        if !ratio_less(&h[child], &h[pos]) {
            return;
        }
        h.swap(pos, child);
        pos = child;
    }
}

/// Floyd heap construction over the whole slice.
fn heapify(h: &mut [(f64, f64, u32)]) {
    for pos in (0..h.len() / 2).rev() {
        sift_down(h, pos);
    }
}


/// A basis snapshot; cloned per pair to restart phase 2.
#[derive(Clone)]
pub(crate) struct DualBasis {
    basis: Vec<usize>,
    vstate: Vec<u8>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    art_sign: Vec<f64>,
    arts_pinned: bool,
    pivots: usize,
}

impl DualBasis {
    /// Pivots spent reaching this basis (the shared feasibility phase).
    pub(crate) fn pivot_count(&self) -> usize {
        self.pivots
    }
}

pub(crate) struct RawSolution {
    pub w: Vec<f64>,
    /// `Y^T w`, the candidate row associated with `w`.
    pub s: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub pivots: usize,
}

// Scratch instrumentation for the perf probe; remove with tests/perf_probe.rs.
#[cfg(feature = "std")]
pub mod probe_stats {
    use std::sync::atomic::{AtomicU64, Ordering::Relaxed};
    pub static BASIS: AtomicU64 = AtomicU64::new(0);
    pub static FLIPS: AtomicU64 = AtomicU64::new(0);
    pub static REFRESH: AtomicU64 = AtomicU64::new(0);
    pub static T_REFILL: AtomicU64 = AtomicU64::new(0);
    pub static T_SELECT: AtomicU64 = AtomicU64::new(0);
    pub static T_RATIO: AtomicU64 = AtomicU64::new(0);
    pub static T_UPDATE: AtomicU64 = AtomicU64::new(0);
    pub static T_BINV: AtomicU64 = AtomicU64::new(0);
    pub static T_WSETUP: AtomicU64 = AtomicU64::new(0);
    pub static T_WREPAIR: AtomicU64 = AtomicU64::new(0);
    pub static T_WCERT: AtomicU64 = AtomicU64::new(0);
    pub static T_WFIN: AtomicU64 = AtomicU64::new(0);
    pub static WARM_OK: AtomicU64 = AtomicU64::new(0);
    pub static WARM_FAIL: AtomicU64 = AtomicU64::new(0);
    pub static T_RALPHA: AtomicU64 = AtomicU64::new(0);
    pub static T_RHEAP: AtomicU64 = AtomicU64::new(0);
    pub static T_RAPPLY: AtomicU64 = AtomicU64::new(0);
    pub static WFLIPS: AtomicU64 = AtomicU64::new(0);
    pub static WSLOW: AtomicU64 = AtomicU64::new(0);
    pub static HIT0: AtomicU64 = AtomicU64::new(0);
    pub static CERT_OK: AtomicU64 = AtomicU64::new(0);
    pub static CERT_ROUNDS_OK: AtomicU64 = AtomicU64::new(0);
    pub static CERT_ROUNDS_FAIL: AtomicU64 = AtomicU64::new(0);
    pub static T_CERT: AtomicU64 = AtomicU64::new(0);
    pub static CF_SCORE: AtomicU64 = AtomicU64::new(0);
    pub static CF_LU: AtomicU64 = AtomicU64::new(0);
    pub static CF_RESID: AtomicU64 = AtomicU64::new(0);
    pub static CF_BOX: AtomicU64 = AtomicU64::new(0);
    pub static P_KGATE: AtomicU64 = AtomicU64::new(0);
    pub static P_KSUM: AtomicU64 = AtomicU64::new(0);
    pub static P_TRY: AtomicU64 = AtomicU64::new(0);
    pub static P_LU: AtomicU64 = AtomicU64::new(0);
    pub static P_BOX: AtomicU64 = AtomicU64::new(0);
    pub static P_VERIFY: AtomicU64 = AtomicU64::new(0);
    pub static P_ACCEPT: AtomicU64 = AtomicU64::new(0);
    pub static HITR: AtomicU64 = AtomicU64::new(0);
    pub static HITR_PIV: AtomicU64 = AtomicU64::new(0);
    pub static HITN: AtomicU64 = AtomicU64::new(0);
    pub static HITN_PIV: AtomicU64 = AtomicU64::new(0);

    pub struct Timer(std::time::Instant, &'static AtomicU64);
    impl Timer {
        pub fn new(slot: &'static AtomicU64) -> Self {
            Self(std::time::Instant::now(), slot)
        }
    }
    impl Drop for Timer {
        fn drop(&mut self) {
            self.1.fetch_add(self.0.elapsed().as_nanos() as u64, Relaxed);
        }
    }
}

impl DualL1 {
    pub(crate) fn new(y: &DenseMatrix) -> Self {
        let n = y.rows();
        let p = y.cols();
        let mut yt = vec![0.0; p * n];
        let mut ytr = vec![0.0; n * p];
        let mut b0 = vec![0.0; n];
        for i in 0..n {
            for k in 0..p {
                let v = y.get(i, k);
                yt[k * n + i] = v;
                ytr[i * p + k] = v;
                b0[i] += v;
            }
        }
        Self { n, p, yt, ytr, b0 }
    }

    /// Writes `coeff * (Y^T v)` into `out` (length p) as row-contiguous
    /// accumulation passes, which the compiler vectorizes.
    fn scaled_yt_v_into(&self, coeff: f64, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.n {
            let c = coeff * v[i];
            if c == 0.0 {
                continue;
            }
            let row = &self.ytr[i * self.p..(i + 1) * self.p];
            for (slot, &x) in out.iter_mut().zip(row) {
                *slot += c * x;
            }
        }
    }

    pub(crate) fn column(&self, k: usize) -> &[f64] {
        &self.yt[k * self.n..(k + 1) * self.n]
    }

    fn lambda_id(&self) -> usize {
        self.p
    }

    fn art_id(&self, row: usize) -> usize {
        self.p + 1 + row
    }

    fn upper_bound(&self, var: usize, arts_pinned: bool) -> f64 {
        if var < self.p {
            1.0
        } else if var == self.p {
            f64::INFINITY
        } else if arts_pinned {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn col_into(&self, var: usize, r: &[f64], sign: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if var < self.p {
            for (o, v) in out.iter_mut().zip(self.column(var)) {
                *o = 2.0 * v;
            }
        } else if var == self.p {
            for (o, v) in out.iter_mut().zip(r) {
                *o = -v;
            }
        } else {
            out[var - self.p - 1] = sign[var - self.p - 1];
        }
    }

    /// Runs phase 1 from the all-artificial basis. Independent of `r`.
    pub(crate) fn phase1(&self, opts: &SolverOptions) -> Result<DualBasis> {
        let n = self.n;
        let mut st = DualBasis {
            basis: (0..n).map(|i| self.art_id(i)).collect(),
            vstate: vec![STATE_LOWER; self.p + 1 + n],
            binv: vec![0.0; n * n],
            xb: vec![0.0; n],
            art_sign: vec![0.0; n],
            arts_pinned: false,
            pivots: 0,
        };
        for i in 0..n {
            let s = if self.b0[i] < 0.0 { -1.0 } else { 1.0 };
            st.art_sign[i] = s;
            st.binv[i * n + i] = s;
            st.xb[i] = self.b0[i].abs();
            st.vstate[self.art_id(i)] = STATE_BASIC;
        }
        let empty_r = vec![0.0; n];
        let mut ws = LpWorkspace::new();
        let done = self.run_phase(&mut st, &empty_r, opts, true, opts.max_pivots, &mut ws)?;
        let feas_gap: f64 = (0..n)
            .filter(|&i| st.basis[i] > self.p)
            .map(|i| st.xb[i].max(0.0))
            .sum();
        if !done || feas_gap > opts.feas_tol {
            // The dual is always feasible (u = 1/2, lambda = 0), so this is
            // numerical breakdown, not genuine infeasibility.
            return Err(Error::SingularMatrix);
        }
        st.arts_pinned = true;
        for i in 0..n {
            if st.basis[i] > self.p {
                st.xb[i] = 0.0;
            }
        }
        self.refactor(&mut st, &empty_r)?;
        Ok(st)
    }

    /// Runs phase 2 for the pair constraint `r` from a phase-1 snapshot.
    pub(crate) fn phase2(
        &self,
        start: &DualBasis,
        r: &[f64],
        opts: &SolverOptions,
        ws: &mut LpWorkspace,
    ) -> Result<RawSolution> {
        let mut st = ws.basis.take().unwrap_or_else(|| start.clone());
        st.clone_from(start);
        st.pivots = 0;
        let budget = opts.max_pivots.saturating_sub(start.pivots).max(64);
        let run = self.run_phase(&mut st, r, opts, false, budget, ws);
        let done = match run {
            Ok(done) => done,
            Err(e) => {
                ws.basis = Some(st);
                return Err(e);
            }
        };
        if let Err(e) = self.refactor(&mut st, r) {
            ws.basis = Some(st);
            return Err(e);
        }
        Ok(self.finish(st, r, done, opts, ws))
    }

    /// Rebuilds the phase-2 multipliers and reduced costs for `st` into
    /// `ws.pi` / `ws.rc`, returning lambda's reduced cost.
    fn refill_rc(&self, st: &DualBasis, r: &[f64], ws: &mut LpWorkspace) -> f64 {
        let n = self.n;
        let lam = self.lambda_id();
        ws.pi.fill(0.0);
        for j in 0..n {
            if st.basis[j] == lam {
                for i in 0..n {
                    ws.pi[i] -= st.binv[j * n + i];
                }
            }
        }
        self.scaled_yt_v_into(-2.0, &ws.pi, &mut ws.rc);
        -1.0 + dot(r, &ws.pi)
    }

    /// Full optimality certificate for a refactored basis: primal bounds on
    /// the basics plus every reduced-cost sign. Exactly the conditions a
    /// cold phase 2 terminates with.
    fn certify(&self, st: &DualBasis, r: &[f64], opts: &SolverOptions, ws: &mut LpWorkspace) -> bool {
        let n = self.n;
        let p = self.p;
        let lam = self.lambda_id();
        for i in 0..n {
            let ub = self.upper_bound(st.basis[i], st.arts_pinned);
            if st.xb[i] < -opts.feas_tol || st.xb[i] > ub + opts.feas_tol {
                return false;
            }
        }
        let rc_lam = self.refill_rc(st, r, ws);
        for (k, &state) in st.vstate[..p].iter().enumerate() {
            let viol = match state {
                STATE_LOWER => -ws.rc[k],
                STATE_UPPER => ws.rc[k],
                _ => continue,
            };
            if viol > opts.reduced_cost_tol {
                return false;
            }
        }
        if st.vstate[lam] != STATE_BASIC && -rc_lam > opts.reduced_cost_tol {
            return false;
        }
        true
    }

    /// Warm solve from a remembered basis + bound pattern: rebuild the
    /// inverse against the new `r`, walk back to primal feasibility with a
    /// short bounded-variable dual-simplex repair (the pattern stays
    /// dual-feasible across pairs, only a few basics drift out of bounds),
    /// and accept only if the result passes the full optimality
    /// certificate. Any anomaly returns `None` and the caller runs the cold
    /// phase 2, so this path can only produce certified optima.
    pub(crate) fn warm_solve(
        &self,
        start: &DualBasis,
        basis: &[usize],
        vstate: &[u8],
        r: &[f64],
        opts: &SolverOptions,
        ws: &mut LpWorkspace,
    ) -> Option<RawSolution> {
        let n = self.n;
        let p = self.p;
        let lam = self.lambda_id();
        ws.ensure(n, p);
        #[cfg(feature = "std")]
        let _t_setup = probe_stats::Timer::new(&probe_stats::T_WSETUP);
        let mut st = ws.basis.take().unwrap_or_else(|| start.clone());
        st.clone_from(start);
        st.pivots = 0;
        st.basis.copy_from_slice(basis);
        st.vstate.copy_from_slice(vstate);
        if self.refactor(&mut st, r).is_err() {
            ws.basis = Some(st);
            return None;
        }
        let mut rc_lam = self.refill_rc(&st, r, ws);
        for (k, &state) in st.vstate[..p].iter().enumerate() {
            ws.req[k] = match state {
                STATE_LOWER => -1.0,
                STATE_UPPER => 1.0,
                _ => 0.0,
            };
        }
        #[cfg(feature = "std")]
        drop(_t_setup);
        #[cfg(feature = "std")]
        let _t_rep = probe_stats::Timer::new(&probe_stats::T_WREPAIR);
        let budget = 4 * n + 16;
        let mut repaired = true;
        for _ in 0..budget {
            // Most-violated basic leaves toward its nearer bound.
            let mut leave: Option<(usize, bool)> = None;
            let mut worst = opts.feas_tol;
            for i in 0..n {
                let ub = self.upper_bound(st.basis[i], st.arts_pinned);
                let below = -st.xb[i];
                let above = st.xb[i] - ub;
                if below > worst {
                    worst = below;
                    leave = Some((i, true));
                }
                if above > worst {
                    worst = above;
                    leave = Some((i, false));
                }
            }
            let (row, to_lower) = match leave {
                Some(l) => l,
                None => break,
            };
            st.pivots += 1;
            // Pivot row over the nonbasic columns drives the ratio test:
            // an entering candidate must move xb_row toward its bound, and
            // every reduced cost must keep the sign its bound demands.
            #[cfg(feature = "std")]
            let _t_ra = probe_stats::Timer::new(&probe_stats::T_RALPHA);
            ws.rho.copy_from_slice(&st.binv[row * n..(row + 1) * n]);
            self.scaled_yt_v_into(2.0, &ws.rho, &mut ws.alpha);
            let alpha_lam = -dot(r, &ws.rho);
            // `alpha * req * dir > tol` says the candidate's bound sign lets
            // it move xb_row toward its bound; the product doubles as
            // |alpha| for the eligible, so the nearest breakpoint by
            // |rc_k / alpha_k| can be tracked without dividing:
            // |rc_k| * |alpha_min| < |rc_min| * |alpha_k|, all nonnegative.
            // An ineligible entry contributes den = 0 and can never win
            // (0 < 0 and inf * 0 = NaN comparisons are both false). Lambda
            // seeds the minimum so it wins exact ties.
            let dir = if to_lower { 1.0 } else { -1.0 };
            let lam_eligible = st.vstate[lam] == STATE_LOWER && alpha_lam * -dir > PIVOT_TOL;
            // The duals here are massively degenerate (most reduced costs
            // sit at zero), so there is nearly always a zero-ratio entering
            // candidate whose pivot costs nothing dual-wise. Preferring the
            // highest-capacity one absorbs the violation in a single
            // exchange instead of a long crawl through tiny breakpoints.
            let mut k_min = usize::MAX;
            let mut min_num = if lam_eligible { rc_lam.abs() } else { f64::INFINITY };
            let mut min_den = if lam_eligible { alpha_lam.abs() } else { 1.0 };
            let mut zb = usize::MAX;
            let mut zb_cap = 0.0;
            for k in 0..p {
                let g = ws.alpha[k] * ws.req[k] * dir;
                let den = if g > PIVOT_TOL { g } else { 0.0 };
                let zc = if ws.rc[k].abs() <= 1e-11 { den } else { 0.0 };
                if zc > zb_cap {
                    zb_cap = zc;
                    zb = k;
                }
                if ws.rc[k].abs() * min_den < min_num * den {
                    min_num = ws.rc[k].abs();
                    min_den = den;
                    k_min = k;
                }
            }
            #[cfg(feature = "std")]
            drop(_t_ra);
            #[cfg(feature = "std")]
            let _t_rh = probe_stats::Timer::new(&probe_stats::T_RHEAP);
            // Bound-flipping ratio test: walk the reduced-cost breakpoints
            // in ratio order. A box variable whose whole span is absorbed
            // by the remaining violation flips to its other bound (its
            // reduced cost crosses zero at that breakpoint, so the flip is
            // what keeps the sign pattern consistent); the first candidate
            // that can absorb the remainder enters the basis.
            let mut remaining = worst;
            let mut flips: Vec<usize> = Vec::new();
            let mut enter: Option<usize> = None;
            if lam_eligible && rc_lam.abs() <= 1e-11 {
                // Zero-ratio lambda: free pivot with unlimited capacity.
                enter = Some(lam);
            } else if zb != usize::MAX && zb_cap + 1e-12 >= remaining {
                enter = Some(zb);
            } else if k_min == usize::MAX {
                if lam_eligible {
                    // Lambda has no upper bound, so it absorbs any remainder.
                    enter = Some(lam);
                }
            } else if ws.alpha[k_min].abs() * self.upper_bound(k_min, st.arts_pinned) + 1e-12
                >= remaining
            {
                // Common case: the nearest breakpoint already has enough
                // capacity, no flips and no ordering structure needed.
                enter = Some(k_min);
            } else {
                // Branchless collect of the eligible set, then a heap walk
                // ordered by the same division-free comparison.
                let mut cnt = 0;
                for k in 0..p {
                    let g = ws.alpha[k] * ws.req[k] * dir;
                    ws.heap[cnt] = (ws.rc[k].abs(), g, k as u32);
                    cnt += (g > PIVOT_TOL) as usize;
                }
                if lam_eligible {
                    ws.heap[cnt] = (rc_lam.abs(), alpha_lam.abs(), lam as u32);
                    cnt += 1;
                }
                heapify(&mut ws.heap[..cnt]);
                let mut hlen = cnt;
                while hlen > 0 {
                    ws.heap.swap(0, hlen - 1);
                    hlen -= 1;
                    let (_, aden, k) = ws.heap[hlen];
                    sift_down(&mut ws.heap[..hlen], 0);
                    let k = k as usize;
                    if k == lam {
                        enter = Some(lam);
                        break;
                    }
                    let cap = aden * self.upper_bound(k, st.arts_pinned);
                    if cap + 1e-12 >= remaining {
                        enter = Some(k);
                        break;
                    }
                    remaining -= cap;
                    flips.push(k);
                }
            }
            let e = match enter {
                Some(e) => e,
                None => {
                    repaired = false;
                    break;
                }
            };
            #[cfg(feature = "std")]
            {
                drop(_t_rh);
                probe_stats::WFLIPS
                    .fetch_add(flips.len() as u64, core::sync::atomic::Ordering::Relaxed);
                if !flips.is_empty() {
                    probe_stats::WSLOW.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
                }
            }
            #[cfg(feature = "std")]
            let _t_rap = probe_stats::Timer::new(&probe_stats::T_RAPPLY);
            let alpha_e = if e == lam { alpha_lam } else { ws.alpha[e] };
            let rc_e = if e == lam { rc_lam } else { ws.rc[e] };
            let theta = rc_e / alpha_e;
            // Apply the flips: each toggled variable moves by its full
            // span, which shifts the basic solution by span * B^-1 a_k,
            // batched through one accumulated column (pi is free scratch
            // here; it is refilled from scratch wherever it is next read).
            if !flips.is_empty() {
                ws.pi.fill(0.0);
                for &k in &flips {
                    let span = self.upper_bound(k, st.arts_pinned);
                    let step = if st.vstate[k] == STATE_LOWER { span } else { -span };
                    st.vstate[k] = if st.vstate[k] == STATE_LOWER {
                        STATE_UPPER
                    } else {
                        STATE_LOWER
                    };
                    ws.req[k] = -ws.req[k];
                    let col = &self.yt[k * n..(k + 1) * n];
                    for (a, &c) in ws.pi.iter_mut().zip(col) {
                        *a += step * 2.0 * c;
                    }
                }
                for i in 0..n {
                    st.xb[i] -= dot(&st.binv[i * n..(i + 1) * n], &ws.pi);
                }
            }
            self.col_into(e, r, &st.art_sign, &mut ws.col);
            for i in 0..n {
                ws.yhat[i] = dot(&st.binv[i * n..(i + 1) * n], &ws.col);
            }
            if ws.yhat[row].abs() < PIVOT_TOL {
                repaired = false;
                break;
            }
            let target = if to_lower {
                0.0
            } else {
                self.upper_bound(st.basis[row], st.arts_pinned)
            };
            let t = (st.xb[row] - target) / ws.yhat[row];
            let from_lower = st.vstate[e] == STATE_LOWER;
            let span = self.upper_bound(e, st.arts_pinned);
            let new_val = if from_lower { t } else { span + t };
            if new_val < -opts.feas_tol || new_val > span + opts.feas_tol {
                repaired = false;
                break;
            }
            for (rcv, &a) in ws.rc.iter_mut().zip(ws.alpha.iter()) {
                *rcv -= theta * a;
            }
            rc_lam -= theta * alpha_lam;
            if e == lam {
                rc_lam = 0.0;
            } else {
                ws.rc[e] = 0.0;
            }
            for i in 0..n {
                st.xb[i] -= t * ws.yhat[i];
            }
            let exiting = st.basis[row];
            st.vstate[exiting] = if to_lower { STATE_LOWER } else { STATE_UPPER };
            if exiting < p {
                ws.req[exiting] = if to_lower { -1.0 } else { 1.0 };
            }
            st.basis[row] = e;
            st.vstate[e] = STATE_BASIC;
            if e < p {
                ws.req[e] = 0.0;
            }
            st.xb[row] = new_val;
            let piv = ws.yhat[row];
            let inv_piv = 1.0 / piv;
            for j in 0..n {
                st.binv[row * n + j] *= inv_piv;
            }
            for i in 0..n {
                if i == row {
                    continue;
                }
                let f = ws.yhat[i];
                if f != 0.0 {
                    for j in 0..n {
                        st.binv[i * n + j] -= f * st.binv[row * n + j];
                    }
                }
            }
        }
        #[cfg(feature = "std")]
        drop(_t_rep);
        if repaired {
            #[cfg(feature = "std")]
            let _t_cert = probe_stats::Timer::new(&probe_stats::T_WCERT);
            if self.refactor(&mut st, r).is_err() {
                ws.basis = Some(st);
                return None;
            }
            if self.certify(&st, r, opts, ws) {
                #[cfg(feature = "std")]
                drop(_t_cert);
                #[cfg(feature = "std")]
                let _t_fin = probe_stats::Timer::new(&probe_stats::T_WFIN);
                #[cfg(feature = "std")]
                probe_stats::WARM_OK.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
                let sol = self.finish(st, r, true, opts, ws);
                if sol.status == LpStatus::Optimal {
                    return Some(sol);
                }
                return None;
            }
        }
        #[cfg(feature = "std")]
        probe_stats::WARM_FAIL.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
        ws.basis = Some(st);
        None
    }

    /// Shared tail of phase 2 and the warm-basis path: extract `w` from the
    /// lambda row, certify the bounds, and price the candidate row. `st`
    /// must already be refactored against `r`.
    fn finish(
        &self,
        st: DualBasis,
        r: &[f64],
        done: bool,
        opts: &SolverOptions,
        ws: &mut LpWorkspace,
    ) -> RawSolution {
        let n = self.n;
        let lam = self.lambda_id();
        let mut w = vec![0.0; n];
        let mut certified = done;
        if let Some(row) = st.basis.iter().position(|&v| v == lam) {
            for i in 0..n {
                w[i] = -st.binv[row * n + i];
            }
            let rw = dot(r, &w);
            if rw.abs() > 1e-12 {
                for v in w.iter_mut() {
                    *v /= rw;
                }
            } else {
                certified = false;
            }
        } else {
            certified = false;
        }
        // Basic values must respect their bounds at termination.
        if certified {
            for i in 0..n {
                let ub = self.upper_bound(st.basis[i], st.arts_pinned);
                if st.xb[i] < -opts.feas_tol || st.xb[i] > ub + opts.feas_tol {
                    certified = false;
                    break;
                }
            }
        }
        self.scaled_yt_v_into(1.0, &w, &mut ws.alpha);
        let s = ws.alpha.clone();
        let objective = s.iter().map(|v| v.abs()).sum();
        let pivots = st.pivots;
        ws.basis = Some(st);
        RawSolution {
            w,
            s,
            objective,
            status: if certified { LpStatus::Optimal } else { LpStatus::Degenerate },
            pivots,
        }
    }

    /// Snapshot of the final basis and bound pattern of the last solve, for
    /// the warm-basis cache. Callable right after a `phase2`/`warm_solve`
    /// that returned through `finish` (the scratch basis holds that state).
    pub(crate) fn last_basis(&self, ws: &LpWorkspace) -> Option<(Vec<usize>, Vec<u8>)> {
        ws.basis.as_ref().map(|st| (st.basis.clone(), st.vstate.clone()))
    }

    /// Pivot loop over the bounded-variable dual. Reduced costs are cached
    /// exactly and updated from the pivot row after every basis exchange
    /// (bound flips leave them untouched). Entering selection uses Devex
    /// pricing, switching to Bland's smallest-index rule after a run of
    /// degenerate steps so cycling is impossible and back on the next real
    /// step. Before declaring optimality the cache is rebuilt from scratch
    /// once, so termination never rests on drifted values. Returns
    /// `Ok(true)` on optimality within the budget.
    fn run_phase(
        &self,
        st: &mut DualBasis,
        r: &[f64],
        opts: &SolverOptions,
        phase1: bool,
        budget: usize,
        ws: &mut LpWorkspace,
    ) -> Result<bool> {
        let n = self.n;
        let p = self.p;
        let lam = self.lambda_id();
        let rc_tol = opts.reduced_cost_tol;
        ws.ensure(n, p);
        ws.gamma.fill(1.0);
        let mut rc_lam = 0.0f64;
        let mut gamma_lam = 1.0f64;
        let mut rc_valid = false;
        let mut dirty = false;
        let mut since_refactor = 0usize;
        let mut bland_mode = false;
        let mut degen_run = 0usize;
        const DEGEN_SWITCH: usize = 50;
        loop {
            if !rc_valid {
                // pi = c_B^T B^{-1}; costs are 1 on artificials (phase 1)
                // or -1 on lambda (phase 2). Then rc_k = c_k - pi.a_k with
                // a_k = 2 y_k on the box block and -r on lambda.
                #[cfg(feature = "std")]
                probe_stats::REFRESH.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
                #[cfg(feature = "std")]
                let _t = probe_stats::Timer::new(&probe_stats::T_REFILL);
                ws.pi.fill(0.0);
                for j in 0..n {
                    let v = st.basis[j];
                    let cb = if phase1 {
                        if v > p {
                            1.0
                        } else {
                            0.0
                        }
                    } else if v == lam {
                        -1.0
                    } else {
                        0.0
                    };
                    if cb != 0.0 {
                        for i in 0..n {
                            ws.pi[i] += cb * st.binv[j * n + i];
                        }
                    }
                }
                self.scaled_yt_v_into(-2.0, &ws.pi, &mut ws.rc);
                rc_lam = if phase1 { 0.0 } else { -1.0 + dot(r, &ws.pi) };
                rc_valid = true;
                dirty = false;
            }
            // Entering selection. A variable at its lower bound wants
            // rc < -tol, one at its upper bound wants rc > tol; lambda
            // (lower bound only) is barred in phase 1 so that phase's
            // outcome is independent of `r`.
            #[cfg(feature = "std")]
            let _t_sel = probe_stats::Timer::new(&probe_stats::T_SELECT);
            let mut entering: Option<usize> = None;
            if bland_mode {
                for (k, &state) in st.vstate[..p].iter().enumerate() {
                    let viol = match state {
                        STATE_LOWER => -ws.rc[k],
                        STATE_UPPER => ws.rc[k],
                        _ => continue,
                    };
                    if viol > rc_tol {
                        entering = Some(k);
                        break;
                    }
                }
                if entering.is_none()
                    && !phase1
                    && st.vstate[lam] != STATE_BASIC
                    && -rc_lam > rc_tol
                {
                    entering = Some(lam);
                }
            } else {
                // Devex: largest violation scaled by the reference weights;
                // the ascending scan makes ties go to the smaller id.
                let mut best_score = 0.0f64;
                for (k, (&state, &rck)) in
                    st.vstate[..p].iter().zip(ws.rc.iter()).enumerate()
                {
                    let viol = match state {
                        STATE_LOWER => -rck,
                        STATE_UPPER => rck,
                        _ => continue,
                    };
                    if viol > rc_tol {
                        let score = viol * viol / ws.gamma[k];
                        if score > best_score {
                            best_score = score;
                            entering = Some(k);
                        }
                    }
                }
                if !phase1
                    && st.vstate[lam] != STATE_BASIC
                    && -rc_lam > rc_tol
                    && rc_lam * rc_lam / gamma_lam > best_score
                {
                    entering = Some(lam);
                }
            }
            #[cfg(feature = "std")]
            drop(_t_sel);
            let e = match entering {
                Some(e) => e,
                None => {
                    if dirty {
                        // Re-derive the cache before certifying optimality,
                        // so the verdict never rests on incremental drift.
                        rc_valid = false;
                        continue;
                    }
                    return Ok(true);
                }
            };
            if st.pivots >= budget {
                return Ok(false);
            }
            #[cfg(feature = "std")]
            let _t_ratio = probe_stats::Timer::new(&probe_stats::T_RATIO);
            let from_lower = st.vstate[e] == STATE_LOWER;
            self.col_into(e, r, &st.art_sign, &mut ws.col);
            for i in 0..n {
                ws.yhat[i] = dot(&st.binv[i * n..(i + 1) * n], &ws.col);
            }
            // Ratio test. Moving x_e by +t (from lower) changes basics by
            // -t*yhat; moving by -t (from upper) changes them by +t*yhat.
            // The entering variable's own bound span competes as a blocker;
            // ties go to the smallest variable id (Bland).
            let own_limit = self.upper_bound(e, st.arts_pinned);
            ws.ratio.fill(f64::INFINITY);
            let mut best_t = own_limit;
            for i in 0..n {
                let delta = if from_lower { ws.yhat[i] } else { -ws.yhat[i] };
                let t = if delta > PIVOT_TOL {
                    st.xb[i].max(0.0) / delta
                } else if delta < -PIVOT_TOL {
                    let ub = self.upper_bound(st.basis[i], st.arts_pinned);
                    if ub.is_infinite() {
                        continue;
                    }
                    (ub - st.xb[i]).max(0.0) / (-delta)
                } else {
                    continue;
                };
                ws.ratio[i] = t;
                if t < best_t {
                    best_t = t;
                }
            }
            if best_t.is_infinite() {
                // Unbounded dual would mean an infeasible primal, which the
                // zero-constraint guard already excluded.
                return Err(Error::Unbounded);
            }
            let tie = best_t + 1e-12 + 1e-9 * best_t;
            let mut leave: Option<usize> = None;
            let mut leave_var = if own_limit <= tie { e } else { usize::MAX };
            for i in 0..n {
                if ws.ratio[i] <= tie && st.basis[i] < leave_var {
                    leave = Some(i);
                    leave_var = st.basis[i];
                }
            }
            #[cfg(feature = "std")]
            drop(_t_ratio);
            let step = best_t.max(0.0);
            if step > 1e-12 {
                degen_run = 0;
                bland_mode = false;
            } else if leave.is_some() {
                degen_run += 1;
                if degen_run >= DEGEN_SWITCH {
                    bland_mode = true;
                }
            }
            match leave {
                None => {
                    // Bound flip: the entering variable crosses to its other
                    // bound; the basis and all reduced costs are unchanged.
                    #[cfg(feature = "std")]
                    probe_stats::FLIPS.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
                    debug_assert!(e < p, "only box variables can flip");
                    let span = own_limit;
                    for i in 0..n {
                        let delta = if from_lower { ws.yhat[i] } else { -ws.yhat[i] };
                        st.xb[i] -= span * delta;
                    }
                    st.vstate[e] = if from_lower { STATE_UPPER } else { STATE_LOWER };
                }
                Some(row) => {
                    #[cfg(feature = "std")]
                    probe_stats::BASIS.fetch_add(1, core::sync::atomic::Ordering::Relaxed);
                    let exiting = st.basis[row];
                    // The pivot row of the outgoing inverse drives both the
                    // reduced-cost update and the Devex weights: with
                    // theta = rc_e / yhat_row, rc'_k = rc_k - theta*alpha_k
                    // (alpha_k = row.a_k), which zeroes the entering column
                    // and hands the leaving one -theta.
                    #[cfg(feature = "std")]
                    let _t_upd = probe_stats::Timer::new(&probe_stats::T_UPDATE);
                    ws.rho.copy_from_slice(&st.binv[row * n..(row + 1) * n]);
                    self.scaled_yt_v_into(2.0, &ws.rho, &mut ws.alpha);
                    let alpha_lam = -dot(r, &ws.rho);
                    let piv = ws.yhat[row];
                    let rc_e = if e == lam { rc_lam } else { ws.rc[e] };
                    let theta = rc_e / piv;
                    let gamma_e = if e == lam { gamma_lam } else { ws.gamma[e] };
                    let s = gamma_e / (piv * piv);
                    if s > 1e12 {
                        // Reference-framework reset keeps the weights tame.
                        ws.gamma.fill(1.0);
                        gamma_lam = 1.0;
                    } else {
                        for (g, &a) in ws.gamma.iter_mut().zip(ws.alpha.iter()) {
                            let cand = a * a * s;
                            if cand > *g {
                                *g = cand;
                            }
                        }
                        gamma_lam = gamma_lam.max(alpha_lam * alpha_lam * s);
                        if exiting < p {
                            ws.gamma[exiting] = s.max(1.0);
                        } else if exiting == lam {
                            gamma_lam = s.max(1.0);
                        }
                    }
                    for (rcv, &a) in ws.rc.iter_mut().zip(ws.alpha.iter()) {
                        *rcv -= theta * a;
                    }
                    if !phase1 {
                        rc_lam -= theta * alpha_lam;
                    }
                    if e == lam {
                        rc_lam = 0.0;
                    } else {
                        ws.rc[e] = 0.0;
                    }
                    dirty = true;
                    #[cfg(feature = "std")]
                    drop(_t_upd);
                    #[cfg(feature = "std")]
                    let _t_binv = probe_stats::Timer::new(&probe_stats::T_BINV);
                    for i in 0..n {
                        let delta = if from_lower { ws.yhat[i] } else { -ws.yhat[i] };
                        st.xb[i] -= step * delta;
                    }
                    let new_val = if from_lower { step } else { own_limit - step };
                    let delta_row = if from_lower { ws.yhat[row] } else { -ws.yhat[row] };
                    st.vstate[exiting] = if delta_row > 0.0 { STATE_LOWER } else { STATE_UPPER };
                    st.basis[row] = e;
                    st.vstate[e] = STATE_BASIC;
                    st.xb[row] = new_val;
                    let inv_piv = 1.0 / piv;
                    for j in 0..n {
                        st.binv[row * n + j] *= inv_piv;
                    }
                    for i in 0..n {
                        if i == row {
                            continue;
                        }
                        let f = ws.yhat[i];
                        if f != 0.0 {
                            for j in 0..n {
                                st.binv[i * n + j] -= f * st.binv[row * n + j];
                            }
                        }
                    }
                    since_refactor += 1;
                    if since_refactor >= REFACTOR_EVERY {
                        self.refactor(st, r)?;
                        since_refactor = 0;
                        // The rebuilt inverse shifts every reduced cost a
                        // little; re-derive rather than keep compounding.
                        rc_valid = false;
                    }
                }
            }
            st.pivots += 1;
        }
    }

    /// Rebuilds `B^{-1}` and the basic values from scratch.
    fn refactor(&self, st: &mut DualBasis, r: &[f64]) -> Result<()> {
        let n = self.n;
        let mut aug = vec![0.0; n * 2 * n];
        let mut col = vec![0.0; n];
        for (j, &var) in st.basis.iter().enumerate() {
            self.col_into(var, r, &st.art_sign, &mut col);
            for i in 0..n {
                aug[i * 2 * n + j] = col[i];
            }
        }
        for i in 0..n {
            aug[i * 2 * n + n + i] = 1.0;
        }
        for c in 0..n {
            let mut piv = c;
            let mut best = aug[c * 2 * n + c].abs();
            for rr in c + 1..n {
                let v = aug[rr * 2 * n + c].abs();
                if v > best {
                    best = v;
                    piv = rr;
                }
            }
            if best <= 1e-12 {
                return Err(Error::SingularMatrix);
            }
            if piv != c {
                for j in 0..2 * n {
                    aug.swap(c * 2 * n + j, piv * 2 * n + j);
                }
            }
            let d = aug[c * 2 * n + c];
            for j in 0..2 * n {
                aug[c * 2 * n + j] /= d;
            }
            for rr in 0..n {
                if rr == c {
                    continue;
                }
                let f = aug[rr * 2 * n + c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        aug[rr * 2 * n + j] -= f * aug[c * 2 * n + j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                st.binv[i * n + j] = aug[i * 2 * n + n + j];
            }
        }
        // Effective right-hand side accounts for box variables parked at
        // their upper bound.
        let mut rhs = self.b0.clone();
        for k in 0..self.p {
            if st.vstate[k] == STATE_UPPER {
                for (h, v) in rhs.iter_mut().zip(self.column(k)) {
                    *h -= 2.0 * v;
                }
            }
        }
        if st.vstate[self.lambda_id()] == STATE_UPPER {
            return Err(Error::Precondition("lambda cannot sit at an upper bound"));
        }
        for i in 0..n {
            st.xb[i] = dot(&st.binv[i * n..(i + 1) * n], &rhs);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{l1_norm, max_abs};

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        DenseMatrix::from_rows(&rows).unwrap()
    }

    fn vecf(v: &[f64]) -> DenseVector {
        DenseVector::new(v.to_vec()).unwrap()
    }

    fn both_solvers(y: DenseMatrix, r: Vec<f64>) -> (LpSolution, LpSolution) {
        let prob = L1Problem::new(y, vecf(&r)).unwrap();
        let opts = SolverOptions::default();
        let a = solve_l1(&prob, &opts).unwrap();
        let b = solve_l1_via_standard_form(&prob, &opts).unwrap();
        (a, b)
    }

    #[test]
    fn warm_solve_reproduces_cold_optima() {
        // Pseudo-random dense 4x24 instance; no structure intended.
        let n = 4;
        let p = 24;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| next()).collect()).collect();
        let y = DenseMatrix::from_rows(&rows).unwrap();
        let dual = DualL1::new(&y);
        let mut opts = SolverOptions::default();
        opts.max_pivots = 10_000;
        let start = dual.phase1(&opts).unwrap();
        let mut ws = LpWorkspace::new();
        let mut bases: Vec<(Vec<usize>, Vec<u8>)> = Vec::new();
        let mut colds: Vec<(Vec<f64>, f64)> = Vec::new();
        for j in 1..p {
            let r: Vec<f64> = (0..n).map(|i| y.get(i, 0) + y.get(i, j)).collect();
            let cold = dual.phase2(&start, &r, &opts, &mut ws).unwrap();
            if cold.status != LpStatus::Optimal {
                continue;
            }
            // Against its own constraint the stored basis is already
            // feasible, so the repair walk must pass it through unchanged.
            let (basis, vstate) = dual.last_basis(&ws).unwrap();
            let warm = dual
                .warm_solve(&start, &basis, &vstate, &r, &opts, &mut ws)
                .expect("the optimal basis must verify against its own constraint");
            assert!((warm.objective - cold.objective).abs() <= 1e-9 * (1.0 + cold.objective));
            assert_eq!(warm.pivots, 0, "self-verification should not pivot");
            bases.push((basis, vstate));
            colds.push((r, cold.objective));
        }
        assert!(colds.len() >= p / 2, "only {} pairs solved", colds.len());
        // Cross-wise: repair every stored basis toward every other pair's
        // constraint. Warm answers are optional (the walk may bail), but
        // whenever one is produced it must match the cold optimum.
        let mut repaired = 0;
        for (basis, vstate) in &bases {
            for (r, cold_obj) in &colds {
                if let Some(warm) = dual.warm_solve(&start, basis, vstate, r, &opts, &mut ws) {
                    assert!(
                        (warm.objective - cold_obj).abs() <= 1e-7 * (1.0 + cold_obj),
                        "warm objective {} != cold {}",
                        warm.objective,
                        cold_obj
                    );
                    repaired += 1;
                }
            }
        }
        let total = bases.len() * colds.len();
        assert!(
            repaired * 2 >= total,
            "warm repair succeeded on only {repaired} of {total} cross pairs"
        );
    }

    #[test]
    fn scalar_problem_scales_the_constraint() {
        // Y = [2], r = [1]: only w = 1 is feasible, objective 2.
        let (a, b) = both_solvers(mat(&[&[2.0]]), vec![1.0]);
        for sol in [a, b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective - 2.0).abs() < 1e-9);
            assert!((sol.w.get(0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_objective_when_y_is_zero() {
        let (a, b) = both_solvers(DenseMatrix::zeros(2, 3), vec![1.0, 0.0]);
        for sol in [a, b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!(sol.objective.abs() < 1e-12);
            assert!((sol.w.get(0) - 1.0).abs() < 1e-9);
            assert!(sol.w.get(1).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_observation_picks_the_cheap_coordinate() {
        // Y = I2, r = (2, 1): vertices (1/2, 0) and (0, 1); the first wins.
        let (a, b) = both_solvers(DenseMatrix::identity(2), vec![2.0, 1.0]);
        for sol in [a, b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective - 0.5).abs() < 1e-9);
            assert!((sol.w.get(0) - 0.5).abs() < 1e-9);
            assert!(sol.w.get(1).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_constraint_in_three_dimensions() {
        // Y = I3, r = (0, 5, 0): w = (0, 0.2, 0), objective 0.2.
        let (a, b) = both_solvers(DenseMatrix::identity(3), vec![0.0, 5.0, 0.0]);
        for sol in [a, b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective - 0.2).abs() < 1e-9);
            assert!((sol.w.get(1) - 0.2).abs() < 1e-9);
            assert!(sol.w.get(0).abs() < 1e-9 && sol.w.get(2).abs() < 1e-9);
        }
    }

    #[test]
    fn haar_pair_has_flat_optimum_of_two() {
        // Y = [[1,1],[1,-1]], r = e1: every optimal w has objective 2.
        let (a, b) = both_solvers(mat(&[&[1.0, 1.0], &[1.0, -1.0]]), vec![1.0, 0.0]);
        for sol in [a, b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective - 2.0).abs() < 1e-9, "objective {}", sol.objective);
            let rw = sol.w.get(0);
            assert!((rw - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_on_the_simplex_still_return_a_vertex() {
        // Y = I2, r = (1, 1): both e1 and e2 are optimal with objective 1.
        let (a, b) = both_solvers(DenseMatrix::identity(2), vec![1.0, 1.0]);
        for sol in [a, b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((sol.objective - 1.0).abs() < 1e-9);
            let w = sol.w.as_slice();
            let is_e1 = (w[0] - 1.0).abs() < 1e-9 && w[1].abs() < 1e-9;
            let is_e2 = (w[1] - 1.0).abs() < 1e-9 && w[0].abs() < 1e-9;
            assert!(is_e1 || is_e2, "w = {w:?}");
        }
    }

    #[test]
    fn zero_constraint_is_rejected_up_front() {
        let prob = L1Problem::new(DenseMatrix::identity(2), vecf(&[0.0, 0.0])).unwrap();
        let opts = SolverOptions::default();
        assert_eq!(solve_l1(&prob, &opts), Err(Error::ZeroConstraint));
        assert_eq!(solve_l1_via_standard_form(&prob, &opts), Err(Error::ZeroConstraint));
    }

    #[test]
    fn zero_constraint_surfaces_as_infeasible_in_the_tableau() {
        let prob = L1Problem::new(DenseMatrix::identity(2), vecf(&[0.0, 0.0])).unwrap();
        let lp = to_standard_form(&prob).unwrap();
        let sol = simplex(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_standard_lp_is_detected() {
        // min -x1 s.t. x1 - x2 = 0: grows without bound.
        let lp = StandardLp {
            a: mat(&[&[1.0, -1.0]]),
            b: vec![0.0],
            c: vec![-1.0, 0.0],
        };
        assert_eq!(simplex(&lp, &SolverOptions::default()), Err(Error::Unbounded));
    }

    #[test]
    fn feasibility_and_objective_consistency_hold() {
        let y = mat(&[
            &[0.3, -1.2, 0.0, 2.0, -0.7],
            &[1.0, 0.4, -0.5, 0.0, 1.1],
            &[-2.0, 0.0, 1.5, 0.6, 0.2],
        ]);
        let r = vec![0.5, -1.0, 2.0];
        let (a, b) = both_solvers(y.clone(), r.clone());
        for sol in [&a, &b] {
            assert_eq!(sol.status, LpStatus::Optimal);
            let rw = dot(&r, sol.w.as_slice());
            assert!((rw - 1.0).abs() <= 1e-8, "r.w = {rw}");
            let recomputed = objective_of(&y, sol.w.as_slice());
            assert!((recomputed - sol.objective).abs() <= 1e-9 * (1.0 + sol.objective));
        }
        assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective));
    }

    #[test]
    fn scaling_the_constraint_scales_the_objective_inversely() {
        let y = mat(&[&[1.0, -0.3, 0.8], &[0.2, 1.4, -1.0]]);
        let prob1 = L1Problem::new(y.clone(), vecf(&[0.7, -0.4])).unwrap();
        let prob3 = L1Problem::new(y, vecf(&[2.1, -1.2])).unwrap();
        let opts = SolverOptions::default();
        let s1 = solve_l1(&prob1, &opts).unwrap();
        let s3 = solve_l1(&prob3, &opts).unwrap();
        assert!((s3.objective - s1.objective / 3.0).abs() < 1e-9);
    }

    #[test]
    fn dual_route_lands_on_a_sign_arrangement_vertex() {
        // At a generic optimum n - 1 residuals vanish exactly.
        let y = mat(&[
            &[1.0, 0.0, 1.0, -2.0, 0.3],
            &[0.0, 1.0, 1.0, 0.5, -1.0],
            &[0.7, -0.2, 0.0, 1.0, 2.0],
        ]);
        let prob = L1Problem::new(y.clone(), vecf(&[1.0, 1.0, 0.0])).unwrap();
        let sol = solve_l1(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let mut zeros = 0;
        for k in 0..y.cols() {
            let mut acc = 0.0;
            for i in 0..y.rows() {
                acc += sol.w.get(i) * y.get(i, k);
            }
            if acc.abs() < 1e-9 * (1.0 + max_abs(sol.w.as_slice())) {
                zeros += 1;
            }
        }
        assert!(zeros >= y.rows() - 1, "only {zeros} zero residuals");
    }

    #[test]
    fn standard_form_shape_matches_the_encoding() {
        let prob = L1Problem::new(mat(&[&[1.0, 2.0], &[3.0, 4.0]]), vecf(&[1.0, 0.0])).unwrap();
        let lp = to_standard_form(&prob).unwrap();
        assert_eq!(lp.a.rows(), 2 * 2 + 1);
        assert_eq!(lp.a.cols(), 2 * 2 + 3 * 2);
        assert_eq!(lp.b, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(l1_norm(&lp.c), 2.0);
    }
}
