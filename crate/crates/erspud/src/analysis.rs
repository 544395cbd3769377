//! Sample-based verification of the probabilistic facts behind the
//! pipeline's recovery guarantee, plus the metrics used to score a
//! recovery against the ground truth.
//!
//! The guarantee rests on a few quantitative properties of the
//! Bernoulli-subgaussian coefficient model. Each gets a checker here that
//! evaluates the claimed inequality on concrete samples:
//!
//! * [`sparsity_separation`]: single rows of `X` stay below `(10/9) theta p`
//!   nonzeros while two-row combinations stay above `(11/9) theta p`, the
//!   gap the greedy selection relies on.
//! * [`check_marginal_lower_bound`]: `E|v^T Z| >= (mu/8) sqrt(theta/n) ||v||_1`
//!   for a coefficient column `Z`.
//! * [`check_partition_inequality`]: removing any small column subset `S`
//!   (`|S| < p/4`) still leaves `||v^T X||_1 - 2 ||v^T X_S||_1` above
//!   `(p mu / 32) sqrt(theta/n) ||v||_1`.
//! * [`check_restricted_one_sparse`]: when the constraint vector has a
//!   dominant entry (gap condition), the restricted subproblem returns a
//!   1-sparse solution supported on that entry.
//! * [`estimate_w`]: the uniform deviation
//!   `W = sup_{||x||_1 <= 1} |(1/p) sum_k (|x^T Z_k| - E|x^T Z_k|)|`,
//!   estimated from below by vertex evaluation plus random search.

use alloc::vec;
use alloc::vec::Vec;

use crate::lp::{solve_l1, L1Problem, LpStatus, SolverOptions};
use crate::math;
use crate::model::{CoefficientMatrix, Distribution};
use crate::numerics::{dot, l0_count, l1_norm, max_abs, DenseMatrix, DenseVector};
use crate::rng::{self, DOMAIN_COMBINATION, DOMAIN_DEVIATION, DOMAIN_DIRECTION, DOMAIN_MARGINAL};
use crate::{Error, Result};

/// Relative threshold under which an entry of a row combination counts as
/// an accidental cancellation rather than a nonzero.
pub const COMBO_ZERO_TOL: f64 = 1e-12;

/// Default dominance parameter for the gap condition.
pub const DEFAULT_GAMMA: f64 = 0.5;

// ---------------------------------------------------------------------------
// Sparsity separation.
// ---------------------------------------------------------------------------

/// Observed sparsity statistics of one coefficient sample against the
/// separation thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Largest nonzero count over single rows.
    pub max_row_nnz: usize,
    /// Smallest nonzero count over random two-row combinations (`None`
    /// when there are fewer than two rows).
    pub min_combo_nnz: Option<usize>,
    /// `(10/9) theta p`: single rows must stay at or below this.
    pub row_threshold: f64,
    /// `(11/9) theta p`: combinations must stay at or above this.
    pub combo_threshold: f64,
    pub rows_ok: bool,
    pub combos_ok: bool,
}

impl SeparationReport {
    pub fn separated(&self) -> bool {
        self.rows_ok && self.combos_ok
    }
}

/// Checks the sparsity gap on a sample: every row at most `(10/9) theta p`
/// nonzeros, every two-row combination at least `(11/9) theta p`.
///
/// Combinations `alpha X_i + beta X_j` are probed with Gaussian random
/// coefficients (one substream per pair), which leaves the union support
/// intact except for measure-zero cancellations; entries below
/// [`COMBO_ZERO_TOL`] relative magnitude count as zero.
pub fn sparsity_separation(coeffs: &CoefficientMatrix, theta: f64, seed: u64) -> SeparationReport {
    let n = coeffs.x.rows();
    let p = coeffs.x.cols();
    let mut max_row = 0usize;
    for i in 0..n {
        let nnz = (0..p).filter(|&k| coeffs.mask[i * p + k]).count();
        max_row = max_row.max(nnz);
    }
    let mut min_combo: Option<usize> = None;
    let mut combo = vec![0.0; p];
    let mut pair_rank = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let mut stream = rng::substream(seed, DOMAIN_COMBINATION, pair_rank);
            pair_rank += 1;
            let alpha = rng::gaussian(&mut stream);
            let beta = rng::gaussian(&mut stream);
            for k in 0..p {
                combo[k] = alpha * coeffs.x.get(i, k) + beta * coeffs.x.get(j, k);
            }
            let nnz = l0_count(&combo, COMBO_ZERO_TOL);
            min_combo = Some(min_combo.map_or(nnz, |m| m.min(nnz)));
        }
    }
    let row_threshold = 10.0 / 9.0 * theta * p as f64;
    let combo_threshold = 11.0 / 9.0 * theta * p as f64;
    SeparationReport {
        max_row_nnz: max_row,
        min_combo_nnz: min_combo,
        row_threshold,
        combo_threshold,
        rows_ok: (max_row as f64) <= row_threshold,
        combos_ok: min_combo.map_or(true, |m| (m as f64) >= combo_threshold),
    }
}

// ---------------------------------------------------------------------------
// Marginal lower bound.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalReport {
    /// Monte Carlo estimate of `E|v^T Z|`.
    pub estimate: f64,
    /// `(mu/8) sqrt(theta/n) ||v||_1`.
    pub lower_bound: f64,
    pub holds: bool,
    pub samples: usize,
}

/// Estimates `E|v^T Z|` for a fresh coefficient column `Z` (entries
/// Bernoulli(`theta`) times `dist`) and compares it against the claimed
/// lower bound `(mu/8) sqrt(theta/n) ||v||_1`.
pub fn check_marginal_lower_bound(
    v: &[f64],
    dist: &Distribution,
    theta: f64,
    samples: usize,
    seed: u64,
) -> Result<MarginalReport> {
    if v.is_empty() {
        return Err(Error::Dimension("direction must be nonempty"));
    }
    if !(0.0..=1.0).contains(&theta) || !theta.is_finite() {
        return Err(Error::InvalidParameter("theta must lie in [0, 1]"));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample"));
    }
    dist.validate()?;
    let n = v.len();
    let mut stream = rng::substream(seed, DOMAIN_MARGINAL, 0);
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut inner = 0.0;
        for &vi in v {
            if rng::u01(&mut stream) < theta {
                inner += vi * dist.sample(&mut stream);
            }
        }
        acc += inner.abs();
    }
    let estimate = acc / samples as f64;
    let lower_bound = dist.mean_abs() / 8.0 * math::sqrt(theta / n as f64) * l1_norm(v);
    Ok(MarginalReport { estimate, lower_bound, holds: estimate >= lower_bound, samples })
}

// ---------------------------------------------------------------------------
// Partition inequality.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionReport {
    /// `||v^T X||_1 - 2 ||v^T X_S||_1`.
    pub lhs: f64,
    /// `(p mu / 32) sqrt(theta/n) ||v||_1`.
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the partition inequality on a concrete sample `X` and column
/// subset `S`: the whole-sample l1 mass of `v^T X` must dominate twice the
/// mass on `S` by the stated margin. Requires `|S| < p/4` (distinct,
/// in-range indices).
pub fn check_partition_inequality(
    x: &DenseMatrix,
    v: &[f64],
    subset: &[usize],
    dist: &Distribution,
    theta: f64,
) -> Result<PartitionReport> {
    let n = x.rows();
    let p = x.cols();
    if v.len() != n {
        return Err(Error::Dimension("direction length must equal the row count of X"));
    }
    if 4 * subset.len() >= p {
        return Err(Error::Precondition("the excluded subset must have fewer than p/4 columns"));
    }
    let mut seen = vec![false; p];
    for &k in subset {
        if k >= p {
            return Err(Error::InvalidParameter("subset index out of range"));
        }
        if seen[k] {
            return Err(Error::InvalidParameter("subset indices must be distinct"));
        }
        seen[k] = true;
    }
    dist.validate()?;
    let mut total = 0.0;
    let mut on_subset = 0.0;
    for k in 0..p {
        let mut acc = 0.0;
        for i in 0..n {
            acc += v[i] * x.get(i, k);
        }
        total += acc.abs();
        if seen[k] {
            on_subset += acc.abs();
        }
    }
    let lhs = total - 2.0 * on_subset;
    let rhs = p as f64 * dist.mean_abs() / 32.0 * math::sqrt(theta / n as f64) * l1_norm(v);
    Ok(PartitionReport { lhs, rhs, holds: lhs > rhs })
}

// ---------------------------------------------------------------------------
// Restricted one-sparse recovery.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedReport {
    /// Minimizer of the restricted subproblem.
    pub z: Vec<f64>,
    /// Index of the dominant entry of `b`.
    pub dominant: usize,
    /// Whether `z` is supported on the dominant entry alone.
    pub one_sparse: bool,
}

/// Suggested working-set size for the restricted subproblem:
/// `floor(12 theta n) + 1`.
pub fn recommended_restricted_size(theta: f64, n: usize) -> usize {
    (12.0 * theta * n as f64) as usize + 1
}

/// Solves the restricted subproblem `min_z ||z^T X_J||_1 s.t. b^T z = 1`
/// and checks that the minimizer is 1-sparse on the dominant entry of `b`.
///
/// Requires the gap condition: with `|b|` sorted decreasingly, the second
/// largest magnitude is at most `(1 - gamma)` times the largest, so one
/// entry strictly dominates. Violations yield a precondition error; an
/// all-zero `b` yields [`Error::ZeroConstraint`].
pub fn check_restricted_one_sparse(
    x_j: &DenseMatrix,
    b: &[f64],
    gamma: f64,
    zero_tol: f64,
    opts: &SolverOptions,
) -> Result<RestrictedReport> {
    if b.len() != x_j.rows() {
        return Err(Error::Dimension("b length must equal the row count of X_J"));
    }
    if !(0.0..1.0).contains(&gamma) || gamma <= 0.0 {
        return Err(Error::InvalidParameter("gamma must lie in (0, 1)"));
    }
    let mut dominant = 0usize;
    let mut first = 0.0f64;
    let mut second = 0.0f64;
    for (k, v) in b.iter().enumerate() {
        let a = v.abs();
        if a > first {
            second = first;
            first = a;
            dominant = k;
        } else if a > second {
            second = a;
        }
    }
    if first == 0.0 {
        return Err(Error::ZeroConstraint);
    }
    if second > (1.0 - gamma) * first {
        return Err(Error::Precondition("gap condition: second largest entry too close to largest"));
    }
    let prob = L1Problem::new(x_j.clone(), DenseVector::new(b.to_vec())?)?;
    let sol = solve_l1(&prob, opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Precondition("restricted subproblem did not certify optimality"));
    }
    let z = sol.w.into_vec();
    let m = max_abs(&z);
    let one_sparse = m > 0.0
        && z.iter()
            .enumerate()
            .all(|(k, v)| k == dominant || v.abs() <= zero_tol * m);
    Ok(RestrictedReport { z, dominant, one_sparse })
}

// ---------------------------------------------------------------------------
// Uniform deviation estimate.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    /// Deviation at the ball's vertices: `max_j |(1/p) sum_k (|X[j][k]| - theta mu)|`.
    pub vertex_max: f64,
    /// Best deviation found overall (`>= vertex_max`).
    pub estimate: f64,
    pub directions: usize,
    pub mc_samples: usize,
}

/// Deviation of the empirical absolute row means from `theta * mu`,
/// maximized over coordinate directions. At `x = +-e_j` the centering term
/// `E|x^T Z| = theta mu` is exact, so this much of the supremum carries no
/// Monte Carlo noise.
pub fn vertex_max(x: &DenseMatrix, theta: f64, mean_abs: f64) -> f64 {
    let n = x.rows();
    let p = x.cols();
    let mut best = 0.0f64;
    for j in 0..n {
        let mut acc = 0.0;
        for k in 0..p {
            acc += x.get(j, k).abs();
        }
        let dev = (acc / p as f64 - theta * mean_abs).abs();
        best = best.max(dev);
    }
    best
}

/// Estimates `W = sup_{||x||_1 <= 1} |(1/p) sum_k (|x^T Z_k| - E|x^T Z_k|)|`
/// from below: the exact vertex deviations plus `directions` random points
/// on the l1 sphere, centering each with a fresh `mc_samples`-draw Monte
/// Carlo estimate of `E|x^T Z|`.
///
/// Two sources of slack, both documented deliberately: random search only
/// lower-bounds a supremum, and the Monte Carlo centering adds noise of
/// order `1/sqrt(mc_samples)` at the searched (non-vertex) points.
pub fn estimate_w(
    x: &DenseMatrix,
    dist: &Distribution,
    theta: f64,
    directions: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<DeviationReport> {
    if !(0.0..=1.0).contains(&theta) || !theta.is_finite() {
        return Err(Error::InvalidParameter("theta must lie in [0, 1]"));
    }
    if mc_samples == 0 && directions > 0 {
        return Err(Error::InvalidParameter("need Monte Carlo samples to center random directions"));
    }
    dist.validate()?;
    let n = x.rows();
    let p = x.cols();
    let base = vertex_max(x, theta, dist.mean_abs());
    let mut best = base;
    let mut dir = vec![0.0; n];
    for d in 0..directions {
        let mut dstream = rng::substream(seed, DOMAIN_DIRECTION, d as u64);
        // Uniform on the l1 sphere: normalized iid Laplace draws.
        let mut norm = 0.0;
        for v in dir.iter_mut() {
            let mag = -math::ln(rng::u01_open(&mut dstream));
            let sign = if rng::u01(&mut dstream) < 0.5 { -1.0 } else { 1.0 };
            *v = sign * mag;
            norm += mag;
        }
        if norm == 0.0 {
            continue;
        }
        for v in dir.iter_mut() {
            *v /= norm;
        }
        let mut emp = 0.0;
        for k in 0..p {
            let mut acc = 0.0;
            for i in 0..n {
                acc += dir[i] * x.get(i, k);
            }
            emp += acc.abs();
        }
        emp /= p as f64;
        let mut mstream = rng::substream(seed, DOMAIN_DEVIATION, d as u64);
        let mut center = 0.0;
        for _ in 0..mc_samples {
            let mut acc = 0.0;
            for &vi in dir.iter() {
                if rng::u01(&mut mstream) < theta {
                    acc += vi * dist.sample(&mut mstream);
                }
            }
            center += acc.abs();
        }
        center /= mc_samples as f64;
        best = best.max((emp - center).abs());
    }
    Ok(DeviationReport { vertex_max: base, estimate: best, directions, mc_samples })
}

// ---------------------------------------------------------------------------
// Recovery metrics.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// For each row of the reference matrix, the index of the recovered row
    /// matched to it (up to scaling), if any.
    pub matched: Vec<Option<usize>>,
    pub rows_matched: usize,
    /// Every reference row found a distinct recovered row.
    pub full: bool,
}

fn scale_mismatch(s: &[f64], x: &[f64]) -> f64 {
    let s_max = max_abs(s);
    let x_max = max_abs(x);
    if s_max == 0.0 {
        return if x_max == 0.0 { 0.0 } else { f64::INFINITY };
    }
    if x_max == 0.0 {
        return f64::INFINITY;
    }
    let lambda = dot(s, x) / dot(x, x);
    let mut worst = 0.0f64;
    for (a, b) in s.iter().zip(x) {
        worst = worst.max((a - lambda * b).abs());
    }
    worst / s_max
}

/// Matches recovered rows to reference rows up to scaling: recovered row
/// `s` matches reference row `x` when `||s - lambda x||_inf <= tol ||s||_inf`
/// with `lambda` the least-squares scale. Each recovered row is used at
/// most once; reference rows are processed in order and take the
/// best-fitting remaining candidate.
pub fn match_rows(x_hat: &DenseMatrix, x_ref: &DenseMatrix, match_tol: f64) -> Result<MatchReport> {
    if x_hat.cols() != x_ref.cols() {
        return Err(Error::Dimension("row length mismatch between recovered and reference"));
    }
    let mut used = vec![false; x_hat.rows()];
    let mut matched = Vec::with_capacity(x_ref.rows());
    let mut count = 0usize;
    for i in 0..x_ref.rows() {
        let truth = x_ref.row(i);
        let mut best: Option<(f64, usize)> = None;
        for c in 0..x_hat.rows() {
            if used[c] {
                continue;
            }
            let err = scale_mismatch(x_hat.row(c), truth);
            if err <= match_tol && best.map_or(true, |(b, _)| err < b) {
                best = Some((err, c));
            }
        }
        match best {
            Some((_, c)) => {
                used[c] = true;
                matched.push(Some(c));
                count += 1;
            }
            None => matched.push(None),
        }
    }
    let full = count == x_ref.rows();
    Ok(MatchReport { matched, rows_matched: count, full })
}

/// Relative dictionary error after aligning columns: greedily pairs
/// recovered and reference columns by largest absolute cosine, fits the
/// least-squares scale per pair, and reports
/// `||A_hat - A P D||_F / ||A_hat||_F`.
pub fn dictionary_error(a_hat: &DenseMatrix, a_ref: &DenseMatrix) -> Result<f64> {
    if a_hat.rows() != a_ref.rows() || a_hat.cols() != a_ref.cols() {
        return Err(Error::Dimension("dictionary shapes must agree"));
    }
    let n = a_hat.rows();
    let m = a_hat.cols();
    let col = |mat: &DenseMatrix, j: usize| -> Vec<f64> { (0..n).map(|i| mat.get(i, j)).collect() };
    let hat_cols: Vec<Vec<f64>> = (0..m).map(|j| col(a_hat, j)).collect();
    let ref_cols: Vec<Vec<f64>> = (0..m).map(|j| col(a_ref, j)).collect();
    let denom = a_hat.frobenius_norm();
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut used_hat = vec![false; m];
    let mut used_ref = vec![false; m];
    let mut residual_sq = 0.0;
    for _ in 0..m {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..m {
            if used_hat[i] {
                continue;
            }
            for j in 0..m {
                if used_ref[j] {
                    continue;
                }
                let hi = &hat_cols[i];
                let rj = &ref_cols[j];
                let nh = math::sqrt(dot(hi, hi));
                let nr = math::sqrt(dot(rj, rj));
                let score = if nh == 0.0 || nr == 0.0 { 0.0 } else { (dot(hi, rj) / (nh * nr)).abs() };
                if best.map_or(true, |(b, _, _)| score > b) {
                    best = Some((score, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("unused pair exists");
        used_hat[i] = true;
        used_ref[j] = true;
        let hi = &hat_cols[i];
        let rj = &ref_cols[j];
        let rr = dot(rj, rj);
        let scale = if rr == 0.0 { 0.0 } else { dot(hi, rj) / rr };
        for (h, r) in hi.iter().zip(rj) {
            let d = h - scale * r;
            residual_sq += d * d;
        }
    }
    Ok(math::sqrt(residual_sq) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_coefficients, Dictionary, ModelParams};

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn rademacher_first_coordinate_clears_the_marginal_bound() {
        // E|e_1^T Z| = theta * E|R| = 0.5 exactly; the claimed lower bound
        // is (1/8) sqrt(0.5/4) = 0.0442.
        let v = [1.0, 0.0, 0.0, 0.0];
        let rep =
            check_marginal_lower_bound(&v, &Distribution::Rademacher, 0.5, 20_000, 11).unwrap();
        assert!((rep.estimate - 0.5).abs() < 0.02, "estimate {}", rep.estimate);
        assert!((rep.lower_bound - 0.125 * (0.125f64).sqrt()).abs() < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn marginal_bound_rejects_bad_inputs() {
        assert!(check_marginal_lower_bound(&[], &Distribution::Rademacher, 0.5, 10, 0).is_err());
        assert!(
            check_marginal_lower_bound(&[1.0], &Distribution::Rademacher, 1.5, 10, 0).is_err()
        );
        assert!(check_marginal_lower_bound(&[1.0], &Distribution::Rademacher, 0.5, 0, 0).is_err());
    }

    #[test]
    fn partition_inequality_on_a_dense_row() {
        // X row 0 all ones (p = 8), v = e_1: total mass 8, subset {0}
        // contributes 1, so lhs = 6; rhs = (8/32) sqrt(0.5/2) = 0.125.
        let x = mat(&[
            &[1.0; 8],
            &[0.0; 8],
        ]);
        let rep = check_partition_inequality(
            &x,
            &[1.0, 0.0],
            &[0],
            &Distribution::Rademacher,
            0.5,
        )
        .unwrap();
        assert!((rep.lhs - 6.0).abs() < 1e-12);
        assert!((rep.rhs - 0.25 * (0.25f64).sqrt()).abs() < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn partition_subset_must_be_small_and_valid() {
        let x = mat(&[&[1.0; 8], &[0.0; 8]]);
        let d = Distribution::Rademacher;
        // |S| = 2 >= 8/4.
        assert_eq!(
            check_partition_inequality(&x, &[1.0, 0.0], &[0, 1], &d, 0.5),
            Err(Error::Precondition("the excluded subset must have fewer than p/4 columns"))
        );
        assert!(check_partition_inequality(&x, &[1.0, 0.0], &[9], &d, 0.5).is_err());
        let y = mat(&[&[1.0; 9], &[0.0; 9]]);
        assert!(check_partition_inequality(&y, &[1.0, 0.0], &[3, 3], &d, 0.5).is_err());
    }

    #[test]
    fn restricted_subproblem_is_one_sparse_under_the_gap() {
        // Scalar case: b = (2) forces z = 1/2.
        let one = check_restricted_one_sparse(
            &mat(&[&[1.0, -0.5, 2.0]]),
            &[2.0],
            DEFAULT_GAMMA,
            1e-8,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((one.z[0] - 0.5).abs() < 1e-9);
        assert!(one.one_sparse);
        assert_eq!(one.dominant, 0);

        // X_J = I_2, b = (1, 0.4): gap holds (0.4 <= 0.5) and the vertex
        // z = e_1 beats z = (0, 2.5).
        let rep = check_restricted_one_sparse(
            &DenseMatrix::identity(2),
            &[1.0, 0.4],
            DEFAULT_GAMMA,
            1e-8,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((rep.z[0] - 1.0).abs() < 1e-9);
        assert!(rep.z[1].abs() < 1e-9);
        assert!(rep.one_sparse);
        assert_eq!(rep.dominant, 0);
    }

    #[test]
    fn restricted_subproblem_rejects_gap_violations() {
        let opts = SolverOptions::default();
        assert_eq!(
            check_restricted_one_sparse(
                &DenseMatrix::identity(2),
                &[1.0, 0.9],
                DEFAULT_GAMMA,
                1e-8,
                &opts
            ),
            Err(Error::Precondition("gap condition: second largest entry too close to largest"))
        );
        assert_eq!(
            check_restricted_one_sparse(
                &DenseMatrix::identity(2),
                &[0.0, 0.0],
                DEFAULT_GAMMA,
                1e-8,
                &opts
            ),
            Err(Error::ZeroConstraint)
        );
    }

    #[test]
    fn recommended_size_matches_the_formula() {
        assert_eq!(recommended_restricted_size(0.25, 8), 25);
        assert_eq!(recommended_restricted_size(0.0, 8), 1);
    }

    #[test]
    fn deviation_is_zero_in_degenerate_models() {
        // theta = 0: X is all zeros and the centering term is zero.
        let rep = estimate_w(
            &DenseMatrix::zeros(3, 10),
            &Distribution::StandardGaussian,
            0.0,
            5,
            200,
            3,
        )
        .unwrap();
        assert_eq!(rep.vertex_max, 0.0);
        assert_eq!(rep.estimate, 0.0);

        // n = 1, Rademacher, theta = 1: |x^T Z| = |x| exactly for every Z,
        // so empirical and centering terms cancel identically.
        let mut row = vec![0.0; 50];
        let mut stream = rng::substream(7, 1, 0);
        for v in row.iter_mut() {
            *v = rng::rademacher(&mut stream);
        }
        let x = DenseMatrix::new(1, 50, row).unwrap();
        let rep = estimate_w(&x, &Distribution::Rademacher, 1.0, 4, 100, 9).unwrap();
        assert!(rep.vertex_max.abs() < 1e-15);
        assert!(rep.estimate.abs() < 1e-12, "estimate {}", rep.estimate);
    }

    #[test]
    fn deviation_estimate_dominates_vertex_max_and_shrinks_with_p() {
        let params = |p| ModelParams {
            n: 6,
            p,
            theta: 0.3,
            dist: Distribution::StandardGaussian,
            dict: Dictionary::Identity,
        };
        let small = sample_coefficients(&params(60), 5).unwrap();
        let large = sample_coefficients(&params(6000), 5).unwrap();
        let rep_small =
            estimate_w(&small.x, &Distribution::StandardGaussian, 0.3, 8, 400, 13).unwrap();
        let rep_large =
            estimate_w(&large.x, &Distribution::StandardGaussian, 0.3, 8, 400, 13).unwrap();
        assert!(rep_small.estimate >= rep_small.vertex_max);
        assert!(rep_large.estimate >= rep_large.vertex_max);
        // 100x more columns: the vertex deviation should drop clearly.
        assert!(rep_large.vertex_max < rep_small.vertex_max);
    }

    #[test]
    fn separation_thresholds_and_counts_are_reported() {
        // Hand-built mask: rows with 2 and 3 nonzeros, disjoint supports.
        let x = mat(&[
            &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, -1.0, 0.5, 0.0],
        ]);
        let mask = x.data().iter().map(|v| *v != 0.0).collect();
        let coeffs = CoefficientMatrix { x, mask };
        let rep = sparsity_separation(&coeffs, 0.5, 21);
        assert_eq!(rep.max_row_nnz, 3);
        // Disjoint supports: any combination keeps all 5 nonzeros.
        assert_eq!(rep.min_combo_nnz, Some(5));
        assert!((rep.row_threshold - 10.0 / 3.0).abs() < 1e-12);
        assert!((rep.combo_threshold - 11.0 / 3.0).abs() < 1e-12);
        assert!(rep.rows_ok);
        assert!(rep.combos_ok);
        assert!(rep.separated());
    }

    #[test]
    fn separation_flags_a_dense_row() {
        let x = mat(&[
            &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ]);
        let mask = x.data().iter().map(|v| *v != 0.0).collect();
        let coeffs = CoefficientMatrix { x, mask };
        // theta = 0.3: row threshold 2, combo threshold 2.2.
        let rep = sparsity_separation(&coeffs, 0.3, 2);
        assert_eq!(rep.max_row_nnz, 6);
        assert!(!rep.rows_ok);
        assert!(!rep.separated());
    }

    #[test]
    fn single_row_sample_has_no_combinations() {
        let x = mat(&[&[1.0, 0.0, 1.0]]);
        let mask = x.data().iter().map(|v| *v != 0.0).collect();
        let rep = sparsity_separation(&CoefficientMatrix { x, mask }, 0.5, 0);
        assert_eq!(rep.min_combo_nnz, None);
        assert!(rep.combos_ok);
    }

    #[test]
    fn rows_match_up_to_permutation_and_scaling() {
        let truth = mat(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let recovered = mat(&[&[0.0, -3.0, -3.0], &[2.0, 0.0, 2.0]]);
        let rep = match_rows(&recovered, &truth, 1e-6).unwrap();
        assert!(rep.full);
        assert_eq!(rep.matched, vec![Some(1), Some(0)]);
        assert_eq!(rep.rows_matched, 2);
    }

    #[test]
    fn sum_of_rows_matches_nothing() {
        let truth = DenseMatrix::identity(2);
        let recovered = mat(&[&[1.0, 1.0]]);
        let rep = match_rows(&recovered, &truth, 1e-6).unwrap();
        assert_eq!(rep.rows_matched, 0);
        assert!(!rep.full);
        assert_eq!(rep.matched, vec![None, None]);
    }

    #[test]
    fn each_recovered_row_is_used_once() {
        // Two identical truth rows but only one matching candidate: exactly
        // one of them can claim it.
        let truth = mat(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let recovered = mat(&[&[2.0, 4.0]]);
        let rep = match_rows(&recovered, &truth, 1e-6).unwrap();
        assert_eq!(rep.rows_matched, 1);
        assert_eq!(rep.matched, vec![Some(0), None]);
    }

    #[test]
    fn zero_rows_only_match_zero_rows() {
        let truth = mat(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let recovered = mat(&[&[0.0, 0.0], &[0.5, 0.0]]);
        let rep = match_rows(&recovered, &truth, 1e-6).unwrap();
        assert!(rep.full);
        assert_eq!(rep.matched, vec![Some(0), Some(1)]);
    }

    #[test]
    fn dictionary_error_vanishes_up_to_permutation_and_scale() {
        let a = DenseMatrix::identity(2);
        let a_hat = mat(&[&[0.0, 2.0], &[-3.0, 0.0]]);
        let err = dictionary_error(&a_hat, &a).unwrap();
        assert!(err < 1e-12, "error {err}");
    }

    #[test]
    fn dictionary_error_sees_distortion() {
        let a = DenseMatrix::identity(2);
        let a_hat = mat(&[&[1.0, 0.3], &[0.0, 1.0]]);
        let err = dictionary_error(&a_hat, &a).unwrap();
        assert!(err > 0.1, "error {err}");
        assert!(dictionary_error(&DenseMatrix::zeros(2, 2), &a).unwrap().is_infinite());
        assert!(dictionary_error(&a_hat, &DenseMatrix::identity(3)).is_err());
    }
}
