//! The recovery pipeline: from observations `Y = A X` back to `A` and a
//! sparse `X`, up to permutation and scaling of the rows of `X`.
//!
//! For each selected column pair `(i, j)` the pipeline solves
//! `min ||w^T Y||_1 s.t. (y_i + y_j)^T w = 1` and records `s = w^T Y` as a
//! candidate row of `X`. Two pair selections are offered: a random perfect
//! matching of the columns ([`er_spud_dc`], `p/2` subproblems) and every
//! unordered pair ([`er_spud_all_pairs`], `p(p-1)/2` subproblems). A greedy
//! pass then keeps the sparsest candidates that grow the row span until `n`
//! independent rows are found, and the dictionary is read off as
//! `Y Y^T (X_hat Y^T)^{-1}`.
//!
//! Candidate collection is deterministic under any work chunking: results
//! carry the pair's position in the enumeration order, duplicates keep the
//! smallest position, and the final list is sorted by position.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::lp::{DualBasis, DualL1, LpStatus, LpWorkspace, RawSolution, SolverOptions};
use crate::numerics::{
    dot, l0_count, lu_factor_inplace, lu_solve, lu_solve_factored, max_abs, DenseMatrix,
    LU_SINGULAR_TOL_FACTOR,
};
use crate::rng::{self, DOMAIN_PAIRING};
use crate::{Error, Result};

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    /// All-pairs enumeration: columns `i < j`.
    Pair { i: usize, j: usize },
    /// Random matching: `group` is the position within the matching.
    Group { group: usize, i: usize, j: usize },
}

/// One solved pair subproblem.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub source: CandidateSource,
    /// Minimizer `w` of the pair subproblem.
    pub w: Vec<f64>,
    /// The candidate row `s = w^T Y`.
    pub s: Vec<f64>,
    /// Nonzeros of `s` above the relative threshold.
    pub l0: usize,
    /// `||s||_1`.
    pub objective: f64,
}

/// Pipeline tuning knobs.
#[derive(Debug, Clone)]
pub struct SpudOptions {
    pub solver: SolverOptions,
    /// Relative threshold for counting an entry of `s` as nonzero.
    pub zero_tol: f64,
    /// Residual threshold for the greedy rank gate.
    pub rank_tol: f64,
    /// Collapse candidates equal up to scaling (keeping the earliest).
    pub dedup: bool,
}

impl Default for SpudOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), zero_tol: 1e-8, rank_tol: 1e-9, dedup: true }
    }
}

/// Counters for one pipeline run; all fields are sums, so chunked runs
/// merge by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SpudStats {
    /// Pair subproblems examined.
    pub attempted: u64,
    /// Pairs skipped because `y_i + y_j` was exactly zero.
    pub skipped_zero_r: u64,
    /// Pairs whose solve ended without an optimality certificate.
    pub unsolved: u64,
    /// Candidates produced by solved pairs.
    pub emitted: u64,
    /// Candidates surviving deduplication.
    pub kept: u64,
    /// Simplex pivots across all pair solves.
    pub lp_pivots: u64,
    /// Pivots of the shared feasibility phase (performed once per `Y`).
    pub phase1_pivots: u64,
}

impl SpudStats {
    fn absorb(&mut self, other: &SpudStats) {
        self.attempted += other.attempted;
        self.skipped_zero_r += other.skipped_zero_r;
        self.unsolved += other.unsolved;
        self.emitted += other.emitted;
        self.kept += other.kept;
        self.lp_pivots += other.lp_pivots;
        self.phase1_pivots += other.phase1_pivots;
    }
}

/// Candidates plus run counters.
#[derive(Debug, Clone)]
pub struct SpudOutput {
    pub candidates: Vec<Candidate>,
    pub stats: SpudStats,
}

/// Scales a candidate row so its largest-magnitude entry (earliest on ties)
/// becomes exactly `+1`. Errors on an all-zero row.
pub fn normalize_candidate(s: &[f64]) -> Result<Vec<f64>> {
    let mut best = 0usize;
    let mut best_abs = 0.0f64;
    for (k, v) in s.iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = k;
        }
    }
    if best_abs == 0.0 {
        return Err(Error::ZeroCandidate);
    }
    let scale = 1.0 / s[best];
    Ok(s.iter().map(|v| v * scale).collect())
}

/// The random perfect matching of `0..p` used by the matched variant:
/// a seeded shuffle read off in consecutive disjoint pairs (each reported
/// with `i < j`); with odd `p` the final unmatched column is dropped.
pub fn dc_pairing(p: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut perm: Vec<usize> = (0..p).collect();
    let mut stream = rng::substream(seed, DOMAIN_PAIRING, 0);
    // Fisher-Yates; the index bound keeps every permutation equally likely.
    for k in (1..p).rev() {
        let j = (rng::u01(&mut stream) * (k as f64 + 1.0)) as usize;
        let j = j.min(k);
        perm.swap(k, j);
    }
    let mut pairs = Vec::with_capacity(p / 2);
    for g in 0..p / 2 {
        let a = perm[2 * g];
        let b = perm[2 * g + 1];
        pairs.push((a.min(b), a.max(b)));
    }
    pairs
}

/// Dedup key: the support pattern and the quantized normalized values on
/// it. Rows equal up to scaling collapse to the same key.
type CandKey = (Vec<u32>, Vec<i64>);

fn candidate_key(s: &[f64], zero_tol: f64) -> CandKey {
    let m = max_abs(s);
    if m == 0.0 {
        return (Vec::new(), Vec::new());
    }
    let normalized = normalize_candidate(s).expect("nonzero row");
    let thresh = zero_tol * max_abs(&normalized);
    let mut support = Vec::new();
    let mut quant = Vec::new();
    for (k, v) in normalized.iter().enumerate() {
        if v.abs() > thresh {
            support.push(k as u32);
            quant.push(crate::math::round(v * 1e12) as i64);
        }
    }
    (support, quant)
}

/// Order-aware candidate collector. Safe to fill in independent chunks and
/// [`merge`](Self::merge): the result is identical to a single sequential
/// pass, because every candidate carries its enumeration position and
/// duplicate keys keep the smallest position.
#[derive(Debug)]
pub struct CandidateAccumulator {
    dedup: bool,
    zero_tol: f64,
    map: BTreeMap<CandKey, (u64, Candidate)>,
    list: Vec<(u64, Candidate)>,
    stats: SpudStats,
}

impl CandidateAccumulator {
    pub fn new(opts: &SpudOptions) -> Self {
        Self {
            dedup: opts.dedup,
            zero_tol: opts.zero_tol,
            map: BTreeMap::new(),
            list: Vec::new(),
            stats: SpudStats::default(),
        }
    }

    fn push(&mut self, order: u64, cand: Candidate) {
        self.stats.emitted += 1;
        if self.dedup {
            let key = candidate_key(&cand.s, self.zero_tol);
            match self.map.entry(key) {
                alloc::collections::btree_map::Entry::Vacant(v) => {
                    v.insert((order, cand));
                }
                alloc::collections::btree_map::Entry::Occupied(mut o) => {
                    if order < o.get().0 {
                        o.insert((order, cand));
                    }
                }
            }
        } else {
            self.list.push((order, cand));
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.stats.absorb(&other.stats);
        if self.dedup {
            for (key, (order, cand)) in other.map {
                match self.map.entry(key) {
                    alloc::collections::btree_map::Entry::Vacant(v) => {
                        v.insert((order, cand));
                    }
                    alloc::collections::btree_map::Entry::Occupied(mut o) => {
                        if order < o.get().0 {
                            o.insert((order, cand));
                        }
                    }
                }
            }
        } else {
            self.list.extend(other.list);
        }
        self
    }

    pub fn finish(self) -> SpudOutput {
        let mut tagged: Vec<(u64, Candidate)> = if self.dedup {
            self.map.into_values().collect()
        } else {
            self.list
        };
        tagged.sort_by_key(|(order, _)| *order);
        let mut stats = self.stats;
        stats.kept = tagged.len() as u64;
        SpudOutput { candidates: tagged.into_iter().map(|(_, c)| c).collect(), stats }
    }
}

/// Remembered optimal vertices of `{w : ||Y^T w||_1 <= 1}`: for each, the
/// row `z = Y^T w` whose entries score the vertex against any pair
/// constraint, and the basis and bound pattern that certified it.
struct VertexCache {
    /// Entries per score row; the cache resets when full.
    cap: usize,
    len: usize,
    /// The rows `z`, one value per (coordinate, entry), stored
    /// coordinate-major: coordinate `c` occupies
    /// `zt[c * cap..c * cap + len]`. A pair's score scan then reads two
    /// contiguous rows instead of chasing one allocation per entry.
    zt: Vec<f64>,
    basis: Vec<Vec<usize>>,
    vstate: Vec<Vec<u8>>,
}

impl VertexCache {
    fn new(p: usize) -> Self {
        let cap = 2048;
        Self {
            cap,
            len: 0,
            zt: vec![0.0; p * cap],
            basis: Vec::new(),
            vstate: Vec::new(),
        }
    }

    /// Entry maximizing the pair score `z[i] + z[j]` (first wins on ties).
    fn best_for(&self, i: usize, j: usize) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        let ri = &self.zt[i * self.cap..i * self.cap + self.len];
        let rj = &self.zt[j * self.cap..j * self.cap + self.len];
        let mut arg = 0;
        let mut best = f64::NEG_INFINITY;
        for (e, (&a, &b)) in ri.iter().zip(rj).enumerate() {
            let s = a + b;
            if s > best {
                best = s;
                arg = e;
            }
        }
        Some(arg)
    }

    fn push(&mut self, z: &[f64], basis: Vec<usize>, vstate: Vec<u8>) {
        if self.len == self.cap {
            self.len = 0;
            self.basis.clear();
            self.vstate.clear();
        }
        for (c, &v) in z.iter().enumerate() {
            self.zt[c * self.cap + self.len] = v;
        }
        self.len += 1;
        self.basis.push(basis);
        self.vstate.push(vstate);
    }

    /// Whether entry `e` remembers (within tolerance) the vertex with row `z`.
    fn z_matches(&self, e: usize, z: &[f64]) -> bool {
        z.iter()
            .enumerate()
            .all(|(c, &v)| (self.zt[c * self.cap + e] - v).abs() <= 1e-9)
    }

    /// Swaps in a fresher certificate for the vertex entry `e` remembers:
    /// the repairing solve ended in a basis adapted to the latest pair
    /// constraint, which serves its neighborhood better than the original.
    fn refresh(&mut self, e: usize, basis: Vec<usize>, vstate: Vec<u8>) {
        self.basis[e] = basis;
        self.vstate[e] = vstate;
    }
}

/// Prepared pair subproblems over a fixed `Y`: the feasibility phase of the
/// simplex is shared by every pair, so constructing this once and solving
/// ranges (possibly from several threads, each with its own accumulator)
/// is much cheaper than independent solves.
pub struct PairSolver {
    dual: DualL1,
    start: DualBasis,
    pairs: Vec<(u32, u32)>,
    grouped: bool,
    opts: SpudOptions,
    phase1_pivots: u64,
    p: usize,
}

impl PairSolver {
    fn build(y: &DenseMatrix, pairs: Vec<(u32, u32)>, grouped: bool, opts: &SpudOptions) -> Result<Self> {
        let mut opts = opts.clone();
        if opts.solver.max_pivots == 0 {
            opts.solver.max_pivots = 200 * (y.rows() + 2 * y.cols());
        }
        let p = y.cols();
        let dual = DualL1::new(y);
        let start = dual.phase1(&opts.solver)?;
        let phase1_pivots = start.pivot_count() as u64;
        Ok(Self { dual, start, pairs, grouped, opts, phase1_pivots, p })
    }

    /// Every unordered pair `(i, j)`, `i < j`, in lexicographic order.
    pub fn new_all_pairs(y: &DenseMatrix, opts: &SpudOptions) -> Result<Self> {
        let p = y.cols();
        let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            for j in i + 1..p {
                pairs.push((i as u32, j as u32));
            }
        }
        Self::build(y, pairs, false, opts)
    }

    /// A seeded random matching of the columns.
    pub fn new_matched(y: &DenseMatrix, pairing_seed: u64, opts: &SpudOptions) -> Result<Self> {
        let pairs = dc_pairing(y.cols(), pairing_seed)
            .into_iter()
            .map(|(i, j)| (i as u32, j as u32))
            .collect();
        Self::build(y, pairs, true, opts)
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn phase1_pivots(&self) -> u64 {
        self.phase1_pivots
    }

    /// Solves pairs `lo..hi` of the enumeration into `acc`.
    ///
    /// Every pair maximizes its own linear score over the one polytope
    /// `{w : ||Y^T w||_1 <= 1}`: with `z = Y^T w`, pair `(i, j)` wants the
    /// vertex with the largest `z_i + z_j`. The distinct optimal vertices
    /// across pairs number far fewer than the pairs, so certified vertices
    /// are remembered with their `z`; each new pair restarts the simplex
    /// from the best-scoring remembered vertex and usually needs only a
    /// short repair walk (often none) instead of a full solve. Results are
    /// accepted exclusively under the cold path's optimality certificates.
    pub fn solve_range(&self, lo: usize, hi: usize, acc: &mut CandidateAccumulator) {
        let n = self.dual.column(0).len();
        let mut r = vec![0.0; n];
        let mut ws = LpWorkspace::new();
        let mut cache = VertexCache::new(self.p);
        for idx in lo..hi {
            let (i, j) = self.pairs[idx];
            let (i, j) = (i as usize, j as usize);
            acc.stats.attempted += 1;
            let ci = self.dual.column(i);
            let cj = self.dual.column(j);
            let mut all_zero = true;
            for k in 0..n {
                r[k] = ci[k] + cj[k];
                if r[k] != 0.0 {
                    all_zero = false;
                }
            }
            if all_zero {
                acc.stats.skipped_zero_r += 1;
                continue;
            }
            // Only the top scorer can be the pair's optimum: every
            // remembered vertex is feasible for every pair, so any
            // better-scoring one defeats the optimality of those below it.
            // Restart the simplex from its remembered basis.
            let hit = cache.best_for(i, j);
            let warm = hit.and_then(|ei| {
                self.dual.warm_solve(
                    &self.start,
                    &cache.basis[ei],
                    &cache.vstate[ei],
                    &r,
                    &self.opts.solver,
                    &mut ws,
                )
            });
            let cold_path = warm.is_none();
            let repair_pivots = warm.as_ref().map_or(0, |raw| raw.pivots);
            let solved = match warm {
                Some(raw) => Ok(raw),
                None => self.dual.phase2(&self.start, &r, &self.opts.solver, &mut ws),
            };
            if let Ok(raw) = &solved {
                if (cold_path || repair_pivots > 0)
                    && raw.status == LpStatus::Optimal
                    && raw.objective > 1e-12
                {
                    if let Some((basis, vstate)) = self.dual.last_basis(&ws) {
                        let z: Vec<f64> = raw.s.iter().map(|v| v / raw.objective).collect();
                        match hit.filter(|&ei| !cold_path && cache.z_matches(ei, &z)) {
                            // The repair stayed on the remembered vertex but
                            // rebuilt its certificate against a nearby pair;
                            // the fresher one serves the neighborhood better.
                            Some(ei) => cache.refresh(ei, basis, vstate),
                            // A genuinely new vertex (or a cold solve) is
                            // worth remembering only when it took real work;
                            // a couple of pivots from the cache would only
                            // duplicate what is already there.
                            None => {
                                if cold_path || repair_pivots > 4 {
                                    cache.push(&z, basis, vstate);
                                }
                            }
                        }
                    }
                }
            }
            match solved {
                Ok(raw) => {
                    acc.stats.lp_pivots += raw.pivots as u64;
                    if raw.status != LpStatus::Optimal {
                        acc.stats.unsolved += 1;
                        continue;
                    }
                    let l0 = l0_count(&raw.s, self.opts.zero_tol);
                    let source = if self.grouped {
                        CandidateSource::Group { group: idx, i, j }
                    } else {
                        CandidateSource::Pair { i, j }
                    };
                    acc.push(
                        idx as u64,
                        Candidate { source, w: raw.w, s: raw.s, l0, objective: raw.objective },
                    );
                }
                Err(_) => {
                    acc.stats.unsolved += 1;
                }
            }
        }
    }

    fn run_all(&self) -> SpudOutput {
        let mut acc = CandidateAccumulator::new(&self.opts);
        self.solve_range(0, self.pairs.len(), &mut acc);
        let mut out = acc.finish();
        out.stats.phase1_pivots = self.phase1_pivots;
        out
    }
}

/// Runs the matched variant: `floor(p/2)` subproblems on a seeded random
/// matching of the columns of `Y`.
pub fn er_spud_dc(y: &DenseMatrix, pairing_seed: u64, opts: &SpudOptions) -> Result<SpudOutput> {
    Ok(PairSolver::new_matched(y, pairing_seed, opts)?.run_all())
}

/// Runs the exhaustive variant: one subproblem per unordered column pair.
pub fn er_spud_all_pairs(y: &DenseMatrix, opts: &SpudOptions) -> Result<SpudOutput> {
    Ok(PairSolver::new_all_pairs(y, opts)?.run_all())
}

/// Terminal state of [`greedy_select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryStatus {
    /// `n` independent rows found and the dictionary solve succeeded.
    Complete,
    /// The candidate pool spans fewer than `n` directions, or the final
    /// linear solve was singular.
    RankDeficient,
}

/// Result of the greedy selection.
#[derive(Debug, Clone)]
pub struct Recovery {
    /// Accepted candidate rows in acceptance order (`None` when nothing was
    /// accepted at all).
    pub x_hat: Option<DenseMatrix>,
    /// Recovered dictionary (`None` unless status is `Complete`).
    pub a_hat: Option<DenseMatrix>,
    /// Indices into the candidate list, in acceptance order.
    pub selected: Vec<usize>,
    pub status: RecoveryStatus,
}

/// Greedily keeps the sparsest candidates whose rows are linearly
/// independent of the rows already kept, until `n = y.rows()` rows are
/// found; then reconstructs the dictionary as `Y Y^T (X_hat Y^T)^{-1}`.
///
/// Candidates are visited in ascending `(l0, position)` order; a candidate
/// is accepted when its row, reduced against the accepted rows, leaves a
/// residual above `rank_tol` (checked on scale-normalized copies).
pub fn greedy_select(
    y: &DenseMatrix,
    candidates: &[Candidate],
    opts: &SpudOptions,
) -> Result<Recovery> {
    let n = y.rows();
    let p = y.cols();
    for c in candidates {
        if c.s.len() != p {
            return Err(Error::Dimension("candidate length must equal the column count of Y"));
        }
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&idx| (candidates[idx].l0, idx));

    // Row-echelon basis of the accepted rows: each entry is a reduced row
    // scaled to a unit pivot, tagged with its pivot column.
    let mut echelon: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut selected = Vec::new();
    for &idx in &order {
        if selected.len() == n {
            break;
        }
        let cand = &candidates[idx];
        let scale = max_abs(&cand.s);
        if scale == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = cand.s.iter().map(|x| x / scale).collect();
        for (pivcol, prow) in &echelon {
            let f = v[*pivcol];
            if f != 0.0 {
                for (vi, pi) in v.iter_mut().zip(prow) {
                    *vi -= f * pi;
                }
            }
        }
        let residual = max_abs(&v);
        if residual > opts.rank_tol {
            let mut pivcol = 0usize;
            let mut best = 0.0f64;
            for (k, val) in v.iter().enumerate() {
                if val.abs() > best {
                    best = val.abs();
                    pivcol = k;
                }
            }
            let pivval = v[pivcol];
            for val in v.iter_mut() {
                *val /= pivval;
            }
            echelon.push((pivcol, v));
            selected.push(idx);
        }
    }

    if selected.is_empty() {
        return Ok(Recovery {
            x_hat: None,
            a_hat: None,
            selected,
            status: RecoveryStatus::RankDeficient,
        });
    }
    let rows: Vec<Vec<f64>> = selected.iter().map(|&i| candidates[i].s.clone()).collect();
    let x_hat = DenseMatrix::from_rows(&rows)?;
    if selected.len() < n {
        return Ok(Recovery {
            x_hat: Some(x_hat),
            a_hat: None,
            selected,
            status: RecoveryStatus::RankDeficient,
        });
    }
    let yt = y.transpose();
    let yyt = y.mul(&yt)?;
    let m = x_hat.mul(&yt)?;
    match lu_solve(&m.transpose(), &yyt) {
        Ok(a_hat_t) => Ok(Recovery {
            x_hat: Some(x_hat),
            a_hat: Some(a_hat_t.transpose()),
            selected,
            status: RecoveryStatus::Complete,
        }),
        Err(Error::SingularMatrix) => Ok(Recovery {
            x_hat: Some(x_hat),
            a_hat: None,
            selected,
            status: RecoveryStatus::RankDeficient,
        }),
        Err(e) => Err(e),
    }
}
