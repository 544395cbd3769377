//! Brute-force vertex enumeration oracle for the l1 subproblem.
//!
//! `min ||w^T Y||_1 s.t. r^T w = 1` attains its optimum at a point where
//! the constraint hyperplane meets `n - 1` further independent equalities,
//! each either an arrangement hyperplane `y_a^T w = 0` or a coordinate cut
//! `w_b = 0` (the cuts cover degenerate data such as zero or repeated
//! columns, where fewer than `n - 1` independent arrangement hyperplanes
//! pass through an optimal face). Enumerating every such system and taking
//! the best solvable one is exponential but exact, and both simplex routes
//! must reproduce its optimal value on a large batch of small random
//! instances.

use erspud::lp::{solve_l1, solve_l1_via_standard_form, L1Problem, LpStatus, SolverOptions};
use erspud::numerics::{dot, lu_solve, DenseMatrix, DenseVector};
use erspud::rng;

fn oracle_optimum(y: &DenseMatrix, r: &[f64]) -> Option<f64> {
    let n = y.rows();
    let p = y.cols();
    let mut best: Option<f64> = None;
    // Choose arrangement columns A (bitmask over p) and coordinate cuts B
    // (bitmask over n) with |A| + |B| = n - 1.
    for a_mask in 0u32..(1 << p) {
        let a_count = a_mask.count_ones() as usize;
        if a_count > n - 1 {
            continue;
        }
        let b_need = n - 1 - a_count;
        for b_mask in 0u32..(1 << n) {
            if b_mask.count_ones() as usize != b_need {
                continue;
            }
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
            rows.push(r.to_vec());
            for k in 0..p {
                if a_mask & (1 << k) != 0 {
                    rows.push((0..n).map(|i| y.get(i, k)).collect());
                }
            }
            for i in 0..n {
                if b_mask & (1 << i) != 0 {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    rows.push(e);
                }
            }
            let m = DenseMatrix::from_rows(&rows).expect("square system");
            let mut rhs = vec![0.0; n];
            rhs[0] = 1.0;
            let rhs = DenseMatrix::new(n, 1, rhs).expect("rhs");
            let Ok(sol) = lu_solve(&m, &rhs) else { continue };
            let w: Vec<f64> = (0..n).map(|i| sol.get(i, 0)).collect();
            let mut obj = 0.0;
            for k in 0..p {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += w[i] * y.get(i, k);
                }
                obj += acc.abs();
            }
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

/// Draws one random instance; entries are Gaussian, optionally rounded to
/// one decimal to force exact ties, with occasional zero columns; `r` is a
/// column-pair sum half the time.
fn random_instance(idx: u64) -> (DenseMatrix, Vec<f64>) {
    let mut stream = rng::substream(0xACCE5, 9, idx);
    let n = 1 + (rng::u01(&mut stream) * 3.0) as usize; // 1..=3
    let p = 2 + (rng::u01(&mut stream) * 5.0) as usize; // 2..=6
    let n = n.min(3);
    let p = p.min(6);
    let rounded = rng::u01(&mut stream) < 0.5;
    let mut data = vec![0.0; n * p];
    for v in data.iter_mut() {
        let g = rng::gaussian(&mut stream);
        *v = if rounded { (g * 10.0).round() / 10.0 } else { g };
    }
    // Occasionally blank a column to exercise zero-sum skips downstream.
    if rng::u01(&mut stream) < 0.3 {
        let k = (rng::u01(&mut stream) * p as f64) as usize % p;
        for i in 0..n {
            data[i * p + k] = 0.0;
        }
    }
    let y = DenseMatrix::new(n, p, data).expect("finite entries");
    let r: Vec<f64> = if rng::u01(&mut stream) < 0.5 {
        let i = (rng::u01(&mut stream) * p as f64) as usize % p;
        let j = (rng::u01(&mut stream) * p as f64) as usize % p;
        (0..n).map(|row| y.get(row, i) + y.get(row, j)).collect()
    } else {
        (0..n)
            .map(|_| {
                let g = rng::gaussian(&mut stream);
                if rounded {
                    (g * 10.0).round() / 10.0
                } else {
                    g
                }
            })
            .collect()
    };
    (y, r)
}

#[test]
fn both_simplex_routes_match_the_enumeration_oracle() {
    let opts = SolverOptions::default();
    let mut checked = 0usize;
    let mut idx = 0u64;
    while checked < 500 {
        let (y, r) = random_instance(idx);
        idx += 1;
        if r.iter().all(|&v| v == 0.0) {
            continue;
        }
        let truth = oracle_optimum(&y, &r).expect("bounded problem has a vertex");
        let prob = L1Problem::new(y.clone(), DenseVector::new(r.clone()).unwrap()).unwrap();

        let fast = solve_l1(&prob, &opts).unwrap();
        assert_eq!(
            fast.status,
            LpStatus::Optimal,
            "instance {idx}: production route not optimal (n={}, p={})",
            y.rows(),
            y.cols()
        );
        assert!(
            (fast.objective - truth).abs() <= 1e-7 * (1.0 + truth.abs()),
            "instance {idx}: production route gave {} vs oracle {truth}",
            fast.objective
        );
        let rw = dot(&r, fast.w.as_slice());
        assert!((rw - 1.0).abs() <= 1e-8, "instance {idx}: infeasible w (r.w = {rw})");

        let slow = solve_l1_via_standard_form(&prob, &opts).unwrap();
        assert_eq!(slow.status, LpStatus::Optimal, "instance {idx}: tableau route not optimal");
        assert!(
            (slow.objective - truth).abs() <= 1e-7 * (1.0 + truth.abs()),
            "instance {idx}: tableau route gave {} vs oracle {truth}",
            slow.objective
        );

        checked += 1;
    }
    assert_eq!(checked, 500);
}
