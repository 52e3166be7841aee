//! Independent oracles and random instance builders shared by the
//! integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use noir_core::dynamics::TendencyFractions;
use noir_core::generate::{generate_grid_noir, GridParams};
use noir_core::graph::{NoirGraph, RoadClass};
use noir_core::qp::QpProblem;
use rand::Rng;

/// Random grid network that passes validation.
pub fn random_grid<R: Rng>(rng: &mut R, max_side: usize) -> NoirGraph {
    let rows = rng.random_range(2..=max_side);
    let cols = rng.random_range(2..=max_side);
    let perimeter = 2 * (rows + cols) - 4;
    let segments = rows * (cols - 1) + (rows - 1) * cols;
    let params = GridParams {
        rows,
        cols,
        n_in: rng.random_range(1..=perimeter),
        n_out: rng.random_range(1..=perimeter),
        one_way_segments: rng.random_range(0..=segments / 8),
    };
    generate_grid_noir(&params, rng.random()).expect("generator succeeds")
}

/// Fraction of each interior road's outflow that leaves through outlets,
/// read from the sampled edge fractions.
pub fn outlet_fractions(graph: &NoirGraph, q: &TendencyFractions) -> Vec<f64> {
    let mut out = vec![0.0; graph.n_interior()];
    for e in &q.edges {
        if graph.class(e.to).unwrap() == RoadClass::Outlet {
            if let Some(i) = graph.interior_index(e.from) {
                out[i] += e.fraction;
            }
        }
    }
    out
}

/// Plain loop over `x[r+1] = A x[r] + B s[r]`, stacked.
pub fn iterate(a: &DMatrix<f64>, b: &DMatrix<f64>, x0: &DVector<f64>, u: &DVector<f64>, steps: usize) -> DVector<f64> {
    let n = x0.len();
    let m = b.ncols();
    let mut out = DVector::zeros(n * steps);
    let mut x = x0.clone();
    for r in 0..steps {
        let s = u.rows(r * m, m).into_owned();
        x = a * x + b * s;
        out.rows_mut(r * n, n).copy_from(&x);
    }
    out
}

/// Exhaustive active-set enumeration for a strictly convex QP.
///
/// Every subset of inequality rows is tried as the active set. The KKT system
/// is solved by LU; a candidate is accepted when it is primal feasible and its
/// inequality multipliers are non-negative. Returns the accepted point with the
/// smallest objective, or `None` when no subset yields a KKT point.
pub fn enumerate_qp(problem: &QpProblem, tol: f64) -> Option<DVector<f64>> {
    let n = problem.n_vars();
    let n_eq = problem.n_eq();
    let n_ineq = problem.n_ineq();
    assert!(n_ineq <= 16, "enumeration is exponential in the inequality count");
    let (h, c) = (problem.hessian(), problem.linear());
    let (e_mat, e_rhs) = (problem.eq_matrix(), problem.eq_rhs());
    let (f_mat, f_rhs) = (problem.ineq_matrix(), problem.ineq_rhs());

    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << n_ineq) {
        let active: Vec<usize> = (0..n_ineq).filter(|i| mask & (1 << i) != 0).collect();
        let k = n_eq + active.len();
        if k > n {
            continue;
        }
        let dim = n + k;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        rhs.rows_mut(0, n).copy_from(&(-c));
        let mut rows = Vec::with_capacity(k);
        for r in 0..n_eq {
            rows.push((e_mat.row(r).into_owned(), e_rhs[r]));
        }
        for &i in &active {
            rows.push((f_mat.row(i).into_owned(), f_rhs[i]));
        }
        for (j, (row, b)) in rows.iter().enumerate() {
            for col in 0..n {
                kkt[(n + j, col)] = row[col];
                kkt[(col, n + j)] = row[col];
            }
            rhs[n + j] = *b;
        }
        let lu = kkt.clone().lu();
        let Some(sol) = lu.solve(&rhs) else { continue };
        // Reject numerically singular systems (dependent active rows).
        if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        let u = sol.rows(0, n).into_owned();
        let mu = sol.rows(n + n_eq, active.len());
        if mu.iter().any(|&m| m < -tol) {
            continue;
        }
        if n_ineq > 0 && (f_mat * &u - f_rhs).max() > tol {
            continue;
        }
        if n_eq > 0 && (e_mat * &u - e_rhs).amax() > tol {
            continue;
        }
        let obj = problem.objective(&u);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, u));
        }
    }
    best.map(|(_, u)| u)
}

/// Random strictly convex QP with at most `max_vars` variables.
///
/// Feasible instances are built around a known interior point. With
/// `infeasible`, a pair of contradictory rows is appended.
pub fn random_qp<R: Rng>(rng: &mut R, max_vars: usize, infeasible: bool) -> QpProblem {
    let n = rng.random_range(1..=max_vars);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let hessian = m.transpose() * &m + DMatrix::identity(n, n) * rng.random_range(0.1..1.0);
    let linear = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let anchor = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));

    let n_eq = rng.random_range(0..n.min(3));
    let e = DMatrix::from_fn(n_eq, n, |_, _| rng.random_range(-1.0..1.0));
    let e_rhs = &e * &anchor;

    let n_ineq = rng.random_range(0..=8);
    let mut f = DMatrix::from_fn(n_ineq, n, |_, _| rng.random_range(-1.0..1.0));
    let mut f_rhs = &f * &anchor + DVector::from_fn(n_ineq, |_, _| rng.random_range(0.0..1.0));
    if infeasible {
        let row = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let level = row.dot(&anchor);
        let base = f.nrows();
        f = f.insert_rows(base, 2, 0.0);
        f_rhs = f_rhs.insert_rows(base, 2, 0.0);
        for j in 0..n {
            f[(base, j)] = row[j];
            f[(base + 1, j)] = -row[j];
        }
        // row·u <= level - 1 and row·u >= level + 1.
        f_rhs[base] = level - 1.0;
        f_rhs[base + 1] = -level - 1.0;
    }
    QpProblem::new(hessian, linear, e, e_rhs, f, f_rhs).expect("well-formed problem")
}
