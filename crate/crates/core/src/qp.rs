//! Dense strictly convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! min  ½ uᵀ H u + cᵀ u
//! s.t. E u  = e
//!      F u <= f
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani. The method starts
//! from the unconstrained minimizer and adds violated constraints one at a
//! time while keeping the iterate optimal for the current working set, so no
//! feasible starting point is needed and infeasibility is detected directly.
//!
//! Multipliers follow the convention `H u + c + Eᵀλ + Fᵀμ = 0`, `μ >= 0`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default KKT tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("hessian is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("problem data contains a non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Dense QP data. Construct with [`QpProblem::new`] to validate dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    eq_matrix: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    ineq_matrix: DMatrix<f64>,
    ineq_rhs: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        ineq_matrix: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = linear.len();
        let dim = |what, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(QpError::DimensionMismatch {
                    what,
                    expected,
                    found,
                })
            }
        };
        dim("hessian rows", n, hessian.nrows())?;
        dim("hessian columns", n, hessian.ncols())?;
        dim("equality columns", n, eq_matrix.ncols())?;
        dim("equality rhs", eq_matrix.nrows(), eq_rhs.len())?;
        dim("inequality columns", n, ineq_matrix.ncols())?;
        dim("inequality rhs", ineq_matrix.nrows(), ineq_rhs.len())?;

        for (name, finite) in [
            ("hessian", hessian.iter().all(|v| v.is_finite())),
            ("linear term", linear.iter().all(|v| v.is_finite())),
            ("equality matrix", eq_matrix.iter().all(|v| v.is_finite())),
            ("equality rhs", eq_rhs.iter().all(|v| v.is_finite())),
            ("inequality matrix", ineq_matrix.iter().all(|v| v.is_finite())),
            ("inequality rhs", ineq_rhs.iter().all(|v| v.is_finite())),
        ] {
            if !finite {
                return Err(QpError::NonFinite(name));
            }
        }

        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-8 {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(Self {
            hessian,
            linear,
            eq_matrix,
            eq_rhs,
            ineq_matrix,
            ineq_rhs,
        })
    }

    /// `min ½ uᵀu` subject to the given constraints.
    pub fn min_norm(
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        ineq_matrix: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = eq_matrix.ncols().max(ineq_matrix.ncols());
        Self::new(
            DMatrix::identity(n, n),
            DVector::zeros(n),
            eq_matrix,
            eq_rhs,
            ineq_matrix,
            ineq_rhs,
        )
    }

    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &DVector<f64> {
        &self.eq_rhs
    }

    pub fn ineq_matrix(&self) -> &DMatrix<f64> {
        &self.ineq_matrix
    }

    pub fn ineq_rhs(&self) -> &DVector<f64> {
        &self.ineq_rhs
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.hessian * u)) + self.linear.dot(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Lagrange multipliers for the equality (`λ`) and inequality (`μ`) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub equality: DVector<f64>,
    pub inequality: DVector<f64>,
}

/// Infinity-norm KKT residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖H u + c + Eᵀλ + Fᵀμ‖∞`
    pub stationarity: f64,
    /// `‖E u - e‖∞`
    pub primal_equality: f64,
    /// `max(0, max_i (F u - f)_i)`
    pub primal_inequality: f64,
    /// `max_i |μ_i (F u - f)_i|`
    pub complementarity: f64,
    /// `max(0, -min_i μ_i)`
    pub dual_feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.primal_equality,
            self.primal_inequality,
            self.complementarity,
            self.dual_feasibility,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Rows that admit no common solution.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct InfeasibilityCertificate {
    pub equality_rows: Vec<usize>,
    pub inequality_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: DVector<f64>,
    pub status: QpStatus,
    pub duals: Duals,
    pub kkt: KktResiduals,
    pub objective: f64,
    /// Inequality rows in the final working set.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub certificate: Option<InfeasibilityCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `10 · (n_vars + n_constraints)` when `None`.
    pub max_iter: Option<usize>,
    /// Inequality rows tried first when they are violated; changes the path,
    /// never the optimum.
    pub active_set_hint: Vec<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iter: None,
            active_set_hint: Vec::new(),
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Evaluates the KKT residuals of `u` with multipliers `duals`.
pub fn check_kkt(problem: &QpProblem, u: &DVector<f64>, duals: &Duals) -> KktResiduals {
    let mut grad = &problem.hessian * u + &problem.linear;
    grad.gemv_tr(1.0, &problem.eq_matrix, &duals.equality, 1.0);
    grad.gemv_tr(1.0, &problem.ineq_matrix, &duals.inequality, 1.0);

    let eq_res = &problem.eq_matrix * u - &problem.eq_rhs;
    let ineq_res = &problem.ineq_matrix * u - &problem.ineq_rhs;

    KktResiduals {
        stationarity: grad.amax(),
        primal_equality: eq_res.amax(),
        primal_inequality: ineq_res.iter().fold(0.0, |m, &r| m.max(r)),
        complementarity: ineq_res
            .iter()
            .zip(duals.inequality.iter())
            .fold(0.0, |m, (r, mu)| m.max((r * mu).abs())),
        dual_feasibility: duals.inequality.iter().fold(0.0, |m, &mu| m.max(-mu)),
    }
}

/// Solves the problem. Returns an error only for malformed data; infeasible
/// problems yield `QpStatus::Infeasible` with a certificate.
pub fn solve(problem: &QpProblem, options: &SolverOptions) -> Result<QpSolution, QpError> {
    let n = problem.n_vars();
    let chol = Cholesky::new(problem.hessian.clone()).ok_or(QpError::NotPositiveDefinite)?;
    if chol.l_dirty().diagonal().iter().any(|d| !(*d > 1e-12)) {
        return Err(QpError::NotPositiveDefinite);
    }
    let max_iter = options
        .max_iter
        .unwrap_or(10 * (n + problem.n_eq() + problem.n_ineq()));
    let mut state = DualActiveSet::new(problem, &chol, options.tol);
    let status = state.run(options, max_iter);
    Ok(state.finish(problem, status))
}

/// Working data of the dual active-set iteration.
///
/// Constraints are handled in the form `nᵀu >= b`: equality row `i` becomes
/// `σ_i E_i u >= σ_i e_i` with the sign `σ_i` chosen so the step length is
/// positive, and inequality row `i` becomes `-F_i u >= -f_i`.
struct DualActiveSet<'a> {
    problem: &'a QpProblem,
    n: usize,
    tol: f64,
    u: DVector<f64>,
    /// `J = L⁻ᵀ Qᵀ`; the first `active.len()` columns span the working set.
    j: DMatrix<f64>,
    /// Upper-triangular factor with `Jᵀ N_active = [R; 0]`.
    r: DMatrix<f64>,
    active: Vec<Constraint>,
    multipliers: Vec<f64>,
    eq_sign: Vec<f64>,
    iterations: usize,
    certificate: Option<InfeasibilityCertificate>,
    ineq_norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Constraint {
    Eq(usize),
    Ineq(usize),
}

enum StepOutcome {
    Added,
    Infeasible,
    OutOfIterations,
}

impl<'a> DualActiveSet<'a> {
    fn new(problem: &'a QpProblem, chol: &Cholesky<f64, nalgebra::Dyn>, tol: f64) -> Self {
        let n = problem.n_vars();
        let l = chol.l();
        // J = L⁻ᵀ: solve Lᵀ J = I.
        let j = l
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .expect("cholesky factor has a positive diagonal");
        let u = -chol.solve(&problem.linear);
        let ineq_norms = (0..problem.n_ineq())
            .map(|i| problem.ineq_matrix.row(i).norm())
            .collect();
        Self {
            problem,
            n,
            tol,
            u,
            j,
            r: DMatrix::zeros(n, n),
            active: Vec::new(),
            multipliers: Vec::new(),
            eq_sign: vec![1.0; problem.n_eq()],
            iterations: 0,
            certificate: None,
            ineq_norms,
        }
    }

    fn normal(&self, c: Constraint) -> DVector<f64> {
        match c {
            Constraint::Eq(i) => self.problem.eq_matrix.row(i).transpose() * self.eq_sign[i],
            Constraint::Ineq(i) => -self.problem.ineq_matrix.row(i).transpose(),
        }
    }

    /// `nᵀu - b` for the constraint in `>=` form.
    fn slack(&self, c: Constraint) -> f64 {
        match c {
            Constraint::Eq(i) => {
                self.eq_sign[i] * (self.problem.eq_matrix.row(i).dot(&self.u.transpose()) - self.problem.eq_rhs[i])
            }
            Constraint::Ineq(i) => {
                self.problem.ineq_rhs[i] - self.problem.ineq_matrix.row(i).dot(&self.u.transpose())
            }
        }
    }

    fn run(&mut self, options: &SolverOptions, max_iter: usize) -> QpStatus {
        // Rows with a zero normal cannot be moved by any step.
        for i in 0..self.problem.n_ineq() {
            if self.ineq_norms[i] == 0.0 && self.problem.ineq_rhs[i] < -self.tol {
                self.certificate = Some(InfeasibilityCertificate {
                    equality_rows: Vec::new(),
                    inequality_rows: vec![i],
                });
                return QpStatus::Infeasible;
            }
        }

        for i in 0..self.problem.n_eq() {
            let s = self.slack(Constraint::Eq(i));
            if s > 0.0 {
                self.eq_sign[i] = -1.0;
            }
            match self.add_constraint(Constraint::Eq(i), max_iter) {
                StepOutcome::Added => {}
                StepOutcome::Infeasible => return QpStatus::Infeasible,
                StepOutcome::OutOfIterations => return QpStatus::MaxIterations,
            }
        }

        let mut hinted = vec![false; self.problem.n_ineq()];
        for &h in &options.active_set_hint {
            if h < hinted.len() {
                hinted[h] = true;
            }
        }

        loop {
            let Some(p) = self.most_violated(&hinted) else {
                return QpStatus::Optimal;
            };
            match self.add_constraint(Constraint::Ineq(p), max_iter) {
                StepOutcome::Added => {}
                StepOutcome::Infeasible => return QpStatus::Infeasible,
                StepOutcome::OutOfIterations => return QpStatus::MaxIterations,
            }
        }
    }

    /// Picks the violated inequality with the largest scaled violation,
    /// preferring hinted rows and breaking ties by the smallest index.
    fn most_violated(&self, hinted: &[bool]) -> Option<usize> {
        let mut in_set = vec![false; self.problem.n_ineq()];
        for c in &self.active {
            if let Constraint::Ineq(i) = c {
                in_set[*i] = true;
            }
        }
        let residual = &self.problem.ineq_matrix * &self.u - &self.problem.ineq_rhs;
        let mut best: Option<(bool, f64, usize)> = None;
        for (i, &r) in residual.iter().enumerate() {
            if in_set[i] || r <= self.tol * 0.1 || self.ineq_norms[i] == 0.0 {
                continue;
            }
            let key = (hinted[i], r / self.ineq_norms[i], i);
            let better = match best {
                None => true,
                Some((bh, bv, _)) => (key.0 && !bh) || (key.0 == bh && key.1 > bv),
            };
            if better {
                best = Some(key);
            }
        }
        best.map(|(_, _, i)| i)
    }

    /// Moves primal and dual variables until `c` becomes active, dropping
    /// blocking inequalities on the way.
    fn add_constraint(&mut self, c: Constraint, max_iter: usize) -> StepOutcome {
        let normal = self.normal(c);
        let mut multiplier_c = 0.0;
        loop {
            if self.iterations >= max_iter {
                return StepOutcome::OutOfIterations;
            }
            self.iterations += 1;

            let q = self.active.len();
            let d = self.j.tr_mul(&normal);
            let z = self.j.columns(q, self.n - q) * d.rows(q, self.n - q);
            let r = if q > 0 {
                self.r
                    .view((0, 0), (q, q))
                    .solve_upper_triangular(&d.rows(0, q))
                    .expect("working-set factor is nonsingular")
            } else {
                DVector::zeros(0)
            };

            // Partial step: largest dual step keeping active inequality multipliers >= 0.
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, active) in self.active.iter().enumerate() {
                if matches!(active, Constraint::Ineq(_)) && r[k] > 0.0 {
                    let ratio = self.multipliers[k] / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }

            // Full step: distance along z until c becomes satisfied.
            let zn = z.dot(&normal);
            let scale = normal.norm().max(1.0);
            let t2 = if z.amax() > 1e-12 * scale && zn > 0.0 {
                -self.slack(c) / zn
            } else {
                f64::INFINITY
            };

            let t = t1.min(t2);
            if !t.is_finite() && matches!(c, Constraint::Eq(_)) && self.slack(c).abs() <= self.tol {
                // Consistent equality already implied by the working set.
                return StepOutcome::Added;
            }
            if !t.is_finite() {
                self.certificate = Some(self.certificate_with(c));
                return StepOutcome::Infeasible;
            }

            if t2.is_infinite() {
                // Dual-only step: c is linearly dependent on the working set.
                self.update_multipliers(&r, t);
                multiplier_c += t;
                let k = drop_at.expect("finite partial step has a blocking constraint");
                self.drop_constraint(k);
                continue;
            }

            self.u.axpy(t, &z, 1.0);
            self.update_multipliers(&r, t);
            multiplier_c += t;

            if t2 <= t1 {
                self.append(c, d, multiplier_c);
                return StepOutcome::Added;
            }
            let k = drop_at.expect("partial step has a blocking constraint");
            self.drop_constraint(k);
        }
    }

    fn update_multipliers(&mut self, r: &DVector<f64>, t: f64) {
        for (m, rk) in self.multipliers.iter_mut().zip(r.iter()) {
            *m -= t * rk;
        }
        // Clamp round-off on the blocking multiplier.
        for (m, c) in self.multipliers.iter_mut().zip(&self.active) {
            if matches!(c, Constraint::Ineq(_)) && *m < 0.0 {
                *m = 0.0;
            }
        }
    }

    fn certificate_with(&self, c: Constraint) -> InfeasibilityCertificate {
        let mut cert = InfeasibilityCertificate::default();
        for &a in self.active.iter().chain(std::iter::once(&c)) {
            match a {
                Constraint::Eq(i) => cert.equality_rows.push(i),
                Constraint::Ineq(i) => cert.inequality_rows.push(i),
            }
        }
        cert.equality_rows.sort_unstable();
        cert.inequality_rows.sort_unstable();
        cert
    }

    /// Adds `c` to the working set given `d = Jᵀ n_c`.
    fn append(&mut self, c: Constraint, mut d: DVector<f64>, multiplier: f64) {
        let q = self.active.len();
        // Rotate d[q+1..] into d[q], applying the same rotations to the columns of J.
        for k in (q + 1..self.n).rev() {
            let (a, b) = (d[k - 1], d[k]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (cos, sin) = (a / h, b / h);
            d[k - 1] = h;
            d[k] = 0.0;
            rotate_columns(&mut self.j, k - 1, k, cos, sin);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.active.push(c);
        self.multipliers.push(multiplier);
    }

    fn drop_constraint(&mut self, k: usize) {
        let q = self.active.len();
        self.active.remove(k);
        self.multipliers.remove(k);
        for col in k..q - 1 {
            for i in 0..=col + 1 {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..self.n {
            self.r[(i, q - 1)] = 0.0;
        }
        // R is now upper Hessenberg from column k on; restore triangular form.
        for col in k..q - 1 {
            let (a, b) = (self.r[(col, col)], self.r[(col + 1, col)]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (cos, sin) = (a / h, b / h);
            for c2 in col..q - 1 {
                let (x, y) = (self.r[(col, c2)], self.r[(col + 1, c2)]);
                self.r[(col, c2)] = cos * x + sin * y;
                self.r[(col + 1, c2)] = -sin * x + cos * y;
            }
            self.r[(col + 1, col)] = 0.0;
            rotate_columns(&mut self.j, col, col + 1, cos, sin);
        }
    }

    fn finish(self, problem: &QpProblem, status: QpStatus) -> QpSolution {
        let mut equality = DVector::zeros(problem.n_eq());
        let mut inequality = DVector::zeros(problem.n_ineq());
        let mut active_set = Vec::new();
        for (c, &m) in self.active.iter().zip(&self.multipliers) {
            match *c {
                Constraint::Eq(i) => equality[i] = -self.eq_sign[i] * m,
                Constraint::Ineq(i) => {
                    inequality[i] = m;
                    active_set.push(i);
                }
            }
        }
        active_set.sort_unstable();
        let duals = Duals {
            equality,
            inequality,
        };
        let kkt = check_kkt(problem, &self.u, &duals);
        QpSolution {
            objective: problem.objective(&self.u),
            u_star: self.u,
            status,
            duals,
            kkt,
            active_set,
            iterations: self.iterations,
            certificate: self.certificate,
        }
    }
}

/// Applies `[c -s; s c]` to columns `a` and `b` of `m`.
fn rotate_columns(m: &mut DMatrix<f64>, a: usize, b: usize, cos: f64, sin: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, a)], m[(i, b)]);
        m[(i, a)] = cos * x + sin * y;
        m[(i, b)] = -sin * x + cos * y;
    }
}
