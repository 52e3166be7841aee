//! Stochastic conservation-law dynamics of the interior road densities.
//!
//! At every step the outflow probabilities `p` and tendency fractions `q`
//! are resampled, and the interior density vector evolves as
//! `x[k+1] = A[k] x[k] + B s[k]` with `A = I - P + Q P`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{NodeId, NoirGraph, RoadClass};

/// Default upper bound of the uniform outflow-probability distribution.
pub const DEFAULT_P_MAX: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("p_max must lie in (0, 1), got {0}")]
    InvalidProbabilityBound(f64),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("boundary flow entry {index} is negative ({value})")]
    NegativeFlow { index: usize, value: f64 },
    #[error("contraction bound r must satisfy 0 <= r < 1, got {0}")]
    InvalidContraction(f64),
    #[error("z_max must be non-negative, got {0}")]
    InvalidInputBound(f64),
}

fn expect_dim(what: &'static str, expected: usize, found: usize) -> Result<(), DynamicsError> {
    if expected == found {
        Ok(())
    } else {
        Err(DynamicsError::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Interior densities at discrete time `step`, in interior node order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    pub densities: DVector<f64>,
    pub step: usize,
}

impl TrafficState {
    pub fn new(densities: DVector<f64>) -> Self {
        Self { densities, step: 0 }
    }

    pub fn zeros(n_interior: usize) -> Self {
        Self::new(DVector::zeros(n_interior))
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }
}

/// Per-interior-road outflow probabilities, the diagonal of `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutflowProbabilities {
    pub values: DVector<f64>,
}

impl OutflowProbabilities {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fraction of the outflow of `from` that is routed to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeFraction {
    pub from: NodeId,
    pub to: NodeId,
    pub fraction: f64,
}

/// Tendency fractions on every edge leaving a non-outlet road, plus the
/// interior-to-interior block `Q` with `Q[i][j]` the share of interior road
/// `j`'s outflow sent to interior road `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TendencyFractions {
    pub edges: Vec<EdgeFraction>,
    pub interior: DMatrix<f64>,
}

impl TendencyFractions {
    /// Builds the fractions from an explicit interior block; `edges` is left empty.
    pub fn from_interior(interior: DMatrix<f64>) -> Self {
        Self {
            edges: Vec::new(),
            interior,
        }
    }
}

/// Inlet inflows followed by outlet outflows, all non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlow {
    pub values: DVector<f64>,
}

impl BoundaryFlow {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_boundary: usize) -> Self {
        Self::new(DVector::zeros(n_boundary))
    }

    pub fn inflow_total(&self, n_in: usize) -> f64 {
        self.values.rows(0, n_in).sum()
    }

    pub fn outflow_total(&self, n_in: usize) -> f64 {
        self.values.rows(n_in, self.values.len() - n_in).sum()
    }
}

/// Draws `p` and `q` for one step.
///
/// `p_i` is uniform on `[0, p_max)` for roads with non-zero density and zero
/// otherwise. For every non-outlet road the fractions over its out-neighbors
/// are a uniform sample from the simplex (Dirichlet with unit weights).
pub fn sample_matrices<R: Rng + ?Sized>(
    rng: &mut R,
    graph: &NoirGraph,
    state: &TrafficState,
    p_max: f64,
) -> Result<(OutflowProbabilities, TendencyFractions), DynamicsError> {
    if !(p_max > 0.0 && p_max < 1.0) {
        return Err(DynamicsError::InvalidProbabilityBound(p_max));
    }
    let n = graph.n_interior();
    expect_dim("state", n, state.len())?;

    let p = DVector::from_iterator(
        n,
        state.densities.iter().map(|&rho| {
            // Drawn unconditionally so the stream does not depend on which roads are empty.
            let draw = rng.random::<f64>() * p_max;
            if rho == 0.0 {
                0.0
            } else {
                draw
            }
        }),
    );

    let n_boundary = graph.n_boundary();
    let mut edges = Vec::with_capacity(graph.edges().len());
    let mut interior = DMatrix::zeros(n, n);
    let mut weights = Vec::new();
    for k in 0..graph.n_total() {
        if graph.class_at(k) == RoadClass::Outlet {
            continue;
        }
        let outs = graph.out_at(k);
        if outs.is_empty() {
            continue;
        }
        weights.clear();
        if outs.len() == 1 {
            weights.push(1.0);
        } else {
            weights.extend((0..outs.len()).map(|_| rng.sample::<f64, _>(Exp1)));
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        let from = NodeId(k + 1);
        for (&to, &fraction) in outs.iter().zip(&weights) {
            edges.push(EdgeFraction { from, to, fraction });
            if from.get() > n_boundary && to.get() > n_boundary {
                interior[(to.get() - n_boundary - 1, k - n_boundary)] = fraction;
            }
        }
    }

    Ok((
        OutflowProbabilities::new(p),
        TendencyFractions { edges, interior },
    ))
}

/// `A = I - P + Q P` with `P = diag(p)`.
pub fn assemble_a(
    p: &OutflowProbabilities,
    q: &TendencyFractions,
) -> Result<DMatrix<f64>, DynamicsError> {
    let n = p.len();
    expect_dim("Q rows", n, q.interior.nrows())?;
    expect_dim("Q columns", n, q.interior.ncols())?;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let pj = p.values[j];
        for i in 0..n {
            a[(i, j)] = q.interior[(i, j)] * pj;
        }
        a[(j, j)] += 1.0 - pj;
    }
    Ok(a)
}

/// Constant input map: `+1` where an inlet feeds the interior road, `-1`
/// where the interior road feeds an outlet.
pub fn assemble_b(graph: &NoirGraph) -> DMatrix<f64> {
    let n_boundary = graph.n_boundary();
    let mut b = DMatrix::zeros(graph.n_interior(), n_boundary);
    for (row, node) in graph.interior_nodes().enumerate() {
        let k = node.get() - 1;
        for j in graph.in_at(k) {
            if graph.class_at(j.get() - 1) == RoadClass::Inlet {
                b[(row, j.get() - 1)] = 1.0;
            }
        }
        for j in graph.out_at(k) {
            if graph.class_at(j.get() - 1) == RoadClass::Outlet {
                b[(row, j.get() - 1)] = -1.0;
            }
        }
    }
    b
}

/// Advances the state by one step: `A x + B s`. No clamping is applied.
pub fn step(
    state: &TrafficState,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    s: &BoundaryFlow,
) -> Result<TrafficState, DynamicsError> {
    let n = state.len();
    expect_dim("A rows", n, a.nrows())?;
    expect_dim("A columns", n, a.ncols())?;
    expect_dim("B rows", n, b.nrows())?;
    expect_dim("boundary flow", b.ncols(), s.values.len())?;
    if let Some((index, &value)) = s.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(DynamicsError::NegativeFlow { index, value });
    }
    let mut next = a * &state.densities;
    next.gemv(1.0, b, &s.values, 1.0);
    Ok(TrafficState {
        densities: next,
        step: state.step + 1,
    })
}

/// Interior network inflow `y = Q P x` and outflow `z = P x`.
pub fn flows(
    state: &TrafficState,
    p: &OutflowProbabilities,
    q: &TendencyFractions,
) -> Result<(DVector<f64>, DVector<f64>), DynamicsError> {
    let n = state.len();
    expect_dim("p", n, p.len())?;
    expect_dim("Q rows", n, q.interior.nrows())?;
    expect_dim("Q columns", n, q.interior.ncols())?;
    let z = p.values.component_mul(&state.densities);
    let y = &q.interior * &z;
    Ok((y, z))
}

/// Column-compressed non-negative matrix used by the iterative estimators.
#[derive(Debug, Clone)]
pub(crate) struct SparseColumns {
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseColumns {
    pub(crate) fn from_dense(a: &DMatrix<f64>) -> Self {
        let cols = (0..a.ncols())
            .map(|j| {
                a.column(j)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect()
            })
            .collect();
        Self { n: a.nrows(), cols }
    }

    /// `out = A v`.
    fn mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, col) in self.cols.iter().enumerate() {
            let vj = v[j];
            if vj != 0.0 {
                for &(i, a) in col {
                    out[i] += a * vj;
                }
            }
        }
    }

    /// `out = vᵀ A` (as a column).
    fn mul_left(&self, v: &[f64], out: &mut [f64]) {
        for (j, col) in self.cols.iter().enumerate() {
            out[j] = col.iter().map(|&(i, a)| v[i] * a).sum();
        }
    }
}

/// Power-iteration estimate of the spectral radius of a non-negative matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// Growth ratio `‖A v‖₁ / ‖v‖₁` of the last iterate.
    pub estimate: f64,
    /// Collatz–Wielandt bound `max_i (A v)_i / v_i`; always `>= ρ(A)`.
    pub upper_bound: f64,
    pub iterations: usize,
}

/// Power iteration from the all-ones vector until the estimate and the
/// Collatz–Wielandt upper bound agree to within `tol` or `max_iter` is reached.
///
/// The matrix should have a positive diagonal so iterates stay strictly
/// positive; zero components are skipped in the upper bound.
pub fn spectral_radius(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> SpectralEstimate {
    power_iteration(a, tol, max_iter, false)
}

/// Like [`spectral_radius`] but stops as soon as the upper bound certifies a
/// radius below one.
pub fn certify_radius_below_one(a: &DMatrix<f64>, max_iter: usize) -> SpectralEstimate {
    power_iteration(a, 1e-12, max_iter, true)
}

fn power_iteration(a: &DMatrix<f64>, tol: f64, max_iter: usize, stop_below_one: bool) -> SpectralEstimate {
    let n = a.nrows();
    if n == 0 {
        return SpectralEstimate {
            estimate: 0.0,
            upper_bound: 0.0,
            iterations: 0,
        };
    }
    let sparse = SparseColumns::from_dense(a);
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut result = SpectralEstimate {
        estimate: f64::INFINITY,
        upper_bound: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter.max(1) {
        sparse.mul(&v, &mut w);
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        let upper = v
            .iter()
            .zip(&w)
            .filter(|(vi, _)| **vi > 0.0)
            .map(|(vi, wi)| wi / vi)
            .fold(0.0_f64, f64::max);
        result = SpectralEstimate {
            estimate: norm,
            upper_bound: upper,
            iterations: it,
        };
        if norm == 0.0 || (stop_below_one && upper < 1.0) || upper - norm <= tol {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / norm);
    }
    result
}

/// Result of checking the structural properties of an assembled `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateMatrixReport {
    /// `(row, column)` of entries below `-tol` (0-based interior indices).
    pub negative_entries: Vec<(usize, usize)>,
    pub column_sums: Vec<f64>,
    /// Interior nodes whose column sum breaks the expected case: one when the
    /// road feeds no outlet, strictly inside `(0, 1)` when it does and `p > 0`.
    pub column_sum_violations: Vec<NodeId>,
    /// `None` when some column has no chain of positive entries leading to a
    /// column with deficit, in which case the radius may legitimately be one.
    pub spectral: Option<SpectralEstimate>,
}

impl StateMatrixReport {
    pub fn spectral_radius_below_one(&self) -> Option<bool> {
        self.spectral.map(|s| s.upper_bound < 1.0)
    }

    pub fn passed(&self) -> bool {
        self.negative_entries.is_empty()
            && self.column_sum_violations.is_empty()
            && self.spectral_radius_below_one().unwrap_or(true)
    }
}

/// Verifies non-negativity, the column-sum cases and the spectral radius of `A`.
pub fn verify_a_properties(
    a: &DMatrix<f64>,
    graph: &NoirGraph,
    tol: f64,
) -> Result<StateMatrixReport, DynamicsError> {
    let n = graph.n_interior();
    expect_dim("A rows", n, a.nrows())?;
    expect_dim("A columns", n, a.ncols())?;

    let mut negative_entries = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if a[(i, j)] < -tol {
                negative_entries.push((i, j));
            }
        }
    }

    let column_sums: Vec<f64> = (0..n).map(|j| a.column(j).sum()).collect();
    let mut column_sum_violations = Vec::new();
    let mut deficit = vec![false; n];
    for (j, &sum) in column_sums.iter().enumerate() {
        let node = graph.interior_node(j);
        // Q has a zero diagonal, so the diagonal of A is exactly 1 - p.
        let p = 1.0 - a[(j, j)];
        let ok = if graph.feeds_outlet(node) && p > 0.0 {
            deficit[j] = true;
            sum > 0.0 && sum < 1.0
        } else {
            (sum - 1.0).abs() <= tol
        };
        if !ok {
            column_sum_violations.push(node);
        }
    }

    let spectral = drains_to_deficit(a, &deficit).then(|| certify_radius_below_one(a, 200_000));

    Ok(StateMatrixReport {
        negative_entries,
        column_sums,
        column_sum_violations,
        spectral,
    })
}

/// True if every column reaches a deficit column through positive off-diagonal
/// entries (`j -> i` whenever `A[i][j] > 0`).
fn drains_to_deficit(a: &DMatrix<f64>, deficit: &[bool]) -> bool {
    let n = a.nrows();
    let mut reached = deficit.to_vec();
    let mut queue: Vec<usize> = (0..n).filter(|&j| deficit[j]).collect();
    // Walk edges backwards from deficit columns: column j reaches i if A[i][j] > 0.
    while let Some(i) = queue.pop() {
        for j in 0..n {
            if !reached[j] && j != i && a[(i, j)] > 0.0 {
                reached[j] = true;
                queue.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// Bound on `xᵀx` for bounded inputs: `z_max² · n_interior / (1 - r)`.
pub fn bibo_bound(z_max: f64, n_interior: usize, r: f64) -> Result<f64, DynamicsError> {
    if !(z_max >= 0.0) {
        return Err(DynamicsError::InvalidInputBound(z_max));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(DynamicsError::InvalidContraction(r));
    }
    Ok(z_max * z_max * n_interior as f64 / (1.0 - r))
}

/// Contraction estimate of a realized sequence of non-negative state matrices.
///
/// With `Γ(k, h) = A[k-1] ⋯ A[k-h]` and `Γ(k, 0) = I`, the state satisfies
/// `x[k] = Γ(k, k) x[0] + Σ_h Γ(k, h) w[k-1-h]`. Bounding every spectral norm by
/// `sqrt(‖Γ‖₁ ‖Γ‖∞)` gives `‖x[k]‖₂ ≤ sqrt(n) z_max S` where `S` is the largest
/// accumulated gain over `k`. The returned `r = 1 - 1/S²` makes
/// [`bibo_bound`] a valid bound on every `‖x[k]‖²` of the run.
pub fn contraction_estimate(matrices: &[DMatrix<f64>]) -> f64 {
    let sparse: Vec<SparseColumns> = matrices.iter().map(SparseColumns::from_dense).collect();
    let gain = accumulated_gain(&sparse);
    1.0 - 1.0 / (gain * gain)
}

pub(crate) fn accumulated_gain(matrices: &[SparseColumns]) -> f64 {
    let steps = matrices.len();
    if steps == 0 {
        return 1.0;
    }
    let n = matrices[0].n;
    // row_norm[k][h] = ‖Γ(k, h)‖∞ for h >= 1, filled by sweeping each start index forwards.
    let mut row_norm = vec![Vec::new(); steps + 1];
    for (k, row) in row_norm.iter_mut().enumerate() {
        *row = vec![1.0; k + 1];
    }
    let mut u = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for start in 0..steps {
        u.iter_mut().for_each(|x| *x = 1.0);
        for end in start + 1..=steps {
            matrices[end - 1].mul(&u, &mut tmp);
            std::mem::swap(&mut u, &mut tmp);
            row_norm[end][end - start] = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        }
    }

    let mut best = 1.0_f64;
    for k in 1..=steps {
        u.iter_mut().for_each(|x| *x = 1.0);
        let mut total = 1.0;
        for h in 1..=k {
            matrices[k - h].mul_left(&u, &mut tmp);
            std::mem::swap(&mut u, &mut tmp);
            let col_norm = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            total += (col_norm * row_norm[k][h]).sqrt();
        }
        best = best.max(total);
    }
    best
}
