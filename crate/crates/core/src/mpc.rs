//! Receding-horizon boundary control.
//!
//! The state matrix sampled at time `k` is frozen over the horizon, giving
//! the condensed prediction `X = G x + H U` with `G = [A; A²; …; A^N]` and
//! `H` lower block-Toeplitz with blocks `A^{r-c} B`. The stacked boundary
//! flows `U` minimize `½ UᵀU` subject to non-negativity, road capacities and
//! a per-step crossing budget `d0`. Only the first block of `U*` is applied.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    assemble_a, assemble_b, BoundaryFlow, DynamicsError, OutflowProbabilities, TendencyFractions,
    TrafficState,
};
use crate::graph::NoirGraph;
use crate::qp::{self, InfeasibilityCertificate, KktResiduals, QpError, QpProblem, QpStatus, SolverOptions};

/// Default prediction horizon.
pub const DEFAULT_HORIZON: usize = 5;
/// Bisection iterations used to relax the crossing budget after infeasibility.
pub const FALLBACK_BISECTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("crossing budget d0 must be positive, got {0}")]
    InvalidBudget(f64),
    #[error("capacity of interior road #{index} must be positive, got {value}")]
    InvalidCapacity { index: usize, value: f64 },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no feasible boundary flow exists even with a zero crossing budget")]
    Infeasible { certificate: InfeasibilityCertificate },
    #[error("QP solver hit its iteration limit (max KKT residual {0:e})")]
    NotConverged(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Number of prediction steps, at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Horizon(usize);

impl Horizon {
    pub fn new(steps: usize) -> Result<Self, MpcError> {
        if steps == 0 {
            Err(MpcError::InvalidHorizon)
        } else {
            Ok(Self(steps))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Self(DEFAULT_HORIZON)
    }
}

impl TryFrom<usize> for Horizon {
    type Error = MpcError;

    fn try_from(steps: usize) -> Result<Self, Self::Error> {
        Self::new(steps)
    }
}

impl From<Horizon> for usize {
    fn from(h: Horizon) -> usize {
        h.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Vehicles allowed to cross the boundary per step.
    pub d0: f64,
    /// Interior road capacities in state order.
    pub x_max: DVector<f64>,
    pub horizon: Horizon,
    /// Also require predicted densities to stay non-negative.
    pub enforce_density_lower_bound: bool,
    pub solver: SolverOptions,
}

impl MpcConfig {
    pub fn new(d0: f64, x_max: DVector<f64>, horizon: Horizon) -> Result<Self, MpcError> {
        let cfg = Self {
            d0,
            x_max,
            horizon,
            enforce_density_lower_bound: false,
            solver: SolverOptions::default(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), MpcError> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(MpcError::InvalidBudget(self.d0));
        }
        if let Some((index, &value)) = self
            .x_max
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(MpcError::InvalidCapacity { index, value });
        }
        Ok(())
    }
}

/// Condensed prediction `X = G x + H U`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub horizon: Horizon,
}

impl PredictionMatrices {
    pub fn n_state(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_input(&self) -> usize {
        self.h.ncols() / self.horizon.get()
    }

    /// Stacked states `[x[k+1]; …; x[k+N]]`.
    pub fn predict(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.g * x;
        out.gemv(1.0, &self.h, u, 1.0);
        out
    }
}

/// Builds `G` and `H` with `A` frozen across the horizon.
pub fn build_prediction(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    horizon: Horizon,
) -> Result<PredictionMatrices, MpcError> {
    let n = a.nrows();
    let dim = |what, expected, found| {
        if expected == found {
            Ok(())
        } else {
            Err(MpcError::DimensionMismatch {
                what,
                expected,
                found,
            })
        }
    };
    dim("A columns", n, a.ncols())?;
    dim("B rows", n, b.nrows())?;
    let m = b.ncols();
    let steps = horizon.get();

    let mut g = DMatrix::zeros(steps * n, n);
    let mut h = DMatrix::zeros(steps * n, steps * m);
    // power = A^r, a_pow_b = A^r B
    let mut power = a.clone();
    let mut a_pow_b = b.clone();
    for r in 0..steps {
        g.view_mut((r * n, 0), (n, n)).copy_from(&power);
        for c in 0..steps - r {
            h.view_mut(((r + c) * n, c * m), (n, m)).copy_from(&a_pow_b);
        }
        if r + 1 < steps {
            power = a * &power;
            a_pow_b = a * &a_pow_b;
        }
    }
    Ok(PredictionMatrices { g, h, horizon })
}

/// Assembles the stacked QP:
///
/// ```text
/// min ½ UᵀU
/// s.t. (I_N ⊗ 1ᵀ) U = d0 1
///      -U <= 0
///      H U <= 1 ⊗ x_max - G x
///      -H U <= G x              (only with the density lower bound)
/// ```
pub fn build_qp(
    prediction: &PredictionMatrices,
    state: &TrafficState,
    cfg: &MpcConfig,
) -> Result<QpProblem, MpcError> {
    build_qp_with(prediction, state, cfg, cfg.d0, false)
}

/// With `clip`, capacity rows already violated by the free response `G x`
/// get the bound `H U <= 0`: boundary flows may not add to an overfull road
/// but are not required to repair it.
fn build_qp_with(
    prediction: &PredictionMatrices,
    state: &TrafficState,
    cfg: &MpcConfig,
    d0: f64,
    clip: bool,
) -> Result<QpProblem, MpcError> {
    let n = prediction.n_state();
    let m = prediction.n_input();
    let steps = prediction.horizon.get();
    if cfg.x_max.len() != n {
        return Err(MpcError::DimensionMismatch {
            what: "capacity vector",
            expected: n,
            found: cfg.x_max.len(),
        });
    }
    if state.len() != n {
        return Err(MpcError::DimensionMismatch {
            what: "state",
            expected: n,
            found: state.len(),
        });
    }
    let n_vars = steps * m;

    let mut eq = DMatrix::zeros(steps, n_vars);
    for r in 0..steps {
        eq.view_mut((r, r * m), (1, m)).fill(1.0);
    }
    let eq_rhs = DVector::from_element(steps, d0);

    let free = prediction.g.clone() * &state.densities;
    let lower = cfg.enforce_density_lower_bound;
    let rows = n_vars + steps * n * if lower { 2 } else { 1 };
    let mut ineq = DMatrix::zeros(rows, n_vars);
    let mut rhs = DVector::zeros(rows);
    for i in 0..n_vars {
        ineq[(i, i)] = -1.0;
    }
    ineq.view_mut((n_vars, 0), (steps * n, n_vars)).copy_from(&prediction.h);
    for r in 0..steps * n {
        let slack = cfg.x_max[r % n] - free[r];
        rhs[n_vars + r] = if clip { slack.max(0.0) } else { slack };
    }
    if lower {
        let base = n_vars + steps * n;
        ineq.view_mut((base, 0), (steps * n, n_vars))
            .copy_from(&(-&prediction.h));
        rhs.rows_mut(base, steps * n).copy_from(&free);
    }

    Ok(QpProblem::min_norm(eq, eq_rhs, ineq, rhs)?)
}

/// How the applied boundary flow was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlStatus {
    Optimal,
    /// Some roads were predicted over capacity regardless of the boundary
    /// flows; their bounds were clipped to forbid added inflow.
    Clipped,
    /// The clipped problem was still infeasible; the budget was reduced to the
    /// largest feasible value found by bisection.
    Relaxed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDiagnostics {
    pub status: ControlStatus,
    pub d0_applied: f64,
    pub cost: f64,
    pub kkt: KktResiduals,
    pub active_set_size: usize,
    pub iterations: usize,
    /// `max(0, max(x̂ - x_max))` over the predicted horizon.
    pub predicted_capacity_violation: f64,
    /// `max(0, -min x̂)` over the predicted horizon.
    pub predicted_negativity: f64,
    /// Certificate of the original problem when it was infeasible.
    pub certificate: Option<InfeasibilityCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub flow: BoundaryFlow,
    pub stacked: DVector<f64>,
    pub diagnostics: ControlDiagnostics,
}

/// Boundary controller for one network.
#[derive(Debug, Clone)]
pub struct Controller {
    b: DMatrix<f64>,
    cfg: MpcConfig,
}

impl Controller {
    pub fn new(graph: &NoirGraph, cfg: MpcConfig) -> Result<Self, MpcError> {
        cfg.check()?;
        if cfg.x_max.len() != graph.n_interior() {
            return Err(MpcError::DimensionMismatch {
                what: "capacity vector",
                expected: graph.n_interior(),
                found: cfg.x_max.len(),
            });
        }
        Ok(Self {
            b: assemble_b(graph),
            cfg,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Computes the boundary flow to apply at the current step from the
    /// sampled `p` and `q`.
    pub fn control(
        &self,
        state: &TrafficState,
        p: &OutflowProbabilities,
        q: &TendencyFractions,
    ) -> Result<ControlOutput, MpcError> {
        let a = assemble_a(p, q)?;
        self.control_with_a(state, &a)
    }

    pub fn control_with_a(&self, state: &TrafficState, a: &DMatrix<f64>) -> Result<ControlOutput, MpcError> {
        let prediction = build_prediction(a, &self.b, self.cfg.horizon)?;
        let full = self.solve(&prediction, state, self.cfg.d0, false)?;
        let (sol, status, d0_applied, certificate) = match full.status {
            QpStatus::Optimal => (full, ControlStatus::Optimal, self.cfg.d0, None),
            QpStatus::MaxIterations => return Err(MpcError::NotConverged(full.kkt.max())),
            QpStatus::Infeasible => {
                let certificate = full.certificate.clone();
                let clipped = self.solve(&prediction, state, self.cfg.d0, true)?;
                match clipped.status {
                    QpStatus::Optimal => (clipped, ControlStatus::Clipped, self.cfg.d0, certificate),
                    QpStatus::MaxIterations => return Err(MpcError::NotConverged(clipped.kkt.max())),
                    QpStatus::Infeasible => {
                        let (d0, sol) = self.relax_budget(&prediction, state)?;
                        (sol, ControlStatus::Relaxed, d0, certificate)
                    }
                }
            }
        };

        let predicted = prediction.predict(&state.densities, &sol.u_star);
        let n = prediction.n_state();
        let mut predicted_capacity_violation = 0.0_f64;
        let mut predicted_negativity = 0.0_f64;
        for (r, &v) in predicted.iter().enumerate() {
            predicted_capacity_violation = predicted_capacity_violation.max(v - self.cfg.x_max[r % n]);
            predicted_negativity = predicted_negativity.max(-v);
        }

        let m = self.b.ncols();
        // The solver may return -1e-17 style round-off on inactive bounds.
        let first = sol.u_star.rows(0, m).map(|v| v.max(0.0));
        Ok(ControlOutput {
            flow: BoundaryFlow::new(first),
            diagnostics: ControlDiagnostics {
                status,
                d0_applied,
                cost: sol.objective,
                kkt: sol.kkt,
                active_set_size: sol.active_set.len(),
                iterations: sol.iterations,
                predicted_capacity_violation: predicted_capacity_violation.max(0.0),
                predicted_negativity: predicted_negativity.max(0.0),
                certificate,
            },
            stacked: sol.u_star,
        })
    }

    fn solve(
        &self,
        prediction: &PredictionMatrices,
        state: &TrafficState,
        d0: f64,
        clip: bool,
    ) -> Result<qp::QpSolution, MpcError> {
        let problem = build_qp_with(prediction, state, &self.cfg, d0, clip)?;
        Ok(qp::solve(&problem, &self.cfg.solver)?)
    }

    /// Largest budget in `[0, d0]` found feasible by bisection on the clipped
    /// problem.
    fn relax_budget(
        &self,
        prediction: &PredictionMatrices,
        state: &TrafficState,
    ) -> Result<(f64, qp::QpSolution), MpcError> {
        let mut best = self.solve(prediction, state, 0.0, true)?;
        match best.status {
            QpStatus::Optimal => {}
            QpStatus::MaxIterations => return Err(MpcError::NotConverged(best.kkt.max())),
            QpStatus::Infeasible => {
                return Err(MpcError::Infeasible {
                    certificate: best.certificate.unwrap_or_default(),
                })
            }
        }
        let (mut lo, mut hi) = (0.0, self.cfg.d0);
        for _ in 0..FALLBACK_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let sol = self.solve(prediction, state, mid, true)?;
            if sol.status == QpStatus::Optimal {
                lo = mid;
                best = sol;
            } else {
                hi = mid;
            }
        }
        Ok((lo, best))
    }
}

/// One-shot controller evaluation for the given graph, state and samples.
pub fn control_step(
    graph: &NoirGraph,
    state: &TrafficState,
    p: &OutflowProbabilities,
    q: &TendencyFractions,
    cfg: &MpcConfig,
) -> Result<(BoundaryFlow, ControlDiagnostics), MpcError> {
    let out = Controller::new(graph, cfg.clone())?.control(state, p, q)?;
    Ok((out.flow, out.diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step;
    use crate::graph::{NodeSpec, RoadClass};
    use nalgebra::{dmatrix, dvector};

    fn minimal() -> NoirGraph {
        NoirGraph::build(
            &[
                NodeSpec::boundary(RoadClass::Inlet),
                NodeSpec::boundary(RoadClass::Outlet),
                NodeSpec::interior(100.0, 1),
            ],
            &[(1, 3), (3, 2)],
        )
        .unwrap()
    }

    #[test]
    fn single_step_horizon() {
        let a = dmatrix![0.5, 0.5; 0.0, 0.5];
        let b = dmatrix![1.0, 0.0; 0.0, -1.0];
        let pm = build_prediction(&a, &b, Horizon::new(1).unwrap()).unwrap();
        assert_eq!(pm.g, a);
        assert_eq!(pm.h, b);
        assert!(Horizon::new(0).is_err());
    }

    #[test]
    fn identity_dynamics_repeat_b() {
        let b = dmatrix![1.0, -1.0; 0.0, 1.0];
        let pm = build_prediction(&DMatrix::identity(2, 2), &b, Horizon::new(4).unwrap()).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let block = pm.h.view((2 * r, 2 * c), (2, 2));
                if c <= r {
                    assert_eq!(block, b);
                } else {
                    assert_eq!(block, DMatrix::<f64>::zeros(2, 2));
                }
            }
        }
    }

    #[test]
    fn prediction_matches_iteration() {
        let a = dmatrix![0.5, 0.5; 0.0, 0.5];
        let b = dmatrix![0.0, -1.0; 1.0, 0.0];
        let pm = build_prediction(&a, &b, Horizon::new(3).unwrap()).unwrap();
        let x0 = dvector![4.0, 2.0];
        let u = dvector![1.0, 0.5, 2.0, 0.25, 0.0, 3.0];
        let stacked = pm.predict(&x0, &u);
        let mut x = TrafficState::new(x0);
        for r in 0..3 {
            let s = BoundaryFlow::new(u.rows(2 * r, 2).into_owned());
            x = step(&x, &a, &b, &s).unwrap();
            assert!((stacked.rows(2 * r, 2) - &x.densities).amax() < 1e-12);
        }
    }

    #[test]
    fn minimum_norm_single_step() {
        let g = minimal();
        let cfg = MpcConfig::new(100.0, dvector![1e6], Horizon::new(1).unwrap()).unwrap();
        let p = OutflowProbabilities::new(dvector![0.3]);
        let q = TendencyFractions::from_interior(DMatrix::zeros(1, 1));
        let (s, diag) = control_step(&g, &TrafficState::new(dvector![10.0]), &p, &q, &cfg).unwrap();
        assert!((&s.values - dvector![50.0, 50.0]).amax() < 1e-9);
        assert_eq!(diag.status, ControlStatus::Optimal);
        assert!((diag.cost - 2500.0).abs() < 1e-6);
    }

    #[test]
    fn horizon_rows_each_sum_to_budget() {
        let g = minimal();
        let cfg = MpcConfig::new(100.0, dvector![1e6], Horizon::new(3).unwrap()).unwrap();
        let controller = Controller::new(&g, cfg).unwrap();
        let out = controller
            .control_with_a(&TrafficState::new(dvector![5.0]), &dmatrix![0.8])
            .unwrap();
        for r in 0..3 {
            assert!((out.stacked.rows(2 * r, 2).sum() - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn capacity_limits_inflow() {
        // x' = 0.5 * 40 + u - v <= 30 forces u - v <= 10 with u + v = 100.
        let g = minimal();
        let cfg = MpcConfig::new(100.0, dvector![30.0], Horizon::new(1).unwrap()).unwrap();
        let controller = Controller::new(&g, cfg).unwrap();
        let out = controller
            .control_with_a(&TrafficState::new(dvector![40.0]), &dmatrix![0.5])
            .unwrap();
        assert!((&out.flow.values - dvector![50.0, 50.0]).amax() < 1e-9);

        let tight = MpcConfig::new(100.0, dvector![15.0], Horizon::new(1).unwrap()).unwrap();
        let out = Controller::new(&g, tight)
            .unwrap()
            .control_with_a(&TrafficState::new(dvector![40.0]), &dmatrix![0.5])
            .unwrap();
        // u - v <= -5 and u + v = 100: u = 47.5, v = 52.5.
        assert!((&out.flow.values - dvector![47.5, 52.5]).amax() < 1e-9);
    }

    #[test]
    fn infeasible_budget_is_relaxed() {
        // Road 3: 0.5 * 20 + u <= 30 gives u <= 20.
        // Road 4: 0.5 * 20 + 10 - v >= 0 gives v <= 20.
        // So u + v <= 40 and d0 = 100 is infeasible.
        let g = NoirGraph::build(
            &[
                NodeSpec::boundary(RoadClass::Inlet),
                NodeSpec::boundary(RoadClass::Outlet),
                NodeSpec::interior(100.0, 1),
                NodeSpec::interior(100.0, 1),
            ],
            &[(1, 3), (3, 4), (4, 2)],
        )
        .unwrap();
        let mut cfg = MpcConfig::new(100.0, dvector![30.0, 1e6], Horizon::new(1).unwrap()).unwrap();
        cfg.enforce_density_lower_bound = true;
        let out = Controller::new(&g, cfg)
            .unwrap()
            .control_with_a(&TrafficState::new(dvector![20.0, 10.0]), &dmatrix![0.5, 0.0; 0.5, 1.0])
            .unwrap();
        let d0 = out.diagnostics.d0_applied;
        assert_eq!(out.diagnostics.status, ControlStatus::Relaxed);
        assert!(d0 <= 40.0 && d0 > 40.0 - 100.0 / 256.0, "{d0}");
        assert!((out.flow.values.sum() - d0).abs() < 1e-9);
        assert!(out.diagnostics.certificate.is_some());
    }

    #[test]
    fn overfull_road_is_clipped() {
        // x' = 40 + u - v <= 15 would need v >= 25 > d0; clipped to u - v <= 0.
        let g = minimal();
        let cfg = MpcConfig::new(10.0, dvector![15.0], Horizon::new(1).unwrap()).unwrap();
        let out = Controller::new(&g, cfg)
            .unwrap()
            .control_with_a(&TrafficState::new(dvector![40.0]), &dmatrix![1.0])
            .unwrap();
        assert_eq!(out.diagnostics.status, ControlStatus::Clipped);
        assert_eq!(out.diagnostics.d0_applied, 10.0);
        assert!((&out.flow.values - dvector![5.0, 5.0]).amax() < 1e-9);
        assert!((out.diagnostics.predicted_capacity_violation - 25.0).abs() < 1e-9);
        assert!(out.diagnostics.certificate.is_some());
    }

    #[test]
    fn uncontrollable_overflow_is_reported() {
        // Road 4 has no boundary neighbor and is already over capacity.
        let g = NoirGraph::build(
            &[
                NodeSpec::boundary(RoadClass::Inlet),
                NodeSpec::boundary(RoadClass::Outlet),
                NodeSpec::interior(100.0, 1),
                NodeSpec::interior(100.0, 1),
                NodeSpec::interior(100.0, 1),
            ],
            &[(1, 3), (3, 4), (4, 5), (5, 2)],
        )
        .unwrap();
        let cfg = MpcConfig::new(100.0, dvector![1e6, 10.0, 1e6], Horizon::new(1).unwrap()).unwrap();
        let controller = Controller::new(&g, cfg.clone()).unwrap();
        let state = TrafficState::new(dvector![0.0, 20.0, 0.0]);
        let a = DMatrix::identity(3, 3);
        let out = controller.control_with_a(&state, &a).unwrap();
        assert_eq!(out.diagnostics.status, ControlStatus::Clipped);
        assert!((out.diagnostics.predicted_capacity_violation - 10.0).abs() < 1e-9);
        assert!((&out.flow.values - dvector![50.0, 50.0]).amax() < 1e-9);

        let strict = build_qp(&build_prediction(&a, controller.input_matrix(), cfg.horizon).unwrap(), &state, &cfg).unwrap();
        assert_eq!(qp::solve(&strict, &SolverOptions::default()).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn negative_state_with_lower_bound_is_infeasible() {
        // Road 4 has no boundary neighbor, so -(G x)_4 <= 0 fails for every U.
        let g = NoirGraph::build(
            &[
                NodeSpec::boundary(RoadClass::Inlet),
                NodeSpec::boundary(RoadClass::Outlet),
                NodeSpec::interior(100.0, 1),
                NodeSpec::interior(100.0, 1),
                NodeSpec::interior(100.0, 1),
            ],
            &[(1, 3), (3, 4), (4, 5), (5, 2)],
        )
        .unwrap();
        let mut cfg = MpcConfig::new(10.0, dvector![100.0, 100.0, 100.0], Horizon::new(1).unwrap()).unwrap();
        cfg.enforce_density_lower_bound = true;
        let err = Controller::new(&g, cfg)
            .unwrap()
            .control_with_a(&TrafficState::new(dvector![0.0, -5.0, 0.0]), &DMatrix::identity(3, 3))
            .unwrap_err();
        assert!(matches!(err, MpcError::Infeasible { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            MpcConfig::new(0.0, dvector![1.0], Horizon::default()),
            Err(MpcError::InvalidBudget(_))
        ));
        assert!(matches!(
            MpcConfig::new(1.0, dvector![1.0, -2.0], Horizon::default()),
            Err(MpcError::InvalidCapacity { index: 1, .. })
        ));
        let cfg = MpcConfig::new(1.0, dvector![1.0, 2.0], Horizon::default()).unwrap();
        assert!(matches!(Controller::new(&minimal(), cfg), Err(MpcError::DimensionMismatch { .. })));
        assert_eq!(Horizon::default().get(), 5);
    }
}
