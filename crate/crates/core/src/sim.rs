//! Closed-loop experiments: sample, control, advance, record.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    accumulated_gain, assemble_a, bibo_bound, sample_matrices, step, BoundaryFlow, DynamicsError,
    SparseColumns, TrafficState, DEFAULT_P_MAX,
};
use crate::graph::{GraphError, NoirGraph, RoadClass, ValidationReport, DEFAULT_VEHICLE_LENGTH_M};
use crate::mpc::{ControlStatus, Controller, Horizon, MpcConfig, MpcError};
use crate::qp::KktResiduals;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("network fails validation:\n{0}")]
    InvalidNetwork(Box<ValidationReport>),
    #[error("invalid configuration at {0}: {1}")]
    InvalidConfig(String, String),
    #[error("controller failed at step {step}: {source}")]
    Control {
        step: usize,
        #[source]
        source: MpcError,
    },
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl SimError {
    /// True when the controller found no feasible flow even at zero budget.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SimError::Control {
                source: MpcError::Infeasible { .. },
                ..
            }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialDensity {
    Zero,
    /// Uniform on `[0, 0.5 ρ_max]` per road.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub steps: usize,
    /// Sampling interval; metadata only, the dynamics are per step.
    pub dt_seconds: f64,
    pub seed: u64,
    pub d0: f64,
    pub n_tau: usize,
    pub p_max: f64,
    pub l_veh_m: f64,
    pub enforce_density_lower_bound: bool,
    pub initial_density: InitialDensity,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps: 150,
            dt_seconds: 20.0,
            seed: 0,
            d0: 100.0,
            n_tau: 5,
            p_max: DEFAULT_P_MAX,
            l_veh_m: DEFAULT_VEHICLE_LENGTH_M,
            enforce_density_lower_bound: false,
            initial_density: InitialDensity::Uniform,
        }
    }
}

impl SimConfig {
    /// Returns the offending key and the reason on failure.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let fail = |key: &str, reason: &str| Err((key.to_string(), reason.to_string()));
        if self.steps == 0 {
            return fail("steps", "must be at least 1");
        }
        if !(self.dt_seconds.is_finite() && self.dt_seconds > 0.0) {
            return fail("dt_seconds", "must be positive");
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return fail("d0", "must be positive");
        }
        if self.n_tau == 0 {
            return fail("n_tau", "must be at least 1");
        }
        if !(self.p_max > 0.0 && self.p_max < 1.0) {
            return fail("p_max", "must lie in (0, 1)");
        }
        if !(self.l_veh_m.is_finite() && self.l_veh_m > 0.0) {
            return fail("l_veh_m", "must be positive");
        }
        Ok(())
    }

    pub fn mpc_config(&self, graph: &NoirGraph) -> Result<MpcConfig, SimError> {
        self.validate().map_err(|(k, r)| SimError::InvalidConfig(k, r))?;
        let x_max = DVector::from_vec(graph.interior_capacities(self.l_veh_m)?);
        let mut cfg = MpcConfig::new(self.d0, x_max, Horizon::new(self.n_tau)?)?;
        cfg.enforce_density_lower_bound = self.enforce_density_lower_bound;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Time index `k`; the record holds `s*[k]` and the resulting `x[k+1]`.
    pub step: usize,
    pub densities: DVector<f64>,
    pub flow: BoundaryFlow,
    pub cost: f64,
    pub kkt: KktResiduals,
    pub status: ControlStatus,
    pub d0_applied: f64,
    pub sum_u: f64,
    pub sum_v: f64,
    /// `max(0, max(x[k+1] - x_max))`.
    pub capacity_violation: f64,
    /// `max(0, -min x[k+1])`; densities are never clamped.
    pub negativity: f64,
    pub predicted_capacity_violation: f64,
    pub predicted_negativity: f64,
    pub qp_iterations: usize,
    pub active_set_size: usize,
}

/// Boundedness check of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiboCheck {
    /// Largest of `‖x[0]‖∞` and every `‖B s*[k]‖∞`.
    pub z_max: f64,
    /// Contraction estimate of the realized state matrices.
    pub r: f64,
    pub bound: f64,
    /// `max_k ‖x[k]‖²` over the run.
    pub max_norm_sq: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesLog {
    pub config: SimConfig,
    /// Interior road ids in state order.
    pub road_ids: Vec<usize>,
    pub boundary_classes: Vec<RoadClass>,
    pub capacities: DVector<f64>,
    pub initial: DVector<f64>,
    pub records: Vec<StepRecord>,
    pub bibo: BiboCheck,
}

impl TimeSeriesLog {
    pub fn final_densities(&self) -> &DVector<f64> {
        self.records.last().map_or(&self.initial, |r| &r.densities)
    }

    /// `(k, ρ[k])` for `k = 0..=K` on one interior road.
    pub fn density_series(&self, road_id: usize) -> Option<Vec<(usize, f64)>> {
        let idx = self.road_ids.iter().position(|&id| id == road_id)?;
        let mut out = vec![(0, self.initial[idx])];
        out.extend(self.records.iter().map(|r| (r.step + 1, r.densities[idx])));
        Some(out)
    }

    pub fn n_in(&self) -> usize {
        self.boundary_classes
            .iter()
            .filter(|c| **c == RoadClass::Inlet)
            .count()
    }
}

/// Runs `cfg.steps` closed-loop steps. Deterministic in `cfg.seed`.
pub fn run(graph: &NoirGraph, cfg: &SimConfig, mpc: &MpcConfig) -> Result<TimeSeriesLog, SimError> {
    cfg.validate().map_err(|(k, r)| SimError::InvalidConfig(k, r))?;
    let report = graph.validate();
    if !report.all_passed() {
        return Err(SimError::InvalidNetwork(Box::new(report)));
    }
    let controller = Controller::new(graph, mpc.clone())?;
    let b = controller.input_matrix();
    let n_in = graph.n_in();
    let capacities = mpc.x_max.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = match cfg.initial_density {
        InitialDensity::Zero => DVector::zeros(graph.n_interior()),
        InitialDensity::Uniform => capacities.map(|cap| rng.random::<f64>() * 0.5 * cap),
    };

    let mut state = TrafficState::new(initial.clone());
    let mut records = Vec::with_capacity(cfg.steps);
    let mut matrices = Vec::with_capacity(cfg.steps);
    let mut z_max = initial.amax();
    let mut max_norm_sq = initial.norm_squared();
    for k in 0..cfg.steps {
        let (p, q) = sample_matrices(&mut rng, graph, &state, cfg.p_max)?;
        let a = assemble_a(&p, &q)?;
        let out = controller
            .control_with_a(&state, &a)
            .map_err(|source| SimError::Control { step: k, source })?;
        state = step(&state, &a, b, &out.flow)?;
        matrices.push(SparseColumns::from_dense(&a));

        z_max = z_max.max((b * &out.flow.values).amax());
        max_norm_sq = max_norm_sq.max(state.densities.norm_squared());
        let x = &state.densities;
        let capacity_violation = x
            .iter()
            .zip(capacities.iter())
            .fold(0.0_f64, |m, (v, c)| m.max(v - c));
        let diag = out.diagnostics;
        records.push(StepRecord {
            step: k,
            densities: x.clone(),
            sum_u: out.flow.inflow_total(n_in),
            sum_v: out.flow.outflow_total(n_in),
            flow: out.flow,
            cost: diag.cost,
            kkt: diag.kkt,
            status: diag.status,
            d0_applied: diag.d0_applied,
            capacity_violation,
            negativity: (-x.min()).max(0.0),
            predicted_capacity_violation: diag.predicted_capacity_violation,
            predicted_negativity: diag.predicted_negativity,
            qp_iterations: diag.iterations,
            active_set_size: diag.active_set_size,
        });
    }

    let gain = accumulated_gain(&matrices);
    let r = 1.0 - 1.0 / (gain * gain);
    let bound = bibo_bound(z_max, graph.n_interior(), r)?;
    let bibo = BiboCheck {
        z_max,
        r,
        bound,
        max_norm_sq,
        holds: max_norm_sq <= bound,
    };

    Ok(TimeSeriesLog {
        config: cfg.clone(),
        road_ids: graph.interior_nodes().map(|n| n.get()).collect(),
        boundary_classes: graph
            .nodes()
            .take(graph.n_boundary())
            .map(|n| graph.class(n).expect("boundary node"))
            .collect(),
        capacities,
        initial,
        records,
        bibo,
    })
}

/// Rounds to 12 significant digits.
pub fn quantize(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

fn number(v: f64) -> String {
    serde_json::to_string(&quantize(v)).expect("finite value")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub sum_u: f64,
    pub sum_v: f64,
    pub cost: f64,
    pub status: ControlStatus,
    pub d0_applied: f64,
    pub kkt_max: f64,
    pub capacity_violation: f64,
    pub negativity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadDensity {
    pub road_id: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: SimConfig,
    pub n_in: usize,
    pub n_out: usize,
    pub n_interior: usize,
    pub optimal_steps: usize,
    pub clipped_steps: usize,
    pub relaxed_steps: usize,
    /// `max |Σu + Σv - d0|` over optimal steps.
    pub max_budget_error: f64,
    pub max_kkt_residual: f64,
    pub max_capacity_violation: f64,
    pub max_negativity: f64,
    pub mean_sum_u: f64,
    pub mean_sum_v: f64,
    pub bibo: BiboCheck,
    pub final_state: Vec<RoadDensity>,
    pub per_step: Vec<StepSummary>,
}

impl RunSummary {
    /// Aggregates of `log`, every float rounded to 12 significant digits.
    pub fn from_log(log: &TimeSeriesLog) -> Self {
        let q = quantize;
        let optimal: Vec<&StepRecord> = log
            .records
            .iter()
            .filter(|r| r.status == ControlStatus::Optimal)
            .collect();
        let max_of = |f: fn(&StepRecord) -> f64| log.records.iter().map(f).fold(0.0_f64, f64::max);
        let steps = log.records.len().max(1) as f64;
        let count = |status| log.records.iter().filter(|r| r.status == status).count();
        let bibo = log.bibo;
        Self {
            config: log.config.clone(),
            n_in: log.n_in(),
            n_out: log.boundary_classes.len() - log.n_in(),
            n_interior: log.road_ids.len(),
            optimal_steps: optimal.len(),
            clipped_steps: count(ControlStatus::Clipped),
            relaxed_steps: count(ControlStatus::Relaxed),
            max_budget_error: q(optimal
                .iter()
                .map(|r| (r.sum_u + r.sum_v - log.config.d0).abs())
                .fold(0.0, f64::max)),
            max_kkt_residual: q(max_of(|r| r.kkt.max())),
            max_capacity_violation: q(max_of(|r| r.capacity_violation)),
            max_negativity: q(max_of(|r| r.negativity)),
            mean_sum_u: q(log.records.iter().map(|r| r.sum_u).sum::<f64>() / steps),
            mean_sum_v: q(log.records.iter().map(|r| r.sum_v).sum::<f64>() / steps),
            bibo: BiboCheck {
                z_max: q(bibo.z_max),
                r: q(bibo.r),
                bound: q(bibo.bound),
                max_norm_sq: q(bibo.max_norm_sq),
                holds: bibo.holds,
            },
            final_state: log
                .road_ids
                .iter()
                .zip(log.final_densities().iter())
                .map(|(&road_id, &d)| RoadDensity { road_id, density: q(d) })
                .collect(),
            per_step: log
                .records
                .iter()
                .map(|r| StepSummary {
                    step: r.step,
                    sum_u: q(r.sum_u),
                    sum_v: q(r.sum_v),
                    cost: q(r.cost),
                    status: r.status,
                    d0_applied: q(r.d0_applied),
                    kkt_max: q(r.kkt.max()),
                    capacity_violation: q(r.capacity_violation),
                    negativity: q(r.negativity),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("summary serializes");
        bytes.push(b'\n');
        bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub summary: PathBuf,
    pub densities: PathBuf,
    pub boundary_flows: PathBuf,
}

/// `step,road_id,density` for `k = 0..=K`.
pub fn densities_csv(log: &TimeSeriesLog) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "road_id", "density"])?;
    let states = std::iter::once((0, &log.initial)).chain(log.records.iter().map(|r| (r.step + 1, &r.densities)));
    for (k, x) in states {
        for (id, v) in log.road_ids.iter().zip(x.iter()) {
            w.write_record([k.to_string(), id.to_string(), number(*v)])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// `step,road_id,class,flow` for `k = 0..K-1`.
pub fn boundary_flows_csv(log: &TimeSeriesLog) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "road_id", "class", "flow"])?;
    for r in &log.records {
        for (i, (class, v)) in log.boundary_classes.iter().zip(r.flow.values.iter()).enumerate() {
            w.write_record([r.step.to_string(), (i + 1).to_string(), class.to_string(), number(*v)])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes `run_summary.json`, `densities.csv` and `boundary_flows.csv` into `dir`.
pub fn emit_report(log: &TimeSeriesLog, dir: &Path) -> std::io::Result<ReportPaths> {
    fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        summary: dir.join("run_summary.json"),
        densities: dir.join("densities.csv"),
        boundary_flows: dir.join("boundary_flows.csv"),
    };
    fs::write(&paths.summary, RunSummary::from_log(log).to_json())?;
    fs::write(&paths.densities, densities_csv(log).map_err(std::io::Error::other)?)?;
    fs::write(&paths.boundary_flows, boundary_flows_csv(log).map_err(std::io::Error::other)?)?;
    Ok(paths)
}
