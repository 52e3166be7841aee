//! Seeded synthetic road networks on a Manhattan grid.
//!
//! Intersections sit on an `rows × cols` lattice and every pair of adjacent
//! intersections is joined by two opposite road elements, except for a few
//! one-way segments. A road arriving at an intersection continues onto every
//! road leaving it other than its own reverse. U-turns are allowed at the four
//! corners and wherever the reverse is the sole exit. Each inlet enters the
//! network through one road leaving a perimeter intersection and each outlet
//! drains one road arriving at a perimeter intersection.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeSpec, NoirGraph, RoadAttributes, RoadClass};

pub const MIN_LENGTH_M: f64 = 80.0;
pub const MAX_LENGTH_M: f64 = 200.0;
pub const MAX_LANES: u32 = 3;
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("grid must be at least 2x2, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("{what} count {count} exceeds the {capacity} perimeter intersections")]
    PerimeterExceeded {
        what: &'static str,
        count: usize,
        capacity: usize,
    },
    #[error("need at least one inlet and one outlet")]
    NoBoundary,
    #[error("{requested} one-way segments requested but the grid has {available}")]
    TooManyOneWay { requested: usize, available: usize },
    #[error("no valid network found after {0} attempts")]
    Exhausted(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridParams {
    pub rows: usize,
    pub cols: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// Segments that keep only one of their two directions.
    pub one_way_segments: usize,
}

impl GridParams {
    pub fn new(rows: usize, cols: usize, n_in: usize, n_out: usize) -> Self {
        Self {
            rows,
            cols,
            n_in,
            n_out,
            one_way_segments: 0,
        }
    }

    pub fn perimeter(&self) -> usize {
        if self.rows < 2 || self.cols < 2 {
            self.rows * self.cols
        } else {
            2 * (self.rows + self.cols) - 4
        }
    }

    pub fn segments(&self) -> usize {
        self.rows * self.cols.saturating_sub(1) + self.rows.saturating_sub(1) * self.cols
    }

    /// Interior road elements of every generated network.
    pub fn n_interior(&self) -> usize {
        2 * self.segments() - self.one_way_segments
    }

    fn check(&self) -> Result<(), GenerateError> {
        if self.rows < 2 || self.cols < 2 {
            return Err(GenerateError::GridTooSmall {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if self.n_in == 0 || self.n_out == 0 {
            return Err(GenerateError::NoBoundary);
        }
        let capacity = self.perimeter();
        for (what, count) in [("inlet", self.n_in), ("outlet", self.n_out)] {
            if count > capacity {
                return Err(GenerateError::PerimeterExceeded {
                    what,
                    count,
                    capacity,
                });
            }
        }
        if self.one_way_segments > self.segments() {
            return Err(GenerateError::TooManyOneWay {
                requested: self.one_way_segments,
                available: self.segments(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 4x4 grid with 4 inlets and 4 outlets (56 elements).
    Grid,
    /// 8x8 grid with 20 inlets, 22 outlets and 217 interior roads (259 elements).
    Philadelphia,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Grid, Preset::Philadelphia];

    pub fn params(self) -> GridParams {
        match self {
            Preset::Grid => GridParams::new(4, 4, 4, 4),
            Preset::Philadelphia => GridParams {
                one_way_segments: 7,
                ..GridParams::new(8, 8, 20, 22)
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Grid => "grid",
            Preset::Philadelphia => "philadelphia",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset '{s}' (expected grid or philadelphia)"))
    }
}

pub fn generate_preset(preset: Preset, seed: u64) -> Result<NoirGraph, GenerateError> {
    generate_grid_noir(&preset.params(), seed)
}

/// Builds a grid network that passes every structural check of
/// [`NoirGraph::validate`]. Identical inputs give identical graphs.
pub fn generate_grid_noir(params: &GridParams, seed: u64) -> Result<NoirGraph, GenerateError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(graph) = attempt(params, &mut rng)? {
            return Ok(graph);
        }
    }
    Err(GenerateError::Exhausted(MAX_ATTEMPTS))
}

fn attempt<R: Rng>(params: &GridParams, rng: &mut R) -> Result<Option<NoirGraph>, GenerateError> {
    let (rows, cols) = (params.rows, params.cols);
    let at = |r: usize, c: usize| r * cols + c;

    let mut segments = Vec::with_capacity(params.segments());
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                segments.push((at(r, c), at(r, c + 1)));
            }
            if r + 1 < rows {
                segments.push((at(r, c), at(r + 1, c)));
            }
        }
    }
    let mut one_way = vec![None; segments.len()];
    for i in rand::seq::index::sample(rng, segments.len(), params.one_way_segments) {
        one_way[i] = Some(rng.random_bool(0.5));
    }
    // Directed roads (tail, head) between intersections.
    let mut roads = Vec::with_capacity(params.n_interior());
    for (&(a, b), keep) in segments.iter().zip(&one_way) {
        if keep != &Some(false) {
            roads.push((a, b));
        }
        if keep != &Some(true) {
            roads.push((b, a));
        }
    }

    let n_cross = rows * cols;
    let mut leaving = vec![Vec::new(); n_cross];
    let mut arriving = vec![Vec::new(); n_cross];
    for (i, &(tail, head)) in roads.iter().enumerate() {
        leaving[tail].push(i);
        arriving[head].push(i);
    }

    let perimeter: Vec<usize> = (0..n_cross)
        .filter(|&v| {
            let (r, c) = (v / cols, v % cols);
            r == 0 || c == 0 || r + 1 == rows || c + 1 == cols
        })
        .collect();
    let pick = |rng: &mut R, count: usize, pool: &[Vec<usize>]| -> Option<Vec<usize>> {
        let mut sites = perimeter.clone();
        sites.shuffle(rng);
        sites.truncate(count);
        sites
            .into_iter()
            .map(|v| pool[v].choose(rng).copied())
            .collect()
    };
    let Some(inlet_roads) = pick(rng, params.n_in, &leaving) else {
        return Ok(None);
    };
    let Some(outlet_roads) = pick(rng, params.n_out, &arriving) else {
        return Ok(None);
    };

    let n_boundary = params.n_in + params.n_out;
    let road_id = |i: usize| n_boundary + 1 + i;
    let mut nodes = Vec::with_capacity(n_boundary + roads.len());
    nodes.extend((0..params.n_in).map(|_| NodeSpec::boundary(RoadClass::Inlet)));
    nodes.extend((0..params.n_out).map(|_| NodeSpec::boundary(RoadClass::Outlet)));
    for _ in &roads {
        let length = f64::from(rng.random_range(800..=2000_u32)) / 10.0;
        let lanes = rng.random_range(1..=MAX_LANES);
        nodes.push(NodeSpec::new(
            RoadClass::Interior,
            Some(RoadAttributes::new(length, lanes)?),
        ));
    }

    let mut edges = Vec::new();
    for (i, &r) in inlet_roads.iter().enumerate() {
        edges.push((i + 1, road_id(r)));
    }
    for (i, &r) in outlet_roads.iter().enumerate() {
        edges.push((road_id(r), params.n_in + i + 1));
    }
    for (i, &(tail, head)) in roads.iter().enumerate() {
        let (r, c) = (head / cols, head % cols);
        let corner = (r == 0 || r + 1 == rows) && (c == 0 || c + 1 == cols);
        let exits = &leaving[head];
        let forward: Vec<usize> = exits.iter().copied().filter(|&j| roads[j].1 != tail).collect();
        let targets = if corner || forward.is_empty() { exits.clone() } else { forward };
        edges.extend(targets.into_iter().map(|j| (road_id(i), road_id(j))));
    }

    let graph = NoirGraph::build(&nodes, &edges)?;
    Ok(graph.validate().all_passed().then_some(graph))
}
