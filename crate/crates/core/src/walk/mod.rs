//! Lazy simulation of the nearest-neighbour walk on the directed cover.
//!
//! A position is the label path from the root; the tree itself is never
//! built. At a vertex with label `i` the walk steps to the parent with
//! probability `p(-i)` and to the child labelled `j` with probability
//! `p(i,j)`. At the root the backward step is the loop `(o,o)`.

mod estimators;
mod weights;

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{BaseGraph, GraphError, VertexId};
use crate::rng;

pub use estimators::{
    empirical_entropy_speed, empirical_recurrence, EntropyOptions, EntropySpeedEstimate, Estimate,
    ExitLaw, NamedEstimate, RecurrenceEvidence, RunSummary, DEFAULT_GUARD,
};
pub use weights::WeightFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("weight {name} at ({from}, {to}) is {value}, beyond its bound {bound}")]
    WeightOutOfBound {
        name: String,
        from: String,
        to: String,
        value: f64,
        bound: f64,
    },
    #[error("walk is not transient enough over the horizon: escape fraction {escape_fraction} <= {threshold}")]
    NotTransientEnough { escape_fraction: f64, threshold: f64 },
    #[error("no exit transitions were observed")]
    NoExits,
    #[error("exit transition {from} -> {to} has no probability in the supplied exit law")]
    MissingExitProbability { from: String, to: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A vertex of the cover: the labels of the geodesic from the root,
/// excluding the root itself.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreePosition {
    root: VertexId,
    stack: Vec<VertexId>,
}

impl TreePosition {
    pub fn root(root: VertexId) -> Self {
        TreePosition {
            root,
            stack: Vec::new(),
        }
    }

    pub fn height(&self) -> usize {
        self.stack.len()
    }

    /// `tau(x)`, the label of the current vertex.
    pub fn label(&self) -> &VertexId {
        self.stack.last().unwrap_or(&self.root)
    }

    pub fn is_root(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn push(&mut self, child: VertexId) {
        self.stack.push(child);
    }

    /// Steps to the parent; `None` at the root.
    pub fn pop(&mut self) -> Option<VertexId> {
        self.stack.pop()
    }

    /// Labels below the root, outermost first.
    pub fn path(&self) -> &[VertexId] {
        &self.stack
    }

    /// Label of the ancestor at height `k` (`k = 0` is the root).
    pub fn ancestor(&self, k: usize) -> Option<&VertexId> {
        match k {
            0 => Some(&self.root),
            k => self.stack.get(k - 1),
        }
    }
}

/// One-step sampler: `None` for the backward step (the loop at the root),
/// otherwise the label of the chosen child.
pub(crate) trait Engine: Sync {
    fn step(&self, at: &VertexId, u: f64) -> Result<Option<VertexId>, GraphError>;
}

/// Inverse-CDF tables of a finite graph.
struct Compiled {
    backward: Vec<f64>,
    /// `(cumulative threshold, child)` per vertex.
    cum: Vec<Vec<(f64, u32)>>,
}

impl Compiled {
    fn new(g: &BaseGraph) -> Option<Self> {
        let f = g.as_finite()?;
        let mut backward = Vec::with_capacity(f.len());
        let mut cum = Vec::with_capacity(f.len());
        for v in g.vertices()? {
            let b = g.backward(&v).ok()?;
            let mut acc = b;
            let row = g
                .out_edges(&v)
                .ok()?
                .iter()
                .map(|e| {
                    acc += e.p;
                    let VertexId::Index(j) = e.to else { unreachable!() };
                    (acc, j)
                })
                .collect();
            backward.push(b);
            cum.push(row);
        }
        Some(Compiled { backward, cum })
    }
}

impl Engine for Compiled {
    #[inline]
    fn step(&self, at: &VertexId, u: f64) -> Result<Option<VertexId>, GraphError> {
        let VertexId::Index(i) = at else {
            return Err(GraphError::UnknownVertex { vertex: at.to_string() });
        };
        let i = *i as usize;
        if u < self.backward[i] {
            return Ok(None);
        }
        let row = &self.cum[i];
        let j = row
            .iter()
            .find(|(c, _)| u < *c)
            .unwrap_or_else(|| row.last().unwrap())
            .1;
        Ok(Some(VertexId::Index(j)))
    }
}

struct Generic<'a> {
    g: &'a BaseGraph,
}

impl Engine for Generic<'_> {
    fn step(&self, at: &VertexId, u: f64) -> Result<Option<VertexId>, GraphError> {
        let b = self.g.backward(at)?;
        if u < b {
            return Ok(None);
        }
        let edges = self.g.out_edges(at)?;
        let mut acc = b;
        for e in edges.iter() {
            acc += e.p;
            if u < acc {
                return Ok(Some(e.to.clone()));
            }
        }
        Ok(edges.last().map(|e| e.to.clone()))
    }
}

/// Sampler for a graph: table-driven for finite graphs.
pub(crate) fn engine(g: &BaseGraph) -> Box<dyn Engine + '_> {
    match Compiled::new(g) {
        Some(c) => Box::new(c),
        None => Box::new(Generic { g }),
    }
}

/// What a run keeps besides its summary statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Record {
    pub heights: bool,
    pub labels: bool,
}

impl Record {
    pub const FULL: Record = Record {
        heights: true,
        labels: true,
    };
    pub const HEIGHTS: Record = Record {
        heights: true,
        labels: false,
    };
}

/// A simulated trajectory of `n_steps` steps from the root.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkRun {
    pub seed: u64,
    pub run_index: u64,
    pub n_steps: usize,
    /// `|X_0|, ..., |X_n|` (empty unless recorded).
    #[serde(skip)]
    pub heights: Vec<u32>,
    /// `tau(X_1), ..., tau(X_n)` (empty unless recorded).
    #[serde(skip)]
    pub labels: Vec<VertexId>,
    /// Times `m` at which step `m` was the loop `(o,o)`.
    pub loop_steps: Vec<usize>,
    /// Backward steps arriving at the root.
    pub returns: usize,
    pub max_height: usize,
    pub final_height: usize,
    pub final_label: VertexId,
    /// Final position.
    #[serde(skip)]
    pub final_position: TreePosition,
    /// `l(X_n)` for each registered weight.
    pub lengths: Vec<f64>,
}

impl WalkRun {
    pub fn visited_loop(&self) -> bool {
        !self.loop_steps.is_empty()
    }

    /// `step  height  label  loop_flag` rows; needs recorded heights and
    /// labels.
    pub fn trajectory_tsv(&self, g: &BaseGraph) -> String {
        let mut out = String::from("step\theight\tlabel\tloop_flag\n");
        let root = g.root();
        let mut loops = self.loop_steps.iter().peekable();
        let _ = writeln!(out, "0\t0\t{}\t0", g.name(&root));
        for m in 1..self.heights.len() {
            let flag = loops.next_if(|&&t| t == m).is_some();
            let label = self.labels.get(m - 1).map_or_else(String::new, |l| g.name(l));
            let _ = writeln!(out, "{m}\t{}\t{label}\t{}", self.heights[m], u8::from(flag));
        }
        out
    }
}

fn weight_error(g: &BaseGraph, w: &WeightFunction, i: &VertexId, j: &VertexId, v: (f64, f64)) -> WalkError {
    WalkError::WeightOutOfBound {
        name: w.name().to_string(),
        from: g.name(i),
        to: g.name(j),
        value: v.0,
        bound: v.1,
    }
}

/// Runs one trajectory with stream `(seed, run_index)`.
pub(crate) fn run_with(
    g: &BaseGraph,
    e: &dyn Engine,
    n_steps: usize,
    seed: u64,
    run_index: u64,
    weights: &[WeightFunction],
    record: Record,
) -> Result<WalkRun, WalkError> {
    let mut rng: ChaCha8Rng = rng::stream(seed, run_index);
    let mut pos = TreePosition::root(g.root());
    let mut heights = Vec::new();
    let mut labels = Vec::new();
    if record.heights {
        heights.reserve(n_steps + 1);
        heights.push(0);
    }
    if record.labels {
        labels.reserve(n_steps);
    }
    // prefix sums of each length along the current geodesic
    let mut prefix: Vec<Vec<f64>> = vec![vec![0.0]; weights.len()];
    let mut loop_steps = Vec::new();
    let mut returns = 0;
    let mut max_height = 0;
    for m in 1..=n_steps {
        let u: f64 = rng.random();
        match e.step(pos.label(), u)? {
            None => {
                if pos.pop().is_none() {
                    loop_steps.push(m);
                } else {
                    for p in &mut prefix {
                        p.pop();
                    }
                    if pos.is_root() {
                        returns += 1;
                    }
                }
            }
            Some(child) => {
                for (w, p) in weights.iter().zip(&mut prefix) {
                    let v = w
                        .checked(pos.label(), &child)
                        .map_err(|v| weight_error(g, w, pos.label(), &child, v))?;
                    p.push(p.last().unwrap() + v);
                }
                pos.push(child);
                max_height = max_height.max(pos.height());
            }
        }
        if record.heights {
            heights.push(pos.height() as u32);
        }
        if record.labels {
            labels.push(pos.label().clone());
        }
    }
    Ok(WalkRun {
        seed,
        run_index,
        n_steps,
        heights,
        labels,
        loop_steps,
        returns,
        max_height,
        final_height: pos.height(),
        final_label: pos.label().clone(),
        lengths: prefix.iter().map(|p| *p.last().unwrap()).collect(),
        final_position: pos,
    })
}

/// Simulates `n_steps` steps from the root. Deterministic given `seed`.
pub fn simulate(
    g: &BaseGraph,
    n_steps: usize,
    seed: u64,
    weights: &[WeightFunction],
) -> Result<WalkRun, WalkError> {
    simulate_run(g, n_steps, seed, 0, weights, Record::FULL)
}

/// Run `run_index` of an experiment seeded with `seed`.
pub fn simulate_run(
    g: &BaseGraph,
    n_steps: usize,
    seed: u64,
    run_index: u64,
    weights: &[WeightFunction],
    record: Record,
) -> Result<WalkRun, WalkError> {
    if n_steps == 0 {
        return Err(WalkError::InvalidArgument("n_steps must be at least 1".into()));
    }
    let e = engine(g);
    run_with(g, e.as_ref(), n_steps, seed, run_index, weights, record)
}

/// How many steps a candidate exit time must be followed by, without the
/// walk dipping below its level, before it is emitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityMargin {
    Fixed { steps: usize },
    /// `slope * k + offset` for level `k`.
    Linear { slope: usize, offset: usize },
}

impl Default for StabilityMargin {
    fn default() -> Self {
        StabilityMargin::Linear {
            slope: 10,
            offset: 100,
        }
    }
}

impl StabilityMargin {
    pub fn steps(&self, k: usize) -> usize {
        match *self {
            StabilityMargin::Fixed { steps } => steps,
            StabilityMargin::Linear { slope, offset } => slope * k + offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExitRecord {
    pub k: usize,
    pub e_k: usize,
    /// `tau(W_k)`.
    pub label: VertexId,
}

/// Exit times `e_k = min{m : |X_m'| >= k for all m' >= m}` evaluated on the
/// finite horizon, emitted while `n - e_k >= margin(k)`.
///
/// Works on a height sequence alone; `label_at(k)` supplies `tau(W_k)`.
pub fn exit_times(heights: &[u32], margin: StabilityMargin) -> Vec<(usize, usize)> {
    let n = heights.len().saturating_sub(1);
    let mut out = Vec::new();
    if heights.is_empty() {
        return out;
    }
    // e_k - 1 is the last time with height < k
    let mut suffix_min = heights[n];
    let mut last_below = vec![usize::MAX; suffix_min as usize + 1];
    for m in (0..=n).rev() {
        let h = heights[m];
        while h < suffix_min {
            // levels h+1..=suffix_min are last undercut at time m
            last_below[suffix_min as usize] = m;
            suffix_min -= 1;
        }
    }
    for (k, &t) in last_below.iter().enumerate().skip(1) {
        if t == usize::MAX {
            break;
        }
        let e_k = t + 1;
        if n - e_k < margin.steps(k) {
            break;
        }
        out.push((k, e_k));
    }
    out
}

/// Exit records of a run that kept its heights.
pub fn extract_exits(run: &WalkRun, margin: StabilityMargin) -> Vec<ExitRecord> {
    exit_times(&run.heights, margin)
        .into_iter()
        .map(|(k, e_k)| ExitRecord {
            k,
            e_k,
            label: run.final_position.ancestor(k).unwrap().clone(),
        })
        .collect()
}
