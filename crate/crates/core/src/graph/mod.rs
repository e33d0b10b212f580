//! Base graphs and the walk kernel they induce on their directed cover.
//!
//! A [`BaseGraph`] is either a finite, explicitly listed graph (parsed from
//! the JSON spec format) or a procedural generator that answers kernel
//! queries vertex by vertex. Both expose the same two queries: the backward
//! probability `p(-i)` and the forward edges `i -> j` carrying `p_G(i,j)` and
//! the tree kernel `p(i,j) = (1 - p(-i)) p_G(i,j)`.

mod generators;
mod spec;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

pub use generators::{Generator, GeneratorSpec, GENERATOR_NAMES, Marginal, ParamValue, RandomEnvironment, SiteEnvironment};
pub use spec::{expand_multiedges, EdgeSpec, GraphSpec, KernelConvention, Name, SpecDocument};

/// Tolerance for row stochasticity of the forward kernel.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default lower margin `epsilon` for backward probabilities.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("row of {vertex} is not stochastic: p(-i) + sum p(i,j) = {sum}")]
    RowNotStochastic { vertex: String, sum: f64 },
    #[error("backward probability of {vertex} is {value}, outside ({epsilon}, 1 - {epsilon})")]
    BackwardProbOutOfRange {
        vertex: String,
        value: f64,
        epsilon: f64,
    },
    #[error("parallel edges {from} -> {to}; run expand_multiedges first")]
    MultiEdgeDetected { from: String, to: String },
    #[error("vertex {vertex} is not reachable from the root")]
    UnreachableVertex { vertex: String },
    #[error("unknown vertex {vertex}")]
    UnknownVertex { vertex: String },
    #[error("vertex {vertex} has no outgoing edges")]
    EmptyOutEdges { vertex: String },
    #[error("edge {from} -> {to} has invalid probability {value}")]
    InvalidProbability { from: String, to: String, value: f64 },
    #[error("vertex {vertex} has out-degree {degree} above the declared bound {bound}")]
    DegreeBoundExceeded {
        vertex: String,
        degree: usize,
        bound: usize,
    },
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("generator failure at {vertex}: {reason}")]
    GeneratorFailure { vertex: String, reason: String },
}

/// Identifier of a base-graph vertex (a label of the cover).
///
/// Finite specs use dense indices, lattice generators use integer sites and
/// the remaining generators use structured string tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexId {
    Index(u32),
    Site(i64),
    Token(Arc<str>),
}

impl VertexId {
    pub fn token(s: &str) -> Self {
        VertexId::Token(Arc::from(s))
    }

    pub fn as_site(&self) -> Option<i64> {
        match self {
            VertexId::Site(z) => Some(*z),
            _ => None,
        }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Index(i) => write!(f, "#{i}"),
            VertexId::Site(z) => write!(f, "{z}"),
            VertexId::Token(t) => f.write_str(t),
        }
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A forward edge `i -> to` of the base graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub to: VertexId,
    /// Forward kernel `p_G(i, to)`.
    pub pg: f64,
    /// Tree kernel `p(i, to) = (1 - p(-i)) p_G(i, to)`.
    pub p: f64,
}

/// Out-edges of a vertex, borrowed for finite graphs and computed on the fly
/// for generators.
pub enum OutEdges<'a> {
    Borrowed(&'a [Edge]),
    Owned(SmallVec<[Edge; 2]>),
}

impl Deref for OutEdges<'_> {
    type Target = [Edge];

    fn deref(&self) -> &[Edge] {
        match self {
            OutEdges::Borrowed(e) => e,
            OutEdges::Owned(e) => e,
        }
    }
}

/// Declared bound on the out-degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeBound {
    Global(usize),
    Unbounded,
}

/// Finite base graph with dense vertex indices.
#[derive(Clone, Debug)]
pub struct FiniteGraph {
    names: Vec<String>,
    index: HashMap<String, u32>,
    root: u32,
    backward: Vec<f64>,
    edges: Vec<Vec<Edge>>,
}

impl FiniteGraph {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: u32) -> &str {
        &self.names[i as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<VertexId> {
        self.index.get(name).map(|&i| VertexId::Index(i))
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Finite(FiniteGraph),
    Generator(Generator),
}

/// A validated base graph together with its walk parameters.
#[derive(Clone, Debug)]
pub struct BaseGraph {
    backend: Backend,
    epsilon: f64,
    degree_bound: DegreeBound,
}

/// Outcome of [`validate_spec`]: the graph plus non-fatal findings.
#[derive(Debug)]
pub struct Validated {
    pub graph: BaseGraph,
    pub warnings: Vec<GraphError>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ValidateOptions {
    /// Promote unreachable vertices from warnings to errors.
    pub strict: bool,
}

/// Parses and validates a JSON spec document (finite graph or generator).
pub fn validate_spec(raw: &str, opts: ValidateOptions) -> Result<Validated, GraphError> {
    match SpecDocument::parse(raw)? {
        SpecDocument::Finite(spec) => BaseGraph::from_spec(&spec, opts),
        SpecDocument::Generator(g) => Ok(Validated {
            graph: g.build()?,
            warnings: Vec::new(),
        }),
    }
}

impl BaseGraph {
    /// Builds a finite graph from a parsed spec, checking every invariant.
    pub fn from_spec(spec: &GraphSpec, opts: ValidateOptions) -> Result<Validated, GraphError> {
        let epsilon = spec.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(GraphError::InvalidParameter {
                name: "epsilon".into(),
                reason: format!("{epsilon} not in (0, 1/2)"),
            });
        }
        let names: Vec<String> = spec.vertices.iter().map(Name::to_string).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (k, n) in names.iter().enumerate() {
            if index.insert(n.clone(), k as u32).is_some() {
                return Err(GraphError::Parse(format!("duplicate vertex {n}")));
            }
        }
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex { vertex: n.to_string() })
        };
        let root = lookup(&spec.root.to_string())?;

        let mut backward = vec![f64::NAN; names.len()];
        for (n, &b) in &spec.backward {
            backward[lookup(n)? as usize] = b;
        }
        for (k, &b) in backward.iter().enumerate() {
            if !(b > epsilon && b < 1.0 - epsilon) {
                return Err(GraphError::BackwardProbOutOfRange {
                    vertex: names[k].clone(),
                    value: b,
                    epsilon,
                });
            }
        }

        let convention = spec.kernel.unwrap_or_default();
        let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); names.len()];
        let mut seen = BTreeSet::new();
        for e in &spec.edges {
            let from = lookup(&e.from.to_string())?;
            let to = lookup(&e.to.to_string())?;
            if !seen.insert((from, to)) {
                return Err(GraphError::MultiEdgeDetected {
                    from: e.from.to_string(),
                    to: e.to.to_string(),
                });
            }
            let b = backward[from as usize];
            let (pg, p) = match convention {
                KernelConvention::Pg => {
                    let pg = e.pg.ok_or_else(|| {
                        GraphError::Parse(format!("edge {} -> {} lacks \"pg\"", e.from, e.to))
                    })?;
                    (pg, (1.0 - b) * pg)
                }
                KernelConvention::Tree => {
                    let p = e.p.ok_or_else(|| {
                        GraphError::Parse(format!("edge {} -> {} lacks \"p\"", e.from, e.to))
                    })?;
                    (p / (1.0 - b), p)
                }
            };
            if !(pg > 0.0 && pg <= 1.0 + STOCHASTIC_TOL) {
                return Err(GraphError::InvalidProbability {
                    from: e.from.to_string(),
                    to: e.to.to_string(),
                    value: pg,
                });
            }
            edges[from as usize].push(Edge {
                to: VertexId::Index(to),
                pg,
                p,
            });
        }

        let max_degree = edges.iter().map(Vec::len).max().unwrap_or(0);
        let bound = spec.degree_bound.unwrap_or(max_degree);
        for (k, out) in edges.iter().enumerate() {
            if out.is_empty() {
                return Err(GraphError::EmptyOutEdges { vertex: names[k].clone() });
            }
            if out.len() > bound {
                return Err(GraphError::DegreeBoundExceeded {
                    vertex: names[k].clone(),
                    degree: out.len(),
                    bound,
                });
            }
            let sum = match convention {
                KernelConvention::Pg => out.iter().map(|e| e.pg).sum::<f64>(),
                KernelConvention::Tree => {
                    backward[k] + out.iter().map(|e| e.p).sum::<f64>()
                }
            };
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(GraphError::RowNotStochastic {
                    vertex: names[k].clone(),
                    sum,
                });
            }
        }

        // reachability from the root
        let mut seen = vec![false; names.len()];
        let mut queue = VecDeque::from([root]);
        seen[root as usize] = true;
        while let Some(v) = queue.pop_front() {
            for e in &edges[v as usize] {
                if let VertexId::Index(t) = e.to {
                    if !std::mem::replace(&mut seen[t as usize], true) {
                        queue.push_back(t);
                    }
                }
            }
        }
        let mut warnings = Vec::new();
        for (k, &s) in seen.iter().enumerate() {
            if !s {
                let err = GraphError::UnreachableVertex { vertex: names[k].clone() };
                if opts.strict {
                    return Err(err);
                }
                warnings.push(err);
            }
        }

        Ok(Validated {
            graph: BaseGraph {
                backend: Backend::Finite(FiniteGraph {
                    names,
                    index,
                    root,
                    backward,
                    edges,
                }),
                epsilon,
                degree_bound: DegreeBound::Global(bound),
            },
            warnings,
        })
    }

    pub(crate) fn from_generator(gen: Generator, epsilon: f64) -> Self {
        let degree_bound = gen.degree_bound();
        BaseGraph {
            backend: Backend::Generator(gen),
            epsilon,
            degree_bound,
        }
    }

    pub fn root(&self) -> VertexId {
        match &self.backend {
            Backend::Finite(f) => VertexId::Index(f.root),
            Backend::Generator(g) => g.root(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn degree_bound(&self) -> DegreeBound {
        self.degree_bound
    }

    pub fn as_finite(&self) -> Option<&FiniteGraph> {
        match &self.backend {
            Backend::Finite(f) => Some(f),
            Backend::Generator(_) => None,
        }
    }

    pub fn generator(&self) -> Option<&Generator> {
        match &self.backend {
            Backend::Finite(_) => None,
            Backend::Generator(g) => Some(g),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_finite().is_some()
    }

    pub fn vertex_count(&self) -> Option<usize> {
        self.as_finite().map(FiniteGraph::len)
    }

    /// All vertices of a finite graph in index order.
    pub fn vertices(&self) -> Option<Vec<VertexId>> {
        self.as_finite()
            .map(|f| (0..f.len() as u32).map(VertexId::Index).collect())
    }

    /// Dense index of a vertex of a finite graph.
    pub fn index_of(&self, v: &VertexId) -> Option<usize> {
        match (v, &self.backend) {
            (VertexId::Index(i), Backend::Finite(f)) if (*i as usize) < f.len() => Some(*i as usize),
            _ => None,
        }
    }

    /// Human-readable name of a vertex (the spec name for finite graphs).
    pub fn name(&self, v: &VertexId) -> String {
        match (v, &self.backend) {
            (VertexId::Index(i), Backend::Finite(f)) if (*i as usize) < f.len() => {
                f.name(*i).to_string()
            }
            _ => v.to_string(),
        }
    }

    /// Resolves a vertex name as written in a spec or on the command line.
    pub fn resolve(&self, name: &str) -> Result<VertexId, GraphError> {
        let unknown = || GraphError::UnknownVertex { vertex: name.to_string() };
        let v = match &self.backend {
            Backend::Finite(f) => f.lookup(name).ok_or_else(unknown)?,
            Backend::Generator(g) => g.parse_vertex(name).ok_or_else(unknown)?,
        };
        self.backward(&v)?;
        Ok(v)
    }

    /// Backward probability `p(-i)`.
    pub fn backward(&self, v: &VertexId) -> Result<f64, GraphError> {
        match &self.backend {
            Backend::Finite(f) => match self.index_of(v) {
                Some(i) => Ok(f.backward[i]),
                None => Err(GraphError::UnknownVertex { vertex: v.to_string() }),
            },
            Backend::Generator(g) => g.backward(v),
        }
    }

    /// Forward edges of `v` in a fixed order.
    pub fn out_edges(&self, v: &VertexId) -> Result<OutEdges<'_>, GraphError> {
        match &self.backend {
            Backend::Finite(f) => match self.index_of(v) {
                Some(i) => Ok(OutEdges::Borrowed(&f.edges[i])),
                None => Err(GraphError::UnknownVertex { vertex: v.to_string() }),
            },
            Backend::Generator(g) => g.out_edges(v).map(OutEdges::Owned),
        }
    }

    pub fn kernel(&self) -> WalkKernel<'_> {
        WalkKernel { graph: self }
    }

    /// Entry `m(i,j) = p(i,j) / p(-i)` of the first-moment matrix.
    pub fn m_entry(&self, i: &VertexId, j: &VertexId) -> Result<f64, GraphError> {
        self.kernel().m(i, j)
    }

    /// Breadth-first ball of the given forward radius around the root.
    ///
    /// Returns `None` if more than `budget` vertices would be materialized.
    pub fn ball(&self, radius: usize, budget: usize) -> Result<Option<Ball>, GraphError> {
        let root = self.root();
        let mut vertices = vec![root.clone()];
        let mut index = HashMap::from([(root, 0usize)]);
        let mut frontier = vec![0usize];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &k in &frontier {
                let v = vertices[k].clone();
                for e in self.out_edges(&v)?.iter() {
                    if !index.contains_key(&e.to) {
                        if vertices.len() >= budget {
                            return Ok(None);
                        }
                        index.insert(e.to.clone(), vertices.len());
                        next.push(vertices.len());
                        vertices.push(e.to.clone());
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let complete = self.vertex_count().is_some_and(|n| n == vertices.len());
        Ok(Some(Ball {
            radius,
            vertices,
            index,
            complete,
        }))
    }
}

/// A finite set of vertices around the root, indexed densely.
#[derive(Clone, Debug)]
pub struct Ball {
    pub radius: usize,
    pub vertices: Vec<VertexId>,
    pub index: HashMap<VertexId, usize>,
    /// True when the ball is the whole (finite) graph.
    pub complete: bool,
}

impl Ball {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Read-only view of the transition structure of the walk on the cover.
#[derive(Clone, Copy)]
pub struct WalkKernel<'a> {
    graph: &'a BaseGraph,
}

impl WalkKernel<'_> {
    pub fn backward(&self, i: &VertexId) -> Result<f64, GraphError> {
        self.graph.backward(i)
    }

    /// Tree kernel `p(i,j)`; zero when there is no edge.
    pub fn p(&self, i: &VertexId, j: &VertexId) -> Result<f64, GraphError> {
        Ok(self
            .graph
            .out_edges(i)?
            .iter()
            .find(|e| &e.to == j)
            .map_or(0.0, |e| e.p))
    }

    pub fn m(&self, i: &VertexId, j: &VertexId) -> Result<f64, GraphError> {
        let b = self.backward(i)?;
        Ok(self.p(i, j)? / b)
    }

    /// Probability of the loop at the origin, `p(o,o) = p(-i0)`.
    pub fn root_loop(&self) -> Result<f64, GraphError> {
        self.backward(&self.graph.root())
    }

    /// Smallest positive one-step probability among the given vertices.
    pub fn min_step_probability<'v>(
        &self,
        vertices: impl IntoIterator<Item = &'v VertexId>,
    ) -> Result<f64, GraphError> {
        let mut min = f64::INFINITY;
        for v in vertices {
            min = min.min(self.backward(v)?);
            for e in self.graph.out_edges(v)?.iter() {
                if e.p > 0.0 {
                    min = min.min(e.p);
                }
            }
        }
        Ok(min)
    }
}
