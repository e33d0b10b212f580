//! Procedural base graphs.
//!
//! Every generator is a pure function of its parameters: kernel queries for a
//! vertex never depend on earlier queries. `homesick` and `homogeneous_tree`
//! describe finite graphs and are materialized as ordinary finite specs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use super::{
    BaseGraph, DegreeBound, Edge, EdgeSpec, GraphError, GraphSpec, Name, ValidateOptions, VertexId,
    DEFAULT_EPSILON,
};

pub const GENERATOR_NAMES: [&str; 6] = [
    "halfline_critical",
    "two_sided_line",
    "homesick",
    "oscillating_growth",
    "rwdcre",
    "homogeneous_tree",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

/// A named generator with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(rename = "generator")]
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl GeneratorSpec {
    pub fn new(name: &str) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), ParamValue::Number(value));
        self
    }

    pub fn with_list(mut self, key: &str, values: &[f64]) -> Self {
        self.params.insert(key.to_string(), ParamValue::List(values.to_vec()));
        self
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64, GraphError> {
        match (self.params.get(key), default) {
            (Some(ParamValue::Number(x)), _) => Ok(*x),
            (Some(ParamValue::List(v)), _) if v.len() == 1 => Ok(v[0]),
            (Some(ParamValue::List(_)), _) => Err(invalid(key, "expected a number")),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(invalid(key, "missing")),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, GraphError> {
        Ok(match self.params.get(key) {
            Some(ParamValue::Number(x)) => Some(vec![*x]),
            Some(ParamValue::List(v)) => Some(v.clone()),
            None => None,
        })
    }

    fn check_known(&self, known: &[&str]) -> Result<(), GraphError> {
        for k in self.params.keys() {
            if !known.contains(&k.as_str()) && k != "epsilon" {
                return Err(invalid(k, &format!("not a parameter of {}", self.name)));
            }
        }
        Ok(())
    }

    /// Materializes the generator as a base graph.
    pub fn build(&self) -> Result<BaseGraph, GraphError> {
        let epsilon = self.number("epsilon", Some(DEFAULT_EPSILON))?;
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(invalid("epsilon", "must lie in (0, 1/2)"));
        }
        let backward_ok = |name: &str, b: f64| {
            if b > epsilon && b < 1.0 - epsilon {
                Ok(b)
            } else {
                Err(invalid(name, &format!("{b} outside ({epsilon}, 1 - {epsilon})")))
            }
        };
        let gen = match self.name.as_str() {
            "halfline_critical" => {
                self.check_known(&[])?;
                Generator::HalflineCritical
            }
            "two_sided_line" => {
                self.check_known(&["p", "q", "c1", "c2"])?;
                let p = open_unit("p", self.number("p", Some(0.7))?)?;
                let q = open_unit("q", self.number("q", Some(0.8))?)?;
                let c1 = backward_ok("c1", self.number("c1", Some(0.1))?)?;
                let c2 = backward_ok("c2", self.number("c2", Some(0.2))?)?;
                Generator::TwoSidedLine { p, q, c1, c2 }
            }
            "oscillating_growth" => {
                self.check_known(&["backward"])?;
                let b = backward_ok("backward", self.number("backward", Some(1.0 / 3.0))?)?;
                Generator::OscillatingGrowth { backward: b }
            }
            "rwdcre" => {
                self.check_known(&["seed", "omega", "omega_weights", "nu", "nu_weights"])?;
                let seed = self.number("seed", Some(0.0))?;
                if seed < 0.0 || seed.fract() != 0.0 || seed > u64::MAX as f64 {
                    return Err(invalid("seed", "must be a non-negative integer"));
                }
                let omega = Marginal::new(
                    "omega",
                    self.list("omega")?.unwrap_or_else(|| vec![0.5]),
                    self.list("omega_weights")?,
                )?;
                for &w in &omega.values {
                    open_unit("omega", w)?;
                }
                let nu = Marginal::new(
                    "nu",
                    self.list("nu")?.unwrap_or_else(|| vec![0.4]),
                    self.list("nu_weights")?,
                )?;
                for &b in &nu.values {
                    backward_ok("nu", b)?;
                }
                Generator::Rwdcre(RandomEnvironment {
                    seed: seed as u64,
                    omega,
                    nu,
                })
            }
            "homesick" => {
                self.check_known(&["d", "lambda"])?;
                let d = self.degree()?;
                let lambda = self.number("lambda", None)?;
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid("lambda", "must be positive"));
                }
                let b = backward_ok("lambda", lambda / (lambda + d as f64))?;
                return uniform_clique(d, b, epsilon);
            }
            "homogeneous_tree" => {
                self.check_known(&["d", "beta"])?;
                let d = self.degree()?;
                let b = backward_ok("beta", self.number("beta", None)?)?;
                return uniform_clique(d, b, epsilon);
            }
            other => return Err(GraphError::UnknownGenerator(other.to_string())),
        };
        Ok(BaseGraph::from_generator(gen, epsilon))
    }

    fn degree(&self) -> Result<usize, GraphError> {
        let d = self.number("d", Some(2.0))?;
        if d < 1.0 || d.fract() != 0.0 || d > 1e6 {
            return Err(invalid("d", "must be a positive integer"));
        }
        Ok(d as usize)
    }
}

fn invalid(name: &str, reason: &str) -> GraphError {
    GraphError::InvalidParameter {
        name: name.to_string(),
        reason: reason.to_string(),
    }
}

fn open_unit(name: &str, x: f64) -> Result<f64, GraphError> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(invalid(name, &format!("{x} outside (0, 1)")))
    }
}

/// `d` vertices, each with an edge to every vertex (loops included), uniform
/// forward kernel and constant backward probability. Its cover is the rooted
/// `d`-ary tree: the multi-edge expansion of a single vertex with `d` loops.
fn uniform_clique(d: usize, backward: f64, epsilon: f64) -> Result<BaseGraph, GraphError> {
    let names: Vec<Name> = (0..d as u64).map(Name::Int).collect();
    let edges = names
        .iter()
        .flat_map(|from| {
            names.iter().map(move |to| EdgeSpec {
                from: from.clone(),
                to: to.clone(),
                pg: Some(1.0 / d as f64),
                p: None,
            })
        })
        .collect();
    let spec = GraphSpec {
        epsilon: Some(epsilon),
        root: Name::Int(0),
        kernel: None,
        degree_bound: None,
        backward: names.iter().map(|n| (n.to_string(), backward)).collect(),
        vertices: names,
        edges,
    };
    Ok(BaseGraph::from_spec(&spec, ValidateOptions { strict: true })?.graph)
}

/// Finitely supported distribution on (0, 1).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Marginal {
    pub values: Vec<f64>,
    /// Normalized weights.
    pub weights: Vec<f64>,
}

impl Marginal {
    pub fn new(name: &str, values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self, GraphError> {
        if values.is_empty() {
            return Err(invalid(name, "empty support"));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; values.len()]);
        if weights.len() != values.len() || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(invalid(name, "weights must be positive, one per support point"));
        }
        let total: f64 = weights.iter().sum();
        Ok(Marginal {
            values,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *v;
            }
        }
        *self.values.last().unwrap()
    }
}

/// Environment of a site of the random-environment line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteEnvironment {
    /// Forward kernel towards `z + 1`.
    pub omega_plus: f64,
    /// Backward probability `p(-z)`.
    pub nu: f64,
}

/// I.i.d. environment on the integers, drawn lazily per site.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomEnvironment {
    pub seed: u64,
    pub omega: Marginal,
    pub nu: Marginal,
}

impl RandomEnvironment {
    /// Environment at site `z`; a pure function of `(seed, z)`.
    pub fn site(&self, z: i64) -> SiteEnvironment {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((z << 1) ^ (z >> 63)) as u64);
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        SiteEnvironment {
            omega_plus: self.omega.sample(u),
            nu: self.nu.sample(v),
        }
    }
}

/// An infinite, procedurally defined base graph.
#[derive(Clone, Debug)]
pub enum Generator {
    /// Half-line `0, 1, 2, ...` with the critical rates `m(i,i+1) = (1+1/i)^2`,
    /// `m(i,i-1) = 3^{-i}`, `m(0,1) = 2`.
    HalflineCritical,
    /// Integers with drift `p` to the right on the positive side, `q` to the
    /// left on the negative side, and backward probability `c1` on
    /// non-negative sites and `c2` on negative ones.
    TwoSidedLine { p: f64, q: f64, c1: f64, c2: f64 },
    /// Circles and binary-tree gadgets glued so that the cover has no growth
    /// rate.
    OscillatingGrowth { backward: f64 },
    /// Integers in an i.i.d. random environment.
    Rwdcre(RandomEnvironment),
}

impl Generator {
    pub fn degree_bound(&self) -> DegreeBound {
        DegreeBound::Global(2)
    }

    pub fn root(&self) -> VertexId {
        match self {
            Generator::OscillatingGrowth { .. } => OscVertex::root().to_id(),
            _ => VertexId::Site(0),
        }
    }

    pub fn parse_vertex(&self, name: &str) -> Option<VertexId> {
        match self {
            Generator::OscillatingGrowth { .. } => OscVertex::parse(name).map(|v| v.to_id()),
            _ => name.trim().parse().ok().map(VertexId::Site),
        }
    }

    fn site(&self, v: &VertexId) -> Result<i64, GraphError> {
        let z = v
            .as_site()
            .ok_or_else(|| GraphError::UnknownVertex { vertex: v.to_string() })?;
        if matches!(self, Generator::HalflineCritical) && z < 0 {
            return Err(GraphError::UnknownVertex { vertex: v.to_string() });
        }
        Ok(z)
    }

    pub fn backward(&self, v: &VertexId) -> Result<f64, GraphError> {
        match self {
            Generator::HalflineCritical => {
                let i = self.site(v)?;
                Ok(if i == 0 { 1.0 / 3.0 } else { halfline_rates(i).0 })
            }
            Generator::TwoSidedLine { c1, c2, .. } => {
                Ok(if self.site(v)? >= 0 { *c1 } else { *c2 })
            }
            Generator::Rwdcre(env) => Ok(env.site(self.site(v)?).nu),
            Generator::OscillatingGrowth { backward } => {
                OscVertex::from_id(v)?;
                Ok(*backward)
            }
        }
    }

    pub fn out_edges(&self, v: &VertexId) -> Result<SmallVec<[Edge; 2]>, GraphError> {
        let pair = |z: i64, b: f64, up: f64| -> SmallVec<[Edge; 2]> {
            smallvec![
                Edge { to: VertexId::Site(z + 1), pg: up, p: (1.0 - b) * up },
                Edge { to: VertexId::Site(z - 1), pg: 1.0 - up, p: (1.0 - b) * (1.0 - up) },
            ]
        };
        match self {
            Generator::HalflineCritical => {
                let i = self.site(v)?;
                if i == 0 {
                    return Ok(smallvec![Edge { to: VertexId::Site(1), pg: 1.0, p: 2.0 / 3.0 }]);
                }
                let (b, up, down) = halfline_rates(i);
                let mut out = smallvec![Edge {
                    to: VertexId::Site(i + 1),
                    pg: up / (up + down),
                    p: b * up,
                }];
                // 3^{-i} underflows to zero for i beyond ~680; the edge then
                // carries no probability mass and is dropped.
                if down > 0.0 {
                    out.push(Edge {
                        to: VertexId::Site(i - 1),
                        pg: down / (up + down),
                        p: b * down,
                    });
                }
                Ok(out)
            }
            Generator::TwoSidedLine { p, q, c1, c2 } => {
                let z = self.site(v)?;
                Ok(match z {
                    0 => pair(0, *c1, 0.5),
                    z if z > 0 => pair(z, *c1, *p),
                    z => pair(z, *c2, 1.0 - q),
                })
            }
            Generator::Rwdcre(env) => {
                let z = self.site(v)?;
                let s = env.site(z);
                Ok(pair(z, s.nu, s.omega_plus))
            }
            Generator::OscillatingGrowth { backward } => {
                let succ = OscVertex::from_id(v)?.successors().map_err(|reason| {
                    GraphError::GeneratorFailure {
                        vertex: v.to_string(),
                        reason,
                    }
                })?;
                let pg = 1.0 / succ.len() as f64;
                Ok(succ
                    .into_iter()
                    .map(|w| Edge {
                        to: w.to_id(),
                        pg,
                        p: (1.0 - backward) * pg,
                    })
                    .collect())
            }
        }
    }
}

/// `(p(-i), m(i,i+1), m(i,i-1))` for `i >= 1` on the critical half-line.
fn halfline_rates(i: i64) -> (f64, f64, f64) {
    let up = (1.0 + 1.0 / i as f64).powi(2);
    let down = (1.0f64 / 3.0).powi(i.min(i32::MAX as i64) as i32);
    (1.0 / (1.0 + up + down), up, down)
}

/// Sizes `k_1 = 2`, `k_{n+1} = 3 (k_1 + ... + k_n)` of the gadgets.
fn gadget_size(n: u32) -> Result<u64, String> {
    match n {
        0 => Err("gadget level 0".into()),
        1 => Ok(2),
        n if n <= 32 => Ok(6 * 4u64.pow(n - 2)),
        n => Err(format!("gadget level {n} exceeds the supported depth")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum OscLocal {
    /// Vertex `pos` (2..=k_n, or 1 for the root circle) of an odd-level circle.
    Circle { n: u32, pos: u64 },
    /// Binary-tree vertex of an even-level gadget, addressed by its bit path.
    Tree { n: u32, bits: String },
    /// Interior vertex `s` of the path leaving leaf `bits`.
    Path { n: u32, bits: String, s: u64 },
}

/// Vertex of the oscillating-growth graph: the leaves chosen at every
/// enclosing tree gadget, then a position inside the current gadget.
///
/// Token syntax: `<leaf>.<leaf>...|c<n>:<pos>`, `...|t<n>:<bits>` or
/// `...|p<n>:<bits>:<s>`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct OscVertex {
    chain: Vec<String>,
    local: OscLocal,
}

impl OscVertex {
    fn root() -> Self {
        OscVertex {
            chain: Vec::new(),
            local: OscLocal::Circle { n: 1, pos: 1 },
        }
    }

    fn to_id(&self) -> VertexId {
        let mut s = self.chain.join(".");
        s.push('|');
        match &self.local {
            OscLocal::Circle { n, pos } => write!(s, "c{n}:{pos}"),
            OscLocal::Tree { n, bits } => write!(s, "t{n}:{bits}"),
            OscLocal::Path { n, bits, s: step } => write!(s, "p{n}:{bits}:{step}"),
        }
        .unwrap();
        VertexId::token(&s)
    }

    fn from_id(v: &VertexId) -> Result<Self, GraphError> {
        match v {
            VertexId::Token(t) => Self::parse(t),
            _ => None,
        }
        .ok_or_else(|| GraphError::UnknownVertex { vertex: v.to_string() })
    }

    fn parse(token: &str) -> Option<Self> {
        let (chain, local) = token.split_once('|')?;
        let chain: Vec<String> = if chain.is_empty() {
            Vec::new()
        } else {
            chain.split('.').map(str::to_string).collect()
        };
        let bits_ok = |b: &str| b.bytes().all(|c| c == b'0' || c == b'1');
        if !chain.iter().all(|b| bits_ok(b)) {
            return None;
        }
        let kind = local.chars().next()?;
        let mut parts = local[1..].split(':');
        let n: u32 = parts.next()?.parse().ok()?;
        let local = match kind {
            'c' => OscLocal::Circle { n, pos: parts.next()?.parse().ok()? },
            't' => OscLocal::Tree { n, bits: parts.next()?.to_string() },
            'p' => OscLocal::Path {
                n,
                bits: parts.next()?.to_string(),
                s: parts.next()?.parse().ok()?,
            },
            _ => return None,
        };
        if parts.next().is_some() {
            return None;
        }
        let v = OscVertex { chain, local };
        v.is_canonical().then_some(v)
    }

    fn is_canonical(&self) -> bool {
        let depth = self.chain.len() as u32;
        match &self.local {
            OscLocal::Circle { n, pos } => {
                n % 2 == 1
                    && *n == 2 * depth + 1
                    && gadget_size(*n).is_ok_and(|k| *pos <= k && (*pos >= 2 || *n == 1 && *pos == 1))
            }
            OscLocal::Tree { n, bits } => {
                n % 2 == 0
                    && *n == 2 * depth + 2
                    && gadget_size(*n).is_ok_and(|k| (bits.len() as u64) < k)
                    && bits.bytes().all(|c| c == b'0' || c == b'1')
            }
            OscLocal::Path { n, bits, s } => {
                n % 2 == 0
                    && *n == 2 * depth + 2
                    && gadget_size(*n).is_ok_and(|k| bits.len() as u64 == k - 1)
                    && gadget_size(n + 1).is_ok_and(|k| *s >= 1 && *s < k)
                    && bits.bytes().all(|c| c == b'0' || c == b'1')
            }
        }
    }

    fn with(&self, local: OscLocal) -> Self {
        OscVertex {
            chain: self.chain.clone(),
            local,
        }
    }

    fn successors(&self) -> Result<Vec<OscVertex>, String> {
        Ok(match &self.local {
            &OscLocal::Circle { n, pos } => {
                let k = gadget_size(n)?;
                if pos < k {
                    vec![self.with(OscLocal::Circle { n, pos: pos + 1 })]
                } else {
                    // end point: back to the start, and into the next gadget
                    let start = if n == 1 {
                        self.with(OscLocal::Circle { n: 1, pos: 1 })
                    } else {
                        let mut chain = self.chain.clone();
                        let leaf = chain.pop().ok_or("circle without enclosing leaf")?;
                        OscVertex {
                            chain,
                            local: OscLocal::Tree { n: n - 1, bits: leaf },
                        }
                    };
                    gadget_size(n + 1)?;
                    vec![start, self.with(OscLocal::Tree { n: n + 1, bits: String::new() })]
                }
            }
            OscLocal::Tree { n, bits } => {
                let n = *n;
                let depth = gadget_size(n)? - 1;
                if (bits.len() as u64) < depth {
                    vec![
                        self.with(OscLocal::Tree { n, bits: format!("{bits}0") }),
                        self.with(OscLocal::Tree { n, bits: format!("{bits}1") }),
                    ]
                } else {
                    gadget_size(n + 1)?;
                    let mut chain = self.chain.clone();
                    chain.push(bits.clone());
                    vec![
                        self.with(OscLocal::Path { n, bits: bits.clone(), s: 1 }),
                        OscVertex {
                            chain,
                            local: OscLocal::Circle { n: n + 1, pos: 2 },
                        },
                    ]
                }
            }
            OscLocal::Path { n, bits, s } => {
                let n = *n;
                let len = gadget_size(n + 1)?;
                if *s + 1 < len {
                    vec![self.with(OscLocal::Path { n, bits: bits.clone(), s: s + 1 })]
                } else if bits.bytes().all(|c| c == b'1') {
                    // last leaf: back to o_n, the end point of the previous circle
                    vec![self.with(OscLocal::Circle { n: n - 1, pos: gadget_size(n - 1)? })]
                } else {
                    vec![self.with(OscLocal::Tree { n, bits: increment(bits) })]
                }
            }
        })
    }
}

/// Next leaf in lexicographic order.
fn increment(bits: &str) -> String {
    let mut b = bits.as_bytes().to_vec();
    for c in b.iter_mut().rev() {
        if *c == b'1' {
            *c = b'0';
        } else {
            *c = b'1';
            break;
        }
    }
    String::from_utf8(b).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfline_rates_match_definition() {
        let g = GeneratorSpec::new("halfline_critical").build().unwrap();
        let m = |i: i64, j: i64| g.m_entry(&VertexId::Site(i), &VertexId::Site(j)).unwrap();
        assert!((m(0, 1) - 2.0).abs() < 1e-12);
        for i in [1i64, 2, 10] {
            let x = i as f64;
            assert!((m(i, i + 1) - (1.0 + 1.0 / x).powi(2)).abs() < 1e-12);
            assert!((m(i, i - 1) - (1.0f64 / 3.0).powi(i as i32)).abs() < 1e-12);
        }
        assert!(g.backward(&VertexId::Site(-1)).is_err());
    }

    #[test]
    fn generators_are_stochastic() {
        let specs = [
            GeneratorSpec::new("halfline_critical"),
            GeneratorSpec::new("two_sided_line"),
            GeneratorSpec::new("oscillating_growth"),
            GeneratorSpec::new("rwdcre")
                .with("seed", 3.0)
                .with_list("omega", &[0.3, 0.8])
                .with_list("nu", &[0.2, 0.45]),
            GeneratorSpec::new("homesick").with("lambda", 1.5),
            GeneratorSpec::new("homogeneous_tree").with("beta", 0.25).with("d", 3.0),
        ];
        for spec in specs {
            let g = spec.build().unwrap();
            let ball = g.ball(40, 100_000).unwrap().unwrap();
            for v in &ball.vertices {
                let b = g.backward(v).unwrap();
                assert!(b > g.epsilon() && b < 1.0 - g.epsilon());
                let out = g.out_edges(v).unwrap();
                assert!(!out.is_empty() && out.len() <= 3);
                let s: f64 = b + out.iter().map(|e| e.p).sum::<f64>();
                assert!((s - 1.0).abs() < 1e-12, "{} at {v}: {s}", spec.name);
                let spg: f64 = out.iter().map(|e| e.pg).sum();
                assert!((spg - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rwdcre_is_deterministic_per_site() {
        let spec = GeneratorSpec::new("rwdcre")
            .with("seed", 11.0)
            .with_list("omega", &[0.3, 0.8])
            .with_list("nu", &[0.2, 0.45]);
        let a = spec.build().unwrap();
        let b = spec.build().unwrap();
        let mut distinct = std::collections::BTreeSet::new();
        for z in -50..50 {
            let v = VertexId::Site(z);
            assert_eq!(a.backward(&v).unwrap(), b.backward(&v).unwrap());
            distinct.insert((a.backward(&v).unwrap() * 100.0) as i64);
        }
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn oscillating_tokens_round_trip() {
        let g = GeneratorSpec::new("oscillating_growth").build().unwrap();
        let ball = g.ball(30, 1_000_000).unwrap().unwrap();
        assert!(ball.len() > 100);
        for v in &ball.vertices {
            let name = g.name(v);
            assert_eq!(&g.resolve(&name).unwrap(), v);
        }
        assert!(g.resolve("|c1:3").is_err());
        assert!(g.resolve("|c3:2").is_err());
    }

    #[test]
    fn oscillating_root_circle() {
        let g = GeneratorSpec::new("oscillating_growth").build().unwrap();
        let root = g.root();
        let out = g.out_edges(&root).unwrap();
        assert_eq!(out.len(), 1);
        let end = out[0].to.clone();
        let out: Vec<_> = g.out_edges(&end).unwrap().iter().map(|e| e.to.clone()).collect();
        assert_eq!(out, vec![root, VertexId::token("|t2:")]);
    }

    #[test]
    fn increment_wraps_trailing_ones() {
        assert_eq!(increment("0011"), "0100");
        assert_eq!(increment("0"), "1");
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(GeneratorSpec::new("nope").build().is_err());
        assert!(GeneratorSpec::new("homogeneous_tree").build().is_err());
        assert!(GeneratorSpec::new("homogeneous_tree").with("beta", 1.0).build().is_err());
        assert!(GeneratorSpec::new("two_sided_line").with("x", 1.0).build().is_err());
        assert!(GeneratorSpec::new("rwdcre").with_list("omega", &[1.0]).build().is_err());
    }
}
