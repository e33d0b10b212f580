use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GeneratorSpec, GraphError};

/// Vertex name as written in a spec: a string or a non-negative integer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Name {
    Int(u64),
    Str(String),
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::Int(n) => write!(f, "{n}"),
            Name::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::Str(s.to_string())
    }
}

/// Which probabilities the edges of a finite spec carry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelConvention {
    /// `p_G(i,j)`, each row summing to one.
    #[default]
    Pg,
    /// Tree kernel `p(i,j)`, summing to `1 - p(-i)`.
    Tree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: Name,
    pub to: Name,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// A finite spec document before validation. Parallel edges are allowed
/// here; [`expand_multiedges`] removes them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub root: Name,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_bound: Option<usize>,
    pub vertices: Vec<Name>,
    pub edges: Vec<EdgeSpec>,
    pub backward: BTreeMap<String, f64>,
}

/// A parsed spec document.
#[derive(Clone, Debug)]
pub enum SpecDocument {
    Finite(GraphSpec),
    Generator(GeneratorSpec),
}

impl SpecDocument {
    pub fn parse(raw: &str) -> Result<Self, GraphError> {
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| GraphError::Parse(e.to_string()))?;
        let is_generator = value.get("generator").is_some();
        let doc = if is_generator {
            SpecDocument::Generator(
                serde_json::from_value(value).map_err(|e| GraphError::Parse(e.to_string()))?,
            )
        } else {
            SpecDocument::Finite(
                serde_json::from_value(value).map_err(|e| GraphError::Parse(e.to_string()))?,
            )
        };
        if let SpecDocument::Finite(spec) = &doc {
            let has_pg = spec.edges.iter().any(|e| e.pg.is_some());
            let has_p = spec.edges.iter().any(|e| e.p.is_some());
            let declared = spec.kernel.unwrap_or_default();
            let mixed = match declared {
                KernelConvention::Pg => has_p,
                KernelConvention::Tree => has_pg,
            };
            if mixed {
                return Err(GraphError::Parse(format!(
                    "edges must use only the declared \"{}\" convention",
                    match declared {
                        KernelConvention::Pg => "pg",
                        KernelConvention::Tree => "p",
                    }
                )));
            }
        }
        Ok(doc)
    }
}

/// Replaces parallel edges by fresh vertices so that the directed cover is
/// unchanged up to relabeling.
///
/// For `m` parallel edges `i -> j` one edge keeps pointing at `j` and each of
/// the other `m - 1` points at a fresh copy of `j`. A copy has `j`'s backward
/// probability and `j`'s (expanded) out-edges, so its cone is isomorphic to
/// the cone of `j`. Specs without parallel edges are returned unchanged.
pub fn expand_multiedges(spec: &GraphSpec) -> GraphSpec {
    let mut multiplicity: HashMap<(Name, Name), usize> = HashMap::new();
    for e in &spec.edges {
        *multiplicity.entry((e.from.clone(), e.to.clone())).or_default() += 1;
    }
    if multiplicity.values().all(|&m| m == 1) {
        return spec.clone();
    }

    let mut taken: HashSet<String> = spec.vertices.iter().map(Name::to_string).collect();
    let mut fresh = |base: &str| {
        let mut candidate = base.to_string();
        while !taken.insert(candidate.clone()) {
            candidate.push('\'');
        }
        Name::Str(candidate)
    };

    // Redirect repeated occurrences of each (i, j) to copies of j.
    let mut occurrence: HashMap<(Name, Name), usize> = HashMap::new();
    let mut copies: Vec<(Name, Name)> = Vec::new(); // (copy, original)
    let mut edges = Vec::with_capacity(spec.edges.len());
    for e in &spec.edges {
        let k = occurrence.entry((e.from.clone(), e.to.clone())).or_default();
        let to = if *k == 0 {
            e.to.clone()
        } else {
            let c = fresh(&format!("{}@{}.{}", e.to, e.from, k));
            copies.push((c.clone(), e.to.clone()));
            c
        };
        *k += 1;
        edges.push(EdgeSpec { to, ..e.clone() });
    }

    let mut vertices = spec.vertices.clone();
    let mut backward = spec.backward.clone();
    let originals: Vec<EdgeSpec> = edges.clone();
    for (copy, original) in &copies {
        vertices.push(copy.clone());
        if let Some(&b) = spec.backward.get(&original.to_string()) {
            backward.insert(copy.to_string(), b);
        }
        for e in originals.iter().filter(|e| &e.from == original) {
            edges.push(EdgeSpec {
                from: copy.clone(),
                ..e.clone()
            });
        }
    }

    GraphSpec {
        vertices,
        edges,
        backward,
        ..spec.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_loop() -> GraphSpec {
        serde_json::from_str(
            r#"{"root": "v", "vertices": ["v"],
                "edges": [{"from": "v", "to": "v", "pg": 0.5}, {"from": "v", "to": "v", "pg": 0.5}],
                "backward": {"v": 0.25}}"#,
        )
        .unwrap()
    }

    #[test]
    fn double_loop_expands_to_two_vertices() {
        let out = expand_multiedges(&double_loop());
        assert_eq!(out.vertices.len(), 2);
        assert_eq!(out.edges.len(), 4);
        for v in &out.vertices {
            let targets: HashSet<_> = out.edges.iter().filter(|e| &e.from == v).map(|e| &e.to).collect();
            assert_eq!(targets.len(), 2, "every vertex has both vertices as children");
        }
        let g = crate::graph::BaseGraph::from_spec(&out, Default::default()).unwrap();
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn simple_spec_is_fixed_point() {
        let once = expand_multiedges(&double_loop());
        assert_eq!(expand_multiedges(&once), once);
    }

    #[test]
    fn mixed_conventions_are_rejected() {
        let raw = r#"{"root": "a", "vertices": ["a"], "kernel": "tree",
            "edges": [{"from": "a", "to": "a", "pg": 1.0}], "backward": {"a": 0.3}}"#;
        assert!(matches!(SpecDocument::parse(raw), Err(GraphError::Parse(_))));
    }

    #[test]
    fn integer_names_are_accepted() {
        let raw = r#"{"root": 0, "vertices": [0, 1],
            "edges": [{"from": 0, "to": 1, "pg": 1.0}, {"from": 1, "to": 0, "pg": 1.0}],
            "backward": {"0": 0.3, "1": 0.4}}"#;
        let v = crate::graph::validate_spec(raw, Default::default()).unwrap();
        assert_eq!(v.graph.vertex_count(), Some(2));
    }
}
