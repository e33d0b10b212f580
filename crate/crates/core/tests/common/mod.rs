#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use conecover::graph::{EdgeSpec, GraphSpec, Name, ValidateOptions};
use conecover::{rng, BaseGraph};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ENTROPY_EXAMPLE: &str = r#"{
    "epsilon": 1e-6, "root": "i0", "kernel": "tree",
    "vertices": ["i0", "i1", "i2"],
    "edges": [
        {"from": "i0", "to": "i1", "p": 0.3333333333333333},
        {"from": "i0", "to": "i2", "p": 0.3333333333333333},
        {"from": "i1", "to": "i0", "p": 0.5},
        {"from": "i2", "to": "i1", "p": 0.75}
    ],
    "backward": {"i0": 0.3333333333333333, "i1": 0.5, "i2": 0.25}
}"#;

/// Two labels, both with `p(-i) = 0.75`; `M` has spectral radius 1/3.
pub const RECURRENT_075: &str = r#"{
    "root": "a", "vertices": ["a", "b"],
    "edges": [{"from": "a", "to": "b", "pg": 0.4}, {"from": "a", "to": "a", "pg": 0.6},
              {"from": "b", "to": "a", "pg": 1.0}],
    "backward": {"a": 0.75, "b": 0.75}
}"#;

pub fn graph(raw: &str) -> BaseGraph {
    conecover::validate_spec(raw, ValidateOptions { strict: true })
        .unwrap()
        .graph
}

/// Random strongly connected finite spec on 2 to 6 labels `v0..`, rooted at
/// `v0`.
pub fn random_spec(seed: u64) -> GraphSpec {
    let mut r = rng::stream(seed, 0);
    let n = r.random_range(2..=6usize);
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for k in 1..n {
        edges.insert((r.random_range(0..k), k));
        edges.insert((k, r.random_range(0..k)));
    }
    for _ in 0..r.random_range(0..=2 * n) {
        edges.insert((r.random_range(0..n), r.random_range(0..n)));
    }
    for i in 0..n {
        if !edges.iter().any(|&(a, _)| a == i) {
            edges.insert((i, r.random_range(0..n)));
        }
    }
    let mut weights: BTreeMap<(usize, usize), f64> =
        edges.iter().map(|&e| (e, r.random_range(0.1..1.0))).collect();
    for i in 0..n {
        let total: f64 = weights.iter().filter(|(e, _)| e.0 == i).map(|(_, w)| w).sum();
        for (e, w) in weights.iter_mut() {
            if e.0 == i {
                *w /= total;
            }
        }
    }
    let name = |k: usize| Name::Str(format!("v{k}"));
    GraphSpec {
        epsilon: None,
        root: name(0),
        kernel: None,
        degree_bound: None,
        vertices: (0..n).map(name).collect(),
        edges: weights
            .iter()
            .map(|(&(a, b), &w)| EdgeSpec {
                from: name(a),
                to: name(b),
                pg: Some(w),
                p: None,
            })
            .collect(),
        backward: (0..n)
            .map(|k| (format!("v{k}"), r.random_range(0.05..0.9)))
            .collect(),
    }
}

/// Renames `v{k}` to `w{perm[k]}` and lists vertices and edges in a
/// shuffled order. Returns the spec and the name map.
pub fn relabel(spec: &GraphSpec, seed: u64) -> (GraphSpec, BTreeMap<String, String>) {
    let mut r = rng::stream(seed, 1);
    let n = spec.vertices.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    let map: BTreeMap<String, String> = (0..n)
        .map(|k| (format!("v{k}"), format!("w{}", perm[k])))
        .collect();
    let rename = |x: &Name| Name::Str(map[&x.to_string()].clone());
    let mut vertices: Vec<Name> = spec.vertices.iter().map(rename).collect();
    vertices.shuffle(&mut r);
    let mut edges: Vec<EdgeSpec> = spec
        .edges
        .iter()
        .map(|e| EdgeSpec {
            from: rename(&e.from),
            to: rename(&e.to),
            pg: e.pg,
            p: e.p,
        })
        .collect();
    edges.shuffle(&mut r);
    let out = GraphSpec {
        epsilon: spec.epsilon,
        root: rename(&spec.root),
        kernel: spec.kernel,
        degree_bound: spec.degree_bound,
        vertices,
        edges,
        backward: spec
            .backward
            .iter()
            .map(|(k, &v)| (map[k].clone(), v))
            .collect(),
    };
    (out, map)
}

pub fn build(spec: &GraphSpec) -> BaseGraph {
    BaseGraph::from_spec(spec, ValidateOptions::default())
        .unwrap()
        .graph
}

pub mod checks {
    use std::collections::BTreeMap;

    use conecover::generating::{analyze, Domain, FIterates, FixedPointMethod, GfOptions, GfSolution, Q_ROW_TOL};
    use conecover::walk::{self, EntropyOptions, Record, StabilityMargin};
    use conecover::BaseGraph;

    pub type Check = Result<(), String>;

    pub fn q_rows_stochastic(sol: &GfSolution) -> Check {
        let Some(q) = &sol.q else { return Ok(()) };
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        for e in q {
            if !(-Q_ROW_TOL..=1.0 + Q_ROW_TOL).contains(&e.q) {
                return Err(format!("q({}, {}) = {}", e.from, e.to, e.q));
            }
            *sums.entry(&e.from).or_insert(0.0) += e.q;
        }
        for l in &sol.labels {
            let s = sums.get(l.as_str()).copied().unwrap_or(0.0);
            if (s - 1.0).abs() > Q_ROW_TOL {
                return Err(format!("row {l} of Q sums to {s}"));
            }
        }
        Ok(())
    }

    /// `F(-i) = Gbar(i) p(-i)` for every label.
    pub fn f_equals_gbar_times_backward(g: &BaseGraph, sol: &GfSolution) -> Check {
        let Some(gb) = &sol.gbar else { return Ok(()) };
        for (k, l) in sol.labels.iter().enumerate() {
            let b = g.backward(&g.resolve(l).unwrap()).unwrap();
            let rhs = gb[k] * b;
            if (sol.f[k] - rhs).abs() > 1e-10 * gb[k].max(1.0) {
                return Err(format!("F({l}) = {} but Gbar p(-i) = {rhs}", sol.f[k]));
            }
        }
        Ok(())
    }

    /// Both schemes started at 0 increase pointwise and stay below `F`, up
    /// to the round-off of a converged Newton step.
    pub fn f_iterates_monotone(g: &BaseGraph, steps: usize) -> Check {
        let domain = Domain::new(g, None).map_err(|e| e.to_string())?;
        let sol = analyze(g, &[], &GfOptions::default()).map_err(|e| e.to_string())?;
        for method in [FixedPointMethod::Kleene, FixedPointMethod::Newton] {
            let mut prev = vec![0.0; domain.len()];
            for (t, it) in FIterates::new(&domain, 1.0, method).take(steps).enumerate() {
                let cur = it.map_err(|e| e.to_string())?;
                for k in 0..cur.len() {
                    if cur[k] < prev[k] - 1e-12 || cur[k] > sol.f[k] + 1e-10 {
                        return Err(format!(
                            "{method:?} iterate {t} at {}: {} after {}, limit {}",
                            sol.labels[k], cur[k], prev[k], sol.f[k]
                        ));
                    }
                }
                prev = cur;
            }
        }
        Ok(())
    }

    /// Exit records at horizon `n` are a prefix of those at `2n`.
    pub fn exit_prefix_stable(g: &BaseGraph, n: usize, seed: u64) -> Check {
        let m = StabilityMargin::default();
        let short = walk::simulate_run(g, n, seed, 0, &[], Record::HEIGHTS).map_err(|e| e.to_string())?;
        let long = walk::simulate_run(g, 2 * n, seed, 0, &[], Record::HEIGHTS).map_err(|e| e.to_string())?;
        let a = walk::extract_exits(&short, m);
        let b = walk::extract_exits(&long, m);
        if a.len() > b.len() || a[..] != b[..a.len()] {
            let k = a.iter().zip(&b).position(|(x, y)| x != y).unwrap_or(b.len());
            return Err(format!(
                "{} records at n = {n}, {} at 2n, first mismatch at index {k}",
                a.len(),
                b.len()
            ));
        }
        Ok(())
    }

    /// Monte Carlo summaries are bitwise identical with 1, 2 and 8 workers.
    pub fn parallel_deterministic(g: &BaseGraph, seed: u64) -> Check {
        let run = |threads: usize| -> Result<String, String> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| e.to_string())?;
            pool.install(|| {
                let rec = walk::empirical_recurrence(g, 2_000, 64, seed).map_err(|e| e.to_string())?;
                let ent = walk::empirical_entropy_speed(g, &EntropyOptions::new(64, 2_000, seed))
                    .map_err(|e| e.to_string())?;
                let gw = conecover::branching::gw_trials(g, 64, 500, 1e4, seed).map_err(|e| e.to_string())?;
                Ok(format!(
                    "{}|{}|{:?}",
                    serde_json::to_string(&rec).unwrap(),
                    serde_json::to_string(&ent).unwrap(),
                    gw
                ))
            })
        };
        let base = run(1)?;
        for t in [2, 8] {
            if run(t)? != base {
                return Err(format!("output with {t} workers differs from 1 worker"));
            }
        }
        Ok(())
    }

    fn close(a: Option<f64>, b: Option<f64>, what: &str) -> Check {
        match (a, b) {
            (None, None) => Ok(()),
            (Some(x), Some(y)) if (x - y).abs() <= 1e-9 * x.abs().max(1.0) => Ok(()),
            _ => Err(format!("{what}: {a:?} vs {b:?}")),
        }
    }

    /// Relabeling the vertices permutes `F`, `nu` and `Q` and leaves the
    /// scalars unchanged.
    pub fn permutation_equivariant(seed: u64) -> Check {
        let spec = super::random_spec(seed);
        let (perm, map) = super::relabel(&spec, seed);
        let (a, b) = match (
            analyze(&super::build(&spec), &[], &GfOptions::default()),
            analyze(&super::build(&perm), &[], &GfOptions::default()),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(x), Err(y)) if std::mem::discriminant(&x) == std::mem::discriminant(&y) => return Ok(()),
            (x, y) => return Err(format!("{:?} vs {:?}", x.err(), y.err())),
        };
        if a.regime != b.regime {
            return Err(format!("regime {:?} vs {:?}", a.regime, b.regime));
        }
        for (what, x, y) in [
            ("U_root", Some(a.u_root), Some(b.u_root)),
            ("q_loop", Some(a.q_loop), Some(b.q_loop)),
            ("Lambda", a.lambda, b.lambda),
            ("ell0", a.ell0, b.ell0),
            ("h", a.h, b.h),
            ("dim_upper", a.dim_upper, b.dim_upper),
        ] {
            close(x, y, what)?;
        }
        for (k, l) in a.labels.iter().enumerate() {
            let kb = b.index(&map[l]).ok_or_else(|| format!("label {l} missing after relabeling"))?;
            close(Some(a.f[k]), Some(b.f[kb]), &format!("F({l})"))?;
            if let (Some(na), Some(nb)) = (&a.nu, &b.nu) {
                close(Some(na[k]), Some(nb[kb]), &format!("nu({l})"))?;
            }
        }
        if let (Some(qa), Some(qb)) = (&a.q, &b.q) {
            let qb: BTreeMap<(&str, &str), f64> =
                qb.iter().map(|e| ((e.from.as_str(), e.to.as_str()), e.q)).collect();
            for e in qa {
                let y = qb.get(&(map[&e.from].as_str(), map[&e.to].as_str())).copied();
                close(Some(e.q), Some(y.unwrap_or(0.0)), &format!("q({}, {})", e.from, e.to))?;
            }
        }
        Ok(())
    }
}
