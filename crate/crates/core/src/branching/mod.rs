//! Continuous-time multi-type Galton-Watson process attached to the walk.
//!
//! A particle of type `i` dies at rate `p(-i)` and gives birth to a particle
//! of type `j` at rate `p(i,j)`, so every particle carries total rate 1. The
//! extinction probability starting from one particle of the root type equals
//! the probability that the walk on the cover ever uses the loop at the
//! origin; [`couple_check`] compares Monte Carlo estimates of the two.

mod fenwick;

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{BaseGraph, GraphError, VertexId};
use crate::rng;
use crate::walk::{self, Engine, Estimate, WalkError};

pub use fenwick::Fenwick;

/// Default population size treated as survival.
pub const DEFAULT_CAP: usize = 100_000;

/// Particle counts per type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Population {
    types: Vec<VertexId>,
    slot: HashMap<VertexId, usize>,
    counts: Fenwick,
    total: u64,
}

impl Population {
    pub fn new(root: VertexId) -> Self {
        let mut p = Population::default();
        p.add(&root);
        p
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_extinct(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, v: &VertexId) -> u64 {
        self.slot.get(v).map_or(0, |&s| self.counts.get(s))
    }

    fn add(&mut self, v: &VertexId) {
        let s = match self.slot.get(v) {
            Some(&s) => s,
            None => {
                let s = self.types.len();
                self.types.push(v.clone());
                self.slot.insert(v.clone(), s);
                self.counts.push(0);
                s
            }
        };
        self.counts.add(s, 1);
        self.total += 1;
    }

    fn remove_slot(&mut self, s: usize) {
        self.counts.sub(s, 1);
        self.total -= 1;
    }

    /// Type of the particle with rank `r` in `0..total`.
    fn pick(&self, r: u64) -> usize {
        self.counts.find(r)
    }

    /// `(type, count)` for types with at least one particle.
    pub fn nonzero(&self) -> Vec<(VertexId, u64)> {
        (0..self.types.len())
            .filter_map(|s| {
                let c = self.counts.get(s);
                (c > 0).then(|| (self.types[s].clone(), c))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GwOutcome {
    Extinct { time: f64, events: u64 },
    ExceededCap { time: f64, events: u64, population: u64 },
    TimedOut { time: f64, events: u64, population: u64 },
}

impl GwOutcome {
    pub fn is_extinct(&self) -> bool {
        matches!(self, GwOutcome::Extinct { .. })
    }
}

fn run_gw(
    g: &BaseGraph,
    e: &dyn Engine,
    cap: usize,
    t_max: f64,
    seed: u64,
    trial: u64,
) -> Result<GwOutcome, GraphError> {
    let mut rng = rng::stream(seed, trial);
    let mut pop = Population::new(g.root());
    let mut time = 0.0;
    let mut events = 0u64;
    loop {
        let n = pop.total();
        let wait: f64 = Exp1.sample(&mut rng);
        time += wait / n as f64;
        if time > t_max {
            return Ok(GwOutcome::TimedOut {
                time: t_max,
                events,
                population: n,
            });
        }
        let s = pop.pick(rng.random_range(0..n));
        let u: f64 = rng.random();
        events += 1;
        let label = pop.types[s].clone();
        match e.step(&label, u)? {
            None => {
                pop.remove_slot(s);
                if pop.is_extinct() {
                    return Ok(GwOutcome::Extinct { time, events });
                }
            }
            Some(child) => {
                pop.add(&child);
                if pop.total() > cap as u64 {
                    return Ok(GwOutcome::ExceededCap {
                        time,
                        events,
                        population: pop.total(),
                    });
                }
            }
        }
    }
}

/// Gillespie simulation from one particle of the root type, stopped at
/// extinction, when the population exceeds `cap`, or at time `t_max`.
pub fn simulate_gw(
    g: &BaseGraph,
    cap: usize,
    t_max: f64,
    seed: u64,
) -> Result<GwOutcome, GraphError> {
    let e = walk::engine(g);
    run_gw(g, e.as_ref(), cap.max(1), t_max, seed, 0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GwTally {
    pub extinct: usize,
    pub exceeded_cap: usize,
    pub timed_out: usize,
}

/// `trials` independent runs of [`simulate_gw`]; trial `t` uses stream
/// `(seed, t)`.
pub fn gw_trials(
    g: &BaseGraph,
    trials: usize,
    cap: usize,
    t_max: f64,
    seed: u64,
) -> Result<GwTally, GraphError> {
    let e = walk::engine(g);
    let outcomes: Vec<GwOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_gw(g, e.as_ref(), cap.max(1), t_max, seed, t))
        .collect::<Result<_, _>>()?;
    let mut tally = GwTally::default();
    for o in outcomes {
        match o {
            GwOutcome::Extinct { .. } => tally.extinct += 1,
            GwOutcome::ExceededCap { .. } => tally.exceeded_cap += 1,
            GwOutcome::TimedOut { .. } => tally.timed_out += 1,
        }
    }
    Ok(tally)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingReport {
    pub trials: usize,
    pub cap: usize,
    pub horizon: usize,
    pub seed: u64,
    pub q_gw: Estimate,
    pub q_walk: Estimate,
    pub gw_tally: GwTally,
    /// `1/cap + 1/horizon`, added to the band for the truncation of both
    /// survival proxies.
    pub bias_allowance: f64,
    pub combined_stderr: f64,
    pub difference: f64,
    pub compatible: bool,
}

impl CouplingReport {
    /// Whether `x` lies within the band of both estimates.
    pub fn both_cover(&self, x: f64, k: f64) -> bool {
        let tol = |e: &Estimate| k * e.stderr + self.bias_allowance;
        (self.q_gw.mean - x).abs() <= tol(&self.q_gw) && (self.q_walk.mean - x).abs() <= tol(&self.q_walk)
    }
}

/// Compares the extinction frequency of the branching process with the
/// loop-visit frequency of the walk, using independent seeds derived from
/// `seed`. The walk runs `horizon` steps, the process until time `horizon`.
pub fn couple_check(
    g: &BaseGraph,
    trials: usize,
    cap: usize,
    horizon: usize,
    seed: u64,
) -> Result<CouplingReport, WalkError> {
    if trials < 100 {
        return Err(WalkError::InvalidArgument("couple_check needs at least 100 trials".into()));
    }
    let tally = gw_trials(g, trials, cap, horizon as f64, rng::derive(seed, 1))?;
    let walk = walk::empirical_recurrence(g, horizon, trials, rng::derive(seed, 2))?;
    let q_gw = Estimate::proportion(tally.extinct, trials);
    let q_walk = walk.q_walk;
    let combined_stderr = (q_gw.stderr.powi(2) + q_walk.stderr.powi(2)).sqrt();
    let bias_allowance = 1.0 / cap.max(1) as f64 + 1.0 / horizon.max(1) as f64;
    let difference = q_gw.mean - q_walk.mean;
    Ok(CouplingReport {
        trials,
        cap,
        horizon,
        seed,
        q_gw,
        q_walk,
        gw_tally: tally,
        bias_allowance,
        combined_stderr,
        difference,
        compatible: difference.abs() <= 3.0 * combined_stderr + bias_allowance,
    })
}
