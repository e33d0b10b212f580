use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::{engine, exit_times, run_with, Record, StabilityMargin, WalkError, WeightFunction};
use crate::generating::GfSolution;
use crate::graph::{BaseGraph, VertexId};
use crate::rng;

/// Default threshold on the escape fraction below which speed and entropy
/// are not estimated.
pub const DEFAULT_GUARD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, stderr) = rng::mean_stderr(xs);
        Estimate { mean, stderr }
    }

    pub fn proportion(successes: usize, trials: usize) -> Self {
        let (mean, stderr) = rng::proportion(successes, trials);
        Estimate { mean, stderr }
    }

    /// `|mean - x| <= k * stderr`.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.mean - x).abs() <= k * self.stderr
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: Estimate,
}

/// Per-run statistics kept by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub returns: usize,
    pub final_height: usize,
    pub max_height: usize,
    pub first_loop: Option<usize>,
    pub final_label: VertexId,
}

/// Horizon-limited evidence about recurrence; not a proof.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceEvidence {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub mean_returns: Estimate,
    /// Fraction of runs ending above `horizon / 4`.
    pub escape_fraction: Estimate,
    /// Fraction of runs ending above `sqrt(horizon)`.
    pub escape_fraction_sqrt: Estimate,
    /// Fraction of runs that used the loop `(o,o)` within the horizon.
    pub q_walk: Estimate,
    pub note: &'static str,
    #[serde(skip)]
    pub per_run: Vec<RunSummary>,
}

pub const HORIZON_NOTE: &str = "finite-horizon Monte Carlo evidence, not a proof";

/// Runs `n_runs` independent walks of `n_steps` steps.
pub fn empirical_recurrence(
    g: &BaseGraph,
    n_steps: usize,
    n_runs: usize,
    seed: u64,
) -> Result<RecurrenceEvidence, WalkError> {
    if n_runs == 0 || n_steps == 0 {
        return Err(WalkError::InvalidArgument("runs and horizon must be at least 1".into()));
    }
    let e = engine(g);
    let per_run: Vec<RunSummary> = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let run = run_with(g, e.as_ref(), n_steps, seed, r, &[], Record::default())?;
            Ok(RunSummary {
                returns: run.returns,
                final_height: run.final_height,
                max_height: run.max_height,
                first_loop: run.loop_steps.first().copied(),
                final_label: run.final_label,
            })
        })
        .collect::<Result<_, WalkError>>()?;
    Ok(summarize(per_run, n_steps, seed))
}

fn summarize(per_run: Vec<RunSummary>, n_steps: usize, seed: u64) -> RecurrenceEvidence {
    let n_runs = per_run.len();
    let returns: Vec<f64> = per_run.iter().map(|r| r.returns as f64).collect();
    let quarter = per_run.iter().filter(|r| 4 * r.final_height > n_steps).count();
    let sqrt_n = (n_steps as f64).sqrt();
    let beyond_sqrt = per_run.iter().filter(|r| r.final_height as f64 > sqrt_n).count();
    let looped = per_run.iter().filter(|r| r.first_loop.is_some()).count();
    RecurrenceEvidence {
        runs: n_runs,
        horizon: n_steps,
        seed,
        mean_returns: Estimate::from_samples(&returns),
        escape_fraction: Estimate::proportion(quarter, n_runs),
        escape_fraction_sqrt: Estimate::proportion(beyond_sqrt, n_runs),
        q_walk: Estimate::proportion(looped, n_runs),
        note: HORIZON_NOTE,
        per_run,
    }
}

/// Source of the exit-chain probabilities used in the entropy estimate.
#[derive(Clone, Debug)]
pub enum ExitLaw {
    /// `q(i,j)` from the generating-function solution.
    Analytic(HashMap<(VertexId, VertexId), f64>),
    /// Transition frequencies of the observed exit chains.
    PlugIn,
}

impl ExitLaw {
    /// The exit chain of an analytic solution, if one was computed.
    pub fn from_solution(g: &BaseGraph, sol: &GfSolution) -> Option<Self> {
        let mut q = HashMap::new();
        for e in sol.q.as_ref()? {
            q.insert((g.resolve(&e.from).ok()?, g.resolve(&e.to).ok()?), e.q);
        }
        Some(ExitLaw::Analytic(q))
    }
}

#[derive(Clone, Debug)]
pub struct EntropyOptions {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub weights: Vec<WeightFunction>,
    /// Minimum fraction of runs ending above `sqrt(horizon)`.
    pub guard: f64,
    pub margin: StabilityMargin,
    /// Exit transitions discarded at the start of each run so that the
    /// label chain is close to stationarity.
    pub burn_in: usize,
    pub exit_law: ExitLaw,
}

impl EntropyOptions {
    pub fn new(runs: usize, horizon: usize, seed: u64) -> Self {
        EntropyOptions {
            runs,
            horizon,
            seed,
            weights: Vec::new(),
            guard: DEFAULT_GUARD,
            margin: StabilityMargin::default(),
            burn_in: 20,
            exit_law: ExitLaw::PlugIn,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropySpeedEstimate {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Mean of `|X_n| / n`.
    pub ell0: Estimate,
    /// Mean of `l(X_n) / n` per weight.
    pub ell_w: Vec<NamedEstimate>,
    /// Mean of `-ln q` per exit transition.
    pub exit_entropy_rate: Estimate,
    /// `ell0 * exit_entropy_rate`, standard error by the delta method.
    pub h: Estimate,
    /// Mean of `(|X_n| - |X_{n/2}|) / (n - n/2)`. `E|X_n| - ell0 n` tends to
    /// a constant, which this increment cancels; `ell0` keeps a bias of
    /// order `1/n`.
    pub ell0_late: Estimate,
    /// `ell0_late * exit_entropy_rate`.
    pub h_late: Estimate,
    pub exit_transitions: usize,
    pub escape_fraction: f64,
    pub escape_fraction_sqrt: f64,
    pub exit_law: &'static str,
    pub margin: StabilityMargin,
    pub burn_in: usize,
}

struct EntropyRun {
    height: usize,
    mid_height: usize,
    lengths: Vec<f64>,
    transitions: BTreeMap<(VertexId, VertexId), usize>,
}

/// Speed and entropy from simulated trajectories.
///
/// The entropy is `ell0` times the average of `-ln q(i,j)` along the
/// stabilized exit-label chain of each run.
pub fn empirical_entropy_speed(
    g: &BaseGraph,
    opts: &EntropyOptions,
) -> Result<EntropySpeedEstimate, WalkError> {
    if opts.runs < 2 || opts.horizon == 0 {
        return Err(WalkError::InvalidArgument(
            "need at least 2 runs and a positive horizon".into(),
        ));
    }
    let e = engine(g);
    let runs: Vec<EntropyRun> = (0..opts.runs as u64)
        .into_par_iter()
        .map(|r| {
            let run = run_with(g, e.as_ref(), opts.horizon, opts.seed, r, &opts.weights, Record::HEIGHTS)?;
            let exits = exit_times(&run.heights, opts.margin);
            let mut transitions = BTreeMap::new();
            for &(k, _) in exits.iter().skip(opts.burn_in) {
                let from = run.final_position.ancestor(k - 1).unwrap().clone();
                let to = run.final_position.ancestor(k).unwrap().clone();
                *transitions.entry((from, to)).or_insert(0) += 1;
            }
            Ok(EntropyRun {
                height: run.final_height,
                mid_height: run.heights[opts.horizon / 2] as usize,
                lengths: run.lengths,
                transitions,
            })
        })
        .collect::<Result<_, WalkError>>()?;

    let n = opts.horizon as f64;
    let quarter = runs.iter().filter(|r| 4 * r.height > opts.horizon).count() as f64 / runs.len() as f64;
    let sqrt_frac =
        runs.iter().filter(|r| r.height as f64 > n.sqrt()).count() as f64 / runs.len() as f64;
    if sqrt_frac <= opts.guard {
        return Err(WalkError::NotTransientEnough {
            escape_fraction: sqrt_frac,
            threshold: opts.guard,
        });
    }

    let (law, law_name): (HashMap<(VertexId, VertexId), f64>, _) = match &opts.exit_law {
        ExitLaw::Analytic(q) => (q.clone(), "analytic"),
        ExitLaw::PlugIn => {
            let mut counts: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
            for r in &runs {
                for (t, c) in &r.transitions {
                    *counts.entry(t.clone()).or_insert(0) += c;
                }
            }
            let mut totals: HashMap<VertexId, usize> = HashMap::new();
            for ((i, _), c) in &counts {
                *totals.entry(i.clone()).or_insert(0) += c;
            }
            let q = counts
                .into_iter()
                .map(|((i, j), c)| {
                    let t = totals[&i] as f64;
                    ((i, j), c as f64 / t)
                })
                .collect();
            (q, "plug_in")
        }
    };

    let mut surprisal = Vec::with_capacity(runs.len());
    let mut counts = Vec::with_capacity(runs.len());
    for r in &runs {
        let mut s = 0.0;
        let mut k = 0usize;
        for ((i, j), c) in &r.transitions {
            let q = *law.get(&(i.clone(), j.clone())).ok_or_else(|| {
                WalkError::MissingExitProbability {
                    from: g.name(i),
                    to: g.name(j),
                }
            })?;
            if q > 0.0 {
                s -= *c as f64 * q.ln();
            }
            k += c;
        }
        surprisal.push(s);
        counts.push(k as f64);
    }
    let total_k: f64 = counts.iter().sum();
    if total_k == 0.0 {
        return Err(WalkError::NoExits);
    }
    let speeds: Vec<f64> = runs.iter().map(|r| r.height as f64 / n).collect();
    let ell0 = Estimate::from_samples(&speeds);
    let rate = surprisal.iter().sum::<f64>() / total_k;
    let mean_k = total_k / runs.len() as f64;
    // linearizations of the ratio and of the product
    let rate_lin: Vec<f64> = surprisal
        .iter()
        .zip(&counts)
        .map(|(s, k)| (s - rate * k) / mean_k)
        .collect();
    let h_lin: Vec<f64> = speeds
        .iter()
        .zip(&rate_lin)
        .map(|(l, z)| rate * l + ell0.mean * z)
        .collect();
    let rate_se = Estimate::from_samples(&rate_lin).stderr;
    let h_se = Estimate::from_samples(&h_lin).stderr;
    let window = (opts.horizon - opts.horizon / 2) as f64;
    let late: Vec<f64> = runs
        .iter()
        .map(|r| (r.height as f64 - r.mid_height as f64) / window)
        .collect();
    let ell0_late = Estimate::from_samples(&late);
    let h_late_lin: Vec<f64> = late
        .iter()
        .zip(&rate_lin)
        .map(|(l, z)| rate * l + ell0_late.mean * z)
        .collect();
    let h_late = Estimate {
        mean: ell0_late.mean * rate,
        stderr: Estimate::from_samples(&h_late_lin).stderr,
    };

    let ell_w = opts
        .weights
        .iter()
        .enumerate()
        .map(|(w, wf)| {
            let xs: Vec<f64> = runs.iter().map(|r| r.lengths[w] / n).collect();
            NamedEstimate {
                name: wf.name().to_string(),
                estimate: Estimate::from_samples(&xs),
            }
        })
        .collect();

    Ok(EntropySpeedEstimate {
        runs: runs.len(),
        horizon: opts.horizon,
        seed: opts.seed,
        ell0,
        ell_w,
        exit_entropy_rate: Estimate {
            mean: rate,
            stderr: rate_se,
        },
        h: Estimate {
            mean: ell0.mean * rate,
            stderr: h_se,
        },
        ell0_late,
        h_late,
        exit_transitions: total_k as usize,
        escape_fraction: quarter,
        escape_fraction_sqrt: sqrt_frac,
        exit_law: law_name,
        margin: opts.margin,
        burn_in: opts.burn_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GeneratorSpec;

    #[test]
    fn unit_weight_speed_equals_height_speed() {
        let g = GeneratorSpec::new("homogeneous_tree").with("beta", 0.25).build().unwrap();
        let mut opts = EntropyOptions::new(40, 2000, 1);
        opts.weights = vec![WeightFunction::constant(1.0)];
        let est = empirical_entropy_speed(&g, &opts).unwrap();
        assert_eq!(est.ell_w[0].estimate, est.ell0);
        assert_eq!(est.exit_law, "plug_in");
    }

    #[test]
    fn recurrent_walk_fails_the_guard() {
        let g = GeneratorSpec::new("homogeneous_tree").with("beta", 0.6).build().unwrap();
        let opts = EntropyOptions::new(20, 2000, 1);
        assert!(matches!(
            empirical_entropy_speed(&g, &opts),
            Err(WalkError::NotTransientEnough { .. })
        ));
    }

    #[test]
    fn recurrence_evidence_of_a_recurrent_tree() {
        let g = GeneratorSpec::new("homogeneous_tree").with("beta", 0.7).build().unwrap();
        let ev = empirical_recurrence(&g, 2000, 50, 9).unwrap();
        assert_eq!(ev.q_walk.mean, 1.0);
        assert_eq!(ev.escape_fraction.mean, 0.0);
        assert!(ev.mean_returns.mean > 10.0);
    }
}
