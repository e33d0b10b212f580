//! First-passage generating functions at `z = 1` and the quantities built on
//! them: return probability, exit chain, rate of escape, asymptotic entropy
//! and dimension bounds of the exit measure.
//!
//! `F(-i)` is the probability that the walk started at a vertex with label
//! `i` ever steps to its ancestor. It is the least solution of
//! `F(-i) = p(-i) + sum_j p(i,j) F(-j) F(-i)`, obtained from `F = 0` by a
//! monotone scheme.

mod chain;
mod fixed_point;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{BaseGraph, GraphError, VertexId};
use crate::spectral::{truncated_pf, MatrixKind};
use crate::walk::WeightFunction;

pub use chain::{build_exit_chain, closed_classes, gbar, stationary, SparseChain, Q_ROW_TOL};
pub use fixed_point::{
    solve_fprime, solve_on_domain, Domain, FIterates, FSolve, FixedPointMethod, FprimeSolve,
    DENSE_LIMIT, DIVERGENCE_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GfError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("infinite graph: a truncation radius is required")]
    TruncationRequired,
    #[error("truncation ball of radius {radius} exceeds {budget} vertices")]
    BallTooLarge { radius: usize, budget: usize },
    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual})")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("singular linear system")]
    SingularSystem,
    #[error("label {vertex} has F(-i) = {f}: the exit chain needs a transient walk")]
    RecurrentType { vertex: String, f: f64 },
    #[error("exit-chain row of {vertex} sums to {sum}")]
    ExitChainNotStochastic { vertex: String, sum: f64 },
    #[error("exit chain is reducible; closed classes {closed_classes:?}")]
    Reducible { closed_classes: Vec<Vec<usize>> },
    #[error("stationary solve did not converge (residual {residual})")]
    NonConvergence { residual: f64 },
    #[error("walk is not transient (U_root = {u_root})")]
    NotTransient { u_root: f64 },
}

/// Caveat attached to the pointwise dimension.
pub const DIM_POINT_CAVEAT: &str =
    "dim_point equals h/ell0 only if -(1/n) log pi_n(X_n) converges to h almost surely";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GfOptions {
    /// Stopping tolerance of the fixed-point and linear iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Truncation radius; required for generators.
    pub radius: Option<usize>,
    pub method: FixedPointMethod,
    /// Transient iff `1 - U_root > classify_tol`.
    pub classify_tol: f64,
}

impl Default for GfOptions {
    fn default() -> Self {
        GfOptions {
            tol: 1e-13,
            max_iter: 100_000,
            radius: None,
            method: FixedPointMethod::Auto,
            classify_tol: 1e-8,
        }
    }
}

/// `F` on a domain; for truncated domains both brackets are kept.
#[derive(Clone, Debug)]
pub struct FSolution {
    pub domain: Domain,
    /// Least solution (the upper bracket on truncated domains).
    pub values: Vec<f64>,
    /// Solution with `F = 0` frozen outside the domain.
    pub lower: Option<Vec<f64>>,
    pub bracket_width: f64,
    pub iterations: usize,
    pub residual: f64,
    pub method: FixedPointMethod,
}

impl FSolution {
    pub fn brackets_agree(&self, tol: f64) -> bool {
        self.bracket_width <= 10.0 * tol
    }

    pub fn get(&self, v: &VertexId) -> Option<f64> {
        self.domain
            .vertices
            .iter()
            .position(|w| w == v)
            .map(|k| self.values[k])
    }
}

/// Solves for `F(-i)`.
///
/// On truncated domains labels outside the ball are frozen at `F = 1`
/// (upper bracket, biased towards recurrence) and, in a second pass, at
/// `F = 0` (lower bracket).
pub fn solve_f(g: &BaseGraph, opts: &GfOptions) -> Result<FSolution, GfError> {
    let domain = Domain::new(g, opts.radius)?;
    let upper = solve_on_domain(&domain, 1.0, opts.method, opts.tol, opts.max_iter)?;
    let (lower, bracket_width) = if domain.complete {
        (None, 0.0)
    } else {
        let lower = solve_on_domain(&domain, 0.0, opts.method, opts.tol, opts.max_iter)?;
        let w = upper
            .values
            .iter()
            .zip(&lower.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (Some(lower.values), w)
    };
    Ok(FSolution {
        domain,
        values: upper.values,
        lower,
        bracket_width,
        iterations: upper.iterations,
        residual: upper.residual,
        method: upper.method,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Transient,
    RecurrentOrCritical,
}

/// Spectral evidence attached to a `recurrent_or_critical` verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralAttachment {
    pub lambda_m: f64,
    /// The value is exact (finite graph) rather than a truncation.
    pub exact: bool,
    /// `recurrent` for `lambda < 1`, `critical` at 1, else `inconclusive`.
    pub implies: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticClass {
    pub regime: Regime,
    #[serde(rename = "U_root")]
    pub u_root: f64,
    pub spectral: Option<SpectralAttachment>,
}

/// Return probability `U_root = p(-i0) + sum_j p(i0,j) F(-j)`.
pub fn u_root(sol: &FSolution) -> f64 {
    sol.domain.backward[0] + sol.domain.forward_mass(0, &sol.values, 1.0)
}

/// Transient iff `1 - U_root > tol`. Otherwise the verdict cannot separate
/// recurrence from criticality, and the Perron-Frobenius value of `M` is
/// attached.
pub fn classify_analytic(g: &BaseGraph, sol: &FSolution, tol: f64) -> AnalyticClass {
    let u = u_root(sol);
    if 1.0 - u > tol {
        return AnalyticClass {
            regime: Regime::Transient,
            u_root: u,
            spectral: None,
        };
    }
    let radius = sol.domain.radius.unwrap_or(sol.domain.len());
    let spectral = truncated_pf(g, MatrixKind::Mean, radius, 1e-12).ok().map(|pf| {
        let implies = if pf.value < 1.0 - 1e-9 && pf.complete {
            "recurrent"
        } else if (pf.value - 1.0).abs() <= 1e-9 {
            "critical"
        } else {
            "inconclusive"
        };
        SpectralAttachment {
            lambda_m: pf.value,
            exact: pf.complete,
            implies,
        }
    });
    AnalyticClass {
        regime: Regime::RecurrentOrCritical,
        u_root: u,
        spectral,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExitEdge {
    pub from: String,
    pub to: String,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedSpeed {
    pub weight: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Convergence {
    pub method: FixedPointMethod,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
    pub truncation_radius: Option<usize>,
    /// `sup |F_upper - F_lower|` on truncated domains.
    pub bracket_width: f64,
    pub fprime_method: Option<&'static str>,
    pub stationary_residual: Option<f64>,
}

/// Everything the generating-function analysis produces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GfSolution {
    pub labels: Vec<String>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "F_lower", skip_serializing_if = "Option::is_none")]
    pub f_lower: Option<Vec<f64>>,
    #[serde(rename = "Fp")]
    pub fp: Option<Vec<f64>>,
    #[serde(rename = "Gbar")]
    pub gbar: Option<Vec<f64>>,
    #[serde(rename = "U_root")]
    pub u_root: f64,
    /// Probability that the walk ever uses the loop at the origin,
    /// `F(-i0)`; equals the extinction probability of the branching process.
    pub q_loop: f64,
    pub regime: Regime,
    pub spectral: Option<SpectralAttachment>,
    #[serde(rename = "Q")]
    pub q: Option<Vec<ExitEdge>>,
    pub nu: Option<Vec<f64>>,
    #[serde(rename = "Lambda")]
    pub lambda: Option<f64>,
    pub lambda_infinite: bool,
    pub ell0: Option<f64>,
    pub ell_w: Vec<WeightedSpeed>,
    pub h: Option<f64>,
    pub dim_lower: Option<f64>,
    pub dim_point: Option<f64>,
    pub dim_upper: Option<f64>,
    pub dim_point_caveat: &'static str,
    /// Truncated infinite graph: positive recurrence of the exit chain is
    /// assumed, not verified.
    pub assumption_unverified: bool,
    /// Labels reachable by paths of equal length share `p(-i)`; only
    /// evaluated on truncations.
    pub equal_length_backward_check: Option<bool>,
    pub convergence: Convergence,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl GfSolution {
    pub fn verdict(&self) -> &'static str {
        match self.regime {
            Regime::Transient => "transient",
            Regime::RecurrentOrCritical => "recurrent_or_critical",
        }
    }

    pub fn tsv_header() -> &'static str {
        "spec_id\tverdict\tell0\th\tdim_lower\tdim_point\tdim_upper"
    }

    pub fn tsv_row(&self, spec_id: &str) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.16e}"));
        let mut out = String::new();
        let _ = write!(
            out,
            "{spec_id}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.verdict(),
            fmt(self.ell0),
            fmt(self.h),
            fmt(self.dim_lower),
            fmt(self.dim_point),
            fmt(self.dim_upper)
        );
        out
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Whether all labels on each level of the cover (up to the truncation
/// radius) share the same backward probability.
pub fn equal_length_backward_check(g: &BaseGraph, radius: usize) -> Result<bool, GraphError> {
    let mut level = vec![g.root()];
    for _ in 0..=radius {
        let b0 = g.backward(&level[0])?;
        for v in &level {
            if (g.backward(v)? - b0).abs() > 1e-12 {
                return Ok(false);
            }
        }
        let mut next: Vec<VertexId> = Vec::new();
        for v in &level {
            for e in g.out_edges(v)?.iter() {
                next.push(e.to.clone());
            }
        }
        next.sort();
        next.dedup();
        level = next;
    }
    Ok(true)
}

/// Full pipeline: `F`, classification, `F'`, exit chain, stationary law,
/// speed, entropy and dimension bounds.
pub fn analyze(g: &BaseGraph, weights: &[WeightFunction], opts: &GfOptions) -> Result<GfSolution, GfError> {
    let sol = solve_f(g, opts)?;
    let class = classify_analytic(g, &sol, opts.classify_tol);
    let domain = &sol.domain;
    let truncated = !domain.complete;
    let mut out = GfSolution {
        labels: domain.names.clone(),
        f: sol.values.clone(),
        f_lower: sol.lower.clone(),
        fp: None,
        gbar: None,
        u_root: class.u_root,
        q_loop: sol.values[0],
        regime: class.regime,
        spectral: class.spectral,
        q: None,
        nu: None,
        lambda: None,
        lambda_infinite: false,
        ell0: None,
        ell_w: Vec::new(),
        h: None,
        dim_lower: None,
        dim_point: None,
        dim_upper: None,
        dim_point_caveat: DIM_POINT_CAVEAT,
        assumption_unverified: truncated,
        equal_length_backward_check: None,
        convergence: Convergence {
            method: sol.method,
            iterations: sol.iterations,
            residual: sol.residual,
            tol: opts.tol,
            truncation_radius: domain.radius,
            bracket_width: sol.bracket_width,
            fprime_method: None,
            stationary_residual: None,
        },
        notes: Vec::new(),
    };
    if truncated {
        let r = domain.radius.unwrap_or(0);
        out.equal_length_backward_check = Some(equal_length_backward_check(g, r)?);
    }
    if class.regime == Regime::RecurrentOrCritical {
        out.ell0 = Some(0.0);
        out.gbar = Some(gbar(domain, &sol.values, 1.0));
        return Ok(out);
    }
    if truncated && !sol.brackets_agree(opts.tol) {
        out.notes.push(format!(
            "F brackets differ by {:e}; downstream quantities not computed",
            sol.bracket_width
        ));
        return Ok(out);
    }

    let (q, gb) = build_exit_chain(domain, &sol.values, 1.0)?;
    out.gbar = Some(gb);
    out.q = Some(
        q.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter().map(move |&(j, x)| ExitEdge {
                    from: domain.names[i].clone(),
                    to: domain.names[j].clone(),
                    q: x,
                })
            })
            .collect(),
    );

    let fp = match solve_fprime(domain, &sol.values, 1.0, opts.tol, opts.max_iter)? {
        FprimeSolve::Finite { values, method } => {
            out.convergence.fprime_method = Some(method);
            values
        }
        FprimeSolve::Divergent { sup } => {
            out.lambda_infinite = true;
            out.ell0 = Some(0.0);
            out.notes.push(format!("F' exceeds {DIVERGENCE_LIMIT:e} (sup {sup:e})"));
            return Ok(out);
        }
    };

    let (nu, res) = stationary(&q, 1e-10)?;
    out.convergence.stationary_residual = Some(res);
    let lambda: f64 = nu
        .iter()
        .zip(fp.iter().zip(&sol.values))
        .map(|(n, (d, f))| n * d / f)
        .sum();
    let ell0 = 1.0 / lambda;
    let mut entropy_rate = 0.0;
    for (i, row) in q.rows.iter().enumerate() {
        for &(_, x) in row {
            // rows are stochastic to Q_ROW_TOL; q = 1 + ulp carries no entropy
            if x > 0.0 && x < 1.0 {
                entropy_rate -= nu[i] * x * x.ln();
            }
        }
    }
    for w in weights {
        let mut num = 0.0;
        for (i, row) in q.rows.iter().enumerate() {
            for &(j, x) in row {
                num += w.eval(&domain.vertices[i], &domain.vertices[j]) * nu[i] * x;
            }
        }
        out.ell_w.push(WeightedSpeed {
            weight: w.name().to_string(),
            value: num / lambda,
        });
    }
    let eps0 = g.kernel().min_step_probability(domain.vertices.iter())?;
    out.fp = Some(fp);
    out.nu = Some(nu);
    out.lambda = Some(lambda);
    out.ell0 = Some(ell0);
    out.h = Some(ell0 * entropy_rate);
    out.dim_lower = Some(entropy_rate);
    out.dim_point = Some(entropy_rate);
    out.dim_upper = Some(-eps0.ln() / ell0);
    Ok(out)
}
