//! Spectral quantities of the first-moment matrix `M` (and the adjacency
//! matrix `A`) of a base graph.
//!
//! For infinite graphs only finite truncations are ever evaluated, so the
//! Perron-Frobenius values reported here are lower bounds for the infinite
//! operator. Collatz-Wielandt certificates check `Mf >= lambda f` on a ball.

mod levels;
mod lyapunov;

use std::fmt;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Ball, BaseGraph, DegreeBound, GraphError, VertexId};

pub use levels::{count_levels, LevelCounts};
pub use lyapunov::{
    classify_rwdcre, lyapunov_top, LyapunovEstimate, Mat2, RwdcreCase, RwdcreVerdict,
};

/// Largest ball ever materialized by the spectral routines.
pub const BALL_BUDGET: usize = 2_000_000;

/// Iteration cap for power iteration.
pub const MAX_POWER_ITERS: usize = 500_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("the ball of radius {radius} induces the zero matrix")]
    ZeroMatrix { radius: usize },
    #[error("power iteration did not converge in {max_iters} iterations (last estimates {last:?})")]
    NonConvergence { max_iters: usize, last: [f64; 2] },
    #[error("ball of radius {radius} exceeds {budget} vertices")]
    BallTooLarge { radius: usize, budget: usize },
    #[error("graph does not declare a global degree bound")]
    UnboundedGeometry,
    #[error("test function is not positive at {vertex}: {value}")]
    NonPositiveTestFunction { vertex: String, value: f64 },
    #[error("test function exceeds its declared bound {bound} at {vertex}: {value}")]
    TestFunctionUnbounded { vertex: String, value: f64, bound: f64 },
    #[error("level count exceeded the support budget at level {reached}")]
    BudgetExceeded { reached: usize, partial: LevelCounts },
    #[error("running matrix product collapsed to zero at step {step}")]
    SingularCollapse { step: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Which non-negative matrix of the base graph to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MatrixKind {
    /// Adjacency matrix `a(i,j) = 1` for every edge.
    #[serde(rename = "A")]
    Adjacency,
    /// First-moment matrix `m(i,j) = p(i,j) / p(-i)`.
    #[serde(rename = "M")]
    Mean,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Adjacency => "A",
            MatrixKind::Mean => "M",
        })
    }
}

fn check_geometry(g: &BaseGraph) -> Result<(), SpectralError> {
    match g.degree_bound() {
        DegreeBound::Global(_) => Ok(()),
        DegreeBound::Unbounded => Err(SpectralError::UnboundedGeometry),
    }
}

fn ball(g: &BaseGraph, radius: usize) -> Result<Ball, SpectralError> {
    check_geometry(g)?;
    g.ball(radius, BALL_BUDGET)?.ok_or(SpectralError::BallTooLarge {
        radius,
        budget: BALL_BUDGET,
    })
}

/// Row-sparse matrix induced on a ball.
#[derive(Clone, Debug)]
pub struct InducedMatrix {
    pub ball: Ball,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl InducedMatrix {
    pub fn new(g: &BaseGraph, kind: MatrixKind, radius: usize) -> Result<Self, SpectralError> {
        let ball = ball(g, radius)?;
        let mut rows = Vec::with_capacity(ball.len());
        for v in &ball.vertices {
            let b = g.backward(v)?;
            let row = g
                .out_edges(v)?
                .iter()
                .filter_map(|e| {
                    let k = *ball.index.get(&e.to)?;
                    let w = match kind {
                        MatrixKind::Adjacency => 1.0,
                        MatrixKind::Mean => e.p / b,
                    };
                    Some((k, w))
                })
                .collect();
            rows.push(row);
        }
        Ok(InducedMatrix { ball, rows })
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(j, w)| w * x[j]).sum();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&(_, w)| w == 0.0))
    }

    /// Largest eigenvalue by power iteration.
    ///
    /// The growth factor of the 1-norm is averaged geometrically over two
    /// consecutive steps, which converges also for periodic matrices.
    pub fn perron_frobenius(&self, tol: f64) -> Result<(f64, usize), SpectralError> {
        if self.is_zero() {
            return Err(SpectralError::ZeroMatrix { radius: self.ball.radius });
        }
        let n = self.rows.len();
        let start = vec![1.0 / n as f64; n];
        match self.power_iterate(start, tol) {
            Ok(r) => Ok(r),
            Err(SpectralError::NonConvergence { .. }) => {
                let mut rng = crate::rng::stream(0x5eed, 0);
                let mut x: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
                let s: f64 = x.iter().sum();
                x.iter_mut().for_each(|v| *v /= s);
                self.power_iterate(x, tol)
            }
            Err(e) => Err(e),
        }
    }

    fn power_iterate(&self, mut x: Vec<f64>, tol: f64) -> Result<(f64, usize), SpectralError> {
        let mut y = vec![0.0; x.len()];
        let mut prev_growth = f64::NAN;
        let mut prev_avg = f64::NAN;
        // consecutive iterations meeting the tolerance; a single agreement
        // can be an exact coincidence of early rational growth factors
        let mut settled = 0;
        for it in 1..=MAX_POWER_ITERS {
            self.apply(&x, &mut y);
            let growth: f64 = y.iter().sum();
            if growth == 0.0 {
                // nilpotent truncation
                return Ok((0.0, it));
            }
            y.iter_mut().for_each(|v| *v /= growth);
            std::mem::swap(&mut x, &mut y);
            let avg = (growth * prev_growth).sqrt();
            if (avg - prev_avg).abs() <= tol * avg {
                settled += 1;
                if settled == 5 {
                    return Ok((avg, it));
                }
            } else {
                settled = 0;
            }
            prev_growth = growth;
            prev_avg = avg;
        }
        Err(SpectralError::NonConvergence {
            max_iters: MAX_POWER_ITERS,
            last: [prev_growth, prev_avg],
        })
    }
}

/// Perron-Frobenius value of a truncation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PfEstimate {
    pub matrix: MatrixKind,
    pub value: f64,
    pub radius: usize,
    pub ball_size: usize,
    /// The ball covers the whole (finite) graph, so `value` is exact.
    pub complete: bool,
    /// Always true unless `complete`: the value bounds the infinite
    /// operator from below.
    pub lower_bound: bool,
    pub iterations: usize,
}

/// Largest eigenvalue of the matrix induced on the ball of `radius`.
pub fn truncated_pf(
    g: &BaseGraph,
    kind: MatrixKind,
    radius: usize,
    tol: f64,
) -> Result<PfEstimate, SpectralError> {
    let m = InducedMatrix::new(g, kind, radius)?;
    let (value, iterations) = m.perron_frobenius(tol)?;
    Ok(PfEstimate {
        matrix: kind,
        value,
        radius,
        ball_size: m.ball.len(),
        complete: m.ball.complete,
        lower_bound: !m.ball.complete,
        iterations,
    })
}

/// A positive test function for Collatz-Wielandt certificates.
pub trait TestFunction: Sync {
    fn eval(&self, v: &VertexId) -> f64;
    /// Declared supremum.
    fn sup_bound(&self) -> f64;
    fn name(&self) -> String;
}

/// `f == 1`.
pub struct Ones;

impl TestFunction for Ones {
    fn eval(&self, _: &VertexId) -> f64 {
        1.0
    }

    fn sup_bound(&self) -> f64 {
        1.0
    }

    fn name(&self) -> String {
        "ones".into()
    }
}

/// `g(0) = 1`, `g(i) = i / (i + 1)` on the half-line, which satisfies
/// `Mg >= g` for the critical half-line generator.
pub struct HalflineHarmonic;

impl TestFunction for HalflineHarmonic {
    fn eval(&self, v: &VertexId) -> f64 {
        match v.as_site() {
            Some(0) => 1.0,
            Some(i) if i > 0 => i as f64 / (i as f64 + 1.0),
            _ => f64::NAN,
        }
    }

    fn sup_bound(&self) -> f64 {
        1.0
    }

    fn name(&self) -> String {
        "halfline_harmonic".into()
    }
}

/// Certificate that `(Mf)(i) >= lambda f(i)` on every vertex of a ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CwCertificate {
    pub matrix: MatrixKind,
    pub test_function: String,
    pub lambda: f64,
    pub radius: usize,
    pub checked: usize,
    /// `min_i (Mf)(i) - lambda f(i)` over the checked vertices.
    pub margin: f64,
    /// Vertices outside the ball were not checked.
    pub unchecked_complement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CwRefutation {
    pub matrix: MatrixKind,
    pub test_function: String,
    pub lambda: f64,
    pub radius: usize,
    pub checked: usize,
    pub violations: usize,
    pub first_vertex: String,
    pub first_deficit: f64,
    pub worst_vertex: String,
    pub worst_deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CwOutcome {
    Certified(CwCertificate),
    Refuted(CwRefutation),
}

impl CwOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CwOutcome::Certified(_))
    }
}

/// Slack allowed in `(Mf)(i) >= lambda f(i)`.
pub const CW_SLACK: f64 = 1e-12;

/// Checks the Collatz-Wielandt inequality for `f` and `lambda` on the ball
/// of `radius` around the root.
pub fn cw_certify(
    g: &BaseGraph,
    kind: MatrixKind,
    f: &dyn TestFunction,
    lambda: f64,
    radius: usize,
) -> Result<CwOutcome, SpectralError> {
    let ball = ball(g, radius)?;
    let bound = f.sup_bound();
    let mut margin = f64::INFINITY;
    let mut violations = Vec::new();
    for v in &ball.vertices {
        let fv = f.eval(v);
        if !(fv > 0.0) {
            return Err(SpectralError::NonPositiveTestFunction {
                vertex: g.name(v),
                value: fv,
            });
        }
        if fv > bound {
            return Err(SpectralError::TestFunctionUnbounded {
                vertex: g.name(v),
                value: fv,
                bound,
            });
        }
        let b = g.backward(v)?;
        let mf: f64 = g
            .out_edges(v)?
            .iter()
            .map(|e| {
                let w = match kind {
                    MatrixKind::Adjacency => 1.0,
                    MatrixKind::Mean => e.p / b,
                };
                w * f.eval(&e.to)
            })
            .sum();
        let slack = mf - lambda * fv;
        margin = margin.min(slack);
        if slack < -CW_SLACK {
            violations.push((v, -slack));
        }
    }
    if violations.is_empty() {
        return Ok(CwOutcome::Certified(CwCertificate {
            matrix: kind,
            test_function: f.name(),
            lambda,
            radius,
            checked: ball.len(),
            margin,
            unchecked_complement: !ball.complete,
        }));
    }
    let (first, first_deficit) = violations[0];
    let &(worst, worst_deficit) = violations
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(CwOutcome::Refuted(CwRefutation {
        matrix: kind,
        test_function: f.name(),
        lambda,
        radius,
        checked: ball.len(),
        violations: violations.len(),
        first_vertex: g.name(first),
        first_deficit,
        worst_vertex: g.name(worst),
        worst_deficit,
    }))
}

/// Minimum and maximum row sums of a matrix on a ball.
pub fn row_sum_range(
    g: &BaseGraph,
    kind: MatrixKind,
    radius: usize,
) -> Result<(f64, f64), SpectralError> {
    let ball = ball(g, radius)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in &ball.vertices {
        let b = g.backward(v)?;
        let s: f64 = g
            .out_edges(v)?
            .iter()
            .map(|e| match kind {
                MatrixKind::Adjacency => 1.0,
                MatrixKind::Mean => e.p / b,
            })
            .sum();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ergodicity {
    Ergodic,
    NonErgodic,
    Inconclusive,
}

/// Margin below 1 the `r_inf` proxy must clear for an ergodic verdict.
pub const ERGODIC_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicityEvidence {
    pub verdict: Ergodicity,
    pub lambda_lower: PfEstimate,
    /// `||M^n 1||_inf^{1/n}` on the ball for `n = 1, 2, ...`.
    pub r_inf_proxy: Vec<f64>,
    pub finite_graph: bool,
}

/// `||M^n 1||_inf^{1/n}` for `n = 1..=n_powers` on the ball.
pub fn r_inf_proxy(g: &BaseGraph, radius: usize, n_powers: usize) -> Result<Vec<f64>, SpectralError> {
    let m = InducedMatrix::new(g, MatrixKind::Mean, radius)?;
    let mut x = vec![1.0; m.rows.len()];
    let mut y = vec![0.0; x.len()];
    let mut log_scale = 0.0;
    let mut out = Vec::with_capacity(n_powers);
    for n in 1..=n_powers {
        m.apply(&x, &mut y);
        let s = y.iter().copied().fold(0.0, f64::max);
        if s == 0.0 {
            out.resize(n_powers, 0.0);
            break;
        }
        log_scale += s.ln();
        y.iter_mut().for_each(|v| *v /= s);
        std::mem::swap(&mut x, &mut y);
        out.push((log_scale / n as f64).exp());
    }
    Ok(out)
}

/// Three-way ergodicity verdict from a truncated Perron-Frobenius lower
/// bound and the `r_inf` proxy.
pub fn ergodicity_verdict(
    g: &BaseGraph,
    radius: usize,
    n_powers: usize,
    tol: f64,
) -> Result<ErgodicityEvidence, SpectralError> {
    let lambda_lower = truncated_pf(g, MatrixKind::Mean, radius, tol)?;
    let proxy = r_inf_proxy(g, radius, n_powers)?;
    let finite_graph = lambda_lower.complete;
    let tail_non_increasing = proxy.len() >= 6
        && proxy[proxy.len() - 6..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let verdict = if lambda_lower.value > 1.0 + 1e-9 {
        Ergodicity::NonErgodic
    } else if finite_graph
        && tail_non_increasing
        && proxy.last().is_some_and(|&r| r < 1.0 - ERGODIC_MARGIN)
    {
        Ergodicity::Ergodic
    } else {
        Ergodicity::Inconclusive
    };
    Ok(ErgodicityEvidence {
        verdict,
        lambda_lower,
        r_inf_proxy: proxy,
        finite_graph,
    })
}

/// Spectral summary of a base graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    pub rho_lower: PfEstimate,
    pub adjacency_lower: PfEstimate,
    pub cw_certified: Option<CwOutcome>,
    pub r_inf_estimate: Vec<f64>,
    pub ergodicity: Ergodicity,
}

pub fn spectral_report(
    g: &BaseGraph,
    radius: usize,
    n_powers: usize,
    tol: f64,
    certificate: Option<(&dyn TestFunction, f64)>,
) -> Result<SpectralReport, SpectralError> {
    let erg = ergodicity_verdict(g, radius, n_powers, tol)?;
    let adjacency_lower = truncated_pf(g, MatrixKind::Adjacency, radius, tol)?;
    let cw_certified = match certificate {
        Some((f, lambda)) => Some(cw_certify(g, MatrixKind::Mean, f, lambda, radius)?),
        None => None,
    };
    Ok(SpectralReport {
        rho_lower: erg.lambda_lower,
        adjacency_lower,
        cw_certified,
        r_inf_estimate: erg.r_inf_proxy,
        ergodicity: erg.verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate_spec, GeneratorSpec};

    const ENTROPY_EXAMPLE: &str = r#"{"root": "i0", "kernel": "tree", "vertices": ["i0", "i1", "i2"],
        "edges": [{"from": "i0", "to": "i1", "p": 0.3333333333333333},
                  {"from": "i0", "to": "i2", "p": 0.3333333333333333},
                  {"from": "i1", "to": "i0", "p": 0.5}, {"from": "i2", "to": "i1", "p": 0.75}],
        "backward": {"i0": 0.3333333333333333, "i1": 0.5, "i2": 0.25}}"#;

    fn line() -> BaseGraph {
        GeneratorSpec::new("two_sided_line").build().unwrap()
    }

    /// Largest root of x^3 - x - 3 (characteristic polynomial of the
    /// entropy example's M), by bisection.
    fn entropy_example_lambda() -> f64 {
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.powi(3) - mid - 3.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    #[test]
    fn line_truncation_approaches_two() {
        let est = truncated_pf(&line(), MatrixKind::Adjacency, 50, 1e-12).unwrap();
        assert!(est.value >= 1.99 && est.value <= 2.0, "{}", est.value);
        assert!(est.lower_bound);
        // path on 101 vertices
        let exact = 2.0 * (std::f64::consts::PI / 102.0).cos();
        assert!((est.value - exact).abs() < 1e-8);
    }

    #[test]
    fn homogeneous_tree_row_sum() {
        let g = GeneratorSpec::new("homogeneous_tree")
            .with("beta", 0.25)
            .build()
            .unwrap();
        let est = truncated_pf(&g, MatrixKind::Mean, 5, 1e-13).unwrap();
        assert!(est.complete);
        assert!((est.value - 3.0).abs() < 1e-10);
    }

    #[test]
    fn entropy_example_is_supercritical() {
        let g = validate_spec(ENTROPY_EXAMPLE, Default::default()).unwrap().graph;
        let est = truncated_pf(&g, MatrixKind::Mean, 10, 1e-13).unwrap();
        assert!(est.value > 1.0);
        assert!((est.value - entropy_example_lambda()).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_reported() {
        let g = line();
        assert!(matches!(
            truncated_pf(&g, MatrixKind::Adjacency, 0, 1e-12),
            Err(SpectralError::ZeroMatrix { .. })
        ));
    }

    #[test]
    fn halfline_certificate() {
        let g = GeneratorSpec::new("halfline_critical").build().unwrap();
        let out = cw_certify(&g, MatrixKind::Mean, &HalflineHarmonic, 1.0, 200).unwrap();
        match out {
            CwOutcome::Certified(c) => {
                assert!(c.margin >= -CW_SLACK);
                assert!(c.unchecked_complement);
                assert_eq!(c.checked, 201);
            }
            CwOutcome::Refuted(r) => panic!("refuted: {r:?}"),
        }
    }

    #[test]
    fn line_certificate_and_refutation() {
        let g = line();
        match cw_certify(&g, MatrixKind::Adjacency, &Ones, 2.0, 30).unwrap() {
            CwOutcome::Certified(c) => assert_eq!(c.margin, 0.0),
            other => panic!("{other:?}"),
        }
        match cw_certify(&g, MatrixKind::Adjacency, &Ones, 2.1, 30).unwrap() {
            CwOutcome::Refuted(r) => {
                assert_eq!(r.violations, r.checked);
                assert!((r.worst_deficit - 0.1).abs() < 1e-12);
                assert!((r.first_deficit - 0.1).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_positive_test_function() {
        struct Zero;
        impl TestFunction for Zero {
            fn eval(&self, _: &VertexId) -> f64 {
                0.0
            }
            fn sup_bound(&self) -> f64 {
                1.0
            }
            fn name(&self) -> String {
                "zero".into()
            }
        }
        assert!(matches!(
            cw_certify(&line(), MatrixKind::Mean, &Zero, 1.0, 3),
            Err(SpectralError::NonPositiveTestFunction { .. })
        ));
    }

    #[test]
    fn ergodicity_verdicts() {
        let g = validate_spec(ENTROPY_EXAMPLE, Default::default()).unwrap().graph;
        assert_eq!(
            ergodicity_verdict(&g, 10, 50, 1e-12).unwrap().verdict,
            Ergodicity::NonErgodic
        );

        let raw = r#"{"root": "a", "vertices": ["a", "b"],
            "edges": [{"from": "a", "to": "b", "pg": 0.4}, {"from": "a", "to": "a", "pg": 0.6},
                      {"from": "b", "to": "a", "pg": 1.0}],
            "backward": {"a": 0.75, "b": 0.75}}"#;
        let g = validate_spec(raw, Default::default()).unwrap().graph;
        let ev = ergodicity_verdict(&g, 10, 50, 1e-12).unwrap();
        assert_eq!(ev.verdict, Ergodicity::Ergodic);
        assert!((ev.r_inf_proxy.last().unwrap() - 1.0 / 3.0).abs() < 1e-12);

        // Truncations of M already have PF value 1.0708314739 (dense
        // eigensolver, radius >= 50), so the lower bound exceeds 1.
        let g = GeneratorSpec::new("halfline_critical").build().unwrap();
        let ev = ergodicity_verdict(&g, 200, 50, 1e-10).unwrap();
        assert_eq!(ev.verdict, Ergodicity::NonErgodic);
        assert!((ev.lambda_lower.value - 1.070_831_473_902_07).abs() < 1e-8);
    }

    #[test]
    fn homesick_scaling() {
        for lambda in [0.5, 1.3, 2.0, 3.7] {
            let g = GeneratorSpec::new("homesick")
                .with("d", 3.0)
                .with("lambda", lambda)
                .build()
                .unwrap();
            let m = truncated_pf(&g, MatrixKind::Mean, 5, 1e-14).unwrap().value;
            let a = truncated_pf(&g, MatrixKind::Adjacency, 5, 1e-14).unwrap().value;
            assert!((m - a / lambda).abs() < 1e-10);
        }
    }
}
