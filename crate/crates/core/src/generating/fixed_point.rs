use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::GfError;
use crate::graph::{BaseGraph, VertexId};

/// Largest system solved with dense linear algebra.
pub const DENSE_LIMIT: usize = 400;

/// Sup-norm of `F'` beyond which `Lambda` is declared infinite.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Largest truncation ball materialized.
pub const BALL_BUDGET: usize = 200_000;

/// Finite set of labels on which the equations are solved. Edges leaving
/// the set point to `None`; their `F` value is frozen by the caller.
#[derive(Clone, Debug)]
pub struct Domain {
    pub vertices: Vec<VertexId>,
    pub names: Vec<String>,
    pub backward: Vec<f64>,
    pub rows: Vec<Vec<(Option<usize>, f64)>>,
    /// No edge leaves the domain.
    pub complete: bool,
    pub radius: Option<usize>,
}

impl Domain {
    /// Whole graph (finite) or the forward ball of `radius` (required for
    /// generators). The root has index 0.
    pub fn new(g: &BaseGraph, radius: Option<usize>) -> Result<Self, GfError> {
        let r = match (g.vertex_count(), radius) {
            (_, Some(r)) => r,
            (Some(n), None) => n,
            (None, None) => return Err(GfError::TruncationRequired),
        };
        let ball = g.ball(r, BALL_BUDGET)?.ok_or(GfError::BallTooLarge {
            radius: r,
            budget: BALL_BUDGET,
        })?;
        let mut backward = Vec::with_capacity(ball.len());
        let mut rows = Vec::with_capacity(ball.len());
        let mut complete = true;
        for v in &ball.vertices {
            backward.push(g.backward(v)?);
            let row: Vec<(Option<usize>, f64)> = g
                .out_edges(v)?
                .iter()
                .map(|e| (ball.index.get(&e.to).copied(), e.p))
                .collect();
            complete &= row.iter().all(|(t, _)| t.is_some());
            rows.push(row);
        }
        let names = ball.vertices.iter().map(|v| g.name(v)).collect();
        Ok(Domain {
            vertices: ball.vertices,
            names,
            backward,
            rows,
            complete,
            radius: if complete { None } else { Some(r) },
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `sum_j p(i,j) F(-j)` with `frozen` outside the domain.
    pub fn forward_mass(&self, i: usize, f: &[f64], frozen: f64) -> f64 {
        self.rows[i]
            .iter()
            .map(|&(t, p)| p * t.map_or(frozen, |j| f[j]))
            .sum()
    }

    /// Right-hand side `p(-i) + F(-i) sum_j p(i,j) F(-j)`.
    pub fn phi(&self, f: &[f64], frozen: f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.backward[i] + f[i] * self.forward_mass(i, f, frozen))
            .collect()
    }

    /// Jacobian of `phi` at `f`:
    /// `B(i,j) = p(i,j) F(-i) + delta_ij sum_k p(i,k) F(-k)`.
    pub fn jacobian(&self, f: &[f64], frozen: f64) -> DMatrix<f64> {
        let n = self.len();
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            b[(i, i)] += self.forward_mass(i, f, frozen);
            for &(t, p) in &self.rows[i] {
                if let Some(j) = t {
                    b[(i, j)] += p * f[i];
                }
            }
        }
        b
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointMethod {
    /// Newton's method from 0; quadratic away from criticality, linear
    /// (halving) at it.
    Newton,
    /// Plain iteration `F <- phi(F)` from 0.
    Kleene,
    /// Newton for domains up to [`DENSE_LIMIT`] labels, Kleene beyond.
    Auto,
}

impl FixedPointMethod {
    pub fn resolve(self, n: usize) -> Self {
        match self {
            FixedPointMethod::Auto if n <= DENSE_LIMIT => FixedPointMethod::Newton,
            FixedPointMethod::Auto => FixedPointMethod::Kleene,
            m => m,
        }
    }
}

/// Iterates of a monotone scheme started at `F = 0`. Both schemes increase
/// pointwise towards the least fixed point.
pub struct FIterates<'a> {
    domain: &'a Domain,
    frozen: f64,
    method: FixedPointMethod,
    current: Vec<f64>,
    failed: bool,
}

impl<'a> FIterates<'a> {
    pub fn new(domain: &'a Domain, frozen: f64, method: FixedPointMethod) -> Self {
        FIterates {
            domain,
            frozen,
            method: method.resolve(domain.len()),
            current: vec![0.0; domain.len()],
            failed: false,
        }
    }

    fn step(&self) -> Result<Vec<f64>, GfError> {
        let f = &self.current;
        let phi = self.domain.phi(f, self.frozen);
        let next: Vec<f64> = match self.method {
            FixedPointMethod::Newton => {
                let n = f.len();
                let a = DMatrix::identity(n, n) - self.domain.jacobian(f, self.frozen);
                let rhs = DVector::from_iterator(n, phi.iter().zip(f).map(|(p, x)| p - x));
                let delta = a.lu().solve(&rhs).ok_or(GfError::SingularSystem)?;
                f.iter().zip(delta.iter()).map(|(x, d)| x + d).collect()
            }
            _ => phi,
        };
        Ok(next.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
    }
}

impl Iterator for FIterates<'_> {
    type Item = Result<Vec<f64>, GfError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.step() {
            Ok(next) => {
                self.current = next.clone();
                Some(Ok(next))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Residual below which `phi(F) = F` holds to double precision.
pub const ROUNDOFF_RESIDUAL: f64 = 32.0 * f64::EPSILON;

/// Least non-negative solution of the first-passage equations on a domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FSolve {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `sup_i |phi(F)(i) - F(i)|` at the returned values.
    pub residual: f64,
    pub method: FixedPointMethod,
    pub frozen: f64,
}

pub fn solve_on_domain(
    domain: &Domain,
    frozen: f64,
    method: FixedPointMethod,
    tol: f64,
    max_iter: usize,
) -> Result<FSolve, GfError> {
    let mut prev = vec![0.0; domain.len()];
    let resolved = method.resolve(domain.len());
    // run of consecutive iterates at the round-off floor: length, whether
    // any of them went backwards, and the one with the smallest residual
    let mut floor_run = 0;
    let mut floor_backwards = false;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (k, next) in FIterates::new(domain, frozen, method).take(max_iter).enumerate() {
        let next = next?;
        let update = sup_dist(&prev, &next);
        // both schemes increase from 0 in exact arithmetic
        let decreased = next.iter().zip(&prev).any(|(a, b)| a < b);
        prev = next;
        let residual = sup_dist(&domain.phi(&prev, frozen), &prev);
        if update < tol {
            return Ok(FSolve {
                values: prev,
                iterations: k + 1,
                residual,
                method: resolved,
                frozen,
            });
        }
        // An ill-conditioned Newton system keeps moving by far more than the
        // residual once phi(F) = F holds to machine precision; once steps
        // also go backwards they only reshuffle round-off.
        if residual > ROUNDOFF_RESIDUAL {
            floor_run = 0;
            floor_backwards = false;
            best = None;
            continue;
        }
        floor_run += 1;
        floor_backwards |= decreased;
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, prev.clone()));
        }
        if floor_run >= 3 && floor_backwards {
            let (residual, values) = best.take().expect("floor run is non-empty");
            return Ok(FSolve {
                values,
                iterations: k + 1,
                residual,
                method: resolved,
                frozen,
            });
        }
    }
    Err(GfError::MaxIterExceeded {
        iterations: max_iter,
        residual: sup_dist(&domain.phi(&prev, frozen), &prev),
    })
}

/// Outcome of the derivative solve.
#[derive(Clone, Debug, PartialEq)]
pub enum FprimeSolve {
    Finite { values: Vec<f64>, method: &'static str },
    /// `F'` exceeds [`DIVERGENCE_LIMIT`]: `Lambda = infinity`.
    Divergent { sup: f64 },
}

/// Solves `(I - B) F' = c` with `c(i) = p(-i) + sum_j p(i,j) F(-j) F(-i)`.
/// Labels outside the domain contribute `F' = 0`.
pub fn solve_fprime(
    domain: &Domain,
    f: &[f64],
    frozen: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FprimeSolve, GfError> {
    let n = domain.len();
    let c: Vec<f64> = (0..n)
        .map(|i| domain.backward[i] + f[i] * domain.forward_mass(i, f, frozen))
        .collect();
    let diverged = |x: &[f64]| {
        let sup = x.iter().copied().fold(0.0, f64::max);
        (sup > DIVERGENCE_LIMIT || x.iter().any(|v| !v.is_finite() || *v < 0.0))
            .then_some(if sup.is_finite() { sup } else { f64::INFINITY })
    };
    if n <= DENSE_LIMIT {
        let a = DMatrix::identity(n, n) - domain.jacobian(f, frozen);
        let x = a
            .lu()
            .solve(&DVector::from_vec(c))
            .ok_or(GfError::SingularSystem)?;
        let x: Vec<f64> = x.iter().copied().collect();
        if let Some(sup) = diverged(&x) {
            return Ok(FprimeSolve::Divergent { sup });
        }
        return Ok(FprimeSolve::Finite { values: x, method: "dense" });
    }
    // monotone iteration x <- c + B x from 0
    let mass: Vec<f64> = (0..n).map(|i| domain.forward_mass(i, f, frozen)).collect();
    let mut x = vec![0.0; n];
    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let inner: f64 = domain.rows[i]
                    .iter()
                    .filter_map(|&(t, p)| t.map(|j| p * x[j]))
                    .sum();
                c[i] + mass[i] * x[i] + f[i] * inner
            })
            .collect();
        if let Some(sup) = diverged(&next) {
            return Ok(FprimeSolve::Divergent { sup });
        }
        let scale = next.iter().copied().fold(1.0, f64::max);
        let update = sup_dist(&x, &next);
        x = next;
        if update < tol * scale {
            return Ok(FprimeSolve::Finite { values: x, method: "iteration" });
        }
    }
    Ok(FprimeSolve::Divergent {
        sup: x.iter().copied().fold(0.0, f64::max),
    })
}
