use nalgebra::{DMatrix, DVector};

use super::{Domain, GfError};

/// Row tolerance for the exit chain.
pub const Q_ROW_TOL: f64 = 1e-10;

/// Largest chain whose stationary law is computed by a dense solve.
pub const DENSE_STATIONARY_LIMIT: usize = 1000;

/// Sparse row-stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseChain {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseChain {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn from_dense(q: &[Vec<f64>]) -> Self {
        SparseChain {
            rows: q
                .iter()
                .map(|r| r.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(j, &x)| (j, x)).collect())
                .collect(),
        }
    }

    /// `nu Q`.
    pub fn left_apply(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, q) in row {
                out[j] += nu[i] * q;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect()
    }
}

/// `Gbar_i = 1 / (1 - sum_j p(i,j) F(-j))`.
pub fn gbar(domain: &Domain, f: &[f64], frozen: f64) -> Vec<f64> {
    (0..domain.len())
        .map(|i| 1.0 / (1.0 - domain.forward_mass(i, f, frozen)))
        .collect()
}

/// Exit chain `q(i,j) = (1 - F(-j)) / (1 - F(-i)) p(i,j) Gbar_i`.
///
/// Edges leaving a truncated domain are dropped and the rows renormalized;
/// the caller flags such results.
pub fn build_exit_chain(domain: &Domain, f: &[f64], frozen: f64) -> Result<(SparseChain, Vec<f64>), GfError> {
    for (i, &fi) in f.iter().enumerate() {
        if fi >= 1.0 - 1e-12 {
            return Err(GfError::RecurrentType {
                vertex: domain.names[i].clone(),
                f: fi,
            });
        }
    }
    let gbar = gbar(domain, f, frozen);
    let mut rows = Vec::with_capacity(domain.len());
    for (i, row) in domain.rows.iter().enumerate() {
        let mut out: Vec<(usize, f64)> = row
            .iter()
            .filter_map(|&(t, p)| {
                let j = t?;
                Some((j, (1.0 - f[j]) / (1.0 - f[i]) * p * gbar[i]))
            })
            .collect();
        if !domain.complete {
            let s: f64 = out.iter().map(|e| e.1).sum();
            if s > 0.0 {
                out.iter_mut().for_each(|e| e.1 /= s);
            }
        }
        let s: f64 = out.iter().map(|e| e.1).sum();
        if (s - 1.0).abs() > Q_ROW_TOL {
            return Err(GfError::ExitChainNotStochastic {
                vertex: domain.names[i].clone(),
                sum: s,
            });
        }
        rows.push(out);
    }
    Ok((SparseChain { rows }, gbar))
}

/// Strongly connected components (iterative Kosaraju), in topological order
/// of the condensation.
fn components(q: &SparseChain) -> Vec<Vec<usize>> {
    let n = q.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, k)) = stack.pop() {
            if let Some(&(w, _)) = q.rows[v].get(k) {
                stack.push((v, k + 1));
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in q.rows.iter().enumerate() {
        for &(j, _) in row {
            rev[j].push(i);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut k = 0;
        while k < members.len() {
            let v = members[k];
            for &w in &rev[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Closed communicating classes of a chain.
pub fn closed_classes(q: &SparseChain) -> Vec<Vec<usize>> {
    let comps = components(q);
    let mut id = vec![0; q.len()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            id[v] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&v| q.rows[v].iter().all(|&(w, _)| id[w] == *c))
        })
        .map(|(_, m)| m.clone())
        .collect()
}

/// Stationary law of an irreducible chain with `sup |nu Q - nu| < tol`.
pub fn stationary(q: &SparseChain, tol: f64) -> Result<(Vec<f64>, f64), GfError> {
    let n = q.len();
    if n == 0 {
        return Err(GfError::NonConvergence { residual: f64::NAN });
    }
    let comps = components(q);
    if comps.len() > 1 {
        return Err(GfError::Reducible {
            closed_classes: closed_classes(q),
        });
    }
    let nu = if n <= DENSE_STATIONARY_LIMIT {
        // (Q^T - I) nu = 0 with the last equation replaced by sum nu = 1
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, row) in q.rows.iter().enumerate() {
            for &(j, x) in row {
                a[(j, i)] += x;
            }
        }
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let x = a.lu().solve(&b).ok_or(GfError::SingularSystem)?;
        x.iter().map(|v| v.max(0.0)).collect()
    } else {
        // lazy chain (I + Q)/2 has the same stationary law and is aperiodic
        let mut nu = vec![1.0 / n as f64; n];
        let mut converged = false;
        for _ in 0..1_000_000 {
            let moved = q.left_apply(&nu);
            let next: Vec<f64> = nu.iter().zip(&moved).map(|(a, b)| 0.5 * (a + b)).collect();
            let s: f64 = next.iter().sum();
            let next: Vec<f64> = next.iter().map(|v| v / s).collect();
            let d = next.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            nu = next;
            if d < tol * 1e-3 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GfError::NonConvergence {
                residual: residual(q, &nu),
            });
        }
        nu
    };
    let s: f64 = nu.iter().sum();
    let nu: Vec<f64> = nu.iter().map(|v| v / s).collect();
    let r = residual(q, &nu);
    if !(r < tol) {
        return Err(GfError::NonConvergence { residual: r });
    }
    Ok((nu, r))
}

fn residual(q: &SparseChain, nu: &[f64]) -> f64 {
    q.left_apply(nu)
        .iter()
        .zip(nu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
