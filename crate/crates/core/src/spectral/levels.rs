use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::SpectralError;
use crate::graph::{BaseGraph, VertexId};

/// Level sizes `|T_0|, ..., |T_N|` of the cover.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LevelCounts {
    pub counts: Vec<BigUint>,
}

impl LevelCounts {
    /// `|T_n|^{1/n}`; 1 for `n = 0`.
    pub fn root(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        (ln_big(&self.counts[n]) / n as f64).exp()
    }

    pub fn roots(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|n| self.root(n)).collect()
    }

    /// Tab-separated `n`, `count`, `root` with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n\tcount\troot\n");
        for (n, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{n}\t{c}\t{:.17}", self.root(n));
        }
        out
    }
}

impl Serialize for LevelCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        let mut st = s.serialize_struct("LevelCounts", 2)?;
        st.serialize_field("counts", &counts)?;
        st.serialize_field("roots", &self.roots())?;
        st.end()
    }
}

fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 900;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Counts tree vertices per level by pushing the label measure forward:
/// `mu_{n+1}(j) = sum_i mu_n(i)` over edges `i -> j`, starting from the
/// root label.
///
/// Fails with [`SpectralError::BudgetExceeded`] (carrying the counts obtained
/// so far) once more than `budget` distinct labels occur on one level.
pub fn count_levels(g: &BaseGraph, levels: usize, budget: usize) -> Result<LevelCounts, SpectralError> {
    let mut measure: BTreeMap<VertexId, BigUint> = BTreeMap::from([(g.root(), BigUint::one())]);
    let mut out = LevelCounts {
        counts: vec![BigUint::one()],
    };
    for n in 1..=levels {
        let mut next: BTreeMap<VertexId, BigUint> = BTreeMap::new();
        for (v, c) in &measure {
            for e in g.out_edges(v)?.iter() {
                *next.entry(e.to.clone()).or_default() += c;
            }
            if next.len() > budget {
                return Err(SpectralError::BudgetExceeded {
                    reached: n - 1,
                    partial: out,
                });
            }
        }
        out.counts.push(next.values().sum());
        measure = next;
    }
    Ok(out)
}
