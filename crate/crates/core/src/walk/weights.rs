use std::fmt;
use std::sync::Arc;

use crate::graph::VertexId;

type WeightFn = dyn Fn(&VertexId, &VertexId) -> f64 + Send + Sync;

/// Bounded edge weight `w(i,j)` defining the length
/// `l(x) = sum w(tau(x_{k-1}), tau(x_k))` along the geodesic from the root.
#[derive(Clone)]
pub struct WeightFunction {
    name: String,
    bound: f64,
    f: Arc<WeightFn>,
}

impl WeightFunction {
    pub fn new(
        name: &str,
        bound: f64,
        f: impl Fn(&VertexId, &VertexId) -> f64 + Send + Sync + 'static,
    ) -> Self {
        WeightFunction {
            name: name.to_string(),
            bound,
            f: Arc::new(f),
        }
    }

    /// `w == c`; with `c = 1` the length is the height.
    pub fn constant(c: f64) -> Self {
        let name = if c == 1.0 {
            "unit".to_string()
        } else {
            format!("const:{c}")
        };
        WeightFunction {
            name,
            bound: c.abs(),
            f: Arc::new(move |_, _| c),
        }
    }

    /// `c * w`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        WeightFunction {
            name: format!("{c}*{}", self.name),
            bound: self.bound * c.abs(),
            f: Arc::new(move |i, j| c * f(i, j)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, i: &VertexId, j: &VertexId) -> f64 {
        (self.f)(i, j)
    }

    /// Evaluates and checks the declared bound.
    pub fn checked(&self, i: &VertexId, j: &VertexId) -> Result<f64, (f64, f64)> {
        let v = self.eval(i, j);
        if v.abs() <= self.bound && v.is_finite() {
            Ok(v)
        } else {
            Err((v, self.bound))
        }
    }
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}
