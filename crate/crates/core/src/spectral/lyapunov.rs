use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::SpectralError;
use crate::graph::Marginal;
use crate::rng;

/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Operator infinity-norm (maximum absolute row sum).
fn inf_norm(a: &Mat2) -> f64 {
    (a[0][0].abs() + a[0][1].abs()).max(a[1][0].abs() + a[1][1].abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub trials: usize,
}

/// `(1/n) ln ||A_n ... A_1||_inf` for one trial, renormalizing every step.
fn one_trial<S>(sampler: &S, n: usize, rng: &mut ChaCha8Rng) -> Result<f64, SpectralError>
where
    S: Fn(&mut ChaCha8Rng) -> Mat2,
{
    let mut p: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_norm = 0.0;
    for step in 1..=n {
        let a = sampler(rng);
        if a.iter().flatten().any(|x| !x.is_finite()) {
            return Err(SpectralError::InvalidArgument(format!(
                "sampled matrix with non-finite entries at step {step}"
            )));
        }
        p = mul(&a, &p);
        let s = inf_norm(&p);
        if s == 0.0 {
            return Err(SpectralError::SingularCollapse { step });
        }
        log_norm += s.ln();
        p.iter_mut().flatten().for_each(|x| *x /= s);
    }
    Ok(log_norm / n as f64)
}

/// Top Lyapunov exponent of i.i.d. products, averaged over independent
/// trials. Trial `t` draws from stream `(seed, t)`; the reduction runs in
/// trial order, so the result does not depend on the thread count.
pub fn lyapunov_top<S>(
    sampler: S,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<LyapunovEstimate, SpectralError>
where
    S: Fn(&mut ChaCha8Rng) -> Mat2 + Sync,
{
    if n == 0 || trials == 0 {
        return Err(SpectralError::InvalidArgument(
            "n and trials must be at least 1".into(),
        ));
    }
    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| one_trial(&sampler, n, &mut rng::stream(seed, t as u64)))
        .collect::<Result<_, _>>()?;
    let (estimate, stderr) = rng::mean_stderr(&per_trial);
    Ok(LyapunovEstimate {
        estimate,
        stderr,
        n,
        trials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RwdcreCase {
    /// No `lambda` with `mu^- / lambda + mu^+ lambda <= 1` on the support.
    NoAdmissibleLambda,
    /// Some admissible `lambda > 1`.
    LambdaAboveOne,
    /// Some admissible `lambda < 1` (and none above 1).
    LambdaBelowOne,
    /// Only `lambda = 1` is admissible.
    LambdaOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    Transient,
    Recurrent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RwdcreVerdict {
    pub verdict: Recurrence,
    pub case: RwdcreCase,
    /// Intersection over the support of the admissible `lambda` intervals.
    pub lambda_interval: Option<(f64, f64)>,
    /// `E ln(mu^- / mu^+)` (or its reciprocal form in the `lambda < 1` case).
    pub threshold: Option<f64>,
    pub lyapunov: Option<LyapunovEstimate>,
    /// `estimate -/+ band * stderr`.
    pub bounds: Option<(f64, f64)>,
    /// Single support point: the exponent is the log spectral radius.
    pub closed_form: bool,
}

/// One support point of the environment: `mu^+ = m(z, z+1)`,
/// `mu^- = m(z, z-1)` and its probability.
#[derive(Clone, Copy, Debug)]
struct Point {
    up: f64,
    down: f64,
    weight: f64,
}

fn support(omega: &Marginal, nu: &Marginal) -> Vec<Point> {
    let mut out = Vec::new();
    for (&w, &pw) in omega.values.iter().zip(&omega.weights) {
        for (&b, &pb) in nu.values.iter().zip(&nu.weights) {
            let r = (1.0 - b) / b;
            out.push(Point {
                up: r * w,
                down: r * (1.0 - w),
                weight: pw * pb,
            });
        }
    }
    out
}

/// `[lo, hi]` where `mu^- / lambda + mu^+ lambda <= 1`, if non-empty.
fn admissible(p: &Point) -> Option<(f64, f64)> {
    let disc = 1.0 - 4.0 * p.up * p.down;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((1.0 - s) / (2.0 * p.up), (1.0 + s) / (2.0 * p.up)))
}

/// Transfer matrix of the harmonic-function recursion. With `swap` the
/// roles of the two directions are exchanged.
fn transfer(p: &Point, swap: bool) -> Mat2 {
    let (a, b) = if swap { (p.down, p.up) } else { (p.up, p.down) };
    [[1.0 / a, -b / a], [1.0, 0.0]]
}

/// Classifies the walk on the integers in an i.i.d. environment with
/// forward split `omega` and backward probability `nu`.
///
/// `band` is the half-width of the decision band in standard errors.
pub fn classify_rwdcre(
    omega: &Marginal,
    nu: &Marginal,
    n: usize,
    trials: usize,
    seed: u64,
    band: f64,
) -> Result<RwdcreVerdict, SpectralError> {
    let points = support(omega, nu);
    let mut interval = Some((0.0f64, f64::INFINITY));
    for p in &points {
        interval = match (interval, admissible(p)) {
            (Some((lo, hi)), Some((a, b))) if lo.max(a) <= hi.min(b) => Some((lo.max(a), hi.min(b))),
            _ => None,
        };
    }
    let Some((lo, hi)) = interval else {
        return Ok(RwdcreVerdict {
            verdict: Recurrence::Transient,
            case: RwdcreCase::NoAdmissibleLambda,
            lambda_interval: None,
            threshold: None,
            lyapunov: None,
            bounds: None,
            closed_form: false,
        });
    };
    let (case, swap) = if hi > 1.0 {
        (RwdcreCase::LambdaAboveOne, false)
    } else if lo < 1.0 {
        (RwdcreCase::LambdaBelowOne, true)
    } else {
        (RwdcreCase::LambdaOne, false)
    };
    let mut out = RwdcreVerdict {
        verdict: Recurrence::Inconclusive,
        case,
        lambda_interval: Some((lo, hi)),
        threshold: None,
        lyapunov: None,
        bounds: None,
        closed_form: points.len() == 1,
    };
    if case == RwdcreCase::LambdaOne {
        // mu^+ = mu^- = 1/2 at every point is the only way to get here
        if points.len() == 1 {
            out.verdict = Recurrence::Recurrent;
        }
        return Ok(out);
    }
    let threshold: f64 = points
        .iter()
        .map(|p| {
            let r = if swap { p.up / p.down } else { p.down / p.up };
            p.weight * r.ln()
        })
        .sum();
    out.threshold = Some(threshold);

    if let [p] = points.as_slice() {
        // constant matrix: the exponent is the log of its spectral radius,
        // the larger root of x^2 - x / a + b / a
        let (a, b) = if swap { (p.down, p.up) } else { (p.up, p.down) };
        let s = (1.0 - 4.0 * a * b).max(0.0).sqrt();
        let gamma = ((1.0 + s) / (2.0 * a)).ln();
        out.lyapunov = Some(LyapunovEstimate {
            estimate: gamma,
            stderr: 0.0,
            n: 0,
            trials: 0,
        });
        out.bounds = Some((gamma, gamma));
        out.verdict = if gamma < threshold {
            Recurrence::Transient
        } else {
            Recurrence::Recurrent
        };
        return Ok(out);
    }

    let sampler = |rng: &mut ChaCha8Rng| {
        let w = omega.sample(rng.random());
        let b = nu.sample(rng.random());
        let r = (1.0 - b) / b;
        let p = Point {
            up: r * w,
            down: r * (1.0 - w),
            weight: 1.0,
        };
        transfer(&p, swap)
    };
    let est = lyapunov_top(sampler, n, trials, seed)?;
    let bounds = (est.estimate - band * est.stderr, est.estimate + band * est.stderr);
    out.verdict = if bounds.1 < threshold {
        Recurrence::Transient
    } else if bounds.0 > threshold {
        Recurrence::Recurrent
    } else {
        Recurrence::Inconclusive
    };
    out.lyapunov = Some(est);
    out.bounds = Some(bounds);
    Ok(out)
}
