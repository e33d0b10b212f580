use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::args::SweepArgs;
use crate::commands::{cell, evidence};
use crate::input::{generator_spec, with_overrides};
use crate::report::{DomainError, Outcome};

pub fn tolerances(a: &SweepArgs) -> Map<String, Value> {
    [
        ("tol", Value::from(a.tol)),
        ("classify_tol", 1e-8.into()),
        ("truncation_radius", a.radius.into()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

struct Row {
    point: Vec<f64>,
    verdict: String,
    lambda_m: Option<f64>,
    u_root: Option<f64>,
    q_loop: Option<f64>,
    ell0: Option<f64>,
    h: Option<f64>,
    dim_lower: Option<f64>,
    dim_point: Option<f64>,
    dim_upper: Option<f64>,
    transition: bool,
    error: Option<String>,
}

/// Grid points in lexicographic order of the axes.
fn points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if axes.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

fn row(name: &str, a: &SweepArgs, keys: &[String], point: Vec<f64>) -> Row {
    let overrides: Vec<(String, f64)> = keys.iter().cloned().zip(point.iter().copied()).collect();
    let spec = generator_spec(name, &with_overrides(&a.common.params, &overrides));
    let mut r = Row {
        point,
        verdict: "error".into(),
        lambda_m: None,
        u_root: None,
        q_loop: None,
        ell0: None,
        h: None,
        dim_lower: None,
        dim_point: None,
        dim_upper: None,
        transition: false,
        error: None,
    };
    let g = match spec.build() {
        Ok(g) => g,
        Err(e) => {
            r.error = Some(DomainError::new(e).message);
            return r;
        }
    };
    let ev = evidence(&g, a.tol, a.radius);
    r.verdict = ev.verdict.to_string();
    let mut errors = Vec::new();
    match &ev.spectral {
        Ok(s) => r.lambda_m = Some(s.rho_lower.value),
        Err(e) => errors.push(format!("spectral: {}", e.message)),
    }
    match &ev.analytic {
        Ok(sol) => {
            r.u_root = Some(sol.u_root);
            r.q_loop = Some(sol.q_loop);
            r.ell0 = sol.ell0;
            r.h = sol.h;
            r.dim_lower = sol.dim_lower;
            r.dim_point = sol.dim_point;
            r.dim_upper = sol.dim_upper;
        }
        Err(e) => errors.push(format!("analytic: {}", e.message)),
    }
    if !errors.is_empty() {
        r.error = Some(errors.join("; "));
    }
    r
}

/// Marks the first row whose verdict differs from the preceding verdict,
/// skipping rows that failed.
fn mark_transition(rows: &mut [Row]) {
    let mut prev: Option<usize> = None;
    for k in 0..rows.len() {
        if rows[k].verdict == "error" {
            continue;
        }
        if prev.is_some_and(|p| rows[p].verdict != rows[k].verdict) {
            rows[k].transition = true;
            return;
        }
        prev = Some(k);
    }
}

pub fn sweep(a: &SweepArgs) -> Result<Outcome, DomainError> {
    let name = a.common.generator.as_deref().expect("sweep requires --generator");
    let keys: Vec<String> = a.grid.iter().map(|g| g.key.clone()).collect();
    let axes: Vec<Vec<f64>> = a.grid.iter().map(|g| g.values.clone()).collect();
    let mut rows: Vec<Row> = points(&axes).into_iter().map(|p| row(name, a, &keys, p)).collect();
    mark_transition(&mut rows);

    let mut table = String::new();
    for k in &keys {
        let _ = write!(table, "{k}\t");
    }
    table.push_str("verdict\tlambda_m\tU_root\tq_loop\tell0\th\tdim_lower\tdim_point\tdim_upper\ttransition\terror\n");
    let mut json_rows = Vec::with_capacity(rows.len());
    for r in &rows {
        for x in &r.point {
            let _ = write!(table, "{x}\t");
        }
        let err = r.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ");
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{err}",
            r.verdict,
            cell(r.lambda_m),
            cell(r.u_root),
            cell(r.q_loop),
            cell(r.ell0),
            cell(r.h),
            cell(r.dim_lower),
            cell(r.dim_point),
            cell(r.dim_upper),
            u8::from(r.transition),
        );
        let params: Map<String, Value> = keys.iter().cloned().zip(r.point.iter().map(|&x| x.into())).collect();
        json_rows.push(json!({
            "params": params,
            "verdict": r.verdict,
            "lambda_m": r.lambda_m,
            "U_root": r.u_root,
            "q_loop": r.q_loop,
            "ell0": r.ell0,
            "h": r.h,
            "dim_lower": r.dim_lower,
            "dim_point": r.dim_point,
            "dim_upper": r.dim_upper,
            "transition": r.transition,
            "error": r.error,
        }));
    }
    Ok(Outcome {
        json: json!({ "axes": keys, "rows": json_rows }),
        table: Some(table),
    })
}
