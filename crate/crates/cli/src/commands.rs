use std::fmt::Write as _;

use conecover::branching::couple_check;
use conecover::generating::{analyze, GfOptions, GfSolution, Regime};
use conecover::graph::Generator;
use conecover::spectral::{
    classify_rwdcre, count_levels, spectral_report, HalflineHarmonic, Ones, SpectralError, SpectralReport,
    TestFunction, CW_SLACK, ERGODIC_MARGIN,
};
use conecover::walk::{self, EntropyOptions, ExitLaw, Record};
use conecover::BaseGraph;
use serde_json::{json, Map, Value};

use crate::args::{AnalyzeArgs, ClassifyArgs, CoupleArgs, GrowthArgs, RwdcreArgs, SimulateArgs};
use crate::input::Loaded;
use crate::report::{fmt_f64, DomainError, Outcome};

/// Powers of `M` used for the `r_inf` proxy.
const N_POWERS: usize = 64;
/// Distance from 1 below which a Perron-Frobenius value counts as 1.
const PF_MARGIN: f64 = 1e-9;
/// Standard errors in the Monte Carlo decision bands.
const BAND: f64 = 3.0;
const CLASSIFY_TOL: f64 = 1e-8;

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn insert(v: &mut Value, key: &str, x: Value) {
    if let Value::Object(m) = v {
        m.insert(key.to_string(), x);
    }
}

fn error_value(e: &DomainError) -> Value {
    json!({ "error": e.message, "error_kind": e.kind })
}

fn tolerances(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn validate(l: &Loaded) -> Outcome {
    let g = &l.graph;
    let edges = g
        .vertices()
        .map(|vs| vs.iter().map(|v| g.out_edges(v).map_or(0, |e| e.iter().count())).sum::<usize>());
    let warnings: Vec<String> = l.warnings.iter().map(ToString::to_string).collect();
    Outcome {
        json: json!({
            "valid": true,
            "kind": if g.is_finite() { "finite" } else { "generator" },
            "vertices": g.vertex_count(),
            "edges": edges,
            "root": g.name(&g.root()),
            "epsilon": g.epsilon(),
            "degree_bound": format!("{:?}", g.degree_bound()),
            "warnings": warnings,
        }),
        table: None,
    }
}

pub fn validate_tolerances() -> Map<String, Value> {
    tolerances(&[("stochastic_tol", conecover::graph::STOCHASTIC_TOL.into())])
}

/// Spectral and analytic evidence about recurrence, without Monte Carlo.
pub struct Evidence {
    pub radius: usize,
    pub test_function: String,
    pub spectral: Result<SpectralReport, DomainError>,
    pub analytic: Result<GfSolution, DomainError>,
    pub verdict: &'static str,
    pub basis: String,
}

pub fn evidence(g: &BaseGraph, tol: f64, radius: usize) -> Evidence {
    let finite = g.vertex_count();
    // a ball whose radius is the vertex count covers a finite graph
    let radius = finite.map_or(radius, |n| n.max(1));
    let f: &dyn TestFunction = match g.generator() {
        Some(Generator::HalflineCritical) => &HalflineHarmonic,
        _ => &Ones,
    };
    let spectral = spectral_report(g, radius, N_POWERS, tol, Some((f, 1.0))).map_err(DomainError::new);
    let opts = GfOptions {
        tol,
        radius: finite.is_none().then_some(radius),
        classify_tol: CLASSIFY_TOL,
        ..GfOptions::default()
    };
    let analytic = analyze(g, &[], &opts).map_err(DomainError::new);
    let (verdict, basis) = decide(finite.is_some(), &spectral, &analytic);
    Evidence {
        radius,
        test_function: f.name(),
        spectral,
        analytic,
        verdict,
        basis,
    }
}

fn decide(
    finite: bool,
    spectral: &Result<SpectralReport, DomainError>,
    analytic: &Result<GfSolution, DomainError>,
) -> (&'static str, String) {
    let pf = spectral.as_ref().ok().map(|s| &s.rho_lower);
    if finite {
        if let Ok(sol) = analytic {
            if sol.regime == Regime::Transient {
                return ("transient", format!("U_root = {} < 1", sol.u_root));
            }
            match sol.spectral.as_ref().map(|a| a.implies) {
                Some("recurrent") => return ("recurrent", "U_root = 1 and lambda(M) < 1".into()),
                Some("critical") => return ("critical", "U_root = 1 and lambda(M) = 1".into()),
                _ => {}
            }
        }
        if let Some(pf) = pf.filter(|p| p.complete) {
            let v = pf.value;
            return if v < 1.0 - PF_MARGIN {
                ("recurrent", format!("lambda(M) = {v} < 1"))
            } else if v > 1.0 + PF_MARGIN {
                ("transient", format!("lambda(M) = {v} > 1"))
            } else {
                ("critical", format!("lambda(M) = {v}"))
            };
        }
        return ("inconclusive", "neither the analytic nor the spectral computation succeeded".into());
    }
    if let Some(pf) = pf.filter(|p| p.value > 1.0 + PF_MARGIN) {
        return (
            "transient",
            format!("lambda(M) >= {} > 1 on the ball of radius {}", pf.value, pf.radius),
        );
    }
    if let Ok(sol) = analytic {
        if sol.regime == Regime::Transient {
            return (
                "transient",
                format!("U_root <= {} < 1 with F = 1 outside the truncation", sol.u_root),
            );
        }
    }
    if let Ok(s) = spectral {
        if s.cw_certified.as_ref().is_some_and(|c| c.is_certified()) {
            return ("transient_or_critical", "Mf >= f on the ball, so lambda+(M) >= 1".into());
        }
    }
    ("inconclusive", "no spectral or analytic criterion applies at this radius".into())
}

fn analytic_summary(sol: &GfSolution) -> Value {
    json!({
        "regime": sol.regime,
        "U_root": sol.u_root,
        "q_loop": sol.q_loop,
        "ell0": sol.ell0,
        "h": sol.h,
        "spectral": sol.spectral,
        "assumption_unverified": sol.assumption_unverified,
        "bracket_width": sol.convergence.bracket_width,
        "truncation_radius": sol.convergence.truncation_radius,
    })
}

pub fn classify_tolerances(a: &ClassifyArgs) -> Map<String, Value> {
    tolerances(&[
        ("tol", a.tol.into()),
        ("classify_tol", CLASSIFY_TOL.into()),
        ("pf_margin", PF_MARGIN.into()),
        ("cw_slack", CW_SLACK.into()),
        ("ergodic_margin", ERGODIC_MARGIN.into()),
        ("truncation_radius", a.radius.into()),
    ])
}

pub fn classify(l: &Loaded, a: &ClassifyArgs) -> Result<Outcome, DomainError> {
    let g = &l.graph;
    let ev = evidence(g, a.tol, a.radius);
    let empirical = if a.runs == 0 {
        Value::Null
    } else {
        match walk::empirical_recurrence(g, a.horizon, a.runs, a.common.seed) {
            Ok(e) => to_value(&e),
            Err(e) => error_value(&DomainError::new(e)),
        }
    };
    if let (Err(s), Err(_)) = (&ev.spectral, &ev.analytic) {
        if a.runs == 0 {
            return Err(DomainError {
                message: s.message.clone(),
                kind: s.kind.clone(),
                partial: None,
            });
        }
    }
    Ok(Outcome {
        json: json!({
            "verdict": ev.verdict,
            "basis": ev.basis,
            "finite_graph": g.is_finite(),
            "radius": ev.radius,
            "test_function": ev.test_function,
            "spectral": ev.spectral.as_ref().map_or_else(error_value, to_value),
            "analytic": ev.analytic.as_ref().map_or_else(error_value, analytic_summary),
            "empirical": empirical,
        }),
        table: None,
    })
}

pub fn growth_tolerances(a: &GrowthArgs) -> Map<String, Value> {
    tolerances(&[("budget", a.budget.into())])
}

pub fn growth(l: &Loaded, a: &GrowthArgs) -> Result<Outcome, DomainError> {
    match count_levels(&l.graph, a.levels, a.budget) {
        Ok(c) => Ok(Outcome {
            json: json!({ "levels": a.levels, "counts": to_value(&c) }),
            table: Some(c.to_tsv()),
        }),
        Err(e @ SpectralError::BudgetExceeded { .. }) => {
            let partial = match &e {
                SpectralError::BudgetExceeded { partial, .. } => to_value(partial),
                _ => unreachable!(),
            };
            let mut d = DomainError::new(e);
            d.partial = Some(partial);
            Err(d)
        }
        Err(e) => Err(DomainError::new(e)),
    }
}

pub fn simulate_tolerances(a: &SimulateArgs) -> Map<String, Value> {
    let mut t = tolerances(&[]);
    if a.entropy {
        let o = EntropyOptions::new(a.runs, a.horizon, a.common.seed);
        t.insert("guard".into(), o.guard.into());
        t.insert("burn_in".into(), o.burn_in.into());
        t.insert("stability_margin".into(), to_value(&o.margin));
    }
    t
}

pub fn simulate(l: &Loaded, a: &SimulateArgs) -> Result<Outcome, DomainError> {
    let g = &l.graph;
    let seed = a.common.seed;
    let ev = walk::empirical_recurrence(g, a.horizon, a.runs, seed).map_err(DomainError::new)?;
    let mut table = String::from("run\tfinal_height\tmax_height\treturns\tfirst_loop\tfinal_label\n");
    let mut per_run = Vec::with_capacity(ev.per_run.len());
    for (r, s) in ev.per_run.iter().enumerate() {
        let label = g.name(&s.final_label);
        let first = s.first_loop.map_or_else(|| "NA".to_string(), |t| t.to_string());
        let _ = writeln!(
            table,
            "{r}\t{}\t{}\t{}\t{first}\t{label}",
            s.final_height, s.max_height, s.returns
        );
        per_run.push(json!({
            "run": r,
            "final_height": s.final_height,
            "max_height": s.max_height,
            "returns": s.returns,
            "first_loop": s.first_loop,
            "final_label": label,
        }));
    }
    let mut out = to_value(&ev);
    insert(&mut out, "per_run", Value::Array(per_run));
    if let Some(path) = &a.trajectory {
        let run = walk::simulate_run(g, a.horizon, seed, 0, &[], Record::FULL).map_err(DomainError::new)?;
        std::fs::write(path, run.trajectory_tsv(g))
            .map_err(|e| DomainError::other("Io", format!("cannot write {}: {e}", path.display())))?;
        insert(&mut out, "trajectory", path.display().to_string().into());
    }
    if a.entropy {
        let mut opts = EntropyOptions::new(a.runs, a.horizon, seed);
        if g.is_finite() {
            if let Ok(sol) = analyze(g, &[], &GfOptions::default()) {
                if let Some(law) = ExitLaw::from_solution(g, &sol) {
                    opts.exit_law = law;
                }
            }
        }
        let est = walk::empirical_entropy_speed(g, &opts).map_err(DomainError::new)?;
        insert(&mut out, "entropy", to_value(&est));
    }
    Ok(Outcome {
        json: out,
        table: Some(table),
    })
}

pub fn couple_tolerances(a: &CoupleArgs) -> Map<String, Value> {
    tolerances(&[
        ("band", BAND.into()),
        ("bias_allowance", (1.0 / a.cap as f64 + 1.0 / a.horizon as f64).into()),
    ])
}

pub fn couple(l: &Loaded, a: &CoupleArgs) -> Result<Outcome, DomainError> {
    let g = &l.graph;
    let rep = couple_check(g, a.runs, a.cap, a.horizon, a.common.seed).map_err(DomainError::new)?;
    let analytic = if g.is_finite() {
        analyze(g, &[], &GfOptions::default()).ok().map(|s| s.q_loop)
    } else {
        None
    };
    let mut out = to_value(&rep);
    insert(&mut out, "q_loop_analytic", analytic.into());
    insert(
        &mut out,
        "analytic_within_band",
        analytic.map(|q| rep.both_cover(q, BAND)).into(),
    );
    Ok(Outcome { json: out, table: None })
}

pub fn analyze_tolerances(a: &AnalyzeArgs) -> Map<String, Value> {
    let d = GfOptions::default();
    tolerances(&[
        ("tol", a.tol.into()),
        ("classify_tol", d.classify_tol.into()),
        ("max_iter", d.max_iter.into()),
        ("q_row_tol", conecover::generating::Q_ROW_TOL.into()),
    ])
}

pub fn analyze_cmd(l: &Loaded, a: &AnalyzeArgs) -> Result<Outcome, DomainError> {
    let opts = GfOptions {
        tol: a.tol,
        radius: a.radius,
        method: a.method.into(),
        ..GfOptions::default()
    };
    let sol = analyze(&l.graph, &[], &opts).map_err(DomainError::new)?;
    let table = format!("{}\n{}\n", GfSolution::tsv_header(), sol.tsv_row(&l.id));
    Ok(Outcome {
        json: to_value(&sol),
        table: Some(table),
    })
}

pub fn rwdcre_tolerances(a: &RwdcreArgs) -> Map<String, Value> {
    tolerances(&[("band", a.band.into())])
}

pub fn rwdcre(l: &Loaded, a: &RwdcreArgs) -> Result<Outcome, DomainError> {
    let Some(Generator::Rwdcre(env)) = l.graph.generator() else {
        return Err(DomainError::other(
            "UnsupportedGraph",
            "rwdcre needs the rwdcre generator".into(),
        ));
    };
    let v = classify_rwdcre(&env.omega, &env.nu, a.horizon, a.runs, a.common.seed, a.band)
        .map_err(DomainError::new)?;
    let mut out = to_value(&v);
    insert(&mut out, "omega", to_value(&env.omega));
    insert(&mut out, "nu", to_value(&env.nu));
    Ok(Outcome { json: out, table: None })
}

/// Optional float as a table cell.
pub fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_f64)
}
