use std::collections::BTreeMap;

use conecover::graph::{ParamValue, SpecDocument, ValidateOptions};
use conecover::{BaseGraph, GeneratorSpec, GraphError};
use sha2::{Digest, Sha256};

use crate::args::Common;
use crate::report::{DomainError, SpecInfo};

/// A validated base graph with its provenance.
pub struct Loaded {
    pub graph: BaseGraph,
    pub warnings: Vec<GraphError>,
    /// Short name used in table rows.
    pub id: String,
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn generator_spec(name: &str, params: &[(String, ParamValue)]) -> GeneratorSpec {
    GeneratorSpec {
        name: name.to_string(),
        params: params.iter().cloned().collect(),
    }
}

/// Provenance of a generator spec; the hash covers its canonical JSON.
pub fn generator_info(spec: &GeneratorSpec) -> SpecInfo {
    let canonical = serde_json::to_string(spec).expect("generator spec serializes");
    SpecInfo {
        path: None,
        generator: Some(spec.name.clone()),
        params: Some(spec.params.clone()),
        sha256: hex_sha256(canonical.as_bytes()),
    }
}

/// Reads and validates the graph named by `--spec` or `--generator`.
///
/// The returned info is available even when validation fails, so error
/// reports still identify their input.
pub fn load(c: &Common) -> (Option<SpecInfo>, Result<Loaded, DomainError>) {
    let opts = ValidateOptions { strict: c.strict };
    if let Some(name) = &c.generator {
        let spec = generator_spec(name, &c.params);
        let info = generator_info(&spec);
        let loaded = spec.build().map_err(DomainError::new).map(|graph| Loaded {
            graph,
            warnings: Vec::new(),
            id: name.clone(),
        });
        return (Some(info), loaded);
    }
    let path = c.spec.as_ref().expect("clap requires --spec or --generator");
    let raw = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            return (
                None,
                Err(DomainError::other("Io", format!("cannot read {}: {e}", path.display()))),
            )
        }
    };
    let mut info = SpecInfo {
        path: Some(path.display().to_string()),
        generator: None,
        params: None,
        sha256: hex_sha256(&raw),
    };
    let text = match String::from_utf8(raw) {
        Ok(t) => t,
        Err(_) => {
            let e = GraphError::Parse("spec is not valid UTF-8".into());
            return (Some(info), Err(DomainError::new(e)));
        }
    };
    if let Ok(SpecDocument::Generator(g)) = SpecDocument::parse(&text) {
        info.generator = Some(g.name.clone());
        info.params = Some(g.params.clone());
    }
    let id = path
        .file_stem()
        .map_or_else(|| "spec".to_string(), |s| s.to_string_lossy().into_owned());
    let loaded = conecover::validate_spec(&text, opts)
        .map_err(DomainError::new)
        .map(|v| Loaded {
            graph: v.graph,
            warnings: v.warnings,
            id,
        });
    (Some(info), loaded)
}

/// Base parameters overridden by grid values.
pub fn with_overrides(base: &[(String, ParamValue)], overrides: &[(String, f64)]) -> Vec<(String, ParamValue)> {
    let mut m: BTreeMap<String, ParamValue> = base.iter().cloned().collect();
    for (k, v) in overrides {
        m.insert(k.clone(), ParamValue::Number(*v));
    }
    m.into_iter().collect()
}
