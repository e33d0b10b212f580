use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use conecover::graph::ParamValue;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};

use crate::args::Format;

/// Where the base graph came from.
#[derive(Clone, Debug, Serialize)]
pub struct SpecInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, ParamValue>>,
    pub sha256: String,
}

/// Fields embedded in every report.
#[derive(Clone, Debug)]
pub struct Meta {
    pub command: &'static str,
    pub spec: Option<SpecInfo>,
    pub seed: u64,
    pub tolerances: Map<String, Value>,
}

/// Successful result of a subcommand.
pub struct Outcome {
    /// JSON object merged into the report.
    pub json: Value,
    /// Command-specific table; a key/value listing of `json` otherwise.
    pub table: Option<String>,
}

/// Error raised by one of the library modules.
#[derive(Debug)]
pub struct DomainError {
    /// The module error, verbatim.
    pub message: String,
    /// Innermost error variant, e.g. `RowNotStochastic`.
    pub kind: String,
    /// Partial results computed before the failure.
    pub partial: Option<Value>,
}

impl DomainError {
    pub fn new<E: std::error::Error + std::fmt::Debug>(e: E) -> Self {
        DomainError {
            message: e.to_string(),
            kind: variant_name(&format!("{e:?}")),
            partial: None,
        }
    }

    pub fn other(kind: &str, message: String) -> Self {
        DomainError {
            message,
            kind: kind.to_string(),
            partial: None,
        }
    }
}

/// Innermost enum variant of a `Debug` rendering: `Graph(Parse("x"))` gives
/// `Parse`.
fn variant_name(debug: &str) -> String {
    let mut rest = debug;
    loop {
        let end = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        let name = &rest[..end];
        let tail = &rest[end..];
        match tail.strip_prefix('(') {
            Some(inner) if inner.starts_with(|c: char| c.is_ascii_uppercase()) => rest = inner,
            _ => return name.to_string(),
        }
    }
}

/// Doubles with 17 significant digits, which round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NA".into()
    }
}

/// Pretty printer that writes every double with 17 significant digits.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format!("{v:.16e}").as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    v.serialize(&mut ser).expect("serializing a JSON value cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

impl Meta {
    fn json_fields(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("tool".into(), "conecover".into());
        m.insert("version".into(), conecover::VERSION.into());
        m.insert("command".into(), self.command.into());
        m.insert(
            "spec".into(),
            self.spec
                .as_ref()
                .map_or(Value::Null, |s| serde_json::to_value(s).expect("spec info serializes")),
        );
        m.insert("seed".into(), self.seed.into());
        m.insert("tolerances".into(), Value::Object(self.tolerances.clone()));
        m
    }

    fn tsv_comments(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool=conecover version={} command={}", conecover::VERSION, self.command);
        if let Some(s) = &self.spec {
            let source = match (&s.path, &s.generator) {
                (Some(p), _) => format!("path={p}"),
                (None, Some(g)) => format!("generator={g}"),
                _ => String::new(),
            };
            let _ = writeln!(out, "# spec {source} sha256={}", s.sha256);
        }
        let _ = write!(out, "# seed={}", self.seed);
        for (k, v) in &self.tolerances {
            let _ = write!(out, " {k}={}", scalar(v));
        }
        out.push('\n');
        out
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "NA".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => fmt_f64(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.replace(['\t', '\n'], " "),
        other => other.to_string(),
    }
}

/// `path\tvalue` lines for every leaf of a JSON value.
fn flatten(prefix: &str, v: &Value, out: &mut String) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&key(k), x, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&key(&i.to_string()), x, out)),
        leaf => {
            let _ = writeln!(out, "{prefix}\t{}", scalar(leaf));
        }
    }
}

pub fn render(meta: &Meta, result: &Result<Outcome, DomainError>, format: Format) -> String {
    match (format, result) {
        (Format::Json, Ok(o)) => {
            let mut m = match &o.json {
                Value::Object(m) => m.clone(),
                other => Map::from_iter([("result".to_string(), other.clone())]),
            };
            m.extend(meta.json_fields());
            to_json_string(&Value::Object(m))
        }
        (Format::Json, Err(e)) => {
            let mut m = meta.json_fields();
            m.insert("error".into(), e.message.clone().into());
            m.insert("error_kind".into(), e.kind.clone().into());
            if let Some(p) = &e.partial {
                m.insert("partial".into(), p.clone());
            }
            to_json_string(&Value::Object(m))
        }
        (Format::Tsv, Ok(o)) => {
            let mut out = meta.tsv_comments();
            match &o.table {
                Some(t) => out.push_str(t),
                None => {
                    out.push_str("key\tvalue\n");
                    flatten("", &o.json, &mut out);
                }
            }
            out
        }
        (Format::Tsv, Err(e)) => {
            let mut out = meta.tsv_comments();
            out.push_str("error_kind\terror\n");
            let _ = writeln!(out, "{}\t{}", e.kind, e.message.replace(['\t', '\n'], " "));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_of_nested_errors() {
        assert_eq!(variant_name("Graph(RowNotStochastic { vertex: \"a\", sum: 1.1 })"), "RowNotStochastic");
        assert_eq!(variant_name("Graph(Parse(\"bad\"))"), "Parse");
        assert_eq!(variant_name("InvalidArgument(\"x\")"), "InvalidArgument");
        assert_eq!(variant_name("SingularSystem"), "SingularSystem");
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 0.060_498_639_2, 1e-300, 2.0f64.sqrt() * 1e200] {
            let v = serde_json::json!({ "x": x });
            let s = to_json_string(&v);
            let back: Value = serde_json::from_str(&s).unwrap();
            assert_eq!(back["x"].as_f64().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        let s = to_json_string(&serde_json::json!({ "n": 3, "nan": f64::NAN }));
        assert!(s.contains("\"n\": 3") && s.contains("\"nan\": null"), "{s}");
    }

    #[test]
    fn flattened_listing() {
        let mut out = String::new();
        flatten("", &serde_json::json!({"a": {"b": [1, true]}, "c": "x\ty"}), &mut out);
        assert_eq!(out, "a.b.0\t1\na.b.1\ttrue\nc\tx y\n");
    }
}
