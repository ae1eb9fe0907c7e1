//! JSON demography files.
//!
//! ```json
//! {
//!   "theta": 2.0,
//!   "tree": {
//!     "name": "anc", "duration": "inf",
//!     "size_history": [{"kind": "constant", "duration": "inf", "size": 1.0}],
//!     "children": [
//!       {"name": "a", "duration": 1.0, "sample_size": 4,
//!        "size_history": [{"kind": "exponential", "duration": 1.0, "size": 2.0, "growth_rate": 0.5}]},
//!       {"name": "b", "duration": 1.0, "sample_size": 3,
//!        "size_history": [{"kind": "constant", "duration": 1.0, "size": 1.0}]}
//!     ]
//!   }
//! }
//! ```
//!
//! Times are in coalescent units and sizes are inverse coalescence rates.
//! Segments are listed from the recent end; an exponential segment has size
//! `size · e^{-growth_rate · u}` at time `u` before its recent end.
//! Durations are per population; the root's is `"inf"`. A population may
//! have duration `0` with an empty `size_history`.

use jsfs_core::{DemographyTree, NodeSpec, Segment, SegmentKind, SizeHistory};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const DEFAULT_THETA: f64 = 2.0;

/// Keys describing non-tree demographies.
const RESERVED_KEYS: &[&str] = &[
    "migration",
    "migrations",
    "migration_rate",
    "pulse",
    "pulses",
    "admixture",
    "admixtures",
    "edges",
    "parents",
];

/// Relative tolerance between a population's duration and the sum of its
/// segment durations.
const DURATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub theta: f64,
    pub tree: DemographyTree,
}

pub fn parse_config(text: &str) -> Result<Config> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::validation("config", format!("invalid JSON: {e}")))?;
    let obj = object(&value, "config")?;
    check_keys(obj, "config", &["theta", "tree"])?;
    let theta = match obj.get("theta") {
        None | Some(Value::Null) => DEFAULT_THETA,
        Some(v) => {
            let t = number(v, "theta")?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::validation("theta", "must be a positive finite number"));
            }
            t
        }
    };
    let tree = obj
        .get("tree")
        .ok_or_else(|| Error::validation("tree", "missing"))?;
    let tree = DemographyTree::new(node(tree, "tree")?)?;
    Ok(Config { theta, tree })
}

pub fn read_config(path: &std::path::Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::validation(path, "expected an object"))
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    for key in obj.keys() {
        if RESERVED_KEYS.contains(&key.as_str()) {
            return Err(Error::validation(
                format!("{path}.{key}"),
                "not supported: only tree-shaped demographies without migration or admixture can be evaluated",
            ));
        }
        if !allowed.contains(&key.as_str()) {
            return Err(Error::validation(format!("{path}.{key}"), "unknown key"));
        }
    }
    Ok(())
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::validation(path, "expected a number"))
}

/// A nonnegative duration or `"inf"`.
fn duration(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::Number(_) => {
            let d = number(v, path)?;
            if d >= 0.0 && d.is_finite() {
                Ok(d)
            } else {
                Err(Error::validation(path, "duration must be nonnegative"))
            }
        }
        _ => Err(Error::validation(path, "expected a number or \"inf\"")),
    }
}

fn node(v: &Value, path: &str) -> Result<NodeSpec> {
    let obj = object(v, path)?;
    check_keys(
        obj,
        path,
        &["name", "duration", "size_history", "children", "sample_size"],
    )?;
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::validation(format!("{path}.name"), "expected a string"))?
        .to_owned();
    let dpath = format!("{path}.duration");
    let declared = duration(
        obj.get("duration")
            .ok_or_else(|| Error::validation(&dpath, "missing"))?,
        &dpath,
    )?;
    let hpath = format!("{path}.size_history");
    let segments = obj
        .get("size_history")
        .ok_or_else(|| Error::validation(&hpath, "missing"))?
        .as_array()
        .ok_or_else(|| Error::validation(&hpath, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, s)| segment(s, &format!("{hpath}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let history = SizeHistory::new(segments)
        .map_err(|e| Error::validation(&hpath, e.to_string()))?;
    let total = history.total_duration();
    let consistent = if declared.is_infinite() || total.is_infinite() {
        declared == total
    } else {
        (declared - total).abs() <= DURATION_TOLERANCE * declared.max(total)
    };
    if !consistent {
        return Err(Error::validation(
            dpath,
            format!("duration {declared} does not match the size history total {total}"),
        ));
    }
    match (obj.get("children"), obj.get("sample_size")) {
        (Some(_), Some(_)) => Err(Error::validation(
            path,
            "a population has either children or a sample_size, not both",
        )),
        (None, None) => Err(Error::validation(path, "missing children or sample_size")),
        (None, Some(n)) => {
            let n = n.as_u64().ok_or_else(|| {
                Error::validation(format!("{path}.sample_size"), "expected a nonnegative integer")
            })?;
            Ok(NodeSpec::leaf(name, history, n as usize))
        }
        (Some(children), None) => {
            let cpath = format!("{path}.children");
            let children = children
                .as_array()
                .ok_or_else(|| Error::validation(&cpath, "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, c)| node(c, &format!("{cpath}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Ok(NodeSpec::split(name, history, children))
        }
    }
}

fn segment(v: &Value, path: &str) -> Result<Segment> {
    let obj = object(v, path)?;
    check_keys(obj, path, &["kind", "duration", "size", "growth_rate"])?;
    let field = |key: &str| {
        obj.get(key)
            .ok_or_else(|| Error::validation(format!("{path}.{key}"), "missing"))
    };
    let kind = field("kind")?
        .as_str()
        .ok_or_else(|| Error::validation(format!("{path}.kind"), "expected a string"))?;
    let d = duration(field("duration")?, &format!("{path}.duration"))?;
    let size = number(field("size")?, &format!("{path}.size"))?;
    let seg = match kind {
        "constant" => {
            if obj.contains_key("growth_rate") {
                return Err(Error::validation(
                    format!("{path}.growth_rate"),
                    "only exponential segments have a growth rate",
                ));
            }
            Segment::constant_size(d, size)
        }
        "exponential" => {
            let g = number(field("growth_rate")?, &format!("{path}.growth_rate"))?;
            Segment::exponential_size(d, size, g)
        }
        other => {
            return Err(Error::validation(
                format!("{path}.kind"),
                format!("unknown segment kind {other:?}"),
            ))
        }
    };
    seg.map_err(|e| Error::validation(path, e.to_string()))
}

fn duration_value(d: f64) -> Value {
    if d.is_infinite() {
        json!("inf")
    } else {
        json!(d)
    }
}

fn node_value(spec: &NodeSpec) -> Value {
    let segments: Vec<Value> = spec
        .history
        .segments()
        .iter()
        .map(|s| match s.kind() {
            SegmentKind::Constant => json!({
                "kind": "constant",
                "duration": duration_value(s.duration()),
                "size": s.size(),
            }),
            SegmentKind::Exponential => json!({
                "kind": "exponential",
                "duration": duration_value(s.duration()),
                "size": s.size(),
                "growth_rate": s.growth_rate(),
            }),
        })
        .collect();
    let mut obj = Map::new();
    obj.insert("name".into(), json!(spec.name));
    obj.insert(
        "duration".into(),
        duration_value(spec.history.total_duration()),
    );
    obj.insert("size_history".into(), Value::Array(segments));
    match &spec.kind {
        jsfs_core::demography::NodeKind::Leaf { sample_size } => {
            obj.insert("sample_size".into(), json!(sample_size));
        }
        jsfs_core::demography::NodeKind::Split { children } => {
            obj.insert(
                "children".into(),
                Value::Array(children.iter().map(node_value).collect()),
            );
        }
    }
    Value::Object(obj)
}

/// The configuration as a JSON document. Multifurcations appear in their
/// binary form.
pub fn to_json(config: &Config) -> Value {
    json!({
        "theta": config.theta,
        "tree": node_value(&config.tree.to_spec()),
    })
}

pub fn serialize_config(config: &Config) -> String {
    serde_json::to_string_pretty(&to_json(config)).expect("JSON values always serialize")
}
