//! The JSON interchange format for braces and pre-Lie rings.
//!
//! Integers above 2⁵³ are written as decimal strings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BilinearRule, DirectSumRule, RadicalRule, TrivialRule};
use crate::brace::{Backing, Brace, BraceKind, Metadata, RuleDesc};
use crate::error::{Error, Result};
use crate::pgroup::{GElement, GroupShape};
use crate::prelie::{BilinearDot, DotBacking, PreLie, ScalarDot, ZeroDot};

pub const FORMAT_VERSION: u64 = 1;

const SAFE: u128 = 1 << 53;

pub(crate) fn int_json(v: u128) -> Value {
    if v > SAFE {
        Value::String(v.to_string())
    } else {
        json!(v as u64)
    }
}

fn int_from(v: &Value, what: &str) -> Result<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::Spec(format!("`{what}` must be a nonnegative integer")))
}

#[derive(Clone, Debug)]
pub enum Structure {
    Brace(Brace),
    PreLie(PreLie),
}

#[derive(Serialize, Deserialize)]
struct ShapeDoc {
    p: Value,
    exponents: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct MetaDoc {
    provenance: String,
    verified_properties: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Doc {
    format_version: u64,
    kind: String,
    shape: ShapeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    brace_kind: Option<String>,
    backing: Value,
    metadata: MetaDoc,
}

fn shape_doc(s: &GroupShape) -> ShapeDoc {
    ShapeDoc { p: int_json(s.p() as u128), exponents: s.exponents().to_vec() }
}

fn meta_doc(m: &Metadata) -> MetaDoc {
    MetaDoc { provenance: m.provenance.clone(), verified_properties: m.verified.clone() }
}

fn table_json(t: &[u32]) -> Value {
    Value::Array(t.iter().map(|&v| json!(v)).collect())
}

fn rule_json(d: RuleDesc) -> Value {
    json!({ "kind": "rule", "rule": d.rule, "params": d.params })
}

fn no_descriptor(label: String) -> Error {
    Error::Spec(format!("rule `{label}` has no serializable form and its order exceeds the table cap"))
}

pub(crate) fn brace_value(b: &Brace) -> Result<Value> {
    let backing = match b.backing() {
        Backing::Table(t) => json!({ "kind": "table", "circ_table": table_json(t) }),
        Backing::Rule(r) => match r.descriptor() {
            Some(d) => rule_json(d),
            None => match b.materialize() {
                Ok(m) => json!({ "kind": "table", "circ_table": table_json(m.table().unwrap()) }),
                Err(_) => return Err(no_descriptor(r.label())),
            },
        },
    };
    let doc = Doc {
        format_version: FORMAT_VERSION,
        kind: "brace".into(),
        shape: shape_doc(b.shape()),
        brace_kind: Some(b.kind().as_str().into()),
        backing,
        metadata: meta_doc(b.meta()),
    };
    Ok(serde_json::to_value(doc).expect("serializable"))
}

fn prelie_value(pl: &PreLie) -> Result<Value> {
    let backing = match pl.backing() {
        DotBacking::Table(t) => json!({ "kind": "table", "dot_table": table_json(t) }),
        DotBacking::Rule(r) => match r.descriptor() {
            Some(d) => rule_json(d),
            None => match pl.materialize() {
                Ok(m) => json!({ "kind": "table", "dot_table": table_json(m.table().unwrap()) }),
                Err(_) => return Err(no_descriptor(r.label())),
            },
        },
    };
    let doc = Doc {
        format_version: FORMAT_VERSION,
        kind: "prelie".into(),
        shape: shape_doc(pl.shape()),
        brace_kind: None,
        backing,
        metadata: meta_doc(pl.meta()),
    };
    Ok(serde_json::to_value(doc).expect("serializable"))
}

pub fn to_json_string(s: &Structure) -> Result<String> {
    let v = match s {
        Structure::Brace(b) => brace_value(b)?,
        Structure::PreLie(p) => prelie_value(p)?,
    };
    Ok(serde_json::to_string_pretty(&v).expect("serializable") + "\n")
}

pub fn save(s: &Structure, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(s)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Structure> {
    from_json_str(&std::fs::read_to_string(path)?)
}

pub fn from_json_str(text: &str) -> Result<Structure> {
    let doc: Doc = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
    from_doc(doc)
}

fn from_doc(doc: Doc) -> Result<Structure> {
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Version { found: doc.format_version, expected: FORMAT_VERSION });
    }
    let shape = GroupShape::new(int_from(&doc.shape.p, "p")?, &doc.shape.exponents)?;
    let meta = Metadata { provenance: doc.metadata.provenance, verified: doc.metadata.verified_properties };
    let backing_kind = doc.backing.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
    match doc.kind.as_str() {
        "brace" => {
            let kind = BraceKind::parse(doc.brace_kind.as_deref().unwrap_or("unverified"))?;
            let b = match backing_kind.as_str() {
                "table" => Brace::from_table(shape, table_from(&doc.backing, "circ_table")?, kind)?,
                "rule" => brace_rule(shape, &doc.backing, kind)?,
                other => return Err(Error::Spec(format!("unknown backing kind `{other}`"))),
            };
            Ok(Structure::Brace(b.with_meta(meta)))
        }
        "prelie" => {
            let pl = match backing_kind.as_str() {
                "table" => PreLie::from_table(shape, table_from(&doc.backing, "dot_table")?)?,
                "rule" => prelie_rule(shape, &doc.backing)?,
                other => return Err(Error::Spec(format!("unknown backing kind `{other}`"))),
            };
            Ok(Structure::PreLie(pl.with_meta(meta)))
        }
        other => Err(Error::Spec(format!("unknown structure kind `{other}`"))),
    }
}

fn table_from(backing: &Value, key: &str) -> Result<Vec<u32>> {
    let arr = backing.get(key).and_then(Value::as_array).ok_or_else(|| Error::Spec(format!("missing `{key}`")))?;
    arr.iter().map(|v| int_from(v, key).map(|x| x as u32)).collect()
}

fn rule_name(backing: &Value) -> Result<(&str, Value)> {
    let name = backing.get("rule").and_then(Value::as_str).ok_or_else(|| Error::Spec("missing `rule`".into()))?;
    Ok((name, backing.get("params").cloned().unwrap_or(json!({}))))
}

fn consts_from_json(shape: &GroupShape, params: &Value) -> Result<Vec<Vec<GElement>>> {
    let r = shape.rank();
    let mut c = vec![vec![shape.zero(); r]; r];
    let entries = params.get("constants").and_then(Value::as_array).ok_or_else(|| Error::Spec("missing `constants`".into()))?;
    for e in entries {
        let bad = || Error::Spec(format!("bad structure constant entry {e}"));
        let e = e.as_array().filter(|a| a.len() == 3).ok_or_else(bad)?;
        let (i, j) = (int_from(&e[0], "i")? as usize, int_from(&e[1], "j")? as usize);
        let coeffs: Vec<u64> = e[2].as_array().ok_or_else(bad)?.iter().map(|v| int_from(v, "coefficient")).collect::<Result<_>>()?;
        if i >= r || j >= r || coeffs.len() != r {
            return Err(bad());
        }
        let g = GElement::from_slice(&coeffs);
        shape.check(&g)?;
        c[i][j] = g;
    }
    Ok(c)
}

fn brace_rule(shape: GroupShape, backing: &Value, kind: BraceKind) -> Result<Brace> {
    let (name, params) = rule_name(backing)?;
    Ok(match name {
        "trivial" => Brace::from_rule(shape, TrivialRule, kind),
        "radical" => {
            if shape.rank() != 1 {
                return Err(Error::Structural("radical rule needs a cyclic shape".into()));
            }
            let lambda = int_from(params.get("lambda").unwrap_or(&Value::Null), "lambda")?;
            Brace::from_rule(shape, RadicalRule { lambda }, kind)
        }
        "bilinear" => {
            let consts = consts_from_json(&shape, &params)?;
            BilinearDot::new(&shape, consts.clone())?;
            Brace::from_rule(shape, BilinearRule { consts }, kind)
        }
        "direct_sum" => {
            let parts = params.get("parts").and_then(Value::as_array).filter(|a| a.len() == 2);
            let parts = parts.ok_or_else(|| Error::Spec("direct_sum needs two parts".into()))?;
            let mut bs = Vec::new();
            for v in parts {
                let doc: Doc = serde_json::from_value(v.clone()).map_err(|e| Error::Spec(format!("direct_sum part: {e}")))?;
                match from_doc(doc)? {
                    Structure::Brace(b) => bs.push(b),
                    Structure::PreLie(_) => return Err(Error::Spec("direct_sum part is not a brace".into())),
                }
            }
            let b1 = bs.pop().unwrap();
            let b0 = bs.pop().unwrap();
            let mut exps = b0.shape().exponents().to_vec();
            exps.extend_from_slice(b1.shape().exponents());
            if b0.shape().p() != shape.p() || b1.shape().p() != shape.p() || exps != shape.exponents() {
                return Err(Error::Structural("direct_sum parts do not match the shape".into()));
            }
            Brace::from_rule(shape, DirectSumRule { parts: [b0, b1] }, kind)
        }
        other => return Err(Error::Registry(other.to_string())),
    })
}

fn prelie_rule(shape: GroupShape, backing: &Value) -> Result<PreLie> {
    let (name, params) = rule_name(backing)?;
    Ok(match name {
        "zero" => PreLie::from_rule(shape, ZeroDot),
        "scalar" => {
            if shape.rank() != 1 {
                return Err(Error::Structural("scalar rule needs a cyclic shape".into()));
            }
            let mu = int_from(params.get("mu").unwrap_or(&Value::Null), "mu")?;
            PreLie::from_rule(shape, ScalarDot { mu })
        }
        "bilinear" => {
            let consts = consts_from_json(&shape, &params)?;
            let rule = BilinearDot::new(&shape, consts)?;
            PreLie::from_rule(shape, rule)
        }
        other => return Err(Error::Registry(other.to_string())),
    })
}
