//! JSON model files, weight files, tail files and DOT output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{minimal_elliptic_subcurve, ZKind};
use crate::degeneration::Frame;
use crate::enumeration::{SpecializationEdge, Stratum};
use crate::error::ModelError;
use crate::model::{Component, ComponentId, CurveModel, EllipticPoint, Marking, NodeEdge, Rational, WeightVector};
use crate::tails::{AttachMark, SemistableTail, TailError};

/// Syntax error with its position in the input, when known.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{}{message}", position.map(|(l, c)| format!("line {l}, column {c}: ")).unwrap_or_default())]
pub struct ParseError {
    pub message: String,
    pub position: Option<(usize, usize)>,
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        let position = (e.line() > 0).then(|| (e.line(), e.column()));
        let message = e.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) if position.is_some() => message[..i].to_string(),
            _ => message,
        };
        ParseError { message, position }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tail(#[from] TailError),
}

fn parse_rational<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    let s = String::deserialize(d)?;
    s.trim().parse::<Rational>().map_err(|_| serde::de::Error::custom(format!("invalid rational {s:?}")))
}

fn write_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn one() -> Rational {
    Rational::from_integer(1)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    id: u32,
    genus: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EllipticDoc {
    branches: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkingDoc {
    index: u32,
    component: u32,
    slot: u32,
    #[serde(deserialize_with = "parse_rational", serialize_with = "write_rational", default = "one")]
    weight: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    components: Vec<ComponentDoc>,
    nodes: Vec<[u32; 2]>,
    #[serde(default)]
    elliptic: Option<EllipticDoc>,
    #[serde(default)]
    markings: Vec<MarkingDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttachDoc {
    component: u32,
    slot: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TailDoc {
    components: Vec<ComponentDoc>,
    nodes: Vec<[u32; 2]>,
    #[serde(default)]
    elliptic: Option<EllipticDoc>,
    #[serde(default)]
    markings: Vec<MarkingDoc>,
    attach: Vec<AttachDoc>,
}

fn build(doc: ModelDoc) -> Result<CurveModel, IoError> {
    let mut seen = BTreeSet::new();
    for mk in &doc.markings {
        if !seen.insert(mk.index) {
            return Err(ParseError { message: format!("duplicate marking index {}", mk.index), position: None }.into());
        }
    }
    let model = CurveModel::new(
        doc.components.iter().map(|c| Component { id: ComponentId(c.id), genus: c.genus }).collect(),
        doc.nodes.iter().map(|&[a, b]| NodeEdge(ComponentId(a), ComponentId(b))).collect(),
        doc.elliptic.map(|e| EllipticPoint { branches: e.branches.into_iter().map(ComponentId).collect() }),
        doc.markings
            .iter()
            .map(|m| Marking { index: m.index, component: ComponentId(m.component), slot: m.slot, weight: m.weight })
            .collect(),
    )?;
    Ok(model)
}

/// Parses the JSON model format.
pub fn parse_model(text: &str) -> Result<CurveModel, IoError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(ParseError::from)?;
    build(doc)
}

fn to_doc(model: &CurveModel) -> ModelDoc {
    ModelDoc {
        components: model.components().iter().map(|c| ComponentDoc { id: c.id.0, genus: c.genus }).collect(),
        nodes: model.nodes().iter().map(|e| [e.0 .0, e.1 .0]).collect(),
        elliptic: model.elliptic().map(|p| EllipticDoc { branches: p.branches.iter().map(|b| b.0).collect() }),
        markings: model
            .markings()
            .iter()
            .map(|m| MarkingDoc { index: m.index, component: m.component.0, slot: m.slot, weight: m.weight })
            .collect(),
    }
}

/// Pretty JSON in the model format; `parse_model(&serialize_model(x)) == x`.
pub fn serialize_model(model: &CurveModel) -> String {
    serde_json::to_string_pretty(&to_doc(model)).expect("model documents serialise")
}

pub fn model_to_json(model: &CurveModel) -> serde_json::Value {
    serde_json::to_value(to_doc(model)).expect("model documents serialise")
}

/// Parses a weight file: a JSON array of rational strings.
pub fn parse_weights(text: &str) -> Result<WeightVector, IoError> {
    #[derive(Deserialize)]
    #[serde(transparent)]
    struct W(#[serde(deserialize_with = "parse_rational")] Rational);
    let raw: Vec<W> = serde_json::from_str(text).map_err(ParseError::from)?;
    Ok(WeightVector::new(raw.into_iter().map(|w| w.0).collect())?)
}

/// Parses a tail file: the model format plus `attach: [{component, slot}]`.
pub fn parse_tail(text: &str) -> Result<SemistableTail, IoError> {
    let doc: TailDoc = serde_json::from_str(text).map_err(ParseError::from)?;
    let attach = doc.attach.iter().map(|a| AttachMark { component: ComponentId(a.component), slot: a.slot }).collect();
    let model = build(ModelDoc { components: doc.components, nodes: doc.nodes, elliptic: doc.elliptic, markings: doc.markings })?;
    Ok(SemistableTail::new(model, attach)?)
}

pub fn serialize_tail(tail: &SemistableTail) -> String {
    let mut v = model_to_json(tail.curve());
    v["attach"] = serde_json::to_value(
        tail.attach().iter().map(|a| AttachDoc { component: a.component.0, slot: a.slot }).collect::<Vec<_>>(),
    )
    .unwrap();
    serde_json::to_string_pretty(&v).unwrap()
}

/// Compact type signature, e.g. `ring2 | 0[1] 1[2] | 0-1 0-1`.
pub fn signature(model: &CurveModel) -> String {
    let model = model.canonical_model();
    let kind = match minimal_elliptic_subcurve(&model).map(|d| d.z_kind) {
        Ok(ZKind::SmoothElliptic) => "smooth".to_string(),
        Ok(ZKind::IrreducibleNodal) => "nodal".to_string(),
        Ok(ZKind::Ring { length }) => format!("ring{length}"),
        Ok(ZKind::EllipticStar { branches }) => format!("ell{branches}"),
        Err(_) => "invalid".to_string(),
    };
    let topo = model.topo();
    let comps: Vec<String> = model
        .components()
        .iter()
        .enumerate()
        .map(|(v, c)| {
            let mut s = c.id.0.to_string();
            if c.genus == 1 {
                s.push('g');
            }
            if topo.branch[v] {
                s.push('*');
            }
            s.push('[');
            s.push_str(&marked_points(&model, c.id).join(","));
            s.push(']');
            s
        })
        .collect();
    let nodes: Vec<String> = model.nodes().iter().map(|e| format!("{}-{}", e.0 .0, e.1 .0)).collect();
    format!("{kind} | {} | {}", comps.join(" "), nodes.join(" "))
}

/// Marked points on a component, coincident markings joined by `=`.
fn marked_points(model: &CurveModel, c: ComponentId) -> Vec<String> {
    let mut by_slot: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for mk in model.markings().iter().filter(|m| m.component == c) {
        by_slot.entry(mk.slot).or_default().push(mk.index);
    }
    let mut groups: Vec<Vec<u32>> = by_slot
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    groups.sort();
    groups.iter().map(|g| g.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("=")).collect()
}

fn dot_body(out: &mut String, model: &CurveModel, prefix: &str) {
    for c in model.components() {
        let marks = marked_points(model, c.id);
        let label = if marks.is_empty() { c.id.to_string() } else { format!("{}\\n{}", c.id, marks.join(" ")) };
        let style = if c.genus == 1 { ", style=filled, fillcolor=gray70" } else { "" };
        let _ = writeln!(out, "  {prefix}{} [label=\"{label}\", shape=circle{style}];", c.id);
    }
    for e in model.nodes() {
        let _ = writeln!(out, "  {prefix}{} -- {prefix}{};", e.0, e.1);
    }
    if let Some(p) = model.elliptic() {
        let _ = writeln!(
            out,
            "  {prefix}ell [label=\"{}\", shape=diamond, style=filled, fillcolor=black, fontcolor=white, width=0.3, height=0.3];",
            p.len()
        );
        for b in &p.branches {
            let _ = writeln!(out, "  {prefix}ell -- {prefix}{b} [style=bold];");
        }
    }
}

/// Undirected DOT graph of a model: genus-one components filled, the elliptic point as a
/// junction node joined to its branch components.
pub fn emit_dot_model(model: &CurveModel, name: &str) -> String {
    let mut out = format!("graph {name} {{\n  node [fontname=\"Helvetica\"];\n");
    dot_body(&mut out, model, "");
    out.push_str("}\n");
    out
}

/// One graph per frame, in order.
pub fn emit_dot_frames(frames: &[Frame]) -> String {
    let mut out = String::new();
    for (i, f) in frames.iter().enumerate() {
        let _ = writeln!(out, "graph frame{i} {{\n  label=\"{}\";\n  node [fontname=\"Helvetica\"];", f.label);
        dot_body(&mut out, &f.fiber, "");
        out.push_str("}\n");
    }
    out
}

/// Directed acyclic graph of strata ranked by dimension.
pub fn emit_dot_poset(strata: &[Stratum], edges: &[SpecializationEdge], title: &str) -> String {
    let mut out = format!(
        "digraph poset {{\n  label=\"{title} (witness-certified)\";\n  labelloc=t;\n  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n"
    );
    let index: BTreeMap<&crate::canonical::CanonicalForm, usize> = strata.iter().enumerate().map(|(i, s)| (&s.form, i)).collect();
    let mut ranks: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        ranks.entry(-s.dimension).or_default().push(i);
        let _ = writeln!(out, "  s{i} [label=\"dim {}\\n{}\"];", s.dimension, signature(&s.representative));
    }
    for members in ranks.values() {
        let ids: Vec<String> = members.iter().map(|i| format!("s{i}")).collect();
        let _ = writeln!(out, "  {{ rank=same; {}; }}", ids.join("; "));
    }
    let mut pairs: Vec<(usize, usize)> = edges.iter().map(|e| (index[&e.from.form], index[&e.to.form])).collect();
    pairs.sort_unstable();
    for (a, b) in pairs {
        let _ = writeln!(out, "  s{a} -> s{b};");
    }
    out.push_str("}\n");
    out
}
