//! One-parameter degenerations: blow-ups of marked points on `Z`, contraction of `Z` to an
//! elliptic point, stabilisation, the m-stable limit loop and weighted reduction.

use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{decompose_with, level_with, Decomposition, ZKind};
use crate::error::ModelError;
use crate::model::{Component, ComponentId, CurveModel, EllipticPoint, Marking, NodeEdge, SlotId, WeightVector};
use crate::stability::{is_mA_stable, is_m_stable, StabilityError};

/// A single move applied to a fibre.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum Move {
    BlowUp { indices: Vec<u32>, on: ComponentId, exceptional: ComponentId },
    ContractElliptic { subcurve: Vec<ComponentId>, branches: Vec<ComponentId> },
    /// Unmarked component with two node branches replaced by a node.
    ContractLink { component: ComponentId, ends: (ComponentId, ComponentId) },
    /// Leaf carrying one marked point collapsed onto its neighbour.
    ContractLeaf { component: ComponentId, onto: ComponentId, indices: Vec<u32> },
    /// Weighted contraction of a rational leaf; its markings become coincident.
    ContractWeighted { component: ComponentId, onto: ComponentId, indices: Vec<u32> },
    InsertChain { ends: (ComponentId, ComponentId), chain: Vec<ComponentId> },
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::BlowUp { indices, on, exceptional } => write!(f, "blow up {indices:?} on {on} -> {exceptional}"),
            Move::ContractElliptic { subcurve, branches } => {
                write!(f, "contract {subcurve:?} to elliptic {}-fold point", branches.len())
            }
            Move::ContractLink { component, .. } => write!(f, "contract link {component}"),
            Move::ContractLeaf { component, onto, .. } => write!(f, "contract leaf {component} onto {onto}"),
            Move::ContractWeighted { component, onto, .. } => write!(f, "contract {component} onto {onto}"),
            Move::InsertChain { chain, .. } => write!(f, "insert chain of {}", chain.len()),
        }
    }
}

#[derive(Debug)]
struct HistoryNode {
    mv: Move,
    prev: History,
}

/// Persistent append-only move log; clones share their common prefix.
#[derive(Clone, Debug, Default)]
pub struct History(Option<Arc<HistoryNode>>);

impl History {
    fn push(&self, mv: Move) -> History {
        History(Some(Arc::new(HistoryNode { mv, prev: self.clone() })))
    }

    /// Moves in application order.
    pub fn moves(&self) -> Vec<Move> {
        let mut out = Vec::new();
        let mut cur = &self.0;
        while let Some(node) = cur {
            out.push(node.mv.clone());
            cur = &node.prev.0;
        }
        out.reverse();
        out
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        let mut cur = &self.0;
        while let Some(node) = cur {
            n += 1;
            cur = &node.prev.0;
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }
}

/// Why a contraction was refused.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "defect", rename_all = "snake_case")]
pub enum ContractDefect {
    UnknownComponent { component: ComponentId },
    NotConnected,
    GenusNotOne { genus: i64 },
    NotMinimalEllipticSubcurve,
    CarriesMarkings { indices: Vec<u32> },
    EllipticPointOnBoundary,
    IrregularAttachment { node: usize },
    NoAttachingNodes,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegenerationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("input is not semistable: {0}")]
    NotSemistable(String),
    #[error("no marking with index {0}")]
    UnknownMarking(u32),
    #[error("marking {index} lies on {component}, outside Z")]
    MarkingNotOnZ { index: u32, component: ComponentId },
    #[error("cannot contract: {0:?}")]
    Contract(Vec<ContractDefect>),
    #[error("no node with index {0}")]
    UnknownNode(usize),
    #[error("chain length must be positive")]
    EmptyChain,
    #[error("fibre is not m-stable: {0}")]
    NotStable(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Special fibre of a one-parameter family, with per-node regularity of the total space.
#[derive(Clone, Debug)]
pub struct DegenerationModel {
    fiber: CurveModel,
    regular: Vec<bool>,
    history: History,
}

/// Snapshot of the fibre after a move.
#[derive(Clone, Debug, Serialize)]
pub struct Frame {
    pub label: String,
    #[serde(skip)]
    pub fiber: CurveModel,
}

/// Output of [`stable_limit_traced`].
#[derive(Clone, Debug)]
pub struct LimitRun {
    pub model: DegenerationModel,
    /// `l_0, l_1, …` of the loop, the last one exceeding m.
    pub levels: Vec<usize>,
    /// Number of blow-up/contract iterations.
    pub iterations: usize,
    pub frames: Vec<Frame>,
}

/// Output of [`weighted_reduce_traced`].
#[derive(Clone, Debug)]
pub struct ReductionRun {
    pub model: DegenerationModel,
    pub frames: Vec<Frame>,
    pub contracted: Vec<ComponentId>,
}

impl DegenerationModel {
    /// Wraps a semistable nodal fibre: markings at distinct points and every rational
    /// component with at least two distinguished points.
    pub fn new(fiber: CurveModel) -> Result<Self, DegenerationError> {
        check_semistable(&fiber)?;
        let regular = vec![true; fiber.nodes().len()];
        Ok(DegenerationModel { fiber, regular, history: History::default() })
    }

    pub fn fiber(&self) -> &CurveModel {
        &self.fiber
    }

    /// Regularity of the total space at each node, aligned with `fiber().nodes()`.
    pub fn regular(&self) -> &[bool] {
        &self.regular
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    fn decomposition(&self) -> Result<Decomposition, ModelError> {
        decompose_with(&self.fiber, &self.fiber.topo())
    }

    fn level(&self) -> Result<usize, ModelError> {
        let topo = self.fiber.topo();
        let dec = decompose_with(&self.fiber, &topo)?;
        let ids: Vec<ComponentId> = self.fiber.component_ids().collect();
        Ok(level_with(&topo, &dec, |v| dec.contains(ids[v])))
    }
}

fn check_semistable(fiber: &CurveModel) -> Result<(), DegenerationError> {
    let report = fiber.validate();
    if !report.is_valid() {
        return Err(ModelError::Invalid(report).into());
    }
    if fiber.elliptic().is_some() {
        return Err(DegenerationError::NotSemistable("fibre has an elliptic point".into()));
    }
    let mut slots: Vec<SlotId> = fiber.markings().iter().map(|m| m.slot).collect();
    slots.sort_unstable();
    if slots.windows(2).any(|w| w[0] == w[1]) {
        return Err(DegenerationError::NotSemistable("coincident markings".into()));
    }
    let topo = fiber.topo();
    for (v, c) in fiber.components().iter().enumerate() {
        if c.genus == 0 && topo.dist(v) < 2 {
            return Err(DegenerationError::NotSemistable(format!(
                "{} has {} distinguished points",
                c.id,
                topo.dist(v)
            )));
        }
    }
    Ok(())
}

/// Mutable copy of a fibre used while applying a move.
struct Parts {
    components: Vec<Component>,
    nodes: Vec<NodeEdge>,
    regular: Vec<bool>,
    elliptic: Option<EllipticPoint>,
    markings: Vec<Marking>,
}

impl Parts {
    fn of(model: &DegenerationModel) -> Self {
        let (components, nodes, elliptic, markings) = model.fiber.clone().into_parts();
        Parts { components, nodes, regular: model.regular.clone(), elliptic, markings }
    }

    fn remove_node(&mut self, i: usize) {
        self.nodes.remove(i);
        self.regular.remove(i);
    }

    fn remove_component(&mut self, c: ComponentId) {
        self.components.retain(|x| x.id != c);
    }

    fn finish(self, history: History) -> DegenerationModel {
        let fiber = CurveModel::from_parts_unchecked(self.components, self.nodes, self.elliptic, self.markings);
        DegenerationModel { fiber, regular: self.regular, history }
    }
}

/// Blows up the point carrying marking `index`, which must lie on `Z`.
pub fn blow_up_marking(model: &DegenerationModel, index: u32) -> Result<DegenerationModel, DegenerationError> {
    let mk = model.fiber.markings().iter().find(|m| m.index == index).ok_or(DegenerationError::UnknownMarking(index))?;
    let dec = model.decomposition()?;
    if !dec.contains(mk.component) {
        return Err(DegenerationError::MarkingNotOnZ { index, component: mk.component });
    }
    let (on, slot) = (mk.component, mk.slot);
    let exceptional = model.fiber.fresh_component_id();
    let mut parts = Parts::of(model);
    parts.components.push(Component { id: exceptional, genus: 0 });
    parts.nodes.push(NodeEdge(on, exceptional));
    parts.regular.push(true);
    let mut indices = Vec::new();
    for m in parts.markings.iter_mut().filter(|m| m.slot == slot) {
        m.component = exceptional;
        indices.push(m.index);
    }
    indices.sort_unstable();
    let history = model.history.push(Move::BlowUp { indices, on, exceptional });
    Ok(parts.finish(history))
}

/// Contracts `subcurve` (which must be the minimal elliptic subcurve, unmarked, meeting the
/// rest of the fibre in regular nodes) to an elliptic l-fold point, l = number of attaching nodes.
pub fn contract_elliptic(model: &DegenerationModel, subcurve: &[ComponentId]) -> Result<DegenerationModel, DegenerationError> {
    let fiber = &model.fiber;
    let mut defects = Vec::new();
    for &c in subcurve {
        if fiber.position(c).is_none() {
            defects.push(ContractDefect::UnknownComponent { component: c });
        }
    }
    if !defects.is_empty() {
        return Err(DegenerationError::Contract(defects));
    }
    let mut sub: Vec<ComponentId> = subcurve.to_vec();
    sub.sort();
    sub.dedup();
    let inside = |c: ComponentId| sub.binary_search(&c).is_ok();

    let internal: Vec<usize> =
        (0..fiber.nodes().len()).filter(|&i| inside(fiber.nodes()[i].0) && inside(fiber.nodes()[i].1)).collect();
    let attaching: Vec<usize> =
        (0..fiber.nodes().len()).filter(|&i| inside(fiber.nodes()[i].0) != inside(fiber.nodes()[i].1)).collect();
    let branches_inside = fiber.elliptic().map_or(0, |p| p.branches.iter().filter(|&&b| inside(b)).count());
    let l_total = fiber.elliptic().map_or(0, |p| p.len());
    if branches_inside > 0 && branches_inside < l_total {
        defects.push(ContractDefect::EllipticPointOnBoundary);
    }

    let sub_model = {
        let components: Vec<Component> = fiber.components().iter().copied().filter(|c| inside(c.id)).collect();
        let nodes: Vec<NodeEdge> = internal.iter().map(|&i| fiber.nodes()[i]).collect();
        let elliptic = (branches_inside == l_total && l_total > 0).then(|| fiber.elliptic().unwrap().clone());
        CurveModel::from_parts_unchecked(components, nodes, elliptic, Vec::new())
    };
    if sub_model.connected_pieces() != 1 {
        defects.push(ContractDefect::NotConnected);
    }
    let genus = sub_model.arithmetic_genus();
    if genus != 1 {
        defects.push(ContractDefect::GenusNotOne { genus });
    }
    match model.decomposition() {
        Ok(dec) if dec.z_components == sub => {}
        _ => defects.push(ContractDefect::NotMinimalEllipticSubcurve),
    }
    let mut marked: Vec<u32> = fiber.markings().iter().filter(|m| inside(m.component)).map(|m| m.index).collect();
    if !marked.is_empty() {
        marked.sort_unstable();
        defects.push(ContractDefect::CarriesMarkings { indices: marked });
    }
    for &i in &attaching {
        if !model.regular[i] {
            defects.push(ContractDefect::IrregularAttachment { node: i });
        }
    }
    if attaching.is_empty() {
        defects.push(ContractDefect::NoAttachingNodes);
    }
    if !defects.is_empty() {
        return Err(DegenerationError::Contract(defects));
    }

    let branches: Vec<ComponentId> = attaching
        .iter()
        .map(|&i| {
            let e = fiber.nodes()[i];
            if inside(e.0) {
                e.1
            } else {
                e.0
            }
        })
        .collect();
    let mut parts = Parts::of(model);
    let mut drop: Vec<usize> = internal.iter().chain(&attaching).copied().collect();
    drop.sort_unstable();
    for &i in drop.iter().rev() {
        parts.remove_node(i);
    }
    parts.components.retain(|c| !inside(c.id));
    parts.elliptic = Some(EllipticPoint { branches: branches.clone() });
    let history = model.history.push(Move::ContractElliptic { subcurve: sub, branches });
    Ok(parts.finish(history))
}

/// Rational components with exactly two distinguished points that stabilisation removes:
/// those outside `Z`, and links of a nodal `Z` of ring type.
fn contractible(model: &DegenerationModel) -> Result<Vec<(ComponentId, usize)>, ModelError> {
    let fiber = &model.fiber;
    let topo = fiber.topo();
    let dec = decompose_with(fiber, &topo)?;
    let ids: Vec<ComponentId> = fiber.component_ids().collect();
    let ring = matches!(dec.z_kind, ZKind::Ring { .. });
    // distance from Z, for the innermost-first order
    let mut depth = vec![usize::MAX; topo.len()];
    let mut queue = std::collections::VecDeque::new();
    for v in 0..topo.len() {
        if dec.contains(ids[v]) {
            depth[v] = 0;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &(u, _) in &topo.adj[v] {
            if depth[u] == usize::MAX {
                depth[u] = depth[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let mut out: Vec<(ComponentId, usize)> = (0..topo.len())
        .filter(|&v| fiber.components()[v].genus == 0 && topo.dist(v) == 2 && !topo.branch[v])
        .filter(|&v| !dec.contains(ids[v]) || ring)
        .map(|v| (ids[v], depth[v]))
        .collect();
    out.sort_by_key(|&(id, d)| (d, id));
    Ok(out)
}

fn contract_two_pointed(model: &DegenerationModel, c: ComponentId) -> DegenerationModel {
    let fiber = &model.fiber;
    let touching: Vec<usize> = (0..fiber.nodes().len()).filter(|&i| fiber.nodes()[i].touches(c)).collect();
    let mut parts = Parts::of(model);
    let mv = if touching.len() == 2 {
        let (i, j) = (touching[0], touching[1]);
        let (a, b) = (fiber.nodes()[i].other(c), fiber.nodes()[j].other(c));
        parts.remove_node(j);
        parts.remove_node(i);
        parts.nodes.push(NodeEdge(a, b));
        parts.regular.push(false);
        Move::ContractLink { component: c, ends: (a, b) }
    } else {
        let i = touching[0];
        let onto = fiber.nodes()[i].other(c);
        parts.remove_node(i);
        let mut indices = Vec::new();
        for m in parts.markings.iter_mut().filter(|m| m.component == c) {
            m.component = onto;
            indices.push(m.index);
        }
        indices.sort_unstable();
        Move::ContractLeaf { component: c, onto, indices }
    };
    parts.remove_component(c);
    let history = model.history.push(mv);
    parts.finish(history)
}

/// Contracts two-pointed rational components outside `Z` (and links of a ring `Z`) until
/// none remain, innermost first.
pub fn stabilize(model: &DegenerationModel) -> Result<DegenerationModel, DegenerationError> {
    stabilize_by(model, |_| 0)
}

/// [`stabilize`] with the next contraction chosen by `pick` among the current candidates
/// (listed innermost first). The result does not depend on the choices.
pub fn stabilize_by(
    model: &DegenerationModel,
    mut pick: impl FnMut(&[ComponentId]) -> usize,
) -> Result<DegenerationModel, DegenerationError> {
    let mut cur = model.clone();
    loop {
        let cands: Vec<ComponentId> = contractible(&cur)?.into_iter().map(|(c, _)| c).collect();
        if cands.is_empty() {
            return Ok(cur);
        }
        let c = cands[pick(&cands) % cands.len()];
        cur = contract_two_pointed(&cur, c);
    }
}

fn stabilize_traced(model: &DegenerationModel, frames: Option<&mut Vec<Frame>>) -> Result<DegenerationModel, DegenerationError> {
    let mut frames = frames;
    let mut cur = model.clone();
    loop {
        let cands = contractible(&cur)?;
        let Some(&(c, _)) = cands.first() else {
            return Ok(cur);
        };
        cur = contract_two_pointed(&cur, c);
        if let Some(f) = frames.as_deref_mut() {
            f.push(Frame { label: format!("stabilize {c}"), fiber: cur.fiber.clone() });
        }
    }
}

/// Replaces node `node` by a chain of `length` unmarked rational components.
pub fn insert_chain(model: &DegenerationModel, node: usize, length: usize) -> Result<DegenerationModel, DegenerationError> {
    if length == 0 {
        return Err(DegenerationError::EmptyChain);
    }
    let e = *model.fiber.nodes().get(node).ok_or(DegenerationError::UnknownNode(node))?;
    let mut parts = Parts::of(model);
    parts.remove_node(node);
    let first = model.fiber.fresh_component_id().0;
    let chain: Vec<ComponentId> = (0..length as u32).map(|i| ComponentId(first + i)).collect();
    let mut prev = e.0;
    for &c in &chain {
        parts.components.push(Component { id: c, genus: 0 });
        parts.nodes.push(NodeEdge(prev, c));
        parts.regular.push(true);
        prev = c;
    }
    parts.nodes.push(NodeEdge(prev, e.1));
    parts.regular.push(true);
    let history = model.history.push(Move::InsertChain { ends: (e.0, e.1), chain });
    Ok(parts.finish(history))
}

/// Inserts a chain of `length` components at every node: the minimal resolution of the
/// base change of order `length + 1`.
pub fn base_change(model: &DegenerationModel, length: usize) -> Result<DegenerationModel, DegenerationError> {
    let mut cur = model.clone();
    for _ in 0..model.fiber.nodes().len() {
        // the original nodes always sit at the front of the list
        cur = insert_chain(&cur, 0, length)?;
    }
    Ok(cur)
}

fn check_m(fiber: &CurveModel, m: usize) -> Result<(), DegenerationError> {
    if m < 1 || m >= fiber.n() {
        return Err(StabilityError::BadM { m, n: fiber.n() }.into());
    }
    Ok(())
}

fn invariant(msg: impl Into<String>) -> DegenerationError {
    DegenerationError::Invariant(msg.into())
}

fn check_conservation(fiber: &CurveModel, n: usize) -> Result<(), DegenerationError> {
    if fiber.arithmetic_genus() != 1 {
        return Err(invariant(format!("arithmetic genus became {}", fiber.arithmetic_genus())));
    }
    let mut idx: Vec<u32> = fiber.markings().iter().map(|m| m.index).collect();
    idx.sort_unstable();
    if idx.len() != n || idx.iter().enumerate().any(|(i, &x)| x as usize != i + 1) {
        return Err(invariant("marking indices changed"));
    }
    Ok(())
}

/// The m-stable limit.
pub fn stable_limit(model: &DegenerationModel, m: usize) -> Result<DegenerationModel, DegenerationError> {
    run_limit(model, m, false).map(|r| r.model)
}

/// The m-stable limit with every intermediate fibre recorded.
pub fn stable_limit_traced(model: &DegenerationModel, m: usize) -> Result<LimitRun, DegenerationError> {
    run_limit(model, m, true)
}

fn run_limit(model: &DegenerationModel, m: usize, trace: bool) -> Result<LimitRun, DegenerationError> {
    let fiber = &model.fiber;
    check_m(fiber, m)?;
    check_semistable(fiber)?;
    let n = fiber.n();
    let mut cur = model.clone();
    let mut frames = Vec::new();
    if trace {
        frames.push(Frame { label: "C0".into(), fiber: cur.fiber.clone() });
    }
    let mut levels: Vec<usize> = Vec::new();
    let mut iterations = 0;
    loop {
        let topo = cur.fiber.topo();
        let dec = decompose_with(&cur.fiber, &topo)?;
        let ids: Vec<ComponentId> = cur.fiber.component_ids().collect();
        let level = level_with(&topo, &dec, |v| dec.contains(ids[v]));
        if let Some(&prev) = levels.last() {
            if level < prev {
                return Err(invariant(format!("level dropped from {prev} to {level}")));
            }
            if let Some(p) = cur.fiber.elliptic() {
                if p.len() != prev {
                    return Err(invariant("elliptic point does not have l_(i-1) branches"));
                }
            }
            let all_two = (0..topo.len()).filter(|&v| dec.contains(ids[v])).all(|v| topo.dist(v) == 2);
            if (level == prev) != all_two {
                return Err(invariant(format!("equality criterion fails at level {level}")));
            }
        }
        levels.push(level);
        if level > m {
            break;
        }
        let outside = topo.len() - dec.z_components.len();
        let mut slots: Vec<(SlotId, u32)> = cur
            .fiber
            .markings()
            .iter()
            .filter(|mk| dec.contains(mk.component))
            .map(|mk| (mk.slot, mk.index))
            .collect();
        slots.sort_unstable();
        slots.dedup_by_key(|s| s.0);
        for (_, index) in slots {
            cur = blow_up_marking(&cur, index)?;
            check_conservation(&cur.fiber, n)?;
            if trace {
                frames.push(Frame { label: format!("B{iterations}: blow up p{index}"), fiber: cur.fiber.clone() });
            }
        }
        cur = contract_elliptic(&cur, &dec.z_components)?;
        check_conservation(&cur.fiber, n)?;
        iterations += 1;
        let outside_after = cur.fiber.components().len() - cur.fiber.elliptic().map_or(0, |p| p.len());
        if outside_after >= outside {
            return Err(invariant("components off Z did not decrease"));
        }
        if trace {
            frames.push(Frame { label: format!("C{iterations}"), fiber: cur.fiber.clone() });
        }
    }
    cur = stabilize_traced(&cur, trace.then_some(&mut frames))?;
    check_conservation(&cur.fiber, n)?;
    let report = is_m_stable(&cur.fiber, m)?;
    if !report.stable {
        return Err(invariant(format!(
            "limit is not {m}-stable: {}",
            report.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ")
        )));
    }
    if trace {
        frames.push(Frame { label: "stable".into(), fiber: cur.fiber.clone() });
    }
    Ok(LimitRun { model: cur, levels, iterations, frames })
}

/// Contracts components on which `ω(Σ a_i p_i)` is not positive; each must be a rational
/// leaf meeting the rest in one node.
pub fn weighted_reduce(model: &DegenerationModel, m: usize, weights: &WeightVector) -> Result<DegenerationModel, DegenerationError> {
    weighted_reduce_traced(model, m, weights).map(|r| r.model)
}

pub fn weighted_reduce_traced(
    model: &DegenerationModel,
    m: usize,
    weights: &WeightVector,
) -> Result<ReductionRun, DegenerationError> {
    let fiber = &model.fiber;
    if weights.len() != fiber.n() {
        return Err(ModelError::WeightLength { expected: fiber.n(), found: weights.len() }.into());
    }
    let report = is_m_stable(fiber, m)?;
    if !report.stable {
        return Err(DegenerationError::NotStable(
            report.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    let n = fiber.n();
    let mut cur = model.clone();
    let mut frames = vec![Frame { label: "m-stable".into(), fiber: cur.fiber.clone() }];
    let mut contracted = Vec::new();
    let mut level = cur.level()?;
    loop {
        let topo = cur.fiber.topo();
        let mut target = None;
        for (v, c) in cur.fiber.components().iter().enumerate() {
            if cur.fiber.omega_degree(c.id, Some(weights))? <= Zero::zero() {
                target = Some((v, c.id));
                break;
            }
        }
        let Some((v, c)) = target else { break };
        let comp = cur.fiber.components()[v];
        if comp.genus != 0 || topo.branch[v] || !topo.self_nodes[v].is_empty() || topo.adj[v].len() != 1 {
            return Err(invariant(format!("non-positive component {c} is not a rational leaf")));
        }
        let (onto_pos, node) = topo.adj[v][0];
        let onto = cur.fiber.components()[onto_pos].id;
        let slot = cur.fiber.fresh_slot();
        let mut parts = Parts::of(&cur);
        parts.remove_node(node);
        let mut indices = Vec::new();
        for mk in parts.markings.iter_mut().filter(|mk| mk.component == c) {
            mk.component = onto;
            mk.slot = slot;
            indices.push(mk.index);
        }
        indices.sort_unstable();
        parts.remove_component(c);
        let history = cur.history.push(Move::ContractWeighted { component: c, onto, indices });
        cur = parts.finish(history);
        check_conservation(&cur.fiber, n)?;
        let new_level = cur.level()?;
        if new_level != level {
            return Err(invariant(format!("level changed from {level} to {new_level}")));
        }
        level = new_level;
        contracted.push(c);
        frames.push(Frame { label: format!("contract {c}"), fiber: cur.fiber.clone() });
    }
    cur.fiber = cur.fiber.with_weights(weights)?;
    let report = is_mA_stable(&cur.fiber, m, weights)?;
    if !report.stable {
        return Err(invariant(format!(
            "reduction is not (m,A)-stable: {}",
            report.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ")
        )));
    }
    Ok(ReductionRun { model: cur, frames, contracted })
}
