//! Decorated dual graphs of n-pointed arithmetic-genus-one curves.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Exact rational used for marking weights and ω-degrees.
pub type Rational = Ratio<i64>;

/// Opaque component identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Location of a smooth marked point. Slot ids form one global namespace;
/// markings with equal slot ids are coincident.
pub type SlotId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Component {
    pub id: ComponentId,
    /// Geometric genus of the normalization.
    pub genus: u8,
}

/// A node. Equal endpoints encode a self-node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeEdge(pub ComponentId, pub ComponentId);

impl NodeEdge {
    pub fn is_self_node(&self) -> bool {
        self.0 == self.1
    }

    pub fn touches(&self, c: ComponentId) -> bool {
        self.0 == c || self.1 == c
    }

    /// The endpoint opposite to `c` (equal to `c` for a self-node).
    pub fn other(&self, c: ComponentId) -> ComponentId {
        if self.0 == c {
            self.1
        } else {
            self.0
        }
    }
}

/// Elliptic l-fold point: one smooth branch on each listed component.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EllipticPoint {
    pub branches: Vec<ComponentId>,
}

/// Numerical invariants of a singular point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SingularityInvariants {
    /// Number of branches.
    pub m: usize,
    pub delta: usize,
    pub genus: i64,
}

impl EllipticPoint {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn invariants(&self) -> SingularityInvariants {
        let m = self.branches.len();
        let delta = m;
        SingularityInvariants { m, delta, genus: delta as i64 - m as i64 + 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Marking {
    /// 1-based marking index.
    pub index: u32,
    pub component: ComponentId,
    pub slot: SlotId,
    pub weight: Rational,
}

/// Weight vector `a_1..a_n`, each in (0,1].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightVector(Vec<Rational>);

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Result<Self, ModelError> {
        for (i, w) in weights.iter().enumerate() {
            if *w <= Rational::zero() || *w > Rational::one() {
                return Err(ModelError::WeightOutOfRange { index: i as u32 + 1, weight: *w });
            }
        }
        Ok(WeightVector(weights))
    }

    pub fn unit(n: usize) -> Self {
        WeightVector(vec![Rational::one(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weight of marking `index` (1-based).
    pub fn get(&self, index: u32) -> Rational {
        self.0[index as usize - 1]
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }

    pub fn total(&self) -> Rational {
        self.0.iter().copied().sum()
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|w| w.is_one())
    }
}

/// A violated model invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    GenusOutOfRange { component: ComponentId, genus: u8 },
    BranchNotRational { component: ComponentId },
    RepeatedBranch { component: ComponentId },
    EmptyEllipticPoint,
    Disconnected { pieces: usize },
    ArithmeticGenus { value: i64 },
    MarkingIndices { indices: Vec<u32> },
    SlotOnSeveralComponents { slot: SlotId },
    WeightOutOfRange { index: u32, weight: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GenusOutOfRange { component, genus } => {
                write!(f, "component {component} has genus {genus}")
            }
            Violation::BranchNotRational { component } => {
                write!(f, "elliptic branch component {component} is not rational")
            }
            Violation::RepeatedBranch { component } => {
                write!(f, "component {component} carries two elliptic branches")
            }
            Violation::EmptyEllipticPoint => write!(f, "elliptic point without branches"),
            Violation::Disconnected { pieces } => write!(f, "curve has {pieces} connected pieces"),
            Violation::ArithmeticGenus { value } => write!(f, "arithmetic genus is {value}"),
            Violation::MarkingIndices { indices } => {
                write!(f, "marking indices {indices:?} are not 1..n without repeats")
            }
            Violation::SlotOnSeveralComponents { slot } => {
                write!(f, "slot {slot} is used on more than one component")
            }
            Violation::WeightOutOfRange { index, weight } => {
                write!(f, "marking {index} has weight {weight} outside (0,1]")
            }
        }
    }
}

/// Result of [`CurveModel::validate`]; valid iff empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One distinguished point on the normalization of a component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistinguishedPoint {
    /// Preimage of node `node` (a self-node contributes two entries).
    NodeBranch { node: usize },
    EllipticBranch,
    MarkedSlot { slot: SlotId, indices: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistinguishedPoints {
    pub count: usize,
    pub items: Vec<DistinguishedPoint>,
}

/// An n-pointed curve of arithmetic genus one, as a decorated dual graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CurveModel {
    components: Vec<Component>,
    nodes: Vec<NodeEdge>,
    elliptic: Option<EllipticPoint>,
    markings: Vec<Marking>,
}

/// Per-component incidence data, indexed by position in `components`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Topo {
    /// Non-self nodes as (neighbour position, node index); repeated for multi-edges.
    pub adj: Vec<Vec<(usize, usize)>>,
    pub self_nodes: Vec<Vec<usize>>,
    pub branch: Vec<bool>,
    /// Distinct occupied slots, sorted.
    pub slots: Vec<Vec<SlotId>>,
    /// Positions into `markings`.
    pub marks: Vec<Vec<usize>>,
}

impl Topo {
    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn dist(&self, i: usize) -> usize {
        2 * self.self_nodes[i].len() + self.adj[i].len() + self.branch[i] as usize + self.slots[i].len()
    }
}

impl CurveModel {
    /// Builds a model after checking that every id resolves and component ids are unique.
    pub fn new(
        components: Vec<Component>,
        nodes: Vec<NodeEdge>,
        elliptic: Option<EllipticPoint>,
        markings: Vec<Marking>,
    ) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for c in &components {
            if !seen.insert(c.id) {
                return Err(ModelError::DuplicateComponent(c.id));
            }
        }
        let known = |id: ComponentId| seen.contains(&id);
        for (i, e) in nodes.iter().enumerate() {
            for id in [e.0, e.1] {
                if !known(id) {
                    return Err(ModelError::UnknownComponent { id, context: format!("node {i}") });
                }
            }
        }
        if let Some(p) = &elliptic {
            for &id in &p.branches {
                if !known(id) {
                    return Err(ModelError::UnknownComponent { id, context: "elliptic point".into() });
                }
            }
        }
        for mk in &markings {
            if !known(mk.component) {
                return Err(ModelError::UnknownComponent {
                    id: mk.component,
                    context: format!("marking {}", mk.index),
                });
            }
        }
        Ok(CurveModel { components, nodes, elliptic, markings })
    }

    pub fn builder() -> ModelBuilder {
        ModelBuilder::default()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn nodes(&self) -> &[NodeEdge] {
        &self.nodes
    }

    pub fn elliptic(&self) -> Option<&EllipticPoint> {
        self.elliptic.as_ref()
    }

    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    /// Number of markings `n`.
    pub fn n(&self) -> usize {
        self.markings.len()
    }

    pub fn component_ids(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.components.iter().map(|c| c.id)
    }

    pub fn component(&self, id: ComponentId) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub(crate) fn position(&self, id: ComponentId) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    fn require(&self, id: ComponentId) -> Result<usize, ModelError> {
        self.position(id).ok_or(ModelError::UnknownComponent { id, context: "query".into() })
    }

    /// Smallest id not used by any component.
    pub fn fresh_component_id(&self) -> ComponentId {
        ComponentId(self.components.iter().map(|c| c.id.0 + 1).max().unwrap_or(0))
    }

    /// Smallest slot id not used by any marking.
    pub fn fresh_slot(&self) -> SlotId {
        self.markings.iter().map(|m| m.slot + 1).max().unwrap_or(0)
    }

    /// The markings' own weights as a vector ordered by index. Requires indices 1..n.
    pub fn own_weights(&self) -> WeightVector {
        let mut w = vec![Rational::one(); self.markings.len()];
        for mk in &self.markings {
            if let Some(slot) = w.get_mut(mk.index as usize - 1) {
                *slot = mk.weight;
            }
        }
        WeightVector(w)
    }

    pub(crate) fn topo(&self) -> Topo {
        let k = self.components.len();
        let mut adj = vec![Vec::new(); k];
        let mut self_nodes = vec![Vec::new(); k];
        let mut branch = vec![false; k];
        let mut slots: Vec<Vec<SlotId>> = vec![Vec::new(); k];
        let mut marks = vec![Vec::new(); k];
        let pos = |id: ComponentId| self.position(id).expect("well-formed model");
        for (ni, e) in self.nodes.iter().enumerate() {
            let (a, b) = (pos(e.0), pos(e.1));
            if a == b {
                self_nodes[a].push(ni);
            } else {
                adj[a].push((b, ni));
                adj[b].push((a, ni));
            }
        }
        if let Some(p) = &self.elliptic {
            for &id in &p.branches {
                branch[pos(id)] = true;
            }
        }
        for (mi, mk) in self.markings.iter().enumerate() {
            let c = pos(mk.component);
            marks[c].push(mi);
            if !slots[c].contains(&mk.slot) {
                slots[c].push(mk.slot);
            }
        }
        for s in &mut slots {
            s.sort_unstable();
        }
        Topo { adj, self_nodes, branch, slots, marks }
    }

    /// `Σ g_i + #nodes + l − #components + 1`.
    pub fn arithmetic_genus(&self) -> i64 {
        let g: i64 = self.components.iter().map(|c| c.genus as i64).sum();
        let l = self.elliptic.as_ref().map_or(0, |p| p.len()) as i64;
        g + self.nodes.len() as i64 + l - self.components.len() as i64 + 1
    }

    /// Number of connected pieces, joining components through nodes and the elliptic point.
    pub(crate) fn connected_pieces(&self) -> usize {
        let k = self.components.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        let union = |p: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(p, a), find(p, b));
            if ra != rb {
                p[ra] = rb;
            }
        };
        for e in &self.nodes {
            let (a, b) = (self.position(e.0).unwrap(), self.position(e.1).unwrap());
            union(&mut parent, a, b);
        }
        if let Some(p) = &self.elliptic {
            for w in p.branches.windows(2) {
                let (a, b) = (self.position(w[0]).unwrap(), self.position(w[1]).unwrap());
                union(&mut parent, a, b);
            }
        }
        (0..k).filter(|&i| find(&mut parent, i) == i).count()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        for c in &self.components {
            if c.genus > 1 {
                v.push(Violation::GenusOutOfRange { component: c.id, genus: c.genus });
            }
        }
        if let Some(p) = &self.elliptic {
            if p.is_empty() {
                v.push(Violation::EmptyEllipticPoint);
            }
            let mut seen = Vec::new();
            for &b in &p.branches {
                if seen.contains(&b) {
                    v.push(Violation::RepeatedBranch { component: b });
                    continue;
                }
                seen.push(b);
                if self.component(b).is_some_and(|c| c.genus != 0) {
                    v.push(Violation::BranchNotRational { component: b });
                }
            }
        }
        let pieces = self.connected_pieces();
        if pieces != 1 {
            v.push(Violation::Disconnected { pieces });
        }
        let pa = self.arithmetic_genus();
        if pa != 1 {
            v.push(Violation::ArithmeticGenus { value: pa });
        }
        let mut idx: Vec<u32> = self.markings.iter().map(|m| m.index).collect();
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(i, &x)| x as usize != i + 1) {
            v.push(Violation::MarkingIndices { indices: idx });
        }
        let mut slot_owner: BTreeMap<SlotId, ComponentId> = BTreeMap::new();
        let mut reported = Vec::new();
        for mk in &self.markings {
            let owner = *slot_owner.entry(mk.slot).or_insert(mk.component);
            if owner != mk.component && !reported.contains(&mk.slot) {
                reported.push(mk.slot);
                v.push(Violation::SlotOnSeveralComponents { slot: mk.slot });
            }
            if mk.weight <= Rational::zero() || mk.weight > Rational::one() {
                v.push(Violation::WeightOutOfRange { index: mk.index, weight: mk.weight.to_string() });
            }
        }
        ValidationReport { violations: v }
    }

    pub fn distinguished_points(&self, id: ComponentId) -> Result<DistinguishedPoints, ModelError> {
        self.require(id)?;
        let mut items = Vec::new();
        for (ni, e) in self.nodes.iter().enumerate() {
            if e.0 == id {
                items.push(DistinguishedPoint::NodeBranch { node: ni });
            }
            if e.1 == id {
                items.push(DistinguishedPoint::NodeBranch { node: ni });
            }
        }
        if self.elliptic.as_ref().is_some_and(|p| p.branches.contains(&id)) {
            items.push(DistinguishedPoint::EllipticBranch);
        }
        let mut slots: BTreeMap<SlotId, Vec<u32>> = BTreeMap::new();
        for mk in self.markings.iter().filter(|m| m.component == id) {
            slots.entry(mk.slot).or_default().push(mk.index);
        }
        for (slot, mut indices) in slots {
            indices.sort_unstable();
            items.push(DistinguishedPoint::MarkedSlot { slot, indices });
        }
        Ok(DistinguishedPoints { count: items.len(), items })
    }

    /// `2g − 2 + (node preimages) + 2·(elliptic branches) + Σ a_i` over markings on `id`.
    /// Without `weights` every marking counts 1.
    pub fn omega_degree(&self, id: ComponentId, weights: Option<&WeightVector>) -> Result<Rational, ModelError> {
        let c = self.require(id)?;
        if let Some(w) = weights {
            if w.len() != self.n() {
                return Err(ModelError::WeightLength { expected: self.n(), found: w.len() });
            }
        }
        let genus = self.components[c].genus as i64;
        let preimages: i64 = self.nodes.iter().map(|e| (e.0 == id) as i64 + (e.1 == id) as i64).sum();
        let branches = self.elliptic.as_ref().map_or(0, |p| p.branches.iter().filter(|&&b| b == id).count()) as i64;
        let mut deg = Rational::from_integer(2 * genus - 2 + preimages + 2 * branches);
        for mk in self.markings.iter().filter(|m| m.component == id) {
            deg += weights.map_or(Rational::one(), |w| w.get(mk.index));
        }
        Ok(deg)
    }

    pub(crate) fn from_parts_unchecked(
        components: Vec<Component>,
        nodes: Vec<NodeEdge>,
        elliptic: Option<EllipticPoint>,
        markings: Vec<Marking>,
    ) -> Self {
        CurveModel { components, nodes, elliptic, markings }
    }

    pub(crate) fn into_parts(self) -> (Vec<Component>, Vec<NodeEdge>, Option<EllipticPoint>, Vec<Marking>) {
        (self.components, self.nodes, self.elliptic, self.markings)
    }

    /// Replaces every marking weight by the corresponding entry of `weights`.
    pub fn with_weights(&self, weights: &WeightVector) -> Result<Self, ModelError> {
        if weights.len() != self.n() {
            return Err(ModelError::WeightLength { expected: self.n(), found: weights.len() });
        }
        let mut out = self.clone();
        for mk in &mut out.markings {
            mk.weight = weights.get(mk.index);
        }
        Ok(out)
    }
}

/// Incremental construction of models, mostly for tests and generators.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    components: Vec<Component>,
    nodes: Vec<NodeEdge>,
    elliptic: Option<EllipticPoint>,
    markings: Vec<Marking>,
}

impl ModelBuilder {
    pub fn component(mut self, id: u32, genus: u8) -> Self {
        self.components.push(Component { id: ComponentId(id), genus });
        self
    }

    pub fn node(mut self, a: u32, b: u32) -> Self {
        self.nodes.push(NodeEdge(ComponentId(a), ComponentId(b)));
        self
    }

    pub fn elliptic(mut self, branches: &[u32]) -> Self {
        self.elliptic = Some(EllipticPoint { branches: branches.iter().map(|&b| ComponentId(b)).collect() });
        self
    }

    /// Marking at its own fresh slot with weight 1.
    pub fn mark(self, index: u32, component: u32) -> Self {
        let slot = 1000 + index;
        self.mark_at(index, component, slot, Rational::one())
    }

    pub fn mark_at(mut self, index: u32, component: u32, slot: SlotId, weight: Rational) -> Self {
        self.markings.push(Marking { index, component: ComponentId(component), slot, weight });
        self
    }

    pub fn build(self) -> Result<CurveModel, ModelError> {
        CurveModel::new(self.components, self.nodes, self.elliptic, self.markings)
    }
}
