//! Minimal elliptic subcurve `Z`, the rational trees hanging off it, and the level.

use serde::Serialize;
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{ComponentId, CurveModel, Topo};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZKind {
    SmoothElliptic,
    IrreducibleNodal,
    Ring { length: usize },
    EllipticStar { branches: usize },
}

/// A rational tree meeting `Z` in one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tree {
    /// Components in breadth-first order from the root.
    pub components: Vec<ComponentId>,
    /// Index of the attaching node in the model's node list.
    pub attaching_node: usize,
    pub root: ComponentId,
    pub z_component: ComponentId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    /// Sorted ids of the components of `Z`.
    pub z_components: Vec<ComponentId>,
    pub z_kind: ZKind,
    pub trees: Vec<Tree>,
    pub attaching_count: usize,
}

impl Decomposition {
    pub fn contains(&self, id: ComponentId) -> bool {
        self.z_components.binary_search(&id).is_ok()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rational component {component} has {count} distinguished points, at least 2 required")]
    TooFewDistinguished { component: ComponentId, count: usize },
}

/// Outcome of [`level_minimality_check`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelCheck {
    pub passes: bool,
    pub level: usize,
    /// `Z` when the check fails.
    pub witness: Option<Vec<ComponentId>>,
}

fn invalid(model: &CurveModel) -> ModelError {
    ModelError::Invalid(model.validate())
}

/// Positions of `Z` and its kind.
pub(crate) fn core_of(model: &CurveModel, topo: &Topo) -> Result<(Vec<bool>, ZKind), ModelError> {
    let k = topo.len();
    let mut in_z = vec![false; k];
    if let Some(p) = model.elliptic() {
        for &b in &p.branches {
            in_z[model.position(b).unwrap()] = true;
        }
        return Ok((in_z, ZKind::EllipticStar { branches: p.len() }));
    }
    let mut deg: Vec<usize> = (0..k).map(|v| topo.adj[v].len() + 2 * topo.self_nodes[v].len()).collect();
    let mut alive = vec![true; k];
    let mut stack: Vec<usize> = (0..k).filter(|&v| deg[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(u, _) in &topo.adj[v] {
            if alive[u] {
                deg[u] -= 1;
                if deg[u] == 1 {
                    stack.push(u);
                }
            }
        }
    }
    let cycle: Vec<usize> = (0..k).filter(|&v| alive[v]).collect();
    match cycle.len() {
        0 => {
            let g1: Vec<usize> = (0..k).filter(|&v| model.components()[v].genus == 1).collect();
            if g1.len() != 1 {
                return Err(invalid(model));
            }
            in_z[g1[0]] = true;
            Ok((in_z, ZKind::SmoothElliptic))
        }
        1 => {
            let v = cycle[0];
            if topo.self_nodes[v].len() != 1 || model.components()[v].genus != 0 {
                return Err(invalid(model));
            }
            in_z[v] = true;
            Ok((in_z, ZKind::IrreducibleNodal))
        }
        len => {
            for &v in &cycle {
                let ring_edges = topo.adj[v].iter().filter(|&&(u, _)| alive[u]).count();
                if ring_edges != 2 || !topo.self_nodes[v].is_empty() || model.components()[v].genus != 0 {
                    return Err(invalid(model));
                }
                in_z[v] = true;
            }
            Ok((in_z, ZKind::Ring { length: len }))
        }
    }
}

pub fn minimal_elliptic_subcurve(model: &CurveModel) -> Result<Decomposition, ModelError> {
    let topo = model.topo();
    decompose_with(model, &topo)
}

pub(crate) fn decompose_with(model: &CurveModel, topo: &Topo) -> Result<Decomposition, ModelError> {
    let (in_z, z_kind) = core_of(model, topo)?;
    let ids: Vec<ComponentId> = model.component_ids().collect();
    let k = topo.len();
    let mut seen = in_z.clone();
    let mut trees = Vec::new();
    for v in 0..k {
        if !in_z[v] {
            continue;
        }
        let mut attach: Vec<(usize, usize)> = topo.adj[v].iter().copied().filter(|&(u, _)| !in_z[u]).collect();
        attach.sort_by_key(|&(_, ni)| ni);
        for (root, node) in attach {
            if seen[root] {
                return Err(invalid(model));
            }
            seen[root] = true;
            let mut order = vec![root];
            let mut via = vec![node];
            let mut head = 0;
            while head < order.len() {
                let (x, came) = (order[head], via[head]);
                head += 1;
                if !topo.self_nodes[x].is_empty() {
                    return Err(invalid(model));
                }
                for &(u, ni) in &topo.adj[x] {
                    if ni == came {
                        continue;
                    }
                    if in_z[u] || seen[u] {
                        return Err(invalid(model));
                    }
                    seen[u] = true;
                    order.push(u);
                    via.push(ni);
                }
            }
            trees.push(Tree {
                components: order.iter().map(|&x| ids[x]).collect(),
                attaching_node: node,
                root: ids[root],
                z_component: ids[v],
            });
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(invalid(model));
    }
    let mut z_components: Vec<ComponentId> = (0..k).filter(|&v| in_z[v]).map(|v| ids[v]).collect();
    z_components.sort();
    let attaching_count = trees.len();
    Ok(Decomposition { z_components, z_kind, trees, attaching_count })
}

pub(crate) fn level_with(topo: &Topo, dec: &Decomposition, in_z: impl Fn(usize) -> bool) -> usize {
    let on_z: usize = (0..topo.len()).filter(|&v| in_z(v)).map(|v| topo.slots[v].len()).sum();
    dec.attaching_count + on_z
}

/// `|Z ∩ closure(C∖Z)| + |Z ∩ Σ|`.
pub fn level(model: &CurveModel) -> Result<usize, ModelError> {
    let topo = model.topo();
    let dec = decompose_with(model, &topo)?;
    let ids: Vec<ComponentId> = model.component_ids().collect();
    Ok(level_with(&topo, &dec, |v| dec.contains(ids[v])))
}

/// Decides whether every connected genus-one subcurve has level above `m`, using that
/// the minimum is attained at `Z` once rational components carry two distinguished points.
pub fn level_minimality_check(model: &CurveModel, m: usize) -> Result<LevelCheck, DecompositionError> {
    let topo = model.topo();
    for (v, c) in model.components().iter().enumerate() {
        if c.genus == 0 && topo.dist(v) < 2 {
            return Err(DecompositionError::TooFewDistinguished { component: c.id, count: topo.dist(v) });
        }
    }
    let dec = decompose_with(model, &topo)?;
    let ids: Vec<ComponentId> = model.component_ids().collect();
    let level = level_with(&topo, &dec, |v| dec.contains(ids[v]));
    let passes = level > m;
    Ok(LevelCheck { passes, level, witness: (!passes).then(|| dec.z_components.clone()) })
}
