//! Equisingular strata of (m,A)-stable n-pointed genus-one curves and their
//! witness-certified specialisation poset.
//!
//! Candidates are built constructively: a core `Z` of one of the four shapes, with each
//! core component carrying a set of items, an item being either a marked point (a block
//! of coincident markings) or a rational tree carrying a block of markings.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::canonical::CanonicalForm;
use crate::degeneration::{stable_limit, weighted_reduce, DegenerationModel};
use crate::error::ModelError;
use crate::model::{Component, ComponentId, CurveModel, EllipticPoint, Marking, NodeEdge, Rational, WeightVector};
use crate::stability::{is_mA_stable, stratum_dimension};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnumerationError {
    #[error("n = {n} exceeds the configured bound {bound}")]
    BoundExceeded { n: usize, bound: usize },
    #[error("m = {m} must satisfy 1 <= m < n = {n}")]
    BadM { m: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug)]
pub struct EnumerationConfig {
    /// Largest accepted n.
    pub max_n: usize,
    /// Largest candidate component count; `None` means `3n + m`.
    pub component_bound: Option<usize>,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig { max_n: 6, component_bound: None }
    }
}

/// A topological type of stable curve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stratum {
    /// Canonically relabelled model, marking weights set to the query weights.
    #[serde(skip)]
    pub representative: CurveModel,
    pub dimension: i64,
    #[serde(skip)]
    pub form: CanonicalForm,
}

impl Stratum {
    pub fn new(model: &CurveModel) -> Self {
        Stratum { representative: model.canonical_model(), dimension: stratum_dimension(model), form: model.canonical_form() }
    }
}

/// `from` specialises to `to`; `witness` is a semistable fibre certifying it.
#[derive(Clone, Debug)]
pub struct SpecializationEdge {
    pub from: Stratum,
    pub to: Stratum,
    pub witness: DegenerationModel,
}

#[derive(Clone, Debug)]
enum Item {
    /// Coincident markings, as a bit mask over indices.
    Slot(u32),
    Tree(Arc<Shape>),
}

#[derive(Clone, Debug)]
struct Shape {
    items: Vec<Item>,
    size: usize,
}

type ItemLists = Arc<Vec<(Vec<Item>, usize)>>;

/// Memoised item and tree generation.
struct Gen {
    slot_ok: Vec<bool>,
    min_root_items: usize,
    trees: HashMap<(u32, usize), Arc<Vec<Arc<Shape>>>>,
    lists: HashMap<(u32, usize), ItemLists>,
}

impl Gen {
    fn stable(n: usize, weights: &WeightVector) -> Self {
        let slot_ok = (0..1u32 << n)
            .map(|mask| {
                mask != 0 && (0..n).filter(|i| mask >> i & 1 == 1).map(|i| weights.get(i as u32 + 1)).sum::<Rational>() <= Rational::one()
            })
            .collect();
        Gen { slot_ok, min_root_items: 2, trees: HashMap::new(), lists: HashMap::new() }
    }

    fn semistable(n: usize) -> Self {
        let slot_ok = (0..1u32 << n).map(|mask: u32| mask.count_ones() == 1).collect();
        Gen { slot_ok, min_root_items: 1, trees: HashMap::new(), lists: HashMap::new() }
    }

    fn trees(&mut self, mask: u32, budget: usize) -> Arc<Vec<Arc<Shape>>> {
        if let Some(t) = self.trees.get(&(mask, budget)) {
            return t.clone();
        }
        let mut out = Vec::new();
        if budget > 0 {
            for (items, used) in self.lists(mask, budget - 1).iter() {
                if items.len() >= self.min_root_items {
                    out.push(Arc::new(Shape { items: items.clone(), size: 1 + used }));
                }
            }
        }
        let out = Arc::new(out);
        self.trees.insert((mask, budget), out.clone());
        out
    }

    /// Unordered item lists whose blocks partition `mask`, with total tree size ≤ `budget`.
    fn lists(&mut self, mask: u32, budget: usize) -> ItemLists {
        if let Some(l) = self.lists.get(&(mask, budget)) {
            return l.clone();
        }
        let mut out = Vec::new();
        if mask == 0 {
            out.push((Vec::new(), 0));
        } else {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let block = low | sub;
                let mut options: Vec<(Item, usize)> = Vec::new();
                if self.slot_ok[block as usize] {
                    options.push((Item::Slot(block), 0));
                }
                for t in self.trees(block, budget).iter() {
                    options.push((Item::Tree(t.clone()), t.size));
                }
                for (item, size) in options {
                    for (tail, used) in self.lists(mask ^ block, budget - size).iter() {
                        let mut items = vec![item.clone()];
                        items.extend(tail.iter().cloned());
                        out.push((items, size + used));
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        let out = Arc::new(out);
        self.lists.insert((mask, budget), out.clone());
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Core {
    Smooth,
    Nodal,
    Ring(usize),
    Star(usize),
}

/// Assembles a model from a core and per-core-component item lists.
struct Assembler {
    components: Vec<Component>,
    nodes: Vec<NodeEdge>,
    markings: Vec<Marking>,
}

impl Assembler {
    fn add(&mut self, genus: u8) -> ComponentId {
        let id = ComponentId(self.components.len() as u32);
        self.components.push(Component { id, genus });
        id
    }

    fn attach(&mut self, on: ComponentId, items: &[Item]) {
        for item in items {
            match item {
                Item::Slot(mask) => {
                    let slot = mask.trailing_zeros() + 1;
                    for i in 0..32 {
                        if mask >> i & 1 == 1 {
                            self.markings.push(Marking { index: i + 1, component: on, slot, weight: Rational::one() });
                        }
                    }
                }
                Item::Tree(shape) => {
                    let c = self.add(0);
                    self.nodes.push(NodeEdge(on, c));
                    self.attach(c, &shape.items);
                }
            }
        }
    }

    fn build(core: Core, per_component: &[&[Item]]) -> CurveModel {
        let mut a = Assembler { components: Vec::new(), nodes: Vec::new(), markings: Vec::new() };
        let mut elliptic = None;
        let core_ids: Vec<ComponentId> = match core {
            Core::Smooth => vec![a.add(1)],
            Core::Nodal => {
                let c = a.add(0);
                a.nodes.push(NodeEdge(c, c));
                vec![c]
            }
            Core::Ring(r) => {
                let ids: Vec<ComponentId> = (0..r).map(|_| a.add(0)).collect();
                for i in 0..r {
                    a.nodes.push(NodeEdge(ids[i], ids[(i + 1) % r]));
                }
                ids
            }
            Core::Star(l) => {
                let ids: Vec<ComponentId> = (0..l).map(|_| a.add(0)).collect();
                elliptic = Some(EllipticPoint { branches: ids.clone() });
                ids
            }
        };
        for (c, items) in core_ids.iter().zip(per_component) {
            a.attach(*c, items);
        }
        a.markings.sort_by_key(|m| m.index);
        CurveModel::from_parts_unchecked(a.components, a.nodes, elliptic, a.markings)
    }
}

/// Calls `f` with every sequence of `r` masks partitioning `full`, marking 1 on the first.
/// For unordered cores (`restricted`) only one sequence per set partition is produced.
fn distributions(n: usize, r: usize, nonempty: bool, restricted: bool, f: &mut dyn FnMut(&[u32])) {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        n: usize,
        r: usize,
        used: usize,
        masks: &mut Vec<u32>,
        nonempty: bool,
        restricted: bool,
        f: &mut dyn FnMut(&[u32]),
    ) {
        if i == n {
            if !nonempty || masks.iter().all(|&m| m != 0) {
                f(masks);
            }
            return;
        }
        let limit = if i == 0 { 1 } else if restricted { (used + 1).min(r) } else { r };
        for j in 0..limit {
            masks[j] |= 1 << i;
            rec(i + 1, n, r, used.max(j + 1), masks, nonempty, restricted, f);
            masks[j] &= !(1 << i);
        }
    }
    let mut masks = vec![0u32; r];
    rec(0, n, r, 0, &mut masks, nonempty, restricted, f);
}

/// Every model built from `cores` whose total component count is at most `budget`.
fn assemble_all(gen: &mut Gen, n: usize, cores: &[Core], budget: usize, nonempty: bool, out: &mut Vec<CurveModel>) {
    for &core in cores {
        let (r, restricted) = match core {
            Core::Smooth | Core::Nodal => (1, false),
            Core::Ring(r) => (r, false),
            Core::Star(l) => (l, true),
        };
        if r > budget {
            continue;
        }
        let mut dists: Vec<Vec<u32>> = Vec::new();
        distributions(n, r, nonempty, restricted, &mut |m| dists.push(m.to_vec()));
        for masks in dists {
            let lists: Vec<ItemLists> = masks.iter().map(|&m| gen.lists(m, budget - r)).collect();
            let mut chosen: Vec<&[Item]> = Vec::with_capacity(r);
            fn product<'a>(
                lists: &'a [ItemLists],
                j: usize,
                left: usize,
                chosen: &mut Vec<&'a [Item]>,
                core: Core,
                out: &mut Vec<CurveModel>,
            ) {
                if j == lists.len() {
                    out.push(Assembler::build(core, chosen));
                    return;
                }
                for (items, used) in lists[j].iter() {
                    if *used <= left {
                        chosen.push(items);
                        product(lists, j + 1, left - used, chosen, core, out);
                        chosen.pop();
                    }
                }
            }
            product(&lists, 0, budget - r, &mut chosen, core, out);
        }
    }
}

fn dedupe_sorted(models: Vec<CurveModel>) -> Vec<(CanonicalForm, CurveModel)> {
    let keyed: Vec<(CanonicalForm, CurveModel)> = models.into_par_iter().map(|m| (m.canonical_form(), m)).collect();
    let mut by_form: BTreeMap<CanonicalForm, CurveModel> = BTreeMap::new();
    for (k, m) in keyed {
        by_form.entry(k).or_insert(m);
    }
    by_form.into_iter().collect()
}

fn check_query(n: usize, m: usize, weights: Option<&WeightVector>, config: &EnumerationConfig) -> Result<WeightVector, EnumerationError> {
    if n > config.max_n {
        return Err(EnumerationError::BoundExceeded { n, bound: config.max_n });
    }
    if m < 1 || m >= n {
        return Err(EnumerationError::BadM { m, n });
    }
    match weights {
        Some(w) if w.len() != n => Err(ModelError::WeightLength { expected: n, found: w.len() }.into()),
        Some(w) => Ok(w.clone()),
        None => Ok(WeightVector::unit(n)),
    }
}

pub fn enumerate_strata(n: usize, m: usize, weights: Option<&WeightVector>) -> Result<Vec<Stratum>, EnumerationError> {
    enumerate_strata_with(n, m, weights, &EnumerationConfig::default())
}

pub fn enumerate_strata_with(
    n: usize,
    m: usize,
    weights: Option<&WeightVector>,
    config: &EnumerationConfig,
) -> Result<Vec<Stratum>, EnumerationError> {
    let weights = check_query(n, m, weights, config)?;
    let budget = config.component_bound.unwrap_or(3 * n + m);
    let mut gen = Gen::stable(n, &weights);
    let mut cores = vec![Core::Smooth, Core::Nodal];
    cores.extend((2..=n.min(budget)).map(Core::Ring));
    cores.extend((1..=m).map(Core::Star));
    let mut candidates = Vec::new();
    assemble_all(&mut gen, n, &cores, budget, true, &mut candidates);
    let stable: Vec<CurveModel> = candidates
        .into_par_iter()
        .filter_map(|c| {
            let c = c.with_weights(&weights).ok()?;
            is_mA_stable(&c, m, &weights).ok().filter(|r| r.stable).map(|_| c)
        })
        .collect();
    let mut strata: Vec<Stratum> = dedupe_sorted(stable).into_iter().map(|(_, c)| Stratum::new(&c)).collect();
    strata.sort_by(|a, b| b.dimension.cmp(&a.dimension).then_with(|| a.form.cmp(&b.form)));
    Ok(strata)
}

/// Semistable nodal n-pointed fibres with at most `bound` components and distinct markings,
/// one per isomorphism class, ordered by (component count, canonical form).
pub fn semistable_fibers(n: usize, bound: usize) -> Vec<CurveModel> {
    let mut gen = Gen::semistable(n);
    let mut cores = vec![Core::Smooth, Core::Nodal];
    cores.extend((2..=bound).map(Core::Ring));
    let mut models = Vec::new();
    assemble_all(&mut gen, n, &cores, bound, false, &mut models);
    let mut out: Vec<(usize, CanonicalForm, CurveModel)> =
        dedupe_sorted(models).into_iter().map(|(k, m)| (m.components().len(), k, m)).collect();
    out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    out.into_iter().map(|(_, _, m)| m).collect()
}

/// Smooths the nodes selected by `mask` (bit i for node i): merges the components they join,
/// adding genus for nodes that close a loop.
pub fn smooth_nodes(model: &CurveModel, mask: u64) -> CurveModel {
    let comps = model.components();
    let k = comps.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut loops = vec![0u8; k];
    let ends: Vec<(usize, usize)> =
        model.nodes().iter().map(|e| (model.position(e.0).unwrap(), model.position(e.1).unwrap())).collect();
    for (i, &(a, b)) in ends.iter().enumerate() {
        if mask >> i & 1 == 1 {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                loops[ra] += 1;
            } else {
                parent[ra] = rb;
                loops[rb] += loops[ra];
            }
        }
    }
    let mut genus = vec![0u8; k];
    for (v, c) in comps.iter().enumerate() {
        let r = find(&mut parent, v);
        genus[r] += c.genus;
    }
    let components: Vec<Component> = (0..k)
        .filter(|&v| find(&mut parent, v) == v)
        .map(|v| Component { id: comps[v].id, genus: genus[v] + loops[v] })
        .collect();
    let nodes: Vec<NodeEdge> = ends
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask >> i & 1 == 0)
        .map(|(_, &(a, b))| NodeEdge(comps[find(&mut parent, a)].id, comps[find(&mut parent, b)].id))
        .collect();
    let markings: Vec<Marking> = model
        .markings()
        .iter()
        .map(|mk| Marking { component: comps[find(&mut parent, model.position(mk.component).unwrap())].id, ..mk.clone() })
        .collect();
    let elliptic = model.elliptic().map(|p| EllipticPoint {
        branches: p.branches.iter().map(|&b| comps[find(&mut parent, model.position(b).unwrap())].id).collect(),
    });
    CurveModel::from_parts_unchecked(components, nodes, elliptic, markings)
}

/// Canonical form of the (m,A)-stable limit of a semistable fibre.
fn limit_form(fiber: &CurveModel, m: usize, weights: &WeightVector) -> Option<CanonicalForm> {
    let model = DegenerationModel::new(fiber.clone()).ok()?;
    let lim = stable_limit(&model, m).ok()?;
    let lim = if weights.is_unit() { lim } else { weighted_reduce(&lim, m, weights).ok()? };
    Some(lim.fiber().canonical_form())
}

/// Searches semistable fibres `S` (at most `search_bound` components) whose limit is `to`
/// and which have a partial smoothing whose limit is `from`.
pub fn specializes(from: &Stratum, to: &Stratum, m: usize, search_bound: usize) -> Option<DegenerationModel> {
    if to.dimension >= from.dimension {
        return None;
    }
    let weights = from.representative.own_weights();
    let n = from.representative.n();
    for s in semistable_fibers(n, search_bound) {
        if limit_form(&s, m, &weights).as_ref() != Some(&to.form) {
            continue;
        }
        for mask in 0..1u64 << s.nodes().len() {
            if limit_form(&smooth_nodes(&s, mask), m, &weights).as_ref() == Some(&from.form) {
                return DegenerationModel::new(s).ok();
            }
        }
    }
    None
}

/// All witness-certified specialisations among `strata`, transitively reduced.
pub fn build_poset(strata: &[Stratum], m: usize, search_bound: usize) -> Vec<SpecializationEdge> {
    let Some(first) = strata.first() else { return Vec::new() };
    let weights = first.representative.own_weights();
    let n = first.representative.n();
    let index: HashMap<&CanonicalForm, usize> = strata.iter().enumerate().map(|(i, s)| (&s.form, i)).collect();
    let fibers = semistable_fibers(n, search_bound);
    // per fibre: (limit stratum, strata reached by partial smoothings)
    let found: Vec<Option<(usize, Vec<usize>)>> = fibers
        .par_iter()
        .map(|s| {
            let to = *index.get(&limit_form(s, m, &weights)?)?;
            let mut cache: HashMap<CanonicalForm, Option<usize>> = HashMap::new();
            let mut froms = Vec::new();
            for mask in 1..1u64 << s.nodes().len() {
                let x = smooth_nodes(s, mask);
                let key = x.canonical_form();
                let from = *cache
                    .entry(key)
                    .or_insert_with(|| limit_form(&x, m, &weights).and_then(|f| index.get(&f).copied()));
                if let Some(f) = from {
                    if strata[f].dimension > strata[to].dimension && !froms.contains(&f) {
                        froms.push(f);
                    }
                }
            }
            Some((to, froms))
        })
        .collect();
    let mut witness: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (si, entry) in found.iter().enumerate() {
        if let Some((to, froms)) = entry {
            for &f in froms {
                witness.entry((f, *to)).or_insert(si);
            }
        }
    }
    let k = strata.len();
    let mut succ = vec![Vec::new(); k];
    for &(f, t) in witness.keys() {
        succ[f].push(t);
    }
    let reaches_long = |a: usize, c: usize| -> bool {
        // path a -> b -> ... -> c with at least two edges
        let mut seen = vec![false; k];
        let mut stack: Vec<usize> = succ[a].iter().copied().filter(|&b| b != c).collect();
        while let Some(x) = stack.pop() {
            if x == c {
                return true;
            }
            if !seen[x] {
                seen[x] = true;
                stack.extend(succ[x].iter().copied());
            }
        }
        false
    };
    witness
        .iter()
        .filter(|(&(f, t), _)| !reaches_long(f, t))
        .map(|(&(f, t), &si)| SpecializationEdge {
            from: strata[f].clone(),
            to: strata[t].clone(),
            witness: DegenerationModel::new(fibers[si].clone()).expect("generated fibres are semistable"),
        })
        .collect()
}
