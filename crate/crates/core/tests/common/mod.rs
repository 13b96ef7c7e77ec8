//! Test oracles and generators shared by the integration tests and the acceptance target.
//! Everything here works from the public model API only, independently of the library's
//! internal graph code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mfold::canonical::CanonicalForm;
use mfold::model::{Component, ComponentId, CurveModel, EllipticPoint, Marking, NodeEdge, Rational, WeightVector};
use mfold::stability::is_mA_stable;
use mfold::tails::AttachMark;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

pub fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

pub fn weights(ws: &[&str]) -> WeightVector {
    WeightVector::new(ws.iter().map(|w| q(w)).collect()).unwrap()
}

/// Model from plain tuples: `(id, genus)`, node pairs, elliptic branches, `(index, component)`
/// markings at distinct slots with weight 1.
pub fn model(comps: &[(u32, u8)], nodes: &[(u32, u32)], elliptic: Option<&[u32]>, marks: &[(u32, u32)]) -> CurveModel {
    let mut b = CurveModel::builder();
    for &(id, g) in comps {
        b = b.component(id, g);
    }
    for &(x, y) in nodes {
        b = b.node(x, y);
    }
    if let Some(br) = elliptic {
        b = b.elliptic(br);
    }
    for &(i, c) in marks {
        b = b.mark(i, c);
    }
    b.build().unwrap()
}

// ---------------------------------------------------------------- subcurve oracle

/// A connected subcurve of arithmetic genus one found by exhaustive search.
#[derive(Clone, Debug)]
pub struct Subcurve {
    pub members: Vec<ComponentId>,
    /// |E ∩ closure(C \ E)| + |E ∩ Σ|.
    pub level: usize,
}

fn pos_of(model: &CurveModel) -> BTreeMap<ComponentId, usize> {
    model.components().iter().enumerate().map(|(i, c)| (c.id, i)).collect()
}

/// Every connected subcurve of arithmetic genus one. A subset of k of the l branches of the
/// elliptic point meets in a rational k-fold point (δ = k − 1) when k < l.
pub fn genus_one_subcurves(model: &CurveModel) -> Vec<Subcurve> {
    let k = model.components().len();
    assert!(k <= 16);
    let pos = pos_of(model);
    let nodes: Vec<(usize, usize)> = model.nodes().iter().map(|e| (pos[&e.0], pos[&e.1])).collect();
    let branches: Vec<usize> = model.elliptic().map(|p| p.branches.iter().map(|b| pos[b]).collect()).unwrap_or_default();
    let l = branches.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << k) {
        let inside = |v: usize| mask >> v & 1 == 1;
        let size = mask.count_ones() as i64;
        let genus: i64 = (0..k).filter(|&v| inside(v)).map(|v| model.components()[v].genus as i64).sum();
        let internal = nodes.iter().filter(|&&(a, b)| inside(a) && inside(b)).count() as i64;
        let kb = branches.iter().filter(|&&b| inside(b)).count();
        let delta = if kb == 0 {
            0
        } else if kb == l {
            l as i64
        } else {
            kb as i64 - 1
        };
        if genus + internal + delta - size + 1 != 1 {
            continue;
        }
        // connectivity by flood fill
        let start = (0..k).find(|&v| inside(v)).unwrap();
        let mut seen = vec![false; k];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let mut next: Vec<usize> = nodes
                .iter()
                .filter(|&&(a, b)| inside(a) && inside(b) && (a == v || b == v))
                .map(|&(a, b)| if a == v { b } else { a })
                .collect();
            if branches.contains(&v) {
                next.extend(branches.iter().copied().filter(|&b| inside(b)));
            }
            for u in next {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        if (0..k).any(|v| inside(v) && !seen[v]) {
            continue;
        }
        let boundary_nodes = nodes.iter().filter(|&&(a, b)| inside(a) != inside(b)).count();
        let boundary_point = usize::from(kb > 0 && kb < l);
        let slots: BTreeSet<u32> =
            model.markings().iter().filter(|mk| inside(pos[&mk.component])).map(|mk| mk.slot).collect();
        let members = (0..k).filter(|&v| inside(v)).map(|v| model.components()[v].id).collect();
        out.push(Subcurve { members, level: boundary_nodes + boundary_point + slots.len() });
    }
    out
}

// ---------------------------------------------------------------- isomorphism oracle

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Marked isomorphism by trying every bijection of components (at most 8 components).
pub fn isomorphic_by_permutation(a: &CurveModel, b: &CurveModel) -> bool {
    let k = a.components().len();
    assert!(k <= 8, "permutation oracle limited to 8 components");
    if k != b.components().len() || a.nodes().len() != b.nodes().len() || a.n() != b.n() {
        return false;
    }
    if a.elliptic().map(|p| p.len()) != b.elliptic().map(|p| p.len()) {
        return false;
    }
    let (pa, pb) = (pos_of(a), pos_of(b));
    let node_list = |m: &CurveModel, pos: &BTreeMap<ComponentId, usize>| -> Vec<(usize, usize)> {
        m.nodes().iter().map(|e| (pos[&e.0], pos[&e.1])).collect()
    };
    let (na, nb) = (node_list(a, &pa), node_list(b, &pb));
    let mut nb_sorted: Vec<(usize, usize)> = nb.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect();
    nb_sorted.sort_unstable();
    let branch_set = |m: &CurveModel, pos: &BTreeMap<ComponentId, usize>| -> BTreeSet<usize> {
        m.elliptic().map(|p| p.branches.iter().map(|b| pos[b]).collect()).unwrap_or_default()
    };
    let (ba, bb) = (branch_set(a, &pa), branch_set(b, &pb));
    let marks = |m: &CurveModel, pos: &BTreeMap<ComponentId, usize>| -> BTreeMap<u32, (usize, u32)> {
        m.markings().iter().map(|mk| (mk.index, (pos[&mk.component], mk.slot))).collect()
    };
    let (ma, mb) = (marks(a, &pa), marks(b, &pb));
    if ma.keys().ne(mb.keys()) {
        return false;
    }
    let same_slot = |m: &BTreeMap<u32, (usize, u32)>, i: u32, j: u32| m[&i].1 == m[&j].1;
    for i in ma.keys() {
        for j in ma.keys() {
            if same_slot(&ma, *i, *j) != same_slot(&mb, *i, *j) {
                return false;
            }
        }
    }
    permutations(k).into_iter().any(|p| {
        (0..k).all(|v| a.components()[v].genus == b.components()[p[v]].genus)
            && ba.iter().map(|&v| p[v]).collect::<BTreeSet<_>>() == bb
            && ma.iter().all(|(i, &(c, _))| mb[i].0 == p[c])
            && {
                let mut mapped: Vec<(usize, usize)> = na
                    .iter()
                    .map(|&(x, y)| (p[x].min(p[y]), p[x].max(p[y])))
                    .collect();
                mapped.sort_unstable();
                mapped == nb_sorted
            }
    })
}

/// Same model with component ids renamed by a random injection and lists shuffled.
pub fn relabel<R: Rng>(model: &CurveModel, rng: &mut R) -> CurveModel {
    let mut fresh: Vec<u32> = (0..model.components().len() as u32 * 3 + 3).collect();
    fresh.shuffle(rng);
    let map: BTreeMap<ComponentId, ComponentId> =
        model.components().iter().zip(&fresh).map(|(c, &f)| (c.id, ComponentId(f + 100))).collect();
    let mut slots: Vec<u32> = (0..model.markings().len() as u32 * 2 + 2).collect();
    slots.shuffle(rng);
    let old_slots: Vec<u32> = model.markings().iter().map(|m| m.slot).collect::<BTreeSet<_>>().into_iter().collect();
    let slot_map: BTreeMap<u32, u32> = old_slots.iter().zip(&slots).map(|(&a, &b)| (a, b + 7)).collect();
    let mut comps: Vec<Component> = model.components().iter().map(|c| Component { id: map[&c.id], genus: c.genus }).collect();
    let mut nodes: Vec<NodeEdge> = model
        .nodes()
        .iter()
        .map(|e| if rng.gen() { NodeEdge(map[&e.0], map[&e.1]) } else { NodeEdge(map[&e.1], map[&e.0]) })
        .collect();
    let elliptic = model.elliptic().map(|p| {
        let mut branches: Vec<ComponentId> = p.branches.iter().map(|b| map[b]).collect();
        branches.shuffle(rng);
        EllipticPoint { branches }
    });
    let mut marks: Vec<Marking> = model
        .markings()
        .iter()
        .map(|mk| Marking { component: map[&mk.component], slot: slot_map[&mk.slot], ..mk.clone() })
        .collect();
    comps.shuffle(rng);
    nodes.shuffle(rng);
    marks.shuffle(rng);
    CurveModel::new(comps, nodes, elliptic, marks).unwrap()
}

// ---------------------------------------------------------------- random generators

/// Random semistable nodal fibre: a core (smooth, irreducible nodal or a ring of 2..=4),
/// random rational trees, n distinct markings, then unmarked leaves pruned until every
/// rational component has two distinguished points. Component ids are scrambled.
pub fn random_semistable<R: Rng>(rng: &mut R, n: usize, max_extra: usize) -> CurveModel {
    let mut genus: Vec<u8> = Vec::new();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    match rng.gen_range(0..3) {
        0 => genus.push(1),
        1 => {
            genus.push(0);
            nodes.push((0, 0));
        }
        _ => {
            let r = rng.gen_range(2..=4);
            genus.extend(std::iter::repeat_n(0, r));
            nodes.extend((0..r).map(|i| (i, (i + 1) % r)));
        }
    }
    let extra = rng.gen_range(0..=max_extra);
    for _ in 0..extra {
        let parent = rng.gen_range(0..genus.len());
        genus.push(0);
        nodes.push((parent, genus.len() - 1));
    }
    let mut marks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..genus.len())).collect();
    // prune unmarked leaves (tree components only ever have dist < 2 as leaves)
    loop {
        let k = genus.len();
        let mut deg = vec![0usize; k];
        for &(a, b) in &nodes {
            deg[a] += 1;
            deg[b] += 1;
        }
        let marked: Vec<usize> = (0..k).map(|v| marks.iter().filter(|&&c| c == v).count()).collect();
        let Some(v) = (0..k).find(|&v| genus[v] == 0 && deg[v] + marked[v] < 2) else { break };
        genus.remove(v);
        nodes.retain(|&(a, b)| a != v && b != v);
        for e in &mut nodes {
            if e.0 > v {
                e.0 -= 1;
            }
            if e.1 > v {
                e.1 -= 1;
            }
        }
        for c in &mut marks {
            if *c > v {
                *c -= 1;
            }
        }
    }
    let mut ids: Vec<u32> = (0..genus.len() as u32 * 2 + 1).collect();
    ids.shuffle(rng);
    let comps = genus.iter().enumerate().map(|(v, &g)| Component { id: ComponentId(ids[v]), genus: g }).collect();
    let nodes = nodes.iter().map(|&(a, b)| NodeEdge(ComponentId(ids[a]), ComponentId(ids[b]))).collect();
    let markings = marks
        .iter()
        .enumerate()
        .map(|(i, &c)| Marking {
            index: i as u32 + 1,
            component: ComponentId(ids[c]),
            slot: 50 + i as u32,
            weight: Rational::from_integer(1),
        })
        .collect();
    CurveModel::new(comps, nodes, None, markings).unwrap()
}

/// Random valid model of any core kind (including elliptic points), with random rational
/// trees and, when `coincide` is set, random coincidences among markings on a component.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, coincide: bool) -> CurveModel {
    let mut genus: Vec<u8> = Vec::new();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    let mut branches = Vec::new();
    match rng.gen_range(0..4) {
        0 => genus.push(1),
        1 => {
            genus.push(0);
            nodes.push((0, 0));
        }
        2 => {
            let r = rng.gen_range(2..=n.max(2) + 1);
            genus.extend(std::iter::repeat_n(0, r));
            nodes.extend((0..r).map(|i| (i, (i + 1) % r)));
        }
        _ => {
            let l = rng.gen_range(1..=n.max(1));
            genus.extend(std::iter::repeat_n(0, l));
            branches.extend(0..l);
        }
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let parent = rng.gen_range(0..genus.len());
        genus.push(0);
        nodes.push((parent, genus.len() - 1));
    }
    let mut markings: Vec<Marking> = Vec::new();
    for i in 1..=n as u32 {
        let c = rng.gen_range(0..genus.len());
        let existing: Vec<u32> = markings.iter().filter(|m| m.component.0 == c as u32).map(|m| m.slot).collect();
        let slot = if coincide && !existing.is_empty() && rng.gen_bool(0.3) {
            *existing.choose(rng).unwrap()
        } else {
            i
        };
        markings.push(Marking { index: i, component: ComponentId(c as u32), slot, weight: Rational::from_integer(1) });
    }
    let comps = genus.iter().enumerate().map(|(v, &g)| Component { id: ComponentId(v as u32), genus: g }).collect();
    let nodes = nodes.iter().map(|&(a, b)| NodeEdge(ComponentId(a as u32), ComponentId(b as u32))).collect();
    let elliptic =
        (!branches.is_empty()).then(|| EllipticPoint { branches: branches.iter().map(|&b| ComponentId(b as u32)).collect() });
    CurveModel::new(comps, nodes, elliptic, markings).unwrap()
}

/// Random weight vector with entries in {1/6, ..., 6/6}.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> WeightVector {
    WeightVector::new((0..n).map(|_| Rational::new(rng.gen_range(1..=6), 6)).collect()).unwrap()
}

// ---------------------------------------------------------------- raw-graph strategy

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    // restricted growth strings: block label per marking
    let mut out = Vec::new();
    fn rec(cur: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            rec(cur, max.max(b), n, out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut cur = vec![0];
    rec(&mut cur, 0, n, &mut out);
    out
}

fn multisets(pairs: &[(usize, usize)], size: usize, from: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for i in from..pairs.len() {
        cur.push(pairs[i]);
        multisets(pairs, size, i, cur, out);
        cur.pop();
    }
}

/// `(genera, nodes, elliptic branches)` on positions `0..k`.
pub type RawGraph = (Vec<u8>, Vec<(usize, usize)>, Vec<usize>);

/// Connected labelled genus-one dual graphs on k components, with no symmetry reduction.
pub fn raw_graphs(k: usize, max_branches: usize) -> Vec<RawGraph> {
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for g1 in std::iter::once(None).chain((0..k).map(Some)) {
        let genus: Vec<u8> = (0..k).map(|v| u8::from(Some(v) == g1)).collect();
        let sum_g = usize::from(g1.is_some());
        for bmask in 0u32..(1 << k) {
            let branches: Vec<usize> = (0..k).filter(|&v| bmask >> v & 1 == 1).collect();
            if branches.len() > max_branches || branches.iter().any(|&b| genus[b] == 1) {
                continue;
            }
            let l = branches.len();
            let Some(edges) = k.checked_sub(sum_g + l) else { continue };
            let mut sets = Vec::new();
            multisets(&pairs, edges, 0, &mut Vec::new(), &mut sets);
            for nodes in sets {
                // hypergraph connectivity
                let mut parent: Vec<usize> = (0..k).collect();
                fn find(p: &mut [usize], x: usize) -> usize {
                    if p[x] != x {
                        let r = find(p, p[x]);
                        p[x] = r;
                    }
                    p[x]
                }
                for &(a, b) in &nodes {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
                for w in branches.windows(2) {
                    let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                    parent[ra] = rb;
                }
                let root = find(&mut parent, 0);
                if (0..k).all(|v| find(&mut parent, v) == root) {
                    out.push((genus.clone(), nodes, branches.clone()));
                }
            }
        }
    }
    out
}

/// Canonical forms of (m,A)-stable curves found by brute force over all labelled graphs with
/// at most `max_components` components and all placements of markings (coincidences included).
pub fn raw_strata(n: usize, m: usize, w: &WeightVector, max_components: usize) -> BTreeSet<CanonicalForm> {
    let partitions = set_partitions(n);
    let mut jobs = Vec::new();
    for k in 1..=max_components {
        for g in raw_graphs(k, m.max(1) + 1) {
            jobs.push((k, g));
        }
    }
    jobs.par_iter()
        .flat_map_iter(|(k, (genus, nodes, branches))| {
            let k = *k;
            let comps: Vec<Component> =
                genus.iter().enumerate().map(|(v, &g)| Component { id: ComponentId(v as u32), genus: g }).collect();
            let edges: Vec<NodeEdge> = nodes.iter().map(|&(a, b)| NodeEdge(ComponentId(a as u32), ComponentId(b as u32))).collect();
            let elliptic = (!branches.is_empty())
                .then(|| EllipticPoint { branches: branches.iter().map(|&b| ComponentId(b as u32)).collect() });
            let mut found = Vec::new();
            for part in &partitions {
                let blocks = part.iter().max().map_or(0, |&b| b + 1);
                let total = k.pow(blocks as u32);
                for code in 0..total {
                    let mut c = code;
                    let place: Vec<usize> = (0..blocks)
                        .map(|_| {
                            let v = c % k;
                            c /= k;
                            v
                        })
                        .collect();
                    let markings: Vec<Marking> = (0..n)
                        .map(|i| Marking {
                            index: i as u32 + 1,
                            component: ComponentId(place[part[i]] as u32),
                            slot: part[i] as u32,
                            weight: w.get(i as u32 + 1),
                        })
                        .collect();
                    let model = CurveModel::new(comps.clone(), edges.clone(), elliptic.clone(), markings).unwrap();
                    if !model.validate().is_valid() {
                        continue;
                    }
                    if is_mA_stable(&model, m, w).map(|r| r.stable).unwrap_or(false) {
                        found.push(model.canonical_form());
                    }
                }
            }
            found
        })
        .collect::<BTreeSet<_>>()
}

// ---------------------------------------------------------------- semistable tails

/// A rooted rational tree hanging below some component: marks at the root, then subtrees.
#[derive(Clone, Debug)]
struct RootedTree {
    size: usize,
    marks: u8,
    children: Vec<usize>,
}

/// All rooted decorated trees up to isomorphism, indexed so that children lists are
/// non-increasing; `semistable` asks the root to have two distinguished points counting
/// the edge to its parent.
struct TreeCatalogue {
    trees: Vec<RootedTree>,
    by_size: Vec<Vec<usize>>,
}

impl TreeCatalogue {
    fn new(max_size: usize, max_marks: u8) -> Self {
        let mut cat = TreeCatalogue { trees: Vec::new(), by_size: vec![Vec::new(); max_size + 1] };
        for size in 1..=max_size {
            let mut forests = Vec::new();
            cat.forests(size - 1, usize::MAX, &mut Vec::new(), &mut forests);
            for children in forests {
                for marks in 0..=max_marks {
                    if children.len() + marks as usize >= 1 {
                        cat.by_size[size].push(cat.trees.len());
                        cat.trees.push(RootedTree { size, marks, children: children.clone() });
                    }
                }
            }
        }
        cat
    }

    /// Multisets of trees of total size `total`, as non-increasing index lists bounded by `max`.
    fn forests(&self, total: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if total == 0 {
            out.push(cur.clone());
            return;
        }
        for s in 1..=total {
            for &t in &self.by_size[s] {
                if t > max {
                    continue;
                }
                cur.push(t);
                self.forests(total - s, t, cur, out);
                cur.pop();
            }
        }
    }
}

/// A generated tail with its known depths and attachment marks.
#[derive(Clone, Debug)]
pub struct GeneratedTail {
    pub curve: CurveModel,
    pub attach: Vec<AttachMark>,
    /// Distance to Z by construction, per component id.
    pub depth: BTreeMap<ComponentId, usize>,
}

struct TailBuilder {
    genus: Vec<u8>,
    nodes: Vec<(usize, usize)>,
    marks: Vec<u8>,
    depth: Vec<usize>,
}

impl TailBuilder {
    fn add(&mut self, genus: u8, marks: u8, depth: usize) -> usize {
        self.genus.push(genus);
        self.marks.push(marks);
        self.depth.push(depth);
        self.genus.len() - 1
    }

    fn graft(&mut self, cat: &TreeCatalogue, parent: usize, t: usize) {
        let tree = &cat.trees[t];
        let v = self.add(0, tree.marks, self.depth[parent] + 1);
        self.nodes.push((parent, v));
        for &c in &tree.children {
            self.graft(cat, v, c);
        }
    }

    fn finish(self) -> Option<GeneratedTail> {
        let comps: Vec<Component> =
            self.genus.iter().enumerate().map(|(v, &g)| Component { id: ComponentId(v as u32), genus: g }).collect();
        let nodes = self.nodes.iter().map(|&(a, b)| NodeEdge(ComponentId(a as u32), ComponentId(b as u32))).collect();
        let mut attach = Vec::new();
        for (v, &k) in self.marks.iter().enumerate() {
            for _ in 0..k {
                attach.push(AttachMark { component: ComponentId(v as u32), slot: attach.len() as u32 });
            }
        }
        if attach.is_empty() {
            return None;
        }
        let depth = self.depth.iter().enumerate().map(|(v, &d)| (ComponentId(v as u32), d)).collect();
        Some(GeneratedTail { curve: CurveModel::new(comps, nodes, None, Vec::new()).unwrap(), attach, depth })
    }
}

/// Decoration of a core component: its own marks plus a forest of trees.
fn decorations(cat: &TreeCatalogue, budget: usize, max_marks: u8) -> Vec<(usize, u8, Vec<usize>)> {
    let mut out = Vec::new();
    for size in 0..=budget {
        let mut forests = Vec::new();
        cat.forests(size, usize::MAX, &mut Vec::new(), &mut forests);
        for f in forests {
            for marks in 0..=max_marks {
                out.push((size, marks, f.clone()));
            }
        }
    }
    out
}

/// Every semistable tail with at most `max_components` components and at most `max_marks`
/// attachment marks per component, up to isomorphism: a smooth, irreducible nodal or ring
/// core with rational trees grafted on. Tails are streamed to `visit`.
pub fn for_each_tail(max_components: usize, max_marks: u8, mut visit: impl FnMut(GeneratedTail)) {
    let cat = TreeCatalogue::new(max_components.saturating_sub(1), max_marks);
    let decs = decorations(&cat, max_components - 1, max_marks);
    let single = |genus: u8, self_node: bool, d: &(usize, u8, Vec<usize>)| {
        let mut b = TailBuilder { genus: Vec::new(), nodes: Vec::new(), marks: Vec::new(), depth: Vec::new() };
        let z = b.add(genus, d.1, 0);
        if self_node {
            b.nodes.push((z, z));
        }
        for &t in &d.2 {
            b.graft(&cat, z, t);
        }
        b.finish()
    };
    for d in &decs {
        single(1, false, d).map(&mut visit);
        single(0, true, d).map(&mut visit);
    }
    for r in 2..=max_components {
        let budget = max_components - r;
        let usable: Vec<usize> = (0..decs.len()).filter(|&i| decs[i].0 <= budget).collect();
        let mut seq = Vec::new();
        ring_sequences(&usable, &decs, r, budget, &mut seq, &mut |s: &[usize]| {
            if !dihedral_minimal(s) {
                return;
            }
            let mut b = TailBuilder { genus: Vec::new(), nodes: Vec::new(), marks: Vec::new(), depth: Vec::new() };
            let ring: Vec<usize> = s.iter().map(|&i| b.add(0, decs[i].1, 0)).collect();
            for i in 0..r {
                b.nodes.push((ring[i], ring[(i + 1) % r]));
            }
            for (i, &di) in s.iter().enumerate() {
                for &t in &decs[di].2 {
                    b.graft(&cat, ring[i], t);
                }
            }
            b.finish().map(&mut visit);
        });
    }
}

pub fn all_tails(max_components: usize, max_marks: u8) -> Vec<GeneratedTail> {
    let mut out = Vec::new();
    for_each_tail(max_components, max_marks, |t| out.push(t));
    out
}

fn ring_sequences(
    usable: &[usize],
    decs: &[(usize, u8, Vec<usize>)],
    r: usize,
    budget: usize,
    cur: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]),
) {
    if cur.len() == r {
        emit(cur);
        return;
    }
    for &i in usable {
        // the first entry is the least under the dihedral order, so later ones are >= it
        if !cur.is_empty() && i < cur[0] {
            continue;
        }
        if decs[i].0 > budget {
            continue;
        }
        cur.push(i);
        ring_sequences(usable, decs, r, budget - decs[i].0, cur, emit);
        cur.pop();
    }
}

fn dihedral_minimal(s: &[usize]) -> bool {
    let r = s.len();
    for shift in 0..r {
        let rot: Vec<usize> = (0..r).map(|i| s[(i + shift) % r]).collect();
        let rev: Vec<usize> = (0..r).map(|i| s[(shift + r - i) % r]).collect();
        if rot.as_slice() < s || rev.as_slice() < s {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------- conservation

/// Arithmetic genus one, markings exactly 1..=n, and total weighted ω-degree Σ a_i.
pub fn conserved(fiber: &CurveModel, n: usize, w: &WeightVector) -> Result<(), String> {
    if !fiber.validate().is_valid() {
        return Err(format!("invalid fibre: {:?}", fiber.validate().violations));
    }
    if fiber.arithmetic_genus() != 1 {
        return Err(format!("arithmetic genus {}", fiber.arithmetic_genus()));
    }
    let idx: BTreeSet<u32> = fiber.markings().iter().map(|m| m.index).collect();
    if fiber.markings().len() != n || idx != (1..=n as u32).collect() {
        return Err(format!("markings {idx:?}"));
    }
    let total: Rational = fiber.component_ids().map(|c| fiber.omega_degree(c, Some(w)).unwrap()).sum();
    if total != w.total() {
        return Err(format!("total weighted degree {total} != {}", w.total()));
    }
    Ok(())
}
