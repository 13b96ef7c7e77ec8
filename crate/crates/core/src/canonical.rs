//! Canonical forms up to marked isomorphism.
//!
//! Colour refinement seeded with isomorphism-invariant vertex colours, then
//! individualisation of every vertex in the first non-singleton cell; the
//! lexicographically least leaf encoding is the canonical form.

use std::collections::BTreeMap;

use crate::model::{Component, ComponentId, CurveModel, EllipticPoint, Marking, NodeEdge, Topo};

/// Byte-comparable isomorphism invariant of a [`CurveModel`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm(Vec<u32>);

impl CanonicalForm {
    pub fn words(&self) -> &[u32] {
        &self.0
    }

    /// Big-endian bytes; byte order agrees with the `Ord` impl.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|w| w.to_be_bytes()).collect()
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Slot groups on each component: marking indices grouped by slot, each group sorted,
/// groups ordered by their least index.
fn slot_groups(model: &CurveModel, topo: &Topo) -> Vec<Vec<Vec<u32>>> {
    let marks = model.markings();
    (0..topo.len())
        .map(|c| {
            let mut by_slot: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
            for &mi in &topo.marks[c] {
                by_slot.entry(marks[mi].slot).or_default().push(marks[mi].index);
            }
            let mut groups: Vec<Vec<u32>> = by_slot
                .into_values()
                .map(|mut g| {
                    g.sort_unstable();
                    g
                })
                .collect();
            groups.sort();
            groups
        })
        .collect()
}

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let ranks = keys.iter().map(|k| sorted.binary_search(k).unwrap() as u32).collect();
    (ranks, sorted.len())
}

struct Search<'a> {
    model: &'a CurveModel,
    topo: &'a Topo,
    best: Option<(Vec<u32>, Vec<u32>)>,
}

impl Search<'_> {
    fn refine(&self, colors: &mut Vec<u32>) {
        let mut count = {
            let mut c = colors.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        loop {
            let keys: Vec<(u32, Vec<u32>)> = (0..colors.len())
                .map(|v| {
                    let mut nb: Vec<u32> = self.topo.adj[v].iter().map(|&(u, _)| colors[u]).collect();
                    nb.sort_unstable();
                    (colors[v], nb)
                })
                .collect();
            let (ranks, k) = dense_rank(&keys);
            *colors = ranks;
            if k == count {
                return;
            }
            count = k;
        }
    }

    fn encode(&self, pos: &[u32]) -> Vec<u32> {
        let k = pos.len();
        let mut order = vec![0usize; k];
        for (v, &p) in pos.iter().enumerate() {
            order[p as usize] = v;
        }
        let comps = self.model.components();
        let mut enc = vec![k as u32];
        for &v in &order {
            enc.push(comps[v].genus as u32);
            enc.push(self.topo.branch[v] as u32);
        }
        let mut pairs: Vec<(u32, u32)> = self
            .model
            .nodes()
            .iter()
            .map(|e| {
                let a = pos[self.model.position(e.0).unwrap()];
                let b = pos[self.model.position(e.1).unwrap()];
                (a.min(b), a.max(b))
            })
            .collect();
        pairs.sort_unstable();
        enc.push(pairs.len() as u32);
        for (a, b) in pairs {
            enc.push(a);
            enc.push(b);
        }
        let marks = self.model.markings();
        let mut rows: Vec<(u32, u32, u32)> = marks
            .iter()
            .map(|mk| {
                let rep = marks.iter().filter(|o| o.slot == mk.slot).map(|o| o.index).min().unwrap();
                (mk.index, pos[self.model.position(mk.component).unwrap()], rep)
            })
            .collect();
        rows.sort_unstable();
        enc.push(rows.len() as u32);
        for (i, c, r) in rows {
            enc.extend([i, c, r]);
        }
        enc
    }

    fn run(&mut self, mut colors: Vec<u32>) {
        self.refine(&mut colors);
        let k = colors.len();
        let mut sizes = vec![0usize; k];
        for &c in &colors {
            sizes[c as usize] += 1;
        }
        let Some(target) = sizes.iter().position(|&s| s > 1) else {
            let enc = self.encode(&colors);
            if self.best.as_ref().is_none_or(|(b, _)| enc < *b) {
                self.best = Some((enc, colors));
            }
            return;
        };
        let target = target as u32;
        for v in 0..k {
            if colors[v] != target {
                continue;
            }
            let next: Vec<u32> = (0..k)
                .map(|u| 2 * colors[u] + (colors[u] == target && u != v) as u32)
                .collect();
            self.run(dense_rank(&next).0);
        }
    }
}

/// Canonical encoding together with the canonical position of each component.
fn canonicalize(model: &CurveModel) -> (CanonicalForm, Vec<u32>) {
    let topo = model.topo();
    let groups = slot_groups(model, &topo);
    let keys: Vec<(u8, bool, usize, &Vec<Vec<u32>>)> = (0..topo.len())
        .map(|v| (model.components()[v].genus, topo.branch[v], topo.self_nodes[v].len(), &groups[v]))
        .collect();
    let (colors, _) = dense_rank(&keys);
    let mut search = Search { model, topo: &topo, best: None };
    if colors.is_empty() {
        return (CanonicalForm(search.encode(&[])), Vec::new());
    }
    search.run(colors);
    let (enc, pos) = search.best.expect("at least one leaf");
    (CanonicalForm(enc), pos)
}

impl CurveModel {
    pub fn canonical_form(&self) -> CanonicalForm {
        canonicalize(self).0
    }

    pub fn is_isomorphic(&self, other: &CurveModel) -> bool {
        self.components().len() == other.components().len()
            && self.nodes().len() == other.nodes().len()
            && self.n() == other.n()
            && self.canonical_form() == other.canonical_form()
    }

    /// Relabels the model canonically: component ids become canonical positions, slot ids
    /// become the least marking index in the slot, and all lists are sorted.
    pub fn canonical_model(&self) -> CurveModel {
        let (_, pos) = canonicalize(self);
        let id = |c: ComponentId| ComponentId(pos[self.position(c).unwrap()]);
        let mut components: Vec<Component> =
            self.components().iter().map(|c| Component { id: id(c.id), genus: c.genus }).collect();
        components.sort_by_key(|c| c.id);
        let mut nodes: Vec<NodeEdge> = self
            .nodes()
            .iter()
            .map(|e| {
                let (a, b) = (id(e.0), id(e.1));
                NodeEdge(a.min(b), a.max(b))
            })
            .collect();
        nodes.sort_by_key(|e| (e.0, e.1));
        let elliptic = self.elliptic().map(|p| {
            let mut branches: Vec<ComponentId> = p.branches.iter().map(|&b| id(b)).collect();
            branches.sort();
            EllipticPoint { branches }
        });
        let marks = self.markings();
        let mut markings: Vec<Marking> = marks
            .iter()
            .map(|mk| Marking {
                index: mk.index,
                component: id(mk.component),
                slot: marks.iter().filter(|o| o.slot == mk.slot).map(|o| o.index).min().unwrap(),
                weight: mk.weight,
            })
            .collect();
        markings.sort_by_key(|m| m.index);
        CurveModel::from_parts_unchecked(components, nodes, elliptic, markings)
    }
}
