//! Semistable tails: distances to `Z`, the balanced criterion, and the discrepancy divisor.
//!
//! The discrepancy `D = Σ d(F) F` is characterised by `ω(D)|_F` having degree zero on
//! every tail component together with `d(F) = 1` on components meeting the rest of the
//! fibre. [`discrepancy_solve`] solves that system exactly; [`discrepancy_closed_form`]
//! gives `d(F) = l + 1 − l(F, Z)` for balanced tails.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::decomposition::core_of;
use crate::error::ModelError;
use crate::linalg::{self, LinearOutcome};
use crate::model::{ComponentId, CurveModel, SlotId, Topo};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AttachMark {
    pub component: ComponentId,
    pub slot: SlotId,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tail curves carry attachment marks, not markings")]
    HasMarkings,
    #[error("tail curves are nodal")]
    HasEllipticPoint,
    #[error("a tail needs at least one attachment mark")]
    NoAttachMarks,
    #[error("attachment slot {0} used twice")]
    RepeatedAttachSlot(SlotId),
    #[error("rational component {component} has {count} distinguished points, at least 2 required")]
    NotSemistable { component: ComponentId, count: usize },
    #[error("unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("attachment marks sit at distances {distances:?} from Z")]
    Unbalanced { distances: Vec<usize> },
    #[error("divisor has coefficient on {0}, which is not a tail component")]
    Support(ComponentId),
    #[error("integer overflow while solving")]
    Overflow,
}

/// The exceptional curve of a semistable limit together with the points where it meets
/// the rest of the fibre.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemistableTail {
    curve: CurveModel,
    attach: Vec<AttachMark>,
    topo: Topo,
    distance: Vec<usize>,
    attach_count: Vec<usize>,
}

/// Integer coefficients `d(F)` on tail components.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct VerticalDivisor {
    pub coefficients: BTreeMap<ComponentId, i64>,
}

impl VerticalDivisor {
    pub fn get(&self, c: ComponentId) -> i64 {
        self.coefficients.get(&c).copied().unwrap_or(0)
    }
}

/// The equation responsible for infeasibility.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "equation", rename_all = "snake_case")]
pub enum Equation {
    DegreeZero { component: ComponentId },
    UnitOnAttachment { component: ComponentId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Infeasibility {
    /// The degree-zero equations force a value contradicting this equation.
    Inconsistent { equation: Equation },
    /// The unique rational solution is not integral.
    NonIntegral { component: ComponentId, value: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DiscrepancySolution {
    Feasible { divisor: VerticalDivisor },
    Infeasible { certificate: Infeasibility },
}

impl DiscrepancySolution {
    pub fn divisor(&self) -> Option<&VerticalDivisor> {
        match self {
            DiscrepancySolution::Feasible { divisor } => Some(divisor),
            DiscrepancySolution::Infeasible { .. } => None,
        }
    }
}

impl SemistableTail {
    pub fn new(curve: CurveModel, attach: Vec<AttachMark>) -> Result<Self, TailError> {
        if !curve.markings().is_empty() {
            return Err(TailError::HasMarkings);
        }
        if curve.elliptic().is_some() {
            return Err(TailError::HasEllipticPoint);
        }
        let report = curve.validate();
        if !report.is_valid() {
            return Err(ModelError::Invalid(report).into());
        }
        if attach.is_empty() {
            return Err(TailError::NoAttachMarks);
        }
        let mut attach_count = vec![0usize; curve.components().len()];
        let mut slots = Vec::new();
        for a in &attach {
            if slots.contains(&a.slot) {
                return Err(TailError::RepeatedAttachSlot(a.slot));
            }
            slots.push(a.slot);
            let p = curve.position(a.component).ok_or(TailError::UnknownComponent(a.component))?;
            attach_count[p] += 1;
        }
        let topo = curve.topo();
        for (v, c) in curve.components().iter().enumerate() {
            let d = topo.dist(v) + attach_count[v];
            if c.genus == 0 && d < 2 {
                return Err(TailError::NotSemistable { component: c.id, count: d });
            }
        }
        let (in_z, _) = core_of(&curve, &topo)?;
        let mut distance = vec![usize::MAX; topo.len()];
        let mut queue = VecDeque::new();
        for v in 0..topo.len() {
            if in_z[v] {
                distance[v] = 0;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &topo.adj[v] {
                if distance[u] == usize::MAX {
                    distance[u] = distance[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        Ok(SemistableTail { curve, attach, topo, distance, attach_count })
    }

    pub fn curve(&self) -> &CurveModel {
        &self.curve
    }

    pub fn attach(&self) -> &[AttachMark] {
        &self.attach
    }

    fn pos(&self, id: ComponentId) -> Result<usize, TailError> {
        self.curve.position(id).ok_or(TailError::UnknownComponent(id))
    }

    /// Graph distance `l(F, Z)`.
    pub fn distance_to_core(&self, component: ComponentId) -> Result<usize, TailError> {
        Ok(self.distance[self.pos(component)?])
    }

    fn attach_distances(&self) -> Vec<usize> {
        let mut d: Vec<usize> =
            self.attach.iter().map(|a| self.distance[self.curve.position(a.component).unwrap()]).collect();
        d.sort_unstable();
        d
    }

    pub fn is_balanced(&self) -> bool {
        let d = self.attach_distances();
        d.windows(2).all(|w| w[0] == w[1])
    }

    /// Branches of component `v` meeting the rest of the fibre.
    fn external(&self, v: usize) -> i64 {
        (self.topo.adj[v].len() + self.attach_count[v]) as i64
    }

    fn arithmetic_genus_of(&self, v: usize) -> i64 {
        self.curve.components()[v].genus as i64 + self.topo.self_nodes[v].len() as i64
    }
}

/// `d(F) = l + 1 − l(F, Z)` where `l` is the common distance of the attachment marks.
pub fn discrepancy_closed_form(tail: &SemistableTail) -> Result<VerticalDivisor, TailError> {
    if !tail.is_balanced() {
        return Err(TailError::Unbalanced { distances: tail.attach_distances() });
    }
    let l = tail.attach_distances()[0] as i64;
    let coefficients = tail
        .curve
        .component_ids()
        .zip(&tail.distance)
        .map(|(id, &d)| (id, l + 1 - d as i64))
        .collect();
    Ok(VerticalDivisor { coefficients })
}

/// Degree of `ω(D)` on `component`, on a regular total space with reduced special fibre:
/// `deg ω|_F = 2 p_a(F) − 2 − F·F`, `F·F = −(branches of F meeting the rest of the fibre)`,
/// attachment marks counting as intersections with the off-tail part, where `d = 0`.
pub fn degree_zero(tail: &SemistableTail, divisor: &VerticalDivisor, component: ComponentId) -> Result<i64, TailError> {
    for &c in divisor.coefficients.keys() {
        tail.pos(c).map_err(|_| TailError::Support(c))?;
    }
    let v = tail.pos(component)?;
    let ids: Vec<ComponentId> = tail.curve.component_ids().collect();
    let self_int = -tail.external(v);
    let omega = 2 * tail.arithmetic_genus_of(v) - 2 - self_int;
    let neighbours: i64 = tail.topo.adj[v].iter().map(|&(u, _)| divisor.get(ids[u])).sum();
    Ok(omega + neighbours + divisor.get(ids[v]) * self_int)
}

/// Solves the degree-zero equations, then checks `d(F) = 1` on every component carrying an
/// attachment mark. The degree-zero system alone is non-singular (negative definite), so
/// infeasibility is certified by the first attachment equation it contradicts.
pub fn discrepancy_solve(tail: &SemistableTail) -> Result<DiscrepancySolution, TailError> {
    let k = tail.topo.len();
    let ids: Vec<ComponentId> = tail.curve.component_ids().collect();
    let mut rows: Vec<Vec<i64>> = Vec::with_capacity(2 * k);
    let mut rhs = Vec::with_capacity(2 * k);
    let mut labels = Vec::with_capacity(2 * k);
    for v in 0..k {
        let mut row = vec![0i64; k];
        for &(u, _) in &tail.topo.adj[v] {
            row[u] += 1;
        }
        row[v] -= tail.external(v);
        rows.push(row);
        rhs.push(-(2 * tail.arithmetic_genus_of(v) - 2 + tail.external(v)));
        labels.push(Equation::DegreeZero { component: ids[v] });
    }
    for v in 0..k {
        if tail.attach_count[v] > 0 {
            let mut row = vec![0i64; k];
            row[v] = 1;
            rows.push(row);
            rhs.push(1);
            labels.push(Equation::UnitOnAttachment { component: ids[v] });
        }
    }
    let outcome = linalg::solve(&rows, &rhs).map_err(|_| TailError::Overflow)?;
    let solution = match outcome {
        LinearOutcome::Unique(x) => x,
        LinearOutcome::Inconsistent { row } => {
            return Ok(DiscrepancySolution::Infeasible {
                certificate: Infeasibility::Inconsistent { equation: labels[row].clone() },
            })
        }
        LinearOutcome::Underdetermined => unreachable!("degree-zero system is non-singular"),
    };
    let mut coefficients = BTreeMap::new();
    for (v, x) in solution.iter().enumerate() {
        if !x.is_integer() {
            return Ok(DiscrepancySolution::Infeasible {
                certificate: Infeasibility::NonIntegral { component: ids[v], value: x.to_string() },
            });
        }
        coefficients.insert(ids[v], *x.numer() as i64);
    }
    Ok(DiscrepancySolution::Feasible { divisor: VerticalDivisor { coefficients } })
}
