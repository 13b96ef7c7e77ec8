//! m-stability and (m,A)-stability with itemised diagnostics.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{decompose_with, level_with};
use crate::error::ModelError;
use crate::model::{ComponentId, CurveModel, Rational, SlotId, WeightVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("m = {m} must satisfy 1 <= m < n = {n}")]
    BadM { m: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A violated stability clause, numbered (1)..(5).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum Failure {
    /// (1): the elliptic point has more than m branches.
    SingularityTooDeep { branches: usize, m: usize },
    /// (2): some connected genus-one subcurve (namely `Z`) has level at most m.
    LevelTooLow { level: usize, m: usize, witness: Vec<ComponentId> },
    /// (3): a component has too few distinguished points.
    TooFewDistinguished { component: ComponentId, count: usize, required: usize },
    /// (3): no elliptic branch component has three distinguished points.
    NoBranchWithThree { branches: Vec<ComponentId> },
    /// (4): coincident markings whose weights sum past 1 (with unit weights: any coincidence).
    CoincidentWeightExceeds { slot: SlotId, indices: Vec<u32>, sum: String },
    /// (5): ω_C(Σ a_i p_i) has non-positive degree on a component.
    NotAmple { component: ComponentId, degree: String },
}

impl Failure {
    pub fn clause(&self) -> u8 {
        match self {
            Failure::SingularityTooDeep { .. } => 1,
            Failure::LevelTooLow { .. } => 2,
            Failure::TooFewDistinguished { .. } | Failure::NoBranchWithThree { .. } => 3,
            Failure::CoincidentWeightExceeds { .. } => 4,
            Failure::NotAmple { .. } => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause ({}): ", self.clause())?;
        match self {
            Failure::SingularityTooDeep { branches, m } => {
                write!(f, "elliptic {branches}-fold point exceeds m = {m}")
            }
            Failure::LevelTooLow { level, m, .. } => write!(f, "level {level} <= m = {m}"),
            Failure::TooFewDistinguished { component, count, required } => {
                write!(f, "component {component} has {count} distinguished points, needs {required}")
            }
            Failure::NoBranchWithThree { .. } => {
                write!(f, "no elliptic branch component has 3 distinguished points")
            }
            Failure::CoincidentWeightExceeds { indices, sum, .. } => {
                write!(f, "coincident markings {indices:?} have weight sum {sum} > 1")
            }
            Failure::NotAmple { component, degree } => {
                write!(f, "weighted dualizing degree {degree} on {component} is not positive")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub failures: Vec<Failure>,
}

impl StabilityReport {
    fn from_failures(failures: Vec<Failure>) -> Self {
        StabilityReport { stable: failures.is_empty(), failures }
    }
}

fn check_m(model: &CurveModel, m: usize) -> Result<(), StabilityError> {
    let n = model.n();
    if m < 1 || m >= n {
        return Err(StabilityError::BadM { m, n });
    }
    Ok(())
}

fn clauses(model: &CurveModel, m: usize, weights: &WeightVector) -> Result<StabilityReport, StabilityError> {
    check_m(model, m)?;
    if weights.len() != model.n() {
        return Err(ModelError::WeightLength { expected: model.n(), found: weights.len() }.into());
    }
    let report = model.validate();
    if !report.is_valid() {
        return Err(ModelError::Invalid(report).into());
    }
    let topo = model.topo();
    let dec = decompose_with(model, &topo)?;
    let ids: Vec<ComponentId> = model.component_ids().collect();
    let mut failures = Vec::new();

    if let Some(p) = model.elliptic() {
        if p.len() > m {
            failures.push(Failure::SingularityTooDeep { branches: p.len(), m });
        }
    }

    let level = level_with(&topo, &dec, |v| dec.contains(ids[v]));
    if level <= m {
        failures.push(Failure::LevelTooLow { level, m, witness: dec.z_components.clone() });
    }

    let mut any_three = false;
    for (v, c) in model.components().iter().enumerate() {
        let d = topo.dist(v);
        if topo.branch[v] {
            any_three |= d >= 3;
            if d < 2 {
                failures.push(Failure::TooFewDistinguished { component: c.id, count: d, required: 2 });
            }
        } else if c.genus == 0 && d < 3 {
            failures.push(Failure::TooFewDistinguished { component: c.id, count: d, required: 3 });
        }
    }
    if let Some(p) = model.elliptic() {
        if !any_three {
            failures.push(Failure::NoBranchWithThree { branches: p.branches.clone() });
        }
    }

    let mut slots: BTreeMap<SlotId, Vec<u32>> = BTreeMap::new();
    for mk in model.markings() {
        slots.entry(mk.slot).or_default().push(mk.index);
    }
    for (slot, mut indices) in slots {
        indices.sort_unstable();
        let sum: Rational = indices.iter().map(|&i| weights.get(i)).sum();
        if sum > Rational::one() {
            failures.push(Failure::CoincidentWeightExceeds { slot, indices, sum: sum.to_string() });
        }
    }

    for c in model.components() {
        let deg = model.omega_degree(c.id, Some(weights))?;
        if deg <= Rational::zero() {
            failures.push(Failure::NotAmple { component: c.id, degree: deg.to_string() });
        }
    }
    Ok(StabilityReport::from_failures(failures))
}

/// m-stability: clauses (1)-(3) with every marking of weight 1 at a distinct point, so
/// clause (4) flags any coincidence. Clause (5) adds nothing at unit weight and is omitted.
pub fn is_m_stable(model: &CurveModel, m: usize) -> Result<StabilityReport, StabilityError> {
    let report = clauses(model, m, &WeightVector::unit(model.n()))?;
    Ok(StabilityReport::from_failures(report.failures.into_iter().filter(|f| f.clause() != 5).collect()))
}

/// (m,A)-stability: clauses (1)-(5).
#[allow(non_snake_case)]
pub fn is_mA_stable(model: &CurveModel, m: usize, weights: &WeightVector) -> Result<StabilityReport, StabilityError> {
    clauses(model, m, weights)
}

/// Dimension of the equisingular stratum: `Σ_{g=0}(dist − 3) + Σ_{g=1} dist`, plus `l − 1`
/// attaching parameters for an elliptic l-fold point.
pub fn stratum_dimension(model: &CurveModel) -> i64 {
    let topo = model.topo();
    let mut dim: i64 = model
        .components()
        .iter()
        .enumerate()
        .map(|(v, c)| if c.genus == 1 { topo.dist(v) as i64 } else { topo.dist(v) as i64 - 3 })
        .sum();
    if let Some(p) = model.elliptic() {
        dim += p.len() as i64 - 1;
    }
    dim
}
