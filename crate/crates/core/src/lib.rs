//! Combinatorics of m-stable and (m,A)-stable pointed genus-one curves: dual-graph
//! models, minimal elliptic subcurves and levels, stability checks, semistable tails,
//! stable-limit degenerations and enumeration of equisingular strata.
//!
//! All arithmetic is exact.

pub mod canonical;
pub mod decomposition;
pub mod degeneration;
pub mod enumeration;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod stability;
pub mod tails;

pub use canonical::CanonicalForm;
pub use decomposition::{level, level_minimality_check, minimal_elliptic_subcurve, Decomposition, ZKind};
pub use degeneration::{
    base_change, blow_up_marking, contract_elliptic, insert_chain, stabilize, stable_limit, stable_limit_traced,
    weighted_reduce, weighted_reduce_traced, DegenerationError, DegenerationModel, Move,
};
pub use enumeration::{build_poset, enumerate_strata, specializes, EnumerationConfig, SpecializationEdge, Stratum};
pub use error::ModelError;
pub use model::{Component, ComponentId, CurveModel, EllipticPoint, Marking, NodeEdge, Rational, WeightVector};
pub use stability::{is_mA_stable, is_m_stable, stratum_dimension, Failure, StabilityReport};
pub use tails::{discrepancy_closed_form, discrepancy_solve, AttachMark, SemistableTail, VerticalDivisor};
