//! Markovian traffic equilibrium with network GEV route choice.
//!
//! The crate is layered bottom-up: [`network`] holds graphs, demand and file
//! formats; [`algebra`] solves the expected-minimum-cost fixed point;
//! [`loading`] turns costs into flows; [`cost`] is the BPR model; [`primal`]
//! and [`dual`] solve the equilibrium problem.

pub mod algebra;
pub mod cost;
pub mod dual;
pub mod error;
pub mod loading;
pub mod network;
pub mod primal;
pub mod problem;
pub mod trace;

pub use algebra::{AlgebraKind, NgevParams, RouteModel};
pub use cost::BprModel;
pub use error::{Error, Result};
pub use loading::{FlowState, LoadMethod};
pub use network::{DemandTable, Graph, Network};
pub use problem::Problem;
