//! Joint extraction of events and entities: pipeline CRFs for candidate
//! generation, a within-event factor model, an event-pair model and a
//! dual-decomposition decoder tying them together.

pub mod ad3;
pub mod cli;
pub mod container;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod event_pair;
pub mod features;
pub mod joint;
pub mod optim;
pub mod pipeline;
pub mod scalar;
pub mod schema;
pub mod synth;
pub mod within_event;

pub use error::{Error, Result};

/// Double-precision instantiations used by the pipeline.
pub type ChainModel64 = crf::ChainModel<f64>;
pub type JointProblem64 = ad3::JointProblem<f64>;
pub type JointSolution64 = ad3::JointSolution<f64>;
pub type EventGraph64 = within_event::EventGraph<f64>;
