//! Causal discovery for causal additive models with unobserved variables.
//!
//! The engine infers two kinds of edges from i.i.d. observational data:
//! directed edges for identifiable direct causes, and dashed undirected
//! edges for pairs whose relation is masked by an unobserved causal path or
//! an unobserved backdoor path. Around it sit a GAM regressor, an HSIC
//! independence test, a synthetic-data generator and an evaluation harness.
//!
//! ```no_run
//! use camuv::{dataset, discovery};
//!
//! let data = dataset::load_csv("data.csv")?.standardize()?;
//! let (graph, trace) = discovery::discover(&data, &discovery::Config::default())?;
//! println!("{} directed edges, {} tests", graph.directed_edges().len(), trace.hsic_count);
//! # Ok::<(), camuv::Error>(())
//! ```

pub mod cli;
pub mod dataset;
pub mod discovery;
mod error;
pub mod eval;
pub mod gam;
pub mod hsic;
pub mod rng;
pub mod synth;

pub use dataset::DataMatrix;
pub use discovery::{CausalGraph, Config, DiscoveryTrace};
pub use error::{Error, Result};
pub use gam::GamModel;
pub use hsic::HsicResult;
