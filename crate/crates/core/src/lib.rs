//! Purity and niche-impurity metrics for concept representations.
//!
//! The crate scores how much information about *other* concepts leaks into
//! each learned concept representation. It provides:
//!
//! * [`purity`]: purity matrices and the Oracle Impurity Score (OIS);
//! * [`niche`]: concept niches and the Niche Impurity Score (NIS);
//! * [`alignment`]: greedy matching of unsupervised representations to
//!   concepts;
//! * [`baselines`]: MIG and SAP;
//! * [`cbm`]: small joint concept bottleneck models for experiments;
//! * [`data`], [`io`], [`report`], [`experiments`]: generators, file
//!   formats and reproducible experiment runs.
//!
//! ```
//! use purity_core::data::{gen_correlated_concepts, gen_pure_reps};
//! use purity_core::purity::{ois, ProbeConfig};
//!
//! let concepts = gen_correlated_concepts(500, 3, 0.25, 7).unwrap();
//! let reps = gen_pure_reps(&concepts, 7).unwrap();
//! let score = ois(&reps, &concepts, &ProbeConfig::default(), 7).unwrap();
//! assert!(score < 0.15);
//! ```

pub mod alignment;
pub mod baselines;
pub mod cbm;
pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod niche;
pub mod numeric;
pub mod purity;
pub mod report;
pub mod rng;

pub use alignment::AlignmentMap;
pub use baselines::BaselineScores;
pub use cbm::{Bottleneck, CbmConfig, CbmModel, InterventionKind, InterventionPolicy};
pub use data::{ConceptDataset, Provenance, RepresentationSet};
pub use error::{Error, Result};
pub use niche::{NicheConfig, NicheReport};
pub use numeric::{Mlp, MlpSpec, TrainConfig};
pub use purity::{ProbeConfig, PurityMatrix};
pub use report::MetricReport;
