//! Cramér-type moderate-deviation bounds for functionals of Rademacher
//! sequences, together with the machinery needed to check them.
//!
//! The crate is organised around one exact oracle and several consumers:
//!
//! * [`walsh`] represents a functional of finitely many Rademacher variables
//!   by its chaos (Walsh) expansion and implements the discrete gradient,
//!   divergence and Ornstein–Uhlenbeck operators exactly.
//! * [`gaussian`] provides the standard normal tail with relative accuracy and
//!   the Stein solution `f_z`.
//! * [`mdp`] turns a pair of `γ` envelopes into the general moderate-deviation
//!   bound and the moment generating function bound.
//! * [`tworuns`] and [`subgraph`] instantiate the bounds for weighted 2-runs and
//!   for subgraph counts in `G(n, p)`.
//! * [`mc`] estimates tail ratios and moment generating functions by Monte
//!   Carlo with reproducible, thread-count independent streams.
//! * [`verify`] bundles the property suites run by the command-line front-end.

pub mod error;
pub mod gaussian;
pub mod mc;
pub mod mdp;
pub mod numeric;
pub mod report;
pub mod subgraph;
pub mod tworuns;
pub mod verify;
pub mod walsh;

pub use error::{Error, Result};
pub use gaussian::NormalKernel;
pub use mc::{McConfig, MgfEstimate, Sampler, TailEstimate};
pub use mdp::{BoundReport, GammaEnvelope, TheoremForm};
pub use subgraph::{CopyCatalog, PatternGraph, SubgraphBoundInputs};
pub use tworuns::{CoefficientSequence, GammaConstants, TwoRunsModel};
pub use walsh::{CoordinateField, RademacherSpace, WalshFunctional};
