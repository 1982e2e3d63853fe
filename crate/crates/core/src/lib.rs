//! Adaptive low-rank solvers for high-dimensional operator equations in
//! hierarchical Tucker format over multiwavelet coordinates.
//!
//! The crate is organized bottom-up:
//!
//! * [`tree`], [`index`], [`ht`]: dimension trees, sparse mode frames, the
//!   hierarchical Tucker representation with HSVD and truncation.
//! * [`reduce`]: rank recompression, contractions and product-set coarsening.
//! * [`alpert`]: order-p multiwavelets, the Volterra operator and the
//!   experiment right-hand side in that basis.
//! * [`ops`]: low-rank operators with compressible factors, adaptive
//!   application and right-hand-side assembly.
//! * [`solver`]: the perturbed Richardson iteration with operation counting.
//! * [`experiment`]: configuration, runs, diagnostics and data output.
//! * [`io`]: JSON files for representations.

pub mod alpert;
pub mod error;
pub mod experiment;
pub mod ht;
pub mod index;
pub mod io;
pub mod linalg;
pub mod opcount;
pub mod ops;
pub mod reduce;
pub mod solver;
pub mod tree;

pub use error::{HtError, Result};
pub use ht::{DenseTensor, HtRep, ModeFrame, RankVector, RepKind};
pub use index::{SparseModeVector, WaveletIndex};
pub use opcount::{OpCounter, OpEvent};
pub use tree::{DimensionTree, TreeShape};
