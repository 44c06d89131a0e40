//! Weighted non-backtracking spectral methods for non-uniform hypergraph
//! stochastic block models.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: probability tensors, signal/variance matrices, thresholds and
//!   the theoretical overlap and covariance constants.
//! * [`hypergraph`]: layered hypergraphs, oriented hyperedges, neighbourhoods.
//! * [`sampler`]: exact HSBM sampling and Galton–Watson hypertrees.
//! * [`operators`]: the non-backtracking operator `B`, edge reversal `J`, the
//!   reduced `2Kn × 2Kn` matrix, the Bethe–Hessian and the Ihara–Bass check.
//! * [`spectral`]: restarted Arnoldi, outlier detection, pseudo-eigenvectors.
//! * [`cluster`]: two-way reconstruction and the overlap metric.
//! * [`weights`]: layer weight selection.
//! * [`treecheck`]: Monte Carlo checks of tree functionals.
//!
//! With the default `parallel` feature the inner loops run on rayon. Every
//! reduction has a fixed order, so results are bit-identical with and without
//! the feature and at any thread count.

pub mod cluster;
pub mod dense;
pub mod error;
pub mod hypergraph;
pub mod io;
pub mod model;
pub mod operators;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod sparse;
pub mod spectral;
pub mod treecheck;
pub mod weights;

pub use error::{Error, Result};
pub use hypergraph::{Assignment, LayeredHypergraph, OrientedIndex};
pub use model::{LayerParams, ModelConfig, ModelParams, SpectralConstants, SymTensor};
