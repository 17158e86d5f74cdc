//! Graph Fourier transforms for directed graphs with indefinite (signed) or
//! complex edge weights.
//!
//! The transform basis is built against a directed-variation frequency
//! measure: IDV for signed real graphs, CDV for complex ones. Two builders
//! are provided: a greedy sign/phase selection over the eigenvectors of the
//! underlying undirected Laplacian, and a feasible gradient-descent method
//! that minimizes spectral dispersion while staying exactly on the manifold
//! of orthonormal matrices.
//!
//! Modules follow the pipeline: [`graph`] (data model and file formats via
//! [`io`]), [`variation`] (measures and gradients), [`spectral`] (underlying
//! Laplacian and eigendecomposition), [`basis`] (greedy and feasible
//! builders), [`gft`] (transforms and power spectra), and [`experiments`]
//! (random-graph studies).

pub mod basis;
pub mod error;
pub mod experiments;
pub mod gft;
pub mod graph;
pub mod io;
pub mod seeding;
pub mod spectral;
pub mod variation;

pub use error::{Error, Result};
pub use graph::{C64, DalesLawReport, Graph, GraphSignal, SignalSeries, ValueClass, WeightClass};
pub use variation::{FrequencyKind, VariationKind};
