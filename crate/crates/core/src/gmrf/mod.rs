//! Model representation, validation, spectral analysis of `|R|`, potential
//! partitioning, random generation and the dense exact-inference oracle.

mod generate;
mod model;
mod oracle;
mod partition;
mod spectral;

pub use generate::{generate_model, LinearTerm, ModelSpec, SignMode, Structure, MAX_RESAMPLES};
pub(crate) use model::check_dense;
pub use model::{
    rescale_to_unit_diagonal, rescale_to_unit_diagonal_with_guard, validate_model, validate_model_with_guard,
    DirectedEdgeIndex, Edge, GmrfModel, Neighbor, SparseMatrix, DEFAULT_DENSE_GUARD,
};
pub use oracle::{exact_covariance, exact_marginals, exact_marginals_with_guard, exact_means};
pub use partition::{partition_potentials, EdgePartition, PartitionStrategy};
pub use spectral::{
    classify_boundedness, classify_boundedness_with_tolerance, spectral_analysis, spectral_analysis_with, Boundedness,
    BoundednessClass, PowerIterationOptions, SpectralReport, BOUNDARY_TOLERANCE,
};
