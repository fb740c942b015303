//! Dense complex linear algebra and quantum-information primitives.

mod eigen;
mod matrix;
mod random;
mod state;

pub use eigen::{
    hermitian_eigen, hermitian_eigenvalues, kyfan_norm, min_eigenvalue, singular_values, top_eigenvector,
    HermitianEigen,
};
pub use matrix::{kron, kron_vec, ComplexMatrix};
pub use random::{
    haar_unitary, haar_vector, random_density, random_density_from, random_density_with_dims, sample_haar_unitary,
    simplex_weights, RandomStateSpec,
};
pub use state::{
    digits, embed_pad, embed_pad_pure, partial_trace, partial_transpose, permute_pure, permute_subsystems, strides,
    total_dim, von_neumann_entropy, DensityMatrix, PureState,
};
