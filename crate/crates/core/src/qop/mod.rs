//! Operator algebra on labeled tensor-product spaces.
//!
//! Density matrices are vectorized column-major: `vec(ρ)[a + n·b] = ρ[a, b]`,
//! so `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

mod density;
mod operator;
mod space;
mod superop;

pub use density::{DensityMatrix, HERMITIAN_TOL, POSITIVITY_TOL, TRACE_TOL};
pub use operator::{destroy, ketbra, Ket, Operator};
pub use space::{Factor, HilbertSpace};
pub use superop::{dissipator_super, hamiltonian_super, kron, unvectorize, vectorize, SuperOperator};
