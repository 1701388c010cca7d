//! Dense linear algebra, Pauli strings, permutation operators and
//! Weingarten calculus.

pub mod dense;
pub mod haar;
pub mod pauli;
pub mod permutation;
pub mod weingarten;

pub use dense::{kron, kron_all, DenseOperator, StateVector};
pub use haar::haar_unitary;
pub use pauli::{pauli_matrix, Mat2, Pauli, PauliString};
pub use permutation::{
    all_permutations, derangements, permutation_operator, trace_with_permutation, Permutation,
};
pub use weingarten::{weingarten_matrix, weingarten_row_sum, WeingartenMatrix};
