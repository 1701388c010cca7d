//! Randomized single-qubit Clifford measurements and classical shadows.

pub mod clifford;
pub mod io;
pub mod snapshot;

pub use clifford::{clifford_table, SingleQubitClifford};
pub use io::{load_shadow, read_shadow, save_shadow, write_shadow};
pub use snapshot::{
    build_shadow, sample_snapshot, snapshot_to_dense, PrepTag, Shadow, ShadowMeta, Snapshot,
    MAX_DENSE_SNAPSHOT_QUBITS, MAX_SAMPLED_QUBITS,
    StatePrep,
};
