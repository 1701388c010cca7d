//! Shadow estimators for higher-point OTOCs, evaluated as factorized
//! U-statistics.

pub mod observable;
pub mod protocols;
pub mod ustat;

pub use observable::{factorized_tuple_trace, CompiledObservable, ObservableSpec, Side};
pub use protocols::{
    commutator_observable, estimate_c4_mixed, estimate_c4k_multibell, estimate_c4k_single_bell,
    estimate_c8_mixed, estimate_commutator_type, estimate_l8_mixed, four_cycle_orderings,
    mixed_c4_observable, mixed_l8_observable, multibell_observable, single_bell_observable,
    EstimatorRecord, EstimatorResult,
};
pub use ustat::{two_sample_u_statistic, u_statistic, LabelMatrix, Mode, UStat};
