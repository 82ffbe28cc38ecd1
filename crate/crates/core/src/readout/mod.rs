//! Repeated-DEER measurement records: simulation, histogram fits,
//! correlation-based spin counting, heralding thresholds and reset policy.

pub mod correlation;
pub mod fidelity;
pub mod mixture;
pub mod model;
pub mod record;
pub mod relaxation;
pub mod reset;

pub use correlation::{correlation_c, enumerate_c, expected_c, expected_c_exact, static_c, CorrelationEstimate, PairKernel};
pub use fidelity::{
    init_readout_fidelity, optimize_counts, optimize_thresholds, FidelityMode, FidelityReport, InitPoint, PairCounts,
    ThresholdOptimization, ThresholdPolicy, ThresholdSearch,
};
pub use mixture::{fit_histogram_mixture, outcome_histogram, GaussianComponent, MixtureFit};
pub use model::{
    binomial_pmf, simulate_from, simulate_timetrace, simulate_traces, state_index, state_label, HitCalibration, ShotMixture,
    SpinReadoutModel, TraceModel, TrackedP1, P1_STATES,
};
pub use record::{Bin, MeasurementRecord, OutcomePairs, OutcomeRange, RegionSpec};
pub use relaxation::{relaxation_under_readout, RelaxationData, RelaxationFit};
pub use reset::{best_cell, optimize_reset_policy, reset_cell, ResetCell, ResetPolicyMap, ResetProblem};
