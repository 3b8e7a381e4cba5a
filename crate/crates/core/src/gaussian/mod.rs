//! Gaussian bosonic mode networks built from passive and active couplers.

mod coupler;
mod network;
mod scan;
mod state;
mod stats;
mod symplectic;

pub use coupler::{coupler_on, coupler_symplectic, CouplerKind, CouplerType};
pub use network::{
    network_evolve, total_photons, Coupler, Decoherence, ModeNetwork, NetworkRun, Stage,
};
pub use scan::{
    gain_scan, phase_sensitivity, rank_inputs, Crossing, Functional, GainScan, InputRanking,
    Nonclassicality, PhasePoint, ScanPoint, MARGIN_TOL, SCAN_COLUMNS,
};
pub use state::{omega, ComplexMoments, GaussianState, UNCERTAINTY_TOL};
pub use stats::{
    all_pairs, correlations, log_negativity, photon_statistics, CorrelationReport, MatrixJson,
    PairCorrelation, PhotonStatistics, CORRELATION_COLUMNS, CORRELATION_FLOOR, Q_FLOOR,
};
pub use symplectic::{SymplecticOp, SYMPLECTIC_TOL};
