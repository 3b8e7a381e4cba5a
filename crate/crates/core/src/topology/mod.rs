//! Band topology of homogeneous walks and edge states at domain walls.

mod bloch;
mod edge;
mod invariants;

pub use bloch::{bloch_decompose, bloch_from_matrices, k_grid, momentum_step, BlochData, GAP_EPS};
pub use edge::{
    boundary_walk_experiment, domain_walls, edge_overlap, find_edge_states, window_sites,
    BoundaryWalk, EdgeCertificate, EdgeOptions, EdgeState,
};
pub use invariants::{
    cell_centre, fit_chiral_axis, phase_diagram, symmetry_check, symmetry_flags, topology_report,
    winding_number, PhaseCell, PhaseDiagram, SymmetryFlags, TopologyReport, CHIRAL_TOL, MIN_GAP,
    PHASE_DIAGRAM_COLUMNS, SYMMETRY_TOL, WINDING_TOL,
};
