//! Gate-level circuit representation, dense state-vector simulation and the
//! rebase/counting passes everything else builds on.

mod circuit;
mod counts;
mod gate;
pub mod matrix;
mod rebase;
mod sim;

pub use circuit::{z_gates, QuantumCircuit, ResourceBox};
pub use counts::{count_nisq, rotation_t_cost, FtCounts, FtTracker, NisqCounts, NisqTracker};
pub use gate::{Gate, GateKind};
pub use rebase::{
    check_rebased, lower_to_rotations_clifford_t, rebase_tk1_cnot, toffoli_clifford_t,
    vchain_ancillas, vchain_toffolis,
};
pub use sim::{
    classical_eval, marginal_pmf, outcome_pmf, sample, simulate, simulate_with_limit, StateVector,
    DEFAULT_MAX_QUBITS,
};
