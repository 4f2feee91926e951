//! Densities, Markov statistics, correlation and bifurcation analysis.

pub mod bifurcation;
pub mod correlation;
pub mod density;
pub mod markov;

pub use bifurcation::{bifurcation_diagram, write_bifurcation_csv, BifurcationColumn, BifurcationConfig};
pub use correlation::{autocorrelation, autocorrelation_csv};
pub use density::{
    empirical_density, empirical_density_of_map, four_step_model, fp_fixed_point, DensityHistogram,
    FourStepDensity, TransferOperator,
};
pub use markov::{
    bias_of, simulate_markov, transition_probs_analytic, transition_probs_numeric, BiasReport,
    MarkovModel, TransitionCounts,
};
