//! Simulation lab: synthetic DGPs with known truths, Monte Carlo welfare
//! oracles, regret experiments and orthogonality probes.

mod dgp;
mod oracle;
mod probe;
mod regret;

pub use dgp::{
    draw_sample, oracle_linear_nuisances, oracle_pair_nuisances, CovariateLaw, DgpSpec,
    DrawnSample, MeanFn, ParentalLink, PropensityFn, Truth,
};
pub use oracle::{
    gini_welfare_sorted, kendall_tau_fast, oracle_kendall_tau, oracle_welfare,
    oracle_welfare_batch, OracleEstimate,
};
pub use probe::{orthogonality_probe, probe_experiment, Perturbation, PerturbTarget, ProbeCurve};
pub use regret::{regret_experiment, RegretConfig, RegretCurve, RegretPoint, RegretRow};
