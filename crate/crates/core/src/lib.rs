//! Laboratory for scheduling control of unitary stochastic processing
//! networks near critical load.
//!
//! The crate provides, in rough dependency order:
//!
//! * [`lp`]: an exact-tolerance dense simplex solver and a brute-force
//!   vertex enumerator used as its oracle;
//! * [`network`]: the unitary network model and its structural analysis
//!   (nominal allocation, basic activities, drift and covariance of the
//!   free process);
//! * [`workload`]: workload matrix algebra and the effective cost
//!   function with its lifting map;
//! * [`primitives`]: reproducible interarrival/service/routing streams
//!   and renewal counting;
//! * [`policy`]: the admissible policy interface (deterministic maps
//!   from event history to a 0/1 activity allocation) plus built-ins;
//! * [`sim`]: the exact event-driven simulator;
//! * [`scaling`]: fluid/diffusion scaling, the free process, the time
//!   transformation and martingale diagnostics;
//! * [`cost`]: exact discounted-cost integration and Monte Carlo
//!   estimation;
//! * [`ewf`]: the one-dimensional workload value function (ODE and
//!   reflected-diffusion oracles) and the lower-bound check.

pub mod cost;
pub mod ewf;
pub mod lp;
pub mod network;
pub mod policy;
pub mod primitives;
pub mod scaling;
pub mod sim;
pub mod workload;

pub use cost::{monte_carlo_cost, pathwise_cost, CostConfig, CostEstimate};
pub use ewf::{ewf_value_1d, rbm_simulate, verify_lower_bound, Ewf1D, PiecewiseLinear};
pub use lp::{enumerate_vertices, solve_lp, LinearProgram, LpSolution, LpStatus};
pub use network::{
    heavy_traffic_analysis, routing_covariance, validate_topology, HeavyTrafficData, Instance,
    LimitParams, NetworkTopology, RoutingVector, SigmaConvention,
};
pub use policy::{builtin_policies, decide, Allocation, HistoryRecord, PolicySpec};
pub use primitives::{renewal_count, DistributionFamily, DistributionSpec, PrimitiveStreams};
pub use scaling::{
    event_counts, event_grid, identity_residuals, martingale_diagnostics, scale, time_transform,
    ScaledTrajectory,
};
pub use sim::{simulate, Trajectory};
pub use workload::{
    build_workload, check_effective_inequality, effective_cost, lift, WorkloadData, WorkloadSpec,
};
