//! The unitary network model and its heavy-traffic structural analysis.
//!
//! A network couples buffers and servers through activities: each activity
//! processes one buffer on one server (one 1 per column of both
//! constituency matrices). The structural analysis solves the allocation
//! program
//!
//! ```text
//! minimize rho   s.t.   R x = alpha,  A x <= rho e,  x >= 0
//! ```
//!
//! and accepts the instance when the optimum is unique with rho* = 1 and
//! A x* = e. Activities are then relabeled basic-first, and the analysis
//! assembles the input-output matrix R, the idleness map K, the limit
//! drift theta and the covariance Sigma of the free process.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::primitives::{DistributionSpec, PrimitiveStreams, PrimitivesError};

pub const HT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("topology invalid:\n{0}")]
    InvalidTopology(String),
    #[error("limit parameters invalid: {0}")]
    InvalidLimits(String),
    #[error("allocation program infeasible: no feasible allocation meets the arrival rates")]
    InfeasibleTraffic,
    #[error("not heavy traffic: rho* = {rho_star}, max |Ax* - e| = {utilization_gap}")]
    NotHeavyTraffic { rho_star: f64, utilization_gap: f64 },
    #[error("allocation program has multiple optima; heavy traffic requires uniqueness")]
    NonUniqueAllocation,
    #[error("routing vector not sub-stochastic: {0}")]
    NotStochastic(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Primitives(#[from] PrimitivesError),
}

/// Routing of jobs finished by one activity: probability `exit` of leaving
/// plus per-buffer reroute probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingVector {
    pub exit: f64,
    pub to: Vec<f64>,
}

impl RoutingVector {
    pub fn all_exit(num_buffers: usize) -> Self {
        RoutingVector {
            exit: 1.0,
            to: vec![0.0; num_buffers],
        }
    }

    pub fn total(&self) -> f64 {
        self.exit + self.to.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub num_buffers: usize,
    pub num_servers: usize,
    pub num_activities: usize,
    /// Buffers `1..=num_exogenous` receive outside arrivals.
    pub num_exogenous: usize,
    /// C: one row per buffer, one column per activity.
    pub constituency_buffers: DMatrix<f64>,
    /// A: one row per server, one column per activity.
    pub constituency_servers: DMatrix<f64>,
    pub routing: Vec<RoutingVector>,
}

impl NetworkTopology {
    /// Build from (buffer, server) pairs, both 1-based, one per activity.
    pub fn from_activities(
        num_buffers: usize,
        num_servers: usize,
        num_exogenous: usize,
        activities: &[(usize, usize)],
        routing: Vec<RoutingVector>,
    ) -> Self {
        let j = activities.len();
        let mut c = DMatrix::zeros(num_buffers, j);
        let mut a = DMatrix::zeros(num_servers, j);
        for (col, &(buf, srv)) in activities.iter().enumerate() {
            c[(buf - 1, col)] = 1.0;
            a[(srv - 1, col)] = 1.0;
        }
        NetworkTopology {
            num_buffers,
            num_servers,
            num_activities: j,
            num_exogenous,
            constituency_buffers: c,
            constituency_servers: a,
            routing,
        }
    }

    pub fn from_matrices(
        constituency_buffers: DMatrix<f64>,
        constituency_servers: DMatrix<f64>,
        routing: Vec<RoutingVector>,
        num_exogenous: usize,
    ) -> Self {
        NetworkTopology {
            num_buffers: constituency_buffers.nrows(),
            num_servers: constituency_servers.nrows(),
            num_activities: constituency_buffers.ncols(),
            num_exogenous,
            constituency_buffers,
            constituency_servers,
            routing,
        }
    }

    /// The buffer served by activity `j` (0-based), assuming a valid column.
    pub fn buffer_of(&self, j: usize) -> usize {
        (0..self.num_buffers)
            .find(|&i| self.constituency_buffers[(i, j)] != 0.0)
            .expect("activity serves a buffer")
    }

    pub fn server_of(&self, j: usize) -> usize {
        (0..self.num_servers)
            .find(|&k| self.constituency_servers[(k, j)] != 0.0)
            .expect("activity runs on a server")
    }

    /// Activities (0-based) that serve buffer `i` (0-based).
    pub fn activities_of_buffer(&self, i: usize) -> Vec<usize> {
        (0..self.num_activities)
            .filter(|&j| self.constituency_buffers[(i, j)] != 0.0)
            .collect()
    }

    /// P' with entries p_i^j (reroute probabilities, exits excluded).
    pub fn routing_matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.num_buffers, self.num_activities);
        for (j, rv) in self.routing.iter().enumerate() {
            for i in 0..self.num_buffers {
                p[(i, j)] = rv.to[i];
            }
        }
        p
    }

    /// Topology with activity columns reordered by `perm` (perm[new] = old).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut c = DMatrix::zeros(self.num_buffers, self.num_activities);
        let mut a = DMatrix::zeros(self.num_servers, self.num_activities);
        let mut routing = Vec::with_capacity(self.num_activities);
        for (new, &old) in perm.iter().enumerate() {
            c.set_column(new, &self.constituency_buffers.column(old));
            a.set_column(new, &self.constituency_servers.column(old));
            routing.push(self.routing[old].clone());
        }
        NetworkTopology {
            constituency_buffers: c,
            constituency_servers: a,
            routing,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every structural invariant of the topology; failures are listed
/// rather than raised.
pub fn validate_topology(t: &NetworkTopology) -> ValidationReport {
    let mut v = Vec::new();
    let (i_n, k_n, j_n) = (t.num_buffers, t.num_servers, t.num_activities);
    if t.constituency_buffers.nrows() != i_n
        || t.constituency_buffers.ncols() != j_n
        || t.constituency_servers.nrows() != k_n
        || t.constituency_servers.ncols() != j_n
    {
        v.push("constituency matrix dimensions inconsistent".into());
    } else {
        for j in 0..j_n {
            let ones = t.constituency_buffers.column(j).iter().filter(|&&x| x == 1.0).count();
            let nonzero = t.constituency_buffers.column(j).iter().filter(|&&x| x != 0.0).count();
            if ones != 1 || nonzero != 1 {
                v.push(format!("activity {} serves no single buffer", j + 1));
            }
            let ones = t.constituency_servers.column(j).iter().filter(|&&x| x == 1.0).count();
            let nonzero = t.constituency_servers.column(j).iter().filter(|&&x| x != 0.0).count();
            if ones != 1 || nonzero != 1 {
                v.push(format!("activity {} runs on no single server", j + 1));
            }
        }
        for i in 0..i_n {
            if t.constituency_buffers.row(i).iter().all(|&x| x == 0.0) {
                v.push(format!("buffer {} is served by no activity", i + 1));
            }
        }
        for k in 0..k_n {
            if t.constituency_servers.row(k).iter().all(|&x| x == 0.0) {
                v.push(format!("server {} runs no activity", k + 1));
            }
        }
    }
    if t.routing.len() != j_n {
        v.push(format!("expected {} routing vectors, got {}", j_n, t.routing.len()));
    }
    for (j, rv) in t.routing.iter().enumerate() {
        if rv.to.len() != i_n {
            v.push(format!("routing vector {} has wrong length", j + 1));
            continue;
        }
        if rv.exit < 0.0 || rv.to.iter().any(|&p| p < 0.0) {
            v.push(format!("routing vector {} has a negative entry", j + 1));
        }
        if (rv.total() - 1.0).abs() > 1e-12 {
            v.push(format!(
                "routing vector {} not stochastic (sums to {})",
                j + 1,
                rv.total()
            ));
        }
    }
    if t.num_exogenous == 0 || t.num_exogenous > i_n {
        v.push(format!(
            "exogenous buffer count {} outside 1..={}",
            t.num_exogenous, i_n
        ));
    }
    ValidationReport { violations: v }
}

/// Limit rates and first-order perturbations of the r-sequence:
/// alpha^r = alpha + theta1 / r and beta^r = beta + theta2 / r, exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitParams {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub sigma_u: DVector<f64>,
    pub sigma_v: DVector<f64>,
    pub theta1: DVector<f64>,
    pub theta2: DVector<f64>,
    pub q0: DVector<f64>,
}

impl LimitParams {
    pub fn validate(&self, t: &NetworkTopology) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidLimits(m));
        let i_n = t.num_buffers;
        let j_n = t.num_activities;
        for (name, v, len) in [
            ("alpha", &self.alpha, i_n),
            ("sigma_u", &self.sigma_u, i_n),
            ("theta1", &self.theta1, i_n),
            ("q0", &self.q0, i_n),
            ("beta", &self.beta, j_n),
            ("sigma_v", &self.sigma_v, j_n),
            ("theta2", &self.theta2, j_n),
        ] {
            if v.len() != len {
                return bad(format!("{name} must have length {len}, got {}", v.len()));
            }
        }
        for i in 0..i_n {
            if i < t.num_exogenous {
                if self.alpha[i].is_nan() || self.alpha[i] <= 0.0 {
                    return bad(format!("alpha[{}] must be > 0 for an exogenous buffer", i + 1));
                }
            } else if self.alpha[i] != 0.0 || self.sigma_u[i] != 0.0 || self.theta1[i] != 0.0 {
                return bad(format!(
                    "buffer {} has no exogenous arrivals; alpha, sigma_u, theta1 must be 0",
                    i + 1
                ));
            }
        }
        if self.beta.iter().any(|&b| b.is_nan() || b <= 0.0) {
            return bad("beta must be strictly positive".into());
        }
        if self.sigma_v.iter().any(|&s| s < 0.0) || self.sigma_u.iter().any(|&s| s < 0.0) {
            return bad("standard deviations must be nonnegative".into());
        }
        if self.q0.iter().any(|&q| q < 0.0) {
            return bad("q0 must be nonnegative".into());
        }
        Ok(())
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &DVector<f64>| {
            DVector::from_iterator(perm.len(), perm.iter().map(|&old| v[old]))
        };
        LimitParams {
            beta: pick(&self.beta),
            sigma_v: pick(&self.sigma_v),
            theta2: pick(&self.theta2),
            ..self.clone()
        }
    }

    /// (alpha^r, beta^r) for scaling index r.
    pub fn rates_at(&self, r: f64) -> (DVector<f64>, DVector<f64>) {
        let a = &self.alpha + &self.theta1 / r;
        let b = &self.beta + &self.theta2 / r;
        (a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaConvention {
    /// Renewal-FCLT variance parameters alpha^3 sigma_u^2 and
    /// beta^3 sigma_v^2 (validated empirically; the default).
    #[default]
    Classical,
    /// Raw squared standard deviations, as the covariance formula reads.
    Literal,
}

/// Multinomial routing covariance over the buffers: diagonal p(1-p),
/// off-diagonal -p p'.
pub fn routing_covariance(p: &[f64]) -> Result<DMatrix<f64>, NetworkError> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|&v| v < 0.0) || total > 1.0 + 1e-12 {
        return Err(NetworkError::NotStochastic(format!(
            "probabilities {p:?} (sum {total})"
        )));
    }
    let n = p.len();
    let mut m = DMatrix::zeros(n, n);
    for i1 in 0..n {
        for i2 in 0..n {
            m[(i1, i2)] = if i1 == i2 {
                p[i1] * (1.0 - p[i1])
            } else {
                -p[i1] * p[i2]
            };
        }
    }
    Ok(m)
}

/// Output of the structural analysis, with activities relabeled so the
/// basic ones come first. `perm[new] = old` records the relabeling; all
/// matrices and the embedded topology/limits use the new order.
#[derive(Debug, Clone)]
pub struct HeavyTrafficData {
    pub topology: NetworkTopology,
    pub limits: LimitParams,
    pub perm: Vec<usize>,
    pub x_star: DVector<f64>,
    pub rho_star: f64,
    pub basic_count: usize,
    /// Original (pre-relabeling) 1-based labels of the basic activities.
    pub basic_set: Vec<usize>,
    pub r_mat: DMatrix<f64>,
    pub k_mat: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_phi: Vec<DMatrix<f64>>,
    pub convention: SigmaConvention,
    /// True when rho* = 1 and Ax* = e held (the Instance construction
    /// path can bypass the gate for mechanics-only simulations).
    pub heavy_traffic: bool,
}

impl HeavyTrafficData {
    /// Dimension of the idleness/deviation process U: K + J - B.
    pub fn u_dim(&self) -> usize {
        self.topology.num_servers + self.topology.num_activities - self.basic_count
    }
}

pub fn heavy_traffic_analysis(
    t: &NetworkTopology,
    lim: &LimitParams,
    convention: SigmaConvention,
) -> Result<HeavyTrafficData, NetworkError> {
    analyze(t, lim, convention, true)
}

fn analyze(
    t: &NetworkTopology,
    lim: &LimitParams,
    convention: SigmaConvention,
    require_heavy_traffic: bool,
) -> Result<HeavyTrafficData, NetworkError> {
    let report = validate_topology(t);
    if !report.passed() {
        return Err(NetworkError::InvalidTopology(report.violations.join("\n")));
    }
    lim.validate(t)?;

    let i_n = t.num_buffers;
    let k_n = t.num_servers;
    let j_n = t.num_activities;

    let c = &t.constituency_buffers;
    let a = &t.constituency_servers;
    let p_mat = t.routing_matrix();
    let r_mat_orig = (c - &p_mat) * DMatrix::from_diagonal(&lim.beta);

    // Allocation program over (x, rho).
    let mut obj = vec![0.0; j_n + 1];
    obj[j_n] = 1.0;
    let mut lp = LinearProgram::minimize(&obj);
    for i in 0..i_n {
        let mut row: Vec<f64> = r_mat_orig.row(i).iter().copied().collect();
        row.push(0.0);
        lp = lp.eq(&row, lim.alpha[i]);
    }
    for k in 0..k_n {
        let mut row: Vec<f64> = a.row(k).iter().copied().collect();
        row.push(-1.0);
        lp = lp.ub(&row, 0.0);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Infeasible => return Err(NetworkError::InfeasibleTraffic),
        LpStatus::Unbounded => return Err(NetworkError::InfeasibleTraffic),
        LpStatus::Optimal => {}
    }
    let rho_star = sol.value;
    let x_orig = DVector::from_iterator(j_n, (0..j_n).map(|j| sol.point[j]));
    let util_gap = (a * &x_orig)
        .iter()
        .map(|&u| (u - 1.0).abs())
        .fold(0.0, f64::max);
    let is_ht = (rho_star - 1.0).abs() <= HT_TOL && util_gap <= HT_TOL;
    if require_heavy_traffic {
        if !is_ht {
            return Err(NetworkError::NotHeavyTraffic {
                rho_star,
                utilization_gap: util_gap,
            });
        }
        if !sol.is_unique {
            return Err(NetworkError::NonUniqueAllocation);
        }
    }

    // Relabel activities basic-first, preserving relative order.
    let basic: Vec<usize> = (0..j_n).filter(|&j| x_orig[j] > HT_TOL).collect();
    let nonbasic: Vec<usize> = (0..j_n).filter(|&j| x_orig[j] <= HT_TOL).collect();
    let b_n = basic.len();
    let perm: Vec<usize> = basic.iter().chain(nonbasic.iter()).copied().collect();
    let basic_set: Vec<usize> = basic.iter().map(|&j| j + 1).collect();

    let topology = t.permuted(&perm);
    let limits = lim.permuted(&perm);
    let x_star = DVector::from_iterator(j_n, perm.iter().map(|&old| x_orig[old]));

    let c = &topology.constituency_buffers;
    let a = &topology.constituency_servers;
    let p_mat = topology.routing_matrix();
    let c_minus_p = c - &p_mat;
    let r_mat = &c_minus_p * DMatrix::from_diagonal(&limits.beta);

    // K = [B N; 0 -I] with A = [B : N] in the relabeled order.
    let u_dim = k_n + j_n - b_n;
    let mut k_mat = DMatrix::zeros(u_dim, j_n);
    k_mat.view_mut((0, 0), (k_n, j_n)).copy_from(a);
    for (row, col) in (0..j_n - b_n).map(|m| (k_n + m, b_n + m)) {
        k_mat[(row, col)] = -1.0;
    }

    let theta = &limits.theta1 - &c_minus_p * DMatrix::from_diagonal(&limits.theta2) * &x_star;

    let sigma_phi: Vec<DMatrix<f64>> = topology
        .routing
        .iter()
        .map(|rv| routing_covariance(&rv.to))
        .collect::<Result<_, _>>()?;

    let (sigma_u_diag, sigma_v_diag): (DVector<f64>, DVector<f64>) = match convention {
        SigmaConvention::Classical => (
            DVector::from_iterator(
                i_n,
                (0..i_n).map(|i| limits.alpha[i].powi(3) * limits.sigma_u[i].powi(2)),
            ),
            DVector::from_iterator(
                j_n,
                (0..j_n).map(|j| limits.beta[j].powi(3) * limits.sigma_v[j].powi(2)),
            ),
        ),
        SigmaConvention::Literal => (
            limits.sigma_u.component_mul(&limits.sigma_u),
            limits.sigma_v.component_mul(&limits.sigma_v),
        ),
    };
    let mut sigma = DMatrix::from_diagonal(&sigma_u_diag)
        + &c_minus_p
            * DMatrix::from_diagonal(&sigma_v_diag.component_mul(&x_star))
            * c_minus_p.transpose();
    for (j, sp) in sigma_phi.iter().enumerate() {
        sigma += sp * (limits.beta[j] * x_star[j]);
    }
    // Symmetrize away float noise, then certify PSD.
    sigma = (&sigma + sigma.transpose()) * 0.5;
    let eig = sigma.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&ev| ev < -HT_TOL) {
        return Err(NetworkError::InvalidLimits(format!(
            "covariance matrix not PSD (min eigenvalue {})",
            eig.eigenvalues.min()
        )));
    }

    Ok(HeavyTrafficData {
        topology,
        limits,
        perm,
        x_star,
        rho_star,
        basic_count: b_n,
        basic_set,
        r_mat,
        k_mat,
        theta,
        sigma,
        sigma_phi,
        convention,
        heavy_traffic: is_ht,
    })
}

/// A fully analyzed network bundled with the limit laws that generate its
/// primitives. Service specs are stored in the relabeled activity order.
#[derive(Debug, Clone)]
pub struct Instance {
    pub htd: HeavyTrafficData,
    pub arrival_specs: Vec<DistributionSpec>,
    pub service_specs: Vec<DistributionSpec>,
}

impl Instance {
    /// Analyze and bundle; errors unless the instance is in heavy traffic.
    pub fn build(
        topology: &NetworkTopology,
        arrival_specs: Vec<DistributionSpec>,
        service_specs: Vec<DistributionSpec>,
        theta1: DVector<f64>,
        theta2: DVector<f64>,
        q0: DVector<f64>,
        convention: SigmaConvention,
    ) -> Result<Self, NetworkError> {
        Self::construct(
            topology, arrival_specs, service_specs, theta1, theta2, q0, convention, true,
        )
    }

    /// Analyze without the rho* = 1 / uniqueness gate. Event mechanics and
    /// the raw state identities hold on such instances, but the scaled
    /// idleness identities and everything downstream of them presume heavy
    /// traffic.
    pub fn build_unchecked(
        topology: &NetworkTopology,
        arrival_specs: Vec<DistributionSpec>,
        service_specs: Vec<DistributionSpec>,
        theta1: DVector<f64>,
        theta2: DVector<f64>,
        q0: DVector<f64>,
        convention: SigmaConvention,
    ) -> Result<Self, NetworkError> {
        Self::construct(
            topology, arrival_specs, service_specs, theta1, theta2, q0, convention, false,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn construct(
        topology: &NetworkTopology,
        arrival_specs: Vec<DistributionSpec>,
        service_specs: Vec<DistributionSpec>,
        theta1: DVector<f64>,
        theta2: DVector<f64>,
        q0: DVector<f64>,
        convention: SigmaConvention,
        gate: bool,
    ) -> Result<Self, NetworkError> {
        if arrival_specs.len() != topology.num_exogenous {
            return Err(NetworkError::InvalidLimits(format!(
                "expected {} arrival laws, got {}",
                topology.num_exogenous,
                arrival_specs.len()
            )));
        }
        if service_specs.len() != topology.num_activities {
            return Err(NetworkError::InvalidLimits(format!(
                "expected {} service laws, got {}",
                topology.num_activities,
                service_specs.len()
            )));
        }
        let i_n = topology.num_buffers;
        let mut alpha = DVector::zeros(i_n);
        let mut sigma_u = DVector::zeros(i_n);
        for (i, s) in arrival_specs.iter().enumerate() {
            s.validate()?;
            alpha[i] = 1.0 / s.mean;
            sigma_u[i] = s.sd;
        }
        let j_n = topology.num_activities;
        let mut beta = DVector::zeros(j_n);
        let mut sigma_v = DVector::zeros(j_n);
        for (j, s) in service_specs.iter().enumerate() {
            s.validate()?;
            beta[j] = 1.0 / s.mean;
            sigma_v[j] = s.sd;
        }
        let limits = LimitParams {
            alpha,
            beta,
            sigma_u,
            sigma_v,
            theta1,
            theta2,
            q0,
        };
        let htd = analyze(topology, &limits, convention, gate)?;
        let relabeled_services = htd
            .perm
            .iter()
            .map(|&old| service_specs[old])
            .collect();
        Ok(Instance {
            htd,
            arrival_specs,
            service_specs: relabeled_services,
        })
    }

    /// Streams generating the r-th network's primitives: interarrival means
    /// 1/(alpha_i + theta1_i/r), service means 1/(beta_j + theta2_j/r).
    pub fn streams(&self, r: f64, seed: u64) -> Result<PrimitiveStreams, NetworkError> {
        let (alpha_r, beta_r) = self.htd.limits.rates_at(r);
        let arrival = self
            .arrival_specs
            .iter()
            .enumerate()
            .map(|(i, s)| s.with_mean(1.0 / alpha_r[i]))
            .collect();
        let service = self
            .service_specs
            .iter()
            .enumerate()
            .map(|(j, s)| s.with_mean(1.0 / beta_r[j]))
            .collect();
        let routing = self
            .htd
            .topology
            .routing
            .iter()
            .map(|rv| rv.to.clone())
            .collect();
        Ok(PrimitiveStreams::new(
            arrival,
            service,
            routing,
            self.htd.topology.num_buffers,
            seed,
        )?)
    }

    /// Initial queue for index r: round(r q0).
    pub fn initial_queue(&self, r: f64) -> Vec<i64> {
        self.htd
            .limits
            .q0
            .iter()
            .map(|&q| (r * q).round() as i64)
            .collect()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::{n1, n2, n3_relabel};
    use super::*;

    #[test]
    fn minimal_network_validates() {
        let topo = NetworkTopology::from_activities(
            1,
            1,
            1,
            &[(1, 1)],
            vec![RoutingVector::all_exit(1)],
        );
        assert!(validate_topology(&topo).passed());
    }

    #[test]
    fn zero_column_fails_validation() {
        let topo = NetworkTopology::from_matrices(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            vec![RoutingVector::all_exit(1)],
            1,
        );
        let rep = validate_topology(&topo);
        assert!(!rep.passed());
        assert!(rep.violations[0].contains("activity 1 serves no single buffer"));
    }

    #[test]
    fn substochastic_routing_fails_validation() {
        let topo = NetworkTopology::from_activities(
            1,
            1,
            1,
            &[(1, 1)],
            vec![RoutingVector {
                exit: 0.9,
                to: vec![0.0],
            }],
        );
        let rep = validate_topology(&topo);
        assert!(rep.violations.iter().any(|v| v.contains("not stochastic")));
    }

    #[test]
    fn routing_covariance_direct_evaluation() {
        let m = routing_covariance(&[0.5, 0.25]).unwrap();
        assert_eq!(m[(0, 0)], 0.25);
        assert_eq!(m[(0, 1)], -0.125);
        assert_eq!(m[(1, 0)], -0.125);
        assert_eq!(m[(1, 1)], 0.1875);
    }

    #[test]
    fn routing_covariance_degenerate() {
        assert_eq!(routing_covariance(&[0.0, 0.0]).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(routing_covariance(&[1.0]).unwrap(), DMatrix::zeros(1, 1));
        assert!(routing_covariance(&[0.7, 0.4]).is_err());
    }

    #[test]
    fn extended_multinomial_covariance_rows_sum_to_zero() {
        // Extend with the exit coordinate and check row sums vanish.
        let p = [0.5, 0.25];
        let p0 = 1.0 - p.iter().sum::<f64>();
        let full = [p0, p[0], p[1]];
        for i1 in 0..3 {
            let row_sum: f64 = (0..3)
                .map(|i2| {
                    if i1 == i2 {
                        full[i1] * (1.0 - full[i1])
                    } else {
                        -full[i1] * full[i2]
                    }
                })
                .sum();
            assert!(row_sum.abs() < 1e-15);
        }
    }

    #[test]
    fn n1_analysis_hand_values() {
        let inst = n1();
        let h = &inst.htd;
        assert_eq!(h.x_star[0], 1.0);
        assert_eq!(h.rho_star, 1.0);
        assert_eq!(h.basic_count, 1);
        assert_eq!(h.r_mat[(0, 0)], 1.0);
        assert_eq!(h.k_mat[(0, 0)], 1.0);
        assert_eq!(h.theta[0], -1.0);
        assert_eq!(h.sigma[(0, 0)], 2.0);
        assert!(h.heavy_traffic);
    }

    #[test]
    fn n2_analysis_hand_values() {
        let inst = n2();
        let h = &inst.htd;
        assert_eq!(h.x_star.as_slice(), &[0.5, 0.5]);
        assert_eq!(h.rho_star, 1.0);
        assert_eq!(h.basic_count, 2);
        assert_eq!(h.k_mat.shape(), (1, 2));
        assert_eq!(h.k_mat[(0, 0)], 1.0);
        assert_eq!(h.k_mat[(0, 1)], 1.0);
        assert_eq!(h.r_mat[(0, 0)], 2.0);
        assert_eq!(h.r_mat[(1, 1)], 1.0);
        assert_eq!(h.r_mat[(0, 1)], 0.0);
        // Sigma = diag(2, 1) under the classical convention.
        assert_eq!(h.sigma[(0, 0)], 2.0);
        assert_eq!(h.sigma[(1, 1)], 1.0);
        assert_eq!(h.sigma[(0, 1)], 0.0);
    }

    #[test]
    fn overloaded_instance_rejected() {
        let topo = NetworkTopology::from_activities(
            1,
            1,
            1,
            &[(1, 1)],
            vec![RoutingVector::all_exit(1)],
        );
        let err = Instance::build(
            &topo,
            vec![DistributionSpec::exponential(0.5)], // alpha = 2
            vec![DistributionSpec::exponential(1.0)], // beta = 1
            DVector::zeros(1),
            DVector::zeros(1),
            DVector::zeros(1),
            SigmaConvention::Classical,
        )
        .unwrap_err();
        match err {
            NetworkError::NotHeavyTraffic { rho_star, .. } => {
                assert!((rho_star - 2.0).abs() < 1e-9)
            }
            other => panic!("expected NotHeavyTraffic, got {other:?}"),
        }
    }

    #[test]
    fn relabeling_moves_nonbasic_last() {
        let inst = n3_relabel();
        let h = &inst.htd;
        assert_eq!(h.basic_count, 2);
        assert_eq!(h.perm, vec![0, 2, 1]);
        assert_eq!(h.basic_set, vec![1, 3]);
        assert_eq!(h.x_star.as_slice(), &[1.0, 1.0, 0.0]);
        // K = [B N; 0 -I]: servers of relabeled activities are (1, 2, 2).
        assert_eq!(h.k_mat.shape(), (3, 3));
        assert_eq!(h.k_mat[(0, 0)], 1.0);
        assert_eq!(h.k_mat[(1, 1)], 1.0);
        assert_eq!(h.k_mat[(1, 2)], 1.0);
        assert_eq!(h.k_mat[(2, 2)], -1.0);
        // Relabeled service laws follow the permutation.
        assert_eq!(inst.service_specs[1].mean, 1.0);
        assert_eq!(inst.service_specs[2].mean, 0.5);
    }

    #[test]
    fn balance_identities_on_accepted_instances() {
        for inst in [n1(), n2(), n3_relabel()] {
            let h = &inst.htd;
            let rx = &h.r_mat * &h.x_star;
            for i in 0..h.topology.num_buffers {
                assert!((rx[i] - h.limits.alpha[i]).abs() <= HT_TOL);
            }
            let ax = &h.topology.constituency_servers * &h.x_star;
            for k in 0..h.topology.num_servers {
                assert!((ax[k] - 1.0).abs() <= HT_TOL);
            }
        }
    }

    #[test]
    fn analysis_is_deterministic() {
        let a = n2().htd;
        let b = n2().htd;
        assert_eq!(a.x_star.as_slice(), b.x_star.as_slice());
        assert_eq!(a.sigma.as_slice(), b.sigma.as_slice());
        assert_eq!(a.theta.as_slice(), b.theta.as_slice());
    }

    #[test]
    fn sigma_diagonal_without_rerouting() {
        let inst = n2();
        let s = &inst.htd.sigma;
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(1, 0)], 0.0);
    }

    #[test]
    fn literal_convention_differs_when_rates_not_one() {
        // N1 variant with alpha = beta = 2.
        let topo = NetworkTopology::from_activities(
            1,
            1,
            1,
            &[(1, 1)],
            vec![RoutingVector::all_exit(1)],
        );
        let build = |conv| {
            Instance::build(
                &topo,
                vec![DistributionSpec::exponential(0.5)],
                vec![DistributionSpec::exponential(0.5)],
                DVector::from_row_slice(&[-1.0]),
                DVector::zeros(1),
                DVector::from_row_slice(&[1.0]),
                conv,
            )
            .unwrap()
        };
        let classical = build(SigmaConvention::Classical);
        let literal = build(SigmaConvention::Literal);
        assert_eq!(classical.htd.sigma[(0, 0)], 4.0); // 8 * 1/4 + 8 * 1/4 * 1
        assert_eq!(literal.htd.sigma[(0, 0)], 0.5); // 1/4 + 1/4
    }

    #[test]
    fn initial_queue_rounds() {
        let inst = n2();
        assert_eq!(inst.initial_queue(10.0), vec![10, 10]);
        assert_eq!(inst.initial_queue(7.0), vec![7, 7]);
    }

    #[test]
    fn streams_use_r_scaled_rates() {
        let inst = n1();
        // alpha^r = 1 - 1/r: at r = 10 the interarrival mean is 1/0.9.
        let s = inst.streams(10.0, 1).unwrap();
        let n = 200_000u64;
        let mean: f64 =
            (1..=n).map(|k| s.draw_interarrival(1, k).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 0.9).abs() < 0.01, "mean {mean}");
    }
}
