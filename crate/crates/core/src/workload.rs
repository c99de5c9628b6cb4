//! Workload matrix algebra and the effective cost function.
//!
//! The workload process is W = Lambda Q. The matrix G links workload to
//! the idleness/deviation process through Lambda R = G K; its columns must
//! all carry weight (|G u| >= c |u| on the nonnegative orthant) for the
//! workload to register every unit of idleness. The effective cost
//!
//! ```text
//! hhat(w) = min { h . q : Lambda q = w, q >= 0 }
//! ```
//!
//! is the cheapest holding cost compatible with a workload level, and
//! `lift` returns its deterministic (lexicographically smallest) minimizer.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::network::HeavyTrafficData;

const TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("no canonical workload construction: {0}")]
    NoCanonicalConstruction(String),
    #[error("workload matrix inconsistent: residual of Lambda R = G K is {residual}")]
    InconsistentWorkload { residual: f64 },
    #[error("G has a negative entry ({0})")]
    GNotNonnegative(f64),
    #[error("a column of G has no strictly positive entry")]
    Assumption25Violated,
    #[error("w is not in the workload space")]
    NotInWorkloadSpace,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone)]
pub struct WorkloadData {
    /// Lambda: one row per workload dimension, one column per buffer.
    pub lambda: DMatrix<f64>,
    /// G: maps the idleness/deviation process into workload space.
    pub g_mat: DMatrix<f64>,
    /// c > 0 with |G u|_1 >= c |u|_1 for all u >= 0.
    pub lower_norm_c: f64,
}

impl WorkloadData {
    pub fn workload_dim(&self) -> usize {
        self.lambda.nrows()
    }
}

#[derive(Debug, Clone)]
pub enum WorkloadSpec {
    /// Canonical single-server-pool construction: Lambda_i is the mean
    /// service requirement of the unique basic activity serving buffer i.
    Auto,
    Given(DMatrix<f64>),
}

pub fn build_workload(
    htd: &HeavyTrafficData,
    spec: &WorkloadSpec,
) -> Result<WorkloadData, WorkloadError> {
    let topo = &htd.topology;
    let lambda = match spec {
        WorkloadSpec::Given(l) => {
            if l.ncols() != topo.num_buffers {
                return Err(WorkloadError::InvalidInput(format!(
                    "Lambda must have {} columns, got {}",
                    topo.num_buffers,
                    l.ncols()
                )));
            }
            if l.iter().any(|v| !v.is_finite()) {
                return Err(WorkloadError::InvalidInput("Lambda has a non-finite entry".into()));
            }
            l.clone()
        }
        WorkloadSpec::Auto => {
            let single_pool = topo.num_servers == 1 || {
                let first = topo.constituency_servers.column(0).into_owned();
                (1..topo.num_activities)
                    .all(|j| topo.constituency_servers.column(j) == first)
            };
            if !single_pool {
                return Err(WorkloadError::NoCanonicalConstruction(
                    "auto Lambda is only defined for single-server-pool networks".into(),
                ));
            }
            let mut row = DVector::zeros(topo.num_buffers);
            for i in 0..topo.num_buffers {
                let basic_serving: Vec<usize> = topo
                    .activities_of_buffer(i)
                    .into_iter()
                    .filter(|&j| j < htd.basic_count)
                    .collect();
                match basic_serving.as_slice() {
                    [j] => row[i] = 1.0 / htd.limits.beta[*j],
                    [] => {
                        return Err(WorkloadError::NoCanonicalConstruction(format!(
                            "buffer {} has no basic activity",
                            i + 1
                        )))
                    }
                    _ => {
                        return Err(WorkloadError::NoCanonicalConstruction(format!(
                            "buffer {} is served by several basic activities",
                            i + 1
                        )))
                    }
                }
            }
            DMatrix::from_rows(&[row.transpose()])
        }
    };

    // Lambda R = G K with K of full row rank: G = Lambda R K' (K K')^{-1}.
    let k = &htd.k_mat;
    let kkt = k * k.transpose();
    let lr = &lambda * &htd.r_mat;
    let kkt_lu = kkt.lu();
    let mut g = DMatrix::zeros(lambda.nrows(), k.nrows());
    for l in 0..lambda.nrows() {
        let rhs = k * lr.row(l).transpose();
        let sol = kkt_lu
            .solve(&rhs)
            .ok_or(WorkloadError::InconsistentWorkload { residual: f64::INFINITY })?;
        g.row_mut(l).copy_from(&sol.transpose());
    }
    let residual = (&lr - &g * k).amax();
    if residual >= TOL {
        return Err(WorkloadError::InconsistentWorkload { residual });
    }
    let min_entry = g.iter().copied().fold(f64::INFINITY, f64::min);
    if min_entry < -TOL {
        return Err(WorkloadError::GNotNonnegative(min_entry));
    }
    for v in g.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    if (0..g.ncols()).any(|m| g.column(m).iter().all(|&v| v < 1e-12)) {
        return Err(WorkloadError::Assumption25Violated);
    }

    // Certify c two ways: the minimal column sum (the simplex vertices) and
    // the LP min of |G u|_1 = (1' G) u over the unit simplex.
    let col_sums: Vec<f64> = (0..g.ncols()).map(|m| g.column(m).sum()).collect();
    let vertex_c = col_sums.iter().copied().fold(f64::INFINITY, f64::min);
    let lp = LinearProgram::minimize(&col_sums).eq(&vec![1.0; g.ncols()], 1.0);
    let sol = solve_lp(&lp)?;
    let lp_c = sol.value;
    debug_assert!((vertex_c - lp_c).abs() <= TOL * (1.0 + vertex_c.abs()));
    let lower_norm_c = vertex_c.min(lp_c);
    if lower_norm_c <= 1e-12 {
        return Err(WorkloadError::Assumption25Violated);
    }

    Ok(WorkloadData {
        lambda,
        g_mat: g,
        lower_norm_c,
    })
}

fn check_h(wd: &WorkloadData, h: &DVector<f64>) -> Result<(), WorkloadError> {
    if h.len() != wd.lambda.ncols() {
        return Err(WorkloadError::InvalidInput(format!(
            "h must have length {}, got {}",
            wd.lambda.ncols(),
            h.len()
        )));
    }
    if h.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(WorkloadError::InvalidInput("h must be strictly positive".into()));
    }
    Ok(())
}

fn effective_lp(wd: &WorkloadData, h: &DVector<f64>, w: &DVector<f64>) -> LinearProgram {
    let mut lp = LinearProgram::minimize(h.as_slice());
    for l in 0..wd.lambda.nrows() {
        let row: Vec<f64> = wd.lambda.row(l).iter().copied().collect();
        lp = lp.eq(&row, w[l]);
    }
    lp
}

/// hhat(w): minimal holding cost of a queue configuration with workload w.
pub fn effective_cost(
    wd: &WorkloadData,
    h: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64, WorkloadError> {
    check_h(wd, h)?;
    if w.len() != wd.workload_dim() {
        return Err(WorkloadError::InvalidInput(format!(
            "w must have length {}, got {}",
            wd.workload_dim(),
            w.len()
        )));
    }
    let sol = solve_lp(&effective_lp(wd, h, w))?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value),
        LpStatus::Infeasible => Err(WorkloadError::NotInWorkloadSpace),
        LpStatus::Unbounded => unreachable!("h > 0 bounds the cost below"),
    }
}

/// The lexicographically smallest minimizer q*(w) of the effective-cost
/// program, pinned coordinate by coordinate.
pub fn lift(
    wd: &WorkloadData,
    h: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>, WorkloadError> {
    let value = effective_cost(wd, h, w)?;
    let n = wd.lambda.ncols();
    let mut pinned: Vec<f64> = Vec::new();
    for i in 0..n {
        let mut obj = vec![0.0; n];
        obj[i] = 1.0;
        let mut lp = effective_lp(wd, h, w).eq(h.as_slice(), value);
        for (k, &v) in pinned.iter().enumerate() {
            let mut row = vec![0.0; n];
            row[k] = 1.0;
            lp = lp.eq(&row, v);
        }
        lp.objective = DVector::from_row_slice(&obj);
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(WorkloadError::NotInWorkloadSpace);
        }
        pinned.push(sol.value.max(0.0));
    }
    Ok(DVector::from_vec(pinned))
}

/// h . q - hhat(Lambda q); nonnegative up to tolerance for every q >= 0.
pub fn check_effective_inequality(
    wd: &WorkloadData,
    h: &DVector<f64>,
    q: &DVector<f64>,
) -> Result<f64, WorkloadError> {
    if q.iter().any(|&v| v < 0.0) {
        return Err(WorkloadError::InvalidInput("q must be nonnegative".into()));
    }
    let w = &wd.lambda * q;
    Ok(h.dot(q) - effective_cost(wd, h, &w)?)
}
