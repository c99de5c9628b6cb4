//! Fluid and diffusion scalings of a trajectory, the free process, the
//! idleness time transformation, and martingale diagnostics.
//!
//! Fluid scaling accelerates time by r^2 and divides space by r^2;
//! diffusion scaling divides centered processes by r. Everything here is
//! evaluated exactly from the event log: counts are integers, cumulative
//! allocations are piecewise linear, so no interpolation error enters.
//! The free process is always computed from its definition (centered
//! arrival, service and routing fluctuations), never from the state
//! equation, which is kept as an independent cross-check.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::Instance;
use crate::sim::Trajectory;
use crate::workload::WorkloadData;

#[derive(Debug, Error)]
pub enum ScaleError {
    #[error("grid point {0} outside [0, {1}]")]
    GridOutOfRange(f64, f64),
    #[error("idleness process not monotone: component {component} decreases by {drop}")]
    NotMonotone { component: usize, drop: f64 },
    #[error("empty grid")]
    EmptyGrid,
}

/// Scaled views of one trajectory on a grid of scaled times.
///
/// Service and routing processes are stored composed with the allocation
/// actually consumed (S_j(T_j(r^2 t)) and the routing counts at those
/// completion totals); these compositions are what every scaled state
/// identity uses. Routing-indexed fields are flattened buffer-major:
/// `i * num_activities + j`.
#[derive(Debug, Clone)]
pub struct ScaledTrajectory {
    pub r: f64,
    pub grid: Vec<f64>,
    pub horizon_scaled: f64,
    // fluid
    pub fluid_queue: Vec<Vec<f64>>,
    pub fluid_idle: Vec<Vec<f64>>,
    pub fluid_alloc: Vec<Vec<f64>>,
    pub fluid_arrivals: Vec<Vec<f64>>,
    pub fluid_completions: Vec<Vec<f64>>,
    pub fluid_routed: Vec<Vec<f64>>,
    // diffusion
    pub diff_arrivals: Vec<Vec<f64>>,
    pub diff_completions: Vec<Vec<f64>>,
    pub diff_routed: Vec<Vec<f64>>,
    pub diff_queue: Vec<Vec<f64>>,
    pub diff_workload: Vec<Vec<f64>>,
    pub diff_deviation: Vec<Vec<f64>>,
    /// Physical idleness/deviation process [I/r ; T_nonbasic/r].
    pub diff_idle_dev: Vec<Vec<f64>>,
    /// The free process, from its definition.
    pub free_process: Vec<Vec<f64>>,
    /// Counts-plus-one vector (arrivals, then completions).
    pub event_counts: Vec<Vec<u64>>,
    /// Scaled initial queue q^r / r.
    pub q_hat: Vec<f64>,
}

/// Default grid: the event times in scaled units, thinned to at most 1000
/// points, always keeping 0 and the horizon.
pub fn default_grid(traj: &Trajectory) -> Vec<f64> {
    let r2 = traj.r * traj.r;
    let horizon_scaled = traj.horizon / r2;
    let mut grid: Vec<f64> = Vec::new();
    let n = traj.len();
    let stride = n.div_ceil(1000).max(1);
    for l in (0..n).step_by(stride) {
        grid.push(traj.time(l) / r2);
    }
    if *grid.last().unwrap_or(&-1.0) < horizon_scaled {
        grid.push(horizon_scaled);
    }
    grid
}

/// Event times in scaled units plus the horizon; the exactness grid for
/// identity checks.
pub fn event_grid(traj: &Trajectory) -> Vec<f64> {
    let r2 = traj.r * traj.r;
    let mut grid: Vec<f64> = (0..traj.len()).map(|l| traj.time(l) / r2).collect();
    let horizon_scaled = traj.horizon / r2;
    if *grid.last().unwrap_or(&-1.0) < horizon_scaled {
        grid.push(horizon_scaled);
    }
    grid
}

pub fn scale(
    traj: &Trajectory,
    inst: &Instance,
    wd: &WorkloadData,
    grid: &[f64],
) -> Result<ScaledTrajectory, ScaleError> {
    if grid.is_empty() {
        return Err(ScaleError::EmptyGrid);
    }
    let r = traj.r;
    let r2 = r * r;
    let horizon_scaled = traj.horizon / r2;
    for &t in grid {
        if !(0.0..=horizon_scaled + 1e-12).contains(&t) {
            return Err(ScaleError::GridOutOfRange(t, horizon_scaled));
        }
    }

    let htd = &inst.htd;
    let topo = &htd.topology;
    let (i_n, j_n, k_n) = (topo.num_buffers, topo.num_activities, topo.num_servers);
    let b_n = htd.basic_count;
    let (alpha_r, beta_r) = htd.limits.rates_at(r);
    let p_mat = topo.routing_matrix();
    let c_mat = &topo.constituency_buffers;
    let q_hat: Vec<f64> = traj.initial_queue.iter().map(|&q| q as f64 / r).collect();

    let npts = grid.len();
    let mut out = ScaledTrajectory {
        r,
        grid: grid.to_vec(),
        horizon_scaled,
        fluid_queue: Vec::with_capacity(npts),
        fluid_idle: Vec::with_capacity(npts),
        fluid_alloc: Vec::with_capacity(npts),
        fluid_arrivals: Vec::with_capacity(npts),
        fluid_completions: Vec::with_capacity(npts),
        fluid_routed: Vec::with_capacity(npts),
        diff_arrivals: Vec::with_capacity(npts),
        diff_completions: Vec::with_capacity(npts),
        diff_routed: Vec::with_capacity(npts),
        diff_queue: Vec::with_capacity(npts),
        diff_workload: Vec::with_capacity(npts),
        diff_deviation: Vec::with_capacity(npts),
        diff_idle_dev: Vec::with_capacity(npts),
        free_process: Vec::with_capacity(npts),
        event_counts: Vec::with_capacity(npts),
        q_hat: q_hat.clone(),
    };

    for &t in grid {
        let tau = (r2 * t).min(traj.horizon);
        let q = traj.queues_at(tau);
        let e = traj.arrivals_at(tau);
        let s = traj.completions_at(tau);
        let phi = traj.routed_at(tau);
        let t_cum = traj.alloc_time_at(tau);
        let i_cum = traj.idle_time_at(tau);

        out.fluid_queue.push(q.iter().map(|&v| v as f64 / r2).collect());
        out.fluid_idle.push(i_cum.iter().map(|&v| v / r2).collect());
        out.fluid_alloc.push(t_cum.iter().map(|&v| v / r2).collect());
        out.fluid_arrivals.push(e.iter().map(|&v| v as f64 / r2).collect());
        out.fluid_completions.push(s.iter().map(|&v| v as f64 / r2).collect());
        out.fluid_routed.push(phi.iter().map(|&v| v as f64 / r2).collect());

        let e_hat: Vec<f64> = (0..i_n)
            .map(|i| (e[i] as f64 - alpha_r[i] * tau) / r)
            .collect();
        let s_hat: Vec<f64> = (0..j_n)
            .map(|j| (s[j] as f64 - beta_r[j] * t_cum[j]) / r)
            .collect();
        let phi_hat: Vec<f64> = (0..i_n * j_n)
            .map(|idx| {
                let (i, j) = (idx / j_n, idx % j_n);
                (phi[idx] as f64 - p_mat[(i, j)] * s[j] as f64) / r
            })
            .collect();
        // Free process from its definition.
        let x_hat: Vec<f64> = (0..i_n)
            .map(|i| {
                let mut v = e_hat[i];
                for j in 0..j_n {
                    v -= (c_mat[(i, j)] - p_mat[(i, j)]) * s_hat[j];
                    v += phi_hat[i * j_n + j];
                }
                v
            })
            .collect();
        let q_hat_t: Vec<f64> = q.iter().map(|&v| v as f64 / r).collect();
        let y_hat: Vec<f64> = (0..j_n)
            .map(|j| (htd.x_star[j] * tau - t_cum[j]) / r)
            .collect();
        let mut u_hat: Vec<f64> = Vec::with_capacity(k_n + j_n - b_n);
        u_hat.extend(i_cum.iter().map(|&v| v / r));
        u_hat.extend(t_cum[b_n..].iter().map(|&v| v / r));
        let qv = DVector::from_row_slice(&q_hat_t);
        let w_hat: Vec<f64> = (&wd.lambda * &qv).iter().copied().collect();

        let mut counts: Vec<u64> = Vec::with_capacity(i_n + j_n);
        counts.extend(e.iter().map(|&v| v + 1));
        counts.extend(s.iter().map(|&v| v + 1));

        out.diff_arrivals.push(e_hat);
        out.diff_completions.push(s_hat);
        out.diff_routed.push(phi_hat);
        out.diff_queue.push(q_hat_t);
        out.diff_workload.push(w_hat);
        out.diff_deviation.push(y_hat);
        out.diff_idle_dev.push(u_hat);
        out.free_process.push(x_hat);
        out.event_counts.push(counts);
    }
    Ok(out)
}

/// The counts-plus-one vector (arrivals then potential completions) at one
/// scaled time.
pub fn event_counts(traj: &Trajectory, t_scaled: f64) -> Vec<u64> {
    let tau = (traj.r * traj.r * t_scaled).min(traj.horizon);
    let mut counts: Vec<u64> = traj.arrivals_at(tau).iter().map(|&v| v + 1).collect();
    counts.extend(traj.completions_at(tau).iter().map(|&v| v + 1));
    counts
}

/// Residuals of the scaled state identities, maximized over the grid.
#[derive(Debug, Clone, Copy)]
pub struct IdentityResiduals {
    /// Queue identity (free process + drift + R Y against Q).
    pub queue: f64,
    /// U = K Y against the physical idleness/deviation process.
    pub idle_dev: f64,
    /// Workload identity with G U.
    pub workload: f64,
}

pub fn identity_residuals(
    st: &ScaledTrajectory,
    inst: &Instance,
    wd: &WorkloadData,
) -> IdentityResiduals {
    let htd = &inst.htd;
    let topo = &htd.topology;
    let i_n = topo.num_buffers;
    let p_mat = topo.routing_matrix();
    let c_minus_p = &topo.constituency_buffers - &p_mat;
    let drift_mat = &c_minus_p * DMatrix::from_diagonal(&htd.limits.theta2);
    let lambda = &wd.lambda;
    let g = &wd.g_mat;

    let mut worst = IdentityResiduals {
        queue: 0.0,
        idle_dev: 0.0,
        workload: 0.0,
    };
    for (k, &t) in st.grid.iter().enumerate() {
        let tbar = DVector::from_row_slice(&st.fluid_alloc[k]);
        let y = DVector::from_row_slice(&st.diff_deviation[k]);
        let x = DVector::from_row_slice(&st.free_process[k]);
        let drift = &htd.limits.theta1 * t - &drift_mat * &tbar;
        let rhs = DVector::from_row_slice(&st.q_hat) + &x + &drift + &htd.r_mat * &y;
        for i in 0..i_n {
            worst.queue = worst.queue.max((st.diff_queue[k][i] - rhs[i]).abs());
        }
        let ky = &htd.k_mat * &y;
        for m in 0..htd.u_dim() {
            worst.idle_dev = worst.idle_dev.max((st.diff_idle_dev[k][m] - ky[m]).abs());
        }
        let u = DVector::from_row_slice(&st.diff_idle_dev[k]);
        let w_rhs = lambda * DVector::from_row_slice(&st.q_hat)
            + lambda * &x
            + lambda * &drift
            + g * &u;
        for l in 0..lambda.nrows() {
            worst.workload = worst
                .workload
                .max((st.diff_workload[k][l] - w_rhs[l]).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Time transformation
// ---------------------------------------------------------------------------

/// The stretched clock tau(t) = t + sum_m U_m(t) and the processes read on
/// it. Exact when built on the event grid, where the idleness process is
/// piecewise linear.
#[derive(Debug, Clone)]
pub struct TimeTransform {
    /// Original scaled times.
    pub times: Vec<f64>,
    /// tau evaluated at `times`; strictly increasing.
    pub tau: Vec<f64>,
    /// Workload, free process and idleness read on the transformed clock:
    /// entry k lives at transformed time `tau[k]`.
    pub workload: Vec<Vec<f64>>,
    pub free: Vec<Vec<f64>>,
    pub idle_dev: Vec<Vec<f64>>,
}

impl TimeTransform {
    pub fn build(
        times: Vec<f64>,
        idle_dev: Vec<Vec<f64>>,
        workload: Vec<Vec<f64>>,
        free: Vec<Vec<f64>>,
    ) -> Result<Self, ScaleError> {
        if times.is_empty() {
            return Err(ScaleError::EmptyGrid);
        }
        let dim = idle_dev[0].len();
        for m in 0..dim {
            for pair in idle_dev.windows(2) {
                let drop = pair[0][m] - pair[1][m];
                if drop > 1e-9 {
                    return Err(ScaleError::NotMonotone { component: m, drop });
                }
            }
        }
        let tau: Vec<f64> = times
            .iter()
            .zip(&idle_dev)
            .map(|(&t, u)| t + u.iter().sum::<f64>())
            .collect();
        Ok(TimeTransform {
            times,
            tau,
            workload,
            free,
            idle_dev,
        })
    }

    /// tau at an arbitrary time, by linear interpolation on the grid.
    pub fn tau_at(&self, t: f64) -> f64 {
        piecewise(&self.times, &self.tau, t)
    }

    /// The inverse clock: tau_inv(tau(t)) = t.
    pub fn tau_inv_at(&self, s: f64) -> f64 {
        piecewise(&self.tau, &self.times, s)
    }
}

fn piecewise(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[hi - 1], xs[hi]);
    let (y0, y1) = (ys[hi - 1], ys[hi]);
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Build the time transformation from a scaled trajectory (use the event
/// grid for exactness).
pub fn time_transform(st: &ScaledTrajectory) -> Result<TimeTransform, ScaleError> {
    TimeTransform::build(
        st.grid.clone(),
        st.diff_idle_dev.clone(),
        st.diff_workload.clone(),
        st.free_process.clone(),
    )
}

// ---------------------------------------------------------------------------
// Martingale diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MartingaleStat {
    pub label: String,
    pub steps: u64,
    pub mean_increment: f64,
    pub se_increment: f64,
    /// Sum of squared increments.
    pub qv_empirical: f64,
    /// Predicted quadratic variation at the same count.
    pub qv_predicted: f64,
}

impl MartingaleStat {
    pub fn mean_within(&self, se_multiples: f64) -> bool {
        self.mean_increment.abs() <= se_multiples * self.se_increment + 1e-15
    }

    pub fn qv_relative_error(&self) -> f64 {
        if self.qv_predicted == 0.0 {
            self.qv_empirical.abs()
        } else {
            (self.qv_empirical - self.qv_predicted).abs() / self.qv_predicted
        }
    }
}

#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub arrival: Vec<MartingaleStat>,
    pub service: Vec<MartingaleStat>,
    pub routing: Vec<MartingaleStat>,
}

/// Replay the primitive streams to the given counts and compare the
/// centered sums' empirical behavior with their predicted quadratic
/// variations.
pub fn martingale_diagnostics(
    inst: &Instance,
    r: f64,
    seed: u64,
    counts_arrival: &[u64],
    counts_service: &[u64],
) -> Result<MartingaleReport, crate::network::NetworkError> {
    let streams = inst.streams(r, seed)?;
    let topo = &inst.htd.topology;
    let (alpha_r, beta_r) = inst.htd.limits.rates_at(r);
    let mut report = MartingaleReport {
        arrival: Vec::new(),
        service: Vec::new(),
        routing: Vec::new(),
    };

    for i in 0..topo.num_exogenous {
        let m = counts_arrival[i];
        let sigma_ur = inst.arrival_specs[i].with_mean(1.0 / alpha_r[i]).sd;
        let mut incs = Vec::with_capacity(m as usize);
        for n in 1..=m {
            let u = streams.draw_interarrival(i + 1, n).unwrap();
            incs.push((1.0 - alpha_r[i] * u) / r);
        }
        report.arrival.push(stat(
            format!("arrival centered sum, buffer {}", i + 1),
            &incs,
            m as f64 * (alpha_r[i] * sigma_ur).powi(2) / (r * r),
        ));
    }
    for j in 0..topo.num_activities {
        let n_j = counts_service[j];
        let sigma_vr = inst.service_specs[j].with_mean(1.0 / beta_r[j]).sd;
        let mut incs = Vec::with_capacity(n_j as usize);
        for n in 1..=n_j {
            let v = streams.draw_service(j + 1, n);
            incs.push((1.0 - beta_r[j] * v) / r);
        }
        report.service.push(stat(
            format!("service centered sum, activity {}", j + 1),
            &incs,
            n_j as f64 * (beta_r[j] * sigma_vr).powi(2) / (r * r),
        ));
    }
    let p_mat = topo.routing_matrix();
    for i in 0..topo.num_buffers {
        let mut incs = Vec::new();
        let mut qv_pred = 0.0;
        for j in 0..topo.num_activities {
            let var_ii = p_mat[(i, j)] * (1.0 - p_mat[(i, j)]);
            qv_pred += counts_service[j] as f64 * var_ii / (r * r);
            for n in 1..=counts_service[j] {
                let (_, onehot) = streams.draw_routing(j + 1, n);
                incs.push((onehot[i] - p_mat[(i, j)]) / r);
            }
        }
        report.routing.push(stat(
            format!("routing centered sum, buffer {}", i + 1),
            &incs,
            qv_pred,
        ));
    }
    Ok(report)
}

fn stat(label: String, incs: &[f64], qv_predicted: f64) -> MartingaleStat {
    let n = incs.len() as f64;
    let mean = if incs.is_empty() {
        0.0
    } else {
        incs.iter().sum::<f64>() / n
    };
    let var = if incs.len() < 2 {
        0.0
    } else {
        incs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    };
    MartingaleStat {
        label,
        steps: incs.len() as u64,
        mean_increment: mean,
        se_increment: if incs.is_empty() { 0.0 } else { (var / n).sqrt() },
        qv_empirical: incs.iter().map(|v| v * v).sum(),
        qv_predicted,
    }
}
