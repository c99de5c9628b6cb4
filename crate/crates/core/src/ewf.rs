//! Value function of the one-dimensional workload control problem and the
//! lower-bound check against simulated costs.
//!
//! With a single workload dimension, a nondecreasing effective cost and
//! nonnegative idleness prices, any extra push above the minimal amount
//! needed to keep the workload nonnegative raises both cost terms
//! pathwise, so the optimal control is reflection at the origin. The
//! value solves the linear ODE
//!
//! ```text
//! gamma V = hhat(w) + mu V' + (sigma^2 / 2) V''
//! ```
//!
//! piece by piece over the linearity pieces of hhat, with V'(0) equal to
//! minus the unit push cost and linear growth at infinity. An independent
//! reflected-diffusion Monte Carlo estimate guards the ODE route; the two
//! must agree before a value is trusted.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{CostConfig, CostEstimate};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::network::Instance;
use crate::workload::{effective_cost, WorkloadData};

#[derive(Debug, Error)]
pub enum EwfError {
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error(
        "lower bound violated at r = {r}: mean {mean} + {slack_ses} x se {se} < bound {bound}"
    )]
    BoundViolated {
        r: f64,
        mean: f64,
        se: f64,
        slack_ses: f64,
        bound: f64,
    },
}

/// Continuous piecewise-linear function on [0, inf) with f(0) = 0,
/// described by piece start points (first one 0) and slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub breaks: Vec<f64>,
    pub slopes: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>) -> Result<Self, EwfError> {
        if breaks.is_empty() || breaks[0] != 0.0 || breaks.len() != slopes.len() {
            return Err(EwfError::BadInput(
                "piecewise function needs breaks starting at 0, one slope per piece".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EwfError::BadInput("breaks must be strictly increasing".into()));
        }
        let mut values = vec![0.0; breaks.len()];
        for k in 1..breaks.len() {
            values[k] = values[k - 1] + slopes[k - 1] * (breaks[k] - breaks[k - 1]);
        }
        Ok(PiecewiseLinear {
            breaks,
            slopes,
            values,
        })
    }

    pub fn linear(slope: f64) -> Self {
        PiecewiseLinear {
            breaks: vec![0.0],
            slopes: vec![slope],
            values: vec![0.0],
        }
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn num_pieces(&self) -> usize {
        self.slopes.len()
    }

    fn piece(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b <= x).saturating_sub(1)
    }

    pub fn value(&self, x: f64) -> f64 {
        let k = self.piece(x);
        self.values[k] + self.slopes[k] * (x - self.breaks[k])
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.slopes.iter().all(|&s| s >= 0.0)
    }

    pub fn is_convex(&self) -> bool {
        self.slopes.windows(2).all(|w| w[1] >= w[0] - 1e-12)
    }

    /// Scale the function values by a constant factor.
    pub fn scaled(&self, factor: f64) -> Self {
        PiecewiseLinear {
            breaks: self.breaks.clone(),
            slopes: self.slopes.iter().map(|s| s * factor).collect(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Sample the effective cost along the one-dimensional workload ray and
/// return its piecewise-linear form (a single piece in exact arithmetic;
/// nearby slopes are merged).
pub fn hhat_from_workload(
    wd: &WorkloadData,
    h: &DVector<f64>,
    w_max: f64,
    samples: usize,
) -> Result<PiecewiseLinear, EwfError> {
    if wd.workload_dim() != 1 {
        return Err(EwfError::NotSupported(format!(
            "effective cost sampling implemented for workload dimension 1, got {}",
            wd.workload_dim()
        )));
    }
    let n = samples.max(2);
    let mut vals = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let w = DVector::from_row_slice(&[w_max * k as f64 / n as f64]);
        vals.push(
            effective_cost(wd, h, &w).map_err(|e| EwfError::BadInput(e.to_string()))?,
        );
    }
    let dx = w_max / n as f64;
    let mut breaks = vec![0.0];
    let mut slopes = vec![(vals[1] - vals[0]) / dx];
    for k in 1..n {
        let s = (vals[k + 1] - vals[k]) / dx;
        let last = *slopes.last().unwrap();
        if (s - last).abs() > 1e-9 * (1.0 + last.abs()) {
            breaks.push(dx * k as f64);
            slopes.push(s);
        }
    }
    PiecewiseLinear::new(breaks, slopes)
}

/// Data of the one-dimensional workload control problem.
#[derive(Debug, Clone)]
pub struct Ewf1D {
    pub drift: f64,
    pub variance: f64,
    pub hhat: PiecewiseLinear,
    /// Minimal price of one unit of upward workload push.
    pub push_cost: f64,
    pub gamma: f64,
}

impl Ewf1D {
    pub fn new(
        drift: f64,
        variance: f64,
        hhat: PiecewiseLinear,
        push_cost: f64,
        gamma: f64,
    ) -> Result<Self, EwfError> {
        if variance.is_nan() || variance <= 0.0 {
            return Err(EwfError::BadInput(format!(
                "workload variance must be positive, got {variance}"
            )));
        }
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(EwfError::BadInput("gamma must be positive".into()));
        }
        if !hhat.is_nondecreasing() || !hhat.is_convex() {
            return Err(EwfError::NotSupported(
                "effective cost must be convex nondecreasing for minimal reflection".into(),
            ));
        }
        if push_cost < 0.0 {
            return Err(EwfError::NotSupported("push cost must be nonnegative".into()));
        }
        Ok(Ewf1D {
            drift,
            variance,
            hhat,
            push_cost,
            gamma,
        })
    }

    /// Assemble the problem from an analyzed instance: drift Lambda theta,
    /// variance Lambda Sigma Lambda', sampled effective cost, and the
    /// cheapest unit push min{p.u : Gu = 1, u >= 0}.
    pub fn from_instance(
        inst: &Instance,
        wd: &WorkloadData,
        cc: &CostConfig,
    ) -> Result<Self, EwfError> {
        if wd.workload_dim() != 1 {
            return Err(EwfError::NotSupported(format!(
                "value function solver covers workload dimension 1, got {}",
                wd.workload_dim()
            )));
        }
        let htd = &inst.htd;
        let drift = (&wd.lambda * &htd.theta)[0];
        let variance = (&wd.lambda * &htd.sigma * wd.lambda.transpose())[(0, 0)];
        let hhat = hhat_from_workload(wd, &cc.h, 8.0, 64)?;

        let g_row: Vec<f64> = wd.g_mat.row(0).iter().copied().collect();
        if cc.p.len() != g_row.len() {
            return Err(EwfError::BadInput(format!(
                "p must have length {}, got {}",
                g_row.len(),
                cc.p.len()
            )));
        }
        let lp = LinearProgram::minimize(cc.p.as_slice()).eq(&g_row, 1.0);
        let sol = solve_lp(&lp).map_err(|e| EwfError::BadInput(e.to_string()))?;
        let push_cost = match sol.status {
            LpStatus::Optimal => sol.value,
            _ => {
                return Err(EwfError::BadInput(
                    "no nonnegative push attains a unit of workload".into(),
                ))
            }
        };
        Ewf1D::new(drift, variance, hhat, push_cost, cc.gamma)
    }

    pub fn default_dt(&self) -> f64 {
        1e-3 * self.variance / self.gamma
    }

    pub fn default_t_max(&self) -> f64 {
        // e^{-gamma T} < 1e-6
        14.0 / self.gamma
    }
}

/// Value of the reflected-at-zero control, solved in closed form on each
/// linearity piece of hhat with C^1 matching, V'(0) = -push_cost and
/// linear growth at infinity.
pub fn ewf_value_1d(e: &Ewf1D, w: f64) -> Result<f64, EwfError> {
    if w < 0.0 {
        return Err(EwfError::BadInput(format!("w must be nonnegative, got {w}")));
    }
    let (mu, s2, gamma) = (e.drift, e.variance, e.gamma);
    // Roots of (s2/2) l^2 + mu l - gamma = 0.
    let disc = (mu * mu + 2.0 * s2 * gamma).sqrt();
    let l_plus = (-mu + disc) / s2;
    let l_minus = (-mu - disc) / s2;

    let pieces = e.hhat.num_pieces();
    let breaks = &e.hhat.breaks;
    // Piece k particular solution: (a_k + b_k x)/gamma + b_k mu / gamma^2
    // with hhat(x) = a_k + b_k x on the piece.
    let part_val = |k: usize, x: f64| -> f64 {
        let b = e.hhat.slopes[k];
        let a = e.hhat.value(breaks[k]) - b * breaks[k];
        (a + b * x) / gamma + b * mu / (gamma * gamma)
    };
    let part_der = |k: usize| -> f64 { e.hhat.slopes[k] / gamma };

    // Local bases keep the system well conditioned: growing mode anchored
    // at the right end of its piece, decaying mode at the left end.
    let e_plus = |k: usize, x: f64| (l_plus * (x - breaks[k + 1])).exp();
    let e_minus = |k: usize, x: f64| (l_minus * (x - breaks[k])).exp();

    let n_unknown = 2 * pieces - 1; // (A_k, B_k) per interior piece, B only on the last
    let col_a = |k: usize| 2 * k;
    let col_b = |k: usize| if k + 1 == pieces { 2 * k } else { 2 * k + 1 };

    let mut mat = DMatrix::zeros(n_unknown, n_unknown);
    let mut rhs = DVector::zeros(n_unknown);
    let mut row = 0;

    // V'(0) = -push_cost on piece 0.
    if pieces == 1 {
        mat[(row, col_b(0))] = l_minus;
    } else {
        mat[(row, col_a(0))] = l_plus * e_plus(0, 0.0);
        mat[(row, col_b(0))] = l_minus;
    }
    rhs[row] = -e.push_cost - part_der(0);
    row += 1;

    for k in 0..pieces - 1 {
        let x = breaks[k + 1];
        // Value continuity.
        mat[(row, col_a(k))] = e_plus(k, x);
        mat[(row, col_b(k))] = e_minus(k, x);
        if k + 1 == pieces - 1 {
            mat[(row, col_b(k + 1))] -= e_minus(k + 1, x);
        } else {
            mat[(row, col_a(k + 1))] -= e_plus(k + 1, x);
            mat[(row, col_b(k + 1))] -= e_minus(k + 1, x);
        }
        rhs[row] = part_val(k + 1, x) - part_val(k, x);
        row += 1;
        // Derivative continuity.
        mat[(row, col_a(k))] = l_plus * e_plus(k, x);
        mat[(row, col_b(k))] = l_minus * e_minus(k, x);
        if k + 1 == pieces - 1 {
            mat[(row, col_b(k + 1))] -= l_minus * e_minus(k + 1, x);
        } else {
            mat[(row, col_a(k + 1))] -= l_plus * e_plus(k + 1, x);
            mat[(row, col_b(k + 1))] -= l_minus * e_minus(k + 1, x);
        }
        rhs[row] = part_der(k + 1) - part_der(k);
        row += 1;
    }
    debug_assert_eq!(row, n_unknown);

    let coef = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| EwfError::BadInput("singular matching system".into()))?;

    let k = e.hhat.piece(w);
    let mut v = part_val(k, w);
    if k + 1 == pieces {
        v += coef[col_b(k)] * e_minus(k, w);
    } else {
        v += coef[col_a(k)] * e_plus(k, w) + coef[col_b(k)] * e_minus(k, w);
    }
    Ok(v)
}

/// One sampled path of the reflected workload diffusion.
#[derive(Debug, Clone)]
pub struct RbmPath {
    pub times: Vec<f64>,
    pub w: Vec<f64>,
    pub local: Vec<f64>,
    /// Minimum of the reflected path inside each step (exactly 0 whenever
    /// the step contributed local time).
    pub step_min: Vec<f64>,
    pub cost: f64,
}

/// Euler steps with exact within-step reflection: the free-path minimum
/// over each step is sampled from its Brownian-bridge law given the
/// endpoints, and the Skorokhod push is applied to it. With sigma = 0 the
/// bridge minimum degenerates to min of the endpoints and the scheme is
/// the deterministic Skorokhod map.
#[allow(clippy::too_many_arguments)]
pub fn rbm_simulate(
    w0: f64,
    mu: f64,
    sigma2: f64,
    gamma: f64,
    hhat: &PiecewiseLinear,
    push_cost: f64,
    t_max: f64,
    dt: f64,
    seed: u64,
) -> RbmPath {
    assert!(dt > 0.0 && t_max > 0.0);
    let sigma = sigma2.sqrt();
    let steps = (t_max / dt).ceil() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut times = Vec::with_capacity(steps + 1);
    let mut ws = Vec::with_capacity(steps + 1);
    let mut ls = Vec::with_capacity(steps + 1);
    let mut mins = Vec::with_capacity(steps);
    times.push(0.0);
    ws.push(w0);
    ls.push(0.0);

    let mut w = w0;
    let mut local = 0.0;
    let mut cost = 0.0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let z: f64 = rng.sample(StandardNormal);
        let x_next = w + mu * dt + sigma * dt.sqrt() * z;
        // Conditional minimum of the free path on [t, t + dt].
        let m = if sigma > 0.0 {
            let u: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
            0.5 * (w + x_next - ((x_next - w).powi(2) - 2.0 * sigma2 * dt * u.ln()).sqrt())
        } else {
            w.min(x_next)
        };
        let dl = (-m).max(0.0);
        let w_next = x_next + dl;
        let t_next = t + dt;

        cost += 0.5
            * ((-gamma * t).exp() * hhat.value(w) + (-gamma * t_next).exp() * hhat.value(w_next))
            * dt;
        cost += push_cost * (-gamma * (t + 0.5 * dt)).exp() * dl;

        local += dl;
        w = w_next;
        times.push(t_next);
        ws.push(w);
        ls.push(local);
        mins.push(m + dl);
    }
    RbmPath {
        times,
        w: ws,
        local: ls,
        step_min: mins,
        cost,
    }
}

/// Monte Carlo mean and standard error of the reflected-diffusion cost.
pub fn rbm_monte_carlo(
    e: &Ewf1D,
    w: f64,
    t_max: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> (f64, f64) {
    let costs: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|k| {
            rbm_simulate(
                w,
                e.drift,
                e.variance,
                e.gamma,
                &e.hhat,
                e.push_cost,
                t_max,
                dt,
                crate::cost::rep_seed(seed, k as u64),
            )
            .cost
        })
        .collect();
    let n = paths as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundEntry {
    pub r: f64,
    pub mean: f64,
    pub se: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    pub bound: f64,
    pub slack_ses: f64,
    pub per_r: Vec<BoundEntry>,
    /// Informational: gap at the largest r no bigger than at the smallest.
    pub trend_improving: bool,
}

/// Check mean + slack_ses * se >= bound for every r. A statistically
/// significant violation flags a bug or a non-admissible policy.
pub fn verify_lower_bound(
    estimates: &[(f64, CostEstimate)],
    bound: f64,
    slack_ses: f64,
) -> Result<BoundReport, EwfError> {
    if estimates.len() < 2 {
        return Err(EwfError::BadInput(
            "lower-bound verification needs estimates for at least two r values".into(),
        ));
    }
    let mut entries: Vec<BoundEntry> = estimates
        .iter()
        .map(|(r, est)| BoundEntry {
            r: *r,
            mean: est.mean,
            se: est.std_error,
            gap: est.mean - bound,
        })
        .collect();
    entries.sort_by(|a, b| a.r.partial_cmp(&b.r).unwrap());
    for e in &entries {
        if e.mean + slack_ses * e.se < bound {
            return Err(EwfError::BoundViolated {
                r: e.r,
                mean: e.mean,
                se: e.se,
                slack_ses,
                bound,
            });
        }
    }
    let trend_improving = entries.last().unwrap().gap <= entries.first().unwrap().gap;
    Ok(BoundReport {
        bound,
        slack_ses,
        per_r: entries,
        trend_improving,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::n2;
    use crate::workload::{build_workload, WorkloadSpec};

    fn hand_case() -> Ewf1D {
        // hhat(w) = w, mu = -1, sigma^2 = 2, gamma = 1, p = 0.
        Ewf1D::new(-1.0, 2.0, PiecewiseLinear::linear(1.0), 0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_cost_gives_zero_value() {
        let e = Ewf1D::new(-1.0, 2.0, PiecewiseLinear::zero(), 0.0, 1.0).unwrap();
        for w in [0.0, 0.5, 3.0] {
            assert!(ewf_value_1d(&e, w).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_matches_golden_ratio_case() {
        // Roots of l^2 - l - 1 = 0; V(0) = -1 + 1/|l_minus| = (sqrt 5 - 1)/2.
        let e = hand_case();
        let v0 = ewf_value_1d(&e, 0.0).unwrap();
        let expected = (5f64.sqrt() - 1.0) / 2.0;
        assert!((v0 - expected).abs() < 1e-12, "{v0} vs {expected}");
    }

    #[test]
    fn doubling_hhat_doubles_value() {
        let e = hand_case();
        let e2 = Ewf1D::new(-1.0, 2.0, e.hhat.scaled(2.0), 0.0, 1.0).unwrap();
        for w in [0.0, 0.7, 1.5, 4.0] {
            let v = ewf_value_1d(&e, w).unwrap();
            let v2 = ewf_value_1d(&e2, w).unwrap();
            assert!((v2 - 2.0 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn value_is_nondecreasing_and_convex_in_w() {
        let e = hand_case();
        let vs: Vec<f64> = (0..20)
            .map(|k| ewf_value_1d(&e, k as f64 * 0.25).unwrap())
            .collect();
        for k in 1..vs.len() {
            assert!(vs[k] >= vs[k - 1] - 1e-12);
        }
        for k in 1..vs.len() - 1 {
            assert!(vs[k] <= 0.5 * (vs[k - 1] + vs[k + 1]) + 1e-12);
        }
    }

    #[test]
    fn rbm_deterministic_constant_path() {
        // sigma = 0, mu = 0: W stays at 1, cost -> 1 - e^{-T}.
        let p = rbm_simulate(1.0, 0.0, 0.0, 1.0, &PiecewiseLinear::linear(1.0), 0.0, 14.0, 1e-3, 9);
        assert!(p.w.iter().all(|&v| v == 1.0));
        assert!(p.local.last().unwrap().abs() < 1e-15);
        assert!((p.cost - (1.0 - (-14.0f64).exp())).abs() < 1e-5, "cost {}", p.cost);
    }

    #[test]
    fn rbm_deterministic_drift_to_zero() {
        // W(t) = 1 - t until it sticks at 0: integral e^{-t}(1 - t) = 1/e.
        let p = rbm_simulate(1.0, -1.0, 0.0, 1.0, &PiecewiseLinear::linear(1.0), 0.0, 14.0, 1e-3, 9);
        assert!((p.cost - 1.0 / std::f64::consts::E).abs() < 1e-4, "cost {}", p.cost);
        assert!(p.w.iter().all(|&v| v >= 0.0));
        // Local time balances the drift after the hit.
        assert!((p.local.last().unwrap() - 13.0).abs() < 1e-9);
    }

    #[test]
    fn rbm_replay_and_invariants() {
        let h = PiecewiseLinear::linear(2.0);
        let a = rbm_simulate(1.0, -0.5, 1.5, 1.0, &h, 0.3, 6.0, 1e-3, 123);
        let b = rbm_simulate(1.0, -0.5, 1.5, 1.0, &h, 0.3, 6.0, 1e-3, 123);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        // W >= 0, L nondecreasing, pushes only when the path touched 0.
        for k in 0..a.step_min.len() {
            assert!(a.w[k] >= 0.0);
            let dl = a.local[k + 1] - a.local[k];
            assert!(dl >= 0.0);
            if dl > 0.0 {
                assert!(a.step_min[k].abs() < 1e-12);
            } else {
                assert!(a.step_min[k] >= -1e-12);
            }
        }
    }

    #[test]
    fn ode_and_monte_carlo_agree_on_hand_case() {
        let e = hand_case();
        for w in [0.0, 1.0] {
            let v = ewf_value_1d(&e, w).unwrap();
            let (mean, se) = rbm_monte_carlo(&e, w, e.default_t_max(), e.default_dt(), 4000, 7);
            assert!(
                (v - mean).abs() <= 3.0 * se,
                "w = {w}: ODE {v} vs MC {mean} +- {se}"
            );
        }
    }

    #[test]
    fn ode_and_monte_carlo_agree_on_two_piece_cost() {
        let hhat = PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let e = Ewf1D::new(-0.8, 1.2, hhat, 0.5, 1.0).unwrap();
        let w = 1.4;
        let v = ewf_value_1d(&e, w).unwrap();
        let (mean, se) = rbm_monte_carlo(&e, w, e.default_t_max(), e.default_dt(), 6000, 11);
        assert!(
            (v - mean).abs() <= 3.0 * se,
            "ODE {v} vs MC {mean} +- {se}"
        );
    }

    #[test]
    fn n2_instance_assembles_expected_problem() {
        let inst = n2();
        let wd = build_workload(&inst.htd, &WorkloadSpec::Auto).unwrap();
        let cc = CostConfig {
            gamma: 1.0,
            h: DVector::from_row_slice(&[1.0, 3.0]),
            p: DVector::from_row_slice(&[0.0]),
            horizon_scaled: 10.0,
            tail_tol: None,
        };
        let e = Ewf1D::from_instance(&inst, &wd, &cc).unwrap();
        assert!((e.drift - (-1.0)).abs() < 1e-12); // Lambda theta = -1
        assert!((e.variance - 1.5).abs() < 1e-12); // 0.25 * 2 + 1 * 1
        assert_eq!(e.hhat.num_pieces(), 1);
        assert!((e.hhat.slopes[0] - 2.0).abs() < 1e-9);
        assert_eq!(e.push_cost, 0.0);
        // Hand value at w = Lambda q0 = 1.5: slope 2 piece,
        // l_minus = -2/3, B = 3: V = 2(w - 1) + 3 e^{-2w/3}.
        let v = ewf_value_1d(&e, 1.5).unwrap();
        let expected = 2.0 * (1.5 - 1.0) + 3.0 * (-1.0f64).exp();
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }

    #[test]
    fn multidimensional_workload_rejected() {
        let wd = WorkloadData {
            lambda: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            g_mat: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            lower_norm_c: 1.0,
        };
        let cc = CostConfig {
            gamma: 1.0,
            h: DVector::from_row_slice(&[1.0, 1.0]),
            p: DVector::from_row_slice(&[0.0, 0.0]),
            horizon_scaled: 1.0,
            tail_tol: None,
        };
        let inst = n2();
        assert!(matches!(
            Ewf1D::from_instance(&inst, &wd, &cc),
            Err(EwfError::NotSupported(_))
        ));
    }

    #[test]
    fn decreasing_hhat_rejected() {
        let hhat = PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0, -0.5]).unwrap();
        assert!(matches!(
            Ewf1D::new(-1.0, 1.0, hhat, 0.0, 1.0),
            Err(EwfError::NotSupported(_))
        ));
    }

    #[test]
    fn bound_report_and_violation() {
        let est = |mean: f64, se: f64| CostEstimate {
            mean,
            std_error: se,
            replications: 100,
            holding_term: mean,
            idleness_term: 0.0,
            truncation_bound: 0.0,
        };
        // Comfortable pass with shrinking gap.
        let report = verify_lower_bound(
            &[(10.0, est(3.0, 0.05)), (40.0, est(2.5, 0.05))],
            2.0,
            3.0,
        )
        .unwrap();
        assert!(report.trend_improving);
        assert!((report.per_r[0].gap - 1.0).abs() < 1e-12);
        // Constructed violation: mean = bound - 10 se.
        let err = verify_lower_bound(
            &[(10.0, est(3.0, 0.05)), (40.0, est(1.5, 0.05))],
            2.0,
            3.0,
        )
        .unwrap_err();
        assert!(matches!(err, EwfError::BoundViolated { r, .. } if r == 40.0));
        // Too few r values.
        assert!(matches!(
            verify_lower_bound(&[(10.0, est(3.0, 0.05))], 2.0, 3.0),
            Err(EwfError::BadInput(_))
        ));
    }
}
