//! Experiment modes: structural analysis, trajectory export, Monte Carlo
//! cost tables, the workload lower-bound report, and the statistical
//! validation suite. Every mode writes its artifacts plus a manifest that
//! pins the resolved configuration hash and seeds, so reruns are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use qnetlab::cost::{monte_carlo_cost, rep_seed, CostEstimate};
use qnetlab::ewf::{ewf_value_1d, rbm_monte_carlo, verify_lower_bound, BoundReport, Ewf1D};
use qnetlab::network::Instance;
use qnetlab::scaling::{default_grid, event_grid, martingale_diagnostics, scale, time_transform};
use qnetlab::sim::{simulate, Trajectory};
use qnetlab::workload::{effective_cost, WorkloadData};
use qnetlab::CostConfig;

use crate::config::ExperimentConfig;

/// Full-precision decimal (17 significant digits) for CSV cells.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

#[derive(Serialize)]
struct Manifest<'a> {
    mode: &'a str,
    package_version: &'a str,
    config_sha256: String,
    base_seed: u64,
    r_list: &'a [f64],
    replications: usize,
    outputs: Vec<String>,
}

fn write_manifest(
    cfg: &ExperimentConfig,
    mode: &str,
    dir: &Path,
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let canonical = serde_json::to_string(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let manifest = Manifest {
        mode,
        package_version: env!("CARGO_PKG_VERSION"),
        config_sha256: format!("{:x}", hasher.finalize()),
        base_seed: cfg.experiment.base_seed,
        r_list: &cfg.experiment.r_list,
        replications: cfg.experiment.replications,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    write_json(dir, "manifest.json", &manifest)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub buffers: usize,
    pub servers: usize,
    pub activities: usize,
    pub exogenous: usize,
    pub x_star: Vec<f64>,
    pub rho_star: f64,
    pub basic_set: Vec<usize>,
    pub activity_relabeling: Vec<usize>,
    pub r_mat: Vec<Vec<f64>>,
    pub k_mat: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub g_mat: Vec<Vec<f64>>,
    pub lower_norm_c: f64,
    /// Effective cost of one unit of workload per workload coordinate.
    pub effective_cost_unit: Vec<f64>,
    pub workload_drift: Option<f64>,
    pub workload_variance: Option<f64>,
}

pub fn analyze_report(cfg: &ExperimentConfig) -> Result<AnalyzeReport> {
    let inst = cfg.instance()?;
    let wd = cfg.workload_data(&inst)?;
    let cc = cfg.cost_config(&inst)?;
    let htd = &inst.htd;
    let l_n = wd.workload_dim();
    let mut unit_costs = Vec::with_capacity(l_n);
    for l in 0..l_n {
        let mut w = nalgebra::DVector::zeros(l_n);
        w[l] = 1.0;
        unit_costs.push(effective_cost(&wd, &cc.h, &w).map_err(|e| anyhow!("{e}"))?);
    }
    let (drift, variance) = if l_n == 1 {
        (
            Some((&wd.lambda * &htd.theta)[0]),
            Some((&wd.lambda * &htd.sigma * wd.lambda.transpose())[(0, 0)]),
        )
    } else {
        (None, None)
    };
    Ok(AnalyzeReport {
        buffers: htd.topology.num_buffers,
        servers: htd.topology.num_servers,
        activities: htd.topology.num_activities,
        exogenous: htd.topology.num_exogenous,
        x_star: htd.x_star.iter().copied().collect(),
        rho_star: htd.rho_star,
        basic_set: htd.basic_set.clone(),
        activity_relabeling: htd.perm.iter().map(|&j| j + 1).collect(),
        r_mat: rows(&htd.r_mat),
        k_mat: rows(&htd.k_mat),
        theta: htd.theta.iter().copied().collect(),
        sigma: rows(&htd.sigma),
        lambda: rows(&wd.lambda),
        g_mat: rows(&wd.g_mat),
        lower_norm_c: wd.lower_norm_c,
        effective_cost_unit: unit_costs,
        workload_drift: drift,
        workload_variance: variance,
    })
}

pub fn run_analyze(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let report = analyze_report(cfg)?;
    println!("nominal allocation x*   : {:?}", report.x_star);
    println!("load rho*               : {}", report.rho_star);
    println!("basic activities        : {:?}", report.basic_set);
    println!("workload matrix Lambda  : {:?}", report.lambda);
    println!("effective cost per unit : {:?}", report.effective_cost_unit);
    let path = write_json(dir, "analysis.json", &report)?;
    let manifest = write_manifest(cfg, "analyze", dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn event_log_csv(traj: &Trajectory) -> String {
    let i_n = traj.initial_queue.len();
    let j_n = traj.server_of.len();
    let k_n = traj.num_servers;
    let mut out = String::from("ell,time,kind,entity");
    for i in 1..=i_n {
        out += &format!(",Q_{i}");
    }
    for j in 1..=j_n {
        out += &format!(",T_{j}");
    }
    for k in 1..=k_n {
        out += &format!(",I_{k}");
    }
    out.push('\n');
    let mut push_row = |l: usize, kind: &str, entity: usize| {
        out += &format!("{l},{},{kind},{entity}", num(traj.time(l)));
        for i in 0..i_n {
            out += &format!(",{}", traj.records[l].queues[i]);
        }
        for j in 0..j_n {
            out += &format!(",{}", num(traj.alloc_time[l][j]));
        }
        for k in 0..k_n {
            out += &format!(",{}", num(traj.idle_time[l][k]));
        }
        out.push('\n');
    };
    for l in 0..traj.len() {
        if l == 0 {
            push_row(0, "init", 0);
            continue;
        }
        for &i in &traj.fired_arrivals[l] {
            push_row(l, "arrival", i + 1);
        }
        for &j in &traj.fired_completions[l] {
            push_row(l, "completion", j + 1);
        }
    }
    out
}

fn scaled_csv(
    traj: &Trajectory,
    inst: &Instance,
    wd: &WorkloadData,
) -> Result<String> {
    let grid = default_grid(traj);
    let st = scale(traj, inst, wd, &grid).map_err(|e| anyhow!("{e}"))?;
    let i_n = inst.htd.topology.num_buffers;
    let j_n = inst.htd.topology.num_activities;
    let k_n = inst.htd.topology.num_servers;
    let l_n = wd.workload_dim();
    let u_n = inst.htd.u_dim();
    let mut out = String::from("time");
    let cols: Vec<(String, usize)> = [
        ("Qbar", i_n),
        ("Ibar", k_n),
        ("Tbar", j_n),
        ("Ebar", i_n),
        ("Sbar", j_n),
        ("Ehat", i_n),
        ("Shat", j_n),
        ("Qhat", i_n),
        ("What", l_n),
        ("Uhat", u_n),
        ("Yhat", j_n),
        ("Xhat", i_n),
    ]
    .iter()
    .map(|(n, c)| (n.to_string(), *c))
    .collect();
    for (name, count) in &cols {
        for c in 1..=*count {
            out += &format!(",{name}_{c}");
        }
    }
    out.push('\n');
    for (k, &t) in st.grid.iter().enumerate() {
        out += &num(t);
        for row in [
            &st.fluid_queue[k],
            &st.fluid_idle[k],
            &st.fluid_alloc[k],
            &st.fluid_arrivals[k],
            &st.fluid_completions[k],
            &st.diff_arrivals[k],
            &st.diff_completions[k],
            &st.diff_queue[k],
            &st.diff_workload[k],
            &st.diff_idle_dev[k],
            &st.diff_deviation[k],
            &st.free_process[k],
        ] {
            for v in row.iter() {
                out += &format!(",{}", num(*v));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn run_simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let wd = cfg.workload_data(&inst)?;
    let cc = cfg.cost_config(&inst)?;
    let mut outputs = Vec::new();
    for &r in &cfg.experiment.r_list {
        let traj = simulate(
            &inst,
            &cfg.policy,
            r,
            cc.horizon_scaled,
            cfg.experiment.base_seed,
        )
        .map_err(|e| anyhow!("simulation failed at r = {r}: {e}"))?;
        outputs.push(write_text(
            dir,
            &format!("events_r{r}.csv"),
            &event_log_csv(&traj),
        )?);
        outputs.push(write_text(
            dir,
            &format!("scaled_r{r}.csv"),
            &scaled_csv(&traj, &inst, &wd)?,
        )?);
        println!("r = {r}: {} events", traj.len() - 1);
    }
    outputs.push(write_manifest(cfg, "simulate", dir, &outputs.clone())?);
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

fn policy_label(cfg: &ExperimentConfig) -> String {
    serde_json::to_value(&cfg.policy)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str().map(String::from)))
        .unwrap_or_else(|| "policy".into())
}

fn cost_table(cfg: &ExperimentConfig, inst: &Instance, cc: &CostConfig) -> Result<Vec<(f64, CostEstimate)>> {
    let reps = cfg.experiment.replications;
    cfg.experiment
        .r_list
        .iter()
        .map(|&r| {
            let est = monte_carlo_cost(inst, &cfg.policy, r, cc, reps, cfg.experiment.base_seed)
                .map_err(|e| anyhow!("cost estimation failed at r = {r}: {e}"))?;
            Ok((r, est))
        })
        .collect()
}

fn costs_csv(cfg: &ExperimentConfig, table: &[(f64, CostEstimate)]) -> String {
    let label = policy_label(cfg);
    let mut out =
        String::from("r,policy,reps,mean,se,holding_term,idleness_term,truncation_bound\n");
    for (r, est) in table {
        out += &format!(
            "{},{},{},{},{},{},{},{}\n",
            num(*r),
            label,
            est.replications,
            num(est.mean),
            num(est.std_error),
            num(est.holding_term),
            num(est.idleness_term),
            num(est.truncation_bound),
        );
    }
    out
}

pub fn run_cost(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let cc = cfg.cost_config(&inst)?;
    let table = cost_table(cfg, &inst, &cc)?;
    for (r, est) in &table {
        println!(
            "r = {r}: mean {:.6} (se {:.6}, holding {:.6}, idleness {:.6})",
            est.mean, est.std_error, est.holding_term, est.idleness_term
        );
    }
    let path = write_text(dir, "costs.csv", &costs_csv(cfg, &table))?;
    let manifest = write_manifest(cfg, "cost", dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

// ---------------------------------------------------------------------------
// bound
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct BoundArtifact {
    pub w: f64,
    #[serde(flatten)]
    pub report: BoundReport,
    pub drift: f64,
    pub variance: f64,
    pub hhat_slopes: Vec<f64>,
    pub push_cost: f64,
    /// Reflected-diffusion cross-check of the ODE value.
    pub rbm_mean: f64,
    pub rbm_se: f64,
    pub rbm_mean_half_dt: f64,
}

pub fn bound_artifact(cfg: &ExperimentConfig) -> Result<BoundArtifact> {
    let inst = cfg.instance()?;
    let wd = cfg.workload_data(&inst)?;
    let cc = cfg.cost_config(&inst)?;
    let ewf = Ewf1D::from_instance(&inst, &wd, &cc).map_err(|e| {
        anyhow!("workload control problem not solvable ({e}); rerun `cost` for estimates only")
    })?;
    let w = (&wd.lambda * &inst.htd.limits.q0)[0];
    let bound = ewf_value_1d(&ewf, w).map_err(|e| anyhow!("{e}"))?;

    // Dual-oracle guard: the ODE value must match the reflected-diffusion
    // Monte Carlo before it is trusted, with the step size Richardson-checked.
    let seed = cfg.experiment.base_seed ^ 0x5EED_0FF5;
    let dt = ewf.default_dt();
    let t_max = ewf.default_t_max();
    let (mc, se) = rbm_monte_carlo(&ewf, w, t_max, dt, 10_000, seed);
    let (mc_half, se_half) = rbm_monte_carlo(&ewf, w, t_max, dt / 2.0, 10_000, seed + 1);
    if (bound - mc_half).abs() > 3.0 * se_half {
        bail!(
            "EWF oracles disagree: ODE {bound} vs reflected-diffusion {mc_half} +- {se_half}"
        );
    }
    if (mc - mc_half).abs() > 3.0 * (se * se + se_half * se_half).sqrt() {
        bail!("reflected-diffusion discretization not converged: {mc} vs {mc_half}");
    }

    let table = cost_table(cfg, &inst, &cc)?;
    let report = verify_lower_bound(&table, bound, cfg.experiment.bound_slack_ses)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(BoundArtifact {
        w,
        report,
        drift: ewf.drift,
        variance: ewf.variance,
        hhat_slopes: ewf.hhat.slopes.clone(),
        push_cost: ewf.push_cost,
        rbm_mean: mc,
        rbm_se: se,
        rbm_mean_half_dt: mc_half,
    })
}

pub fn run_bound(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let artifact = bound_artifact(cfg)?;
    println!(
        "workload w = {:.6}, lower bound J0*(w) = {:.6}",
        artifact.w, artifact.report.bound
    );
    for e in &artifact.report.per_r {
        println!(
            "r = {}: mean {:.6} (se {:.6}), gap {:+.6}",
            e.r, e.mean, e.se, e.gap
        );
    }
    println!(
        "gap trend improving: {}",
        artifact.report.trend_improving
    );
    let report_path = write_json(dir, "bound.json", &artifact)?;
    let manifest = write_manifest(cfg, "bound", dir, std::slice::from_ref(&report_path))?;
    Ok(vec![report_path, manifest])
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct FcltCheck {
    pub r: f64,
    pub replications: usize,
    pub empirical_variance: Vec<f64>,
    pub predicted_variance: Vec<f64>,
    pub max_relative_error: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct LlnCheck {
    pub r_low: f64,
    pub r_high: f64,
    pub replications: usize,
    pub median_sup_low: f64,
    pub median_sup_high: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct MartingaleCheck {
    pub label: String,
    pub steps: u64,
    pub mean_increment: f64,
    pub se_increment: f64,
    pub qv_empirical: f64,
    pub qv_predicted: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct TimeTransformCheck {
    pub max_roundtrip_error: f64,
    pub lipschitz_ok: bool,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct ValidateArtifact {
    pub fclt: FcltCheck,
    pub lln: LlnCheck,
    pub martingales: Vec<MartingaleCheck>,
    pub time_transform: TimeTransformCheck,
    pub pass: bool,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-replication values of the free process at scaled time 1.
pub fn free_process_samples(
    cfg: &ExperimentConfig,
    inst: &Instance,
    wd: &WorkloadData,
    r: f64,
    reps: usize,
) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    (0..reps)
        .into_par_iter()
        .map(|k| {
            let seed = rep_seed(cfg.experiment.base_seed ^ 0xFC17, k as u64);
            let traj = simulate(inst, &cfg.policy, r, 1.0, seed)
                .map_err(|e| anyhow!("fclt replication failed: {e}"))?;
            let st = scale(&traj, inst, wd, &[1.0]).map_err(|e| anyhow!("{e}"))?;
            Ok(st.free_process[0].clone())
        })
        .collect()
}

pub fn fclt_check(
    cfg: &ExperimentConfig,
    inst: &Instance,
    wd: &WorkloadData,
    r: f64,
    reps: usize,
    tol: f64,
) -> Result<FcltCheck> {
    let samples = free_process_samples(cfg, inst, wd, r, reps)?;
    let i_n = inst.htd.topology.num_buffers;
    let mut emp = Vec::with_capacity(i_n);
    let mut pred = Vec::with_capacity(i_n);
    let mut max_rel: f64 = 0.0;
    for i in 0..i_n {
        let vals: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps as f64 - 1.0);
        let target = inst.htd.sigma[(i, i)];
        emp.push(var);
        pred.push(target);
        if target > 0.0 {
            max_rel = max_rel.max((var - target).abs() / target);
        }
    }
    Ok(FcltCheck {
        r,
        replications: reps,
        empirical_variance: emp,
        predicted_variance: pred,
        max_relative_error: max_rel,
        pass: max_rel <= tol,
    })
}

pub fn lln_medians(
    cfg: &ExperimentConfig,
    inst: &Instance,
    r: f64,
    reps: usize,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..reps)
        .into_par_iter()
        .map(|k| {
            let seed = rep_seed(cfg.experiment.base_seed ^ 0x11A, k as u64);
            let traj = simulate(inst, &cfg.policy, r, 1.0, seed)
                .map_err(|e| anyhow!("lln replication failed: {e}"))?;
            let r2 = r * r;
            let mut sup: f64 = 0.0;
            for l in 0..traj.len() {
                let norm: f64 = traj.records[l]
                    .queues
                    .iter()
                    .map(|&q| (q as f64 / r2) * (q as f64 / r2))
                    .sum::<f64>()
                    .sqrt();
                sup = sup.max(norm);
            }
            Ok(sup)
        })
        .collect()
}

pub fn run_validate(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let wd = cfg.workload_data(&inst)?;
    let v = &cfg.experiment.validate;

    let fclt = fclt_check(cfg, &inst, &wd, v.fclt_r, v.fclt_reps, 0.15)?;

    let mut sup_low = lln_medians(cfg, &inst, v.lln_r[0], v.lln_reps)?;
    let mut sup_high = lln_medians(cfg, &inst, v.lln_r[1], v.lln_reps)?;
    let med_low = median(&mut sup_low);
    let med_high = median(&mut sup_high);
    let lln = LlnCheck {
        r_low: v.lln_r[0],
        r_high: v.lln_r[1],
        replications: v.lln_reps,
        median_sup_low: med_low,
        median_sup_high: med_high,
        pass: med_high < med_low && med_high <= 0.2,
    };

    let counts_a = vec![v.martingale_steps; inst.htd.topology.num_buffers];
    let counts_s = vec![v.martingale_steps; inst.htd.topology.num_activities];
    let report = martingale_diagnostics(
        &inst,
        v.martingale_r,
        cfg.experiment.base_seed ^ 0x3A47,
        &counts_a,
        &counts_s,
    )
    .map_err(|e| anyhow!("{e}"))?;
    let mut martingales = Vec::new();
    for s in report.arrival.iter().chain(report.service.iter()) {
        martingales.push(MartingaleCheck {
            label: s.label.clone(),
            steps: s.steps,
            mean_increment: s.mean_increment,
            se_increment: s.se_increment,
            qv_empirical: s.qv_empirical,
            qv_predicted: s.qv_predicted,
            pass: s.mean_within(3.0) && s.qv_relative_error() < 0.10,
        });
    }
    for s in &report.routing {
        let pass = if s.qv_predicted == 0.0 {
            s.qv_empirical == 0.0
        } else {
            s.mean_within(3.0) && s.qv_relative_error() < 0.10
        };
        martingales.push(MartingaleCheck {
            label: s.label.clone(),
            steps: s.steps,
            mean_increment: s.mean_increment,
            se_increment: s.se_increment,
            qv_empirical: s.qv_empirical,
            qv_predicted: s.qv_predicted,
            pass,
        });
    }

    // Time-transform diagnostics on one simulated path per r.
    let mut max_roundtrip: f64 = 0.0;
    let mut lipschitz_ok = true;
    for &r in &cfg.experiment.r_list {
        let traj = simulate(&inst, &cfg.policy, r, 1.0, cfg.experiment.base_seed)
            .map_err(|e| anyhow!("{e}"))?;
        let st = scale(&traj, &inst, &wd, &event_grid(&traj)).map_err(|e| anyhow!("{e}"))?;
        let tt = time_transform(&st).map_err(|e| anyhow!("{e}"))?;
        for &t in &st.grid {
            max_roundtrip = max_roundtrip.max((tt.tau_inv_at(tt.tau_at(t)) - t).abs());
        }
        for k in 1..tt.tau.len() {
            let ds = tt.tau[k] - tt.tau[k - 1];
            let dt = tt.times[k] - tt.times[k - 1];
            if dt > ds + 1e-9 {
                lipschitz_ok = false;
            }
            for m in 0..tt.idle_dev[k].len() {
                let du = tt.idle_dev[k][m] - tt.idle_dev[k - 1][m];
                if du < -1e-9 || du > ds + 1e-9 {
                    lipschitz_ok = false;
                }
            }
        }
    }
    let time_transform_check = TimeTransformCheck {
        max_roundtrip_error: max_roundtrip,
        lipschitz_ok,
        pass: max_roundtrip < 1e-9 && lipschitz_ok,
    };

    let pass = fclt.pass
        && lln.pass
        && martingales.iter().all(|m| m.pass)
        && time_transform_check.pass;
    let artifact = ValidateArtifact {
        fclt,
        lln,
        martingales,
        time_transform: time_transform_check,
        pass,
    };
    println!(
        "fclt: max relative variance error {:.4} -> {}",
        artifact.fclt.max_relative_error,
        if artifact.fclt.pass { "pass" } else { "FAIL" }
    );
    println!(
        "lln: median sup |Qbar| {:.4} (r = {}) vs {:.4} (r = {}) -> {}",
        artifact.lln.median_sup_low,
        artifact.lln.r_low,
        artifact.lln.median_sup_high,
        artifact.lln.r_high,
        if artifact.lln.pass { "pass" } else { "FAIL" }
    );
    for m in &artifact.martingales {
        println!(
            "{}: qv {:.6} vs {:.6} -> {}",
            m.label,
            m.qv_empirical,
            m.qv_predicted,
            if m.pass { "pass" } else { "FAIL" }
        );
    }
    println!(
        "time transform: roundtrip {:.2e} -> {}",
        artifact.time_transform.max_roundtrip_error,
        if artifact.time_transform.pass { "pass" } else { "FAIL" }
    );

    let path = write_json(dir, "validate.json", &artifact)?;
    let manifest = write_manifest(cfg, "validate", dir, std::slice::from_ref(&path))?;
    if !pass {
        bail!("validation suite failed (see validate.json)");
    }
    Ok(vec![path, manifest])
}
