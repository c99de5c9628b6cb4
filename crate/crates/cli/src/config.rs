//! Experiment configuration: a single TOML document describing the
//! network, its limit laws, the policy, the workload matrix, the cost and
//! the run plan. Any key can be overridden from the environment with
//! `QNETLAB_SECTION__KEY=value` (double underscore separates path
//! segments; values are parsed as TOML).

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use qnetlab::network::{Instance, NetworkTopology, RoutingVector, SigmaConvention};
use qnetlab::policy::PolicySpec;
use qnetlab::primitives::{DistributionFamily, DistributionSpec};
use qnetlab::workload::{build_workload, WorkloadData, WorkloadSpec};
use qnetlab::CostConfig;

pub const ENV_PREFIX: &str = "QNETLAB_";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDist {
    pub family: DistributionFamily,
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl RawDist {
    fn build(&self, key: &str) -> Result<DistributionSpec> {
        DistributionSpec::new(self.family, self.mean, self.sd)
            .map_err(|e| anyhow!("{key}: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteTo {
    pub buffer: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoutingCfg {
    #[serde(default)]
    pub exit: f64,
    #[serde(default)]
    pub to: Vec<RouteTo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivityCfg {
    pub buffer: usize,
    pub server: usize,
    pub service: RawDist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingCfg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalCfg {
    pub buffer: usize,
    pub dist: RawDist,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitsCfg {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub q0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCfg {
    pub buffers: usize,
    pub servers: usize,
    pub exogenous: usize,
    pub activities: Vec<ActivityCfg>,
    pub arrivals: Vec<ArrivalCfg>,
    pub limits: LimitsCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaCfg {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl Default for LambdaCfg {
    fn default() -> Self {
        LambdaCfg::Named("auto".into())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WorkloadCfg {
    #[serde(default)]
    pub lambda: LambdaCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostCfg {
    pub gamma: Option<f64>,
    pub h: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Vec<f64>,
    pub horizon_scaled: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

fn default_slack() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateCfg {
    pub fclt_r: f64,
    pub fclt_reps: usize,
    pub lln_r: [f64; 2],
    pub lln_reps: usize,
    pub martingale_r: f64,
    pub martingale_steps: u64,
}

impl Default for ValidateCfg {
    fn default() -> Self {
        ValidateCfg {
            fclt_r: 50.0,
            fclt_reps: 2000,
            lln_r: [10.0, 30.0],
            lln_reps: 100,
            martingale_r: 20.0,
            martingale_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentCfg {
    pub r_list: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub sigma_convention: SigmaConvention,
    #[serde(default = "default_slack")]
    pub bound_slack_ses: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub validate: ValidateCfg,
}

fn default_out_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkCfg,
    pub policy: PolicySpec,
    #[serde(default)]
    pub workload: WorkloadCfg,
    pub cost: CostCfg,
    pub experiment: ExperimentCfg,
}

impl ExperimentConfig {
    /// Parse from TOML text, then apply environment overrides.
    pub fn parse(text: &str, env: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Value = text.parse().context("config is not valid TOML")?;
        apply_env_overrides(&mut value, env)?;
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e| anyhow!("config error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cost.gamma.is_none() {
            bail!("cost.gamma required");
        }
        if self.cost.h.is_none() {
            bail!("cost.h required");
        }
        if self.cost.horizon_scaled.is_none() {
            bail!("cost.horizon_scaled required");
        }
        let r = &self.experiment.r_list;
        if r.is_empty() || r.windows(2).any(|w| w[1] <= w[0]) || r.iter().any(|&x| x <= 0.0) {
            bail!("experiment.r_list must be strictly increasing and positive");
        }
        if self.experiment.replications < 2 {
            bail!("experiment.replications must be at least 2");
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        let n = &self.network;
        let pairs: Vec<(usize, usize)> =
            n.activities.iter().map(|a| (a.buffer, a.server)).collect();
        let routing: Vec<RoutingVector> = n
            .activities
            .iter()
            .enumerate()
            .map(|(j, a)| match &a.routing {
                None => Ok(RoutingVector::all_exit(n.buffers)),
                Some(r) => {
                    let mut to = vec![0.0; n.buffers];
                    for rt in &r.to {
                        if rt.buffer == 0 || rt.buffer > n.buffers {
                            bail!(
                                "network.activities[{}].routing refers to buffer {}",
                                j,
                                rt.buffer
                            );
                        }
                        to[rt.buffer - 1] += rt.prob;
                    }
                    Ok(RoutingVector { exit: r.exit, to })
                }
            })
            .collect::<Result<_>>()?;
        Ok(NetworkTopology::from_activities(
            n.buffers, n.servers, n.exogenous, &pairs, routing,
        ))
    }

    /// Build the analyzed instance from the configured laws.
    pub fn instance(&self) -> Result<Instance> {
        let topo = self.topology()?;
        let n = &self.network;
        if n.arrivals.len() != n.exogenous {
            bail!(
                "network.arrivals must list {} exogenous buffers, got {}",
                n.exogenous,
                n.arrivals.len()
            );
        }
        let mut arrival_specs = vec![None; n.exogenous];
        for a in &n.arrivals {
            if a.buffer == 0 || a.buffer > n.exogenous {
                bail!("network.arrivals: buffer {} is not exogenous", a.buffer);
            }
            arrival_specs[a.buffer - 1] =
                Some(a.dist.build(&format!("network.arrivals[{}]", a.buffer))?);
        }
        let arrival_specs: Vec<DistributionSpec> = arrival_specs
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| anyhow!("network.arrivals missing buffer {}", i + 1)))
            .collect::<Result<_>>()?;
        let service_specs: Vec<DistributionSpec> = n
            .activities
            .iter()
            .enumerate()
            .map(|(j, a)| a.service.build(&format!("network.activities[{j}].service")))
            .collect::<Result<_>>()?;
        let lim = &n.limits;
        Instance::build(
            &topo,
            arrival_specs,
            service_specs,
            DVector::from_row_slice(&lim.theta1),
            DVector::from_row_slice(&lim.theta2),
            DVector::from_row_slice(&lim.q0),
            self.experiment.sigma_convention,
        )
        .map_err(|e| anyhow!("network analysis failed: {e}"))
    }

    pub fn workload_data(&self, inst: &Instance) -> Result<WorkloadData> {
        let spec = match &self.workload.lambda {
            LambdaCfg::Named(name) if name == "auto" => WorkloadSpec::Auto,
            LambdaCfg::Named(other) => bail!("workload.lambda: unknown keyword {other:?}"),
            LambdaCfg::Rows(rows) => {
                let l = rows.len();
                let i_n = self.network.buffers;
                if rows.iter().any(|r| r.len() != i_n) {
                    bail!("workload.lambda rows must have {} entries", i_n);
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                WorkloadSpec::Given(DMatrix::from_row_slice(l, i_n, &flat))
            }
        };
        build_workload(&inst.htd, &spec).map_err(|e| anyhow!("workload construction failed: {e}"))
    }

    pub fn cost_config(&self, inst: &Instance) -> Result<CostConfig> {
        let cc = CostConfig {
            gamma: self.cost.gamma.expect("validated"),
            h: DVector::from_row_slice(self.cost.h.as_ref().expect("validated")),
            p: if self.cost.p.is_empty() {
                DVector::zeros(inst.htd.u_dim())
            } else {
                DVector::from_row_slice(&self.cost.p)
            },
            horizon_scaled: self.cost.horizon_scaled.expect("validated"),
            tail_tol: self.cost.tail_tol,
        };
        if cc.h.len() != self.network.buffers {
            bail!("cost.h must have {} entries", self.network.buffers);
        }
        if cc.p.len() != inst.htd.u_dim() {
            bail!(
                "cost.p must have {} entries (servers + nonbasic activities)",
                inst.htd.u_dim()
            );
        }
        cc.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(cc)
    }
}

/// Overlay `QNETLAB_A__B=value` pairs onto the parsed TOML tree.
fn apply_env_overrides(value: &mut toml::Value, env: &[(String, String)]) -> Result<()> {
    for (key, raw) in env {
        let Some(path) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let segments: Vec<String> = path.split("__").map(|s| s.to_lowercase()).collect();
        if segments.is_empty() {
            continue;
        }
        let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
            Ok(toml::Value::Table(t)) => t["v"].clone(),
            _ => toml::Value::String(raw.clone()),
        };
        let mut node = &mut *value;
        for seg in &segments[..segments.len() - 1] {
            node = node
                .as_table_mut()
                .ok_or_else(|| anyhow!("override {key}: {seg} is not a table"))?
                .entry(seg.clone())
                .or_insert(toml::Value::Table(Default::default()));
        }
        node.as_table_mut()
            .ok_or_else(|| anyhow!("override {key}: parent is not a table"))?
            .insert(segments.last().unwrap().clone(), parsed);
    }
    Ok(())
}

/// The N2 example shipped with the repository.
pub fn n2_example_toml() -> &'static str {
    include_str!("../configs/n2.toml")
}

/// The N1 example shipped with the repository.
pub fn n1_example_toml() -> &'static str {
    include_str!("../configs/n1.toml")
}
