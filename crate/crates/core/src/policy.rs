//! Scheduling policies: deterministic maps from the event history to a
//! 0/1 activity allocation, held constant between events.
//!
//! A policy sees only the history records (event times, residual clocks,
//! queue lengths, the previous allocation) and nothing else, which is what
//! makes every policy built on this interface nonanticipative. Allocations
//! must respect one job per server and at most one active activity per
//! queued job.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::NetworkTopology;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("bad ranking: {0}")]
    BadRanking(String),
    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),
    #[error("policy not applicable: {0}")]
    NotApplicable(String),
}

/// One entry of the event history chi^l, exposed to policies.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    /// Event time.
    pub time: f64,
    /// Queue lengths at this event (after all simultaneous updates).
    pub queues: Vec<i64>,
    /// Residual interarrival time per buffer; infinite for buffers with
    /// no exogenous arrivals.
    pub resid_arrival: Vec<f64>,
    /// Residual service requirement per activity (frozen while inactive).
    pub resid_service: Vec<f64>,
    /// Allocation that was in force on the interval ending here.
    pub alloc_prev: Vec<u8>,
}

/// A 0/1 vector over the activities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation(pub Vec<u8>);

impl Allocation {
    pub fn idle(num_activities: usize) -> Self {
        Allocation(vec![0; num_activities])
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.0[j] != 0
    }

    /// Per-server capacity and per-buffer availability.
    pub fn validate(&self, topo: &NetworkTopology, queues: &[i64]) -> Result<(), PolicyError> {
        if self.0.len() != topo.num_activities {
            return Err(PolicyError::InfeasibleAllocation(format!(
                "length {} vs {} activities",
                self.0.len(),
                topo.num_activities
            )));
        }
        if self.0.iter().any(|&a| a > 1) {
            return Err(PolicyError::InfeasibleAllocation("entries must be 0 or 1".into()));
        }
        for k in 0..topo.num_servers {
            let busy: u32 = (0..topo.num_activities)
                .filter(|&j| topo.constituency_servers[(k, j)] != 0.0)
                .map(|j| self.0[j] as u32)
                .sum();
            if busy > 1 {
                return Err(PolicyError::InfeasibleAllocation(format!(
                    "server {} assigned {} activities",
                    k + 1,
                    busy
                )));
            }
        }
        for (i, &queued) in queues.iter().enumerate().take(topo.num_buffers) {
            let active: i64 = topo
                .activities_of_buffer(i)
                .into_iter()
                .map(|j| self.0[j] as i64)
                .sum();
            if active > queued {
                return Err(PolicyError::InfeasibleAllocation(format!(
                    "buffer {} has {} jobs but {} active activities",
                    i + 1,
                    queued,
                    active
                )));
            }
        }
        Ok(())
    }
}

pub trait Policy: Send + Sync {
    /// Choose the allocation to hold until the next event, given the full
    /// history up to and including the current one.
    fn decide(&self, topo: &NetworkTopology, history: &[HistoryRecord]) -> Allocation;
}

/// Serializable policy selector, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Serve buffers in fixed priority order (1-based buffer labels,
    /// highest priority first).
    StaticPriority { ranking: Vec<usize> },
    /// Work-conserving service for networks where each server runs exactly
    /// one activity; FIFO within a class is automatic.
    FifoSingleActivity,
    /// Feasible allocation drawn deterministically from a hash of the
    /// latest history record and a policy seed.
    RandomFeasible { seed: u64 },
    /// Priority order, but a buffer is eligible only while its queue
    /// exceeds its level (level 0 = whenever nonempty).
    Threshold { ranking: Vec<usize>, levels: Vec<u64> },
}

impl PolicySpec {
    /// Static priority by descending h_i * mu_i (the c-mu rule), ties by
    /// buffer label.
    pub fn c_mu(h: &[f64], mu: &[f64]) -> Self {
        let mut order: Vec<usize> = (1..=h.len()).collect();
        order.sort_by(|&a, &b| {
            let pa = h[a - 1] * mu[a - 1];
            let pb = h[b - 1] * mu[b - 1];
            pb.partial_cmp(&pa).unwrap().then(a.cmp(&b))
        });
        PolicySpec::StaticPriority { ranking: order }
    }

    pub fn build(&self, topo: &NetworkTopology) -> Result<Box<dyn Policy>, PolicyError> {
        match self {
            PolicySpec::StaticPriority { ranking } => {
                check_ranking(ranking, topo.num_buffers)?;
                Ok(Box::new(StaticPriority {
                    ranking: ranking.clone(),
                }))
            }
            PolicySpec::FifoSingleActivity => {
                for k in 0..topo.num_servers {
                    let count = (0..topo.num_activities)
                        .filter(|&j| topo.constituency_servers[(k, j)] != 0.0)
                        .count();
                    if count != 1 {
                        return Err(PolicyError::NotApplicable(format!(
                            "server {} runs {} activities; fifo needs exactly one",
                            k + 1,
                            count
                        )));
                    }
                }
                Ok(Box::new(FifoSingleActivity))
            }
            PolicySpec::RandomFeasible { seed } => Ok(Box::new(RandomFeasible { seed: *seed })),
            PolicySpec::Threshold { ranking, levels } => {
                check_ranking(ranking, topo.num_buffers)?;
                if levels.len() != topo.num_buffers {
                    return Err(PolicyError::BadRanking(format!(
                        "levels must have length {}, got {}",
                        topo.num_buffers,
                        levels.len()
                    )));
                }
                Ok(Box::new(Threshold {
                    ranking: ranking.clone(),
                    levels: levels.clone(),
                }))
            }
        }
    }
}

/// The built-in policy catalog with identity-ranking defaults.
pub fn builtin_policies(num_buffers: usize) -> Vec<PolicySpec> {
    let ranking: Vec<usize> = (1..=num_buffers).collect();
    vec![
        PolicySpec::StaticPriority {
            ranking: ranking.clone(),
        },
        PolicySpec::FifoSingleActivity,
        PolicySpec::RandomFeasible { seed: 0 },
        PolicySpec::Threshold {
            ranking,
            levels: vec![0; num_buffers],
        },
    ]
}

/// One-shot decision through a spec; validates feasibility of the result.
pub fn decide(
    spec: &PolicySpec,
    topo: &NetworkTopology,
    history: &[HistoryRecord],
) -> Result<Allocation, PolicyError> {
    let policy = spec.build(topo)?;
    let alloc = policy.decide(topo, history);
    let queues = &history.last().expect("nonempty history").queues;
    alloc.validate(topo, queues)?;
    Ok(alloc)
}

fn check_ranking(ranking: &[usize], num_buffers: usize) -> Result<(), PolicyError> {
    let mut seen = vec![false; num_buffers];
    if ranking.len() != num_buffers {
        return Err(PolicyError::BadRanking(format!(
            "ranking length {} vs {} buffers",
            ranking.len(),
            num_buffers
        )));
    }
    for &b in ranking {
        if b == 0 || b > num_buffers || seen[b - 1] {
            return Err(PolicyError::BadRanking(format!(
                "ranking {ranking:?} is not a permutation of 1..={num_buffers}"
            )));
        }
        seen[b - 1] = true;
    }
    Ok(())
}

/// Greedy fill: walk buffers in the given order, switching on activities
/// while servers are free and queued jobs remain.
fn fill_by_buffer_order(
    topo: &NetworkTopology,
    queues: &[i64],
    order: &[usize],
) -> Allocation {
    let mut alloc = vec![0u8; topo.num_activities];
    let mut server_busy = vec![false; topo.num_servers];
    let mut assigned = vec![0i64; topo.num_buffers];
    for &b in order {
        let i = b - 1;
        for j in topo.activities_of_buffer(i) {
            let k = topo.server_of(j);
            if !server_busy[k] && assigned[i] < queues[i] {
                alloc[j] = 1;
                server_busy[k] = true;
                assigned[i] += 1;
            }
        }
    }
    Allocation(alloc)
}

struct StaticPriority {
    ranking: Vec<usize>,
}

impl Policy for StaticPriority {
    fn decide(&self, topo: &NetworkTopology, history: &[HistoryRecord]) -> Allocation {
        let last = history.last().expect("nonempty history");
        fill_by_buffer_order(topo, &last.queues, &self.ranking)
    }
}

struct FifoSingleActivity;

impl Policy for FifoSingleActivity {
    fn decide(&self, topo: &NetworkTopology, history: &[HistoryRecord]) -> Allocation {
        let last = history.last().expect("nonempty history");
        let order: Vec<usize> = (1..=topo.num_buffers).collect();
        fill_by_buffer_order(topo, &last.queues, &order)
    }
}

struct Threshold {
    ranking: Vec<usize>,
    levels: Vec<u64>,
}

impl Policy for Threshold {
    fn decide(&self, topo: &NetworkTopology, history: &[HistoryRecord]) -> Allocation {
        let last = history.last().expect("nonempty history");
        let eligible: Vec<usize> = self
            .ranking
            .iter()
            .copied()
            .filter(|&b| last.queues[b - 1] > self.levels[b - 1] as i64)
            .collect();
        fill_by_buffer_order(topo, &last.queues, &eligible)
    }
}

struct RandomFeasible {
    seed: u64,
}

impl Policy for RandomFeasible {
    fn decide(&self, topo: &NetworkTopology, history: &[HistoryRecord]) -> Allocation {
        let last = history.last().expect("nonempty history");
        // Randomness is a pure hash of (seed, latest record), so equal
        // histories always produce equal allocations.
        let mut state = splitmix(self.seed ^ 0xA076_1D64_78BD_642F);
        state = splitmix(state ^ (history.len() as u64));
        state = splitmix(state ^ last.time.to_bits());
        for &q in &last.queues {
            state = splitmix(state ^ (q as u64));
        }
        for &u in &last.resid_arrival {
            state = splitmix(state ^ u.to_bits());
        }
        for &v in &last.resid_service {
            state = splitmix(state ^ v.to_bits());
        }
        for &a in &last.alloc_prev {
            state = splitmix(state ^ (a as u64));
        }

        let mut order: Vec<usize> = (0..topo.num_activities).collect();
        for i in (1..order.len()).rev() {
            state = splitmix(state);
            order.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let mut alloc = vec![0u8; topo.num_activities];
        let mut server_busy = vec![false; topo.num_servers];
        let mut assigned = vec![0i64; topo.num_buffers];
        for j in order {
            state = splitmix(state);
            if state & 1 == 0 {
                continue; // idle this activity half the time
            }
            let i = topo.buffer_of(j);
            let k = topo.server_of(j);
            if !server_busy[k] && assigned[i] < last.queues[i] {
                alloc[j] = 1;
                server_busy[k] = true;
                assigned[i] += 1;
            }
        }
        Allocation(alloc)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
