//! Exact event-driven simulation of the controlled network.
//!
//! The event clock advances to the nearest pending arrival or (active)
//! service completion; simultaneous events are batched and processed in a
//! fixed order (arrivals by buffer, then completions by activity) before
//! the policy makes its next decision. Service clocks follow
//! preemptive-resume: they are stored as absolute completion deadlines
//! while the activity runs and as frozen residual work while it does not,
//! so repeated subtraction never accumulates drift.

use thiserror::Error;

use crate::network::Instance;
use crate::policy::{Allocation, HistoryRecord, Policy, PolicyError, PolicySpec};
use crate::primitives::{PrimitiveStreams, PrimitivesError};

/// Relative tolerance for batching events whose times collide.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("queue {buffer} would go negative at t = {time}")]
    NegativeQueue { buffer: usize, time: f64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Primitives(#[from] PrimitivesError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ServiceClock {
    /// Remaining work, frozen while the activity is off.
    Idle { remaining: f64 },
    /// Absolute completion time while the activity runs.
    Active { deadline: f64 },
}

/// Mutable state of one run: queue lengths, cumulative allocations and
/// idleness, event counts, and the residual clocks.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: f64,
    pub queues: Vec<i64>,
    pub alloc_cum: Vec<f64>,
    pub idle_cum: Vec<f64>,
    pub arrivals: Vec<u64>,
    pub completions: Vec<u64>,
    /// Rerouting counts, flattened as `buffer * num_activities + activity`.
    pub routed: Vec<u64>,
    pub alloc: Vec<u8>,
    next_arrival: Vec<f64>,
    service: Vec<ServiceClock>,
    num_servers: usize,
}

impl SimState {
    /// Fresh state at time zero with all residuals drawn anew.
    pub fn initial(
        initial_queue: &[i64],
        num_activities: usize,
        num_servers: usize,
        num_exogenous: usize,
        streams: &PrimitiveStreams,
    ) -> Result<Self, SimError> {
        let i_n = initial_queue.len();
        let mut next_arrival = vec![f64::INFINITY; i_n];
        for (i, slot) in next_arrival.iter_mut().enumerate().take(num_exogenous) {
            *slot = streams.draw_interarrival(i + 1, 1)?;
        }
        let service = (0..num_activities)
            .map(|j| ServiceClock::Idle {
                remaining: streams.draw_service(j + 1, 1),
            })
            .collect();
        Ok(SimState {
            clock: 0.0,
            queues: initial_queue.to_vec(),
            alloc_cum: vec![0.0; num_activities],
            idle_cum: vec![0.0; num_servers],
            arrivals: vec![0; i_n],
            completions: vec![0; num_activities],
            routed: vec![0; i_n * num_activities],
            alloc: vec![0; num_activities],
            next_arrival,
            service,
            num_servers,
        })
    }

    pub fn resid_arrival(&self) -> Vec<f64> {
        self.next_arrival
            .iter()
            .map(|&t| if t.is_finite() { t - self.clock } else { f64::INFINITY })
            .collect()
    }

    pub fn resid_service(&self) -> Vec<f64> {
        self.service
            .iter()
            .map(|s| match s {
                ServiceClock::Idle { remaining } => *remaining,
                ServiceClock::Active { deadline } => deadline - self.clock,
            })
            .collect()
    }

    /// Switch to a new allocation: activating clocks become deadlines,
    /// deactivated ones freeze their residual work. Keyed on the clock
    /// representation, so a fresh requirement drawn at a completion is
    /// scheduled when the activity keeps running.
    fn set_allocation(&mut self, alloc: &Allocation) {
        for j in 0..self.alloc.len() {
            match (alloc.is_active(j), self.service[j]) {
                (true, ServiceClock::Idle { remaining }) => {
                    self.service[j] = ServiceClock::Active {
                        deadline: self.clock + remaining,
                    };
                }
                (false, ServiceClock::Active { deadline }) => {
                    self.service[j] = ServiceClock::Idle {
                        remaining: deadline - self.clock,
                    };
                }
                _ => {}
            }
        }
        self.alloc = alloc.0.clone();
    }
}

/// The next batch of simultaneous events (buffers and activities are
/// 0-based). `None` when nothing can ever fire again.
#[derive(Debug, Clone, PartialEq)]
pub struct NextEvent {
    pub time: f64,
    pub dt: f64,
    pub arrivals: Vec<usize>,
    pub completions: Vec<usize>,
}

/// Find the next event time and every clock attaining it. Arrival clocks
/// always run; service clocks count down only while their activity is on.
pub fn next_event(state: &SimState) -> Option<NextEvent> {
    let mut t_min = f64::INFINITY;
    for &t in &state.next_arrival {
        t_min = t_min.min(t);
    }
    for (j, s) in state.service.iter().enumerate() {
        if state.alloc[j] != 0 {
            if let ServiceClock::Active { deadline } = s {
                t_min = t_min.min(*deadline);
            }
        }
    }
    if !t_min.is_finite() {
        return None;
    }
    let tol = TIE_TOL * t_min.abs().max(1.0);
    let arrivals: Vec<usize> = state
        .next_arrival
        .iter()
        .enumerate()
        .filter(|(_, &t)| t <= t_min + tol)
        .map(|(i, _)| i)
        .collect();
    let completions: Vec<usize> = state
        .service
        .iter()
        .enumerate()
        .filter(|(j, s)| {
            state.alloc[*j] != 0
                && matches!(s, ServiceClock::Active { deadline } if *deadline <= t_min + tol)
        })
        .map(|(j, _)| j)
        .collect();
    Some(NextEvent {
        time: t_min,
        dt: t_min - state.clock,
        arrivals,
        completions,
    })
}

/// Advance the state through one event batch: clocks, counts, queue moves
/// and resampled residuals. Does not decide the next allocation.
pub fn apply_event(
    state: &mut SimState,
    ev: &NextEvent,
    streams: &PrimitiveStreams,
    buffer_of: &[usize],
    server_of: &[usize],
) -> Result<(), SimError> {
    let dt = ev.time - state.clock;
    for j in 0..state.alloc.len() {
        if state.alloc[j] != 0 {
            state.alloc_cum[j] += dt;
        }
    }
    let mut server_busy = vec![false; state.num_servers];
    for j in 0..state.alloc.len() {
        if state.alloc[j] != 0 {
            server_busy[server_of[j]] = true;
        }
    }
    for (k, busy) in server_busy.iter().enumerate() {
        if !busy {
            state.idle_cum[k] += dt;
        }
    }
    state.clock = ev.time;

    // Arrivals first, by buffer index.
    for &i in &ev.arrivals {
        state.arrivals[i] += 1;
        state.queues[i] += 1;
        let n = state.arrivals[i] + 1;
        state.next_arrival[i] = state.clock + streams.draw_interarrival(i + 1, n)?;
    }
    // Then completions, by activity index.
    let num_activities = state.alloc.len();
    for &j in &ev.completions {
        state.completions[j] += 1;
        let i = buffer_of[j];
        state.queues[i] -= 1;
        if state.queues[i] < 0 {
            return Err(SimError::NegativeQueue {
                buffer: i + 1,
                time: state.clock,
            });
        }
        let (dest, _onehot) = streams.draw_routing(j + 1, state.completions[j]);
        if dest > 0 {
            state.queues[dest - 1] += 1;
            state.routed[(dest - 1) * num_activities + j] += 1;
        }
        state.service[j] = ServiceClock::Idle {
            remaining: streams.draw_service(j + 1, state.completions[j] + 1),
        };
    }
    Ok(())
}

/// Full event log of one run. `records[l]` is the policy-visible history
/// entry at the l-th event; the parallel arrays carry counts and
/// cumulative processes at the same instants. All processes extend past
/// the last event to `horizon` under the final allocation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub r: f64,
    /// Unscaled horizon r^2 * horizon_scaled.
    pub horizon: f64,
    pub initial_queue: Vec<i64>,
    pub records: Vec<HistoryRecord>,
    pub allocs: Vec<Vec<u8>>,
    pub fired_arrivals: Vec<Vec<usize>>,
    pub fired_completions: Vec<Vec<usize>>,
    pub arrivals_cum: Vec<Vec<u64>>,
    pub completions_cum: Vec<Vec<u64>>,
    pub routed_cum: Vec<Vec<u64>>,
    pub alloc_time: Vec<Vec<f64>>,
    pub idle_time: Vec<Vec<f64>>,
    pub num_servers: usize,
    pub server_of: Vec<usize>,
    pub deadlocked: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn time(&self, l: usize) -> f64 {
        self.records[l].time
    }

    /// Index l with time(l) <= t < time(l+1).
    pub fn segment(&self, t: f64) -> usize {
        let idx = self.records.partition_point(|rec| rec.time <= t);
        idx.saturating_sub(1)
    }

    pub fn queues_at(&self, t: f64) -> &[i64] {
        &self.records[self.segment(t)].queues
    }

    pub fn arrivals_at(&self, t: f64) -> &[u64] {
        &self.arrivals_cum[self.segment(t)]
    }

    pub fn completions_at(&self, t: f64) -> &[u64] {
        &self.completions_cum[self.segment(t)]
    }

    pub fn routed_at(&self, t: f64) -> &[u64] {
        &self.routed_cum[self.segment(t)]
    }

    pub fn allocation_at(&self, t: f64) -> &[u8] {
        &self.allocs[self.segment(t)]
    }

    /// Cumulative allocation T(t), linear between events.
    pub fn alloc_time_at(&self, t: f64) -> Vec<f64> {
        let l = self.segment(t);
        let dt = t - self.records[l].time;
        self.alloc_time[l]
            .iter()
            .zip(&self.allocs[l])
            .map(|(&base, &a)| base + dt * a as f64)
            .collect()
    }

    /// Cumulative idleness I(t), linear between events.
    pub fn idle_time_at(&self, t: f64) -> Vec<f64> {
        let l = self.segment(t);
        let dt = t - self.records[l].time;
        let mut busy = vec![false; self.num_servers];
        for (j, &a) in self.allocs[l].iter().enumerate() {
            if a != 0 {
                busy[self.server_of[j]] = true;
            }
        }
        self.idle_time[l]
            .iter()
            .zip(&busy)
            .map(|(&base, &b)| base + if b { 0.0 } else { dt })
            .collect()
    }

    /// Check the flow identity: the incrementally maintained queue equals
    /// q0 + E - C S + Phi at every event, as integers.
    pub fn verify_flow_identity(&self, buffer_of: &[usize]) -> Result<(), String> {
        let j_n = buffer_of.len();
        for l in 0..self.len() {
            let rec = &self.records[l];
            for i in 0..rec.queues.len() {
                let served: i64 = (0..j_n)
                    .filter(|&j| buffer_of[j] == i)
                    .map(|j| self.completions_cum[l][j] as i64)
                    .sum();
                let routed_in: i64 = (0..j_n)
                    .map(|j| self.routed_cum[l][i * j_n + j] as i64)
                    .sum();
                let direct = self.initial_queue[i] + self.arrivals_cum[l][i] as i64 - served
                    + routed_in;
                if direct != rec.queues[i] {
                    return Err(format!(
                        "flow identity fails at event {l} buffer {}: {} vs {}",
                        i + 1,
                        rec.queues[i],
                        direct
                    ));
                }
            }
        }
        Ok(())
    }

    /// Max violation of the idleness identity I_k = t - sum_j A_kj T_j
    /// over all events.
    pub fn idleness_identity_gap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..self.len() {
            let t = self.records[l].time;
            for k in 0..self.num_servers {
                let busy_time: f64 = self.alloc_time[l]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| self.server_of[*j] == k)
                    .map(|(_, &v)| v)
                    .sum();
                worst = worst.max((self.idle_time[l][k] - (t - busy_time)).abs());
            }
        }
        worst
    }
}

/// Run one simulation to the scaled horizon. The policy is consulted once
/// after every event batch and its allocation held constant in between.
pub fn simulate(
    inst: &Instance,
    policy: &PolicySpec,
    r: f64,
    horizon_scaled: f64,
    seed: u64,
) -> Result<Trajectory, SimError> {
    let topo = &inst.htd.topology;
    let streams = inst
        .streams(r, seed)
        .map_err(|e| match e {
            crate::network::NetworkError::Primitives(p) => SimError::Primitives(p),
            other => SimError::Policy(PolicyError::NotApplicable(other.to_string())),
        })?;
    let policy: Box<dyn Policy> = policy.build(topo)?;
    let horizon = r * r * horizon_scaled;
    let initial_queue = inst.initial_queue(r);
    let buffer_of: Vec<usize> = (0..topo.num_activities).map(|j| topo.buffer_of(j)).collect();
    let server_of: Vec<usize> = (0..topo.num_activities).map(|j| topo.server_of(j)).collect();

    let mut state = SimState::initial(
        &initial_queue,
        topo.num_activities,
        topo.num_servers,
        topo.num_exogenous,
        &streams,
    )?;

    let mut traj = Trajectory {
        r,
        horizon,
        initial_queue: initial_queue.clone(),
        records: Vec::new(),
        allocs: Vec::new(),
        fired_arrivals: Vec::new(),
        fired_completions: Vec::new(),
        arrivals_cum: Vec::new(),
        completions_cum: Vec::new(),
        routed_cum: Vec::new(),
        alloc_time: Vec::new(),
        idle_time: Vec::new(),
        num_servers: topo.num_servers,
        server_of: server_of.clone(),
        deadlocked: false,
    };

    let push_record =
        |traj: &mut Trajectory, state: &SimState, fired_a: Vec<usize>, fired_c: Vec<usize>| {
            traj.records.push(HistoryRecord {
                time: state.clock,
                queues: state.queues.clone(),
                resid_arrival: state.resid_arrival(),
                resid_service: state.resid_service(),
                alloc_prev: state.alloc.clone(),
            });
            traj.fired_arrivals.push(fired_a);
            traj.fired_completions.push(fired_c);
            traj.arrivals_cum.push(state.arrivals.clone());
            traj.completions_cum.push(state.completions.clone());
            traj.routed_cum.push(state.routed.clone());
            traj.alloc_time.push(state.alloc_cum.clone());
            traj.idle_time.push(state.idle_cum.clone());
        };

    // Event 0: the initial record, then the first decision.
    push_record(&mut traj, &state, Vec::new(), Vec::new());
    let alloc = policy.decide(topo, &traj.records);
    alloc.validate(topo, &state.queues)?;
    state.set_allocation(&alloc);
    traj.allocs.push(state.alloc.clone());

    loop {
        let Some(ev) = next_event(&state) else {
            traj.deadlocked = true;
            break;
        };
        if ev.time > horizon {
            break;
        }
        apply_event(&mut state, &ev, &streams, &buffer_of, &server_of)?;
        push_record(&mut traj, &state, ev.arrivals, ev.completions);
        let alloc = policy.decide(topo, &traj.records);
        alloc.validate(topo, &state.queues)?;
        state.set_allocation(&alloc);
        traj.allocs.push(state.alloc.clone());
    }
    Ok(traj)
}
