//! Reproducible stochastic primitives: interarrival, service and routing
//! streams plus renewal counting.
//!
//! Every variate is addressable as (base seed, stream kind, stream index,
//! draw number): a fresh counter-derived ChaCha generator is keyed per
//! draw, so replay is exact, streams are mutually independent by
//! construction, and draws can be revisited out of order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrimitivesError {
    #[error("buffer {buffer} has no exogenous arrivals")]
    NoExogenousArrivals { buffer: usize },
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("routing vector for activity {activity} is not sub-stochastic")]
    NotStochastic { activity: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionFamily {
    Exponential,
    Deterministic,
    Uniform,
    Gamma,
}

/// A positive law given by family, mean and standard deviation.
///
/// Uniform laws are re-parameterized as [mean - sqrt(3) sd, mean + sqrt(3) sd]
/// and gamma laws by shape (mean/sd)^2 and scale sd^2/mean, so both hit the
/// requested first two moments exactly. Supports must stay strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: DistributionFamily,
    pub mean: f64,
    pub sd: f64,
}

impl DistributionSpec {
    pub fn new(
        family: DistributionFamily,
        mean: f64,
        sd: Option<f64>,
    ) -> Result<Self, PrimitivesError> {
        let sd = match (family, sd) {
            (DistributionFamily::Exponential, None) => mean,
            (DistributionFamily::Deterministic, None) => 0.0,
            (_, Some(s)) => s,
            (f, None) => {
                return Err(PrimitivesError::BadDistribution(format!(
                    "{f:?} requires an explicit sd"
                )))
            }
        };
        let spec = DistributionSpec { family, mean, sd };
        spec.validate()?;
        Ok(spec)
    }

    pub fn exponential(mean: f64) -> Self {
        DistributionSpec {
            family: DistributionFamily::Exponential,
            mean,
            sd: mean,
        }
    }

    pub fn deterministic(value: f64) -> Self {
        DistributionSpec {
            family: DistributionFamily::Deterministic,
            mean: value,
            sd: 0.0,
        }
    }

    pub fn uniform(mean: f64, sd: f64) -> Self {
        DistributionSpec {
            family: DistributionFamily::Uniform,
            mean,
            sd,
        }
    }

    pub fn gamma(mean: f64, sd: f64) -> Self {
        DistributionSpec {
            family: DistributionFamily::Gamma,
            mean,
            sd,
        }
    }

    pub fn validate(&self) -> Result<(), PrimitivesError> {
        let bad = |msg: String| Err(PrimitivesError::BadDistribution(msg));
        if !self.mean.is_finite() || self.mean <= 0.0 {
            return bad(format!("mean must be positive and finite, got {}", self.mean));
        }
        if !self.sd.is_finite() || self.sd < 0.0 {
            return bad(format!("sd must be nonnegative and finite, got {}", self.sd));
        }
        match self.family {
            DistributionFamily::Exponential => {
                if (self.sd - self.mean).abs() > 1e-9 * self.mean {
                    return bad(format!(
                        "exponential sd must equal the mean ({} vs {})",
                        self.sd, self.mean
                    ));
                }
            }
            DistributionFamily::Deterministic => {
                if self.sd != 0.0 {
                    return bad("deterministic law must have sd = 0".into());
                }
            }
            DistributionFamily::Uniform => {
                let lo = self.mean - 3f64.sqrt() * self.sd;
                if lo.is_nan() || lo <= 0.0 {
                    return bad(format!(
                        "uniform support [{lo}, ..] is not bounded away from 0"
                    ));
                }
            }
            DistributionFamily::Gamma => {
                if self.sd <= 0.0 {
                    return bad("gamma law requires sd > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Same family rescaled to a new mean. Exponential keeps sd = mean and
    /// deterministic keeps sd = 0; uniform and gamma keep their sd.
    pub fn with_mean(&self, mean: f64) -> Self {
        let sd = match self.family {
            DistributionFamily::Exponential => mean,
            DistributionFamily::Deterministic => 0.0,
            _ => self.sd,
        };
        DistributionSpec {
            family: self.family,
            mean,
            sd,
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self.family {
            DistributionFamily::Deterministic => self.mean,
            DistributionFamily::Exponential => -self.mean * open_unit(rng).ln(),
            DistributionFamily::Uniform => {
                if self.sd == 0.0 {
                    return self.mean;
                }
                let half = 3f64.sqrt() * self.sd;
                (self.mean - half) + 2.0 * half * open_unit(rng)
            }
            DistributionFamily::Gamma => {
                let shape = (self.mean / self.sd) * (self.mean / self.sd);
                let scale = self.sd * self.sd / self.mean;
                let g = Gamma::new(shape, scale).expect("validated gamma parameters");
                let v: f64 = g.sample(rng);
                v.max(f64::MIN_POSITIVE)
            }
        }
    }
}

/// Uniform on the open interval (0, 1); never returns an endpoint.
fn open_unit(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.gen::<u64>() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const KIND_ARRIVAL: u64 = 1;
const KIND_SERVICE: u64 = 2;
const KIND_ROUTING: u64 = 3;

fn keyed_rng(base_seed: u64, kind: u64, index: u64, n: u64) -> ChaCha12Rng {
    let mut z = splitmix(base_seed ^ 0x5851_F42D_4C95_7F2D);
    for w in [kind, index, n] {
        z = splitmix(z ^ splitmix(w));
    }
    let mut seed = [0u8; 32];
    for (chunk, i) in seed.chunks_exact_mut(8).zip(0u64..) {
        chunk.copy_from_slice(&splitmix(z.wrapping_add(i.wrapping_mul(
            0x9E37_79B9_7F4A_7C15,
        )))
        .to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Independent interarrival / service / routing streams for one simulated
/// network, keyed by a base seed.
#[derive(Debug, Clone)]
pub struct PrimitiveStreams {
    base_seed: u64,
    arrival: Vec<DistributionSpec>,
    service: Vec<DistributionSpec>,
    routing: Vec<Vec<f64>>,
    num_buffers: usize,
}

impl PrimitiveStreams {
    /// `arrival` holds laws for buffers `1..=arrival.len()` (the exogenous
    /// ones); `routing[j]` is the per-buffer probability vector of activity
    /// j with the exit mass implied.
    pub fn new(
        arrival: Vec<DistributionSpec>,
        service: Vec<DistributionSpec>,
        routing: Vec<Vec<f64>>,
        num_buffers: usize,
        base_seed: u64,
    ) -> Result<Self, PrimitivesError> {
        for s in arrival.iter().chain(service.iter()) {
            s.validate()?;
        }
        assert_eq!(routing.len(), service.len(), "one routing vector per activity");
        for (j, p) in routing.iter().enumerate() {
            assert_eq!(p.len(), num_buffers, "routing vector length");
            let total: f64 = p.iter().sum();
            if p.iter().any(|&v| v < 0.0) || total > 1.0 + 1e-12 {
                return Err(PrimitivesError::NotStochastic { activity: j + 1 });
            }
        }
        Ok(PrimitiveStreams {
            base_seed,
            arrival,
            service,
            routing,
            num_buffers,
        })
    }

    pub fn num_exogenous(&self) -> usize {
        self.arrival.len()
    }

    /// The n-th interarrival variate of buffer `i` (both 1-based in the
    /// network's labeling; `i` must be exogenous).
    pub fn draw_interarrival(&self, i: usize, n: u64) -> Result<f64, PrimitivesError> {
        if i == 0 || i > self.arrival.len() {
            return Err(PrimitivesError::NoExogenousArrivals { buffer: i });
        }
        let mut rng = keyed_rng(self.base_seed, KIND_ARRIVAL, (i - 1) as u64, n);
        Ok(self.arrival[i - 1].sample(&mut rng))
    }

    /// The n-th service requirement of activity `j` (1-based).
    pub fn draw_service(&self, j: usize, n: u64) -> f64 {
        let mut rng = keyed_rng(self.base_seed, KIND_SERVICE, (j - 1) as u64, n);
        self.service[j - 1].sample(&mut rng)
    }

    /// Routing of the n-th job completed by activity `j`: the destination
    /// buffer in `1..=I`, or 0 for an exit, together with the one-hot
    /// routing vector over the buffers (all zero on exit).
    pub fn draw_routing(&self, j: usize, n: u64) -> (usize, Vec<f64>) {
        let mut rng = keyed_rng(self.base_seed, KIND_ROUTING, (j - 1) as u64, n);
        let u = open_unit(&mut rng);
        let p = &self.routing[j - 1];
        let mut acc = 0.0;
        let mut onehot = vec![0.0; self.num_buffers];
        for (idx, &prob) in p.iter().enumerate() {
            acc += prob;
            if u < acc {
                onehot[idx] = 1.0;
                return (idx + 1, onehot);
            }
        }
        (0, onehot)
    }
}

/// Number of renewals by time `t`: max{m >= 0 : sums[m-1] <= t} for a
/// nondecreasing sequence of partial sums with the implicit sums[-1] = 0.
pub fn renewal_count(partial_sums: &[f64], t: f64) -> usize {
    partial_sums.partition_point(|&s| s <= t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_streams(seed: u64) -> PrimitiveStreams {
        PrimitiveStreams::new(
            vec![DistributionSpec::exponential(1.0)],
            vec![DistributionSpec::exponential(0.5)],
            vec![vec![0.0]],
            1,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_stream_is_constant() {
        let s = PrimitiveStreams::new(
            vec![DistributionSpec::deterministic(2.0)],
            vec![DistributionSpec::deterministic(0.5)],
            vec![vec![0.0]],
            1,
            7,
        )
        .unwrap();
        for n in 1..10 {
            assert_eq!(s.draw_interarrival(1, n).unwrap(), 2.0);
            assert_eq!(s.draw_service(1, n), 0.5);
        }
    }

    #[test]
    fn replay_is_exact_and_random_access() {
        let s = exp_streams(99);
        let v1 = s.draw_interarrival(1, 5).unwrap();
        let _skip = s.draw_interarrival(1, 6).unwrap();
        let v2 = s.draw_interarrival(1, 5).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits());
        let t = exp_streams(99);
        assert_eq!(t.draw_interarrival(1, 5).unwrap().to_bits(), v1.to_bits());
    }

    #[test]
    fn exponential_sample_mean_matches() {
        let s = exp_streams(2024);
        let n = 100_000u64;
        let mean: f64 =
            (1..=n).map(|k| s.draw_interarrival(1, k).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn non_exogenous_buffer_signals() {
        let s = exp_streams(1);
        assert!(matches!(
            s.draw_interarrival(2, 1),
            Err(PrimitivesError::NoExogenousArrivals { buffer: 2 })
        ));
    }

    #[test]
    fn positivity_across_families() {
        let fams = [
            DistributionSpec::exponential(0.3),
            DistributionSpec::deterministic(1.5),
            DistributionSpec::uniform(1.0, 0.2),
            DistributionSpec::gamma(2.0, 1.5),
        ];
        for (k, f) in fams.iter().enumerate() {
            let s = PrimitiveStreams::new(
                vec![],
                vec![*f],
                vec![vec![0.0]],
                1,
                k as u64,
            )
            .unwrap();
            for n in 1..=2000 {
                assert!(s.draw_service(1, n) > 0.0);
            }
        }
    }

    #[test]
    fn second_moments_match_spec() {
        let cases = [
            DistributionSpec::exponential(1.0),
            DistributionSpec::uniform(2.0, 0.5),
            DistributionSpec::gamma(1.0, 0.7),
        ];
        for (k, spec) in cases.iter().enumerate() {
            let s = PrimitiveStreams::new(vec![], vec![*spec], vec![vec![0.0]], 1, 31 + k as u64)
                .unwrap();
            let n = 100_000u64;
            let draws: Vec<f64> = (1..=n).map(|i| s.draw_service(1, i)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let target = spec.sd * spec.sd;
            assert!(
                (var - target).abs() <= 0.05 * target,
                "{:?}: sample var {} vs {}",
                spec.family,
                var,
                target
            );
        }
    }

    #[test]
    fn streams_are_uncorrelated() {
        let s = PrimitiveStreams::new(
            vec![DistributionSpec::exponential(1.0), DistributionSpec::exponential(2.0)],
            vec![DistributionSpec::exponential(0.5)],
            vec![vec![0.0, 0.0]],
            2,
            555,
        )
        .unwrap();
        let n = 10_000u64;
        let a: Vec<f64> = (1..=n).map(|k| s.draw_interarrival(1, k).unwrap()).collect();
        let b: Vec<f64> = (1..=n).map(|k| s.draw_interarrival(2, k).unwrap()).collect();
        let c: Vec<f64> = (1..=n).map(|k| s.draw_service(1, k)).collect();
        for (x, y) in [(&a, &b), (&a, &c), (&b, &c)] {
            let corr = correlation(x, y);
            assert!(corr.abs() < 0.03, "cross-correlation {corr}");
        }
    }

    fn correlation(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        let vx = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / n;
        let vy = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>() / n;
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn routing_frequencies_converge() {
        let s = PrimitiveStreams::new(
            vec![],
            vec![DistributionSpec::exponential(1.0)],
            vec![vec![0.5, 0.25]],
            2,
            77,
        )
        .unwrap();
        let n = 100_000u64;
        let mut counts = [0u64; 3];
        for k in 1..=n {
            let (dest, onehot) = s.draw_routing(1, k);
            counts[dest] += 1;
            assert_eq!(onehot.iter().sum::<f64>(), if dest == 0 { 0.0 } else { 1.0 });
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        assert!((freq[1] - 0.5).abs() < 0.01);
        assert!((freq[2] - 0.25).abs() < 0.01);
        assert!((freq[0] - 0.25).abs() < 0.01);
    }

    #[test]
    fn routing_degenerate_cases() {
        let s = PrimitiveStreams::new(
            vec![],
            vec![DistributionSpec::exponential(1.0), DistributionSpec::exponential(1.0)],
            vec![vec![1.0], vec![0.0]],
            1,
            3,
        )
        .unwrap();
        for n in 1..100 {
            assert_eq!(s.draw_routing(1, n).0, 1); // always rerouted to buffer 1
            assert_eq!(s.draw_routing(2, n).0, 0); // always exits
        }
    }

    #[test]
    fn renewal_count_boundaries() {
        let sums = [0.5, 1.2, 3.0];
        assert_eq!(renewal_count(&sums, 1.2), 2);
        assert_eq!(renewal_count(&sums, 0.4), 0);
        assert_eq!(renewal_count(&sums, 5.0), 3);
        assert_eq!(renewal_count(&sums, 0.0), 0);
    }

    #[test]
    fn renewal_identity_on_random_sums() {
        let s = exp_streams(11);
        let mut acc = 0.0;
        let sums: Vec<f64> = (1..=200u64)
            .map(|n| {
                acc += s.draw_interarrival(1, n).unwrap();
                acc
            })
            .collect();
        for (m, &t) in sums.iter().enumerate() {
            assert_eq!(renewal_count(&sums, t), m + 1);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DistributionSpec::uniform(1.0, 1.0).validate().is_err()); // support hits 0
        assert!(DistributionSpec::new(DistributionFamily::Gamma, 1.0, None).is_err());
        assert!(DistributionSpec {
            family: DistributionFamily::Exponential,
            mean: 1.0,
            sd: 0.5,
        }
        .validate()
        .is_err());
        assert!(DistributionSpec::deterministic(-1.0).validate().is_err());
    }

    #[test]
    fn bad_routing_rejected() {
        let r = PrimitiveStreams::new(
            vec![],
            vec![DistributionSpec::exponential(1.0)],
            vec![vec![0.7, 0.4]],
            2,
            0,
        );
        assert!(matches!(r, Err(PrimitivesError::NotStochastic { activity: 1 })));
    }
}
