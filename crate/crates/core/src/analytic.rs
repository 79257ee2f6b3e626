//! Closed-form rates and bounds to compare simulations against.

use crate::error::{Error, Result};
use crate::linkgen::{survival_probability, DecoherenceMode};
use crate::topology::{greedy_edge_disjoint_paths, Topology};

fn check_prob(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

/// Probability that an edge holds at least one link after `k` attempts with
/// unbounded memory: `1 - (1-p)^k`.
pub fn effective_link_probability(p: f64, k: u32) -> Result<f64> {
    check_prob("p", p)?;
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(1.0 - (1.0 - p).powi(k as i32))
}

/// Large-`k` per-slot rate bound `p * sum_i q^(m_i - 1)` over the greedy
/// edge-disjoint shortest paths of lengths `m_i`.
///
/// With unbounded memory every edge eventually holds a link, so each greedy
/// path of `m` hops matures into an end-to-end pair at rate `p` per slot and
/// survives its `m - 1` swaps with probability `q^(m-1)`.
pub fn rate_bound_infinite_memory(topology: &Topology, p: f64, q: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    let paths = greedy_edge_disjoint_paths(topology);
    let sum: f64 = paths
        .lengths()
        .iter()
        .map(|&m| q.powi(m as i32 - 1))
        .sum();
    Ok(p * sum)
}

/// Parameters for the exact repeater-chain rate at `p = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRateInput {
    /// Number of edges in the chain (distance between consumers).
    pub d: usize,
    /// Swap success probability at every repeater.
    pub q: f64,
    /// Number of link-generation slots per round.
    pub k: u32,
    /// Memory lifetime parameter; `f64::INFINITY` disables decoherence.
    pub mu: f64,
    /// How lifetimes are drawn.
    pub mode: DecoherenceMode,
}

/// Exact per-slot rate of a `d`-edge repeater chain at `p = 1`.
///
/// Every slot produces a link on every edge, so the freshest links always form
/// one end-to-end chain; older links form further chains as long as every edge
/// still has one that survived. The number of extra chains is the minimum over
/// the `d` edges of the count of surviving older links, and the rate is
/// `q^(d-1) * (1 + E[min]) / k`. Survival counts follow a Poisson-binomial
/// law over ages `1..k-1`, identical and independent across edges.
pub fn chain_rate_saturated(input: ChainRateInput) -> Result<f64> {
    let ChainRateInput { d, q, k, mu, mode } = input;
    if d < 1 {
        return Err(Error::InvalidParameter(
            "chain needs at least one edge".into(),
        ));
    }
    check_prob("q", q)?;
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }

    let survival: Vec<f64> = (1..k).map(|age| survival_probability(age, mu, mode)).collect();
    let pmf = poisson_binomial_pmf(&survival);

    // P(count >= m) for m = 1..=k-1, then E[min over d edges] by summing
    // the d-th power of the tail.
    let mut expected_min = 0.0;
    let mut tail = 1.0 - pmf[0];
    for m in 1..k as usize {
        expected_min += tail.max(0.0).powi(d as i32);
        tail -= pmf[m];
    }

    Ok(q.powi(d as i32 - 1) * (1.0 + expected_min) / f64::from(k))
}

/// Distribution of the number of successes among independent trials with the
/// given probabilities, by direct convolution.
pub fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (i, &s) in probs.iter().enumerate() {
        for n in (0..=i).rev() {
            let moved = pmf[n] * s;
            pmf[n + 1] += moved;
            pmf[n] -= moved;
        }
    }
    pmf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{grid_topology, six_node_topology, SixNode};

    #[test]
    fn effective_probability_values() {
        assert_eq!(effective_link_probability(0.5, 1).unwrap(), 0.5);
        assert!((effective_link_probability(0.5, 2).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(effective_link_probability(0.0, 7).unwrap(), 0.0);
        assert_eq!(effective_link_probability(1.0, 3).unwrap(), 1.0);
        assert!(effective_link_probability(1.5, 1).is_err());
        assert!(effective_link_probability(0.5, 0).is_err());
    }

    #[test]
    fn effective_probability_grows_with_k() {
        let mut last = 0.0;
        for k in 1..20 {
            let v = effective_link_probability(0.3, k).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn bound_counts_greedy_paths_on_the_grid() {
        let topo = grid_topology(21, 21, (5, 5), (10, 10)).unwrap();
        // Perfect swaps: four edge-disjoint paths, each delivering p per slot.
        let bound = rate_bound_infinite_memory(&topo, 0.5, 1.0).unwrap();
        assert!((bound - 2.0).abs() < 1e-12);
        // Lossy swaps weight each path by q^(hops - 1); the greedy set on this
        // placement has lengths 10, 10, 14, 14.
        let q: f64 = 0.9;
        let expected = 0.5 * (2.0 * q.powi(9) + 2.0 * q.powi(13));
        let bound = rate_bound_infinite_memory(&topo, 0.5, q).unwrap();
        assert!((bound - expected).abs() < 1e-12);
    }

    #[test]
    fn bound_on_six_node_uses_both_arms() {
        let topo = six_node_topology(SixNode::Base);
        let q: f64 = 0.9;
        let bound = rate_bound_infinite_memory(&topo, 0.25, q).unwrap();
        assert!((bound - 0.25 * 2.0 * q * q).abs() < 1e-12);
    }

    #[test]
    fn poisson_binomial_matches_binomial() {
        let pmf = poisson_binomial_pmf(&[0.5; 4]);
        let expected = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        for (a, b) in pmf.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn poisson_binomial_sums_to_one() {
        let pmf = poisson_binomial_pmf(&[0.1, 0.7, 0.3, 0.9, 0.2]);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_rate_with_one_slot_is_pure_swapping() {
        for d in 1..6 {
            let rate = chain_rate_saturated(ChainRateInput {
                d,
                q: 0.8,
                k: 1,
                mu: 2.0,
                mode: DecoherenceMode::PerQubit,
            })
            .unwrap();
            assert!((rate - 0.8f64.powi(d as i32 - 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rate_without_decoherence_saturates() {
        // Every older link survives, so all k slots yield a chain.
        for k in [1, 2, 5, 20] {
            let rate = chain_rate_saturated(ChainRateInput {
                d: 3,
                q: 0.7,
                k,
                mu: f64::INFINITY,
                mode: DecoherenceMode::PerLink,
            })
            .unwrap();
            assert!((rate - 0.49).abs() < 1e-12, "k={k}: {rate}");
        }
    }

    #[test]
    fn chain_rate_brute_force_small_case() {
        // d = 2, k = 3: enumerate survival of the 2 * 2 older links directly.
        let q = 0.9;
        let mu = 1.7;
        let mode = DecoherenceMode::PerQubit;
        let s1 = survival_probability(1, mu, mode);
        let s2 = survival_probability(2, mu, mode);
        let mut expect = 0.0;
        for mask in 0u32..16 {
            let mut prob = 1.0;
            let mut counts = [0usize; 2];
            for (i, &(edge, s)) in [(0, s1), (0, s2), (1, s1), (1, s2)].iter().enumerate() {
                if mask >> i & 1 == 1 {
                    prob *= s;
                    counts[edge] += 1;
                } else {
                    prob *= 1.0 - s;
                }
            }
            expect += prob * (1 + counts[0].min(counts[1])) as f64;
        }
        expect *= q / 3.0;

        let rate = chain_rate_saturated(ChainRateInput {
            d: 2,
            q,
            k: 3,
            mu,
            mode,
        })
        .unwrap();
        assert!((rate - expect).abs() < 1e-12, "{rate} vs {expect}");
    }

    #[test]
    fn chain_rate_decreases_with_distance() {
        let mut last = f64::INFINITY;
        for d in 1..8 {
            let rate = chain_rate_saturated(ChainRateInput {
                d,
                q: 0.9,
                k: 5,
                mu: 3.0,
                mode: DecoherenceMode::PerQubit,
            })
            .unwrap();
            assert!(rate < last);
            last = rate;
        }
    }

    #[test]
    fn chain_rate_rejects_bad_parameters() {
        let good = ChainRateInput {
            d: 2,
            q: 0.5,
            k: 2,
            mu: 1.0,
            mode: DecoherenceMode::PerQubit,
        };
        assert!(chain_rate_saturated(ChainRateInput { d: 0, ..good }).is_err());
        assert!(chain_rate_saturated(ChainRateInput { q: 1.5, ..good }).is_err());
        assert!(chain_rate_saturated(ChainRateInput { k: 0, ..good }).is_err());
        assert!(chain_rate_saturated(ChainRateInput { mu: 0.0, ..good }).is_err());
        assert!(chain_rate_saturated(ChainRateInput { mu: f64::NAN, ..good }).is_err());
    }
}
