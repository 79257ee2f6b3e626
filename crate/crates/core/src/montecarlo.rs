//! Seeded, parallel Monte Carlo estimation of entanglement rates.
//!
//! Each trial draws one snapshot, runs the configured routing protocol, and
//! banks the expected number of delivered pairs divided by the number of
//! slots. Trials are independent streams of one deterministic generator, so
//! results are identical for a given seed regardless of thread count or
//! sweep shape.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linkgen::{format_mu, generate_snapshot, DecoherenceMode};
use crate::oracle;
use crate::rng::trial_rng;
use crate::routing::{
    dynamic_internal_phase_with_tables, single_success_filter, static_internal_phase,
    snapshot_yield, trace_chains,
};
use crate::topology::{greedy_edge_disjoint_paths, DistanceTables, Metric, PathSet, Topology};

/// At most this many parameters may take multiple values in one sweep.
pub const MAX_SWEPT_DIMENSIONS: usize = 2;
/// Ceiling on parameter combinations per sweep.
pub const MAX_COMBOS: usize = 4096;
/// Checked mode compares yields against the exact capacity only below this
/// many surviving links.
pub const CHECK_LINK_LIMIT: usize = 20;

/// Which internal-phase rule the simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Per-node pairing toward the consumers, using only local distances.
    Dynamic,
    /// Pair along precomputed edge-disjoint shortest paths.
    Static,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Dynamic => "dynamic",
            Protocol::Static => "static",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(Protocol::Dynamic),
            "static" => Ok(Protocol::Static),
            other => Err(Error::InvalidParameter(format!(
                "unknown protocol {other:?} (expected dynamic or static)"
            ))),
        }
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub protocol: Protocol,
    pub metric: Metric,
    /// Tie-breaking refinement that keeps swaps aligned with a straight line.
    pub straight_path: bool,
    /// Keep only the freshest link per edge before routing.
    pub single_success: bool,
    /// Per-slot link creation probability.
    pub p: f64,
    /// Swap success probability, applied uniformly to all repeaters.
    pub q: f64,
    /// Slots per round.
    pub k: u32,
    /// Memory lifetime parameter; `f64::INFINITY` disables decoherence.
    pub mu: f64,
    pub mode: DecoherenceMode,
    pub trials: u32,
    pub seed: u64,
    /// Run per-trial consistency assertions (slower).
    pub checked: bool,
}

/// One estimated rate with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub protocol: Protocol,
    pub metric: Metric,
    pub straight_path: bool,
    pub single_success: bool,
    pub p: f64,
    pub q: f64,
    pub k: u32,
    pub mu: f64,
    pub trials: u32,
    pub mean: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl RateEstimate {
    pub const CSV_HEADER: &'static str =
        "protocol,metric,straight_path,single_success,p,q,k,mu,trials,mean_rate,stderr,seed";

    /// One CSV row matching [`Self::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.metric.name(),
            self.straight_path,
            self.single_success,
            self.p,
            self.q,
            self.k,
            format_mu(self.mu),
            self.trials,
            self.mean,
            self.stderr,
            self.seed
        )
    }
}

/// Estimate the rate for a single parameter point.
pub fn estimate_rate(config: &ExperimentConfig) -> Result<RateEstimate> {
    run_combo(config, 0)
}

enum Planner {
    Dynamic(DistanceTables),
    Static(PathSet),
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    for (name, value) in [("p", config.p), ("q", config.q)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter(format!(
                "{name} must lie in [0, 1], got {value}"
            )));
        }
    }
    if config.k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(config.mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {}",
            config.mu
        )));
    }
    if config.trials < 1 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    Ok(())
}

fn run_combo(config: &ExperimentConfig, combo: u32) -> Result<RateEstimate> {
    validate(config)?;
    let topology = config.topology.with_uniform_q(config.q)?;
    let planner = match config.protocol {
        Protocol::Dynamic => Planner::Dynamic(DistanceTables::new(&topology, config.metric)?),
        Protocol::Static => Planner::Static(greedy_edge_disjoint_paths(&topology)),
    };

    let yields: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &topology, &planner, combo, trial))
        .collect();

    let n = f64::from(config.trials);
    let mean = yields.iter().sum::<f64>() / n;
    let stderr = if config.trials > 1 {
        let var = yields.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };

    Ok(RateEstimate {
        protocol: config.protocol,
        metric: config.metric,
        straight_path: config.straight_path,
        single_success: config.single_success,
        p: config.p,
        q: config.q,
        k: config.k,
        mu: config.mu,
        trials: config.trials,
        mean,
        stderr,
        seed: config.seed,
    })
}

fn run_trial(
    config: &ExperimentConfig,
    topology: &Topology,
    planner: &Planner,
    combo: u32,
    trial: u32,
) -> f64 {
    let mut rng = trial_rng(config.seed, combo, trial);
    let snapshot = generate_snapshot(
        topology,
        config.p,
        config.k,
        config.mu,
        config.mode,
        &mut rng,
    )
    .expect("parameters validated before the trial loop");
    let snapshot = if config.single_success {
        single_success_filter(&snapshot)
    } else {
        snapshot
    };

    let plan = match planner {
        Planner::Dynamic(tables) => {
            dynamic_internal_phase_with_tables(&snapshot, topology, tables, config.straight_path)
        }
        Planner::Static(paths) => static_internal_phase(&snapshot, topology, paths)
            .expect("static paths lie in the topology"),
    };
    let chains = trace_chains(&plan, &snapshot, topology);
    let delivered = snapshot_yield(&chains, topology);

    if config.checked {
        let counted: usize = chains.chains.iter().map(|c| c.links.len()).sum();
        assert_eq!(
            counted + chains.leftover_links,
            snapshot.total_links(),
            "every link is either in a chain or left over"
        );
        for chain in &chains.chains {
            assert_eq!(chain.swaps.len() + 1, chain.links.len());
        }
        if snapshot.total_links() <= CHECK_LINK_LIMIT {
            let capacity = oracle::snapshot_capacity_exact(&snapshot, topology)
                .expect("instance is below the size guard");
            assert!(
                delivered <= capacity + 1e-9,
                "local yield {delivered} exceeds capacity {capacity}"
            );
        }
    }

    delivered / f64::from(config.k)
}

/// Values each parameter takes during a sweep; singletons stay fixed.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<u32>,
    pub mu: Vec<f64>,
}

impl SweepSpec {
    /// All four parameters pinned to the base configuration.
    pub fn fixed(config: &ExperimentConfig) -> Self {
        SweepSpec {
            p: vec![config.p],
            q: vec![config.q],
            k: vec![config.k],
            mu: vec![config.mu],
        }
    }

    fn combos(&self) -> usize {
        self.p.len() * self.q.len() * self.k.len() * self.mu.len()
    }

    fn swept_dimensions(&self) -> usize {
        [self.p.len(), self.q.len(), self.k.len(), self.mu.len()]
            .iter()
            .filter(|&&n| n > 1)
            .count()
    }
}

/// Run every combination in the spec, nested as p, then q, then k, then mu.
///
/// Combination index feeds the trial generator, so each point gets an
/// independent stream and any single point can be reproduced in isolation
/// with `estimate_rate` only when it sits at combination 0. Results come
/// back in iteration order.
pub fn sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<Vec<RateEstimate>> {
    if spec.p.is_empty() || spec.q.is_empty() || spec.k.is_empty() || spec.mu.is_empty() {
        return Err(Error::InvalidParameter(
            "every sweep dimension needs at least one value".into(),
        ));
    }
    if spec.swept_dimensions() > MAX_SWEPT_DIMENSIONS {
        return Err(Error::InvalidParameter(format!(
            "at most {MAX_SWEPT_DIMENSIONS} parameters may be swept together"
        )));
    }
    if spec.combos() > MAX_COMBOS {
        return Err(Error::TooLarge {
            what: "parameter combinations",
            actual: spec.combos(),
            limit: MAX_COMBOS,
        });
    }

    let mut estimates = Vec::with_capacity(spec.combos());
    let mut combo = 0u32;
    for &p in &spec.p {
        for &q in &spec.q {
            for &k in &spec.k {
                for &mu in &spec.mu {
                    let config = ExperimentConfig {
                        topology: base.topology.clone(),
                        p,
                        q,
                        k,
                        mu,
                        ..base.clone()
                    };
                    estimates.push(run_combo(&config, combo)?);
                    combo += 1;
                }
            }
        }
    }
    Ok(estimates)
}

/// Outcome of a slot-count optimization.
#[derive(Debug, Clone)]
pub struct KOptResult {
    /// Slot count with the highest estimated rate (smallest on ties).
    pub k_opt: u32,
    /// Whether the winner clears both neighbors by at least twice the
    /// combined standard error.
    pub separated: bool,
    /// Estimates for `k = 1..=k_max`, in order.
    pub estimates: Vec<RateEstimate>,
}

/// Estimate rates for every `k` up to `k_max` and pick the maximum.
pub fn find_k_opt(base: &ExperimentConfig, k_max: u32) -> Result<KOptResult> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let spec = SweepSpec {
        k: (1..=k_max).collect(),
        ..SweepSpec::fixed(base)
    };
    let estimates = sweep(base, &spec)?;

    let mut best = 0;
    for (i, estimate) in estimates.iter().enumerate() {
        if estimate.mean > estimates[best].mean {
            best = i;
        }
    }

    let mut separated = true;
    for neighbor in [best.wrapping_sub(1), best + 1] {
        if let Some(other) = estimates.get(neighbor) {
            let gap = estimates[best].mean - other.mean;
            let sigma = (estimates[best].stderr.powi(2) + other.stderr.powi(2)).sqrt();
            if gap < 2.0 * sigma {
                separated = false;
            }
        }
    }

    Ok(KOptResult {
        k_opt: estimates[best].k,
        separated,
        estimates,
    })
}
