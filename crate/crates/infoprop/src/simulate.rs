//! Event-driven Monte Carlo propagation.
//!
//! Every informed node sends one message per incident edge after an
//! exponential delay with rate `mu`; the first arrival informs the target.
//! Events are processed from a min-priority queue until it drains, so a run
//! covers exactly the source's connected component.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::degree::{DegreeError, DegreeLaw};
use crate::network::{build_configuration_model, Network, NetworkError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("propagation rate mu must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("completion threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("runs must be at least 1")]
    NoRuns,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Degree(#[from] DegreeError),
}

/// A scheduled message delivery: sending time plus target node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub target: u32,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we pop the earliest event
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.target.cmp(&self.target))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-reception bookkeeping captured when tracing is enabled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropagationTrace {
    /// External (informed-to-uninformed) edge count after each reception.
    pub k_ext: Vec<i64>,
    /// Degree of each receiver.
    pub k_recv: Vec<u32>,
    /// Receiver edges that led to already-informed nodes (0 for the source).
    pub k_recv_inf: Vec<u32>,
}

/// Reception times and infection order from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationRecord {
    pub run_index: u64,
    pub source: usize,
    /// Reception time per node; `INFINITY` for nodes never informed.
    pub reception_time: Vec<f64>,
    /// Node ids in order of reception (starts with the source).
    pub infection_order: Vec<u32>,
    pub informed_count: usize,
    /// Realized degree per node, kept so statistics survive the network.
    pub degrees: Vec<u32>,
    pub events_scheduled: usize,
    pub trace: Option<PropagationTrace>,
}

impl PropagationRecord {
    pub fn node_count(&self) -> usize {
        self.reception_time.len()
    }

    /// Reception time of the `i`-th informed node (1-based).
    pub fn time_of(&self, i: usize) -> f64 {
        self.reception_time[self.infection_order[i - 1] as usize]
    }

    /// Dumps `node reception_time` rows with a run header.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "# run={} source={} informed_count={}",
            self.run_index, self.source, self.informed_count
        )?;
        for (node, &t) in self.reception_time.iter().enumerate() {
            if t.is_finite() {
                writeln!(w, "{} {:.9}", node, t)?;
            }
        }
        Ok(())
    }
}

struct SimState {
    informed: Vec<bool>,
    reception_time: Vec<f64>,
    infection_order: Vec<u32>,
    queue: BinaryHeap<Event>,
    trace: Option<PropagationTrace>,
    k_ext: i64,
    events_scheduled: usize,
}

impl SimState {
    fn inform<R: Rng + ?Sized>(
        &mut self,
        net: &Network,
        node: usize,
        time: f64,
        exp: &Exp<f64>,
        rng: &mut R,
    ) {
        self.informed[node] = true;
        self.reception_time[node] = time;
        self.infection_order.push(node as u32);
        if let Some(tr) = self.trace.as_mut() {
            let mut k_recv_inf = 0u32;
            for &w in net.neighbors(node) {
                if self.informed[w as usize] {
                    k_recv_inf += 1;
                    self.k_ext -= 1; // edge turned internal
                } else {
                    self.k_ext += 1; // edge turned external
                }
            }
            tr.k_ext.push(self.k_ext);
            tr.k_recv.push(net.degree(node) as u32);
            tr.k_recv_inf.push(k_recv_inf);
        }
        for &w in net.neighbors(node) {
            let delay: f64 = exp.sample(rng);
            self.queue.push(Event {
                time: time + delay,
                target: w,
            });
            self.events_scheduled += 1;
        }
    }
}

/// Runs one propagation from the given source node.
pub fn simulate_from<R: Rng + ?Sized>(
    net: &Network,
    source: usize,
    mu: f64,
    rng: &mut R,
    trace: bool,
) -> Result<PropagationRecord, SimError> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(SimError::NonPositiveRate(mu));
    }
    let n = net.node_count();
    let exp = Exp::new(mu).expect("mu checked positive");
    let mut state = SimState {
        informed: vec![false; n],
        reception_time: vec![f64::INFINITY; n],
        infection_order: Vec::with_capacity(n),
        queue: BinaryHeap::new(),
        trace: trace.then(PropagationTrace::default),
        k_ext: 0,
        events_scheduled: 0,
    };

    state.inform(net, source, 0.0, &exp, rng);
    let mut clock = 0.0f64;
    while let Some(ev) = state.queue.pop() {
        debug_assert!(ev.time >= clock, "event queue went backwards");
        clock = ev.time;
        if state.informed[ev.target as usize] {
            continue;
        }
        state.inform(net, ev.target as usize, ev.time, &exp, rng);
    }

    let informed_count = state.infection_order.len();
    Ok(PropagationRecord {
        run_index: 0,
        source,
        reception_time: state.reception_time,
        infection_order: state.infection_order,
        informed_count,
        degrees: net.degree_sequence(),
        events_scheduled: state.events_scheduled,
        trace: state.trace,
    })
}

/// Runs one propagation from a uniformly random source.
pub fn simulate_once<R: Rng + ?Sized>(
    net: &Network,
    mu: f64,
    rng: &mut R,
    trace: bool,
) -> Result<PropagationRecord, SimError> {
    let source = rng.random_range(0..net.node_count());
    simulate_from(net, source, mu, rng, trace)
}

/// What to build and how to run each member of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub law: DegreeLaw,
    pub n: usize,
    pub k_max_override: Option<usize>,
    pub mu: f64,
    /// A run is accepted when it informs at least this fraction of nodes.
    pub completion_threshold: f64,
    pub trace: bool,
}

impl EnsembleSpec {
    fn accepts(&self, informed: usize) -> bool {
        informed as f64 >= (self.completion_threshold * self.n as f64).ceil()
    }
}

#[derive(Debug)]
pub struct EnsembleOutcome {
    pub accepted: Vec<PropagationRecord>,
    pub rejected: usize,
    pub runs: usize,
}

/// Per-run RNG stream derived from the master seed and run index only, so
/// results do not depend on thread scheduling.
pub fn run_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&run_index.to_le_bytes());
    seed[16..24].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

fn run_one(
    spec: &EnsembleSpec,
    master_seed: u64,
    run_index: u64,
) -> Result<PropagationRecord, SimError> {
    let mut rng = run_rng(master_seed, run_index);
    let dist = spec.law.distribution(spec.n, spec.k_max_override)?;
    let seq = dist.sample_sequence(spec.n, &mut rng);
    let built = build_configuration_model(&seq, &mut rng)?;
    let mut record = simulate_once(&built.network, spec.mu, &mut rng, spec.trace)?;
    record.run_index = run_index;
    Ok(record)
}

/// Rebuilds the network a given run index would use (for exports).
pub fn network_for_run(
    spec: &EnsembleSpec,
    master_seed: u64,
    run_index: u64,
) -> Result<Network, SimError> {
    let mut rng = run_rng(master_seed, run_index);
    let dist = spec.law.distribution(spec.n, spec.k_max_override)?;
    let seq = dist.sample_sequence(spec.n, &mut rng);
    Ok(build_configuration_model(&seq, &mut rng)?.network)
}

/// Streams accepted records (in run-index order) into `sink`; returns the
/// rejection count. Memory stays bounded by the chunk size regardless of the
/// total number of runs.
pub fn run_ensemble_each<F>(
    spec: &EnsembleSpec,
    runs: usize,
    master_seed: u64,
    parallelism: usize,
    mut sink: F,
) -> Result<usize, SimError>
where
    F: FnMut(PropagationRecord),
{
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    if spec.mu.is_nan() || spec.mu <= 0.0 {
        return Err(SimError::NonPositiveRate(spec.mu));
    }
    if spec.completion_threshold.is_nan()
        || spec.completion_threshold <= 0.0
        || spec.completion_threshold > 1.0
    {
        return Err(SimError::BadThreshold(spec.completion_threshold));
    }
    // validate the law once up front
    spec.law.distribution(spec.n, spec.k_max_override)?;

    let parallelism = parallelism.max(1);
    let mut rejected = 0usize;
    if parallelism == 1 {
        for run_index in 0..runs as u64 {
            let record = run_one(spec, master_seed, run_index)?;
            if spec.accepts(record.informed_count) {
                sink(record);
            } else {
                rejected += 1;
            }
        }
        return Ok(rejected);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool");
    let chunk = (parallelism * 8).max(16);
    let mut start = 0usize;
    while start < runs {
        let end = (start + chunk).min(runs);
        let batch: Vec<Result<PropagationRecord, SimError>> = pool.install(|| {
            use rayon::prelude::*;
            (start..end)
                .into_par_iter()
                .map(|run_index| run_one(spec, master_seed, run_index as u64))
                .collect()
        });
        for result in batch {
            let record = result?;
            if spec.accepts(record.informed_count) {
                sink(record);
            } else {
                rejected += 1;
            }
        }
        start = end;
    }
    Ok(rejected)
}

/// Builds a fresh network per run and keeps the runs that informed at least
/// `completion_threshold * n` nodes. Identical `(master_seed, runs)` give
/// identical outcomes for every parallelism level.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    runs: usize,
    master_seed: u64,
    parallelism: usize,
) -> Result<EnsembleOutcome, SimError> {
    let mut accepted = Vec::new();
    let rejected = run_ensemble_each(spec, runs, master_seed, parallelism, |r| accepted.push(r))?;
    Ok(EnsembleOutcome {
        accepted,
        rejected,
        runs,
    })
}
