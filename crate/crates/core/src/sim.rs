//! SIR dynamics: the deterministic ODE reference and the stochastic
//! network process that produces bimodal take-off/die-out outcomes.
//!
//! The stochastic process is discrete-time and synchronous. Within one step,
//! every node infectious at the step start attempts to infect each currently
//! susceptible neighbor with probability beta, then recovers with probability
//! mu. Newly infected nodes become infectious at the next step. Events are
//! stamped with the step at which the new state becomes visible, so an
//! infection recorded at step k was transmitted by a node infectious at step
//! k-1.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::Graph;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("beta must lie in [0, 1], got {0}")]
    BadBeta(f64),
    #[error("mu must lie in (0, 1], got {0}")]
    BadMu(f64),
    #[error("invalid sim config: {0}")]
    BadConfig(String),
    #[error("ODE state became non-finite at step {step}")]
    OdeDiverged { step: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("phi_star must lie strictly between 0 and N, got {0}")]
    BadPhiStar(u32),
    #[error("bin width must be at least 1")]
    BadBinWidth,
}

/// Per-contact transmission and per-step recovery probabilities. The same
/// two numbers serve as rates for the deterministic reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub mu: f64,
}

impl SirParams {
    pub fn new(beta: f64, mu: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
            return Err(SimError::BadBeta(beta));
        }
        if mu.is_nan() || mu <= 0.0 || mu > 1.0 {
            return Err(SimError::BadMu(mu));
        }
        Ok(SirParams { beta, mu })
    }

    /// Probability that an infectious node ever transmits across a given
    /// edge before recovering: T = beta / (1 - (1-beta)(1-mu)).
    pub fn transmissibility(&self) -> f64 {
        self.beta / (1.0 - (1.0 - self.beta) * (1.0 - self.mu))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedSelection {
    UniformRandom,
    FixedNode { id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub max_steps: u32,
    pub initial_infected: u32,
    pub seed_selection: SeedSelection,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn new(master_seed: u64) -> Self {
        SimConfig {
            max_steps: 1000,
            initial_infected: 1,
            seed_selection: SeedSelection::UniformRandom,
            master_seed,
        }
    }

    fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.max_steps < 1 {
            return Err(SimError::BadConfig("max_steps must be >= 1".into()));
        }
        if self.initial_infected < 1 || self.initial_infected as usize >= n {
            return Err(SimError::BadConfig(format!(
                "initial_infected must satisfy 1 <= i0 < N, got {} for N={}",
                self.initial_infected, n
            )));
        }
        if let SeedSelection::FixedNode { id } = self.seed_selection {
            if id as usize >= n {
                return Err(SimError::BadConfig(format!("seed node {id} out of range")));
            }
        }
        Ok(())
    }
}

/// Per-step S/I/R counts of one stochastic run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub s: Vec<u32>,
    pub i: Vec<u32>,
    pub r: Vec<u32>,
    pub t_end: u32,
    pub final_r: u32,
}

/// Who infected whom, and when, for one run. Together with the seed set this
/// reconstructs the temporal transmission graph at any step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    /// (step, infectee, infector), stamped at the infectee's arrival step.
    pub infections: Vec<(u32, u32, u32)>,
    /// (step, node), stamped at the node's recovery step.
    pub recoveries: Vec<(u32, u32)>,
    pub seed_nodes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub run_id: u64,
    pub trajectory: Trajectory,
    pub record: TransmissionRecord,
}

pub const TRAJECTORY_FORMAT_VERSION: u32 = 1;

/// Header line of the trajectory JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchHeader {
    pub format_version: u32,
    pub n_nodes: usize,
    pub graph_hash: String,
    pub beta: f64,
    pub mu: f64,
    pub master_seed: u64,
    pub max_steps: u32,
    pub initial_infected: u32,
    pub seed_selection: SeedSelection,
    pub n_runs: u64,
}

/// One run per line. Field order is the wire order.
#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryLine {
    run_id: u64,
    seed_nodes: Vec<u32>,
    beta: f64,
    mu: f64,
    t_end: u32,
    final_r: u32,
    counts: Vec<(u32, u32, u32)>,
    infections: Vec<(u32, u32, u32)>,
    recoveries: Vec<(u32, u32)>,
}

/// All runs of a batch, in run-index order.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub n_nodes: usize,
    pub graph_hash: String,
    pub params: SirParams,
    pub config: SimConfig,
    pub runs: Vec<SimRun>,
}

impl BatchResult {
    pub fn final_sizes(&self) -> Vec<u32> {
        self.runs.iter().map(|r| r.trajectory.final_r).collect()
    }

    fn header(&self) -> BatchHeader {
        BatchHeader {
            format_version: TRAJECTORY_FORMAT_VERSION,
            n_nodes: self.n_nodes,
            graph_hash: self.graph_hash.clone(),
            beta: self.params.beta,
            mu: self.params.mu,
            master_seed: self.config.master_seed,
            max_steps: self.config.max_steps,
            initial_infected: self.config.initial_infected,
            seed_selection: self.config.seed_selection,
            n_runs: self.runs.len() as u64,
        }
    }

    /// Trajectory JSONL: a provenance header line, then one run per line.
    /// Lines are serialized in parallel chunks but written in run order.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<(), std::io::Error> {
        let header = serde_json::to_string(&self.header()).expect("header serializes");
        writeln!(w, "{header}")?;
        for chunk in self.runs.chunks(256) {
            let lines: Vec<String> = chunk
                .par_iter()
                .map(|run| {
                    let line = TrajectoryLine {
                        run_id: run.run_id,
                        seed_nodes: run.record.seed_nodes.clone(),
                        beta: self.params.beta,
                        mu: self.params.mu,
                        t_end: run.trajectory.t_end,
                        final_r: run.trajectory.final_r,
                        counts: (0..run.trajectory.s.len())
                            .map(|t| {
                                (
                                    run.trajectory.s[t],
                                    run.trajectory.i[t],
                                    run.trajectory.r[t],
                                )
                            })
                            .collect(),
                        infections: run.record.infections.clone(),
                        recoveries: run.record.recoveries.clone(),
                    };
                    serde_json::to_string(&line).expect("line serializes")
                })
                .collect();
            for line in lines {
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn save_jsonl<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), std::io::Error> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn read_jsonl<R: std::io::Read>(reader: R) -> Result<BatchResult, SimError> {
        use std::io::BufRead;
        let mut lines = std::io::BufReader::new(reader).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| SimError::BadConfig("empty trajectory file".into()))?
            .map_err(|e| SimError::BadConfig(e.to_string()))?;
        let header: BatchHeader = serde_json::from_str(&header_line)
            .map_err(|e| SimError::BadConfig(format!("bad trajectory header: {e}")))?;
        if header.format_version != TRAJECTORY_FORMAT_VERSION {
            return Err(SimError::BadConfig(format!(
                "trajectory format version {} not supported",
                header.format_version
            )));
        }
        let params = SirParams::new(header.beta, header.mu)?;
        let mut runs = Vec::with_capacity(header.n_runs as usize);
        for (no, line) in lines.enumerate() {
            let line = line.map_err(|e| SimError::BadConfig(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TrajectoryLine = serde_json::from_str(&line)
                .map_err(|e| SimError::BadConfig(format!("line {}: {e}", no + 2)))?;
            let (s, rest): (Vec<u32>, Vec<(u32, u32)>) = parsed
                .counts
                .iter()
                .map(|&(s, i, r)| (s, (i, r)))
                .unzip();
            let (i, r): (Vec<u32>, Vec<u32>) = rest.into_iter().unzip();
            runs.push(SimRun {
                run_id: parsed.run_id,
                trajectory: Trajectory {
                    s,
                    i,
                    r,
                    t_end: parsed.t_end,
                    final_r: parsed.final_r,
                },
                record: TransmissionRecord {
                    infections: parsed.infections,
                    recoveries: parsed.recoveries,
                    seed_nodes: parsed.seed_nodes,
                },
            });
        }
        Ok(BatchResult {
            n_nodes: header.n_nodes,
            graph_hash: header.graph_hash,
            params,
            config: SimConfig {
                max_steps: header.max_steps,
                initial_infected: header.initial_infected,
                seed_selection: header.seed_selection,
                master_seed: header.master_seed,
            },
            runs,
        })
    }

    pub fn load_jsonl<P: AsRef<std::path::Path>>(path: P) -> Result<BatchResult, SimError> {
        let file = std::fs::File::open(path).map_err(|e| SimError::BadConfig(e.to_string()))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

/// One stochastic run. The RNG stream is fully determined by
/// (config.master_seed, run_index).
pub fn run_stochastic_sir(
    graph: &Graph,
    params: &SirParams,
    config: &SimConfig,
    run_index: u64,
) -> Result<(Trajectory, TransmissionRecord), SimError> {
    config.validate(graph.n())?;
    let n = graph.n();
    let mut rng = stream_rng(config.master_seed, run_index);

    const S: u8 = 0;
    const I: u8 = 1;
    const R: u8 = 2;
    const PENDING: u8 = 3;

    let mut state = vec![S; n];
    let mut seeds = Vec::with_capacity(config.initial_infected as usize);
    match config.seed_selection {
        SeedSelection::FixedNode { id } => {
            seeds.push(id);
            state[id as usize] = I;
            for _ in 1..config.initial_infected {
                loop {
                    let v = rng.gen_range(0..n as u32);
                    if state[v as usize] == S {
                        state[v as usize] = I;
                        seeds.push(v);
                        break;
                    }
                }
            }
        }
        SeedSelection::UniformRandom => {
            for _ in 0..config.initial_infected {
                loop {
                    let v = rng.gen_range(0..n as u32);
                    if state[v as usize] == S {
                        state[v as usize] = I;
                        seeds.push(v);
                        break;
                    }
                }
            }
        }
    }

    let mut infectious: Vec<u32> = seeds.clone();
    let mut infections = Vec::new();
    let mut recoveries = Vec::new();

    let i0 = config.initial_infected;
    let mut s_count = n as u32 - i0;
    let mut i_count = i0;
    let mut r_count = 0u32;
    let mut s_series = vec![s_count];
    let mut i_series = vec![i_count];
    let mut r_series = vec![r_count];

    let mut pending: Vec<u32> = Vec::new();
    let mut t = 0u32;
    while i_count > 0 && t < config.max_steps {
        let arrival = t + 1;
        pending.clear();
        for &u in &infectious {
            for &v in graph.neighbors(u) {
                // A node already claimed this step is no longer a target;
                // the first successful infector is the recorded one.
                if state[v as usize] == S && rng.gen::<f64>() < params.beta {
                    state[v as usize] = PENDING;
                    pending.push(v);
                    infections.push((arrival, v, u));
                }
            }
        }
        let mut recovered_this_step = 0u32;
        infectious.retain(|&u| {
            if rng.gen::<f64>() < params.mu {
                state[u as usize] = R;
                recoveries.push((arrival, u));
                recovered_this_step += 1;
                false
            } else {
                true
            }
        });
        for &v in &pending {
            state[v as usize] = I;
            infectious.push(v);
        }

        s_count -= pending.len() as u32;
        i_count = i_count - recovered_this_step + pending.len() as u32;
        r_count += recovered_this_step;
        s_series.push(s_count);
        i_series.push(i_count);
        r_series.push(r_count);
        t = arrival;
    }

    let trajectory = Trajectory {
        s: s_series,
        i: i_series,
        r: r_series,
        t_end: t,
        final_r: r_count,
    };
    let record = TransmissionRecord {
        infections,
        recoveries,
        seed_nodes: seeds,
    };
    Ok((trajectory, record))
}

/// Map every run of a batch through `f`, in parallel, preserving run order.
/// Output is bit-identical for any worker count because each run owns its own
/// RNG stream and results are collected by run index.
pub fn run_batch_map<T, F>(
    graph: &Graph,
    params: &SirParams,
    config: &SimConfig,
    n_runs: u64,
    f: F,
) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(u64, Trajectory, TransmissionRecord) -> T + Sync,
{
    if n_runs < 1 {
        return Err(SimError::EmptyBatch);
    }
    config.validate(graph.n())?;
    (0..n_runs)
        .into_par_iter()
        .map(|run_index| {
            let (trajectory, record) =
                run_stochastic_sir(graph, params, config, run_index).expect("validated config");
            Ok(f(run_index, trajectory, record))
        })
        .collect()
}

/// Run a full batch, retaining every trajectory and transmission record.
pub fn run_batch(
    graph: &Graph,
    params: &SirParams,
    config: &SimConfig,
    n_runs: u64,
) -> Result<BatchResult, SimError> {
    let runs = run_batch_map(graph, params, config, n_runs, |run_id, trajectory, record| {
        SimRun {
            run_id,
            trajectory,
            record,
        }
    })?;
    Ok(BatchResult {
        n_nodes: graph.n(),
        graph_hash: graph.content_hash(),
        params: *params,
        config: config.clone(),
        runs,
    })
}

/// Final size and termination step only; use for large batches where
/// retaining full records would be wasteful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: u64,
    pub final_r: u32,
    pub t_end: u32,
}

pub fn run_batch_summaries(
    graph: &Graph,
    params: &SirParams,
    config: &SimConfig,
    n_runs: u64,
) -> Result<Vec<RunSummary>, SimError> {
    run_batch_map(graph, params, config, n_runs, |run_id, trajectory, _| {
        RunSummary {
            run_id,
            final_r: trajectory.final_r,
            t_end: trajectory.t_end,
        }
    })
}

/// Histogram of final sizes over [0, N] with fixed-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u32,
    pub counts: Vec<u64>,
    pub n_nodes: usize,
}

impl Histogram {
    pub fn bin_start(&self, bin: usize) -> u32 {
        bin as u32 * self.bin_width
    }

    /// Centered moving average; the window is truncated at the boundaries.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let half = window / 2;
        let n = self.counts.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let sum: u64 = self.counts[lo..hi].iter().sum();
            out[i] = sum as f64 / (hi - lo) as f64;
        }
        out
    }

    /// Indices of the modes of the smoothed histogram.
    ///
    /// A mode is a maximal run of equal smoothed values that exceeds both of
    /// its neighboring runs, reaches at least `min_rel_height` of the global
    /// smoothed maximum, and is separated from its neighbor mode by a valley
    /// dropping below half the smaller of the two peaks. The height guard
    /// keeps stray counts in an otherwise empty valley from registering;
    /// the valley guard keeps sampling ripples on one broad mode from
    /// splitting it.
    pub fn modes(&self, smooth_window: usize, min_rel_height: f64) -> Vec<usize> {
        let smooth = self.smoothed(smooth_window);
        find_modes(&smooth, min_rel_height)
    }
}

pub(crate) fn find_modes(values: &[f64], min_rel_height: f64) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let global_max = values.iter().cloned().fold(f64::MIN, f64::max);
    if global_max <= 0.0 {
        return Vec::new();
    }
    let threshold = global_max * min_rel_height;

    // Collapse into runs of equal value, then keep runs that dominate both
    // neighbors (missing neighbor counts as lower).
    let mut candidates = Vec::new();
    let mut run_start = 0usize;
    let n = values.len();
    for i in 0..n {
        let run_end = i + 1 == n || values[i + 1] != values[i];
        if !run_end {
            continue;
        }
        let value = values[i];
        let left_lower = run_start == 0 || values[run_start - 1] < value;
        let right_lower = i + 1 == n || values[i + 1] < value;
        if left_lower && right_lower && value >= threshold {
            candidates.push(run_start);
        }
        run_start = i + 1;
    }

    // Merge neighbors that lack a pronounced valley between them.
    let mut modes: Vec<usize> = Vec::new();
    for idx in candidates {
        if let Some(&last) = modes.last() {
            let valley = values[last..=idx].iter().cloned().fold(f64::MAX, f64::min);
            if valley > 0.5 * values[last].min(values[idx]) {
                if values[idx] > values[last] {
                    *modes.last_mut().expect("non-empty") = idx;
                }
                continue;
            }
        }
        modes.push(idx);
    }
    modes
}

/// Counts of final sizes binned over [0, N].
pub fn final_size_histogram(
    final_sizes: &[u32],
    n_nodes: usize,
    bin_width: u32,
) -> Result<Histogram, SimError> {
    if final_sizes.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    if bin_width < 1 {
        return Err(SimError::BadBinWidth);
    }
    let n_bins = n_nodes / bin_width as usize + 1;
    let mut counts = vec![0u64; n_bins];
    for &f in final_sizes {
        counts[(f / bin_width) as usize] += 1;
    }
    Ok(Histogram {
        bin_width,
        counts,
        n_nodes,
    })
}

/// Fraction of runs whose final size stayed below `phi_star`.
pub fn estimate_dieout_prob(
    final_sizes: &[u32],
    n_nodes: usize,
    phi_star: u32,
) -> Result<f64, SimError> {
    if final_sizes.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    if phi_star == 0 || phi_star as usize >= n_nodes {
        return Err(SimError::BadPhiStar(phi_star));
    }
    let below = final_sizes.iter().filter(|&&f| f < phi_star).count();
    Ok(below as f64 / final_sizes.len() as f64)
}

/// Deterministic SIR trajectory sampled every `output_stride` RK4 steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    /// (t, S, I, R) at sampled times, always including t = 0 and t_end.
    pub samples: Vec<(f64, f64, f64, f64)>,
    pub dt: f64,
}

impl OdeTrajectory {
    pub fn final_state(&self) -> (f64, f64, f64, f64) {
        *self.samples.last().expect("at least the initial sample")
    }
}

/// Classic RK4 integration of dS = -beta S I / N, dI = beta S I / N - mu I,
/// dR = mu I, with S(0) = N - i0, I(0) = i0, R(0) = 0.
pub fn run_deterministic_sir(
    params: &SirParams,
    n: f64,
    i0: f64,
    t_end: f64,
    dt: f64,
    output_stride: usize,
) -> Result<OdeTrajectory, SimError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(SimError::BadConfig(format!("dt must be positive, got {dt}")));
    }
    if i0.is_nan() || i0 <= 0.0 || i0 >= n {
        return Err(SimError::BadConfig(format!(
            "i0 must satisfy 0 < i0 < N, got {i0}"
        )));
    }
    let stride = output_stride.max(1);
    let beta = params.beta;
    let mu = params.mu;
    let derivs = |s: f64, i: f64| -> (f64, f64, f64) {
        let inf = beta * s * i / n;
        (-inf, inf - mu * i, mu * i)
    };

    let steps = (t_end / dt).ceil() as usize;
    let mut s = n - i0;
    let mut i = i0;
    let mut r = 0.0;
    let mut samples = Vec::with_capacity(steps / stride + 2);
    samples.push((0.0, s, i, r));
    for step in 1..=steps {
        let (k1s, k1i, k1r) = derivs(s, i);
        let (k2s, k2i, k2r) = derivs(s + 0.5 * dt * k1s, i + 0.5 * dt * k1i);
        let (k3s, k3i, k3r) = derivs(s + 0.5 * dt * k2s, i + 0.5 * dt * k2i);
        let (k4s, k4i, k4r) = derivs(s + dt * k3s, i + dt * k3i);
        s += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        i += dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
        r += dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        if !(s.is_finite() && i.is_finite() && r.is_finite()) {
            return Err(SimError::OdeDiverged { step });
        }
        if step % stride == 0 || step == steps {
            samples.push((step as f64 * dt, s, i, r));
        }
    }
    Ok(OdeTrajectory { samples, dt })
}
