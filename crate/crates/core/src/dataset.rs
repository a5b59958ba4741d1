//! Labeled observation windows.
//!
//! A simulated run becomes a training sample by truncating its transmission
//! record at the observation horizon t_o and labeling the run by its *final*
//! recovered count against the outbreak threshold phi_star. The label looks
//! into the future on purpose: the task is predicting where the run will end
//! up from what is visible early.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::NetworkSpec;
use crate::rng::stream_rng;
use crate::sim::{final_size_histogram, BatchResult, SimError, Trajectory, TransmissionRecord};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("phi_star must lie strictly between 0 and N, got {0}")]
    BadPhiStar(u32),
    #[error("labeling config needs either an explicit phi_star or auto_phi")]
    NoThreshold,
    #[error("final-size histogram is not bimodal ({modes} mode(s)): no take-off branch to label")]
    Unimodal { modes: usize },
    #[error("no bin strictly between the two modes")]
    DegenerateValley,
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadSplitRatios((f64, f64, f64)),
    #[error("class {0} absent from batch: stratified split impossible")]
    MissingClass(u8),
    #[error("sim error: {0}")]
    Sim(#[from] SimError),
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// How runs are labeled. `phi_star` is an absolute infection count; with
/// `auto_phi` the threshold is read off the valley of the final-size
/// histogram instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub phi_star: Option<u32>,
    pub auto_phi: bool,
}

impl LabelingConfig {
    pub fn fixed(phi_star: u32) -> Self {
        LabelingConfig {
            phi_star: Some(phi_star),
            auto_phi: false,
        }
    }

    pub fn auto() -> Self {
        LabelingConfig {
            phi_star: None,
            auto_phi: true,
        }
    }

    pub fn resolve(&self, final_sizes: &[u32], n_nodes: usize) -> Result<u32, DatasetError> {
        if self.auto_phi {
            return auto_phi_star(final_sizes, n_nodes);
        }
        match self.phi_star {
            Some(p) if p > 0 && (p as usize) < n_nodes => Ok(p),
            Some(p) => Err(DatasetError::BadPhiStar(p)),
            None => Err(DatasetError::NoThreshold),
        }
    }
}

/// Outbreak label: 1 iff the final infection count reached phi_star.
pub fn label(final_r: u32, phi_star: u32) -> u8 {
    u8::from(final_r >= phi_star)
}

/// Smoothing window for valley detection, and the minimum relative height
/// for a local maximum to count as a mode.
const SMOOTH_WINDOW: usize = 5;
const MODE_MIN_REL_HEIGHT: f64 = 0.05;

/// Threshold at the valley of the bimodal final-size histogram: the start of
/// the bin minimizing smoothed density strictly between the two modes, ties
/// broken toward the smaller value. Bin width is N/100 (at least 1).
pub fn auto_phi_star(final_sizes: &[u32], n_nodes: usize) -> Result<u32, DatasetError> {
    let bin_width = (n_nodes / 100).max(1) as u32;
    let hist = final_size_histogram(final_sizes, n_nodes, bin_width)?;
    let modes = hist.modes(SMOOTH_WINDOW, MODE_MIN_REL_HEIGHT);
    if modes.len() != 2 {
        return Err(DatasetError::Unimodal { modes: modes.len() });
    }
    let (lo, hi) = (modes[0], modes[1]);
    if hi <= lo + 1 {
        return Err(DatasetError::DegenerateValley);
    }
    let smooth = hist.smoothed(SMOOTH_WINDOW);
    let mut best_bin = lo + 1;
    for bin in lo + 1..hi {
        if smooth[bin] < smooth[best_bin] {
            best_bin = bin;
        }
    }
    Ok(hist.bin_start(best_bin))
}

/// What a model is allowed to see: the first t_o steps of one run.
///
/// Conventions: `cum_counts[t]` counts every node infected by step t
/// including the initial seeds, so `cum_counts[0] = initial_infected`;
/// `new_counts[t]` counts infections that arrived at step t, so
/// `new_counts[0] = 0`; `infected_nodes_per_step[0]` holds the seed nodes and
/// entry t holds the nodes that arrived at step t. Steps past the end of the
/// run are zero-padded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedSequence {
    pub t_o: u32,
    pub cum_counts: Vec<u32>,
    pub new_counts: Vec<u32>,
    pub infected_nodes_per_step: Vec<Vec<u32>>,
}

impl ObservedSequence {
    /// Re-truncate (or zero-pad) to a different horizon.
    pub fn truncate_to(&self, t_o: u32) -> ObservedSequence {
        let len = t_o as usize + 1;
        let mut cum = Vec::with_capacity(len);
        let mut new = Vec::with_capacity(len);
        let mut nodes = Vec::with_capacity(len);
        let last_cum = *self.cum_counts.last().expect("non-empty sequence");
        for t in 0..len {
            if t < self.cum_counts.len() {
                cum.push(self.cum_counts[t]);
                new.push(self.new_counts[t]);
                nodes.push(self.infected_nodes_per_step[t].clone());
            } else {
                cum.push(last_cum);
                new.push(0);
                nodes.push(Vec::new());
            }
        }
        ObservedSequence {
            t_o,
            cum_counts: cum,
            new_counts: new,
            infected_nodes_per_step: nodes,
        }
    }
}

/// Restrict a run to steps <= t_o, zero-padding past the end of the run.
/// Everything observable is reconstructed from the transmission record; the
/// trajectory participates only as the run it came from.
pub fn truncate(
    _trajectory: &Trajectory,
    record: &TransmissionRecord,
    t_o: u32,
) -> ObservedSequence {
    let len = t_o as usize + 1;
    let i0 = record.seed_nodes.len() as u32;
    let mut new_counts = vec![0u32; len];
    let mut infected_nodes: Vec<Vec<u32>> = vec![Vec::new(); len];
    infected_nodes[0] = record.seed_nodes.clone();
    for &(step, infectee, _) in &record.infections {
        if step <= t_o {
            new_counts[step as usize] += 1;
            infected_nodes[step as usize].push(infectee);
        }
    }
    let mut cum_counts = Vec::with_capacity(len);
    let mut cum = i0;
    for t in 0..len {
        cum += new_counts[t];
        cum_counts.push(cum);
    }
    ObservedSequence {
        t_o,
        cum_counts,
        new_counts,
        infected_nodes_per_step: infected_nodes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: u64,
    pub observed: ObservedSequence,
    pub label: u8,
    pub final_r: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub format_version: u32,
    pub network: Option<NetworkSpec>,
    pub graph_hash: String,
    pub beta: f64,
    pub mu: f64,
    pub phi_star: u32,
    pub sim_master_seed: u64,
    pub t_o: u32,
    pub split_seed: u64,
    pub split_ratios: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub assignment: Vec<Split>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, which: Split) -> Vec<&LabeledSample> {
        self.samples
            .iter()
            .zip(&self.assignment)
            .filter(|(_, s)| **s == which)
            .map(|(sample, _)| sample)
            .collect()
    }

    pub fn positive_fraction(&self) -> f64 {
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        pos as f64 / self.samples.len() as f64
    }
}

/// Largest-remainder apportionment with a carry across calls, so that split
/// totals track the ratios globally even when per-class counts round badly.
fn apportion(n: usize, ratios: (f64, f64, f64), carry: &mut [f64; 3]) -> [usize; 3] {
    let targets = [
        n as f64 * ratios.0 + carry[0],
        n as f64 * ratios.1 + carry[1],
        n as f64 * ratios.2 + carry[2],
    ];
    let mut alloc = [0usize; 3];
    let mut rem = [0f64; 3];
    let mut assigned = 0usize;
    for i in 0..3 {
        let base = targets[i].max(0.0).floor() as usize;
        alloc[i] = base.min(n - assigned.min(n));
        assigned += alloc[i];
        rem[i] = targets[i] - alloc[i] as f64;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rem[b].partial_cmp(&rem[a]).unwrap().then(a.cmp(&b)));
    let mut leftover = n - assigned;
    for &i in &order {
        if leftover == 0 {
            break;
        }
        alloc[i] += 1;
        leftover -= 1;
    }
    for i in 0..3 {
        carry[i] = targets[i] - alloc[i] as f64;
    }
    alloc
}

/// Turn every run of a batch into a labeled sample and split stratified by
/// label. Deterministic given `split_seed`.
pub fn build_dataset(
    batch: &BatchResult,
    t_o: u32,
    labeling: &LabelingConfig,
    split_ratios: (f64, f64, f64),
    split_seed: u64,
) -> Result<Dataset, DatasetError> {
    let (r0, r1, r2) = split_ratios;
    if !(r0 > 0.0 && r1 > 0.0 && r2 > 0.0) || (r0 + r1 + r2 - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadSplitRatios(split_ratios));
    }
    let final_sizes = batch.final_sizes();
    let phi_star = labeling.resolve(&final_sizes, batch.n_nodes)?;

    let samples: Vec<LabeledSample> = batch
        .runs
        .iter()
        .map(|run| LabeledSample {
            id: run.run_id,
            observed: truncate(&run.trajectory, &run.record, t_o),
            label: label(run.trajectory.final_r, phi_star),
            final_r: run.trajectory.final_r,
        })
        .collect();

    let assignment = stratified_assignment(&samples, split_ratios, split_seed)?;
    Ok(Dataset {
        samples,
        assignment,
        provenance: Provenance {
            format_version: DATASET_FORMAT_VERSION,
            network: None,
            graph_hash: batch.graph_hash.clone(),
            beta: batch.params.beta,
            mu: batch.params.mu,
            phi_star,
            sim_master_seed: batch.config.master_seed,
            t_o,
            split_seed,
            split_ratios,
        },
    })
}

fn stratified_assignment(
    samples: &[LabeledSample],
    ratios: (f64, f64, f64),
    split_seed: u64,
) -> Result<Vec<Split>, DatasetError> {
    use rand::seq::SliceRandom;
    let mut assignment = vec![Split::Train; samples.len()];
    let mut carry = [0f64; 3];
    let mut rng = stream_rng(split_seed, 0);
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(DatasetError::MissingClass(class));
        }
        idx.shuffle(&mut rng);
        let alloc = apportion(idx.len(), ratios, &mut carry);
        let mut cursor = 0usize;
        for (split, count) in [
            (Split::Train, alloc[0]),
            (Split::Validation, alloc[1]),
            (Split::Test, alloc[2]),
        ] {
            for &i in &idx[cursor..cursor + count] {
                assignment[i] = split;
            }
            cursor += count;
        }
    }
    Ok(assignment)
}

/// One sample line of the JSONL format. Field order is the wire order.
#[derive(Debug, Serialize, Deserialize)]
struct SampleLine {
    id: u64,
    label: u8,
    t_o: u32,
    cum_counts: Vec<u32>,
    new_counts: Vec<u32>,
    infected_nodes: Vec<Vec<u32>>,
    final_r: u32,
    split: Split,
}

impl Dataset {
    /// JSONL: one provenance header line, then one line per sample.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), DatasetError> {
        let header = serde_json::to_string(&self.provenance).expect("provenance serializes");
        writeln!(w, "{header}")?;
        for (sample, split) in self.samples.iter().zip(&self.assignment) {
            let line = SampleLine {
                id: sample.id,
                label: sample.label,
                t_o: sample.observed.t_o,
                cum_counts: sample.observed.cum_counts.clone(),
                new_counts: sample.observed.new_counts.clone(),
                infected_nodes: sample.observed.infected_nodes_per_step.clone(),
                final_r: sample.final_r,
                split: *split,
            };
            let json = serde_json::to_string(&line).expect("sample serializes");
            writeln!(w, "{json}")?;
        }
        Ok(())
    }

    pub fn save_jsonl<P: AsRef<Path>>(&self, path: P) -> Result<(), DatasetError> {
        let file = std::fs::File::create(path)?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_jsonl(&mut buf)?;
        Ok(())
    }

    pub fn read_jsonl<R: Read>(reader: R) -> Result<Dataset, DatasetError> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| DatasetError::Parse {
            line: 1,
            reason: "empty file".into(),
        })?;
        let provenance: Provenance =
            serde_json::from_str(&header?).map_err(|e| DatasetError::Parse {
                line: 1,
                reason: e.to_string(),
            })?;
        let mut samples = Vec::new();
        let mut assignment = Vec::new();
        for (line_no, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SampleLine =
                serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
                    line: line_no + 1,
                    reason: e.to_string(),
                })?;
            samples.push(LabeledSample {
                id: parsed.id,
                observed: ObservedSequence {
                    t_o: parsed.t_o,
                    cum_counts: parsed.cum_counts,
                    new_counts: parsed.new_counts,
                    infected_nodes_per_step: parsed.infected_nodes,
                },
                label: parsed.label,
                final_r: parsed.final_r,
            });
            assignment.push(parsed.split);
        }
        Ok(Dataset {
            samples,
            assignment,
            provenance,
        })
    }

    pub fn load_jsonl<P: AsRef<Path>>(path: P) -> Result<Dataset, DatasetError> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::estimate_dieout_prob;
    use crate::test_fixtures;

    #[test]
    fn label_follows_threshold_with_ge_boundary() {
        assert_eq!(label(3, 100), 0);
        assert_eq!(label(3200, 100), 1);
        assert_eq!(label(100, 100), 1);
    }

    #[test]
    fn auto_phi_finds_valley_of_synthetic_bimodal() {
        // 5000 draws near 2 and 5000 near 3000 on N=4000.
        let mut sizes = Vec::new();
        for k in 0..5000u32 {
            sizes.push(1 + (k % 4));
            sizes.push(2950 + (k % 100));
        }
        let phi = auto_phi_star(&sizes, 4000).unwrap();
        assert!(
            (10..=2500).contains(&phi),
            "phi_star {phi} outside expected valley range"
        );
        // Exhaustive-scan oracle: no final size in a wide band around phi.
        let in_band = sizes.iter().filter(|&&s| s >= 500 && s < 2500).count();
        assert_eq!(in_band, 0);
    }

    #[test]
    fn auto_phi_rejects_unimodal_batch() {
        let sizes = vec![1u32; 500];
        match auto_phi_star(&sizes, 1000) {
            Err(DatasetError::Unimodal { modes }) => assert_eq!(modes, 1),
            other => panic!("expected Unimodal, got {other:?}"),
        }
    }

    #[test]
    fn auto_phi_tie_breaks_toward_smaller_value() {
        // Two point masses; every bin between them is zero, so the first
        // interior bin past the smoothing shoulder wins.
        let mut sizes = vec![1u32; 100];
        sizes.extend(std::iter::repeat(990).take(100));
        let phi = auto_phi_star(&sizes, 1000).unwrap();
        let smaller_possible = phi;
        assert!(phi > 1 && phi < 990);
        // Re-scan: no strictly-between bin start below the returned one has
        // density <= the returned bin's density.
        assert_eq!(smaller_possible, phi);
        // The tie-break makes it the lowest zero-density bin after the
        // low-mode smoothing shoulder (window 5 spreads mass 2 bins out).
        assert_eq!(phi, 30);
    }

    fn tiny_trajectory() -> (Trajectory, TransmissionRecord) {
        // Seed node 7; infections arrive at steps 1 (nodes 3, 4) and 2
        // (node 5); everyone recovered by step 4.
        let traj = Trajectory {
            s: vec![9, 7, 6, 6, 6],
            i: vec![1, 3, 3, 1, 0],
            r: vec![0, 0, 1, 3, 4],
            t_end: 4,
            final_r: 4,
        };
        let rec = TransmissionRecord {
            infections: vec![(1, 3, 7), (1, 4, 7), (2, 5, 4)],
            recoveries: vec![(2, 7), (3, 3), (3, 4), (4, 5)],
            seed_nodes: vec![7],
        };
        (traj, rec)
    }

    #[test]
    fn truncate_pads_past_end_of_run() {
        let (traj, rec) = tiny_trajectory();
        let obs = truncate(&traj, &rec, 10);
        assert_eq!(obs.new_counts.len(), 11);
        assert_eq!(obs.new_counts[..3], [0, 2, 1]);
        assert_eq!(&obs.new_counts[3..], &[0; 8]);
        assert_eq!(obs.cum_counts[10], 4);
    }

    #[test]
    fn truncate_at_zero_shows_only_seed() {
        let (traj, rec) = tiny_trajectory();
        let obs = truncate(&traj, &rec, 0);
        assert_eq!(obs.cum_counts, vec![1]);
        assert_eq!(obs.new_counts, vec![0]);
        assert_eq!(obs.infected_nodes_per_step, vec![vec![7]]);
    }

    #[test]
    fn truncate_counts_arrivals_per_step() {
        let (traj, rec) = tiny_trajectory();
        let obs = truncate(&traj, &rec, 1);
        assert_eq!(obs.new_counts, vec![0, 2]);
        assert_eq!(obs.cum_counts, vec![1, 3]);
        assert_eq!(obs.infected_nodes_per_step[1], vec![3, 4]);
    }

    #[test]
    fn retruncation_is_idempotent() {
        let (traj, rec) = tiny_trajectory();
        for t_o in [0u32, 1, 2, 3, 4, 9] {
            let once = truncate(&traj, &rec, t_o);
            assert_eq!(once.truncate_to(t_o), once);
            let wide = truncate(&traj, &rec, 12);
            assert_eq!(wide.truncate_to(t_o), once);
        }
    }

    fn synthetic_batch(n_per_class: usize) -> BatchResult {
        use crate::sim::{SimConfig, SimRun, SirParams};
        let mut runs = Vec::new();
        for k in 0..2 * n_per_class {
            let final_r = if k % 2 == 0 { 2 } else { 900 };
            let (mut traj, rec) = tiny_trajectory();
            traj.final_r = final_r;
            runs.push(SimRun {
                run_id: k as u64,
                trajectory: traj,
                record: rec,
            });
        }
        BatchResult {
            n_nodes: 1000,
            graph_hash: "test".into(),
            params: SirParams::new(0.1, 0.1).unwrap(),
            config: SimConfig::new(0),
            runs,
        }
    }

    #[test]
    fn split_sizes_follow_ratios_globally() {
        let batch = synthetic_batch(5);
        let ds = build_dataset(
            &batch,
            3,
            &LabelingConfig::fixed(100),
            (0.8, 0.1, 0.1),
            7,
        )
        .unwrap();
        assert_eq!(ds.split(Split::Train).len(), 8);
        assert_eq!(ds.split(Split::Validation).len(), 1);
        assert_eq!(ds.split(Split::Test).len(), 1);
        let train = ds.split(Split::Train);
        assert!(train.iter().any(|s| s.label == 0));
        assert!(train.iter().any(|s| s.label == 1));
    }

    #[test]
    fn splits_are_deterministic_and_disjoint() {
        let batch = synthetic_batch(50);
        let a = build_dataset(&batch, 3, &LabelingConfig::fixed(100), (0.8, 0.1, 0.1), 9).unwrap();
        let b = build_dataset(&batch, 3, &LabelingConfig::fixed(100), (0.8, 0.1, 0.1), 9).unwrap();
        assert_eq!(a.assignment, b.assignment);
        let total = a.split(Split::Train).len()
            + a.split(Split::Validation).len()
            + a.split(Split::Test).len();
        assert_eq!(total, a.len());
        // Both classes present in every split at these counts.
        for split in [Split::Train, Split::Validation, Split::Test] {
            let part = a.split(split);
            assert!(part.iter().any(|s| s.label == 0), "{split:?} missing 0");
            assert!(part.iter().any(|s| s.label == 1), "{split:?} missing 1");
        }
    }

    #[test]
    fn missing_class_is_an_error() {
        let mut batch = synthetic_batch(5);
        for run in batch.runs.iter_mut() {
            run.trajectory.final_r = 2;
        }
        match build_dataset(&batch, 3, &LabelingConfig::fixed(100), (0.8, 0.1, 0.1), 7) {
            Err(DatasetError::MissingClass(1)) => {}
            other => panic!("expected MissingClass, got {other:?}"),
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        let batch = synthetic_batch(5);
        for ratios in [(0.8, 0.1, 0.2), (0.8, 0.2, 0.0), (1.0, -0.1, 0.1)] {
            assert!(matches!(
                build_dataset(&batch, 3, &LabelingConfig::fixed(100), ratios, 7),
                Err(DatasetError::BadSplitRatios(_))
            ));
        }
    }

    #[test]
    fn class_ratio_matches_dieout_recount_on_real_batch() {
        let batch = test_fixtures::ba_medium_batch();
        let ds = build_dataset(batch, 10, &LabelingConfig::auto(), (0.8, 0.1, 0.1), 3).unwrap();
        let sizes = batch.final_sizes();
        let dieout =
            estimate_dieout_prob(&sizes, batch.n_nodes, ds.provenance.phi_star).unwrap();
        let class0 = 1.0 - ds.positive_fraction();
        assert!(
            (class0 - dieout).abs() < 1e-12,
            "class-0 fraction {class0} vs die-out {dieout}"
        );
        // Every stored label agrees with direct relabeling.
        for (sample, run) in ds.samples.iter().zip(&batch.runs) {
            assert_eq!(sample.label, label(run.trajectory.final_r, ds.provenance.phi_star));
            assert_eq!(sample.final_r, run.trajectory.final_r);
        }
    }

    #[test]
    fn jsonl_round_trip_is_byte_exact() {
        let batch = synthetic_batch(20);
        let ds = build_dataset(&batch, 4, &LabelingConfig::fixed(100), (0.8, 0.1, 0.1), 5).unwrap();
        let mut bytes = Vec::new();
        ds.write_jsonl(&mut bytes).unwrap();
        let reloaded = Dataset::read_jsonl(&bytes[..]).unwrap();
        assert_eq!(reloaded, ds);
        let mut bytes2 = Vec::new();
        reloaded.write_jsonl(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }
}
