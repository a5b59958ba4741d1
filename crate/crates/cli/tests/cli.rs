//! End-to-end exercises of the command-line surface: exit codes, file
//! formats, and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn outbreak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outbreak"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(output: &Output, expected: i32) {
    let code = output.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        expected,
        "exit {code}, expected {expected}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_er_writes_expected_edge_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("er.edges");
    let r = outbreak(&[
        "generate", "--er", "--n", "10000", "--k", "5", "--seed", "1", "--out",
        path_str(&out),
    ]);
    assert_code(&r, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    // Self-loop roster lines register nodes; real edges have u != v.
    let edges = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter(|l| {
            let (u, v) = l.split_once(' ').unwrap();
            u != v
        })
        .count();
    // ~ n * k / 2 = 25000
    assert!(
        (24000..=26000).contains(&edges),
        "unexpected edge count {edges}"
    );
    assert!(out.with_extension("manifest.json").exists());
}

#[test]
fn generate_ba_min_degree_holds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ba.edges");
    let r = outbreak(&[
        "generate", "--ba", "--n", "2000", "--m", "3", "--seed", "1", "--out",
        path_str(&out),
    ]);
    assert_code(&r, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut degree = vec![0usize; 2000];
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let (u, v) = line.split_once(' ').unwrap();
        if u == v {
            continue; // roster line
        }
        degree[u.parse::<usize>().unwrap()] += 1;
        degree[v.parse::<usize>().unwrap()] += 1;
    }
    for (node, d) in degree.iter().enumerate().skip(3) {
        assert!(*d >= 3, "node {node} degree {d}");
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    let r = outbreak(&["generate", "--er", "--k", "5"]);
    assert_code(&r, 1);
    // Mode-specific companion flags too.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.edges");
    let r = outbreak(&["generate", "--er", "--n", "10", "--out", path_str(&out)]);
    assert_code(&r, 1);
}

#[test]
fn simulate_beta_zero_keeps_single_seed_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    assert_code(
        &outbreak(&[
            "generate", "--er", "--n", "300", "--k", "4", "--seed", "3", "--out",
            path_str(&graph),
        ]),
        0,
    );
    let sim1 = dir.path().join("sim1");
    let sim2 = dir.path().join("sim2");
    for sim in [&sim1, &sim2] {
        assert_code(
            &outbreak(&[
                "simulate", "--graph", path_str(&graph), "--beta", "0", "--mu", "0.5",
                "--runs", "100", "--seed", "9", "--out-dir", path_str(sim),
            ]),
            0,
        );
    }
    let t1 = std::fs::read(sim1.join("trajectories.jsonl")).unwrap();
    let t2 = std::fs::read(sim2.join("trajectories.jsonl")).unwrap();
    assert_eq!(t1, t2, "reruns must be byte-identical");

    let text = String::from_utf8(t1).unwrap();
    for line in text.lines().skip(1) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["final_r"], 1, "beta=0 run spread beyond the seed");
    }
    // Manifest content hashes agree even though wall times differ.
    let m1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sim1.join("manifest.json")).unwrap())
            .unwrap();
    let m2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sim2.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m1["content_hash"], m2["content_hash"]);
}

#[test]
fn simulate_bimodal_histogram_has_two_modes() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    assert_code(
        &outbreak(&[
            "generate", "--er", "--n", "500", "--k", "6", "--seed", "2", "--out",
            path_str(&graph),
        ]),
        0,
    );
    let sim = dir.path().join("sim");
    assert_code(
        &outbreak(&[
            "simulate", "--graph", path_str(&graph), "--beta", "0.4", "--mu", "0.9",
            "--runs", "3000", "--seed", "4", "--auto-phi", "--out-dir", path_str(&sim),
        ]),
        0,
    );
    let hist = std::fs::read_to_string(sim.join("histogram.csv")).unwrap();
    let counts: Vec<f64> = hist
        .lines()
        .skip(2)
        .map(|l| l.split_once(',').unwrap().1.parse::<f64>().unwrap())
        .collect();
    // 5-bin moving average, then count prominent local maxima.
    let smooth: Vec<f64> = (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(counts.len());
            counts[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let peak = smooth.iter().cloned().fold(0.0, f64::max);
    let mut modes = 0;
    for i in 0..smooth.len() {
        let left = if i == 0 { f64::MIN } else { smooth[i - 1] };
        let right = if i + 1 == smooth.len() {
            f64::MIN
        } else {
            smooth[i + 1]
        };
        if smooth[i] > left && smooth[i] >= right && smooth[i] >= 0.05 * peak {
            modes += 1;
        }
    }
    assert_eq!(modes, 2, "histogram: {counts:?}");
    assert!(sim.join("dieout.csv").exists());
}

/// Full desk pipeline: dataset, train, evaluate, reevaluate reproducibly.
#[test]
fn dataset_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    assert_code(
        &outbreak(&[
            "generate", "--er", "--n", "400", "--k", "6", "--seed", "5", "--out",
            path_str(&graph),
        ]),
        0,
    );
    let sim = dir.path().join("sim");
    assert_code(
        &outbreak(&[
            "simulate", "--graph", path_str(&graph), "--beta", "0.4", "--mu", "0.9",
            "--runs", "600", "--seed", "6", "--out-dir", path_str(&sim),
        ]),
        0,
    );
    let data = dir.path().join("data.jsonl");
    assert_code(
        &outbreak(&[
            "build-dataset", "--trajectories",
            path_str(&sim.join("trajectories.jsonl")),
            "--t-o", "4", "--auto-phi", "--split", "0.6,0.2,0.2", "--out", path_str(&data),
        ]),
        0,
    );

    // Train a small ogwn and evaluate it from its checkpoint.
    let ckpt = dir.path().join("model.ckpt");
    assert_code(
        &outbreak(&[
            "train", "--model", "ogwn", "--data", path_str(&data), "--graph",
            path_str(&graph), "--seed", "3", "--epochs", "4", "--hidden", "8",
            "--embedding-points", "4", "--out", path_str(&ckpt),
        ]),
        0,
    );
    let metrics1 = dir.path().join("m1.csv");
    let metrics2 = dir.path().join("m2.csv");
    for m in [&metrics1, &metrics2] {
        assert_code(
            &outbreak(&[
                "evaluate", "--checkpoint", path_str(&ckpt), "--data", path_str(&data),
                "--graph", path_str(&graph), "--out-metrics", path_str(m),
            ]),
            0,
        );
    }
    let b1 = std::fs::read(&metrics1).unwrap();
    assert_eq!(b1, std::fs::read(&metrics2).unwrap());
    let text = String::from_utf8(b1).unwrap();
    assert!(text.starts_with("# outbreak-metrics v1\nmodel,t_o,accuracy,precision,recall,f1,auc,n_test"));
    assert!(text.lines().nth(2).unwrap().starts_with("ogwn,4,"));

    // Baselines evaluate without a checkpoint.
    let st = dir.path().join("st.csv");
    assert_code(
        &outbreak(&[
            "evaluate", "--model", "st5", "--data", path_str(&data), "--out-metrics",
            path_str(&st),
        ]),
        0,
    );
    assert!(std::fs::read_to_string(&st).unwrap().contains("st5"));
}

#[test]
fn plot_handles_lines_histograms_and_rejects_empty() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("metrics.csv");
    std::fs::write(
        &csv,
        "model,t_o,accuracy,precision,recall,f1,auc,n_test\n\
         a,0,0.5,NA,NA,NA,0,10\na,1,0.5,NA,NA,NA,1,10\n\
         b,0,0.5,NA,NA,NA,0.5,10\nb,1,0.5,NA,NA,NA,0.6,10\n\
         c,0,0.5,NA,NA,NA,0.4,10\nc,1,0.5,NA,NA,NA,0.7,10\n",
    )
    .unwrap();
    let svg = dir.path().join("chart.svg");
    assert_code(
        &outbreak(&["plot", "--input", path_str(&csv), "--out", path_str(&svg)]),
        0,
    );
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 3);
    assert!(text.contains(r#"data-points="0,0 1,1""#));

    // Histogram input.
    let hist = dir.path().join("h.csv");
    std::fs::write(&hist, "# outbreak-histogram v1\nbin_start,count\n0,5\n10,0\n20,3\n").unwrap();
    let svg2 = dir.path().join("h.svg");
    assert_code(
        &outbreak(&["plot", "--input", path_str(&hist), "--out", path_str(&svg2)]),
        0,
    );

    // Empty series is a validation error.
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "model,t_o,accuracy,precision,recall,f1,auc,n_test\n").unwrap();
    let r = outbreak(&["plot", "--input", path_str(&empty), "--out", path_str(&svg)]);
    assert_code(&r, 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("EmptyInput"));
}

#[test]
fn sweep_writes_metric_table() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    assert_code(
        &outbreak(&[
            "generate", "--er", "--n", "400", "--k", "6", "--seed", "8", "--out",
            path_str(&graph),
        ]),
        0,
    );
    let out = dir.path().join("sweep");
    assert_code(
        &outbreak(&[
            "sweep", "--graph", path_str(&graph), "--beta", "0.4", "--mu", "0.9",
            "--runs", "500", "--seed", "2", "--t-o-list", "2,4", "--models", "st5,knn",
            "--auto-phi", "--split", "0.6,0.2,0.2", "--out-dir", path_str(&out),
        ]),
        0,
    );
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    // Version comment, header, then 2 models x 2 horizons.
    assert_eq!(csv.lines().count(), 6, "csv:\n{csv}");
    assert!(out.join("metrics.json").exists());
    assert!(out.join("roc.json").exists());
}

#[test]
fn pretrain_finetune_pipeline_and_provenance_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pretrain.toml");
    std::fs::write(
        &config,
        r#"
t_o_list = [3]
epochs = 2
nn_seed = 5

[ogwn]
hidden_dim = 6
embedding_points = 3
batch_size = 32

[[scenarios]]
beta = 0.4
mu = 0.9
runs = 250
sim_seed = 11
[scenarios.network]
kind = "er"
n = 250
avg_degree = 6.0
rng_seed = 21
"#,
    )
    .unwrap();
    let ckpt = dir.path().join("pre.ckpt");
    assert_code(
        &outbreak(&["pretrain", "--config", path_str(&config), "--out", path_str(&ckpt)]),
        0,
    );

    // Build a dataset on the pretraining network itself: finetune must
    // refuse it.
    let pre_graph = dir.path().join("pre.edges");
    assert_code(
        &outbreak(&[
            "generate", "--er", "--n", "250", "--k", "6", "--seed", "21", "--out",
            path_str(&pre_graph),
        ]),
        0,
    );
    let sim = dir.path().join("sim_pre");
    assert_code(
        &outbreak(&[
            "simulate", "--graph", path_str(&pre_graph), "--beta", "0.4", "--mu", "0.9",
            "--runs", "250", "--seed", "11", "--out-dir", path_str(&sim),
        ]),
        0,
    );
    let data = dir.path().join("pre_data.jsonl");
    assert_code(
        &outbreak(&[
            "build-dataset", "--trajectories", path_str(&sim.join("trajectories.jsonl")),
            "--t-o", "3", "--auto-phi", "--split", "0.5,0.2,0.3", "--out", path_str(&data),
        ]),
        0,
    );
    let refused = outbreak(&[
        "finetune", "--checkpoint", path_str(&ckpt), "--graph", path_str(&pre_graph),
        "--data", path_str(&data), "--out", path_str(&dir.path().join("ft.ckpt")),
    ]);
    assert_code(&refused, 2);
    assert!(String::from_utf8_lossy(&refused.stderr).contains("overlap"));

    // A held-out network is accepted.
    let held = dir.path().join("held.edges");
    assert_code(
        &outbreak(&[
            "generate", "--er", "--n", "250", "--k", "6", "--seed", "777", "--out",
            path_str(&held),
        ]),
        0,
    );
    let sim2 = dir.path().join("sim_held");
    assert_code(
        &outbreak(&[
            "simulate", "--graph", path_str(&held), "--beta", "0.4", "--mu", "0.9",
            "--runs", "250", "--seed", "12", "--out-dir", path_str(&sim2),
        ]),
        0,
    );
    let data2 = dir.path().join("held_data.jsonl");
    assert_code(
        &outbreak(&[
            "build-dataset", "--trajectories", path_str(&sim2.join("trajectories.jsonl")),
            "--t-o", "3", "--auto-phi", "--split", "0.5,0.2,0.3", "--out", path_str(&data2),
        ]),
        0,
    );
    let ft = dir.path().join("ft.ckpt");
    let metrics = dir.path().join("ft.csv");
    assert_code(
        &outbreak(&[
            "finetune", "--checkpoint", path_str(&ckpt), "--graph", path_str(&held),
            "--data", path_str(&data2), "--epochs", "2", "--out", path_str(&ft),
            "--out-metrics", path_str(&metrics),
        ]),
        0,
    );
    assert!(std::fs::read_to_string(&metrics)
        .unwrap()
        .contains("pretrain-finetune"));
}
