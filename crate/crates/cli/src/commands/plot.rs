use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::eval::RocEntry;

use crate::error::CliError;
use crate::manifest::write_manifest;
use crate::svg::{LineChart, Series};

#[derive(Args)]
pub struct PlotArgs {
    /// metrics CSV, histogram CSV, or ROC JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Metric column to plot from a metrics CSV.
    #[arg(long, default_value = "auc")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: PlotArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", args.input.display())))?;
    let chart = sniff_and_build(&text, &args.metric)?;
    let svg = chart.render()?;
    std::fs::write(&args.out, svg).map_err(CliError::runtime)?;
    write_manifest(
        &args.out.with_extension("manifest.json"),
        "plot",
        serde_json::json!({
            "input": args.input,
            "metric": args.metric,
        }),
        started,
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn sniff_and_build(text: &str, metric: &str) -> Result<LineChart, CliError> {
    let first_data_line = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if first_data_line.starts_with("model,t_o") {
        metrics_chart(text, metric)
    } else if first_data_line.starts_with("bin_start,count") {
        histogram_chart(text)
    } else if text.trim_start().starts_with('[') || text.trim_start().starts_with('{') {
        roc_chart(text)
    } else {
        Err(CliError::Validation(
            "unrecognized input: expected a metrics CSV, histogram CSV, or ROC JSON".into(),
        ))
    }
}

fn metrics_chart(text: &str, metric: &str) -> Result<LineChart, CliError> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation("EmptyInput: empty metrics file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let metric_idx = columns
        .iter()
        .position(|c| *c == metric)
        .ok_or_else(|| CliError::Validation(format!("metrics CSV has no column {metric:?}")))?;
    let mut series: Vec<Series> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::Validation(format!("ragged CSV row: {line:?}")));
        }
        let model = fields[0].to_string();
        let t_o: f64 = fields[1]
            .parse()
            .map_err(|_| CliError::Validation(format!("bad t_o in row: {line:?}")))?;
        let value = fields[metric_idx];
        if value == "NA" {
            continue;
        }
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::Validation(format!("bad {metric} in row: {line:?}")))?;
        match series.iter_mut().find(|s| s.name == model) {
            Some(s) => s.points.push((t_o, value)),
            None => series.push(Series {
                name: model,
                points: vec![(t_o, value)],
            }),
        }
    }
    Ok(LineChart {
        title: format!("{metric} vs observation time"),
        x_label: "t_o".into(),
        y_label: metric.into(),
        series,
    })
}

fn histogram_chart(text: &str) -> Result<LineChart, CliError> {
    let mut points = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (bin, count) = line
            .split_once(',')
            .ok_or_else(|| CliError::Validation(format!("bad histogram row: {line:?}")))?;
        let bin: f64 = bin
            .parse()
            .map_err(|_| CliError::Validation(format!("bad bin in row: {line:?}")))?;
        let count: f64 = count
            .parse()
            .map_err(|_| CliError::Validation(format!("bad count in row: {line:?}")))?;
        points.push((bin, count));
    }
    Ok(LineChart {
        title: "final-size histogram".into(),
        x_label: "final size".into(),
        y_label: "runs".into(),
        series: vec![Series {
            name: "count".into(),
            points,
        }],
    })
}

fn roc_chart(text: &str) -> Result<LineChart, CliError> {
    // Either the versioned {"format_version", "rocs": [...]} object or a
    // bare entry list.
    let entries: Vec<RocEntry> = match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(map)) => serde_json::from_value(
            map.get("rocs")
                .cloned()
                .ok_or_else(|| CliError::Validation("ROC JSON object lacks \"rocs\"".into()))?,
        )
        .map_err(|e| CliError::Validation(format!("bad ROC JSON: {e}")))?,
        Ok(value) => serde_json::from_value(value)
            .map_err(|e| CliError::Validation(format!("bad ROC JSON: {e}")))?,
        Err(e) => return Err(CliError::Validation(format!("bad ROC JSON: {e}"))),
    };
    let series = entries
        .into_iter()
        .map(|e| Series {
            name: format!("{} t_o={}", e.model, e.t_o),
            points: e.curve.points,
        })
        .collect();
    Ok(LineChart {
        title: "ROC".into(),
        x_label: "FPR".into(),
        y_label: "TPR".into(),
        series,
    })
}
