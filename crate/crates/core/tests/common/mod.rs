//! Helpers shared by the integration suites.

#![allow(dead_code)]

use outbreak_core::nn::ParamSet;

/// Central-difference gradient check: returns the worst relative error and
/// the parameter index where it occurs.
pub fn finite_diff_check<F>(
    params: &mut ParamSet,
    analytic: &[f64],
    mut loss_fn: F,
    step: f64,
) -> (f64, usize)
where
    F: FnMut(&ParamSet) -> f64,
{
    let mut worst = 0.0;
    let mut worst_idx = 0;
    for i in 0..params.data.len() {
        let original = params.data[i];
        params.data[i] = original + step;
        let plus = loss_fn(params);
        params.data[i] = original - step;
        let minus = loss_fn(params);
        params.data[i] = original;
        let fd = (plus - minus) / (2.0 * step);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        let rel = (analytic[i] - fd).abs() / denom;
        if rel > worst {
            worst = rel;
            worst_idx = i;
        }
    }
    (worst, worst_idx)
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = midranks(xs);
    let ry = midranks(ys);
    pearson(&rx, &ry)
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Ring lattice with random rewiring: the held-out small-world network used
/// by the transfer experiments.
pub fn watts_strogatz(n: usize, k_half: usize, rewire_prob: f64, seed: u64) -> outbreak_core::netgen::Graph {
    use rand::Rng;
    let mut rng = outbreak_core::rng::stream_rng(seed, 0);
    let mut edges = std::collections::HashSet::new();
    for u in 0..n {
        for d in 1..=k_half {
            let v = (u + d) % n;
            let (a, b) = (u.min(v) as u32, u.max(v) as u32);
            edges.insert((a, b));
        }
    }
    let mut list: Vec<(u32, u32)> = edges.iter().copied().collect();
    list.sort_unstable();
    for edge in list {
        if rng.gen::<f64>() < rewire_prob {
            edges.remove(&edge);
            loop {
                let w = rng.gen_range(0..n as u32);
                let (a, b) = (edge.0.min(w), edge.0.max(w));
                if a != b && !edges.contains(&(a, b)) {
                    edges.insert((a, b));
                    break;
                }
            }
        }
    }
    let mut list: Vec<(u32, u32)> = edges.into_iter().collect();
    list.sort_unstable();
    outbreak_core::netgen::Graph::from_edges(n, list)
}
