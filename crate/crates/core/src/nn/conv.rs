//! Token-embedding 1D convolution with max-over-time pooling, the sentence
//! CNN layout: one feature per filter, filters grouped by window size.

use super::linalg::outer_add;
use super::{NnError, ParamLayout, Slot};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvText {
    pub vocab: usize,
    pub embed_dim: usize,
    pub windows: Vec<usize>,
    pub filters_per_window: usize,
    pub embed: Slot,
    filter_w: Vec<Slot>,
    filter_b: Vec<Slot>,
}

impl ConvText {
    pub fn register(
        layout: &mut ParamLayout,
        prefix: &str,
        vocab: usize,
        embed_dim: usize,
        windows: &[usize],
        filters_per_window: usize,
    ) -> Self {
        assert!(windows.iter().all(|&h| h >= 1), "window sizes must be >= 1");
        let embed = layout.add(format!("{prefix}.embed"), &[vocab, embed_dim]);
        let mut filter_w = Vec::new();
        let mut filter_b = Vec::new();
        for &h in windows {
            filter_w.push(layout.add(
                format!("{prefix}.conv{h}.w"),
                &[filters_per_window, h * embed_dim],
            ));
            filter_b.push(layout.add(format!("{prefix}.conv{h}.b"), &[filters_per_window]));
        }
        ConvText {
            vocab,
            embed_dim,
            windows: windows.to_vec(),
            filters_per_window,
            embed,
            filter_w,
            filter_b,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.windows.len() * self.filters_per_window
    }

    /// Embedding row for a position; positions past the sequence end are the
    /// zero padding.
    fn embed_row<'a>(&self, params: &'a [f64], tokens: &[usize], pos: usize) -> Option<&'a [f64]> {
        if pos < tokens.len() {
            let t = tokens[pos];
            let e = self.embed.of(params);
            Some(&e[t * self.embed_dim..(t + 1) * self.embed_dim])
        } else {
            None
        }
    }

    pub fn forward_cached(
        &self,
        params: &[f64],
        tokens: &[usize],
    ) -> Result<(Vec<f64>, ConvCache), NnError> {
        if tokens.is_empty() {
            return Err(NnError::EmptySequence);
        }
        for &t in tokens {
            if t >= self.vocab {
                return Err(NnError::InvalidToken {
                    token: t,
                    vocab: self.vocab,
                });
            }
        }
        let k = self.embed_dim;
        let mut features = Vec::with_capacity(self.feature_dim());
        let mut best_pos = Vec::with_capacity(self.feature_dim());
        let mut best_pre = Vec::with_capacity(self.feature_dim());
        for (wi, &h) in self.windows.iter().enumerate() {
            // Right-pad with zero rows so there is at least one window.
            let padded_len = tokens.len().max(h);
            let n_windows = padded_len - h + 1;
            let w = self.filter_w[wi].of(params);
            let b = self.filter_b[wi].of(params);
            for f in 0..self.filters_per_window {
                let wf = &w[f * h * k..(f + 1) * h * k];
                let mut best = f64::MIN;
                let mut best_j = 0usize;
                for j in 0..n_windows {
                    let mut pre = b[f];
                    for p in 0..h {
                        if let Some(row) = self.embed_row(params, tokens, j + p) {
                            let wrow = &wf[p * k..(p + 1) * k];
                            for (wv, ev) in wrow.iter().zip(row) {
                                pre += wv * ev;
                            }
                        }
                    }
                    let value = pre.max(0.0);
                    if value > best {
                        best = value;
                        best_j = j;
                    }
                }
                features.push(best);
                best_pos.push(best_j);
                // Re-derive the winning pre-activation for the ReLU gate.
                let mut pre = b[f];
                for p in 0..h {
                    if let Some(row) = self.embed_row(params, tokens, best_j + p) {
                        let wrow = &wf[p * k..(p + 1) * k];
                        for (wv, ev) in wrow.iter().zip(row) {
                            pre += wv * ev;
                        }
                    }
                }
                best_pre.push(pre);
            }
        }
        Ok((
            features,
            ConvCache {
                tokens: tokens.to_vec(),
                best_pos,
                best_pre,
            },
        ))
    }

    pub fn backward(&self, params: &[f64], cache: &ConvCache, d_features: &[f64], grads: &mut [f64]) {
        let k = self.embed_dim;
        let mut idx = 0usize;
        for (wi, &h) in self.windows.iter().enumerate() {
            let w = self.filter_w[wi].of(params);
            for f in 0..self.filters_per_window {
                let g = d_features[idx];
                let pre = cache.best_pre[idx];
                let j = cache.best_pos[idx];
                idx += 1;
                if g == 0.0 || pre <= 0.0 {
                    continue;
                }
                let wf = &w[f * h * k..(f + 1) * h * k];
                {
                    let dw_all = self.filter_w[wi].of_mut(grads);
                    let dwf = &mut dw_all[f * h * k..(f + 1) * h * k];
                    for p in 0..h {
                        if let Some(row) = self.embed_row(params, cache.tokens.as_slice(), j + p) {
                            outer_add(&mut dwf[p * k..(p + 1) * k], &[g], row);
                        }
                    }
                }
                self.filter_b[wi].of_mut(grads)[f] += g;
                let de_all = self.embed.of_mut(grads);
                for p in 0..h {
                    if j + p < cache.tokens.len() {
                        let t = cache.tokens[j + p];
                        let wrow = &wf[p * k..(p + 1) * k];
                        let drow = &mut de_all[t * k..(t + 1) * k];
                        for (d, wv) in drow.iter_mut().zip(wrow) {
                            *d += g * wv;
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    tokens: Vec<usize>,
    best_pos: Vec<usize>,
    best_pre: Vec<f64>,
}

/// Embed a token sequence and pool each filter's response over time.
pub fn conv1d_maxpool(
    conv: &ConvText,
    params: &[f64],
    tokens: &[usize],
) -> Result<Vec<f64>, NnError> {
    Ok(conv.forward_cached(params, tokens)?.0)
}
