//! Stochastic SIR spreading on contact networks, with predictors that decide
//! early whether a spreading event will take off or die out.
//!
//! The crate is organized as a pipeline:
//!
//! * [`netgen`] — contact networks (ER, BA, edge-list files) and graph algebra
//! * [`sim`] — deterministic SIR reference and the stochastic network process
//! * [`dataset`] — labeled, truncated observation windows with splits
//! * [`graphwave`] — heat-kernel wavelet structural node embeddings
//! * [`nn`] — dense neural kernel (GRU/BiGRU, conv+maxpool, MLP, Adam)
//! * [`models`] — the predictors (ST, KNN, OCNN, OGWN, pretrain-finetune)
//! * [`eval`] — confusion metrics, ROC/AUC, observation-time sweeps

pub mod dataset;
pub mod eval;
pub mod graphwave;
pub mod models;
pub mod netgen;
pub mod nn;
pub mod rng;
pub mod sim;

#[cfg(test)]
pub(crate) mod test_fixtures;
