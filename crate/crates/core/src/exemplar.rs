//! In-context example selection by goal overlap.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use rand::Rng;
use thiserror::Error;

use crate::model::{Dialogue, UserGoal};

#[derive(Debug, Error, PartialEq)]
pub enum ExemplarError {
    #[error("goal similarity is undefined for an empty goal")]
    EmptyGoal,
    #[error("cannot draw {k} examples from a pool of {pool}")]
    PoolTooSmall { k: usize, pool: usize },
    #[error("selection temperature must be positive, got {0}")]
    BadTemperature(f64),
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Product of the Jaccard overlap of domain sets and of domain-qualified slot sets.
pub fn goal_similarity(g1: &UserGoal, g2: &UserGoal) -> Result<f64, ExemplarError> {
    if g1.is_empty() || g2.is_empty() {
        return Err(ExemplarError::EmptyGoal);
    }
    Ok(jaccard(&g1.domain_set(), &g2.domain_set()) * jaccard(&g1.qualified_slots(), &g2.qualified_slots()))
}

/// Softmax of `w / tau` with max subtraction.
pub fn softmax(weights: &[f64], tau: f64) -> Vec<f64> {
    if weights.is_empty() {
        return Vec::new();
    }
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| ((w - max) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn selection_probabilities(
    target: &UserGoal,
    pool: &[Dialogue],
    tau: f64,
) -> Result<IndexMap<String, f64>, ExemplarError> {
    let w = similarities(target, pool)?;
    check_tau(tau)?;
    Ok(pool.iter().map(|d| d.id.clone()).zip(softmax(&w, tau)).collect())
}

fn similarities(target: &UserGoal, pool: &[Dialogue]) -> Result<Vec<f64>, ExemplarError> {
    pool.iter().map(|d| goal_similarity(target, d.goal())).collect()
}

fn check_tau(tau: f64) -> Result<(), ExemplarError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(ExemplarError::BadTemperature(tau))
    }
}

/// One drawn example with its similarity and first-draw probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Chosen {
    pub index: usize,
    pub id: String,
    pub similarity: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExampleSelection {
    pub target_goal: UserGoal,
    pub tau: f64,
    pub chosen: Vec<Chosen>,
}

/// Draws `k` distinct indices sequentially, renormalizing the softmax over
/// the remaining candidates after each draw.
pub fn sample_by_weight<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<usize>, ExemplarError> {
    check_tau(tau)?;
    if k > weights.len() {
        return Err(ExemplarError::PoolTooSmall { k, pool: weights.len() });
    }
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let w: Vec<f64> = remaining.iter().map(|&i| weights[i]).collect();
        let p = softmax(&w, tau);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = p.len() - 1;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                pick = j;
                break;
            }
        }
        out.push(remaining.remove(pick));
    }
    Ok(out)
}

pub fn select_examples<R: Rng + ?Sized>(
    target: &UserGoal,
    pool: &[Dialogue],
    k: usize,
    tau: f64,
    rng: &mut R,
) -> Result<ExampleSelection, ExemplarError> {
    let w = similarities(target, pool)?;
    let idx = sample_by_weight(&w, k, tau, rng)?;
    let p = softmax(&w, tau);
    let chosen = idx
        .into_iter()
        .map(|i| Chosen { index: i, id: pool[i].id.clone(), similarity: w[i], probability: p[i] })
        .collect();
    Ok(ExampleSelection { target_goal: target.clone(), tau, chosen })
}

pub fn sample_examples<'a, R: Rng + ?Sized>(
    target: &UserGoal,
    pool: &'a [Dialogue],
    k: usize,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<&'a Dialogue>, ExemplarError> {
    let sel = select_examples(target, pool, k, tau, rng)?;
    Ok(sel.chosen.iter().map(|c| &pool[c.index]).collect())
}
