//! Turn-level generation: a prescribed belief for one user turn, chosen from
//! the preceding system act, and an utterance that must express it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use super::batch::{run_ordered, substream};
use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::config::GenConfig;
use crate::corpus::SeedDataset;
use crate::exemplar::{goal_similarity, sample_by_weight, ExemplarError};
use crate::model::{DialogAct, Dialogue, SlotTriple, Source, Turn, TurnBelief, GENERAL};
use crate::ontology::Ontology;
use crate::prompt::{build_dst_prompt, TurnExample};
use crate::revision::filter_with_drops;
use crate::text::normalize_text;

const MAX_SLOTS: usize = 6;
const REQMORE_MAX_SLOTS: usize = 4;

#[derive(Debug, Error)]
pub enum DstError {
    #[error("turn {turn} out of range for a {len}-turn dialogue")]
    TurnOutOfRange { turn: usize, len: usize },
    #[error("turn cannot be augmented: {0}")]
    Unaugmentable(String),
    #[error("utterance did not express {dropped:?} after {attempts} attempts")]
    Rejected { dropped: Vec<SlotTriple>, attempts: u32 },
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
}

impl DstError {
    pub fn kind(&self) -> &'static str {
        match self {
            DstError::TurnOutOfRange { .. } => "out_of_range",
            DstError::Unaugmentable(_) => "unaugmentable",
            DstError::Rejected { .. } => "rejected",
            DstError::Backend(_) => "backend",
            DstError::Exemplar(_) => "exemplar",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LastActKind {
    Request,
    Reqmore,
    Other,
}

/// `request` in a service domain wins over `reqmore`.
pub fn classify_last_act(act: &DialogAct) -> LastActKind {
    if act.iter().any(|t| t.act == "request" && t.domain != GENERAL) {
        LastActKind::Request
    } else if act.has_act("reqmore") {
        LastActKind::Reqmore
    } else {
        LastActKind::Other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DstAugSpec {
    pub source_id: String,
    pub turn_idx: usize,
    pub kind: LastActKind,
    pub belief: TurnBelief,
    pub pass: usize,
}

fn usable(ontology: &Ontology, d: &str, s: &str) -> bool {
    ontology.is_informable(d, s) && !ontology.value_pool(d, s).is_empty()
}

fn pick_slots<R: Rng + ?Sized>(pool: &[String], lo: usize, hi: usize, rng: &mut R) -> Vec<String> {
    let k = rng.random_range(lo..=hi);
    pool.choose_multiple(rng, k).cloned().collect()
}

/// Chooses the slots of an augmented turn from the previous system act and
/// draws each value from the slot's candidates. Turn 0 has no previous act
/// and uses the `Other` rule with an empty history.
pub fn generate_turn_belief<R: Rng + ?Sized>(
    source: &Dialogue,
    turn_idx: usize,
    ontology: &Ontology,
    rng: &mut R,
) -> Result<(TurnBelief, LastActKind), DstError> {
    if turn_idx >= source.turns.len() {
        return Err(DstError::TurnOutOfRange { turn: turn_idx, len: source.turns.len() });
    }
    let empty = DialogAct::new();
    let last_act = if turn_idx == 0 { &empty } else { &source.turns[turn_idx - 1].act };
    let kind = classify_last_act(last_act);
    let state = source.state_before(turn_idx);
    let mentioned: BTreeSet<(String, String)> = state.slot_triples().map(|t| (t.domain, t.slot)).collect();
    let is_mentioned = |d: &str, s: &str| mentioned.contains(&(d.to_string(), s.to_string()));
    let free_slots = |d: &str, exclude: &[String]| -> Vec<String> {
        ontology
            .informable_slots(d)
            .into_iter()
            .filter(|s| usable(ontology, d, s) && !is_mentioned(d, s) && !exclude.iter().any(|e| e == s))
            .map(str::to_string)
            .collect()
    };

    let (domain, slots): (String, Vec<String>) = match kind {
        LastActKind::Request => {
            let d =
                last_act.iter().find(|t| t.act == "request" && t.domain != GENERAL).expect("classified").domain.clone();
            let mut requested: Vec<String> = Vec::new();
            for t in last_act.iter().filter(|t| t.act == "request" && t.domain == d) {
                if usable(ontology, &d, &t.slot) && !requested.contains(&t.slot) {
                    requested.push(t.slot.clone());
                }
            }
            let others = free_slots(&d, &requested);
            if requested.is_empty() || others.len() < 2 {
                return Err(DstError::Unaugmentable(format!(
                    "request turn needs 1 requested and 2 unmentioned {d} slots, has {} and {}",
                    requested.len(),
                    others.len()
                )));
            }
            let mut chosen = pick_slots(&requested, 1, requested.len().min(MAX_SLOTS - 2), rng);
            let hi = others.len().min(MAX_SLOTS - chosen.len());
            chosen.extend(pick_slots(&others, 2, hi, rng));
            (d, chosen)
        }
        LastActKind::Reqmore => {
            let seen: BTreeSet<&str> = source.turns[..turn_idx].iter().flat_map(|t| t.belief.domains()).collect();
            let candidates: Vec<&str> = ontology
                .domain_names()
                .filter(|d| *d != GENERAL && !seen.contains(d) && !free_slots(d, &[]).is_empty())
                .collect();
            let Some(d) = candidates.choose(rng).map(|d| d.to_string()) else {
                return Err(DstError::Unaugmentable("no unmentioned domain left".into()));
            };
            let pool = free_slots(&d, &[]);
            let chosen = pick_slots(&pool, 1, pool.len().min(REQMORE_MAX_SLOTS), rng);
            (d, chosen)
        }
        LastActKind::Other => {
            let original = &source.turns[turn_idx].belief;
            // At least one original slot must be dropped.
            let Some(d) = original.entries().find(|(d, s)| *d != GENERAL && !s.is_empty()).map(|(d, _)| d.to_string())
            else {
                return Err(DstError::Unaugmentable("original turn has no slot to drop".into()));
            };
            let orig: Vec<String> = original.domain(&d).map(|s| s.keys().cloned().collect()).unwrap_or_default();
            let keepable: Vec<String> =
                orig.iter().filter(|s| usable(ontology, &d, s) && !is_mentioned(&d, s)).cloned().collect();
            let addable = free_slots(&d, &orig);
            if addable.is_empty() {
                return Err(DstError::Unaugmentable(format!("no unmentioned {d} slot to add")));
            }
            let kmax = keepable.len().min(orig.len().saturating_sub(1)).min(MAX_SLOTS - 1);
            let mut chosen = pick_slots(&keepable, 0, kmax, rng);
            let hi = addable.len().min(MAX_SLOTS - chosen.len());
            chosen.extend(pick_slots(&addable, 1, hi, rng));
            (d, chosen)
        }
    };

    let mut belief = TurnBelief::new();
    for s in slots {
        let value = ontology.value_pool(&domain, &s).choose(rng).expect("usable slot has values");
        belief.insert(&domain, &s, value);
    }
    Ok((belief, kind))
}

/// Single-turn demonstrations drawn from seed dialogues.
#[derive(Clone, Debug, Default)]
pub struct TurnPool {
    pub examples: Vec<TurnExample>,
}

impl TurnPool {
    /// Every seed turn whose belief has slots in exactly one service domain.
    pub fn from_seeds(seeds: &SeedDataset) -> Self {
        let mut examples = Vec::new();
        for d in seeds.iter() {
            for (i, t) in d.turns.iter().enumerate() {
                let domains: Vec<&str> = t
                    .belief
                    .entries()
                    .filter(|(dom, s)| *dom != GENERAL && !s.is_empty())
                    .map(|(dom, _)| dom)
                    .collect();
                if domains.len() != 1 {
                    continue;
                }
                let mut belief = TurnBelief::new();
                for (s, v) in t.belief.domain(domains[0]).expect("present") {
                    belief.insert(domains[0], s, v);
                }
                examples.push(TurnExample {
                    source_id: d.id.clone(),
                    turn_idx: i,
                    belief,
                    utterance: t.user_utterance.clone(),
                });
            }
        }
        Self { examples }
    }

    /// Samples up to `k` demonstrations by belief similarity, excluding the
    /// source dialogue itself.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        target: &TurnBelief,
        exclude: &str,
        k: usize,
        tau: f64,
        rng: &mut R,
    ) -> Result<Vec<TurnExample>, ExemplarError> {
        let pool: Vec<&TurnExample> = self.examples.iter().filter(|e| e.source_id != exclude).collect();
        if pool.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let weights = pool.iter().map(|e| goal_similarity(target, &e.belief)).collect::<Result<Vec<_>, _>>()?;
        let idx = sample_by_weight(&weights, k.min(pool.len()), tau, rng)?;
        Ok(idx.into_iter().map(|i| pool[i].clone()).collect())
    }
}

/// Generates the utterance for a prescribed belief with the given demos and
/// returns the source context plus the new turn.
pub fn augment_dst_turn_with_demos(
    spec: &DstAugSpec,
    source: &Dialogue,
    demos: &[TurnExample],
    backend: &dyn CompletionBackend,
    cfg: &GenConfig,
) -> Result<Dialogue, DstError> {
    if spec.turn_idx >= source.turns.len() {
        return Err(DstError::TurnOutOfRange { turn: spec.turn_idx, len: source.turns.len() });
    }
    let prompt = build_dst_prompt(&spec.belief, demos);
    let req = CompletionRequest::new(prompt, &cfg.decode, &["\n"]);
    let attempts = cfg.retries + 1;
    let mut dropped = Vec::new();
    for _ in 0..attempts {
        let utterance = normalize_text(backend.complete(&req)?.trim());
        let (kept, lost) = filter_with_drops(&spec.belief, &utterance);
        if lost.is_empty() && kept == spec.belief {
            let mut turns: Vec<Turn> = source.turns[..spec.turn_idx].to_vec();
            turns.push(Turn {
                user_utterance: utterance,
                gpt_belief: spec.belief.clone(),
                belief: spec.belief.clone(),
                ..Turn::default()
            });
            return Ok(Dialogue {
                id: format!("{}-t{}-p{}", source.id, spec.turn_idx, spec.pass),
                initial_goal: source.initial_goal.clone(),
                final_goal: source.final_goal.clone(),
                turns,
                source: Source::DstAugmented,
            });
        }
        dropped = lost;
    }
    Err(DstError::Rejected { dropped, attempts })
}

/// Samples demonstrations from `pool`, then generates as above.
pub fn augment_dst_turn<R: Rng + ?Sized>(
    spec: &DstAugSpec,
    source: &Dialogue,
    pool: &TurnPool,
    backend: &dyn CompletionBackend,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Dialogue, DstError> {
    let demos = pool.sample(&spec.belief, &source.id, cfg.dst_shots, cfg.select_temperature, rng)?;
    augment_dst_turn_with_demos(spec, source, &demos, backend, cfg)
}

#[derive(Clone, Debug)]
pub struct AugmentOptions {
    pub passes: usize,
    pub seed: u64,
    /// 0 means the backend's concurrency limit.
    pub workers: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AugmentReport {
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub unaugmentable: usize,
    pub failed: usize,
    pub accepted_by_kind: BTreeMap<LastActKind, usize>,
    /// Keyed by `DstError::kind`, rejections and unaugmentable turns included.
    pub failures_by_kind: BTreeMap<String, usize>,
    pub problems: Vec<String>,
}

/// One augmented turn per source turn per pass. Rejections are reported,
/// not fatal.
pub fn augment_corpus(
    seeds: &SeedDataset,
    ontology: &Ontology,
    backend: &dyn CompletionBackend,
    cfg: &GenConfig,
    opts: &AugmentOptions,
) -> (Vec<Dialogue>, AugmentReport) {
    let pool = TurnPool::from_seeds(seeds);
    let jobs: Vec<(usize, &Dialogue, usize)> = (0..opts.passes)
        .flat_map(|p| seeds.iter().flat_map(move |d| (0..d.turns.len()).map(move |t| (p, d, t))))
        .collect();
    let workers = if opts.workers == 0 { backend.concurrency_limit() } else { opts.workers };
    let results = run_ordered(jobs.len(), workers, |j| {
        let (pass, source, turn_idx) = jobs[j];
        let mut rng = substream(opts.seed, j as u64);
        let (belief, kind) = generate_turn_belief(source, turn_idx, ontology, &mut rng)?;
        let spec = DstAugSpec { source_id: source.id.clone(), turn_idx, kind, belief, pass };
        augment_dst_turn(&spec, source, &pool, backend, cfg, &mut rng).map(|d| (d, kind))
    });
    let mut report = AugmentReport { attempted: jobs.len(), ..AugmentReport::default() };
    let mut out = Vec::new();
    for ((_, source, turn_idx), r) in jobs.iter().zip(results) {
        match r {
            Ok((d, kind)) => {
                report.accepted += 1;
                *report.accepted_by_kind.entry(kind).or_default() += 1;
                out.push(d);
            }
            Err(e) => {
                *report.failures_by_kind.entry(e.kind().to_string()).or_default() += 1;
                match e {
                    DstError::Rejected { .. } => report.rejected += 1,
                    DstError::Unaugmentable(_) => report.unaugmentable += 1,
                    _ => report.failed += 1,
                }
                report.problems.push(format!("{} turn {turn_idx}: {e}", source.id));
            }
        }
    }
    (out, report)
}
