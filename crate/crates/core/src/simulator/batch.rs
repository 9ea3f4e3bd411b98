use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{simulate_dialogue, RunStatus, SimContext, SimulationOutcome};
use crate::backend::CompletionBackend;
use crate::goal::{generate_goal, GoalLimits, GoalStrategy, RsDistribution};
use crate::model::Dialogue;

/// Runs `f(0..n)` on up to `workers` threads and returns results in index order.
pub fn run_ordered<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("result slots poisoned").into_iter().map(|o| o.expect("every index ran")).collect()
}

/// Per-item rng: one seed, one stream per index.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub n: usize,
    pub strategy: GoalStrategy,
    pub distribution: RsDistribution,
    pub seed: u64,
    /// 0 means the backend's concurrency limit.
    pub workers: usize,
    pub id_prefix: String,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            n: 1,
            strategy: GoalStrategy::combination(),
            distribution: RsDistribution::default(),
            seed: 0,
            workers: 0,
            id_prefix: "sim".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub index: usize,
    pub id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BatchReport {
    pub requested: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub failures_by_kind: BTreeMap<String, usize>,
    pub statuses: BTreeMap<RunStatus, usize>,
    pub failures: Vec<FailureRecord>,
    pub turns: usize,
    pub degeneration_fixes: usize,
    pub overgeneration_drops: usize,
    pub rule_firings: BTreeMap<String, usize>,
    pub responses_regenerated: usize,
}

impl BatchReport {
    fn record_success(&mut self, out: &SimulationOutcome) {
        self.succeeded += 1;
        *self.statuses.entry(out.status).or_default() += 1;
        self.turns += out.dialogue.turns.len();
        for t in &out.trace {
            self.degeneration_fixes += t.belief_report.degeneration_fixes.len();
            self.overgeneration_drops += t.belief_report.overgeneration_drops.len();
            self.responses_regenerated += usize::from(t.response_regenerated);
            for f in &t.rule_firings {
                *self.rule_firings.entry(f.rule.clone()).or_default() += 1;
            }
        }
    }

    fn record_failure(&mut self, rec: FailureRecord) {
        self.failed += 1;
        *self.statuses.entry(RunStatus::Failed).or_default() += 1;
        *self.failures_by_kind.entry(rec.kind.clone()).or_default() += 1;
        self.failures.push(rec);
    }
}

/// Simulates `opts.n` dialogues with independent rng substreams. Failed runs
/// are reported and left out. Outcomes come back in index order.
pub fn simulate_batch(
    opts: &BatchOptions,
    ctx: &SimContext<'_>,
    backend: &dyn CompletionBackend,
    progress: &(dyn Fn(usize, &str) + Sync),
) -> (Vec<SimulationOutcome>, BatchReport) {
    let limits = GoalLimits { max_domains: ctx.cfg.max_domains, max_slots_per_domain: ctx.cfg.max_slots_per_domain };
    let workers = if opts.workers == 0 { backend.concurrency_limit() } else { opts.workers };
    let results = run_ordered(opts.n, workers, |i| {
        let id = format!("{}-{i:05}", opts.id_prefix);
        let mut rng = substream(opts.seed, i as u64);
        let res =
            generate_goal(&opts.strategy, &ctx.seeds.dialogues, ctx.ontology, &opts.distribution, limits, &mut rng)
                .map_err(|e| FailureRecord { index: i, id: id.clone(), kind: "goal".into(), message: e.to_string() })
                .and_then(|(goal, _)| {
                    simulate_dialogue(&id, &goal, ctx, backend, &mut rng).map_err(|e| FailureRecord {
                        index: i,
                        id: id.clone(),
                        kind: e.kind().into(),
                        message: e.to_string(),
                    })
                });
        progress(i, if res.is_ok() { "ok" } else { "failed" });
        res
    });
    let mut report = BatchReport { requested: opts.n, ..BatchReport::default() };
    let mut outcomes = Vec::new();
    for r in results {
        match r {
            Ok(out) => {
                report.record_success(&out);
                outcomes.push(out);
            }
            Err(rec) => report.record_failure(rec),
        }
    }
    (outcomes, report)
}

/// Dialogues of successful outcomes, in order.
pub fn dialogues(outcomes: &[SimulationOutcome]) -> Vec<Dialogue> {
    outcomes.iter().map(|o| o.dialogue.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_across_workers() {
        let out = run_ordered(50, 7, |i| i * 2);
        assert_eq!(out, (0..50).map(|i| i * 2).collect::<Vec<_>>());
        assert!(run_ordered(0, 4, |i| i).is_empty());
    }
}
