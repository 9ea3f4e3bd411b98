//! Dialogue-level simulation and turn-level DST augmentation.
//!
//! A simulation alternates user and system completions. Each completion is
//! parsed, revised and written back into the live prompt in its revised
//! form, so later turns are conditioned only on verified annotations.

mod batch;
mod dst;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub use batch::{dialogues, run_ordered, simulate_batch, substream, BatchOptions, BatchReport, FailureRecord};
pub use dst::{
    augment_corpus, augment_dst_turn, augment_dst_turn_with_demos, classify_last_act, generate_turn_belief,
    AugmentOptions, AugmentReport, DstAugSpec, DstError, LastActKind, TurnPool,
};

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::config::GenConfig;
use crate::corpus::{canonicalize_act, canonicalize_slots, SeedDataset};
use crate::database::{DbError, EntityDb};
use crate::exemplar::{select_examples, ExampleSelection, ExemplarError};
use crate::format::{parse_system_line, parse_user_line, serialize_act, system_line, user_line, FormatError};
use crate::model::{accumulate_state, DbResult, DialogAct, Dialogue, Source, Turn, TurnBelief, UserGoal, GENERAL};
use crate::ontology::Ontology;
use crate::prompt::{build_prompt, check_budget, PromptError, TASK_DESCRIPTION};
use crate::revision::{
    mentioned_domains, revise_belief, validate_act, ActContext, ActRuleSet, AuxError, AuxPredictor, RevisionReport,
    RuleFiring,
};
use crate::text::normalize_text;

pub const USER_STOPS: [&str; 1] = ["\nAssistant"];
pub const SYSTEM_STOPS: [&str; 2] = ["\nUser", "\nInstruction"];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("turn {turn}: unparseable {side} completion after {attempts} attempts: {source}")]
    Parse { turn: usize, side: &'static str, attempts: u32, source: FormatError },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
}

impl SimError {
    /// Stable kind label for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Backend(e) => e.kind(),
            SimError::Parse { .. } => "parse",
            SimError::Prompt(_) => "prompt",
            SimError::Aux(_) => "aux",
            SimError::Db(_) => "db",
            SimError::Exemplar(_) => "exemplar",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Active,
    FinishedBye,
    FinishedMaxTurns,
    Failed,
}

/// Debug record of one simulated turn.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurnTrace {
    pub dialogue: String,
    pub turn: usize,
    pub user_completion: String,
    pub user_attempts: u32,
    pub gpt_belief: TurnBelief,
    pub aux_belief: TurnBelief,
    pub belief: TurnBelief,
    pub belief_report: RevisionReport,
    pub active_domain: String,
    pub db: DbResult,
    pub system_completion: String,
    pub system_attempts: u32,
    pub gpt_act: DialogAct,
    pub act: DialogAct,
    pub rule_firings: Vec<RuleFiring>,
    pub aux_act_used: bool,
    pub response_regenerated: bool,
    pub prompt_chars: usize,
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub dialogue: Dialogue,
    pub status: RunStatus,
    pub selection: Option<ExampleSelection>,
    /// Final live prompt, revised annotations only.
    pub prompt: String,
    pub trace: Vec<TurnTrace>,
}

/// Read-only inputs shared by every simulation.
#[derive(Clone, Copy)]
pub struct SimContext<'a> {
    pub ontology: &'a Ontology,
    pub seeds: &'a SeedDataset,
    pub db: &'a EntityDb,
    pub aux: &'a dyn AuxPredictor,
    pub rules: &'a ActRuleSet,
    pub cfg: &'a GenConfig,
}

/// Selects examples by goal similarity, then simulates.
pub fn simulate_dialogue<R: Rng + ?Sized>(
    id: &str,
    goal: &UserGoal,
    ctx: &SimContext<'_>,
    backend: &dyn CompletionBackend,
    rng: &mut R,
) -> Result<SimulationOutcome, SimError> {
    let selection = select_examples(goal, &ctx.seeds.dialogues, ctx.cfg.n_shots, ctx.cfg.select_temperature, rng)?;
    let examples: Vec<&Dialogue> = selection.chosen.iter().map(|c| &ctx.seeds.dialogues[c.index]).collect();
    let mut out = simulate_dialogue_with_examples(id, goal, &examples, ctx, backend)?;
    out.selection = Some(selection);
    Ok(out)
}

/// Simulates with fixed in-context examples. Deterministic given the backend.
pub fn simulate_dialogue_with_examples(
    id: &str,
    goal: &UserGoal,
    examples: &[&Dialogue],
    ctx: &SimContext<'_>,
    backend: &dyn CompletionBackend,
) -> Result<SimulationOutcome, SimError> {
    let cfg = ctx.cfg;
    let mut prompt = build_prompt(TASK_DESCRIPTION, examples, goal, ctx.ontology)?;
    let mut turns: Vec<Turn> = Vec::new();
    let mut trace = Vec::new();
    let mut final_goal = goal.clone();
    let mut active = GENERAL.to_string();
    let mut status = RunStatus::Active;

    while status == RunStatus::Active {
        let idx = turns.len();

        let (user_raw, user_attempts, (gpt_belief, utterance)) =
            complete_parsed(backend, cfg, &format!("{prompt}\nUser("), &USER_STOPS, "user", idx, |c| {
                parse_user_line(&format!("User({c}"))
            })?;
        let utterance = normalize_text(&utterance);
        let gpt_belief = canonicalize_slots(&gpt_belief);
        let revised = revise_belief(&gpt_belief, &turns, &utterance, ctx.aux, ctx.ontology)?;
        let belief = revised.belief.clone();
        prompt.push('\n');
        prompt.push_str(&user_line(&belief, &utterance));

        for t in belief.slot_triples().filter(|t| t.domain != GENERAL) {
            if final_goal.get(&t.domain, &t.slot) != Some(t.value.as_str()) {
                final_goal.insert(&t.domain, &t.slot, &t.value);
            }
        }

        active = active_domain(&belief, &active);
        let state = accumulate_state(turns.iter().map(|t| &t.belief).chain(std::iter::once(&belief)));
        let db = if ctx.db.is_queryable(&active) {
            let constraints: Vec<(&str, &str)> = state
                .domain(&active)
                .map(|s| s.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect())
                .unwrap_or_default();
            ctx.db.query(&active, constraints)?
        } else {
            DbResult::no_result(&active)
        };

        let (system_raw, system_attempts, (gpt_act, parsed_response)) =
            complete_parsed(backend, cfg, &format!("{prompt}\nAssistant("), &SYSTEM_STOPS, "system", idx, |c| {
                parse_system_line(&format!("Assistant({c}"))
            })?;
        let gpt_act = canonicalize_act(&gpt_act);
        let prior_acts: Vec<DialogAct> = turns.iter().map(|t| t.act.clone()).collect();
        let mentioned = mentioned_domains(turns.iter().map(|t| &t.belief).chain(std::iter::once(&belief)));
        let act_ctx = ActContext {
            state: &state,
            db: &db,
            prior_acts: &prior_acts,
            mentioned: &mentioned,
            ontology: ctx.ontology,
        };
        let (mut act, mut firings) = validate_act(&gpt_act, &act_ctx, ctx.rules);
        let mut aux_act_used = false;
        if !gpt_act.is_empty() && firings.last().is_some_and(|f| f.rule == "empty_fallback") {
            let aux_act = ctx.aux.predict_act(&turns, &utterance, &belief, &db)?;
            let (aux_revised, aux_firings) = validate_act(&aux_act, &act_ctx, ctx.rules);
            if !aux_act.is_empty() && !aux_firings.iter().any(|f| f.rule == "empty_fallback") {
                act = aux_revised;
                firings.extend(aux_firings);
                aux_act_used = true;
            }
        }

        let regenerate = act != gpt_act;
        let response = if regenerate {
            let head = format!("{prompt}\nAssistant({}): ", serialize_act(&act));
            check_budget(&head, cfg.decode.max_tokens as usize, cfg.context_tokens)?;
            let req = CompletionRequest::new(head, &cfg.decode, &SYSTEM_STOPS);
            normalize_text(backend.complete(&req)?.trim())
        } else {
            normalize_text(&parsed_response)
        };
        prompt.push('\n');
        prompt.push_str(&system_line(&act, &response));

        trace.push(TurnTrace {
            dialogue: id.to_string(),
            turn: idx,
            user_completion: user_raw,
            user_attempts,
            gpt_belief: revised.gpt.clone(),
            aux_belief: revised.aux.clone(),
            belief: belief.clone(),
            belief_report: revised.report.clone(),
            active_domain: active.clone(),
            db: db.clone(),
            system_completion: system_raw,
            system_attempts,
            gpt_act: gpt_act.clone(),
            act: act.clone(),
            rule_firings: firings,
            aux_act_used,
            response_regenerated: regenerate,
            prompt_chars: prompt.len(),
        });

        let bye = act.has(GENERAL, "bye");
        turns.push(Turn {
            user_utterance: utterance,
            gpt_belief: revised.gpt,
            aux_belief: revised.aux,
            belief,
            db,
            gpt_act,
            act,
            system_response: response,
        });
        if bye {
            status = RunStatus::FinishedBye;
        } else if turns.len() >= cfg.max_turns {
            status = RunStatus::FinishedMaxTurns;
        }
    }

    let dialogue =
        Dialogue { id: id.to_string(), initial_goal: goal.clone(), final_goal, turns, source: Source::Simulated };
    Ok(SimulationOutcome { dialogue, status, selection: None, prompt, trace })
}

/// The last non-general domain of the turn belief; a general-only belief
/// makes `general` active; an empty belief keeps the previous domain.
pub fn active_domain(belief: &TurnBelief, previous: &str) -> String {
    if let Some(d) = belief.domains().filter(|d| *d != GENERAL).last() {
        return d.to_string();
    }
    if belief.is_empty() {
        previous.to_string()
    } else {
        GENERAL.to_string()
    }
}

/// Completes and parses, re-asking the same prompt on a parse failure.
fn complete_parsed<T>(
    backend: &dyn CompletionBackend,
    cfg: &GenConfig,
    prompt: &str,
    stops: &[&str],
    side: &'static str,
    turn: usize,
    parse: impl Fn(&str) -> Result<T, FormatError>,
) -> Result<(String, u32, T), SimError> {
    check_budget(prompt, cfg.decode.max_tokens as usize, cfg.context_tokens)?;
    let req = CompletionRequest::new(prompt.to_string(), &cfg.decode, stops);
    let attempts = cfg.retries + 1;
    let mut last = None;
    for attempt in 1..=attempts {
        let raw = backend.complete(&req)?;
        let line = raw.trim().lines().next().unwrap_or("").to_string();
        match parse(&line) {
            Ok(v) => return Ok((raw, attempt, v)),
            Err(e) => {
                log::debug!("turn {turn}: {side} parse attempt {attempt} failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(SimError::Parse { turn, side, attempts, source: last.expect("at least one attempt") })
}

/// Re-reads the target conversation from a live prompt as (belief, act) pairs.
pub fn reparse_prompt(prompt: &str) -> Result<Vec<(TurnBelief, DialogAct)>, FormatError> {
    let start = prompt.rfind("\nConversation").map_or(0, |p| p + 1);
    let mut out: Vec<(TurnBelief, DialogAct)> = Vec::new();
    for line in prompt[start..].lines().skip(1) {
        if line.starts_with("User(") {
            out.push((parse_user_line(line)?.0, DialogAct::new()));
        } else if line.starts_with("Assistant(") {
            let act = parse_system_line(line)?.0;
            if let Some(last) = out.last_mut() {
                last.1 = act;
            }
        }
    }
    Ok(out)
}
