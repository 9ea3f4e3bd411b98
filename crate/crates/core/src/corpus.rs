//! Corpus JSON load/save.
//!
//! One schema serves seed and generated corpora; optional fields are omitted
//! on save when they equal what the loader would default them to.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActTriple, DbResult, DialogAct, Dialogue, SlotValues, Source, Turn, NONE};
use crate::ontology::{canonical_slot, Ontology};
use crate::text::normalize_text;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dialogue {dialogue}{}: {message}", turn.map(|t| format!(" turn {t}")).unwrap_or_default())]
    Ontology { dialogue: String, turn: Option<usize>, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoadMode {
    /// Any ontology violation aborts the load.
    #[default]
    Strict,
    /// Invalid triples are dropped and reported.
    Lenient,
}

/// A problem found while loading; in lenient mode the offending triple was dropped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoadIssue {
    pub dialogue: String,
    pub turn: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct SeedDataset {
    pub dialogues: Vec<Dialogue>,
    pub issues: Vec<LoadIssue>,
}

impl SeedDataset {
    pub fn new(dialogues: Vec<Dialogue>) -> Self {
        Self { dialogues, issues: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Dialogue> {
        self.dialogues.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| d.id == id)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    dialogues: Vec<DialogueRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DialogueRecord {
    id: String,
    goal: SlotValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_goal: Option<SlotValues>,
    #[serde(default, skip_serializing_if = "is_seed")]
    source: Source,
    turns: Vec<TurnRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRecord {
    user: String,
    belief: SlotValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    db: Option<DbResult>,
    act: DialogAct,
    resp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gpt_belief: Option<SlotValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aux_belief: Option<SlotValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gpt_act: Option<DialogAct>,
}

fn is_seed(s: &Source) -> bool {
    *s == Source::Seed
}

/// Renames slot aliases, lowercases and trims values.
pub fn canonicalize_slots(sv: &SlotValues) -> SlotValues {
    let mut out = SlotValues::new();
    for t in sv.triples() {
        if t.is_sentinel() {
            out.insert_domain(t.domain.trim());
        } else {
            out.insert(t.domain.trim(), canonical_slot(&t.slot.to_lowercase()), t.value.trim().to_lowercase().as_str());
        }
    }
    out
}

pub fn canonicalize_act(act: &DialogAct) -> DialogAct {
    act.iter().map(|t| ActTriple::new(t.domain.trim(), t.act.trim(), canonical_slot(&t.slot.to_lowercase()))).collect()
}

struct Checker<'a> {
    ontology: &'a Ontology,
    mode: LoadMode,
    issues: Vec<LoadIssue>,
}

impl Checker<'_> {
    fn report(&mut self, dialogue: &str, turn: Option<usize>, message: String) -> Result<(), CorpusError> {
        match self.mode {
            LoadMode::Strict => Err(CorpusError::Ontology { dialogue: dialogue.to_string(), turn, message }),
            LoadMode::Lenient => {
                self.issues.push(LoadIssue { dialogue: dialogue.to_string(), turn, message });
                Ok(())
            }
        }
    }

    fn slots(
        &mut self,
        sv: SlotValues,
        dialogue: &str,
        turn: Option<usize>,
        field: &str,
    ) -> Result<SlotValues, CorpusError> {
        let mut out = SlotValues::new();
        for t in canonicalize_slots(&sv).triples() {
            match self.ontology.check_triple(&t.domain, &t.slot, &t.value) {
                Ok(()) => out.insert_triple(t),
                Err(msg) => self.report(dialogue, turn, format!("{field}: {msg}"))?,
            }
        }
        Ok(out)
    }

    fn act(&mut self, act: DialogAct, dialogue: &str, turn: usize, field: &str) -> Result<DialogAct, CorpusError> {
        let mut out = DialogAct::new();
        for t in canonicalize_act(&act).0 {
            if let Err(msg) = self.ontology.check_act(&t.domain, &t.act) {
                self.report(dialogue, Some(turn), format!("{field}: {msg}"))?;
                continue;
            }
            if !self.ontology.act_slot_permitted(&t.domain, &t.slot) {
                log::warn!(
                    "dialogue {dialogue} turn {turn}: {field} slot `{}.{}` outside the domain's slots",
                    t.domain,
                    t.slot
                );
            }
            out.0.push(t);
        }
        Ok(out)
    }
}

fn parse_file(text: &str) -> Result<CorpusFile, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CorpusError::Schema { path: e.path().to_string(), message: e.inner().to_string() })
}

pub fn load_corpus_str(text: &str, ontology: &Ontology, mode: LoadMode) -> Result<SeedDataset, CorpusError> {
    let file = parse_file(text)?;
    let mut ck = Checker { ontology, mode, issues: Vec::new() };
    let mut dialogues = Vec::with_capacity(file.dialogues.len());
    for rec in file.dialogues {
        let id = rec.id;
        let final_goal = ck.slots(rec.goal, &id, None, "goal")?;
        let initial_goal = match rec.initial_goal {
            Some(g) => ck.slots(g, &id, None, "initial_goal")?,
            None => final_goal.clone(),
        };
        let mut turns = Vec::with_capacity(rec.turns.len());
        for (i, t) in rec.turns.into_iter().enumerate() {
            let belief = ck.slots(t.belief, &id, Some(i), "belief")?;
            let gpt_belief = match t.gpt_belief {
                Some(b) => ck.slots(b, &id, Some(i), "gpt_belief")?,
                None => belief.clone(),
            };
            let aux_belief = match t.aux_belief {
                Some(b) => ck.slots(b, &id, Some(i), "aux_belief")?,
                None => SlotValues::new(),
            };
            let act = ck.act(t.act, &id, i, "act")?;
            let gpt_act = match t.gpt_act {
                Some(a) => ck.act(a, &id, i, "gpt_act")?,
                None => act.clone(),
            };
            let db = t.db.unwrap_or_default();
            if !ontology.has_domain(&db.domain) {
                ck.report(&id, Some(i), format!("db: unknown domain `{}`", db.domain))?;
            }
            turns.push(Turn {
                user_utterance: normalize_text(&t.user),
                gpt_belief,
                aux_belief,
                belief,
                db,
                gpt_act,
                act,
                system_response: normalize_text(&t.resp),
            });
        }
        dialogues.push(Dialogue { id, initial_goal, final_goal, turns, source: rec.source });
    }
    Ok(SeedDataset { dialogues, issues: ck.issues })
}

pub fn load_seed_corpus(
    path: impl AsRef<Path>,
    ontology: &Ontology,
    mode: LoadMode,
) -> Result<SeedDataset, CorpusError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| CorpusError::Read { path: path.display().to_string(), source })?;
    load_corpus_str(&text, ontology, mode)
}

pub fn corpus_to_json(dialogues: &[Dialogue]) -> String {
    let file = CorpusFile {
        dialogues: dialogues
            .iter()
            .map(|d| DialogueRecord {
                id: d.id.clone(),
                goal: d.final_goal.clone(),
                initial_goal: (d.initial_goal != d.final_goal).then(|| d.initial_goal.clone()),
                source: d.source,
                turns: d
                    .turns
                    .iter()
                    .map(|t| TurnRecord {
                        user: t.user_utterance.clone(),
                        belief: t.belief.clone(),
                        db: (t.db != DbResult::default()).then(|| t.db.clone()),
                        act: t.act.clone(),
                        resp: t.system_response.clone(),
                        gpt_belief: (t.gpt_belief != t.belief).then(|| t.gpt_belief.clone()),
                        aux_belief: (!t.aux_belief.is_empty()).then(|| t.aux_belief.clone()),
                        gpt_act: (t.gpt_act != t.act).then(|| t.gpt_act.clone()),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("corpus serializes");
    s.push('\n');
    s
}

pub fn save_corpus(dialogues: &[Dialogue], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, corpus_to_json(dialogues))
        .map_err(|source| CorpusError::Write { path: path.display().to_string(), source })
}

/// Slots named by `inform`/`offerbooked` triples whose `[value_<slot>]`
/// placeholder is missing from the response.
pub fn missing_placeholders(turn: &Turn) -> Vec<String> {
    let mut out = Vec::new();
    for t in turn.act.iter() {
        if (t.act == "inform" || t.act == "offerbooked") && t.slot != NONE {
            let ph = format!("[value_{}]", t.slot);
            if !turn.system_response.contains(&ph) && !out.contains(&t.slot) {
                out.push(t.slot.clone());
            }
        }
    }
    out
}
