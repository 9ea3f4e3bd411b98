//! Verification and revision of generated annotations.
//!
//! Beliefs: the model's proposal is merged with an auxiliary prediction
//! (model wins on conflicts) and every triple must then be expressed in the
//! utterance. Acts: an ordered rule set drops or rewrites invalid triples.

mod aux;
mod rules;

use serde::Serialize;

pub use aux::{AuxError, AuxPredictor, ExternalAuxPredictor, ExternalTransport, LexicalAuxPredictor, NoAux};
pub use rules::{
    mentioned_domains, validate_act, ActContext, ActRule, ActRuleSet, BookingContextRule, DedupRule, DenyRule,
    NoOfferRule, PermittedActRule, RuleFiring, UndiscussedDomainRule,
};

use crate::corpus::canonicalize_slots;
use crate::model::{SlotTriple, SlotValues, Turn, TurnBelief, DONTCARE, GENERAL, NONE};
use crate::ontology::Ontology;
use crate::text::{contains_phrase, match_tokens};

/// Union of keys; on a `(domain, slot)` collision the model value wins.
/// Model entries keep their order, auxiliary-only entries follow.
pub fn merge_beliefs(gpt: &TurnBelief, aux: &TurnBelief) -> TurnBelief {
    let mut out = gpt.clone();
    for t in aux.triples() {
        if t.is_sentinel() {
            out.insert_domain(&t.domain);
        } else if gpt.get(&t.domain, &t.slot).is_none() {
            out.insert(&t.domain, &t.slot, &t.value);
        }
    }
    out
}

const DONTCARE_CUES: [&str; 15] = [
    "dontcare",
    "dont care",
    "don't care",
    "do n't care",
    "do not care",
    "does not matter",
    "doesn't matter",
    "does n't matter",
    "doesnt matter",
    "no preference",
    "not particular",
    "either is fine",
    "anything is fine",
    "whatever",
    "any",
];

const NEGATIONS: [&str; 6] = ["no", "not", "'t", "without", "dont", "nt"];
/// Tokens that end a negation's scope when scanning backwards.
const SCOPE_BREAKS: [&str; 4] = ["but", "and", "with", "though"];
const NEGATION_WINDOW: usize = 5;

fn bool_keywords(slot: &str) -> Option<&'static [&'static str]> {
    match slot {
        "parking" => Some(&["parking"]),
        "internet" => Some(&["internet", "wifi", "wi fi"]),
        _ => None,
    }
}

pub fn has_dontcare_cue(tokens: &[String]) -> bool {
    DONTCARE_CUES.iter().any(|c| contains_phrase(tokens, &match_tokens(c)))
}

/// For a boolean slot, `Some(true)` when a keyword occurs un-negated,
/// `Some(false)` when every occurrence is negated, `None` when absent.
pub fn boolean_cue(slot: &str, tokens: &[String]) -> Option<bool> {
    let keywords = bool_keywords(slot)?;
    let mut seen = None;
    for kw in keywords {
        let needle = match_tokens(kw);
        for pos in crate::text::find_phrase(tokens, &needle) {
            let lo = pos.saturating_sub(NEGATION_WINDOW);
            let negated = tokens[lo..pos]
                .iter()
                .rev()
                .take_while(|t| !SCOPE_BREAKS.contains(&t.as_str()))
                .any(|t| NEGATIONS.contains(&t.as_str()));
            if !negated {
                return Some(true);
            }
            seen = Some(false);
        }
    }
    seen
}

/// Whether a value is expressed in the (match-normalized) utterance tokens.
pub fn value_matches(slot: &str, value: &str, tokens: &[String]) -> bool {
    if value == DONTCARE {
        return has_dontcare_cue(tokens);
    }
    if bool_keywords(slot).is_some() && matches!(value, "yes" | "no" | "free") {
        let want = value != "no";
        return boolean_cue(slot, tokens) == Some(want);
    }
    let needle = match_tokens(value);
    !needle.is_empty() && contains_phrase(tokens, &needle)
}

fn is_exempt(t: &SlotTriple) -> bool {
    t.slot == NONE || t.domain == GENERAL
}

/// Keeps triples whose value is expressed in the utterance. Domain-only
/// entries and `general` pass through; a domain that loses all its slots
/// is dropped. Returns the kept belief and the dropped triples.
pub fn filter_with_drops(belief: &TurnBelief, utterance: &str) -> (TurnBelief, Vec<SlotTriple>) {
    let tokens = match_tokens(utterance);
    let mut out = SlotValues::new();
    let mut dropped = Vec::new();
    for (domain, slots) in belief.entries() {
        if slots.is_empty() || domain == GENERAL {
            out.insert_domain(domain);
            for (s, v) in slots {
                out.insert(domain, s, v);
            }
            continue;
        }
        for (s, v) in slots {
            let t = SlotTriple::new(domain, s, v);
            if is_exempt(&t) || value_matches(s, v, &tokens) {
                out.insert(domain, s, v);
            } else {
                dropped.push(t);
            }
        }
    }
    (out, dropped)
}

pub fn slot_value_match_filter(belief: &TurnBelief, utterance: &str, _ontology: &Ontology) -> TurnBelief {
    filter_with_drops(belief, utterance).0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RevisionReport {
    /// Triples the model missed and the auxiliary predictor supplied.
    pub degeneration_fixes: Vec<SlotTriple>,
    /// Triples removed because their value is not in the utterance.
    pub overgeneration_drops: Vec<SlotTriple>,
    /// Triples rejected by the ontology.
    pub invalid: Vec<SlotTriple>,
}

impl RevisionReport {
    pub fn is_empty(&self) -> bool {
        self.degeneration_fixes.is_empty() && self.overgeneration_drops.is_empty() && self.invalid.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RevisedBelief {
    pub belief: TurnBelief,
    pub gpt: TurnBelief,
    pub aux: TurnBelief,
    pub report: RevisionReport,
}

/// Canonicalizes slot names and drops ontology-invalid triples.
pub fn ontology_clean(belief: &TurnBelief, ontology: &Ontology) -> (TurnBelief, Vec<SlotTriple>) {
    let mut out = SlotValues::new();
    let mut bad = Vec::new();
    for t in canonicalize_slots(belief).triples() {
        if ontology.check_triple(&t.domain, &t.slot, &t.value).is_ok() {
            out.insert_triple(t);
        } else {
            bad.push(t);
        }
    }
    (out, bad)
}

pub fn revise_belief(
    gpt: &TurnBelief,
    context: &[Turn],
    utterance: &str,
    aux: &dyn AuxPredictor,
    ontology: &Ontology,
) -> Result<RevisedBelief, AuxError> {
    let (gpt, mut invalid) = ontology_clean(gpt, ontology);
    let (aux_belief, aux_bad) = ontology_clean(&aux.predict_belief(context, utterance)?, ontology);
    invalid.extend(aux_bad);
    let merged = merge_beliefs(&gpt, &aux_belief);
    let (belief, dropped) = filter_with_drops(&merged, utterance);
    let fixes = belief.slot_triples().filter(|t| gpt.get(&t.domain, &t.slot).is_none()).collect();
    Ok(RevisedBelief {
        belief,
        gpt,
        aux: aux_belief,
        report: RevisionReport { degeneration_fixes: fixes, overgeneration_drops: dropped, invalid },
    })
}
