//! Re-checks corpus invariants after the fact.

use serde::Serialize;

use crate::corpus::missing_placeholders;
use crate::model::{accumulate_state, DialogAct, Dialogue, Source};
use crate::ontology::Ontology;
use crate::revision::{filter_with_drops, mentioned_domains, validate_act, ActContext, ActRuleSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub dialogue: String,
    /// `None` for dialogue-level findings.
    pub turn: Option<usize>,
    pub check: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dialogues: usize,
    pub turns: usize,
    pub violations: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Violations: ontology-invalid triples, beliefs that are not a fixpoint of
/// the match filter, unpermitted acts, empty dialogues, and for simulated
/// dialogues acts that the rules would still change. Warnings: more turns
/// than `max_turns`, missing response placeholders.
pub fn validate_corpus(
    corpus: &[Dialogue],
    ontology: &Ontology,
    rules: &ActRuleSet,
    max_turns: usize,
) -> ValidationReport {
    let mut report = ValidationReport { dialogues: corpus.len(), ..ValidationReport::default() };
    for d in corpus {
        let mut violation = |turn: Option<usize>, check: &'static str, message: String| {
            report.violations.push(Finding { dialogue: d.id.clone(), turn, check, message });
        };
        if d.turns.is_empty() {
            violation(None, "empty", "dialogue has no turns".into());
        }
        for (label, goal) in [("initial_goal", &d.initial_goal), ("final_goal", &d.final_goal)] {
            for t in goal.triples() {
                if let Err(e) = ontology.check_triple(&t.domain, &t.slot, &t.value) {
                    violation(None, "ontology", format!("{label} {t}: {e}"));
                }
            }
        }
        let mut prior_acts: Vec<DialogAct> = Vec::new();
        for (i, turn) in d.turns.iter().enumerate() {
            for t in turn.belief.triples() {
                if let Err(e) = ontology.check_triple(&t.domain, &t.slot, &t.value) {
                    violation(Some(i), "ontology", format!("belief {t}: {e}"));
                }
            }
            let (_, dropped) = filter_with_drops(&turn.belief, &turn.user_utterance);
            for t in dropped {
                violation(Some(i), "filter", format!("belief {t} is not expressed in the utterance"));
            }
            for a in turn.act.iter() {
                if let Err(e) = ontology.check_act(&a.domain, &a.act) {
                    violation(Some(i), "act", format!("{a}: {e}"));
                } else if !ontology.act_slot_permitted(&a.domain, &a.slot) {
                    violation(Some(i), "act", format!("{a}: slot `{}` is not a {} slot", a.slot, a.domain));
                }
            }
            if d.source == Source::Simulated {
                let beliefs = || d.turns[..=i].iter().map(|t| &t.belief);
                let state = accumulate_state(beliefs());
                let mentioned = mentioned_domains(beliefs());
                let ctx = ActContext {
                    state: &state,
                    db: &turn.db,
                    prior_acts: &prior_acts,
                    mentioned: &mentioned,
                    ontology,
                };
                let (again, _) = validate_act(&turn.act, &ctx, rules);
                if again != turn.act {
                    violation(
                        Some(i),
                        "act_rules",
                        format!("act `{}` is not stable under the act rules", fmt_act(&turn.act)),
                    );
                }
            }
            prior_acts.push(turn.act.clone());
            let missing = missing_placeholders(turn);
            if !missing.is_empty() {
                report.warnings.push(Finding {
                    dialogue: d.id.clone(),
                    turn: Some(i),
                    check: "placeholder",
                    message: format!("response lacks {}", missing.join(", ")),
                });
            }
        }
        report.turns += d.turns.len();
        if d.turns.len() > max_turns {
            report.warnings.push(Finding {
                dialogue: d.id.clone(),
                turn: None,
                check: "max_turns",
                message: format!("{} turns exceed the cap of {max_turns}", d.turns.len()),
            });
        }
    }
    report
}

fn fmt_act(act: &DialogAct) -> String {
    act.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}
