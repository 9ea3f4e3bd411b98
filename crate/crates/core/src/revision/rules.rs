//! Dialog-act rules.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{ActTriple, DbBucket, DbResult, DialogAct, DialogueState, TurnBelief, GENERAL, NONE};
use crate::ontology::Ontology;

/// What the rules may look at besides the act itself.
#[derive(Clone, Debug)]
pub struct ActContext<'a> {
    /// Accumulated state including the current turn.
    pub state: &'a DialogueState,
    pub db: &'a DbResult,
    /// Revised acts of earlier turns.
    pub prior_acts: &'a [DialogAct],
    /// Domains mentioned so far, including domain-only belief entries.
    pub mentioned: &'a BTreeSet<String>,
    pub ontology: &'a Ontology,
}

/// Domains appearing in any of the beliefs, sentinels included.
pub fn mentioned_domains<'a, I: IntoIterator<Item = &'a TurnBelief>>(beliefs: I) -> BTreeSet<String> {
    beliefs.into_iter().flat_map(|b| b.domains().map(str::to_string).collect::<Vec<_>>()).collect()
}

pub trait ActRule: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, act: &DialogAct, ctx: &ActContext<'_>) -> DialogAct;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleFiring {
    pub rule: String,
    pub removed: Vec<ActTriple>,
    pub added: Vec<ActTriple>,
}

/// Drops triples whose act type is not permitted for the domain or whose
/// slot is not one of the domain's slots.
pub struct PermittedActRule;

impl ActRule for PermittedActRule {
    fn name(&self) -> &str {
        "permitted_act"
    }
    fn apply(&self, act: &DialogAct, ctx: &ActContext<'_>) -> DialogAct {
        act.iter()
            .filter(|t| {
                ctx.ontology.act_permitted(&t.domain, &t.act) && ctx.ontology.act_slot_permitted(&t.domain, &t.slot)
            })
            .cloned()
            .collect()
    }
}

/// Drops triples for domains the dialogue has not mentioned.
pub struct UndiscussedDomainRule;

impl ActRule for UndiscussedDomainRule {
    fn name(&self) -> &str {
        "undiscussed_domain"
    }
    fn apply(&self, act: &DialogAct, ctx: &ActContext<'_>) -> DialogAct {
        act.iter().filter(|t| t.domain == GENERAL || ctx.mentioned.contains(&t.domain)).cloned().collect()
    }
}

/// `offerbooked` needs an earlier `offerbook` in the domain or booking
/// slots in the state; otherwise it becomes `inform` on the same slot.
pub struct BookingContextRule;

impl ActRule for BookingContextRule {
    fn name(&self) -> &str {
        "booking_context"
    }
    fn apply(&self, act: &DialogAct, ctx: &ActContext<'_>) -> DialogAct {
        act.iter()
            .map(|t| {
                if t.act != "offerbooked" {
                    return t.clone();
                }
                let offered = ctx.prior_acts.iter().any(|a| a.has(&t.domain, "offerbook"));
                let booking = ctx
                    .state
                    .domain(&t.domain)
                    .is_some_and(|s| s.keys().any(|k| ctx.ontology.is_booking_slot(&t.domain, k)));
                if offered || booking {
                    t.clone()
                } else {
                    ActTriple::new(&t.domain, "inform", &t.slot)
                }
            })
            .collect()
    }
}

/// With no matching entity, offers in the queried domain become `nooffer`.
pub struct NoOfferRule;

const OFFER_ACTS: [&str; 4] = ["inform", "recommend", "select", "offerbook"];

impl ActRule for NoOfferRule {
    fn name(&self) -> &str {
        "no_offer"
    }
    fn apply(&self, act: &DialogAct, ctx: &ActContext<'_>) -> DialogAct {
        let d = &ctx.db.domain;
        if ctx.db.bucket != DbBucket::Db0 || !ctx.ontology.act_permitted(d, "nooffer") {
            return act.clone();
        }
        act.iter()
            .map(|t| {
                if &t.domain == d && OFFER_ACTS.contains(&t.act.as_str()) {
                    ActTriple::new(d, "nooffer", NONE)
                } else {
                    t.clone()
                }
            })
            .collect()
    }
}

/// Removes repeated triples, keeping the first.
pub struct DedupRule;

impl ActRule for DedupRule {
    fn name(&self) -> &str {
        "dedup"
    }
    fn apply(&self, act: &DialogAct, _ctx: &ActContext<'_>) -> DialogAct {
        let mut seen = BTreeSet::new();
        act.iter().filter(|t| seen.insert((*t).clone())).cloned().collect()
    }
}

/// Declarative rule dropping triples that match every given field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenyRule {
    pub name: String,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default)]
    pub act: Option<String>,
    #[serde(default)]
    pub slot: Option<String>,
}

impl ActRule for DenyRule {
    fn name(&self) -> &str {
        &self.name
    }
    fn apply(&self, act: &DialogAct, _ctx: &ActContext<'_>) -> DialogAct {
        let hit = |want: &Option<String>, got: &str| want.as_deref().is_none_or(|w| w == got);
        act.iter()
            .filter(|t| !(hit(&self.domain, &t.domain) && hit(&self.act, &t.act) && hit(&self.slot, &t.slot)))
            .cloned()
            .collect()
    }
}

/// Ordered rules; the default order makes a second pass a no-op.
pub struct ActRuleSet {
    rules: Vec<Box<dyn ActRule>>,
}

impl Default for ActRuleSet {
    fn default() -> Self {
        Self {
            rules: vec![
                Box::new(PermittedActRule),
                Box::new(UndiscussedDomainRule),
                Box::new(BookingContextRule),
                Box::new(NoOfferRule),
                Box::new(DedupRule),
            ],
        }
    }
}

impl ActRuleSet {
    pub fn empty() -> Self {
        Self { rules: Vec::new() }
    }

    pub fn push(&mut self, rule: Box<dyn ActRule>) {
        self.rules.push(rule);
    }

    /// Inserts a rule before the final dedup step of the default set.
    pub fn with_rule(mut self, rule: Box<dyn ActRule>) -> Self {
        let at = self.rules.iter().position(|r| r.name() == "dedup").unwrap_or(self.rules.len());
        self.rules.insert(at, rule);
        self
    }

    pub fn names(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.name()).collect()
    }

    /// Runs every rule in order and records which ones changed the act.
    pub fn apply(&self, act: &DialogAct, ctx: &ActContext<'_>) -> (DialogAct, Vec<RuleFiring>) {
        let mut cur = act.clone();
        let mut firings = Vec::new();
        for rule in &self.rules {
            let next = rule.apply(&cur, ctx);
            if next != cur {
                let removed = cur.iter().filter(|t| !next.0.contains(t)).cloned().collect();
                let added = next.iter().filter(|t| !cur.0.contains(t)).cloned().collect();
                firings.push(RuleFiring { rule: rule.name().to_string(), removed, added });
            }
            cur = next;
        }
        (cur, firings)
    }
}

/// Applies the rules; an empty result becomes `(general, reqmore, none)`.
pub fn validate_act(act: &DialogAct, ctx: &ActContext<'_>, rules: &ActRuleSet) -> (DialogAct, Vec<RuleFiring>) {
    let (mut out, mut firings) = rules.apply(act, ctx);
    if out.is_empty() {
        out.push(GENERAL, "reqmore", NONE);
        firings.push(RuleFiring { rule: "empty_fallback".into(), removed: Vec::new(), added: out.0.clone() });
    }
    (out, firings)
}
