//! Domain schema: informable slots with candidate values, requestable slots,
//! permitted act types and whether a domain has a database table.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dialogue, DONTCARE, GENERAL, NONE};

/// The twelve global dialog act types.
pub const ACT_TYPES: [&str; 12] = [
    "inform",
    "request",
    "select",
    "recommend",
    "nooffer",
    "offerbook",
    "offerbooked",
    "nobook",
    "welcome",
    "greet",
    "bye",
    "reqmore",
];

/// Acts the `general` domain may carry.
pub const GENERAL_ACTS: [&str; 4] = ["welcome", "greet", "bye", "reqmore"];

/// Slots that describe a reservation rather than an entity attribute.
pub const BOOKING_SLOTS: [&str; 4] = ["stay", "day", "people", "time"];

const SLOT_ALIASES: [(&str, &str); 11] = [
    ("book stay", "stay"),
    ("book people", "people"),
    ("book day", "day"),
    ("book time", "time"),
    ("arriveby", "arrive"),
    ("arrive by", "arrive"),
    ("leaveat", "leave"),
    ("leave at", "leave"),
    ("star", "stars"),
    ("price range", "pricerange"),
    ("dept", "department"),
];

pub fn is_act_type(name: &str) -> bool {
    ACT_TYPES.contains(&name)
}

/// Maps surface aliases (`book stay`, `arriveby`, ...) to canonical slot names.
pub fn canonical_slot(slot: &str) -> &str {
    let trimmed = slot.trim();
    SLOT_ALIASES.iter().find(|(alias, _)| *alias == trimmed).map(|(_, canon)| *canon).unwrap_or(trimmed)
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot read ontology {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed ontology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("domain `{domain}`: unknown act type `{act}`")]
    UnknownAct { domain: String, act: String },
    #[error("domain `{domain}`: requestable slot `{slot}` is neither informable nor declared")]
    UndeclaredRequestable { domain: String, slot: String },
    #[error("domain `{domain}`: slot `{slot}` declared twice")]
    DuplicateSlot { domain: String, slot: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainSchema {
    /// Informable slots with candidate values; an empty list means open-valued.
    pub informable: IndexMap<String, Vec<String>>,
    #[serde(default)]
    pub requestable: IndexSet<String>,
    /// Non-informable slots that may appear in acts (`reference`, `phone`, ...).
    #[serde(default)]
    pub extra_slots: IndexSet<String>,
    pub acts: IndexSet<String>,
    #[serde(default)]
    pub queryable: bool,
}

impl DomainSchema {
    pub fn has_slot(&self, slot: &str) -> bool {
        self.informable.contains_key(slot) || self.extra_slots.contains(slot) || self.requestable.contains(slot)
    }

    pub fn is_bookable(&self) -> bool {
        self.acts.contains("offerbook")
    }
}

#[derive(Clone, Debug, Default)]
pub struct Ontology {
    domains: IndexMap<String, DomainSchema>,
    /// Values seen in seed data for open-valued slots.
    observed: HashMap<(String, String), Vec<String>>,
}

impl Ontology {
    pub fn new(domains: IndexMap<String, DomainSchema>) -> Result<Self, OntologyError> {
        for (name, schema) in &domains {
            for act in &schema.acts {
                if !is_act_type(act) {
                    return Err(OntologyError::UnknownAct { domain: name.clone(), act: act.clone() });
                }
            }
            for slot in &schema.requestable {
                if !schema.informable.contains_key(slot) && !schema.extra_slots.contains(slot) {
                    return Err(OntologyError::UndeclaredRequestable { domain: name.clone(), slot: slot.clone() });
                }
            }
            for slot in &schema.extra_slots {
                if schema.informable.contains_key(slot) {
                    return Err(OntologyError::DuplicateSlot { domain: name.clone(), slot: slot.clone() });
                }
            }
        }
        Ok(Self { domains, observed: HashMap::new() })
    }

    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let domains: IndexMap<String, DomainSchema> = serde_json::from_str(text)?;
        Self::new(domains)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| OntologyError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.domains).expect("ontology serializes")
    }

    /// Sub-ontology restricted to the named domains.
    pub fn restricted(&self, keep: &[&str]) -> Self {
        let domains = self
            .domains
            .iter()
            .filter(|(d, _)| keep.contains(&d.as_str()))
            .map(|(d, s)| (d.clone(), s.clone()))
            .collect();
        Self { domains, observed: self.observed.clone() }
    }

    /// Records values used in seed dialogues for open-valued slots, so that
    /// generators have something to draw from.
    pub fn with_observed_values<'a, I>(mut self, dialogues: I) -> Self
    where
        I: IntoIterator<Item = &'a Dialogue>,
    {
        for d in dialogues {
            let beliefs = d.turns.iter().map(|t| &t.belief);
            for source in std::iter::once(&d.initial_goal).chain(std::iter::once(&d.final_goal)).chain(beliefs) {
                for t in source.slot_triples() {
                    let open = self.candidates(&t.domain, &t.slot).is_some_and(|c| c.is_empty());
                    if open && t.value != DONTCARE {
                        let pool = self.observed.entry((t.domain.clone(), t.slot.clone())).or_default();
                        if !pool.contains(&t.value) {
                            pool.push(t.value.clone());
                        }
                    }
                }
            }
        }
        self
    }

    pub fn domain(&self, name: &str) -> Option<&DomainSchema> {
        self.domains.get(name)
    }

    pub fn domains(&self) -> impl Iterator<Item = (&str, &DomainSchema)> {
        self.domains.iter().map(|(d, s)| (d.as_str(), s))
    }

    pub fn domain_names(&self) -> impl Iterator<Item = &str> {
        self.domains.keys().map(String::as_str)
    }

    pub fn has_domain(&self, name: &str) -> bool {
        self.domains.contains_key(name)
    }

    pub fn is_informable(&self, domain: &str, slot: &str) -> bool {
        self.domains.get(domain).is_some_and(|s| s.informable.contains_key(slot))
    }

    pub fn informable_slots(&self, domain: &str) -> Vec<&str> {
        self.domains.get(domain).map(|s| s.informable.keys().map(String::as_str).collect()).unwrap_or_default()
    }

    pub fn candidates(&self, domain: &str, slot: &str) -> Option<&[String]> {
        self.domains.get(domain)?.informable.get(slot).map(Vec::as_slice)
    }

    /// Values a generator may pick for a slot: candidates, or observed values
    /// for open-valued slots.
    pub fn value_pool(&self, domain: &str, slot: &str) -> &[String] {
        match self.candidates(domain, slot) {
            Some(c) if !c.is_empty() => c,
            Some(_) => self.observed.get(&(domain.to_string(), slot.to_string())).map(Vec::as_slice).unwrap_or(&[]),
            None => &[],
        }
    }

    pub fn act_permitted(&self, domain: &str, act: &str) -> bool {
        if domain == GENERAL && !GENERAL_ACTS.contains(&act) {
            return false;
        }
        self.domains.get(domain).is_some_and(|s| s.acts.contains(act))
    }

    /// Whether `slot` may appear in an act for `domain`.
    pub fn act_slot_permitted(&self, domain: &str, slot: &str) -> bool {
        if slot == NONE {
            return true;
        }
        domain != GENERAL && self.domains.get(domain).is_some_and(|s| s.has_slot(slot))
    }

    pub fn is_queryable(&self, domain: &str) -> bool {
        self.domains.get(domain).is_some_and(|s| s.queryable)
    }

    pub fn is_bookable(&self, domain: &str) -> bool {
        self.domains.get(domain).is_some_and(DomainSchema::is_bookable)
    }

    pub fn is_booking_slot(&self, domain: &str, slot: &str) -> bool {
        BOOKING_SLOTS.contains(&slot) && self.is_informable(domain, slot)
    }

    /// Checks a belief/goal triple. Domain-only entries are valid for any
    /// known domain; `general` carries no slots.
    pub fn check_triple(&self, domain: &str, slot: &str, value: &str) -> Result<(), String> {
        let Some(schema) = self.domains.get(domain) else {
            return Err(format!("unknown domain `{domain}`"));
        };
        if slot == NONE {
            return Ok(());
        }
        let Some(cands) = schema.informable.get(slot) else {
            return Err(format!("unknown slot `{domain}.{slot}`"));
        };
        if value.is_empty() {
            return Err(format!("empty value for `{domain}.{slot}`"));
        }
        if !cands.is_empty() && value != DONTCARE && !cands.iter().any(|c| c == value) {
            return Err(format!("value `{value}` not allowed for `{domain}.{slot}`"));
        }
        Ok(())
    }

    pub fn check_act(&self, domain: &str, act: &str) -> Result<(), String> {
        if !self.has_domain(domain) {
            return Err(format!("unknown domain `{domain}`"));
        }
        if !self.act_permitted(domain, act) {
            return Err(format!("act `{act}` not permitted for `{domain}`"));
        }
        Ok(())
    }
}
