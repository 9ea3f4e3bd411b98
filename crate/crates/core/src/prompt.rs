//! Prompt assembly for dialogue-level and turn-level generation.

use thiserror::Error;

use crate::format::{serialize_goal, system_line, user_line};
use crate::model::{Dialogue, SlotValues, TurnBelief, UserGoal, GENERAL};
use crate::ontology::Ontology;
use crate::text::estimate_tokens;

pub const TASK_DESCRIPTION: &str = "The following are conversations between a user and an assistant. \
The assistant can help the user to find things that satisfy his requirements. \
Try to speak differently in different conversations.";

const BOOKING_REMINDER: &str = "Make sure you get the booking information once booked.";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("prompt needs about {needed} tokens but the context budget is {budget}")]
    ContextBudget { needed: usize, budget: usize },
    #[error("at least one example is required")]
    NoExamples,
}

/// What the user is asked to do with a domain, e.g. `book a hotel`.
fn domain_task(domain: &str) -> String {
    match domain {
        "attraction" => "find an attraction".to_string(),
        "hospital" => "find a hospital".to_string(),
        "police" => "find a police station".to_string(),
        d => format!("book a {d}"),
    }
}

/// The instruction sentence(s) for a goal, without the `InstructionN:` label.
pub fn instruction_text(goal: &UserGoal, ontology: &Ontology) -> String {
    let mut sentences = Vec::new();
    let mut bookable = false;
    let mut first = true;
    for (domain, slots) in goal.entries() {
        if domain == GENERAL {
            continue;
        }
        let mut single = SlotValues::new();
        single.insert_domain(domain);
        for (s, v) in slots {
            single.insert(domain, s, v);
        }
        let lead = if first { "You are going to" } else { "You also want to" };
        sentences.push(format!(
            "{lead} {}, and your requirements for the {domain} are ({}).",
            domain_task(domain),
            serialize_goal(&single)
        ));
        bookable |= ontology.is_bookable(domain);
        first = false;
    }
    if bookable {
        sentences.push(BOOKING_REMINDER.to_string());
    }
    sentences.join(" ")
}

pub fn instruction_line(goal: &UserGoal, index: usize, ontology: &Ontology) -> String {
    format!("Instruction{index}: {}", instruction_text(goal, ontology))
}

pub fn render_demonstration(d: &Dialogue, index: usize, ontology: &Ontology) -> String {
    let mut out = instruction_line(d.goal(), index, ontology);
    out.push_str(&format!("\nConversation{index}:"));
    for t in &d.turns {
        out.push('\n');
        out.push_str(&user_line(&t.belief, &t.user_utterance));
        out.push('\n');
        out.push_str(&system_line(&t.act, &t.system_response));
    }
    out
}

/// Task description, numbered demonstrations, then the target instruction
/// and an open `ConversationN:` header.
pub fn build_prompt(
    task_desc: &str,
    examples: &[&Dialogue],
    target: &UserGoal,
    ontology: &Ontology,
) -> Result<String, PromptError> {
    if examples.is_empty() {
        return Err(PromptError::NoExamples);
    }
    let mut out = String::from(task_desc);
    for (i, d) in examples.iter().enumerate() {
        out.push_str("\n\n");
        out.push_str(&render_demonstration(d, i + 1, ontology));
    }
    let n = examples.len() + 1;
    out.push_str("\n\n");
    out.push_str(&instruction_line(target, n, ontology));
    out.push_str(&format!("\nConversation{n}:"));
    Ok(out)
}

/// Fails if the prompt plus the completion allowance exceeds the context window.
pub fn check_budget(prompt: &str, max_tokens: usize, context_tokens: usize) -> Result<(), PromptError> {
    let needed = estimate_tokens(prompt) + max_tokens;
    if needed > context_tokens {
        return Err(PromptError::ContextBudget { needed, budget: context_tokens });
    }
    Ok(())
}

/// Short description of a slot for the turn-level task header.
pub fn slot_gloss(domain: &str, slot: &str) -> String {
    let fixed = match (domain, slot) {
        ("hotel", "people") => Some("number of people for the hotel booking"),
        ("hotel", "type") => Some("what is the type of the hotel, guesthouse, guest house, or hotel"),
        ("hotel", "stay") => Some("length of stay at the hotel"),
        ("hotel", "name") => Some("name of the hotel"),
        ("hotel", "day") => Some("day of the hotel booking"),
        ("hotel", "stars") => Some("star rating of the hotel"),
        ("hotel", "parking") => Some("whether the hotel has free parking"),
        ("hotel", "internet") => Some("whether the hotel has free internet"),
        ("restaurant", "food") => Some("food type of the restaurant"),
        ("restaurant", "time") => Some("time of the restaurant booking"),
        ("taxi", "leave") => Some("leaving time of the taxi"),
        ("taxi", "arrive") => Some("arrival time of the taxi"),
        ("taxi", "departure") => Some("departure location of the taxi"),
        ("taxi", "destination") => Some("destination of the taxi"),
        ("train", "leave") => Some("leaving time of the train"),
        ("train", "arrive") => Some("arrival time of the train"),
        ("train", "departure") => Some("departure station of the train"),
        ("train", "destination") => Some("destination station of the train"),
        ("hospital", "department") => Some("department of the hospital"),
        _ => None,
    };
    if let Some(g) = fixed {
        return g.to_string();
    }
    match slot {
        "pricerange" => format!("price budget of the {domain}"),
        "area" => format!("area or place of the {domain}"),
        "name" => format!("name of the {domain}"),
        "type" => format!("type of the {domain}"),
        "people" => format!("number of people for the {domain} booking"),
        "day" => format!("day of the {domain} booking"),
        other => format!("{other} of the {domain}"),
    }
}

/// One single-turn demonstration: the slots the assistant asks about and the
/// annotated user reply.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnExample {
    pub source_id: String,
    pub turn_idx: usize,
    pub belief: TurnBelief,
    pub utterance: String,
}

impl TurnExample {
    pub fn render(&self) -> String {
        let slots: Vec<&str> = self.belief.entries().flat_map(|(_, s)| s.keys().map(String::as_str)).collect();
        format!(
            "Assistant: what is your requirement on {}?\n{}",
            slots.join(", "),
            user_line(&self.belief, &self.utterance)
        )
    }
}

/// Turn-level prompt. Features list target slots first, then any demo slots
/// of the same domain, each once.
pub fn build_dst_prompt(target: &TurnBelief, demos: &[TurnExample]) -> String {
    let domain = target.domains().find(|d| *d != GENERAL).unwrap_or(GENERAL).to_string();
    let mut features: Vec<String> = Vec::new();
    let mut add = |s: &str| {
        if !features.iter().any(|f| f == s) {
            features.push(s.to_string());
        }
    };
    for t in target.slot_triples() {
        add(&t.slot);
    }
    for d in demos {
        if let Some(slots) = d.belief.domain(&domain) {
            for s in slots.keys() {
                add(s);
            }
        }
    }
    let mut out = format!(
        "Answer the assistant's question on each feature you require when booking a {domain}. \
Also mention no preference on a feature when your requirement on it is \"dontcare\".\nFeatures:"
    );
    for f in &features {
        out.push_str(&format!("\n{f}: {};", slot_gloss(&domain, f)));
    }
    for d in demos {
        out.push_str("\n\n");
        out.push_str(&d.render());
    }
    out.push_str("\n\n");
    out.push_str(&format!("User({}):", serialize_goal(target)));
    out
}
