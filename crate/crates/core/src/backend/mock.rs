//! Offline backends for tests and dry runs.

use std::sync::Mutex;

use super::{apply_stops, BackendError, CompletionBackend, CompletionRequest};
use crate::format::{parse_goal, parse_user_line, serialize_goal};
use crate::model::{accumulate_state, SlotValues, DONTCARE, GENERAL};

#[derive(Clone, Debug, PartialEq)]
pub enum MockMode {
    /// Always returns the same text.
    Echo(String),
    /// Returns the listed completions in order; `cycle` restarts at the end.
    Script { completions: Vec<String>, cycle: bool },
    /// Reads the target instruction from the prompt and voices its slots a
    /// few at a time, then says goodbye.
    GoalFollower,
    /// Keeps the conversation going forever without a goodbye.
    NeverBye,
    /// Every call fails with the given error.
    Fail(BackendError),
}

pub struct MockBackend {
    mode: MockMode,
    cursor: Mutex<usize>,
    calls: Mutex<usize>,
}

impl MockBackend {
    pub fn new(mode: MockMode) -> Self {
        Self { mode, cursor: Mutex::new(0), calls: Mutex::new(0) }
    }

    pub fn echo(text: &str) -> Self {
        Self::new(MockMode::Echo(text.to_string()))
    }

    pub fn script<I: IntoIterator<Item = S>, S: Into<String>>(completions: I) -> Self {
        Self::new(MockMode::Script { completions: completions.into_iter().map(Into::into).collect(), cycle: false })
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().expect("mock poisoned")
    }

    fn raw(&self, prompt: &str) -> Result<String, BackendError> {
        match &self.mode {
            MockMode::Echo(t) => Ok(t.clone()),
            MockMode::Script { completions, cycle } => {
                let mut cur = self.cursor.lock().expect("mock poisoned");
                if completions.is_empty() || (!cycle && *cur >= completions.len()) {
                    return Err(BackendError::Exhausted);
                }
                let out = completions[*cur % completions.len()].clone();
                *cur += 1;
                Ok(out)
            }
            MockMode::GoalFollower => Ok(follow_goal(prompt)),
            MockMode::NeverBye => Ok(match PromptEnd::of(prompt) {
                PromptEnd::UserTurn => "[general]): hmm , let me think about it .".into(),
                PromptEnd::SystemTurn => "[general] [reqmore]): take your time . anything else ?".into(),
                _ => "take your time .".into(),
            }),
            MockMode::Fail(e) => Err(e.clone()),
        }
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        *self.calls.lock().expect("mock poisoned") += 1;
        Ok(apply_stops(&self.raw(&req.prompt)?, &req.stop))
    }

    fn name(&self) -> &str {
        "mock"
    }

    fn concurrency_limit(&self) -> usize {
        4
    }
}

enum PromptEnd<'a> {
    UserTurn,
    SystemTurn,
    /// `Assistant(<act>): ` awaiting the response text.
    Response,
    /// `User(<belief>):` awaiting the utterance.
    Utterance(&'a str),
    Other,
}

impl<'a> PromptEnd<'a> {
    fn of(prompt: &'a str) -> Self {
        let last = prompt.rsplit('\n').next().unwrap_or("");
        if last == "User(" {
            PromptEnd::UserTurn
        } else if last == "Assistant(" {
            PromptEnd::SystemTurn
        } else if last.starts_with("Assistant(") && last.trim_end().ends_with("):") {
            PromptEnd::Response
        } else if last.starts_with("User(") && last.ends_with("):") {
            PromptEnd::Utterance(last)
        } else {
            PromptEnd::Other
        }
    }
}

fn slot_phrase(slot: &str, value: &str) -> String {
    match value {
        "yes" => format!("with free {slot}"),
        "no" => format!("no {slot}"),
        DONTCARE => format!("i do not care about the {slot}"),
        v => format!("{slot} {v}"),
    }
}

fn target_goal(prompt: &str) -> SlotValues {
    let mut goal = SlotValues::new();
    let Some(pos) = prompt.rfind("Instruction") else { return goal };
    let line = prompt[pos..].lines().next().unwrap_or("");
    let mut rest = line;
    while let Some(start) = rest.find("are (") {
        let after = &rest[start + 5..];
        let Some(end) = after.find(')') else { break };
        if let Ok(g) = parse_goal(&after[..end]) {
            for t in g.triples() {
                goal.insert_triple(t);
            }
        }
        rest = &after[end..];
    }
    goal
}

fn follow_goal(prompt: &str) -> String {
    match PromptEnd::of(prompt) {
        PromptEnd::UserTurn => {
            let goal = target_goal(prompt);
            let conv = prompt.rfind("\nConversation").map_or(prompt, |p| &prompt[p..]);
            let beliefs: Vec<SlotValues> =
                conv.lines().filter_map(|l| parse_user_line(l).ok()).map(|(b, _)| b).collect();
            let state = accumulate_state(beliefs.iter());
            for (d, slots) in goal.entries() {
                let todo: Vec<(&String, &String)> =
                    slots.iter().filter(|(s, v)| state.get(d, s) != Some(v.as_str())).take(3).collect();
                if todo.is_empty() {
                    continue;
                }
                let mut belief = SlotValues::new();
                for (s, v) in &todo {
                    belief.insert(d, s, v);
                }
                let phrases: Vec<String> = todo.iter().map(|(s, v)| slot_phrase(s, v)).collect();
                return format!("{}): i am looking for a {d} , {} .", serialize_goal(&belief), phrases.join(" , "));
            }
            "[general]): thank you , that is all . goodbye .".into()
        }
        PromptEnd::SystemTurn => {
            let last_user = prompt.lines().rev().find_map(|l| parse_user_line(l).ok());
            match last_user {
                Some((b, _)) if b.domains().all(|d| d == GENERAL) && !b.is_empty() => {
                    "[general] [bye]): thank you , goodbye .".into()
                }
                _ => "[general] [reqmore]): noted . is there anything else ?".into(),
            }
        }
        PromptEnd::Response => "okay .".into(),
        PromptEnd::Utterance(line) => {
            let belief = parse_user_line(&format!("{line} ")).map(|(b, _)| b).unwrap_or_default();
            let phrases: Vec<String> = belief.slot_triples().map(|t| slot_phrase(&t.slot, &t.value)).collect();
            format!(" i would like {} .", phrases.join(" , "))
        }
        PromptEnd::Other => String::new(),
    }
}
