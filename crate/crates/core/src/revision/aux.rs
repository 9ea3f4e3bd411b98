//! Auxiliary belief/act predictors.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use super::{boolean_cue, has_dontcare_cue};
use crate::model::{
    accumulate_state, DbBucket, DbResult, DialogAct, SlotValues, Turn, TurnBelief, DONTCARE, GENERAL, NONE,
};
use crate::ontology::Ontology;
use crate::text::{canonical_time, find_phrase, match_tokens};

#[derive(Debug, Error)]
pub enum AuxError {
    #[error("auxiliary predictor transport: {0}")]
    Transport(String),
    #[error("auxiliary predictor protocol: {0}")]
    Protocol(String),
}

/// A second opinion on the belief and act of a turn.
pub trait AuxPredictor: Send + Sync {
    fn predict_belief(&self, context: &[Turn], utterance: &str) -> Result<TurnBelief, AuxError>;
    fn predict_act(
        &self,
        context: &[Turn],
        utterance: &str,
        belief: &TurnBelief,
        db: &DbResult,
    ) -> Result<DialogAct, AuxError>;
}

/// Predicts nothing; revision then reduces to filtering.
pub struct NoAux;

impl AuxPredictor for NoAux {
    fn predict_belief(&self, _: &[Turn], _: &str) -> Result<TurnBelief, AuxError> {
        Ok(TurnBelief::new())
    }
    fn predict_act(&self, _: &[Turn], _: &str, _: &TurnBelief, _: &DbResult) -> Result<DialogAct, AuxError> {
        Ok(DialogAct::new())
    }
}

/// Last non-general domain named in the context's beliefs or acts.
pub fn context_domain(context: &[Turn]) -> Option<String> {
    for t in context.iter().rev() {
        if let Some(d) = t.belief.domains().filter(|d| *d != GENERAL).last() {
            return Some(d.to_string());
        }
        if let Some(a) = t.act.iter().rev().find(|a| a.domain != GENERAL) {
            return Some(a.domain.clone());
        }
    }
    None
}

const NUMBER_CUES: [(&str, &str); 9] = [
    ("star", "stars"),
    ("stars", "stars"),
    ("night", "stay"),
    ("nights", "stay"),
    ("people", "people"),
    ("person", "people"),
    ("persons", "people"),
    ("guests", "people"),
    ("adults", "people"),
];

const ARRIVE_CUES: [&str; 5] = ["by", "arrive", "arrives", "arriving", "arrival"];
const LEAVE_CUES: [&str; 6] = ["after", "leave", "leaves", "leaving", "depart", "departing"];

/// Value tokens and the (domain, slot) pairs that value can fill.
type LexiconEntry = (Vec<String>, Vec<(String, String)>);

/// Keyword and lexicon matcher standing in for a trained tracker.
pub struct LexicalAuxPredictor {
    ontology: Ontology,
    /// (value tokens, candidate (domain, slot) pairs), longest first.
    lexicon: Vec<LexiconEntry>,
    keywords: Vec<(String, Vec<String>)>,
}

impl LexicalAuxPredictor {
    /// Builds the value lexicon from candidate lists and observed values.
    pub fn new(ontology: &Ontology) -> Self {
        let mut by_value: HashMap<Vec<String>, Vec<(String, String)>> = HashMap::new();
        for (d, schema) in ontology.domains() {
            for s in schema.informable.keys() {
                if super::bool_keywords(s).is_some() {
                    continue;
                }
                for v in ontology.value_pool(d, s) {
                    let toks = match_tokens(v);
                    let numeric =
                        toks.len() == 1 && (toks[0].parse::<u32>().is_ok() || canonical_time(&toks[0]).is_some());
                    if toks.is_empty() || numeric || v == DONTCARE {
                        continue;
                    }
                    let entry = by_value.entry(toks).or_default();
                    let pair = (d.to_string(), s.clone());
                    if !entry.contains(&pair) {
                        entry.push(pair);
                    }
                }
            }
        }
        let mut lexicon: Vec<_> = by_value.into_iter().collect();
        lexicon.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let keywords = ontology
            .domain_names()
            .filter(|d| *d != GENERAL)
            .map(|d| {
                let mut kws = vec![d.to_string()];
                match d {
                    "restaurant" => kws.extend(["eat", "food", "table", "dine", "dinner", "lunch"].map(String::from)),
                    "hotel" => kws.extend(["stay", "room", "guesthouse", "lodging"].map(String::from)),
                    "attraction" => kws.extend(["visit", "museum", "college", "attractions"].map(String::from)),
                    "taxi" => kws.extend(["cab", "car"].map(String::from)),
                    "train" => kws.extend(["trains"].map(String::from)),
                    "police" => kws.extend(["station"].map(String::from)),
                    _ => {}
                }
                (d.to_string(), kws)
            })
            .collect();
        Self { ontology: ontology.clone(), lexicon, keywords }
    }

    fn candidate_domains(&self, tokens: &[String], context: &[Turn]) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut named = BTreeSet::new();
        for (d, kws) in &self.keywords {
            if kws.iter().any(|k| tokens.contains(k)) {
                named.insert(d.clone());
            }
        }
        let mut all = named.clone();
        if let Some(d) = context_domain(context) {
            all.insert(d);
        }
        (named, all)
    }

    fn pick<'a>(
        &self,
        options: &'a [(String, String)],
        named: &BTreeSet<String>,
        preceding: &[String],
    ) -> Option<&'a (String, String)> {
        let by_cue = |slot: &str| options.iter().filter(|(_, s)| s == slot).collect::<Vec<_>>();
        let prefer_named = |opts: Vec<&'a (String, String)>| -> Option<&'a (String, String)> {
            if opts.len() == 1 {
                return Some(opts[0]);
            }
            let n: Vec<_> = opts.into_iter().filter(|(d, _)| named.contains(d)).collect();
            (n.len() == 1).then(|| n[0])
        };
        if options.len() == 1 {
            return Some(&options[0]);
        }
        let prev = preceding.last().map(String::as_str);
        let cue_slot = match prev {
            Some("to") => Some("destination"),
            Some("from") => Some("departure"),
            _ => None,
        };
        if let Some(slot) = cue_slot {
            if let Some(p) = prefer_named(by_cue(slot)) {
                return Some(p);
            }
        }
        let distinct_slots: BTreeSet<&str> = options.iter().map(|(_, s)| s.as_str()).collect();
        if distinct_slots.len() == 1 {
            return prefer_named(options.iter().collect());
        }
        None
    }
}

impl AuxPredictor for LexicalAuxPredictor {
    fn predict_belief(&self, context: &[Turn], utterance: &str) -> Result<TurnBelief, AuxError> {
        let tokens = match_tokens(utterance);
        let (named, domains) = self.candidate_domains(&tokens, context);
        let mut out = SlotValues::new();
        let mut used = vec![false; tokens.len()];

        for (needle, options) in &self.lexicon {
            let options: Vec<(String, String)> = options.iter().filter(|(d, _)| domains.contains(d)).cloned().collect();
            if options.is_empty() {
                continue;
            }
            for pos in find_phrase(&tokens, needle) {
                if used[pos..pos + needle.len()].iter().any(|u| *u) {
                    continue;
                }
                if let Some((d, s)) = self.pick(&options, &named, &tokens[..pos]) {
                    if out.get(d, s).is_none() {
                        out.insert(d, s, &needle.join(" "));
                    }
                    used[pos..pos + needle.len()].iter_mut().for_each(|u| *u = true);
                }
            }
        }

        for (i, tok) in tokens.iter().enumerate() {
            if used[i] {
                continue;
            }
            if tok.parse::<u32>().is_ok() {
                let Some(next) = tokens.get(i + 1) else { continue };
                let Some((_, slot)) = NUMBER_CUES.iter().find(|(c, _)| c == next) else { continue };
                let hosts: Vec<&String> =
                    domains.iter().filter(|d| self.ontology.check_triple(d, slot, tok).is_ok()).collect();
                if let Some(d) = prefer(&hosts, &named) {
                    out.insert(d, slot, tok);
                }
            } else if let Some(time) = canonical_time(tok) {
                let before = &tokens[i.saturating_sub(3)..i];
                let slot = if before.iter().any(|t| ARRIVE_CUES.contains(&t.as_str())) {
                    "arrive"
                } else if before.iter().any(|t| LEAVE_CUES.contains(&t.as_str())) {
                    "leave"
                } else {
                    "time"
                };
                let hosts: Vec<&String> = domains.iter().filter(|d| self.ontology.is_informable(d, slot)).collect();
                if let Some(d) = prefer(&hosts, &named) {
                    out.insert(d, slot, &time);
                }
            }
        }

        for d in &domains {
            for slot in ["parking", "internet"] {
                if self.ontology.is_informable(d, slot) {
                    if let Some(yes) = boolean_cue(slot, &tokens) {
                        out.insert(d, slot, if yes { "yes" } else { "no" });
                    }
                }
            }
        }

        if has_dontcare_cue(&tokens) {
            if let Some(last) = context.last() {
                for t in last.act.iter().filter(|t| t.act == "request") {
                    if self.ontology.is_informable(&t.domain, &t.slot) && out.get(&t.domain, &t.slot).is_none() {
                        out.insert(&t.domain, &t.slot, DONTCARE);
                    }
                }
            }
        }
        Ok(out)
    }

    fn predict_act(
        &self,
        context: &[Turn],
        _utterance: &str,
        belief: &TurnBelief,
        db: &DbResult,
    ) -> Result<DialogAct, AuxError> {
        let mut act = DialogAct::new();
        if !belief.is_empty() && belief.domains().all(|d| d == GENERAL) {
            act.push(GENERAL, "bye", NONE);
            return Ok(act);
        }
        let d = db.domain.as_str();
        if db.bucket == DbBucket::Db0 && self.ontology.act_permitted(d, "nooffer") {
            act.push(d, "nooffer", NONE);
            return Ok(act);
        }
        let mut beliefs: Vec<&TurnBelief> = context.iter().map(|t| &t.belief).collect();
        beliefs.push(belief);
        let state = accumulate_state(beliefs);
        if d != GENERAL && self.ontology.act_permitted(d, "request") {
            if let Some(slot) = self.ontology.informable_slots(d).into_iter().find(|s| state.get(d, s).is_none()) {
                act.push(d, "request", slot);
                return Ok(act);
            }
        }
        act.push(GENERAL, "reqmore", NONE);
        Ok(act)
    }
}

fn prefer<'a>(hosts: &[&'a String], named: &BTreeSet<String>) -> Option<&'a str> {
    match hosts {
        [] => None,
        [one] => Some(one.as_str()),
        many => {
            let n: Vec<_> = many.iter().filter(|d| named.contains(d.as_str())).collect();
            (n.len() == 1).then(|| n[0].as_str())
        }
    }
}

/// How to reach an external predictor.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExternalTransport {
    /// Shell command speaking newline-delimited JSON on stdin/stdout.
    Subprocess { command: String },
    Http {
        url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_timeout() -> u64 {
    30
}

struct Pipe {
    _child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Adapter for a trained model served out of process. Calls are serialized.
pub struct ExternalAuxPredictor {
    ontology: Ontology,
    pipe: Option<Mutex<Pipe>>,
    http: Option<(reqwest::blocking::Client, String)>,
}

impl ExternalAuxPredictor {
    pub fn new(transport: &ExternalTransport, ontology: &Ontology) -> Result<Self, AuxError> {
        match transport {
            ExternalTransport::Subprocess { command } => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(command)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| AuxError::Transport(format!("spawn `{command}`: {e}")))?;
                let stdin = child.stdin.take().ok_or_else(|| AuxError::Transport("no stdin".into()))?;
                let stdout =
                    BufReader::new(child.stdout.take().ok_or_else(|| AuxError::Transport("no stdout".into()))?);
                Ok(Self {
                    ontology: ontology.clone(),
                    pipe: Some(Mutex::new(Pipe { _child: child, stdin, stdout })),
                    http: None,
                })
            }
            ExternalTransport::Http { url, timeout_secs } => {
                let client = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(*timeout_secs))
                    .build()
                    .map_err(|e| AuxError::Transport(e.to_string()))?;
                Ok(Self { ontology: ontology.clone(), pipe: None, http: Some((client, url.clone())) })
            }
        }
    }

    fn call(&self, request: Value) -> Result<Value, AuxError> {
        if let Some(pipe) = &self.pipe {
            let mut p = pipe.lock().map_err(|_| AuxError::Transport("pipe poisoned".into()))?;
            writeln!(p.stdin, "{request}")
                .and_then(|_| p.stdin.flush())
                .map_err(|e| AuxError::Transport(e.to_string()))?;
            let mut line = String::new();
            let n = p.stdout.read_line(&mut line).map_err(|e| AuxError::Transport(e.to_string()))?;
            if n == 0 {
                return Err(AuxError::Transport("predictor closed its output".into()));
            }
            return serde_json::from_str(&line).map_err(|e| AuxError::Protocol(e.to_string()));
        }
        let (client, url) = self.http.as_ref().expect("one transport is set");
        let resp = client.post(url).json(&request).send().map_err(|e| AuxError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(AuxError::Transport(format!("HTTP {}", resp.status())));
        }
        resp.json().map_err(|e| AuxError::Protocol(e.to_string()))
    }
}

fn context_json(context: &[Turn]) -> Value {
    Value::Array(
        context
            .iter()
            .map(|t| json!({"user": t.user_utterance, "belief": t.belief, "act": t.act, "resp": t.system_response}))
            .collect(),
    )
}

impl AuxPredictor for ExternalAuxPredictor {
    fn predict_belief(&self, context: &[Turn], utterance: &str) -> Result<TurnBelief, AuxError> {
        let resp = self.call(json!({"context": context_json(context), "utterance": utterance}))?;
        let belief: TurnBelief = serde_json::from_value(resp.get("belief").cloned().unwrap_or(Value::Null))
            .map_err(|e| AuxError::Protocol(format!("belief: {e}")))?;
        Ok(super::ontology_clean(&belief, &self.ontology).0)
    }

    fn predict_act(
        &self,
        context: &[Turn],
        utterance: &str,
        belief: &TurnBelief,
        db: &DbResult,
    ) -> Result<DialogAct, AuxError> {
        let resp = self.call(json!({
            "context": context_json(context),
            "utterance": utterance,
            "belief": belief,
            "db": db,
        }))?;
        let act: DialogAct = serde_json::from_value(resp.get("act").cloned().unwrap_or(Value::Null))
            .map_err(|e| AuxError::Protocol(format!("act: {e}")))?;
        Ok(act.iter().filter(|t| self.ontology.check_act(&t.domain, &t.act).is_ok()).cloned().collect())
    }
}
