//! Text rendering of goals, beliefs and acts, and the parsers for generated
//! `User(...)` / `Assistant(...)` lines.
//!
//! Goal/belief: `[hotel] stars is 4 , stay is 2 [restaurant] food is chinese`.
//! Act: `[hotel] [inform] area name [offerbook] [general] [reqmore]`.

use thiserror::Error;

use crate::model::{ActTriple, DialogAct, SlotValues, NONE};
use crate::ontology::is_act_type;

/// Columns are 1-based character offsets into the parsed line.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("expected line to start with `{expected}`")]
    MissingPrefix { expected: &'static str },
    #[error("column {col}: unbalanced parentheses")]
    Unbalanced { col: usize },
    #[error("column {col}: malformed triplet: {msg}")]
    MalformedTriplet { col: usize, msg: String },
    #[error("column {col}: unknown act type `{token}`")]
    UnknownActType { col: usize, token: String },
}

impl FormatError {
    pub fn column(&self) -> Option<usize> {
        match self {
            FormatError::MissingPrefix { .. } => None,
            FormatError::Unbalanced { col }
            | FormatError::MalformedTriplet { col, .. }
            | FormatError::UnknownActType { col, .. } => Some(*col),
        }
    }

    fn shift(self, by: usize) -> Self {
        match self {
            FormatError::Unbalanced { col } => FormatError::Unbalanced { col: col + by },
            FormatError::MalformedTriplet { col, msg } => FormatError::MalformedTriplet { col: col + by, msg },
            FormatError::UnknownActType { col, token } => FormatError::UnknownActType { col: col + by, token },
            other => other,
        }
    }
}

pub fn serialize_goal(goal: &SlotValues) -> String {
    let mut parts = Vec::new();
    for (domain, slots) in goal.entries() {
        let mut section = format!("[{domain}]");
        if !slots.is_empty() {
            let body: Vec<String> = slots.iter().map(|(s, v)| format!("{s} is {v}")).collect();
            section.push(' ');
            section.push_str(&body.join(" , "));
        }
        parts.push(section);
    }
    parts.join(" ")
}

/// Adjacent triples sharing a domain share one `[domain]` token; adjacent
/// slotted triples sharing an act share one `[act]` token. A slotless triple
/// always gets its own `[act]` token.
pub fn serialize_act(act: &DialogAct) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut domain: Option<&str> = None;
    let mut open_act: Option<&str> = None;
    for t in act.iter() {
        if domain != Some(t.domain.as_str()) {
            out.push(format!("[{}]", t.domain));
            domain = Some(&t.domain);
            open_act = None;
        }
        if t.is_slotless() {
            out.push(format!("[{}]", t.act));
            open_act = None;
        } else {
            if open_act != Some(t.act.as_str()) {
                out.push(format!("[{}]", t.act));
                open_act = Some(&t.act);
            }
            out.push(t.slot.clone());
        }
    }
    out.join(" ")
}

pub fn parse_goal(text: &str) -> Result<SlotValues, FormatError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = SlotValues::new();
    let mut i = skip_ws(&chars, 0);
    if i == chars.len() {
        return Ok(out);
    }
    while i < chars.len() {
        if chars[i] != '[' {
            return Err(malformed(i, "expected `[domain]`"));
        }
        let close = find_char(&chars, i, ']').ok_or_else(|| malformed(i, "unterminated `[`"))?;
        let domain: String = chars[i + 1..close].iter().collect::<String>().trim().to_string();
        if domain.is_empty() {
            return Err(malformed(i, "empty domain"));
        }
        let body_start = close + 1;
        let body_end = find_char(&chars, body_start, '[').unwrap_or(chars.len());
        let body: String = chars[body_start..body_end].iter().collect();
        if body.trim().is_empty() {
            out.insert_domain(&domain);
        } else {
            let mut offset = body_start;
            for entry in body.split(',') {
                let len = entry.chars().count();
                let lead = entry.chars().take_while(|c| c.is_whitespace()).count();
                let trimmed = entry.trim();
                let col = offset + lead;
                if trimmed.is_empty() {
                    return Err(malformed(col, "empty slot entry"));
                }
                let Some((slot, value)) = trimmed.split_once(" is ") else {
                    return Err(malformed(col, &format!("`{trimmed}` is not `slot is value`")));
                };
                let (slot, value) = (slot.trim(), value.trim());
                if slot.is_empty() || value.is_empty() {
                    return Err(malformed(col, &format!("`{trimmed}` is not `slot is value`")));
                }
                out.insert(&domain, slot, value);
                offset += len + 1;
            }
        }
        i = body_end;
    }
    Ok(out)
}

#[derive(Debug)]
enum ActToken {
    Bracket(String, usize),
    Word(String, usize),
}

fn tokenize_act(chars: &[char]) -> Result<Vec<ActToken>, FormatError> {
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '[' {
            let close = find_char(chars, i, ']').ok_or_else(|| malformed(i, "unterminated `[`"))?;
            let name: String = chars[i + 1..close].iter().collect::<String>().trim().to_string();
            if name.is_empty() {
                return Err(malformed(i, "empty bracket token"));
            }
            toks.push(ActToken::Bracket(name, i));
            i = close + 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '[' {
                i += 1;
            }
            toks.push(ActToken::Word(chars[start..i].iter().collect(), start));
        }
    }
    Ok(toks)
}

pub fn parse_act(text: &str) -> Result<DialogAct, FormatError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = DialogAct::new();
    let mut domain: Option<String> = None;
    // (act, has_slots, column)
    let mut act: Option<(String, bool, usize)> = None;

    fn flush(out: &mut DialogAct, domain: &Option<String>, act: &mut Option<(String, bool, usize)>) {
        if let (Some(d), Some((a, false, _))) = (domain, act.as_ref()) {
            out.0.push(ActTriple::new(d.clone(), a.clone(), NONE));
        }
        *act = None;
    }

    for tok in tokenize_act(&chars)? {
        match tok {
            ActToken::Bracket(name, col) if is_act_type(&name) => {
                if domain.is_none() {
                    return Err(malformed(col, &format!("act `{name}` before any domain")));
                }
                flush(&mut out, &domain, &mut act);
                act = Some((name, false, col));
            }
            ActToken::Bracket(name, col) => {
                if domain.is_some() && act.is_none() {
                    return Err(FormatError::UnknownActType { col: col + 1, token: name });
                }
                flush(&mut out, &domain, &mut act);
                domain = Some(name);
            }
            ActToken::Word(word, col) => match (&domain, &mut act) {
                (Some(d), Some((a, has_slots, _))) => {
                    out.0.push(ActTriple::new(d.clone(), a.clone(), word));
                    *has_slots = true;
                }
                _ => return Err(malformed(col, &format!("slot `{word}` outside an `[act]` section"))),
            },
        }
    }
    if domain.is_some() && act.is_none() {
        return Err(malformed(chars.len(), "domain without an act"));
    }
    flush(&mut out, &domain, &mut act);
    Ok(out)
}

/// Splits `Prefix(<annotation>): <text>` into annotation and text.
/// Returns the annotation's starting column (0-based) as well.
fn split_line<'a>(line: &'a str, prefix: &'static str) -> Result<(&'a str, usize, &'a str), FormatError> {
    let line = line.trim_start();
    let Some(rest) = line.strip_prefix(prefix) else {
        return Err(FormatError::MissingPrefix { expected: prefix });
    };
    let open = prefix.len();
    let mut depth = 1usize;
    let mut close = None;
    for (i, c) in rest.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let Some(close) = close else {
        return Err(FormatError::Unbalanced { col: line[..open].chars().count() });
    };
    let annotation = &rest[..close];
    let after = &rest[close + 1..];
    let Some(text) = after.strip_prefix(':') else {
        let col = line[..open + close + 1].chars().count() + 1;
        return Err(FormatError::MalformedTriplet { col, msg: "expected `:` after annotation".into() });
    };
    Ok((annotation, line[..open].chars().count(), text.trim()))
}

pub fn parse_user_line(line: &str) -> Result<(SlotValues, String), FormatError> {
    let (ann, col, text) = split_line(line, "User(")?;
    let belief = parse_goal(ann).map_err(|e| e.shift(col))?;
    Ok((belief, text.to_string()))
}

pub fn parse_system_line(line: &str) -> Result<(DialogAct, String), FormatError> {
    let (ann, col, text) = split_line(line, "Assistant(")?;
    let act = parse_act(ann).map_err(|e| e.shift(col))?;
    Ok((act, text.to_string()))
}

pub fn user_line(belief: &SlotValues, utterance: &str) -> String {
    format!("User({}): {}", serialize_goal(belief), utterance)
}

pub fn system_line(act: &DialogAct, response: &str) -> String {
    format!("Assistant({}): {}", serialize_act(act), response)
}

fn malformed(idx: usize, msg: &str) -> FormatError {
    FormatError::MalformedTriplet { col: idx + 1, msg: msg.to_string() }
}

fn skip_ws(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    i
}

fn find_char(chars: &[char], from: usize, target: char) -> Option<usize> {
    chars[from..].iter().position(|&c| c == target).map(|p| p + from)
}
