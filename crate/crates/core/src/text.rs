//! Text normalization shared by the annotation filter, the lexical auxiliary
//! predictor and database matching.

const NUMBER_WORDS: [(&str, u32); 22] = [
    ("zero", 0),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
    ("eleven", 11),
    ("twelve", 12),
    ("thirteen", 13),
    ("fourteen", 14),
    ("fifteen", 15),
    ("sixteen", 16),
    ("seventeen", 17),
    ("eighteen", 18),
    ("nineteen", 19),
    ("twenty", 20),
    ("thirty", 30),
];

fn number_word(tok: &str) -> Option<u32> {
    NUMBER_WORDS.iter().find(|(w, _)| *w == tok).map(|(_, n)| *n)
}

/// Storage form of an utterance: lowercase, punctuation detached as its own
/// token, single spaces. Idempotent.
pub fn normalize_text(s: &str) -> String {
    let lower = s.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut out = String::with_capacity(chars.len() + 8);
    for (i, &c) in chars.iter().enumerate() {
        if matches!(c, '.' | ',' | '?' | '!' | ';') {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            let decimal = matches!(c, '.' | ',')
                && prev.is_some_and(|p| p.is_ascii_digit())
                && next.is_some_and(|n| n.is_ascii_digit());
            if decimal {
                out.push(c);
            } else {
                out.push(' ');
                out.push(c);
                out.push(' ');
            }
        } else if c.is_whitespace() {
            out.push(' ');
        } else {
            out.push(c);
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical `HH:MM` for a clock time written with or without a leading zero.
pub fn canonical_time(tok: &str) -> Option<String> {
    let (h, m) = tok.split_once(':')?;
    if h.is_empty() || h.len() > 2 || m.len() != 2 {
        return None;
    }
    let hour: u32 = h.parse().ok()?;
    let minute: u32 = m.parse().ok()?;
    (hour < 24 && minute < 60).then(|| format!("{hour:02}:{minute:02}"))
}

/// Minutes since midnight for a clock time.
pub fn time_minutes(s: &str) -> Option<u32> {
    let t = canonical_time(s.trim())?;
    let (h, m) = t.split_once(':')?;
    Some(h.parse::<u32>().ok()? * 60 + m.parse::<u32>().ok()?)
}

/// Matching form of a text: lowercase tokens with punctuation removed,
/// hyphenated compounds split, possessive `'s` detached, number words
/// zero to thirty mapped to digits and clock times zero-padded.
pub fn match_tokens(s: &str) -> Vec<String> {
    let lower = s.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut buf = String::with_capacity(chars.len() + 8);
    for (i, &c) in chars.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        match c {
            c if c.is_alphanumeric() => buf.push(c),
            ':' if prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit()) => {
                buf.push(':')
            }
            '.' if prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit()) => {
                buf.push('.')
            }
            '\'' if next.is_some_and(char::is_alphabetic) => {
                buf.push(' ');
                buf.push('\'');
            }
            _ => buf.push(' '),
        }
    }

    let raw: Vec<&str> = buf.split_whitespace().filter(|t| t.chars().any(char::is_alphanumeric)).collect();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let tok = raw[i];
        if let Some(n) = number_word(tok) {
            // "twenty one" -> 21
            if (n == 20 || n == 30) && i + 1 < raw.len() {
                if let Some(unit) = number_word(raw[i + 1]).filter(|u| (1..10).contains(u)) {
                    out.push((n + unit).to_string());
                    i += 2;
                    continue;
                }
            }
            out.push(n.to_string());
        } else if let Some(t) = canonical_time(tok) {
            out.push(t);
        } else {
            out.push(tok.to_string());
        }
        i += 1;
    }
    out
}

/// Matching form of a slot value joined back into a string.
pub fn normalize_value(v: &str) -> String {
    match_tokens(v).join(" ")
}

/// Start positions where `needle` occurs as a contiguous token run.
pub fn find_phrase(hay: &[String], needle: &[String]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len()).filter(|&i| hay[i..i + needle.len()] == *needle).collect()
}

pub fn contains_phrase(hay: &[String], needle: &[String]) -> bool {
    !find_phrase(hay, needle).is_empty()
}

/// Rough token count used for context-budget checks (four characters per token).
pub fn estimate_tokens(s: &str) -> usize {
    s.chars().count().div_ceil(4)
}
