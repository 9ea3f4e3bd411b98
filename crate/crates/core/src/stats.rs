//! Corpus statistics and the end-to-end combined score.

use std::collections::HashSet;

use serde::Serialize;

use crate::model::{Dialogue, GENERAL};

/// Counts over one text view of a corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TextStats {
    pub total_tokens: usize,
    pub unique_tokens: usize,
    pub unique_3grams: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total_dialogues: usize,
    /// User/system exchanges.
    pub total_turns: usize,
    /// Distinct non-general goal domains, summed over dialogues.
    pub total_domains: usize,
    pub avg_turns: f64,
    pub avg_domains: f64,
    /// Both speakers.
    pub text: TextStats,
    pub system_text: TextStats,
}

#[derive(Default)]
struct TextAcc<'a> {
    total: usize,
    tokens: HashSet<&'a str>,
    trigrams: HashSet<[&'a str; 3]>,
}

impl<'a> TextAcc<'a> {
    fn add(&mut self, utterance: &'a str) {
        let toks: Vec<&str> = utterance.split_whitespace().collect();
        self.total += toks.len();
        for w in toks.windows(3) {
            self.trigrams.insert([w[0], w[1], w[2]]);
        }
        self.tokens.extend(toks);
    }

    fn finish(self) -> TextStats {
        TextStats { total_tokens: self.total, unique_tokens: self.tokens.len(), unique_3grams: self.trigrams.len() }
    }
}

/// Averages are `total / dialogues`; an empty corpus gives all zeros.
pub fn averages(total_turns: usize, total_domains: usize, dialogues: usize) -> (f64, f64) {
    if dialogues == 0 {
        return (0.0, 0.0);
    }
    (total_turns as f64 / dialogues as f64, total_domains as f64 / dialogues as f64)
}

/// Tokens are whitespace-split; 3-grams never cross utterances.
pub fn compute_stats(corpus: &[Dialogue]) -> CorpusStats {
    let mut both = TextAcc::default();
    let mut system = TextAcc::default();
    let mut total_turns = 0;
    let mut total_domains = 0;
    for d in corpus {
        total_turns += d.turns.len();
        total_domains += d.goal().domains().filter(|dom| *dom != GENERAL).count();
        for t in &d.turns {
            both.add(&t.user_utterance);
            both.add(&t.system_response);
            system.add(&t.system_response);
        }
    }
    let (avg_turns, avg_domains) = averages(total_turns, total_domains, corpus.len());
    CorpusStats {
        total_dialogues: corpus.len(),
        total_turns,
        total_domains,
        avg_turns,
        avg_domains,
        text: both.finish(),
        system_text: system.finish(),
    }
}

/// `bleu + 0.5 * (inform + success)`.
pub fn combined_score(inform: f64, success: f64, bleu: f64) -> f64 {
    bleu + 0.5 * (inform + success)
}
