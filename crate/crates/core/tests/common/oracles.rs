//! Independent oracles shared by the integration tests.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use todsim::model::{DONTCARE, GENERAL, NONE};
use todsim::revision::filter_with_drops;
use todsim::simulator::{classify_last_act, generate_turn_belief, DstError, LastActKind};
use todsim::{DialogAct, Dialogue, SlotValues, Turn, TurnBelief};

use super::{random_belief, World};

/// Set-by-set oracle written against the raw map.
pub fn oracle_similarity(a: &SlotValues, b: &SlotValues) -> f64 {
    let domains = |g: &SlotValues| g.domains().map(str::to_owned).collect::<HashSet<String>>();
    let slots = |g: &SlotValues| {
        g.entries().flat_map(|(d, s)| s.keys().map(move |k| format!("{d}\u{1}{k}"))).collect::<HashSet<String>>()
    };
    let j = |x: HashSet<String>, y: HashSet<String>| {
        let inter = x.iter().filter(|e| y.contains(*e)).count();
        let union = x.len() + y.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    };
    j(domains(a), domains(b)) * j(slots(a), slots(b))
}

pub fn naive_softmax(w: &[f64], tau: f64) -> Vec<f64> {
    let e: Vec<f64> = w.iter().map(|x| (x / tau).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub const NUMBERS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

pub const CUES: [&str; 15] = [
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

pub const FILLER: [&str; 24] = [
    "i", "need", "a", "place", "please", ".", ",", "?", "no", "not", "with", "but", "parking", "wifi", "internet",
    "free", "any", "cheap", "north", "3", "four", "10:30", "the", "and",
];

/// Oracle normalization: lowercase, split on whitespace and hyphens, strip
/// edge punctuation, number words to digits, `h:mm` padded.
pub fn oracle_tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '-')
        .flat_map(|w| {
            let w = w.trim_matches(|c: char| matches!(c, '.' | ',' | '?' | '!' | ';' | '"'));
            // possessive and contraction split
            match w.find('\'') {
                Some(i) if i > 0 => vec![w[..i].to_string(), w[i..].to_string()],
                _ => vec![w.to_string()],
            }
        })
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .map(|w| {
            if let Some(n) = NUMBERS.iter().position(|x| *x == w) {
                return n.to_string();
            }
            if let Some((h, m)) = w.split_once(':') {
                if h.len() == 1 && m.len() == 2 && h.chars().chain(m.chars()).all(|c| c.is_ascii_digit()) {
                    return format!("0{h}:{m}");
                }
            }
            w
        })
        .collect()
}

pub fn contains(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Necessary condition for a triple to be expressed in `utt`.
pub fn expressed(slot: &str, value: &str, utt: &str) -> bool {
    let toks = oracle_tokens(utt);
    if value == DONTCARE {
        return CUES.iter().any(|c| contains(&toks, &oracle_tokens(c)));
    }
    let keywords: &[&str] = match slot {
        "parking" => &["parking"],
        "internet" => &["internet", "wifi", "wi fi"],
        _ => &[],
    };
    if !keywords.is_empty() && matches!(value, "yes" | "no" | "free") {
        let present = keywords.iter().any(|k| contains(&toks, &oracle_tokens(k)));
        let negation = toks.iter().any(|t| matches!(t.as_str(), "no" | "not" | "without" | "dont" | "'t" | "nt"));
        return present && (value != "no" || negation);
    }
    contains(&toks, &oracle_tokens(value))
}

/// Renders a value the way a user might say it.
pub fn surface<R: Rng>(value: &str, rng: &mut R) -> String {
    if let Ok(n) = value.parse::<usize>() {
        if n <= 20 && rng.random_bool(0.5) {
            return NUMBERS[n].to_string();
        }
    }
    if let Some(rest) = value.strip_prefix('0') {
        if rest.contains(':') && rng.random_bool(0.5) {
            return rest.to_string();
        }
    }
    value.to_string()
}

pub fn fuzz_pair<R: Rng>(w: &World, rng: &mut R) -> (TurnBelief, String) {
    let mut belief = random_belief(&w.ontology, rng);
    if rng.random_bool(0.1) {
        let t = belief.slot_triples().next().expect("nonempty");
        belief.insert(&t.domain, &t.slot, DONTCARE);
    }
    let mut pieces: Vec<String> = Vec::new();
    for t in belief.slot_triples() {
        if rng.random_bool(0.5) {
            pieces.push(surface(&t.value, rng));
        }
    }
    for _ in 0..rng.random_range(0..10) {
        pieces.push(FILLER.choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.1) {
        pieces.push(CUES.choose(rng).unwrap().to_string());
    }
    pieces.shuffle(rng);
    (belief, pieces.join(" "))
}

pub fn check_pair(belief: &TurnBelief, utt: &str) {
    let (kept, dropped) = filter_with_drops(belief, utt);
    for t in kept.slot_triples() {
        if t.domain == GENERAL || t.slot == NONE {
            continue;
        }
        assert!(expressed(&t.slot, &t.value, utt), "kept {t} for `{utt}`");
    }
    // Nothing invented, nothing lost without a trace.
    assert_eq!(kept.slot_count() + dropped.len(), belief.slot_count(), "`{utt}`");
    for t in &dropped {
        assert_eq!(belief.get(&t.domain, &t.slot), Some(t.value.as_str()));
    }
    let (again, none) = filter_with_drops(&kept, utt);
    assert_eq!(again, kept);
    assert!(none.is_empty());
}

pub fn last_act(d: &Dialogue, turn: usize) -> DialogAct {
    if turn == 0 {
        DialogAct::new()
    } else {
        d.turns[turn - 1].act.clone()
    }
}

pub fn mentioned(d: &Dialogue, turn: usize) -> BTreeSet<(String, String)> {
    d.turns[..turn].iter().flat_map(|t| t.belief.slot_triples()).map(|t| (t.domain, t.slot)).collect()
}

pub fn single_domain(b: &TurnBelief) -> (String, Vec<String>) {
    let domains: Vec<&str> = b.domains().collect();
    assert_eq!(domains.len(), 1, "{b:?}");
    (domains[0].to_string(), b.slot_triples().map(|t| t.slot).collect())
}

/// Checks one draw against the cardinality rules for its kind.
pub fn check(w: &World, d: &Dialogue, turn: usize, kind: LastActKind, b: &TurnBelief) {
    let seen = mentioned(d, turn);
    let (dom, slots) = single_domain(b);
    assert_ne!(dom, GENERAL);
    for t in b.slot_triples() {
        assert!(w.ontology.value_pool(&t.domain, &t.slot).contains(&t.value), "{t}");
    }
    let unmentioned = |s: &String| !seen.contains(&(dom.clone(), s.clone()));
    match kind {
        LastActKind::Request => {
            let requested: BTreeSet<String> = last_act(d, turn)
                .iter()
                .filter(|a| a.act == "request" && a.domain == dom)
                .map(|a| a.slot.clone())
                .collect();
            let n_req = slots.iter().filter(|s| requested.contains(*s)).count();
            let others: Vec<&String> = slots.iter().filter(|s| !requested.contains(*s)).collect();
            assert!(n_req >= 1);
            assert!(others.len() >= 2);
            assert!(others.iter().all(|s| unmentioned(s)));
            assert!(slots.len() <= 6);
        }
        LastActKind::Reqmore => {
            assert!(d.turns[..turn].iter().all(|t| !t.belief.contains_domain(&dom)));
            assert!((1..=4).contains(&slots.len()));
        }
        LastActKind::Other => {
            let orig: BTreeSet<String> =
                d.turns[turn].belief.domain(&dom).map(|s| s.keys().cloned().collect()).unwrap_or_default();
            let dropped = orig.iter().filter(|s| !slots.contains(s)).count();
            let added: Vec<&String> = slots.iter().filter(|s| !orig.contains(*s)).collect();
            assert!(dropped >= 1, "{} turn {turn}", d.id);
            assert!(!added.is_empty());
            assert!(slots.iter().all(unmentioned));
        }
    }
}

pub fn draws_for(kind: LastActKind, seed: u64, draws: usize) -> usize {
    let w = World::shared();
    let sites: Vec<(&Dialogue, usize)> = w
        .seeds
        .iter()
        .flat_map(|d| (0..d.turns.len()).map(move |t| (d, t)))
        .filter(|(d, t)| classify_last_act(&last_act(d, *t)) == kind)
        .collect();
    assert!(!sites.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for i in 0..draws {
        let (d, t) = sites[i % sites.len()];
        match generate_turn_belief(d, t, &w.ontology, &mut rng) {
            Ok((b, k)) => {
                assert_eq!(k, kind);
                check(w, d, t, k, &b);
                ok += 1;
            }
            Err(DstError::Unaugmentable(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
    ok
}

pub const VOCAB: [&str; 8] = ["a", "b", "c", "d", "[value_name]", ".", "?", "hotel"];

pub fn utterance<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(0..7);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn random_corpus<R: Rng>(rng: &mut R) -> Vec<Dialogue> {
    let domains = ["hotel", "train", "taxi", "general"];
    let n = rng.random_range(0..6);
    (0..n)
        .map(|i| {
            let mut goal = SlotValues::new();
            let k = rng.random_range(1..=4);
            for d in domains.choose_multiple(rng, k) {
                goal.insert(d, "area", "north");
            }
            let n = rng.random_range(0..5);
            let turns = (0..n)
                .map(|_| Turn::annotated(&utterance(rng), SlotValues::new(), DialogAct::new(), &utterance(rng)))
                .collect();
            Dialogue::seed(&format!("s{i}"), goal, turns)
        })
        .collect()
}

/// Counts by explicit enumeration over utterance strings.
pub fn ngram_oracle(corpus: &[Dialogue], system_only: bool) -> (usize, usize, usize) {
    let mut total = 0;
    let mut uniq = BTreeSet::new();
    let mut grams = BTreeSet::new();
    for d in corpus {
        for t in &d.turns {
            let texts: Vec<&String> =
                if system_only { vec![&t.system_response] } else { vec![&t.user_utterance, &t.system_response] };
            for text in texts {
                let toks: Vec<String> = text.split(' ').filter(|s| !s.is_empty()).map(String::from).collect();
                total += toks.len();
                for i in 0..toks.len() {
                    uniq.insert(toks[i].clone());
                    if i + 2 < toks.len() {
                        grams.insert(format!("{} {} {}", toks[i], toks[i + 1], toks[i + 2]));
                    }
                }
            }
        }
    }
    (total, uniq.len(), grams.len())
}
