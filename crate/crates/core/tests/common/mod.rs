#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;
use todsim::backend::{CompletionBackend, MockBackend, RecordingBackend, ReplayBackend};
use todsim::corpus::{load_seed_corpus, LoadMode, SeedDataset};
use todsim::database::EntityDb;
use todsim::format::parse_goal;
use todsim::model::{ActTriple, DbBucket, DialogAct, Dialogue, SlotTriple, SlotValues, TurnBelief, GENERAL, NONE};
use todsim::prompt::TurnExample;
use todsim::revision::{ActRuleSet, LexicalAuxPredictor};
use todsim::simulator::{simulate_dialogue_with_examples, DstAugSpec, LastActKind, SimContext, SimulationOutcome};
use todsim::{GenConfig, Ontology};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// Ontology with seed-observed values folded into the value pools.
pub struct World {
    pub ontology: Ontology,
    pub seeds: SeedDataset,
    pub db: EntityDb,
    pub aux: LexicalAuxPredictor,
    pub rules: ActRuleSet,
    pub cfg: GenConfig,
}

impl World {
    pub fn load() -> Self {
        let base = Ontology::from_path(data_dir().join("ontology.json")).expect("ontology");
        let seeds = load_seed_corpus(data_dir().join("seeds.json"), &base, LoadMode::Strict).expect("seeds");
        let ontology = base.with_observed_values(seeds.iter());
        let db = EntityDb::load_dir(data_dir().join("db"), &ontology).expect("db");
        let aux = LexicalAuxPredictor::new(&ontology);
        Self { ontology, seeds, db, aux, rules: ActRuleSet::default(), cfg: GenConfig::default() }
    }

    /// Shared instance; loading is the slow part of most tests.
    pub fn shared() -> &'static World {
        static WORLD: std::sync::OnceLock<World> = std::sync::OnceLock::new();
        WORLD.get_or_init(World::load)
    }

    pub fn ctx(&self) -> SimContext<'_> {
        SimContext {
            ontology: &self.ontology,
            seeds: &self.seeds,
            db: &self.db,
            aux: &self.aux,
            rules: &self.rules,
            cfg: &self.cfg,
        }
    }

    pub fn seed(&self, id: &str) -> &Dialogue {
        self.seeds.get(id).unwrap_or_else(|| panic!("seed {id}"))
    }
}

pub fn sv(items: &[(&str, &str, &str)]) -> SlotValues {
    SlotValues::from_triples(items.iter().map(|(d, s, v)| SlotTriple::new(*d, *s, *v)))
}

pub fn act(items: &[(&str, &str, &str)]) -> DialogAct {
    items.iter().map(|(d, a, s)| ActTriple::new(*d, *a, *s)).collect()
}

pub const REF_GOAL: &str =
    "[hotel] area is south , stay is 5 , people is 4 [train] destination is birmingham new street , arrive is 13:06";

/// Raw completions in call order: user, system, and a regenerated response
/// wherever the rules change the act (turn 1 only).
pub const REF_COMPLETIONS: [&str; 13] = [
    "[hotel] area is south , stay is 5 , people is 4): i need a hotel in the south side please .",
    "[hotel] [inform] area name internet price parking type stars [offerbook]): the [value_name] hotel is in the south side and it has [value_internet] . the price is [value_price] per night and it has [value_parking] . it is a [value_stars] star hotel .",
    "the [value_name] hotel is in the south side and it has [value_internet] . the price is [value_price] per night and it has [value_parking] . it is a [value_stars] star hotel .",
    "[hotel] stay is 5 , people is 4): i would like to to book it for 4 people and 5 nights.",
    "[hotel] [offerbooked] reference [general] [reqmore]): your booking reference number is [value_reference] .",
    "[train] destination is birmingham new street , arrive is 13:06): i need a train to birmingham new street station that arrives by 13:06 please .",
    "[train] [request] day departure): what day will you be leaving and what is your departure station ?",
    "[train] day is saturday , departure is cambridge): i will be leaving this saturday from cambridge station .",
    "[train] [inform] arrive id leave [offerbook]): the train arrives at [value_arrive] and the id is [value_id] . would you like me to book it for you ?",
    "[train]): no thank you . what is the cost of the ticket ?",
    "[train] [inform] price [general] [reqmore]): the ticket price is [value_price] . can i be of further assistance ?",
    "[general]): that is all for now . thanks",
    "[general] [bye]): you are welcome , please contact us if you need anything else .",
];

pub struct ExpectedTurn {
    pub belief: TurnBelief,
    pub bucket: DbBucket,
    pub act: DialogAct,
}

/// The six revised rows.
pub fn ref_expected() -> Vec<ExpectedTurn> {
    vec![
        ExpectedTurn {
            belief: sv(&[("hotel", "area", "south"), ("hotel", "type", "hotel")]),
            bucket: DbBucket::Db1,
            act: act(&[
                ("hotel", "inform", "area"),
                ("hotel", "inform", "name"),
                ("hotel", "inform", "internet"),
                ("hotel", "inform", "parking"),
                ("hotel", "inform", "type"),
                ("hotel", "inform", "stars"),
                ("hotel", "offerbook", NONE),
            ]),
        },
        ExpectedTurn {
            belief: sv(&[("hotel", "stay", "5"), ("hotel", "people", "4")]),
            bucket: DbBucket::Db1,
            act: act(&[("hotel", "offerbooked", "reference"), (GENERAL, "reqmore", NONE)]),
        },
        ExpectedTurn {
            belief: sv(&[("train", "destination", "birmingham new street"), ("train", "arrive", "13:06")]),
            bucket: DbBucket::Db3,
            act: act(&[("train", "request", "day"), ("train", "request", "departure")]),
        },
        ExpectedTurn {
            belief: sv(&[("train", "day", "saturday"), ("train", "departure", "cambridge")]),
            bucket: DbBucket::Db3,
            act: act(&[
                ("train", "inform", "arrive"),
                ("train", "inform", "id"),
                ("train", "inform", "leave"),
                ("train", "offerbook", NONE),
            ]),
        },
        ExpectedTurn {
            belief: sv(&[("train", NONE, NONE)]),
            bucket: DbBucket::Db3,
            act: act(&[("train", "inform", "price"), (GENERAL, "reqmore", NONE)]),
        },
        ExpectedTurn {
            belief: sv(&[(GENERAL, NONE, NONE)]),
            bucket: DbBucket::NoRes,
            act: act(&[(GENERAL, "bye", NONE)]),
        },
    ]
}

pub fn ref_run(world: &World, backend: &dyn CompletionBackend) -> SimulationOutcome {
    let goal = parse_goal(REF_GOAL).expect("goal");
    let examples = [world.seed("PMUL1576"), world.seed("SNG0955")];
    simulate_dialogue_with_examples("reference", &goal, &examples, &world.ctx(), backend).expect("simulation")
}

/// Records a scripted run into `path`.
pub fn record_ref(world: &World, path: &std::path::Path) {
    let _ = std::fs::remove_file(path);
    let rec = RecordingBackend::new(MockBackend::script(REF_COMPLETIONS), path).expect("recorder");
    ref_run(world, &rec);
}

pub fn ref_replay() -> ReplayBackend {
    ReplayBackend::from_path(fixture("reference_transcript.jsonl")).expect("transcript")
}

pub const DST_REF_UTTERANCE: &str =
    "please book me a room for 8 people on tuesday . we will be staying for 2 nights and would like a 3-star hotel .";

pub fn dst_ref_spec() -> DstAugSpec {
    DstAugSpec {
        source_id: "SNG01856".into(),
        turn_idx: 2,
        kind: LastActKind::Other,
        belief: sv(&[
            ("hotel", "people", "8"),
            ("hotel", "stars", "3"),
            ("hotel", "stay", "2"),
            ("hotel", "day", "tuesday"),
        ]),
        pass: 0,
    }
}

pub fn dst_ref_demos() -> Vec<TurnExample> {
    vec![
        TurnExample {
            source_id: "PMUL1576".into(),
            turn_idx: 3,
            belief: sv(&[("hotel", "day", "friday")]),
            utterance: "yes , please book me a room for friday .".into(),
        },
        TurnExample {
            source_id: "SNG1006".into(),
            turn_idx: 2,
            belief: sv(&[
                ("hotel", "type", "hotel"),
                ("hotel", "name", "gonville hotel"),
                ("hotel", "stay", "4"),
                ("hotel", "day", "saturday"),
                ("hotel", "people", "6"),
            ]),
            utterance: "okay , i would like to book a room at the gonville hotel for 4 nights . there will be 6 people and we will be arriving on saturday .".into(),
        },
    ]
}

/// Every (domain, slot, values) with a nonempty value pool.
pub fn slot_space(ontology: &Ontology) -> Vec<(String, String, Vec<String>)> {
    let mut out = Vec::new();
    for d in ontology.domain_names() {
        for s in ontology.informable_slots(d) {
            let pool = ontology.value_pool(d, s);
            if !pool.is_empty() {
                out.push((d.to_string(), s.to_string(), pool.to_vec()));
            }
        }
    }
    out
}

/// A random nonempty goal of up to 4 domains and 6 slots per domain.
pub fn random_goal<R: Rng>(ontology: &Ontology, rng: &mut R) -> SlotValues {
    let domains: Vec<&str> = ontology.domain_names().filter(|d| *d != GENERAL).collect();
    let n = rng.random_range(1..=4);
    let mut goal = SlotValues::new();
    for d in domains.choose_multiple(rng, n) {
        let slots: Vec<&str> =
            ontology.informable_slots(d).into_iter().filter(|s| !ontology.value_pool(d, s).is_empty()).collect();
        if slots.is_empty() {
            continue;
        }
        let k = rng.random_range(1..=slots.len().min(6));
        for s in slots.choose_multiple(rng, k) {
            let v = ontology.value_pool(d, s).choose(rng).expect("nonempty");
            goal.insert(d, s, v);
        }
    }
    if goal.is_empty() {
        goal.insert("hotel", "area", "north");
    }
    goal
}

/// Like `random_goal` but may include domain-only and `general` entries.
pub fn random_belief<R: Rng>(ontology: &Ontology, rng: &mut R) -> SlotValues {
    let mut b = random_goal(ontology, rng);
    if rng.random_bool(0.3) {
        let d = *ontology.domain_names().filter(|d| *d != GENERAL).collect::<Vec<_>>().choose(rng).expect("domains");
        if !b.contains_domain(d) {
            b.insert_domain(d);
        }
    }
    if rng.random_bool(0.2) {
        b.insert_domain(GENERAL);
    }
    b
}

pub fn random_act<R: Rng>(ontology: &Ontology, rng: &mut R) -> DialogAct {
    let mut out = DialogAct::new();
    for _ in 0..rng.random_range(1..=6) {
        let domains: Vec<(&str, &todsim::ontology::DomainSchema)> = ontology.domains().collect();
        let (d, schema) = domains.choose(rng).expect("domains");
        let acts: Vec<&String> = schema.acts.iter().collect();
        let Some(a) = acts.choose(rng) else { continue };
        let mut slots: Vec<String> = schema.informable.keys().cloned().collect();
        slots.extend(schema.requestable.iter().cloned());
        let slot = if *d == GENERAL || slots.is_empty() || rng.random_bool(0.3) {
            NONE.to_string()
        } else {
            slots.choose(rng).expect("slots").clone()
        };
        out.push(d, a, &slot);
    }
    out
}
