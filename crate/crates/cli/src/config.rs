//! Run configuration: flags over `--config` over defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use todsim::backend::{
    CompletionBackend, HttpBackend, HttpConfig, MockBackend, MockMode, RecordingBackend, ReplayBackend,
};
use todsim::corpus::{load_seed_corpus, LoadMode, SeedDataset};
use todsim::database::EntityDb;
use todsim::goal::{GoalStrategy, RsDistribution};
use todsim::revision::{
    ActRuleSet, AuxPredictor, DenyRule, ExternalAuxPredictor, ExternalTransport, LexicalAuxPredictor, NoAux,
};
use todsim::{DecodeParams, GenConfig, Ontology};

use crate::{AuxKind, BackendKind, CliError, CommonArgs, MockKind, StrategyName};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub ontology: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub db_dir: Option<PathBuf>,
    pub strict_db: Option<bool>,
    pub strategy: Option<GoalStrategy>,
    pub goal_distribution: Option<RsDistribution>,
    pub generation: Option<GenConfig>,
    pub decode_preset: Option<String>,
    pub backend: BackendFile,
    pub aux: AuxFile,
    pub deny_rules: Vec<DenyRule>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendFile {
    pub kind: Option<String>,
    pub transcript: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub mock_mode: Option<String>,
    pub http: Option<HttpConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxFile {
    pub kind: Option<String>,
    pub transport: Option<ExternalTransport>,
}

/// Merged settings. Paths are checked when loaded, before any backend call.
#[derive(Debug)]
pub struct RunConfig {
    pub ontology: PathBuf,
    pub seeds: PathBuf,
    pub db_dir: PathBuf,
    pub strict_db: bool,
    pub strategy: GoalStrategy,
    pub distribution: RsDistribution,
    pub gen: GenConfig,
    pub backend: BackendKind,
    pub transcript: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub mock: MockKind,
    pub http: HttpConfig,
    pub aux: AuxKind,
    pub aux_transport: Option<ExternalTransport>,
    pub deny_rules: Vec<DenyRule>,
    pub workers: usize,
    pub seed: u64,
}

fn config_err(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{flag}: {msg}"))
}

/// Config files may spell values in snake_case.
fn parse_enum<T: clap::ValueEnum>(flag: &str, s: &str) -> Result<T, CliError> {
    T::from_str(&s.replace('_', "-"), true).map_err(|_| config_err(flag, format!("unknown value `{s}`")))
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, strategy: Option<StrategyName>) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| config_err("--config", format!("{}: {e}", p.display())))?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| config_err("--config", format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };

        let mut gen = file.generation.unwrap_or_default();
        if let Some(name) = args.decode_preset.as_ref().or(file.decode_preset.as_ref()) {
            gen.decode = DecodeParams::preset(name)
                .ok_or_else(|| config_err("--decode-preset", format!("unknown preset `{name}`")))?;
        }
        if let Some(n) = args.max_turns {
            gen.max_turns = n as usize;
        }
        if let Some(n) = args.n_shots {
            gen.n_shots = n as usize;
        }
        if let Some(r) = args.retries {
            gen.retries = r;
        }
        gen.validate().map_err(|e| config_err("--config", e))?;

        let strategy = match strategy {
            Some(StrategyName::Random) => GoalStrategy::RandomSampling,
            Some(StrategyName::Substitution) => GoalStrategy::ValueSubstitution,
            Some(StrategyName::Combination) => GoalStrategy::combination(),
            None => file.strategy.unwrap_or_else(GoalStrategy::combination),
        };
        let distribution = file.goal_distribution.unwrap_or_default();
        distribution.validate().map_err(|e| config_err("--config", e))?;

        let backend = match (args.backend, &file.backend.kind) {
            (Some(b), _) => b,
            (None, Some(k)) => parse_enum("--backend", k)?,
            (None, None) => BackendKind::Live,
        };
        let mock = match (args.mock_mode, &file.backend.mock_mode) {
            (Some(m), _) => m,
            (None, Some(k)) => parse_enum("--mock-mode", k)?,
            (None, None) => MockKind::GoalFollower,
        };
        let mut http = file.backend.http.unwrap_or_default();
        if let Some(e) = &args.endpoint {
            http.endpoint = e.clone();
        }
        if let Some(m) = &args.model {
            http.model = m.clone();
        }

        let aux = match (args.aux, &file.aux.kind) {
            (Some(a), _) => a,
            (None, Some(k)) => parse_enum("--aux", k)?,
            (None, None) => AuxKind::Lexical,
        };
        let aux_transport = match (&args.aux_command, &args.aux_url) {
            (Some(_), Some(_)) => return Err(config_err("--aux-command", "conflicts with --aux-url")),
            (Some(c), None) => Some(ExternalTransport::Subprocess { command: c.clone() }),
            (None, Some(u)) => Some(ExternalTransport::Http { url: u.clone(), timeout_secs: 30 }),
            (None, None) => file.aux.transport,
        };
        if aux == AuxKind::External && aux_transport.is_none() {
            return Err(config_err("--aux", "`external` needs --aux-command or --aux-url"));
        }

        Ok(Self {
            ontology: args.ontology.clone().or(file.ontology).unwrap_or_else(|| "data/ontology.json".into()),
            seeds: args.seeds.clone().or(file.seeds).unwrap_or_else(|| "data/seeds.json".into()),
            db_dir: args.db_dir.clone().or(file.db_dir).unwrap_or_else(|| "data/db".into()),
            strict_db: args.strict_db || file.strict_db.unwrap_or(false),
            strategy,
            distribution,
            seed: args.seed.or(file.seed).or(gen.rng_seed).unwrap_or(0),
            gen,
            backend,
            transcript: args.transcript.clone().or(file.backend.transcript),
            record: args.record.clone().or(file.backend.record),
            mock,
            http,
            aux,
            aux_transport,
            deny_rules: file.deny_rules,
            workers: args.workers.or(file.workers).unwrap_or(0),
        })
    }

    pub fn load_ontology(&self) -> Result<Ontology, CliError> {
        require_file("--ontology", &self.ontology)?;
        Ontology::from_path(&self.ontology).map_err(|e| config_err("--ontology", e))
    }

    /// Seeds, and the ontology with seed values folded into its pools.
    pub fn load_seeds(&self, base: Ontology) -> Result<(SeedDataset, Ontology), CliError> {
        require_file("--seeds", &self.seeds)?;
        let seeds = load_seed_corpus(&self.seeds, &base, LoadMode::Strict).map_err(|e| config_err("--seeds", e))?;
        if seeds.is_empty() {
            return Err(config_err("--seeds", format!("{} has no dialogues", self.seeds.display())));
        }
        let ontology = base.with_observed_values(seeds.iter());
        Ok((seeds, ontology))
    }

    pub fn load_db(&self, ontology: &Ontology) -> Result<EntityDb, CliError> {
        if !self.db_dir.is_dir() {
            return Err(config_err("--db-dir", format!("{} is not a directory", self.db_dir.display())));
        }
        let mut db = EntityDb::load_dir(&self.db_dir, ontology).map_err(|e| config_err("--db-dir", e))?;
        db.strict = self.strict_db;
        Ok(db)
    }

    pub fn rules(&self) -> ActRuleSet {
        let mut rules = ActRuleSet::default();
        for r in &self.deny_rules {
            rules.push(Box::new(r.clone()));
        }
        rules
    }

    pub fn aux_predictor(&self, ontology: &Ontology) -> Result<Box<dyn AuxPredictor>, CliError> {
        Ok(match self.aux {
            AuxKind::Lexical => Box::new(LexicalAuxPredictor::new(ontology)),
            AuxKind::None => Box::new(NoAux),
            AuxKind::External => {
                let t = self.aux_transport.as_ref().expect("checked in resolve");
                Box::new(ExternalAuxPredictor::new(t, ontology).map_err(|e| CliError::Backend(e.to_string()))?)
            }
        })
    }

    pub fn completion_backend(&self) -> Result<Box<dyn CompletionBackend>, CliError> {
        let inner: Box<dyn CompletionBackend> = match self.backend {
            BackendKind::Mock => Box::new(MockBackend::new(match self.mock {
                MockKind::GoalFollower => MockMode::GoalFollower,
                MockKind::NeverBye => MockMode::NeverBye,
            })),
            BackendKind::Replay => {
                let path = self
                    .transcript
                    .as_ref()
                    .ok_or_else(|| config_err("--transcript", "required by --backend replay"))?;
                require_file("--transcript", path)?;
                Box::new(ReplayBackend::from_path(path).map_err(|e| config_err("--transcript", e))?)
            }
            BackendKind::Live => {
                let backend = HttpBackend::new(self.http.clone()).map_err(|e| CliError::Backend(e.to_string()))?;
                if std::env::var(todsim::backend::API_KEY_ENV).map_or(true, |k| k.is_empty()) {
                    return Err(config_err(
                        "--backend",
                        format!("live backend needs {}", todsim::backend::API_KEY_ENV),
                    ));
                }
                Box::new(backend)
            }
        };
        Ok(match &self.record {
            Some(path) => Box::new(RecordingBackend::new(inner, path).map_err(|e| config_err("--record", e))?),
            None => inner,
        })
    }
}

fn require_file(flag: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_err(flag, format!("{} does not exist", path.display())))
    }
}
