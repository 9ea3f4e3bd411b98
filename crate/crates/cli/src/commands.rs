use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;
use serde_json::json;
use todsim::corpus::{load_seed_corpus, LoadMode};
use todsim::simulator::{augment_corpus, dialogues, simulate_batch, AugmentOptions, BatchOptions, SimContext};
use todsim::stats::compute_stats;
use todsim::validate::{validate_corpus, Finding};
use todsim::{save_corpus, Dialogue};

use crate::config::RunConfig;
use crate::{AugmentArgs, CliError, InspectArgs, SimulateArgs};

/// Failure kinds raised before or after the completion call, not by it.
const NON_BACKEND_KINDS: [&str; 6] = ["parse", "prompt", "aux", "db", "exemplar", "goal"];

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output { path: path.display().to_string(), message: e.to_string() }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| write_err(path, e))
}

fn save(corpus: &[Dialogue], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => save_corpus(corpus, p).map_err(|e| write_err(p, e)),
        None => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

/// Exit 3 when every failure came from the backend, otherwise 4.
fn empty_result(failures: &BTreeMap<String, usize>, backend_kind: impl Fn(&str) -> bool) -> CliError {
    let summary = failures.iter().map(|(k, n)| format!("{k}={n}")).collect::<Vec<_>>().join(", ");
    if !failures.is_empty() && failures.keys().all(|k| backend_kind(k)) {
        CliError::Backend(summary)
    } else {
        CliError::Empty(if summary.is_empty() { "nothing attempted".into() } else { summary })
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common, args.strategy)?;
    let base = cfg.load_ontology()?;
    let (seeds, ontology) = cfg.load_seeds(base)?;
    let db = cfg.load_db(&ontology)?;
    let rules = cfg.rules();
    let aux = cfg.aux_predictor(&ontology)?;
    let backend = cfg.completion_backend()?;
    let ctx =
        SimContext { ontology: &ontology, seeds: &seeds, db: &db, aux: aux.as_ref(), rules: &rules, cfg: &cfg.gen };
    let opts = BatchOptions {
        n: args.num as usize,
        strategy: cfg.strategy.clone(),
        distribution: cfg.distribution.clone(),
        seed: cfg.seed,
        workers: cfg.workers,
        id_prefix: "sim".into(),
    };

    let done = AtomicUsize::new(0);
    let progress = |i: usize, status: &str| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        eprintln!("[{k}/{}] sim-{i:05} {status}", opts.n);
    };
    let (outcomes, report) = simulate_batch(&opts, &ctx, backend.as_ref(), &progress);

    if let Some(p) = &args.trace {
        let mut w = BufWriter::new(File::create(p).map_err(|e| write_err(p, e))?);
        for t in outcomes.iter().flat_map(|o| &o.trace) {
            serde_json::to_writer(&mut w, t).map_err(|e| write_err(p, e))?;
            w.write_all(b"\n").map_err(|e| write_err(p, e))?;
        }
        w.flush().map_err(|e| write_err(p, e))?;
    }
    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }
    let corpus = dialogues(&outcomes);
    save(&corpus, args.output.as_deref())?;

    if args.common.json {
        print_json(&report);
    } else {
        println!("simulated {}/{} dialogues, {} turns", report.succeeded, report.requested, report.turns);
        for (status, n) in &report.statuses {
            println!("  {status:?}: {n}");
        }
        for f in &report.failures {
            println!("  {} failed ({}): {}", f.id, f.kind, f.message);
        }
    }
    if corpus.is_empty() {
        return Err(empty_result(&report.failures_by_kind, |k| !NON_BACKEND_KINDS.contains(&k)));
    }
    Ok(())
}

pub fn augment_dst(args: &AugmentArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.common, None)?;
    let base = cfg.load_ontology()?;
    let (seeds, ontology) = cfg.load_seeds(base)?;
    let backend = cfg.completion_backend()?;
    let opts = AugmentOptions { passes: args.passes as usize, seed: cfg.seed, workers: cfg.workers };
    eprintln!("augmenting {} seed dialogues, {} pass(es)", seeds.len(), opts.passes);
    let (corpus, report) = augment_corpus(&seeds, &ontology, backend.as_ref(), &cfg.gen, &opts);

    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }
    save(&corpus, args.output.as_deref())?;
    if args.common.json {
        print_json(&report);
    } else {
        println!(
            "accepted {}/{} turns ({} rejected, {} unaugmentable, {} failed)",
            report.accepted, report.attempted, report.rejected, report.unaugmentable, report.failed
        );
        for p in &report.problems {
            println!("  {p}");
        }
    }
    if corpus.is_empty() {
        return Err(empty_result(&report.failures_by_kind, |k| k == "backend"));
    }
    Ok(())
}

fn load_inspected(args: &InspectArgs) -> Result<(RunConfig, todsim::Ontology, todsim::SeedDataset), CliError> {
    let cfg = RunConfig::resolve(&args.common, None)?;
    let ontology = cfg.load_ontology()?;
    if !args.corpus.is_file() {
        return Err(CliError::Config(format!("corpus: {} does not exist", args.corpus.display())));
    }
    let corpus = load_seed_corpus(&args.corpus, &ontology, LoadMode::Lenient)
        .map_err(|e| CliError::Config(format!("corpus: {e}")))?;
    Ok((cfg, ontology, corpus))
}

pub fn stats(args: &InspectArgs) -> Result<(), CliError> {
    let (_, _, corpus) = load_inspected(args)?;
    for issue in &corpus.issues {
        log::warn!("{} turn {:?}: {}", issue.dialogue, issue.turn, issue.message);
    }
    let s = compute_stats(&corpus.dialogues);
    if args.common.json {
        print_json(&s);
    } else {
        println!("dialogues        {}", s.total_dialogues);
        println!("turns            {}", s.total_turns);
        println!("domains          {}", s.total_domains);
        println!("avg turns        {:.2}", s.avg_turns);
        println!("avg domains      {:.2}", s.avg_domains);
        println!("tokens           {} ({} system)", s.text.total_tokens, s.system_text.total_tokens);
        println!("unique tokens    {} ({} system)", s.text.unique_tokens, s.system_text.unique_tokens);
        println!("unique 3-grams   {} ({} system)", s.text.unique_3grams, s.system_text.unique_3grams);
    }
    Ok(())
}

pub fn validate(args: &InspectArgs) -> Result<(), CliError> {
    let (cfg, ontology, corpus) = load_inspected(args)?;
    let mut report = validate_corpus(&corpus.dialogues, &ontology, &cfg.rules(), cfg.gen.max_turns);
    // Triples the lenient loader dropped are violations too.
    let load_findings = corpus.issues.iter().map(|i| Finding {
        dialogue: i.dialogue.clone(),
        turn: i.turn,
        check: "load",
        message: i.message.clone(),
    });
    report.violations.splice(0..0, load_findings);

    if args.common.json {
        print_json(&json!({ "ok": report.is_ok(), "report": report }));
    } else {
        for (label, list) in [("violation", &report.violations), ("warning", &report.warnings)] {
            for f in list {
                let at = f.turn.map(|t| format!(" turn {t}")).unwrap_or_default();
                println!("{label}: {}{at} [{}] {}", f.dialogue, f.check, f.message);
            }
        }
        println!(
            "{} dialogues, {} turns: {} violation(s), {} warning(s)",
            report.dialogues,
            report.turns,
            report.violations.len(),
            report.warnings.len()
        );
    }
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Violations(report.violations.len()))
    }
}
