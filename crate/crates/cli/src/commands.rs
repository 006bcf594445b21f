use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

use absurd_world::analysis::{
    emit_report, entropy_report, ttest_table, ReportInput, ReportManifest,
};
use absurd_world::fixtures::{fixture_suite, AccuracyTable, ReplayBackend};
use absurd_world::generator::{
    assemble_few_shot_batch, generate_batch, Mode, PromptInstance, QuerySource,
};
use absurd_world::harness::journal::{read_jsonl, write_jsonl};
use absurd_world::harness::{
    read_journal, run_suite, Backend, ChatBackend, MockAgent, MockBackend, ModelSpec, RunRecord,
};
use absurd_world::scoring::{
    category_averages, expected_labels, score_runs, select_fewshot_pool, ScoreTable,
};
use absurd_world::seed::{hash_str, mix};
use absurd_world::world::WorldDefinition;

use crate::config::{QueryKind, RunConfig};

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

pub type CmdResult = Result<(), Failure>;

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            exit_code: EXIT_USAGE,
            error: e.into(),
        })
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            exit_code: EXIT_RUNTIME,
            error: e.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Live,
    RuleFollower,
    PriorBiased,
    /// Replays per-model accuracy tables; `None` uses the shipped ones.
    Fixture(Option<PathBuf>),
}

impl std::str::FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(BackendChoice::Live),
            "mock:rule-follower" => Ok(BackendChoice::RuleFollower),
            "mock:prior-biased" => Ok(BackendChoice::PriorBiased),
            "fixture" => Ok(BackendChoice::Fixture(None)),
            _ => match s.strip_prefix("fixture:") {
                Some(dir) if !dir.is_empty() => Ok(BackendChoice::Fixture(Some(dir.into()))),
                _ => Err(format!(
                    "unknown backend `{s}` (expected live, mock:rule-follower, \
                     mock:prior-biased, fixture or fixture:DIR)"
                )),
            },
        }
    }
}

pub fn batch_path(cfg: &RunConfig, ruleset: &str, mode: Mode) -> PathBuf {
    cfg.batch_dir()
        .join(format!("{ruleset}.{}.jsonl", mode.file_tag()))
}

/// Per-ruleset seed. Keyed by name so adding a ruleset leaves the others'
/// batches unchanged.
pub fn ruleset_seed(master: u64, ruleset: &str) -> u64 {
    mix(master ^ hash_str(ruleset))
}

fn fewshot_seed(master: u64, ruleset: &str) -> u64 {
    mix(ruleset_seed(master, ruleset) ^ 0x0066_6577_5f73_686f)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_batch(cfg: &RunConfig, ruleset: &str, mode: Mode) -> anyhow::Result<Vec<PromptInstance>> {
    let path = batch_path(cfg, ruleset, mode);
    if !path.exists() {
        let hint = match mode {
            Mode::ZeroShot => "absurd generate",
            Mode::FewShot => "absurd select-fewshot",
        };
        bail!("missing batch {} (run `{hint}` first)", path.display());
    }
    Ok(read_jsonl(&path)?)
}

/// Every batch of the configured rulesets that exists on disk.
fn load_existing_batches(cfg: &RunConfig, rulesets: &[String]) -> anyhow::Result<Vec<PromptInstance>> {
    let mut out = Vec::new();
    for r in rulesets {
        for mode in [Mode::ZeroShot, Mode::FewShot] {
            if batch_path(cfg, r, mode).exists() {
                out.extend(load_batch(cfg, r, mode)?);
            }
        }
    }
    Ok(out)
}

pub fn cmd_worlds(cfg: &RunConfig) -> CmdResult {
    let mut worlds = vec![
        WorldDefinition::builtin("soccer").runtime()?,
        WorldDefinition::builtin("doors").runtime()?,
    ];
    if cfg.world_file.is_some() {
        worlds.push(cfg.world().usage()?);
    }
    for w in worlds {
        println!("{} (oracle {})", w.spec.world_id, w.spec.oracle_id);
        for v in &w.variants {
            let tags: Vec<String> = v
                .change_tags
                .iter()
                .map(|t| format!("{t:?}").to_uppercase())
                .collect();
            println!("  {:<16} [{}] {}", v.name, tags.join(","), v.description);
        }
    }
    Ok(())
}

pub fn cmd_generate(cfg: &RunConfig) -> CmdResult {
    let world = cfg.world().usage()?;
    let rulesets = cfg.ruleset_names(&world).usage()?;
    create_dir(&cfg.batch_dir()).runtime()?;
    let mut total = 0;
    for r in &rulesets {
        let variant = world.variant(r).usage()?;
        let batch = generate_batch(
            &world.spec,
            variant,
            cfg.prompts_per_ruleset,
            ruleset_seed(cfg.master_seed, r),
        )
        .runtime()?;
        let path = batch_path(cfg, r, Mode::ZeroShot);
        write_jsonl(&path, &batch).runtime()?;
        total += batch.len();
        println!("{}: {} prompts", path.display(), batch.len());
    }
    println!("generated {total} prompts across {} rulesets", rulesets.len());
    Ok(())
}

fn make_backend(
    choice: &BackendChoice,
    cfg: &RunConfig,
    prompts: &[PromptInstance],
    models: &[ModelSpec],
) -> anyhow::Result<Box<dyn Backend>> {
    Ok(match choice {
        BackendChoice::Live => Box::new(ChatBackend::from_env(&cfg.backend)?),
        BackendChoice::RuleFollower => Box::new(MockBackend::new(MockAgent::RuleFollower {
            error_rate: cfg.mock_error_rate,
        })),
        BackendChoice::PriorBiased => Box::new(MockBackend::new(MockAgent::PriorBiased)),
        BackendChoice::Fixture(dir) => {
            let (zero, few) = match dir {
                None => (AccuracyTable::zero_shot(), AccuracyTable::few_shot()),
                Some(d) => (
                    AccuracyTable::load(&d.join("per_model_zero_shot.csv"))?,
                    AccuracyTable::load(&d.join("per_model_few_shot.csv"))?,
                ),
            };
            Box::new(ReplayBackend::new(zero, few, prompts, models))
        }
    })
}

pub fn cmd_run(cfg: &RunConfig, mode: Mode, backend: &BackendChoice) -> CmdResult {
    let world = cfg.world().usage()?;
    let rulesets = cfg.ruleset_names(&world).usage()?;
    let mut prompts = Vec::new();
    for r in &rulesets {
        prompts.extend(load_batch(cfg, r, mode).runtime()?);
    }
    let models = cfg.models();
    let backend = make_backend(backend, cfg, &prompts, &models).runtime()?;
    let journal = cfg.journal();
    let summary = run_suite(&prompts, &models, &cfg.backend, &journal, backend.as_ref()).runtime()?;
    println!(
        "{}: {} pairs, {} written, {} already journaled, {} failed",
        journal.display(),
        summary.pairs,
        summary.written,
        summary.skipped,
        summary.failed
    );
    Ok(())
}

pub fn cmd_select_fewshot(cfg: &RunConfig) -> CmdResult {
    let world = cfg.world().usage()?;
    let rulesets = cfg.ruleset_names(&world).usage()?;
    let journal = cfg.journal();
    if !journal.exists() {
        return Err(anyhow!(
            "missing zero-shot journal {} (run `absurd run --mode zero-shot` first)",
            journal.display()
        ))
        .runtime();
    }
    let wanted: HashSet<&str> = rulesets.iter().map(String::as_str).collect();
    let records: Vec<RunRecord> = read_journal(&journal)
        .runtime()?
        .into_iter()
        .filter(|r| r.mode == Mode::ZeroShot && wanted.contains(r.ruleset_name.as_str()))
        .collect();
    if records.is_empty() {
        return Err(anyhow!("journal {} has no zero-shot records", journal.display())).runtime();
    }
    let pools = select_fewshot_pool(&records).runtime()?;

    let mut selected = BTreeMap::new();
    for r in &rulesets {
        let ids: HashSet<&String> = pools
            .get(r)
            .ok_or_else(|| anyhow!("no zero-shot records for ruleset {r}"))
            .runtime()?
            .iter()
            .collect();
        let batch = load_batch(cfg, r, Mode::ZeroShot).runtime()?;
        let pool: Vec<PromptInstance> = batch
            .into_iter()
            .filter(|p| ids.contains(&p.instance_id))
            .collect();
        let variant = world.variant(r).usage()?;
        let source = match cfg.fewshot_query_source {
            QueryKind::Pool => QuerySource::Pool,
            QueryKind::Fresh => QuerySource::Fresh {
                spec: &world.spec,
                variant,
            },
        };
        let fs = assemble_few_shot_batch(
            &pool,
            cfg.fewshot_count(),
            fewshot_seed(cfg.master_seed, r),
            source,
        )
        .runtime()?;
        let path = batch_path(cfg, r, Mode::FewShot);
        write_jsonl(&path, &fs).runtime()?;
        println!(
            "{r}: pool of {} prompts, {} few-shot prompts -> {}",
            pool.len(),
            fs.len(),
            path.display()
        );
        selected.insert(
            r.clone(),
            pool.iter().map(|p| p.instance_id.clone()).collect::<Vec<_>>(),
        );
    }
    let text = serde_json::to_string_pretty(&selected).runtime()?;
    std::fs::write(cfg.pools_path(), text + "\n")
        .with_context(|| format!("writing {}", cfg.pools_path().display()))
        .runtime()?;
    println!("wrote {}", cfg.pools_path().display());
    Ok(())
}

struct Scored {
    records: Vec<RunRecord>,
    prompts: Vec<PromptInstance>,
    table: ScoreTable,
}

fn score_journal(cfg: &RunConfig) -> Result<Scored, Failure> {
    let world = cfg.world().usage()?;
    let rulesets = cfg.ruleset_names(&world).usage()?;
    let journal = cfg.journal();
    let records = read_journal(&journal).runtime()?;
    if records.is_empty() {
        return Err(anyhow!("journal {} is empty", journal.display())).runtime();
    }
    let prompts = load_existing_batches(cfg, &rulesets).runtime()?;
    let table = score_runs(&records, &expected_labels(&prompts)).runtime()?;
    Ok(Scored {
        records,
        prompts,
        table,
    })
}

fn matrix_text(table: &ScoreTable, rulesets: &[String]) -> String {
    let mut s = String::new();
    let width = table.models().iter().map(|m| m.len()).max().unwrap_or(5).max(5);
    for mode in table.modes() {
        let _ = writeln!(s, "{mode}");
        let _ = write!(s, "{:<width$}", "model");
        for r in rulesets {
            let _ = write!(s, " {r:>11}");
        }
        s.push('\n');
        for m in table.models() {
            let _ = write!(s, "{m:<width$}");
            for r in rulesets {
                let cell = table
                    .accuracy(m, r, mode)
                    .map(|a| format!("{a:.3}"))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(s, " {cell:>11}");
            }
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

pub fn cmd_score(cfg: &RunConfig) -> CmdResult {
    let scored = score_journal(cfg)?;
    let models = cfg.models();
    create_dir(&cfg.output_dir).runtime()?;
    let csv_path = cfg.output_dir.join("scores.csv");
    let file = std::fs::File::create(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))
        .runtime()?;
    scored.table.write_csv(&models, file).runtime()?;
    let json_path = cfg.output_dir.join("scores.json");
    let text = serde_json::to_string_pretty(&scored.table.rows(&models)).runtime()?;
    std::fs::write(&json_path, text + "\n")
        .with_context(|| format!("writing {}", json_path.display()))
        .runtime()?;
    let world = cfg.world().usage()?;
    print!("{}", matrix_text(&scored.table, &cfg.ruleset_names(&world).usage()?));
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

/// Scores, averages, tests and writes the full report.
pub fn analyze(
    records: &[RunRecord],
    prompts: &[PromptInstance],
    models: &[ModelSpec],
    rulesets: &[String],
    out_dir: &Path,
) -> anyhow::Result<ReportManifest> {
    let expected = expected_labels(prompts);
    let table = score_runs(records, &expected)?;
    let categories = category_averages(&table, models)?;

    let mut do0 = BTreeMap::new();
    let mut dofs = BTreeMap::new();
    let mut tested = Vec::new();
    for r in rulesets {
        let z = table.column(r, Mode::ZeroShot);
        let f = table.column(r, Mode::FewShot);
        if z.is_empty() || f.is_empty() {
            continue;
        }
        if !z.keys().eq(f.keys()) || z.len() < 2 {
            log::warn!("skipping t-test for {r}: needs the same 2+ models in both modes");
            continue;
        }
        do0.insert(r.clone(), z);
        dofs.insert(r.clone(), f);
        tested.push(r.clone());
    }
    let ttests = ttest_table(&do0, &dofs, &tested)?;
    let entropy = entropy_report(records, &expected);
    Ok(emit_report(
        &ReportInput {
            scores: &table,
            models,
            categories: &categories,
            ttests: &ttests,
            entropy: &entropy,
            rulesets,
        },
        out_dir,
    )?)
}

fn print_manifest(m: &ReportManifest) {
    for f in &m.files {
        println!("  {} ({} rows)", f.file, f.rows);
    }
    println!("wrote {} files to {}", m.files.len(), m.output_dir.display());
}

pub fn cmd_analyze(cfg: &RunConfig) -> CmdResult {
    let scored = score_journal(cfg)?;
    let world = cfg.world().usage()?;
    let rulesets = cfg.ruleset_names(&world).usage()?;
    let dir = cfg.report_dir();
    let m = analyze(&scored.records, &scored.prompts, &cfg.models(), &rulesets, &dir).runtime()?;
    if let Ok(summary) = std::fs::read_to_string(dir.join("summary.txt")) {
        print!("{summary}");
    }
    print_manifest(&m);
    Ok(())
}

/// Writes the report; with `fixtures`, from the shipped per-model tables
/// instead of the configured journal.
pub fn cmd_report(cfg: &RunConfig, fixtures: bool) -> CmdResult {
    let dir = cfg.report_dir();
    let m = if fixtures {
        let suite = fixture_suite(100, cfg.master_seed).runtime()?;
        let rulesets = AccuracyTable::zero_shot().rulesets;
        analyze(&suite.records, &suite.prompts, &suite.models, &rulesets, &dir).runtime()?
    } else {
        let scored = score_journal(cfg)?;
        let world = cfg.world().usage()?;
        let rulesets = cfg.ruleset_names(&world).usage()?;
        analyze(&scored.records, &scored.prompts, &cfg.models(), &rulesets, &dir).runtime()?
    };
    print_manifest(&m);
    Ok(())
}
