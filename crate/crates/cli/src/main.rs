use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use seme_core::audit::{audit_csv, audit_rules, mean_normalized_residual, mine_compositions, mined_csv};
use seme_core::checkpoint::{read_checkpoint, write_checkpoint};
use seme_core::config::ExperimentConfig;
use seme_core::data::load_rules;
use seme_core::eval::evaluate;
use seme_core::train::{train_with_observer, MetricsRow};
use seme_core::{Model, Split, Vocabulary};

mod lock;

#[derive(Parser)]
#[command(name = "seme", version, about = "Semigroup knowledge graph embeddings")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// `key=value`, repeatable, e.g. `--override loss.gamma=6`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        let cfg = ExperimentConfig::load(&self.config, &overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.bin, metrics.csv and config.resolved.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank a split with a checkpoint and print MR / MRR / Hits@N.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Directory for report and per-query rank CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Unfiltered ranking.
        #[arg(long)]
        raw: bool,
    },
    /// Composition residuals of a checkpoint against a rule file.
    Audit {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep relation pairs for compositions below a residual threshold.
    Mine {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long, default_value_t = 300)]
        max_relations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print model dimensions and parameter counts.
    Info {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: config: cannot set thread count: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Train { config, out } => cmd_train(&config, &out),
        Command::Eval {
            checkpoint,
            config,
            split,
            out,
            raw,
        } => cmd_eval(&checkpoint, &config, split, out.as_deref(), raw),
        Command::Audit { checkpoint, rules, out } => cmd_audit(&checkpoint, &rules, out.as_deref()),
        Command::Mine {
            checkpoint,
            threshold,
            max_relations,
            out,
        } => cmd_mine(&checkpoint, threshold, max_relations, out.as_deref()),
        Command::Info { checkpoint } => cmd_info(&checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("io: cannot write {}", path.display()))
}

fn cmd_train(args: &ConfigArgs, out: &Path) -> Result<()> {
    let cfg = args.load()?;
    let splits = cfg.load_splits()?;
    let rules = cfg.load_rules(&splits)?;
    let model_cfg = cfg.model_config(&splits);
    let model = Model::init(model_cfg, cfg.init_scheme(&model_cfg), cfg.seed)?;

    fs::create_dir_all(out).with_context(|| format!("io: cannot create {}", out.display()))?;
    let _lock = lock::OutputLock::acquire(out)?;
    write_file(&out.join("config.resolved"), &cfg.to_toml()?)?;

    log::info!(
        "training {} k={} n={} on {} triplets ({} entities, {} relations, {} rules)",
        model_cfg.variant,
        model_cfg.k,
        model_cfg.n,
        splits.train.len(),
        model_cfg.num_entities,
        model_cfg.num_relations,
        rules.len()
    );
    let metrics_path = out.join("metrics.csv");
    let mut metrics = fs::File::create(&metrics_path)
        .with_context(|| format!("io: cannot create {}", metrics_path.display()))?;
    writeln!(metrics, "{}", MetricsRow::CSV_HEADER)?;
    let mut write_err = None;
    let outcome = train_with_observer(
        &splits,
        &rules,
        model,
        cfg.loss,
        cfg.optimizer,
        cfg.schedule,
        cfg.seed,
        |row| {
            log::info!("step {:>7}  lr {:.1e}  loss {:.5}  valid {}", row.step, row.learning_rate, row.train_loss, row.valid);
            if let Err(e) = writeln!(metrics, "{}", row.to_csv()) {
                write_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = write_err {
        return Err(e).context("io: cannot write metrics.csv");
    }
    // Final row: the metrics of the checkpoint that is written.
    if let Some(best) = outcome
        .history
        .iter()
        .find(|r| Some(r.valid.mrr) == outcome.best_valid_mrr)
    {
        writeln!(metrics, "{}", best.to_csv())?;
    }
    write_checkpoint(out.join("checkpoint.bin"), &outcome.best, &splits.vocab)?;
    log::info!("stopped after {} steps ({:?})", outcome.steps, outcome.stop);

    if !splits.test.is_empty() {
        let report = evaluate(&outcome.best, &splits.test, Some(&splits.filter_index))?;
        println!("test: {}", report.overall);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn check_vocab(checkpoint: &Vocabulary, data: &Vocabulary) -> Result<()> {
    if checkpoint.entity_names() != data.entity_names() || checkpoint.relation_names() != data.relation_names() {
        bail!(
            "checkpoint: vocabulary mismatch: checkpoint has {} entities / {} relations, dataset has {} / {}",
            checkpoint.num_entities(),
            checkpoint.num_relations(),
            data.num_entities(),
            data.num_relations()
        );
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, args: &ConfigArgs, split: Split, out: Option<&Path>, raw: bool) -> Result<()> {
    let (model, vocab) = read_checkpoint(checkpoint)?;
    let cfg = args.load()?;
    if cfg.model.variant != model.config().variant || cfg.model.k != model.config().k || cfg.model.n != model.config().n {
        bail!(
            "checkpoint: model config mismatch: checkpoint is {} k={} n={}, config says {} k={} n={}",
            model.config().variant,
            model.config().k,
            model.config().n,
            cfg.model.variant,
            cfg.model.k,
            cfg.model.n
        );
    }
    let splits = cfg.load_splits()?;
    check_vocab(&vocab, &splits.vocab)?;
    let mut triplets: &[_] = splits.split(split);
    if split == Split::Valid && cfg.schedule.valid_max_triplets > 0 {
        triplets = &triplets[..cfg.schedule.valid_max_triplets.min(triplets.len())];
    }
    let filter = (!raw).then_some(&splits.filter_index);
    let report = evaluate(&model, triplets, filter)?;
    let name = match split {
        Split::Train => "train",
        Split::Valid => "valid",
        Split::Test => "test",
    };
    println!("{name} ({}): {}", if raw { "raw" } else { "filtered" }, report.overall);
    println!("  tail: {}", report.tail);
    println!("  head: {}", report.head);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join(format!("report_{name}.csv")), &report.summary_csv())?;
        write_file(&dir.join(format!("ranks_{name}.csv")), &report.ranks_csv(Some(&vocab)))?;
    }
    Ok(())
}

fn cmd_audit(checkpoint: &Path, rules_path: &Path, out: Option<&Path>) -> Result<()> {
    let (model, vocab) = read_checkpoint(checkpoint)?;
    let rules = load_rules(rules_path, &vocab)?;
    let rows = audit_rules(&model, &rules, &vocab)?;
    let csv = audit_csv(&rows);
    print!("{csv}");
    println!("# mean normalized residual: {}", mean_normalized_residual(&rows));
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("audit.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_mine(checkpoint: &Path, threshold: f64, max_relations: usize, out: Option<&Path>) -> Result<()> {
    let (model, vocab) = read_checkpoint(checkpoint)?;
    let found = mine_compositions(&model, threshold, max_relations)?;
    let csv = mined_csv(&found, &vocab);
    print!("{csv}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("mined.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_info(checkpoint: &Path) -> Result<()> {
    let (model, _) = read_checkpoint(checkpoint)?;
    let c = model.config();
    println!("variant: {}", c.variant);
    println!("k: {}", c.k);
    println!("n: {}", c.n);
    println!("entities: {}", c.num_entities);
    println!("relations: {}", c.num_relations);
    println!("entity dimension: {}", c.dim());
    println!("parameters per relation: {}", c.params_per_relation());
    println!("entity table: {}", c.entity_table_len());
    println!("relation table: {}", c.relation_table_len());
    println!("total parameters: {}", c.entity_table_len() + c.relation_table_len());
    Ok(())
}
