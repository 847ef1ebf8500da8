use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wtisent::features::FeatureSetId;
use wtisent::report::{self, RunConfig, RunLayout, SyntheticSpec, CONFIG_FILE};

/// Weekly news-sentiment features, boosted-tree direction forecasts, and
/// Shapley attributions for crude oil futures.
#[derive(Debug, Parser)]
#[command(name = "wtisent", version)]
struct Cli {
    /// Run configuration (TOML). Defaults to `<out>/config.toml` when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; also used for corpus sampling and stub adapters.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated feature sets, e.g. `gpt,av_baseline`.
    #[arg(long, global = true, value_parser = parse_sets)]
    sets: Option<SetList>,
    /// Use the deterministic offline stub instead of remote models.
    #[arg(long, global = true)]
    stub: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch monthly news feeds (cached), deduplicate, and sample.
    Fetch,
    /// Score sampled articles with every sentiment model.
    Extract,
    /// Build the weekly feature table and labels.
    Features,
    /// Nested-TPE boosted trees with expanding-window CV per feature set.
    Evaluate,
    /// Shapley attributions for each set's final-fold model.
    Explain,
    /// Tables and figures from a finished run.
    Report,
    /// Synthetic end-to-end run with stub adapters.
    Replay,
}

#[derive(Debug, Clone)]
struct SetList(Vec<FeatureSetId>);

fn parse_sets(s: &str) -> Result<SetList, String> {
    match FeatureSetId::parse_list(s) {
        Ok(v) if v.is_empty() => Err("no feature sets given".into()),
        Ok(v) => Ok(SetList(v)),
        Err(e) => Err(e.to_string()),
    }
}

fn load_config(cli: &Cli) -> wtisent::Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.out) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(out)) if out.join(CONFIG_FILE).exists() => RunConfig::load(&out.join(CONFIG_FILE))?,
        _ => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.corpus.sample_seed = seed;
        cfg.adapters.stub_seed = seed;
    }
    if let Some(SetList(sets)) = &cli.sets {
        cfg.sets = sets.clone();
    }
    if cli.stub {
        cfg.adapters.stub = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> wtisent::Result<()> {
    if let Command::Replay = cli.command {
        let seed = cli.seed.unwrap_or(0);
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/replay-{seed}")));
        let spec = SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        };
        let mut cfg = report::replay_config(seed, &out, &spec);
        if let Some(SetList(sets)) = &cli.sets {
            cfg.sets = sets.clone();
            if !sets.contains(&cfg.explain.report_set) {
                cfg.explain.report_set = sets[0];
            }
        }
        if cli.config.is_some() {
            log::warn!("replay uses its built-in configuration; --config ignored");
        }
        let outcome = report::run_replay(&cfg, &spec)?;
        for r in &outcome.reports {
            println!(
                "{:<12} auroc {:>8} accuracy {:>8} ic {:>8}",
                r.feature_set.as_str(),
                fmt(r.auroc.mean),
                fmt(r.accuracy.mean),
                fmt(r.ic.mean)
            );
        }
        println!("run directory: {}", out.display());
        return Ok(());
    }

    let cfg = load_config(cli)?;
    wtisent::fsutil::create_dir(&cfg.output_dir)?;
    cfg.save()?;
    let layout = RunLayout::new(&cfg.output_dir);
    match cli.command {
        Command::Fetch => {
            let s = report::run_fetch(&cfg)?;
            println!("{} articles fetched, {} sampled -> {}", s.fetched, s.sampled, layout.articles().display());
        }
        Command::Extract => {
            let s = report::run_extract(&cfg)?;
            println!(
                "{} vectors, {} failures ({} adapter calls, {} cache hits) -> {}",
                s.vectors,
                s.failures,
                s.adapter_calls,
                s.cache_hits,
                layout.vectors().display()
            );
        }
        Command::Features => {
            let (rows, cols) = report::run_features(&cfg)?;
            println!("{rows} weeks x {cols} features -> {}", layout.features().display());
        }
        Command::Evaluate => {
            for r in report::run_evaluate(&cfg)? {
                println!("{:<12} auroc {:>8}", r.feature_set.as_str(), fmt(r.auroc.mean));
            }
            println!("metrics -> {}", layout.metrics().display());
        }
        Command::Explain => {
            for e in report::run_explain(&cfg)? {
                println!("{:<12} top feature {}", e.set.as_str(), e.importance.entries[0].feature);
            }
        }
        Command::Report => {
            for p in report::run_report(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Replay => unreachable!("handled above"),
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} message={}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
