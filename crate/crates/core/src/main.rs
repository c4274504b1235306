use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfpinn::csvio::{fmt_f64, Table};
use mfpinn::eval::{self, Experiment, ExperimentConfig, Variant, MIDPOINT_HEADER};
use mfpinn::Error;

/// Multi-fidelity PINN experiments for through-thickness cure heating.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run with this single seed instead of the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Oracle fields and labeled datasets as CSV.
    Generate,
    /// Train and evaluate one model: pinn, pinn+data, mfpinn or mfpinn+data.
    Train {
        variant: String,
        /// High-fidelity label count (defaults to the variant's config value).
        #[arg(long)]
        labels: Option<usize>,
    },
    /// Metrics and error field of a saved bundle.
    Evaluate { bundle: PathBuf },
    /// Plain PINN error across the labeled-data sweep.
    #[command(name = "reproduce-table2")]
    ReproduceTable2,
    /// All four variants over every seed.
    #[command(name = "reproduce-table3")]
    ReproduceTable3,
    /// Predicted and oracle mid-thickness temperature over the cycle.
    Midpoint { bundle: PathBuf },
    /// Print the default config.
    #[command(name = "default-config")]
    DefaultConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error kind=usage message={:?}", msg.lines().next().unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> mfpinn::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> mfpinn::Result<()> {
    let config = load_config(&cli)?;
    let out = config.output_dir.clone();
    match &cli.command {
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()),
        Command::Generate => {
            Experiment::new(config)?.generate(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Train { variant, labels } => {
            let variant: Variant = variant.parse()?;
            let exp = Experiment::new(config)?;
            for &seed in &exp.config().seeds {
                let n = labels.unwrap_or_else(|| variant.default_labels(exp.config()));
                let dir = eval::run_dir(&out, variant, n, seed);
                let r = exp.run_to_dir(variant, seed, Some(n), &dir)?;
                let (x, t, e) = r.errors.max();
                println!(
                    "variant={variant} labeled_n={n} seed={seed} rel_l2={} max_err_C={} at_x_m={} at_t_s={} dir={}",
                    fmt_f64(r.rel_l2),
                    fmt_f64(e),
                    fmt_f64(x),
                    fmt_f64(t),
                    dir.display()
                );
            }
        }
        Command::Evaluate { bundle } => {
            let (model, manifest) = eval::load_bundle(bundle)?;
            let field = mfpinn::heat::solve(model.setup(), &manifest.solver)?;
            let result = eval::evaluate(|xt| model.predict_many(xt), &field)?;
            std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            let header = bundle_header(&manifest);
            let path = out.join("error_field.csv");
            result.errors.write_csv(&path, &header)?;
            let (x, t, e) = result.errors.max();
            println!(
                "variant={} seed={} rel_l2={} trained_rel_l2={} max_err_C={} at_x_m={} at_t_s={} error_field={}",
                manifest.variant,
                manifest.seed,
                fmt_f64(result.rel_l2),
                fmt_f64(manifest.rel_l2),
                fmt_f64(e),
                fmt_f64(x),
                fmt_f64(t),
                path.display()
            );
        }
        Command::ReproduceTable2 => report(&out, "table2", Experiment::new(config)?.reproduce_table2(Some(&out))?),
        Command::ReproduceTable3 => report(&out, "table3", Experiment::new(config)?.reproduce_table3(Some(&out))?),
        Command::Midpoint { bundle } => {
            let (model, manifest) = eval::load_bundle(bundle)?;
            let curve = eval::midpoint_curve(&model, &manifest.solver)?;
            let mut table = Table::new(&bundle_header(&manifest), &MIDPOINT_HEADER);
            for (t, p, y) in &curve {
                table.push(vec![fmt_f64(*t), fmt_f64(*p), fmt_f64(*y)]);
            }
            std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            let path = out.join("midpoint.csv");
            table.write(&path)?;
            let worst = curve.iter().map(|(_, p, y)| (p - y).abs()).fold(0.0, f64::max);
            println!("max_abs_diff_C={} midpoint={}", fmt_f64(worst), path.display());
        }
    }
    Ok(())
}

fn report(out: &Path, name: &str, runs: Vec<eval::RunResult>) {
    for (variant, n, errs) in eval::group_medians(&runs) {
        println!("variant={variant} labeled_n={n} median_rel_l2={}", fmt_f64(eval::median(&errs)));
    }
    println!("table={}", out.join(format!("{name}.csv")).display());
}

fn bundle_header(m: &eval::Manifest) -> Vec<String> {
    vec![format!("config_hash={} seed={}", m.config_hash, m.seed)]
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
