use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use posepatch::attack::TransformDistribution;
use posepatch::eval::ParamKind;
use posepatch::io::load_patch;
use posepatch_cli::config::{ConfigError, ExperimentConfig, Family, Preset};
use posepatch_cli::csvio::{grid_rows, sweep_rows, write_rows};
use posepatch_cli::pipeline::{self, Paths};
use posepatch_cli::report;

#[derive(Parser)]
#[command(name = "posepatch", version, about = "Adversarial patches under 3D pose: train, attack, sweep, report")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults to the chosen preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no --config is given.
    #[arg(long, value_enum, default_value = "desk", global = true)]
    preset: Preset,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the work plan and exit without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective config as JSON.
    PrintConfig,
    /// Generate scenes, train the classifier, write model + metrics.json.
    TrainModel,
    /// Rank target classes by quick-attack success into high/mid/low tiers.
    RankTargets {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Optimize one patch for a target class under a pose support.
    TrainPatch {
        #[arg(long)]
        target: usize,
        /// Yaw half-range in degrees.
        #[arg(long, default_value_t = 0.0)]
        yaw_max: f64,
        /// Roll half-range in degrees.
        #[arg(long, default_value_t = 0.0)]
        roll_max: f64,
        /// Depth interval; defaults to the reference depth.
        #[arg(long)]
        depth_min: Option<f64>,
        #[arg(long)]
        depth_max: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Success-rate sweep of a saved patch over yaw, roll or depth.
    Sweep {
        #[arg(long)]
        patch: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: ParamKind,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Success-rate heatmap of a saved patch over the yaw x roll grid.
    Grid {
        #[arg(long)]
        patch: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Full family experiment: patches for every support and target, sweeps
    /// or grids, mAST tables and plots.
    Experiment {
        #[arg(long, value_enum, required = true, num_args = 1..)]
        family: Vec<Family>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print mAST tables (rows = target tiers, columns = training supports).
    Report,
    /// Render sweep/grid CSVs to SVG.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ParamKind, String> {
    ParamKind::parse(s).ok_or_else(|| format!("unknown parameter kind {s:?} (yaw, roll, loom)"))
}

fn load_config(c: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::preset(c.preset),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn model_path(paths: &Paths, model: &Option<PathBuf>) -> PathBuf {
    model.clone().unwrap_or_else(|| paths.model())
}

fn output_name(patch: &Path) -> String {
    let parent = patch.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned());
    let stem = patch.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match parent {
        Some(p) => format!("{p}_{stem}"),
        None => stem,
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.common.clone();
    let cfg = load_config(&common)?;
    if let Some(j) = common.jobs {
        if j == 0 {
            bail!(ConfigError::Invalid("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().ok();
    }
    let paths = Paths::new(&cfg.out_dir);
    let dry = common.dry_run;
    match cli.command {
        Command::PrintConfig => print!("{}", cfg.to_json()),
        Command::TrainModel => {
            let d = &cfg.data;
            if dry {
                let per = |n: usize| n * d.num_classes;
                println!(
                    "plan: {} train / {} val scenes at {}px, {} epochs of batch {}, model -> {}",
                    per(d.train_per_class),
                    per(d.val_per_class),
                    d.image_size,
                    cfg.train.epochs,
                    cfg.train.batch_size,
                    paths.model().display()
                );
                return Ok(());
            }
            let bank = pipeline::scene_bank(&cfg)?;
            let (_, m) = pipeline::train_model(&cfg, &bank, &paths)?;
            println!("val_accuracy {:.4} (gate {:.2}) -> {}", m.val_accuracy, m.accuracy_gate, paths.model().display());
            if !m.passed {
                bail!("validation accuracy {:.4} is below the {:.2} gate", m.val_accuracy, m.accuracy_gate);
            }
        }
        Command::RankTargets { model } => {
            if dry {
                println!(
                    "plan: {} quick optimizations of {}x{} scenes, {} evaluations each",
                    cfg.data.num_classes, cfg.ranking.n_batches, cfg.ranking.batch_size, cfg.ranking.eval_images
                );
                return Ok(());
            }
            let net = pipeline::load_model(&cfg, &model_path(&paths, &model))?;
            let bank = pipeline::scene_bank(&cfg)?;
            let r = pipeline::rank_targets(&cfg, &net, &bank, &paths)?;
            for (class, s) in &r.scores {
                println!("class {class:2}  success {s:.3}  tier {}", r.tiers.tier_of(*class).map_or("-", |t| t.name()));
            }
            println!("ranking -> {}", paths.ranking().display());
        }
        Command::TrainPatch { target, yaw_max, roll_max, depth_min, depth_max, model } => {
            let support = TransformDistribution {
                yaw_max_deg: yaw_max,
                roll_max_deg: roll_max,
                depth_min: depth_min.unwrap_or(cfg.patch.depth),
                depth_max: depth_max.or(depth_min).unwrap_or(cfg.patch.depth),
                ..cfg.reference_support()
            };
            support.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if target >= cfg.data.num_classes {
                bail!(ConfigError::Invalid(format!("target {target} >= num_classes {}", cfg.data.num_classes)));
            }
            if dry {
                println!(
                    "plan: 1 optimization of {}x{} scenes -> {}",
                    cfg.attack.n_batches,
                    cfg.attack.batch_size,
                    paths.patch(&support, target).display()
                );
                return Ok(());
            }
            let net = pipeline::load_model(&cfg, &model_path(&paths, &model))?;
            let bank = pipeline::scene_bank(&cfg)?;
            let (p, fresh) = pipeline::ensure_patch(&cfg, &net, &bank, &paths, &support, target)?;
            println!(
                "{} patch for class {target} (objective {:?} -> {:?}) -> {}",
                if fresh { "trained" } else { "reused" },
                p.objective_start,
                p.objective_end,
                paths.patch(&support, target).display()
            );
        }
        Command::Sweep { patch, kind, model } => {
            let r = cfg.sweep_range(kind);
            let out = paths.root.join("sweeps").join(format!("{}_{}.csv", output_name(&patch), kind.name()));
            if dry {
                println!("plan: {} points x {} images -> {}", r.n_intervals + 1, cfg.sweeps.images_per_point, out.display());
                return Ok(());
            }
            let p = load_patch(&patch).with_context(|| format!("cannot load patch {}", patch.display()))?;
            let net = pipeline::load_model(&cfg, &model_path(&paths, &model))?;
            let bank = pipeline::scene_bank(&cfg)?;
            let s = pipeline::sweep_patch(&cfg, &net, &bank, &p, kind)?;
            std::fs::create_dir_all(out.parent().unwrap())?;
            write_rows(&out, &sweep_rows(&s))?;
            println!("mean success {:.4} -> {}", posepatch::eval::trapezoid_mean(&s.rates), out.display());
        }
        Command::Grid { patch, model } => {
            let g = &cfg.grid;
            let out = paths.root.join("grids").join(format!("{}.csv", output_name(&patch)));
            if dry {
                println!(
                    "plan: {} cells x {} images -> {}",
                    (g.yaw.n_intervals + 1) * (g.roll.n_intervals + 1),
                    g.images_per_cell,
                    out.display()
                );
                return Ok(());
            }
            let p = load_patch(&patch).with_context(|| format!("cannot load patch {}", patch.display()))?;
            let net = pipeline::load_model(&cfg, &model_path(&paths, &model))?;
            let bank = pipeline::scene_bank(&cfg)?;
            let res = pipeline::grid_patch(&cfg, &net, &bank, &p)?;
            std::fs::create_dir_all(out.parent().unwrap())?;
            write_rows(&out, &grid_rows(&res))?;
            println!("grid -> {}", out.display());
        }
        Command::Experiment { family, model } => {
            if dry {
                for f in &family {
                    let p = pipeline::plan(&cfg, *f);
                    println!(
                        "plan {}: {} optimizations ({} supports x {} targets) of {}x{} scenes; {} points x {} images = {} classifier evaluations",
                        f.name(),
                        p.optimizations,
                        cfg.supports_of(*f).len(),
                        cfg.target_count(),
                        p.optimization_steps,
                        p.scenes_per_step,
                        p.points_per_patch,
                        p.images_per_point,
                        p.classifier_evaluations
                    );
                }
                return Ok(());
            }
            let net = pipeline::load_model(&cfg, &model_path(&paths, &model))?;
            let bank = pipeline::scene_bank(&cfg)?;
            let ranking = match &cfg.targets {
                posepatch_cli::config::Targets::Classes(_) => None,
                posepatch_cli::config::Targets::Tiers(_) => Some(if paths.ranking().exists() {
                    pipeline::load_ranking(&paths.ranking())?
                } else {
                    eprintln!("no ranking at {}; ranking targets now", paths.ranking().display());
                    pipeline::rank_targets(&cfg, &net, &bank, &paths)?
                }),
            };
            for f in family {
                let s = pipeline::run_experiment(&cfg, f, &net, &bank, ranking.as_ref(), &paths)?;
                println!("{}", s.markdown());
                println!(
                    "{}: {} optimizations ({} fresh), {} classifier evaluations",
                    f.name(),
                    s.counters.optimizations,
                    s.counters.fresh_optimizations,
                    s.counters.classifier_evaluations
                );
            }
        }
        Command::Report => {
            if dry {
                println!("plan: read mast.csv under {}", paths.root.display());
                return Ok(());
            }
            let text = report::report(&paths)?;
            std::fs::create_dir_all(&paths.root)?;
            std::fs::write(paths.root.join("report.md"), &text)?;
            print!("{text}");
        }
        Command::Plot { csv } => {
            let dir = paths.root.join("plots");
            if dry {
                println!("plan: render {} CSV file(s) into {}", csv.len(), dir.display());
                return Ok(());
            }
            for p in report::plot_csvs(&csv, &dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
