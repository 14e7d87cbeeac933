use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use faultzone::casegen::{self, Scenario, SplitName};
use faultzone::emtsim::WaveformRecord;
use faultzone::lineparam::{LineParameters, TowerGeometry};
use faultzone::pipeline::{
    self, cases_csv, ids_text, train_test_ids, write_text, ProtocolOptions, RunConfig, RunManifest, ScenarioOptions,
    SimulationContext,
};
use faultzone::svm::{Decoder, Kernel, SmoParams, Strategy, VotingTable, ZoneClassifier};
use faultzone::wavefeat::{read_features_csv, write_features_csv, FeatureVector};
use faultzone::ErrorKind;

#[derive(Parser)]
#[command(name = "faultzone", version, about = "Fault-zone classification for series-compensated lines")]
struct Cli {
    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write waveforms in the binary format instead of CSV.
    #[arg(long, global = true)]
    binary: bool,
    /// Select grid cells by accuracy on the training split itself.
    #[arg(long, global = true)]
    paper_mode: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in configuration as TOML.
    DefaultConfig,
    /// Per-km line constants from a tower geometry.
    Params {
        /// Geometry JSON; the reference 400 kV tower when omitted.
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long, default_value_t = faultzone::SYSTEM_FREQUENCY_HZ)]
        freq: f64,
        /// Output JSON file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a scenario's case subsample and write one waveform per case.
    Simulate {
        #[arg(long)]
        scenario: Scenario,
        /// Overrides the configured subsample fraction.
        #[arg(long)]
        subsample: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract detail-band features from a waveform directory.
    Features {
        #[arg(long)]
        waveforms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier at a fixed (C, g) on a training split.
    Train {
        #[command(flatten)]
        sel: Selection,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search the configured (C, g) grid, then retrain at the best cell.
    GridSearch {
        #[command(flatten)]
        sel: Selection,
        /// Directory for grid.csv, model.json and the test report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on every case outside its training split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        scenario: Scenario,
        /// Split the model was trained on; its cases are excluded.
        #[arg(long)]
        split: SplitName,
        /// Extra ids to exclude, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        /// Directory for report.txt and report.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulation, features, grid search, training and reports for one scenario.
    RunScenario {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
        /// Also keep every waveform under out/waveforms.
        #[arg(long)]
        keep_waveforms: bool,
    },
}

#[derive(Args)]
struct Selection {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    scenario: Scenario,
    #[arg(long)]
    split: SplitName,
    #[arg(long)]
    strategy: Strategy,
    /// Voting table for the one-against-one strategy.
    #[arg(long, default_value = "VI")]
    table: VotingTable,
}

impl Selection {
    fn decoder(&self) -> Decoder {
        match self.strategy {
            Strategy::Oaa => Decoder::ArgMax,
            Strategy::Oao => Decoder::Vote(self.table),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn training_rows<'a>(features: &'a [FeatureVector], scenario: Scenario, split: SplitName) -> Vec<&'a FeatureVector> {
    let universe: Vec<u64> = features.iter().map(|f| f.case_id).collect();
    let (train, _) = train_test_ids(scenario, split, &universe);
    let set: std::collections::BTreeSet<u64> = train.into_iter().collect();
    features.iter().filter(|f| set.contains(&f.case_id)).collect()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    match &cli.command {
        Command::DefaultConfig => print!("{}", RunConfig::default().to_toml_string()),
        Command::Params { geometry, freq, out } => {
            let geom = match geometry {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<TowerGeometry>(&text)
                        .map_err(|e| faultzone::Error::Config(format!("{}: {e}", p.display())))?
                }
                None => load_config(&cli)?.geometry,
            };
            let params = LineParameters::from_geometry(&geom, *freq)?;
            let text = serde_json::to_string_pretty(&params)? + "\n";
            match out {
                Some(p) => write_text(p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Simulate { scenario, subsample, out } => {
            let mut cfg = load_config(&cli)?;
            if let Some(f) = subsample {
                cfg.split.subsample = *f;
            }
            let ctx = SimulationContext::new(&cfg)?;
            let cases = pipeline::scenario_universe(*scenario, cfg.split.subsample, cfg.seed)?;
            create_dir(out)?;
            RunManifest::new(&ctx, *scenario, cases.len(), cli.paper_mode).save(&out.join("manifest.json"))?;
            write_text(&out.join("cases.csv"), &cases_csv(&cases))?;
            ctx.simulate_each(&cases, |_, rec| rec.write_to_dir(out, cli.binary).map(drop))?;
            log::info!("wrote {} waveforms to {}", cases.len(), out.display());
        }
        Command::Features { waveforms, out } => {
            let ctx = SimulationContext::new(&load_config(&cli)?)?;
            let records = WaveformRecord::read_dir(waveforms)?;
            if records.is_empty() {
                return Err(faultzone::Error::Data(format!("no waveform records in {}", waveforms.display())).into());
            }
            let features =
                records.iter().map(|r| ctx.features_from_record(r)).collect::<faultzone::Result<Vec<_>>>()?;
            write_features_csv(out, &features)?;
        }
        Command::Train { sel, c, g, out } => {
            let cfg = load_config(&cli)?;
            let features = read_features_csv(&sel.features)?;
            let train = training_rows(&features, sel.scenario, sel.split);
            let rows: Vec<&[f64]> = train.iter().map(|f| f.values.as_slice()).collect();
            let zones: Vec<_> = train.iter().map(|f| f.zone).collect();
            let params = SmoParams { tol: cfg.grid.tol, ..SmoParams::new(*c) };
            let model = ZoneClassifier::train(&rows, &zones, Kernel::Rbf { g: *g }, sel.decoder(), &params)?;
            model.save(out)?;
            log::info!("trained on {} cases", rows.len());
        }
        Command::GridSearch { sel, out } => {
            let cfg = load_config(&cli)?;
            let features = read_features_csv(&sel.features)?;
            let universe: Vec<u64> = features.iter().map(|f| f.case_id).collect();
            let (train_ids, _) = train_test_ids(sel.scenario, sel.split, &universe);
            let opts = ProtocolOptions {
                tol: cfg.grid.tol,
                holdout_fraction: cfg.grid.holdout_fraction,
                seed: cfg.seed,
                paper_mode: cli.paper_mode,
            };
            let outcome =
                pipeline::run_protocol(&features, &train_ids, &cfg.grid.spec(), &[sel.decoder()], &opts)?.remove(0);
            create_dir(out)?;
            write_text(&out.join("grid.csv"), &outcome.grid.to_csv())?;
            outcome.model.save(&out.join("model.json"))?;
            let title = format!("scenario {}, {} training, {}", sel.scenario, sel.split, outcome.label());
            write_text(&out.join("report.txt"), &outcome.report.to_text(&title))?;
            write_text(&out.join("report.csv"), &outcome.report.to_csv())?;
            let best = outcome.grid.best_cell();
            println!("C={} g={} selection {}/{}", best.c, best.g, best.correct, best.total);
        }
        Command::Evaluate { model, features, scenario, split, exclude, out } => {
            let model = ZoneClassifier::load(model)?;
            let features = read_features_csv(features)?;
            let mut excluded: std::collections::BTreeSet<u64> =
                casegen::split_ids(*scenario, *split).into_iter().collect();
            if let Some(p) = exclude {
                excluded.extend(pipeline::read_ids(p)?);
            }
            let test: Vec<FeatureVector> = features.into_iter().filter(|f| !excluded.contains(&f.case_id)).collect();
            assert!(test.iter().all(|f| !excluded.contains(&f.case_id)));
            if test.is_empty() {
                return Err(faultzone::Error::Data("no test cases outside the training split".into()).into());
            }
            let report = pipeline::evaluate(&model, &test)?;
            create_dir(out)?;
            let ids: Vec<u64> = test.iter().map(|f| f.case_id).collect();
            write_text(&out.join("test_ids.txt"), &ids_text(&ids))?;
            let title = format!("scenario {scenario}, {split} training");
            let text = report.to_text(&title);
            write_text(&out.join("report.txt"), &text)?;
            write_text(&out.join("report.csv"), &report.to_csv())?;
            print!("{text}");
        }
        Command::RunScenario { scenario, out, keep_waveforms } => {
            let cfg = load_config(&cli)?;
            let opts =
                ScenarioOptions { paper_mode: cli.paper_mode, keep_waveforms: *keep_waveforms, binary: cli.binary };
            let rows = pipeline::run_scenario(&cfg, *scenario, out, opts)?;
            print!("{}", pipeline::summary_csv(&rows));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err.chain().find_map(|e| e.downcast_ref::<faultzone::Error>()).map(|e| e.kind());
    match kind {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Data) | None => 3,
        Some(ErrorKind::Numeric) => 4,
        Some(ErrorKind::NonConvergence) => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
