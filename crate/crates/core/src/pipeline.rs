//! End-to-end runs: configuration, batched simulation, feature extraction,
//! model selection and reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casegen::{self, FaultCase, Scenario, SplitName, Zone};
use crate::emtsim::{
    fnv1a, phasor_solve, FaultSpec, NetworkConfig, SimEngine, SimParams, SourceConfig, TcscConfig, WaveformRecord,
};
use crate::lineparam::{LineParameters, TowerGeometry};
use crate::report::ConfusionReport;
use crate::svm::{
    grid_search_decoders, Decoder, GridOutcome, GridSpec, Kernel, SmoParams, VotingTable, ZoneClassifier,
};
use crate::wavefeat::{extract_features, write_features_csv, FeatureVector};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Template for both sources; impedance scaling comes from each case.
    pub source: SourceConfig,
    pub segments_km: [f64; 3],
    pub sections_per_km: f64,
    /// Frequency at which the line reactance behind the compensation
    /// percentage is evaluated, Hz.
    pub compensation_reference_hz: f64,
    /// Load angle of the configuration that defines the current base, deg.
    pub nominal_delta_deg: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let n = NetworkConfig::reference_400kv();
        Self {
            source: SourceConfig::reference_400kv(),
            segments_km: n.segments_km,
            sections_per_km: n.sections_per_km,
            compensation_reference_hz: 60.0,
            nominal_delta_deg: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub c: Vec<f64>,
    pub g: Vec<f64>,
    /// SMO stopping tolerance.
    pub tol: f64,
    /// Share of the training split held out to score grid cells.
    pub holdout_fraction: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { c: g.c, g: g.g, tol: 1e-3, holdout_fraction: 0.2 }
    }
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        GridSpec { c: self.c.clone(), g: self.g.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Share of each scenario's case matrix simulated, stratified by zone.
    pub subsample: f64,
    /// Training splits evaluated by `run-scenario`.
    pub training: Vec<SplitName>,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { subsample: 0.1, training: vec![SplitName::Base, SplitName::Augmented] }
    }
}

/// Everything a run depends on, read from one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default = "TowerGeometry::reference_400kv")]
    pub geometry: TowerGeometry,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub split: SplitSection,
}

fn default_seed() -> u64 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            network: NetworkSection::default(),
            geometry: TowerGeometry::reference_400kv(),
            sim: SimParams::default(),
            grid: GridSection::default(),
            split: SplitSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.sim.validate(self.network.source.freq)?;
        self.grid.spec().validate()?;
        if !(self.grid.tol > 0.0) {
            return Err(Error::Config("grid.tol must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.grid.holdout_fraction) {
            return Err(Error::Config("grid.holdout_fraction must lie in [0, 1)".into()));
        }
        if !(self.split.subsample > 0.0 && self.split.subsample <= 1.0) {
            return Err(Error::Config("split.subsample must lie in (0, 1]".into()));
        }
        if !(self.network.compensation_reference_hz > 0.0) {
            return Err(Error::Config("network.compensation_reference_hz must be positive".into()));
        }
        let probe = self.network_config(
            &FaultCase {
                case_id: 0,
                scenario: Scenario::One,
                zg1_pct: 100,
                zg2_pct: 100,
                xc_pct: 50,
                rf: 0,
                fia: 0,
                delta: 20,
                fault_type: casegen::FaultType::Ag,
                location_km: 50.0,
            },
            1.0,
        );
        probe.validate()
    }

    /// Stable digest of the whole configuration.
    pub fn digest(&self) -> String {
        format!("{:016x}", fnv1a(serde_json::to_string(self).expect("config serializes").as_bytes()))
    }

    fn base_network(&self) -> NetworkConfig {
        let mut n = NetworkConfig::reference_400kv();
        n.source1 = self.network.source.clone();
        n.source2 = Some(self.network.source.clone());
        n.segments_km = self.network.segments_km;
        n.sections_per_km = self.network.sections_per_km;
        n.delta_deg = self.network.nominal_delta_deg;
        n
    }

    fn network_config(&self, case: &FaultCase, reference_reactance: f64) -> NetworkConfig {
        let mut n = self.base_network();
        n.source1.impedance_scale_pct *= case.zg1_pct as f64 / 100.0;
        if let Some(s2) = n.source2.as_mut() {
            s2.impedance_scale_pct *= case.zg2_pct as f64 / 100.0;
        }
        n.delta_deg = case.delta as f64;
        n.tcsc = Some(TcscConfig {
            position_km: case.scenario.tcsc_position_km(),
            compensation_pct: case.xc_pct as f64,
            reference_reactance_ohm: reference_reactance,
        });
        n
    }
}

/// Line constants and derived constants shared by all cases of a run.
#[derive(Debug, Clone)]
pub struct SimulationContext {
    config: RunConfig,
    line: LineParameters,
    compensation_reactance: f64,
    current_base: f64,
}

impl SimulationContext {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let f = config.network.source.freq;
        let line = LineParameters::from_geometry(&config.geometry, f)?;
        let reference = LineParameters::from_geometry(&config.geometry, config.network.compensation_reference_hz)?;
        let compensation_reactance = reference.positive_sequence_reactance(config.network.segments_km[0]);
        let nominal = config.base_network();
        let current_base =
            phasor_solve(&nominal, &line, None)?.relay_current().iter().map(|i| i.norm()).fold(0.0, f64::max);
        if !(current_base > 0.0) {
            return Err(Error::Config("nominal configuration carries no current".into()));
        }
        Ok(Self { config: config.clone(), line, compensation_reactance, current_base })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn line(&self) -> &LineParameters {
        &self.line
    }

    /// Line reactance of the first segment the compensation percentage
    /// refers to, ohm.
    pub fn compensation_reactance(&self) -> f64 {
        self.compensation_reactance
    }

    /// Peak relay current of the nominal unfaulted network, A.
    pub fn current_base(&self) -> f64 {
        self.current_base
    }

    pub fn network_for_case(&self, case: &FaultCase) -> NetworkConfig {
        self.config.network_config(case, self.compensation_reactance)
    }

    pub fn fault_for_case(case: &FaultCase) -> FaultSpec {
        FaultSpec {
            fault_type: case.fault_type,
            location_km: case.location_km,
            rf: case.rf as f64,
            fia: case.fia as f64,
        }
    }

    /// Simulates `cases` and maps each record through `f`. Cases sharing a
    /// pre-fault network share one engine and one unfaulted run. Results
    /// come back in ascending case id order.
    pub fn simulate_each<T, F>(&self, cases: &[FaultCase], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&FaultCase, WaveformRecord) -> Result<T> + Sync,
    {
        let mut groups: BTreeMap<_, Vec<FaultCase>> = BTreeMap::new();
        for c in cases {
            groups.entry(c.network_key()).or_default().push(*c);
        }
        let groups: Vec<Vec<FaultCase>> = groups.into_values().collect();
        let done = std::sync::atomic::AtomicUsize::new(0);
        let total = groups.len();
        let per_group: Vec<Vec<(u64, T)>> = groups
            .par_iter()
            .map(|group| {
                let net = self.network_for_case(&group[0]);
                let engine = SimEngine::build(&net, &self.line, &self.config.sim)?;
                let fias: Vec<f64> =
                    group.iter().map(|c| c.fia).collect::<BTreeSet<_>>().into_iter().map(f64::from).collect();
                let snaps = engine.prefault_snapshots(&fias)?;
                let out = group
                    .par_iter()
                    .map(|c| {
                        let snap = &snaps[fias.iter().position(|&x| x == c.fia as f64).expect("fia has a snapshot")];
                        let rec = engine.run_from_snapshot(snap, &Self::fault_for_case(c), c.case_id)?;
                        Ok((c.case_id, f(c, rec)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!("simulated network group {n}/{total} ({} cases)", group.len());
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut all: Vec<(u64, T)> = per_group.into_iter().flatten().collect();
        all.sort_by_key(|(id, _)| *id);
        Ok(all.into_iter().map(|(_, t)| t).collect())
    }

    pub fn features_from_record(&self, rec: &WaveformRecord) -> Result<FeatureVector> {
        let fault = rec.fault.ok_or_else(|| Error::Data(format!("case {}: record carries no fault", rec.case_id)))?;
        extract_features(rec, casegen::zone_label(fault.location_km)?, self.current_base)
    }

    pub fn simulate_features(&self, cases: &[FaultCase]) -> Result<Vec<FeatureVector>> {
        self.simulate_each(cases, |c, rec| extract_features(&rec, c.zone(), self.current_base))
    }
}

/// Cases simulated for a scenario: the seeded stratified subsample.
pub fn scenario_universe(scenario: Scenario, fraction: f64, seed: u64) -> Result<Vec<FaultCase>> {
    let all: Vec<u64> = (0..scenario.case_count() as u64).collect();
    casegen::subsample(scenario, &all, fraction, seed)?.into_iter().map(|id| casegen::decode(scenario, id)).collect()
}

/// Training and test ids within a universe: the named split and
/// everything else.
pub fn train_test_ids(scenario: Scenario, split: SplitName, universe: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let train_set: BTreeSet<u64> = casegen::split_ids(scenario, split).into_iter().collect();
    universe.iter().partition(|id| train_set.contains(id))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub tol: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Score grid cells on the training split itself instead of a held-out
    /// slice of it.
    pub paper_mode: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub decoder: Decoder,
    pub grid: GridOutcome,
    pub model: ZoneClassifier,
    pub report: ConfusionReport,
    pub train_count: usize,
    pub test_count: usize,
}

impl ExperimentOutcome {
    pub fn label(&self) -> String {
        decoder_label(self.decoder)
    }
}

pub fn decoder_label(d: Decoder) -> String {
    match d {
        Decoder::ArgMax => "oaa".into(),
        Decoder::Vote(t) => format!("oao-{t}"),
    }
}

/// Stratified-by-zone random slice of `rows` (indices).
fn holdout(zones: &[Zone], fraction: f64, seed: u64) -> BTreeSet<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeSet::new();
    for z in Zone::ALL {
        let mut members: Vec<usize> = (0..zones.len()).filter(|&i| zones[i] == z).collect();
        let take = (fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut rng);
        out.extend(&members[..take]);
    }
    out
}

pub fn predict(model: &ZoneClassifier, features: &[FeatureVector]) -> Result<Vec<Option<Zone>>> {
    if let Some(dim) = model.dimension() {
        if let Some(bad) = features.iter().find(|f| f.values.len() != dim) {
            return Err(Error::Data(format!(
                "case {} has {} features but the model expects {dim}",
                bad.case_id,
                bad.values.len()
            )));
        }
    }
    Ok(features.par_iter().map(|f| model.classify(&f.values)).collect())
}

pub fn evaluate(model: &ZoneClassifier, test: &[FeatureVector]) -> Result<ConfusionReport> {
    let pred = predict(model, test)?;
    let real: Vec<Zone> = test.iter().map(|f| f.zone).collect();
    ConfusionReport::from_predictions(&real, &pred)
}

/// Grid search on the training cases, retrain at the winning `(C, g)`, and
/// score every other case. One outcome per decoder; all decoders must share
/// a strategy.
pub fn run_protocol(
    features: &[FeatureVector],
    train_ids: &[u64],
    grid: &GridSpec,
    decoders: &[Decoder],
    opts: &ProtocolOptions,
) -> Result<Vec<ExperimentOutcome>> {
    let train_set: BTreeSet<u64> = train_ids.iter().copied().collect();
    let (train, test): (Vec<&FeatureVector>, Vec<&FeatureVector>) =
        features.iter().partition(|f| train_set.contains(&f.case_id));
    if train.len() != train_set.len() {
        return Err(Error::Data(format!("{} training ids have no feature row", train_set.len() - train.len())));
    }
    assert!(test.iter().all(|f| !train_set.contains(&f.case_id)), "test set overlaps training set");

    let rows: Vec<&[f64]> = train.iter().map(|f| f.values.as_slice()).collect();
    let zones: Vec<Zone> = train.iter().map(|f| f.zone).collect();
    let (fit_rows, fit_zones, eval_rows, eval_zones) = if opts.paper_mode || opts.holdout_fraction == 0.0 {
        (rows.clone(), zones.clone(), rows.clone(), zones.clone())
    } else {
        let held = holdout(&zones, opts.holdout_fraction, opts.seed);
        let pick = |keep: bool| -> (Vec<&[f64]>, Vec<Zone>) {
            (0..rows.len()).filter(|i| held.contains(i) != keep).map(|i| (rows[i], zones[i])).unzip()
        };
        let (fr, fz) = pick(true);
        let (er, ez) = pick(false);
        (fr, fz, er, ez)
    };
    let outcomes = grid_search_decoders(&fit_rows, &fit_zones, &eval_rows, &eval_zones, grid, decoders, opts.tol)?;

    let test_owned: Vec<FeatureVector> = test.into_iter().cloned().collect();
    let mut trained: BTreeMap<(u64, u64), ZoneClassifier> = BTreeMap::new();
    decoders
        .iter()
        .zip(outcomes)
        .map(|(&decoder, grid)| {
            let best = grid.best_cell().clone();
            let key = (best.c.to_bits(), best.g.to_bits());
            let model = match trained.get(&key) {
                Some(m) => m.clone().with_decoder(decoder)?,
                None => {
                    let params = SmoParams { tol: opts.tol, ..SmoParams::new(best.c) };
                    let m = ZoneClassifier::train(&rows, &zones, Kernel::Rbf { g: best.g }, decoder, &params)?;
                    trained.insert(key, m.clone());
                    m
                }
            };
            let report = evaluate(&model, &test_owned)?;
            log::info!(
                "{}: C={} g={} -> {:.2}% on {} test cases",
                decoder_label(decoder),
                best.c,
                best.g,
                report.success_rate(),
                test_owned.len()
            );
            Ok(ExperimentOutcome {
                decoder,
                grid,
                model,
                report,
                train_count: rows.len(),
                test_count: test_owned.len(),
            })
        })
        .collect()
}

/// Reproducibility record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub subsample_fraction: f64,
    pub splits: Vec<SplitName>,
    pub paper_mode: bool,
    pub sim_digest: String,
    pub config_digest: String,
    pub grid: GridSpec,
    pub case_count: usize,
    pub current_base_a: f64,
    pub compensation_reactance_ohm: f64,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(ctx: &SimulationContext, scenario: Scenario, case_count: usize, paper_mode: bool) -> Self {
        let cfg = ctx.config();
        Self {
            tool_version: TOOL_VERSION.into(),
            scenario,
            seed: cfg.seed,
            subsample_fraction: cfg.split.subsample,
            splits: cfg.split.training.clone(),
            paper_mode,
            sim_digest: format!("{:016x}", fnv1a(serde_json::to_string(&cfg.sim).expect("serializes").as_bytes())),
            config_digest: cfg.digest(),
            grid: cfg.grid.spec(),
            case_count,
            current_base_a: ctx.current_base(),
            compensation_reactance_ohm: ctx.compensation_reactance(),
            config: cfg.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &(serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: invalid manifest: {e}", path.display())))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cases_csv(cases: &[FaultCase]) -> String {
    let mut s = String::from("case_id,scenario,zg1_pct,zg2_pct,xc_pct,rf,fia,delta,fault_type,location_km,zone\n");
    for c in cases {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.case_id,
            c.scenario.number(),
            c.zg1_pct,
            c.zg2_pct,
            c.xc_pct,
            c.rf,
            c.fia,
            c.delta,
            c.fault_type.name(),
            c.location_km,
            c.zone().get()
        );
    }
    s
}

pub fn ids_text(ids: &[u64]) -> String {
    ids.iter().map(|id| format!("{id}\n")).collect()
}

pub fn read_ids(path: &Path) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse().map_err(|_| Error::Data(format!("{}: bad case id '{l}'", path.display()))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioOptions {
    pub paper_mode: bool,
    /// Also write every waveform record under `waveforms/`.
    pub keep_waveforms: bool,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: u8,
    pub split: SplitName,
    pub classifier: String,
    pub c: f64,
    pub g: f64,
    pub train: usize,
    pub test: usize,
    pub correct: u64,
    pub success_rate: f64,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("scenario,split,classifier,c,g,train,test,correct,success_rate\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.4}",
            r.scenario, r.split, r.classifier, r.c, r.g, r.train, r.test, r.correct, r.success_rate
        );
    }
    s
}

/// Evaluates every configured split with OAA and with OAO under each
/// voting table. Returns one summary row per classifier and split, in a
/// fixed order, and writes the per-experiment artifacts into `out` when
/// given.
pub fn evaluate_scenario(
    scenario: Scenario,
    features: &[FeatureVector],
    cfg: &RunConfig,
    paper_mode: bool,
    out: Option<&Path>,
) -> Result<(Vec<SummaryRow>, Vec<(SplitName, ExperimentOutcome)>)> {
    let universe: Vec<u64> = features.iter().map(|f| f.case_id).collect();
    let opts =
        ProtocolOptions { tol: cfg.grid.tol, holdout_fraction: cfg.grid.holdout_fraction, seed: cfg.seed, paper_mode };
    let grid = cfg.grid.spec();
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &split in &cfg.split.training {
        let (train_ids, test_ids) = train_test_ids(scenario, split, &universe);
        if let Some(dir) = out {
            write_text(&dir.join(format!("train_{split}.txt")), &ids_text(&train_ids))?;
            write_text(&dir.join(format!("test_{split}.txt")), &ids_text(&test_ids))?;
        }
        let mut outcomes = run_protocol(features, &train_ids, &grid, &[Decoder::ArgMax], &opts)?;
        let tables: Vec<Decoder> = VotingTable::ALL.iter().map(|&t| Decoder::Vote(t)).collect();
        outcomes.extend(run_protocol(features, &train_ids, &grid, &tables, &opts)?);
        for o in outcomes {
            let best = o.grid.best_cell();
            rows.push(SummaryRow {
                scenario: scenario.number(),
                split,
                classifier: o.label(),
                c: best.c,
                g: best.g,
                train: o.train_count,
                test: o.test_count,
                correct: o.report.correct(),
                success_rate: o.report.success_rate(),
            });
            if let Some(dir) = out {
                let stem = format!("{split}_{}", o.label());
                write_text(&dir.join(format!("grid_{stem}.csv")), &o.grid.to_csv())?;
                o.model.save(&dir.join(format!("model_{stem}.json")))?;
                let title = format!("scenario {scenario}, {split} training, {}", o.label());
                write_text(&dir.join(format!("report_{stem}.txt")), &o.report.to_text(&title))?;
                write_text(&dir.join(format!("report_{stem}.csv")), &o.report.to_csv())?;
            }
            all.push((split, o));
        }
    }
    Ok((rows, all))
}

/// Full pipeline for one scenario into `out_dir`.
pub fn run_scenario(
    cfg: &RunConfig,
    scenario: Scenario,
    out_dir: &Path,
    opts: ScenarioOptions,
) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ctx = SimulationContext::new(cfg)?;
    let cases = scenario_universe(scenario, cfg.split.subsample, cfg.seed)?;
    log::info!("scenario {scenario}: {} cases, current base {:.1} A", cases.len(), ctx.current_base());
    RunManifest::new(&ctx, scenario, cases.len(), opts.paper_mode).save(&out_dir.join("manifest.json"))?;
    write_text(&out_dir.join("cases.csv"), &cases_csv(&cases))?;

    let wave_dir = out_dir.join("waveforms");
    if opts.keep_waveforms {
        fs::create_dir_all(&wave_dir).map_err(|e| Error::io(&wave_dir, e))?;
    }
    let features = ctx.simulate_each(&cases, |c, rec| {
        if opts.keep_waveforms {
            rec.write_to_dir(&wave_dir, opts.binary)?;
        }
        extract_features(&rec, c.zone(), ctx.current_base())
    })?;
    write_features_csv(&out_dir.join("features.csv"), &features)?;

    let (rows, _) = evaluate_scenario(scenario, &features, cfg, opts.paper_mode, Some(out_dir))?;
    write_text(&out_dir.join("summary.csv"), &summary_csv(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[split]\nsubsample = 0.0\ntraining = []").is_err());
    }

    #[test]
    fn case_networks_follow_the_matrix() {
        let ctx = SimulationContext::new(&RunConfig::default()).unwrap();
        let case = casegen::decode(Scenario::Two, 12345).unwrap();
        let n = ctx.network_for_case(&case);
        assert_eq!(n.delta_deg, case.delta as f64);
        assert_eq!(n.source1.impedance_scale_pct, case.zg1_pct as f64);
        assert_eq!(n.source2.as_ref().unwrap().impedance_scale_pct, case.zg2_pct as f64);
        let t = n.tcsc.unwrap();
        assert_eq!(t.position_km, 187.5);
        assert_eq!(t.compensation_pct, case.xc_pct as f64);
        assert!((ctx.compensation_reactance() - 105.0).abs() < 1.0);
        assert!(ctx.current_base() > 100.0);
    }

    #[test]
    fn train_and_test_partition_the_universe() {
        let cases = scenario_universe(Scenario::One, 0.05, 3).unwrap();
        let ids: Vec<u64> = cases.iter().map(|c| c.case_id).collect();
        let (train, test) = train_test_ids(Scenario::One, SplitName::Augmented, &ids);
        assert_eq!(train.len() + test.len(), ids.len());
        let t: BTreeSet<_> = train.iter().collect();
        assert!(test.iter().all(|id| !t.contains(id)));
        assert!(train.iter().all(|&id| {
            let c = casegen::decode(Scenario::One, id).unwrap();
            casegen::in_base_split(&c) || casegen::in_augment_set(&c)
        }));
    }

    #[test]
    fn holdout_is_stratified_and_seeded() {
        let zones: Vec<Zone> = (0..100).map(|i| Zone::new((i % 3) as u8 + 1).unwrap()).collect();
        let a = holdout(&zones, 0.2, 5);
        assert_eq!(a, holdout(&zones, 0.2, 5));
        assert_ne!(a, holdout(&zones, 0.2, 6));
        for z in Zone::ALL {
            let n = a.iter().filter(|&&i| zones[i] == z).count();
            let total = zones.iter().filter(|&&v| v == z).count();
            assert_eq!(n, (0.2 * total as f64).round() as usize);
        }
    }
}
