//! Stage orchestration over on-disk artifacts.
//!
//! Layout under the output directory:
//! `ingest/<P>.xdr.csv`, `ingest/report.json`, and per province
//! `<P>/{features,popularity,flow,profiles,importance,thresholds,split,behaviors}.csv`,
//! `<P>/model.txt`, `<P>/{prediction,matching}.json`, `<P>/report_*.csv`, `<P>/report.json`.
//! `report.json` at the top level gathers every evaluated province.

mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{PipelineConfig, ThresholdSource, CONFIG_KEYS};

use crate::eval::{
    derive_seed, discrimination_report, matching_report, prediction_report, DiscriminationReport, MatchMetrics,
    PredictionReport,
};
use crate::features::{province_features, read_features, write_features, FeatureConfig, FlowTable, PopularityTable};
use crate::ingest::{ingest, read_province_xdr, write_xdr, CellCatalog, IngestError, UserSequence};
use crate::markov::{train, Direction, MarkovModel, ModelConfig};
use crate::profiles::{
    assign_profiles, feature_importance, write_importance, write_profiles, ForestConfig, ProfileConfig, ProfileError,
};
use crate::step::{
    encode_sequence, fit_thresholds, read_behaviors, refine, write_behaviors, RefinedBehavior, Thresholds,
};
use crate::synthgen::generate;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot use input {}: {reason}", path.display())]
    Input { path: PathBuf, reason: String },
    #[error("missing upstream artifact {}; run the stage that produces it first", .0.display())]
    MissingArtifact(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Internal(String),
}

impl PipelineError {
    /// 1 for problems with inputs or configuration, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input { .. } | Self::MissingArtifact(_) | Self::Config(_) => 1,
            Self::Internal(_) => 2,
        }
    }
}

fn internal<E: fmt::Display>(context: &str) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Internal(format!("{context}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Features,
    Profile,
    Encode,
    Train,
    Infer,
    Match,
    Eval,
    Synth,
}

impl Stage {
    /// Analysis stages in execution order.
    pub const ANALYSIS: [Stage; 8] = [
        Stage::Ingest,
        Stage::Features,
        Stage::Profile,
        Stage::Encode,
        Stage::Train,
        Stage::Infer,
        Stage::Match,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Profile => "profile",
            Stage::Encode => "encode",
            Stage::Train => "train",
            Stage::Infer => "infer",
            Stage::Match => "match",
            Stage::Eval => "eval",
            Stage::Synth => "synth",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ANALYSIS
            .into_iter()
            .chain([Stage::Synth])
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Runs one stage and echoes the resolved config into the output directory.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<(), PipelineError> {
    let start = Instant::now();
    create_dir(&config.out)?;
    write_text(&config.out.join("config.resolved"), &config.to_text())?;
    let rows = match stage {
        Stage::Synth => synth(config)?,
        Stage::Ingest => ingest_stage(config)?,
        _ => {
            let mut rows = 0;
            for p in provinces(config)? {
                let t = Instant::now();
                let n = match stage {
                    Stage::Features => features_stage(config, &p)?,
                    Stage::Profile => profile_stage(config, &p)?,
                    Stage::Encode => encode_stage(config, &p)?,
                    Stage::Train => train_stage(config, &p)?,
                    Stage::Infer => infer_stage(config, &p)?,
                    Stage::Match => match_stage(config, &p)?,
                    Stage::Eval => eval_stage(config, &p)?,
                    Stage::Ingest | Stage::Synth => unreachable!(),
                };
                log::info!("{stage} [{p}]: {n} rows in {:.2?}", t.elapsed());
                rows += n;
            }
            if stage == Stage::Eval {
                write_top_report(config)?;
            }
            rows
        }
    };
    log::info!("{stage}: {rows} rows in {:.2?}", start.elapsed());
    Ok(())
}

/// Runs every analysis stage in order.
pub fn run_all(config: &PipelineConfig) -> Result<(), PipelineError> {
    for stage in Stage::ANALYSIS {
        run_stage(stage, config)?;
    }
    Ok(())
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path)
        .map_err(|e| internal("creating output directory")(&format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PipelineError::Internal(format!("creating {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| PipelineError::Internal(format!("writing {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(internal("serializing json"))?;
    text.push('\n');
    write_text(path, &text)
}

fn open_input(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(|e| PipelineError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn open_artifact(path: &Path) -> Result<BufReader<File>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.to_path_buf()));
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PipelineError::Internal(format!("opening {}: {e}", path.display())))
}

fn artifact_error<E: fmt::Display>(path: &Path) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Internal(format!("reading {}: {e}", path.display()))
}

fn input_error<E: fmt::Display>(path: &Path) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn read_catalog(config: &PipelineConfig) -> Result<CellCatalog, PipelineError> {
    let path = config.catalog_path();
    CellCatalog::from_reader(open_input(&path)?).map_err(|e| input_error(&path)(&e))
}

fn ingest_dir(config: &PipelineConfig) -> PathBuf {
    config.out.join("ingest")
}

fn province_xdr_path(config: &PipelineConfig, province: &str) -> PathBuf {
    ingest_dir(config).join(format!("{province}.xdr.csv"))
}

fn province_dir(config: &PipelineConfig, province: &str) -> PathBuf {
    config.out.join(province)
}

/// Provinces produced by ingest, optionally narrowed to the configured one.
fn provinces(config: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    if let Some(p) = &config.province {
        let path = province_xdr_path(config, p);
        if !path.exists() {
            return Err(PipelineError::MissingArtifact(path));
        }
        return Ok(vec![p.clone()]);
    }
    let dir = ingest_dir(config);
    let report = dir.join("report.json");
    if !report.exists() {
        return Err(PipelineError::MissingArtifact(report));
    }
    let mut out: Vec<String> = std::fs::read_dir(&dir)
        .map_err(artifact_error(&dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()
                .and_then(|n| n.strip_suffix(".xdr.csv"))
                .map(str::to_string)
        })
        .collect();
    out.sort();
    Ok(out)
}

fn synth(config: &PipelineConfig) -> Result<usize, PipelineError> {
    let mut spec = config.synth.clone();
    spec.seed = config.seed;
    let data = generate(&spec).map_err(|e| PipelineError::Config(e.to_string()))?;
    let xdr = config.xdr_path();
    write_xdr(create(&xdr)?, &data.users, false).map_err(internal("writing synthetic xdr"))?;
    data.catalog
        .write(create(&config.catalog_path())?)
        .map_err(internal("writing synthetic catalog"))?;
    write_json(&config.ground_truth_path(), &data.truth)?;
    Ok(data.users.iter().map(|u| u.events.len()).sum())
}

fn ingest_stage(config: &PipelineConfig) -> Result<usize, PipelineError> {
    let catalog = read_catalog(config)?;
    let xdr = config.xdr_path();
    let (datasets, report) = ingest(open_input(&xdr)?, &catalog, config.max_missing_rate).map_err(|e| match e {
        IngestError::Io(_) | IngestError::Csv(_) | IngestError::Header { .. } | IngestError::Malformed { .. } => {
            input_error(&xdr)(&e)
        }
        IngestError::InvalidCell { .. } => internal("ingest")(&e),
    })?;
    let dir = ingest_dir(config);
    create_dir(&dir)?;
    for (p, users) in &datasets {
        write_xdr(create(&province_xdr_path(config, p))?, users, true).map_err(internal("writing province xdr"))?;
    }
    write_json(&dir.join("report.json"), &report)?;
    log::info!(
        "ingest: {} rows, {} users parsed, {} accepted ({} full), {} provinces",
        report.rows,
        report.users_parsed,
        report.accepted,
        report.full_sequence_users,
        datasets.len()
    );
    Ok(report.rows)
}

fn read_users(config: &PipelineConfig, province: &str) -> Result<Vec<UserSequence>, PipelineError> {
    let path = province_xdr_path(config, province);
    read_province_xdr(open_artifact(&path)?, province).map_err(|e| artifact_error(&path)(&e))
}

fn features_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let catalog = read_catalog(config)?;
    let users = read_users(config, p)?;
    let fc = FeatureConfig {
        diversity_window: config.diversity_window,
    };
    let pf = province_features(p, &users, &catalog, &fc).map_err(internal("features"))?;
    let dir = province_dir(config, p);
    write_features(create(&dir.join("features.csv"))?, &pf.users).map_err(internal("writing features"))?;
    pf.popularity
        .write(create(&dir.join("popularity.csv"))?, &catalog)
        .map_err(internal("writing popularity table"))?;
    pf.flow
        .write(create(&dir.join("flow.csv"))?, &catalog)
        .map_err(internal("writing flow table"))?;
    Ok(pf.users.len())
}

fn profile_config(config: &PipelineConfig) -> ProfileConfig {
    ProfileConfig {
        seed: config.seed,
        kmeans_restarts: config.kmeans_restarts,
        forest: ForestConfig {
            n_trees: config.forest_trees,
            max_depth: config.forest_depth,
            max_features: None,
            seed: config.seed,
        },
        ..Default::default()
    }
}

fn profile_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let dir = province_dir(config, p);
    let path = dir.join("features.csv");
    let features = read_features(open_artifact(&path)?).map_err(|e| artifact_error(&path)(&e))?;
    let pc = profile_config(config);
    let profiles = match assign_profiles(&features, &pc) {
        Ok(p) => p,
        Err(ProfileError::Degenerate(msg)) => {
            log::warn!("profile [{p}]: {msg}; no profiles assigned");
            Vec::new()
        }
        Err(e) => return Err(internal("profiles")(&e)),
    };
    write_profiles(create(&dir.join("profiles.csv"))?, &profiles).map_err(internal("writing profiles"))?;
    let labels: Vec<_> = profiles.iter().map(|a| a.traffic_profile).collect();
    let importance = if profiles.is_empty() {
        Vec::new()
    } else {
        match feature_importance(&features, &labels, &pc) {
            Ok(i) => i,
            Err(e @ (ProfileError::TooFewUsers { .. } | ProfileError::SingleClass)) => {
                log::warn!("profile [{p}]: {e}; importance not computed");
                Vec::new()
            }
            Err(e) => return Err(internal("feature importance")(&e)),
        }
    };
    write_importance(create(&dir.join("importance.csv"))?, &importance).map_err(internal("writing importance"))?;
    Ok(profiles.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SplitRow {
    user_id: String,
    split: String,
    full_sequence: u8,
}

const TRAIN: &str = "train";
const TEST: &str = "test";

/// Holds out a seeded fraction of the full-sequence users for testing.
pub fn split_users(users: &[UserSequence], test_fraction: f64, seed: u64) -> Vec<bool> {
    let mut full: Vec<usize> = (0..users.len()).filter(|&i| users[i].full_sequence).collect();
    full.sort_by(|&a, &b| users[a].user_id.cmp(&users[b].user_id));
    full.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5_9117])));
    let n_test = (test_fraction * full.len() as f64).round() as usize;
    let mut is_test = vec![false; users.len()];
    for &i in &full[..n_test] {
        is_test[i] = true;
    }
    is_test
}

fn encode_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let catalog = read_catalog(config)?;
    let users = read_users(config, p)?;
    let dir = province_dir(config, p);
    let pop_path = dir.join("popularity.csv");
    let flow_path = dir.join("flow.csv");
    let pop =
        PopularityTable::read(open_artifact(&pop_path)?, &catalog, p).map_err(|e| artifact_error(&pop_path)(&e))?;
    let flow = FlowTable::read(open_artifact(&flow_path)?, &catalog, p).map_err(|e| artifact_error(&flow_path)(&e))?;
    let thresholds = match config.thresholds {
        ThresholdSource::Fit => fit_thresholds(p, &users, &catalog).map_err(internal("fitting thresholds"))?,
        ThresholdSource::Load => {
            let base = config.thresholds_dir.clone().unwrap_or_else(|| config.out.clone());
            let path = base.join(p).join("thresholds.csv");
            Thresholds::read(open_input(&path)?).map_err(|e| input_error(&path)(&e))?
        }
    };
    thresholds
        .write(create(&dir.join("thresholds.csv"))?)
        .map_err(internal("writing thresholds"))?;
    let encoded = users
        .par_iter()
        .map(|u| encode_sequence(u, &thresholds, &pop, &flow, &catalog, config.diversity_window))
        .collect::<Result<Vec<_>, _>>()
        .map_err(internal("encoding"))?;
    write_behaviors(create(&dir.join("behaviors.csv"))?, &encoded).map_err(internal("writing behaviors"))?;
    let is_test = split_users(&users, config.test_fraction, config.seed);
    let mut w = csv::Writer::from_writer(create(&dir.join("split.csv"))?);
    for (u, &t) in users.iter().zip(&is_test) {
        w.serialize(SplitRow {
            user_id: u.user_id.clone(),
            split: if t { TEST } else { TRAIN }.into(),
            full_sequence: u.full_sequence as u8,
        })
        .map_err(internal("writing split"))?;
    }
    w.flush().map_err(internal("writing split"))?;
    Ok(encoded.iter().map(|s| s.steps.len()).sum())
}

type TestSet = Vec<(String, Vec<RefinedBehavior>)>;

/// Refined train and test sequences of a province, in user-id order.
fn load_split(config: &PipelineConfig, p: &str) -> Result<(Vec<Vec<RefinedBehavior>>, TestSet), PipelineError> {
    let dir = province_dir(config, p);
    let bpath = dir.join("behaviors.csv");
    let spath = dir.join("split.csv");
    let behaviors = read_behaviors(open_artifact(&bpath)?).map_err(|e| artifact_error(&bpath)(&e))?;
    let mut reader = csv::Reader::from_reader(open_artifact(&spath)?);
    let split: BTreeMap<String, String> = reader
        .deserialize::<SplitRow>()
        .map(|r| r.map(|r| (r.user_id, r.split)))
        .collect::<Result<_, _>>()
        .map_err(|e| artifact_error(&spath)(&e))?;
    let (mut train_set, mut test_set) = (Vec::new(), Vec::new());
    for seq in behaviors {
        let refined = refine(&seq.steps);
        match split.get(&seq.user_id).map(String::as_str) {
            Some(TEST) => test_set.push((seq.user_id, refined)),
            Some(TRAIN) => train_set.push(refined),
            _ => {
                return Err(PipelineError::Internal(format!(
                    "user {} in {} has no split assignment in {}",
                    seq.user_id,
                    bpath.display(),
                    spath.display()
                )))
            }
        }
    }
    Ok((train_set, test_set))
}

fn model_config(config: &PipelineConfig) -> ModelConfig {
    ModelConfig {
        time_mode: config.time_mode,
        alpha: config.alpha,
        rt_mode: config.rt_mode,
    }
}

fn train_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let (train_set, _) = load_split(config, p)?;
    let model = train(&train_set, model_config(config)).map_err(internal("training"))?;
    let path = province_dir(config, p).join("model.txt");
    model.write(create(&path)?).map_err(internal("writing model"))?;
    log::info!(
        "train [{p}]: {} sequences, {} states",
        train_set.len(),
        model.n_states()
    );
    Ok(train_set.len())
}

/// Loads the trained model, applying the configured scoring parameters.
fn load_model(config: &PipelineConfig, p: &str) -> Result<MarkovModel, PipelineError> {
    let path = province_dir(config, p).join("model.txt");
    let model = MarkovModel::read(open_artifact(&path)?).map_err(|e| artifact_error(&path)(&e))?;
    if model.config().time_mode != config.time_mode {
        return Err(PipelineError::Config(format!(
            "{} was trained with time_mode = {}; retrain for time_mode = {}",
            path.display(),
            model.config().time_mode,
            config.time_mode
        )));
    }
    model
        .with_scoring(config.alpha, config.rt_mode)
        .map_err(|e| PipelineError::Config(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Skipped {
    skipped: String,
}

fn infer_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let model = load_model(config, p)?;
    let (_, test) = load_split(config, p)?;
    let seqs: Vec<Vec<RefinedBehavior>> = test.iter().map(|(_, s)| s.clone()).collect();
    let dir = province_dir(config, p);
    let mut reports = Vec::new();
    let mut w = csv::Writer::from_writer(create(&dir.join("report_prediction.csv"))?);
    w.write_record(["direction", "user_id", "metric", "mean", "std"])
        .map_err(internal("writing prediction report"))?;
    for direction in [Direction::MobilityGivenTraffic, Direction::TrafficGivenMobility] {
        let r: PredictionReport =
            prediction_report(&model, &seqs, direction, config.repeats, config.seed).map_err(internal("prediction"))?;
        let dname = serde_json::to_value(direction).map_err(internal("prediction"))?;
        let dname = dname.as_str().unwrap_or_default().to_string();
        for u in &r.per_user {
            let a = &u.accuracy;
            for (metric, ms) in [
                ("overall", a.overall),
                ("trc", a.trc),
                ("disc", a.disc),
                ("rep", a.rep),
                ("sta", a.sta),
            ] {
                w.write_record([
                    dname.as_str(),
                    test[u.user].0.as_str(),
                    metric,
                    &ms.mean.to_string(),
                    &ms.std.to_string(),
                ])
                .map_err(internal("writing prediction report"))?;
            }
        }
        reports.push(r);
    }
    w.flush().map_err(internal("writing prediction report"))?;
    write_json(&dir.join("prediction.json"), &reports)?;
    Ok(seqs.len())
}

fn match_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let model = load_model(config, p)?;
    let (_, test) = load_split(config, p)?;
    let dir = province_dir(config, p);
    let json_path = dir.join("matching.json");
    if test.is_empty() {
        log::warn!("match [{p}]: no test users");
        write_json(
            &json_path,
            &Skipped {
                skipped: "no test users".into(),
            },
        )?;
        return Ok(0);
    }
    let seqs: Vec<Vec<RefinedBehavior>> = test.iter().map(|(_, s)| s.clone()).collect();
    let m: MatchMetrics = matching_report(&model, &seqs).map_err(internal("matching"))?;
    let mut w = csv::Writer::from_writer(create(&dir.join("report_matching.csv"))?);
    w.write_record(["user_id", "true_rank", "hamming", "minmax_gt"])
        .map_err(internal("writing matching report"))?;
    for (u, (id, _)) in test.iter().enumerate() {
        w.write_record([
            id.as_str(),
            &(m.true_rank[u] + 1).to_string(),
            &m.hamming[u].to_string(),
            &m.minmax_gt[u].to_string(),
        ])
        .map_err(internal("writing matching report"))?;
    }
    w.flush().map_err(internal("writing matching report"))?;
    let mut w = csv::Writer::from_writer(create(&dir.join("report_topk.csv"))?);
    w.write_record(["cutoff", "accuracy"])
        .map_err(internal("writing top-k report"))?;
    w.write_record(["top1", &m.top1.to_string()])
        .map_err(internal("writing top-k report"))?;
    for t in &m.top_k {
        w.write_record([format!("top{}%", t.percent), t.accuracy.to_string()])
            .map_err(internal("writing top-k report"))?;
    }
    w.flush().map_err(internal("writing top-k report"))?;
    write_json(&json_path, &m)?;
    Ok(seqs.len())
}

fn eval_stage(config: &PipelineConfig, p: &str) -> Result<usize, PipelineError> {
    let dir = province_dir(config, p);
    let read_json = |name: &str| -> Result<serde_json::Value, PipelineError> {
        let path = dir.join(name);
        serde_json::from_reader(open_artifact(&path)?).map_err(|e| artifact_error(&path)(&e))
    };
    let prediction = read_json("prediction.json")?;
    let matching = read_json("matching.json")?;
    let model = load_model(config, p)?;
    let (train_set, test) = load_split(config, p)?;
    let seqs: Vec<Vec<RefinedBehavior>> = test.iter().map(|(_, s)| s.clone()).collect();
    let discrimination = if seqs.len() >= 2 {
        let d: DiscriminationReport =
            discrimination_report(&model, &seqs, config.bins, derive_seed(config.seed, &[0xd15c]))
                .map_err(internal("discrimination"))?;
        let mut w = csv::Writer::from_writer(create(&dir.join("report_discrimination.csv"))?);
        w.write_record(["bin", "lower", "upper", "regular", "shuffled"])
            .map_err(internal("writing discrimination report"))?;
        for b in 0..d.bins {
            w.write_record([
                b.to_string(),
                (b as f64 / d.bins as f64).to_string(),
                ((b + 1) as f64 / d.bins as f64).to_string(),
                d.regular_hist.mass[b].to_string(),
                d.shuffled_hist.mass[b].to_string(),
            ])
            .map_err(internal("writing discrimination report"))?;
        }
        w.flush().map_err(internal("writing discrimination report"))?;
        let mut w = csv::Writer::from_writer(create(&dir.join("report_likelihood.csv"))?);
        w.write_record(["user_id", "pairing", "pi"])
            .map_err(internal("writing likelihood report"))?;
        for (u, (id, _)) in test.iter().enumerate() {
            w.write_record([id.as_str(), "regular", &d.regular_pi[u].to_string()])
                .map_err(internal("writing likelihood report"))?;
            w.write_record([id.as_str(), "shuffled", &d.shuffled_pi[u].to_string()])
                .map_err(internal("writing likelihood report"))?;
        }
        w.flush().map_err(internal("writing likelihood report"))?;
        serde_json::to_value(&d).map_err(internal("serializing discrimination"))?
    } else {
        log::warn!("eval [{p}]: fewer than two test users; discrimination skipped");
        serde_json::to_value(Skipped {
            skipped: "fewer than two test users".into(),
        })
        .map_err(internal("serializing discrimination"))?
    };
    let report = serde_json::json!({
        "province": p,
        "config": {
            "time_mode": config.time_mode.to_string(),
            "alpha": config.alpha,
            "rt_mode": config.rt_mode.to_string(),
            "bins": config.bins,
            "repeats": config.repeats,
            "seed": config.seed,
        },
        "model_states": model.n_states(),
        "train_users": train_set.len(),
        "test_users": seqs.len(),
        "prediction": prediction,
        "matching": matching,
        "discrimination": discrimination,
    });
    write_json(&dir.join("report.json"), &report)?;
    Ok(seqs.len())
}

fn write_top_report(config: &PipelineConfig) -> Result<(), PipelineError> {
    let mut all = serde_json::Map::new();
    for p in provinces(config)? {
        let path = province_dir(config, &p).join("report.json");
        let v: serde_json::Value =
            serde_json::from_reader(open_artifact(&path)?).map_err(|e| artifact_error(&path)(&e))?;
        all.insert(p, v);
    }
    write_json(
        &config.out.join("report.json"),
        &serde_json::json!({ "provinces": all }),
    )
}
