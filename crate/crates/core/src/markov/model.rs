use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;

use super::counts::TransitionCounts;
use super::state::{RtMode, StateKey, TimeMode, BEHAVIORS_PER_TOKEN};
use super::MarkovError;
use crate::step::{DistanceClass, MobilityTuple, RefinedBehavior, TrafficClass};

const MODEL_MAGIC: &str = "xdr-markov";
const MODEL_VERSION: &str = "v1";
const UNSEEN: u32 = u32::MAX;

/// Model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub time_mode: TimeMode,
    pub alpha: f64,
    pub rt_mode: RtMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            time_mode: TimeMode::Hour,
            alpha: 0.0,
            rt_mode: RtMode::All,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), MarkovError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(MarkovError::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Trained first-order Markov chain over [`StateKey`]s.
///
/// Counts are the source of truth; the dense probability tables are derived.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    config: ModelConfig,
    counts: TransitionCounts,
    states: Vec<StateKey>,
    id_of_code: Vec<u32>,
    freq: Vec<u64>,
    start: Vec<u64>,
    out_total: Vec<u64>,
    prob: Vec<f64>,
    log_prob: Vec<f64>,
}

/// Trains a model on the given sequences; sequences are counted independently.
pub fn train(corpus: &[Vec<RefinedBehavior>], config: ModelConfig) -> Result<MarkovModel, MarkovError> {
    let counts = count_corpus(corpus, config.time_mode);
    MarkovModel::from_counts(counts, config)
}

/// Counts a corpus in parallel shards.
pub fn count_corpus(corpus: &[Vec<RefinedBehavior>], mode: TimeMode) -> TransitionCounts {
    corpus
        .par_iter()
        .fold(TransitionCounts::new, |mut acc, seq| {
            let keys: Vec<StateKey> = seq.iter().map(|b| StateKey::from_behavior(b, mode)).collect();
            acc.add_sequence(&keys);
            acc
        })
        .reduce(TransitionCounts::new, TransitionCounts::merged)
}

impl MarkovModel {
    pub fn from_counts(counts: TransitionCounts, config: ModelConfig) -> Result<Self, MarkovError> {
        config.validate()?;
        if counts.is_empty() {
            return Err(MarkovError::EmptyCorpus);
        }
        let n_codes = config.time_mode.n_tokens() * BEHAVIORS_PER_TOKEN;
        let mut id_of_code = vec![UNSEEN; n_codes];
        let mut states = Vec::with_capacity(counts.state_freq.len());
        let mut freq = Vec::with_capacity(counts.state_freq.len());
        for (key, f) in &counts.state_freq {
            let code = key.code();
            if code >= n_codes {
                return Err(MarkovError::Format(format!(
                    "time token {} out of range for {} mode",
                    key.time_token, config.time_mode
                )));
            }
            id_of_code[code] = states.len() as u32;
            states.push(*key);
            freq.push(*f);
        }
        let n = states.len();
        let lookup = |k: &StateKey| -> Result<usize, MarkovError> {
            match id_of_code.get(k.code()) {
                Some(&id) if id != UNSEEN => Ok(id as usize),
                _ => Err(MarkovError::Format(format!("state {k:?} has no frequency entry"))),
            }
        };
        let mut start = vec![0u64; n];
        for (k, c) in &counts.start {
            start[lookup(k)?] += c;
        }
        let mut out_total = vec![0u64; n];
        let mut raw = vec![0u64; n * n];
        for ((a, b), c) in &counts.trans {
            let (i, j) = (lookup(a)?, lookup(b)?);
            out_total[i] += c;
            raw[i * n + j] += c;
        }
        let mut prob = vec![0.0; n * n];
        let mut log_prob = vec![f64::NEG_INFINITY; n * n];
        for i in 0..n {
            if out_total[i] == 0 {
                continue;
            }
            let total = out_total[i] as f64;
            for j in 0..n {
                let c = raw[i * n + j];
                if c > 0 {
                    let p = c as f64 / total;
                    prob[i * n + j] = p;
                    log_prob[i * n + j] = p.ln();
                }
            }
        }
        Ok(Self {
            config,
            counts,
            states,
            id_of_code,
            freq,
            start,
            out_total,
            prob,
            log_prob,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Same counts, different scoring parameters. The time mode cannot change.
    pub fn with_scoring(&self, alpha: f64, rt_mode: RtMode) -> Result<Self, MarkovError> {
        let mut m = self.clone();
        m.config.alpha = alpha;
        m.config.rt_mode = rt_mode;
        m.config.validate()?;
        Ok(m)
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn states(&self) -> &[StateKey] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_id(&self, key: &StateKey) -> Option<usize> {
        self.id_of_code_checked(key.code())
    }

    #[inline]
    pub(crate) fn id_of_code_checked(&self, code: usize) -> Option<usize> {
        match self.id_of_code.get(code) {
            Some(&id) if id != UNSEEN => Some(id as usize),
            _ => None,
        }
    }

    pub fn state_freq(&self, id: usize) -> u64 {
        self.freq[id]
    }

    pub fn start_count(&self, id: usize) -> u64 {
        self.start[id]
    }

    pub fn has_outgoing(&self, id: usize) -> bool {
        self.out_total[id] > 0
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.prob[from * self.states.len() + to]
    }

    #[inline]
    pub(crate) fn log_prob(&self, from: usize, to: usize) -> f64 {
        self.log_prob[from * self.states.len() + to]
    }

    /// Transition probability between two keys; 0 for unseen states or pairs.
    pub fn transition_prob(&self, from: &StateKey, to: &StateKey) -> f64 {
        match (self.state_id(from), self.state_id(to)) {
            (Some(i), Some(j)) => self.prob(i, j),
            _ => 0.0,
        }
    }

    /// Sum of each row of the transition matrix (0 for rows without outgoing mass).
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.states.len();
        (0..n).map(|i| self.prob[i * n..(i + 1) * n].iter().sum()).collect()
    }

    /// Model trained on the union of both corpora. Configs must agree.
    pub fn merge(&self, other: &MarkovModel) -> Result<MarkovModel, MarkovError> {
        if self.config != other.config {
            return Err(MarkovError::Config("cannot merge models with different configs".into()));
        }
        let mut counts = self.counts.clone();
        counts.merge(&other.counts);
        MarkovModel::from_counts(counts, self.config)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), MarkovError> {
        writeln!(
            w,
            "{MODEL_MAGIC} {MODEL_VERSION} time_mode={} alpha={} rt_mode={}",
            self.config.time_mode, self.config.alpha, self.config.rt_mode
        )?;
        for (id, s) in self.states.iter().enumerate() {
            writeln!(
                w,
                "state {id} {} {} {} {} {} {}",
                s.time_token, s.trc, s.disc, s.rep as u8, s.sta as u8, self.freq[id]
            )?;
        }
        for (id, &c) in self.start.iter().enumerate() {
            if c > 0 {
                writeln!(w, "start {id} {c}")?;
            }
        }
        for ((a, b), c) in &self.counts.trans {
            let i = self.state_id(a).expect("trained state");
            let j = self.state_id(b).expect("trained state");
            writeln!(w, "trans {i} {j} {c}")?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<MarkovModel, MarkovError> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| MarkovError::Format("empty model file".into()))??;
        let config = parse_header(&header)?;
        let mut states: Vec<StateKey> = Vec::new();
        let mut counts = TransitionCounts::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let lineno = lineno + 2;
            let bad = |msg: &str| MarkovError::Format(format!("line {lineno}: {msg}"));
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [] => continue,
                ["state", id, tt, trc, disc, rep, sta, freq] => {
                    let id: usize = id.parse().map_err(|_| bad("bad state id"))?;
                    if id != states.len() {
                        return Err(bad("state ids must be consecutive from 0"));
                    }
                    let key = StateKey::new(
                        tt.parse().map_err(|_| bad("bad time token"))?,
                        trc.parse::<TrafficClass>().map_err(|e| bad(&e))?,
                        MobilityTuple::new(
                            disc.parse::<DistanceClass>().map_err(|e| bad(&e))?,
                            parse_flag(rep).ok_or_else(|| bad("bad rep flag"))?,
                            parse_flag(sta).ok_or_else(|| bad("bad sta flag"))?,
                        ),
                    );
                    if let Some(prev) = states.last() {
                        if *prev >= key {
                            return Err(bad("states must be sorted"));
                        }
                    }
                    let freq: u64 = freq.parse().map_err(|_| bad("bad frequency"))?;
                    states.push(key);
                    counts.state_freq.insert(key, freq);
                }
                ["start", id, c] => {
                    let key = lookup_id(&states, id).ok_or_else(|| bad("unknown state id"))?;
                    let c: u64 = c.parse().map_err(|_| bad("bad count"))?;
                    *counts.start.entry(key).or_default() += c;
                }
                ["trans", a, b, c] => {
                    let ka = lookup_id(&states, a).ok_or_else(|| bad("unknown state id"))?;
                    let kb = lookup_id(&states, b).ok_or_else(|| bad("unknown state id"))?;
                    let c: u64 = c.parse().map_err(|_| bad("bad count"))?;
                    *counts.trans.entry((ka, kb)).or_default() += c;
                }
                _ => return Err(bad("unrecognized record")),
            }
        }
        MarkovModel::from_counts(counts, config)
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn lookup_id(states: &[StateKey], id: &str) -> Option<StateKey> {
    id.parse::<usize>().ok().and_then(|i| states.get(i).copied())
}

fn parse_header(line: &str) -> Result<ModelConfig, MarkovError> {
    let bad = || MarkovError::Format(format!("bad model header {line:?}"));
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [magic, version, rest @ ..] = fields.as_slice() else {
        return Err(bad());
    };
    if *magic != MODEL_MAGIC {
        return Err(bad());
    }
    if *version != MODEL_VERSION {
        return Err(MarkovError::Format(format!("unsupported model version {version}")));
    }
    let (mut time_mode, mut alpha, mut rt_mode) = (None, None, None);
    for kv in rest {
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        match k {
            "time_mode" => time_mode = Some(v.parse().map_err(MarkovError::Config)?),
            "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| bad())?),
            "rt_mode" => rt_mode = Some(v.parse().map_err(MarkovError::Config)?),
            _ => return Err(bad()),
        }
    }
    match (time_mode, alpha, rt_mode) {
        (Some(time_mode), Some(alpha), Some(rt_mode)) => Ok(ModelConfig {
            time_mode,
            alpha,
            rt_mode,
        }),
        _ => Err(bad()),
    }
}
