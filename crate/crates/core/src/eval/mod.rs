//! Measurement machinery for review outcomes: pairwise win matrices,
//! Bradley–Terry strength fitting with ranking, classification metrics
//! against ground-truth decisions, Pearson correlation, and feedback-aspect
//! log-ratios.

mod bt;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bt::{fit_bradley_terry, rank, BTFit, XI_CLAMP};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("match log is empty")]
    EmptyLog,
    #[error("match {index}: {a} cannot play itself")]
    SelfMatch { index: usize, a: String },
    #[error("match {index}: winner {winner} is neither {a} nor {b}")]
    UnknownWinner {
        index: usize,
        a: String,
        b: String,
        winner: String,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("{0} inputs needed, got {1}")]
    TooFew(usize, usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("aspect keys differ: only in agent {only_agent:?}, only in human {only_human:?}")]
    KeyMismatch {
        only_agent: Vec<String>,
        only_human: Vec<String>,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One pairwise match with its winner (named, not positional).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub a: String,
    pub b: String,
    pub winner: String,
}

/// A validated list of pairwise matches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchLog {
    matches: Vec<MatchRecord>,
}

impl MatchLog {
    pub fn new(matches: Vec<MatchRecord>) -> Result<Self, EvalError> {
        for (index, m) in matches.iter().enumerate() {
            if m.a == m.b {
                return Err(EvalError::SelfMatch {
                    index,
                    a: m.a.clone(),
                });
            }
            if m.winner != m.a && m.winner != m.b {
                return Err(EvalError::UnknownWinner {
                    index,
                    a: m.a.clone(),
                    b: m.b.clone(),
                    winner: m.winner.clone(),
                });
            }
        }
        Ok(Self { matches })
    }

    /// Convenience: `wins` matches won by `a` plus `losses` won by `b`.
    pub fn from_series(a: &str, b: &str, wins: usize, losses: usize) -> Self {
        let mut matches = Vec::with_capacity(wins + losses);
        for _ in 0..wins {
            matches.push(MatchRecord {
                a: a.to_string(),
                b: b.to_string(),
                winner: a.to_string(),
            });
        }
        for _ in 0..losses {
            matches.push(MatchRecord {
                a: a.to_string(),
                b: b.to_string(),
                winner: b.to_string(),
            });
        }
        Self { matches }
    }

    pub fn extend(&mut self, other: MatchLog) {
        self.matches.extend(other.matches);
    }

    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Competitors in lexicographic order.
    pub fn competitors(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .matches
            .iter()
            .flat_map(|m| [m.a.clone(), m.b.clone()])
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Parse the `a,b,winner` CSV format (header required).
    pub fn from_csv_reader(reader: impl Read) -> Result<Self, EvalError> {
        let mut csv_reader = csv::Reader::from_reader(reader);
        let mut matches = Vec::new();
        for row in csv_reader.deserialize() {
            let record: MatchRecord = row?;
            matches.push(record);
        }
        Self::new(matches)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, EvalError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("a,b,winner\n");
        for m in &self.matches {
            out.push_str(&format!("{},{},{}\n", m.a, m.b, m.winner));
        }
        out
    }
}

/// Pairwise win rates. `wins[i][j]` is the fraction of i-vs-j matches won by
/// i, `None` where the pair never met (including the diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub competitors: Vec<String>,
    pub wins: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<u64>>,
}

impl WinMatrix {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.competitors.iter().position(|c| c == name)
    }

    pub fn rate(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        self.wins[i][j]
    }
}

/// Build the win matrix from a match log; competitors are ordered
/// lexicographically.
pub fn win_matrix(log: &MatchLog) -> Result<WinMatrix, EvalError> {
    if log.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let competitors = log.competitors();
    let n = competitors.len();
    let index: BTreeMap<&str, usize> = competitors
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut win_counts = vec![vec![0u64; n]; n];
    let mut counts = vec![vec![0u64; n]; n];
    for m in log.matches() {
        let i = index[m.a.as_str()];
        let j = index[m.b.as_str()];
        counts[i][j] += 1;
        counts[j][i] += 1;
        let w = index[m.winner.as_str()];
        let l = if w == i { j } else { i };
        win_counts[w][l] += 1;
    }
    let wins = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j || counts[i][j] == 0 {
                        None
                    } else {
                        Some(win_counts[i][j] as f64 / counts[i][j] as f64)
                    }
                })
                .collect()
        })
        .collect();
    Ok(WinMatrix {
        competitors,
        wins,
        counts,
    })
}

/// Confusion counts plus the two headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub balanced_accuracy: f64,
    pub f1: f64,
}

/// Balanced accuracy = (TPR + TNR)/2, F1 = 2TP/(2TP+FP+FN). A rate whose
/// class is absent counts as 0; an F1 with an empty denominator is 0 — the
/// convention that scores an always-reject predictor 0.50 / 0.00.
pub fn classification_metrics(
    predictions: &[bool],
    truths: &[bool],
) -> Result<ClassificationReport, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut tn = 0u64;
    let mut fn_ = 0u64;
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let tpr = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let tnr = if tn + fp > 0 {
        tn as f64 / (tn + fp) as f64
    } else {
        0.0
    };
    let f1_denominator = 2 * tp + fp + fn_;
    let f1 = if f1_denominator > 0 {
        2.0 * tp as f64 / f1_denominator as f64
    } else {
        0.0
    };
    Ok(ClassificationReport {
        tp,
        fp,
        tn,
        fn_,
        balanced_accuracy: (tpr + tnr) / 2.0,
        f1,
    })
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFew(2, xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(EvalError::ZeroVariance("xs"));
    }
    if var_y == 0.0 {
        return Err(EvalError::ZeroVariance("ys"));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

pub const DEFAULT_SMOOTHING: f64 = 1e-9;

/// Per-aspect log-ratio of relative frequencies, ln((agent + ε)/(human + ε)).
/// Key sets must match; an aspect the agent never produced (count 0) yields a
/// large negative but finite value.
pub fn aspect_log_ratio(
    agent_counts: &BTreeMap<String, u64>,
    human_counts: &BTreeMap<String, u64>,
    smoothing: f64,
) -> Result<BTreeMap<String, f64>, EvalError> {
    let only_agent: Vec<String> = agent_counts
        .keys()
        .filter(|k| !human_counts.contains_key(*k))
        .cloned()
        .collect();
    let only_human: Vec<String> = human_counts
        .keys()
        .filter(|k| !agent_counts.contains_key(*k))
        .cloned()
        .collect();
    if !only_agent.is_empty() || !only_human.is_empty() {
        return Err(EvalError::KeyMismatch {
            only_agent,
            only_human,
        });
    }
    let agent_total: u64 = agent_counts.values().sum();
    let human_total: u64 = human_counts.values().sum();
    let frequency = |count: u64, total: u64| {
        if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        }
    };
    let mut ratios = BTreeMap::new();
    for (aspect, &agent_count) in agent_counts {
        let agent_frequency = frequency(agent_count, agent_total);
        let human_frequency = frequency(human_counts[aspect], human_total);
        ratios.insert(
            aspect.clone(),
            ((agent_frequency + smoothing) / (human_frequency + smoothing)).ln(),
        );
    }
    Ok(ratios)
}
