use std::path::PathBuf;

use crate::graph::{Pair, Period};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("score {0} is outside the judgment scale 0..=4")]
    InvalidScore(i64),

    #[error("a judgment must relate two different nodes, got `{0}` twice")]
    SelfPair(String),

    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),

    #[error("invalid usage `{id}`: {reason}")]
    InvalidUsage { id: String, reason: String },

    #[error("unknown period {0}")]
    UnknownPeriod(Period),

    #[error("edge {0} is not a usage-sense pair")]
    NotBipartite(Pair),

    #[error("judgment on {pair} mixes lemmas `{first}` and `{second}`")]
    MixedLemmas {
        pair: Pair,
        first: String,
        second: String,
    },

    #[error("at least one sense description is required")]
    EmptySenses,

    #[error("node `{0}` touches a weighted edge but has no cluster")]
    Unassigned(String),

    #[error("clusterings cover different node sets")]
    NodeSetMismatch,

    #[error("need at least {needed} usages, found {found}")]
    TooFewUsages { needed: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}:{line}:{column}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("judgment rejected: {0}")]
    Rejected(String),

    #[error("unknown lemma `{0}`")]
    UnknownLemma(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
