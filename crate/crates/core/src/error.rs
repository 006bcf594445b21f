use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown world `{0}`")]
    UnknownWorld(String),

    #[error("unknown ruleset `{ruleset}` in world `{world}`")]
    UnknownRuleset { world: String, ruleset: String },

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("value `{value}` is not a candidate of slot `{slot}`")]
    IllegalCandidate { slot: String, value: String },

    #[error("invalid world definition: {0}")]
    InvalidWorld(String),

    #[error("invalid door configuration: {0}")]
    InvalidDoorConfig(String),

    #[error("unresolved placeholder `[{0}]` while rendering")]
    UnresolvedPlaceholder(String),

    #[error("few-shot assembly: {0}")]
    FewShot(String),

    #[error("malformed events: {0}")]
    MalformedEvents(String),

    #[error("corrupt journal {path} at line {line}: {reason}")]
    CorruptJournal {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("record references unknown instance `{0}`")]
    UnresolvableInstance(String),

    #[error("model `{0}` has no category")]
    MissingCategory(String),

    #[error("empty partition for ruleset `{0}`")]
    EmptyPartition(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("fixture: {0}")]
    Fixture(String),

    #[error("authentication: {0}")]
    Authentication(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
