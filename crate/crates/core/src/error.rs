use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum MdcpError {
    #[error("split fractions are invalid: {0}")]
    BadFractions(String),
    #[error("source {source_id} has an empty {fold} fold")]
    EmptySource { source_id: usize, fold: &'static str },
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("labels are degenerate: {0}")]
    DegenerateLabels(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("class {class} is out of range for {num_classes} classes")]
    ClassOutOfRange { class: u32, num_classes: usize },
    #[error("unknown source {0}")]
    UnknownSource(usize),
    #[error("uniform draw {0} is outside [0, 1]")]
    BadUniform(f64),
    #[error("p-value vector is empty")]
    EmptyVector,
    #[error("label vector is empty")]
    EmptyLabels,
    #[error("multiplier vector has a negative entry: {0}")]
    NegativeLambda(f64),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<MdcpError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MdcpError>;

impl MdcpError {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        MdcpError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
