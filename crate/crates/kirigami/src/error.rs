use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("numeric error at step {step}: {msg}")]
    Numeric { step: usize, msg: String },
    #[error("generation stalled: acceptance {rate:.4} over {window} candidates")]
    Stall { rate: f64, window: usize },
    #[error("verification failed for {ids:?} (min IoU {min_iou:.6})")]
    Verification { ids: Vec<String>, min_iou: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported entity {0}")]
    UnsupportedEntity(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
