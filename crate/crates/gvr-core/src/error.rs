use thiserror::Error;

#[derive(Debug, Error)]
pub enum GvrError {
    #[error("invalid game shape: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate linear system: {0}")]
    Degenerate(String),
    #[error("graph has {nodes} nodes, over the enumeration budget of {budget}")]
    Budget { nodes: usize, budget: usize },
    #[error("spec error at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GvrError>;
