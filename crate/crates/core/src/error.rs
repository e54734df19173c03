use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("render records do not match the scene/camera: {0}")]
    RecordMismatch(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
