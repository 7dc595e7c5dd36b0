#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Replay(#[from] amper::Error),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
