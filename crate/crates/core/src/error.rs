use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The hypergeometric series did not reach its tail bound within the term cap.
    #[error("series did not converge after {terms} terms (|z| = {z_abs})")]
    SeriesNonConvergence { terms: usize, z_abs: f64 },

    /// `cot(pi r_c)` is singular because `r_c` sits on an integer.
    #[error("cot(pi r_c) pole: r_c = {rc} is within 1e-9 of an integer")]
    CotPole { rc: f64 },

    #[error("numerical evaluation failed: {0}")]
    Evaluation(String),

    #[error("evaluation failed at sample {index} (t = {t}): {source}")]
    AtSample {
        index: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config: {0}")]
    Validation(String),
}
