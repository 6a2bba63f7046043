use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("similarity matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("similarity matrix has a negative entry at ({0}, {1})")]
    NegativeSimilarity(usize, usize),

    #[error("node {0} has zero degree")]
    ZeroDegree(usize),

    #[error("too few points ({n}) for k_min = {k_min}")]
    TooFewPoints { n: usize, k_min: usize },

    #[error("task {0} has no popularity rank in this cache")]
    UnrankedTask(usize),

    #[error("popularity vector is not a permutation of the cacheable task set")]
    NotAPermutation,

    #[error("cloudlet {cloudlet} has no rate estimate for UN {un}")]
    MissingRateEstimate { cloudlet: usize, un: usize },

    #[error("training window produced no cacheable requests; clustering is undefined")]
    NoCacheableRequests,

    #[error("no measured samples")]
    EmptySamples,

    #[error("sweep points have differing seed counts ({0} vs {1})")]
    RaggedSweep(usize, usize),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
