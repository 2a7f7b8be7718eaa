use thiserror::Error;

pub type Result<T> = std::result::Result<T, OpticsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    /// An argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid prescription: {0}")]
    InvalidPrescription(String),

    #[error("system has zero optical power")]
    ZeroPower,

    #[error("near-axis ray does not cross the axis in z range [{min_z}, {max_z}]")]
    NoAxisCrossing { min_z: f64, max_z: f64 },

    #[error("every traced ray was vignetted or totally internally reflected")]
    AllRaysDead,

    #[error("minimum not bracketed in [{lo}, {hi}] (search ended at {at})")]
    Bracket { lo: f64, hi: f64, at: f64 },

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl OpticsError {
    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            OpticsError::Domain(_)
                | OpticsError::InvalidPrescription(_)
                | OpticsError::Io(_)
                | OpticsError::Parse(_)
        )
    }
}

impl From<std::io::Error> for OpticsError {
    fn from(e: std::io::Error) -> Self {
        OpticsError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for OpticsError {
    fn from(e: serde_json::Error) -> Self {
        OpticsError::Parse(e.to_string())
    }
}
