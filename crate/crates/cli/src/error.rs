use thiserror::Error;

/// Errors surfaced by the command-line tool; each maps to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 configuration, 3 data, 4 non-convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<dispmod::Error> for CliError {
    fn from(e: dispmod::Error) -> Self {
        use dispmod::Error as E;
        match e {
            E::InvalidConfig(_) | E::Unsupported(_) => CliError::Config(e.to_string()),
            E::NonConvergence { .. } | E::DomainEscape | E::AllReplicatesFailed { .. } => {
                CliError::NonConvergence(e.to_string())
            }
            E::Domain { .. }
            | E::RowDomain { .. }
            | E::Dimension(_)
            | E::RankDeficient { .. }
            | E::Identifiability(_)
            | E::Singular(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
