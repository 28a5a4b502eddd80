use convertible_codes::Error as CodeError;
use thiserror::Error;

/// Failures with a fixed exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("corrupt node: stripe {stripe}, node {node} ({reason})")]
    Corrupt { stripe: usize, node: usize, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) | CliError::Corrupt { .. } => 1,
            CliError::Parameter(_) => 2,
            CliError::Construction(_) => 3,
        }
    }
}

fn library_exit_code(e: &CodeError) -> u8 {
    match e {
        CodeError::Parameter(_)
        | CodeError::Regime(_)
        | CodeError::Dimension(_)
        | CodeError::InvalidField(_)
        | CodeError::PartitionMismatch(_) => 2,
        CodeError::Construction(_) | CodeError::SearchExhausted(_) | CodeError::Budget(_) => 3,
        _ => 1,
    }
}

/// 0 success, 1 verification or I/O failure, 2 bad parameters, 3 code
/// construction failure.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.exit_code();
        }
        if let Some(e) = cause.downcast_ref::<CodeError>() {
            return library_exit_code(e);
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_root_cause() {
        let e = anyhow::Error::new(CodeError::SearchExhausted("x".into())).context("building final code");
        assert_eq!(exit_code(&e), 3);
        let e: anyhow::Error = Err::<(), _>(CodeError::Regime("x".into())).context("planning").unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(CliError::Corrupt { stripe: 1, node: 2, reason: "short".into() });
        assert_eq!(exit_code(&e), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }
}
