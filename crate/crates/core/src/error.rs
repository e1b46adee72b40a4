use std::fmt;

use thiserror::Error;

/// One validation failure, located by a dotted field path such as
/// `bss[2].links[0].channel`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Field(Issue),
    #[error("a PPDU must carry at least one MPDU")]
    EmptyPpdu,
    #[error("invalid scenario:\n{}", format_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("unknown preset `{0}` (expected fig2, fig4 or fig5)")]
    UnknownPreset(String),
    #[error("unknown MLD mode `{0}`")]
    UnknownMode(String),
    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}

impl ConfigError {
    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field(Issue {
            path: path.into(),
            message: message.into(),
        })
    }

    /// Every issue carried by this error, flattened.
    pub fn issues(&self) -> Vec<Issue> {
        match self {
            ConfigError::Field(issue) => vec![issue.clone()],
            ConfigError::Invalid(issues) => issues.clone(),
            other => vec![Issue {
                path: String::new(),
                message: other.to_string(),
            }],
        }
    }
}

fn format_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
