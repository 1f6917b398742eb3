use lexlabel::ErrorFamily;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] lexlabel::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("service failed: {0}")]
    Server(#[from] std::io::Error),
}

/// Exit code for usage and configuration errors, matching clap's own.
pub const EXIT_USAGE: u8 = 2;

pub fn family_code(family: ErrorFamily) -> u8 {
    match family {
        ErrorFamily::Vector => 10,
        ErrorFamily::Taxonomy => 11,
        ErrorFamily::Search => 12,
        ErrorFamily::Data => 13,
        ErrorFamily::Service => 14,
        ErrorFamily::Format => 15,
        ErrorFamily::Io => 16,
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    family: &'a str,
    exit_code: u8,
    message: String,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(e) => family_code(e.family()),
            CliError::Config(_) => EXIT_USAGE,
            CliError::Server(_) => family_code(ErrorFamily::Io),
        }
    }

    fn kind_and_family(&self) -> (&'static str, &'static str) {
        match self {
            CliError::Engine(e) => (e.kind(), family_name(e.family())),
            CliError::Config(_) => ("InvalidConfig", "usage"),
            CliError::Server(_) => ("Io", "io"),
        }
    }

    /// One JSON object on a single line, for standard error.
    pub fn to_json_line(&self) -> String {
        let (error, family) = self.kind_and_family();
        serde_json::to_string(&ErrorLine {
            error,
            family,
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .expect("plain struct")
    }
}

fn family_name(family: ErrorFamily) -> &'static str {
    match family {
        ErrorFamily::Vector => "vector",
        ErrorFamily::Taxonomy => "taxonomy",
        ErrorFamily::Search => "search",
        ErrorFamily::Data => "data",
        ErrorFamily::Service => "service",
        ErrorFamily::Format => "format",
        ErrorFamily::Io => "io",
    }
}
