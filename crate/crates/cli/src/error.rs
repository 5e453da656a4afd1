use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: configuration, flags or files. Exit code 1.
    Validation(String),
    /// A numerical routine failed. Exit code 2.
    Numerical(String),
    /// A certification was requested and did not pass. Exit code 3.
    Verdict(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Verdict(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Verdict(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<aoi_mech::Error> for CliError {
    fn from(e: aoi_mech::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}
