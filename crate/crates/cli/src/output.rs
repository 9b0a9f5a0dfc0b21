use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use cqnls::Error;

/// Version of the layout of every file this binary writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
    /// The identity suite ran but some checks missed their tolerance.
    ChecksFailed(Vec<String>),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Serde(e))
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Domain { .. }) | CliError::Config(_) => 2,
            CliError::Core(
                Error::Convergence { .. } | Error::Numeric(_) | Error::Blowup { .. },
            ) => 3,
            CliError::ChecksFailed(_) => 3,
            CliError::Core(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => "invalid_config",
            CliError::ChecksFailed(_) => "checks_failed",
        }
    }

    pub fn to_json(&self) -> String {
        let mut err = json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
        });
        let message = match self {
            CliError::Core(Error::Domain { message, .. }) => message.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::Config(m) => m.clone(),
            CliError::ChecksFailed(names) => {
                err["failed"] = json!(names);
                format!("{} check(s) outside tolerance", names.len())
            }
        };
        err["message"] = json!(message);
        match self {
            CliError::Core(Error::Convergence {
                bracket: Some((lo, hi)),
                ..
            }) => err["bracket"] = json!([lo, hi]),
            CliError::Core(Error::Blowup { trace, .. }) => err["horizon"] = json!(trace.horizon),
            _ => {}
        }
        json!({ "error": err }).to_string()
    }
}

/// Writes the files of one command into one directory. Every text file
/// carries the schema version and the resolved configuration.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
}

impl Output {
    pub fn new(dir: PathBuf, command: &'static str) -> Self {
        Self { dir, command }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir)?;
        Ok(self.dir.join(name))
    }

    fn header(&self, config: &Value) -> String {
        format!(
            "# schema_version: {SCHEMA_VERSION}\n# command: {}\n# config: {}\n",
            self.command, config
        )
    }

    pub fn envelope(&self, config: &Value, result: impl Serialize) -> Result<Value, CliError> {
        Ok(json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": config,
            "result": serde_json::to_value(result)?,
        }))
    }

    pub fn json(
        &self,
        name: &str,
        config: &Value,
        result: impl Serialize,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        let doc = self.envelope(config, result)?;
        std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(path)
    }

    /// CSV with `#`-prefixed header lines.
    pub fn text(&self, name: &str, config: &Value, body: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        std::fs::write(&path, self.header(config) + body)?;
        Ok(path)
    }

    pub fn bytes(&self, name: &str, data: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        std::fs::write(&path, data)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cqnls::DomainKind;

    #[test]
    fn exit_codes() {
        assert_eq!(
            CliError::from(Error::domain(DomainKind::FrequencyOutOfWindow, "x")).exit_code(),
            2
        );
        assert_eq!(CliError::from(Error::convergence("x", None)).exit_code(), 3);
        assert_eq!(CliError::from(Error::Structural("x".into())).exit_code(), 1);
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::ChecksFailed(vec!["a".into()]).exit_code(), 3);
    }

    #[test]
    fn error_json_is_machine_readable() {
        let e = CliError::from(Error::convergence("stalled", Some((0.1, 0.2))));
        let v: Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "convergence");
        assert_eq!(v["error"]["exit_code"], 3);
        assert_eq!(v["error"]["bracket"], json!([0.1, 0.2]));
        let e = CliError::from(Error::domain(
            DomainKind::FrequencyOutOfWindow,
            "omega = 0.2",
        ));
        let v: Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "frequency_out_of_window");
    }
}
