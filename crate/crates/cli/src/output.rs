use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Resolved invocation, echoed into every artifact.
pub struct Ctx {
    pub command: &'static str,
    pub config: Value,
    pub deterministic: bool,
    pub seed: u64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl Ctx {
    pub fn provenance(&self) -> Value {
        let mut p = json!({
            "tool": "tempora",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
        });
        if !self.deterministic {
            p["generated_unix"] = json!(now_unix());
        }
        p
    }

    fn comment_header(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(
            out,
            "# tempora {} {}",
            env!("CARGO_PKG_VERSION"),
            self.command
        )?;
        writeln!(out, "# config: {}", self.config)?;
        if !self.deterministic {
            writeln!(out, "# generated_unix: {}", now_unix())?;
        }
        Ok(())
    }

    /// Writes `#`-prefixed provenance lines followed by `body`.
    pub fn write_commented(
        &self,
        path: Option<&Path>,
        body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let (mut out, name) = open(path)?;
        self.comment_header(&mut out)
            .map_err(|e| io_error(&name, e))?;
        body(&mut out)?;
        out.flush().map_err(|e| io_error(&name, e))
    }

    /// Writes `{"provenance": .., "result": ..}` as pretty JSON.
    pub fn write_json<T: Serialize>(
        &self,
        path: Option<&Path>,
        result: &T,
    ) -> Result<(), CliError> {
        let doc = json!({
            "provenance": self.provenance(),
            "result": result,
        });
        write_value(path, &doc)
    }
}

pub fn write_value(path: Option<&Path>, doc: &Value) -> Result<(), CliError> {
    let (mut out, name) = open(path)?;
    serde_json::to_writer_pretty(&mut out, doc).map_err(|e| io_error(&name, e.into()))?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| io_error(&name, e))
}

fn io_error(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A buffered file, or stdout for `None` and `-`.
fn open(path: Option<&Path>) -> Result<(Box<dyn Write>, PathBuf), CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|e| io_error(p, e))?;
            Ok((Box::new(BufWriter::new(file)), p.to_path_buf()))
        }
        _ => Ok((
            Box::new(BufWriter::new(io::stdout().lock())),
            PathBuf::from("<stdout>"),
        )),
    }
}
