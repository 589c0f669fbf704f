//! Versioned CSV artifacts.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;

/// CSV body with a `# schema` line and a `# generated` timestamp line. The
/// timestamp is the only part that changes between identical runs.
pub struct Csv {
    text: String,
}

impl Csv {
    fn header(schema: &str) -> String {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# schema: {schema}/v1\n# generated: unix {secs}\n")
    }

    pub fn new(schema: &str, columns: &[&str]) -> Csv {
        let mut text = Self::header(schema);
        let _ = writeln!(text, "{}", columns.join(","));
        Csv { text }
    }

    /// Header lines followed by an already formatted CSV body.
    pub fn with_body(schema: &str, body: &str) -> Csv {
        Csv {
            text: Self::header(schema) + body,
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    /// Writes to `out`, or to stdout when `None`.
    pub fn emit(&self, out: Option<&Path>) -> anyhow::Result<()> {
        match out {
            Some(p) => std::fs::write(p, &self.text)
                .with_context(|| format!("cannot write {}", p.display())),
            None => {
                std::io::stdout().write_all(self.text.as_bytes())?;
                Ok(())
            }
        }
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
