use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes, sizes or settings that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty batch: {0}")]
    EmptyBatch(String),

    #[error("empty sequence: {0}")]
    EmptySequence(String),

    /// The API was called in a way it does not support.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("format error: missing column `{0}`")]
    MissingColumn(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("ingestion error: {} unreadable image(s): {}", .rows.len(), summarize_rows(.rows))]
    Ingestion { rows: Vec<(usize, String)> },

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("io error at {}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn summarize_rows(rows: &[(usize, String)]) -> String {
    const SHOWN: usize = 10;
    let mut parts: Vec<String> = rows
        .iter()
        .take(SHOWN)
        .map(|(row, why)| format!("row {row} ({why})"))
        .collect();
    if rows.len() > SHOWN {
        parts.push(format!("... and {} more", rows.len() - SHOWN));
    }
    parts.join(", ")
}
