use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EpochReport;
use crate::error::{Error, Result};

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub epoch: usize,
    pub loss: f64,
    pub auc: Option<f64>,
    pub seconds: f64,
    #[serde(default)]
    pub val_loss: Option<f64>,
    #[serde(default)]
    pub steps: usize,
}

impl From<&EpochReport> for LogLine {
    fn from(r: &EpochReport) -> Self {
        LogLine { epoch: r.epoch, loss: r.loss, auc: r.auc, seconds: r.seconds, val_loss: r.val_loss, steps: r.steps }
    }
}

pub struct TrainLog {
    path: PathBuf,
    file: File,
}

impl TrainLog {
    /// Truncates `path`.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TrainLog { path: path.to_path_buf(), file })
    }

    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(TrainLog { path: path.to_path_buf(), file })
    }

    pub fn write(&mut self, report: &EpochReport) -> Result<()> {
        let line = serde_json::to_string(&LogLine::from(report)).expect("log line serializes");
        writeln!(self.file, "{line}").map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Parse { path: path.to_path_buf(), source: e }))
        .collect()
}
