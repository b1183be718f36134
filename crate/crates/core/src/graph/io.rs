//! One JSON document per event plus a `manifest.json` per dataset
//! directory. Floats are written with 9 significant digits, which
//! round-trips every f32 exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EventGraph, GeneratorConfig, NODE_FEATURES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Deserialize)]
struct EventFile {
    nodes: Vec<[f32; NODE_FEATURES]>,
    senders: Vec<usize>,
    receivers: Vec<usize>,
    labels: Vec<u8>,
    #[serde(default)]
    node_valid: Option<Vec<u8>>,
    #[serde(default)]
    edge_valid: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator: GeneratorConfig,
    pub events: usize,
    pub files: Vec<String>,
}

/// Shortest form of `x` with 9 significant digits.
pub(crate) fn fmt_sig9(x: f32) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let s = format!("{x:.8e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    if exp == "0" {
        mantissa.to_string()
    } else {
        format!("{mantissa}e{exp}")
    }
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn event_to_json(g: &EventGraph) -> String {
    let mut s = String::from("{\"nodes\":[");
    for (i, row) in g.node_features().data().chunks(NODE_FEATURES).enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "[{},{},{}]", fmt_sig9(row[0]), fmt_sig9(row[1]), fmt_sig9(row[2]));
    }
    let _ = write!(
        s,
        "],\n\"senders\":[{}],\n\"receivers\":[{}],\n\"labels\":[{}]",
        join(g.senders().iter()),
        join(g.receivers().iter()),
        join(g.edge_labels().iter())
    );
    if g.is_padded() {
        let _ = write!(
            s,
            ",\n\"node_valid\":[{}],\n\"edge_valid\":[{}]",
            join(g.node_valid().iter().map(|&v| v as u8)),
            join(g.edge_valid().iter().map(|&v| v as u8))
        );
    }
    s.push_str("}\n");
    s
}

pub fn event_from_json(text: &str, path: &Path) -> Result<EventGraph> {
    let f: EventFile = serde_json::from_str(text).map_err(|e| Error::Parse { path: path.to_path_buf(), source: e })?;
    let n = f.nodes.len();
    let e = f.senders.len();
    let flag = |v: Option<Vec<u8>>, len| v.map(|m| m.into_iter().map(|x| x != 0).collect()).unwrap_or(vec![true; len]);
    EventGraph::with_masks(
        Tensor::new(vec![n, NODE_FEATURES], f.nodes.concat())?,
        f.senders,
        f.receivers,
        f.labels,
        flag(f.node_valid, n),
        flag(f.edge_valid, e),
    )
    .map_err(|err| Error::Data(format!("{}: {err}", path.display())))
}

pub fn write_event(path: &Path, g: &EventGraph) -> Result<()> {
    fs::write(path, event_to_json(g)).map_err(|e| Error::io(path, e))
}

pub fn read_event(path: &Path) -> Result<EventGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    event_from_json(&text, path)
}

pub fn event_file_name(i: usize) -> String {
    format!("event_{i:05}.json")
}

/// Writes `graphs` and the manifest into `dir`, creating it if needed.
/// Returns the paths written, manifest last.
pub fn write_dataset(dir: &Path, cfg: &GeneratorConfig, graphs: &[EventGraph]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(graphs.len() + 1);
    let mut files = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        let name = event_file_name(i);
        let path = dir.join(&name);
        write_event(&path, g)?;
        files.push(name);
        written.push(path);
    }
    let manifest = DatasetManifest { generator: cfg.clone(), events: graphs.len(), files };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<EventGraph>)> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.clone(), source: e })?;
    if manifest.files.len() != manifest.events {
        return Err(Error::Data(format!("{}: lists {} files for {} events", path.display(), manifest.files.len(), manifest.events)));
    }
    let graphs = manifest.files.iter().map(|f| read_event(&dir.join(f))).collect::<Result<Vec<_>>>()?;
    Ok((manifest, graphs))
}
