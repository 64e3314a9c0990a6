//! `manifest.tsv`: `#!`-prefixed parameter lines followed by one
//! tab-separated entry per contour image.
//!
//! ```text
//! #!sketchloop-manifest	1
//! #!views	102
//! #!canvas	512
//! #!margin	0.1
//! #!threshold	128
//! #!median_k	3
//! #!stroke	1
//! #!reject	<mesh path>	<reason>
//! #!columns	model_id	category	mesh_path	view	image_path
//! 0	chair	/data/chair/chair_00.off	0	images/m0000_v000.png
//! ```
//!
//! Image paths are relative to the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::DatasetError;
use crate::contour::ContourParams;
use crate::retrieval::{ImageRef, ModelRecord};

pub const MANIFEST_FILE: &str = "manifest.tsv";
const FORMAT_VERSION: u32 = 1;
const COLUMNS: [&str; 5] = ["model_id", "category", "mesh_path", "view", "image_path"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub model_id: u32,
    pub category: String,
    pub mesh_path: String,
    pub view: u32,
    pub image_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub mesh_path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Directory the manifest lives in; image paths resolve against it.
    pub root: PathBuf,
    pub n_views: usize,
    pub canvas: usize,
    pub margin: f64,
    pub contour: ContourParams,
    pub entries: Vec<ManifestEntry>,
    pub rejects: Vec<Reject>,
}

/// Lowercase hex SHA-256.
pub fn manifest_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn clean(s: &str) -> String {
    s.chars().map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c }).collect()
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#!sketchloop-manifest\t{FORMAT_VERSION}");
        let _ = writeln!(out, "#!views\t{}", self.n_views);
        let _ = writeln!(out, "#!canvas\t{}", self.canvas);
        let _ = writeln!(out, "#!margin\t{}", self.margin);
        let _ = writeln!(out, "#!threshold\t{}", self.contour.threshold);
        let _ = writeln!(out, "#!median_k\t{}", self.contour.median_k);
        let _ = writeln!(out, "#!stroke\t{}", self.contour.stroke);
        for r in &self.rejects {
            let _ = writeln!(out, "#!reject\t{}\t{}", clean(&r.mesh_path), clean(&r.reason));
        }
        let _ = writeln!(out, "#!columns\t{}", COLUMNS.join("\t"));
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.model_id, e.category, e.mesh_path, e.view, e.image_path
            );
        }
        out
    }

    pub fn parse(text: &str, root: &Path) -> Result<DatasetManifest, DatasetError> {
        let mut params: BTreeMap<String, String> = BTreeMap::new();
        let mut rejects = Vec::new();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let err = |message: String| DatasetError::Manifest { line: n, message };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if let Some(key) = fields[0].strip_prefix("#!") {
                match key {
                    "reject" if fields.len() == 3 => rejects.push(Reject {
                        mesh_path: fields[1].to_string(),
                        reason: fields[2].to_string(),
                    }),
                    "columns" if fields[1..] == COLUMNS => {}
                    "columns" => return Err(err(format!("unexpected columns {:?}", &fields[1..]))),
                    _ if fields.len() == 2 => {
                        params.insert(key.to_string(), fields[1].to_string());
                    }
                    _ => return Err(err(format!("malformed header line {line:?}"))),
                }
                continue;
            }
            if fields.len() != COLUMNS.len() {
                return Err(err(format!("expected {} fields, found {}", COLUMNS.len(), fields.len())));
            }
            entries.push(ManifestEntry {
                model_id: fields[0].parse().map_err(|_| err(format!("bad model id {:?}", fields[0])))?,
                category: fields[1].to_string(),
                mesh_path: fields[2].to_string(),
                view: fields[3].parse().map_err(|_| err(format!("bad view index {:?}", fields[3])))?,
                image_path: fields[4].to_string(),
            });
        }
        fn get<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str) -> Result<T, DatasetError> {
            let raw = params.get(key).ok_or_else(|| DatasetError::Manifest {
                line: 0,
                message: format!("missing #!{key}"),
            })?;
            raw.parse().map_err(|_| DatasetError::Manifest {
                line: 0,
                message: format!("bad #!{key} value {raw:?}"),
            })
        }
        let version: u32 = get(&params, "sketchloop-manifest")?;
        if version != FORMAT_VERSION {
            return Err(DatasetError::Manifest {
                line: 1,
                message: format!("unsupported manifest version {version}"),
            });
        }
        Ok(DatasetManifest {
            root: root.to_path_buf(),
            n_views: get(&params, "views")?,
            canvas: get(&params, "canvas")?,
            margin: get(&params, "margin")?,
            contour: ContourParams {
                threshold: get(&params, "threshold")?,
                median_k: get(&params, "median_k")?,
                stroke: get(&params, "stroke")?,
            },
            entries,
            rejects,
        })
    }

    /// Reads `path` and returns the manifest with the hash of its bytes.
    pub fn load(path: &Path) -> Result<(DatasetManifest, String), DatasetError> {
        let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| DatasetError::io(path, e))?;
        let root = path.parent().unwrap_or(Path::new("."));
        Ok((DatasetManifest::parse(text, root)?, manifest_hash(&bytes)))
    }

    pub fn image_file(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image_path)
    }

    pub fn image_refs(&self) -> Vec<ImageRef> {
        self.entries
            .iter()
            .map(|e| ImageRef {
                model: e.model_id,
                view: e.view,
            })
            .collect()
    }

    /// One record per model, in id order.
    pub fn models(&self) -> Vec<ModelRecord> {
        let mut seen: BTreeMap<u32, ModelRecord> = BTreeMap::new();
        for e in &self.entries {
            seen.entry(e.model_id).or_insert_with(|| ModelRecord {
                id: e.model_id,
                name: Path::new(&e.mesh_path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                category: e.category.clone(),
                mesh_path: e.mesh_path.clone(),
            });
        }
        seen.into_values().collect()
    }
}
