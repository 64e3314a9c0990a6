//! Command-line front end. Every command prints one JSON document on success;
//! failures surface as [`CliError`], which `main` prints as a single JSON line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use sketchloop_core::contour::{extract_model_contour, sketch_from_png, ContourParams};
use sketchloop_core::dataset::{build_contour_dataset, build_search_index, load_index, DatasetConfig, MANIFEST_FILE};
use sketchloop_core::geometry::{
    load_mesh, normalize_unit, parse_pointcloud, sample_surface, write_mesh_obj, write_xyz, CloudFormat, PointCloud,
};
use sketchloop_core::render::{rasterize_silhouette, DEFAULT_MARGIN};
use sketchloop_core::retrieval::IndexParams;
use sketchloop_core::synth::write_corpus;

use crate::journal::{read_journal, JOURNAL_ENV};
use crate::session::{align_mesh, parse_direction, AlignmentDoc, Outcome, Workbench};

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    /// Process exit status.
    pub code: i32,
}

impl CliError {
    fn new(kind: &'static str, message: impl std::fmt::Display) -> CliError {
        CliError {
            kind,
            message: message.to_string(),
            code: 1,
        }
    }

    /// `{"error":{"kind":...,"message":...}}` on one line.
    pub fn to_json_line(&self) -> String {
        json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new("io", format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "sketchloop", version, about = "Sketch-guided retrieval and alignment of 3D models to point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render every OFF mesh under MODEL_DIR from a viewpoint lattice into contour images.
    BuildDataset {
        model_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 102)]
        views: usize,
        #[arg(long, default_value_t = 512)]
        canvas: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Train a vocabulary over a dataset and write the search index.
    BuildIndex {
        manifest: PathBuf,
        /// Defaults to index.skidx next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        k: usize,
        /// Vocabulary seed.
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 7)]
        keypoint_seed: u64,
        #[arg(long, default_value_t = 25)]
        iters: usize,
        #[arg(long, default_value_t = 500)]
        keypoints: usize,
        #[arg(long, default_value_t = 20_000)]
        sample: usize,
    },
    /// Rank models against a sketch PNG.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long, default_value_t = 10)]
        topk: usize,
        /// Reject the index if it was built from a different manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Fit a mesh to a point cloud with ICP.
    Align {
        #[arg(long)]
        cloud: PathBuf,
        /// xyz or ply; sniffed from the content when omitted.
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the aligned mesh here as OBJ, in the cloud's coordinates.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rasterize a mesh silhouette, or its contour sketch, along a direction.
    Render {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "dir", allow_hyphen_values = true)]
        direction: String,
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        contour: bool,
    },
    /// Sample a sparse point cloud from a mesh surface as XYZ.
    SampleCloud {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 300)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Write a small synthetic mesh corpus (teacup, chair, table, vase, animal).
    DemoCorpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_category: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run a session journal against a fresh workbench.
    Replay {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        journal: PathBuf,
    },
}

fn print(out: &mut dyn Write, value: serde_json::Value) -> Result<(), CliError> {
    writeln!(out, "{value}").map_err(|e| CliError::new("io", e))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn parse_cloud(path: &Path, format: Option<&str>) -> Result<PointCloud, CliError> {
    let bytes = read(path)?;
    let fmt = match format {
        Some(f) => f.parse().map_err(|e| CliError::new("validation", e))?,
        None => CloudFormat::sniff(&bytes),
    };
    parse_pointcloud(&bytes, fmt).map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(|e| CliError::new("io", e))?;
            return Ok(());
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("invalid arguments");
            return Err(CliError {
                kind: "usage",
                message: first.trim_start_matches("error: ").to_string(),
                code: 2,
            });
        }
    };
    match cli.command {
        Command::BuildDataset {
            model_dir,
            out: dir,
            views,
            canvas,
            margin,
        } => {
            let config = DatasetConfig {
                n_views: views,
                canvas,
                margin,
                contour: ContourParams::default(),
            };
            let m = build_contour_dataset(&model_dir, &dir, &config).map_err(|e| CliError::new("dataset", e))?;
            print(
                out,
                json!({
                    "manifest": dir.join(MANIFEST_FILE),
                    "models": m.models().len(),
                    "images": m.entries.len(),
                    "rejects": m.rejects.iter().map(|r| json!({"mesh_path": r.mesh_path, "reason": r.reason})).collect::<Vec<_>>(),
                }),
            )
        }
        Command::BuildIndex {
            manifest,
            out: path,
            k,
            seed,
            keypoint_seed,
            iters,
            keypoints,
            sample,
        } => {
            let mut params = IndexParams {
                keypoint_seed,
                vocabulary_size: k,
                kmeans_iterations: iters,
                vocabulary_seed: seed,
                training_sample: sample,
                ..IndexParams::default()
            };
            params.descriptor.keypoints = keypoints;
            let path = path.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("index.skidx"));
            let index = build_search_index(&manifest, &path, &params).map_err(|e| CliError::new("index", e))?;
            print(
                out,
                json!({
                    "index": path,
                    "vocabulary_size": index.vocabulary.len(),
                    "images": index.index.images().len(),
                    "models": index.models.len(),
                    "manifest_hash": index.manifest_hash,
                }),
            )
        }
        Command::Query {
            index,
            sketch,
            topk,
            manifest,
        } => {
            let idx = load_index(&index, manifest.as_deref()).map_err(|e| CliError::new("index", e))?;
            let s = sketch_from_png(&read(&sketch)?, ContourParams::default().threshold)
                .map_err(|e| CliError::new("validation", format!("{}: {e}", sketch.display())))?;
            let hits = idx.query(&s, topk).map_err(|e| CliError::new("retrieval", e))?;
            let hits: Vec<_> = hits
                .iter()
                .map(|h| {
                    let m = idx.model(h.model_id);
                    json!({
                        "model_id": h.model_id,
                        "best_view": h.best_view,
                        "similarity": h.similarity,
                        "name": m.map(|m| m.name.as_str()),
                        "category": m.map(|m| m.category.as_str()),
                    })
                })
                .collect();
            print(out, json!({ "hits": hits }))
        }
        Command::Align {
            cloud,
            format,
            model,
            seed,
            out: obj,
        } => {
            let raw = parse_cloud(&cloud, format.as_deref())?;
            let (points, normalization) = normalize_unit(&raw.points).map_err(|e| CliError::new("validation", e))?;
            let mesh = load_mesh(&model)
                .and_then(|m| m.normalized())
                .map_err(|e| CliError::new("parse", format!("{}: {e}", model.display())))?
                .0;
            let (result, aligned) =
                align_mesh(&mesh, &PointCloud::new(points), seed).map_err(|e| CliError::new("alignment", e))?;
            if let Some(path) = &obj {
                write(path, &write_mesh_obj(&aligned.map_vertices(|p| normalization.invert(p))))?;
            }
            print(out, json!({ "alignment": AlignmentDoc::from(&result), "obj": obj }))
        }
        Command::Render {
            model,
            direction,
            size,
            out: png,
            contour,
        } => {
            let dir = parse_direction(&direction).map_err(|e| CliError::new("validation", e))?;
            let view = sketchloop_core::geometry::Viewpoint::from_direction(0, dir)
                .ok_or_else(|| CliError::new("validation", "direction must be a finite non-zero vector"))?;
            let mesh = load_mesh(&model)
                .and_then(|m| m.normalized())
                .map_err(|e| CliError::new("parse", format!("{}: {e}", model.display())))?
                .0;
            let silhouette =
                rasterize_silhouette(&mesh, &view, size, size, DEFAULT_MARGIN).map_err(|e| CliError::new("render", e))?;
            let image = if contour {
                extract_model_contour(&silhouette.to_gray().to_rgb(), size, size, &ContourParams::default())
                    .map_err(|e| CliError::new("render", e))?
            } else {
                silhouette
            };
            write(&png, &image.to_png().map_err(|e| CliError::new("render", e))?)?;
            print(out, json!({ "image": png, "width": size, "height": size, "ink_pixels": image.ink_count() }))
        }
        Command::SampleCloud {
            model,
            points,
            seed,
            out: path,
        } => {
            let mesh = load_mesh(&model).map_err(|e| CliError::new("parse", format!("{}: {e}", model.display())))?;
            let cloud = sample_surface(&mesh, points, seed).map_err(|e| CliError::new("validation", e))?;
            let text = write_xyz(&cloud);
            match path {
                Some(p) => {
                    write(&p, &text)?;
                    print(out, json!({ "cloud": p, "points": cloud.len() }))
                }
                None => out.write_all(&text).map_err(|e| CliError::new("io", e)),
            }
        }
        Command::Serve {
            index,
            port,
            host,
            manifest,
        } => serve(&index, manifest.as_deref(), &host, port, out),
        Command::DemoCorpus { dir, per_category, seed } => {
            let paths = write_corpus(&dir, per_category, seed).map_err(|e| io_err(&dir, e))?;
            print(out, json!({ "meshes": paths }))
        }
        Command::Replay { index, journal } => {
            let idx = load_index(&index, None).map_err(|e| CliError::new("index", e))?;
            let entries = read_journal(&journal).map_err(|e| io_err(&journal, e))?;
            let bench = Workbench::new(idx);
            for (step, entry) in entries.iter().enumerate() {
                let outcome = bench
                    .apply(entry)
                    .map_err(|e| CliError::new(e.kind(), format!("step {step}: {e}")))?;
                print(out, outcome_summary(step, &outcome))?;
            }
            Ok(())
        }
    }
}

fn outcome_summary(step: usize, outcome: &Outcome) -> serde_json::Value {
    match outcome {
        Outcome::Session(doc) => json!({ "step": step, "state": doc.state, "cloud_points": doc.cloud_points }),
        Outcome::Hits(doc) => json!({ "step": step, "state": doc.state, "hits": doc.hits }),
        Outcome::Align(doc) => json!({ "step": step, "state": doc.state, "model_id": doc.model_id,
            "record": doc.alignment.as_ref().map(|a| a.record.as_str()), "alignment_error": doc.alignment_error }),
        Outcome::Contour(png) => json!({ "step": step, "state": "CONTOUR_READY", "png_bytes": png.len() }),
        Outcome::Export(doc) => json!({ "step": step, "state": doc.state, "vertex_count": doc.vertex_count,
            "face_count": doc.face_count, "metrics": doc.metrics }),
    }
}

fn serve(index: &Path, manifest: Option<&Path>, host: &str, port: u16, out: &mut dyn Write) -> Result<(), CliError> {
    let idx = load_index(index, manifest).map_err(|e| CliError::new("index", e))?;
    let mut bench = Workbench::new(idx);
    if let Some(dir) = std::env::var_os(JOURNAL_ENV).filter(|d| !d.is_empty()) {
        bench = bench
            .with_journal(Path::new(&dir))
            .map_err(|e| CliError::new("journal", e))?;
    }
    let app = crate::http::router(Arc::new(bench));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| CliError::new("io", format!("bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::new("io", e))?;
        print(out, json!({ "listening": addr.to_string() }))?;
        out.flush().map_err(|e| CliError::new("io", e))?;
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::new("io", e))
    })
}
