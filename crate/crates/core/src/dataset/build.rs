use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use walkdir::WalkDir;

use super::manifest::{manifest_hash, DatasetManifest, ManifestEntry, Reject, MANIFEST_FILE};
use super::DatasetError;
use crate::contour::{extract_model_contour, sketch_from_png, ContourParams};
use crate::geometry::{fibonacci_viewpoints, load_mesh, TriangleMesh, Viewpoint};
use crate::raster::SketchImage;
use crate::render::{rasterize_silhouette, DEFAULT_MARGIN};
use crate::retrieval::{
    build_vocabulary, describe_sketch, IndexParams, InvertedIndex, LocalDescriptor, RetrievalError, SearchIndex,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub n_views: usize,
    pub canvas: usize,
    pub margin: f64,
    pub contour: ContourParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_views: 102,
            canvas: 512,
            margin: DEFAULT_MARGIN,
            contour: ContourParams::default(),
        }
    }
}

/// Silhouette of `mesh` from `view`, fit to a square canvas, turned into a contour sketch.
pub fn model_contour(
    mesh: &TriangleMesh,
    view: &Viewpoint,
    canvas: usize,
    margin: f64,
    params: &ContourParams,
) -> Result<SketchImage, DatasetError> {
    let silhouette = rasterize_silhouette(mesh, view, canvas, canvas, margin)?;
    Ok(extract_model_contour(&silhouette.to_gray().to_rgb(), canvas, canvas, params)?)
}

fn image_name(model: usize, view: usize) -> String {
    format!("images/m{model:04}_v{view:03}.png")
}

struct Candidate {
    mesh_path: String,
    category: String,
    mesh: TriangleMesh,
}

fn find_meshes(model_dir: &Path) -> Vec<PathBuf> {
    WalkDir::new(model_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            e.path()
                .extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| x.eq_ignore_ascii_case("off"))
        })
        .map(|e| e.into_path())
        .collect()
}

fn category_of(model_dir: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(model_dir).unwrap_or(path);
    let mut parts = rel.components();
    match (parts.next(), parts.next()) {
        (Some(first), Some(_)) => first.as_os_str().to_string_lossy().into_owned(),
        _ => "uncategorized".to_string(),
    }
}

fn storable(s: String) -> Result<String, DatasetError> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(DatasetError::UnstorablePath(s));
    }
    Ok(s)
}

/// Renders every OFF mesh under `model_dir` from `config.n_views` viewpoints
/// and writes the contour images plus `manifest.tsv` into `out_dir`.
///
/// Meshes that fail to parse, have no surface, or render to an empty contour
/// from any viewpoint are left out and listed as rejects. Model ids follow
/// the sorted order of the accepted mesh paths.
pub fn build_contour_dataset(
    model_dir: &Path,
    out_dir: &Path,
    config: &DatasetConfig,
) -> Result<DatasetManifest, DatasetError> {
    if config.n_views == 0 || config.canvas < crate::render::MIN_RENDER_SIZE {
        return Err(DatasetError::Config(format!(
            "need at least one view and a canvas of {} px",
            crate::render::MIN_RENDER_SIZE
        )));
    }
    let paths = find_meshes(model_dir);
    if paths.is_empty() {
        return Err(DatasetError::EmptyModelDir(model_dir.display().to_string()));
    }
    let views = fibonacci_viewpoints(config.n_views).map_err(|e| DatasetError::Config(e.to_string()))?;
    std::fs::create_dir_all(out_dir.join("images")).map_err(|e| DatasetError::io(out_dir, e))?;

    let mut rejects = Vec::new();
    let mut candidates = Vec::new();
    let loaded: Vec<_> = paths
        .par_iter()
        .map(|p| load_mesh(p).and_then(|m| m.normalized()).map(|(m, _)| m))
        .collect();
    for (path, result) in paths.iter().zip(loaded) {
        let shown = std::fs::canonicalize(path).unwrap_or_else(|_| path.clone()).display().to_string();
        let shown = storable(shown)?;
        match result {
            Ok(mesh) if mesh.surface_area() > 0.0 => candidates.push(Candidate {
                mesh_path: shown,
                category: storable(category_of(model_dir, path))?,
                mesh,
            }),
            Ok(_) => rejects.push(Reject {
                mesh_path: shown,
                reason: "mesh has no surface area".into(),
            }),
            Err(e) => rejects.push(Reject {
                mesh_path: shown,
                reason: e.to_string(),
            }),
        }
    }

    // Render under provisional names; a model is kept only if every view works.
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..views.len()).map(move |v| (c, v)))
        .collect();
    let provisional = |c: usize, v: usize| out_dir.join(format!("images/.pending_c{c:05}_v{v:03}.png"));
    let outcomes: Vec<Result<(), String>> = jobs
        .par_iter()
        .map(|&(c, v)| {
            let sketch = model_contour(&candidates[c].mesh, &views[v], config.canvas, config.margin, &config.contour)
                .map_err(|e| e.to_string())?;
            if sketch.is_blank() {
                return Err(format!("view {v} produced an empty contour"));
            }
            let png = sketch.to_png().map_err(|e| e.to_string())?;
            std::fs::write(provisional(c, v), png).map_err(|e| e.to_string())
        })
        .collect();

    let mut failures: Vec<Option<String>> = vec![None; candidates.len()];
    for (&(c, _), outcome) in jobs.iter().zip(&outcomes) {
        if let (Err(e), None) = (outcome, &failures[c]) {
            failures[c] = Some(e.clone());
        }
    }
    let mut entries = Vec::new();
    let mut next_id = 0usize;
    for (c, cand) in candidates.iter().enumerate() {
        if let Some(reason) = &failures[c] {
            log::warn!("rejecting {}: {reason}", cand.mesh_path);
            rejects.push(Reject {
                mesh_path: cand.mesh_path.clone(),
                reason: reason.clone(),
            });
            for v in 0..views.len() {
                let _ = std::fs::remove_file(provisional(c, v));
            }
            continue;
        }
        for v in 0..views.len() {
            let name = image_name(next_id, v);
            let target = out_dir.join(&name);
            std::fs::rename(provisional(c, v), &target).map_err(|e| DatasetError::io(&target, e))?;
            entries.push(ManifestEntry {
                model_id: next_id as u32,
                category: cand.category.clone(),
                mesh_path: cand.mesh_path.clone(),
                view: v as u32,
                image_path: name,
            });
        }
        next_id += 1;
    }
    for r in &rejects {
        log::warn!("skipped {}: {}", r.mesh_path, r.reason);
    }
    if next_id == 0 {
        return Err(DatasetError::NoUsableModels {
            dir: model_dir.display().to_string(),
            rejected: rejects.len(),
        });
    }

    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        n_views: config.n_views,
        canvas: config.canvas,
        margin: config.margin,
        contour: config.contour,
        entries,
        rejects,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_text()).map_err(|e| DatasetError::io(&path, e))?;
    Ok(manifest)
}

fn entry_descriptors(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    params: &IndexParams,
) -> Result<Vec<LocalDescriptor>, DatasetError> {
    let path = manifest.image_file(entry);
    let bytes = std::fs::read(&path).map_err(|_| DatasetError::MissingImage(path.display().to_string()))?;
    let sketch = sketch_from_png(&bytes, manifest.contour.threshold)?;
    Ok(describe_sketch(&sketch, &params.descriptor, params.keypoint_seed)?)
}

/// Trains a vocabulary on descriptors drawn evenly from every dataset image,
/// indexes all images, and writes the index to `out_path`.
pub fn build_search_index(
    manifest_path: &Path,
    out_path: &Path,
    params: &IndexParams,
) -> Result<SearchIndex, DatasetError> {
    params.descriptor.validate()?;
    let (manifest, hash) = DatasetManifest::load(manifest_path)?;
    if manifest.entries.is_empty() {
        return Err(RetrievalError::EmptyCorpus.into());
    }
    let per_image = params.training_sample.div_ceil(manifest.entries.len()).max(1);
    let samples: Vec<Vec<LocalDescriptor>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let descs = entry_descriptors(&manifest, e, params)?;
            if descs.len() <= per_image {
                return Ok(descs);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(params.vocabulary_seed ^ (i as u64).wrapping_mul(0x9E37_79B9));
            let mut picked = rand::seq::index::sample(&mut rng, descs.len(), per_image).into_vec();
            picked.sort_unstable();
            Ok(picked.into_iter().map(|k| descs[k].clone()).collect())
        })
        .collect::<Result<_, DatasetError>>()?;
    let training: Vec<LocalDescriptor> = samples.into_iter().flatten().collect();
    log::info!("training vocabulary of {} words on {} descriptors", params.vocabulary_size, training.len());
    let vocabulary = build_vocabulary(
        &training,
        params.vocabulary_size,
        params.kmeans_iterations,
        params.vocabulary_seed,
    )?;
    let histograms: Vec<Vec<u32>> = manifest
        .entries
        .par_iter()
        .map(|e| Ok(vocabulary.quantize(&entry_descriptors(&manifest, e, params)?)?))
        .collect::<Result<_, DatasetError>>()?;
    let index = InvertedIndex::build(&histograms, manifest.image_refs())?;
    let search = SearchIndex {
        params: *params,
        vocabulary,
        index,
        models: manifest.models(),
        manifest_hash: hash,
    };
    search.save(out_path)?;
    Ok(search)
}

/// Loads an index, and when a manifest is given, checks the index was built from it.
pub fn load_index(index_path: &Path, manifest_path: Option<&Path>) -> Result<SearchIndex, DatasetError> {
    let index = SearchIndex::load(index_path)?;
    if let Some(m) = manifest_path {
        let bytes = std::fs::read(m).map_err(|e| DatasetError::io(m, e))?;
        index.check_manifest(&manifest_hash(&bytes))?;
    }
    Ok(index)
}
