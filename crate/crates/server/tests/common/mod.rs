#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use sketchloop::Workbench;
use sketchloop_core::dataset::{build_contour_dataset, build_search_index, DatasetConfig, DatasetManifest, MANIFEST_FILE};
use sketchloop_core::geometry::{load_mesh, sample_surface, write_xyz};
use sketchloop_core::retrieval::{IndexParams, SearchIndex};
use sketchloop_core::synth::write_corpus;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub manifest: DatasetManifest,
    pub index: SearchIndex,
}

impl Fixture {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn index_path(&self) -> PathBuf {
        self.root().join("ds/index.skidx")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root().join("ds").join(MANIFEST_FILE)
    }

    pub fn bench(&self) -> Workbench {
        Workbench::new(self.index.clone())
    }

    pub fn model_id(&self, category: &str) -> u32 {
        self.index.models.iter().find(|m| m.category == category).unwrap().id
    }

    pub fn mesh_path(&self, id: u32) -> PathBuf {
        PathBuf::from(&self.index.model(id).unwrap().mesh_path)
    }

    /// PNG bytes of a dataset image.
    pub fn image(&self, model: u32, view: u32) -> Vec<u8> {
        let e = self.manifest.entries.iter().find(|e| e.model_id == model && e.view == view).unwrap();
        std::fs::read(self.manifest.image_file(e)).unwrap()
    }

    /// XYZ text of surface samples of a model in its original coordinates.
    pub fn cloud_xyz(&self, id: u32, n: usize, seed: u64) -> Vec<u8> {
        let mesh = load_mesh(&self.mesh_path(id)).unwrap();
        write_xyz(&sample_surface(&mesh, n, seed).unwrap())
    }
}

/// Five synthetic models, 40 views at 512 px, 128-word vocabulary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let models = dir.path().join("models");
        write_corpus(&models, 1, 0).unwrap();
        let config = DatasetConfig {
            n_views: 40,
            ..DatasetConfig::default()
        };
        let manifest = build_contour_dataset(&models, &dir.path().join("ds"), &config).unwrap();
        let params = IndexParams {
            vocabulary_size: 128,
            ..IndexParams::default()
        };
        let ds = dir.path().join("ds");
        let index = build_search_index(&ds.join(MANIFEST_FILE), &ds.join("index.skidx"), &params).unwrap();
        Fixture { dir, manifest, index }
    })
}
