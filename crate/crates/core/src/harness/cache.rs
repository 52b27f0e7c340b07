use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{hex_digest, TokenizeConfig, VocabPolicy};
use crate::embedding::{EmbeddingSpace, SpaceMetadata};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sgns::{TrainConfig, TrainReport, Trained};

/// Trained spaces on disk, keyed by slice fingerprint and training
/// configuration. Each entry is a text embedding file plus a JSON sidecar;
/// the sidecar is written last, so an entry without one is ignored.
#[derive(Debug, Clone)]
pub struct TrainingCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    metadata: SpaceMetadata,
    report: TrainReport,
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl TrainingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(
        slice_fingerprint: &str,
        config: &TrainConfig,
        vocab: VocabPolicy,
        tokenize: &TokenizeConfig,
        precision: &str,
    ) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(slice_fingerprint.as_bytes());
        hasher.update(serde_json::to_vec(config)?);
        hasher.update(serde_json::to_vec(&vocab)?);
        hasher.update(serde_json::to_vec(tokenize)?);
        hasher.update(precision.as_bytes());
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        Ok(hex_digest(hasher))
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.vec")), self.dir.join(format!("{key}.json")))
    }

    pub fn load<T: Scalar>(&self, key: &str) -> Result<Option<Trained<T>>> {
        let (vec_path, json_path) = self.paths(key);
        let Ok(sidecar) = fs::read(&json_path) else {
            return Ok(None);
        };
        let sidecar: Sidecar = serde_json::from_slice(&sidecar)?;
        let file = fs::File::open(&vec_path).map_err(|e| Error::io(&vec_path, e))?;
        let space = EmbeddingSpace::read_text(BufReader::new(file), sidecar.metadata)?;
        Ok(Some(Trained { space, report: sidecar.report }))
    }

    /// Store an entry. Files are written under temporary names and renamed
    /// into place, so readers never see a partial entry.
    pub fn store<T: Scalar>(&self, key: &str, trained: &Trained<T>) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let (vec_path, json_path) = self.paths(key);
        let sidecar = Sidecar {
            metadata: trained.space.metadata().clone(),
            report: trained.report.clone(),
        };
        let mut vec_bytes = Vec::new();
        trained
            .space
            .write_text(&mut vec_bytes)
            .map_err(|e| Error::io(&vec_path, e))?;
        write_atomic(&vec_path, &vec_bytes)?;
        write_atomic(&json_path, &serde_json::to_vec_pretty(&sidecar)?)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp-{}-{n}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_entries() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TrainingCache::new(dir.path().join("cache"));
        let key = TrainingCache::key("abc", &TrainConfig::default(), VocabPolicy::default(), &TokenizeConfig::default(), "f32").unwrap();
        assert!(cache.load::<f32>(&key).unwrap().is_none());

        let space = EmbeddingSpace::from_rows(
            [("a", vec![0.1f32, 1.0 / 3.0]), ("b", vec![-2.5, 1e-7])],
            SpaceMetadata::new("sgns", "view all"),
        )
        .unwrap();
        let report = TrainReport { epoch_losses: vec![1.5, 1.25], seed: 3, ..Default::default() };
        let trained = Trained { space, report };
        cache.store(&key, &trained).unwrap();
        let back = cache.load::<f32>(&key).unwrap().unwrap();
        assert_eq!(back.space, trained.space);
        assert_eq!(back.report, trained.report);
    }

    #[test]
    fn keys_depend_on_inputs() {
        let cfg = TrainConfig::default();
        let tok = TokenizeConfig::default();
        let base = TrainingCache::key("abc", &cfg, VocabPolicy::default(), &tok, "f32").unwrap();
        assert_eq!(base, TrainingCache::key("abc", &cfg, VocabPolicy::default(), &tok, "f32").unwrap());
        assert_ne!(base, TrainingCache::key("abd", &cfg, VocabPolicy::default(), &tok, "f32").unwrap());
        let other = TrainConfig { seed: 7, ..cfg.clone() };
        assert_ne!(base, TrainingCache::key("abc", &other, VocabPolicy::default(), &tok, "f32").unwrap());
        assert_ne!(base, TrainingCache::key("abc", &cfg, VocabPolicy::MaxSize(10), &tok, "f32").unwrap());
        assert_ne!(base, TrainingCache::key("abc", &cfg, VocabPolicy::default(), &tok, "f64").unwrap());
    }
}
