//! The stimulus manifest: one entry per generated video, shared by study
//! design, the session server, score processing and hull analysis.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ladder::{SpaceTimeConfig, SpatialLevel, TemporalLevel};

/// Parameters of each processing stage that produced a stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub coded_width: usize,
    pub coded_height: usize,
    pub coded_fps: f64,
    pub lanczos_taps: usize,
    pub temporal_upsampling: String,
    pub display_width: usize,
    pub display_height: usize,
    pub display_fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stimulus_id: String,
    pub content: String,
    pub spatial: SpatialLevel,
    pub temporal: TemporalLevel,
    pub qp: Option<u8>,
    pub target_level: Option<u8>,
    pub achieved_bitrate: Option<f64>,
    pub is_reference: bool,
    pub media_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<StageLog>,
}

impl ManifestEntry {
    pub fn config(&self) -> SpaceTimeConfig {
        SpaceTimeConfig {
            spatial: self.spatial,
            temporal: self.temporal,
        }
    }
}

/// Opaque, deterministic stimulus id. It encodes nothing a subject could use
/// to tell references apart.
pub fn stimulus_id(
    content: &str,
    config: SpaceTimeConfig,
    qp: Option<u8>,
    level: Option<u8>,
    is_reference: bool,
) -> String {
    let key = format!("{content}|{config}|{qp:?}|{level:?}|{is_reference}");
    let digest = Sha256::digest(key.as_bytes());
    format!("v{}", &hex::encode(digest)[..12])
}

/// Serialized as a plain JSON array of entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Manifest { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for e in &self.entries {
            if seen.insert(e.stimulus_id.as_str(), ()).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate stimulus id {}",
                    e.stimulus_id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.stimulus_id == id)
    }

    pub fn index(&self) -> HashMap<&str, &ManifestEntry> {
        self.entries
            .iter()
            .map(|e| (e.stimulus_id.as_str(), e))
            .collect()
    }

    pub fn distorted(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| !e.is_reference)
    }

    /// Reference stimulus id per content.
    pub fn references(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .filter(|e| e.is_reference)
            .map(|e| (e.content.as_str(), e.stimulus_id.as_str()))
            .collect()
    }

    /// Merges another manifest, replacing entries with the same id.
    pub fn merge(&mut self, other: Manifest) {
        for e in other.entries {
            match self.entries.iter_mut().find(|x| x.stimulus_id == e.stimulus_id) {
                Some(slot) => *slot = e,
                None => self.entries.push(e),
            }
        }
    }
}
