//! Run directory layout: `runs/<id>/record.json` (replaced atomically) and
//! `runs/<id>/provenance.jsonl` (append-only), next to a shared `cas/`.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use cinepipe_core::clients::ArtifactStore;

use crate::record::{RunEvent, RunRecord};
use crate::PipelineError;

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
    cas: ArtifactStore,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Run ids become directory names.
pub fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        let runs = root.join("runs");
        fs::create_dir_all(&runs).map_err(io(&runs))?;
        let cas = ArtifactStore::open(root.join("cas")).map_err(|e| PipelineError::Io(e.to_string()))?;
        Ok(Self { root, cas })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cas(&self) -> &ArtifactStore {
        &self.cas
    }

    fn run_dir(&self, id: &str) -> Result<PathBuf, PipelineError> {
        if !valid_run_id(id) {
            return Err(PipelineError::BadRequest(format!("invalid run id {id:?}")));
        }
        Ok(self.root.join("runs").join(id))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.run_dir(id).map(|d| d.join("record.json").is_file()).unwrap_or(false)
    }

    pub fn load(&self, id: &str) -> Result<RunRecord, PipelineError> {
        let path = self.run_dir(id)?.join("record.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(PipelineError::UnknownRun(id.into())),
            Err(e) => return Err(io(&path)(e)),
        };
        serde_json::from_str(&text).map_err(|e| PipelineError::CorruptRecord(format!("{id}: {e}")))
    }

    /// Writes the record through a temporary file and rename so a crash
    /// leaves either the old or the new checkpoint.
    pub fn save(&self, record: &mut RunRecord) -> Result<(), PipelineError> {
        let dir = self.run_dir(&record.run_id)?;
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        record.updated_at = chrono::Utc::now();
        let tmp = dir.join("record.json.tmp");
        let body = serde_json::to_vec_pretty(record).expect("record serializes");
        {
            let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
            f.write_all(&body).map_err(io(&tmp))?;
            f.sync_all().map_err(io(&tmp))?;
        }
        let dest = dir.join("record.json");
        fs::rename(&tmp, &dest).map_err(io(&dest))
    }

    pub fn append_event(&self, id: &str, event: &RunEvent) -> Result<(), PipelineError> {
        let dir = self.run_dir(id)?;
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = dir.join("provenance.jsonl");
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(io(&path))
    }

    pub fn events(&self, id: &str) -> Result<Vec<RunEvent>, PipelineError> {
        if !self.exists(id) {
            return Err(PipelineError::UnknownRun(id.into()));
        }
        let path = self.run_dir(id)?.join("provenance.jsonl");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
            Err(e) => return Err(io(&path)(e)),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| PipelineError::CorruptRecord(format!("{id}: {e}"))))
            .collect()
    }

    /// Run ids in lexical order.
    pub fn list_ids(&self) -> Result<Vec<String>, PipelineError> {
        let runs = self.root.join("runs");
        let mut ids: Vec<String> = fs::read_dir(&runs)
            .map_err(io(&runs))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("record.json").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Every readable record; unreadable ones are logged and skipped.
    pub fn list(&self) -> Result<Vec<RunRecord>, PipelineError> {
        Ok(self
            .list_ids()?
            .iter()
            .filter_map(|id| match self.load(id) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("skipping run {id}: {e}");
                    None
                }
            })
            .collect())
    }
}
