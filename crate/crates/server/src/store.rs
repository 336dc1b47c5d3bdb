//! Dataset registry and durable session storage.
//!
//! Each session lives in `<state_dir>/<session_id>.json` together with the
//! answers buffered for its current batch. Files are replaced by
//! write-then-rename after every mutation, so a crash leaves either the old
//! or the new version on disk, never a torn one.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use activelabel::data::{load_dataset_with_assets, ClassId, Dataset};
use activelabel::session::{Session, SessionState};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

pub const STATE_FORMAT: &str = "activelabel-service-session";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answer {
    pub sample_id: u64,
    pub class_id: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    format: String,
    version: u32,
    state: SessionState,
    /// Answers for the pending batch, in arrival order.
    buffered: Vec<Answer>,
}

/// A session plus the partial answers collected for its pending batch.
#[derive(Debug, Clone)]
pub struct LiveSession {
    pub session: Session,
    pub buffered: Vec<Answer>,
}

impl LiveSession {
    pub fn id(&self) -> &str {
        &self.session.state().session_id
    }

    pub fn is_buffered(&self, sample_id: u64) -> bool {
        self.buffered.iter().any(|a| a.sample_id == sample_id)
    }

    /// Pending ids not yet answered, in selection order.
    pub fn unanswered(&self) -> Vec<u64> {
        self.session
            .state()
            .pending_query
            .iter()
            .copied()
            .filter(|id| !self.is_buffered(*id))
            .collect()
    }

    /// Buffered answers in pending order, once every pending id has one.
    pub fn complete_batch(&self) -> Option<Vec<(u64, ClassId)>> {
        self.session
            .state()
            .pending_query
            .iter()
            .map(|id| {
                self.buffered
                    .iter()
                    .find(|a| a.sample_id == *id)
                    .map(|a| (*id, ClassId(a.class_id)))
            })
            .collect()
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let file = StateFile {
            format: STATE_FORMAT.into(),
            version: STATE_VERSION,
            state: self.session.state().clone(),
            buffered: self.buffered.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn persist(&self, state_dir: &Path) -> anyhow::Result<()> {
        let path = state_path(state_dir, self.id());
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()?).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("replacing {}", path.display()))?;
        Ok(())
    }
}

pub fn state_path(state_dir: &Path, session_id: &str) -> PathBuf {
    state_dir.join(format!("{session_id}.json"))
}

#[derive(Debug, Clone)]
pub struct RegisteredDataset {
    pub dataset: Arc<Dataset>,
    pub assets_dir: Option<PathBuf>,
}

/// One session's exclusive write guard and its last committed snapshot.
pub struct SessionSlot {
    pub write: tokio::sync::Mutex<()>,
    committed: RwLock<Arc<LiveSession>>,
    training: AtomicBool,
}

impl SessionSlot {
    fn new(live: LiveSession) -> Self {
        SessionSlot {
            write: tokio::sync::Mutex::new(()),
            committed: RwLock::new(Arc::new(live)),
            training: AtomicBool::new(false),
        }
    }

    pub fn snapshot(&self) -> Arc<LiveSession> {
        self.committed.read().expect("snapshot lock poisoned").clone()
    }

    pub fn commit(&self, live: LiveSession) {
        *self.committed.write().expect("snapshot lock poisoned") = Arc::new(live);
    }

    pub fn is_training(&self) -> bool {
        self.training.load(Ordering::SeqCst)
    }

    pub fn set_training(&self, on: bool) {
        self.training.store(on, Ordering::SeqCst);
    }
}

pub struct Store {
    datasets: BTreeMap<String, RegisteredDataset>,
    sessions: RwLock<BTreeMap<String, Arc<SessionSlot>>>,
    state_dir: PathBuf,
    /// Serializes creation so ids are handed out densely.
    pub create: tokio::sync::Mutex<()>,
}

impl Store {
    /// Registers every manifest under `data_dir` and resumes every session
    /// found in `state_dir`.
    pub fn open(data_dir: &Path, state_dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(state_dir).with_context(|| format!("creating {}", state_dir.display()))?;
        let datasets = discover_datasets(data_dir)?;
        let mut sessions = BTreeMap::new();
        for path in sorted_entries(state_dir)? {
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let live = load_session(&path, &datasets).with_context(|| format!("resuming {}", path.display()))?;
            tracing::info!(session = live.id(), "resumed session");
            sessions.insert(live.id().to_string(), Arc::new(SessionSlot::new(live)));
        }
        Ok(Store {
            datasets,
            sessions: RwLock::new(sessions),
            state_dir: state_dir.to_path_buf(),
            create: tokio::sync::Mutex::new(()),
        })
    }

    pub fn state_dir(&self) -> &Path {
        &self.state_dir
    }

    pub fn datasets(&self) -> &BTreeMap<String, RegisteredDataset> {
        &self.datasets
    }

    pub fn dataset(&self, name: &str) -> Option<&RegisteredDataset> {
        self.datasets.get(name)
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.sessions.read().expect("session map poisoned").get(id).cloned()
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .keys()
            .cloned()
            .collect()
    }

    /// Next free id of the form `s000001`. Call with `create` held.
    pub fn next_session_id(&self) -> String {
        let max = self
            .sessions
            .read()
            .expect("session map poisoned")
            .keys()
            .filter_map(|id| id.strip_prefix('s')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        format!("s{:06}", max + 1)
    }

    pub fn insert(&self, live: LiveSession) {
        let id = live.id().to_string();
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id, Arc::new(SessionSlot::new(live)));
    }
}

fn sorted_entries(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?;
    paths.sort();
    Ok(paths)
}

/// `*.toml` manifests directly in `data_dir`, plus `<subdir>/manifest.toml`.
fn discover_datasets(data_dir: &Path) -> anyhow::Result<BTreeMap<String, RegisteredDataset>> {
    let mut out = BTreeMap::new();
    for path in sorted_entries(data_dir)? {
        let manifest = if path.is_dir() {
            let inner = path.join("manifest.toml");
            if !inner.is_file() {
                continue;
            }
            inner
        } else if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            path
        } else {
            continue;
        };
        let loaded = load_dataset_with_assets(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
        let name = loaded.dataset.name().to_string();
        tracing::info!(dataset = %name, samples = loaded.dataset.len(), "registered dataset");
        let entry = RegisteredDataset {
            dataset: Arc::new(loaded.dataset),
            assets_dir: loaded.assets_dir,
        };
        if out.insert(name.clone(), entry).is_some() {
            bail!("dataset name {name:?} is registered twice");
        }
    }
    Ok(out)
}

fn load_session(path: &Path, datasets: &BTreeMap<String, RegisteredDataset>) -> anyhow::Result<LiveSession> {
    let text = fs::read_to_string(path)?;
    let file: StateFile = serde_json::from_str(&text)?;
    if file.format != STATE_FORMAT || file.version != STATE_VERSION {
        bail!(
            "expected {STATE_FORMAT} v{STATE_VERSION}, found {} v{}",
            file.format,
            file.version
        );
    }
    let name = &file.state.config.dataset;
    let Some(registered) = datasets.get(name) else {
        bail!("session refers to unregistered dataset {name:?}");
    };
    let session = Session::resume(file.state, &registered.dataset)?;
    let live = LiveSession {
        session,
        buffered: file.buffered,
    };
    if let Some(a) = live
        .buffered
        .iter()
        .find(|a| !live.session.state().pending_query.contains(&a.sample_id))
    {
        bail!("buffered answer for {} is not pending", a.sample_id);
    }
    Ok(live)
}
