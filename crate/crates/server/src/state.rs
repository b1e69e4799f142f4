use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use causalwb::workflow::{calibrate, Calibration, OutputRef, Session, StepStatus, WorkflowCommand};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::auth::{Acl, Principal, Role, TokenEntry, TokenTable};
use crate::chat::ChatConfig;
use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub tokens: Vec<TokenEntry>,
    /// Global bound on concurrently running steps.
    pub workers: usize,
    pub chat: Option<ChatConfig>,
    /// Run the runtime-estimate probes at startup.
    pub calibrate: bool,
}

impl ServerConfig {
    pub fn new(data_dir: impl Into<PathBuf>, tokens: Vec<TokenEntry>) -> Self {
        Self {
            data_dir: data_dir.into(),
            tokens,
            workers: 4,
            chat: None,
            calibrate: true,
        }
    }
}

/// Parses `user:token[:ro]` entries separated by commas.
pub fn parse_token_spec(spec: &str) -> Result<Vec<TokenEntry>, String> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            match parts.as_slice() {
                [user, token] => Ok((user, token, false)),
                [user, token, "ro"] => Ok((user, token, true)),
                _ => Err(format!(
                    "bad token entry '{item}': expected user:token[:ro]"
                )),
            }
            .and_then(|(u, t, ro)| {
                if u.is_empty() || t.is_empty() {
                    Err(format!("bad token entry '{item}'"))
                } else {
                    Ok(TokenEntry {
                        token: t.to_string(),
                        user: u.to_string(),
                        read_only: ro,
                    })
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub step_id: u64,
    pub outputs: Vec<OutputRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: u64,
    pub session_id: String,
    pub command: WorkflowCommand,
    pub state: JobState,
    pub progress: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<JobResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct SessionEntry {
    pub id: String,
    dir: PathBuf,
    pub acl: RwLock<Acl>,
    pub session: RwLock<Session>,
    pub jobs: Mutex<BTreeMap<u64, Job>>,
    busy: AtomicBool,
    next_job: AtomicU64,
}

const ACL_FILE: &str = "acl.json";

impl SessionEntry {
    fn open(id: String, dir: PathBuf, acl: Acl) -> causalwb::Result<Self> {
        let session = Session::open(&dir)?;
        Ok(Self {
            id,
            dir,
            acl: RwLock::new(acl),
            session: RwLock::new(session),
            jobs: Mutex::new(BTreeMap::new()),
            busy: AtomicBool::new(false),
            next_job: AtomicU64::new(1),
        })
    }

    pub fn role(&self, p: &Principal) -> Option<Role> {
        self.acl.read().expect("acl lock").role(p)
    }

    pub fn save_acl(&self) -> ApiResult<()> {
        let text = serde_json::to_vec_pretty(&*self.acl.read().expect("acl lock"))
            .expect("acl serializes");
        let tmp = self.dir.join("acl.json.tmp");
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, self.dir.join(ACL_FILE)))
            .map_err(|e| ApiError::Internal(e.to_string()))
    }

    /// Claims the session's single step slot.
    pub fn try_claim(&self) -> ApiResult<BusyGuard<'_>> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| BusyGuard {
                entry: self,
                armed: true,
            })
            .map_err(|_| ApiError::Conflict("a step is already running for this session".into()))
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }

    pub(crate) fn release(&self) {
        self.busy.store(false, Ordering::Release);
    }

    pub fn new_job(&self, command: WorkflowCommand) -> Job {
        let job = Job {
            id: self.next_job.fetch_add(1, Ordering::AcqRel),
            session_id: self.id.clone(),
            command,
            state: JobState::Queued,
            progress: 0.0,
            result: None,
            error: None,
        };
        self.jobs
            .lock()
            .expect("jobs lock")
            .insert(job.id, job.clone());
        job
    }

    pub fn update_job(&self, id: u64, f: impl FnOnce(&mut Job)) {
        if let Some(j) = self.jobs.lock().expect("jobs lock").get_mut(&id) {
            f(j);
        }
    }
}

/// Releases the busy flag on drop unless handed to a background job.
pub struct BusyGuard<'a> {
    entry: &'a SessionEntry,
    armed: bool,
}

impl BusyGuard<'_> {
    /// The caller takes over releasing the flag.
    pub fn defuse(mut self) {
        self.armed = false;
    }
}

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        if self.armed {
            self.entry.release();
        }
    }
}

pub struct AppState {
    pub cfg: ServerConfig,
    pub tokens: TokenTable,
    sessions: RwLock<HashMap<String, Arc<SessionEntry>>>,
    pub pool: Arc<Semaphore>,
    pub calibration: Option<Calibration>,
    pub http: reqwest::Client,
}

fn sessions_dir(root: &Path) -> PathBuf {
    root.join("sessions")
}

impl AppState {
    /// Loads every persisted session under the data directory.
    pub fn new(cfg: ServerConfig) -> causalwb::Result<Self> {
        let root = sessions_dir(&cfg.data_dir);
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            let acl_path = dir.join(ACL_FILE);
            if !acl_path.exists() {
                continue;
            }
            let acl: Acl = serde_json::from_slice(&fs::read(&acl_path)?)?;
            let id = dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            sessions.insert(id.clone(), Arc::new(SessionEntry::open(id, dir, acl)?));
        }
        Ok(Self {
            tokens: TokenTable::new(&cfg.tokens),
            pool: Arc::new(Semaphore::new(cfg.workers.max(1))),
            calibration: cfg.calibrate.then(calibrate),
            http: reqwest::Client::new(),
            sessions: RwLock::new(sessions),
            cfg,
        })
    }

    pub fn create_session(&self, owner: &Principal) -> ApiResult<Arc<SessionEntry>> {
        let id = hex::encode(rand::random::<[u8; 16]>());
        let dir = sessions_dir(&self.cfg.data_dir).join(&id);
        let acl = Acl {
            owner: owner.user.clone(),
            viewers: vec![],
        };
        let entry = Arc::new(SessionEntry::open(id.clone(), dir, acl)?);
        entry.save_acl()?;
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id, entry.clone());
        Ok(entry)
    }

    /// Looks a session up for `p`. Sessions the principal cannot see are
    /// reported as missing; viewers asking for write access are refused.
    pub fn access(
        &self,
        p: &Principal,
        id: &str,
        write: bool,
    ) -> ApiResult<(Arc<SessionEntry>, Role)> {
        let entry = self
            .sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or(ApiError::NotFound)?;
        let role = entry.role(p).ok_or(ApiError::NotFound)?;
        if write && role != Role::Owner {
            return Err(ApiError::Forbidden(
                "viewers may only read this session".into(),
            ));
        }
        Ok((entry, role))
    }

    pub fn visible_sessions(&self, p: &Principal) -> Vec<(String, Role)> {
        let mut out: Vec<(String, Role)> = self
            .sessions
            .read()
            .expect("sessions lock")
            .values()
            .filter_map(|e| e.role(p).map(|r| (e.id.clone(), r)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

pub fn job_outcome(rec: &causalwb::workflow::StepRecord) -> (JobState, Option<String>) {
    match rec.status {
        StepStatus::Ok => (JobState::Succeeded, None),
        StepStatus::Failed => (JobState::Failed, rec.error.clone()),
    }
}
