//! Double-stimulus MOS sessions: stimulus manifest, grade log and scores.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRADES_FILE: &str = "grades.jsonl";
pub const GRADE_MIN: f64 = 0.0;
pub const GRADE_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusPair {
    pub id: String,
    pub reference: String,
    pub test: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub session: String,
    pub pairs: Vec<StimulusPair>,
}

impl Manifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("malformed {}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> CliResult<()> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.pairs {
            if !seen.insert(p.id.as_str()) {
                return Err(CliError::data(format!("duplicate pair id {:?}", p.id)));
            }
        }
        Ok(())
    }

    pub fn pair(&self, id: &str) -> Option<&StimulusPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    /// Image ids referenced by any pair.
    pub fn has_image(&self, id: &str) -> bool {
        self.pairs.iter().any(|p| p.reference == id || p.test == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub observer: String,
    pub pair: String,
    pub grade: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradeError {
    EmptyObserver,
    OutOfRange(f64),
    UnknownPair(String),
}

impl std::fmt::Display for GradeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradeError::EmptyObserver => write!(f, "observer id must be non-empty"),
            GradeError::OutOfRange(g) => {
                write!(f, "grade {g} outside [{GRADE_MIN}, {GRADE_MAX}]")
            }
            GradeError::UnknownPair(p) => write!(f, "unknown pair {p:?}"),
        }
    }
}

impl std::error::Error for GradeError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMos {
    pub pair: String,
    pub k: usize,
    /// Mean grade rounded to 2 decimals; `None` until graded.
    pub mos: Option<f64>,
    pub count: usize,
}

/// Manifest plus every accepted grade, in arrival order.
#[derive(Debug, Clone)]
pub struct MosSession {
    pub manifest: Manifest,
    pub grades: Vec<Grade>,
}

impl MosSession {
    pub fn new(manifest: Manifest) -> Self {
        MosSession {
            manifest,
            grades: Vec::new(),
        }
    }

    pub fn check(&self, g: &Grade) -> Result<(), GradeError> {
        if g.observer.trim().is_empty() {
            return Err(GradeError::EmptyObserver);
        }
        if !g.grade.is_finite() || g.grade < GRADE_MIN || g.grade > GRADE_MAX {
            return Err(GradeError::OutOfRange(g.grade));
        }
        if self.manifest.pair(&g.pair).is_none() {
            return Err(GradeError::UnknownPair(g.pair.clone()));
        }
        Ok(())
    }

    pub fn add(&mut self, g: Grade) -> Result<(), GradeError> {
        self.check(&g)?;
        self.grades.push(g);
        Ok(())
    }

    pub fn mos(&self) -> Vec<PairMos> {
        self.manifest
            .pairs
            .iter()
            .map(|p| {
                let (sum, count) = self
                    .grades
                    .iter()
                    .filter(|g| g.pair == p.id)
                    .fold((0.0, 0usize), |(s, c), g| (s + g.grade, c + 1));
                PairMos {
                    pair: p.id.clone(),
                    k: p.k,
                    mos: (count > 0).then(|| round2(sum / count as f64)),
                    count,
                }
            })
            .collect()
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Append-only grade log. Writes go through one mutex; readers take the
/// current `Arc` snapshot and never block on disk I/O.
pub struct GradeStore {
    path: PathBuf,
    writer: Mutex<File>,
    snapshot: RwLock<Arc<MosSession>>,
}

impl GradeStore {
    /// Opens `dir/grades.jsonl`, replaying earlier grades. A torn final line
    /// from an interrupted write is dropped; any other bad line is an error.
    pub fn open(dir: &Path, manifest: Manifest) -> CliResult<Self> {
        let path = dir.join(GRADES_FILE);
        let io_err = |e: std::io::Error| CliError::data(format!("{}: {e}", path.display()));
        let mut session = MosSession::new(manifest);
        let bytes = if path.exists() {
            std::fs::read(&path).map_err(io_err)?
        } else {
            Vec::new()
        };

        // Byte length of the log that is kept; a torn tail is cut off.
        let mut keep = bytes.len();
        let mut offset = 0;
        let mut line_no = 0;
        while offset < bytes.len() {
            let end = bytes[offset..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|i| offset + i);
            let line = &bytes[offset..end.unwrap_or(bytes.len())];
            line_no += 1;
            let is_last = end.is_none_or(|e| e + 1 == bytes.len());
            if !line.iter().all(u8::is_ascii_whitespace) {
                match serde_json::from_slice::<Grade>(line) {
                    Ok(g) => {
                        if let Err(e) = session.add(g) {
                            log::warn!("{}:{line_no}: skipping grade: {e}", path.display());
                        }
                    }
                    Err(_) if is_last => {
                        log::warn!("{}: dropping truncated last line", path.display());
                        keep = offset;
                    }
                    Err(e) => {
                        return Err(CliError::data(format!(
                            "{}:{line_no}: {e}",
                            path.display()
                        )))
                    }
                }
            }
            offset = end.map_or(bytes.len(), |e| e + 1);
        }

        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        if keep < bytes.len() {
            file.set_len(keep as u64).map_err(io_err)?;
        } else if bytes.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(io_err)?;
        }
        Ok(GradeStore {
            path,
            writer: Mutex::new(file),
            snapshot: RwLock::new(Arc::new(session)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<MosSession> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Validates, appends to disk, then publishes a new snapshot.
    pub fn record(&self, g: Grade) -> Result<Result<(), GradeError>, std::io::Error> {
        let mut file = self.writer.lock().expect("writer lock");
        let current = self.snapshot();
        if let Err(e) = current.check(&g) {
            return Ok(Err(e));
        }
        let mut line = serde_json::to_string(&g).expect("grade serializes");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        let mut next = (*current).clone();
        next.grades.push(g);
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok(Ok(()))
    }
}
