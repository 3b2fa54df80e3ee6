//! Fixed on-disk layout shared by the command-line stages and the service.
//!
//! ```text
//! corpus/   comments.jsonl  segmented.jsonl  sentences.jsonl  vectors.txt
//! labels/   labels.jsonl  split.json
//! grammar/  grammar.cfg  lexicons/*.txt  versions/*.json
//! models/   <name>.json
//! reports/  <name>.json  <name>.trials.jsonl
//! ```

use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub const DIRS: [&'static str; 5] = ["corpus", "labels", "grammar", "models", "reports"];

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    /// Creates the workspace directories if they are missing.
    pub fn create(root: impl Into<PathBuf>) -> io::Result<Self> {
        let ws = Workspace::new(root);
        for d in Self::DIRS {
            std::fs::create_dir_all(ws.root.join(d))?;
        }
        std::fs::create_dir_all(ws.versions_dir())?;
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn comments(&self) -> PathBuf {
        self.root.join("corpus/comments.jsonl")
    }

    /// Sentences straight out of segmentation.
    pub fn segmented(&self) -> PathBuf {
        self.root.join("corpus/segmented.jsonl")
    }

    /// Deduplicated sentences; the corpus every later stage reads.
    pub fn sentences(&self) -> PathBuf {
        self.root.join("corpus/sentences.jsonl")
    }

    /// Optional word vectors in text format.
    pub fn vectors(&self) -> PathBuf {
        self.root.join("corpus/vectors.txt")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels/labels.jsonl")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("labels/split.json")
    }

    pub fn grammar_dir(&self) -> PathBuf {
        self.root.join("grammar")
    }

    pub fn versions_dir(&self) -> PathBuf {
        self.root.join("grammar/versions")
    }

    pub fn version(&self, version: u64) -> PathBuf {
        self.versions_dir().join(format!("{version:06}.json"))
    }

    pub fn model(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.json"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }

    pub fn trial_log(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.trials.jsonl"))
    }
}
