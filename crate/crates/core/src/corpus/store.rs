use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Comment, CorpusError, Sentence};

/// Records parsed from a JSON-lines file plus the 1-based line numbers that
/// could not be parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLines<T> {
    pub records: Vec<T>,
    pub skipped: Vec<usize>,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    valid: impl Fn(&T) -> bool,
) -> Result<ParsedLines<T>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(record) if valid(&record) => records.push(record),
            _ => skipped.push(n + 1),
        }
    }
    Ok(ParsedLines { records, skipped })
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub(crate) fn comment_is_valid(c: &Comment) -> bool {
    !c.comment_id.is_empty() && c.text.split_whitespace().next().is_some()
}

/// Reads a JSON-lines comment file, skipping malformed records and records
/// whose text is blank.
pub fn read_comments(path: &Path) -> Result<ParsedLines<Comment>, CorpusError> {
    read_jsonl(path, comment_is_valid)
}

pub fn write_comments(path: &Path, comments: &[Comment]) -> Result<(), CorpusError> {
    write_jsonl(path, comments)
}

pub fn read_sentences(path: &Path) -> Result<ParsedLines<Sentence>, CorpusError> {
    let mut parsed = read_jsonl::<Sentence>(path, |_| true)?;
    for s in &mut parsed.records {
        s.retokenize();
    }
    Ok(parsed)
}

pub fn write_sentences(path: &Path, sentences: &[Sentence]) -> Result<(), CorpusError> {
    write_jsonl(path, sentences)
}
