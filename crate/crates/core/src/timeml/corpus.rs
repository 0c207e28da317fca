use std::fs;
use std::path::{Path, PathBuf};

use super::{parse_document_with, Dialect, Document, ParseOptions, TimeMlError};

/// A file that could not be read or parsed.
#[derive(Debug)]
pub struct CorpusIssue {
    pub path: PathBuf,
    pub error: TimeMlError,
}

#[derive(Debug, Default)]
pub struct Corpus {
    /// Sorted by source path.
    pub documents: Vec<Document>,
    pub issues: Vec<CorpusIssue>,
}

fn is_timeml(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("tml") | Some("xml")
    )
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), TimeMlError> {
    let io = |source| TimeMlError::Io {
        path: path.display().to_string(),
        source,
    };
    let meta = fs::metadata(path).map_err(io)?;
    if meta.is_dir() {
        for entry in fs::read_dir(path).map_err(io)? {
            let p = entry.map_err(io)?.path();
            if p.is_dir() {
                collect(&p, out)?;
            } else if is_timeml(&p) {
                out.push(p);
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Parse every `.tml`/`.xml` file under `paths`. Files that fail to parse are
/// reported in [`Corpus::issues`]; a missing top-level path is an error.
pub fn load_corpus<P: AsRef<Path>>(paths: &[P], dialect: Dialect) -> Result<Corpus, TimeMlError> {
    let mut files = Vec::new();
    for p in paths {
        collect(p.as_ref(), &mut files)?;
    }
    files.sort();
    files.dedup();

    let mut corpus = Corpus::default();
    for path in files {
        let text = match fs::read(&path) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(source) => {
                corpus.issues.push(CorpusIssue {
                    error: TimeMlError::Io {
                        path: path.display().to_string(),
                        source,
                    },
                    path,
                });
                continue;
            }
        };
        let opts = ParseOptions {
            dialect,
            doc_id: path.file_stem().map(|s| s.to_string_lossy().into_owned()),
            source_path: path.display().to_string(),
        };
        match parse_document_with(&text, &opts) {
            Ok(doc) => corpus.documents.push(doc),
            Err(error) => corpus.issues.push(CorpusIssue { path, error }),
        }
    }
    Ok(corpus)
}
