use std::path::{Path, PathBuf};

use dla_core::{CurationError, FeatureError, ForestError, LayoutLabel, RuleError};
use dla_pdf::PdfError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Integrity { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Profile { path: PathBuf, message: String },
    #[error("unknown source {0}")]
    UnknownSource(String),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("document {doc_id} has no block {block_id}")]
    UnknownBlock { doc_id: String, block_id: String },
    #[error("block {block_id} is not a text block; its label is fixed by its kind")]
    NotText { block_id: String },
    #[error("label {0} is not a text-block label")]
    NotTextLabel(LayoutLabel),
    #[error("source {source_id} has {pages} validated pages; training needs at least {needed}")]
    BelowThreshold { source_id: String, pages: usize, needed: usize },
    #[error("document {0} is not a valid PDF: {1}")]
    Pdf(String, #[source] PdfError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Curation(#[from] CurationError),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
    }
}
