use thiserror::Error;

use crate::object::ObjRef;

#[derive(Debug, Error)]
pub enum PdfError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("encrypted documents are not supported")]
    Encrypted,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("object {0} not found")]
    MissingObject(ObjRef),
    #[error("object {obj}: {message}")]
    BadObject { obj: ObjRef, message: String },
    #[error("{filter} decode failed: {message}")]
    Filter { filter: String, message: String },
    #[error("document has no pages")]
    NoPages,
    #[error("invalid document structure: {0}")]
    Structure(String),
}

impl PdfError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        PdfError::Syntax { offset, message: message.into() }
    }

    /// Byte offset of the failure, when the error carries one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            PdfError::Syntax { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

pub type Result<T, E = PdfError> = std::result::Result<T, E>;
