//! Block kinds, layout labels, spans and blocks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("unknown block kind code {0}")]
    KindCode(i64),
    #[error("unknown label code {0}")]
    LabelCode(i64),
    #[error("unknown label name {0:?}")]
    LabelName(String),
    #[error("label {label} (code {}) is not valid for {kind} blocks", label.code())]
    Inconsistent { kind: BlockKind, label: LayoutLabel },
    #[error("{kind} block {block_id} {problem}")]
    Payload { kind: BlockKind, block_id: String, problem: &'static str },
}

/// Block type code `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum BlockKind {
    Image = 0,
    Table = 1,
    Link = 2,
    Text = 3,
}

impl BlockKind {
    pub const ALL: [BlockKind; 4] = [BlockKind::Image, BlockKind::Table, BlockKind::Link, BlockKind::Text];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<Self, LayoutError> {
        match code {
            0 => Ok(BlockKind::Image),
            1 => Ok(BlockKind::Table),
            2 => Ok(BlockKind::Link),
            3 => Ok(BlockKind::Text),
            c => Err(LayoutError::KindCode(c)),
        }
    }

    /// Short tag used in block identifiers.
    pub fn tag(self) -> char {
        match self {
            BlockKind::Image => 'i',
            BlockKind::Table => 't',
            BlockKind::Link => 'l',
            BlockKind::Text => 'x',
        }
    }

    /// The label carried by non-text blocks; `None` for text.
    pub fn fixed_label(self) -> Option<LayoutLabel> {
        match self {
            BlockKind::Image => Some(LayoutLabel::Image),
            BlockKind::Table => Some(LayoutLabel::Table),
            BlockKind::Link => Some(LayoutLabel::Link),
            BlockKind::Text => None,
        }
    }
}

impl TryFrom<i64> for BlockKind {
    type Error = LayoutError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        BlockKind::from_code(v)
    }
}

impl From<BlockKind> for i64 {
    fn from(k: BlockKind) -> Self {
        k.code() as i64
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BlockKind::Image => "image",
            BlockKind::Table => "table",
            BlockKind::Link => "link",
            BlockKind::Text => "text",
        };
        f.write_str(s)
    }
}

/// Layout label code `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum LayoutLabel {
    Image = 0,
    Table = 1,
    Link = 2,
    Identifier = 3,
    Title = 4,
    Summary = 5,
    Body = 6,
}

impl LayoutLabel {
    pub const TEXT: [LayoutLabel; 4] =
        [LayoutLabel::Identifier, LayoutLabel::Title, LayoutLabel::Summary, LayoutLabel::Body];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<Self, LayoutError> {
        match code {
            0 => Ok(LayoutLabel::Image),
            1 => Ok(LayoutLabel::Table),
            2 => Ok(LayoutLabel::Link),
            3 => Ok(LayoutLabel::Identifier),
            4 => Ok(LayoutLabel::Title),
            5 => Ok(LayoutLabel::Summary),
            6 => Ok(LayoutLabel::Body),
            c => Err(LayoutError::LabelCode(c)),
        }
    }

    pub fn is_text(self) -> bool {
        self.code() >= 3
    }

    /// Block kind implied by this label.
    pub fn kind(self) -> BlockKind {
        match self {
            LayoutLabel::Image => BlockKind::Image,
            LayoutLabel::Table => BlockKind::Table,
            LayoutLabel::Link => BlockKind::Link,
            _ => BlockKind::Text,
        }
    }

    /// Next text category in code order, wrapping Body back to Identifier.
    /// Non-text labels are returned unchanged.
    pub fn cycle_next(self) -> LayoutLabel {
        match self {
            LayoutLabel::Identifier => LayoutLabel::Title,
            LayoutLabel::Title => LayoutLabel::Summary,
            LayoutLabel::Summary => LayoutLabel::Body,
            LayoutLabel::Body => LayoutLabel::Identifier,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayoutLabel::Image => "Image",
            LayoutLabel::Table => "Table",
            LayoutLabel::Link => "Link",
            LayoutLabel::Identifier => "Identifier",
            LayoutLabel::Title => "Title",
            LayoutLabel::Summary => "Summary",
            LayoutLabel::Body => "Body",
        }
    }

    /// Position among the four text categories, `None` for non-text labels.
    pub fn text_index(self) -> Option<usize> {
        self.is_text().then(|| (self.code() - 3) as usize)
    }
}

impl TryFrom<i64> for LayoutLabel {
    type Error = LayoutError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        LayoutLabel::from_code(v)
    }
}

impl From<LayoutLabel> for i64 {
    fn from(l: LayoutLabel) -> Self {
        l.code() as i64
    }
}

impl fmt::Display for LayoutLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayoutLabel {
    type Err = LayoutError;

    /// Accepts names (case-insensitive, `ID` and `Main`/`MainText` as aliases) or numeric codes.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(code) = t.parse::<i64>() {
            return LayoutLabel::from_code(code);
        }
        match t.to_ascii_lowercase().as_str() {
            "image" => Ok(LayoutLabel::Image),
            "table" => Ok(LayoutLabel::Table),
            "link" => Ok(LayoutLabel::Link),
            "identifier" | "id" => Ok(LayoutLabel::Identifier),
            "title" => Ok(LayoutLabel::Title),
            "summary" => Ok(LayoutLabel::Summary),
            "body" | "main" | "maintext" => Ok(LayoutLabel::Body),
            _ => Err(LayoutError::LabelName(s.to_string())),
        }
    }
}

/// Checks the B/L consistency rule: codes 0..=2 must equal the kind, codes 3..=6 need a text block.
pub fn check_consistency(kind: BlockKind, label: LayoutLabel) -> Result<(), LayoutError> {
    let ok = match kind.fixed_label() {
        Some(fixed) => fixed == label,
        None => label.is_text(),
    };
    if ok {
        Ok(())
    } else {
        Err(LayoutError::Inconsistent { kind, label })
    }
}

/// Who assigned a block's current label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelOrigin {
    Heuristic,
    Model,
    Human,
}

impl fmt::Display for LabelOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelOrigin::Heuristic => "heuristic",
            LabelOrigin::Model => "model",
            LabelOrigin::Human => "human",
        })
    }
}

/// A run of text drawn with a single font setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSpan {
    pub text: String,
    pub font_name: String,
    pub font_size: f64,
    pub bold: bool,
    pub italic: bool,
    pub bbox: BoundingBox,
    /// Ordinal of the text line within its page.
    pub line_id: usize,
    /// Clockwise direction of the text baseline in degrees (0, 90, 180 or 270).
    #[serde(default)]
    pub rotation: u16,
}

impl TextSpan {
    pub fn same_style(&self, other: &TextSpan) -> bool {
        self.font_name == other.font_name
            && self.bold == other.bold
            && self.italic == other.italic
            && self.font_size == other.font_size
    }
}

/// One extracted layout block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutBlock {
    pub block_id: String,
    pub kind: BlockKind,
    pub label: LayoutLabel,
    pub bbox: BoundingBox,
    pub page_index: usize,
    /// Preprocessed text, table CSV path or link URL. Absent for images.
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spans: Vec<TextSpan>,
    pub label_origin: LabelOrigin,
    #[serde(default)]
    pub clipped: bool,
}

impl LayoutBlock {
    /// A non-text block whose label is fixed by its kind.
    pub fn fixed(kind: BlockKind, block_id: String, page_index: usize, bbox: BoundingBox, payload: Option<String>) -> Self {
        let label = kind.fixed_label().unwrap_or(LayoutLabel::Body);
        Self {
            block_id,
            kind,
            label,
            bbox,
            page_index,
            payload,
            spans: Vec::new(),
            label_origin: LabelOrigin::Heuristic,
            clipped: false,
        }
    }

    /// A text block, provisionally labeled Body until a labeler runs.
    pub fn text(block_id: String, page_index: usize, bbox: BoundingBox, text: String, spans: Vec<TextSpan>) -> Self {
        Self {
            block_id,
            kind: BlockKind::Text,
            label: LayoutLabel::Body,
            bbox,
            page_index,
            payload: Some(text),
            spans,
            label_origin: LabelOrigin::Heuristic,
            clipped: false,
        }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        check_consistency(self.kind, self.label)?;
        let has_payload = self.payload.is_some();
        if self.kind == BlockKind::Image && has_payload {
            return Err(LayoutError::Payload {
                kind: self.kind,
                block_id: self.block_id.clone(),
                problem: "must not carry a payload",
            });
        }
        if self.kind != BlockKind::Image && !has_payload {
            return Err(LayoutError::Payload {
                kind: self.kind,
                block_id: self.block_id.clone(),
                problem: "is missing its payload",
            });
        }
        Ok(())
    }
}
