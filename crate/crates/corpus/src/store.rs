//! Directory layout of a corpus root:
//!
//! ```text
//! sources/<id>/profile.toml, fonts.tsv, rules.txt, state.json, model.json, models/v<n>.json
//! docs/<doc_id>.pdf
//! layout/<doc_id>.jsonl          one record per block
//! layout/<doc_id>.payloads.jsonl full text of truncated payloads
//! tables/<doc_id>/p<page>_t<k>.csv
//! overlays/<doc_id>/p<page>.svg
//! manifests/<doc_id>.json
//! journal.jsonl, filtered.jsonl, deadletter.jsonl
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dla_core::{CurationState, FontDictionary, ForestModel, HeuristicRuleSet};

use crate::error::{CorpusError, IoContext, Result};
use crate::manifest::DocumentManifest;
use crate::profile::{is_safe_id, SourceProfile};
use crate::record::{truncate_payload, LayoutRecord};

pub struct Corpus {
    root: PathBuf,
    journal_seq: Mutex<Option<u64>>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    block_id: String,
    f12: String,
}

/// Writes through a temporary file and a rename so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).at(path)?;
    serde_json::from_str(&s).map_err(|e| CorpusError::Integrity { path: path.into(), line: e.line(), message: e.to_string() })
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let s = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CorpusError::Io { path: path.into(), source: e }),
    };
    s.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Integrity { path: path.into(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

impl Corpus {
    /// Opens (and creates if needed) a corpus rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in ["sources", "docs", "layout", "tables", "overlays", "manifests"] {
            let d = root.join(dir);
            fs::create_dir_all(&d).at(&d)?;
        }
        Ok(Self { root, journal_seq: Mutex::new(None) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn source_dir(&self, source_id: &str) -> Result<PathBuf> {
        if !is_safe_id(source_id) {
            return Err(CorpusError::UnknownSource(source_id.into()));
        }
        Ok(self.root.join("sources").join(source_id))
    }

    fn doc_path(&self, dir: &str, doc_id: &str, ext: &str) -> Result<PathBuf> {
        if !is_safe_id(doc_id) {
            return Err(CorpusError::UnknownDocument(doc_id.into()));
        }
        Ok(self.root.join(dir).join(format!("{doc_id}{ext}")))
    }

    pub fn save_profile(&self, p: &SourceProfile) -> Result<()> {
        let dir = self.source_dir(&p.source_id)?;
        let problems = p.problems();
        if !problems.is_empty() {
            return Err(CorpusError::Profile { path: dir.join("profile.toml"), message: problems.join("; ") });
        }
        write_atomic(&dir.join("profile.toml"), p.to_toml().as_bytes())
    }

    pub fn profile(&self, source_id: &str) -> Result<SourceProfile> {
        let path = self.source_dir(source_id)?.join("profile.toml");
        let s = match fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CorpusError::UnknownSource(source_id.into())),
            Err(e) => return Err(CorpusError::Io { path, source: e }),
        };
        let p = SourceProfile::from_toml(&s).map_err(|message| CorpusError::Profile { path: path.clone(), message })?;
        let problems = p.problems();
        if p.source_id != source_id {
            return Err(CorpusError::Profile { path, message: format!("declares source_id {:?}", p.source_id) });
        }
        if !problems.is_empty() {
            return Err(CorpusError::Profile { path, message: problems.join("; ") });
        }
        Ok(p)
    }

    /// Source ids with a profile, sorted.
    pub fn source_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join("sources");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).at(&dir)? {
            let entry = entry.at(&dir)?;
            if entry.path().join("profile.toml").is_file() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn fonts(&self, source_id: &str) -> Result<FontDictionary> {
        let path = self.source_dir(source_id)?.join("fonts.tsv");
        match fs::read_to_string(&path) {
            Ok(s) => Ok(FontDictionary::from_tsv(&s)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(FontDictionary::new()),
            Err(e) => Err(CorpusError::Io { path, source: e }),
        }
    }

    pub fn save_fonts(&self, source_id: &str, fd: &FontDictionary) -> Result<()> {
        write_atomic(&self.source_dir(source_id)?.join("fonts.tsv"), fd.to_tsv().as_bytes())
    }

    /// The source's rule file, or the starter rules when it has none.
    pub fn rules(&self, source_id: &str) -> Result<HeuristicRuleSet> {
        let p = self.profile(source_id)?;
        let path = self.source_dir(source_id)?.join(&p.labeling.rules);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(s.parse()?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HeuristicRuleSet::starter()),
            Err(e) => Err(CorpusError::Io { path, source: e }),
        }
    }

    pub fn state(&self, source_id: &str) -> Result<CurationState> {
        let path = self.source_dir(source_id)?.join("state.json");
        if !path.exists() {
            return Ok(CurationState::new(source_id));
        }
        read_json(&path)
    }

    pub fn save_state(&self, state: &CurationState) -> Result<()> {
        write_atomic(&self.source_dir(&state.source_id)?.join("state.json"), &pretty(state))
    }

    pub fn model_path(&self, source_id: &str) -> Result<PathBuf> {
        Ok(self.source_dir(source_id)?.join("model.json"))
    }

    pub fn model(&self, source_id: &str) -> Result<Option<ForestModel>> {
        let path = self.model_path(source_id)?;
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(ForestModel::from_json(&s)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CorpusError::Io { path, source: e }),
        }
    }

    /// Archives `model` as version `version` and swaps it in as the current model.
    pub fn install_model(&self, source_id: &str, version: u32, model: &ForestModel) -> Result<()> {
        let dir = self.source_dir(source_id)?;
        let json = model.to_json();
        write_atomic(&dir.join("models").join(format!("v{version}.json")), json.as_bytes())?;
        write_atomic(&dir.join("model.json"), json.as_bytes())
    }

    pub fn pdf_path(&self, doc_id: &str) -> Result<PathBuf> {
        self.doc_path("docs", doc_id, ".pdf")
    }

    pub fn has_document(&self, doc_id: &str) -> bool {
        self.doc_path("manifests", doc_id, ".json").map(|p| p.is_file()).unwrap_or(false)
    }

    pub fn manifest(&self, doc_id: &str) -> Result<DocumentManifest> {
        let path = self.doc_path("manifests", doc_id, ".json")?;
        if !path.is_file() {
            return Err(CorpusError::UnknownDocument(doc_id.into()));
        }
        read_json(&path)
    }

    pub fn save_manifest(&self, m: &DocumentManifest) -> Result<()> {
        write_atomic(&self.doc_path("manifests", &m.doc_id, ".json")?, &pretty(m))
    }

    /// All manifests, optionally of one source, ordered by doc id.
    pub fn manifests(&self, source_id: Option<&str>) -> Result<Vec<DocumentManifest>> {
        let dir = self.root.join("manifests");
        let mut names: Vec<PathBuf> = fs::read_dir(&dir)
            .at(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        names.sort();
        let mut out = Vec::new();
        for p in names {
            let m: DocumentManifest = read_json(&p)?;
            if source_id.map_or(true, |s| m.source_id == s) {
                out.push(m);
            }
        }
        Ok(out)
    }

    /// Reads a document's layout, restoring truncated payloads from the
    /// sidecar and rejecting records that break the label/kind rules.
    pub fn layout(&self, doc_id: &str) -> Result<Vec<LayoutRecord>> {
        let path = self.doc_path("layout", doc_id, ".jsonl")?;
        if !path.is_file() {
            return Err(CorpusError::UnknownDocument(doc_id.into()));
        }
        let mut records: Vec<LayoutRecord> = read_jsonl(&path)?;
        let side_path = self.doc_path("layout", doc_id, ".payloads.jsonl")?;
        let mut sidecar: HashMap<String, String> =
            read_jsonl::<Sidecar>(&side_path)?.into_iter().map(|s| (s.block_id, s.f12)).collect();
        for (i, r) in records.iter_mut().enumerate() {
            if r.f12_truncated {
                let full = sidecar.remove(&r.block_id).ok_or_else(|| CorpusError::Integrity {
                    path: path.clone(),
                    line: i + 1,
                    message: format!("payload of {} is truncated but missing from the sidecar", r.block_id),
                })?;
                if !r.f12.as_deref().is_some_and(|head| full.starts_with(head)) {
                    return Err(CorpusError::Integrity {
                        path: path.clone(),
                        line: i + 1,
                        message: format!("sidecar payload of {} does not extend the inline text", r.block_id),
                    });
                }
                r.f12 = Some(full);
                r.f12_truncated = false;
            }
            if r.doc_id != doc_id {
                return Err(CorpusError::Integrity { path: path.clone(), line: i + 1, message: format!("record belongs to {}", r.doc_id) });
            }
            if let Some(problem) = r.problems().into_iter().next() {
                return Err(CorpusError::Integrity { path: path.clone(), line: i + 1, message: problem });
            }
        }
        Ok(records)
    }

    pub fn save_layout(&self, doc_id: &str, records: &[LayoutRecord]) -> Result<()> {
        let mut main = Vec::new();
        let mut side = Vec::new();
        for r in records {
            let mut r = r.clone();
            if let Some(text) = r.f12.take() {
                let (head, cut) = truncate_payload(&text);
                if cut {
                    serde_json::to_writer(&mut side, &Sidecar { block_id: r.block_id.clone(), f12: text.clone() }).expect("serializable");
                    side.push(b'\n');
                }
                r.f12 = Some(head.to_string());
                r.f12_truncated = cut;
            }
            serde_json::to_writer(&mut main, &r).expect("serializable");
            main.push(b'\n');
        }
        let side_path = self.doc_path("layout", doc_id, ".payloads.jsonl")?;
        if side.is_empty() {
            if side_path.exists() {
                fs::remove_file(&side_path).at(&side_path)?;
            }
        } else {
            write_atomic(&side_path, &side)?;
        }
        write_atomic(&self.doc_path("layout", doc_id, ".jsonl")?, &main)
    }

    pub fn append_jsonl<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let path = self.root.join(rel);
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).at(&path)?;
        let mut line = serde_json::to_vec(value).expect("serializable");
        line.push(b'\n');
        f.write_all(&line).at(&path)
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, rel: &str) -> Result<Vec<T>> {
        read_jsonl(&self.root.join(rel))
    }

    /// Hands out the next journal sequence number.
    pub(crate) fn next_journal_seq(&self) -> Result<u64> {
        let mut guard = self.journal_seq.lock().expect("journal lock");
        let next = match *guard {
            Some(n) => n + 1,
            None => {
                let entries: Vec<serde_json::Value> = self.read_jsonl(crate::journal::JOURNAL_FILE)?;
                entries.len() as u64
            }
        };
        *guard = Some(next);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsafe_ids_never_touch_the_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::open(dir.path()).unwrap();
        assert!(matches!(c.manifest("../x"), Err(CorpusError::UnknownDocument(_))));
        assert!(matches!(c.profile("a/b"), Err(CorpusError::UnknownSource(_))));
        assert!(matches!(c.profile("nope"), Err(CorpusError::UnknownSource(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
