//! Per-source configuration stored as `sources/<id>/profile.toml`.

use serde::{Deserialize, Serialize};

use dla_core::ForestParams;
use dla_pdf::{MergeParams, ParseOptions, TableParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub source_id: String,
    pub name: String,
    #[serde(default)]
    pub languages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_url: Option<String>,
    #[serde(default)]
    pub fetch: FetchConfig,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub labeling: LabelingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchConfig {
    pub enabled: bool,
    pub base_urls: Vec<String>,
    /// Minimum seconds between two requests to the source.
    pub rate_limit_secs: f64,
    pub max_retries: u32,
    /// First retry delay in seconds; doubles on every further attempt.
    pub backoff_secs: f64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self { enabled: false, base_urls: Vec::new(), rate_limit_secs: 1.0, max_retries: 3, backoff_secs: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub gap_factor: f64,
    pub line_quantum: f64,
    /// The source draws each word separately with no space glyphs.
    pub spaceless_words: bool,
    pub angle_tolerance_deg: f64,
    pub endpoint_tolerance: f64,
    pub columns: u8,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        let m = MergeParams::default();
        let t = TableParams::default();
        Self {
            gap_factor: m.gap_factor,
            line_quantum: m.line_quantum,
            spaceless_words: false,
            angle_tolerance_deg: t.angle_tolerance_deg,
            endpoint_tolerance: t.endpoint_tolerance,
            columns: 1,
        }
    }
}

impl ExtractionConfig {
    pub fn merge_params(&self) -> MergeParams {
        MergeParams { gap_factor: self.gap_factor, line_quantum: self.line_quantum }
    }

    pub fn table_params(&self) -> TableParams {
        TableParams { angle_tolerance_deg: self.angle_tolerance_deg, endpoint_tolerance: self.endpoint_tolerance }
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions { spaceless_words: self.spaceless_words, line_quantum: Some(self.line_quantum) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    /// Rule file relative to the source directory.
    pub rules: String,
    pub forest_seed: u64,
    pub n_trees: usize,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { rules: "rules.txt".into(), forest_seed: 0, n_trees: ForestParams::default().n_trees }
    }
}

impl LabelingConfig {
    pub fn forest_params(&self) -> ForestParams {
        ForestParams { n_trees: self.n_trees, ..ForestParams::default() }.with_seed(self.forest_seed)
    }
}

impl SourceProfile {
    pub fn new(source_id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            source_id: source_id.into(),
            name: name.into(),
            languages: Vec::new(),
            access_url: None,
            fetch: FetchConfig::default(),
            extraction: ExtractionConfig::default(),
            labeling: LabelingConfig::default(),
        }
    }

    /// Returns every problem found; an empty list means the profile is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !is_safe_id(&self.source_id) {
            out.push(format!("source_id {:?} must be non-empty ASCII letters, digits, '-' or '_'", self.source_id));
        }
        if self.fetch.rate_limit_secs < 1.0 {
            out.push(format!("fetch.rate_limit_secs is {}; sources may not be hit more than once per second", self.fetch.rate_limit_secs));
        }
        if !(self.fetch.backoff_secs >= 0.0) {
            out.push("fetch.backoff_secs must be non-negative".into());
        }
        let e = &self.extraction;
        if !(e.gap_factor > 0.0) || !(e.line_quantum > 0.0) {
            out.push("extraction.gap_factor and extraction.line_quantum must be positive".into());
        }
        if !(e.angle_tolerance_deg >= 0.0) || !(e.endpoint_tolerance >= 0.0) {
            out.push("table tolerances must be non-negative".into());
        }
        if self.labeling.n_trees == 0 {
            out.push("labeling.n_trees must be at least 1".into());
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, String> {
        toml::from_str(s).map_err(|e| e.to_string())
    }
}

pub(crate) fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// `(id, name, languages, access URL)` of the official gazettes.
const GAZETTES: [(u8, &str, &[&str], &str); 24] = [
    (1, "Boletín Oficial del Estado", &["es"], "boe.es/diario_boe"),
    (2, "Boletín del Congreso de los Diputados", &["es"], "congreso.es/indice-de-publicaciones"),
    (3, "Boletín del Senado", &["es"], "senado.es/web/actividadparlamentaria/publicacionesoficiales/senado/boletinesoficiales"),
    (4, "Boletín de la Comunidad de Madrid", &["es"], "bocm.es"),
    (5, "Boletín de la Rioja", &["es"], "web.larioja.org/bor-portada"),
    (6, "Boletín de la Región de Murcia", &["es"], "borm.es"),
    (7, "Boletín del Principado de Asturias", &["es"], "sede.asturias.es/ast/servicios-del-bopa"),
    (8, "Boletín de Cantabria", &["es"], "boc.cantabria.es/boces/"),
    (9, "Boletín Oficial del País Vasco", &["es", "eu"], "euskadi.eus/y22-bopv/es/bopv2/datos/Ultimo.shtml"),
    (10, "Boletín de Navarra", &["es", "eu"], "bon.navarra.es/es"),
    (11, "Boletín de la Junta de Andalucía", &["es"], "juntadeandalucia.es/eboja.html"),
    (12, "Boletín de Aragón", &["es"], "boa.aragon.es"),
    (13, "Boletín de Islas Canarias", &["es"], "gobiernodecanarias.org/boc"),
    (14, "Boletín de Islas Baleares", &["es", "ca"], "caib.es/eboibfront/"),
    (15, "Boletín de Castilla y León", &["es"], "bocyl.jcyl.es"),
    (16, "Boletín de la Ciudad de Ceuta", &["es"], "ceuta.es/ceuta/bocce"),
    (17, "Boletín de Melilla", &["es"], "bomemelilla.es/bomes/2022"),
    (18, "Diario de Extremadura", &["es"], "doe.juntaex.es/"),
    (19, "Diario de Castilla-La Mancha", &["es"], "docm.jccm.es/docm/"),
    (20, "Diario de Galicia", &["gl"], "xunta.gal/diario-oficial-galicia/"),
    (21, "Diari de la Generalitat Valenciana", &["es", "ca-valencia"], "dogv.gva.es/es"),
    (22, "Diari de la Generalitat Catalana", &["es", "ca"], "dogc.gencat.cat/es/inici/"),
    (23, "Boletín del Ayuntamiento de Madrid", &["es"], "sede.madrid.es/portal/site/tramites/menuitem.944fd80592a1301b7ce0ccf4a8a409a0"),
    (24, "Boletín del Ayuntamiento de Barcelona", &["es", "ca"], "w123.bcn.cat/APPS/egaseta/home.do?reqCode=init"),
];

/// Default profiles for the 24 official gazettes, keyed by their number.
///
/// Fetching is disabled until base URLs are configured. Sources 10 and 22
/// print two columns; source 4 draws every word as its own text object.
pub fn gazette_registry() -> Vec<SourceProfile> {
    GAZETTES
        .iter()
        .map(|&(id, name, langs, url)| {
            let mut p = SourceProfile::new(id.to_string(), name);
            p.languages = langs.iter().map(|s| s.to_string()).collect();
            p.access_url = Some(format!("https://{url}"));
            if matches!(id, 10 | 22) {
                p.extraction.columns = 2;
            }
            if id == 4 {
                p.extraction.spaceless_words = true;
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_valid() {
        let r = gazette_registry();
        assert_eq!(r.len(), 24);
        for (i, p) in r.iter().enumerate() {
            assert_eq!(p.source_id, (i + 1).to_string());
            assert!(p.problems().is_empty(), "{:?}", p.problems());
        }
        assert_eq!(r[9].extraction.columns, 2);
        assert_eq!(r[21].extraction.columns, 2);
        assert!(r[3].extraction.spaceless_words);
        assert_eq!(r[19].languages, vec!["gl"]);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let p = gazette_registry().remove(13);
        assert_eq!(SourceProfile::from_toml(&p.to_toml()).unwrap(), p);
        let minimal = SourceProfile::from_toml("source_id = \"x\"\nname = \"X\"\n").unwrap();
        assert_eq!(minimal.extraction.gap_factor, 0.6);
        assert_eq!(minimal.extraction.line_quantum, 3.0);
        assert_eq!(minimal.fetch.rate_limit_secs, 1.0);
        assert_eq!(minimal.labeling.n_trees, 100);
    }

    #[test]
    fn impolite_or_unsafe_profiles_are_rejected() {
        let mut p = SourceProfile::new("../etc", "x");
        p.fetch.rate_limit_secs = 0.2;
        let problems = p.problems();
        assert_eq!(problems.len(), 2, "{problems:?}");
    }
}
