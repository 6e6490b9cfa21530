//! Heuristic labeling rules.
//!
//! A rule file holds one rule per line; the first rule whose conditions all
//! hold assigns the label, and blocks matching nothing fall back to the
//! default (Body unless a `DEFAULT` line says otherwise).
//!
//! ```text
//! # comments start with '#'
//! IF f13 > 0.5 THEN Title
//! IF f15 < 8.5 AND f18 <= 40 THEN Identifier
//! IF f12 CONTAINS_ANY [lunes, martes, miércoles] THEN Identifier
//! IF f16 CONTAINS_ANY [Oblique, Italic] THEN Summary
//! DEFAULT Body
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::features::FeatureVector;
use crate::layout::LayoutLabel;

/// Rules shipped for the synthetic gazette templates.
pub const STARTER_RULES: &str = "\
# starter rules for the synthetic gazette templates
IF f15 < 8.5 THEN Identifier
IF f13 > 0.5 THEN Title
IF f14 > 0.5 THEN Summary
IF f12 CONTAINS_ANY [lunes, martes, miércoles, jueves, viernes, sábado, domingo] THEN Identifier
DEFAULT Body
";

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("rule line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl Cmp {
    fn eval(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Condition {
    Numeric { feature: u8, cmp: Cmp, value: f64 },
    TextContains(Vec<String>),
    FontContains(Vec<String>),
}

impl Condition {
    fn holds(&self, fv: &FeatureVector) -> bool {
        match self {
            Condition::Numeric { feature, cmp, value } => {
                numeric_feature(fv, *feature).is_some_and(|v| cmp.eval(v, *value))
            }
            Condition::TextContains(words) => {
                let Some(text) = fv.payload.as_deref() else { return false };
                let text = text.to_lowercase();
                words.iter().any(|w| text.contains(w.as_str()))
            }
            Condition::FontContains(names) => {
                let Some(t) = fv.text.as_ref() else { return false };
                t.fonts.iter().any(|f| {
                    let f = f.to_lowercase();
                    names.iter().any(|n| f.contains(n.as_str()))
                })
            }
        }
    }
}

fn numeric_feature(fv: &FeatureVector, n: u8) -> Option<f64> {
    let t = fv.text.as_ref();
    Some(match n {
        1 => fv.page as f64,
        2 => fv.bbox.x0,
        3 => fv.bbox.y0,
        4 => fv.bbox.x1,
        5 => fv.bbox.y1,
        6 => fv.center.0,
        7 => fv.center.1,
        8 => fv.margins.left,
        9 => fv.margins.top,
        10 => fv.margins.right,
        11 => fv.margins.bottom,
        13 => t?.bold_ratio,
        14 => t?.italic_ratio,
        15 => t?.font_size,
        17 => t?.caps_ratio,
        18 => t?.tokens as f64,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    conditions: Vec<Condition>,
    label: LayoutLabel,
}

/// Ordered rule list with a default label; the first match wins.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicRuleSet {
    rules: Vec<Rule>,
    default: LayoutLabel,
}

impl Default for HeuristicRuleSet {
    fn default() -> Self {
        Self { rules: Vec::new(), default: LayoutLabel::Body }
    }
}

impl HeuristicRuleSet {
    pub fn starter() -> Self {
        STARTER_RULES.parse().expect("starter rules parse")
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn default_label(&self) -> LayoutLabel {
        self.default
    }

    pub fn label(&self, fv: &FeatureVector) -> LayoutLabel {
        self.rules
            .iter()
            .find(|r| r.conditions.iter().all(|c| c.holds(fv)))
            .map_or(self.default, |r| r.label)
    }
}

/// Labels each text block with the first matching rule.
pub fn apply_heuristics(rules: &HeuristicRuleSet, blocks: &[FeatureVector]) -> Vec<LayoutLabel> {
    blocks.iter().map(|fv| rules.label(fv)).collect()
}

fn parse_label(s: &str, line: usize) -> Result<LayoutLabel, RuleError> {
    let label: LayoutLabel =
        s.parse().map_err(|_| RuleError::Syntax { line, message: format!("unknown label {s:?}") })?;
    if !label.is_text() {
        return Err(RuleError::Syntax { line, message: format!("{label} is not a text category") });
    }
    Ok(label)
}

fn parse_list(s: &str, line: usize) -> Result<Vec<String>, RuleError> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| RuleError::Syntax { line, message: format!("expected [a, b, ...], got {s:?}") })?;
    let items: Vec<String> =
        inner.split(',').map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect();
    if items.is_empty() {
        return Err(RuleError::Syntax { line, message: "empty keyword list".into() });
    }
    Ok(items)
}

fn parse_condition(s: &str, line: usize) -> Result<Condition, RuleError> {
    let s = s.trim();
    let err = |message: String| RuleError::Syntax { line, message };
    if let Some((lhs, rhs)) = s.split_once("CONTAINS_ANY") {
        let list = parse_list(rhs, line)?;
        return match lhs.trim() {
            "f12" => Ok(Condition::TextContains(list)),
            "f16" => Ok(Condition::FontContains(list)),
            other => Err(err(format!("CONTAINS_ANY applies to f12 or f16, not {other}"))),
        };
    }
    let mut parts = s.split_whitespace();
    let (Some(feat), Some(op), Some(val), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(err(format!("cannot parse condition {s:?}")));
    };
    let feature: u8 = feat
        .strip_prefix('f')
        .and_then(|n| n.parse().ok())
        .filter(|n| matches!(n, 1..=11 | 13 | 14 | 15 | 17 | 18))
        .ok_or_else(|| err(format!("{feat} is not a numeric feature")))?;
    let cmp = match op {
        ">" => Cmp::Gt,
        ">=" => Cmp::Ge,
        "<" => Cmp::Lt,
        "<=" => Cmp::Le,
        "==" => Cmp::Eq,
        "!=" => Cmp::Ne,
        _ => return Err(err(format!("unknown operator {op}"))),
    };
    let value: f64 = val.parse().map_err(|_| err(format!("bad number {val:?}")))?;
    Ok(Condition::Numeric { feature, cmp, value })
}

impl FromStr for HeuristicRuleSet {
    type Err = RuleError;

    fn from_str(src: &str) -> Result<Self, Self::Err> {
        let mut set = HeuristicRuleSet::default();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            if let Some(rest) = text.strip_prefix("DEFAULT") {
                set.default = parse_label(rest.trim(), line)?;
                continue;
            }
            let body = text
                .strip_prefix("IF ")
                .ok_or_else(|| RuleError::Syntax { line, message: "rules start with IF or DEFAULT".into() })?;
            let (conds, label) = body
                .rsplit_once(" THEN ")
                .ok_or_else(|| RuleError::Syntax { line, message: "missing THEN".into() })?;
            let conditions = conds.split(" AND ").map(|c| parse_condition(c, line)).collect::<Result<_, _>>()?;
            set.rules.push(Rule { conditions, label: parse_label(label.trim(), line)? });
        }
        Ok(set)
    }
}

impl fmt::Display for HeuristicRuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            let conds: Vec<String> = rule
                .conditions
                .iter()
                .map(|c| match c {
                    Condition::Numeric { feature, cmp, value } => format!("f{feature} {} {value}", cmp.symbol()),
                    Condition::TextContains(w) => format!("f12 CONTAINS_ANY [{}]", w.join(", ")),
                    Condition::FontContains(w) => format!("f16 CONTAINS_ANY [{}]", w.join(", ")),
                })
                .collect();
            writeln!(f, "IF {} THEN {}", conds.join(" AND "), rule.label)?;
        }
        writeln!(f, "DEFAULT {}", self.default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TextFeatures;
    use crate::geometry::{BoundingBox, PageMargins};
    use crate::layout::BlockKind;

    fn fv(text: &str, bold: f64, italic: f64, size: f64) -> FeatureVector {
        let bbox = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        FeatureVector {
            page: 0,
            bbox,
            center: bbox.center(),
            margins: PageMargins { left: 0.0, top: 0.0, right: 0.0, bottom: 0.0, clipped: false },
            payload: Some(text.into()),
            text: Some(TextFeatures {
                bold_ratio: bold,
                italic_ratio: italic,
                font_size: size,
                fonts: vec!["Helvetica".into()],
                caps_ratio: 0.1,
                tokens: text.split(' ').count(),
            }),
            kind: BlockKind::Text,
            label: LayoutLabel::Body,
        }
    }

    #[test]
    fn bold_rule() {
        let rules: HeuristicRuleSet = "IF f13 > 0.5 THEN Title".parse().unwrap();
        assert_eq!(rules.label(&fv("x", 0.8, 0.0, 10.0)), LayoutLabel::Title);
        assert_eq!(rules.label(&fv("x", 0.5, 0.0, 10.0)), LayoutLabel::Body);
    }

    #[test]
    fn weekday_rule() {
        let rules = HeuristicRuleSet::starter();
        assert_eq!(rules.label(&fv("Publicado el lunes 3 de enero", 0.0, 0.0, 10.0)), LayoutLabel::Identifier);
        assert_eq!(rules.label(&fv("Sábado 1", 0.0, 0.0, 10.0)), LayoutLabel::Identifier);
    }

    #[test]
    fn default_body() {
        let rules = HeuristicRuleSet::starter();
        let blocks = vec![fv("texto normal", 0.0, 0.0, 10.0), fv("resumen", 0.0, 1.0, 9.0)];
        assert_eq!(apply_heuristics(&rules, &blocks), vec![LayoutLabel::Body, LayoutLabel::Summary]);
    }

    #[test]
    fn first_match_wins() {
        let rules: HeuristicRuleSet = "IF f13 > 0.5 THEN Title\nIF f15 > 5 THEN Summary\nDEFAULT Identifier".parse().unwrap();
        assert_eq!(rules.label(&fv("a", 1.0, 0.0, 10.0)), LayoutLabel::Title);
        assert_eq!(rules.label(&fv("a", 0.0, 0.0, 10.0)), LayoutLabel::Summary);
        assert_eq!(rules.label(&fv("a", 0.0, 0.0, 1.0)), LayoutLabel::Identifier);
    }

    #[test]
    fn conjunction_and_fonts() {
        let rules: HeuristicRuleSet =
            "IF f16 CONTAINS_ANY [helv] AND f18 >= 2 THEN Summary".parse().unwrap();
        assert_eq!(rules.label(&fv("a b", 0.0, 0.0, 10.0)), LayoutLabel::Summary);
        assert_eq!(rules.label(&fv("a", 0.0, 0.0, 10.0)), LayoutLabel::Body);
    }

    #[test]
    fn syntax_errors() {
        assert!("IF f12 > 3 THEN Title".parse::<HeuristicRuleSet>().is_err());
        assert!("IF f13 > 0.5 THEN Table".parse::<HeuristicRuleSet>().is_err());
        assert!("WHEN f13 > 0.5 THEN Title".parse::<HeuristicRuleSet>().is_err());
        assert!("IF f13 ~ 0.5 THEN Title".parse::<HeuristicRuleSet>().is_err());
        let e = "\n\nIF f13 > x THEN Title".parse::<HeuristicRuleSet>().unwrap_err();
        assert!(matches!(e, RuleError::Syntax { line: 3, .. }));
    }

    #[test]
    fn display_round_trip() {
        let rules = HeuristicRuleSet::starter();
        let again: HeuristicRuleSet = rules.to_string().parse().unwrap();
        assert_eq!(again, rules);
    }
}
