//! Ruled ("lattice") table detection from vector line art.

use std::path::{Path, PathBuf};

use dla_core::features::join_spans;
use dla_core::{preprocess_text, BlockKind, BoundingBox, LayoutBlock, PageGeometry, TextSpan};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Text blocks overlapping a table by more than this fraction are removed.
pub const SUPPRESSION_THRESHOLD: f64 = 0.70;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Segment {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }

    pub fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableParams {
    pub angle_tolerance_deg: f64,
    pub endpoint_tolerance: f64,
}

impl Default for TableParams {
    fn default() -> Self {
        Self { angle_tolerance_deg: 1.0, endpoint_tolerance: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub bbox: BoundingBox,
    pub row_boundaries: Vec<f64>,
    pub col_boundaries: Vec<f64>,
    pub cells: Vec<Vec<String>>,
    pub rotation: u16,
}

impl TableGrid {
    pub fn rows(&self) -> usize {
        self.row_boundaries.len().saturating_sub(1)
    }

    pub fn cols(&self) -> usize {
        self.col_boundaries.len().saturating_sub(1)
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// An axis-aligned rule: `pos` is y for horizontal rules and x for vertical ones.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rule {
    pos: f64,
    lo: f64,
    hi: f64,
}

/// Splits segments into horizontal and vertical rules; oblique ones are dropped.
fn classify(segments: &[Segment], p: &TableParams) -> (Vec<Rule>, Vec<Rule>) {
    let tan = p.angle_tolerance_deg.to_radians().tan();
    let mut h = Vec::new();
    let mut v = Vec::new();
    for s in segments {
        let dx = (s.x1 - s.x0).abs();
        let dy = (s.y1 - s.y0).abs();
        if !(dx.is_finite() && dy.is_finite()) || (dx == 0.0 && dy == 0.0) {
            continue;
        }
        if dy <= dx * tan {
            h.push(Rule { pos: s.y0.min(s.y1), lo: s.x0.min(s.x1), hi: s.x0.max(s.x1) });
        } else if dx <= dy * tan {
            v.push(Rule { pos: s.x0.min(s.x1), lo: s.y0.min(s.y1), hi: s.y0.max(s.y1) });
        }
    }
    (merge_collinear(h, p.endpoint_tolerance), merge_collinear(v, p.endpoint_tolerance))
}

/// Joins rules on (nearly) the same line whose extents touch within `tol`.
fn merge_collinear(mut rules: Vec<Rule>, tol: f64) -> Vec<Rule> {
    rules.sort_by(|a, b| a.pos.total_cmp(&b.pos).then(a.lo.total_cmp(&b.lo)));
    let mut bands: Vec<Vec<Rule>> = Vec::new();
    for r in rules {
        match bands.last_mut() {
            Some(band) if r.pos - band[0].pos <= tol => band.push(r),
            _ => bands.push(vec![r]),
        }
    }
    let mut out = Vec::new();
    for mut band in bands {
        let pos = band[0].pos;
        band.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut cur = Rule { pos, ..band[0] };
        for r in &band[1..] {
            if r.lo <= cur.hi + tol {
                cur.hi = cur.hi.max(r.hi);
            } else {
                out.push(cur);
                cur = Rule { pos, ..*r };
            }
        }
        out.push(cur);
    }
    out
}

fn intersects(h: &Rule, v: &Rule, tol: f64) -> bool {
    v.pos >= h.lo - tol && v.pos <= h.hi + tol && h.pos >= v.lo - tol && h.pos <= v.hi + tol
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Distinct positions, merging values within `tol` of a cluster's first member.
fn cluster(mut values: Vec<f64>, tol: f64) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if out.last().is_none_or(|&last| v - last > tol) {
            out.push(v);
        }
    }
    out
}

fn band_index(bounds: &[f64], v: f64) -> usize {
    let n = bounds.len() - 1;
    bounds[1..n].iter().take_while(|&&b| b <= v).count().min(n - 1)
}

/// Maps a page point into the logical frame of a table rotated by `rotation`.
pub fn rotate_point((x, y): (f64, f64), rotation: u16, g: &PageGeometry) -> (f64, f64) {
    match rotation {
        90 => (y, g.width - x),
        180 => (g.width - x, g.height - y),
        270 => (g.height - y, x),
        _ => (x, y),
    }
}

/// Inverse of [`rotate_point`].
pub fn unrotate_point((x, y): (f64, f64), rotation: u16, g: &PageGeometry) -> (f64, f64) {
    match rotation {
        90 => (g.width - y, x),
        180 => (g.width - x, g.height - y),
        270 => (y, g.height - x),
        _ => (x, y),
    }
}

fn majority_rotation(spans: &[&TextSpan]) -> u16 {
    let mut counts = [0usize; 3];
    for s in spans {
        match s.rotation {
            90 => counts[1] += 1,
            270 => counts[2] += 1,
            _ => counts[0] += 1,
        }
    }
    let best = (0..3).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap_or(0);
    [0, 90, 270][best]
}

/// Orders spans for reading within one cell, in the table's logical frame.
fn cell_order(spans: &mut [&TextSpan], rotation: u16, g: &PageGeometry) {
    let key = |s: &TextSpan| {
        let (x, y) = rotate_point((s.bbox.x0, s.bbox.y0), rotation, g);
        let (x2, y2) = rotate_point((s.bbox.x1, s.bbox.y1), rotation, g);
        let (lx, ly) = (x.min(x2), y.min(y2));
        ((ly / 3.0).round() as i64, lx)
    };
    spans.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
}

pub fn detect_tables(segments: &[Segment], spans: &[TextSpan], g: &PageGeometry, p: &TableParams) -> Vec<TableGrid> {
    let tol = p.endpoint_tolerance;
    let (h, v) = classify(segments, p);
    let n = h.len() + v.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, hr) in h.iter().enumerate() {
        for (j, vr) in v.iter().enumerate() {
            if intersects(hr, vr, tol) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, h.len() + j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<Rule>, Vec<Rule>)> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        let entry = groups.entry(root).or_default();
        if i < h.len() {
            entry.0.push(h[i]);
        } else {
            entry.1.push(v[i - h.len()]);
        }
    }
    let mut tables = Vec::new();
    for (hs, vs) in groups.into_values() {
        if hs.len() < 2 || vs.len() < 2 {
            continue;
        }
        let rows = cluster(hs.iter().map(|r| r.pos).collect(), tol);
        let cols = cluster(vs.iter().map(|r| r.pos).collect(), tol);
        if rows.len() < 2 || cols.len() < 2 {
            continue;
        }
        let pts = hs.iter().flat_map(|r| [(r.lo, r.pos), (r.hi, r.pos)]).chain(vs.iter().flat_map(|r| [(r.pos, r.lo), (r.pos, r.hi)]));
        let Some(bbox) = BoundingBox::hull_of_points(pts) else { continue };
        if bbox.area() <= 0.0 {
            continue;
        }
        let inside: Vec<&TextSpan> = spans
            .iter()
            .filter(|s| {
                let (cx, cy) = s.bbox.center();
                bbox.contains_point(cx, cy)
            })
            .collect();
        let rotation = majority_rotation(&inside);
        let mut buckets: Vec<Vec<Vec<&TextSpan>>> = vec![vec![Vec::new(); cols.len() - 1]; rows.len() - 1];
        for s in &inside {
            let (cx, cy) = s.bbox.center();
            buckets[band_index(&rows, cy)][band_index(&cols, cx)].push(s);
        }
        let cells = buckets
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|mut cell| {
                        cell_order(&mut cell, rotation, g);
                        let owned: Vec<TextSpan> = cell.into_iter().cloned().collect();
                        preprocess_text(&join_spans(&owned))
                    })
                    .collect()
            })
            .collect();
        tables.push(TableGrid { bbox, row_boundaries: rows, col_boundaries: cols, cells, rotation });
    }
    tables.sort_by(|a, b| {
        let ka = ((a.bbox.y0 / 3.0).round() as i64, a.bbox.x0);
        let kb = ((b.bbox.y0 / 3.0).round() as i64, b.bbox.x0);
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    tables
}

/// Re-expresses a rotated table in its logical (reading) orientation.
///
/// Row and column boundaries move to the logical frame given by
/// [`rotate_point`], cells are re-indexed so `cells[0][0]` is the logical
/// top-left cell, and `bbox` stays in page coordinates.
pub fn normalize_rotated_table(t: &TableGrid, g: &PageGeometry) -> TableGrid {
    let (nr, nc) = (t.rows(), t.cols());
    match t.rotation {
        90 => {
            let mut rows: Vec<f64> = t.col_boundaries.iter().map(|&x| g.width - x).collect();
            rows.sort_by(f64::total_cmp);
            let cells = (0..nc).map(|i| (0..nr).map(|j| t.cells[j][nc - 1 - i].clone()).collect()).collect();
            TableGrid { bbox: t.bbox, row_boundaries: rows, col_boundaries: t.row_boundaries.clone(), cells, rotation: 90 }
        }
        270 => {
            let mut cols: Vec<f64> = t.row_boundaries.iter().map(|&y| g.height - y).collect();
            cols.sort_by(f64::total_cmp);
            let cells = (0..nc).map(|i| (0..nr).map(|j| t.cells[nr - 1 - j][i].clone()).collect()).collect();
            TableGrid { bbox: t.bbox, row_boundaries: t.col_boundaries.clone(), col_boundaries: cols, cells, rotation: 270 }
        }
        _ => t.clone(),
    }
}

/// Writes the cell grid as RFC 4180 CSV with LF line endings.
pub fn export_cells(t: &TableGrid, path: &Path) -> Result<PathBuf, TableError> {
    let io_err = |source| TableError::Io { path: path.to_path_buf(), source };
    let csv_err = |source| TableError::Csv { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    for row in &t.cells {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(path.to_path_buf())
}

/// The CSV document [`export_cells`] would write.
pub fn cells_to_csv(t: &TableGrid) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in &t.cells {
        // Writing to memory cannot fail.
        w.write_record(row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv of utf-8 cells is utf-8")
}

pub fn suppress_overlapping_text(blocks: Vec<LayoutBlock>, tables: &[BoundingBox]) -> (Vec<LayoutBlock>, usize) {
    let before = blocks.len();
    let kept: Vec<LayoutBlock> = blocks
        .into_iter()
        .filter(|b| b.kind != BlockKind::Text || !tables.iter().any(|t| b.bbox.overlap_fraction(t) > SUPPRESSION_THRESHOLD))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page() -> PageGeometry {
        PageGeometry::new(0, 595.0, 842.0).unwrap()
    }

    fn span(text: &str, x: f64, y: f64, rotation: u16, line_id: usize) -> TextSpan {
        let (w, h) = if rotation == 0 { (20.0, 8.0) } else { (8.0, 20.0) };
        TextSpan {
            text: text.into(),
            font_name: "Helvetica".into(),
            font_size: 8.0,
            bold: false,
            italic: false,
            bbox: BoundingBox::new(x, y, x + w, y + h).unwrap(),
            line_id,
            rotation,
        }
    }

    /// Full grid with `rows x cols` cells of size 50x20 at (x, y).
    fn grid(x: f64, y: f64, rows: usize, cols: usize, cw: f64, ch: f64) -> Vec<Segment> {
        let mut s = Vec::new();
        for r in 0..=rows {
            let yy = y + r as f64 * ch;
            s.push(Segment::new(x, yy, x + cols as f64 * cw, yy));
        }
        for c in 0..=cols {
            let xx = x + c as f64 * cw;
            s.push(Segment::new(xx, y, xx, y + rows as f64 * ch));
        }
        s
    }

    #[test]
    fn three_by_four() {
        let segs = grid(100.0, 100.0, 3, 4, 50.0, 20.0);
        let mut spans = Vec::new();
        for r in 0..3 {
            for c in 0..4 {
                spans.push(span(&format!("r{r}c{c}"), 105.0 + 50.0 * c as f64, 105.0 + 20.0 * r as f64, 0, r * 4 + c));
            }
        }
        let t = detect_tables(&segs, &spans, &page(), &TableParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].rows(), t[0].cols()), (3, 4));
        assert_eq!(t[0].cells[2][1], "r2c1");
        assert_eq!(t[0].bbox, BoundingBox::new(100.0, 100.0, 300.0, 160.0).unwrap());
    }

    #[test]
    fn single_rule_is_not_a_table() {
        let segs = [Segment::new(50.0, 400.0, 500.0, 400.0)];
        assert!(detect_tables(&segs, &[], &page(), &TableParams::default()).is_empty());
    }

    #[test]
    fn two_disjoint_tables() {
        let mut segs = grid(50.0, 50.0, 2, 2, 40.0, 15.0);
        segs.extend(grid(50.0, 400.0, 1, 3, 40.0, 15.0));
        let t = detect_tables(&segs, &[], &page(), &TableParams::default());
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].bbox.intersection(&t[1].bbox), None);
        assert_eq!((t[1].rows(), t[1].cols()), (1, 3));
    }

    #[test]
    fn drift_and_split_rules_are_snapped() {
        // A slightly tilted rule, and a rule drawn in two pieces with a tiny gap.
        let mut segs = grid(100.0, 100.0, 2, 2, 50.0, 20.0);
        segs[0] = Segment::new(100.0, 100.0, 200.0, 100.5);
        segs[1] = Segment::new(100.0, 120.0, 149.0, 120.0);
        segs.push(Segment::new(150.5, 120.0, 200.0, 120.0));
        let t = detect_tables(&segs, &[], &page(), &TableParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].rows(), t[0].cols()), (2, 2));
    }

    #[test]
    fn oblique_lines_are_ignored() {
        let mut segs = grid(100.0, 100.0, 1, 1, 50.0, 20.0);
        segs.push(Segment::new(100.0, 100.0, 150.0, 120.0));
        let t = detect_tables(&segs, &[], &page(), &TableParams::default());
        assert_eq!((t[0].rows(), t[0].cols()), (1, 1));
    }

    #[test]
    fn transform_roundtrip() {
        let g = page();
        for rot in [0u16, 90, 180, 270] {
            let p = (123.25, 456.5);
            assert_eq!(unrotate_point(rotate_point(p, rot, &g), rot, &g), p);
        }
        assert_eq!(rotate_point((10.0, 20.0), 90, &g), (20.0, 585.0));
    }

    #[test]
    fn rotated_270_table_is_reindexed() {
        // Logical 2x3 table drawn rotated: logical rows run left to right,
        // logical columns run bottom to top.
        let g = page();
        let segs = grid(100.0, 100.0, 3, 2, 30.0, 60.0);
        let mut spans = Vec::new();
        for i in 0..2 {
            for j in 0..3 {
                // Physical column = logical row i, physical row = 2 - j.
                let x = 100.0 + 30.0 * i as f64 + 10.0;
                let y = 100.0 + 60.0 * (2 - j) as f64 + 20.0;
                spans.push(span(&format!("L{i}{j}"), x, y, 270, i * 3 + j));
            }
        }
        let t = detect_tables(&segs, &spans, &g, &TableParams::default());
        assert_eq!(t[0].rotation, 270);
        let n = normalize_rotated_table(&t[0], &g);
        assert_eq!((n.rows(), n.cols()), (2, 3));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(n.cells[i][j], format!("L{i}{j}"));
            }
        }
        assert_eq!(n.bbox, t[0].bbox);
    }

    #[test]
    fn rotated_90_table_is_reindexed() {
        let g = page();
        let segs = grid(100.0, 100.0, 3, 2, 30.0, 60.0);
        let mut spans = Vec::new();
        for i in 0..2 {
            for j in 0..3 {
                // Text reads downward: logical rows run right to left.
                let x = 100.0 + 30.0 * (1 - i) as f64 + 10.0;
                let y = 100.0 + 60.0 * j as f64 + 20.0;
                spans.push(span(&format!("L{i}{j}"), x, y, 90, i * 3 + j));
            }
        }
        let t = detect_tables(&segs, &spans, &g, &TableParams::default());
        let n = normalize_rotated_table(&t[0], &g);
        assert_eq!(n.cells, vec![vec!["L00", "L01", "L02"], vec!["L10", "L11", "L12"]]);
    }

    #[test]
    fn unrotated_normalization_is_identity() {
        let t = detect_tables(&grid(0.0, 0.0, 1, 1, 10.0, 10.0), &[], &page(), &TableParams::default());
        assert_eq!(normalize_rotated_table(&t[0], &page()), t[0]);
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = detect_tables(&grid(0.0, 0.0, 1, 1, 10.0, 10.0), &[], &page(), &TableParams::default()).remove(0);
        t.cells = vec![vec!["x".into()]];
        let p = export_cells(&t, &dir.path().join("a/p0_t0.csv")).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "x\n");
        t.cells = vec![vec!["a,b".into(), "say \"hi\"".into()], vec!["1".into(), "2".into()]];
        assert_eq!(cells_to_csv(&t), "\"a,b\",\"say \"\"hi\"\"\"\n1,2\n");
    }

    #[test]
    fn suppression_boundary() {
        let table = BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let mk = |x0: f64, x1: f64| {
            LayoutBlock::text("b".into(), 0, BoundingBox::new(x0, 10.0, x1, 20.0).unwrap(), "t".into(), vec![])
        };
        // 70 of 100 units inside: exactly 0.70, kept.
        let blocks = vec![mk(30.0, 130.0), mk(10.0, 50.0), mk(200.0, 300.0), mk(29.0, 129.0)];
        let (kept, removed) = suppress_overlapping_text(blocks, &[table]);
        assert_eq!(removed, 2);
        assert_eq!(kept.iter().map(|b| b.bbox.x0).collect::<Vec<_>>(), vec![30.0, 200.0]);
    }
}
