//! Embedding of the chain on the edges of an `L x L` square lattice and the
//! diagonal cuts derived from it.
//!
//! The chain is a two-armed spiral. Arm 2 leaves the lattice center heading
//! east and winds clockwise in rings of `4r` edges; arm 1 is its image under
//! a half turn about the center. The chain runs arm 1 from its outer end in
//! to the center, then out along arm 2, so it visits every vertex of the
//! `(L+1) x (L+1)` grid exactly once and covers `L(L+2)` edges.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::{Side, SubsystemMask};
use crate::output::{write_file, CsvTable, Metadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Vertex {
    pub x: i32,
    pub y: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// One lattice bond between adjacent vertices, in trail direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgeCoord {
    pub from: Vertex,
    pub to: Vertex,
}

impl EdgeCoord {
    pub fn orientation(&self) -> Orientation {
        if self.from.y == self.to.y {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        }
    }

    pub fn midpoint(&self) -> (f64, f64) {
        (
            (self.from.x + self.to.x) as f64 / 2.0,
            (self.from.y + self.to.y) as f64 / 2.0,
        )
    }

    /// Undirected identity, for self-avoidance checks.
    pub fn key(&self) -> (Vertex, Vertex) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpiralEmbedding {
    l: usize,
    vertices: Vec<Vertex>,
}

impl SpiralEmbedding {
    pub fn l(&self) -> usize {
        self.l
    }

    /// Trail vertices; coordinates lie in `[0, L]^2`.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> Vec<EdgeCoord> {
        self.vertices
            .windows(2)
            .map(|w| EdgeCoord { from: w[0], to: w[1] })
            .collect()
    }
}

/// Vertices of arm 2 in centered coordinates, starting at the center.
fn arm(half: i32) -> Vec<(i32, i32)> {
    let mut pts = vec![(0, 0)];
    let walk = |dx: i32, dy: i32, steps: i32, pts: &mut Vec<(i32, i32)>| {
        for _ in 0..steps {
            let &(x, y) = pts.last().unwrap();
            pts.push((x + dx, y + dy));
        }
    };
    for r in 1..=half {
        if r % 2 == 1 {
            walk(1, 0, 1, &mut pts);
            walk(0, -1, 2 * r - 1, &mut pts);
            walk(-1, 0, 2 * r, &mut pts);
        } else {
            walk(-1, 0, 1, &mut pts);
            walk(0, 1, 2 * r - 1, &mut pts);
            walk(1, 0, 2 * r, &mut pts);
        }
    }
    pts
}

pub fn build_spiral(l: usize) -> Result<SpiralEmbedding> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::invalid(format!("L must be even and >= 2, got {l}")));
    }
    let half = (l / 2) as i32;
    let arm2 = arm(half);
    let shift = |(x, y): (i32, i32)| Vertex { x: x + half, y: y + half };
    let vertices = arm2
        .iter()
        .rev()
        .map(|&(x, y)| shift((-x, -y)))
        .chain(arm2.iter().skip(1).map(|&p| shift(p)))
        .collect();
    Ok(SpiralEmbedding { l, vertices })
}

/// Label each edge by the side of the cut line its midpoint falls on. The
/// line is the main diagonal moved `a/2` edge lengths perpendicular to
/// itself; the side holding the first edge is A.
pub fn diagonal_cut_mask(embedding: &SpiralEmbedding, a: usize) -> Result<SubsystemMask> {
    if a > 3 {
        return Err(Error::invalid(format!("cut offset a must be in 0..=3, got {a}")));
    }
    let c = embedding.l as f64 / 2.0;
    let threshold = a as f64 / std::f64::consts::SQRT_2;
    let above: Vec<bool> = embedding
        .edges()
        .iter()
        .map(|e| {
            let (x, y) = e.midpoint();
            (y - c) - (x - c) > threshold
        })
        .collect();
    let first = above[0];
    Ok(SubsystemMask::new(
        above.into_iter().map(|s| if s == first { Side::A } else { Side::B }).collect(),
    ))
}

const CELL: usize = 24;
const MARGIN: usize = 16;

/// Deterministic SVG: grid, chain polyline, optional mask coloring with the
/// main diagonal drawn as the cut line, and metadata as an embedded JSON
/// comment.
pub fn export_svg(embedding: &SpiralEmbedding, mask: Option<&SubsystemMask>, meta: Option<&Metadata>) -> Result<String> {
    let l = embedding.l;
    if let Some(m) = mask {
        if m.len() != embedding.len() {
            return Err(Error::invalid("mask length does not match the embedding"));
        }
    }
    let size = l * CELL + 2 * MARGIN;
    let px = |v: Vertex| (MARGIN + v.x as usize * CELL, MARGIN + (l - v.y as usize) * CELL);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .unwrap();
    if let Some(meta) = meta {
        let json = serde_json::to_string(meta)?;
        writeln!(s, "<metadata><![CDATA[{json}]]></metadata>").unwrap();
    }
    writeln!(s, r##"<g id="grid" stroke="#dddddd" stroke-width="1">"##).unwrap();
    for i in 0..=l {
        let p = MARGIN + i * CELL;
        let end = MARGIN + l * CELL;
        writeln!(s, r#"<line x1="{p}" y1="{MARGIN}" x2="{p}" y2="{end}"/>"#).unwrap();
        writeln!(s, r#"<line x1="{MARGIN}" y1="{p}" x2="{end}" y2="{p}"/>"#).unwrap();
    }
    writeln!(s, "</g>").unwrap();
    let points: Vec<String> = embedding
        .vertices
        .iter()
        .map(|&v| {
            let (x, y) = px(v);
            format!("{x},{y}")
        })
        .collect();
    writeln!(
        s,
        r##"<polyline id="trail" fill="none" stroke="#999999" stroke-width="1" points="{}"/>"##,
        points.join(" ")
    )
    .unwrap();
    writeln!(s, r#"<g id="chain" stroke-width="4" stroke-linecap="round">"#).unwrap();
    for (i, e) in embedding.edges().iter().enumerate() {
        let color = match mask.map(|m| m.side(i)) {
            None => "#333333",
            Some(Side::A) => "#d62728",
            Some(Side::B) => "#1f77b4",
        };
        let (x1, y1) = px(e.from);
        let (x2, y2) = px(e.to);
        writeln!(s, r#"<line class="edge" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{color}"/>"#).unwrap();
    }
    writeln!(s, "</g>").unwrap();
    if mask.is_some() {
        let (x1, y1) = px(Vertex { x: 0, y: 0 });
        let (x2, y2) = px(Vertex { x: l as i32, y: l as i32 });
        writeln!(
            s,
            r##"<line id="cut" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="#2ca02c" stroke-width="2" stroke-dasharray="6,4"/>"##
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

pub fn write_svg(path: &Path, embedding: &SpiralEmbedding, mask: Option<&SubsystemMask>, meta: &Metadata) -> Result<()> {
    write_file(path, export_svg(embedding, mask, Some(meta))?.as_bytes())
}

/// Columns `chain_index,x1,y1,x2,y2,subsystem`; `chain_index` is 1-based and
/// `subsystem` is blank without a mask.
pub fn export_csv(embedding: &SpiralEmbedding, mask: Option<&SubsystemMask>) -> Result<CsvTable> {
    if let Some(m) = mask {
        if m.len() != embedding.len() {
            return Err(Error::invalid("mask length does not match the embedding"));
        }
    }
    let mut table = CsvTable::new(&["chain_index", "x1", "y1", "x2", "y2", "subsystem"]);
    for (i, e) in embedding.edges().iter().enumerate() {
        let side = mask.map_or_else(String::new, |m| m.side(i).letter().to_string());
        table.push(vec![
            (i + 1).to_string(),
            e.from.x.to_string(),
            e.from.y.to_string(),
            e.to.x.to_string(),
            e.to.y.to_string(),
            side,
        ]);
    }
    Ok(table)
}
