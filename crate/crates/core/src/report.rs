//! Deterministic JSON persistence and SVG rendering. JSON is the single
//! source of truth; every document carries the schema tag and floats are
//! written with a fixed 12-significant-digit format so identical runs emit
//! identical bytes.

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::error::{CbError, Result};
use crate::geom::{Rect, Vec2};
use crate::loci::diagram::CBDiagram;
use crate::loci::{CausticCurve, WallKind};
use crate::portrait::PhasePortrait;

pub const SCHEMA: &str = "cb-lab/1";

struct SciFormatter {
    indent: usize,
}

impl SciFormatter {
    fn newline<W: std::io::Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"\n")?;
        w.write_all("  ".repeat(self.indent).as_bytes())
    }
}

impl Formatter for SciFormatter {
    fn write_f64<W: std::io::Write + ?Sized>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        // 12 significant digits, scientific notation; negative zero folded
        let v = if value == 0.0 { 0.0 } else { value };
        write!(writer, "{v:.11e}")
    }

    fn begin_array<W: std::io::Write + ?Sized>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent += 1;
        writer.write_all(b"[")
    }

    fn end_array<W: std::io::Write + ?Sized>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent -= 1;
        writer.write_all(b"]")
    }

    fn begin_array_value<W: std::io::Write + ?Sized>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            writer.write_all(b",")?;
        }
        Ok(())
    }

    fn begin_object<W: std::io::Write + ?Sized>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent += 1;
        writer.write_all(b"{")?;
        Ok(())
    }

    fn end_object<W: std::io::Write + ?Sized>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent -= 1;
        self.newline(writer)?;
        writer.write_all(b"}")
    }

    fn begin_object_key<W: std::io::Write + ?Sized>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            writer.write_all(b",")?;
        }
        self.newline(writer)
    }

    fn begin_object_value<W: std::io::Write + ?Sized>(&mut self, writer: &mut W) -> std::io::Result<()> {
        writer.write_all(b": ")
    }
}

/// Serialize any document deterministically: schema tag first, fixed float
/// format, struct-declaration key order.
pub fn to_json<T: Serialize>(kind: &str, payload: &T) -> Result<String> {
    let value =
        serde_json::to_value(payload).map_err(|e| CbError::Io(format!("serialize: {e}")))?;
    let mut wrapped = serde_json::Map::new();
    wrapped.insert("schema".into(), Value::String(SCHEMA.into()));
    wrapped.insert("kind".into(), Value::String(kind.into()));
    wrapped.insert("payload".into(), value);
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, SciFormatter { indent: 0 });
    Value::Object(wrapped)
        .serialize(&mut ser)
        .map_err(|e| CbError::Io(format!("serialize: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| CbError::Io(e.to_string()))
}

/// Parse a document produced by `to_json`, checking the schema tag.
pub fn from_json(text: &str) -> Result<(String, Value)> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CbError::Io(format!("parse: {e}")))?;
    let schema = value.get("schema").and_then(Value::as_str).unwrap_or_default();
    if schema != SCHEMA {
        return Err(CbError::SchemaError {
            path: "schema".into(),
            message: format!("expected {SCHEMA}, found {schema}"),
        });
    }
    let kind = value.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
    let payload = value.get("payload").cloned().unwrap_or(Value::Null);
    Ok((kind, payload))
}

// ---------------------------------------------------------------- SVG ----

pub struct SvgCanvas {
    view: Rect,
    body: String,
    size: f64,
}

impl SvgCanvas {
    pub fn new(view: Rect) -> Self {
        SvgCanvas { view, body: String::new(), size: 720.0 }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let sx = self.size / self.view.width();
        let sy = self.size / self.view.height();
        ((p.x - self.view.x_min) * sx, self.size - (p.y - self.view.y_min) * sy)
    }

    pub fn polyline(&mut self, points: &[Vec2], stroke: &str, width: f64, dashed: bool) {
        if points.len() < 2 {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"{dash}/>\n",
            pts.join(" ")
        ));
    }

    pub fn circle(&mut self, center: Vec2, radius: f64, fill: &str) {
        let (x, y) = self.map(center);
        self.body.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{radius}\" fill=\"{fill}\"/>\n"
        ));
    }

    pub fn marker(&mut self, center: Vec2, label: &str, color: &str) {
        let (x, y) = self.map(center);
        self.body.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"{color}\"/>\n",
            x - 4.0,
            y - 4.0
        ));
        self.body.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"{color}\">{label}</text>\n",
            x + 6.0,
            y - 6.0
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {s} {s}\" width=\"{s}\" height=\"{s}\">\n<rect width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n{body}</svg>\n",
            s = self.size,
            body = self.body
        )
    }
}

/// Phase-portrait rendering: separatrix trajectories with node markers.
pub fn portrait_svg(portrait: &PhasePortrait, window: Rect) -> String {
    let mut svg = SvgCanvas::new(window);
    for sep in &portrait.separatrices {
        let color = if sep.branch.is_unstable() { "#c0392b" } else { "#2471a3" };
        svg.polyline(&sep.polyline, color, 1.0, false);
    }
    for p in &portrait.points {
        let color = match p.kind {
            crate::portrait::CriticalKind::UnstableNode => "#c0392b",
            crate::portrait::CriticalKind::Saddle => "#1e8449",
            crate::portrait::CriticalKind::StableNode => "#2471a3",
            crate::portrait::CriticalKind::Degenerate => "#7d3c98",
        };
        svg.circle(p.y, 4.0, color);
    }
    svg.finish()
}

/// Caustic rendering: solid curve with cusp dots.
pub fn caustic_svg(caustic: &CausticCurve, region: Rect) -> String {
    let mut svg = SvgCanvas::new(region);
    for seg in &caustic.segments {
        svg.polyline(seg, "#17202a", 1.5, false);
    }
    for cusp in &caustic.cusps {
        svg.circle(*cusp, 5.0, "#7d3c98");
    }
    svg.finish()
}

/// Diagram overlay: caustic solid, bifurcation walls dashed, cusps dotted,
/// codimension-2 markers, chamber representatives labeled.
pub fn diagram_svg(diagram: &CBDiagram) -> String {
    let mut svg = SvgCanvas::new(diagram.region);
    for seg in &diagram.caustic.segments {
        svg.polyline(seg, "#17202a", 1.5, false);
    }
    for wall in &diagram.walls {
        match wall.kind {
            WallKind::CausticFold => svg.polyline(&wall.polyline, "#c0392b", 1.2, false),
            WallKind::Bifurcation => svg.polyline(&wall.polyline, "#2471a3", 1.2, true),
        }
    }
    for cusp in &diagram.caustic.cusps {
        svg.circle(*cusp, 5.0, "#7d3c98");
    }
    for point in &diagram.codim2 {
        svg.marker(point.location, &format!("{:?}", point.kind), "#b9770e");
    }
    for chamber in &diagram.chambers {
        svg.circle(chamber.representative, 3.0, "#1e8449");
        svg.marker(chamber.representative, &format!("U{}", chamber.id), "#1e8449");
    }
    svg.finish()
}

/// Round-trippable float: the serialized 12-digit form parses back to the
/// value produced by this rounding.
pub fn round_sig12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        alpha: f64,
        beta: Vec<f64>,
        name: String,
    }

    #[test]
    fn json_is_deterministic_and_tagged() {
        let doc = Sample { alpha: 1.0 / 3.0, beta: vec![0.1, -0.0, 2e-17], name: "x".into() };
        let a = to_json("sample", &doc).unwrap();
        let b = to_json("sample", &doc).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema\": \"cb-lab/1\""));
        assert!(a.contains("3.33333333333e-1"));
        let (kind, payload) = from_json(&a).unwrap();
        assert_eq!(kind, "sample");
        assert_eq!(payload["name"], "x");
    }

    #[test]
    fn twelve_digit_floats_round_trip() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, -2.5e-13, 6.02214076e23] {
            let r = round_sig12(v);
            let s = format!("{r:.11e}");
            let parsed: f64 = s.parse().unwrap();
            assert_eq!(parsed, r);
            assert!(((r - v) / v).abs() < 1e-11);
        }
        assert_eq!(round_sig12(-0.0), 0.0);
    }

    #[test]
    fn serialized_floats_reparse_to_rounded_value() {
        let doc = Sample { alpha: std::f64::consts::E, beta: vec![], name: String::new() };
        let text = to_json("sample", &doc).unwrap();
        let (_, payload) = from_json(&text).unwrap();
        assert_eq!(payload["alpha"].as_f64().unwrap(), round_sig12(std::f64::consts::E));
    }
}
