//! Segment metadata schema as a rule table, plus the cross-field checks a
//! table cannot express.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use mission_eval_core::model::{BBox, Timestamp};

use crate::xml::{parse_bool, parse_document, parse_finite, parse_timestamp, XNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    /// Non-empty, no whitespace.
    Id,
    Text,
    Int,
    Float,
    Bool,
    Timestamp,
    Enum(&'static [&'static str]),
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldType::Id => f.write_str("id"),
            FieldType::Text => f.write_str("text"),
            FieldType::Int => f.write_str("integer"),
            FieldType::Float => f.write_str("decimal"),
            FieldType::Bool => f.write_str("true|false"),
            FieldType::Timestamp => f.write_str("UTC timestamp (YYYY-MM-DDTHH:MM:SSZ)"),
            FieldType::Enum(values) => f.write_str(&values.join("|")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    /// Excludes `min` itself.
    pub min_open: bool,
}

impl Range {
    const fn closed(min: f64, max: f64) -> Self {
        Self { min, max, min_open: false }
    }

    const fn positive() -> Self {
        Self {
            min: 0.0,
            max: f64::INFINITY,
            min_open: true,
        }
    }

    const fn non_negative() -> Self {
        Self::closed(0.0, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo = if self.min_open { x > self.min } else { x >= self.min };
        lo && x <= self.max
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.min_open { '(' } else { '[' };
        let max = if self.max.is_infinite() {
            "inf)".to_owned()
        } else {
            format!("{}]", self.max)
        };
        write!(f, "{open}{}, {max}", self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rule {
    /// Slash-separated element path, `@attr` for an attribute.
    pub path: &'static str,
    pub ty: FieldType,
    pub range: Option<Range>,
    /// Required whenever the enclosing element is present.
    pub required: bool,
}

const fn rule(path: &'static str, ty: FieldType, range: Option<Range>) -> Rule {
    Rule { path, ty, range, required: true }
}

const GENDERS: &[&str] = &["female", "male"];
const ACTIVITIES: &[&str] = &["standing", "structured-walk", "random-walk", "phone-use"];
const CLOTHING: &[&str] = &["1", "2"];
const PLATFORMS: &[&str] = &["ground", "elevated", "uav"];
const SITES: &[&str] = &["indoor", "field"];
const CONFIGURATIONS: &[&str] = &["face-configured", "wholebody-configured"];
const SOURCES: &[&str] = &["auto", "manual"];
const OCCLUSIONS: &[&str] = &["none", "partial", "full"];

const PITCH: Range = Range::closed(-90.0, 90.0);
const PIXELS: Range = Range::closed(1.0, 100_000.0);

pub const SEGMENT_RULES: &[Rule] = &[
    rule("segment@id", FieldType::Id, None),
    rule("segment/subject_id", FieldType::Id, None),
    rule("segment/demographics/age_years", FieldType::Int, Some(Range::closed(0.0, 130.0))),
    rule("segment/demographics/gender", FieldType::Enum(GENDERS), None),
    rule("segment/demographics/height_cm", FieldType::Int, Some(Range::closed(50.0, 260.0))),
    rule("segment/activity", FieldType::Enum(ACTIVITIES), None),
    rule("segment/clothing_set", FieldType::Enum(CLOTHING), None),
    rule("segment/sensor@id", FieldType::Id, None),
    rule("segment/sensor/station_id", FieldType::Id, None),
    rule("segment/sensor/make", FieldType::Text, None),
    rule("segment/sensor/model", FieldType::Text, None),
    rule("segment/sensor/serial", FieldType::Text, None),
    rule("segment/sensor/resolution_px@width", FieldType::Int, Some(PIXELS)),
    rule("segment/sensor/resolution_px@height", FieldType::Int, Some(PIXELS)),
    rule("segment/sensor/focal_length_mm@min", FieldType::Float, Some(Range::positive())),
    rule("segment/sensor/focal_length_mm@max", FieldType::Float, Some(Range::positive())),
    rule("segment/sensor/platform", FieldType::Enum(PLATFORMS), None),
    rule("segment/sensor/site", FieldType::Enum(SITES), None),
    rule("segment/sensor/distance_m", FieldType::Float, Some(Range::non_negative())),
    rule("segment/sensor/pitch_deg", FieldType::Float, Some(PITCH)),
    rule("segment/sensor/configuration", FieldType::Enum(CONFIGURATIONS), None),
    rule("segment/geometry/distance_m", FieldType::Float, Some(Range::positive())),
    rule("segment/geometry/pitch_deg", FieldType::Float, Some(PITCH)),
    rule("segment/geometry/focal_mm", FieldType::Float, Some(Range::positive())),
    rule("segment/start_ts", FieldType::Timestamp, None),
    rule("segment/end_ts", FieldType::Timestamp, None),
    rule("segment/payload_ref", FieldType::Text, None),
    rule("segment/quarantined", FieldType::Bool, None),
    rule("segment/environment/sample_minute", FieldType::Timestamp, None),
    rule("segment/environment/temperature_c", FieldType::Float, Some(Range::closed(-90.0, 70.0))),
    rule("segment/environment/wind_chill_c", FieldType::Float, Some(Range::closed(-120.0, 70.0))),
    rule("segment/environment/heat_index_c", FieldType::Float, Some(Range::closed(-90.0, 100.0))),
    rule("segment/environment/relative_humidity_pct", FieldType::Float, Some(Range::closed(0.0, 100.0))),
    rule("segment/environment/wind_speed_mps", FieldType::Float, Some(Range::closed(0.0, 120.0))),
    rule("segment/environment/wind_direction_deg", FieldType::Float, Some(Range::closed(0.0, 360.0))),
    rule("segment/environment/pressure_hpa", FieldType::Float, Some(Range::closed(800.0, 1100.0))),
    rule("segment/environment/solar_loading_wpm2", FieldType::Float, Some(Range::closed(0.0, 2000.0))),
    rule("segment/environment/cn2", FieldType::Float, Some(Range::closed(0.0, 1e-10))),
    rule("segment/annotations@frame_count", FieldType::Int, Some(Range::closed(1.0, 1e9))),
    rule("segment/annotations/frame@index", FieldType::Int, Some(Range::non_negative())),
    rule("segment/annotations/frame@source", FieldType::Enum(SOURCES), None),
    rule("segment/annotations/frame@identity_confirmed", FieldType::Bool, None),
    rule("segment/annotations/frame@face_occlusion", FieldType::Enum(OCCLUSIONS), None),
    rule("segment/annotations/frame@body_occluded", FieldType::Bool, None),
    rule("segment/annotations/frame/body_bbox@x", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/body_bbox@y", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/body_bbox@w", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/body_bbox@h", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/head_bbox@x", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/head_bbox@y", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/head_bbox@w", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/head_bbox@h", FieldType::Float, Some(Range::non_negative())),
    rule("segment/annotations/frame/head_keypoints/point@x", FieldType::Float, None),
    rule("segment/annotations/frame/head_keypoints/point@y", FieldType::Float, None),
    rule("segment/annotations/frame/head_keypoints/point@z", FieldType::Float, None),
];

/// Elements that may be absent (or repeated zero times).
pub const OPTIONAL_ELEMENTS: &[&str] = &[
    "segment/annotations/frame",
    "segment/annotations/frame/body_bbox",
    "segment/annotations/frame/head_bbox",
    "segment/annotations/frame/head_keypoints",
    "segment/annotations/frame/head_keypoints/point",
];

const REPEATED: &[&str] = &["frame", "point"];

/// Head boxes must sit inside the body box grown by this fraction per side.
pub const HEAD_BODY_PAD: f64 = 0.1;

pub const CONSISTENCY_RULES: &[&str] = &[
    "end_ts is after start_ts",
    "environment/sample_minute equals start_ts truncated to the minute",
    "focal_length_mm min <= max and geometry/focal_mm lies within it",
    "frame indices are unique and below annotations@frame_count",
    "every bbox lies within the sensor resolution",
    "head_bbox lies within body_bbox padded by 10% per side",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    Missing,
    Type,
    Range,
    Consistency,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Concrete location, e.g. `segment/annotations/frame[3]/head_bbox@w`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Missing => "missing field",
            ViolationKind::Type => "type error",
            ViolationKind::Range => "range error",
            ViolationKind::Consistency => "inconsistent",
        };
        write!(f, "{kind} at {}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Validates a segment metadata document. Malformed XML is an `Err`;
/// everything else yields a (possibly empty) violation list.
pub fn validate_metadata(text: &str) -> Result<ValidationReport, roxmltree::Error> {
    let doc = parse_document(text)?;
    Ok(validate_node(doc.root_element()))
}

pub fn validate_node(root: XNode<'_, '_>) -> ValidationReport {
    let mut out = BTreeSet::new();
    if root.tag_name().name() != "segment" {
        out.insert(Violation {
            kind: ViolationKind::Missing,
            path: "segment".into(),
            message: format!("root element is <{}>", root.tag_name().name()),
        });
        return ValidationReport { violations: out.into_iter().collect() };
    }
    for r in SEGMENT_RULES {
        check_rule(root, r, &mut out);
    }
    consistency(root, &mut out);
    ValidationReport {
        violations: out.into_iter().collect(),
    }
}

fn check_rule(root: XNode<'_, '_>, rule: &Rule, out: &mut BTreeSet<Violation>) {
    let (elem_path, attr) = match rule.path.split_once('@') {
        Some((p, a)) => (p, Some(a)),
        None => (rule.path, None),
    };
    let steps: Vec<&str> = elem_path.split('/').collect();
    let mut current = vec![(root, steps[0].to_owned())];
    for (depth, step) in steps.iter().enumerate().skip(1) {
        let schema_path = steps[..=depth].join("/");
        let mut next = Vec::new();
        for (node, path) in &current {
            let matches: Vec<XNode<'_, '_>> = node
                .children()
                .filter(|c| c.is_element() && c.tag_name().name() == *step)
                .collect();
            if matches.is_empty() {
                if rule.required && !OPTIONAL_ELEMENTS.contains(&schema_path.as_str()) {
                    out.insert(Violation {
                        kind: ViolationKind::Missing,
                        path: format!("{path}/{step}"),
                        message: "required element absent".into(),
                    });
                }
                continue;
            }
            let indexed = REPEATED.contains(step);
            for (i, m) in matches.into_iter().enumerate() {
                let p = if indexed {
                    format!("{path}/{step}[{i}]")
                } else {
                    format!("{path}/{step}")
                };
                next.push((m, p));
            }
        }
        current = next;
    }
    for (node, path) in current {
        let (value, path) = match attr {
            Some(a) => match node.attribute(a) {
                Some(v) => (v, format!("{path}@{a}")),
                None => {
                    if rule.required {
                        out.insert(Violation {
                            kind: ViolationKind::Missing,
                            path: format!("{path}@{a}"),
                            message: "required attribute absent".into(),
                        });
                    }
                    continue;
                }
            },
            None => (node.text().unwrap_or("").trim(), path),
        };
        if let Some(v) = check_value(value, rule) {
            out.insert(Violation { path, ..v });
        }
    }
}

fn check_value(value: &str, rule: &Rule) -> Option<Violation> {
    let type_error = |expected: String| {
        Some(Violation {
            kind: ViolationKind::Type,
            path: String::new(),
            message: format!("expected {expected}, found {:?}", truncate(value)),
        })
    };
    let number = match rule.ty {
        FieldType::Id => {
            if value.is_empty() || value.chars().any(char::is_whitespace) {
                return type_error("an identifier".into());
            }
            None
        }
        FieldType::Text => None,
        FieldType::Int => match value.parse::<i64>() {
            Ok(n) => Some(n as f64),
            Err(_) => return type_error("an integer".into()),
        },
        FieldType::Float => match parse_finite(value) {
            Some(x) => Some(x),
            None => return type_error("a finite decimal".into()),
        },
        FieldType::Bool => {
            if parse_bool(value).is_none() {
                return type_error("true or false".into());
            }
            None
        }
        FieldType::Timestamp => {
            if parse_timestamp(value).is_none() {
                return type_error("a UTC timestamp".into());
            }
            None
        }
        FieldType::Enum(values) => {
            if !values.contains(&value) {
                return type_error(format!("one of {}", values.join("|")));
            }
            None
        }
    };
    match (number, rule.range) {
        (Some(x), Some(r)) if !r.contains(x) => Some(Violation {
            kind: ViolationKind::Range,
            path: String::new(),
            message: format!("{x} outside {r}"),
        }),
        _ => None,
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(40).collect()
}

fn elem<'a, 'i>(node: XNode<'a, 'i>, path: &str) -> Option<XNode<'a, 'i>> {
    let mut n = node;
    for step in path.split('/') {
        n = crate::xml::child(n, step)?;
    }
    Some(n)
}

fn text_num(node: XNode<'_, '_>, path: &str) -> Option<f64> {
    elem(node, path).and_then(|n| parse_finite(n.text()?.trim()))
}

fn text_ts(node: XNode<'_, '_>, path: &str) -> Option<Timestamp> {
    elem(node, path).and_then(|n| parse_timestamp(n.text()?.trim()))
}

fn attr_num(node: XNode<'_, '_>, attr: &str) -> Option<f64> {
    node.attribute(attr).and_then(parse_finite)
}

fn bbox(node: XNode<'_, '_>) -> Option<BBox> {
    Some(BBox {
        x: attr_num(node, "x")?,
        y: attr_num(node, "y")?,
        w: attr_num(node, "w")?,
        h: attr_num(node, "h")?,
    })
}

fn consistency(root: XNode<'_, '_>, out: &mut BTreeSet<Violation>) {
    let mut flag = |path: String, message: String| {
        out.insert(Violation {
            kind: ViolationKind::Consistency,
            path,
            message,
        });
    };
    let start = text_ts(root, "start_ts");
    if let (Some(s), Some(e)) = (start, text_ts(root, "end_ts")) {
        if e <= s {
            flag("segment/end_ts".into(), "end_ts must be after start_ts".into());
        }
    }
    if let (Some(s), Some(m)) = (start, text_ts(root, "environment/sample_minute")) {
        if s.truncate_to_minute() != m {
            flag(
                "segment/environment/sample_minute".into(),
                "sample_minute must equal start_ts truncated to the minute".into(),
            );
        }
    }
    let focal = elem(root, "sensor/focal_length_mm");
    let (fmin, fmax) = (
        focal.and_then(|f| attr_num(f, "min")),
        focal.and_then(|f| attr_num(f, "max")),
    );
    if let (Some(lo), Some(hi)) = (fmin, fmax) {
        if lo > hi {
            flag("segment/sensor/focal_length_mm".into(), "min exceeds max".into());
        } else if let Some(f) = text_num(root, "geometry/focal_mm") {
            if f < lo || f > hi {
                flag(
                    "segment/geometry/focal_mm".into(),
                    format!("{f} outside sensor focal range [{lo}, {hi}]"),
                );
            }
        }
    }
    let res = elem(root, "sensor/resolution_px");
    let width = res.and_then(|r| attr_num(r, "width"));
    let height = res.and_then(|r| attr_num(r, "height"));
    let Some(ann) = elem(root, "annotations") else {
        return;
    };
    let frame_count = attr_num(ann, "frame_count");
    let mut seen = BTreeSet::new();
    for (i, f) in crate::xml::children(ann, "frame").enumerate() {
        let path = format!("segment/annotations/frame[{i}]");
        if let Some(idx) = f.attribute("index").and_then(|s| s.parse::<u64>().ok()) {
            if !seen.insert(idx) {
                flag(format!("{path}@index"), format!("duplicate frame index {idx}"));
            }
            if let Some(n) = frame_count {
                if idx as f64 >= n {
                    flag(format!("{path}@index"), format!("frame {idx} beyond frame_count {n}"));
                }
            }
        }
        let body = crate::xml::child(f, "body_bbox").and_then(bbox);
        let head = crate::xml::child(f, "head_bbox").and_then(bbox);
        if let (Some(w), Some(h)) = (width, height) {
            let frame = BBox { x: 0.0, y: 0.0, w, h };
            for (name, b) in [("body_bbox", body), ("head_bbox", head)] {
                if let Some(b) = b {
                    if !frame.contains(&b) {
                        flag(format!("{path}/{name}"), format!("box exceeds sensor resolution {w}x{h}"));
                    }
                }
            }
        }
        if let (Some(b), Some(h)) = (body, head) {
            if !b.padded(HEAD_BODY_PAD).contains(&h) {
                flag(format!("{path}/head_bbox"), "head box outside padded body box".into());
            }
        }
    }
}

/// Human-readable schema reference.
pub fn schema_document() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Segment metadata schema");
    let _ = writeln!(s, "=======================");
    let _ = writeln!(s);
    let _ = writeln!(s, "One XML document per segment, `<segment_id>.xml` beside `<segment_id>.brf`.");
    let _ = writeln!(s, "Paths are slash-separated element names; `@name` is an attribute.");
    let _ = writeln!(s, "Required fields must appear whenever their enclosing element does.");
    let _ = writeln!(s);
    let rows: Vec<[String; 4]> = SEGMENT_RULES
        .iter()
        .map(|r| {
            [
                r.path.to_owned(),
                r.ty.to_string(),
                r.range.map_or_else(|| "-".to_owned(), |x| x.to_string()),
                if r.required { "yes" } else { "no" }.to_owned(),
            ]
        })
        .collect();
    let header = ["field", "type", "range", "required"];
    let widths: Vec<usize> = (0..4)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[&str]| -> String {
        let mut l = String::new();
        for (c, cell) in cells.iter().enumerate() {
            let _ = write!(l, "| {cell:<w$} ", w = widths[c]);
        }
        l.push('|');
        l
    };
    let _ = writeln!(s, "{}", line(&header));
    let sep: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(s, "{}", line(&sep.iter().map(String::as_str).collect::<Vec<_>>()));
    for r in &rows {
        let _ = writeln!(s, "{}", line(&r.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Optional elements: {}", OPTIONAL_ELEMENTS.join(", "));
    let _ = writeln!(s);
    let _ = writeln!(s, "Cross-field checks:");
    for c in CONSISTENCY_RULES {
        let _ = writeln!(s, "- {c}");
    }
    s
}
