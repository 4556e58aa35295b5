//! Constraint profiles: which metadata a matcher may see and how media are
//! reformatted before streaming.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use mission_eval_core::model::MediaSegment;
use mission_eval_core::payload::Payload;

use crate::records::ENVIRONMENT_FIELDS;
use crate::xml::{
    children, fmt_f64, fmt_timestamp, parse_document, parse_enum, req_attr, req_child, req_text,
    root, text_of, Element, FormatError, ReadError,
};

/// Never exposable, whatever the allowlist says.
pub const IDENTITY_FIELDS: &[&str] = &["subject_id"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MediaReformat {
    None,
    DownsampleFrames,
    StripAnnotations,
}

impl MediaReformat {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaReformat::None => "none",
            MediaReformat::DownsampleFrames => "downsample-frames",
            MediaReformat::StripAnnotations => "strip-annotations",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(MediaReformat::None),
            "downsample-frames" => Some(MediaReformat::DownsampleFrames),
            "strip-annotations" => Some(MediaReformat::StripAnnotations),
            _ => None,
        }
    }

    pub fn apply(self, p: &Payload) -> Payload {
        match self {
            MediaReformat::None => p.clone(),
            MediaReformat::DownsampleFrames => p.downsampled(),
            MediaReformat::StripAnnotations => p.without_annotations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintProfile {
    pub scenario_name: String,
    pub metadata_fields_exposed: BTreeSet<String>,
    pub media_reformat: MediaReformat,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("identity field {0} may not be exposed")]
    IdentityExposed(String),
    #[error("unknown metadata field {0}")]
    UnknownField(String),
}

impl Default for ConstraintProfile {
    fn default() -> Self {
        Self {
            scenario_name: "default".into(),
            metadata_fields_exposed: ["activity", "sensor_id", "platform", "configuration", "distance_m", "pitch_deg"]
                .into_iter()
                .map(String::from)
                .collect(),
            media_reformat: MediaReformat::None,
        }
    }
}

/// Every field name a profile can refer to.
pub fn known_fields() -> Vec<&'static str> {
    let mut f = vec![
        "segment_id", "subject_id", "age_years", "gender", "height_cm", "activity", "clothing_set",
        "sensor_id", "station_id", "make", "model", "serial", "resolution_px", "platform", "site",
        "configuration", "distance_m", "pitch_deg", "focal_mm", "start_ts", "end_ts", "frame_count",
        "sample_minute", "cn2",
    ];
    f.extend_from_slice(&ENVIRONMENT_FIELDS);
    f
}

/// Flat name/value view of a segment's metadata.
pub fn segment_fields(s: &MediaSegment) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("segment_id", s.segment_id.clone());
    m.insert("subject_id", s.subject_id.clone());
    m.insert("age_years", s.demographics.age_years.to_string());
    m.insert("gender", s.demographics.gender.as_str().into());
    m.insert("height_cm", s.demographics.height_cm.to_string());
    m.insert("activity", s.activity.as_str().into());
    m.insert("clothing_set", s.clothing_set.number().to_string());
    m.insert("sensor_id", s.sensor.sensor_id.clone());
    m.insert("station_id", s.sensor.station_id.clone());
    m.insert("make", s.sensor.make.clone());
    m.insert("model", s.sensor.model.clone());
    m.insert("serial", s.sensor.serial.clone());
    m.insert("resolution_px", format!("{}x{}", s.sensor.resolution_px.0, s.sensor.resolution_px.1));
    m.insert("platform", s.sensor.platform.as_str().into());
    m.insert("site", s.sensor.site.as_str().into());
    m.insert("configuration", s.sensor.configuration.as_str().into());
    m.insert("distance_m", fmt_f64(s.geometry.distance_m));
    m.insert("pitch_deg", fmt_f64(s.geometry.pitch_deg));
    m.insert("focal_mm", fmt_f64(s.geometry.focal_mm));
    m.insert("start_ts", fmt_timestamp(s.start_ts));
    m.insert("end_ts", fmt_timestamp(s.end_ts));
    m.insert("frame_count", s.annotations.frame_count.to_string());
    if let Some(e) = &s.environment {
        m.insert("sample_minute", fmt_timestamp(e.sample_minute));
        m.insert("cn2", fmt_f64(e.cn2));
        let values = [
            e.temperature_c,
            e.wind_chill_c,
            e.heat_index_c,
            e.relative_humidity_pct,
            e.wind_speed_mps,
            e.wind_direction_deg,
            e.pressure_hpa,
            e.solar_loading_wpm2,
        ];
        for (k, v) in ENVIRONMENT_FIELDS.iter().zip(values) {
            m.insert(k, fmt_f64(v));
        }
    }
    m
}

impl ConstraintProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let known = known_fields();
        for f in &self.metadata_fields_exposed {
            if IDENTITY_FIELDS.contains(&f.as_str()) {
                return Err(ProfileError::IdentityExposed(f.clone()));
            }
            if !known.contains(&f.as_str()) {
                return Err(ProfileError::UnknownField(f.clone()));
            }
        }
        Ok(())
    }

    pub fn exposes(&self, field: &str) -> bool {
        !IDENTITY_FIELDS.contains(&field) && self.metadata_fields_exposed.contains(field)
    }

    /// Metadata document streamed with an entry: allowlisted fields of each
    /// media item, in media order.
    pub fn metadata_xml(&self, entry_id: &str, media: &[&MediaSegment]) -> String {
        Element::new("metadata")
            .attr("entry", entry_id)
            .children(media.iter().enumerate().map(|(i, s)| {
                Element::new("media").attr("index", i.to_string()).children(
                    segment_fields(s)
                        .into_iter()
                        .filter(|(k, _)| self.exposes(k))
                        .map(|(k, v)| Element::text("field", v).attr("name", k)),
                )
            }))
            .to_document()
    }

    pub fn to_xml(&self) -> String {
        Element::new("profile")
            .attr("scenario", &self.scenario_name)
            .child(Element::text("media_reformat", self.media_reformat.as_str()))
            .child(
                Element::new("metadata_fields_exposed")
                    .children(self.metadata_fields_exposed.iter().map(|f| Element::text("field", f))),
            )
            .to_document()
    }

    pub fn from_xml(text: &str) -> Result<Self, ReadError> {
        let doc = parse_document(text)?;
        let r = root(&doc, "profile")?;
        let p = ConstraintProfile {
            scenario_name: req_attr(r, "scenario")?.to_owned(),
            media_reformat: parse_enum(req_text(r, "media_reformat")?, "media_reformat", MediaReformat::parse)?,
            metadata_fields_exposed: children(req_child(r, "metadata_fields_exposed")?, "field")
                .map(|f| text_of(f).to_owned())
                .collect(),
        };
        p.validate()
            .map_err(|e| FormatError::new("profile", e.to_string()))?;
        Ok(p)
    }
}

impl fmt::Display for ConstraintProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (media {}, {} metadata fields)",
            self.scenario_name,
            self.media_reformat.as_str(),
            self.metadata_fields_exposed.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let p = ConstraintProfile::default();
        p.validate().unwrap();
        assert_eq!(ConstraintProfile::from_xml(&p.to_xml()).unwrap(), p);
    }

    #[test]
    fn identity_never_allowlisted() {
        let mut p = ConstraintProfile::default();
        p.metadata_fields_exposed.insert("subject_id".into());
        assert_eq!(p.validate(), Err(ProfileError::IdentityExposed("subject_id".into())));
        assert!(!p.exposes("subject_id"));
        assert!(ConstraintProfile::from_xml(&p.to_xml()).is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let mut p = ConstraintProfile::default();
        p.metadata_fields_exposed.insert("favourite_colour".into());
        assert!(matches!(p.validate(), Err(ProfileError::UnknownField(_))));
    }

    #[test]
    fn every_field_name_is_known() {
        let known = known_fields();
        for k in ENVIRONMENT_FIELDS {
            assert!(known.contains(&k));
        }
    }
}
