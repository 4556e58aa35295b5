//! Generator configuration document. Every element is optional when read;
//! absent ones keep their default.

use mission_eval_core::model::Modality;
use mission_eval_core::synth::GeneratorConfig;

use crate::records::{read_sensor, sensor_element};
use crate::xml::{
    attr_f64, child, children, fmt_f64, fmt_timestamp, parse_as, parse_document, parse_enum,
    parse_f64, parse_timestamp, req_attr, root, text_of, Element, FormatError, ReadError, XNode,
};

fn range(name: &str, r: (impl ToString, impl ToString)) -> Element {
    Element::new(name).attr("min", r.0.to_string()).attr("max", r.1.to_string())
}

fn frange(name: &str, r: (f64, f64)) -> Element {
    Element::new(name).attr("min", fmt_f64(r.0)).attr("max", fmt_f64(r.1))
}

pub fn generator_document(c: &GeneratorConfig) -> String {
    Element::new("generator")
        .attr("seed", c.seed.to_string())
        .child(Element::text("n_subjects", c.n_subjects.to_string()))
        .child(Element::text("distractor_fraction", fmt_f64(c.distractor_fraction)))
        .child(Element::text("sigma0", fmt_f64(c.sigma0)))
        .child(
            Element::new("dims")
                .attr("face", c.dims[0].to_string())
                .attr("body", c.dims[1].to_string())
                .attr("gait", c.dims[2].to_string()),
        )
        .child(frange("cn2_range", c.cn2_range))
        .child(Element::text("head_size_m", fmt_f64(c.head_size_m)))
        .child(Element::text("frame_rate", c.frame_rate.to_string()))
        .child(range("duration_s", c.duration_s))
        .child(range("gap_s", c.gap_s))
        .child(Element::text("occlusion_rate", fmt_f64(c.occlusion_rate)))
        .child(Element::text("intruder_rate", fmt_f64(c.intruder_rate)))
        .child(Element::text("mislabel_rate", fmt_f64(c.mislabel_rate)))
        .child(Element::text("manual_frames", c.manual_frames.to_string()))
        .child(Element::text("start", fmt_timestamp(c.start)))
        .child(
            Element::new("uav")
                .child(frange("distance_m", c.uav.distance_m))
                .child(frange("pitch_deg", c.uav.pitch_deg)),
        )
        .child(
            Element::new("quality").attr("floor", fmt_f64(c.quality.floor)).children(
                Modality::ALL.iter().map(|m| {
                    Element::new("modality")
                        .attr("name", m.as_str())
                        .attr("reference_px", fmt_f64(c.quality.reference_px[m.index()]))
                        .attr("kappa", fmt_f64(c.quality.kappa[m.index()]))
                }),
            ),
        )
        .child(Element::new("sensor_suite").children(c.sensor_suite.iter().map(sensor_element)))
        .child(Element::new("gallery_rig").children(c.gallery_rig.iter().map(sensor_element)))
        .to_document()
}

fn opt_text<T: std::str::FromStr>(node: XNode<'_, '_>, name: &str, slot: &mut T) -> Result<(), FormatError> {
    if let Some(c) = child(node, name) {
        *slot = parse_as(text_of(c), name)?;
    }
    Ok(())
}

fn opt_f64(node: XNode<'_, '_>, name: &str, slot: &mut f64) -> Result<(), FormatError> {
    if let Some(c) = child(node, name) {
        *slot = parse_f64(text_of(c), name)?;
    }
    Ok(())
}

fn opt_range<T: std::str::FromStr>(node: XNode<'_, '_>, name: &str, slot: &mut (T, T)) -> Result<(), FormatError> {
    if let Some(c) = child(node, name) {
        *slot = (parse_as(req_attr(c, "min")?, name)?, parse_as(req_attr(c, "max")?, name)?);
    }
    Ok(())
}

fn opt_frange(node: XNode<'_, '_>, name: &str, slot: &mut (f64, f64)) -> Result<(), FormatError> {
    if let Some(c) = child(node, name) {
        *slot = (attr_f64(c, "min")?, attr_f64(c, "max")?);
    }
    Ok(())
}

pub fn read_generator(text: &str) -> Result<GeneratorConfig, ReadError> {
    let doc = parse_document(text)?;
    let r = root(&doc, "generator")?;
    let mut c = GeneratorConfig::default();
    if let Some(s) = r.attribute("seed") {
        c.seed = parse_as(s, "seed")?;
    }
    opt_text(r, "n_subjects", &mut c.n_subjects)?;
    opt_f64(r, "distractor_fraction", &mut c.distractor_fraction)?;
    opt_f64(r, "sigma0", &mut c.sigma0)?;
    if let Some(d) = child(r, "dims") {
        for (i, m) in Modality::ALL.iter().enumerate() {
            c.dims[i] = parse_as(req_attr(d, m.as_str())?, "dims")?;
        }
    }
    opt_frange(r, "cn2_range", &mut c.cn2_range)?;
    opt_f64(r, "head_size_m", &mut c.head_size_m)?;
    opt_text(r, "frame_rate", &mut c.frame_rate)?;
    opt_range(r, "duration_s", &mut c.duration_s)?;
    opt_range(r, "gap_s", &mut c.gap_s)?;
    opt_f64(r, "occlusion_rate", &mut c.occlusion_rate)?;
    opt_f64(r, "intruder_rate", &mut c.intruder_rate)?;
    opt_f64(r, "mislabel_rate", &mut c.mislabel_rate)?;
    opt_text(r, "manual_frames", &mut c.manual_frames)?;
    if let Some(s) = child(r, "start") {
        c.start = parse_timestamp(text_of(s)).ok_or_else(|| FormatError::new("start", "bad timestamp"))?;
    }
    if let Some(u) = child(r, "uav") {
        opt_frange(u, "distance_m", &mut c.uav.distance_m)?;
        opt_frange(u, "pitch_deg", &mut c.uav.pitch_deg)?;
    }
    if let Some(q) = child(r, "quality") {
        if q.attribute("floor").is_some() {
            c.quality.floor = attr_f64(q, "floor")?;
        }
        for m in children(q, "modality") {
            let i = parse_enum(req_attr(m, "name")?, "modality", Modality::parse)?.index();
            c.quality.reference_px[i] = attr_f64(m, "reference_px")?;
            c.quality.kappa[i] = attr_f64(m, "kappa")?;
        }
    }
    if let Some(s) = child(r, "sensor_suite") {
        c.sensor_suite = children(s, "sensor").map(read_sensor).collect::<Result<_, _>>()?;
    }
    if let Some(s) = child(r, "gallery_rig") {
        c.gallery_rig = children(s, "sensor").map(read_sensor).collect::<Result<_, _>>()?;
    }
    c.validate()
        .map_err(|e| FormatError::new("generator", e.to_string()))?;
    Ok(c)
}
