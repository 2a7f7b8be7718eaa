//! CSV and SVG output for spot diagrams and fans.

use std::fmt::Write;

use crate::raytrace::{FanCurve, SpotDiagram, TracedBundle};

pub const SPOT_CSV_HEADER: &str = "ray_id,pupil_x,pupil_y,image_x_um,image_y_um,alive";
pub const FAN_CSV_HEADER: &str = "pupil,value,kind";

/// Every traced ray at plane `z_um`; dead rays have empty image columns.
pub fn spot_csv(bundle: &TracedBundle, z_um: f64) -> String {
    let mut out = String::from(SPOT_CSV_HEADER);
    out.push('\n');
    for (i, (ray, pt)) in bundle.rays.iter().zip(bundle.image_points(z_um)).enumerate() {
        let [px, py] = ray.pupil;
        match pt {
            Some([x, y]) => writeln!(out, "{i},{px},{py},{x},{y},true"),
            None => writeln!(out, "{i},{px},{py},,,false"),
        }
        .expect("write to string");
    }
    out
}

pub fn fan_csv(fan: &FanCurve) -> String {
    let mut out = String::from(FAN_CSV_HEADER);
    out.push('\n');
    for (p, v) in &fan.samples {
        writeln!(out, "{p},{v},{}", fan.kind.label()).expect("write to string");
    }
    out
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn svg_open(title: &str) -> String {
    let full = SIZE + 2.0 * MARGIN;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{full}\" height=\"{full}\" viewBox=\"0 0 {full} {full}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{x}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        x = full / 2.0
    )
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x_range: f64, y_range: f64) {
    let (x0, x1, y0, y1) = (MARGIN, MARGIN + SIZE, MARGIN, MARGIN + SIZE);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let _ = writeln!(out, "<rect x=\"{x0}\" y=\"{y0}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>");
    let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{cy}\" x2=\"{x1}\" y2=\"{cy}\" stroke=\"#bbb\"/>");
    let _ = writeln!(out, "<line x1=\"{cx}\" y1=\"{y0}\" x2=\"{cx}\" y2=\"{y1}\" stroke=\"#bbb\"/>");
    let _ = writeln!(out, "<text x=\"{cx}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>", y1 + 35.0);
    let _ = writeln!(
        out,
        "<text x=\"15\" y=\"{cy}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 {cy})\">{y_label}</text>"
    );
    let _ = writeln!(out, "<text x=\"{x0}\" y=\"{}\" font-size=\"10\">{:.4}</text>", y1 + 15.0, -x_range);
    let _ = writeln!(out, "<text x=\"{x1}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.4}</text>", y1 + 15.0, x_range);
    let _ = writeln!(out, "<text x=\"{}\" y=\"{y0}\" font-size=\"10\" text-anchor=\"end\">{:.4}</text>", x0 - 3.0, y_range);
    let _ = writeln!(out, "<text x=\"{}\" y=\"{y1}\" font-size=\"10\" text-anchor=\"end\">{:.4}</text>", x0 - 3.0, -y_range);
}

pub fn spot_svg(spot: &SpotDiagram) -> String {
    let mut out = svg_open(&format!(
        "Spot at z = {:.4} um (geo {:.4} um, rms {:.4} um)",
        spot.image_z_um, spot.geo_radius_um, spot.rms_radius_um
    ));
    let range = if spot.geo_radius_um > 0.0 { spot.geo_radius_um * 1.1 } else { 1.0 };
    axes(&mut out, "x - centroid (um)", "y - centroid (um)", range, range);
    let k = SIZE / (2.0 * range);
    for p in &spot.points {
        let x = MARGIN + SIZE / 2.0 + (p[0] - spot.centroid[0]) * k;
        let y = MARGIN + SIZE / 2.0 - (p[1] - spot.centroid[1]) * k;
        let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"1.5\" fill=\"navy\"/>");
    }
    out.push_str("</svg>\n");
    out
}

pub fn fan_svg(fan: &FanCurve) -> String {
    let unit = match fan.kind {
        crate::raytrace::FanKind::RayFan => "transverse aberration (um)",
        crate::raytrace::FanKind::OpdFan => "OPD (waves)",
    };
    let mut out = svg_open(&format!("{} (reference z = {:.4} um)", fan.kind.label(), fan.reference_z_um));
    let peak = fan.peak_abs();
    let range = if peak > 0.0 { peak * 1.1 } else { 1.0 };
    axes(&mut out, "normalized pupil", unit, 1.0, range);
    let points: Vec<String> = fan
        .samples
        .iter()
        .map(|(p, v)| {
            let x = MARGIN + SIZE / 2.0 + p * SIZE / 2.0;
            let y = MARGIN + SIZE / 2.0 - v / range * SIZE / 2.0;
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"darkred\" stroke-width=\"1.5\"/>", points.join(" "));
    out.push_str("</svg>\n");
    out
}
