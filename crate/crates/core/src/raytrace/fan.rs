//! Meridional ray and OPD fans, longitudinal/transverse spherical aberration
//! and ray-traced NA.

use serde::Serialize;

use super::bundle::{entrance_ray, find_best_focus, find_paraxial_focus, PupilGrid};
use super::{trace, Ray, Vec3};
use crate::error::{OpticsError, Result};
use crate::prescription::LensPrescription;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FanKind {
    /// Transverse ray aberration, μm.
    RayFan,
    /// Optical path difference, waves.
    OpdFan,
}

impl FanKind {
    pub fn label(&self) -> &'static str {
        match self {
            FanKind::RayFan => "ray-fan",
            FanKind::OpdFan => "opd-fan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanCurve {
    /// `(pupil, value)` with strictly increasing pupil coordinate.
    pub samples: Vec<(f64, f64)>,
    pub kind: FanKind,
    /// Plane (ray fan) or reference-sphere center z (OPD fan).
    pub reference_z_um: f64,
}

impl FanCurve {
    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max)
    }

    /// Peak-to-valley of the values.
    pub fn peak_to_valley(&self) -> f64 {
        let max = self.samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let min = self.samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        max - min
    }
}

fn fan_pupils(n_samples: usize) -> Result<Vec<f64>> {
    if n_samples < 3 || n_samples.is_multiple_of(2) {
        return Err(OpticsError::Domain(format!("fan needs an odd sample count >= 3, got {n_samples}")));
    }
    let half = (n_samples / 2) as f64;
    Ok((0..n_samples).map(|i| (i as f64 - half) / half).collect())
}

fn exit_ray(p: &LensPrescription, pupil_y: f64) -> Option<Ray> {
    let path = trace(p, entrance_ray(p, [0.0, pupil_y]));
    if path.alive() {
        path.last().copied()
    } else {
        None
    }
}

/// Ray fan referenced to the best-focus plane.
pub fn ray_fan(p: &LensPrescription, n_samples: usize) -> Result<FanCurve> {
    let z = find_best_focus(p, PupilGrid::default(), None)?;
    ray_fan_at(p, n_samples, z)
}

/// Meridional transverse aberration `y(p) − y(0)` at plane `z_um`.
pub fn ray_fan_at(p: &LensPrescription, n_samples: usize, z_um: f64) -> Result<FanCurve> {
    let pupils = fan_pupils(n_samples)?;
    let chief = exit_ray(p, 0.0).and_then(|r| r.point_at_z(z_um)).ok_or(OpticsError::AllRaysDead)?;
    let samples = pupils
        .into_iter()
        .filter_map(|q| {
            let hit = exit_ray(p, q)?.point_at_z(z_um)?;
            Some((q, hit.y - chief.y))
        })
        .collect();
    Ok(FanCurve { samples, kind: FanKind::RayFan, reference_z_um: z_um })
}

/// Axial position of the exit pupil: the image of the first surface (the
/// stop) formed by the following surfaces.
pub fn exit_pupil_z(p: &LensPrescription) -> f64 {
    let Some(first) = p.surfaces.first() else {
        return 0.0;
    };
    if p.surfaces.len() == 1 {
        return first.vertex_z_um;
    }
    let u: f64 = 1e-4;
    let dir = Vec3::new(0.0, u.sin(), u.cos());
    let back = first.semi_aperture_um + 1.0;
    let origin = Vec3::new(first.decenter_um[0], first.decenter_um[1], first.vertex_z_um) - dir * back;
    let path = trace(p, Ray::new(origin, dir));
    let fallback = p.surfaces.last().map_or(0.0, |s| s.vertex_z_um);
    match path.last() {
        Some(r) if path.alive() => r.axis_crossing_z().filter(|z| z.is_finite()).unwrap_or(fallback),
        _ => fallback,
    }
}

/// OPD fan referenced to a sphere about the best-focus image point.
pub fn opd_fan(p: &LensPrescription, n_samples: usize) -> Result<FanCurve> {
    let z = find_best_focus(p, PupilGrid::default(), None)?;
    opd_fan_at(p, n_samples, z)
}

/// OPD in waves, `(OPL(p) − OPL(0)) / λ`, with every ray continued to the
/// reference sphere centered on the chief ray's point at `z_um` and passing
/// through the exit pupil center.
pub fn opd_fan_at(p: &LensPrescription, n_samples: usize, z_um: f64) -> Result<FanCurve> {
    let pupils = fan_pupils(n_samples)?;
    let chief = exit_ray(p, 0.0).ok_or(OpticsError::AllRaysDead)?;
    let center = chief.point_at_z(z_um).ok_or(OpticsError::AllRaysDead)?;
    let mut radius = z_um - exit_pupil_z(p);
    if radius.abs() < 1e-6 {
        radius = z_um - p.surfaces.last().map_or(0.0, |s| s.vertex_z_um);
    }
    let n_image = p.image_index();
    let lambda = p.wavelength_um();
    let opl_to_sphere = |r: &Ray| -> Option<f64> {
        let w = r.position - center;
        let wd = w.dot(&r.direction);
        let disc = wd * wd - w.dot(&w) + radius * radius;
        if disc < 0.0 {
            return None;
        }
        // upstream intersection, on the pupil side of the image point
        let s = -wd - disc.sqrt();
        Some(r.opl_um + n_image * s)
    };
    let chief_opl = opl_to_sphere(&chief).ok_or(OpticsError::AllRaysDead)?;
    let samples = pupils
        .into_iter()
        .filter_map(|q| {
            let opl = opl_to_sphere(&exit_ray(p, q)?)?;
            Some((q, (opl - chief_opl) / lambda))
        })
        .collect();
    Ok(FanCurve { samples, kind: FanKind::OpdFan, reference_z_um: z_um })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalAberration {
    pub height_um: f64,
    /// Axis crossing of the ray minus paraxial focus; negative when the ray
    /// focuses short.
    pub longitudinal_um: f64,
    /// |y| of the ray at the paraxial focal plane.
    pub transverse_um: f64,
    /// Image-space slope `tan U′` of the ray.
    pub slope: f64,
    pub paraxial_focus_z_um: f64,
}

/// LA′ and TA′ of the meridional ray entering at height `s_um`.
pub fn spherical_aberration(p: &LensPrescription, s_um: f64) -> Result<SphericalAberration> {
    let semi = p.entrance_beam_diameter_um / 2.0;
    if !(s_um > 0.0) || s_um > semi * (1.0 + 1e-12) {
        return Err(OpticsError::Domain(format!("ray height {s_um} outside (0, {semi}]")));
    }
    let z_p = find_paraxial_focus(p)?;
    let ray = exit_ray(p, s_um / semi).ok_or(OpticsError::AllRaysDead)?;
    let crossing = ray.axis_crossing_z().ok_or(OpticsError::NoAxisCrossing { min_z: f64::NEG_INFINITY, max_z: f64::INFINITY })?;
    let at_focus = ray.point_at_z(z_p).ok_or(OpticsError::AllRaysDead)?;
    Ok(SphericalAberration {
        height_um: s_um,
        longitudinal_um: crossing - z_p,
        transverse_um: at_focus.y.abs(),
        slope: ray.direction.y / ray.direction.z,
        paraxial_focus_z_um: z_p,
    })
}

/// Image-space `n′ sin U′` of the meridional ray entering at `height_um`.
pub fn marginal_ray_na(p: &LensPrescription, height_um: f64) -> Result<f64> {
    let semi = p.entrance_beam_diameter_um / 2.0;
    let ray = exit_ray(p, height_um / semi).ok_or(OpticsError::AllRaysDead)?;
    Ok(p.image_index() * ray.direction.y.abs())
}

/// Traced NA extrapolated linearly from a beam shrunk by `shrink`.
pub fn paraxial_na_from_trace(p: &LensPrescription, shrink: f64) -> Result<f64> {
    let semi = p.entrance_beam_diameter_um / 2.0;
    Ok(marginal_ray_na(p, semi / shrink)? * shrink)
}
