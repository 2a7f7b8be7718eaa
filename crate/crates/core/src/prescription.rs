//! Sequential lens prescriptions and their JSON file format.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{OpticsError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub refractive_index: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, refractive_index: f64) -> Self {
        Self { name: name.into(), refractive_index }
    }

    pub fn air() -> Self {
        Self::new("air", 1.0)
    }

    pub fn pdms(refractive_index: f64) -> Self {
        Self::new("PDMS", refractive_index)
    }

    /// Material known only by its index, as read from a prescription file.
    pub fn with_index(refractive_index: f64) -> Self {
        if refractive_index == 1.0 {
            Self::air()
        } else {
            Self::new(format!("n={refractive_index}"), refractive_index)
        }
    }
}

/// One refracting surface of a sequential system.
///
/// `radius_um` is signed: positive when the center of curvature lies
/// downstream (+z) of the vertex. `None` marks a planar surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalSurface {
    pub vertex_z_um: f64,
    pub radius_um: Option<f64>,
    pub semi_aperture_um: f64,
    pub medium_after: Material,
    /// Lateral (x, y) offset of the surface axis from the system axis.
    pub decenter_um: [f64; 2],
}

impl SphericalSurface {
    pub fn spherical(vertex_z_um: f64, radius_um: f64, semi_aperture_um: f64, medium_after: Material) -> Self {
        Self { vertex_z_um, radius_um: Some(radius_um), semi_aperture_um, medium_after, decenter_um: [0.0, 0.0] }
    }

    pub fn planar(vertex_z_um: f64, semi_aperture_um: f64, medium_after: Material) -> Self {
        Self { vertex_z_um, radius_um: None, semi_aperture_um, medium_after, decenter_um: [0.0, 0.0] }
    }

    pub fn is_planar(&self) -> bool {
        self.radius_um.is_none()
    }

    /// Signed curvature `1/R`, zero for planar surfaces.
    pub fn curvature(&self) -> f64 {
        self.radius_um.map_or(0.0, |r| 1.0 / r)
    }

    /// Axial sag of the surface at radial distance `r` from its own axis.
    pub fn sag_at(&self, r: f64) -> f64 {
        let c = self.curvature();
        let cr2 = c * r * r;
        let root = 1.0 - c * cr2;
        if root < 0.0 {
            return f64::NAN;
        }
        cr2 / (1.0 + root.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensPrescription {
    pub surfaces: Vec<SphericalSurface>,
    pub ambient: Material,
    pub wavelength_nm: f64,
    pub entrance_beam_diameter_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NoSurfaces,
    Ordering,
    Aperture,
    NonPositiveAperture,
    Index,
    BeamDiameter,
    Wavelength,
    SurfaceCrossing,
    NonFinite,
}

/// A broken prescription invariant. `surface` is the offending surface index
/// when the rule is local to one surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub surface: Option<usize>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.surface {
            Some(i) => write!(f, "surface {i}: {:?}: {}", self.rule, self.message),
            None => write!(f, "{:?}: {}", self.rule, self.message),
        }
    }
}

impl LensPrescription {
    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_nm * 1e-3
    }

    /// Index of the medium after surface `i`, or the ambient index before
    /// the first surface when `i` is `None`.
    pub fn index_after(&self, i: Option<usize>) -> f64 {
        match i {
            None => self.ambient.refractive_index,
            Some(i) => self.surfaces[i].medium_after.refractive_index,
        }
    }

    /// Index of the image space.
    pub fn image_index(&self) -> f64 {
        self.surfaces
            .last()
            .map_or(self.ambient.refractive_index, |s| s.medium_after.refractive_index)
    }

    pub fn min_semi_aperture(&self) -> f64 {
        self.surfaces.iter().map(|s| s.semi_aperture_um).fold(f64::INFINITY, f64::min)
    }

    /// Every invariant violation; an empty list means the prescription is
    /// traceable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |surface, rule, message: String| out.push(Violation { surface, rule, message });

        if self.surfaces.is_empty() {
            push(None, Rule::NoSurfaces, "prescription has no surfaces".into());
        }
        if !(self.wavelength_nm > 0.0) || !self.wavelength_nm.is_finite() {
            push(None, Rule::Wavelength, format!("wavelength {} nm must be positive", self.wavelength_nm));
        }
        if !(self.ambient.refractive_index >= 1.0) {
            push(None, Rule::Index, format!("ambient index {} < 1", self.ambient.refractive_index));
        }
        for (i, s) in self.surfaces.iter().enumerate() {
            let finite = s.vertex_z_um.is_finite()
                && s.semi_aperture_um.is_finite()
                && s.radius_um.is_none_or(|r| r.is_finite() && r != 0.0)
                && s.decenter_um.iter().all(|d| d.is_finite());
            if !finite {
                push(Some(i), Rule::NonFinite, "non-finite or zero-radius geometry".into());
                continue;
            }
            if !(s.semi_aperture_um > 0.0) {
                push(Some(i), Rule::NonPositiveAperture, format!("semi-aperture {} must be positive", s.semi_aperture_um));
            }
            if let Some(r) = s.radius_um {
                if s.semi_aperture_um > r.abs() {
                    push(
                        Some(i),
                        Rule::Aperture,
                        format!("semi-aperture {} exceeds |radius| {}", s.semi_aperture_um, r.abs()),
                    );
                }
            }
            if !(s.medium_after.refractive_index >= 1.0) {
                push(Some(i), Rule::Index, format!("index {} < 1", s.medium_after.refractive_index));
            }
            if i > 0 {
                let prev = &self.surfaces[i - 1];
                if !(s.vertex_z_um > prev.vertex_z_um) {
                    push(
                        Some(i),
                        Rule::Ordering,
                        format!("vertex z {} not after previous vertex z {}", s.vertex_z_um, prev.vertex_z_um),
                    );
                } else {
                    // Surfaces must not cross inside their common clear aperture.
                    let r = s.semi_aperture_um.min(prev.semi_aperture_um);
                    let z_prev = prev.vertex_z_um + prev.sag_at(r);
                    let z_this = s.vertex_z_um + s.sag_at(r);
                    // touching rims (zero edge thickness) are allowed
                    if z_this.is_finite() && z_prev.is_finite() && z_this < z_prev - 1e-9 * (1.0 + r) {
                        push(
                            Some(i),
                            Rule::SurfaceCrossing,
                            format!("crosses surface {} at radial height {r}", i - 1),
                        );
                    }
                }
            }
        }
        if !self.surfaces.is_empty() {
            let limit = 2.0 * self.min_semi_aperture();
            if !(self.entrance_beam_diameter_um > 0.0) || self.entrance_beam_diameter_um > limit * (1.0 + 1e-12) {
                push(
                    None,
                    Rule::BeamDiameter,
                    format!(
                        "entrance beam diameter {} must be positive and at most {limit}",
                        self.entrance_beam_diameter_um
                    ),
                );
            }
        }
        out
    }

    /// Ok when [`validate`](Self::validate) finds nothing, otherwise an
    /// error listing every violation.
    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(OpticsError::InvalidPrescription(msg))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PrescriptionFile = serde_json::from_str(s)?;
        Ok(file.into())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&PrescriptionFile::from(self)).expect("prescription serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| OpticsError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// On-disk layout of a prescription.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescriptionFile {
    pub wavelength_nm: f64,
    pub entrance_beam_diameter_um: f64,
    pub ambient_index: f64,
    pub surfaces: Vec<SurfaceRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceRecord {
    pub vertex_z_um: f64,
    /// `null` for a planar surface.
    pub radius_um: Option<f64>,
    pub semi_aperture_um: f64,
    pub index_after: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub decenter_x_um: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub decenter_y_um: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl From<PrescriptionFile> for LensPrescription {
    fn from(f: PrescriptionFile) -> Self {
        Self {
            surfaces: f
                .surfaces
                .into_iter()
                .map(|s| SphericalSurface {
                    vertex_z_um: s.vertex_z_um,
                    radius_um: s.radius_um,
                    semi_aperture_um: s.semi_aperture_um,
                    medium_after: Material::with_index(s.index_after),
                    decenter_um: [s.decenter_x_um, s.decenter_y_um],
                })
                .collect(),
            ambient: Material::with_index(f.ambient_index),
            wavelength_nm: f.wavelength_nm,
            entrance_beam_diameter_um: f.entrance_beam_diameter_um,
        }
    }
}

impl From<&LensPrescription> for PrescriptionFile {
    fn from(p: &LensPrescription) -> Self {
        Self {
            wavelength_nm: p.wavelength_nm,
            entrance_beam_diameter_um: p.entrance_beam_diameter_um,
            ambient_index: p.ambient.refractive_index,
            surfaces: p
                .surfaces
                .iter()
                .map(|s| SurfaceRecord {
                    vertex_z_um: s.vertex_z_um,
                    radius_um: s.radius_um,
                    semi_aperture_um: s.semi_aperture_um,
                    index_after: s.medium_after.refractive_index,
                    decenter_x_um: s.decenter_um[0],
                    decenter_y_um: s.decenter_um[1],
                })
                .collect(),
        }
    }
}
