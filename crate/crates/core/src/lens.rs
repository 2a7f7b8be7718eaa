//! Bi-convex lens assembled from two plano-convex cap arrays.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::CapGeometry;
use crate::paraxial::{thickness_for_na, BiconvexParams};
use crate::prescription::{LensPrescription, Material, SphericalSurface};
use crate::{HE_NE_WAVELENGTH_NM, PDMS_INDEX};

/// Target NA of the reference design.
pub const DESIGN_NA: f64 = 0.379;

/// Front and rear caps facing opposite directions, with vertex separation
/// `thickness_um`. Light enters through the front cap.
///
/// The traced beam fills the smaller of the two cap diameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensDesign {
    pub front: CapGeometry,
    pub rear: CapGeometry,
    pub thickness_um: f64,
    pub index: f64,
    pub wavelength_nm: f64,
}

impl LensDesign {
    /// The reference design: front 97.6 μm / R 79.7 μm, rear 60 μm /
    /// R 43.5 μm, thickness solved for NA 0.379 at n = 1.43.
    pub fn reference() -> Self {
        Self::with_index(PDMS_INDEX)
    }

    /// Reference design radii at another index, thickness re-solved for the
    /// target NA.
    pub fn with_index(index: f64) -> Self {
        let front = CapGeometry::from_diameter_radius(97.6, 79.7).expect("valid cap");
        let rear = CapGeometry::from_diameter_radius(60.0, 43.5).expect("valid cap");
        let mut lens = Self { front, rear, thickness_um: 0.0, index, wavelength_nm: HE_NE_WAVELENGTH_NM };
        lens.thickness_um = thickness_for_na(&lens.biconvex_params(), DESIGN_NA).expect("design NA reachable");
        lens
    }

    /// Mean reflowed resist geometry (h, D) measured on the fabricated front
    /// and rear arrays, with the reference design thickness.
    pub fn as_fabricated() -> Self {
        let front = CapGeometry::from_diameter_sag(96.20, 20.40).expect("valid cap");
        let rear = CapGeometry::from_diameter_sag(60.23, 13.40).expect("valid cap");
        Self { front, rear, ..Self::reference() }
    }

    /// Limiting (smaller) clear aperture.
    pub fn limiting_diameter_um(&self) -> f64 {
        self.front.diameter_um.min(self.rear.diameter_um)
    }

    pub fn biconvex_params(&self) -> BiconvexParams {
        BiconvexParams::new(
            self.limiting_diameter_um(),
            self.front.radius_um,
            -self.rear.radius_um,
            self.thickness_um,
            self.index,
        )
    }

    pub fn prescription(&self) -> LensPrescription {
        self.prescription_decentered([0.0, 0.0])
    }

    /// Prescription with the rear element shifted laterally by `rear_decenter_um`.
    pub fn prescription_decentered(&self, rear_decenter_um: [f64; 2]) -> LensPrescription {
        let mut rear = SphericalSurface::spherical(
            self.thickness_um,
            -self.rear.radius_um,
            self.rear.diameter_um / 2.0,
            Material::air(),
        );
        rear.decenter_um = rear_decenter_um;
        LensPrescription {
            surfaces: vec![
                SphericalSurface::spherical(
                    0.0,
                    self.front.radius_um,
                    self.front.diameter_um / 2.0,
                    Material::pdms(self.index),
                ),
                rear,
            ],
            ambient: Material::air(),
            wavelength_nm: self.wavelength_nm,
            entrance_beam_diameter_um: self.limiting_diameter_um(),
        }
    }
}

/// Plano-convex single lens with the same chord and single-cap NA as a
/// bi-convex lens: a cap of diameter `diameter_um` and radius
/// `D (n−1) / (2 NA)`, curved side facing the beam, flat back at the cap
/// height.
pub fn equal_na_single_lens(diameter_um: f64, na: f64, index: f64, wavelength_nm: f64) -> Result<LensPrescription> {
    let radius = diameter_um * (index - 1.0) / (2.0 * na);
    let cap = CapGeometry::from_diameter_radius(diameter_um, radius)?;
    let semi = diameter_um / 2.0;
    let p = LensPrescription {
        surfaces: vec![
            SphericalSurface::spherical(0.0, radius, semi, Material::pdms(index)),
            SphericalSurface::planar(cap.sag_um, semi, Material::air()),
        ],
        ambient: Material::air(),
        wavelength_nm,
        entrance_beam_diameter_um: diameter_um,
    };
    p.check()?;
    Ok(p)
}
