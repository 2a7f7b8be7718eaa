//! Spherical cap relations linking a chord diameter `D`, sag `h` and
//! curvature radius `R`.

use serde::{Deserialize, Serialize};

use crate::error::{OpticsError, Result};

/// A spherical cap described by its full chord, height and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapGeometry {
    pub diameter_um: f64,
    pub sag_um: f64,
    /// Curvature radius magnitude. Infinite for a flat (zero-sag) film.
    pub radius_um: f64,
}

impl CapGeometry {
    pub fn from_diameter_sag(diameter_um: f64, sag_um: f64) -> Result<Self> {
        let radius_um = cap_radius(diameter_um, sag_um)?;
        if sag_um > radius_um * (1.0 + 1e-12) {
            return Err(OpticsError::Domain(format!(
                "sag {sag_um} exceeds radius {radius_um}: more than a hemisphere"
            )));
        }
        Ok(Self { diameter_um, sag_um, radius_um })
    }

    pub fn from_diameter_radius(diameter_um: f64, radius_um: f64) -> Result<Self> {
        let sag_um = cap_sag(diameter_um, radius_um)?;
        if diameter_um <= 0.0 {
            return Err(OpticsError::Domain("cap diameter must be positive".into()));
        }
        Ok(Self { diameter_um, sag_um, radius_um })
    }

    /// A zero-height film of the given footprint.
    pub fn flat(diameter_um: f64) -> Self {
        Self { diameter_um, sag_um: 0.0, radius_um: f64::INFINITY }
    }

    pub fn is_flat(&self) -> bool {
        self.sag_um == 0.0
    }

    /// Sag-to-diameter ratio `h / D`.
    pub fn sag_ratio(&self) -> f64 {
        self.sag_um / self.diameter_um
    }

    /// Volume of the cap, `(π h / 6)(3 D²/4 + h²)`.
    pub fn volume_um3(&self) -> f64 {
        let h = self.sag_um;
        let a2 = self.diameter_um * self.diameter_um / 4.0;
        std::f64::consts::PI * h / 6.0 * (3.0 * a2 + h * h)
    }

    /// Relative mismatch of `R = (D² + 4h²) / 8h`; zero for a consistent cap.
    pub fn consistency_error(&self) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let d = self.diameter_um;
        let h = self.sag_um;
        let r = (d * d + 4.0 * h * h) / (8.0 * h);
        ((r - self.radius_um) / self.radius_um).abs()
    }
}

/// Cap height for a chord `diameter_um` on a sphere of radius `radius_um`:
/// `h = R − sqrt(R² − D²/4)`.
pub fn cap_sag(diameter_um: f64, radius_um: f64) -> Result<f64> {
    if !(radius_um > 0.0) || !radius_um.is_finite() {
        return Err(OpticsError::Domain(format!("radius must be positive, got {radius_um}")));
    }
    if !(diameter_um >= 0.0) {
        return Err(OpticsError::Domain(format!("diameter must be non-negative, got {diameter_um}")));
    }
    if diameter_um > 2.0 * radius_um {
        return Err(OpticsError::Domain(format!(
            "chord {diameter_um} exceeds sphere diameter {}",
            2.0 * radius_um
        )));
    }
    let a = diameter_um / 2.0;
    // R - sqrt(R² - a²) rewritten to avoid cancellation for small chords.
    let root = ((radius_um - a) * (radius_um + a)).max(0.0).sqrt();
    Ok(a * a / (radius_um + root))
}

/// Curvature radius of a cap with chord `diameter_um` and height `sag_um`:
/// `R = (D² + 4h²) / 8h`.
pub fn cap_radius(diameter_um: f64, sag_um: f64) -> Result<f64> {
    if !(diameter_um > 0.0) || !(sag_um > 0.0) {
        return Err(OpticsError::Domain(format!(
            "cap needs positive diameter and sag, got D={diameter_um}, h={sag_um}"
        )));
    }
    Ok((diameter_um * diameter_um + 4.0 * sag_um * sag_um) / (8.0 * sag_um))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn design_sags() {
        let front = cap_sag(97.6, 79.7).unwrap();
        assert!((front - 16.69).abs() < 0.01, "{front}");
        assert!((front / 97.6 - 0.171).abs() < 0.0005);
        let rear = cap_sag(60.0, 43.5).unwrap();
        assert!((rear - 12.00).abs() < 0.01, "{rear}");
        assert!((rear / 60.0 - 0.200).abs() < 0.0005);
    }

    #[test]
    fn zero_chord() {
        assert_eq!(cap_sag(0.0, 12.0).unwrap(), 0.0);
    }

    #[test]
    fn impossible_cap() {
        assert!(matches!(cap_sag(100.0, 49.0), Err(OpticsError::Domain(_))));
        assert!(cap_radius(0.0, 1.0).is_err());
        assert!(cap_radius(10.0, -1.0).is_err());
    }

    #[test]
    fn reflow_table_radii() {
        let r1 = cap_radius(96.20, 20.40).unwrap();
        assert!((r1 - 66.906).abs() < 0.001, "{r1}");
        assert!((r1 - 67.35).abs() <= 4.26);
        let r2 = cap_radius(60.23, 13.40).unwrap();
        assert!((r2 - 40.54).abs() < 0.01, "{r2}");
        assert!((r2 - 40.74).abs() <= 1.63);
    }

    #[test]
    fn roundtrip_design_front() {
        let h = cap_sag(97.6, 79.7).unwrap();
        assert_relative_eq!(cap_radius(97.6, h).unwrap(), 79.7, max_relative = 1e-9);
    }

    #[test]
    fn hemisphere() {
        let cap = CapGeometry::from_diameter_radius(20.0, 10.0).unwrap();
        assert_relative_eq!(cap.sag_um, 10.0, max_relative = 1e-12);
        assert_relative_eq!(cap_radius(20.0, 10.0).unwrap(), 10.0, max_relative = 1e-12);
        assert!(CapGeometry::from_diameter_sag(20.0, 10.5).is_err());
    }

    proptest! {
        #[test]
        fn sag_radius_inverse(r in 1.0f64..500.0, frac in 0.01f64..0.999) {
            let d = 2.0 * r * frac;
            let h = cap_sag(d, r).unwrap();
            let back = cap_radius(d, h).unwrap();
            prop_assert!(((back - r) / r).abs() < 1e-9);
            let cap = CapGeometry { diameter_um: d, sag_um: h, radius_um: r };
            prop_assert!(cap.consistency_error() < 1e-9);
            prop_assert!(h > 0.0 && h <= r);
        }
    }
}
