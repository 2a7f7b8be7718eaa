//! Volume-conserving reflow of a resist cylinder into a spherical cap with
//! its contact line pinned at the patterned footprint.

use serde::{Deserialize, Serialize};

use crate::error::{OpticsError, Result};
use crate::geometry::{cap_radius, CapGeometry};

/// Absolute tolerance of the sag bisection, μm.
pub const SAG_TOLERANCE_UM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistCylinder {
    pub diameter_um: f64,
    pub thickness_um: f64,
}

/// Reflow model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflowModel {
    /// Fraction of the resist volume kept in the cap (1 = no loss).
    pub volume_retention: f64,
}

impl Default for ReflowModel {
    fn default() -> Self {
        Self { volume_retention: 1.0 }
    }
}

fn cap_volume(diameter_um: f64, sag_um: f64) -> f64 {
    let a2 = diameter_um * diameter_um / 4.0;
    std::f64::consts::PI * sag_um / 6.0 * (3.0 * a2 + sag_um * sag_um)
}

impl ReflowModel {
    pub fn predict(&self, cyl: ResistCylinder) -> Result<CapGeometry> {
        let ResistCylinder { diameter_um: d, thickness_um: t } = cyl;
        if !(d > 0.0) || !(t >= 0.0) || !t.is_finite() {
            return Err(OpticsError::Domain(format!("resist cylinder needs D > 0 and t >= 0, got D={d}, t={t}")));
        }
        if !(self.volume_retention > 0.0) {
            return Err(OpticsError::Domain("volume retention must be positive".into()));
        }
        let volume = std::f64::consts::PI * d * d / 4.0 * t * self.volume_retention;
        if volume == 0.0 {
            return Ok(CapGeometry::flat(d));
        }
        let h_max = d / 2.0;
        if volume > cap_volume(d, h_max) * (1.0 + 1e-12) {
            return Err(OpticsError::Domain(format!(
                "resist volume exceeds a hemisphere on a {d} um footprint: pinned-cap model breaks down"
            )));
        }
        // cap volume is strictly increasing in h; bisect the single root
        let (mut lo, mut hi) = (0.0, h_max);
        // run to floating-point resolution, well inside SAG_TOLERANCE_UM
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cap_volume(d, mid) < volume {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = 0.5 * (lo + hi);
        Ok(CapGeometry { diameter_um: d, sag_um: h, radius_um: cap_radius(d, h)? })
    }

    pub fn required_thickness(&self, diameter_um: f64, target_sag_um: f64) -> Result<f64> {
        if !(diameter_um > 0.0) || !(target_sag_um > 0.0) {
            return Err(OpticsError::Domain(format!(
                "need positive diameter and sag, got D={diameter_um}, h={target_sag_um}"
            )));
        }
        if target_sag_um > diameter_um / 2.0 {
            return Err(OpticsError::Domain(format!(
                "sag {target_sag_um} exceeds a hemisphere on a {diameter_um} um footprint"
            )));
        }
        let h = target_sag_um;
        let a2 = diameter_um * diameter_um / 4.0;
        Ok(h * (3.0 * a2 + h * h) / (6.0 * a2) / self.volume_retention)
    }
}

/// Cap formed from `cyl` with full volume retention.
pub fn reflow_predict(cyl: ResistCylinder) -> Result<CapGeometry> {
    ReflowModel::default().predict(cyl)
}

/// Resist thickness that reflows into a cap of height `target_sag_um`:
/// `t = h (3D²/4 + h²) / (6 D²/4)`.
pub fn reflow_required_thickness(diameter_um: f64, target_sag_um: f64) -> Result<f64> {
    ReflowModel::default().required_thickness(diameter_um, target_sag_um)
}
