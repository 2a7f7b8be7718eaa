//! Closed-form numerical aperture, diffraction-limited spot size and thick
//! lens focal length.

use serde::{Deserialize, Serialize};

use crate::error::{OpticsError, Result};
use crate::geometry::cap_radius;
use crate::prescription::LensPrescription;

/// Spot-size prefactor: `size = SPOT_FACTOR · λ / (D (n−1) [...])`.
pub const SPOT_FACTOR: f64 = 1.64;

/// Bi-convex (or plano-convex, with a planar surface) thick lens.
///
/// Radii are signed by the downstream-center convention, so a bi-convex lens
/// has `r1_um > 0` and `r2_um < 0`. `None` marks a planar surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiconvexParams {
    pub diameter_um: f64,
    pub r1_um: Option<f64>,
    pub r2_um: Option<f64>,
    pub thickness_um: f64,
    pub index: f64,
}

impl BiconvexParams {
    pub fn new(diameter_um: f64, r1_um: f64, r2_um: f64, thickness_um: f64, index: f64) -> Self {
        Self { diameter_um, r1_um: Some(r1_um), r2_um: Some(r2_um), thickness_um, index }
    }

    /// Plano-convex lens of zero thickness, curved side first.
    pub fn plano_convex(diameter_um: f64, radius_um: f64, index: f64) -> Self {
        Self { diameter_um, r1_um: Some(radius_um), r2_um: None, thickness_um: 0.0, index }
    }

    fn check(&self) -> Result<()> {
        if !(self.diameter_um > 0.0) {
            return Err(OpticsError::Domain(format!("diameter {} must be positive", self.diameter_um)));
        }
        if !(self.thickness_um >= 0.0) {
            return Err(OpticsError::Domain(format!("thickness {} must be non-negative", self.thickness_um)));
        }
        if !(self.index > 1.0) {
            return Err(OpticsError::Domain(format!("index {} must exceed 1", self.index)));
        }
        if self.r1_um == Some(0.0) || self.r2_um == Some(0.0) {
            return Err(OpticsError::Domain("radius must be non-zero".into()));
        }
        Ok(())
    }

    /// `1/R₁ − 1/R₂ + (n−1) t / (n R₁ R₂)`; the lens power divided by `n−1`.
    pub fn shape_factor(&self) -> Result<f64> {
        self.check()?;
        let c1 = self.r1_um.map_or(0.0, |r| 1.0 / r);
        let c2 = self.r2_um.map_or(0.0, |r| 1.0 / r);
        let n = self.index;
        Ok(c1 - c2 + (n - 1.0) * self.thickness_um * c1 * c2 / n)
    }

    /// Thick-lens optical power in 1/μm.
    pub fn power(&self) -> Result<f64> {
        Ok((self.index - 1.0) * self.shape_factor()?)
    }

    /// Singlet parameters of a two-surface prescription. The index is taken
    /// relative to the ambient medium and the diameter is the entrance beam.
    pub fn from_prescription(p: &LensPrescription) -> Result<Self> {
        p.check()?;
        let [s1, s2] = p.surfaces.as_slice() else {
            return Err(OpticsError::InvalidPrescription(format!(
                "a singlet needs exactly 2 surfaces, found {}",
                p.surfaces.len()
            )));
        };
        if s2.medium_after.refractive_index != p.ambient.refractive_index {
            return Err(OpticsError::InvalidPrescription("image space must be the ambient medium".into()));
        }
        Ok(Self {
            diameter_um: p.entrance_beam_diameter_um,
            r1_um: s1.radius_um,
            r2_um: s2.radius_um,
            thickness_um: s2.vertex_z_um - s1.vertex_z_um,
            index: s1.medium_after.refractive_index / p.ambient.refractive_index,
        })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            diameter_um: self.diameter_um * k,
            r1_um: self.r1_um.map(|r| r * k),
            r2_um: self.r2_um.map(|r| r * k),
            thickness_um: self.thickness_um * k,
            index: self.index,
        }
    }
}

/// NA of a single spherical cap of chord `diameter_um` and height `sag_um`:
/// `4 D h (n−1) / (D² + 4h²)`.
pub fn na_single(diameter_um: f64, sag_um: f64, index: f64) -> Result<f64> {
    if !(diameter_um > 0.0) || !(sag_um > 0.0) {
        return Err(OpticsError::Domain(format!(
            "need positive diameter and sag, got D={diameter_um}, h={sag_um}"
        )));
    }
    if !(index > 1.0) {
        return Err(OpticsError::Domain(format!("index {index} must exceed 1")));
    }
    let d = diameter_um;
    let h = sag_um;
    Ok(4.0 * d * h * (index - 1.0) / (d * d + 4.0 * h * h))
}

/// `D (n−1)/2 · [1/R₁ − 1/R₂ + (n−1) t / (n R₁ R₂)]`.
pub fn na_biconvex(p: &BiconvexParams) -> Result<f64> {
    Ok(p.diameter_um * (p.index - 1.0) / 2.0 * p.shape_factor()?)
}

/// Diffraction-limited spot size, `1.64 λ / (D (n−1) [...])`, in μm.
pub fn diffraction_spot(p: &BiconvexParams, wavelength_um: f64) -> Result<f64> {
    let na = na_biconvex(p)?;
    if !(na > 0.0) {
        return Err(OpticsError::Domain(format!("spot size needs a converging lens, NA = {na}")));
    }
    if !(wavelength_um > 0.0) {
        return Err(OpticsError::Domain(format!("wavelength {wavelength_um} must be positive")));
    }
    Ok(SPOT_FACTOR * wavelength_um / (p.diameter_um * (p.index - 1.0) * p.shape_factor()?))
}

pub fn effective_focal_length(p: &BiconvexParams) -> Result<f64> {
    let power = p.power()?;
    if power == 0.0 || !power.is_finite() {
        return Err(OpticsError::ZeroPower);
    }
    Ok(1.0 / power)
}

/// Back focal distance measured from the rear vertex.
pub fn back_focal_length(p: &BiconvexParams) -> Result<f64> {
    let f = effective_focal_length(p)?;
    let c1 = p.r1_um.map_or(0.0, |r| 1.0 / r);
    Ok(f * (1.0 - (p.index - 1.0) * p.thickness_um * c1 / p.index))
}

/// Thickness that makes [`na_biconvex`] equal `target_na`, with the other
/// parameters of `p` held. The relation is affine in `t`.
pub fn thickness_for_na(p: &BiconvexParams, target_na: f64) -> Result<f64> {
    let (Some(r1), Some(r2)) = (p.r1_um, p.r2_um) else {
        return Err(OpticsError::Domain("thickness has no effect with a planar surface".into()));
    };
    let probe = BiconvexParams { thickness_um: 0.0, ..*p };
    probe.check()?;
    let n = p.index;
    let slope = (n - 1.0) / (n * r1 * r2);
    let needed = 2.0 * target_na / (p.diameter_um * (n - 1.0)) - (1.0 / r1 - 1.0 / r2);
    let t = needed / slope;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(OpticsError::Domain(format!("no non-negative thickness reaches NA {target_na}")));
    }
    Ok(t)
}

/// Radius of the cap and its NA via `D(n−1)/(2R)`; the two forms of the
/// single-cap NA agree identically.
pub fn na_single_via_radius(diameter_um: f64, sag_um: f64, index: f64) -> Result<f64> {
    let r = cap_radius(diameter_um, sag_um)?;
    Ok(diameter_um * (index - 1.0) / (2.0 * r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cap_sag;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Bisection on t, independent of the affine closed form.
    fn bisect_thickness(d: f64, r1: f64, r2: f64, n: f64, target: f64) -> f64 {
        let f = |t: f64| na_biconvex(&BiconvexParams::new(d, r1, r2, t, n)).unwrap() - target;
        let (mut lo, mut hi) = (0.0, 500.0);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn hemisphere_na_is_index_minus_one() {
        for d in [1.0, 60.0, 97.6] {
            assert_relative_eq!(na_single(d, d / 2.0, 1.43).unwrap(), 0.43, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_cap_examples() {
        let h = cap_sag(97.6, 79.7).unwrap();
        let na = na_single(97.6, h, 1.43).unwrap();
        assert_relative_eq!(na, 97.6 * 0.43 / (2.0 * 79.7), max_relative = 1e-9);
        assert!((na - 0.263).abs() < 5e-4);
        assert!((na_single(60.0, 12.0, 1.43).unwrap() - 0.297).abs() < 5e-4);
        assert_relative_eq!(na_single(60.0, 12.0, 1.43).unwrap(), na_single_via_radius(60.0, 12.0, 1.43).unwrap(), max_relative = 1e-12);
        assert!(na_single(0.0, 1.0, 1.43).is_err());
    }

    #[test]
    fn reference_thickness_back_solve() {
        let oracle_t = bisect_thickness(60.0, 79.7, -43.5, 1.43, 0.379);
        assert!((oracle_t - 71.0).abs() < 0.1, "{oracle_t}");
        let p = BiconvexParams::new(60.0, 79.7, -43.5, 0.0, 1.43);
        let t = thickness_for_na(&p, 0.379).unwrap();
        assert_relative_eq!(t, oracle_t, max_relative = 1e-9);
        let na = na_biconvex(&BiconvexParams { thickness_um: t, ..p }).unwrap();
        assert_relative_eq!(na, 0.379, max_relative = 1e-12);
    }

    #[test]
    fn thin_symmetric_lens() {
        let p = BiconvexParams::new(60.0, 50.0, -50.0, 0.0, 1.43);
        assert_relative_eq!(na_biconvex(&p).unwrap(), 60.0 * 0.43 / 50.0, max_relative = 1e-12);
        assert_relative_eq!(effective_focal_length(&p).unwrap(), 50.0 / (2.0 * 0.43), max_relative = 1e-12);
    }

    #[test]
    fn planar_rear_reduces_to_single_cap() {
        let (d, r, n) = (60.0, 43.5, 1.43);
        let h = cap_sag(d, r).unwrap();
        let p = BiconvexParams::plano_convex(d, r, n);
        assert_relative_eq!(na_biconvex(&p).unwrap(), na_single(d, h, n).unwrap(), max_relative = 1e-9);
        let lambda = 0.6328;
        assert_relative_eq!(
            diffraction_spot(&p, lambda).unwrap(),
            0.82 * lambda / na_single(d, h, n).unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn spot_at_design_na() {
        let p = BiconvexParams::new(60.0, 79.7, -43.5, 0.0, 1.43);
        let t = thickness_for_na(&p, 0.379).unwrap();
        let p = BiconvexParams { thickness_um: t, ..p };
        let size = diffraction_spot(&p, 0.6328).unwrap();
        assert_relative_eq!(size, 0.82 * 0.6328 / 0.379, max_relative = 1e-12);
        assert!((size - 1.369).abs() < 5e-4);
        let f = effective_focal_length(&p).unwrap();
        assert!((f - 79.2).abs() < 0.05, "{f}");
        assert_relative_eq!(na_biconvex(&p).unwrap(), 60.0 / (2.0 * f), max_relative = 1e-12);
    }

    #[test]
    fn afocal_and_bad_inputs() {
        let p = BiconvexParams::new(60.0, 50.0, 50.0, 0.0, 1.43);
        assert_eq!(effective_focal_length(&p), Err(OpticsError::ZeroPower));
        assert!(diffraction_spot(&p, 0.6328).is_err());
        assert!(na_biconvex(&BiconvexParams::new(60.0, 0.0, -1.0, 0.0, 1.43)).is_err());
    }

    proptest! {
        #[test]
        fn spot_times_na_is_constant(
            d in 1.0f64..200.0, r1 in 20.0f64..400.0, r2 in 20.0f64..400.0,
            t in 0.0f64..30.0, n in 1.2f64..1.9, lambda in 0.3f64..1.6, k in 0.1f64..10.0,
        ) {
            let p = BiconvexParams::new(d, r1, -r2, t, n);
            let na = na_biconvex(&p).unwrap();
            prop_assume!(na > 0.0);
            let size = diffraction_spot(&p, lambda).unwrap();
            prop_assert!(((size * na) / (0.82 * lambda) - 1.0).abs() < 1e-12);
            let q = p.scaled(k);
            let ratio = diffraction_spot(&q, lambda).unwrap() * na_biconvex(&q).unwrap() / lambda;
            prop_assert!((ratio / 0.82 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn na_decreases_with_radii(r1 in 30.0f64..300.0, r2 in 30.0f64..300.0, t in 0.0f64..20.0) {
            let na = |a: f64, b: f64| na_biconvex(&BiconvexParams::new(60.0, a, -b, t, 1.43)).unwrap();
            let base = na(r1, r2);
            prop_assume!(base > 0.0);
            prop_assert!(na(r1 * 1.05, r2) < base);
            prop_assert!(na(r1, r2 * 1.05) < base);
        }
    }

    #[test]
    fn params_from_design_prescription() {
        let lens = crate::LensDesign::reference();
        let p = BiconvexParams::from_prescription(&lens.prescription()).unwrap();
        assert_eq!(p, lens.biconvex_params());
    }
}
