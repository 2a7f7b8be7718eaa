//! Pupil-filling ray bundles, spot diagrams and focus search.

use super::{trace, Ray, Vec3, PARAXIAL_HEIGHT_FRACTION};
use crate::error::{OpticsError, Result};
use crate::exec::Exec;
use crate::numeric::{compensated_sum, golden_section};
use crate::prescription::LensPrescription;

/// Axial search tolerance for best focus, μm.
pub const FOCUS_TOLERANCE_UM: f64 = 1e-3;

/// Sampling of the entrance pupil in normalized coordinates (unit disk).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PupilGrid {
    /// Center ray plus `rings` rings, ring `k` carrying `6k` rays.
    Hexapolar { rings: usize },
    /// Square grid clipped to the unit disk, `n` samples across.
    Square { n: usize },
}

impl Default for PupilGrid {
    fn default() -> Self {
        PupilGrid::Hexapolar { rings: 10 }
    }
}

impl PupilGrid {
    pub fn points(&self) -> Vec<[f64; 2]> {
        match *self {
            PupilGrid::Hexapolar { rings } => {
                let mut pts = vec![[0.0, 0.0]];
                for k in 1..=rings {
                    let r = k as f64 / rings as f64;
                    let spokes = 6 * k;
                    for j in 0..spokes {
                        let phi = std::f64::consts::TAU * j as f64 / spokes as f64;
                        pts.push([r * phi.cos(), r * phi.sin()]);
                    }
                }
                pts
            }
            PupilGrid::Square { n } => {
                let mut pts = Vec::new();
                if n == 1 {
                    return vec![[0.0, 0.0]];
                }
                for i in 0..n {
                    for j in 0..n {
                        let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                        let y = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
                        if x * x + y * y <= 1.0 + 1e-12 {
                            pts.push([x, y]);
                        }
                    }
                }
                pts
            }
        }
    }
}

/// Collimated on-axis ray entering at normalized pupil point `pupil`.
///
/// Rays start on a plane one semi-aperture plus 1 μm before the first vertex,
/// which lies upstream of any part of the first surface.
pub fn entrance_ray(p: &LensPrescription, pupil: [f64; 2]) -> Ray {
    let semi = p.entrance_beam_diameter_um / 2.0;
    let first = p.surfaces.first();
    let z0 = first.map_or(0.0, |s| s.vertex_z_um - s.semi_aperture_um - 1.0);
    Ray::new(Vec3::new(pupil[0] * semi, pupil[1] * semi, z0), Vec3::z())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracedRay {
    pub pupil: [f64; 2],
    /// State after the last surface.
    pub exit: Ray,
}

/// A traced set of rays, ready to be intersected with any image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedBundle {
    pub rays: Vec<TracedRay>,
    pub image_index: f64,
}

pub fn trace_bundle(p: &LensPrescription, grid: PupilGrid, exec: Exec) -> TracedBundle {
    let pupils = grid.points();
    let rays = exec.map_slice(&pupils, |&pupil| {
        let path = trace(p, entrance_ray(p, pupil));
        let exit = path.last().copied().unwrap_or_else(|| entrance_ray(p, pupil));
        TracedRay { pupil, exit }
    });
    TracedBundle { rays, image_index: p.image_index() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotDiagram {
    pub image_z_um: f64,
    /// Image-plane intersections of surviving rays.
    pub points: Vec<[f64; 2]>,
    pub centroid: [f64; 2],
    /// Maximum distance from the centroid.
    pub geo_radius_um: f64,
    pub rms_radius_um: f64,
    pub n_vignetted: usize,
}

impl TracedBundle {
    /// Image-plane point of every ray, `None` for dead rays.
    pub fn image_points(&self, z: f64) -> Vec<Option<[f64; 2]>> {
        self.rays
            .iter()
            .map(|r| {
                if !r.exit.alive {
                    return None;
                }
                r.exit.point_at_z(z).map(|q| [q.x, q.y])
            })
            .collect()
    }

    pub fn n_alive(&self) -> usize {
        self.rays.iter().filter(|r| r.exit.alive && r.exit.direction.z > 0.0).count()
    }

    /// rms radius about the centroid at plane `z`; NaN when no ray survives.
    pub fn rms_at(&self, z: f64) -> f64 {
        let pts: Vec<[f64; 2]> = self.image_points(z).into_iter().flatten().collect();
        if pts.is_empty() {
            return f64::NAN;
        }
        let (_, rms, _) = spot_stats(&pts);
        rms
    }

    pub fn spot_at(&self, z: f64) -> Result<SpotDiagram> {
        let all = self.image_points(z);
        let n_vignetted = all.iter().filter(|p| p.is_none()).count();
        let points: Vec<[f64; 2]> = all.into_iter().flatten().collect();
        if points.is_empty() {
            return Err(OpticsError::AllRaysDead);
        }
        let (centroid, rms_radius_um, geo_radius_um) = spot_stats(&points);
        Ok(SpotDiagram { image_z_um: z, points, centroid, geo_radius_um, rms_radius_um, n_vignetted })
    }

    /// Plane of minimum rms spot radius inside `bracket`.
    pub fn best_focus(&self, bracket: (f64, f64)) -> Result<f64> {
        if self.n_alive() == 0 {
            return Err(OpticsError::AllRaysDead);
        }
        golden_section(|z| self.rms_at(z), bracket.0, bracket.1, FOCUS_TOLERANCE_UM)
    }
}

/// Centroid, rms radius and geometric (max) radius of a point set.
fn spot_stats(points: &[[f64; 2]]) -> ([f64; 2], f64, f64) {
    let n = points.len() as f64;
    let cx = compensated_sum(points.iter().map(|p| p[0])) / n;
    let cy = compensated_sum(points.iter().map(|p| p[1])) / n;
    let d2 = points.iter().map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2));
    let rms = (compensated_sum(d2.clone()) / n).sqrt();
    let geo = d2.fold(0.0f64, f64::max).sqrt();
    ([cx, cy], rms, geo.max(rms))
}

pub fn spot_diagram(p: &LensPrescription, z_um: f64, grid: PupilGrid) -> Result<SpotDiagram> {
    trace_bundle(p, grid, Exec::default()).spot_at(z_um)
}

/// Default best-focus search interval: from the last vertex to as far again
/// beyond the paraxial focus.
pub fn default_focus_bracket(p: &LensPrescription) -> Result<(f64, f64)> {
    let z_p = find_paraxial_focus(p)?;
    let z_last = p.surfaces.last().map_or(0.0, |s| s.vertex_z_um);
    Ok((z_last, z_p + (z_p - z_last).abs()))
}

/// z of minimum rms spot radius within `z_bracket` (default bracket when
/// `None`).
pub fn find_best_focus(p: &LensPrescription, grid: PupilGrid, z_bracket: Option<(f64, f64)>) -> Result<f64> {
    let bracket = match z_bracket {
        Some(b) => b,
        None => default_focus_bracket(p)?,
    };
    trace_bundle(p, grid, Exec::default()).best_focus(bracket)
}

/// Axial crossing of a ray entering at `PARAXIAL_HEIGHT_FRACTION` of the
/// beam semi-diameter, searched within ±1e6 μm of the last vertex.
pub fn find_paraxial_focus(p: &LensPrescription) -> Result<f64> {
    let z_last = p.surfaces.last().map_or(0.0, |s| s.vertex_z_um);
    find_paraxial_focus_within(p, (z_last, z_last + 1e6))
}

/// Paraxial focus constrained to `z_range`.
pub fn find_paraxial_focus_within(p: &LensPrescription, z_range: (f64, f64)) -> Result<f64> {
    let err = OpticsError::NoAxisCrossing { min_z: z_range.0, max_z: z_range.1 };
    let ray = entrance_ray(p, [0.0, PARAXIAL_HEIGHT_FRACTION]);
    let path = trace(p, ray);
    let exit = path.last().ok_or_else(|| err.clone())?;
    if !path.alive() || exit.direction.y * exit.position.y >= 0.0 {
        // parallel or diverging: no real crossing downstream
        return Err(err);
    }
    let z = exit.axis_crossing_z().ok_or_else(|| err.clone())?;
    if z < z_range.0 || z > z_range.1 {
        return Err(err);
    }
    Ok(z)
}
