//! Exact sequential tracing of rays through spherical and planar surfaces.

mod bundle;
mod fan;

pub use bundle::{
    default_focus_bracket, entrance_ray, find_best_focus, find_paraxial_focus, find_paraxial_focus_within,
    spot_diagram, trace_bundle, PupilGrid, SpotDiagram, TracedBundle, TracedRay,
};
pub use fan::{
    exit_pupil_z, marginal_ray_na, opd_fan, opd_fan_at, paraxial_na_from_trace, ray_fan, ray_fan_at,
    spherical_aberration, FanCurve, FanKind, SphericalAberration,
};

use nalgebra::Vector3;

use crate::prescription::{LensPrescription, SphericalSurface};

pub type Vec3 = Vector3<f64>;

/// Relative height of the near-axis ray used to locate the paraxial focus,
/// as a fraction of the beam semi-diameter.
pub const PARAXIAL_HEIGHT_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub position: Vec3,
    /// Unit propagation direction.
    pub direction: Vec3,
    /// Accumulated optical path length (geometric length × index), μm.
    pub opl_um: f64,
    /// False once the ray has been vignetted or totally internally reflected.
    pub alive: bool,
}

impl Ray {
    pub fn new(position: Vec3, direction: Vec3) -> Self {
        Self { position, direction: direction.normalize(), opl_um: 0.0, alive: true }
    }

    /// Point reached after geometric distance `t`.
    pub fn at(&self, t: f64) -> Vec3 {
        self.position + self.direction * t
    }

    /// Intersection with the plane `z = const`, if the ray moves toward +z.
    pub fn point_at_z(&self, z: f64) -> Option<Vec3> {
        if self.direction.z <= 0.0 {
            return None;
        }
        Some(self.at((z - self.position.z) / self.direction.z))
    }

    /// z where the ray meets the optical axis in the meridional (y-z) plane.
    pub fn axis_crossing_z(&self) -> Option<f64> {
        if self.direction.y == 0.0 {
            return None;
        }
        Some(self.position.z - self.position.y * self.direction.z / self.direction.y)
    }
}

/// Where and how a ray meets a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Vec3,
    /// Unit surface normal on the incoming side (−z at the vertex).
    pub normal: Vec3,
    /// Geometric distance travelled from the ray origin.
    pub distance: f64,
}

/// Nearest intersection of `ray` with the cap of `surface` around its vertex.
///
/// `None` when the ray misses the sphere, meets it behind its origin, or lands
/// outside the clear semi-aperture.
pub fn intersect(ray: &Ray, surface: &SphericalSurface) -> Option<Hit> {
    let vertex = Vec3::new(surface.decenter_um[0], surface.decenter_um[1], surface.vertex_z_um);
    let d = ray.direction;
    if d.z <= 0.0 {
        return None;
    }
    let c = surface.curvature();

    // Transfer to the vertex tangent plane, then solve
    // c|o + t d|² − 2(o_z + t d_z) = 0 for the root that tends to the plane
    // crossing as c → 0.
    let t0 = (vertex.z - ray.position.z) / d.z;
    let o = ray.position + d * t0 - vertex;
    let b = c * o.dot(&d) - d.z;
    let cc = c * o.dot(&o) - 2.0 * o.z;
    let disc = b * b - c * cc;
    if disc < 0.0 {
        return None;
    }
    let denom = b - disc.sqrt();
    if denom == 0.0 {
        return None;
    }
    let t1 = -cc / denom;
    let t = t0 + t1;
    if !(t >= -1e-9) {
        return None;
    }
    let local = o + d * t1;
    let r2 = local.x * local.x + local.y * local.y;
    let semi = surface.semi_aperture_um;
    if r2 > semi * semi * (1.0 + 1e-12) {
        return None;
    }
    let normal = Vec3::new(c * local.x, c * local.y, c * local.z - 1.0).normalize();
    Some(Hit { point: local + vertex, normal, distance: t })
}

/// Vector Snell refraction. `None` signals total internal reflection.
///
/// The normal may face either side; it is flipped to oppose `direction`.
pub fn refract(direction: &Vec3, normal: &Vec3, n_in: f64, n_out: f64) -> Option<Vec3> {
    let mut n = *normal;
    let mut cos_i = -direction.dot(&n);
    if cos_i < 0.0 {
        n = -n;
        cos_i = -cos_i;
    }
    let mu = n_in / n_out;
    let k = 1.0 - mu * mu * (1.0 - cos_i * cos_i);
    if k < 0.0 {
        return None;
    }
    let out = direction * mu + n * (mu * cos_i - k.sqrt());
    Some(out.normalize())
}

/// How a traced ray ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Transmitted,
    Vignetted { surface: usize },
    TotalInternalReflection { surface: usize },
}

/// Ray states just after each surface, in surface order.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    pub states: Vec<Ray>,
    pub fate: Fate,
}

impl RayPath {
    pub fn last(&self) -> Option<&Ray> {
        self.states.last()
    }

    pub fn alive(&self) -> bool {
        self.fate == Fate::Transmitted
    }
}

/// Trace `ray` through every surface in order.
///
/// Dead rays keep their last good state, with `alive = false`, for the rest
/// of the path.
pub fn trace(prescription: &LensPrescription, ray: Ray) -> RayPath {
    let mut states = Vec::with_capacity(prescription.surfaces.len());
    let mut current = ray;
    let mut fate = if ray.alive { Fate::Transmitted } else { Fate::Vignetted { surface: 0 } };
    let mut n_in = prescription.ambient.refractive_index;
    for (i, surface) in prescription.surfaces.iter().enumerate() {
        let n_out = surface.medium_after.refractive_index;
        if current.alive {
            match intersect(&current, surface) {
                None => {
                    current.alive = false;
                    fate = Fate::Vignetted { surface: i };
                }
                Some(hit) => match refract(&current.direction, &hit.normal, n_in, n_out) {
                    None => {
                        current.position = hit.point;
                        current.opl_um += n_in * hit.distance;
                        current.alive = false;
                        fate = Fate::TotalInternalReflection { surface: i };
                    }
                    Some(dir) => {
                        current.position = hit.point;
                        current.opl_um += n_in * hit.distance;
                        current.direction = dir;
                    }
                },
            }
        }
        states.push(current);
        n_in = n_out;
    }
    RayPath { states, fate }
}
