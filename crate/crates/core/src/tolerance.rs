//! Monte Carlo propagation of cap-geometry scatter and front/rear decenter
//! into NA, best-focus spot size and focus position.
//!
//! Sample `i` draws its perturbations from a ChaCha8 stream selected by `i`
//! under the run seed, and statistics are computed from sorted values, so a
//! report depends only on `(nominal, spec)`, not on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Exec;
use crate::geometry::CapGeometry;
use crate::lens::LensDesign;
use crate::numeric::{compensated_sum, percentile_sorted};
use crate::paraxial::na_biconvex;
use crate::raytrace::{default_focus_bracket, trace_bundle, PupilGrid};

/// One-sigma fabrication and assembly scatter, μm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub sigma_h_front: f64,
    pub sigma_d_front: f64,
    pub sigma_h_rear: f64,
    pub sigma_d_rear: f64,
    /// Lateral misalignment of the rear array, per axis.
    pub sigma_decenter_um: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Residual assembly misalignment assumed when none is given, μm.
pub const DEFAULT_SIGMA_DECENTER_UM: f64 = 1.0;

impl PerturbationSpec {
    /// Standard deviations of the reflowed resist caps (h, D per array).
    pub fn reflow_scatter() -> Self {
        Self {
            sigma_h_front: 1.60,
            sigma_d_front: 0.17,
            sigma_h_rear: 0.75,
            sigma_d_rear: 0.37,
            sigma_decenter_um: DEFAULT_SIGMA_DECENTER_UM,
            n_samples: 10_000,
            seed: 0,
        }
    }

    /// Diameter scatter replaced by that measured on the cast lens arrays.
    pub fn with_cast_lens_diameters(self) -> Self {
        Self { sigma_d_front: 0.36, sigma_d_rear: 0.49, ..self }
    }

    pub fn zero(n_samples: usize, seed: u64) -> Self {
        Self {
            sigma_h_front: 0.0,
            sigma_d_front: 0.0,
            sigma_h_rear: 0.0,
            sigma_d_rear: 0.0,
            sigma_decenter_um: 0.0,
            n_samples,
            seed,
        }
    }

    /// Every sigma multiplied by `k`.
    pub fn scaled(self, k: f64) -> Self {
        Self {
            sigma_h_front: self.sigma_h_front * k,
            sigma_d_front: self.sigma_d_front * k,
            sigma_h_rear: self.sigma_h_rear * k,
            sigma_d_rear: self.sigma_d_rear * k,
            sigma_decenter_um: self.sigma_decenter_um * k,
            ..self
        }
    }

    fn check(&self) -> Result<()> {
        let sigmas = [self.sigma_h_front, self.sigma_d_front, self.sigma_h_rear, self.sigma_d_rear, self.sigma_decenter_um];
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(crate::OpticsError::Domain("standard deviations must be finite and non-negative".into()));
        }
        if self.n_samples == 0 {
            return Err(crate::OpticsError::Domain("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample: usize,
    pub na: f64,
    pub rms_um: f64,
    pub geo_um: f64,
    pub focus_shift_um: f64,
    pub front_radius_um: f64,
    pub rear_radius_um: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl MetricStats {
    /// Statistics of `values`; independent of their order.
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, p5: f64::NAN, p50: f64::NAN, p95: f64::NAN };
        }
        let (mean, std) = if sorted[0] == sorted[n - 1] {
            (sorted[0], 0.0)
        } else {
            let mean = compensated_sum(sorted.iter().copied()) / n as f64;
            let ss = compensated_sum(sorted.iter().map(|v| (v - mean).powi(2)));
            (mean, if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 })
        };
        Self {
            mean,
            std,
            p5: percentile_sorted(&sorted, 0.05),
            p50: percentile_sorted(&sorted, 0.50),
            p95: percentile_sorted(&sorted, 0.95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceReport {
    pub n_samples: usize,
    pub n_failed: usize,
    pub na: MetricStats,
    pub rms_spot_um: MetricStats,
    pub geo_spot_um: MetricStats,
    pub focus_shift_um: MetricStats,
    pub front_radius_um: MetricStats,
    pub rear_radius_um: MetricStats,
}

impl ToleranceReport {
    pub fn from_records(records: &[SampleRecord]) -> Self {
        let ok: Vec<&SampleRecord> = records.iter().filter(|r| !r.failed).collect();
        let stats = |f: fn(&SampleRecord) -> f64| MetricStats::from_values(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            n_samples: records.len(),
            n_failed: records.len() - ok.len(),
            na: stats(|r| r.na),
            rms_spot_um: stats(|r| r.rms_um),
            geo_spot_um: stats(|r| r.geo_um),
            focus_shift_um: stats(|r| r.focus_shift_um),
            front_radius_um: stats(|r| r.front_radius_um),
            rear_radius_um: stats(|r| r.rear_radius_um),
        }
    }
}

/// Best-focus optics of one lens.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Evaluation {
    na: f64,
    rms: f64,
    geo: f64,
    focus_z: f64,
}

fn evaluate(lens: &LensDesign, decenter: [f64; 2]) -> Option<Evaluation> {
    let aligned = lens.prescription();
    if !aligned.validate().is_empty() {
        return None;
    }
    let na = na_biconvex(&lens.biconvex_params()).ok()?;
    // decenter barely moves focus; the aligned system sets the search range
    let (lo, hi) = default_focus_bracket(&aligned).ok()?;
    let p = if decenter == [0.0, 0.0] { aligned } else { lens.prescription_decentered(decenter) };
    let bundle = trace_bundle(&p, PupilGrid::default(), Exec::Sequential);
    let z = bundle.best_focus((lo, hi)).ok()?;
    let spot = bundle.spot_at(z).ok()?;
    Some(Evaluation { na, rms: spot.rms_radius_um, geo: spot.geo_radius_um, focus_z: z })
}

/// Per-sample random stream.
pub fn sample_rng(seed: u64, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng
}

fn run_sample(nominal: &LensDesign, spec: &PerturbationSpec, nominal_focus: f64, i: usize) -> SampleRecord {
    let mut rng = sample_rng(spec.seed, i);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let dh1 = spec.sigma_h_front * z();
    let dd1 = spec.sigma_d_front * z();
    let dh2 = spec.sigma_h_rear * z();
    let dd2 = spec.sigma_d_rear * z();
    let dx = spec.sigma_decenter_um * z();
    let dy = spec.sigma_decenter_um * z();

    let mut record = SampleRecord {
        sample: i,
        na: f64::NAN,
        rms_um: f64::NAN,
        geo_um: f64::NAN,
        focus_shift_um: f64::NAN,
        front_radius_um: f64::NAN,
        rear_radius_um: f64::NAN,
        failed: true,
    };
    let front = CapGeometry::from_diameter_sag(nominal.front.diameter_um + dd1, nominal.front.sag_um + dh1);
    let rear = CapGeometry::from_diameter_sag(nominal.rear.diameter_um + dd2, nominal.rear.sag_um + dh2);
    let (Ok(front), Ok(rear)) = (front, rear) else {
        return record;
    };
    record.front_radius_um = front.radius_um;
    record.rear_radius_um = rear.radius_um;
    let lens = LensDesign { front, rear, ..*nominal };
    if let Some(e) = evaluate(&lens, [dx, dy]) {
        record.na = e.na;
        record.rms_um = e.rms;
        record.geo_um = e.geo;
        record.focus_shift_um = e.focus_z - nominal_focus;
        record.failed = false;
    }
    record
}

/// Report and raw per-sample records.
pub fn run_mc_records(nominal: &LensDesign, spec: &PerturbationSpec, exec: Exec) -> Result<(ToleranceReport, Vec<SampleRecord>)> {
    spec.check()?;
    nominal.prescription().check()?;
    let nominal_eval = evaluate(nominal, [0.0, 0.0]).ok_or(crate::OpticsError::AllRaysDead)?;
    let records = exec.map_indexed(spec.n_samples, |i| run_sample(nominal, spec, nominal_eval.focus_z, i));
    Ok((ToleranceReport::from_records(&records), records))
}

pub fn run_mc(nominal: &LensDesign, spec: &PerturbationSpec) -> Result<ToleranceReport> {
    run_mc_records(nominal, spec, Exec::default()).map(|(r, _)| r)
}

/// Growth of the best-focus rms spot when the rear element is shifted by
/// `dx_um` along x.
pub fn decenter_sensitivity(nominal: &LensDesign, dx_um: f64) -> Result<f64> {
    let aligned = evaluate(nominal, [0.0, 0.0]).ok_or(crate::OpticsError::AllRaysDead)?;
    let shifted = evaluate(nominal, [dx_um, 0.0]).ok_or(crate::OpticsError::AllRaysDead)?;
    Ok(shifted.rms - aligned.rms)
}
