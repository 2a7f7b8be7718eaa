//! Search for the front radius, rear radius and thickness that minimize the
//! best-focus rms spot at a fixed NA and limiting diameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::geometry::CapGeometry;
use crate::lens::{LensDesign, DESIGN_NA};
use crate::paraxial::na_biconvex;
use crate::raytrace::{default_focus_bracket, trace_bundle, PupilGrid};
use crate::{HE_NE_WAVELENGTH_NM, PDMS_INDEX};

/// Penalty weight on `(NA − target)²`, μm. An NA error of 0.01 costs 10 μm.
pub const NA_PENALTY_WEIGHT: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub r1_um: (f64, f64),
    /// Bounds on the rear radius magnitude.
    pub r2_abs_um: (f64, f64),
    pub thickness_um: (f64, f64),
}

impl Bounds {
    fn lo(&self) -> [f64; 3] {
        [self.r1_um.0, self.r2_abs_um.0, self.thickness_um.0]
    }

    fn hi(&self) -> [f64; 3] {
        [self.r1_um.1, self.r2_abs_um.1, self.thickness_um.1]
    }

    pub fn clip(&self, x: [f64; 3]) -> [f64; 3] {
        let (lo, hi) = (self.lo(), self.hi());
        std::array::from_fn(|i| x[i].clamp(lo[i], hi[i]))
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        (0..3).all(|i| x[i] >= lo[i] && x[i] <= hi[i])
    }

    fn is_valid(&self) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        (0..3).all(|i| lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub target_na: f64,
    /// Fixed limiting (rear) diameter; also the traced beam diameter.
    pub diameter_um: f64,
    /// Fixed front cap diameter.
    pub front_diameter_um: f64,
    pub index: f64,
    pub bounds: Bounds,
    pub wavelength_nm: f64,
    /// Allowed `|NA − target|` for a result to count as converged.
    pub na_tolerance: f64,
}

impl DesignSpec {
    /// Reference design problem: NA 0.379 with 60 μm rear and 97.6 μm front
    /// diameters. Radii are bounded below by the cap semi-diameters (a cap can
    /// be at most a hemisphere) and above at 250 μm.
    pub fn reference() -> Self {
        Self::new(DESIGN_NA, 60.0, PDMS_INDEX)
    }

    pub fn new(target_na: f64, diameter_um: f64, index: f64) -> Self {
        let front_diameter_um = (diameter_um * 97.6 / 60.0).max(diameter_um);
        Self {
            target_na,
            diameter_um,
            front_diameter_um,
            index,
            bounds: Bounds {
                r1_um: (front_diameter_um / 2.0, 250.0),
                r2_abs_um: (diameter_um / 2.0, 250.0),
                thickness_um: (1.0, 250.0),
            },
            wavelength_nm: HE_NE_WAVELENGTH_NM,
            na_tolerance: 0.005,
        }
    }

    pub fn lens(&self, c: Candidate) -> Option<LensDesign> {
        let front = CapGeometry::from_diameter_radius(self.front_diameter_um, c.r1_um).ok()?;
        let rear = CapGeometry::from_diameter_radius(self.diameter_um, c.r2_abs_um).ok()?;
        Some(LensDesign {
            front,
            rear,
            thickness_um: c.thickness_um,
            index: self.index,
            wavelength_nm: self.wavelength_nm,
        })
    }
}

/// Free design variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub r1_um: f64,
    pub r2_abs_um: f64,
    pub thickness_um: f64,
}

impl Candidate {
    pub fn new(r1_um: f64, r2_abs_um: f64, thickness_um: f64) -> Self {
        Self { r1_um, r2_abs_um, thickness_um }
    }

    pub fn reference() -> Self {
        let lens = LensDesign::reference();
        Self::new(lens.front.radius_um, lens.rear.radius_um, lens.thickness_um)
    }

    fn to_array(self) -> [f64; 3] {
        [self.r1_um, self.r2_abs_um, self.thickness_um]
    }

    fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }
}

/// Merit breakdown for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeritTerms {
    pub rms_spot_um: f64,
    pub na: f64,
    pub penalty_um: f64,
    pub best_focus_z_um: f64,
}

impl MeritTerms {
    pub fn total(&self) -> f64 {
        self.rms_spot_um + self.penalty_um
    }
}

/// Best-focus rms spot and NA penalty; `None` when the candidate cannot be
/// built or traced.
pub fn merit_terms(candidate: Candidate, spec: &DesignSpec) -> Option<MeritTerms> {
    let lens = spec.lens(candidate)?;
    let p = lens.prescription();
    if !p.validate().is_empty() {
        return None;
    }
    let na = na_biconvex(&lens.biconvex_params()).ok()?;
    let bundle = trace_bundle(&p, PupilGrid::default(), Exec::Sequential);
    let bracket = default_focus_bracket(&p).ok()?;
    let z = bundle.best_focus(bracket).ok()?;
    let rms = bundle.rms_at(z);
    if !rms.is_finite() {
        return None;
    }
    let penalty_um = NA_PENALTY_WEIGHT * (na - spec.target_na).powi(2);
    Some(MeritTerms { rms_spot_um: rms, na, penalty_um, best_focus_z_um: z })
}

/// Scalar merit in μm; `+∞` for candidates that fail validation or tracing.
pub fn merit(candidate: Candidate, spec: &DesignSpec) -> f64 {
    merit_terms(candidate, spec).map_or(f64::INFINITY, |m| m.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Stop once every simplex vertex lies within this distance of the others.
    pub simplex_tolerance_um: f64,
    /// Initial simplex edge as a fraction of each start coordinate.
    pub initial_step: f64,
    /// Number of starts; the first is the given start point, the rest are
    /// seeded uniform draws within the bounds.
    pub starts: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { max_iterations: 500, simplex_tolerance_um: 1e-3, initial_step: 0.05, starts: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub r1_um: f64,
    /// Signed rear radius (negative for a bi-convex lens).
    pub r2_um: f64,
    pub t_um: f64,
    pub achieved_na: f64,
    /// Merit of the returned design (rms spot plus NA penalty), μm.
    pub merit_um: f64,
    pub rms_spot_um: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Which multi-start run produced the result.
    pub start_index: usize,
}

impl DesignResult {
    pub fn candidate(&self) -> Candidate {
        Candidate::new(self.r1_um, -self.r2_um, self.t_um)
    }
}

struct NelderMeadOutcome {
    best: [f64; 3],
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

fn simplex_diameter(simplex: &[[f64; 3]]) -> f64 {
    let mut d: f64 = 0.0;
    for a in simplex {
        for b in simplex {
            let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// Bounded Nelder–Mead; every trial point is clipped into `bounds`.
fn nelder_mead<F: Fn([f64; 3]) -> f64>(f: F, start: [f64; 3], bounds: &Bounds, opts: &OptimizerOptions) -> NelderMeadOutcome {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let start = bounds.clip(start);
    let mut simplex = vec![start];
    for i in 0..3 {
        let step = if start[i] != 0.0 { opts.initial_step * start[i].abs() } else { opts.initial_step };
        let mut v = start;
        v[i] += step;
        let mut v = bounds.clip(v);
        if v[i] == start[i] {
            v[i] -= step;
            v = bounds.clip(v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|&x| f(x)).collect();
    let mut evaluations = values.len();
    let mut iterations = 0;
    let mut converged = false;

    let sort = |s: &mut Vec<[f64; 3]>, v: &mut Vec<f64>| {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        // stable: ties keep earlier vertices first
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        *s = idx.iter().map(|&i| s[i]).collect();
        *v = idx.iter().map(|&i| v[i]).collect();
    };

    loop {
        sort(&mut simplex, &mut values);
        if simplex_diameter(&simplex) < opts.simplex_tolerance_um {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let centroid: [f64; 3] = std::array::from_fn(|k| simplex[..3].iter().map(|v| v[k]).sum::<f64>() / 3.0);
        let worst = simplex[3];
        let along = |coef: f64| bounds.clip(std::array::from_fn(|k| centroid[k] + coef * (centroid[k] - worst[k])));

        let xr = along(REFLECT);
        let fr = f(xr);
        evaluations += 1;
        if fr < values[0] {
            let xe = along(EXPAND);
            let fe = f(xe);
            evaluations += 1;
            if fe < fr {
                simplex[3] = xe;
                values[3] = fe;
            } else {
                simplex[3] = xr;
                values[3] = fr;
            }
            continue;
        }
        if fr < values[2] {
            simplex[3] = xr;
            values[3] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[3] {
            let x = along(CONTRACT * REFLECT);
            (x, f(x))
        } else {
            let x = along(-CONTRACT);
            (x, f(x))
        };
        evaluations += 1;
        if fc < values[3].min(fr) {
            simplex[3] = xc;
            values[3] = fc;
            continue;
        }
        let best = simplex[0];
        for i in 1..4 {
            simplex[i] = bounds.clip(std::array::from_fn(|k| best[k] + SHRINK * (simplex[i][k] - best[k])));
            values[i] = f(simplex[i]);
            evaluations += 1;
        }
    }
    NelderMeadOutcome { best: simplex[0], value: values[0], iterations, evaluations, converged }
}

fn single_run(spec: &DesignSpec, start: [f64; 3], opts: &OptimizerOptions, start_index: usize) -> DesignResult {
    let outcome = nelder_mead(|x| merit(Candidate::from_array(x), spec), start, &spec.bounds, opts);
    let cand = Candidate::from_array(outcome.best);
    let terms = merit_terms(cand, spec);
    let achieved_na = terms.map_or(f64::NAN, |t| t.na);
    let na_ok = (achieved_na - spec.target_na).abs() <= spec.na_tolerance;
    DesignResult {
        r1_um: cand.r1_um,
        r2_um: -cand.r2_abs_um,
        t_um: cand.thickness_um,
        achieved_na,
        merit_um: outcome.value,
        rms_spot_um: terms.map_or(f64::NAN, |t| t.rms_spot_um),
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        converged: outcome.converged && na_ok,
        start_index,
    }
}

/// Start points for a multi-start run: `start` followed by `starts − 1`
/// seeded uniform draws within the bounds.
pub fn start_points(spec: &DesignSpec, start: Candidate, seed: u64, starts: usize) -> Vec<Candidate> {
    let b = &spec.bounds;
    let mut out = vec![start];
    for i in 1..starts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let r1 = draw(&mut rng, b.r1_um);
        let r2 = draw(&mut rng, b.r2_abs_um);
        let t = draw(&mut rng, b.thickness_um);
        out.push(Candidate::new(r1, r2, t));
    }
    out
}

/// Nelder–Mead over `(R₁, |R₂|, t)`, deterministic for a given start, seed
/// and options. With `opts.starts > 1` the runs execute on `exec` and the
/// lowest merit wins, lowest start index on ties.
pub fn optimize(spec: &DesignSpec, start: Candidate, seed: u64, opts: &OptimizerOptions, exec: Exec) -> crate::Result<DesignResult> {
    if !spec.bounds.is_valid() {
        return Err(crate::OpticsError::Domain("design bounds must be finite, non-empty intervals".into()));
    }
    if !(spec.target_na > 0.0 && spec.target_na <= spec.index - 1.0) {
        return Err(crate::OpticsError::Domain(format!(
            "target NA {} outside (0, n-1 = {}]",
            spec.target_na,
            spec.index - 1.0
        )));
    }
    if !spec.bounds.contains(start.to_array()) {
        return Err(crate::OpticsError::Domain(format!("start {start:?} lies outside the bounds")));
    }
    let starts = start_points(spec, start, seed, opts.starts);
    let runs: Vec<DesignResult> = exec.map_indexed(starts.len(), |i| single_run(spec, starts[i].to_array(), opts, i));
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.merit_um < a.merit_um { b } else { a })
        .expect("at least one start");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_design_beats_perturbed_design() {
        let spec = DesignSpec::reference();
        let reference = Candidate::reference();
        let m0 = merit(reference, &spec);
        assert!(m0.is_finite());
        let terms = merit_terms(reference, &spec).unwrap();
        assert!(terms.penalty_um < 1e-20);
        // 20% flatter radii at the same thickness lose NA and spot quality
        let worse = Candidate::new(reference.r1_um * 1.2, reference.r2_abs_um * 1.2, reference.thickness_um);
        assert!(merit(worse, &spec) > m0);
    }

    #[test]
    fn penalty_dominates_large_na_error() {
        let spec = DesignSpec::reference();
        let off = DesignSpec { target_na: spec.target_na + 0.05, ..spec };
        let m = merit_terms(Candidate::reference(), &off).unwrap();
        assert!((m.penalty_um - 250.0).abs() < 1e-6);
        assert!(m.total() > 10.0 * merit(Candidate::reference(), &spec));
    }

    #[test]
    fn penalty_calibration() {
        assert!(NA_PENALTY_WEIGHT * 0.01f64.powi(2) >= 10.0);
    }

    #[test]
    fn scaled_down_design_leaves_only_penalty() {
        let k = 1e-3;
        let mut spec = DesignSpec::reference();
        spec.diameter_um *= k;
        spec.front_diameter_um *= k;
        spec.bounds = Bounds { r1_um: (0.0, 1.0), r2_abs_um: (0.0, 1.0), thickness_um: (0.0, 1.0) };
        let p = Candidate::reference();
        let m = merit_terms(Candidate::new(p.r1_um * k, p.r2_abs_um * k, p.thickness_um * k), &spec).unwrap();
        assert!(m.rms_spot_um < 5e-3, "{}", m.rms_spot_um);
        assert!((m.na - DESIGN_NA).abs() < 1e-12);
    }

    #[test]
    fn invalid_candidate_is_infinite() {
        let spec = DesignSpec::reference();
        // radius smaller than the front semi-diameter: no cap exists
        assert_eq!(merit(Candidate::new(40.0, 43.5, 71.0), &spec), f64::INFINITY);
        // surfaces cross
        assert_eq!(merit(Candidate::new(79.7, 43.5, 5.0), &spec), f64::INFINITY);
    }

    #[test]
    fn pinned_bounds_return_start() {
        let mut spec = DesignSpec::reference();
        let p = Candidate::reference();
        spec.bounds = Bounds {
            r1_um: (p.r1_um, p.r1_um),
            r2_abs_um: (p.r2_abs_um, p.r2_abs_um),
            thickness_um: (p.thickness_um, p.thickness_um),
        };
        let r = optimize(&spec, p, 0, &OptimizerOptions::default(), Exec::Sequential).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.candidate(), p);
    }

    #[test]
    fn start_outside_bounds_rejected() {
        let spec = DesignSpec::reference();
        assert!(optimize(&spec, Candidate::new(10.0, 43.5, 71.0), 0, &OptimizerOptions::default(), Exec::Sequential).is_err());
    }

    #[test]
    fn nelder_mead_on_quadratic() {
        let b = Bounds { r1_um: (-10.0, 10.0), r2_abs_um: (-10.0, 10.0), thickness_um: (-10.0, 10.0) };
        let f = |x: [f64; 3]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 2.0).powi(2) + 0.5 * (x[2] - 3.0).powi(2);
        let opts = OptimizerOptions { simplex_tolerance_um: 1e-8, max_iterations: 2000, ..Default::default() };
        let out = nelder_mead(f, [5.0, 5.0, 5.0], &b, &opts);
        assert!(out.converged);
        assert!((out.best[0] - 1.0).abs() < 1e-6 && (out.best[1] + 2.0).abs() < 1e-6 && (out.best[2] - 3.0).abs() < 1e-6);
        // minimum outside the box: lands on the wall
        let b = Bounds { r1_um: (2.0, 10.0), ..b };
        let out = nelder_mead(f, [5.0, 5.0, 5.0], &b, &opts);
        assert!((out.best[0] - 2.0).abs() < 1e-6);
    }
}
