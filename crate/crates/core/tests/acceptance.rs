//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use microlens::aberration_fit::{eval_expansion, fit_expansion, AberrationCoefficients, FitOrder, RaySample, N_TERMS};
use microlens::design::{merit, optimize, Candidate, DesignSpec, OptimizerOptions};
use microlens::lens::{equal_na_single_lens, LensDesign, DESIGN_NA};
use microlens::paraxial::{diffraction_spot, na_biconvex, na_single, thickness_for_na, BiconvexParams};
use microlens::raytrace::{
    find_best_focus, paraxial_na_from_trace, ray_fan, refract, spot_diagram, trace, PupilGrid, Ray, Vec3,
};
use microlens::reflow::{reflow_predict, reflow_required_thickness, ResistCylinder};
use microlens::tolerance::{run_mc, run_mc_records, PerturbationSpec};
use microlens::{cap_radius, cap_sag, Exec, LensPrescription, Material, SphericalSurface};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(started: Instant, limit: Duration) -> (bool, String) {
    let t = started.elapsed();
    (t <= limit, format!("{:.2} s of {} s", t.as_secs_f64(), limit.as_secs()))
}

fn cap_geometry() -> Outcome {
    let front = cap_radius(96.20, 20.40).map_err(|e| e.to_string())?;
    let rear = cap_radius(60.23, 13.40).map_err(|e| e.to_string())?;
    let ok = (front - 67.35).abs() <= 4.26 && (rear - 40.74).abs() <= 1.63;
    check(ok, format!("R front {front:.3} in 67.35 +/- 4.26, R rear {rear:.3} in 40.74 +/- 1.63"))
}

fn design_ratios() -> Outcome {
    let front = cap_sag(97.6, 79.7).map_err(|e| e.to_string())? / 97.6;
    let rear = cap_sag(60.0, 43.5).map_err(|e| e.to_string())? / 60.0;
    let ok = (front - 0.17).abs() <= 0.005 && (rear - 0.20).abs() <= 0.005;
    check(ok, format!("front h/D {front:.4} (0.17 +/- 0.005), rear h/D {rear:.4} (0.20 +/- 0.005)"))
}

fn na_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_spot: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let d = rng.random_range(5.0..300.0);
        let r1 = rng.random_range(d / 2.0..1000.0);
        let r2 = -rng.random_range(d / 2.0..1000.0);
        let t = rng.random_range(0.0..300.0);
        let n = rng.random_range(1.2..2.0);
        let lambda = rng.random_range(0.3..2.0);
        let p = BiconvexParams::new(d, r1, r2, t, n);
        let (Ok(na), Ok(size)) = (na_biconvex(&p), diffraction_spot(&p, lambda)) else {
            continue;
        };
        let expect = 0.82 * lambda;
        worst_spot = worst_spot.max((size * na - expect).abs() / expect);
        checked += 1;
    }

    let mut worst_reduction: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(5.0..300.0);
        let h = rng.random_range(1e-3 * d..0.5 * d);
        let n = rng.random_range(1.2..2.0);
        let r = cap_radius(d, h).map_err(|e| e.to_string())?;
        let thick = na_biconvex(&BiconvexParams { diameter_um: d, r1_um: Some(r), r2_um: None, thickness_um: 0.0, index: n })
            .map_err(|e| e.to_string())?;
        let single = na_single(d, h, n).map_err(|e| e.to_string())?;
        worst_reduction = worst_reduction.max((thick - single).abs() / single);
    }
    check(
        worst_spot <= 1e-12 && worst_reduction <= 1e-9,
        format!("max rel error size*NA vs 0.82 lambda {worst_spot:.2e} (<= 1e-12), planar reduction {worst_reduction:.2e} (<= 1e-9)"),
    )
}

fn spot_comparison() -> Outcome {
    let started = Instant::now();
    let lens = LensDesign::with_index(1.43);
    let p = lens.biconvex_params();
    let t_check = thickness_for_na(&BiconvexParams { thickness_um: 0.0, ..p }, DESIGN_NA).map_err(|e| e.to_string())?;
    let biconvex = lens.prescription();
    let single = equal_na_single_lens(lens.limiting_diameter_um(), DESIGN_NA, lens.index, lens.wavelength_nm)
        .map_err(|e| e.to_string())?;
    let geo = |pr: &LensPrescription| -> Result<f64, String> {
        let z = find_best_focus(pr, PupilGrid::default(), None).map_err(|e| e.to_string())?;
        Ok(spot_diagram(pr, z, PupilGrid::default()).map_err(|e| e.to_string())?.geo_radius_um)
    };
    let g_bi = geo(&biconvex)?;
    let g_single = geo(&single)?;
    let ratio = g_single / g_bi;
    let (fast, time) = within_time(started, Duration::from_secs(10));
    check(
        g_bi <= 5.5 && ratio >= 50.0 && fast && (t_check - lens.thickness_um).abs() < 1e-9,
        format!(
            "n 1.43, t {:.3} um: bi-convex geo {g_bi:.3} um (<= 5.5), single-lens geo {g_single:.3} um, ratio {ratio:.2} (>= 50), {time}",
            lens.thickness_um
        ),
    )
}

fn paraxial_consistency() -> Outcome {
    let lens = LensDesign::reference();
    let paraxial = na_biconvex(&lens.biconvex_params()).map_err(|e| e.to_string())?;
    let traced = paraxial_na_from_trace(&lens.prescription(), 100.0).map_err(|e| e.to_string())?;
    let rel = (traced - paraxial).abs() / paraxial;
    check(rel < 0.01, format!("traced NA {traced:.5} vs paraxial {paraxial:.5}, rel diff {rel:.2e} (< 1%)"))
}

fn series_samples(coeffs: &AberrationCoefficients, rng: &mut ChaCha8Rng) -> Vec<RaySample> {
    (0..400)
        .map(|_| {
            let s = rng.random_range(0.05..1.0);
            let h = rng.random_range(-1.0..1.0);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (x_um, y_um) = eval_expansion(coeffs, s, h, theta);
            RaySample { s, h, theta, x_um, y_um }
        })
        .collect()
}

/// Least-squares `a p + b p³` through the normal equations; returns the
/// coefficients with the rms and the largest absolute residual.
fn cubic_fit_residual(points: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let (mut s2, mut s4, mut s6, mut sy1, mut sy3) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, y) in points {
        s2 += p * p;
        s4 += p.powi(4);
        s6 += p.powi(6);
        sy1 += p * y;
        sy3 += p.powi(3) * y;
    }
    let det = s2 * s6 - s4 * s4;
    let a = (sy1 * s6 - sy3 * s4) / det;
    let b = (s2 * sy3 - s4 * sy1) / det;
    let resid: Vec<f64> = points.iter().map(|&(p, y)| y - a * p - b * p.powi(3)).collect();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    let max = resid.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    (a, b, rms, max)
}

fn fit_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v: [f64; N_TERMS] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let coeffs = AberrationCoefficients::from_vec(&v);
        let samples = series_samples(&coeffs, &mut rng);
        let fit = fit_expansion(&samples, FitOrder::Fifth).map_err(|e| e.to_string())?;
        let got = fit.coefficients.to_vec();
        let scale = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for (g, w) in got.iter().zip(v) {
            worst = worst.max((g - w).abs() / scale);
        }
    }

    let single = equal_na_single_lens(60.0, 0.2, 1.43, 632.8).map_err(|e| e.to_string())?;
    let fan = ray_fan(&single, 41).map_err(|e| e.to_string())?;
    let (_, b, rms, max) = cubic_fit_residual(&fan.samples);
    let peak = fan.peak_abs();
    let frac = rms / peak;
    check(
        worst <= 1e-8 && frac < 0.05 && b != 0.0,
        format!(
            "worst coefficient error {worst:.2e} (<= 1e-8); single lens NA 0.2 ray fan a p + b p^3: rms residual {:.2}% of max (< 5%), largest residual {:.2}%",
            frac * 100.0,
            max / peak * 100.0
        ),
    )
}

fn optimizer_recovery() -> Outcome {
    let started = Instant::now();
    let spec = DesignSpec::reference();
    let reference = Candidate::reference();
    let reference_merit = merit(reference, &spec);
    let opts = OptimizerOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for (k1, k2, k3) in [(1.15, 0.85, 1.15), (0.85, 1.15, 0.85)] {
        let start = Candidate::new(reference.r1_um * k1, reference.r2_abs_um * k2, reference.thickness_um * k3);
        let r = optimize(&spec, start, 0, &opts, Exec::Sequential).map_err(|e| e.to_string())?;
        let good = (r.achieved_na - DESIGN_NA).abs() <= 0.005 && r.merit_um <= reference_merit;
        ok &= good;
        notes.push(format!("start x({k1},{k2},{k3}): NA {:.4}, merit {:.3} vs {reference_merit:.3}", r.achieved_na, r.merit_um));
    }
    let r = optimize(&spec, reference, 0, &opts, Exec::Sequential).map_err(|e| e.to_string())?;
    let moves = [
        (r.r1_um - reference.r1_um).abs() / reference.r1_um,
        (-r.r2_um - reference.r2_abs_um).abs() / reference.r2_abs_um,
        (r.t_um - reference.thickness_um).abs() / reference.thickness_um,
    ];
    let max_move = moves.iter().fold(0.0f64, |m, v| m.max(*v));
    let stays = max_move < 0.05 && (r.achieved_na - DESIGN_NA).abs() <= 0.005;
    ok &= stays;
    notes.push(format!(
        "from reference: ({:.2}, {:.2}, {:.2}) um, largest move {:.1}% (< 5%)",
        r.r1_um,
        r.r2_um,
        r.t_um,
        max_move * 100.0
    ));
    let (fast, time) = within_time(started, Duration::from_secs(60));
    notes.push(time);
    check(ok && fast, notes.join("; "))
}

fn reflow_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_h, mut worst_v): (f64, f64) = (0.0, 0.0);
    for _ in 0..2000 {
        let d = rng.random_range(1.0..500.0);
        let h = rng.random_range(1e-3..=0.5) * d;
        let t = reflow_required_thickness(d, h).map_err(|e| e.to_string())?;
        let cap = reflow_predict(ResistCylinder { diameter_um: d, thickness_um: t }).map_err(|e| e.to_string())?;
        worst_h = worst_h.max((cap.sag_um - h).abs());
        let cylinder = std::f64::consts::PI * d * d / 4.0 * t;
        worst_v = worst_v.max((cap.volume_um3() - cylinder).abs() / cylinder);
    }
    check(
        worst_h <= 1e-9 && worst_v <= 1e-9,
        format!("worst sag roundtrip error {worst_h:.2e} um (<= 1e-9), worst volume error {worst_v:.2e} (<= 1e-9)"),
    )
}

fn monte_carlo() -> Outcome {
    let started = Instant::now();
    let nominal = LensDesign::as_fabricated();
    let spec = PerturbationSpec { seed: 42, ..PerturbationSpec::reflow_scatter() };
    let (a, _) = run_mc_records(&nominal, &spec, Exec::Parallel).map_err(|e| e.to_string())?;
    let (fast, time) = within_time(started, Duration::from_secs(30));
    let (b, _) = run_mc_records(&nominal, &spec, Exec::Sequential).map_err(|e| e.to_string())?;
    let identical = serde_json::to_string(&a).ok() == serde_json::to_string(&b).ok() && a == b;
    let front = a.front_radius_um.std;
    let rear = a.rear_radius_um.std;
    let r_ok = (front / 4.26 - 1.0).abs() <= 0.3 && (rear / 1.63 - 1.0).abs() <= 0.3;
    let zero = run_mc(&nominal, &PerturbationSpec::zero(100, 1)).map_err(|e| e.to_string())?;
    let zero_ok = [zero.na, zero.rms_spot_um, zero.geo_spot_um, zero.focus_shift_um, zero.front_radius_um, zero.rear_radius_um]
        .iter()
        .all(|m| m.std == 0.0);
    check(
        identical && r_ok && zero_ok && fast,
        format!(
            "{} samples: bit-identical across runs {identical}; R std front {front:.3} (4.26 +/- 30%), rear {rear:.3} (1.63 +/- 30%); zero-sigma std all 0 {zero_ok}; one run {time}",
            a.n_samples
        ),
    )
}

fn ray_primitives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_rev: f64 = 0.0;
    let mut n_rev = 0;
    while n_rev < 1000 {
        let normal = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), -1.0).normalize();
        let d = Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), 1.0).normalize();
        let (n1, n2) = (rng.random_range(1.0..2.0), rng.random_range(1.0..2.0));
        let Some(out) = refract(&d, &normal, n1, n2) else {
            continue;
        };
        let back = refract(&(-out), &normal, n2, n1).ok_or("reverse ray totally reflected")?;
        worst_rev = worst_rev.max((back + d).norm());
        n_rev += 1;
    }

    let normal = Vec3::new(0.0, 0.0, -1.0);
    let straight = refract(&Vec3::z(), &normal, 1.0, 1.7).ok_or("normal incidence lost")?;
    let normal_err = (straight - Vec3::z()).norm();

    // plate of thickness t, index n at incidence angle a: d = t sin a (1 - cos a / sqrt(n² - sin² a))
    let (t, n, a) = (10.0f64, 1.5f64, 0.4f64);
    let plate = LensPrescription {
        surfaces: vec![
            SphericalSurface::planar(0.0, 1e3, Material::with_index(n)),
            SphericalSurface::planar(t, 1e3, Material::air()),
        ],
        ambient: Material::air(),
        wavelength_nm: 632.8,
        entrance_beam_diameter_um: 10.0,
    };
    let dir = Vec3::new(0.0, a.sin(), a.cos());
    let start = Vec3::new(0.0, -20.0 * a.tan(), -20.0);
    let path = trace(&plate, Ray::new(start, dir));
    let exit = path.last().ok_or("plate trace produced no states")?;
    let undeviated = start + dir * ((exit.position.z - start.z) / dir.z);
    let shift = (exit.position - undeviated).norm() * a.cos();
    let expect = t * a.sin() * (1.0 - a.cos() / (n * n - a.sin().powi(2)).sqrt());
    let shift_err = (shift - expect).abs();

    let lens = LensDesign::reference().prescription();
    let axial = trace(&lens, Ray::new(Vec3::new(0.0, 0.0, -50.0), Vec3::z()));
    let mut axial_err: f64 = 0.0;
    for s in &axial.states {
        axial_err = axial_err.max(s.position.x.hypot(s.position.y)).max(s.direction.x.hypot(s.direction.y));
    }
    let axial_ok = axial.alive() && axial_err < 1e-12;

    check(
        worst_rev <= 1e-9 && normal_err <= 1e-15 && shift_err <= 1e-6 && axial_ok,
        format!(
            "reversibility {worst_rev:.1e} (<= 1e-9); normal incidence {normal_err:.1e}; plate shift {shift:.9} vs {expect:.9} ({shift_err:.1e} <= 1e-6); axial drift {axial_err:.1e}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("cap geometry vs measured reflow radii", cap_geometry),
        ("design sag-to-diameter ratios", design_ratios),
        ("NA and spot-size identities", na_identities),
        ("bi-convex vs equal-NA single lens spot", spot_comparison),
        ("paraxial vs traced NA", paraxial_consistency),
        ("aberration series fit", fit_roundtrip),
        ("optimizer recovery", optimizer_recovery),
        ("reflow inverse and volume", reflow_inverse),
        ("Monte Carlo validity", monte_carlo),
        ("ray-trace primitives", ray_primitives),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} [{name}] {detail} ({secs:.2} s)", i + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
