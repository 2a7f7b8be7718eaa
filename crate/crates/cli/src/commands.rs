use std::path::Path;

use microlens::aberration_fit::{fit_expansion_with, A1Form, FitOrder, FitReportFile, RaySample};
use microlens::design::{optimize as run_optimizer, Candidate, DesignResult, DesignSpec, OptimizerOptions};
use microlens::export::{fan_csv, fan_svg, spot_csv, spot_svg};
use microlens::paraxial::{diffraction_spot, effective_focal_length, na_biconvex, na_single, BiconvexParams};
use microlens::raytrace::{default_focus_bracket, opd_fan_at, ray_fan_at, trace_bundle, PupilGrid};
use microlens::reflow::{ReflowModel, ResistCylinder};
use microlens::tolerance::{run_mc_records, PerturbationSpec, SampleRecord, ToleranceReport};
use microlens::{cap_radius, Exec, LensDesign, LensPrescription, Violation};
use serde::Serialize;

use crate::output::{fmt_sig, print_json, write_file, CliError, CliResult};
use crate::{A1FormArg, AnalyzeArgs, FitArgs, LensArgs, Nominal, OptimizeArgs, ReflowArgs, ToleranceArgs, ValidateArgs};

fn load_prescription(path: &Path) -> CliResult<LensPrescription> {
    let p = LensPrescription::load(path)?;
    p.check()?;
    Ok(p)
}

fn radius_flag(r: f64) -> Option<f64> {
    r.is_finite().then_some(r)
}

#[derive(Serialize)]
struct NaReport {
    mode: &'static str,
    na: f64,
    spot_size_um: f64,
    effective_focal_length_um: Option<f64>,
    wavelength_nm: f64,
}

#[derive(Serialize)]
struct SpotSizeReport {
    mode: &'static str,
    spot_size_um: f64,
    na: f64,
    wavelength_nm: f64,
}

pub fn na(a: &LensArgs, spot_only: bool) -> CliResult<()> {
    let (mode, params, na, wavelength_nm) = if a.plano {
        let (d, h, n) = (a.d.unwrap_or_default(), a.h.unwrap_or_default(), a.n.unwrap_or_default());
        let na = na_single(d, h, n)?;
        let p = BiconvexParams::plano_convex(d, cap_radius(d, h)?, n);
        ("plano", p, na, a.wavelength_nm)
    } else if a.biconvex {
        let p = BiconvexParams {
            diameter_um: a.d.unwrap_or_default(),
            r1_um: a.r1.and_then(radius_flag),
            r2_um: a.r2.and_then(radius_flag),
            thickness_um: a.t.unwrap_or_default(),
            index: a.n.unwrap_or_default(),
        };
        ("biconvex", p, na_biconvex(&p)?, a.wavelength_nm)
    } else {
        let path = a.prescription.as_deref().ok_or_else(|| CliError::input("one of --biconvex, --plano, --prescription"))?;
        let pres = load_prescription(path)?;
        let p = BiconvexParams::from_prescription(&pres)?;
        ("prescription", p, na_biconvex(&p)?, pres.wavelength_nm)
    };
    if !(wavelength_nm > 0.0) {
        return Err(CliError::input(format!("wavelength {wavelength_nm} nm must be positive")));
    }
    let spot_size_um = diffraction_spot(&params, wavelength_nm * 1e-3)?;
    if spot_only {
        print_json(&SpotSizeReport { mode, spot_size_um, na, wavelength_nm })
    } else {
        let effective_focal_length_um = effective_focal_length(&params).ok();
        print_json(&NaReport { mode, na, spot_size_um, effective_focal_length_um, wavelength_nm })
    }
}

#[derive(Serialize)]
struct AnalyzeSummary {
    best_focus_z_um: f64,
    geo_radius_um: f64,
    rms_radius_um: f64,
    peak_opd_waves: f64,
    opd_peak_to_valley_waves: f64,
    peak_ray_fan_um: f64,
    n_rays: usize,
    n_vignetted: usize,
    artifacts: Vec<String>,
}

pub fn analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let p = load_prescription(&a.prescription)?;
    if a.rings == 0 {
        return Err(CliError::input("--rings must be at least 1"));
    }
    let bundle = trace_bundle(&p, PupilGrid::Hexapolar { rings: a.rings }, Exec::default());
    let bracket = default_focus_bracket(&p)?;
    let z = bundle.best_focus(bracket)?;
    let spot = bundle.spot_at(z)?;
    let ray = ray_fan_at(&p, a.fan_samples, z)?;
    let opd = opd_fan_at(&p, a.fan_samples, z)?;

    let any = a.spot || a.rayfan || a.opdfan;
    let mut artifacts = Vec::new();
    let mut emit = |name: &str, contents: String| -> CliResult<()> {
        let path = a.out_dir.join(name);
        write_file(&path, &contents)?;
        artifacts.push(path.display().to_string());
        Ok(())
    };
    if a.spot {
        emit("spot.csv", spot_csv(&bundle, z))?;
    }
    if a.rayfan {
        emit("rayfan.csv", fan_csv(&ray))?;
    }
    if a.opdfan {
        emit("opdfan.csv", fan_csv(&opd))?;
    }
    if a.svg {
        if a.spot || !any {
            emit("spot.svg", spot_svg(&spot))?;
        }
        if a.rayfan || !any {
            emit("rayfan.svg", fan_svg(&ray))?;
        }
        if a.opdfan || !any {
            emit("opdfan.svg", fan_svg(&opd))?;
        }
    }

    print_json(&AnalyzeSummary {
        best_focus_z_um: z,
        geo_radius_um: spot.geo_radius_um,
        rms_radius_um: spot.rms_radius_um,
        peak_opd_waves: opd.peak_abs(),
        opd_peak_to_valley_waves: opd.peak_to_valley(),
        peak_ray_fan_um: ray.peak_abs(),
        n_rays: bundle.rays.len(),
        n_vignetted: spot.n_vignetted,
        artifacts,
    })
}

pub fn optimize(a: &OptimizeArgs) -> CliResult<()> {
    let spec = DesignSpec { wavelength_nm: a.wavelength_nm, ..DesignSpec::new(a.target_na, a.d, a.n) };
    if !(spec.diameter_um > 0.0) || !(spec.index > 1.0) || !(spec.wavelength_nm > 0.0) {
        return Err(CliError::input("--d, --n - 1 and --wavelength-nm must be positive"));
    }
    // reference design scaled to the requested diameter, pulled inside the bounds
    let k = a.d / 60.0;
    let base = Candidate::reference();
    let [r1, r2, t] = spec.bounds.clip([base.r1_um * k, base.r2_abs_um * k, base.thickness_um * k]);
    let start = Candidate::new(a.r1.unwrap_or(r1), a.r2.unwrap_or(r2), a.t.unwrap_or(t));
    let opts = OptimizerOptions { max_iterations: a.max_iterations, starts: a.starts.max(1), ..OptimizerOptions::default() };
    let result: DesignResult = run_optimizer(&spec, start, a.seed, &opts, Exec::default())?;
    if let Some(path) = &a.out_prescription {
        let lens = spec
            .lens(result.candidate())
            .ok_or_else(|| CliError::numeric("optimized design is not a realizable lens"))?;
        write_file(path, &(lens.prescription().to_json_string() + "\n"))?;
    }
    print_json(&result)
}

#[derive(Serialize)]
struct ReflowReport {
    diameter_um: f64,
    thickness_um: f64,
    sag_um: f64,
    radius_um: f64,
    sag_ratio: f64,
    volume_retention: f64,
}

pub fn reflow(a: &ReflowArgs) -> CliResult<()> {
    let model = ReflowModel { volume_retention: a.volume_retention };
    let (thickness_um, cap) = match (a.thickness_um, a.target_sag_um) {
        (Some(t), _) => (t, model.predict(ResistCylinder { diameter_um: a.diameter_um, thickness_um: t })?),
        (None, Some(h)) => {
            let t = model.required_thickness(a.diameter_um, h)?;
            (t, microlens::CapGeometry::from_diameter_sag(a.diameter_um, h)?)
        }
        (None, None) => return Err(CliError::input("one of --thickness-um, --target-sag-um")),
    };
    print_json(&ReflowReport {
        diameter_um: cap.diameter_um,
        thickness_um,
        sag_um: cap.sag_um,
        radius_um: cap.radius_um,
        sag_ratio: cap.sag_ratio(),
        volume_retention: a.volume_retention,
    })
}

#[derive(Serialize)]
struct ToleranceOutput {
    nominal: &'static str,
    perturbation: PerturbationSpec,
    report: ToleranceReport,
}

pub const TOLERANCE_CSV_HEADER: [&str; 6] = ["sample", "na", "rms_um", "geo_um", "focus_shift_um", "failed"];

fn tolerance_csv(records: &[SampleRecord]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TOLERANCE_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.sample.to_string(),
            fmt_sig(r.na),
            fmt_sig(r.rms_um),
            fmt_sig(r.geo_um),
            fmt_sig(r.focus_shift_um),
            r.failed.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::numeric(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::numeric(e.to_string()))
}

pub fn tolerance(a: &ToleranceArgs) -> CliResult<()> {
    let (label, nominal) = match a.nominal {
        Nominal::Reference => ("reference", LensDesign::reference()),
        Nominal::AsFabricated => ("as-fabricated", LensDesign::as_fabricated()),
    };
    let mut spec = PerturbationSpec {
        n_samples: a.samples,
        seed: a.seed,
        sigma_decenter_um: a.sigma_decenter,
        ..PerturbationSpec::reflow_scatter()
    };
    if a.cast_diameters {
        spec = spec.with_cast_lens_diameters();
    }
    if !(a.sigma_scale >= 0.0) {
        return Err(CliError::input("--sigma-scale must be non-negative"));
    }
    spec = spec.scaled(a.sigma_scale);
    let exec = if a.sequential { Exec::Sequential } else { Exec::Parallel };
    let (report, records) = run_mc_records(&nominal, &spec, exec)?;
    if let Some(path) = &a.csv {
        write_file(path, &tolerance_csv(&records)?)?;
    }
    print_json(&ToleranceOutput { nominal: label, perturbation: spec, report })
}

/// Fit input rows: either the series variables directly or a spot CSV,
/// which is treated as on-axis data.
fn read_samples(path: &Path) -> CliResult<Vec<RaySample>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let num = |rec: &csv::StringRecord, i: usize, line: usize| -> CliResult<f64> {
        let field = rec.get(i).unwrap_or("").trim();
        field.parse().map_err(|_| CliError::input(format!("line {line}: `{field}` is not a number")))
    };
    let mut out = Vec::new();
    if let (Some(s), Some(h), Some(th), Some(x), Some(y)) = (col("s"), col("h"), col("theta"), col("x_um"), col("y_um")) {
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            out.push(RaySample {
                s: num(&rec, s, line)?,
                h: num(&rec, h, line)?,
                theta: num(&rec, th, line)?,
                x_um: num(&rec, x, line)?,
                y_um: num(&rec, y, line)?,
            });
        }
    } else if let (Some(px), Some(py), Some(x), Some(y), Some(alive)) =
        (col("pupil_x"), col("pupil_y"), col("image_x_um"), col("image_y_um"), col("alive"))
    {
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.get(alive).map(str::trim) != Some("true") {
                continue;
            }
            let line = i + 2;
            let (px, py) = (num(&rec, px, line)?, num(&rec, py, line)?);
            out.push(RaySample {
                s: px.hypot(py).min(1.0),
                h: 0.0,
                theta: px.atan2(py),
                x_um: num(&rec, x, line)?,
                y_um: num(&rec, y, line)?,
            });
        }
    } else {
        return Err(CliError::input(format!(
            "{}: expected columns s,h,theta,x_um,y_um or a spot CSV",
            path.display()
        )));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: FitReportFile,
    unidentified: Vec<&'static str>,
    condition_number: f64,
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let order = FitOrder::from_number(a.order)?;
    let form = match a.a1_form {
        A1FormArg::Verbatim => A1Form::Verbatim,
        A1FormArg::Symmetric => A1Form::Symmetric,
    };
    let samples = read_samples(&a.input)?;
    let report = fit_expansion_with(&samples, order, form)?;
    print_json(&FitOutput {
        fit: report.to_file(),
        unidentified: report.unidentified.clone(),
        condition_number: report.condition_number,
    })
}

#[derive(Serialize)]
struct ValidateReport {
    valid: bool,
    violations: Vec<Violation>,
}

pub fn validate(a: &ValidateArgs) -> CliResult<()> {
    let p = LensPrescription::load(&a.prescription)?;
    let violations = p.validate();
    let n = violations.len();
    print_json(&ValidateReport { valid: n == 0, violations })?;
    if n == 0 {
        Ok(())
    } else {
        Err(CliError::input(format!("{n} violation(s) in {}", a.prescription.display())))
    }
}
