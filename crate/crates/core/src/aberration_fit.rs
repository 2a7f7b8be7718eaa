//! Transverse aberration power series in normalized pupil radius `s`, field
//! height `h` and pupil azimuth `θ`, and its least-squares fit to ray data.
//!
//! The series is evaluated term by term as printed, including the lone
//! `A₁ sin θ` term of `x′` (no `s` factor). [`A1Form::Symmetric`] switches
//! that term to `A₁ s sin θ`.
//!
//! Azimuth is measured from the meridional (+y) axis, so a pupil point is
//! `s (sin θ, cos θ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{OpticsError, Result};
use crate::raytrace::TracedBundle;

pub const N_TERMS: usize = 19;

/// Coefficient names in storage order.
pub const TERM_NAMES: [&str; N_TERMS] = [
    "A1", "A2", "B1", "B2", "B3", "B4", "B5", "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11",
    "C12",
];

/// Terms that are identically zero on axis (`h = 0`).
pub const FIELD_ONLY: [bool; N_TERMS] = [
    false, false, false, true, true, true, true, false, true, true, true, true, true, true, true, true, true, true,
    true,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A1Form {
    /// `x′ ∋ A₁ sin θ`.
    #[default]
    Verbatim,
    /// `x′ ∋ A₁ s sin θ`, mirroring the `A₂ s cos θ` term of `y′`.
    Symmetric,
}

/// `{A, B, C}` coefficient set; units μm per normalized-coordinate power.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AberrationCoefficients {
    pub a: [f64; 2],
    pub b: [f64; 5],
    pub c: [f64; 12],
}

impl AberrationCoefficients {
    pub fn to_vec(&self) -> [f64; N_TERMS] {
        let mut v = [0.0; N_TERMS];
        v[..2].copy_from_slice(&self.a);
        v[2..7].copy_from_slice(&self.b);
        v[7..].copy_from_slice(&self.c);
        v
    }

    pub fn from_vec(v: &[f64; N_TERMS]) -> Self {
        let mut out = Self::default();
        out.a.copy_from_slice(&v[..2]);
        out.b.copy_from_slice(&v[2..7]);
        out.c.copy_from_slice(&v[7..]);
        out
    }
}

/// One traced ray expressed in the series' variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub s: f64,
    pub h: f64,
    pub theta: f64,
    /// Image-plane position relative to the ideal image point.
    pub x_um: f64,
    pub y_um: f64,
}

/// `(x′, y′)` contribution of term `k` with unit coefficient.
fn term(k: usize, s: f64, h: f64, theta: f64, form: A1Form) -> (f64, f64) {
    let (st, ct) = theta.sin_cos();
    let (s2t, c2t) = (2.0 * theta).sin_cos();
    let c2 = ct * ct;
    match k {
        0 => match form {
            A1Form::Verbatim => (st, 0.0),
            A1Form::Symmetric => (s * st, 0.0),
        },
        1 => (0.0, s * ct + h),
        2 => (s.powi(3) * st, s.powi(3) * ct),
        3 => (s * s * h * s2t, s * s * h * (2.0 + c2t)),
        4 => (s * h * h * st, 3.0 * s * h * h * ct),
        5 => (s * h * h * st, s * h * h * ct),
        6 => (0.0, h.powi(3)),
        7 => (s.powi(5) * st, s.powi(5) * ct),
        8 => (0.0, s.powi(4) * h),
        9 => (s.powi(4) * h * s2t, s.powi(4) * h * c2t),
        10 => (0.0, s.powi(3) * h * h * ct),
        11 => (s * s * h * h * st, 0.0),
        12 => (c2 * s * s * h * h * st, c2 * s.powi(3) * h * h * ct),
        13 => (0.0, s * s * h.powi(3)),
        14 => (0.0, c2t * s * s * h.powi(3)),
        15 => (s * s * h.powi(3) * s2t, 0.0),
        16 => (0.0, s * h.powi(4) * ct),
        17 => (h.powi(4) * st, 0.0),
        18 => (0.0, h.powi(5)),
        _ => unreachable!("term index {k}"),
    }
}

/// Evaluate the series exactly as printed.
pub fn eval_expansion(coeffs: &AberrationCoefficients, s: f64, h: f64, theta: f64) -> (f64, f64) {
    eval_expansion_with(coeffs, s, h, theta, A1Form::Verbatim)
}

pub fn eval_expansion_with(coeffs: &AberrationCoefficients, s: f64, h: f64, theta: f64, form: A1Form) -> (f64, f64) {
    coeffs.to_vec().iter().enumerate().fold((0.0, 0.0), |(x, y), (k, &c)| {
        if c == 0.0 {
            return (x, y);
        }
        let (tx, ty) = term(k, s, h, theta, form);
        (x + c * tx, y + c * ty)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitOrder {
    /// A and B terms; C frozen at zero.
    Third,
    /// All terms.
    Fifth,
}

impl FitOrder {
    pub fn from_number(order: u32) -> Result<Self> {
        match order {
            3 => Ok(FitOrder::Third),
            5 => Ok(FitOrder::Fifth),
            other => Err(OpticsError::Domain(format!("fit order must be 3 or 5, got {other}"))),
        }
    }

    pub fn number(&self) -> u32 {
        match self {
            FitOrder::Third => 3,
            FitOrder::Fifth => 5,
        }
    }

    fn n_terms(&self) -> usize {
        match self {
            FitOrder::Third => 7,
            FitOrder::Fifth => N_TERMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub coefficients: AberrationCoefficients,
    /// rms over samples of the residual vector length, μm.
    pub residual_rms_um: f64,
    pub order: FitOrder,
    /// Coefficients determined by the data.
    pub identifiable: Vec<&'static str>,
    /// Coefficients the data cannot determine (field terms of on-axis data);
    /// reported as zero.
    pub unidentified: Vec<&'static str>,
    pub condition_number: f64,
    /// True when the rank-revealing fallback solved the system.
    pub used_svd: bool,
}

/// JSON layout of a fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitReportFile {
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub residual_rms_um: f64,
    pub order: u32,
    pub identifiable: Vec<&'static str>,
}

impl FitReport {
    pub fn to_file(&self) -> FitReportFile {
        FitReportFile {
            a: self.coefficients.a.to_vec(),
            b: self.coefficients.b.to_vec(),
            c: self.coefficients.c.to_vec(),
            residual_rms_um: self.residual_rms_um,
            order: self.order.number(),
            identifiable: self.identifiable.clone(),
        }
    }
}

/// Normal-equation condition number above which the SVD path is used.
const SVD_FALLBACK_CONDITION: f64 = 1e10;
/// Relative singular value below which a column combination is unresolvable.
const RANK_TOLERANCE: f64 = 1e-12;

pub fn fit_expansion(samples: &[RaySample], order: FitOrder) -> Result<FitReport> {
    fit_expansion_with(samples, order, A1Form::Verbatim)
}

/// Joint linear least squares of `x′` and `y′` over the series terms.
pub fn fit_expansion_with(samples: &[RaySample], order: FitOrder, form: A1Form) -> Result<FitReport> {
    let on_axis = samples.iter().all(|s| s.h == 0.0);
    let mut active = Vec::new();
    let mut unidentified = Vec::new();
    for k in 0..order.n_terms() {
        if on_axis && FIELD_ONLY[k] {
            unidentified.push(TERM_NAMES[k]);
        } else {
            active.push(k);
        }
    }
    let m = active.len();
    if samples.len() < 3 * m {
        return Err(OpticsError::Domain(format!(
            "{} samples for {m} coefficients; need at least {}",
            samples.len(),
            3 * m
        )));
    }
    if samples.iter().any(|s| !(0.0..=1.0).contains(&s.s)) {
        return Err(OpticsError::Domain("normalized pupil radius must lie in [0, 1]".into()));
    }

    let rows = 2 * samples.len();
    let mut design = DMatrix::<f64>::zeros(rows, m);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, smp) in samples.iter().enumerate() {
        for (j, &k) in active.iter().enumerate() {
            let (tx, ty) = term(k, smp.s, smp.h, smp.theta, form);
            design[(2 * i, j)] = tx;
            design[(2 * i + 1, j)] = ty;
        }
        rhs[2 * i] = smp.x_um;
        rhs[2 * i + 1] = smp.y_um;
    }

    // column scaling
    let mut scale = vec![0.0; m];
    for j in 0..m {
        let norm = design.column(j).norm();
        if norm == 0.0 {
            return Err(OpticsError::RankDeficient(format!(
                "term {} vanishes on every sample",
                TERM_NAMES[active[j]]
            )));
        }
        scale[j] = norm;
        design.column_mut(j).scale_mut(1.0 / norm);
    }

    let normal = design.transpose() * &design;
    let eig = normal.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min().max(0.0);
    let condition_number = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };

    let (solution, used_svd) = if condition_number <= SVD_FALLBACK_CONDITION {
        let chol = normal
            .cholesky()
            .ok_or_else(|| OpticsError::RankDeficient("normal matrix not positive definite".into()))?;
        (chol.solve(&(design.transpose() * &rhs)), false)
    } else {
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= smax * RANK_TOLERANCE {
            let weakest = weakest_terms(&svd, &active);
            return Err(OpticsError::RankDeficient(format!(
                "samples cannot separate terms {weakest}"
            )));
        }
        let sol = svd
            .solve(&rhs, smax * RANK_TOLERANCE)
            .map_err(|e| OpticsError::RankDeficient(e.to_string()))?;
        (sol, true)
    };

    let fitted = &design * &solution;
    let resid = &rhs - fitted;
    let sum_sq: f64 = resid.iter().map(|r| r * r).sum();
    let residual_rms_um = (sum_sq / samples.len() as f64).sqrt();

    let mut all = [0.0; N_TERMS];
    for (j, &k) in active.iter().enumerate() {
        all[k] = solution[j] / scale[j];
    }
    Ok(FitReport {
        coefficients: AberrationCoefficients::from_vec(&all),
        residual_rms_um,
        order,
        identifiable: active.iter().map(|&k| TERM_NAMES[k]).collect(),
        unidentified,
        condition_number,
        used_svd,
    })
}

/// Names of the terms dominating the smallest right singular vector.
fn weakest_terms(svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, active: &[usize]) -> String {
    let Some(v_t) = svd.v_t.as_ref() else {
        return "?".into();
    };
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let row = v_t.row(imin);
    let peak = row.iter().map(|v| v.abs()).fold(0.0, f64::max);
    active
        .iter()
        .enumerate()
        .filter(|(j, _)| row[*j].abs() > 0.1 * peak)
        .map(|(_, &k)| TERM_NAMES[k])
        .collect::<Vec<_>>()
        .join(", ")
}

/// On-axis samples (`h = 0`) from a traced bundle at plane `z_um`, relative
/// to the axial image point.
pub fn on_axis_samples(bundle: &TracedBundle, z_um: f64) -> Vec<RaySample> {
    bundle
        .rays
        .iter()
        .zip(bundle.image_points(z_um))
        .filter_map(|(ray, pt)| {
            let [x, y] = pt?;
            let [px, py] = ray.pupil;
            Some(RaySample { s: px.hypot(py).min(1.0), h: 0.0, theta: px.atan2(py), x_um: x, y_um: y })
        })
        .collect()
}
