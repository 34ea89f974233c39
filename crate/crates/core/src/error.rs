//! Error and performance analysis of a maneuver scheme.
//!
//! Linear sources (burn magnitude, initial ROE) propagate analytically. Nonlinear
//! sources (burn epoch, initial chief elements) go through a seeded Monte-Carlo
//! run of the full pipeline. Results are quasi-nonsingular ROE in meters.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dynamics::{
    cartesian_to_oe, gamma_form, keplerian_stm_matrix, oe_to_cartesian, oe_to_roe, rtn_frame, true_anomaly_at,
    wrap_pi, Flavor, Mat6, OrbitElements, RoeForm, Vec6,
};
use crate::fault::{Fault, Result};
use crate::planner::Maneuver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    /// Fractional magnitude error common to every burn
    DvMagnitude,
    /// Common epoch shift of every burn [s]
    BurnTime,
    /// Initial quasi-nonsingular ROE [m]
    InitialRoe,
    /// Initial chief elements (a [m], e, i, Ω, ω, M [rad])
    InitialOe,
}

impl ErrorSource {
    pub fn dim(&self) -> usize {
        match self {
            ErrorSource::DvMagnitude | ErrorSource::BurnTime => 1,
            _ => 6,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ErrorSource::DvMagnitude | ErrorSource::InitialRoe)
    }
}

/// Gaussian error in one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub source: ErrorSource,
    pub mean: Vec<f64>,
    /// Row-major, dim × dim
    pub covariance: Vec<Vec<f64>>,
}

impl ErrorModel {
    pub fn scalar(source: ErrorSource, mean: f64, variance: f64) -> Self {
        ErrorModel { source, mean: vec![mean], covariance: vec![vec![variance]] }
    }

    pub fn vector(source: ErrorSource, mean: Vec6, covariance: Mat6) -> Self {
        let cov = (0..6).map(|r| (0..6).map(|c| covariance[(r, c)]).collect()).collect();
        ErrorModel { source, mean: mean.iter().cloned().collect(), covariance: cov }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.source.dim();
        if self.mean.len() != d || self.covariance.len() != d || self.covariance.iter().any(|r| r.len() != d) {
            return Err(Fault::domain(format!("{:?} error model must be {d}-dimensional", self.source)));
        }
        let m = self.cov_matrix();
        let tr = m.trace();
        if (&m - m.transpose()).amax() > 1e-12 * tr.abs().max(f64::MIN_POSITIVE) {
            return Err(Fault::domain("error covariance is not symmetric"));
        }
        let ev = m.symmetric_eigenvalues();
        if ev.iter().any(|&l| l < -1e-12 * tr.abs()) {
            return Err(Fault::domain("error covariance is not positive semi-definite"));
        }
        Ok(())
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.covariance.len();
        DMatrix::from_fn(d, d, |r, c| self.covariance[r][c])
    }

    fn mean_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.mean.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorMethod {
    Analytic,
    MonteCarlo { n: usize, seed: u64, rejected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub source: ErrorSource,
    pub mean_roe_error: [f64; 6],
    pub covariance_roe: Mat6,
    pub method: ErrorMethod,
}

impl ErrorReport {
    pub fn ranges(&self) -> CovarianceRanges {
        covariance_ranges(&self.covariance_roe)
    }
}

/// [min, max] of |variance| and |covariance| entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRanges {
    pub variance: [f64; 2],
    pub covariance: [f64; 2],
}

pub fn covariance_ranges(v: &Mat6) -> CovarianceRanges {
    let mut var = [f64::INFINITY, 0.0f64];
    let mut cov = [f64::INFINITY, 0.0f64];
    for r in 0..6 {
        let d = v[(r, r)].abs();
        var = [var[0].min(d), var[1].max(d)];
        for c in r + 1..6 {
            let o = v[(r, c)].abs();
            cov = [cov[0].min(o), cov[1].max(o)];
        }
    }
    CovarianceRanges { variance: var, covariance: cov }
}

/// Scheme under analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScenario {
    pub chief: OrbitElements,
    pub t_f: f64,
    pub maneuvers: Vec<Maneuver>,
    /// Initial quasi-nonsingular ROE [m]
    pub roe0: Vec6,
}

/// Final quasi-nonsingular ROE [m] with every burn shifted by `dt` and the chief replaced.
pub fn final_roe(chief: &OrbitElements, sc: &ErrorScenario, dt: f64, dv_scale: f64) -> Result<Vec6> {
    let n = chief.mean_motion();
    let mut out = keplerian_stm_matrix(n, sc.t_f) * sc.roe0;
    for m in &sc.maneuvers {
        let t = m.t + dt;
        let g = gamma_form(chief, true_anomaly_at(chief, t), RoeForm::QuasiNonsingular)?;
        out += keplerian_stm_matrix(n, sc.t_f - t) * (g.matrix * (m.dv() * dv_scale)) * chief.a;
    }
    Ok(out)
}

/// B = Σ Φ(t_f, t_k) Γ(t_k) δv_k [m].
pub fn magnitude_sensitivity(sc: &ErrorScenario) -> Result<Vec6> {
    let n = sc.chief.mean_motion();
    let mut b = Vec6::zeros();
    for m in &sc.maneuvers {
        let g = gamma_form(&sc.chief, true_anomaly_at(&sc.chief, m.t), RoeForm::QuasiNonsingular)?;
        b += keplerian_stm_matrix(n, sc.t_f - m.t) * (g.matrix * m.dv()) * sc.chief.a;
    }
    Ok(b)
}

fn expect_source(model: &ErrorModel, want: ErrorSource) -> Result<()> {
    if model.source != want {
        return Err(Fault::domain(format!("expected a {want:?} error model, got {:?}", model.source)));
    }
    model.validate()
}

pub fn propagate_dv_magnitude_error(sc: &ErrorScenario, model: &ErrorModel) -> Result<ErrorReport> {
    expect_source(model, ErrorSource::DvMagnitude)?;
    let b = magnitude_sensitivity(sc)?;
    let (mu, var) = (model.mean[0], model.covariance[0][0]);
    Ok(ErrorReport {
        source: model.source,
        mean_roe_error: (b * mu).into(),
        covariance_roe: b * b.transpose() * var,
        method: ErrorMethod::Analytic,
    })
}

pub fn propagate_initial_roe_error(sc: &ErrorScenario, model: &ErrorModel) -> Result<ErrorReport> {
    expect_source(model, ErrorSource::InitialRoe)?;
    let phi = keplerian_stm_matrix(sc.chief.mean_motion(), sc.t_f);
    let mu = Vec6::from_iterator(model.mean.iter().cloned());
    let v = Mat6::from_fn(|r, c| model.covariance[r][c]);
    Ok(ErrorReport {
        source: model.source,
        mean_roe_error: (phi * mu).into(),
        covariance_roe: phi * v * phi.transpose(),
        method: ErrorMethod::Analytic,
    })
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clamped).
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn draw_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, mean: &DVector<f64>, sqrt: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    mean + sqrt * z
}

/// Sample mean and covariance, summed in index order.
fn sample_stats(samples: &[Vec6]) -> (Vec6, Mat6) {
    let n = samples.len() as f64;
    let mean = samples.iter().fold(Vec6::zeros(), |acc, s| acc + s) / n;
    let cov = samples.iter().fold(Mat6::zeros(), |acc, s| {
        let d = s - mean;
        acc + d * d.transpose()
    }) / (n - 1.0);
    (mean, cov)
}

/// At most this many redraws per sample before giving up.
const MAX_REDRAWS: usize = 1000;

/// Monte-Carlo run of burn-time or chief-element errors. Draw k uses stream k of
/// the seeded generator, so results do not depend on the thread count.
pub fn propagate_nonlinear_error(sc: &ErrorScenario, model: &ErrorModel, n: usize, seed: u64) -> Result<ErrorReport> {
    model.validate()?;
    if model.source.is_linear() {
        return Err(Fault::domain("Monte-Carlo propagation is for burn-time and chief-element errors"));
    }
    if n < 2 {
        return Err(Fault::domain("Monte-Carlo needs at least two draws"));
    }
    let nominal = final_roe(&sc.chief, sc, 0.0, 1.0)?;
    let mean = model.mean_vector();
    let sqrt = psd_sqrt(&model.cov_matrix());
    let source = model.source;
    let base = sc.chief.to_array();
    let draws: Vec<Result<(Vec6, usize)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = draw_rng(seed, k);
            for tries in 0..MAX_REDRAWS {
                let x = gaussian(&mut rng, &mean, &sqrt);
                let out = match source {
                    ErrorSource::BurnTime => final_roe(&sc.chief, sc, x[0], 1.0),
                    _ => {
                        let mut el = base;
                        for j in 0..6 {
                            el[j] += x[j];
                        }
                        if el[0] <= 0.0 || el[1] < 0.0 || el[1] >= 1.0 {
                            continue;
                        }
                        let chief = OrbitElements::from_array(el, sc.chief.flavor);
                        final_roe(&chief, sc, 0.0, 1.0)
                    }
                };
                match out {
                    Ok(v) => return Ok((v - nominal, tries)),
                    Err(Fault::Domain(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Fault::numerical("error draws rejected repeatedly; covariance reaches invalid elements"))
        })
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut rejected = 0;
    for d in draws {
        let (v, r) = d?;
        samples.push(v);
        rejected += r;
    }
    let (m, v) = sample_stats(&samples);
    Ok(ErrorReport {
        source,
        mean_roe_error: m.into(),
        covariance_roe: v,
        method: ErrorMethod::MonteCarlo { n, seed, rejected },
    })
}

/// Dispatch on the model's source.
pub fn propagate_error(sc: &ErrorScenario, model: &ErrorModel, n: usize, seed: u64) -> Result<ErrorReport> {
    match model.source {
        ErrorSource::DvMagnitude => propagate_dv_magnitude_error(sc, model),
        ErrorSource::InitialRoe => propagate_initial_roe_error(sc, model),
        _ => propagate_nonlinear_error(sc, model, n, seed),
    }
}

fn element_delta(a: &OrbitElements, b: &OrbitElements) -> Vec6 {
    Vec6::new(
        a.a - b.a,
        a.e - b.e,
        a.i - b.i,
        wrap_pi(a.raan - b.raan),
        wrap_pi(a.argp - b.argp),
        wrap_pi(a.mean_anomaly - b.mean_anomaly),
    )
}

/// Covariance of the Keplerian elements implied by an inertial Cartesian covariance
/// (position [m], velocity [m/s]) about `reference`, by Monte-Carlo push-forward.
pub fn cartesian_covariance_to_elements(cov: &Mat6, reference: &OrbitElements, n: usize, seed: u64) -> Result<Mat6> {
    if n < 2 {
        return Err(Fault::domain("Monte-Carlo needs at least two draws"));
    }
    let (r0, v0) = oe_to_cartesian(reference);
    let m = DMatrix::from_fn(6, 6, |r, c| cov[(r, c)]);
    let sqrt = psd_sqrt(&m);
    let zero = DVector::zeros(6);
    let draws: Vec<Result<Vec6>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = draw_rng(seed, k);
            for _ in 0..MAX_REDRAWS {
                let x = gaussian(&mut rng, &zero, &sqrt);
                let r = r0 + Vector3::new(x[0], x[1], x[2]);
                let v = v0 + Vector3::new(x[3], x[4], x[5]);
                if let Ok(oe) = cartesian_to_oe(&r, &v, reference.flavor) {
                    return Ok(element_delta(&oe, reference));
                }
            }
            Err(Fault::numerical("Cartesian draws repeatedly produced unbound orbits"))
        })
        .collect();
    let samples = draws.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(sample_stats(&samples).1)
}

/// Deputy position and rotating-frame velocity in the chief RTN frame.
pub fn relative_rtn_state(chief: &OrbitElements, deputy: &OrbitElements) -> Vec6 {
    let (rc, vc) = oe_to_cartesian(chief);
    let (rd, vd) = oe_to_cartesian(deputy);
    let rot = rtn_frame(&rc, &vc);
    let omega = Vector3::new(0.0, 0.0, rc.cross(&vc).norm() / rc.norm_squared());
    let rr = rot * (rd - rc);
    let vr = rot * (vd - vc) - omega.cross(&rr);
    Vec6::new(rr.x, rr.y, rr.z, vr.x, vr.y, vr.z)
}

/// Jacobian of the quasi-nonsingular ROE [m] with respect to the deputy's relative
/// Cartesian state in the chief RTN frame (position [m], rotating-frame velocity [m/s]),
/// taken about `about` (the relative state; zero for a co-located deputy).
pub fn rtn_to_roe_jacobian(chief: &OrbitElements, about: &Vec6) -> Result<Mat6> {
    let (rc, vc) = oe_to_cartesian(chief);
    let rot = rtn_frame(&rc, &vc);
    let omega = Vector3::new(0.0, 0.0, rc.cross(&vc).norm() / rc.norm_squared());
    let roe_of = |x: &Vec6| -> Result<Vec6> {
        let rr = Vector3::new(x[0], x[1], x[2]);
        let vr = Vector3::new(x[3], x[4], x[5]) + omega.cross(&rr);
        let dep = cartesian_to_oe(&(rc + rot.transpose() * rr), &(vc + rot.transpose() * vr), Flavor::Osculating)?;
        Ok(oe_to_roe(chief, &dep, RoeForm::QuasiNonsingular)?.to_meters(chief.a))
    };
    let mut j = Mat6::zeros();
    for k in 0..6 {
        let h = if k < 3 { 1e-3 } else { 1e-6 };
        let mut x = Vec6::zeros();
        x[k] = h;
        let d = (roe_of(&(about + x))? - roe_of(&(about - x))?) / (2.0 * h);
        j.set_column(k, &d);
    }
    Ok(j)
}

/// ROE covariance from an RTN relative Cartesian covariance, via the linearized map.
pub fn relative_cartesian_covariance_to_roe(cov: &Mat6, chief: &OrbitElements, about: &Vec6) -> Result<Mat6> {
    let j = rtn_to_roe_jacobian(chief, about)?;
    Ok(j * cov * j.transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBox {
    pub center: [f64; 6],
    pub half_widths: [f64; 6],
    pub chi2: f64,
    pub confidence: f64,
    /// Axes with zero extent (rank-deficient covariance)
    pub degenerate_axes: Vec<usize>,
    /// Ellipsoid map: x = center + T·u over the unit sphere
    pub transform: Mat6,
}

impl ConfidenceBox {
    pub fn bounds(&self) -> [[f64; 2]; 6] {
        let mut out = [[0.0; 2]; 6];
        for j in 0..6 {
            out[j] = [self.center[j] - self.half_widths[j], self.center[j] + self.half_widths[j]];
        }
        out
    }

    pub fn contains(&self, x: &Vec6, slack: f64) -> bool {
        (0..6).all(|j| (x[j] - self.center[j]).abs() <= self.half_widths[j] * (1.0 + slack) + 1e-12)
    }
}

/// χ² quantile for six degrees of freedom.
pub fn chi_square_6(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Fault::domain("confidence must be in (0, 1)"));
    }
    let d = ChiSquared::new(6.0).map_err(|e| Fault::Internal(e.to_string()))?;
    Ok(d.inverse_cdf(confidence))
}

/// Smallest axis-aligned box around the error ellipsoid. The ellipsoid is the image
/// of the unit sphere under T = v·diag(2χ√λ) for V = v·diag(λ)·vᵀ; the extent along
/// axis j is the norm of row j of T.
pub fn confidence_box(mean: &Vec6, cov: &Mat6, confidence: f64) -> Result<ConfidenceBox> {
    let chi2 = chi_square_6(confidence)?;
    confidence_box_chi2(mean, cov, chi2, confidence)
}

pub fn confidence_box_chi2(mean: &Vec6, cov: &Mat6, chi2: f64, confidence: f64) -> Result<ConfidenceBox> {
    let tr = cov.trace();
    if (cov - cov.transpose()).amax() > 1e-9 * tr.abs().max(f64::MIN_POSITIVE) {
        return Err(Fault::domain("covariance is not symmetric"));
    }
    let eig = cov.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * tr.abs()) {
        return Err(Fault::domain("covariance is not positive semi-definite"));
    }
    let chi = chi2.sqrt();
    let scale = Vec6::from_iterator(eig.eigenvalues.iter().map(|&l| 2.0 * chi * l.max(0.0).sqrt()));
    let t = eig.eigenvectors * Mat6::from_diagonal(&scale);
    let mut half = [0.0; 6];
    for j in 0..6 {
        half[j] = t.row(j).norm();
    }
    let top = half.iter().cloned().fold(0.0, f64::max);
    let degenerate_axes = (0..6).filter(|&j| half[j] <= 1e-12 * top).collect();
    Ok(ConfidenceBox {
        center: (*mean).into(),
        half_widths: half,
        chi2,
        confidence,
        degenerate_axes,
        transform: t,
    })
}
