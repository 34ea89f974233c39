//! Absolute and relative orbital mechanics.
//!
//! Element conversions, anomaly solvers, ROE definitions, state transition
//! matrices and the control input matrix. Everything is SI internally.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::fault::{Fault, Result};

pub type Vec6 = nalgebra::Vector6<f64>;
pub type Mat6 = nalgebra::Matrix6<f64>;
pub type Mat63 = SMatrix<f64, 6, 3>;

/// Earth gravitational parameter [m^3/s^2].
pub const MU_EARTH: f64 = 3.986004418e14;
/// Earth equatorial radius [m].
pub const R_EARTH: f64 = 6378137.0;
/// Earth second zonal harmonic.
pub const J2_EARTH: f64 = 1.08262668e-3;

/// Smallest sin(i) accepted before δi_y / sin i is treated as singular.
const SIN_I_MIN: f64 = 1e-9;

pub fn wrap_two_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

pub fn wrap_pi(x: f64) -> f64 {
    let y = wrap_two_pi(x + PI) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Rotate a plane vector by `angle` (counterclockwise).
pub fn rot2(angle: f64, v: Vector2<f64>) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

// ---------------------------------------------------------------------------
// Anomalies
// ---------------------------------------------------------------------------

/// Solve Kepler's equation E - e sin E = M.
///
/// Newton iteration kept inside the bracket [M - e, M + e]; falls back to
/// bisection when a step leaves it. The returned E is on the same revolution
/// as M, so large M values give large E values.
pub fn solve_kepler(m: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) || !m.is_finite() {
        return Err(Fault::domain(format!("solve_kepler needs 0 <= e < 1 and finite M (M={m}, e={e})")));
    }
    let k = (m / TAU).round();
    let mr = m - k * TAU;
    let (mut lo, mut hi) = (mr - e, mr + e);
    let mut x = if e < 0.8 { mr + e * mr.sin() } else { mr.signum() * PI.min(mr.abs() + e) };
    x = x.clamp(lo, hi);
    for _ in 0..200 {
        let f = x - e * x.sin() - mr;
        if f.abs() < 4.0 * f64::EPSILON * (1.0 + mr.abs()) {
            return Ok(x + k * TAU);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let fp = 1.0 - e * x.cos();
        let mut xn = x - f / fp;
        if !(xn > lo && xn < hi) {
            xn = 0.5 * (lo + hi);
        }
        if xn == x || hi - lo < 1e-15 {
            return Ok(xn + k * TAU);
        }
        x = xn;
    }
    Err(Fault::numerical(format!("Kepler iteration did not converge (M={m}, e={e})")))
}

/// Kepler solve that cannot fail for validated inputs.
fn kepler(m: f64, e: f64) -> f64 {
    solve_kepler(m, e).unwrap_or(m)
}

/// True anomaly from eccentric anomaly, continuous across revolutions.
pub fn true_from_ecc(ea: f64, e: f64) -> f64 {
    let k = ((ea + PI) / TAU).floor();
    let r = ea - k * TAU;
    let nu = 2.0 * ((1.0 + e).sqrt() * (r / 2.0).sin()).atan2((1.0 - e).sqrt() * (r / 2.0).cos());
    nu + k * TAU
}

/// Eccentric anomaly from true anomaly, continuous across revolutions.
pub fn ecc_from_true(nu: f64, e: f64) -> f64 {
    let k = ((nu + PI) / TAU).floor();
    let r = nu - k * TAU;
    let ea = 2.0 * ((1.0 - e).sqrt() * (r / 2.0).sin()).atan2((1.0 + e).sqrt() * (r / 2.0).cos());
    ea + k * TAU
}

pub fn true_from_mean(m: f64, e: f64) -> f64 {
    true_from_ecc(kepler(m, e), e)
}

pub fn mean_from_true(nu: f64, e: f64) -> f64 {
    let ea = ecc_from_true(nu, e);
    ea - e * ea.sin()
}

// ---------------------------------------------------------------------------
// Absolute elements
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    #[default]
    Mean,
    Osculating,
}

/// Classical Keplerian elements of one spacecraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    /// Semi-major axis [m]
    pub a: f64,
    /// Eccentricity
    pub e: f64,
    /// Inclination [rad]
    pub i: f64,
    /// Right ascension of the ascending node [rad]
    pub raan: f64,
    /// Argument of perigee [rad]
    pub argp: f64,
    /// Mean anomaly [rad]
    pub mean_anomaly: f64,
    pub flavor: Flavor,
}

impl OrbitElements {
    /// Mean elements with angles normalized to [0, 2π).
    pub fn new(a: f64, e: f64, i: f64, raan: f64, argp: f64, mean_anomaly: f64) -> Result<Self> {
        let oe = OrbitElements {
            a,
            e,
            i,
            raan: wrap_two_pi(raan),
            argp: wrap_two_pi(argp),
            mean_anomaly: wrap_two_pi(mean_anomaly),
            flavor: Flavor::Mean,
        };
        oe.validate()?;
        Ok(oe)
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Fault::domain(format!("semi-major axis must be positive (a={})", self.a)));
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(Fault::domain(format!("eccentricity must satisfy 0 <= e < 1 (e={})", self.e)));
        }
        if !(0.0..=PI).contains(&self.i) {
            return Err(Fault::domain(format!("inclination must lie in [0, pi] (i={})", self.i)));
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        (1.0 - self.e * self.e).sqrt()
    }

    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.a.powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        TAU / self.mean_motion()
    }

    pub fn semi_latus(&self) -> f64 {
        self.a * (1.0 - self.e * self.e)
    }

    pub fn true_anomaly(&self) -> f64 {
        true_from_mean(self.mean_anomaly, self.e)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.e, self.i, self.raan, self.argp, self.mean_anomaly]
    }

    /// Build from raw values without normalizing angles.
    pub fn from_array(v: [f64; 6], flavor: Flavor) -> Self {
        OrbitElements { a: v[0], e: v[1], i: v[2], raan: v[3], argp: v[4], mean_anomaly: v[5], flavor }
    }

    pub fn normalized(mut self) -> Self {
        self.raan = wrap_two_pi(self.raan);
        self.argp = wrap_two_pi(self.argp);
        self.mean_anomaly = wrap_two_pi(self.mean_anomaly);
        self
    }
}

/// Continuous (unwrapped) chief true anomaly at time t, unperturbed motion.
pub fn true_anomaly_at(chief0: &OrbitElements, t: f64) -> f64 {
    true_from_mean(chief0.mean_anomaly + chief0.mean_motion() * t, chief0.e)
}

/// Time since t0 at which the unperturbed chief reaches the continuous true anomaly `nu`.
pub fn time_of_true_anomaly(chief0: &OrbitElements, nu: f64) -> f64 {
    (mean_from_true(nu, chief0.e) - chief0.mean_anomaly) / chief0.mean_motion()
}

fn perifocal_to_inertial(i: f64, raan: f64, argp: f64) -> Matrix3<f64> {
    let (so, co) = raan.sin_cos();
    let (si, ci) = i.sin_cos();
    let (sw, cw) = argp.sin_cos();
    Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    )
}

/// Inertial position [m] and velocity [m/s].
pub fn oe_to_cartesian(oe: &OrbitElements) -> (Vector3<f64>, Vector3<f64>) {
    let nu = oe.true_anomaly();
    let p = oe.semi_latus();
    let r = p / (1.0 + oe.e * nu.cos());
    let rp = Vector3::new(r * nu.cos(), r * nu.sin(), 0.0);
    let vp = (MU_EARTH / p).sqrt() * Vector3::new(-nu.sin(), oe.e + nu.cos(), 0.0);
    let q = perifocal_to_inertial(oe.i, oe.raan, oe.argp);
    (q * rp, q * vp)
}

/// Inverse of [`oe_to_cartesian`]. Equatorial orbits get Ω = 0, circular ones ω = 0.
pub fn cartesian_to_oe(r: &Vector3<f64>, v: &Vector3<f64>, flavor: Flavor) -> Result<OrbitElements> {
    let rn = r.norm();
    let h = r.cross(v);
    let hn = h.norm();
    if rn == 0.0 || hn == 0.0 {
        return Err(Fault::domain("degenerate Cartesian state (zero radius or angular momentum)"));
    }
    let ev = v.cross(&h) / MU_EARTH - r / rn;
    let e = ev.norm();
    let energy = v.norm_squared() / 2.0 - MU_EARTH / rn;
    if energy >= 0.0 || e >= 1.0 {
        return Err(Fault::domain("Cartesian state is not a bound orbit"));
    }
    let a = -MU_EARTH / (2.0 * energy);
    let i = (h.z / hn).clamp(-1.0, 1.0).acos();
    let node = Vector3::new(-h.y, h.x, 0.0);
    let nn = node.norm();
    let (raan, node_dir) = if nn > 1e-12 * hn {
        (node.y.atan2(node.x), node / nn)
    } else {
        (0.0, Vector3::x())
    };
    let hhat = h / hn;
    let q = hhat.cross(&node_dir);
    let (argp, peri_dir) = if e > 1e-12 {
        let w = ev.dot(&q).atan2(ev.dot(&node_dir));
        (w, ev / e)
    } else {
        (0.0, node_dir)
    };
    let pq = hhat.cross(&peri_dir);
    let nu = r.dot(&pq).atan2(r.dot(&peri_dir));
    let m = mean_from_true(nu, e);
    Ok(OrbitElements {
        a,
        e,
        i,
        raan: wrap_two_pi(raan),
        argp: wrap_two_pi(argp),
        mean_anomaly: wrap_two_pi(m),
        flavor,
    })
}

/// Rows are the radial, along-track and normal unit vectors.
pub fn rtn_frame(r: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    let rh = r.normalize();
    let nh = r.cross(v).normalize();
    let th = nh.cross(&rh);
    Matrix3::from_rows(&[rh.transpose(), th.transpose(), nh.transpose()])
}

// ---------------------------------------------------------------------------
// Relative orbit elements
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoeForm {
    #[default]
    QuasiNonsingular,
    Modified,
}

/// Dimensionless ROE. Components 3-4 hold δe or δe' depending on `form`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoeState {
    pub da: f64,
    pub dlambda_e: f64,
    pub dex: f64,
    pub dey: f64,
    pub dix: f64,
    pub diy: f64,
    pub form: RoeForm,
}

impl RoeState {
    pub fn zero(form: RoeForm) -> Self {
        Self::from_vector(&Vec6::zeros(), form)
    }

    pub fn from_vector(v: &Vec6, form: RoeForm) -> Self {
        RoeState { da: v[0], dlambda_e: v[1], dex: v[2], dey: v[3], dix: v[4], diy: v[5], form }
    }

    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(self.da, self.dlambda_e, self.dex, self.dey, self.dix, self.diy)
    }

    /// From a·δα in meters.
    pub fn from_meters(v: &Vec6, a: f64, form: RoeForm) -> Self {
        Self::from_vector(&(v / a), form)
    }

    pub fn to_meters(&self, a: f64) -> Vec6 {
        self.to_vector() * a
    }
}

fn check_chief(chief: &OrbitElements, form: RoeForm) -> Result<()> {
    chief.validate()?;
    if chief.i.sin().abs() < SIN_I_MIN {
        return Err(Fault::domain("chief inclination is singular for the ROE definition (sin i ~ 0)"));
    }
    if form == RoeForm::Modified && chief.e <= 0.0 {
        return Err(Fault::domain(
            "chief eccentricity is zero: the modified form is undefined; use the quasi-nonsingular planar limit",
        ));
    }
    Ok(())
}

/// Exact nonlinear ROE of `deputy` relative to `chief`.
pub fn oe_to_roe(chief: &OrbitElements, deputy: &OrbitElements, form: RoeForm) -> Result<RoeState> {
    check_chief(chief, form)?;
    deputy.validate()?;
    let eta = chief.eta();
    let ci = chief.i.cos();
    let d_raan = wrap_pi(deputy.raan - chief.raan);
    let d_argp = wrap_pi(deputy.argp - chief.argp);
    let d_m = wrap_pi(deputy.mean_anomaly - chief.mean_anomaly);
    let da = (deputy.a - chief.a) / chief.a;
    let dl = d_m + eta * (d_argp + d_raan * ci);
    let dix = deputy.i - chief.i;
    let diy = d_raan * chief.i.sin();
    let (dex, dey) = match form {
        RoeForm::QuasiNonsingular => (
            deputy.e * deputy.argp.cos() - chief.e * chief.argp.cos(),
            deputy.e * deputy.argp.sin() - chief.e * chief.argp.sin(),
        ),
        RoeForm::Modified => (deputy.e - chief.e, d_argp + d_raan * ci),
    };
    Ok(RoeState { da, dlambda_e: dl, dex, dey, dix, diy, form })
}

/// Deputy elements recovered from chief elements and ROE.
pub fn roe_to_deputy(chief: &OrbitElements, roe: &RoeState) -> Result<OrbitElements> {
    check_chief(chief, roe.form)?;
    let eta = chief.eta();
    let ci = chief.i.cos();
    let a = chief.a * (1.0 + roe.da);
    let i = chief.i + roe.dix;
    let d_raan = roe.diy / chief.i.sin();
    let (e, d_argp) = match roe.form {
        RoeForm::QuasiNonsingular => {
            let ex = chief.e * chief.argp.cos() + roe.dex;
            let ey = chief.e * chief.argp.sin() + roe.dey;
            let e = ex.hypot(ey);
            let w = if e > 0.0 { ey.atan2(ex) } else { chief.argp };
            (e, wrap_pi(w - chief.argp))
        }
        RoeForm::Modified => (chief.e + roe.dex, roe.dey - d_raan * ci),
    };
    let d_m = roe.dlambda_e - eta * (d_argp + d_raan * ci);
    let dep = OrbitElements {
        a,
        e,
        i,
        raan: wrap_two_pi(chief.raan + d_raan),
        argp: wrap_two_pi(chief.argp + d_argp),
        mean_anomaly: wrap_two_pi(chief.mean_anomaly + d_m),
        flavor: chief.flavor,
    };
    dep.validate()?;
    Ok(dep)
}

/// ∂δα/∂(a, e, i, Ω, ω, M) of the deputy, evaluated at deputy = chief.
pub fn roe_jacobian(chief: &OrbitElements, form: RoeForm) -> Mat6 {
    let eta = chief.eta();
    let (si, ci) = chief.i.sin_cos();
    let (sw, cw) = chief.argp.sin_cos();
    let e = chief.e;
    let mut j = Mat6::zeros();
    j[(0, 0)] = 1.0 / chief.a;
    j[(1, 3)] = eta * ci;
    j[(1, 4)] = eta;
    j[(1, 5)] = 1.0;
    match form {
        RoeForm::QuasiNonsingular => {
            j[(2, 1)] = cw;
            j[(2, 4)] = -e * sw;
            j[(3, 1)] = sw;
            j[(3, 4)] = e * cw;
        }
        RoeForm::Modified => {
            j[(2, 1)] = 1.0;
            j[(3, 3)] = ci;
            j[(3, 4)] = 1.0;
        }
    }
    j[(4, 2)] = 1.0;
    j[(5, 3)] = si;
    j
}

/// Analytic inverse of [`roe_jacobian`].
pub fn roe_jacobian_inverse(chief: &OrbitElements, form: RoeForm) -> Result<Mat6> {
    let eta = chief.eta();
    let (si, ci) = chief.i.sin_cos();
    if si.abs() < SIN_I_MIN {
        return Err(Fault::domain("chief inclination is singular (sin i ~ 0)"));
    }
    let (sw, cw) = chief.argp.sin_cos();
    let e = chief.e;
    let mut k = Mat6::zeros();
    k[(0, 0)] = chief.a;
    k[(2, 4)] = 1.0;
    k[(3, 5)] = 1.0 / si;
    k[(5, 1)] = 1.0;
    k[(5, 5)] = -eta * ci / si;
    match form {
        RoeForm::QuasiNonsingular => {
            if e <= 0.0 {
                return Err(Fault::domain("chief eccentricity is zero: argument of perigee is unobservable"));
            }
            k[(1, 2)] = cw;
            k[(1, 3)] = sw;
            k[(4, 2)] = -sw / e;
            k[(4, 3)] = cw / e;
            k[(5, 2)] = eta * sw / e;
            k[(5, 3)] = -eta * cw / e;
        }
        RoeForm::Modified => {
            k[(1, 2)] = 1.0;
            k[(4, 3)] = 1.0;
            k[(4, 5)] = -ci / si;
            k[(5, 3)] = -eta;
            k[(5, 5)] = 0.0;
        }
    }
    Ok(k)
}

/// Linear map taking a small ROE in `from` form to the `to` form at `chief`.
pub fn form_transform(chief: &OrbitElements, from: RoeForm, to: RoeForm) -> Result<Mat6> {
    if from == to {
        return Ok(Mat6::identity());
    }
    Ok(roe_jacobian(chief, to) * roe_jacobian_inverse(chief, from)?)
}

// ---------------------------------------------------------------------------
// J2 secular motion and state transition matrices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularRates {
    pub raan_dot: f64,
    pub argp_dot: f64,
    pub mean_anomaly_dot: f64,
}

fn j2_kappa(oe: &OrbitElements, j2: f64) -> f64 {
    let eta = oe.eta();
    0.75 * j2 * R_EARTH * R_EARTH * MU_EARTH.sqrt() / (oe.a.powf(3.5) * eta.powi(4))
}

/// Mean-element secular rates under J2.
pub fn secular_rates(oe: &OrbitElements, j2: f64) -> SecularRates {
    let k = j2_kappa(oe, j2);
    let ci = oe.i.cos();
    SecularRates {
        raan_dot: -2.0 * k * ci,
        argp_dot: k * (5.0 * ci * ci - 1.0),
        mean_anomaly_dot: oe.mean_motion() + k * oe.eta() * (3.0 * ci * ci - 1.0),
    }
}

/// ∂(Ω̇, ω̇, Ṁ)/∂(a, e, i) placed in a 6×6 matrix over (a, e, i, Ω, ω, M).
pub fn secular_rate_jacobian(oe: &OrbitElements, j2: f64) -> Mat6 {
    let k = j2_kappa(oe, j2);
    let (a, e, eta) = (oe.a, oe.e, oe.eta());
    let (si, ci) = oe.i.sin_cos();
    let q = 5.0 * ci * ci - 1.0;
    let p = 3.0 * ci * ci - 1.0;
    let dk_da = -3.5 * k / a;
    let dk_de = 4.0 * e * k / (eta * eta);
    let mut m = Mat6::zeros();
    m[(3, 0)] = -2.0 * ci * dk_da;
    m[(3, 1)] = -2.0 * ci * dk_de;
    m[(3, 2)] = 2.0 * k * si;
    m[(4, 0)] = q * dk_da;
    m[(4, 1)] = q * dk_de;
    m[(4, 2)] = -10.0 * k * ci * si;
    m[(5, 0)] = -1.5 * oe.mean_motion() / a + eta * p * dk_da;
    m[(5, 1)] = 3.0 * k * p * e / eta;
    m[(5, 2)] = -6.0 * k * eta * ci * si;
    m
}

/// Mean elements after `tau` seconds of secular motion.
pub fn propagate_mean(oe: &OrbitElements, tau: f64, j2: f64) -> OrbitElements {
    let r = secular_rates(oe, j2);
    OrbitElements {
        raan: wrap_two_pi(oe.raan + r.raan_dot * tau),
        argp: wrap_two_pi(oe.argp + r.argp_dot * tau),
        mean_anomaly: wrap_two_pi(oe.mean_anomaly + r.mean_anomaly_dot * tau),
        ..*oe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StmModel {
    #[default]
    Keplerian,
    J2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stm {
    pub matrix: Mat6,
    pub tau: f64,
    pub model: StmModel,
}

/// Keplerian ROE transition: identity plus the along-track drift term.
pub fn keplerian_stm_matrix(n: f64, tau: f64) -> Mat6 {
    let mut m = Mat6::identity();
    m[(1, 0)] = -1.5 * n * tau;
    m
}

/// ROE state transition matrix over `tau` seconds from the chief at t0.
pub fn stm(chief0: &OrbitElements, tau: f64, model: StmModel, form: RoeForm) -> Result<Stm> {
    match model {
        StmModel::Keplerian => {
            if tau < 0.0 {
                return Err(Fault::domain("stm span must be nonnegative"));
            }
            Ok(Stm { matrix: keplerian_stm_matrix(chief0.mean_motion(), tau), tau, model })
        }
        StmModel::J2 => stm_with_j2(chief0, tau, form, J2_EARTH),
    }
}

/// J2 secular transition built from the linearized element drift.
///
/// Φ = J(t_f)·(I + τ·A)·J(t_0)⁻¹ where J is the ROE Jacobian with respect to the
/// deputy elements and A the Jacobian of the secular rates.
pub fn stm_with_j2(chief0: &OrbitElements, tau: f64, form: RoeForm, j2: f64) -> Result<Stm> {
    if tau < 0.0 {
        return Err(Fault::domain("stm span must be nonnegative"));
    }
    check_chief(chief0, form)?;
    let chief_f = propagate_mean(chief0, tau, j2);
    let j0_inv = roe_jacobian_inverse(chief0, form)?;
    let jf = roe_jacobian(&chief_f, form);
    let a = secular_rate_jacobian(chief0, j2);
    let matrix = jf * j0_inv + (jf * a * j0_inv) * tau;
    Ok(Stm { matrix, tau, model: StmModel::J2 })
}

// ---------------------------------------------------------------------------
// Control input
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInputMatrix {
    /// Maps an RTN impulse [m/s] to a dimensionless ROE change
    pub matrix: Mat63,
    pub nu: f64,
    pub theta: f64,
}

/// Control input matrix of the modified ROE at true anomaly `nu`.
pub fn gamma(chief: &OrbitElements, nu: f64) -> Result<ControlInputMatrix> {
    check_chief(chief, RoeForm::Modified)?;
    let (e, eta) = (chief.e, chief.eta());
    let (s, c) = nu.sin_cos();
    let k = 1.0 + e * c;
    let theta = nu + chief.argp;
    let (st, ct) = theta.sin_cos();
    let na = chief.mean_motion() * chief.a;
    #[rustfmt::skip]
    let g = Mat63::new(
        2.0 * e * s / eta,   2.0 * k / eta,                         0.0,
        -2.0 * eta * eta / k, 0.0,                                  0.0,
        eta * s,             eta * (e + c * (2.0 + e * c)) / k,     0.0,
        -eta / e * c,        eta / e * s * (2.0 + e * c) / k,       0.0,
        0.0,                 0.0,                                   eta * ct / k,
        0.0,                 0.0,                                   eta * st / k,
    ) / na;
    Ok(ControlInputMatrix { matrix: g, nu, theta })
}

/// Control input matrix in either ROE form.
pub fn gamma_form(chief: &OrbitElements, nu: f64, form: RoeForm) -> Result<ControlInputMatrix> {
    let g = gamma(chief, nu)?;
    match form {
        RoeForm::Modified => Ok(g),
        RoeForm::QuasiNonsingular => {
            let t = form_transform(chief, RoeForm::Modified, RoeForm::QuasiNonsingular)?;
            Ok(ControlInputMatrix { matrix: t * g.matrix, ..g })
        }
    }
}

/// Control input in the planning frame: rows (aδa, aδλ, aẽ_x, aẽ_y, aĩ_x, aĩ_y),
/// meters per m/s. The eccentricity and inclination rows are rotated by -ω, so
/// they depend on ν only.
pub fn gamma_tilde(chief: &OrbitElements, nu: f64) -> Mat63 {
    let (e, eta) = (chief.e, chief.eta());
    let (s, c) = nu.sin_cos();
    let k = 1.0 + e * c;
    let n = chief.mean_motion();
    #[rustfmt::skip]
    let g = Mat63::new(
        2.0 * e * s / eta,    2.0 * k / eta,                       0.0,
        -2.0 * eta * eta / k, 0.0,                                 0.0,
        eta * s,              eta * (e + c * (2.0 + e * c)) / k,   0.0,
        -eta * c,             eta * s * (2.0 + e * c) / k,         0.0,
        0.0,                  0.0,                                 eta * c / k,
        0.0,                  0.0,                                 eta * s / k,
    );
    g / n
}

// ---------------------------------------------------------------------------
// Pseudo-state
// ---------------------------------------------------------------------------

/// Map between native ROE (in meters) and the planning frame.
///
/// Quasi-nonsingular eccentricity vectors are rotated by -ω. Modified ones use
/// (δe'_x, e·δe'_y). Inclination vectors are always rotated by -ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TildeMap {
    pub form: RoeForm,
    pub e: f64,
    pub argp: f64,
}

impl TildeMap {
    pub fn new(chief: &OrbitElements, form: RoeForm) -> Self {
        TildeMap { form, e: chief.e, argp: chief.argp }
    }

    pub fn to_tilde(&self, v: &Vec6) -> Vec6 {
        let ev = match self.form {
            RoeForm::QuasiNonsingular => rot2(-self.argp, Vector2::new(v[2], v[3])),
            RoeForm::Modified => Vector2::new(v[2], self.e * v[3]),
        };
        let iv = rot2(-self.argp, Vector2::new(v[4], v[5]));
        Vec6::new(v[0], v[1], ev.x, ev.y, iv.x, iv.y)
    }

    pub fn from_tilde(&self, t: &Vec6) -> Vec6 {
        let ev = match self.form {
            RoeForm::QuasiNonsingular => rot2(self.argp, Vector2::new(t[2], t[3])),
            RoeForm::Modified => Vector2::new(t[2], t[3] / self.e),
        };
        let iv = rot2(self.argp, Vector2::new(t[4], t[5]));
        Vec6::new(t[0], t[1], ev.x, ev.y, iv.x, iv.y)
    }
}

/// Control target aΔδα = a·(δα_f − Φ·δα_0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoState {
    /// Native-form pseudo-state [m]
    pub value: Vec6,
    /// Planning-frame pseudo-state [m]
    pub tilde: Vec6,
    pub form: RoeForm,
    /// ω used for the tilde rotation [rad]
    pub rotation_angle: f64,
    pub map: TildeMap,
}

impl PseudoState {
    pub fn from_native(value: Vec6, chief: &OrbitElements, form: RoeForm) -> Self {
        let map = TildeMap::new(chief, form);
        PseudoState { value, tilde: map.to_tilde(&value), form, rotation_angle: chief.argp, map }
    }

    pub fn from_tilde(tilde: Vec6, chief: &OrbitElements, form: RoeForm) -> Self {
        let map = TildeMap::new(chief, form);
        PseudoState { value: map.from_tilde(&tilde), tilde, form, rotation_angle: chief.argp, map }
    }

    pub fn da(&self) -> f64 {
        self.tilde[0]
    }

    pub fn dl(&self) -> f64 {
        self.tilde[1]
    }

    pub fn e_tilde(&self) -> Vector2<f64> {
        Vector2::new(self.tilde[2], self.tilde[3])
    }

    pub fn i_tilde(&self) -> Vector2<f64> {
        Vector2::new(self.tilde[4], self.tilde[5])
    }

    /// (aΔδa, aΔδλ, aΔδẽ_x, aΔδẽ_y)
    pub fn in_plane(&self) -> [f64; 4] {
        [self.tilde[0], self.tilde[1], self.tilde[2], self.tilde[3]]
    }

    pub fn out_of_plane(&self) -> [f64; 2] {
        [self.tilde[4], self.tilde[5]]
    }
}

/// Pseudo-state for a reconfiguration from `roe0` to `roe_f` over `t` seconds.
pub fn pseudo_state(
    roe0: &RoeState,
    roe_f: &RoeState,
    chief0: &OrbitElements,
    t: f64,
    model: StmModel,
) -> Result<PseudoState> {
    if roe0.form != roe_f.form {
        return Err(Fault::domain("initial and final ROE must use the same form"));
    }
    let phi = stm(chief0, t, model, roe0.form)?;
    let value = (roe_f.to_vector() - phi.matrix * roe0.to_vector()) * chief0.a;
    Ok(PseudoState::from_native(value, chief0, roe0.form))
}
