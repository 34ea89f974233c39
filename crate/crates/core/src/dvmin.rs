//! Reachable delta-v minima per plane and dominance classification.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{mean_from_true, true_anomaly_at, OrbitElements, PseudoState};
use crate::fault::{Fault, Result};
use crate::reachset::{de_profile, de_tip, disconnection_angles, param_dadl_dir, param_di};

/// Open bracket offset at the apsides.
const EPS_BRACKET: f64 = 1e-9;
/// Sign-scan subdivisions per half-orbit when bracketing ν*.
const NU_SCAN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantPlane {
    De,
    Da,
    Dl,
    Di,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantCase {
    DeGeneral,
    DeXZero,
    DeYZero,
    Da,
    DlTransition,
    Dl,
    DlExtended,
    DiConnected,
    DiAntipodal,
    DiDisconnected,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichRoot {
    First,
    Second,
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Safeguarded Newton on a sign-changing bracket; Newton steps use a
/// secant slope and fall back to bisection when they leave the bracket.
pub(crate) fn bracketed_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..250 {
        let fx = f(x);
        if fx.abs() <= ftol || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let h = 1e-7 * (hi - lo).max(1e-9);
        let d = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut xn = if d != 0.0 { x - fx / d } else { f64::NAN };
        if !(xn > lo && xn < hi) {
            xn = 0.5 * (lo + hi);
        }
        x = xn;
    }
    Some(x)
}

/// Golden-section maximization on [lo, hi].
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

// ---------------------------------------------------------------------------
// Relative eccentricity plane
// ---------------------------------------------------------------------------

/// One optimal burn location per orbit phase in the ẽ plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeRoot {
    /// True anomaly in [0, 2π)
    pub nu: f64,
    /// ẽ-plane point of the unit optimal impulse [m per m/s]
    pub tip: [f64; 2],
    /// Signed unit (δv_r, δv_t) pointing the tip along the target
    pub dv_unit: [f64; 2],
    /// ‖tip‖ relative to the primary root
    pub reach: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeSolution {
    pub dv_min: f64,
    pub case: DominantCase,
    /// Ordered by ν
    pub roots: Vec<DeRoot>,
    /// Index into `roots` of the root that sets dv_min
    pub primary: usize,
}

fn de_roots(target: Vector2<f64>, chief: &OrbitElements) -> Result<Vec<DeRoot>> {
    let e = chief.e;
    if target.y == 0.0 {
        // straight tangential burns at perigee and apogee
        let s = target.x.signum();
        let mk = |nu: f64, dvt: f64| {
            let tip = de_tip(nu, chief);
            let sgn = dvt / de_profile(nu, e).y;
            DeRoot { nu, tip: [tip.x * sgn, tip.y * sgn], dv_unit: [0.0, dvt], reach: 1.0 }
        };
        return Ok(vec![mk(0.0, s), mk(PI, -s)]);
    }
    let t = if target.y < 0.0 { -target } else { target };
    let scale = t.norm();
    let f = |nu: f64| {
        let p = de_tip(nu, chief);
        p.y * t.x - p.x * t.y
    };
    let mut roots = Vec::new();
    for (lo, hi) in [(EPS_BRACKET, PI - EPS_BRACKET), (PI + EPS_BRACKET, TAU - EPS_BRACKET)] {
        let mut best: Option<(f64, f64)> = None;
        let step = (hi - lo) / NU_SCAN as f64;
        let mut a = lo;
        let mut fa = f(a);
        for j in 1..=NU_SCAN {
            let b = if j == NU_SCAN { hi } else { lo + step * j as f64 };
            let fb = f(b);
            if fa == 0.0 || fa.signum() != fb.signum() {
                let ftol = 1e-12 * scale * de_tip(a, chief).norm();
                if let Some(r) = bracketed_root(&f, a, b, ftol) {
                    let norm = de_tip(r, chief).norm();
                    if best.map_or(true, |(_, bn)| norm > bn) {
                        best = Some((r, norm));
                    }
                }
            }
            a = b;
            fa = fb;
        }
        let (r, _) = best.ok_or_else(|| {
            Fault::Internal(format!("no phase-alignment root in ({lo:.6}, {hi:.6}) for target {:?}", target))
        })?;
        roots.push(r);
    }
    let tips: Vec<Vector2<f64>> = roots.iter().map(|&r| de_tip(r, chief)).collect();
    let big = tips.iter().map(|p| p.norm()).fold(0.0, f64::max);
    Ok(roots
        .iter()
        .zip(&tips)
        .map(|(&nu, tip)| {
            let sgn = tip.dot(&target).signum();
            let u = de_profile(nu, e) * sgn;
            DeRoot { nu, tip: [tip.x * sgn, tip.y * sgn], dv_unit: [u.x, u.y], reach: tip.norm() / big }
        })
        .collect())
}

/// Burn true anomaly aligning the optimal single-impulse ẽ change with the target.
pub fn solve_nu_star(target: &PseudoState, chief: &OrbitElements, which: WhichRoot) -> Result<f64> {
    let t = target.e_tilde();
    if t.norm() == 0.0 {
        return Err(Fault::domain("ν* is undefined for a zero ẽ target"));
    }
    let roots = de_roots(t, chief)?;
    Ok(match which {
        WhichRoot::First => roots[0].nu,
        WhichRoot::Second => roots[1].nu,
    })
}

/// Minimum cost to reach the ẽ part of `target`.
pub fn dvmin_de(target: &PseudoState, chief: &OrbitElements) -> Result<DeSolution> {
    dvmin_de_vec(target.e_tilde(), chief)
}

pub fn dvmin_de_vec(t: Vector2<f64>, chief: &OrbitElements) -> Result<DeSolution> {
    if t.norm() == 0.0 {
        return Ok(DeSolution { dv_min: 0.0, case: DominantCase::Zero, roots: vec![], primary: 0 });
    }
    if chief.e <= 0.0 {
        return Err(Fault::domain("eccentric-orbit minima need e > 0 (near-circular case is out of scope)"));
    }
    let roots = de_roots(t, chief)?;
    let (primary, tip) = roots
        .iter()
        .enumerate()
        .map(|(k, r)| (k, Vector2::new(r.tip[0], r.tip[1])))
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    let case = if t.y == 0.0 {
        DominantCase::DeYZero
    } else if t.x == 0.0 {
        DominantCase::DeXZero
    } else {
        DominantCase::DeGeneral
    };
    Ok(DeSolution { dv_min: t.norm() / tip.norm(), case, roots, primary })
}

// ---------------------------------------------------------------------------
// Relative semi-major axis / mean longitude plane
// ---------------------------------------------------------------------------

/// Anchor pseudo-states [aΔδa, aΔδλ] of unit burns, in meters per m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoints {
    pub dd0: [f64; 2],
    pub ddk2pi: [f64; 2],
    pub ddt: Option<[f64; 2]>,
    pub ddf: [f64; 2],
    /// True anomalies of the anchor burns
    pub nu0: f64,
    pub nu_k2pi: f64,
    pub nu_t: Option<f64>,
    pub nu_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DadlSolution {
    pub dv_min: f64,
    /// Pure δa bound |aΔδa|·ηn/(2(1+e))
    pub dv_da: f64,
    pub case: DominantCase,
    pub anchors: Option<AnchorPoints>,
    /// Tabulated closed-form value for the δλ subcases, for comparison
    pub table_formula: Option<f64>,
    /// Supporting-line normal (λ, a) at the optimum
    pub support_normal: [f64; 2],
}

/// Context shared by the δa/δλ evaluations of one scenario.
pub(crate) struct DadlGeom<'a> {
    pub chief: &'a OrbitElements,
    pub t_f: f64,
    pub m_f: f64,
    pub n: f64,
}

impl<'a> DadlGeom<'a> {
    pub fn new(chief: &'a OrbitElements, t_f: f64) -> Self {
        let n = chief.mean_motion();
        DadlGeom { chief, t_f, m_f: chief.mean_anomaly + n * t_f, n }
    }

    /// Columns (radial, tangential) mapping an impulse at ν to (λ, a).
    pub fn matrix_at_nu(&self, nu: f64) -> Matrix2<f64> {
        let dm = self.m_f - mean_from_true(nu, self.chief.e);
        let r = param_dadl_dir(nu, Vector2::new(1.0, 0.0), self.chief, dm);
        let t = param_dadl_dir(nu, Vector2::new(0.0, 1.0), self.chief, dm);
        Matrix2::new(r.x, t.x, r.y, t.y)
    }

    pub fn matrix_at_t(&self, t: f64) -> Matrix2<f64> {
        self.matrix_at_nu(true_anomaly_at(self.chief, t))
    }

    /// (a, λ) of a burn along the flight-path direction (max-δa direction) at ν.
    pub fn flight_path_point(&self, nu: f64, sign: f64) -> [f64; 2] {
        let e = self.chief.e;
        let (s, c) = nu.sin_cos();
        let u = Vector2::new(e * s, 1.0 + e * c) / (e * e + 2.0 * e * c + 1.0).sqrt() * sign;
        let p = self.matrix_at_nu(nu) * u;
        [p.y, p.x]
    }

    fn support(&self, grid: &[(f64, Matrix2<f64>)], m: Vector2<f64>) -> f64 {
        let vals: Vec<f64> = grid.iter().map(|(_, g)| (g.transpose() * m).norm()).collect();
        let top = vals.iter().cloned().fold(0.0, f64::max);
        let mut best = top;
        let dt = if grid.len() > 1 { grid[1].0 - grid[0].0 } else { 0.0 };
        for (j, &v) in vals.iter().enumerate() {
            let left_ok = j == 0 || vals[j - 1] <= v;
            let right_ok = j + 1 == vals.len() || vals[j + 1] <= v;
            if left_ok && right_ok && v >= 0.999 * top && dt > 0.0 {
                let lo = (grid[j].0 - dt).max(0.0);
                let hi = (grid[j].0 + dt).min(self.t_f);
                let (_, fv) = golden_max(|t| (self.matrix_at_t(t).transpose() * m).norm(), lo, hi, 60);
                best = best.max(fv);
            }
        }
        best
    }

    /// Exact gauge of `x` = (λ, a) with respect to S*(1, T) in this plane.
    pub fn gauge(&self, x: Vector2<f64>) -> (f64, Vector2<f64>) {
        if x.norm() == 0.0 {
            return (0.0, Vector2::new(0.0, 1.0));
        }
        let orbits = self.t_f * self.n / TAU;
        let nt = ((1024.0 * orbits).ceil() as usize).max(512);
        let grid: Vec<(f64, Matrix2<f64>)> = (0..=nt)
            .map(|k| {
                let t = self.t_f * k as f64 / nt as f64;
                (t, self.matrix_at_t(t))
            })
            .collect();
        let ratio = |phi: f64| {
            let m = Vector2::new(phi.cos(), phi.sin());
            let h = grid.iter().map(|(_, g)| (g.transpose() * m).norm()).fold(0.0, f64::max);
            m.dot(&x).abs() / h
        };
        let nphi = 720;
        let dphi = PI / nphi as f64;
        let mut cands: Vec<(f64, f64)> = (0..nphi).map(|j| (j as f64 * dphi, ratio(j as f64 * dphi))).collect();
        cands.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut best = (0.0, Vector2::new(0.0, 1.0));
        for &(phi, _) in cands.iter().take(3) {
            let exact = |p: f64| {
                let m = Vector2::new(p.cos(), p.sin());
                m.dot(&x).abs() / self.support(&grid, m)
            };
            let (p, _) = golden_max(|p| ratio(p), phi - dphi, phi + dphi, 50);
            let v = exact(p);
            if v > best.0 {
                best = (v, Vector2::new(p.cos(), p.sin()));
            }
        }
        best
    }
}

/// δa/δλ plane anchors for a window [0, T]. None when no perigee falls in the window.
pub fn anchor_points(chief: &OrbitElements, t_f: f64) -> Option<AnchorPoints> {
    let g = DadlGeom::new(chief, t_f);
    let nu_start = true_anomaly_at(chief, 0.0);
    let nu_f = true_anomaly_at(chief, t_f);
    let nu0 = (nu_start / TAU).ceil() * TAU;
    let nu_k2pi = (nu_f / TAU).floor() * TAU;
    if nu0 > nu_f {
        return None;
    }
    let tang = |nu: f64| {
        let p = g.matrix_at_nu(nu) * Vector2::new(0.0, 1.0);
        [p.y, p.x]
    };
    let dd0 = tang(nu0);
    let ddk2pi = tang(nu_k2pi);
    let ddf = g.flight_path_point(nu_f, 1.0);
    // tangent from -dd0 to the flight-path curve on [k2π, ν_f]
    let curve = |nu: f64| g.flight_path_point(nu, 1.0);
    let tangency = |nu: f64| {
        let h = 1e-6;
        let p = curve(nu);
        let pp = curve(nu + h);
        let pm = curve(nu - h);
        let da = (pp[0] - pm[0]) / (2.0 * h);
        let dl = (pp[1] - pm[1]) / (2.0 * h);
        da * (p[1] + dd0[1]) - dl * (p[0] + dd0[0])
    };
    let lo = nu_k2pi + 1e-6;
    let hi = nu_f - 1e-6;
    let mut nu_t = None;
    if hi > lo {
        let subdiv = 64;
        let step = (hi - lo) / subdiv as f64;
        let mut a = lo;
        let mut fa = tangency(a);
        for j in 1..=subdiv {
            let b = lo + step * j as f64;
            let fb = tangency(b);
            if fa.signum() != fb.signum() {
                nu_t = bracketed_root(&tangency, a, b, 0.0);
                break;
            }
            a = b;
            fa = fb;
        }
    }
    Some(AnchorPoints { dd0, ddk2pi, ddt: nu_t.map(curve), ddf, nu0, nu_k2pi, nu_t, nu_f })
}

/// Minimum cost to reach the (aΔδa, aΔδλ) part of the target.
pub fn dvmin_da_dl(target: &PseudoState, chief: &OrbitElements, t_f: f64) -> Result<DadlSolution> {
    if !(t_f > 0.0) {
        return Err(Fault::domain("reconfiguration time must be positive"));
    }
    let (a_des, l_des) = (target.da(), target.dl());
    let (e, eta, n) = (chief.e, chief.eta(), chief.mean_motion());
    let dv_da = a_des.abs() * eta * n / (2.0 * (1.0 + e));
    if a_des == 0.0 && l_des == 0.0 {
        return Ok(DadlSolution {
            dv_min: 0.0,
            dv_da: 0.0,
            case: DominantCase::Zero,
            anchors: anchor_points(chief, t_f),
            table_formula: None,
            support_normal: [0.0, 1.0],
        });
    }
    let geom = DadlGeom::new(chief, t_f);
    let anchors = anchor_points(chief, t_f);
    // mirror into the a > 0 half (the set is symmetric about the origin)
    let s = if a_des < 0.0 { -1.0 } else { 1.0 };
    let (a, l) = (s * a_des, s * l_des);
    let (gauge, normal) = geom.gauge(Vector2::new(l, a));

    let mut case = DominantCase::Dl;
    let mut dv_min = gauge;
    let mut table_formula = None;
    if let Some(anc) = anchors {
        let r = if a > 0.0 { l / dv_da } else { f64::NEG_INFINITY };
        let lam0 = anc.dd0[1];
        let lamk = anc.ddk2pi[1];
        let tie = 1e-9 * lam0.abs().max(1.0);
        if a > 0.0 && r >= lam0 - tie && r <= lamk + tie {
            case = DominantCase::Da;
            dv_min = dv_da;
        } else if let (Some(ddt), Some(nu_t)) = (anc.ddt, anc.nu_t) {
            let (at, lt) = (ddt[0], ddt[1]);
            let (a0, l0) = (anc.dd0[0], anc.dd0[1]);
            let (af, lf) = (anc.ddf[0], anc.ddf[1]);
            let m = (at + a0) / (lt + l0);
            let dv_dl = ((a - m * l) / (m * l0 - a0)).abs();
            let extended = ((at - af) / (lt - lf)).abs() < ((at + a0) / (lt + l0)).abs();
            if a > 0.0 && r > lamk && r < lt {
                case = DominantCase::DlTransition;
                let amax = 2.0 * (e * e + 2.0 * e * nu_t.cos() + 1.0).sqrt() / (eta * n);
                table_formula = Some(a / amax);
            } else if extended && r > lamk {
                case = DominantCase::DlExtended;
                table_formula = Some(if l < dv_dl * lf {
                    let m1 = (at - af) / (lt - lf);
                    ((a - m1 * l) / (at - m1 * lt)).abs()
                } else {
                    let m2 = (af + a0) / (lf + l0);
                    ((m2 * l - a) / (a0 - m2 * l0)).abs()
                });
            } else {
                case = DominantCase::Dl;
                table_formula = Some(dv_dl);
            }
        }
    }
    Ok(DadlSolution { dv_min, dv_da, case, anchors, table_formula, support_normal: [normal.x * s, normal.y * s] })
}

// ---------------------------------------------------------------------------
// Relative inclination plane
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiBurn {
    /// True anomaly in [0, 2π)
    pub nu: f64,
    /// Signed normal impulse per unit dv_min share
    pub dvn: f64,
    /// Fraction of dv_min spent here
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiSolution {
    pub dv_min: f64,
    pub case: DominantCase,
    pub nu_star: f64,
    /// Burn phases, one orbit worth
    pub burns: Vec<DiBurn>,
}

fn in_arc(nu: f64, lo: f64, hi: f64) -> bool {
    let r = nu.rem_euclid(TAU);
    r >= lo && r <= hi
}

/// Minimum cost to reach the ĩ part of `target`.
pub fn dvmin_di(target: &PseudoState, chief: &OrbitElements) -> Result<DiSolution> {
    dvmin_di_vec(target.i_tilde(), chief)
}

pub fn dvmin_di_vec(t: Vector2<f64>, chief: &OrbitElements) -> Result<DiSolution> {
    let (e, eta, n) = (chief.e, chief.eta(), chief.mean_motion());
    let norm = t.norm();
    if norm == 0.0 {
        return Ok(DiSolution { dv_min: 0.0, case: DominantCase::Zero, nu_star: 0.0, burns: vec![] });
    }
    let nu_star = t.y.atan2(t.x).rem_euclid(TAU);
    let (nu_re, nu_dis) = disconnection_angles(e);
    if in_arc(nu_star, nu_re, nu_dis) || e == 0.0 {
        let dv = norm * n * (1.0 + e * nu_star.cos()) / eta;
        return Ok(DiSolution {
            dv_min: dv,
            case: DominantCase::DiConnected,
            nu_star,
            burns: vec![DiBurn { nu: nu_star, dvn: 1.0, weight: 1.0 }],
        });
    }
    let anti = (nu_star + PI).rem_euclid(TAU);
    if in_arc(anti, nu_re, nu_dis) {
        let dv = norm * n * (1.0 - e * nu_star.cos()) / eta;
        return Ok(DiSolution {
            dv_min: dv,
            case: DominantCase::DiAntipodal,
            nu_star,
            burns: vec![DiBurn { nu: anti, dvn: -1.0, weight: 1.0 }],
        });
    }
    // bridge between the reconnection and disconnection tips
    let sy = t.y.signum();
    let p1 = param_di(nu_re, sy, chief);
    let p2 = param_di(nu_dis, -sy, chief);
    let m = Matrix2::new(p1.x, p2.x, p1.y, p2.y);
    let w = m
        .lu()
        .solve(&t)
        .ok_or_else(|| Fault::Internal("collinear reconnection/disconnection tips".into()))?;
    let dv = w.x.abs() + w.y.abs();
    Ok(DiSolution {
        dv_min: dv,
        case: DominantCase::DiDisconnected,
        nu_star,
        burns: vec![
            DiBurn { nu: nu_re, dvn: sy * w.x.signum(), weight: w.x.abs() / dv },
            DiBurn { nu: nu_dis, dvn: -sy * w.y.signum(), weight: w.y.abs() / dv },
        ],
    })
}

// ---------------------------------------------------------------------------
// Dominance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerPlane {
    pub de: f64,
    pub da: f64,
    pub dl: f64,
    pub di: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceAssessment {
    pub per_plane: PerPlane,
    /// Largest single-plane minimum (the 6D lower bound)
    pub dv_min: f64,
    /// In-plane minimum: max of the ẽ and δa/δλ planes
    pub dv_min_in_plane: f64,
    pub dv_min_out_of_plane: f64,
    /// In-plane plus out-of-plane, the cost of a decoupled optimal scheme
    pub dv_min_total: f64,
    pub dominant_plane: DominantPlane,
    pub dominant_case: DominantCase,
    pub in_plane_plane: DominantPlane,
    pub in_plane_case: DominantCase,
    pub nu_star: Option<f64>,
    pub anchors: Option<AnchorPoints>,
    /// δv_min,δe > δv_min,δa
    pub de_exceeds_da: bool,
    /// Target δλ inside the δa/δλ hull scaled by δv_min,δe
    pub dl_inside_da_hull: bool,
    pub near_circular: bool,
    pub de: DeSolution,
    pub dadl: DadlSolution,
    pub di: DiSolution,
    pub t_f: f64,
}

/// Below this eccentricity the modified form is ill-conditioned.
pub const NEAR_CIRCULAR_E: f64 = 1e-4;

pub fn assess_dominance(target: &PseudoState, chief: &OrbitElements, t_f: f64) -> Result<DominanceAssessment> {
    let near_circular = chief.e < NEAR_CIRCULAR_E;
    if chief.e <= 0.0 {
        return Err(Fault::domain("eccentric-orbit minima need e > 0 (near-circular case is out of scope)"));
    }
    let de = dvmin_de(target, chief)?;
    let dadl = dvmin_da_dl(target, chief, t_f)?;
    let di = dvmin_di(target, chief)?;
    let per_plane = PerPlane { de: de.dv_min, da: dadl.dv_da, dl: dadl.dv_min, di: di.dv_min };

    let (in_plane_plane, in_plane_case, dv_ip) = if de.dv_min == 0.0 && dadl.dv_min == 0.0 {
        (DominantPlane::None, DominantCase::Zero, 0.0)
    } else if de.dv_min >= dadl.dv_min {
        (DominantPlane::De, de.case, de.dv_min)
    } else if dadl.case == DominantCase::Da {
        (DominantPlane::Da, DominantCase::Da, dadl.dv_min)
    } else {
        (DominantPlane::Dl, dadl.case, dadl.dv_min)
    };
    let (dominant_plane, dominant_case) = if di.dv_min > dv_ip {
        (DominantPlane::Di, di.case)
    } else {
        (in_plane_plane, in_plane_case)
    };
    let nu_star = match dominant_plane {
        DominantPlane::De => de.roots.get(de.primary).map(|r| r.nu),
        DominantPlane::Di => Some(di.nu_star),
        DominantPlane::Dl | DominantPlane::Da => dadl.anchors.and_then(|a| a.nu_t),
        DominantPlane::None => None,
    };
    let dl_inside = if de.dv_min > 0.0 {
        let g = DadlGeom::new(chief, t_f);
        let (gl, _) = g.gauge(Vector2::new(target.dl(), target.da()));
        gl <= de.dv_min * (1.0 + 1e-9)
    } else {
        dadl.dv_min == 0.0
    };
    Ok(DominanceAssessment {
        per_plane,
        dv_min: dv_ip.max(di.dv_min),
        dv_min_in_plane: dv_ip,
        dv_min_out_of_plane: di.dv_min,
        dv_min_total: dv_ip + di.dv_min,
        dominant_plane,
        dominant_case,
        in_plane_plane,
        in_plane_case,
        nu_star,
        anchors: dadl.anchors,
        de_exceeds_da: de.dv_min > dadl.dv_da,
        dl_inside_da_hull: dl_inside,
        near_circular,
        de,
        dadl,
        di,
        t_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{RoeForm, Vec6};

    fn test1() -> (OrbitElements, f64) {
        let c = OrbitElements::new(15000e3, 0.5, 10f64.to_radians(), 0.0, 20f64.to_radians(), 0.0).unwrap();
        let t = 2.2 * c.period();
        (c, t)
    }

    fn ps(c: &OrbitElements, v: [f64; 6]) -> PseudoState {
        PseudoState::from_tilde(Vec6::from_column_slice(&v), c, RoeForm::Modified)
    }

    #[test]
    fn test1_in_plane() {
        let (c, t) = test1();
        let p = ps(&c, [70.0, -1377.965, 307.646, 260.488, 29.0545, 21.350]);
        let de = dvmin_de(&p, &c).unwrap();
        assert!((de.dv_min - 0.07801).abs() < 1e-5, "{}", de.dv_min);
        assert!((solve_nu_star(&p, &c, WhichRoot::First).unwrap() - 0.8967).abs() < 1e-3);
        assert!((solve_nu_star(&p, &c, WhichRoot::Second).unwrap() - 3.5907).abs() < 1e-3);
        let a = assess_dominance(&p, &c, t).unwrap();
        assert_eq!(a.in_plane_plane, DominantPlane::De);
        assert!(a.per_plane.dl < a.per_plane.de);
        assert!(a.de_exceeds_da && a.dl_inside_da_hull);
    }

    #[test]
    fn test1_out_of_plane() {
        let (c, _) = test1();
        let p = ps(&c, [0.0, 0.0, 0.0, 0.0, 29.0545, 21.350]);
        let di = dvmin_di(&p, &c).unwrap();
        assert!((di.dv_min - 0.00854).abs() < 1e-5, "{}", di.dv_min);
        assert_eq!(di.case, DominantCase::DiAntipodal);
    }

    #[test]
    fn di_plus_x_axis() {
        let (c, _) = test1();
        // +x is cheapest from a negative burn at apogee, not a positive one at perigee
        let di = dvmin_di_vec(Vector2::new(10.0, 0.0), &c).unwrap();
        assert_eq!(di.nu_star, 0.0);
        let want = 10.0 * c.mean_motion() * (1.0 - c.e) / c.eta();
        assert!((di.dv_min - want).abs() < 1e-15);
        assert_eq!(di.case, DominantCase::DiAntipodal);
        assert!(di.dv_min < 10.0 * c.mean_motion() * (1.0 + c.e) / c.eta());
        let di = dvmin_di_vec(Vector2::new(-10.0, 0.0), &c).unwrap();
        assert_eq!(di.case, DominantCase::DiConnected);
        assert!((di.dv_min - want).abs() < 1e-15);
    }

    #[test]
    fn de_y_zero_uses_tangential_burns() {
        let (c, _) = test1();
        let s = dvmin_de_vec(Vector2::new(100.0, 0.0), &c).unwrap();
        assert_eq!(s.case, DominantCase::DeYZero);
        assert!((s.dv_min - 100.0 * c.mean_motion() / (2.0 * c.eta())).abs() < 1e-12);
        assert_eq!(s.roots[0].nu, 0.0);
        assert_eq!(s.roots[1].nu, PI);
    }

    #[test]
    fn de_grid_oracle() {
        let c = OrbitElements::new(9000e3, 0.3, 0.5, 0.0, 0.3, 0.0).unwrap();
        let t = Vector2::new(-120.0, 75.0);
        let s = dvmin_de_vec(t, &c).unwrap();
        // maximize the aligned projection over a fine ν grid
        let mut best = (0.0, 0.0);
        let th = t.normalize();
        for j in 0..1_000_000 {
            let nu = TAU * j as f64 / 1e6;
            let p = de_tip(nu, &c);
            let par = p.dot(&th).abs();
            let perp = (p.x * th.y - p.y * th.x).abs();
            if perp < 1e-4 * p.norm() && par > best.1 {
                best = (nu, par);
            }
        }
        let r = &s.roots[s.primary];
        assert!((r.nu - best.0).abs() < 1e-3);
        assert!((s.dv_min - t.norm() / best.1).abs() < 1e-5 * s.dv_min, "{:?} {:?}", s, best);
    }

    #[test]
    fn pure_da_on_boundary() {
        let (c, t) = test1();
        let anc = anchor_points(&c, t).unwrap();
        assert_eq!(anc.dd0[0], anc.ddk2pi[0]);
        // a target 50 m in aΔδa at the centre of the horizontal edge
        let dv = 50.0 / anc.dd0[0];
        let l = dv * 0.5 * (anc.dd0[1] + anc.ddk2pi[1]);
        let p = ps(&c, [50.0, l, 0.0, 0.0, 0.0, 0.0]);
        let s = dvmin_da_dl(&p, &c, t).unwrap();
        assert_eq!(s.case, DominantCase::Da);
        let want = 50.0 * c.eta() * c.mean_motion() / (2.0 * (1.0 + c.e));
        assert!((s.dv_min - want).abs() < 1e-15);
        // the exact gauge agrees on the edge
        let g = DadlGeom::new(&c, t).gauge(Vector2::new(l, 50.0)).0;
        assert!((g - want).abs() < 1e-6 * want, "{g} {want}");
    }

    #[test]
    fn dadl_homogeneous_and_symmetric() {
        let (c, t) = test1();
        let p = ps(&c, [-80.0, -3877.96, 0.0, 0.0, 0.0, 0.0]);
        let s1 = dvmin_da_dl(&p, &c, t).unwrap();
        let p2 = ps(&c, [-160.0, -7755.92, 0.0, 0.0, 0.0, 0.0]);
        let s2 = dvmin_da_dl(&p2, &c, t).unwrap();
        assert!((2.0 * s1.dv_min - s2.dv_min).abs() < 1e-9 * s2.dv_min);
        let p3 = ps(&c, [80.0, 3877.96, 0.0, 0.0, 0.0, 0.0]);
        let s3 = dvmin_da_dl(&p3, &c, t).unwrap();
        assert!((s1.dv_min - s3.dv_min).abs() < 1e-12);
    }

    #[test]
    fn suboptimal_variant_is_de_dominated() {
        let (c, t) = test1();
        let p = ps(&c, [-80.0, -3877.96, 307.646, 260.488, 29.0545, 21.350]);
        let a = assess_dominance(&p, &c, t).unwrap();
        assert_eq!(a.in_plane_plane, DominantPlane::De);
        assert!(a.per_plane.da < a.per_plane.de && a.per_plane.dl < a.per_plane.de);
    }

    #[test]
    fn zero_target() {
        let (c, t) = test1();
        let p = ps(&c, [0.0; 6]);
        let a = assess_dominance(&p, &c, t).unwrap();
        assert_eq!(a.dv_min, 0.0);
        assert_eq!(a.dominant_case, DominantCase::Zero);
    }

    #[test]
    fn only_di_nonzero() {
        let (c, t) = test1();
        let p = ps(&c, [0.0, 0.0, 0.0, 0.0, 3.0, -4.0]);
        let a = assess_dominance(&p, &c, t).unwrap();
        assert_eq!(a.dominant_plane, DominantPlane::Di);
    }

    #[test]
    fn di_disconnected_two_burns() {
        let (c, _) = test1();
        let t = Vector2::new(0.5, 20.0);
        let s = dvmin_di_vec(t, &c).unwrap();
        assert_eq!(s.case, DominantCase::DiDisconnected);
        let mut sum = Vector2::zeros();
        for b in &s.burns {
            sum += param_di(b.nu, b.dvn, &c) * b.weight * s.dv_min;
        }
        assert!((sum - t).norm() < 1e-9);
        // pure +y: cost equals |ĩ_y|·n
        let s = dvmin_di_vec(Vector2::new(0.0, 20.0), &c).unwrap();
        assert!((s.dv_min - 20.0 * c.mean_motion()).abs() < 1e-12);
    }
}
