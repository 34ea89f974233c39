//! Reachable sets in the three 2D planes.
//!
//! Boundary parameterizations for a single unit impulse, the optimal
//! in-plane impulse profile, and sampled convex hulls for diagnostics.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{true_anomaly_at, OrbitElements};
use crate::fault::{Fault, Result};

/// Radial/tangential directions sampled on each single-epoch ellipse.
const ELLIPSE_DIRS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    DeTilde,
    Dadl,
    DiTilde,
}

impl Plane {
    pub fn name(self) -> &'static str {
        match self {
            Plane::DeTilde => "de_tilde",
            Plane::Dadl => "dadl",
            Plane::DiTilde => "di_tilde",
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Fault;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "de_tilde" | "de" => Ok(Plane::DeTilde),
            "dadl" => Ok(Plane::Dadl),
            "di_tilde" | "di" => Ok(Plane::DiTilde),
            _ => Err(Fault::domain(format!("unknown plane '{s}' (expected de_tilde, dadl or di_tilde)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint2D {
    pub x: f64,
    pub y: f64,
    pub nu: f64,
    /// Unit RTN impulse that generates the point
    pub dv_profile: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignCase {
    SameSign,
    OppositeSign,
}

/// Tangential share of the impulse that maximizes the ẽ-plane effect at ν.
///
/// At sin ν = 0 the limit f₁ → +∞ is used (same-sign 0, opposite-sign 1).
pub fn dvt_star(nu: f64, e: f64, case: SignCase) -> f64 {
    let (s, c) = nu.sin_cos();
    let f2 = 2.0 * e * e * c * c + 6.0 * e * c + e * e + 3.0;
    let den = (1.0 + e * c) * e * s;
    // g = f1/√(4+f1²), written to stay finite as den → 0
    let g = if den == 0.0 {
        1.0
    } else {
        let f1 = f2 / den;
        if f1.abs() > 1e150 {
            f1.signum()
        } else {
            f1 / (4.0 + f1 * f1).sqrt()
        }
    };
    match case {
        SignCase::SameSign => -(0.5 - 0.5 * g).max(0.0).sqrt(),
        SignCase::OppositeSign => (0.5 + 0.5 * g).max(0.0).sqrt(),
    }
}

/// Unit (δv_r, δv_t) maximizing ‖Δδẽ‖ at ν, with δv_r ≥ 0.
pub fn de_profile(nu: f64, e: f64) -> Vector2<f64> {
    let r = nu.rem_euclid(TAU);
    let case = if r > PI { SignCase::SameSign } else { SignCase::OppositeSign };
    // at the apsides the tangential burn is the maximizer on both sides
    let dvt = if r == 0.0 || r == PI { 1.0 } else { dvt_star(nu, e, case) };
    let dvr = (1.0 - dvt * dvt).max(0.0).sqrt();
    Vector2::new(dvr, dvt)
}

/// ẽ-plane effect [m per m/s] of the impulse (δv_r, δv_t).
pub fn param_de_dir(nu: f64, dv: Vector2<f64>, chief: &OrbitElements) -> Vector2<f64> {
    let (e, eta, n) = (chief.e, chief.eta(), chief.mean_motion());
    let (s, c) = nu.sin_cos();
    let k = 1.0 + e * c;
    let x = eta * s * dv.x + eta * (e + c * (2.0 + e * c)) / k * dv.y;
    let y = -eta * c * dv.x + eta * s * (2.0 + e * c) / k * dv.y;
    Vector2::new(x, y) / n
}

/// ẽ-plane effect of a unit impulse with tangential share `dvt` (δv_r ≥ 0).
pub fn param_de(nu: f64, dvt: f64, chief: &OrbitElements) -> Vector2<f64> {
    let dvr = (1.0 - dvt * dvt).max(0.0).sqrt();
    param_de_dir(nu, Vector2::new(dvr, dvt), chief)
}

/// ẽ-plane point reached by the optimal unit impulse at ν.
pub fn de_tip(nu: f64, chief: &OrbitElements) -> Vector2<f64> {
    param_de_dir(nu, de_profile(nu, chief.e), chief)
}

/// (aΔδλ, aΔδa) at t_f per unit impulse (δv_r, δv_t) applied at ν with
/// mean-anomaly lever arm `delta_m` to t_f.
pub fn param_dadl_dir(nu: f64, dv: Vector2<f64>, chief: &OrbitElements, delta_m: f64) -> Vector2<f64> {
    let (e, eta, n) = (chief.e, chief.eta(), chief.mean_motion());
    let (s, c) = nu.sin_cos();
    let k = 1.0 + e * c;
    let da = 2.0 * e * s / eta * dv.x + 2.0 * k / eta * dv.y;
    let dl = -2.0 * eta * eta / k * dv.x - 1.5 * delta_m * da;
    Vector2::new(dl, da) / n
}

/// [`param_dadl_dir`] with δv_r = +√(1 − δv_t²).
pub fn param_dadl(nu: f64, dvt: f64, chief: &OrbitElements, delta_m: f64) -> Vector2<f64> {
    let dvr = (1.0 - dvt * dvt).max(0.0).sqrt();
    param_dadl_dir(nu, Vector2::new(dvr, dvt), chief, delta_m)
}

/// ĩ-plane effect of a normal impulse of sign `dvn`.
pub fn param_di(nu: f64, dvn: f64, chief: &OrbitElements) -> Vector2<f64> {
    let (e, eta, n) = (chief.e, chief.eta(), chief.mean_motion());
    let (s, c) = nu.sin_cos();
    Vector2::new(c, s) * (eta / (n * (1.0 + e * c)) * dvn)
}

/// (ν_re, ν_dis): the arc of each orbit on which S(c,t) touches the ĩ-plane hull.
pub fn disconnection_angles(e: f64) -> (f64, f64) {
    let a = e.clamp(-1.0, 1.0).acos();
    (PI - a, PI + a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexHull2D {
    /// Counterclockwise, starting at the lowest-x point
    pub vertices: Vec<BoundaryPoint2D>,
    pub cost: f64,
    pub plane: Plane,
    /// All samples collinear (or fewer than three distinct points)
    pub degenerate: bool,
}

fn cross(o: &BoundaryPoint2D, a: &BoundaryPoint2D, b: &BoundaryPoint2D) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexHull2D {
    /// Monotone-chain hull of arbitrary points.
    pub fn from_points(mut pts: Vec<BoundaryPoint2D>, cost: f64, plane: Plane) -> Self {
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
        if pts.len() < 3 {
            return ConvexHull2D { vertices: pts, cost, plane, degenerate: true };
        }
        let mut lower: Vec<BoundaryPoint2D> = Vec::with_capacity(pts.len());
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<BoundaryPoint2D> = Vec::with_capacity(pts.len());
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        let degenerate = lower.len() < 3;
        ConvexHull2D { vertices: lower, cost, plane, degenerate }
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max((a.x - b.x).hypot(a.y - b.y));
            }
        }
        d
    }

    /// Signed distance of (x, y) outside the hull; negative inside.
    pub fn outside_distance(&self, x: f64, y: f64) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return f64::INFINITY;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            let a = &self.vertices[k];
            let b = &self.vertices[(k + 1) % n];
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len = ex.hypot(ey);
            // outward normal of a counterclockwise edge is (ey, -ex)
            let d = ((x - a.x) * ey - (y - a.y) * ex) / len;
            worst = worst.max(d);
        }
        worst
    }

    /// Point-in-hull with a slack of 1e-9 × diameter.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.outside_distance(x, y) <= 1e-9 * self.diameter()
    }

    pub fn contains_with_slack(&self, x: f64, y: f64, slack: f64) -> bool {
        self.outside_distance(x, y) <= slack
    }

    pub fn is_strictly_convex(&self) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|k| cross(&self.vertices[k], &self.vertices[(k + 1) % n], &self.vertices[(k + 2) % n]) > 0.0)
    }
}

/// Sample epochs uniformly in time over [0, T].
fn sample_epochs(t: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t * k as f64 / (n - 1) as f64).collect()
}

/// All single-impulse boundary points of S(c, t) for `n_samples` epochs in [0, T].
pub fn sample_points(plane: Plane, cost: f64, chief: &OrbitElements, t: f64, n_samples: usize) -> Vec<BoundaryPoint2D> {
    let n = chief.mean_motion();
    let epochs = sample_epochs(t, n_samples.max(2));
    let per_epoch: Vec<Vec<BoundaryPoint2D>> = epochs
        .par_iter()
        .map(|&tk| {
            let nu = true_anomaly_at(chief, tk);
            let mut out = Vec::with_capacity(ELLIPSE_DIRS + 2);
            let mut push = |v: Vector2<f64>, dv: [f64; 3]| {
                out.push(BoundaryPoint2D { x: cost * v.x, y: cost * v.y, nu, dv_profile: dv });
            };
            match plane {
                Plane::DiTilde => {
                    push(param_di(nu, 1.0, chief), [0.0, 0.0, 1.0]);
                    push(param_di(nu, -1.0, chief), [0.0, 0.0, -1.0]);
                }
                Plane::DeTilde | Plane::Dadl => {
                    let eval = |u: Vector2<f64>| match plane {
                        Plane::DeTilde => param_de_dir(nu, u, chief),
                        _ => param_dadl_dir(nu, u, chief, n * (t - tk)),
                    };
                    let p = de_profile(nu, chief.e);
                    push(eval(p), [p.x, p.y, 0.0]);
                    push(eval(-p), [-p.x, -p.y, 0.0]);
                    for j in 0..ELLIPSE_DIRS {
                        let (s, c) = (TAU * j as f64 / ELLIPSE_DIRS as f64).sin_cos();
                        push(eval(Vector2::new(c, s)), [c, s, 0.0]);
                    }
                }
            }
            out
        })
        .collect();
    per_epoch.into_iter().flatten().collect()
}

/// Convex hull S*(c, T) from sampled single-impulse sets.
pub fn sample_hull(plane: Plane, cost: f64, chief: &OrbitElements, t: f64, n_samples: usize) -> Result<ConvexHull2D> {
    if n_samples < 64 {
        return Err(Fault::domain(format!("sample_hull needs at least 64 samples (got {n_samples})")));
    }
    if !(t > 0.0) {
        return Err(Fault::domain("sample_hull needs T > 0"));
    }
    if chief.e <= 0.0 && plane == Plane::DeTilde {
        // the profile formulas are defined for e > 0; the ellipse sampling is not
        chief.validate()?;
    }
    let pts = sample_points(plane, cost, chief, t, n_samples);
    Ok(ConvexHull2D::from_points(pts, cost, plane))
}

/// CSV columns: plane, nu_rad, x_m, y_m, dv_r, dv_t, dv_n.
pub fn write_points_csv<W: Write>(w: W, plane: Plane, points: &[BoundaryPoint2D]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Fault::Internal(format!("csv write failed: {e}"));
    wr.write_record(["plane", "nu_rad", "x_m", "y_m", "dv_r", "dv_t", "dv_n"]).map_err(io)?;
    for p in points {
        wr.write_record([
            plane.name().to_string(),
            format!("{:.12}", p.nu),
            format!("{:.9}", p.x),
            format!("{:.9}", p.y),
            format!("{:.12}", p.dv_profile[0]),
            format!("{:.12}", p.dv_profile[1]),
            format!("{:.12}", p.dv_profile[2]),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Fault::Internal(format!("csv flush failed: {e}")))?;
    Ok(())
}
