//! Independent checks of the planner.
//!
//! A numerical GVE propagator (Kepler or Kepler+J2) with finite burns, and a
//! gridded linear-program oracle for the minimum cost with a dual-certified
//! lower bound.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::dvmin::golden_max;
use crate::dynamics::{
    gamma_tilde, keplerian_stm_matrix, oe_to_cartesian, oe_to_roe, rtn_frame, solve_kepler, true_anomaly_at,
    true_from_ecc, wrap_pi, Flavor, Mat63, OrbitElements, PseudoState, RoeForm, J2_EARTH, MU_EARTH, R_EARTH,
};
use crate::fault::{Fault, Result};
use crate::planner::Maneuver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForceModel {
    Kepler,
    #[default]
    KeplerJ2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub force: ForceModel,
    /// Integration step [s]; defaults to period/2000
    pub step: Option<f64>,
    /// Each burn spans 2·k_spread + 1 steps
    pub k_spread: usize,
    /// Keep every n-th step in the trajectory
    pub record_every: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions { force: ForceModel::KeplerJ2, step: None, k_spread: 1, record_every: 10 }
    }
}

/// Element state (a, e, i, Ω, ω, M) with unwrapped angles.
type El = [f64; 6];

fn el_of(oe: &OrbitElements) -> El {
    oe.to_array()
}

fn oe_of(x: &El, flavor: Flavor) -> OrbitElements {
    OrbitElements::from_array(*x, flavor)
}

fn j2_accel_inertial(r: &Vector3<f64>) -> Vector3<f64> {
    let rn = r.norm();
    let z2 = (r.z / rn).powi(2);
    let k = -1.5 * J2_EARTH * MU_EARTH * R_EARTH * R_EARTH / rn.powi(5);
    Vector3::new(r.x * (1.0 - 5.0 * z2), r.y * (1.0 - 5.0 * z2), r.z * (3.0 - 5.0 * z2)) * k
}

/// J2 acceleration in the RTN frame of the spacecraft [m/s²].
pub fn j2_accel_rtn(oe: &OrbitElements) -> Vector3<f64> {
    let (r, v) = oe_to_cartesian(oe);
    rtn_frame(&r, &v) * j2_accel_inertial(&r)
}

/// Gauss variational equations in mean-anomaly form for an RTN acceleration.
pub fn gve_rates(x: &El, f: &Vector3<f64>) -> Result<El> {
    let [a, e, i, _raan, argp, m] = *x;
    if !(a > 0.0) || !(0.0..1.0).contains(&e) {
        return Err(Fault::domain("propagated elements left the bound-orbit domain"));
    }
    if e < 1e-6 || i.sin().abs() < 1e-6 {
        return Err(Fault::domain("GVE propagation needs e > 1e-6 and sin i > 1e-6"));
    }
    let n = (MU_EARTH / a.powi(3)).sqrt();
    let ea = solve_kepler(m, e)?;
    let nu = true_from_ecc(ea, e);
    let (sn, cn) = nu.sin_cos();
    let eta = (1.0 - e * e).sqrt();
    let p = a * eta * eta;
    let r = p / (1.0 + e * cn);
    let u = nu + argp;
    let (su, cu) = u.sin_cos();
    let h = n * a * a * eta;
    let (fr, ft, fnn) = (f.x, f.y, f.z);
    Ok([
        2.0 / (n * eta) * (e * sn * fr + p / r * ft),
        eta / (n * a) * (sn * fr + (cn + (e + cn) / (1.0 + e * cn)) * ft),
        r * cu / h * fnn,
        r * su / (h * i.sin()) * fnn,
        eta / (n * a * e) * (-cn * fr + sn * (1.0 + r / p) * ft) - r * su / (h * i.tan()) * fnn,
        n + 1.0 / (n * a * a * e) * ((p * cn - 2.0 * e * r) * fr - (p + r) * sn * ft),
    ])
}

fn perturbation(x: &El, force: ForceModel, thrust: &Vector3<f64>) -> Vector3<f64> {
    let mut f = *thrust;
    if force == ForceModel::KeplerJ2 {
        f += j2_accel_rtn(&oe_of(x, Flavor::Osculating));
    }
    f
}

fn rk4(x: &El, h: f64, force: ForceModel, thrust: &Vector3<f64>) -> Result<El> {
    let rate = |y: &El| gve_rates(y, &perturbation(y, force, thrust));
    let add = |y: &El, k: &El, s: f64| {
        let mut o = *y;
        for j in 0..6 {
            o[j] += s * k[j];
        }
        o
    };
    let k1 = rate(x)?;
    let k2 = rate(&add(x, &k1, h / 2.0))?;
    let k3 = rate(&add(x, &k2, h / 2.0))?;
    let k4 = rate(&add(x, &k3, h))?;
    let mut o = *x;
    for j in 0..6 {
        o[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    Ok(o)
}

fn default_step(oe: &OrbitElements, step: Option<f64>) -> f64 {
    step.unwrap_or(oe.period() / 2000.0)
}

/// Propagate with no thrust over `t` seconds, sampling at every step start.
fn coast(x0: &El, t: f64, step: f64, force: ForceModel) -> Result<(Vec<f64>, Vec<El>)> {
    let n = (t / step).round().max(1.0) as usize;
    let h = t / n as f64;
    let mut ts = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut x = *x0;
    for k in 0..=n {
        ts.push(k as f64 * h);
        xs.push(x);
        if k < n {
            x = rk4(&x, h, force, &Vector3::zeros())?;
        }
    }
    Ok((ts, xs))
}

/// Mean elements by averaging the osculating ones over one orbit, with the
/// secular drift of the angles taken from the same propagation.
pub fn osc_to_mean(osc: &OrbitElements, force: ForceModel, step: Option<f64>) -> Result<OrbitElements> {
    if force == ForceModel::Kepler {
        return Ok(osc.with_flavor(Flavor::Mean));
    }
    let p = osc.period();
    let (ts, xs) = coast(&el_of(osc), p, default_step(osc, step), force)?;
    let n = xs.len() - 1;
    let last = xs[n];
    let mut out = [0.0; 6];
    for j in 0..6 {
        let rate = if j >= 3 { (last[j] - xs[0][j]) / p } else { 0.0 };
        out[j] = (0..n).map(|k| xs[k][j] - rate * ts[k]).sum::<f64>() / n as f64;
    }
    Ok(OrbitElements::from_array(out, Flavor::Mean).normalized())
}

/// Inverse of [`osc_to_mean`] by fixed-point iteration.
pub fn mean_to_osc(mean: &OrbitElements, force: ForceModel, step: Option<f64>) -> Result<OrbitElements> {
    if force == ForceModel::Kepler {
        return Ok(mean.with_flavor(Flavor::Osculating));
    }
    let target = el_of(mean);
    let mut osc = target;
    for _ in 0..6 {
        let m = el_of(&osc_to_mean(&oe_of(&osc, Flavor::Osculating), force, step)?);
        for j in 0..6 {
            let d = if j >= 3 { wrap_pi(target[j] - m[j]) } else { target[j] - m[j] };
            osc[j] += d;
        }
    }
    Ok(OrbitElements::from_array(osc, Flavor::Osculating).normalized())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub chief: [f64; 6],
    pub deputy: [f64; 6],
    /// ROE from osculating elements [m]
    pub roe: [f64; 6],
    pub flavor: Flavor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub trajectory: Vec<TrajectorySample>,
    pub chief_mean_final: OrbitElements,
    pub deputy_mean_final: OrbitElements,
    /// Mean ROE at t_f [m]
    pub achieved_final_roe: [f64; 6],
    pub form: RoeForm,
    /// Integrated impulse of each burn [m/s]
    pub applied_impulse: Vec<f64>,
    pub step: f64,
}

struct BurnWindow {
    start: f64,
    end: f64,
    accel: Vector3<f64>,
}

fn burn_windows(maneuvers: &[Maneuver], t_f: f64, step: f64, k_spread: usize) -> Result<Vec<BurnWindow>> {
    let w = (2 * k_spread + 1) as f64 * step;
    maneuvers
        .iter()
        .map(|m| {
            if m.t < -1e-9 || m.t > t_f + 1e-9 {
                return Err(Fault::domain(format!("burn at {:.3} s lies outside [0, {t_f:.3}] s", m.t)));
            }
            let width = w.min(t_f);
            let start = (m.t - width / 2.0).clamp(0.0, t_f - width);
            Ok(BurnWindow { start, end: start + width, accel: m.dv() / width })
        })
        .collect()
}

/// Integrate chief and deputy from mean initial elements and return the mean ROE at t_f.
pub fn propagate_with_burns(
    chief0: &OrbitElements,
    deputy0: &OrbitElements,
    maneuvers: &[Maneuver],
    t_f: f64,
    form: RoeForm,
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    let step = default_step(chief0, opts.step);
    if step > chief0.period() / 200.0 {
        return Err(Fault::domain("integration step must be at most 1/200 of the orbit period"));
    }
    let force = opts.force;
    let windows = burn_windows(maneuvers, t_f, step, opts.k_spread)?;
    let mut nodes = vec![0.0, t_f];
    for w in &windows {
        nodes.push(w.start);
        nodes.push(w.end);
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut xc = el_of(&mean_to_osc(chief0, force, Some(step))?);
    let mut xd = el_of(&mean_to_osc(deputy0, force, Some(step))?);
    let mut applied = vec![0.0; windows.len()];
    let mut trajectory = Vec::new();
    let record = |t: f64, xc: &El, xd: &El, out: &mut Vec<TrajectorySample>| -> Result<()> {
        let c = oe_of(xc, Flavor::Osculating);
        let d = oe_of(xd, Flavor::Osculating);
        let roe = oe_to_roe(&c, &d, form)?.to_meters(c.a);
        out.push(TrajectorySample { t, chief: *xc, deputy: *xd, roe: roe.into(), flavor: Flavor::Osculating });
        Ok(())
    };
    record(0.0, &xc, &xd, &mut trajectory)?;
    let mut count = 0usize;
    for seg in nodes.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        let mid = 0.5 * (t0 + t1);
        let mut thrust = Vector3::zeros();
        for (k, w) in windows.iter().enumerate() {
            if w.start <= mid && mid <= w.end {
                thrust += w.accel;
                applied[k] += w.accel.norm() * (t1 - t0);
            }
        }
        let n = ((t1 - t0) / step).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        for k in 0..n {
            xc = rk4(&xc, h, force, &Vector3::zeros())?;
            xd = rk4(&xd, h, force, &thrust)?;
            count += 1;
            if count % opts.record_every.max(1) == 0 {
                record(t0 + (k + 1) as f64 * h, &xc, &xd, &mut trajectory)?;
            }
        }
    }
    if trajectory.last().map_or(true, |s| (s.t - t_f).abs() > 1e-9) {
        record(t_f, &xc, &xd, &mut trajectory)?;
    }
    let cm = osc_to_mean(&oe_of(&xc, Flavor::Osculating), force, Some(step))?;
    let dm = osc_to_mean(&oe_of(&xd, Flavor::Osculating), force, Some(step))?;
    let roe = oe_to_roe(&cm, &dm, form)?.to_meters(cm.a);
    Ok(PropagationResult {
        trajectory,
        chief_mean_final: cm,
        deputy_mean_final: dm,
        achieved_final_roe: roe.into(),
        form,
        applied_impulse: applied,
        step,
    })
}

/// Columns: t_s, chief elements, deputy elements, ROE [m], flavor.
pub fn write_trajectory_csv<W: Write>(w: W, result: &PropagationResult) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let names = ["a", "e", "i", "raan", "argp", "m"];
    let mut header = vec!["t_s".to_string()];
    header.extend(names.iter().map(|n| format!("chief_{n}")));
    header.extend(names.iter().map(|n| format!("deputy_{n}")));
    header.extend(["ada_m", "adl_m", "adex_m", "adey_m", "adix_m", "adiy_m"].iter().map(|s| s.to_string()));
    header.push("flavor".into());
    let io = |e: csv::Error| Fault::Internal(format!("csv write failed: {e}"));
    wr.write_record(&header).map_err(io)?;
    for s in &result.trajectory {
        let mut row = vec![format!("{}", s.t)];
        row.extend(s.chief.iter().chain(&s.deputy).chain(&s.roe).map(|v| format!("{v}")));
        row.push(match s.flavor {
            Flavor::Mean => "mean".into(),
            Flavor::Osculating => "osculating".into(),
        });
        wr.write_record(&row).map_err(io)?;
    }
    wr.flush().map_err(|e| Fault::Internal(e.to_string()))
}

// ---------------------------------------------------------------------------
// Linear-program oracle
// ---------------------------------------------------------------------------

/// Which pseudo-state rows the oracle constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpScope {
    /// aδa, aδλ, aẽ
    InPlane,
    /// aĩ
    OutOfPlane,
    /// Only the aẽ rows
    DeOnly,
    Full,
}

impl LpScope {
    fn rows(&self) -> &'static [usize] {
        match self {
            LpScope::InPlane => &[0, 1, 2, 3],
            LpScope::OutOfPlane => &[4, 5],
            LpScope::DeOnly => &[2, 3],
            LpScope::Full => &[0, 1, 2, 3, 4, 5],
        }
    }

    fn directions(&self, n_dirs: usize) -> Vec<Vector3<f64>> {
        let circle = |el: f64| -> Vec<Vector3<f64>> {
            (0..n_dirs)
                .map(|k| {
                    let th = TAU * k as f64 / n_dirs as f64;
                    Vector3::new(th.cos() * el.cos(), th.sin() * el.cos(), el.sin())
                })
                .collect()
        };
        match self {
            LpScope::InPlane | LpScope::DeOnly => circle(0.0),
            LpScope::OutOfPlane => vec![Vector3::z(), -Vector3::z()],
            LpScope::Full => {
                let mut d = circle(0.0);
                d.extend(circle(PI / 4.0));
                d.extend(circle(-PI / 4.0));
                d.push(Vector3::z());
                d.push(-Vector3::z());
                d
            }
        }
    }

    /// Largest λᵀG u over unit impulses allowed by the scope.
    fn best_impulse(&self, g: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let v = match self {
            LpScope::InPlane | LpScope::DeOnly => Vector3::new(g.x, g.y, 0.0),
            LpScope::OutOfPlane => Vector3::new(0.0, 0.0, g.z),
            LpScope::Full => *g,
        };
        let n = v.norm();
        if n == 0.0 {
            (0.0, Vector3::x())
        } else {
            (n, v / n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub t: f64,
    pub dir: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundResult {
    /// Certified lower bound: λᵀb over the continuous-time support of λ [m/s]
    pub dv_lb: f64,
    /// Optimum of the gridded LP, an upper bound on the true minimum [m/s]
    pub dv_lp: f64,
    /// Dual vector over all six rows (zero outside the scope)
    pub support_vector: [f64; 6],
    pub active_epochs: Vec<f64>,
    /// (n_times, n_dirs)
    pub grid: (usize, usize),
    pub scope: LpScope,
    pub iterations: usize,
    pub converged: bool,
    pub candidates: Vec<Candidate>,
    /// Impulses of the LP optimum
    pub maneuvers: Vec<Maneuver>,
}

/// Simplex outcome for min 1ᵀx s.t. Ax = b, x ≥ 0.
struct LpOutcome {
    x: DVector<f64>,
    dual: DVector<f64>,
    value: f64,
}

/// Two-phase revised simplex with Bland's rule.
fn simplex(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    let scale = a.amax().max(b.amax()).max(1.0);
    let tol = 1e-10 * scale;
    // rows with negative rhs flipped
    let mut a = a.clone();
    let mut b = b.clone();
    let mut flip = vec![1.0; m];
    for i in 0..m {
        if b[i] < 0.0 {
            flip[i] = -1.0;
            b[i] = -b[i];
            for j in 0..n {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }
    let column = |j: usize| -> DVector<f64> {
        if j < n {
            a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(m);
            e[j - n] = 1.0;
            e
        }
    };
    let mut basis: Vec<usize> = (n..n + m).collect();
    let run = |basis: &mut Vec<usize>, cost: &dyn Fn(usize) -> f64, allow_art: bool| -> Result<(DMatrix<f64>, DVector<f64>)> {
        for _iter in 0..50_000 {
            let bm = DMatrix::from_columns(&basis.iter().map(|&j| column(j)).collect::<Vec<_>>());
            let binv = bm.try_inverse().ok_or_else(|| Fault::numerical("singular simplex basis"))?;
            let xb = &binv * &b;
            let cb = DVector::from_iterator(m, basis.iter().map(|&j| cost(j)));
            let y = binv.transpose() * cb;
            let mut entering = None;
            let limit = if allow_art { n + m } else { n };
            for j in 0..limit {
                if basis.contains(&j) {
                    continue;
                }
                let col = column(j);
                let d = cost(j) - y.dot(&col);
                if d < -1e-9 * (1.0 + y.norm() * col.norm()) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else {
                return Ok((binv, y));
            };
            let w = &binv * column(q);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if w[i] > tol * 1e-3 {
                    let r = xb[i] / w[i];
                    match leave {
                        None => leave = Some((i, r)),
                        Some((li, lr)) => {
                            if r < lr - 1e-14 * lr.abs().max(1.0) || ((r - lr).abs() <= 1e-14 * lr.abs().max(1.0) && basis[i] < basis[li]) {
                                leave = Some((i, r));
                            }
                        }
                    }
                }
            }
            let Some((li, _)) = leave else {
                return Err(Fault::numerical("unbounded linear program"));
            };
            basis[li] = q;
        }
        Err(Fault::numerical("simplex iteration limit reached"))
    };
    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    let (binv, y1) = run(&mut basis, &phase1, true)?;
    let xb = &binv * &b;
    let infeas: f64 = basis.iter().zip(xb.iter()).filter(|(&j, _)| j >= n).map(|(_, v)| *v).sum();
    if infeas > 1e-9 * b.amax().max(1.0) {
        let cert: Vec<String> = (0..m).map(|i| format!("{:.6e}", -y1[i] * flip[i])).collect();
        return Err(Fault::infeasible(
            "target lies outside the gridded reachable set",
            Some(format!("violated hyperplane normal [{}]", cert.join(", "))),
        ));
    }
    // drive zero-level artificials out where possible
    for i in 0..m {
        if basis[i] >= n {
            let bm = DMatrix::from_columns(&basis.iter().map(|&j| column(j)).collect::<Vec<_>>());
            let binv = bm.try_inverse().ok_or_else(|| Fault::numerical("singular simplex basis"))?;
            if let Some(j) = (0..n).find(|j| !basis.contains(j) && (&binv * column(*j))[i].abs() > 1e-9) {
                basis[i] = j;
            }
        }
    }
    let phase2 = |j: usize| if j >= n { 0.0 } else { 1.0 };
    let (binv, y) = run(&mut basis, &phase2, false)?;
    let xb = &binv * &b;
    let mut x = DVector::zeros(n);
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = xb[i].max(0.0);
        }
    }
    let dual = DVector::from_iterator(m, (0..m).map(|i| y[i] * flip[i]));
    Ok(LpOutcome { value: x.sum(), x, dual })
}

fn planning_input(chief: &OrbitElements, t_f: f64, t: f64) -> Mat63 {
    keplerian_stm_matrix(chief.mean_motion(), t_f - t) * gamma_tilde(chief, true_anomaly_at(chief, t))
}

fn rows_of(g: &Mat63, rows: &[usize], u: &Vector3<f64>) -> DVector<f64> {
    let full = g * u;
    DVector::from_iterator(rows.len(), rows.iter().map(|&r| full[r]))
}

/// sup over t of the best-impulse support of λ, with the maximizing (t, u).
fn continuous_support(lambda: &DVector<f64>, scope: LpScope, chief: &OrbitElements, t_f: f64) -> (f64, Vec<(f64, Vector3<f64>, f64)>) {
    let rows = scope.rows();
    let mut l6 = nalgebra::Vector6::zeros();
    for (k, &r) in rows.iter().enumerate() {
        l6[r] = lambda[k];
    }
    let s = |t: f64| {
        let g = planning_input(chief, t_f, t);
        scope.best_impulse(&(g.transpose() * l6))
    };
    let n = ((t_f / chief.period()) * 4096.0).ceil().max(4096.0) as usize;
    let h = t_f / n as f64;
    let vals: Vec<f64> = (0..=n).map(|k| s(k as f64 * h).0).collect();
    let mut peaks = Vec::new();
    for k in 0..=n {
        let left = if k == 0 { f64::NEG_INFINITY } else { vals[k - 1] };
        let right = if k == n { f64::NEG_INFINITY } else { vals[k + 1] };
        if vals[k] >= left && vals[k] >= right {
            let lo = (k as f64 - 1.0).max(0.0) * h;
            let hi = ((k + 1) as f64 * h).min(t_f);
            let (t, v) = golden_max(|t| s(t).0, lo, hi, 60);
            let (t, v) = if vals[k] > v { (k as f64 * h, vals[k]) } else { (t, v) };
            peaks.push((t, s(t).1, v));
        }
    }
    let top = peaks.iter().map(|p| p.2).fold(0.0, f64::max);
    (top, peaks)
}

fn solve_lp(
    target: &PseudoState,
    chief: &OrbitElements,
    t_f: f64,
    scope: LpScope,
    cands: &[Candidate],
) -> Result<(LpOutcome, DVector<f64>)> {
    let rows = scope.rows();
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&r| target.tilde[r]));
    let cols: Vec<DVector<f64>> = cands
        .iter()
        .map(|c| rows_of(&planning_input(chief, t_f, c.t), rows, &Vector3::from(c.dir)))
        .collect();
    if cols.is_empty() {
        return Err(Fault::domain("linear program needs at least one candidate impulse"));
    }
    let a = DMatrix::from_columns(&cols);
    Ok((simplex(&a, &b)?, b))
}

fn package(
    out: &LpOutcome,
    b: &DVector<f64>,
    cands: &[Candidate],
    scope: LpScope,
    chief: &OrbitElements,
    t_f: f64,
    grid: (usize, usize),
) -> LowerBoundResult {
    let (sup, _) = continuous_support(&out.dual, scope, chief, t_f);
    let lb = if sup > 0.0 { out.dual.dot(b) / sup.max(1.0) } else { 0.0 };
    let mut lam = [0.0; 6];
    for (k, &r) in scope.rows().iter().enumerate() {
        lam[r] = out.dual[k];
    }
    let mut maneuvers = Vec::new();
    for (j, c) in cands.iter().enumerate() {
        if out.x[j] > 1e-12 {
            let dv = Vector3::from(c.dir) * out.x[j];
            maneuvers.push(Maneuver { t: c.t, nu: true_anomaly_at(chief, c.t), dv_rtn: dv.into() });
        }
    }
    maneuvers.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut active: Vec<f64> = maneuvers.iter().map(|m| m.t).collect();
    active.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    LowerBoundResult {
        dv_lb: lb.max(0.0),
        dv_lp: out.value,
        support_vector: lam,
        active_epochs: active,
        grid,
        scope,
        iterations: 0,
        converged: false,
        candidates: cands.to_vec(),
        maneuvers,
    }
}

/// Gridded minimum-cost LP. `n_times` is per orbit.
pub fn lower_bound_lp(
    target: &PseudoState,
    chief: &OrbitElements,
    t_f: f64,
    n_times: usize,
    n_dirs: usize,
    scope: LpScope,
) -> Result<LowerBoundResult> {
    if t_f <= 0.0 {
        return Err(Fault::domain("reconfiguration time must be positive"));
    }
    let orbits = t_f / chief.period();
    let nt = ((n_times as f64) * orbits).ceil().max(2.0) as usize + 1;
    let dirs = scope.directions(n_dirs);
    let mut cands = Vec::with_capacity(nt * dirs.len());
    for k in 0..nt {
        let t = t_f * k as f64 / (nt - 1) as f64;
        for d in &dirs {
            cands.push(Candidate { t, dir: (*d).into() });
        }
    }
    let (out, b) = solve_lp(target, chief, t_f, scope, &cands)?;
    Ok(package(&out, &b, &cands, scope, chief, t_f, (nt, n_dirs)))
}

/// Exchange refinement: add epochs where the dual support exceeds one, drop
/// inactive ones, re-solve. The reported bound is the best seen so far.
pub fn refine_lower_bound(
    result: &LowerBoundResult,
    target: &PseudoState,
    chief: &OrbitElements,
    t_f: f64,
) -> Result<LowerBoundResult> {
    let scope = result.scope;
    let mut best = result.clone();
    let mut current = result.clone();
    for it in 1..=50 {
        let mut l = DVector::zeros(scope.rows().len());
        for (k, &r) in scope.rows().iter().enumerate() {
            l[k] = current.support_vector[r];
        }
        let (sup, peaks) = continuous_support(&l, scope, chief, t_f);
        if sup <= 1.0 + 1e-9 {
            best.iterations = it - 1;
            best.converged = true;
            return Ok(best);
        }
        let mut cands: Vec<Candidate> = current
            .maneuvers
            .iter()
            .map(|m| Candidate { t: m.t, dir: m.dv().normalize().into() })
            .collect();
        for (t, u, v) in peaks {
            if v > 1.0 + 1e-9 {
                cands.push(Candidate { t, dir: u.into() });
            }
        }
        let (out, b) = solve_lp(target, chief, t_f, scope, &cands)?;
        let mut next = package(&out, &b, &cands, scope, chief, t_f, result.grid);
        let gain = next.dv_lb - best.dv_lb;
        next.iterations = it;
        if next.dv_lb > best.dv_lb {
            best = LowerBoundResult { iterations: it, ..next.clone() };
        } else {
            best.iterations = it;
        }
        if gain.abs() < 1e-5 && (best.dv_lp - best.dv_lb) <= 1e-3 * best.dv_lp.max(1e-12) {
            best.converged = true;
            return Ok(best);
        }
        current = next;
    }
    best.converged = false;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{cartesian_to_oe, propagate_mean, roe_to_deputy, RoeState};
    use crate::planner::burn_effect;

    fn test1_chief() -> OrbitElements {
        OrbitElements::new(15000e3, 0.5, 10f64.to_radians(), 0.0, 20f64.to_radians(), 0.0).unwrap()
    }

    #[test]
    fn gve_matches_cartesian_finite_difference() {
        let oe = OrbitElements::new(12000e3, 0.3, 0.6, 0.4, 1.1, 2.0).unwrap().with_flavor(Flavor::Osculating);
        let (r, v) = oe_to_cartesian(&oe);
        let rtn = rtn_frame(&r, &v);
        for f in [Vector3::new(1e-3, 0.0, 0.0), Vector3::new(0.0, 1e-3, 0.0), Vector3::new(0.0, 0.0, 1e-3)] {
            let got = gve_rates(&el_of(&oe), &f).unwrap();
            let dt = 1.0;
            let dv = rtn.transpose() * f * dt;
            let p = cartesian_to_oe(&r, &(v + dv), Flavor::Osculating).unwrap();
            let m = cartesian_to_oe(&r, &(v - dv), Flavor::Osculating).unwrap();
            let pe = el_of(&p);
            let me = el_of(&m);
            for j in 0..6 {
                let d = if j >= 3 { wrap_pi(pe[j] - me[j]) } else { pe[j] - me[j] } / (2.0 * dt);
                let want = if j == 5 { d + oe.mean_motion() } else { d };
                let scale = if j == 0 { 1e-3 } else { 1e-12 };
                assert!((got[j] - want).abs() <= 1e-5 * want.abs() + scale, "{j}: {} vs {want}", got[j]);
            }
        }
    }

    #[test]
    fn keplerian_roe_constant() {
        let c = test1_chief();
        let roe = RoeState::from_meters(&nalgebra::Vector6::new(30.0, -10500.0, 0.0, -50.0, 0.0, -30.0), c.a, RoeForm::QuasiNonsingular);
        let d = roe_to_deputy(&c, &roe).unwrap();
        let t = 5.0 * c.period();
        let opts = PropagationOptions { force: ForceModel::Kepler, ..Default::default() };
        let r = propagate_with_burns(&c, &d, &[], t, RoeForm::QuasiNonsingular, &opts).unwrap();
        // exact two-body drift, second-order δλ terms included
        let (cf, df) = (propagate_mean(&c, t, 0.0), propagate_mean(&d, t, 0.0));
        let want = oe_to_roe(&cf, &df, RoeForm::QuasiNonsingular).unwrap().to_meters(c.a);
        for k in 0..6 {
            assert!((r.achieved_final_roe[k] - want[k]).abs() < 1e-3, "{k}: {}", r.achieved_final_roe[k] - want[k]);
        }
    }

    #[test]
    fn perigee_burn_matches_control_input() {
        let c = test1_chief();
        let d = c;
        let t = 0.5 * c.period();
        let m = Maneuver { t: 0.1 * c.period(), nu: true_anomaly_at(&c, 0.1 * c.period()), dv_rtn: [0.0, 0.01, 0.0] };
        let opts = PropagationOptions { force: ForceModel::Kepler, step: Some(c.period() / 20000.0), ..Default::default() };
        let r = propagate_with_burns(&c, &d, &[m], t, RoeForm::QuasiNonsingular, &opts).unwrap();
        let want = burn_effect(&c, t, m.t, m.nu, &m.dv());
        assert!((r.achieved_final_roe[0] / want[0] - 1.0).abs() < 1e-3);
        assert!((r.applied_impulse[0] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn mean_osc_round_trip() {
        let c = test1_chief();
        let osc = mean_to_osc(&c, ForceModel::KeplerJ2, None).unwrap();
        let back = osc_to_mean(&osc, ForceModel::KeplerJ2, None).unwrap();
        assert!((back.a - c.a).abs() < 1e-3);
        assert!((back.e - c.e).abs() < 1e-10);
        assert!(wrap_pi(back.argp - c.argp).abs() < 1e-9);
        assert!((osc.a - c.a).abs() > 1.0);
    }

    #[test]
    fn lp_vertex_column_costs_one() {
        let c = test1_chief();
        let t = 2.2 * c.period();
        let lp0 = lower_bound_lp(&PseudoState::from_tilde(nalgebra::Vector6::zeros(), &c, RoeForm::QuasiNonsingular), &c, t, 128, 64, LpScope::OutOfPlane);
        assert!(lp0.is_err() || lp0.unwrap().dv_lp == 0.0);
        let nt = ((128.0 * 2.2f64).ceil() as usize) + 1;
        let tk = t * 37.0 / (nt - 1) as f64;
        let col = planning_input(&c, t, tk) * Vector3::new(0.0, 0.0, 1.0);
        let p = PseudoState::from_tilde(col, &c, RoeForm::QuasiNonsingular);
        let r = lower_bound_lp(&p, &c, t, 128, 64, LpScope::OutOfPlane).unwrap();
        assert!(r.dv_lp <= 1.0 + 1e-9);
        assert!(r.dv_lb <= r.dv_lp + 1e-12);
    }

    #[test]
    fn simplex_small_problem() {
        // every feasible point costs 1.5
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, -1.0]);
        let b = DVector::from_vec(vec![2.0, -0.5]);
        let o = simplex(&a, &b).unwrap();
        assert!((o.value - 1.5).abs() < 1e-12);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 3.0]);
        let o = simplex(&a, &DVector::from_vec(vec![3.0])).unwrap();
        assert!((o.value - 1.0).abs() < 1e-12 && (o.dual[0] - 1.0 / 3.0).abs() < 1e-12);
        let b = DVector::from_vec(vec![-1.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(simplex(&a, &b), Err(Fault::Infeasible { .. })));
    }
}
