//! Text, JSON and CSV views of library results. No arithmetic beyond display units.

use std::fmt::Write as _;

use roe_core::error::ErrorMethod;
use roe_core::planner::{plan_records, ManeuverPlan, PlanRecord, PlanReport};
use roe_core::scenario::{ErrorAnalysisRow, ValidationReport, ROE_NAMES};
use roe_core::{ConvexHull2D, DominanceAssessment, Scenario};
use serde::Serialize;

use crate::Format;

fn snake<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "?".into(),
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn csv_rows<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
}

fn method(m: &ErrorMethod) -> String {
    match m {
        ErrorMethod::Analytic => "analytic".into(),
        ErrorMethod::MonteCarlo { n, seed, rejected } => format!("monte_carlo (n {n}, seed {seed}, rejected {rejected})"),
    }
}

fn pct(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "-".into()
    }
}

pub fn records_json(plan: &ManeuverPlan) -> String {
    json(&plan_records(plan))
}

#[derive(Serialize)]
struct KeyValue {
    key: &'static str,
    value: String,
}

pub fn dvmin(s: &Scenario, a: &DominanceAssessment, fmt: Format) -> String {
    let kv = vec![
        ("dv_min_de_mps", format!("{:.9}", a.per_plane.de)),
        ("dv_min_da_mps", format!("{:.9}", a.per_plane.da)),
        ("dv_min_dadl_mps", format!("{:.9}", a.per_plane.dl)),
        ("dv_min_di_mps", format!("{:.9}", a.per_plane.di)),
        ("dv_min_in_plane_mps", format!("{:.9}", a.dv_min_in_plane)),
        ("dv_min_out_of_plane_mps", format!("{:.9}", a.dv_min_out_of_plane)),
        ("dv_min_max_mps", format!("{:.9}", a.dv_min)),
        ("dv_min_total_mps", format!("{:.9}", a.dv_min_total)),
        ("dominant_plane", snake(&a.dominant_plane)),
        ("dominant_case", snake(&a.dominant_case)),
        ("in_plane_plane", snake(&a.in_plane_plane)),
        ("in_plane_case", snake(&a.in_plane_case)),
        ("de_exceeds_da", a.de_exceeds_da.to_string()),
        ("dl_inside_da_hull", a.dl_inside_da_hull.to_string()),
        ("near_circular", a.near_circular.to_string()),
    ];
    match fmt {
        Format::Json => json(a),
        Format::Csv => csv_rows(&kv.into_iter().map(|(key, value)| KeyValue { key, value }).collect::<Vec<_>>()),
        Format::Text => {
            let mut o = format!("scenario {}  T = {:.3} s\n", s.name, s.t_f);
            for (k, v) in kv {
                let _ = writeln!(o, "  {k:<26} {v}");
            }
            if let Some(nu) = a.nu_star {
                let _ = writeln!(o, "  {:<26} {nu:.6}", "nu_star_rad");
            }
            o
        }
    }
}

#[derive(Serialize)]
struct PlanView {
    index: usize,
    total_dv_mps: f64,
    dv_min_mps: f64,
    optimality: String,
    excess_fraction: f64,
    residual_m: [f64; 6],
    burns: Vec<PlanRecord>,
}

#[derive(Serialize)]
struct PlansView<'a> {
    scenario: &'a str,
    dv_min_in_plane_mps: f64,
    dv_min_out_of_plane_mps: f64,
    dv_min_total_mps: f64,
    in_plane_candidates: usize,
    out_of_plane_candidates: usize,
    plans: Vec<PlanView>,
    notes: &'a [String],
}

#[derive(Serialize)]
struct PlanCsvRow {
    plan: usize,
    epoch_s: f64,
    nu_rad: f64,
    dv_r_mps: f64,
    dv_t_mps: f64,
    dv_n_mps: f64,
    cost_mps: f64,
    optimality: String,
    excess_fraction: f64,
}

pub fn plans(s: &Scenario, rep: &PlanReport, fmt: Format) -> String {
    match fmt {
        Format::Json => json(&PlansView {
            scenario: &s.name,
            dv_min_in_plane_mps: rep.assessment.dv_min_in_plane,
            dv_min_out_of_plane_mps: rep.assessment.dv_min_out_of_plane,
            dv_min_total_mps: rep.assessment.dv_min_total,
            in_plane_candidates: rep.in_plane_candidates,
            out_of_plane_candidates: rep.out_of_plane_candidates,
            plans: rep
                .plans
                .iter()
                .enumerate()
                .map(|(index, p)| PlanView {
                    index,
                    total_dv_mps: p.total_dv,
                    dv_min_mps: p.dv_min,
                    optimality: p.optimality.label(),
                    excess_fraction: p.optimality.excess_fraction(),
                    residual_m: p.residual,
                    burns: plan_records(p),
                })
                .collect(),
            notes: &rep.notes,
        }),
        Format::Csv => {
            let rows: Vec<PlanCsvRow> = rep
                .plans
                .iter()
                .enumerate()
                .flat_map(|(k, p)| {
                    plan_records(p).into_iter().map(move |r| PlanCsvRow {
                        plan: k,
                        epoch_s: r.epoch_s,
                        nu_rad: r.nu_rad,
                        dv_r_mps: r.dv_r_mps,
                        dv_t_mps: r.dv_t_mps,
                        dv_n_mps: r.dv_n_mps,
                        cost_mps: r.cost_mps,
                        optimality: r.optimality,
                        excess_fraction: r.excess_fraction,
                    })
                })
                .collect();
            csv_rows(&rows)
        }
        Format::Text => {
            let a = &rep.assessment;
            let mut o = format!("scenario {}  T = {:.3} s\n", s.name, s.t_f);
            let _ = writeln!(
                o,
                "dv_min in-plane {:.6}  out-of-plane {:.6}  total {:.6} m/s",
                a.dv_min_in_plane, a.dv_min_out_of_plane, a.dv_min_total
            );
            let _ = writeln!(
                o,
                "{} candidates ({} in-plane x {} out-of-plane)",
                rep.plans.len(),
                rep.in_plane_candidates,
                rep.out_of_plane_candidates
            );
            for (k, p) in rep.plans.iter().enumerate() {
                let _ = writeln!(o, "\nplan {k:02}  total {:.6} m/s  {}", p.total_dv, p.optimality.label());
                for m in &p.maneuvers {
                    let _ = writeln!(
                        o,
                        "  t {:>12.3} s  nu {:>9.5} rad  dv_rtn [{:>10.6}, {:>10.6}, {:>10.6}] m/s",
                        m.t, m.nu, m.dv_rtn[0], m.dv_rtn[1], m.dv_rtn[2]
                    );
                }
            }
            for n in &rep.notes {
                let _ = writeln!(o, "note: {n}");
            }
            o
        }
    }
}

#[derive(Serialize)]
struct HullSummary<'a> {
    plane: &'a str,
    cost_mps: f64,
    samples: usize,
    vertices: usize,
    diameter_m: f64,
    degenerate: bool,
    hull: &'a ConvexHull2D,
}

pub fn hull(s: &Scenario, h: &ConvexHull2D, samples: usize, fmt: Format) -> String {
    let view = HullSummary {
        plane: h.plane.name(),
        cost_mps: h.cost,
        samples,
        vertices: h.vertices.len(),
        diameter_m: h.diameter(),
        degenerate: h.degenerate,
        hull: h,
    };
    match fmt {
        Format::Text => {
            let mut o = format!("scenario {}  plane {}  cost {} m/s  T = {:.3} s\n", s.name, view.plane, h.cost, s.t_f);
            let _ = writeln!(
                o,
                "{} samples, {} hull vertices, diameter {:.6} m{}",
                samples,
                view.vertices,
                view.diameter_m,
                if h.degenerate { " (degenerate)" } else { "" }
            );
            for v in &h.vertices {
                let _ = writeln!(o, "  {:>16.6} {:>16.6}  nu {:.6}", v.x, v.y, v.nu);
            }
            o
        }
        _ => json(&view),
    }
}

pub fn validation(s: &Scenario, rep: &ValidationReport, fmt: Format) -> String {
    match fmt {
        Format::Json => json(rep),
        Format::Csv => csv_rows(&rep.rows),
        Format::Text => {
            let mut o = format!(
                "scenario {}  force {}  form {}\n",
                s.name,
                snake(&rep.force),
                snake(&rep.form)
            );
            let _ = writeln!(
                o,
                "{:<6} {:>14} {:>14} {:>14} {:>12} {:>9} {:>10}  ok",
                "roe", "desired [m]", "predicted [m]", "achieved [m]", "error [m]", "error %", "tol [m]"
            );
            for r in &rep.rows {
                let _ = writeln!(
                    o,
                    "{:<6} {:>14.3} {:>14.3} {:>14.3} {:>12.3} {:>9} {:>10.3}  {}",
                    r.name,
                    r.desired_m,
                    r.predicted_m,
                    r.achieved_m,
                    r.error_m,
                    pct(r.error_pct),
                    r.tolerance_m,
                    if r.within { "yes" } else { "NO" }
                );
            }
            let _ = writeln!(o, "all within tolerance: {}", rep.all_within);
            for c in &rep.oracle {
                let _ = writeln!(
                    o,
                    "oracle {}: lb {:.6}  lp {:.6}  closed form {:.6}  plan {:.6} m/s  gap {:+.3}%  sandwich {}",
                    snake(&c.scope),
                    c.lower_bound.dv_lb,
                    c.lower_bound.dv_lp,
                    c.closed_form,
                    c.plan_cost,
                    100.0 * c.gap,
                    if c.sandwich_holds { "holds" } else { "VIOLATED" }
                );
            }
            o
        }
    }
}

#[derive(Serialize)]
struct ErrorCsvRow {
    source: String,
    roe: &'static str,
    mean_m: f64,
    variance_m2: f64,
    center_m: f64,
    lower_m: f64,
    upper_m: f64,
    half_width_m: f64,
}

pub fn errors(s: &Scenario, rows: &[ErrorAnalysisRow], fmt: Format) -> String {
    match fmt {
        Format::Json => json(rows),
        Format::Csv => {
            let out: Vec<ErrorCsvRow> = rows
                .iter()
                .flat_map(|r| {
                    let b = r.bounds.bounds();
                    (0..6).map(move |k| ErrorCsvRow {
                        source: snake(&r.source),
                        roe: ROE_NAMES[k],
                        mean_m: r.report.mean_roe_error[k],
                        variance_m2: r.report.covariance_roe[(k, k)],
                        center_m: r.bounds.center[k],
                        lower_m: b[k][0],
                        upper_m: b[k][1],
                        half_width_m: r.bounds.half_widths[k],
                    })
                })
                .collect();
            csv_rows(&out)
        }
        Format::Text => {
            let mut o = format!("scenario {}\n", s.name);
            for r in rows {
                let g = r.report.ranges();
                let _ = writeln!(o, "\nsource {}  method {}", snake(&r.source), method(&r.report.method));
                let _ = writeln!(o, "  |variance|   min {:.6e}  max {:.6e}", g.variance[0], g.variance[1]);
                let _ = writeln!(o, "  |covariance| min {:.6e}  max {:.6e}", g.covariance[0], g.covariance[1]);
                let _ = writeln!(
                    o,
                    "  {:.0}% bounds (chi2 {:.4}):",
                    100.0 * r.bounds.confidence,
                    r.bounds.chi2
                );
                let b = r.bounds.bounds();
                for k in 0..6 {
                    let _ = writeln!(
                        o,
                        "    {:<5} [{:>14.4}, {:>14.4}]  half-width {:>10.4} m",
                        ROE_NAMES[k], b[k][0], b[k][1], r.bounds.half_widths[k]
                    );
                }
            }
            o
        }
    }
}
