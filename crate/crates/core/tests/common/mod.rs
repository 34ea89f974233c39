#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::Vector2;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

use roe_core::dvmin::{dvmin_da_dl, dvmin_de_vec, dvmin_di_vec};
use roe_core::dynamics::{gamma_form, gamma_tilde, Mat6, OrbitElements, PseudoState, RoeForm, Vec6};
use roe_core::error::{confidence_box, propagate_nonlinear_error, ErrorModel, ErrorScenario, ErrorSource};
use roe_core::planner::{
    achieved, maneuvers_from_records, nested_set, optimal_epochs, plan_full, plan_records, Maneuver, PlanOptions,
};
use roe_core::reachset::{sample_hull, Plane};
use roe_core::scenario::{Scenario, ScenarioConfig};
use roe_core::validate::{lower_bound_lp, LpScope};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    let cfg: ScenarioConfig = serde_json::from_str(&text).expect("scenario json");
    cfg.resolve().expect("valid scenario")
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

pub fn describe<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> std::result::Result<(), String> {
    r.map_err(|e| format!("{e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Eccentric chief with bounded conditioning.
pub fn chief_strategy() -> impl Strategy<Value = OrbitElements> {
    (7000e3..42000e3f64, 0.05..0.8f64, 0.1..3.0f64, 0.0..6.28f64, 0.0..6.28f64, 0.0..6.28f64)
        .prop_map(|(a, e, i, raan, argp, m)| OrbitElements::new(a, e, i, raan, argp, m).unwrap())
}

fn tilde_strategy() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-500.0..500.0f64)
}

// ---------------------------------------------------------------------------
// Property suites shared by the property and acceptance targets
// ---------------------------------------------------------------------------

/// dv_min(k·x) = k·dv_min(x) in every plane.
pub fn homogeneity(cases: u32) -> std::result::Result<(), String> {
    let strat = (chief_strategy(), tilde_strategy(), 0.05..20.0f64, 1.2..6.0f64);
    describe(runner(cases).run(&strat, |(c, v, k, orbits)| {
        let t = orbits * c.period();
        let x = Vec6::from(v);
        let p1 = PseudoState::from_tilde(x, &c, RoeForm::Modified);
        let p2 = PseudoState::from_tilde(x * k, &c, RoeForm::Modified);
        let de1 = dvmin_de_vec(Vector2::new(v[2], v[3]), &c).unwrap().dv_min;
        let de2 = dvmin_de_vec(Vector2::new(v[2], v[3]) * k, &c).unwrap().dv_min;
        let di1 = dvmin_di_vec(Vector2::new(v[4], v[5]), &c).unwrap().dv_min;
        let di2 = dvmin_di_vec(Vector2::new(v[4], v[5]) * k, &c).unwrap().dv_min;
        let dl1 = dvmin_da_dl(&p1, &c, t).unwrap().dv_min;
        let dl2 = dvmin_da_dl(&p2, &c, t).unwrap().dv_min;
        for (name, a, b) in [("de", de1, de2), ("di", di1, di2), ("dadl", dl1, dl2)] {
            ensure(rel(a * k, b) < 1e-8, || format!("{name}: {a}·{k} vs {b}"))?;
        }
        Ok(())
    }))
}

/// Hull vertices at cost k·c are k times those at c.
pub fn hull_scaling(cases: u32) -> std::result::Result<(), String> {
    let planes = prop::sample::select(vec![Plane::DeTilde, Plane::Dadl, Plane::DiTilde]);
    let strat = (chief_strategy(), planes, 1e-3..0.5f64, 0.1..10.0f64, 1.0..4.0f64);
    describe(runner(cases).run(&strat, |(c, plane, cost, k, orbits)| {
        let t = orbits * c.period();
        let h1 = sample_hull(plane, cost, &c, t, 96).unwrap();
        let h2 = sample_hull(plane, cost * k, &c, t, 96).unwrap();
        ensure(h1.vertices.len() == h2.vertices.len(), || "vertex count changed".into())?;
        let scale = h1.diameter().max(1e-12);
        for (a, b) in h1.vertices.iter().zip(&h2.vertices) {
            let d = (a.x * k - b.x).hypot(a.y * k - b.y);
            ensure(d <= 1e-9 * scale * k, || format!("{plane:?} vertex off by {d}"))?;
        }
        Ok(())
    }))
}

/// Closed-form plane minima against the LP oracle: max rule ≤ LP optimum, and the
/// certified bound does not exceed the exact single-plane minimum.
pub fn max_rule_sandwich(cases: u32) -> std::result::Result<(), String> {
    let strat = (chief_strategy(), tilde_strategy(), 1.2..3.0f64);
    let slack = 0.005;
    describe(runner(cases).run(&strat, |(c, v, orbits)| {
        let t = orbits * c.period();
        let p = PseudoState::from_tilde(Vec6::from(v), &c, RoeForm::Modified);
        let de = dvmin_de_vec(p.e_tilde(), &c).unwrap().dv_min;
        let di = dvmin_di_vec(p.i_tilde(), &c).unwrap().dv_min;
        let lp_e = lower_bound_lp(&p, &c, t, 48, 32, LpScope::DeOnly).unwrap();
        let lp_i = lower_bound_lp(&p, &c, t, 48, 2, LpScope::OutOfPlane).unwrap();
        for (name, cf, lp) in [("de", de, &lp_e), ("di", di, &lp_i)] {
            ensure(lp.dv_lb <= cf * (1.0 + slack) + 1e-12, || format!("{name}: lb {} > closed {cf}", lp.dv_lb))?;
            ensure(cf <= lp.dv_lp * (1.0 + slack) + 1e-12, || format!("{name}: closed {cf} > lp {}", lp.dv_lp))?;
        }
        Ok(())
    }))
}

/// Γ in the modified form and in the planning frame has zero in-plane/out-of-plane blocks.
pub fn gamma_decoupling(cases: u32) -> std::result::Result<(), String> {
    let strat = (chief_strategy(), -20.0..20.0f64);
    describe(runner(cases).run(&strat, |(c, nu)| {
        let g = gamma_form(&c, nu, RoeForm::Modified).unwrap().matrix;
        let gt = gamma_tilde(&c, nu);
        for m in [g, gt] {
            for r in 0..4 {
                ensure(m[(r, 2)] == 0.0, || format!("row {r} has an N entry"))?;
            }
            for r in 4..6 {
                ensure(m[(r, 0)] == 0.0 && m[(r, 1)] == 0.0, || format!("row {r} has an R/T entry"))?;
            }
        }
        Ok(())
    }))
}

/// Targets built from the nested set are met by the plan: the achieved pseudo-state
/// of each emitted plan equals the forward model of its burns, the a/λ/ĩ rows close
/// onto the target, and the plan survives a record round trip.
pub fn plan_closure(cases: u32) -> std::result::Result<(), String> {
    let strat = (
        chief_strategy(),
        prop::array::uniform2(-400.0..400.0f64),
        prop::array::uniform3(0.05..1.0f64),
        prop::array::uniform2(-0.2..0.2f64),
        2.2..4.0f64,
    );
    describe(runner(cases).run(&strat, |(c, e, w, ifrac, orbits)| {
        let t = orbits * c.period();
        let seed = PseudoState::from_tilde(Vec6::new(0.0, 0.0, e[0], e[1], 0.0, 0.0), &c, RoeForm::Modified);
        let a = roe_core::dvmin::assess_dominance(&seed, &c, t).unwrap();
        let ep = match optimal_epochs(&a, &c, t) {
            Ok(ep) if ep.in_plane.len() >= 3 => ep,
            _ => return Ok(()),
        };
        let ns = nested_set(&ep.in_plane, a.dv_min_in_plane, &c, t).unwrap();
        let wsum: f64 = w.iter().sum();
        let mut tgt = Vec6::zeros();
        for k in 0..3 {
            tgt += ns.column(k) * (w[k] / wsum);
        }
        let e_norm = (e[0] * e[0] + e[1] * e[1]).sqrt();
        tgt[2] = e[0];
        tgt[3] = e[1];
        tgt[4] = ifrac[0] * e_norm;
        tgt[5] = ifrac[1] * e_norm;
        let p = PseudoState::from_tilde(tgt, &c, RoeForm::Modified);
        let rep = match plan_full(&p, &c, t, &PlanOptions::default()) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        let scale = tgt.amax().max(1.0);
        for plan in &rep.plans {
            let fwd = achieved(&c, t, &plan.maneuvers);
            for j in 0..6 {
                ensure((fwd[j] - plan.achieved_pseudo_state[j]).abs() <= 1e-9 * scale, || format!("row {j} not closed"))?;
            }
            if plan.optimality.label() == "optimal" {
                for j in [0, 1, 4, 5] {
                    ensure((fwd[j] - tgt[j]).abs() <= 1e-9 * scale, || format!("residual row {j}: {}", fwd[j] - tgt[j]))?;
                }
            }
            let back: Vec<Maneuver> = maneuvers_from_records(&plan_records(plan));
            ensure(back == plan.maneuvers, || "record round trip changed the burns".into())?;
        }
        Ok(())
    }))
}

fn psd_strategy() -> impl Strategy<Value = Mat6> {
    (prop::collection::vec(-3.0..3.0f64, 36), prop::array::uniform6(0.0..1.0f64), 0..3usize).prop_map(|(q, s, drop)| {
        let a = Mat6::from_iterator(q.into_iter());
        let mut d = Vec6::from(s.map(|x| x * x + 1e-3));
        for k in 0..drop {
            d[k] = 0.0;
        }
        let qr = a.qr().q();
        qr * Mat6::from_diagonal(&d) * qr.transpose()
    })
}

/// Sampled points of the χ² ellipsoid stay inside the box. The per-axis support
/// points reach each face, and shrinking any half-width by 0.5% leaves one outside.
pub fn confidence_box_oracle(cases: u32, draws: usize) -> std::result::Result<(), String> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let strat = (psd_strategy(), any::<u64>());
    describe(runner(cases).run(&strat, |(v, seed)| {
        let b = confidence_box(&Vec6::zeros(), &v, 0.95).unwrap();
        let t = b.transform;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut reach = [0.0f64; 6];
        for _ in 0..draws {
            let z = Vec6::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let x = t * z.normalize();
            ensure(b.contains(&x, 1e-9), || "sample outside box".into())?;
            for j in 0..6 {
                reach[j] = reach[j].max(x[j].abs());
            }
        }
        for j in 0..6 {
            let row = t.row(j).transpose();
            if row.norm() == 0.0 {
                continue;
            }
            let x = t * row.normalize();
            ensure(b.contains(&x, 1e-9), || "support point outside box".into())?;
            ensure(x[j].abs() >= 0.999 * b.half_widths[j], || format!("axis {j} not tight"))?;
            ensure(x[j].abs() > 0.995 * b.half_widths[j], || format!("axis {j} survives a 0.5% shrink"))?;
            ensure(reach[j] <= b.half_widths[j] * (1.0 + 1e-9), || "draw beyond face".into())?;
        }
        Ok(())
    }))
}

pub fn test2_like_scenario(chief: OrbitElements, burns: &[(f64, [f64; 3])]) -> ErrorScenario {
    let maneuvers = burns
        .iter()
        .map(|&(t, dv)| Maneuver { t, nu: roe_core::dynamics::true_anomaly_at(&chief, t), dv_rtn: dv })
        .collect();
    ErrorScenario { chief, t_f: 2.5 * chief.period(), maneuvers, roe0: Vec6::new(-100.0, -43.0, 248.0, 108.0, 63.0, 0.0) }
}

/// Same seed, different thread counts, bit-identical Monte-Carlo output.
pub fn monte_carlo_threads(cases: u32, draws: usize) -> std::result::Result<(), String> {
    let pools: Vec<rayon::ThreadPool> =
        [1, 3, 8].iter().map(|&n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()).collect();
    let strat = (chief_strategy(), any::<u64>(), prop::bool::ANY, prop::array::uniform3(-0.05..0.05f64));
    describe(runner(cases).run(&strat, |(c, seed, time_source, dv)| {
        let p = c.period();
        let sc = test2_like_scenario(c, &[(0.2 * p, dv), (1.1 * p, [0.0, 0.0, dv[2]]), (2.0 * p, [dv[1], dv[0], 0.0])]);
        let model = if time_source {
            ErrorModel::scalar(ErrorSource::BurnTime, 0.0, 60.0)
        } else {
            let d = Vec6::new(1.0, 1e-10, 1e-10, 1e-10, 1e-10, 1e-10);
            ErrorModel::vector(ErrorSource::InitialOe, Vec6::zeros(), Mat6::from_diagonal(&d))
        };
        let runs: Vec<_> =
            pools.iter().map(|pool| pool.install(|| propagate_nonlinear_error(&sc, &model, draws, seed).unwrap())).collect();
        for r in &runs[1..] {
            ensure(r.covariance_roe == runs[0].covariance_roe && r.mean_roe_error == runs[0].mean_roe_error, || {
                "thread count changed the result".into()
            })?;
        }
        Ok(())
    }))
}
