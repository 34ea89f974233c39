//! Scenario configuration and the end-to-end calls built on it.
//!
//! Config structs mirror the on-disk JSON layout. Quantities carry their unit in
//! the key (`a_km`, `i_deg`, ...) and are stored in SI after `resolve`.

use serde::{Deserialize, Serialize};

use crate::dvmin::{assess_dominance, DominanceAssessment};
use crate::dynamics::{
    oe_to_roe, pseudo_state, roe_to_deputy, stm, Flavor, Mat6, OrbitElements, PseudoState, RoeForm, RoeState,
    StmModel, Vec6,
};
use crate::error::{
    cartesian_covariance_to_elements, confidence_box, confidence_box_chi2, final_roe, propagate_error,
    relative_cartesian_covariance_to_roe, relative_rtn_state, ConfidenceBox, ErrorModel, ErrorReport, ErrorScenario, ErrorSource,
};
use crate::fault::{Fault, Result};
use crate::planner::{achieved, plan_full, Maneuver, PlanOptions, PlanReport};
use crate::validate::{
    lower_bound_lp, propagate_with_burns, refine_lower_bound, ForceModel, LowerBoundResult, LpScope,
    PropagationOptions, PropagationResult,
};

// ---------------------------------------------------------------------------
// On-disk layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiefConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_m: Option<f64>,
    pub e: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raan_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raan_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argp_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argp_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_anomaly_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_anomaly_rad: Option<f64>,
    #[serde(default)]
    pub flavor: Flavor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoeConfig {
    pub form: RoeForm,
    /// a-scaled ROE [m]
    pub values_m: [f64; 6],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub allow_suboptimal: bool,
    pub s_max: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        let d = PlanOptions::default();
        PlanConfig { allow_suboptimal: d.allow_suboptimal, s_max: d.s_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub force: ForceModel,
    pub step_s: Option<f64>,
    pub k_spread: usize,
    pub record_every: usize,
    pub lp_times_per_orbit: usize,
    pub lp_directions: usize,
    pub refine: bool,
    /// Allowed miss as a fraction of each desired component
    pub tolerance_fraction: f64,
    /// Floor of the allowed miss [m]
    pub tolerance_floor_m: f64,
    /// Relative slack of the oracle sandwich
    pub sandwich_slack: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        let p = PropagationOptions::default();
        ValidateConfig {
            force: p.force,
            step_s: p.step,
            k_spread: p.k_spread,
            record_every: p.record_every,
            lp_times_per_orbit: 128,
            lp_directions: 64,
            refine: true,
            tolerance_fraction: 0.05,
            tolerance_floor_m: 10.0,
            sandwich_slack: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorConfig {
    pub monte_carlo_draws: usize,
    pub seed: u64,
    pub confidence: f64,
    /// Overrides the χ² quantile derived from `confidence`
    pub chi2: Option<f64>,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig { monte_carlo_draws: 100_000, seed: 1, confidence: 0.95, chi2: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReachsetConfig {
    pub samples: usize,
}

impl Default for ReachsetConfig {
    fn default() -> Self {
        ReachsetConfig { samples: 721 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsConfig {
    pub stm: StmModel,
    pub plan: PlanConfig,
    pub validate: ValidateConfig,
    pub error: ErrorConfig,
    pub reachset: ReachsetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub chief: ChiefConfig,
    pub roe_initial: RoeConfig,
    pub roe_final: RoeConfig,
    pub duration: DurationConfig,
    #[serde(default)]
    pub options: OptionsConfig,
}

fn one_of(path: &str, a: Option<f64>, b: Option<f64>, scale_a: f64, names: (&str, &str)) -> Result<f64> {
    let v = match (a, b) {
        (Some(x), None) => x * scale_a,
        (None, Some(x)) => x,
        (Some(_), Some(_)) => {
            return Err(Fault::config(path, format!("give either {} or {}, not both", names.0, names.1)))
        }
        (None, None) => return Err(Fault::config(path, format!("missing {} (or {})", names.0, names.1))),
    };
    if !v.is_finite() {
        return Err(Fault::config(path, "value must be finite"));
    }
    Ok(v)
}

impl ChiefConfig {
    pub fn resolve(&self) -> Result<OrbitElements> {
        let deg = 1f64.to_radians();
        let a = one_of("chief.a_km", self.a_km, self.a_m, 1e3, ("a_km", "a_m"))?;
        let i = one_of("chief.i_deg", self.i_deg, self.i_rad, deg, ("i_deg", "i_rad"))?;
        let raan = one_of("chief.raan_deg", self.raan_deg, self.raan_rad, deg, ("raan_deg", "raan_rad"))?;
        let argp = one_of("chief.argp_deg", self.argp_deg, self.argp_rad, deg, ("argp_deg", "argp_rad"))?;
        let m = one_of(
            "chief.mean_anomaly_deg",
            self.mean_anomaly_deg,
            self.mean_anomaly_rad,
            deg,
            ("mean_anomaly_deg", "mean_anomaly_rad"),
        )?;
        let oe = OrbitElements::new(a, self.e, i, raan, argp, m).map_err(|e| Fault::config("chief", e.to_string()))?;
        Ok(oe.with_flavor(self.flavor))
    }

    /// SI elements back to the degree/kilometre layout.
    pub fn from_elements(oe: &OrbitElements) -> Self {
        ChiefConfig {
            a_km: Some(oe.a / 1e3),
            e: oe.e,
            i_deg: Some(oe.i.to_degrees()),
            raan_deg: Some(oe.raan.to_degrees()),
            argp_deg: Some(oe.argp.to_degrees()),
            mean_anomaly_deg: Some(oe.mean_anomaly.to_degrees()),
            flavor: oe.flavor,
            ..Default::default()
        }
    }
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<Scenario> {
        let chief = self.chief.resolve()?;
        let check = |path: &str, r: &RoeConfig| -> Result<RoeState> {
            if r.values_m.iter().any(|v| !v.is_finite()) {
                return Err(Fault::config(path, "ROE values must be finite"));
            }
            Ok(RoeState::from_meters(&Vec6::from_column_slice(&r.values_m), chief.a, r.form))
        };
        let roe_initial = check("roe_initial.values_m", &self.roe_initial)?;
        let roe_final = check("roe_final.values_m", &self.roe_final)?;
        if roe_initial.form != roe_final.form {
            return Err(Fault::config("roe_final.form", "initial and final ROE must use the same form"));
        }
        let t_f = one_of(
            "duration.orbits",
            self.duration.orbits,
            self.duration.seconds,
            chief.period(),
            ("orbits", "seconds"),
        )?;
        if t_f <= 0.0 {
            return Err(Fault::config("duration", "reconfiguration time must be positive"));
        }
        let o = &self.options;
        if o.plan.s_max <= 0.0 {
            return Err(Fault::config("options.plan.s_max", "must be positive"));
        }
        let v = &o.validate;
        if let Some(h) = v.step_s {
            if !(h > 0.0) {
                return Err(Fault::config("options.validate.step_s", "must be positive"));
            }
        }
        if v.lp_times_per_orbit < 2 || v.lp_directions < 4 {
            return Err(Fault::config("options.validate", "LP grid needs at least 2 epochs per orbit and 4 directions"));
        }
        if !(o.error.confidence > 0.0 && o.error.confidence < 1.0) {
            return Err(Fault::config("options.error.confidence", "must be in (0, 1)"));
        }
        if o.error.monte_carlo_draws < 2 {
            return Err(Fault::config("options.error.monte_carlo_draws", "need at least two draws"));
        }
        if o.reachset.samples < 2 {
            return Err(Fault::config("options.reachset.samples", "need at least two samples"));
        }
        Ok(Scenario { name: self.name.clone(), chief, roe_initial, roe_final, t_f, options: o.clone() })
    }
}

// ---------------------------------------------------------------------------
// Resolved scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub chief: OrbitElements,
    pub roe_initial: RoeState,
    pub roe_final: RoeState,
    /// Reconfiguration time [s]
    pub t_f: f64,
    pub options: OptionsConfig,
}

/// Desired-versus-achieved row of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub name: String,
    pub desired_m: f64,
    /// Linear-model prediction of the final ROE [m]
    pub predicted_m: f64,
    pub achieved_m: f64,
    pub error_m: f64,
    /// |error| relative to |desired|, in percent
    pub error_pct: f64,
    pub tolerance_m: f64,
    pub within: bool,
}

/// Lower bound from the LP oracle set against the closed form and the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub scope: LpScope,
    pub closed_form: f64,
    pub plan_cost: f64,
    pub lower_bound: LowerBoundResult,
    /// dv_lb ≤ plan cost and closed form ≤ dv_lp, within the slack
    pub sandwich_holds: bool,
    /// dv_lb relative to the closed form, minus one
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub force: ForceModel,
    pub form: RoeForm,
    pub rows: Vec<AccuracyRow>,
    pub all_within: bool,
    pub oracle: Vec<OracleCheck>,
    pub propagation: PropagationResult,
}

pub const ROE_NAMES: [&str; 6] = ["ada", "adl", "adex", "adey", "adix", "adiy"];

/// Error model as written in an error file. Covariances are in the units named by
/// `input`: native source units, inertial Cartesian (m, m/s) for chief elements, or
/// RTN relative Cartesian (m, m/s) for the initial ROE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelConfig {
    pub source: ErrorSource,
    #[serde(default)]
    pub input: ErrorInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_diag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorInput {
    #[default]
    Native,
    InertialCartesian,
    RtnCartesian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelFile {
    pub models: Vec<ErrorModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysisRow {
    pub source: ErrorSource,
    pub report: ErrorReport,
    pub bounds: ConfidenceBox,
}

impl ErrorModelConfig {
    fn covariance_matrix(&self, path: &str, d: usize) -> Result<Vec<Vec<f64>>> {
        let given = [self.variance.is_some(), self.covariance_diag.is_some(), self.covariance.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(Fault::config(path, "give exactly one of variance, covariance_diag, covariance"));
        }
        let m = if let Some(v) = self.variance {
            if d != 1 {
                return Err(Fault::config(format!("{path}.variance"), "scalar variance needs a scalar source"));
            }
            vec![vec![v]]
        } else if let Some(diag) = &self.covariance_diag {
            if diag.len() != d {
                return Err(Fault::config(format!("{path}.covariance_diag"), format!("expected {d} entries")));
            }
            (0..d).map(|r| (0..d).map(|c| if r == c { diag[r] } else { 0.0 }).collect()).collect()
        } else {
            let m = self.covariance.clone().unwrap_or_default();
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Fault::config(format!("{path}.covariance"), format!("expected a {d}x{d} matrix")));
            }
            m
        };
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Fault::config(path, "covariance entries must be finite"));
        }
        Ok(m)
    }

    /// Convert to a model in the source's native units.
    /// `deputy` is the deputy's initial RTN relative state, the linearization point
    /// for `rtn_cartesian` inputs.
    pub fn resolve(&self, path: &str, chief: &OrbitElements, deputy: &Vec6, draws: usize, seed: u64) -> Result<ErrorModel> {
        let d = self.source.dim();
        let cov = self.covariance_matrix(path, d)?;
        let mean = self.mean.clone().unwrap_or_else(|| vec![0.0; d]);
        if mean.len() != d {
            return Err(Fault::config(format!("{path}.mean"), format!("expected {d} entries")));
        }
        let as_mat = |m: &Vec<Vec<f64>>| Mat6::from_fn(|r, c| m[r][c]);
        let cov = match (self.input, self.source) {
            (ErrorInput::Native, _) => cov,
            (ErrorInput::InertialCartesian, ErrorSource::InitialOe) => {
                if mean.iter().any(|&m| m != 0.0) {
                    return Err(Fault::config(format!("{path}.mean"), "Cartesian inputs must have zero mean"));
                }
                let m = cartesian_covariance_to_elements(&as_mat(&cov), chief, draws, seed)?;
                (0..6).map(|r| (0..6).map(|c| m[(r, c)]).collect()).collect()
            }
            (ErrorInput::RtnCartesian, ErrorSource::InitialRoe) => {
                if mean.iter().any(|&m| m != 0.0) {
                    return Err(Fault::config(format!("{path}.mean"), "Cartesian inputs must have zero mean"));
                }
                let m = relative_cartesian_covariance_to_roe(&as_mat(&cov), chief, deputy)?;
                (0..6).map(|r| (0..6).map(|c| m[(r, c)]).collect()).collect()
            }
            _ => {
                return Err(Fault::config(
                    format!("{path}.input"),
                    "inertial_cartesian applies to initial_oe, rtn_cartesian to initial_roe",
                ))
            }
        };
        let model = ErrorModel { source: self.source, mean, covariance: cov };
        model.validate().map_err(|e| Fault::config(path, e.to_string()))?;
        Ok(model)
    }
}

impl Scenario {
    pub fn form(&self) -> RoeForm {
        self.roe_initial.form
    }

    pub fn pseudo_state(&self) -> Result<PseudoState> {
        pseudo_state(&self.roe_initial, &self.roe_final, &self.chief, self.t_f, self.options.stm)
    }

    pub fn plan_options(&self) -> PlanOptions {
        PlanOptions { allow_suboptimal: self.options.plan.allow_suboptimal, s_max: self.options.plan.s_max }
    }

    pub fn dominance(&self) -> Result<DominanceAssessment> {
        assess_dominance(&self.pseudo_state()?, &self.chief, self.t_f)
    }

    pub fn plan(&self) -> Result<PlanReport> {
        plan_full(&self.pseudo_state()?, &self.chief, self.t_f, &self.plan_options())
    }

    pub fn deputy_initial(&self) -> Result<OrbitElements> {
        roe_to_deputy(&self.chief, &self.roe_initial)
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        let v = &self.options.validate;
        PropagationOptions { force: v.force, step: v.step_s, k_spread: v.k_spread, record_every: v.record_every }
    }

    pub fn propagate(&self, maneuvers: &[Maneuver], force: ForceModel) -> Result<PropagationResult> {
        let opts = PropagationOptions { force, ..self.propagation_options() };
        propagate_with_burns(&self.chief, &self.deputy_initial()?, maneuvers, self.t_f, self.form(), &opts)
    }

    /// Final ROE [m] predicted by the linear model for `maneuvers`.
    pub fn predicted_final(&self, maneuvers: &[Maneuver]) -> Result<Vec6> {
        let phi = stm(&self.chief, self.t_f, self.options.stm, self.form())?;
        let drift = phi.matrix * self.roe_initial.to_vector() * self.chief.a;
        let map = self.pseudo_state()?.map;
        Ok(drift + map.from_tilde(&achieved(&self.chief, self.t_f, maneuvers)))
    }

    /// LP lower bounds for the in-plane and out-of-plane targets.
    pub fn oracle(&self, maneuvers: &[Maneuver]) -> Result<Vec<OracleCheck>> {
        let target = self.pseudo_state()?;
        let dom = assess_dominance(&target, &self.chief, self.t_f)?;
        let v = &self.options.validate;
        let mut out = Vec::new();
        for (scope, closed) in [(LpScope::InPlane, dom.dv_min_in_plane), (LpScope::OutOfPlane, dom.dv_min_out_of_plane)] {
            let mut lb = lower_bound_lp(&target, &self.chief, self.t_f, v.lp_times_per_orbit, v.lp_directions, scope)?;
            if v.refine {
                lb = refine_lower_bound(&lb, &target, &self.chief, self.t_f)?;
            }
            let cost: f64 = maneuvers
                .iter()
                .map(|m| {
                    let d = m.dv();
                    match scope {
                        LpScope::OutOfPlane => d.z.abs(),
                        _ => d.x.hypot(d.y),
                    }
                })
                .sum();
            let s = v.sandwich_slack;
            let sandwich_holds = lb.dv_lb <= cost * (1.0 + s) + 1e-12 && closed <= lb.dv_lp * (1.0 + s) + 1e-12;
            let gap = if closed > 0.0 { lb.dv_lb / closed - 1.0 } else { 0.0 };
            out.push(OracleCheck { scope, closed_form: closed, plan_cost: cost, lower_bound: lb, sandwich_holds, gap });
        }
        Ok(out)
    }

    /// Propagate `maneuvers` and compare the mean final ROE with the target.
    pub fn validate(&self, maneuvers: &[Maneuver], with_oracle: bool) -> Result<ValidationReport> {
        let v = &self.options.validate;
        let prop = self.propagate(maneuvers, v.force)?;
        let desired = self.roe_final.to_meters(self.chief.a);
        let predicted = self.predicted_final(maneuvers)?;
        let rows: Vec<AccuracyRow> = (0..6)
            .map(|k| {
                let err = prop.achieved_final_roe[k] - desired[k];
                let tol = (v.tolerance_fraction * desired[k].abs()).max(v.tolerance_floor_m);
                AccuracyRow {
                    name: ROE_NAMES[k].to_string(),
                    desired_m: desired[k],
                    predicted_m: predicted[k],
                    achieved_m: prop.achieved_final_roe[k],
                    error_m: err,
                    error_pct: if desired[k] != 0.0 { 100.0 * err.abs() / desired[k].abs() } else { f64::NAN },
                    tolerance_m: tol,
                    within: err.abs() <= tol,
                }
            })
            .collect();
        let all_within = rows.iter().all(|r| r.within);
        let oracle = if with_oracle { self.oracle(maneuvers)? } else { Vec::new() };
        Ok(ValidationReport { force: v.force, form: self.form(), rows, all_within, oracle, propagation: prop })
    }

    /// Linear-analysis view of a scheme: chief, burns and quasi-nonsingular initial ROE.
    pub fn error_scenario(&self, maneuvers: &[Maneuver]) -> Result<ErrorScenario> {
        let dep = self.deputy_initial()?;
        let roe0 = oe_to_roe(&self.chief, &dep, RoeForm::QuasiNonsingular)?.to_meters(self.chief.a);
        Ok(ErrorScenario { chief: self.chief, t_f: self.t_f, maneuvers: maneuvers.to_vec(), roe0 })
    }

    /// Error report and confidence box for each model.
    pub fn error_analysis(&self, maneuvers: &[Maneuver], models: &ErrorModelFile) -> Result<Vec<ErrorAnalysisRow>> {
        let sc = self.error_scenario(maneuvers)?;
        let o = &self.options.error;
        let nominal = final_roe(&sc.chief, &sc, 0.0, 1.0)?;
        let rel = relative_rtn_state(&self.chief, &self.deputy_initial()?);
        models
            .models
            .iter()
            .enumerate()
            .map(|(k, cfg)| {
                let model = cfg.resolve(&format!("models[{k}]"), &self.chief, &rel, o.monte_carlo_draws, o.seed)?;
                let report = propagate_error(&sc, &model, o.monte_carlo_draws, o.seed)?;
                let center = nominal + Vec6::from_column_slice(&report.mean_roe_error);
                let bounds = match o.chi2 {
                    Some(c) => confidence_box_chi2(&center, &report.covariance_roe, c, o.confidence)?,
                    None => confidence_box(&center, &report.covariance_roe, o.confidence)?,
                };
                Ok(ErrorAnalysisRow { source: cfg.source, report, bounds })
            })
            .collect()
    }
}
