//! Closed-form minimum delta-v and maneuver planning for relative orbit
//! reconfigurations in eccentric orbits, using reachable sets in relative orbit
//! element space.

pub mod dvmin;
pub mod dynamics;
pub mod error;
pub mod fault;
pub mod planner;
pub mod reachset;
pub mod scenario;
pub mod validate;

pub use dvmin::{assess_dominance, DominanceAssessment, DominantCase, DominantPlane};
pub use dynamics::{
    oe_to_roe, pseudo_state, roe_to_deputy, Flavor, Mat6, OrbitElements, PseudoState, RoeForm, RoeState, StmModel,
    Vec6,
};
pub use error::{ConfidenceBox, ErrorModel, ErrorReport, ErrorSource};
pub use fault::{Fault, Result};
pub use planner::{plan_full, Maneuver, ManeuverPlan, Optimality, PlanOptions, PlanReport};
pub use reachset::{ConvexHull2D, Plane};
pub use scenario::{Scenario, ScenarioConfig};
pub use validate::{ForceModel, LpScope, PropagationOptions};
