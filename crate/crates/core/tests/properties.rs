mod common;

const CASES: u32 = 1000;

#[test]
fn dvmin_is_homogeneous() {
    common::homogeneity(CASES).unwrap();
}

#[test]
fn hull_scales_linearly() {
    common::hull_scaling(CASES).unwrap();
}

#[test]
fn max_rule_within_lp_sandwich() {
    common::max_rule_sandwich(CASES).unwrap();
}

#[test]
fn gamma_blocks_decouple() {
    common::gamma_decoupling(CASES).unwrap();
}

#[test]
fn plans_close_on_their_targets() {
    common::plan_closure(CASES).unwrap();
}

#[test]
fn confidence_box_contains_and_is_tight() {
    common::confidence_box_oracle(CASES, 2000).unwrap();
}

#[test]
fn monte_carlo_ignores_thread_count() {
    common::monte_carlo_threads(CASES, 64).unwrap();
}
