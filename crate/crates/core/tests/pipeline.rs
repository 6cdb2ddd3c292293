use approx::assert_relative_eq;
use rydberg_asa::errors::{combined_budget, BudgetInputs, ErrorOptions};
use rydberg_asa::optimizer::{run_ga, Problem};
use rydberg_asa::{evaluate_gate, f64 as g, scenario, GAConfig, Variant};

#[test]
fn scenario_to_budget() {
    let s = scenario("LIM-ASA").unwrap();
    let params: g::GateParams = s.params().unwrap();
    let pulses: g::GatePulses = s.pulses().unwrap();
    let r = evaluate_gate(&params, &pulses, None).unwrap();
    assert!(r.fidelity_ideal > 0.0 && r.fidelity_ideal <= 1.0);
    assert_relative_eq!(
        r.fidelity_realistic,
        r.fidelity_ideal - r.decay_e - r.decay_r,
        epsilon = 1e-12
    );

    let opts = ErrorOptions {
        samples: 101,
        ..ErrorOptions::default()
    };
    let none = combined_budget(&params, &pulses, &BudgetInputs::default(), &opts).unwrap();
    assert_eq!(none.ancillary_error, 0.0);
    assert_relative_eq!(none.fidelity, r.fidelity_realistic, epsilon = 1e-12);

    let inputs = BudgetInputs {
        gamma_d: 0.05,
        ..BudgetInputs::default()
    };
    let b = combined_budget(&params, &pulses, &inputs, &opts).unwrap();
    assert!(b.e_d > 0.0);
    assert_relative_eq!(b.fidelity, b.fidelity_deviated - b.e_d, epsilon = 1e-12);
}

#[test]
fn optimized_genome_reevaluates_to_reported_fidelity() {
    let s = scenario("LIM-SA").unwrap();
    let problem = Problem::<f64>::from_scenario(&s, Variant::Sa).unwrap();
    let cfg = GAConfig {
        population: 6,
        generations: 2,
        seed: 3,
        ..GAConfig::default()
    };
    let run = run_ga(&cfg, &problem).unwrap();
    let (p, pulses) = problem.decode(&run.best_genome).unwrap();
    let again = evaluate_gate(&p, &pulses, cfg.steps).unwrap();
    assert_eq!(again.fidelity_realistic, run.best_fidelity());
}

#[test]
fn results_round_trip_through_json() {
    let s = scenario("III-ASA").unwrap();
    let r: g::GateResult = evaluate_gate(&s.params().unwrap(), &s.pulses().unwrap(), None).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    let back: g::GateResult = serde_json::from_str(&text).unwrap();
    assert_eq!(r, back);
}
