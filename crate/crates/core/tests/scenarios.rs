//! End-to-end runs of the shipped verification scenarios at their contract
//! resolutions, plus determinism of the serialized output.

use foldscape_core::branch::{verify_scenario, BranchDiagram};
use foldscape_core::solve::{SolutionKind, SolveOptions};

fn dump(diagram: &BranchDiagram) -> String {
    diagram
        .verdicts
        .iter()
        .map(|v| format!("[{}] {} — {}", if v.pass { "ok" } else { "FAIL" }, v.name, v.diagnostics))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn fold_scenario_passes_at_contract_resolution() {
    let diagram = verify_scenario("th2_fold", None, 0, &SolveOptions::default()).unwrap();
    assert!(diagram.all_pass(), "verdicts:\n{}", dump(&diagram));
    let bracket = diagram.lambda_bar.expect("fold bracket");
    assert!(bracket.width() <= 1e-3 * bracket.left);
    let minimals = diagram
        .records
        .iter()
        .filter(|r| r.kind == SolutionKind::Minimal)
        .count();
    let saddles = diagram
        .records
        .iter()
        .filter(|r| r.kind == SolutionKind::MountainPass)
        .count();
    assert_eq!((minimals, saddles), (5, 5), "verdicts:\n{}", dump(&diagram));
}

#[test]
fn sign_scenario_passes_at_contract_resolution() {
    let diagram = verify_scenario("th3_sign", None, 0, &SolveOptions::default()).unwrap();
    assert!(diagram.all_pass(), "verdicts:\n{}", dump(&diagram));
    assert_eq!(diagram.records.len(), 6, "verdicts:\n{}", dump(&diagram));
    assert!(diagram.lambda_bar.is_none());
}

#[test]
fn flip_scenario_passes_at_contract_resolution() {
    let diagram = verify_scenario("th_h0_flip", None, 0, &SolveOptions::default()).unwrap();
    assert!(diagram.all_pass(), "verdicts:\n{}", dump(&diagram));
    let g1 = diagram.gamma1.expect("principal eigenvalue");
    let pi2 = std::f64::consts::PI.powi(2);
    assert!(((g1 - pi2) / pi2).abs() <= 5e-3, "gamma1 = {g1}");
    // 7 branch records (trivial at every grid λ) + 3 positive + 3 negative
    // second solutions, none at the flip point itself.
    assert_eq!(diagram.records.len(), 13, "verdicts:\n{}", dump(&diagram));
}

#[test]
fn scenario_output_is_deterministic_for_a_fixed_seed() {
    let opts = SolveOptions::default();
    let a = verify_scenario("th3_sign", None, 42, &opts).unwrap();
    let b = verify_scenario("th3_sign", None, 42, &opts).unwrap();
    assert_eq!(a.to_json_string(), b.to_json_string());
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.to_json_string().ends_with('\n'));
}
