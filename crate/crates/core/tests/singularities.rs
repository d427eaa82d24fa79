use semitoric::singularity::{find_critical_points, sweep_parameter, SingularityType};
use semitoric::systems::{instantiate, ModelSpec};

#[test]
fn jaynes_cummings_has_one_focus_focus_point() {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let census = find_critical_points(&jc, 200).unwrap();
    let ff: Vec<_> = census.focus_focus().collect();
    assert_eq!(ff.len(), 1);
    assert!((ff[0].value[0] - 1.0).abs() < 1e-8 && ff[0].value[1].abs() < 1e-8);
    for cp in census
        .points
        .iter()
        .filter(|p| p.kind != SingularityType::FocusFocus)
    {
        assert!(
            cp.kind.is_elliptic_type(),
            "{:?} at {:?}",
            cp.kind,
            cp.value
        );
    }
}

#[test]
fn coupled_family_transitions() {
    let p = [0.0, 0.0, 1.0, 0.0, 0.0, -1.0];
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let sweep = sweep_parameter(1.0, 2.5, &p, &grid).unwrap();
    assert_eq!(sweep.transitions.len(), 2);
    let root = (2.5f64).sqrt();
    let expected = [
        2.5 / (5.0 + 1.0 + 2.0 * root),
        2.5 / (5.0 + 1.0 - 2.0 * root),
    ];
    for (tr, e) in sweep.transitions.iter().zip(expected) {
        let mid = 0.5 * (tr.0 + tr.1);
        assert!((mid - e).abs() < 1e-5, "{mid} vs {e}");
    }
}
