use semitoric::polygon::{
    build_polygon, delzant_check, polygon_equivalence, second_action, ActionChart, PolygonOptions,
};
use semitoric::systems::{instantiate, ModelSpec};
use semitoric::Error;

fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
}

#[test]
fn toric_second_action_is_f2() {
    let m = instantiate(ModelSpec::CpnRotation { n: 2, lambda: 1.0 }).unwrap();
    let d = second_action(&m, [0.3, 0.4], [0.2, 0.2], None).unwrap();
    assert!((d - 0.2).abs() < 1e-6, "{d}");
}

#[test]
fn action_form_is_closed_away_from_the_defect() {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let chart = ActionChart::new(&jc, None, Some((-1.0, 3.0))).unwrap();
    let (v, _) = chart
        .integrate_polyline(&rectangle(-0.3, 0.4, -0.1, 0.1), None)
        .unwrap();
    assert!(v.abs() < 1e-5, "{v}");
}

#[test]
fn loop_around_the_defect_picks_up_monodromy() {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let chart = ActionChart::new(&jc, None, Some((-1.0, 3.0))).unwrap();
    // Start right of the cut: the jump is the distance in c1 to the marked value.
    let path = vec![
        [1.3, -0.2],
        [1.3, 0.2],
        [0.7, 0.2],
        [0.7, -0.2],
        [1.3, -0.2],
    ];
    let (v, _) = chart.integrate_polyline(&path, None).unwrap();
    assert!((v.abs() - 0.3).abs() < 1e-4, "{v}");
}

#[test]
fn path_through_focus_value_is_rejected() {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let chart = ActionChart::new(&jc, None, Some((-1.0, 3.0))).unwrap();
    let r = chart.integrate_polyline(&[[0.5, 0.0], [1.5, 0.0]], None);
    assert!(matches!(r, Err(Error::PathThroughSingularValue { .. })));
}

#[test]
fn jaynes_cummings_polygon_and_cut_flip() {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let opts = PolygonOptions {
        c1_window: Some((-1.0, 3.0)),
        ..PolygonOptions::default()
    };
    let up = build_polygon(&jc, None, &opts).unwrap();
    assert_eq!(up.marked_points.len(), 1);
    assert!((up.marked_points[0][0] - 1.0).abs() < 1e-9);
    let (lo, hi) = up.vertical_extent(1.0).unwrap();
    assert!(lo < up.marked_points[0][1] && up.marked_points[0][1] < hi);
    assert!(up.truncated);
    let down = build_polygon(&jc, Some(&[-1]), &opts).unwrap();
    assert_eq!(down.cut_signs, vec![-1]);
    assert!(polygon_equivalence(&up, &down));
}

#[test]
fn coupled_polygon_has_one_marked_point() {
    let m = instantiate(ModelSpec::CoupledAngularMomenta {
        r1: 1.0,
        r2: 2.5,
        t: 0.5,
    })
    .unwrap();
    let p = build_polygon(&m, None, &PolygonOptions::default()).unwrap();
    assert_eq!(p.marked_points.len(), 1);
    assert!((p.marked_points[0][0] + 1.5).abs() < 1e-9);
    assert!(!p.truncated);
}

#[test]
fn toric_triangle_is_delzant() {
    let m = instantiate(ModelSpec::CpnRotation { n: 2, lambda: 1.0 }).unwrap();
    let p = build_polygon(&m, None, &PolygonOptions::default()).unwrap();
    assert_eq!(p.vertices.len(), 3);
    assert!(p.marked_points.is_empty());
    assert!(delzant_check(&p).unwrap().pass);
}

#[test]
fn wrong_cut_sign_count_is_rejected() {
    let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
    let r = build_polygon(&jc, Some(&[1, 1]), &PolygonOptions::default());
    assert!(matches!(r, Err(Error::BadParameter(_))));
}
