use proptest::prelude::*;

use semitoric::dynamics::{halton_points, poisson_bracket};
use semitoric::fibration::ValueMap;
use semitoric::inverse::fit_points;
use semitoric::io::{format_f64, parse_spectrum_csv, spectrum_csv, RunConfig};
use semitoric::polygon::{
    cut_shear, delzant_check, polygon_equivalence, snap_rational, MarkedPolygon,
};
use semitoric::quantum::JointSpectrum;
use semitoric::singularity::{classify, classify_linearizations, linearization, ClassifyOptions};
use semitoric::systems::{catalog, instantiate, ModelSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_map_inverts(o1 in -3.0..3.0f64, o2 in -3.0..3.0f64, a in 0.2..3.0f64, c in -2.0..2.0f64,
                         d in 0.2..3.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let m = ValueMap { origin: [o1, o2], rows: [[a, 0.0], [c, d]] };
        let back = m.invert(m.apply([x, y]));
        prop_assert!((back[0] - x).abs() < 1e-10 && (back[1] - y).abs() < 1e-10);
    }

    #[test]
    fn brackets_vanish_everywhere(seed in 0u64..10_000) {
        for m in catalog() {
            for p in halton_points(&m, 4, seed) {
                prop_assert!(poisson_bracket(&m, &p).unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coupled_bracket_vanishes_for_any_coupling(t in 0.0..=1.0f64, r2 in 1.1..4.0f64, seed in 0u64..1000) {
        let m = instantiate(ModelSpec::CoupledAngularMomenta { r1: 1.0, r2, t }).unwrap();
        for p in halton_points(&m, 8, seed) {
            prop_assert!(poisson_bracket(&m, &p).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn classification_ignores_value_coordinates(k in 0.3..4.0f64, s in -2.0..2.0f64) {
        // Type depends on the span of the linearizations, not on the basis chosen for it.
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let x = [0.0, 0.0, 1.0, 0.0, 0.0];
        let l1 = linearization(&jc, &x, [1.0, 0.0]);
        let l2 = linearization(&jc, &x, [0.0, 1.0]);
        let base = classify(&jc, &jc.point(x.to_vec())).unwrap().kind;
        let mixed = classify_linearizations(&l1, &(&l2 * k + &l1 * s), 2, &ClassifyOptions::default());
        prop_assert_eq!(mixed.0, base);
    }

    #[test]
    fn floats_round_trip_through_text(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn config_round_trips(tol in 1e-14..1e-3f64, j in 0.5..80.0f64, seed in any::<u64>(), w in proptest::option::of(-5.0..5.0f64)) {
        let mut c = RunConfig { tol, j, seed, ..RunConfig::default() };
        c.c1_window = w.map(|a| [a, a + 1.0]);
        prop_assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn spectrum_csv_round_trips(pts in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 0..40), h in 1e-3..1.0f64) {
        let spec = JointSpectrum {
            hbar: h,
            block_index: (0..pts.len()).collect(),
            points: pts.iter().map(|&(a, b)| [a, b]).collect(),
            excluded: 0,
            max_residual: 0.0,
        };
        let text = spectrum_csv(&spec);
        if spec.points.is_empty() {
            prop_assert!(parse_spectrum_csv(&text).is_err());
        } else {
            let back = parse_spectrum_csv(&text).unwrap();
            prop_assert_eq!(back.points, spec.points);
            prop_assert_eq!(back.hbar, h);
        }
    }

    #[test]
    fn rationals_snap_exactly(p in -64i64..64, q in 1i64..64) {
        let (a, b, err) = snap_rational(p as f64 / q as f64, 64);
        prop_assert!(err < 1e-12);
        prop_assert_eq!(a * q, p * b);
    }

    #[test]
    fn equivalence_sees_through_translation_and_shear(tx in -5.0..5.0f64, ty in -5.0..5.0f64, k in -3i64..=3) {
        let p = MarkedPolygon::toric(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 2.0], [0.0, 2.0]]);
        let q = MarkedPolygon::toric(p.vertices.iter().map(|v| [v[0] + tx, v[1] + k as f64 * v[0] + ty]).collect());
        prop_assert!(polygon_equivalence(&p, &q));
        prop_assert_eq!(delzant_check(&p).unwrap().pass, delzant_check(&q).unwrap().pass);
    }

    #[test]
    fn cut_shears_compose_to_identity(x0 in 0.5..3.5f64) {
        let mut p = MarkedPolygon::toric(vec![[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [0.0, 3.0]]);
        p.marked_points = vec![[x0, 1.0]];
        p.cut_signs = vec![1];
        let back = cut_shear(&cut_shear(&p, x0, 1), x0, -1);
        prop_assert!(polygon_equivalence(&p, &back));
        prop_assert_eq!(back.vertices.len(), p.vertices.len());
    }

    #[test]
    fn exact_lattices_fit_exactly(a in 0.5..1.5f64, b in -0.4..0.4f64, c in -0.4..0.4f64, d in 0.5..1.5f64,
                                  ox in -1.0..1.0f64, oy in -1.0..1.0f64) {
        let h = 0.01;
        let s = 2.0 * std::f64::consts::PI * h;
        let mut pts = Vec::new();
        for i in -6i32..=6 {
            for j in -6i32..=6 {
                let (x, y) = (s * f64::from(i), s * f64::from(j));
                pts.push([ox + a * x + b * y, oy + c * x + d * y]);
            }
        }
        let fit = fit_points(&pts, [ox, oy], 1.0, h).unwrap();
        prop_assert!(fit.residual < 1e-10);
        let det = fit.g0[0][0] * fit.g0[1][1] - fit.g0[0][1] * fit.g0[1][0];
        prop_assert!((det.abs() - (a * d - b * c).abs()).abs() < 1e-8);
    }
}
