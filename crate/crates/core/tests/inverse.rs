use semitoric::inverse::{
    circle_loop, estimate_image, hausdorff_to_image, lattice_scale, locate_marked_values,
    transport_monodromy, ClassicalImage, LocateOptions,
};
use semitoric::quantum::{build_jaynes_cummings, build_spin_toric, coupled_spins, joint_spectrum};
use semitoric::systems::{instantiate, ModelSpec};

#[test]
fn spectrum_sizes() {
    let s = joint_spectrum(&build_spin_toric(10.0).unwrap()).unwrap();
    assert_eq!(s.len(), 21);
    assert!((s.hbar - 0.1).abs() < 1e-15);
    let c = joint_spectrum(&coupled_spins(4.0, 1.0, 2.0, 0.5).unwrap()).unwrap();
    assert_eq!(c.len(), 9 * 17);
    assert!(c.max_residual < 1e-8);
}

#[test]
fn toric_spectra_have_no_marked_values() {
    let opts = LocateOptions::default();
    let spin: Vec<_> = [10.0, 20.0]
        .iter()
        .map(|&j| joint_spectrum(&build_spin_toric(j).unwrap()).unwrap())
        .collect();
    assert!(locate_marked_values(&spin, &opts).unwrap().is_empty());
    let coupled: Vec<_> = [8.0, 12.0]
        .iter()
        .map(|&j| joint_spectrum(&coupled_spins(j, 1.0, 2.5, 0.0).unwrap()).unwrap())
        .collect();
    assert!(locate_marked_values(&coupled, &opts).unwrap().is_empty());
}

#[test]
fn coupled_spectrum_approaches_image() {
    let m = instantiate(ModelSpec::CoupledAngularMomenta {
        r1: 1.0,
        r2: 2.5,
        t: 0.5,
    })
    .unwrap();
    let image = ClassicalImage::from_model(&m, None, 401).unwrap();
    let mut last = f64::INFINITY;
    for j in [4.0, 8.0, 16.0] {
        let spec = joint_spectrum(&coupled_spins(j, 1.0, 2.5, 0.5).unwrap()).unwrap();
        let d = hausdorff_to_image(&spec.points, &image, spec.hbar / 8.0);
        assert!(d < last, "j={j} d={d} last={last}");
        last = d;
    }
    assert!(last < 0.5, "{last}");
}

#[test]
fn jaynes_cummings_image_estimate_is_nonempty() {
    let spec = joint_spectrum(&build_jaynes_cummings(10.0, 80).unwrap()).unwrap();
    let region = estimate_image(&spec, 0.1).unwrap();
    assert!(!region.is_empty());
    assert!(region.contains([1.0, 0.0]));
}

#[test]
fn regular_loop_has_trivial_monodromy() {
    let spec = joint_spectrum(&coupled_spins(20.0, 1.0, 2.5, 0.5).unwrap()).unwrap();
    let r = 6.0 * lattice_scale(&spec);
    let windows = circle_loop([1.5, 0.3], r, 0.5 * r, 8);
    let m = transport_monodromy(&spec, &windows, spec.hbar).unwrap();
    assert!(m.is_identity(), "{:?}", m.matrix);
}
