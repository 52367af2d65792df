use proptest::prelude::*;

use thermoacoustic::boundary::ObservationMask;
use thermoacoustic::grid::{l2_rel_error, Grid2D, Region, ScalarField};
use thermoacoustic::io::{read_trace, write_trace};
use thermoacoustic::neumann::{NsOptions, Reconstructor};
use thermoacoustic::phantom::add_noise;
use thermoacoustic::speed::{eval_speed, SpeedModel};
use thermoacoustic::wave::{BoundaryTrace, PmlProfile};

fn setup(n: usize, model: &SpeedModel, t: f64) -> (Grid2D, Region, Reconstructor) {
    let g = Grid2D::default_box(n);
    let om = Region::omega(&g).unwrap();
    let c = eval_speed(model, &g).unwrap();
    let rec = Reconstructor::new(&c, om, t, &PmlProfile::default_for(&g)).unwrap();
    (g, om, rec)
}

fn bump(g: &Grid2D, om: &Region, cx: f64, cy: f64) -> ScalarField {
    ScalarField::from_fn(*g, |x, y| (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.04).exp()).restricted(om)
}

#[test]
fn trace_files_reproduce_the_reconstruction() {
    let (g, om, rec) = setup(81, &SpeedModel::c1(), 3.0);
    let f = bump(&g, &om, 0.2, -0.3);
    let mask = ObservationMask::from_letters("NWE", 0.2).unwrap().sample(&g, &om);
    let trace = rec.measure(&f, &mask).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.trc");
    write_trace(&p, &trace).unwrap();
    let back = read_trace(&p).unwrap();
    assert_eq!(back, trace);
    assert_eq!(rec.reconstruct_tr(&back).unwrap(), rec.reconstruct_tr(&trace).unwrap());
}

#[test]
fn series_is_linear_in_the_data() {
    let (g, om, rec) = setup(61, &SpeedModel::c1(), 3.0);
    let ones = vec![1.0; om.boundary_nodes().len()];
    let h1 = rec.measure(&bump(&g, &om, 0.3, 0.1), &ones).unwrap();
    let h2 = rec.measure(&bump(&g, &om, -0.4, 0.2), &ones).unwrap();
    let mut h = h1.clone();
    for (v, w) in h.values.iter_mut().zip(&h2.values) {
        *v = 2.5 * *v - w;
    }
    let opts = NsOptions { max_terms: 3, tol: 0.0, region_k: None };
    let ns = |t: &BoundaryTrace| rec.reconstruct_ns(t, &opts, None).unwrap().result().clone();
    let mut expected = ns(&h1).scaled(2.5);
    expected.axpy(-1.0, &ns(&h2)).unwrap();
    // harmonic extensions are only solved to the multigrid tolerance
    let err = l2_rel_error(&ns(&h), &expected, &om).unwrap();
    assert!(err < 1e-6, "relative deviation {err}");
}

#[test]
fn series_beats_time_reversal_for_smooth_sources() {
    let (g, om, rec) = setup(101, &SpeedModel::c2(), 2.0 * 2.15);
    let f = bump(&g, &om, 0.1, 0.4);
    let ones = vec![1.0; om.boundary_nodes().len()];
    let trace = rec.measure(&f, &ones).unwrap();
    let tr = l2_rel_error(&rec.reconstruct_tr(&trace).unwrap(), &f, &om).unwrap();
    let report = rec.reconstruct_ns(&trace, &NsOptions::default(), Some(&f)).unwrap();
    let ns = report.final_rel_error().unwrap();
    assert!(ns < tr, "NS {ns} vs TR {tr}");
    assert!(report.rel_errors.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", report.rel_errors);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noise_is_exactly_level_normalised(level in 0.0f64..0.5, seed in any::<u64>()) {
        let g = Grid2D::default_box(31);
        let om = Region::omega(&g).unwrap();
        let mut t = BoundaryTrace::zeros(&g, &om, 20, 0.05);
        for (k, v) in t.values.iter_mut().enumerate() {
            *v = ((k as f64) * 0.37).sin();
        }
        let noisy = add_noise(&t, level, seed).unwrap();
        let diff: f64 = noisy.values.iter().zip(&t.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!((diff - level * t.norm()).abs() <= 1e-10 * t.norm());
        prop_assert_eq!(&noisy, &add_noise(&t, level, seed).unwrap());
    }

    #[test]
    fn speeds_are_positive_and_one_outside_the_square(x in -1.5f64..1.5, y in -1.5f64..1.5, k in 0usize..5) {
        let m = [SpeedModel::c1(), SpeedModel::c2(), SpeedModel::c3(), SpeedModel::c4(), SpeedModel::c5()][k].clone();
        let c = m.eval(x, y);
        prop_assert!(c > 0.0 && c.is_finite());
        if x.abs().max(y.abs()) >= 1.28 {
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }
}
