use a2b_core::epipolar::rotation_from_axis_angle;
use a2b_core::eval::{f_measure, precision_epi, precision_proj, recall, WarpTruth};
use a2b_core::synth::{generate_3d_scene, generate_scene, intrinsics, SceneConfig};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn pairs(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0..n, 0..n), 0..n)
}

proptest! {
    #[test]
    fn ratios_stay_in_unit_interval(seed in 0u64..100, m in pairs(40)) {
        let cfg = SceneConfig { n_patterns: 1, n_unique: 20, ..Default::default() };
        let s = generate_scene(&cfg, seed).unwrap();
        let n = s.kps_a.len().min(s.kps_b.len());
        let m: Vec<(usize, usize)> = m.into_iter().filter(|&(i, j)| i < n && j < n).collect();
        let truth = WarpTruth::Homography(s.homography().unwrap());
        let p = precision_proj(&m, &s.kps_a, &s.kps_b, &truth, 5.0);
        let r = recall(&m, &s.gt_matches);
        prop_assert!((0.0..=1.0).contains(&p.value));
        prop_assert!((0.0..=1.0).contains(&r.value));
        prop_assert_eq!(p.undefined, m.is_empty());
        let f = f_measure(p.value, r.value);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(f <= p.value.max(r.value) + 1e-12);
    }

    #[test]
    fn f_measure_is_symmetric(p in 0.0..=1.0f64, r in 0.0..=1.0f64) {
        prop_assert_eq!(f_measure(p, r), f_measure(r, p));
    }

    #[test]
    fn ground_truth_matches_are_perfect(seed in 0u64..100) {
        let s = generate_scene(&SceneConfig::default(), seed).unwrap();
        let truth = WarpTruth::Homography(s.homography().unwrap());
        let p = precision_proj(&s.gt_matches, &s.kps_a, &s.kps_b, &truth, 5.0);
        prop_assert_eq!(p.value, 1.0);
        prop_assert_eq!(recall(&s.gt_matches, &s.gt_matches).value, 1.0);
    }

    #[test]
    fn epipolar_precision_ignores_essential_scale(seed in 0u64..200, scale in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        let r = rotation_from_axis_angle(&Vector3::new(0.2, 1.0, 0.1), 0.2);
        let t = Vector3::new(0.6, -0.1, 0.2);
        let k = intrinsics(400.0, 400.0, 300.0);
        let s = generate_3d_scene(&r, &t, &k, 30, seed).unwrap();
        let e = Matrix3::from_row_slice(&s.e_gt.unwrap());
        // shuffle partners so some matches are wrong
        let m: Vec<(usize, usize)> = (0..s.kps_a.len()).map(|i| (i, (i * 7 + seed as usize) % s.kps_b.len())).collect();
        let base = precision_epi(&m, &s.kps_a, &s.kps_b, &e, &k, &k, 1e-4).unwrap();
        let scaled = precision_epi(&m, &s.kps_a, &s.kps_b, &(e * scale), &k, &k, 1e-4).unwrap();
        prop_assert_eq!(base.value, scaled.value);
    }
}
