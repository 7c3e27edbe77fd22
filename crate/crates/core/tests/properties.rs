use lcfuse_core::align::reliability_weight;
use lcfuse_core::assess::{overall_accuracy, score};
use lcfuse_core::classify::ClassifierModel;
use lcfuse_core::features::SavitzkyGolay;
use lcfuse_core::pgm::{combine_pair, fuse_pixel, joint_enumeration_oracle, PixelModel};
use lcfuse_core::raster::{GridGeometry, LabelRaster, Sample, SampleSet, Split};
use lcfuse_core::unmix::{cloud_shadow_fraction, EndmemberSet, RoleIndices, Unmixer};
use proptest::prelude::*;

/// Normalized distribution over `c` classes; roughly a third of entries are
/// exactly zero (at least one stays positive).
fn distribution(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0.0f64..1.0, 0u8..3), c).prop_map(|raw| {
        let mut v: Vec<f64> = raw.iter().map(|&(x, z)| if z == 0 { 0.0 } else { x }).collect();
        if v.iter().sum::<f64>() <= 1e-3 {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..8).prop_flat_map(|c| (distribution(c), distribution(c)))
}

proptest! {
    #[test]
    fn closure_and_support((a, b) in pair(), k in 0.5f64..=1.0) {
        let out = combine_pair(&a, &b, k).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in 0..a.len() {
            if a[c] == 0.0 && b[c] == 0.0 {
                prop_assert_eq!(out[c], 0.0);
            }
        }
    }

    #[test]
    fn agreement_fixpoint(a in (2usize..8).prop_flat_map(distribution), k in 0.5f64..=1.0) {
        let out = combine_pair(&a, &a, k).unwrap();
        for (x, y) in out.iter().zip(&a) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn relabeling_equivariance((a, b) in pair(), k in 0.5f64..=1.0, rot in 0usize..7) {
        let c = a.len();
        let perm: Vec<usize> = (0..c).map(|i| (i + rot) % c).collect();
        let permute = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let direct = permute(&combine_pair(&a, &b, k).unwrap());
        let via = combine_pair(&permute(&a), &permute(&b), k).unwrap();
        for (x, y) in direct.iter().zip(&via) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn fuse_pixel_matches_oracle(
        (a, b, m) in (2usize..6).prop_flat_map(|c| (distribution(c), distribution(c), distribution(c))),
        f in 0.0f64..=1.0,
        w in 0.0f64..=1.0,
    ) {
        let model = PixelModel { prior_a: &a, prior_b: Some(&b), prior_m: Some(&m), cloud_fraction: f, reliability: w };
        let fast = fuse_pixel(&model).unwrap();
        let slow = joint_enumeration_oracle(&model).unwrap();
        for (x, y) in fast.iter().zip(&slow) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reliability_bounds_and_monotonicity(g in 0.0f64..=1.0, m in 0.0f64..=1.0, dg in 0.0f64..0.2, dm in 0.0f64..0.2) {
        let w = reliability_weight(g, m);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!(reliability_weight((g + dg).min(1.0), m) >= w);
        prop_assert!(reliability_weight(g, (m + dm).min(1.0)) >= w);
    }

    #[test]
    fn fraction_monotone(a in prop::collection::vec(0.01f64..1.0, 4), d in 0.0f64..0.5, which in 0usize..4) {
        let r = RoleIndices { cloud: 0, soil: 1, vegetation: 2, dark: 3 };
        let base = cloud_shadow_fraction(&a, &r);
        let mut up = a.clone();
        up[which] = (up[which] + d).min(1.0);
        let moved = cloud_shadow_fraction(&up, &r);
        if which < 2 {
            prop_assert!(moved >= base - 1e-15);
        } else {
            prop_assert!(moved <= base + 1e-15);
        }
    }

    #[test]
    fn unmixing_sums_to_one(x in prop::collection::vec(-2.0f64..3.0, 6)) {
        let set = EndmemberSet::unlabelled(vec![
            vec![0.80, 0.82, 0.85, 0.83, 0.80, 0.78],
            vec![0.20, 0.25, 0.30, 0.35, 0.40, 0.42],
            vec![0.04, 0.08, 0.05, 0.45, 0.25, 0.12],
            vec![0.02, 0.02, 0.02, 0.03, 0.02, 0.01],
        ]).unwrap();
        let a = Unmixer::new(&set).unwrap().unmix(&x).unwrap();
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sg_is_linear(
        x in prop::collection::vec(-5.0f64..5.0, 12),
        y in prop::collection::vec(-5.0f64..5.0, 12),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let sg = SavitzkyGolay::new(5, 2).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = sg.smooth(&mix).unwrap();
        let (sx, sy) = (sg.smooth(&x).unwrap(), sg.smooth(&y).unwrap());
        for i in 0..12 {
            prop_assert!((lhs[i] - (a * sx[i] + b * sy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn classifier_output_is_positive_and_normalized(x in prop::collection::vec(-50.0f64..50.0, 3)) {
        let m = ClassifierModel::new(3, 3, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0, -4.0, 0.5, 1.0], vec![0.5; 9], 0.7).unwrap();
        let p = m.predict_proba(&x).unwrap();
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_ignores_sample_order(
        labels in prop::collection::vec(0u8..3, 16),
        refs in prop::collection::vec((0usize..16, 0usize..3), 1..40),
        seed in any::<u64>(),
    ) {
        let g = GridGeometry::new(16, 1, 0.0, 0.0, 1.0, -1.0).unwrap();
        let map = LabelRaster::new(g, 3, labels).unwrap();
        let mk = |pts: &[(usize, usize)]| SampleSet::new(pts.iter().map(|&(x, c)| Sample {
            x: x as f64 + 0.5, y: -0.5, class_label: c, split: Split::Validation,
        }).collect()).unwrap();
        let mut shuffled = refs.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 1).rotate_left(17) % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let a = score(&map, &mk(&refs), None).unwrap();
        let b = score(&map, &mk(&shuffled), None).unwrap();
        prop_assert_eq!(&a, &b);
        let oa = overall_accuracy(&a.matrix).unwrap();
        prop_assert!((0.0..=1.0).contains(&oa));
    }
}
