//! Properties of PCA, descriptor importance and correlation.

mod common;

use common::{rng, uniform};
use multinex::analysis::{
    descriptor_importance, fit_pca, gradient_map, magnitude_correlation, orthogonal_energy, pixel_matrix,
};
use multinex::guidance::{luminance_candidate_pool, GuidanceStack, StackKind};
use multinex::Tensor;
use proptest::prelude::*;

fn stack_of(t: Tensor<f64>, names: &[&str]) -> GuidanceStack<f64> {
    GuidanceStack::new(t, names.iter().map(|s| s.to_string()).collect(), StackKind::Custom).unwrap()
}

fn random_pool(seed: u64, h: usize, w: usize) -> GuidanceStack<f64> {
    let img = uniform(&mut rng(seed), h, w, 3, 0.0, 1.0);
    luminance_candidate_pool(&img).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_completes_the_first_projection(seed in 0u64..1000, k in 2usize..6) {
        let s = uniform(&mut rng(seed), 6, 7, k, 0.0, 1.0);
        let pca = fit_pca(&pixel_matrix(&s)).unwrap();
        let e = orthogonal_energy(&s, &pca).unwrap();
        let z = pca.project(&pixel_matrix(&s), 1).unwrap();
        let xc = pca.center(&pixel_matrix(&s)).unwrap();
        for r in 0..xc.rows {
            let norm2: f64 = xc.row(r).iter().map(|v| v * v).sum();
            let lhs = e.data()[r].powi(2) + z.get(r, 0).powi(2);
            prop_assert!((lhs - norm2).abs() <= 1e-4);
        }
    }

    #[test]
    fn gradient_map_commutes_with_transpose(seed in 0u64..1000) {
        let c = uniform(&mut rng(seed), 5, 9, 1, 0.0, 1.0);
        let a = gradient_map(&c.transpose_spatial()).unwrap();
        let b = gradient_map(&c).unwrap().transpose_spatial();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn importance_is_permutation_equivariant(seed in 0u64..1000, perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let pool = random_pool(seed, 8, 8);
        let names: Vec<&str> = perm.iter().map(|&i| pool.names[i].as_str()).collect();
        let shuffled = pool.select(&names).unwrap();
        let a = descriptor_importance(&pool).unwrap();
        let b = descriptor_importance(&shuffled).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            let (ra, rb) = (&a.rows[i], &b.rows[j]);
            prop_assert_eq!(&ra.name, &rb.name);
            prop_assert_eq!(ra.delta_e.to_bits(), rb.delta_e.to_bits());
            prop_assert_eq!(ra.delta_g.to_bits(), rb.delta_g.to_bits());
            prop_assert_eq!((ra.rank_e, ra.rank_g), (rb.rank_e, rb.rank_g));
            prop_assert_eq!(&ra.delta_e_map, &rb.delta_e_map);
        }
    }

    #[test]
    fn importance_maps_are_bounded(seed in 0u64..1000) {
        let rep = descriptor_importance(&random_pool(seed, 9, 7)).unwrap();
        let k = rep.rows.len();
        let mut re: Vec<usize> = rep.rows.iter().map(|r| r.rank_e).collect();
        let mut rg: Vec<usize> = rep.rows.iter().map(|r| r.rank_g).collect();
        re.sort_unstable();
        rg.sort_unstable();
        prop_assert_eq!(&re, &(1..=k).collect::<Vec<_>>());
        prop_assert_eq!(&rg, &(1..=k).collect::<Vec<_>>());
        for r in &rep.rows {
            prop_assert!(r.delta_e_map.data().iter().all(|&v| v >= 0.0));
            prop_assert!(r.delta_g_map.data().iter().zip(rep.joint_gradient.data()).all(|(&d, &g)| (0.0..=g).contains(&d)));
            prop_assert!((r.delta_g - r.delta_g_map.mean()).abs() < 1e-15);
            prop_assert!((r.avg_rank - (r.rank_e + r.rank_g) as f64 / 2.0).abs() < 1e-15);
        }
    }
}

#[test]
fn known_second_axis_amplitude() {
    let (u, v) = ([0.6, 0.8], [-0.8, 0.6]);
    let a = 0.05;
    let s = Tensor::from_fn(8, 8, 2, |y, x, c| {
        let t = (y * 8 + x) as f64 / 10.0 - 3.0;
        let side = if (y + x) % 2 == 0 { a } else { -a };
        t * u[c] + side * v[c]
    });
    let e = orthogonal_energy(&s, &fit_pca(&pixel_matrix(&s)).unwrap()).unwrap();
    assert!(e.data().iter().all(|&x| (x - a).abs() < 1e-3), "{:?}", e.data());
}

#[test]
fn duplicate_descriptor_has_no_unique_gradient() {
    let img = uniform(&mut rng(3), 10, 10, 3, 0.0, 1.0);
    let pool = luminance_candidate_pool(&img).unwrap();
    let y = pool.descriptor("Y_Rec709").unwrap();
    let t = Tensor::concat_channels(&[&pool.tensor, &y]).unwrap();
    let mut names: Vec<&str> = pool.names.iter().map(|s| s.as_str()).collect();
    names.push("Y_Rec709_copy");
    let rep = descriptor_importance(&stack_of(t, &names)).unwrap();
    for r in rep.rows.iter().filter(|r| r.name.starts_with("Y_Rec709")) {
        assert_eq!(r.delta_g, 0.0, "{}", r.name);
    }
}

#[test]
fn zero_descriptor_contributes_nothing() {
    let img = uniform(&mut rng(4), 10, 10, 3, 0.0, 1.0);
    let pool = luminance_candidate_pool(&img).unwrap();
    let zero = Tensor::zeros(10, 10, 1);
    let t = Tensor::concat_channels(&[&pool.tensor, &zero]).unwrap();
    let mut names: Vec<&str> = pool.names.iter().map(|s| s.as_str()).collect();
    names.push("zero");
    let rep = descriptor_importance(&stack_of(t, &names)).unwrap();
    let z = rep.rows.iter().find(|r| r.name == "zero").unwrap();
    assert_eq!(z.delta_g, 0.0);
    assert!(z.delta_e < 1e-6, "{}", z.delta_e);
}

#[test]
fn correlation_matrix_is_symmetric_and_bounded() {
    let pool = random_pool(5, 12, 12);
    let groups: Vec<(String, Tensor<f64>)> =
        pool.names.iter().map(|n| (n.clone(), pool.descriptor(n).unwrap())).collect();
    let m = magnitude_correlation(&groups).unwrap();
    for i in 0..groups.len() {
        assert_eq!(m.values[i][i], 1.0);
        for j in 0..groups.len() {
            assert_eq!(m.values[i][j], m.values[j][i]);
            assert!((-1.0..=1.0).contains(&m.values[i][j]));
        }
    }
    let csv = m.to_csv();
    assert_eq!(csv.lines().count(), groups.len() + 1);
}
