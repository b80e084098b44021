use bbb_core::detcfg::{
    branch_update, collapse, enumerate_compositions, find_trace_divergence, margin_witness, neighborhood_stability,
    select_kill, unambiguity_margin,
};
use bbb_core::geometry::dist;
use bbb_core::{Configuration, Error, RngStream};
use proptest::prelude::*;
use rand::Rng;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Direct loop over every composition and pair.
fn brute_margin(x: &Configuration) -> f64 {
    let n = x.len();
    let mut best = f64::INFINITY;
    for f in enumerate_compositions(n) {
        let mut b = vec![0.0; x.dim()];
        for (i, &fi) in f.iter().enumerate() {
            for (acc, v) in b.iter_mut().zip(x.position(i)) {
                *acc += fi as f64 * v / (n as f64 + 1.0);
            }
        }
        for j in 0..n {
            for k in j + 1..n {
                best = best.min((dist(x.position(j), &b) - dist(x.position(k), &b)).abs());
            }
        }
    }
    best
}

#[test]
fn composition_counts() {
    for n in 1..=8u64 {
        let all = enumerate_compositions(n as usize);
        assert_eq!(all.len() as u64, binomial(2 * n, n - 1), "N={n}");
        assert!(all.iter().all(|f| f.iter().sum::<u32>() == n as u32 + 1));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn margin_agrees_with_brute_force() {
    let mut rng = RngStream::new(101, 0);
    for _ in 0..300 {
        let n = rng.random_range(2..=5usize);
        let d = rng.random_range(1..=3usize);
        let coords: Vec<f64> = (0..n * d).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x = Configuration::from_flat(d, n, coords).unwrap();
        let fast = unambiguity_margin(&x);
        let slow = brute_margin(&x);
        assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow} for {x:?}");
        let w = margin_witness(&x);
        assert_eq!(w.f.iter().sum::<u32>(), n as u32 + 1);
        assert!(w.pair.0 < w.pair.1);
    }
}

proptest! {
    #[test]
    fn margin_is_isometry_invariant_and_homogeneous(
        coords in prop::collection::vec(-5.0..5.0f64, 8),
        theta in 0.0..6.3f64,
        shift in -20.0..20.0f64,
        scale in 0.1..10.0f64,
    ) {
        let x = Configuration::from_flat(2, 4, coords).unwrap();
        let m = unambiguity_margin(&x);
        let (s, c) = theta.sin_cos();
        let moved = x.map_affine(&[c, -s, s, c], &[shift, -shift]);
        prop_assert!((unambiguity_margin(&moved) - m).abs() <= 1e-9);
        let scaled = x.map_affine(&[scale, 0.0, 0.0, scale], &[0.0, 0.0]);
        prop_assert!((unambiguity_margin(&scaled) - scale * m).abs() <= 1e-9 * (1.0 + scale));
    }

    #[test]
    fn select_kill_is_isometry_invariant(
        coords in prop::collection::vec(-5.0..5.0f64, 10),
        theta in 0.0..6.3f64,
        shift in -20.0..20.0f64,
        l in 0usize..5,
    ) {
        let x = Configuration::from_flat(2, 5, coords).unwrap();
        let w = [1, 1, 1, 1, 1];
        let (s, c) = theta.sin_cos();
        let moved = x.map_affine(&[c, -s, s, c], &[shift, 0.5 * shift]);
        prop_assert_eq!(select_kill(&x, &w, l).unwrap(), select_kill(&moved, &w, l).unwrap());
    }

    #[test]
    fn branch_update_preserves_total(coords in prop::collection::vec(-5.0..5.0f64, 4), l in 0usize..4) {
        let x = Configuration::line(&coords).unwrap();
        let g = branch_update(&x, &[1, 1, 1, 1], l).unwrap();
        prop_assert_eq!(g.iter().sum::<u32>(), 4);
    }
}

#[test]
fn collapse_terminates_within_bound() {
    let mut rng = RngStream::new(5, 0);
    let mut done = 0;
    while done < 2000 {
        let n = rng.random_range(3..=6usize);
        let d = rng.random_range(1..=2usize);
        let coords: Vec<f64> = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = Configuration::from_flat(d, n, coords).unwrap();
        let mut w = vec![0u32; n];
        for _ in 0..n {
            w[rng.random_range(0..n)] += 1;
        }
        let trace = match collapse(&x, &w) {
            Ok(t) => t,
            Err(Error::Ambiguous { .. }) => continue,
            Err(e) => panic!("{e:?}"),
        };
        done += 1;
        assert!(trace.len() <= (n - 1) * (n - 1));
        let fw = trace.final_weights();
        assert_eq!(fw.iter().filter(|&&v| v > 0).count(), 1);
        assert_eq!(fw.iter().sum::<u32>(), n as u32);
        for (i, &l) in trace.sequence.iter().enumerate() {
            assert!(trace.weights[i][l] > 0, "invalid step");
        }
    }
}

#[test]
fn stability_inside_an_eighth_of_the_path_margin() {
    let mut rng = RngStream::new(8, 0);
    let mut tested = 0;
    while tested < 50 {
        let coords: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = Configuration::from_flat(2, 4, coords).unwrap();
        let Ok(trace) = collapse(&x, &[1, 1, 1, 1]) else { continue };
        if trace.is_empty() {
            continue;
        }
        tested += 1;
        let radius = trace.path_margin / 8.0 * (1.0 - 1e-9);
        assert!(neighborhood_stability(&x, &[1, 1, 1, 1], radius, 200, &mut rng).unwrap());
        assert!(neighborhood_stability(&x, &[1, 1, 1, 1], trace.path_margin, 10, &mut rng).is_err());
    }
}

#[test]
fn wide_perturbations_eventually_diverge() {
    let x = Configuration::line(&[0.0, 1.0, 3.0]).unwrap();
    let m = collapse(&x, &[1, 1, 1]).unwrap().path_margin;
    let hit = find_trace_divergence(&x, &[1, 1, 1], 10.0 * m, 20_000, &mut RngStream::new(1, 0)).unwrap();
    assert!(hit.is_some());
}
