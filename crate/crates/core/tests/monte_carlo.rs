//! Monte Carlo checks against independent oracles: closed-form volumes,
//! exact pmf sums and integral-geometry counts.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use palmcox::graph::interior_degree_sum;
use palmcox::stats::{correlation, ks_test, poisson_pmf};
use palmcox::{
    count_gof_test, distance_graph, estimate_intensity, high_adjacency_scan, iid_marking, lifted_quotient_graph,
    palm_cox, palm_reroot_estimate, replicate, reroot_agreement_test, sample_cox_folner, sample_cox_given_cosets, sample_cox_quotient, sample_poisson_group,
    star_union, tv_estimate, two_sample_fidi_test, voronoi_assign, coordinate_labels, Configuration, CosetId,
    Estimate, FidiSample, FolnerSet, ModelGroup, StarSchedule, StreamKey, Subgroup, Window,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn ratio(per: &[(f64, f64)]) -> Estimate {
    let num: Vec<f64> = per.iter().map(|p| p.0).collect();
    let den: Vec<f64> = per.iter().map(|p| p.1).collect();
    Estimate::ratio(&num, &den).unwrap()
}

#[test]
fn cox_samplers_have_intensity_one_on_every_pair() {
    let pairs = vec![
        Subgroup::axes(ModelGroup::euclidean(2).unwrap(), &[1]).unwrap(),
        Subgroup::axes(ModelGroup::euclidean(3).unwrap(), &[0, 2]).unwrap(),
        Subgroup::axes(ModelGroup::lattice(2).unwrap(), &[0]).unwrap(),
        Subgroup::center(ModelGroup::heisenberg()).unwrap(),
    ];
    for (k, sub) in pairs.iter().enumerate() {
        let model = sub.model();
        let w = Window::cube(model.dim(), 0.0, 1.0).unwrap();
        let key = StreamKey::new(11).child(k as u64);
        let q: Vec<Configuration> = replicate(key.named("q"), 4000, |_, r| {
            sample_cox_quotient(sub, &w, 0.0, r).unwrap().config().clone()
        });
        let e = estimate_intensity(&q, &w).unwrap();
        assert!(e.within_sigmas(1.0, 3.0), "quotient {k}: {e:?}");
        let f = FolnerSet::symmetric(sub, 2.0).unwrap();
        let d = f.metric_diameter();
        let fs: Vec<Configuration> = replicate(key.named("f"), 4000, |_, r| {
            sample_cox_folner(sub, &f, &w, d, r).unwrap().config().clone()
        });
        let e = estimate_intensity(&fs, &w).unwrap();
        assert!(e.within_sigmas(1.0, 3.0), "folner {k}: {e:?}");
    }
}

#[test]
fn distance_graph_degree_is_ball_volume() {
    let model = ModelGroup::euclidean(2).unwrap();
    let w = Window::cube(2, 0.0, 8.0).unwrap();
    let r = 1.0;
    let per: Vec<(f64, f64)> = replicate(StreamKey::new(2), 400, |_, rng| {
        let c = sample_poisson_group(model, &w, r, 1.0, rng).unwrap();
        let g = distance_graph(&c, r).unwrap();
        let (s, n) = interior_degree_sum(&g, &c, r);
        (s, n as f64)
    });
    let e = ratio(&per);
    assert!(e.within_sigmas(PI * r * r, 3.0), "{e:?}");
}

#[test]
fn star_union_degree_within_budget() {
    for (k, model) in [ModelGroup::euclidean(2).unwrap(), ModelGroup::heisenberg()].into_iter().enumerate() {
        let sched = StarSchedule::geometric(&model, 0.5, 3).unwrap();
        let m = sched.max_radius();
        let w = Window::centered(model.dim(), 4.0).unwrap();
        let per: Vec<(f64, f64)> = replicate(StreamKey::new(3).child(k as u64), 400, |_, rng| {
            let c = sample_poisson_group(model, &w, m, 1.0, rng).unwrap();
            let marked = iid_marking(&c, rng);
            let g = star_union(&marked, &sched);
            let (s, n) = interior_degree_sum(&g, &c, m);
            (s, n as f64)
        });
        let e = ratio(&per);
        assert!(e.value <= sched.budget() + 3.0 * e.std_err, "{e:?} vs {}", sched.budget());
        // Overlaps between stages are rare, so the budget is nearly attained.
        assert!(e.value >= 0.8 * sched.budget(), "{e:?}");
    }
}

#[test]
fn lifted_links_per_coset_match_transversal_degree() {
    let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
    let (p, r_q) = (0.4, 1.5);
    let side = 8.0;
    let w = Window::new(vec![-side / 2.0, -side / 2.0, 0.0], vec![side / 2.0, side / 2.0, 10.0]).unwrap();
    let per: Vec<(f64, f64, f64, f64)> = replicate(StreamKey::new(4), 300, |_, rng| {
        let cox = sample_cox_quotient(&sub, &w, 0.0, rng).unwrap();
        let g = lifted_quotient_graph(&cox, p, r_q, rng).unwrap();
        let mut linked = vec![BTreeSet::new(); cox.cosets().len()];
        for e in g.edges() {
            linked[cox.coset_of()[e.source as usize]].insert(cox.coset_of()[e.target as usize]);
        }
        let inner = side / 2.0 - r_q;
        let interior: Vec<usize> = (0..cox.cosets().len())
            .filter(|&c| cox.cosets()[c].coords().iter().all(|x| x.abs() <= inner))
            .collect();
        let links: f64 = interior.iter().map(|&c| linked[c].len() as f64).sum();
        let deg = g.degrees();
        let pts = cox.config().len() as f64;
        (links, interior.len() as f64, deg.iter().map(|d| *d as f64).sum::<f64>(), pts)
    });
    let per_coset = ratio(&per.iter().map(|v| (v.0, v.1)).collect::<Vec<_>>());
    // Every coset carries points with probability 1 − e^{−10}.
    let oracle = p * PI * r_q * r_q * (1.0 - (-10f64).exp());
    assert!(per_coset.within_sigmas(oracle, 3.0), "{per_coset:?} vs {oracle}");
    let per_point = ratio(&per.iter().map(|v| (v.2, v.3)).collect::<Vec<_>>());
    assert!(per_point.value <= p * PI * r_q * r_q + 3.0 * per_point.std_err);
}

#[test]
fn adjacency_pair_count_matches_integral_geometry() {
    let sub = Subgroup::axes(ModelGroup::euclidean(2).unwrap(), &[0]).unwrap();
    for l in [20.0, 40.0] {
        let w = Window::new(vec![0.0, -1.0], vec![l, 4.0]).unwrap();
        let counts: Vec<f64> = replicate(StreamKey::new(5).child(l as u64), 600, |_, rng| {
            let cox = sample_cox_given_cosets(&sub, &[CosetId::new([0.0]), CosetId::new([3.0])], &w, 0.0, rng).unwrap();
            high_adjacency_scan(&cox, 4.0, 1, 0.0)
                .unwrap()
                .first()
                .map_or(0.0, |p| p.pairs as f64)
        });
        // Area of {(s, t) ∈ [0, L]² : |s − t| < √7}.
        let h = 7f64.sqrt();
        let oracle = l * l - (l - h) * (l - h);
        let e = Estimate::from_values(&counts).unwrap();
        assert!(e.within_sigmas(oracle, 3.0), "L={l}: {e:?} vs {oracle}");
    }
}

#[test]
fn tv_matches_exact_pmf_sum() {
    let exact: f64 = 0.5 * (0..60).map(|k| (poisson_pmf(k, 1.0) - poisson_pmf(k, 2.0)).abs()).sum::<f64>();
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let draw = |mu: f64, r: &mut ChaCha8Rng| {
        let d = Poisson::new(mu).unwrap();
        let rows = (0..20_000).map(|_| vec![d.sample(r) as u64]).collect();
        FidiSample::new(vec![Window::cube(1, 0.0, 1.0).unwrap()], rows).unwrap()
    };
    let a = draw(1.0, &mut r);
    let b = draw(2.0, &mut r);
    let tv = tv_estimate(&a, &b, 200, &mut r).unwrap();
    assert!((tv.value - exact).abs() < 0.015, "{tv:?} vs {exact}");
    assert!(tv.ci_low - 0.01 <= exact && exact <= tv.ci_high + 0.01, "{tv:?} vs {exact}");
    let c = draw(1.0, &mut r);
    assert!(tv_estimate(&a, &c, 100, &mut r).unwrap().value < 0.02);
}

#[test]
fn null_p_values_are_uniform() {
    let boxes = vec![Window::cube(1, 0.0, 1.0).unwrap()];
    let ps: Vec<(f64, f64)> = replicate(StreamKey::new(7), 200, |_, r| {
        let d = Poisson::new(5.0).unwrap();
        let mut draw = || -> FidiSample {
            let rows = (0..600).map(|_| vec![d.sample(r) as u64]).collect();
            FidiSample::new(boxes.clone(), rows).unwrap()
        };
        let a = draw();
        let b = draw();
        (count_gof_test(&a, &[5.0]).unwrap()[0], two_sample_fidi_test(&a, &b).unwrap())
    });
    let gof: Vec<f64> = ps.iter().map(|p| p.0).collect();
    let two: Vec<f64> = ps.iter().map(|p| p.1).collect();
    let (_, p1) = ks_test(&gof, |x| x.clamp(0.0, 1.0));
    let (_, p2) = ks_test(&two, |x| x.clamp(0.0, 1.0));
    assert!(p1 > 0.01, "goodness-of-fit p-values not uniform: {p1}");
    assert!(p2 > 0.01, "two-sample p-values not uniform: {p2}");
}

#[test]
fn marks_uniform_and_independent_of_location() {
    let model = ModelGroup::euclidean(2).unwrap();
    let w = Window::cube(2, 0.0, 10.0).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let c = sample_poisson_group(model, &w, 0.0, 50.0, &mut r).unwrap();
    let m = iid_marking(&c, &mut r);
    let (_, p) = ks_test(m.marks(), |x| x.clamp(0.0, 1.0));
    assert!(p > 0.01, "{p}");
    let xs: Vec<f64> = c.points().iter().map(|p| p.coords()[0]).collect();
    let rho = correlation(m.marks(), &xs);
    assert!(rho.abs() < 3.0 / (xs.len() as f64).sqrt(), "{rho}");
}

#[test]
fn palm_cox_identity_coset_count_is_one_plus_poisson() {
    let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
    let w = Window::cube(3, -1.0, 1.0).unwrap();
    let rows: Vec<Vec<u64>> = replicate(StreamKey::new(9), 2000, |_, r| {
        let s = palm_cox(&sub, &w, 0.0, r).unwrap();
        let cox = s.cox().unwrap();
        let id = cox.coset_of()[s.root()];
        let n = cox.coset_of().iter().filter(|&&c| c == id).count() as u64;
        vec![n - 1]
    });
    // The identity coset meets the window in a segment of length 2.
    let f = FidiSample::new(vec![w.clone()], rows).unwrap();
    let p = count_gof_test(&f, &[2.0]).unwrap()[0];
    assert!(p > 0.01, "{p}");
}

#[test]
fn voronoi_translation_equivariant() {
    let z = ModelGroup::lattice(2).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let w = Window::cube(2, 0.0, 30.0).unwrap();
    let c = sample_poisson_group(z, &w, 0.0, 0.05, &mut r).unwrap();
    let shift = [7.0, -3.0];
    let moved: Vec<_> = c.translated_points(&shift.into());
    let w2 = Window::new(vec![7.0, -3.0], vec![37.0, 27.0]).unwrap();
    let c2 = Configuration::new(z, moved, w2, 0.0).unwrap();
    let labels = coordinate_labels(&c);
    let a = voronoi_assign(&c, &[], &labels).unwrap();
    let b = voronoi_assign(&c2, &[], &labels).unwrap();
    assert_eq!(a.owners, b.owners);
}

#[test]
fn interior_voronoi_cells_stabilize() {
    let model = ModelGroup::euclidean(2).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let big = Window::cube(2, -4.0, 14.0).unwrap();
    let c = sample_poisson_group(model, &big, 0.0, 3.0, &mut r).unwrap();
    let labels = coordinate_labels(&c);
    let small = Configuration::new(model, c.points().to_vec(), Window::cube(2, 0.0, 10.0).unwrap(), 4.0).unwrap();
    let large = Configuration::new(model, c.points().to_vec(), Window::cube(2, -2.0, 12.0).unwrap(), 2.0).unwrap();
    let a = voronoi_assign(&small, &[400, 400], &labels).unwrap();
    let b = voronoi_assign(&large, &[560, 560], &labels).unwrap();
    let mut checked = 0;
    for (i, p) in c.points().iter().enumerate() {
        let x = p.coords();
        if (3.0..7.0).contains(&x[0]) && (3.0..7.0).contains(&x[1]) {
            checked += 1;
            assert!(a.volumes[i] > 0.0);
            let rel = (a.volumes[i] - b.volumes[i]).abs() / a.volumes[i];
            assert!(rel < 0.02, "point {i}: {} vs {}", a.volumes[i], b.volumes[i]);
        }
    }
    assert!(checked > 20);
    assert!(a.volumes.iter().all(|v| *v <= 100.0 + 1e-9));
}

#[test]
fn reroot_agreement_test_holds_level_under_cox_clustering() {
    let sub = Subgroup::axes(ModelGroup::euclidean(2).unwrap(), &[1]).unwrap();
    let boxes = vec![
        Window::cube(2, -1.0, 1.0).unwrap(),
        Window::new(vec![-0.25, 0.0], vec![0.25, 1.5]).unwrap(),
    ];
    let runs = 200;
    let p: Vec<f64> = replicate(StreamKey::new(77), runs, |_, r| {
        let stationary: Vec<Configuration> = (0..100)
            .map(|_| {
                sample_cox_quotient(&sub, &Window::cube(2, -3.0, 3.0).unwrap(), 2.0, r)
                    .unwrap()
                    .config()
                    .clone()
            })
            .collect();
        let rerooted = palm_reroot_estimate(&stationary, &boxes, 0.0).unwrap();
        let rows: Vec<Configuration> = (0..1000)
            .map(|_| {
                palm_cox(&sub, &Window::cube(2, -1.5, 1.5).unwrap(), 0.0, r)
                    .unwrap()
                    .config()
                    .clone()
            })
            .collect();
        let construction = FidiSample::from_configs(&rows, &boxes).unwrap();
        let ps = reroot_agreement_test(&rerooted, &construction).unwrap();
        ps.into_iter().fold(1.0, f64::min) * boxes.len() as f64
    });
    let rate = p.iter().filter(|v| **v < 0.05).count() as f64 / runs as f64;
    let sd = (0.05 * 0.95 / runs as f64).sqrt();
    assert!(rate <= 0.05 + 3.0 * sd, "rejection rate {rate}");
}
