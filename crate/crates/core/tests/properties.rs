use proptest::prelude::*;

use ultracomb::coders::{level_visit_times, sphere_comb_from_contour, tree_from_contour, ContourFunction};
use ultracomb::comb::position_distance;
use ultracomb::intensity::{time_change_comb, TimeChange};
use ultracomb::mutation::{
    assign_alleles, clades, clonal_set, scatter_mutations, Branch, Mutation, MutationMeasure, MutationSet,
};
use ultracomb::samplers::{sample_kingman_comb, RandomSource};
use ultracomb::spectrum::{spectrum_of_partition, KingmanSample};
use ultracomb::ultrametric::distance_matrix;
use ultracomb::{
    ball_partition, comb_distance, comb_from_ultrametric, comb_to_tree, BoundaryPoint, Comb, Face, Tooth, Tree,
};

/// Combs on [0, 1] with heights on a coarse grid, so ties are common.
fn arb_comb() -> impl Strategy<Value = Comb> {
    prop::collection::vec((0.001f64..0.999, 1u32..16), 0..15).prop_map(|mut raw| {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        raw.dedup_by(|a, b| a.0 == b.0);
        let teeth = raw.into_iter().map(|(x, k)| Tooth::new(x, k as f64 / 8.0)).collect();
        Comb::new(1.0, 2.5, teeth).unwrap()
    })
}

fn arb_point(c: &Comb, pick: (usize, u8, f64)) -> BoundaryPoint {
    let (i, mode, x) = pick;
    if c.n_teeth() == 0 || mode == 0 {
        return BoundaryPoint::at(x);
    }
    let pos = c.teeth()[i % c.n_teeth()].pos;
    let face = if mode == 1 { Face::Left } else { Face::Right };
    BoundaryPoint::new(pos, face).unwrap()
}

fn arb_contour() -> impl Strategy<Value = ContourFunction> {
    prop::collection::vec((0.05f64..2.0, 0.05f64..3.0), 1..8).prop_map(|steps| {
        let mut t = 0.0;
        let jumps: Vec<(f64, f64)> = steps
            .into_iter()
            .map(|(gap, size)| {
                let out = (t, size);
                t += gap;
                out
            })
            .collect();
        ContourFunction::from_jumps(&jumps).unwrap()
    })
}

fn leaf_depths(t: &Tree) -> Vec<f64> {
    t.leaves().into_iter().map(|l| t.node(l).depth).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn comb_distance_is_ultrametric(
        c in arb_comb(),
        picks in prop::collection::vec((0usize..64, 0u8..3, 0.0f64..=1.0), 3..8),
    ) {
        let pts: Vec<BoundaryPoint> = picks.iter().map(|&p| arb_point(&c, p)).collect();
        let d = |i: usize, j: usize| comb_distance(&c, pts[i], pts[j]).unwrap();
        for x in 0..pts.len() {
            prop_assert_eq!(d(x, x), 0.0);
            for y in 0..pts.len() {
                prop_assert_eq!(d(x, y), d(y, x));
                for z in 0..pts.len() {
                    prop_assert!(d(x, z) <= d(x, y).max(d(y, z)));
                }
            }
        }
    }

    #[test]
    fn ball_partitions_refine(c in arb_comb(), xs in prop::collection::vec(0.0f64..=1.0, 1..12), r1 in 0.01f64..4.0, r2 in 0.01f64..4.0) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let fine = ball_partition(&c, &xs, lo).unwrap();
        let coarse = ball_partition(&c, &xs, hi).unwrap();
        prop_assert!(fine.refines(&coarse));
        for b in fine.blocks() {
            for &i in b {
                for &j in b {
                    prop_assert!(position_distance(&c, xs[i], xs[j]).unwrap() <= lo);
                }
            }
        }
    }

    #[test]
    fn ultrametric_roundtrip_is_exact(c in arb_comb()) {
        let mids = c.leaf_midpoints();
        let d = distance_matrix(&c, &mids).unwrap();
        let emb = comb_from_ultrametric(&d, None, None).unwrap();
        let back: Vec<f64> = (0..mids.len()).map(|i| emb.midpoint(i)).collect();
        prop_assert_eq!(distance_matrix(&emb.comb, &back).unwrap(), d);
    }

    #[test]
    fn leaf_measures_fill_the_interval(c in arb_comb()) {
        let total: f64 = c.leaf_measures().iter().sum();
        prop_assert!((total - c.interval_length()).abs() < 1e-12);
    }

    #[test]
    fn comb_tree_is_ultrametric(c in arb_comb()) {
        let t = comb_to_tree(&c);
        prop_assert!(leaf_depths(&t).iter().all(|&x| x == c.origin_height()));
        let mids = c.leaf_midpoints();
        for i in 0..mids.len() {
            for j in 0..mids.len() {
                let u = t.leaf_by_label(&i.to_string()).unwrap();
                let v = t.leaf_by_label(&j.to_string()).unwrap();
                let want = position_distance(&c, mids[i], mids[j]).unwrap();
                prop_assert!((t.distance(u, v) - want).abs() < 1e-12);
            }
        }
        let back = Tree::from_newick(&t.to_newick()).unwrap();
        prop_assert_eq!(back.canonical_shape(9), t.canonical_shape(9));
    }

    #[test]
    fn comb_json_roundtrip(c in arb_comb()) {
        let text = serde_json::to_string(&c).unwrap();
        let back: Comb = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn contour_distance_four_point(h in arb_contour(), us in prop::collection::vec(0.0f64..1.0, 2..8)) {
        let ct = tree_from_contour(&h);
        let end = h.support_end();
        let ts: Vec<f64> = us.iter().map(|u| u * end).collect();
        let d = |i: usize, j: usize| ct.distance(ts[i], ts[j]);
        let n = ts.len();
        let tol = 1e-9 * (1.0 + end);
        for a in 0..n {
            for b in 0..n {
                prop_assert!(d(a, b) >= -tol && (d(a, b) - d(b, a)).abs() < tol);
                for c in 0..n {
                    prop_assert!(d(a, c) <= d(a, b) + d(b, c) + tol);
                    for e in 0..n {
                        let mut s = [d(a, b) + d(c, e), d(a, c) + d(b, e), d(a, e) + d(b, c)];
                        s.sort_by(f64::total_cmp);
                        prop_assert!(s[2] - s[1] < tol);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_comb_matches_tree(h in arb_contour(), u in 0.05f64..0.95) {
        let top = h.jumps().iter().fold(0.0f64, |m, j| m.max(j.after));
        let level = u * top;
        let Ok(c) = sphere_comb_from_contour(&h, level) else { return Ok(()) };
        let ct = tree_from_contour(&h);
        let visits = level_visit_times(&h, level);
        prop_assert_eq!(visits.len(), c.n_leaves());
        for i in 0..visits.len() {
            for j in 0..visits.len() {
                let want = position_distance(&c, i as f64 + 0.5, j as f64 + 0.5).unwrap();
                prop_assert!((ct.distance(visits[i], visits[j]) - want).abs() < 1e-9 * (1.0 + top));
            }
        }
    }

    #[test]
    fn time_change_composition(c in arb_comb(), k in 0.1f64..10.0) {
        let psi = TimeChange::Linear(k);
        let there = time_change_comb(&c, &psi).unwrap();
        let back = time_change_comb(&there, &psi.inverse()).unwrap();
        for (a, b) in c.teeth().iter().zip(back.teeth()) {
            prop_assert_eq!(a.pos, b.pos);
            prop_assert!((a.h - b.h).abs() <= 1e-12 * a.h);
        }
        prop_assert!((back.origin_height() - c.origin_height()).abs() <= 1e-12);
    }

    #[test]
    fn alleles_partition_the_sample(c in arb_comb(), seed in any::<u64>(), theta in 0.0f64..4.0, xs in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let ms = scatter_mutations(&c, &MutationMeasure::uniform(theta), true, &mut RandomSource::new(seed)).unwrap();
        let ap = assign_alleles(&c, &ms, &xs).unwrap();
        let mut seen = vec![0; xs.len()];
        for b in ap.partition.blocks() {
            for &i in b {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for b in ap.partition.blocks() {
            prop_assert!(b.iter().all(|&i| ap.alleles[i] == ap.alleles[b[0]]));
        }
    }

    #[test]
    fn clades_are_laminar(c in arb_comb(), seed in any::<u64>(), theta in 0.0f64..6.0) {
        let ms = scatter_mutations(&c, &MutationMeasure::uniform(theta), true, &mut RandomSource::new(seed)).unwrap();
        let cl = clades(&c, &ms);
        for a in &cl {
            for b in &cl {
                let disjoint = a.end <= b.start || b.end <= a.start;
                let nested = (a.start <= b.start && b.end <= a.end) || (b.start <= a.start && a.end <= b.end);
                prop_assert!(disjoint || nested, "{:?} vs {:?}", a, b);
            }
        }
    }

    #[test]
    fn clonal_set_matches_grid_labels(c in arb_comb(), seed in any::<u64>(), theta in 0.0f64..3.0, origin in any::<bool>()) {
        let ms = scatter_mutations(&c, &MutationMeasure::uniform(theta), origin, &mut RandomSource::new(seed)).unwrap();
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let ap = assign_alleles(&c, &ms, &grid).unwrap();
        let cs = clonal_set(&c, &ms);
        for (x, a) in grid.iter().zip(&ap.alleles) {
            prop_assert_eq!(cs.contains(*x), a.is_none(), "x = {}", x);
        }
    }

    #[test]
    fn mutations_never_enlarge_the_clonal_set(c in arb_comb(), seed in any::<u64>(), theta in 0.0f64..3.0, extra in (0usize..16, 0.001f64..0.999)) {
        let ms = scatter_mutations(&c, &MutationMeasure::uniform(theta), false, &mut RandomSource::new(seed)).unwrap();
        let (i, u) = extra;
        let m = if i >= c.n_teeth() {
            Mutation { branch: Branch::Origin, depth: u * c.origin_height() }
        } else {
            Mutation { branch: Branch::Tooth(i), depth: u * c.teeth()[i].h }
        };
        let Ok(more) = ms.with(&c, m) else { return Ok(()) };
        prop_assert!(clonal_set(&c, &more).is_subset_of(&clonal_set(&c, &ms)));
    }

    #[test]
    fn mutation_json_roundtrip(c in arb_comb(), seed in any::<u64>()) {
        let ms = scatter_mutations(&c, &MutationMeasure::uniform(2.0), true, &mut RandomSource::new(seed)).unwrap();
        let text = serde_json::to_string(&ms).unwrap();
        let atoms: Vec<Mutation> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(MutationSet::new(&c, atoms).unwrap(), ms);
    }

    #[test]
    fn sample_spectrum_counts_everyone(n in 1usize..40, theta in 0.05f64..5.0, seed in any::<u64>()) {
        let ks = KingmanSample::new(n, theta).unwrap();
        let s = spectrum_of_partition(&ks.partition(&mut RandomSource::new(seed)));
        prop_assert_eq!(s.total(), n as f64);
    }

    #[test]
    fn seeded_sampling_is_deterministic(n in 1usize..200, seed in any::<u64>()) {
        let a = sample_kingman_comb(n, &mut RandomSource::new(seed)).unwrap();
        let b = sample_kingman_comb(n, &mut RandomSource::new(seed)).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
