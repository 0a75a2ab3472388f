use std::collections::{BTreeSet, HashSet, VecDeque};

use fpp_core::lattice::{neighbors, star_neighbors};
use fpp_core::shells::{black_star_cluster, exterior_boundary, shell_travel_time, Coloring, ShellBuilder};
use fpp_core::weights::{mix64, quantile_tbar};
use fpp_core::{DistributionSpec, Fixed, LatticePoint, Window, WeightField};

fn p(c: &[i32]) -> LatticePoint {
    LatticePoint::new(c)
}

fn nn_connected(set: &BTreeSet<LatticePoint>) -> bool {
    let Some(start) = set.iter().next() else { return true };
    let mut seen = HashSet::from([*start]);
    let mut q = VecDeque::from([*start]);
    while let Some(a) = q.pop_front() {
        for (_, b) in neighbors(&a) {
            if set.contains(&b) && seen.insert(b) {
                q.push_back(b);
            }
        }
    }
    seen.len() == set.len()
}

/// Nearest-neighbour flood from `from` avoiding `blocked`, inside `window`.
fn flood_avoiding(
    from: &LatticePoint,
    blocked: &BTreeSet<LatticePoint>,
    window: &Window,
) -> HashSet<LatticePoint> {
    let mut seen = HashSet::new();
    if blocked.contains(from) {
        return seen;
    }
    seen.insert(*from);
    let mut q = VecDeque::from([*from]);
    while let Some(a) = q.pop_front() {
        for (_, b) in neighbors(&a) {
            if window.contains(&b) && !blocked.contains(&b) && seen.insert(b) {
                q.push_back(b);
            }
        }
    }
    seen
}

#[test]
fn star_flood_matches_grid_oracle() {
    let mut finite = 0;
    for seed in 0..40u64 {
        let p0 = if seed % 2 == 0 { 0.9 } else { 0.96 };
        finite += star_flood_case(seed, p0) as usize;
    }
    assert!(finite >= 10, "{finite}");
}

fn star_flood_case(seed: u64, p0: f64) -> bool {
    let spec = DistributionSpec::Bernoulli { p0 };
    let field = WeightField::<f64>::new(seed, spec, 2);
    let col = Coloring::new(&field, 0.5);
    let w = Window::centered(&p(&[0, 0]), 4);
    // explicit 9×9 grid of colors
    let black: Vec<Vec<bool>> = (-4..=4)
        .map(|x| (-4..=4).map(|y| col.is_black(&p(&[x, y]))).collect())
        .collect();
    let is_black = |x: i32, y: i32| black[(x + 4) as usize][(y + 4) as usize];
    // oracle: repeated relaxation until fixpoint
    let mut inside = vec![vec![false; 9]; 9];
    inside[4][4] = true;
    loop {
        let mut changed = false;
        for x in -4..=4i32 {
            for y in -4..=4i32 {
                if inside[(x + 4) as usize][(y + 4) as usize] || !is_black(x, y) {
                    continue;
                }
                let adj = (-1..=1).any(|dx: i32| {
                    (-1..=1).any(|dy: i32| {
                        let (a, b) = (x + dx, y + dy);
                        (dx, dy) != (0, 0)
                            && (-4..=4).contains(&a)
                            && (-4..=4).contains(&b)
                            && inside[(a + 4) as usize][(b + 4) as usize]
                            && ((a, b) == (0, 0) || is_black(a, b))
                    })
                });
                if adj {
                    inside[(x + 4) as usize][(y + 4) as usize] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let oracle: BTreeSet<LatticePoint> = (-4..=4i32)
        .flat_map(|x| (-4..=4i32).map(move |y| (x, y)))
        .filter(|&(x, y)| inside[(x + 4) as usize][(y + 4) as usize])
        .map(|(x, y)| p(&[x, y]))
        .collect();
    let got = black_star_cluster(&col, &[p(&[0, 0])], &w, false).unwrap();
    let touches = oracle.iter().any(|q| w.on_face(q));
    assert_eq!(got.indeterminate, touches);
    if !touches {
        assert_eq!(got.members, oracle);
    }
    !touches
}

#[test]
fn exterior_boundary_of_star_connected_sets_is_connected() {
    let w = Window::centered(&p(&[0, 0]), 30);
    for seed in 0..100u64 {
        // random ⋆-connected cluster grown from the origin
        let mut c = BTreeSet::from([p(&[0, 0])]);
        let mut h = seed;
        let size = 3 + (mix64(seed) % 25) as usize;
        while c.len() < size {
            h = mix64(h);
            let members: Vec<_> = c.iter().copied().collect();
            let base = members[(h % members.len() as u64) as usize];
            let nb = star_neighbors(&base);
            let next = nb[((h >> 32) % nb.len() as u64) as usize];
            if next.linf() < 10 {
                c.insert(next);
            }
        }
        let b: BTreeSet<_> = exterior_boundary(&c, &w).unwrap().into_iter().collect();
        assert!(nn_connected(&b), "seed {seed}");
        // the boundary separates the cluster from the face
        let reach = flood_avoiding(&p(&[0, 0]), &b, &w);
        assert!(reach.iter().all(|q| !w.on_face(q)));
    }
}

#[test]
fn shell_properties_on_uniform_fields() {
    let spec = DistributionSpec::Uniform;
    let delta = 0.02;
    let tbar = quantile_tbar(&spec, delta).unwrap();
    let mut complete = 0;
    let mut total = 0;
    for seed in 0..3u64 {
        let field = WeightField::<Fixed>::new(seed, spec, 2);
        let window = Window::centered(&p(&[0, 0]), 60);
        let builder = ShellBuilder::new(&field, tbar, window);
        let centers: Vec<_> = (-3..=3)
            .flat_map(|i| (-3..=3).map(move |j| p(&[8 * i, 8 * j])))
            .collect();
        let mut shells = Vec::new();
        for z in &centers {
            total += 1;
            let s = builder.build(z).unwrap();
            if !s.is_complete() {
                continue;
            }
            complete += 1;
            let delta_set: BTreeSet<_> = s.delta.iter().copied().collect();
            let s_set: BTreeSet<_> = s.s.iter().copied().collect();
            // property 1 and whiteness
            assert!(nn_connected(&delta_set));
            assert!(s_set.is_subset(&delta_set));
            assert!(s.delta.iter().all(|q| builder.is_white(q)));
            // property 2
            let reach = flood_avoiding(z, &delta_set, &window);
            assert!(reach.iter().all(|q| !window.on_face(q)));
            // property 3
            assert!(s.delta.iter().any(|q| builder.in_infinite_white(q)));
            shells.push(s);
        }
        // property 4 and the comparison inequality on pairs
        for a in &shells {
            for b in &shells {
                if a.center >= b.center {
                    continue;
                }
                let da: BTreeSet<_> = a.delta.iter().copied().collect();
                let db: BTreeSet<_> = b.delta.iter().copied().collect();
                if da.is_disjoint(&db) {
                    assert!(!flood_avoiding(&a.center, &da, &window).contains(&b.center));
                    assert!(!flood_avoiding(&b.center, &db, &window).contains(&a.center));
                }
            }
        }
        for pair in shells.windows(2).take(10) {
            let cmp = shell_travel_time(&field, &pair[0], &pair[1], &window).unwrap();
            assert!(cmp.lower_holds && cmp.upper_holds, "{cmp:?}");
        }
    }
    assert!(complete as f64 >= 0.9 * total as f64, "{complete}/{total}");
}
