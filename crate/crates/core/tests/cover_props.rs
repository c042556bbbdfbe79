use affine_abstraction::cover::{cover_error, eps_cover, lookup, Cover, CoverRequest, LeafStatus};
use affine_abstraction::funcspec::FunctionSpec;
use affine_abstraction::geometry::HyperBox;
use affine_abstraction::smoothness::{SmoothnessClass, SmoothnessSpec};
use affine_abstraction::verify::{check_cover, DEFAULT_TOLERANCE};
use proptest::prelude::*;

fn request(epsilon: f64) -> CoverRequest {
    // Hessian of sin(x) + x*y/2 has spectral norm at most 1 + 1/2.
    CoverRequest::new(
        FunctionSpec::parse("sin(x) + x*y/2", &["x", "y"], 1).unwrap(),
        HyperBox::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap(),
        vec![3, 3],
        epsilon,
        SmoothnessSpec::supplied(SmoothnessClass::C2, &[1.5]).unwrap(),
    )
}

fn overlap(a: &HyperBox, b: &HyperBox) -> f64 {
    (0..a.dim())
        .map(|j| (a.upper()[j].min(b.upper()[j]) - a.lower()[j].max(b.lower()[j])).max(0.0))
        .product()
}

fn assert_partition(cover: &Cover) {
    let root = &cover.request.root;
    let total: f64 = cover.leaves.iter().map(|l| l.bounds.volume()).sum();
    assert!((total - root.volume()).abs() <= 1e-9 * root.volume());
    for (i, a) in cover.leaves.iter().enumerate() {
        for b in &cover.leaves[i + 1..] {
            assert_eq!(overlap(&a.bounds, &b.bounds), 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cover_is_certified_partition(epsilon in 0.08f64..2.0) {
        let cover = eps_cover(&request(epsilon)).unwrap();
        prop_assert!(cover.is_complete());
        assert_partition(&cover);
        for l in &cover.leaves {
            prop_assert!(l.pair.error <= epsilon);
            prop_assert_eq!(&l.status, &LeafStatus::Certified);
        }
        let e = cover_error(&cover);
        prop_assert!(e.certified && e.value <= epsilon);
        let report = check_cover(&cover, &cover.request.spec, 200, 3, DEFAULT_TOLERANCE).unwrap();
        prop_assert_eq!(report.violations, 0);
    }

    #[test]
    fn halving_epsilon_never_decreases_leaves(epsilon in 0.1f64..2.0) {
        let coarse = eps_cover(&request(epsilon)).unwrap().leaves.len();
        let fine = eps_cover(&request(epsilon / 2.0)).unwrap().leaves.len();
        prop_assert!(fine >= coarse, "{} leaves at {}, {} at half", coarse, epsilon, fine);
    }

    #[test]
    fn lookup_finds_a_containing_leaf(t in prop::collection::vec(0.0f64..=1.0, 2)) {
        let cover = eps_cover(&request(0.2)).unwrap();
        let root = &cover.request.root;
        let p: Vec<f64> = (0..2).map(|j| root.lower()[j] + t[j] * root.widths()[j]).collect();
        let (i, leaf) = lookup(&cover, &p).unwrap();
        prop_assert!(leaf.bounds.contains(&p));
        prop_assert!(cover.leaves[..i].iter().all(|l| !l.bounds.contains(&p)));
    }
}

fn strip_time(mut c: Cover) -> Cover {
    c.stats.wall_time = Default::default();
    c
}

#[test]
fn covers_are_deterministic() {
    let a = strip_time(eps_cover(&request(0.1)).unwrap());
    let b = strip_time(eps_cover(&request(0.1)).unwrap());
    assert_eq!(a, b);
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_the_cover() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| strip_time(eps_cover(&request(0.05)).unwrap()))
    };
    let one = run(1);
    assert!(one.leaves.len() > 4);
    assert_eq!(one, run(4));
}

#[test]
fn max_depth_zero_gives_flagged_root() {
    let mut req = request(1e-6);
    req.max_depth = 0;
    let cover = eps_cover(&req).unwrap();
    assert_eq!(cover.leaves.len(), 1);
    assert_eq!(cover.leaves[0].status, LeafStatus::ErrorAboveEpsilon);
    assert!(!cover_error(&cover).certified);
}
