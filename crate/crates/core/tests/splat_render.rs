mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenecap::buffer::{DEPTH, VALIDITY};
use scenecap::splat::{render_with_threads, Footprint};
use scenecap::{render, DeepBuffer, PointCloud, SplatOptions};

#[test]
fn matches_naive_reference_on_random_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for scene in 0..60 {
        let (cloud, vp, opts) = common::random_splat_scene(&mut rng, scene % 2 == 1);
        let buf = render(&cloud, &vp, &opts).unwrap();
        let expect = common::expected_channels(&cloud, &common::naive_splat(&cloud, &vp, &opts));
        assert_eq!(
            common::render_channels(&buf),
            expect,
            "scene {scene} {opts:?}"
        );
        buf.check_render_invariants().unwrap();
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for scene in 0..10 {
        let (cloud, vp, opts) = common::random_splat_scene(&mut rng, scene % 2 == 1);
        let one = render_with_threads(&cloud, &vp, &opts, 1).unwrap();
        for threads in [2, 3, 8] {
            assert_eq!(
                render_with_threads(&cloud, &vp, &opts, threads).unwrap(),
                one
            );
        }
    }
}

#[test]
fn rendered_buffer_survives_nrdb() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (cloud, vp, opts) = common::random_splat_scene(&mut rng, false);
    let buf = render(&cloud, &vp, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.nrdb");
    buf.save(&path).unwrap();
    let back = DeepBuffer::load(&path).unwrap();
    assert_eq!(back, buf);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"NRDB");
    assert_eq!(
        u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64,
        vp.height()
    );
    assert_eq!(
        u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as u64,
        vp.width()
    );
    assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 5);
}

#[test]
fn square_footprint_covers_block() {
    let vp = common::unit_viewpoint(7, 7);
    let mut cloud = PointCloud::default();
    cloud.push(1, [3.5, 3.5, 1.0], [255, 255, 255]);
    let opts = SplatOptions {
        radius: 1.0,
        footprint: Footprint::Square,
    };
    let buf = render(&cloud, &vp, &opts).unwrap();
    let valid = buf.channel(VALIDITY).unwrap();
    let covered: Vec<usize> = (0..49).filter(|&i| valid[i] == 1.0).collect();
    assert_eq!(covered, vec![16, 17, 18, 23, 24, 25, 30, 31, 32]);
}

fn cloud_from(points: &[(f64, f64, f64)]) -> PointCloud {
    let mut cloud = PointCloud::default();
    for (i, &(u, v, z)) in points.iter().enumerate() {
        cloud.push(i as u64, [u * z, v * z, z], [(i % 256) as u8, 7, 9]);
    }
    cloud
}

fn point_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (
        -2.0f64..18.0,
        -2.0f64..14.0,
        prop_oneof![Just(1.0), Just(2.0), 0.5f64..8.0],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Adding points never empties a pixel and never makes a pixel farther.
    #[test]
    fn adding_points_is_monotone(
        base in prop::collection::vec(point_strategy(), 0..80),
        extra in prop::collection::vec(point_strategy(), 1..40),
        radius in prop_oneof![Just(0.0), Just(1.0), Just(2.0), 0.0f64..2.0],
    ) {
        let vp = common::unit_viewpoint(16, 12);
        let opts = SplatOptions::with_radius(radius);
        let before = render(&cloud_from(&base), &vp, &opts).unwrap();
        let all: Vec<_> = base.iter().chain(&extra).copied().collect();
        let after = render(&cloud_from(&all), &vp, &opts).unwrap();
        let (vb, va) = (before.channel(VALIDITY).unwrap(), after.channel(VALIDITY).unwrap());
        let (db, da) = (before.channel(DEPTH).unwrap(), after.channel(DEPTH).unwrap());
        for i in 0..vb.len() {
            prop_assert!(va[i] >= vb[i]);
            if vb[i] == 1.0 {
                prop_assert!(da[i] <= db[i]);
            }
        }
        prop_assert!(after.empty_fraction() <= before.empty_fraction());
    }

    /// Output does not depend on the order points are supplied in.
    #[test]
    fn permutation_invariant(
        pts in prop::collection::vec(point_strategy(), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let vp = common::unit_viewpoint(16, 12);
        let opts = SplatOptions::default();
        let cloud = cloud_from(&pts);
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut shuffled = PointCloud::default();
        for &i in &order {
            shuffled.push(cloud.ids[i], cloud.xyz[i], cloud.rgb[i]);
        }
        prop_assert_eq!(render(&cloud, &vp, &opts).unwrap(), render(&shuffled, &vp, &opts).unwrap());
    }

    /// A larger radius covers a superset of pixels.
    #[test]
    fn coverage_grows_with_radius(
        pts in prop::collection::vec(point_strategy(), 1..40),
        r in 0.0f64..2.0,
        dr in 0.0f64..1.0,
    ) {
        let vp = common::unit_viewpoint(16, 12);
        let cloud = cloud_from(&pts);
        let small = render(&cloud, &vp, &SplatOptions::with_radius(r)).unwrap();
        let large = render(&cloud, &vp, &SplatOptions::with_radius(r + dr)).unwrap();
        let (vs, vl) = (small.channel(VALIDITY).unwrap(), large.channel(VALIDITY).unwrap());
        prop_assert!(vs.iter().zip(vl).all(|(a, b)| b >= a));
    }
}

#[test]
fn far_away_points_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let vp = common::unit_viewpoint(9, 9);
    let mut cloud = PointCloud::default();
    for i in 0..500 {
        let mag = 10f64.powi(rng.random_range(-300..300));
        cloud.push(
            i,
            std::array::from_fn(|_| rng.random_range(-1.0..1.0) * mag),
            [1, 2, 3],
        );
    }
    cloud.push(999, [f64::NAN, 0.0, 1.0], [1, 1, 1]);
    cloud.push(1000, [f64::INFINITY, 0.0, 1.0], [1, 1, 1]);
    let buf = render(&cloud, &vp, &SplatOptions::with_radius(2.0)).unwrap();
    buf.check_render_invariants().unwrap();
}
