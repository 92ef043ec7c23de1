//! Acceptance suite. Runs as a plain binary (no libtest harness) and prints
//! one PASS/FAIL line per criterion followed by its individual checks.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenecap::dataset::{label_path_for, DatasetPaths, Split, MANIFEST_FILE};
use scenecap::metrics::{l1, psnr};
use scenecap::recon::{Camera, CameraModel};
use scenecap::splat::render_with_threads;
use scenecap::style::{distance_matrix, neighbor_pools, FeatureMap, Gram};
use scenecap::{
    build_dataset, gram, parse_reconstruction, serialize_reconstruction, style_distance,
    triplet_loss, DatasetConfig, Format, GramSet, ImageRgb, Manifest, Palette, PointCloud,
    Reconstruction, SplatOptions, Viewpoint,
};

struct Check {
    what: String,
    ok: bool,
    /// Set when the check cannot be met on this machine, as opposed to a
    /// defect in the code.
    hardware_limited: bool,
}

struct Criterion {
    name: &'static str,
    checks: Vec<Check>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push(Check {
            what: what.into(),
            ok,
            hardware_limited: false,
        });
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    fn hard_failures(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| !c.ok && !c.hardware_limited)
            .count()
    }
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

fn parser_round_trip() -> Criterion {
    let mut c = Criterion::new("parser round-trip: 200 random reconstructions, byte-exact, < 30 s");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut mismatches = 0;
    let tmp = tempfile::tempdir().unwrap();
    for i in 0..200 {
        let recon = common::random_reconstruction(&mut rng);
        for format in [Format::Binary, Format::Text] {
            let a = tmp.path().join(format!("{i}-{format:?}-a"));
            let b = tmp.path().join(format!("{i}-{format:?}-b"));
            serialize_reconstruction(&recon, &a, format).unwrap();
            let parsed = parse_reconstruction(&a, format).unwrap();
            serialize_reconstruction(&parsed, &b, format).unwrap();
            let same_files = std::fs::read_dir(&a).unwrap().all(|e| {
                let name = e.unwrap().file_name();
                std::fs::read(a.join(&name)).unwrap() == std::fs::read(b.join(&name)).unwrap()
            });
            if parsed != recon || !same_files {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    c.check(
        mismatches == 0,
        format!("{mismatches} mismatches over 200 x (binary, text)"),
    );
    c.check(
        elapsed < Duration::from_secs(30),
        format!("runtime {}", secs(elapsed)),
    );
    c
}

fn splat_oracle() -> Criterion {
    let mut c =
        Criterion::new("splat oracle: 500 random scenes, pixel-exact vs naive reference, < 60 s");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let mut mismatched = Vec::new();
    let mut ties = 0usize;
    for scene in 0..500 {
        let (cloud, vp, opts) = common::random_splat_scene(&mut rng, scene % 2 == 1);
        let buf = scenecap::render(&cloud, &vp, &opts).unwrap();
        let winners = common::naive_splat(&cloud, &vp, &opts);
        ties += count_depth_ties(&cloud, &vp, &opts, &winners);
        if common::render_channels(&buf) != common::expected_channels(&cloud, &winners) {
            mismatched.push(scene);
        }
    }
    let elapsed = start.elapsed();
    c.check(
        mismatched.is_empty(),
        format!(
            "{} mismatching scenes {:?}",
            mismatched.len(),
            &mismatched[..mismatched.len().min(5)]
        ),
    );
    c.check(
        ties > 0,
        format!("{ties} pixels resolved by the id tie-break"),
    );
    c.check(
        elapsed < Duration::from_secs(60),
        format!("runtime {}", secs(elapsed)),
    );
    c
}

/// Pixels where more than one covering point shares the winning depth.
fn count_depth_ties(
    cloud: &PointCloud,
    vp: &Viewpoint,
    opts: &SplatOptions,
    winners: &[Option<common::Winner>],
) -> usize {
    let offsets = opts.offsets();
    let w = vp.width() as i64;
    let h = vp.height() as i64;
    let mut hits = vec![0u32; winners.len()];
    for p in cloud.xyz.iter().filter_map(|&p| vp.project(p)) {
        let (cx, cy) = (p.u.floor(), p.v.floor());
        if !(cx.abs() < 1e9 && cy.abs() < 1e9) {
            continue;
        }
        for &(dx, dy) in &offsets {
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if x >= 0 && y >= 0 && x < w && y < h {
                let pix = (y * w + x) as usize;
                if winners[pix].map(|win| win.0) == Some(p.depth) {
                    hits[pix] += 1;
                }
            }
        }
    }
    hits.iter().filter(|&&n| n > 1).count()
}

struct DatasetRun {
    _dir: tempfile::TempDir,
    manifest: Manifest,
    bytes: Vec<u8>,
}

fn run_dataset(recon: &Reconstruction, photo: (u32, u32), cfg: &DatasetConfig) -> DatasetRun {
    let dir = tempfile::tempdir().unwrap();
    let paths = DatasetPaths {
        photos_dir: dir.path().join("photos"),
        labels_dir: dir.path().join("labels"),
        out_dir: dir.path().join("out"),
    };
    for img in recon.images.values() {
        common::write_photo(
            &paths.photos_dir.join(&img.name),
            photo.0,
            photo.1,
            img.id as u8,
        );
        common::write_labels(
            &label_path_for(&paths.labels_dir, &img.name),
            16,
            16,
            img.id as u8,
        );
    }
    let manifest = build_dataset(recon, &paths, cfg, &Palette::ade20k()).unwrap();
    let bytes = std::fs::read(paths.out_dir.join(MANIFEST_FILE)).unwrap();
    DatasetRun {
        _dir: dir,
        manifest,
        bytes,
    }
}

fn kept_ids(m: &Manifest) -> Vec<u32> {
    m.samples.iter().map(|s| s.image_id).collect()
}

fn filtering_boundaries() -> Criterion {
    let mut c = Criterion::new("filtering boundaries and manifest determinism");
    let base = DatasetConfig {
        name: "acceptance".into(),
        min_image_dim: 10,
        radius: 0.0,
        val_count: 3,
        seed: 11,
        ..Default::default()
    };

    // 20x20: 60 covered pixels is exactly 0.85 empty, 59 is one pixel over.
    let recon = common::coverage_reconstruction(20, 20, &[60, 59]);
    let run = run_dataset(
        &recon,
        (32, 32),
        &DatasetConfig {
            min_dim: 20,
            ..base.clone()
        },
    );
    let m = &run.manifest;
    c.check(
        kept_ids(m) == vec![1] && m.samples[0].empty_fraction == 0.85,
        "20x20 with 340 empty (exactly 0.85) kept",
    );
    c.check(
        m.header.skipped.sparse_render == 1,
        "20x20 with 341 empty discarded",
    );

    // 64x64: 3481/4096 empty kept, 3482/4096 discarded.
    let recon = common::coverage_reconstruction(64, 64, &[4096 - 3481, 4096 - 3482]);
    let run = run_dataset(
        &recon,
        (64, 64),
        &DatasetConfig {
            min_dim: 64,
            ..base.clone()
        },
    );
    c.check(
        kept_ids(&run.manifest) == vec![1] && run.manifest.header.skipped.sparse_render == 1,
        "64x64: 3481 empty kept, 3482 empty discarded",
    );

    let recon = common::coverage_reconstruction(20, 20, &[400]);
    let cfg = DatasetConfig {
        min_dim: 20,
        min_image_dim: 450,
        ..base.clone()
    };
    let small = run_dataset(&recon, (449, 800), &cfg);
    c.check(
        small.manifest.header.kept == 0 && small.manifest.header.skipped.small_photo == 1,
        "449 px photo discarded",
    );
    let ok = run_dataset(&recon, (450, 800), &cfg);
    c.check(ok.manifest.header.kept == 1, "450 px photo kept");

    let recon =
        common::coverage_reconstruction(20, 20, &[400, 350, 300, 250, 200, 150, 100, 50, 390]);
    let cfg = DatasetConfig {
        min_dim: 20,
        ..base
    };
    let runs: Vec<DatasetRun> = (0..3)
        .map(|_| run_dataset(&recon, (40, 30), &cfg))
        .collect();
    let identical = runs.windows(2).all(|w| w[0].bytes == w[1].bytes);
    c.check(identical, "manifest byte-identical across 3 runs");
    let m = &runs[0].manifest;
    let val = m.samples.iter().filter(|s| s.split == Split::Val).count();
    c.check(
        val == 3 && m.header.skipped.total() + m.header.kept == m.header.registered_images,
        format!(
            "{val} val samples, counters sum to {}",
            m.header.registered_images
        ),
    );
    c
}

fn scalar_gram(v: f64) -> GramSet {
    GramSet {
        layers: vec![Gram {
            dim: 1,
            data: vec![v],
        }],
    }
}

fn random_grams(rng: &mut ChaCha8Rng, layers: usize) -> GramSet {
    GramSet {
        layers: (0..layers)
            .map(|j| {
                let c = j + 2;
                let f = FeatureMap::new(
                    c,
                    3,
                    3,
                    (0..c * 9).map(|_| rng.random_range(-1.0..1.0)).collect(),
                );
                gram(&f)
            })
            .collect(),
    }
}

fn triplet_equation() -> Criterion {
    let mut c = Criterion::new("triplet equation and mining pools");
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let j = rng.random_range(1..6);
        let alpha = rng.random_range(0.0..2.0);
        let gi = random_grams(&mut rng, j);
        let gp = random_grams(&mut rng, j);
        let loss = triplet_loss(&gi, &gp, &gp, alpha).unwrap();
        worst = worst.max((loss - j as f64 * alpha).abs());
    }
    c.check(
        worst <= 1e-9,
        format!("g_p = g_n gives J*alpha (max error {worst:.1e})"),
    );

    // ||gi-gp||^2 = 4 and ||gi-gn||^2 = 1 with alpha 0.5.
    let loss = triplet_loss(&scalar_gram(0.0), &scalar_gram(2.0), &scalar_gram(1.0), 0.5).unwrap();
    c.check(loss == 3.5, format!("single-layer hand case = {loss}"));

    let mut mismatched = 0;
    let mut instances = 0;
    for n in 2..=50usize {
        let grams: Vec<_> = (0..n).map(|_| random_grams(&mut rng, 2)).collect();
        let dist = distance_matrix(&grams).unwrap();
        // Independent recomputation of each pair.
        let mut worst_d = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = if i == j {
                    0.0
                } else {
                    style_distance(&grams[j], &grams[i]).unwrap()
                };
                worst_d = worst_d.max((d - dist[i][j]).abs());
            }
        }
        if worst_d > 1e-9 {
            mismatched += 1;
        }
        let k = rng.random_range(1..n);
        for a in 0..n {
            instances += 1;
            let mut row: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != a)
                .map(|j| (dist[a][j], j))
                .collect();
            row.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let closest: Vec<usize> = row[..k].iter().map(|e| e.1).collect();
            let furthest: Vec<usize> = row[row.len() - k..].iter().rev().map(|e| e.1).collect();
            let pools = neighbor_pools(&dist, a, k);
            if pools.closest != closest || pools.furthest != furthest {
                mismatched += 1;
            }
        }
    }
    c.check(
        mismatched == 0,
        format!("pools equal brute-force sort on {instances} anchors, N = 2..=50"),
    );
    c
}

fn metric_anchors() -> Criterion {
    let mut c = Criterion::new("metric anchors");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = ImageRgb::from_fn(32, 24, |_, _| {
        std::array::from_fn(|_| f64::from(rng.random_range(20u8..230)) / 255.0)
    });
    let shifted = |d: f64| ImageRgb {
        data: base.data.iter().map(|v| v + d).collect(),
        ..base.clone()
    };

    let p = psnr(&base, &shifted(1.0 / 255.0)).unwrap();
    c.check(
        (p - 48.1308).abs() <= 1e-3,
        format!("PSNR of uniform difference 1 = {p:.4} dB"),
    );
    let d = l1(&base, &shifted(10.0 / 255.0)).unwrap();
    c.check(
        (d - 10.0).abs() <= 1e-6,
        format!("L1 of constant 10/255 offset = {d:.9}"),
    );

    let g = gram(&FeatureMap::new(1, 2, 2, vec![1.0; 4]));
    c.check(
        (g.get(0, 0) - 1.0).abs() <= 1e-12,
        "Gram of 1x2x2 ones = [[1]]",
    );
    let g = gram(&FeatureMap::new(2, 1, 2, vec![1.0, 0.0, 0.0, 2.0]));
    let expect = [[0.25, 0.0], [0.0, 1.0]];
    let worst = (0..4)
        .map(|i| (g.get(i / 2, i % 2) - expect[i / 2][i % 2]).abs())
        .fold(0.0, f64::max);
    c.check(
        worst <= 1e-12,
        "Gram of rows (1,0),(0,2) = [[0.25,0],[0,1]]",
    );
    let sd = style_distance(&scalar_gram(1.0), &scalar_gram(3.0)).unwrap();
    c.check(
        (sd - 4.0).abs() <= 1e-12,
        format!("style distance [[1]] vs [[3]] = {sd}"),
    );
    c
}

/// 10M points spread through the view frustum of an 800x600 camera.
fn performance_scene() -> (PointCloud, Viewpoint) {
    let (w, h, f) = (800u64, 600u64, 700.0);
    let cam = Camera::new(1, CameraModel::Pinhole, w, h, vec![f, f, 400.0, 300.0]);
    let q = [0.9, 0.1, -0.3, 0.2];
    let n = q.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let rotation = q.map(|v| v / n);
    let vp = Viewpoint::new(rotation, [0.1, -0.2, 0.5], cam).unwrap();
    let inv = Viewpoint::new(
        [rotation[0], -rotation[1], -rotation[2], -rotation[3]],
        [0.0; 3],
        vp.camera.clone(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000_000);
    let count = 10_000_000;
    let mut cloud = PointCloud::with_capacity(count);
    for i in 0..count {
        // Camera-space point slightly wider than the frustum, then back to
        // world space.
        let z: f64 = rng.random_range(1.0..50.0);
        let x = (rng.random_range(-0.05..1.05) * w as f64 - 400.0) * z / f;
        let y = (rng.random_range(-0.05..1.05) * h as f64 - 300.0) * z / f;
        let pc = [x - 0.1, y + 0.2, z - 0.5];
        cloud.push(i as u64, inv.rotate(pc), rng.random());
    }
    (cloud, vp)
}

fn best_of(
    runs: usize,
    mut f: impl FnMut() -> scenecap::DeepBuffer,
) -> (Duration, scenecap::DeepBuffer) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..runs {
        let start = Instant::now();
        let buf = f();
        best = best.min(start.elapsed());
        out = Some(buf);
    }
    (best, out.unwrap())
}

fn performance() -> Criterion {
    let mut c = Criterion::new("performance: 10M points at 800x600");
    let (cloud, vp) = performance_scene();
    let opts = SplatOptions::default();

    let (t1, single) = best_of(3, || render_with_threads(&cloud, &vp, &opts, 1).unwrap());
    c.check(
        t1 <= Duration::from_secs(2),
        format!("single-thread render {}", secs(t1)),
    );

    let (t8, eight) = best_of(3, || render_with_threads(&cloud, &vp, &opts, 8).unwrap());
    let speedup = t1.as_secs_f64() / t8.as_secs_f64();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    c.checks.push(Check {
        what: format!(
            "speedup at 8 threads {speedup:.2}x ({} at 8 threads, {cores} hardware thread(s) available)",
            secs(t8)
        ),
        ok: speedup >= 4.0,
        hardware_limited: cores < 8,
    });

    let mut same = eight == single;
    for threads in [2, 3, 5] {
        same &= render_with_threads(&cloud, &vp, &opts, threads).unwrap() == single;
    }
    c.check(same, "identical buffers at 1, 2, 3, 5 and 8 threads");
    c.check(
        single.check_render_invariants().is_ok() && single.empty_fraction() < 0.05,
        format!(
            "render invariants hold, empty fraction {:.4}",
            single.empty_fraction()
        ),
    );
    c
}

fn main() {
    let suite: [fn() -> Criterion; 6] = [
        parser_round_trip,
        splat_oracle,
        filtering_boundaries,
        triplet_equation,
        metric_anchors,
        performance,
    ];
    let mut hard_failures = 0;
    let mut passed = 0;
    for run in suite {
        let criterion = run();
        let status = if criterion.passed() { "PASS" } else { "FAIL" };
        println!("{status} {}", criterion.name);
        for check in &criterion.checks {
            let mark = match (check.ok, check.hardware_limited) {
                (true, _) => "ok",
                (false, true) => "FAIL (hardware)",
                (false, false) => "FAIL",
            };
            println!("    {mark:>15}  {}", check.what);
        }
        passed += usize::from(criterion.passed());
        hard_failures += criterion.hard_failures();
    }
    println!("acceptance: {passed}/{} criteria passed", suite.len());
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
