//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use a2b_core::epipolar::{eight_point, epipolar_residual, normalize_point, pose_error};
use a2b_core::geometry::{barycentric_full, barycentric_via_three_systems, coordinate_deviation_bound, BasisTriple};
use a2b_core::matching::sinkhorn_assign;
use a2b_core::pipeline::{run_scene, summarize, EncodingMode, RunConfig};
use a2b_core::synth::{generate_3d_scene, generate_scene, intrinsics, sample_pose, SceneConfig, ScenePair};
use a2b_core::Point2;
use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xACCE_0000 + stream)
}

fn rand_point(r: &mut impl Rng, half: f64) -> Point2 {
    Point2::new(r.random_range(-half..half), r.random_range(-half..half))
}

/// Random triangle with its smallest angle bounded away from zero.
fn rand_triangle(r: &mut impl Rng) -> [Point2; 3] {
    loop {
        let t = [rand_point(r, 100.0), rand_point(r, 100.0), rand_point(r, 100.0)];
        let area = (t[1] - t[0]).cross(t[2] - t[0]).abs();
        let longest = t[0].dist(t[1]).max(t[1].dist(t[2])).max(t[2].dist(t[0]));
        if longest > 5.0 && area > 0.05 * longest * longest {
            return t;
        }
    }
}

fn rot2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn deviation(tri: &[Point2; 3], pc: Point2, f: impl Fn(Point2) -> Point2) -> f64 {
    let before = BasisTriple::new(tri[0], tri[1], tri[2]).unwrap().barycentric(pc);
    let after = BasisTriple::new(f(tri[0]), f(tri[1]), f(tri[2])).unwrap().barycentric(f(pc));
    before.max_abs_diff(after)
}

fn criterion_invariance() -> Outcome {
    const N: usize = 10_000;
    let start = Instant::now();
    let mut r = rng(1);
    let (mut rot, mut aff, mut sim) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..N {
        let tri = rand_triangle(&mut r);
        let pc = rand_point(&mut r, 150.0);

        let m = rot2(r.random_range(-PI..PI));
        let d = rand_point(&mut r, 500.0);
        rot = rot.max(deviation(&tri, pc, |p| {
            let v = m * Vector2::new(p.x, p.y);
            Point2::new(v.x, v.y) + d
        }));

        // A = R1 diag(s1, s2) R2 with condition number s1 / s2 <= 1e4
        let s1 = 10f64.powf(r.random_range(-1.0..1.0));
        let cond = 10f64.powf(r.random_range(0.0..4.0));
        let flip = if r.random_bool(0.5) { -1.0 } else { 1.0 };
        let a = rot2(r.random_range(-PI..PI))
            * Matrix2::new(s1, 0.0, 0.0, flip * s1 / cond)
            * rot2(r.random_range(-PI..PI));
        let d = rand_point(&mut r, 500.0);
        aff = aff.max(deviation(&tri, pc, |p| {
            let v = a * Vector2::new(p.x, p.y);
            Point2::new(v.x, v.y) + d
        }));

        let s = 10f64.powf(r.random_range(-2.0..2.0));
        let d = rand_point(&mut r, 500.0);
        sim = sim.max(deviation(&tri, pc, |p| p * s + d));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rot <= 1e-9 && aff <= 1e-7 && sim <= 1e-9 && secs < 5.0,
        format!("max deviation rotation {rot:.1e} (<=1e-9), affine {aff:.1e} (<=1e-7), translation/scale {sim:.1e} (<=1e-9); {N} triples each in {secs:.2}s (<5s)"),
    )
}

fn criterion_barycentric_oracle() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = rand_triangle(&mut r);
        let basis = BasisTriple::new(t[0], t[1], t[2]).unwrap();
        for _ in 0..1000 {
            let (u, v): (f64, f64) = (r.random(), r.random());
            let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
            let pc = t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v;
            let full = barycentric_full(&basis, pc);
            let three = barycentric_via_three_systems(t[0], t[1], t[2], pc).unwrap();
            worst = worst.max(full.max_abs_diff(three));
        }
    }
    outcome(worst <= 1e-9, format!("100 triangles x 1000 interior points, max difference {worst:.1e} (<=1e-9)"))
}

fn criterion_sinkhorn() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = DMatrix::from_fn(64, 48, |_, _| r.random_range(-10.0..10.0));
        worst = worst.max(sinkhorn_assign(&s, 0.0, 50).interior_marginal_error());
    }
    outcome(
        worst <= 1e-6,
        format!("100 random 64x48 matrices, 50 rounds, max interior marginal error {worst:.1e} (<=1e-6)"),
    )
}

fn criterion_eight_point() -> Outcome {
    let mut r = rng(4);
    let k = intrinsics(500.0, 640.0, 480.0);
    let (mut res, mut pose) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for s in 0..100u64 {
        let (rot, t) = sample_pose(&mut r, 30f64.to_radians());
        let scene = generate_3d_scene(&rot, &t, &k, 60, s).unwrap();
        let corrs: Vec<(Point2, Point2)> =
            scene.gt_matches.iter().map(|&(i, j)| (scene.kps_a[i], scene.kps_b[j])).collect();
        let Ok(e) = eight_point(&corrs, &k, &k) else {
            failures += 1;
            continue;
        };
        let k_inv = k.try_inverse().unwrap();
        let norm: Vec<(Point2, Point2)> =
            corrs.iter().map(|&(a, b)| (normalize_point(&k_inv, a), normalize_point(&k_inv, b))).collect();
        for &(a, b) in &norm {
            res = res.max(epipolar_residual(e.matrix(), a, b));
        }
        match pose_error(&e, &rot, &t, &norm) {
            Ok(p) => pose = pose.max(p.max()),
            Err(_) => failures += 1,
        }
    }
    outcome(
        failures == 0 && res <= 1e-10 && pose <= 1e-5,
        format!("100 scenes x 60 points: max residual {res:.1e} (<=1e-10), max pose error {pose:.1e} deg (<=1e-5), {failures} failures"),
    )
}

fn criterion_confidence_weight() -> Outcome {
    let mut r = rng(6);
    let mut violations = 0;
    for _ in 0..10_000 {
        let t = rand_triangle(&mut r);
        let basis = BasisTriple::new(t[0], t[1], t[2]).unwrap();
        let dir = r.random_range(-PI..PI);
        let u = Point2::new(dir.cos(), dir.sin());
        let d1 = r.random_range(0.0..200.0);
        let d2 = d1 + r.random_range(1e-3..200.0);
        let (w1, w2) = (basis.confidence_weight(t[0] + u * d1, 2.0), basis.confidence_weight(t[0] + u * d2, 2.0));
        if w2 >= w1 {
            violations += 1;
        }
    }
    let bound = coordinate_deviation_bound(150.0, 4f64.to_radians());
    outcome(
        violations == 0 && (10.0..=11.0).contains(&bound),
        format!("{violations} monotonicity violations in 10000 samples; deviation bound at l=150, 4 deg = {bound:.3} (in [10, 11])"),
    )
}

fn benchmark_scenes() -> Vec<ScenePair> {
    let cfg = SceneConfig::default();
    assert_eq!((cfg.repeats_per_pattern, cfg.repeat_sim, cfg.noise_px), (4, 0.99, 0.5));
    (0..200).into_par_iter().map(|s| generate_scene(&cfg, s).unwrap()).collect()
}

/// Mean projective precision and recall, in percentage points.
fn bench(scenes: &[ScenePair], cfg: &RunConfig, mode: EncodingMode) -> (f64, f64) {
    let reports: Vec<_> = scenes.par_iter().map(|s| run_scene(s, cfg, mode, None).unwrap().report).collect();
    let s = summarize(mode, &reports);
    (100.0 * s.precision_proj, 100.0 * s.recall)
}

fn criterion_repeated_patterns(scenes: &[ScenePair]) -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::benchmark();
    let (p_nn, r_nn) = bench(scenes, &cfg, EncodingMode::Nn);
    let (p_a2b, r_a2b) = bench(scenes, &cfg, EncodingMode::A2b);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        p_a2b - p_nn >= 15.0 && r_nn - r_a2b <= 5.0,
        format!("precision a2b {p_a2b:.1} vs NN {p_nn:.1} (gain {:.1} >= 15); recall a2b {r_a2b:.1} vs NN {r_nn:.1} (drop {:.1} <= 5); {secs:.1}s", p_a2b - p_nn, r_nn - r_a2b),
    )
}

fn criterion_biased_anchors(scenes: &[ScenePair]) -> Outcome {
    let base = RunConfig::benchmark();
    let at = |px: f64| bench(scenes, &RunConfig { anchor_offset_px: px, ..base.clone() }, EncodingMode::A2b).0;
    let (p0, p6, p20) = (at(0.0), at(6.0), at(20.0));
    outcome(
        (p6 - p0).abs() <= 3.0 && p0 - p20 >= 10.0,
        format!(
            "precision {p0:.1} clean, {p6:.1} at 6px (change {:.1}, <=3), {p20:.1} at 20px (drop {:.1}, >=10)",
            p6 - p0,
            p0 - p20
        ),
    )
}

fn criterion_k_sweep(scenes: &[ScenePair]) -> Outcome {
    let base = RunConfig::benchmark();
    let at = |k: usize| bench(scenes, &RunConfig { k, ..base.clone() }, EncodingMode::A2b).0;
    let (p3, p5, p6) = (at(3), at(5), at(6));
    outcome(
        (p5 - p6).abs() <= 2.0 && p5 > p3 && p6 > p3,
        format!("precision K=3 {p3:.1}, K=5 {p5:.1}, K=6 {p6:.1} (|K5-K6| {:.1} <= 2, both > K=3)", (p5 - p6).abs()),
    )
}

fn criterion_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_a2b");
    let dir = std::env::temp_dir().join(format!("a2b-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let scenes = dir.join("scenes.jsonl");
    let ok = Command::new(exe)
        .args(["gen", "--seed", "7", "--count", "20", "--out"])
        .arg(&scenes)
        .status()
        .unwrap()
        .success();
    let run = |name: &str, threads: &str| {
        let out = dir.join(name);
        let status = Command::new(exe)
            .args([
                "--threads",
                threads,
                "run",
                "--seed",
                "11",
                "--preset",
                "benchmark",
                "--anchor-offset-px",
                "6",
                "--scenes",
            ])
            .arg(&scenes)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (a, b, c) = (run("a.jsonl", "1"), run("b.jsonl", "1"), run("c.jsonl", "4"));
    std::fs::remove_dir_all(&dir).ok();
    outcome(
        ok && !a.is_empty() && a == b && a == c,
        format!("two runs with seed 11 identical: {} ({} bytes); 4-thread run identical: {}", a == b, a.len(), a == c),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "invariance", criterion_invariance()),
        (2, "barycentric oracle", criterion_barycentric_oracle()),
        (3, "sinkhorn marginals", criterion_sinkhorn()),
        (4, "eight-point round trip", criterion_eight_point()),
    ];
    let scenes = benchmark_scenes();
    results.push((5, "repeated-pattern benchmark", criterion_repeated_patterns(&scenes)));
    results.push((6, "confidence weight", criterion_confidence_weight()));
    results.push((7, "biased anchors", criterion_biased_anchors(&scenes)));
    results.push((8, "K sweep", criterion_k_sweep(&scenes)));
    results.push((9, "determinism", criterion_determinism()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("[{}] criterion {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
