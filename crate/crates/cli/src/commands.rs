use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use a2b_core::eval::MatchReport;
use a2b_core::io::{read_anchor_overrides, read_scenes, write_jsonl};
use a2b_core::pipeline::{run_scene, summarize, Anchor, EncodingMode, RunConfig, SceneResult, Summary};
use a2b_core::synth::{
    generate_3d_scene, generate_affine_scene, generate_scene, intrinsics, sample_pose, SceneConfig, ScenePair,
};
use a2b_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{CompareArgs, GenArgs, RunArgs, SceneKind, SweepArgs};

fn open_in(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

fn open_out(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

/// Runs `f` on every item in parallel and returns results in input order;
/// the first failure in that order wins.
fn par_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    items.par_iter().map(&f).collect::<Vec<_>>().into_iter().collect()
}

pub fn generate(
    kind: SceneKind,
    cfg: &SceneConfig,
    seed: u64,
    points: usize,
    max_rotation_deg: f64,
) -> Result<ScenePair> {
    match kind {
        SceneKind::Homography => generate_scene(cfg, seed),
        SceneKind::Affine => generate_affine_scene(cfg, seed),
        SceneKind::Pose => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (r, t) = sample_pose(&mut rng, max_rotation_deg.to_radians());
            let k = intrinsics(cfg.image_width, cfg.image_width, cfg.image_height);
            generate_3d_scene(&r, &t, &k, points, seed)
        }
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<usize> {
    let cfg = args.scene_config()?;
    if !(args.max_rotation_deg >= 0.0 && args.max_rotation_deg <= 180.0) {
        return Err(Error::ConfigInvalid("max-rotation-deg must be in [0, 180]".into()));
    }
    let seeds: Vec<u64> = (0..args.count as u64).map(|i| args.seed.wrapping_add(i)).collect();
    let scenes = par_ordered(&seeds, |&s| generate(args.kind, &cfg, s, args.points, args.max_rotation_deg))?;
    write_jsonl(open_out(&args.out)?, &scenes)?;
    Ok(scenes.len())
}

/// One line of a run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub seed: u64,
    pub mode: EncodingMode,
    #[serde(flatten)]
    pub report: MatchReport,
    pub n_systems: usize,
    pub anchors: Vec<Anchor>,
    /// `[i, j, confidence]` in original keypoint indices.
    pub matches: Vec<(usize, usize, f64)>,
    pub config: RunConfig,
}

impl SceneReport {
    fn new(res: SceneResult, cfg: &RunConfig) -> Self {
        Self {
            seed: res.seed,
            mode: res.mode,
            report: res.report,
            n_systems: res.n_systems,
            anchors: res.anchors,
            matches: res.matches.iter().map(|m| (m.i, m.j, m.confidence)).collect(),
            config: cfg.clone(),
        }
    }
}

fn load_scenes(path: &Path) -> Result<Vec<ScenePair>> {
    read_scenes(open_in(path)?)
}

fn run_all(
    scenes: &[ScenePair],
    cfg: &RunConfig,
    mode: EncodingMode,
    overrides: Option<&BTreeMap<u64, Vec<Anchor>>>,
) -> Result<Vec<SceneResult>> {
    par_ordered(scenes, |s| {
        let anchors = overrides.and_then(|m| m.get(&s.seed)).map(Vec::as_slice);
        run_scene(s, cfg, mode, anchors)
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<Summary> {
    let cfg = args.config.run_config()?;
    let scenes = load_scenes(&args.scenes)?;
    let overrides = match &args.anchors {
        Some(p) => Some(read_anchor_overrides(open_in(p)?)?),
        None => None,
    };
    let results = run_all(&scenes, &cfg, cfg.encoding_mode, overrides.as_ref())?;
    let summary = summarize(cfg.encoding_mode, &results.iter().map(|r| r.report.clone()).collect::<Vec<_>>());
    let lines: Vec<SceneReport> = results.into_iter().map(|r| SceneReport::new(r, &cfg)).collect();
    write_jsonl(open_out(&args.out)?, &lines)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparedScene {
    pub seed: u64,
    pub reports: BTreeMap<String, MatchReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config: RunConfig,
    pub summaries: Vec<Summary>,
    pub scenes: Vec<ComparedScene>,
}

pub fn compare(scenes: &[ScenePair], cfg: &RunConfig) -> Result<CompareReport> {
    let mut per_mode = Vec::new();
    for mode in EncodingMode::ALL {
        per_mode.push((mode, run_all(scenes, cfg, mode, None)?));
    }
    let summaries = per_mode
        .iter()
        .map(|(m, rs)| summarize(*m, &rs.iter().map(|r| r.report.clone()).collect::<Vec<_>>()))
        .collect();
    let scenes = (0..scenes.len())
        .map(|k| ComparedScene {
            seed: scenes[k].seed,
            reports: per_mode.iter().map(|(m, rs)| (m.name().to_string(), rs[k].report.clone())).collect(),
        })
        .collect();
    Ok(CompareReport { config: cfg.clone(), summaries, scenes })
}

pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport> {
    let cfg = args.config.run_config()?;
    let scenes = load_scenes(&args.scenes)?;
    let report = compare(&scenes, &cfg)?;
    let mut out = open_out(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(report)
}

/// Copy of `cfg` with one field replaced, addressed by its name in snake or
/// kebab case. The value is parsed as JSON, so `5`, `0.25` and `true` work.
pub fn with_param(cfg: &RunConfig, name: &str, value: &str) -> Result<RunConfig> {
    let key = name.replace('-', "_");
    if key == "seed" {
        return Err(Error::ConfigInvalid("seed cannot be swept".into()));
    }
    let mut v = serde_json::to_value(cfg)?;
    let obj = v.as_object_mut().expect("config serializes to an object");
    if !obj.contains_key(&key) {
        return Err(Error::ConfigInvalid(format!("unknown parameter '{name}'")));
    }
    let parsed: serde_json::Value =
        serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    obj.insert(key, parsed);
    let out: RunConfig = serde_json::from_value(v).map_err(|e| Error::ConfigInvalid(format!("{name}={value}: {e}")))?;
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub mode: String,
    pub n_scenes: usize,
    pub precision_proj: f64,
    pub precision_epi: Option<f64>,
    pub recall: f64,
    pub f_measure: f64,
    pub mean_matches: f64,
    pub corner_acc: Option<f64>,
}

pub fn sweep(
    scenes: &[ScenePair],
    base: &RunConfig,
    param: &str,
    values: &[String],
    modes: &[EncodingMode],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for value in values {
        let cfg = with_param(base, param, value)?;
        for &mode in modes {
            let rs = run_all(scenes, &cfg, mode, None)?;
            let s = summarize(mode, &rs.iter().map(|r| r.report.clone()).collect::<Vec<_>>());
            rows.push(SweepRow {
                param: param.to_string(),
                value: value.clone(),
                mode: mode.name().to_string(),
                n_scenes: s.n_scenes,
                precision_proj: s.precision_proj,
                precision_epi: s.precision_epi,
                recall: s.recall,
                f_measure: s.f_measure,
                mean_matches: s.mean_matches,
                corner_acc: s.corner_acc,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let cfg = args.config.run_config()?;
    let scenes = load_scenes(&args.scenes)?;
    let rows = sweep(&scenes, &cfg, &args.param, &args.values, &args.modes)?;
    let mut w = csv::Writer::from_writer(open_out(&args.out)?);
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Io(io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(rows)
}
