//! Subcommand implementations. Each takes its parsed arguments and reports
//! through `anyhow` so paths end up in the error chain.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use stvq_core::content::content_features;
use stvq_core::design::{design_study, PlaylistItem, StudyDesign};
use stvq_core::eval::{
    contentwise_cv, format_median_std, significance_matrix, stratified_report, CvConfig, ModelClass,
    ModelScores,
};
use stvq_core::hull::{analyze, HullSet};
use stvq_core::ladder::{generate_content, CodecDriver, ExternalCodec, SyntheticCodec};
use stvq_core::manifest::Manifest;
use stvq_core::metrics::{ingest_external_scores, write_scores, Metric};
use stvq_core::scores::{compute_dmos, compute_mos, split_half_srcc, OpinionScores, ScoreKind, ScoreMatrix};
use stvq_core::session::{Study, StudyConfig};
use stvq_core::synth::{synthetic_clip, SceneParams};
use stvq_core::video::{conform_source, read_clip, write_clip, write_sidecar, Clip};

use crate::cli::*;
use crate::server::{router, ServeOptions};

/// Sidecar path convention: `clip.yuv` is described by `clip.json`.
pub fn sidecar_for(clip: &Path) -> PathBuf {
    clip.with_extension("json")
}

fn load_clip(path: &Path, meta: Option<&Path>) -> Result<Clip> {
    let meta = meta.map_or_else(|| sidecar_for(path), Path::to_path_buf);
    read_clip(path, &meta).with_context(|| format!("reading {}", path.display()))
}

fn save_clip(clip: &Clip, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_clip(clip, path)?;
    write_sidecar(&clip.format, &sidecar_for(path))?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_scores(path: &Path, want: ScoreKind) -> Result<OpinionScores> {
    let s = OpinionScores::read_csv(open(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if s.kind != want {
        bail!("{} holds {} scores, expected {}", path.display(), s.kind.label(), want.label());
    }
    Ok(s)
}

pub fn scene(a: SceneArgs) -> Result<()> {
    let params = SceneParams {
        detail: a.detail,
        structure: a.structure,
        motion: (a.motion_x, a.motion_y),
        color: a.color,
        seed: a.seed,
    };
    let clip = synthetic_clip(a.width, a.height, a.frames, a.fps, &params)?;
    save_clip(&clip, &a.out)
}

pub fn conform(a: ConformArgs) -> Result<()> {
    let src = load_clip(&a.input, a.meta.as_deref())?;
    let out = conform_source(&src, a.width, a.height)?;
    save_clip(&out, &a.out)
}

pub fn features(a: FeaturesArgs) -> Result<()> {
    let clip = load_clip(&a.input, a.meta.as_deref())?;
    let f = content_features(&clip)?;
    println!("{}", serde_json::to_string(&f)?);
    Ok(())
}

/// Parses `22:51:3` (start, end, step) or a comma list.
pub fn parse_qps(s: &str) -> Result<Vec<u8>> {
    let parts: Vec<&str> = s.split(':').collect();
    let qps: Vec<u8> = match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step): (u8, u8, usize) = (lo.parse()?, hi.parse()?, step.parse()?);
            if step == 0 || lo > hi {
                bail!("bad QP range {s}");
            }
            let mut v: Vec<u8> = (lo..=hi).step_by(step).collect();
            if v.last() != Some(&hi) {
                v.push(hi);
            }
            v
        }
        [list] => list.split(',').map(|q| q.trim().parse()).collect::<Result<_, _>>()?,
        _ => bail!("QPs must be LO:HI:STEP or a comma list, got {s}"),
    };
    if qps.iter().any(|&q| q > stvq_core::ladder::MAX_QP) {
        bail!("QP above {} in {s}", stvq_core::ladder::MAX_QP);
    }
    Ok(qps)
}

fn driver(a: &LadderArgs) -> Result<CodecDriver> {
    if a.driver == "synthetic" {
        return Ok(CodecDriver::Synthetic(SyntheticCodec {
            seed: a.codec_seed,
            ..SyntheticCodec::default()
        }));
    }
    let Some(encode) = a.driver.strip_prefix("cmd:") else {
        bail!("driver must be `synthetic` or `cmd:<encode template>`");
    };
    let Some(decode) = &a.decode else {
        bail!("an external encoder needs --decode");
    };
    Ok(CodecDriver::External(ExternalCodec::new(encode, decode.as_str())?))
}

pub fn ladder(a: LadderArgs) -> Result<()> {
    let driver = driver(&a)?;
    let qps = parse_qps(&a.qps)?;
    let source = load_clip(&a.input, a.meta.as_deref())?;
    let media_dir = a.media_dir.clone().unwrap_or_else(|| {
        a.out.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    let generated = generate_content(&a.content, &source, &driver, &qps)?;
    fs::create_dir_all(&media_dir).with_context(|| format!("creating {}", media_dir.display()))?;
    write_json(&generated.ladder, &media_dir.join(format!("{}.ladder.json", a.content)))?;

    let mut entries = Vec::with_capacity(generated.stimuli.len());
    for (entry, clip) in generated.stimuli {
        save_clip(&clip, &media_dir.join(&entry.media_path))?;
        entries.push(entry);
    }
    let new = Manifest::new(entries)?;
    let count = new.entries.len();
    let manifest = if a.append && a.out.exists() {
        let mut m = Manifest::load(&a.out)?;
        m.merge(new);
        m
    } else {
        new
    };
    manifest.save(&a.out)?;
    eprintln!("{}: {count} stimuli written to {}", a.content, media_dir.display());
    Ok(())
}

pub fn design(a: DesignArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let d = design_study(&manifest, a.participants, a.seed)?;
    write_json(&d, &a.out)?;
    eprintln!("{} playlists over {} groups", d.playlists.len(), d.groups.len());
    Ok(())
}

pub fn init_study(a: InitStudyArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let design: StudyDesign = read_json(&a.design)?;
    let training: Vec<PlaylistItem> = match &a.training {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    Study::create(&a.dir, &manifest, &design, &training)?;
    Ok(())
}

pub async fn serve(a: ServeArgs) -> Result<()> {
    let config = StudyConfig {
        gating: !a.no_gating,
        min_session_gap_ms: (a.gap_hours * 3_600_000.0) as u64,
    };
    let study = Study::open(&a.study, config).with_context(|| format!("opening study {}", a.study.display()))?;
    let opts = ServeOptions {
        media_dir: Some(a.media.unwrap_or_else(|| a.study.join("media"))),
        ui_dir: a.ui,
    };
    let app = router(Arc::new(study), &opts);
    let addr = format!("{}:{}", a.host, a.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Serialize)]
struct ScoreSummary<'a> {
    subjects: usize,
    rejected: &'a [u32],
    videos: usize,
    degenerate_sessions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    split_half: Option<stvq_core::scores::SplitHalf>,
}

pub fn process_scores(a: ProcessScoresArgs) -> Result<()> {
    let matrix = ScoreMatrix::from_csv(open(&a.input)?).with_context(|| format!("parsing {}", a.input.display()))?;
    let processed = compute_dmos(&matrix)?;
    processed.scores.write_csv(create(&a.out)?)?;
    write_json(&processed.report, &a.report)?;
    if let Some(mos) = &a.mos {
        compute_mos(&matrix).scores.write_csv(create(mos)?)?;
    }
    let split_half = match a.split_half {
        0 => None,
        n => Some(split_half_srcc(&processed.z, &processed.report.rejected, n, a.seed)?),
    };
    let summary = ScoreSummary {
        subjects: processed.report.subjects.len(),
        rejected: &processed.report.rejected,
        videos: processed.scores.videos.len(),
        degenerate_sessions: processed.z.degenerate_sessions().count(),
        split_half,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

pub fn metrics(a: MetricsArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let metrics: Vec<Metric> = a
        .metrics
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let references = manifest.references();
    let index = manifest.index();
    let mut scores = Vec::new();
    let mut cache: BTreeMap<&str, Clip> = BTreeMap::new();
    for entry in manifest.distorted().filter(|e| a.content.as_ref().is_none_or(|c| &e.content == c)) {
        let Some(ref_id) = references.get(entry.content.as_str()) else {
            bail!("content {} has no reference in the manifest", entry.content);
        };
        if !cache.contains_key(ref_id) {
            let path = a.media_dir.join(&index[ref_id].media_path);
            cache.insert(ref_id, load_clip(&path, None)?);
        }
        let dist = load_clip(&a.media_dir.join(&entry.media_path), None)?;
        for m in &metrics {
            scores.push(m.score(&entry.stimulus_id, &cache[ref_id], &dist)?);
        }
    }
    write_scores(&scores, create(&a.out)?)?;
    eprintln!("{} scores written to {}", scores.len(), a.out.display());
    Ok(())
}

fn load_models(a: &EvaluateArgs, manifest: &Manifest) -> Result<Vec<ModelScores>> {
    let mut models: BTreeMap<String, ModelScores> = BTreeMap::new();
    for path in &a.scores {
        let ingested = ingest_external_scores(open(path)?, manifest).with_context(|| format!("parsing {}", path.display()))?;
        for w in &ingested.warnings {
            tracing::warn!("{}: {w}", path.display());
        }
        for s in ingested.scores {
            let class = if a.nr.contains(&s.metric) { ModelClass::Nr } else { ModelClass::Fr };
            models
                .entry(s.metric.clone())
                .or_insert_with(|| ModelScores {
                    name: s.metric.clone(),
                    class,
                    scores: BTreeMap::new(),
                })
                .scores
                .insert(s.stimulus_id, s.value);
        }
    }
    if models.is_empty() {
        bail!("no model scores given");
    }
    Ok(models.into_values().collect())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let models = load_models(&a, &manifest)?;
    let dmos = load_scores(&a.dmos, ScoreKind::Dmos)?;
    let mos = match &a.mos {
        Some(p) => load_scores(p, ScoreKind::Mos)?,
        None if models.iter().any(|m| m.class == ModelClass::Nr) => {
            bail!("no-reference models are judged against MOS; pass --mos")
        }
        None => OpinionScores {
            kind: ScoreKind::Mos,
            videos: Vec::new(),
        },
    };
    let report = stratified_report(&models, &manifest, &dmos, &mos);
    let significance = significance_matrix(&models, &manifest, &dmos, &mos);
    for w in &report.warnings {
        tracing::warn!("{w}");
    }

    let mut out = io::stdout().lock();
    writeln!(out, "SRCC{}", report.strata.iter().map(|s| format!("\t{s}")).collect::<String>())?;
    for row in &report.rows {
        write!(out, "{}", row.model)?;
        for cell in &row.cells {
            match cell {
                Some(c) => write!(out, "\t{:.4}{}", c.result.srcc, if c.best.srcc { "*" } else { "" })?,
                None => write!(out, "\t-")?,
            }
        }
        writeln!(out)?;
    }
    if let Some(path) = &a.out {
        write_json(&serde_json::json!({ "report": report, "significance": significance }), path)?;
    }
    Ok(())
}

/// Reads `stimulus_id, f1, f2, ...` rows.
fn read_features(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut rows = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let mut fields = rec.iter();
        let id = fields.next().context("empty feature row")?.to_string();
        let values = fields
            .map(|v| v.parse::<f64>().with_context(|| format!("feature value {v:?} for {id}")))
            .collect::<Result<Vec<_>>>()?;
        rows.insert(id, values);
    }
    Ok(rows)
}

pub fn cv(a: CvArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let feats = read_features(&a.features)?;
    let dmos = load_scores(&a.dmos, ScoreKind::Dmos)?;
    let truth = dmos.as_map();
    let (mut x, mut y, mut contents, mut configs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for e in manifest.distorted() {
        if let (Some(f), Some(t)) = (feats.get(&e.stimulus_id), truth.get(e.stimulus_id.as_str())) {
            x.push(f.clone());
            y.push(*t);
            contents.push(e.content.clone());
            configs.push(e.config());
        }
    }
    if x.is_empty() {
        bail!("no stimulus has both features and a DMOS");
    }
    let cfg = CvConfig {
        folds: a.folds,
        iterations: a.iterations,
        seed: a.seed,
        inner_folds: a.inner_folds,
        ..CvConfig::default()
    };
    let summary = contentwise_cv(&x, &y, &contents, a.strata.then_some(configs.as_slice()), &cfg)?;
    for s in &summary.strata {
        println!(
            "{}\tSRCC {}\tKRCC {}\tPLCC {}\tRMSE {}",
            s.stratum,
            format_median_std(s.median.srcc, s.std.srcc),
            format_median_std(s.median.krcc, s.std.krcc),
            format_median_std(s.median.plcc, s.std.plcc),
            format_median_std(s.median.rmse, s.std.rmse),
        );
    }
    if let Some(path) = &a.out {
        write_json(&summary, path)?;
    }
    Ok(())
}

pub fn hull(a: HullArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let dmos = load_scores(&a.dmos, ScoreKind::Dmos)?;
    let analysis = analyze(&dmos, &manifest, a.content.as_deref(), a.grid)?;
    let set = match a.configs {
        HullConfigs::Spatial => HullSet::Spatial,
        HullConfigs::Spacetime => HullSet::Spacetime,
    };
    for w in &analysis.comparison.warnings {
        tracing::warn!("{w}");
    }
    let hull = analysis.hull(set);
    for p in &hull.points {
        let config = p.config.map_or_else(|| "-".to_string(), |c| c.to_string());
        println!("{:.0}\t{:.3}\t±{:.3}\t{config}", p.bitrate, p.quality, p.ci_half_width);
    }
    write_json(
        &serde_json::json!({
            "configs": set,
            "hull": hull,
            "analysis": analysis,
            "best_config_per_level": analysis
                .best_config_per_level()
                .into_iter()
                .map(|(level, c)| (level.to_string(), c.to_string()))
                .collect::<BTreeMap<_, _>>(),
        }),
        &a.out,
    )
}
