use super::{build_stimulus, plan_ladder, probe_rd, CodecDriver, LadderSpec, SpaceTimeConfig, StimulusSpec};
use crate::error::Result;
use crate::manifest::{stimulus_id, ManifestEntry};
use crate::video::Clip;

/// One content's generated stimuli, reference first.
#[derive(Debug, Clone)]
pub struct GeneratedContent {
    pub ladder: LadderSpec,
    pub stimuli: Vec<(ManifestEntry, Clip)>,
}

fn entry(spec: &StimulusSpec, built: &super::BuiltStimulus) -> ManifestEntry {
    let id = stimulus_id(&spec.content, spec.config, spec.qp, spec.target_level, spec.is_reference);
    ManifestEntry {
        media_path: format!("{id}.yuv"),
        stimulus_id: id,
        content: spec.content.clone(),
        spatial: spec.config.spatial,
        temporal: spec.config.temporal,
        qp: spec.qp,
        target_level: spec.target_level,
        achieved_bitrate: built.achieved_bitrate,
        is_reference: spec.is_reference,
        stages: Some(built.stages.clone()),
    }
}

/// Probes every space-time configuration at `qps`, plans the ladder and
/// builds the reference plus every planned stimulus of one source.
pub fn generate_content(content: &str, source: &Clip, driver: &CodecDriver, qps: &[u8]) -> Result<GeneratedContent> {
    let mut samples = Vec::new();
    for config in SpaceTimeConfig::all() {
        samples.extend(probe_rd(source, config, qps, driver)?);
    }
    let ladder = plan_ladder(content, &samples)?;

    let mut specs = vec![StimulusSpec::reference(content)];
    specs.extend(ladder.choices.iter().map(|c| StimulusSpec {
        content: content.to_string(),
        config: c.config,
        qp: Some(c.qp),
        target_level: Some(c.level),
        is_reference: false,
    }));
    let stimuli = specs
        .iter()
        .map(|spec| {
            let built = build_stimulus(source, spec, driver)?;
            Ok((entry(spec, &built), built.clip))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedContent { ladder, stimuli })
}
