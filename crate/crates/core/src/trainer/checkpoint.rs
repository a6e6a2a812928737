use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::{FitConfig, FitState};
use crate::diffgraph::{GradientMap, ParameterStore};
use crate::error::{Error, Result};
use crate::homeo::{ConditionalHomeomorphism, HomeoConfig, NeuralParts};
use crate::losses::LossBreakdown;

pub const CHECKPOINT_FORMAT: &str = "neural-parts/checkpoint-v1";
pub const MANIFEST: &str = "manifest.json";
const PARAMS: &str = "params";
const MOMENT1: &str = "adam_m";
const MOMENT2: &str = "adam_v";

/// Position of the ChaCha stream, enough to resume it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    /// Seed as 64 hex digits.
    pub seed: String,
    pub stream: u64,
    /// Word position as a decimal string; it is a 68-bit counter.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = || Error::Incompatible("checkpoint rng state is malformed".into());
        if self.seed.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub step: u64,
    pub primitives: usize,
    pub homeo: HomeoConfig,
    pub schedule: Vec<usize>,
    pub radius: f64,
    pub adam_t: u64,
    pub rng: RngState,
    pub loss: LossBreakdown,
    pub config: FitConfig,
}

impl Manifest {
    /// Errors unless a run under `config` may continue from this checkpoint.
    pub fn check_compatible(&self, config: &FitConfig) -> Result<()> {
        if self.primitives != config.primitives {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} primitives, config asks for {}",
                self.primitives, config.primitives
            )));
        }
        if self.homeo != config.homeo {
            return Err(Error::Incompatible(
                "checkpoint network architecture differs from the config".into(),
            ));
        }
        Ok(())
    }
}

/// Writes `state` into `dir` (created if missing).
pub fn save_checkpoint(dir: &Path, state: &FitState, config: &FitConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let model = &state.model;
    state.model.params.save(dir, PARAMS)?;
    state.adam.m.to_store().save(dir, MOMENT1)?;
    state.adam.v.to_store().save(dir, MOMENT2)?;
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        step: state.step,
        primitives: model.primitives(),
        homeo: model.homeo.config.clone(),
        schedule: model.homeo.schedule(),
        radius: model.radius(),
        adam_t: state.adam.t,
        rng: RngState::capture(&state.rng),
        loss: state.loss,
        config: config.clone(),
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::Incompatible(format!(
            "{}: unknown checkpoint format `{}`",
            path.display(),
            manifest.format
        )));
    }
    Ok(manifest)
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> Result<(Manifest, FitState)> {
    let manifest = load_manifest(dir)?;
    let mut homeo_cfg = manifest.homeo.clone();
    homeo_cfg.radius = manifest.radius;
    let homeo = ConditionalHomeomorphism::new(homeo_cfg, &manifest.schedule)?;
    let params = ParameterStore::load(dir, PARAMS)?;
    let model = NeuralParts::new(homeo, params)?;
    if model.primitives() != manifest.primitives {
        return Err(Error::Incompatible(format!(
            "manifest lists {} primitives, parameters hold {}",
            manifest.primitives,
            model.primitives()
        )));
    }
    let m = ParameterStore::load(dir, MOMENT1)?;
    let v = ParameterStore::load(dir, MOMENT2)?;
    if !m.same_layout(&model.params) || !v.same_layout(&model.params) {
        return Err(Error::Incompatible("optimizer moments do not match the parameters".into()));
    }
    let state = FitState {
        model,
        adam: AdamState {
            m: GradientMap::from_store(&m),
            v: GradientMap::from_store(&v),
            t: manifest.adam_t,
        },
        step: manifest.step,
        rng: manifest.rng.restore()?,
        loss: manifest.loss,
    };
    Ok((manifest, state))
}
