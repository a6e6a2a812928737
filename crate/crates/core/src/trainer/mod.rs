//! Auto-decoder fitting of the network and the shape embeddings to one
//! target mesh.

mod adam;
mod checkpoint;
mod objective;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, load_manifest, save_checkpoint, Manifest, RngState, CHECKPOINT_FORMAT, MANIFEST};
pub use objective::{Batch, BatchSizes, Objective};

use crate::diffgraph::GradientMap;
use crate::error::{Error, Result};
use crate::geometry::{OccupancyPool, TriMesh};
use crate::homeo::{HomeoConfig, NeuralParts};
use crate::losses::{LossBreakdown, LossHyper, LossWeights};
use crate::par::Exec;

pub const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub primitives: usize,
    pub iterations: u64,
    pub learning_rate: f64,
    /// Target surface samples per step.
    pub surface_samples: usize,
    /// Leading surface samples that also enter the normal loss; `None` uses all.
    pub normal_samples: Option<usize>,
    /// Occupancy pairs per step.
    pub occupancy_samples: usize,
    /// Latent sphere samples per primitive and step.
    pub sphere_samples: usize,
    /// Micro-batches whose gradients are averaged into one update.
    pub accumulation: usize,
    pub seed: u64,
    /// Save a checkpoint every this many steps; 0 saves only at the end.
    pub checkpoint_every: u64,
    /// Central-difference step for the union-field gradient.
    pub fd_step: f64,
    pub homeo: HomeoConfig,
    pub weights: LossWeights,
    pub hyper: LossHyper,
    pub adam: AdamConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            primitives: 5,
            iterations: 1000,
            learning_rate: 1e-4,
            surface_samples: 2000,
            normal_samples: None,
            occupancy_samples: 5000,
            sphere_samples: 200,
            accumulation: 1,
            seed: 0,
            checkpoint_every: 0,
            fd_step: 1e-4,
            homeo: HomeoConfig::default(),
            weights: LossWeights::default(),
            hyper: LossHyper::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl FitConfig {
    /// Smaller network and batches for single-core runs of a few minutes.
    pub fn desk() -> Self {
        FitConfig {
            iterations: 1500,
            learning_rate: 1e-3,
            surface_samples: 600,
            normal_samples: Some(100),
            occupancy_samples: 1000,
            sphere_samples: 200,
            homeo: HomeoConfig::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("primitives", self.primitives),
            ("surface_samples", self.surface_samples),
            ("occupancy_samples", self.occupancy_samples),
            ("sphere_samples", self.sphere_samples),
            ("accumulation", self.accumulation),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::usage(format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::usage("fd_step must be positive"));
        }
        if self.occupancy_samples / 2 < self.hyper.k_cover {
            return Err(Error::usage(format!(
                "occupancy batch of {} has fewer than k_cover = {} interior points",
                self.occupancy_samples, self.hyper.k_cover
            )));
        }
        self.homeo.validate()?;
        self.weights.validate()?;
        self.hyper.validate(self.primitives)
    }

    pub fn batch_sizes(&self) -> BatchSizes {
        BatchSizes {
            surface: self.surface_samples,
            normals: self.normal_samples.unwrap_or(self.surface_samples),
            occupancy: self.occupancy_samples,
            sphere: self.sphere_samples,
        }
    }

    pub fn objective(&self) -> Objective {
        Objective {
            weights: self.weights,
            hyper: self.hyper,
            fd_step: self.fd_step,
        }
    }
}

/// Everything that evolves during a fit.
#[derive(Debug, Clone)]
pub struct FitState {
    pub model: NeuralParts,
    pub adam: AdamState,
    pub step: u64,
    pub rng: ChaCha8Rng,
    /// Loss breakdown of the latest step.
    pub loss: LossBreakdown,
}

impl FitState {
    /// Schedule and parameters drawn from a ChaCha stream seeded with
    /// `config.seed`; the same stream then drives sampling.
    pub fn init(config: &FitConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = NeuralParts::init(config.homeo.clone(), config.primitives, &mut rng)?;
        let adam = AdamState::new(&model.params);
        Ok(FitState {
            model,
            adam,
            step: 0,
            rng,
            loss: LossBreakdown::default(),
        })
    }
}

impl PartialEq for FitState {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model
            && self.adam == other.adam
            && self.step == other.step
            && self.rng == other.rng
            && self.loss == other.loss
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

/// Drives the optimization of a [`FitState`] against one mesh.
pub struct Trainer<'a> {
    pub config: FitConfig,
    pub mesh: &'a TriMesh,
    pub pool: &'a OccupancyPool,
    pub state: FitState,
    pub exec: Exec,
}

impl<'a> Trainer<'a> {
    pub fn new(config: FitConfig, mesh: &'a TriMesh, pool: &'a OccupancyPool) -> Result<Self> {
        let state = FitState::init(&config)?;
        Ok(Self::resume(config, mesh, pool, state))
    }

    pub fn resume(config: FitConfig, mesh: &'a TriMesh, pool: &'a OccupancyPool, state: FitState) -> Self {
        Trainer {
            config,
            mesh,
            pool,
            state,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self.state.model.exec = exec;
        self
    }

    /// Averaged gradient and loss over the configured micro-batches, drawing
    /// fresh samples. The rng advances even if evaluation fails.
    pub fn gradients(&mut self) -> Result<(GradientMap, LossBreakdown)> {
        let model = &self.state.model;
        let sizes = self.config.batch_sizes();
        let objective = self.config.objective();
        let mut total: Option<(GradientMap, LossBreakdown)> = None;
        for i in 0..self.config.accumulation {
            let batch = Batch::draw(self.mesh, self.pool, sizes, model.primitives(), model.radius(), &mut self.state.rng)?;
            let (g, l) = objective.gradients(model, &batch)?;
            total = Some(match total {
                None => (g, l),
                Some((mut acc, mut loss)) => {
                    acc.accumulate(&g);
                    loss.accumulate(&l, i);
                    (acc, loss)
                }
            });
        }
        let (mut g, l) = total.expect("accumulation >= 1");
        g.scale(1.0 / self.config.accumulation as f64);
        Ok((g, l))
    }

    /// One optimizer step. On error the parameters are left untouched.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let (grads, loss) = self.gradients()?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { op: "loss_total".into() });
        }
        let st = &mut self.state;
        adam_step(&mut st.model.params, &mut st.adam, &grads, self.config.learning_rate, &self.config.adam)?;
        st.step += 1;
        st.loss = loss;
        Ok(loss)
    }

    /// Runs until `config.iterations` steps have been taken. With `out`,
    /// appends to the log, writes periodic checkpoints and a final one; on a
    /// numeric failure the last good state is saved before returning the error.
    pub fn run(&mut self, out: Option<&Path>) -> Result<()> {
        let mut log = match out {
            Some(dir) => Some(open_log(dir)?),
            None => None,
        };
        while self.state.step < self.config.iterations {
            let before = self.state.clone();
            match self.step() {
                Ok(loss) => {
                    if let Some(w) = log.as_mut() {
                        let rec = LogRecord { step: self.state.step, loss };
                        let line = serde_json::to_string(&rec).expect("log record serializes");
                        writeln!(w, "{line}").map_err(|e| Error::io(out.expect("log implies out").join(LOG_FILE), e))?;
                    }
                    let every = self.config.checkpoint_every;
                    if let Some(dir) = out {
                        if every > 0 && self.state.step.is_multiple_of(every) && self.state.step < self.config.iterations {
                            flush(&mut log, dir)?;
                            save_checkpoint(&checkpoint_dir(dir), &self.state, &self.config)?;
                        }
                    }
                }
                Err(e) => {
                    self.state = before;
                    if let Some(dir) = out {
                        flush(&mut log, dir)?;
                        save_checkpoint(&checkpoint_dir(dir), &self.state, &self.config)?;
                    }
                    return Err(e);
                }
            }
        }
        if let Some(dir) = out {
            flush(&mut log, dir)?;
            save_checkpoint(&checkpoint_dir(dir), &self.state, &self.config)?;
        }
        Ok(())
    }
}

/// Checkpoint location inside a run directory.
pub fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join("checkpoint")
}

fn open_log(dir: &Path) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(LOG_FILE);
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    Ok(BufWriter::new(f))
}

fn flush(log: &mut Option<BufWriter<File>>, dir: &Path) -> Result<()> {
    if let Some(w) = log.as_mut() {
        w.flush().map_err(|e| Error::io(dir.join(LOG_FILE), e))?;
    }
    Ok(())
}

/// Reads a training log.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

/// Fits a fresh model to `mesh`. See [`Trainer::run`] for `out`.
pub fn fit(mesh: &TriMesh, pool: &OccupancyPool, config: &FitConfig, out: Option<&Path>) -> Result<FitState> {
    let mut t = Trainer::new(config.clone(), mesh, pool)?;
    t.run(out)?;
    Ok(t.state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        assert!(FitConfig::desk().validate().is_ok());
        let bad = FitConfig { learning_rate: 0.0, ..FitConfig::desk() };
        assert!(bad.validate().is_err());
        let bad = FitConfig { sphere_samples: 0, ..FitConfig::desk() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rng_state_round_trip() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(3);
        let _: [u64; 5] = rng.random();
        let saved = RngState::capture(&rng);
        let mut back = saved.restore().unwrap();
        assert_eq!(rng.random::<u64>(), back.random::<u64>());
    }
}
