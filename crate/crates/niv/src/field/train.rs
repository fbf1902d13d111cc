//! The training loop: shuffled-epoch minibatches, Adam with warm +
//! exponentially decaying learning rate, loss trace every 100 iterations.

use rand::seq::SliceRandom;

use super::backprop::{batch_gradients, BatchWorkspace, Gradients};
use super::optim::{adam_step, lr_schedule, AdamState};
use super::{FieldError, LossNormalization, NeuralFieldModel};
use crate::dataset::SampleSet;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: u32,
    pub lr_initial: f32,
    pub lr_final: f32,
    pub warm_iterations: u32,
    pub adam_betas: (f32, f32),
    pub adam_eps: f32,
    pub seed: u64,
    pub loss_norm: LossNormalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 1 << 16,
            iterations: 50_000,
            lr_initial: 1e-2,
            lr_final: 1e-4,
            warm_iterations: 10_000,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
            loss_norm: LossNormalization::PerChannel,
        }
    }
}

impl TrainConfig {
    /// A proportionally scaled-down schedule for quick runs: the warm phase
    /// keeps its 1:5 share of the iteration budget.
    pub fn quick(iterations: u32, batch_size: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size,
            iterations,
            warm_iterations: iterations / 5,
            seed,
            ..TrainConfig::default()
        }
    }

    fn validate(&self) -> Result<(), FieldError> {
        if self.warm_iterations >= self.iterations {
            return Err(FieldError::TrainConfig(
                "warm_iterations must be < iterations".into(),
            ));
        }
        if self.lr_final >= self.lr_initial {
            return Err(FieldError::TrainConfig(
                "lr_final must be < lr_initial".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(FieldError::TrainConfig("batch_size must be > 0".into()));
        }
        Ok(())
    }
}

/// One loss-trace row, recorded every 100 iterations.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: u32,
    /// Mean training loss over the preceding 100 iterations.
    pub loss: f64,
    pub lr: f32,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub trace: Vec<TraceRow>,
    pub final_loss: f64,
}

impl TrainReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,loss,lr\n");
        for row in &self.trace {
            out.push_str(&format!("{},{},{}\n", row.iteration, row.loss, row.lr));
        }
        out
    }
}

/// Minibatch indices drawn by reshuffling the dataset each epoch; batches
/// may span epoch boundaries so every batch has full size.
struct EpochSampler {
    order: Vec<u32>,
    cursor: usize,
    epoch: u64,
    seed: u64,
}

impl EpochSampler {
    fn new(len: usize, seed: u64) -> EpochSampler {
        let mut s = EpochSampler {
            order: (0..len as u32).collect(),
            cursor: 0,
            epoch: 0,
            seed,
        };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        let mut rng = stream_rng(self.seed, Stream::TrainShuffle, self.epoch);
        self.order.shuffle(&mut rng);
        self.epoch += 1;
        self.cursor = 0;
    }

    fn fill(&mut self, batch: &mut Vec<u32>, n: usize) {
        batch.clear();
        while batch.len() < n {
            if self.cursor == self.order.len() {
                self.shuffle();
            }
            let take = (n - batch.len()).min(self.order.len() - self.cursor);
            batch.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
    }
}

/// Trains `model` in place. On a non-finite loss the model keeps the last
/// finite parameters and the error reports the offending iteration, so the
/// caller can persist a checkpoint.
pub fn train(
    model: &mut NeuralFieldModel,
    set: &SampleSet,
    cfg: &TrainConfig,
    mut progress: Option<&mut dyn FnMut(u32, f64)>,
) -> Result<TrainReport, FieldError> {
    cfg.validate()?;
    if set.n_extra_params != model.config.param_count {
        return Err(FieldError::ParamArity {
            expected: model.config.param_count,
            got: set.n_extra_params,
        });
    }
    if set.samples.is_empty() {
        return Err(FieldError::TrainConfig("empty dataset".into()));
    }

    let mut sampler = EpochSampler::new(set.samples.len(), cfg.seed);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut workspace = BatchWorkspace::new(model, cfg.batch_size);
    let mut grads = Gradients::new(model);
    let mut adam = AdamState::new(model.params.len());

    let mut trace = Vec::new();
    let mut window_sum = 0.0f64;
    let mut window_n = 0u32;
    let mut last_loss = 0.0f64;

    for iter in 0..cfg.iterations {
        sampler.fill(&mut batch, cfg.batch_size);
        let loss = batch_gradients(
            model,
            &set.samples,
            &batch,
            cfg.loss_norm,
            &mut workspace,
            &mut grads,
        )?;
        if !loss.is_finite() {
            return Err(FieldError::NonFiniteLoss { iteration: iter });
        }
        let lr = lr_schedule(iter, cfg);
        adam_step(
            &mut model.params,
            &grads.flat,
            &mut adam,
            lr,
            cfg.adam_betas,
            cfg.adam_eps,
        );

        last_loss = loss;
        window_sum += loss;
        window_n += 1;
        if (iter + 1) % 100 == 0 {
            trace.push(TraceRow {
                iteration: iter + 1,
                loss: window_sum / window_n as f64,
                lr,
            });
            if let Some(cb) = progress.as_deref_mut() {
                cb(iter + 1, window_sum / window_n as f64);
            }
            window_sum = 0.0;
            window_n = 0;
        }
    }

    model.data_seed = set.seed;
    model.train_seed = cfg.seed;

    Ok(TrainReport {
        trace,
        final_loss: last_loss,
    })
}
