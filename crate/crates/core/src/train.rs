//! Training: one document per optimizer step, Adam with linear warmup and
//! decay, periodic dev evaluation, and optional early stopping on a target
//! average F1. Fully deterministic for a fixed seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::model::{CorefModel, ModelError, PreparedDoc};
use crate::tensor::{Adam, AdamConfig, Tape};
use crate::tensor::WarmupLinearDecay;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub avg_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps_run: usize,
    pub final_loss: f64,
    pub evals: Vec<EvalPoint>,
    /// True when the target average F1 was reached before the step budget.
    pub stopped_early: bool,
}

/// Run the configured number of steps (or fewer, when `target_avg_f1` is
/// reached on dev). Documents are cycled in a reshuffled order each epoch;
/// every step consumes one document. `on_log` receives one line per
/// evaluation.
pub fn train(
    model: &mut CorefModel,
    train_docs: &[Document],
    dev_docs: &[Document],
    mut on_log: impl FnMut(&str),
) -> Result<TrainReport, ModelError> {
    if train_docs.is_empty() {
        return Err(ModelError::Data { detail: "training corpus is empty".into() });
    }
    let train_preps: Vec<PreparedDoc> =
        train_docs.iter().map(|d| model.prepare(d)).collect::<Result<_, _>>()?;
    let dev_preps: Vec<PreparedDoc> =
        dev_docs.iter().map(|d| model.prepare(d)).collect::<Result<_, _>>()?;

    let cfg = model.config.clone();
    let mut adam = Adam::new(&model.store, AdamConfig::default());
    let schedule = WarmupLinearDecay::from_fraction(cfg.steps, cfg.warmup_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261696e);
    let mut order: Vec<usize> = (0..train_preps.len()).collect();

    let mut evals = Vec::new();
    let mut stopped_early = false;
    let mut final_loss = f64::NAN;
    let mut steps_run = 0;
    for step in 1..=cfg.steps {
        let pos = (step - 1) % train_preps.len();
        if pos == 0 {
            order.shuffle(&mut rng);
        }
        let prep = &train_preps[order[pos]];
        let (loss, grads) = {
            let tape = Tape::new();
            let out = model.forward(&tape, prep, None);
            let loss = out.loss.value().get(0, 0);
            let grads = tape.backward(out.loss)?;
            (loss, tape.param_grads(&grads, &model.store))
        };
        let lr = cfg.lr * schedule.multiplier(step);
        adam.step(&mut model.store, &grads, lr);
        final_loss = loss;
        steps_run = step;

        if step % cfg.eval_every == 0 || step == cfg.steps {
            if dev_preps.is_empty() {
                on_log(&format!("step {step}: loss {loss:.4}"));
                continue;
            }
            let (report, _) = model.evaluate_corpus(&dev_preps);
            evals.push(EvalPoint { step, avg_f1: report.avg_f1 });
            on_log(&format!(
                "step {step}: loss {loss:.4}, dev avg F1 {:.4}",
                report.avg_f1
            ));
            if let Some(target) = cfg.target_avg_f1 {
                if report.avg_f1 >= target {
                    stopped_early = step < cfg.steps;
                    break;
                }
            }
        }
    }
    Ok(TrainReport { steps_run, final_loss, evals, stopped_early })
}
