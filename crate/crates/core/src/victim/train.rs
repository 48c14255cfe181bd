use log::debug;
use serde::{Deserialize, Serialize};

use super::model::{Sample, Task, VictimKind, VictimModel};
use super::split::{build_task_data, SplitSpec, TaskData};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{Adam, AdamConfig};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VictimConfig {
    pub kind: VictimKind,
    pub layers: usize,
    pub hidden_dim: usize,
    /// Output width of pair-task encoders (node classification uses the
    /// class count).
    pub pair_dim: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub learning_rate: f64,
}

impl Default for VictimConfig {
    fn default() -> Self {
        Self {
            kind: VictimKind::Gcn,
            layers: 2,
            hidden_dim: 16,
            pair_dim: 16,
            epochs: 200,
            patience: 30,
            learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedVictim {
    pub model: VictimModel,
    pub data: TaskData,
    /// `(training loss, validation accuracy)` per epoch.
    pub history: Vec<(f64, f64)>,
    pub best_epoch: Option<usize>,
}

impl TrainedVictim {
    pub fn observed_graph(&self, g: &Graph) -> Graph {
        self.data.observed_graph(g)
    }

    pub fn test_accuracy(&self, g: &Graph) -> Result<f64> {
        accuracy(&self.model, &self.observed_graph(g), &self.data.test)
    }
}

/// Full-batch Adam on the cross-entropy of the training split, keeping the
/// parameters with the best validation accuracy.
pub fn train_victim(g: &Graph, task: Task, split: &SplitSpec, cfg: &VictimConfig, seed: u64) -> Result<TrainedVictim> {
    if cfg.layers == 0 || cfg.hidden_dim == 0 || cfg.pair_dim == 0 {
        return Err(Error::Config("victim layers and widths must be positive".into()));
    }
    let data = build_task_data(g, task, split)?;
    if data.train.is_empty() {
        return Err(Error::input("training split is empty"));
    }
    let observed = data.observed_graph(g);
    let out_dim = match task {
        Task::Nc => g.num_classes(),
        Task::Lp | Task::Pnc => cfg.pair_dim,
    };
    let mut model = VictimModel::new(
        cfg.kind,
        task,
        g.feature_dim(),
        cfg.hidden_dim,
        cfg.layers,
        out_dim,
        &mut seeded(derive_seed(seed, "victim-init")),
    );
    let mut opt = Adam::for_params(
        &model,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, VictimModel)> = None;
    for epoch in 0..cfg.epochs {
        let (loss, grads) = model.loss_and_grad(&observed, &data.train)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!("victim loss {loss} at epoch {epoch}")));
        }
        opt.step(&mut model, &grads)?;
        let val = if data.val.is_empty() {
            -loss
        } else {
            accuracy(&model, &observed, &data.val)?
        };
        history.push((loss, val));
        match &best {
            Some((b, _, _)) if val <= *b => {}
            _ => best = Some((val, epoch, model.clone())),
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            debug!("victim early stop at epoch {epoch} (best {best_epoch})");
            break;
        }
    }
    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, m)) = best {
        model = m;
        model.trained = true;
    }
    Ok(TrainedVictim {
        model,
        data,
        history,
        best_epoch,
    })
}

/// Whether the model's prediction for `sample` on `g` is correct.
pub fn evaluate_target(model: &VictimModel, g: &Graph, sample: &Sample) -> Result<bool> {
    Ok(evaluate_batch(model, g, std::slice::from_ref(sample))?[0])
}

/// Correctness of every sample from a single forward pass on `g`.
pub fn evaluate_batch(model: &VictimModel, g: &Graph, samples: &[Sample]) -> Result<Vec<bool>> {
    let out = model.forward(g)?;
    samples
        .iter()
        .map(|s| Ok(model.predict_from(&out, &s.query)? == s.label))
        .collect()
}

/// Mean 0/1 accuracy; an empty sample list is an error.
pub fn accuracy(model: &VictimModel, g: &Graph, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("accuracy over no samples"));
    }
    let hits = evaluate_batch(model, g, samples)?.into_iter().filter(|&c| c).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Relative accuracy drop in percent: `(orig − attacked) / orig · 100`.
pub fn drop_in_accuracy(orig: f64, attacked: f64) -> Result<f64> {
    if orig.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !orig.is_finite() || !attacked.is_finite() {
        return Err(Error::Undefined(format!(
            "drop in accuracy with original accuracy {orig}"
        )));
    }
    Ok((orig - attacked) / orig * 100.0)
}
