//! Focal objective, batched meta-updates, the training loop, inductive
//! inference, and cross-validation.
//!
//! Determinism: every random decision is drawn from a stream derived from
//! (seed, purpose, indices), episodes within a batch are evaluated on
//! independent tapes, and gradients are reduced in episode order. Thread
//! count changes scheduling, never results.

use rayon::prelude::*;

use super::adam::Optimizer;
use super::episode::{
    build_episode, sample_episode, sample_support, CopulaScope, Episode, QueryInput, SplitCopula,
};
use super::TrainingConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport, ScoredPrediction};
use crate::model::{forward, DropoutSpec, EpisodeInputs, ModelParameters};
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::{streams, RngStream};

const PROB_FLOOR: f64 = 1e-12;

/// Focal loss -(1 - p_c)^gamma * log(p_c) with p_c floored at 1e-12.
pub fn focal_loss(probabilities: &[f64], true_class: usize, gamma: f64) -> f64 {
    let p = probabilities[true_class].max(PROB_FLOOR);
    let one_minus = 1.0 - p;
    if one_minus <= 0.0 {
        return 0.0;
    }
    -one_minus.powf(gamma) * p.ln()
}

/// d(focal loss)/d(probabilities); nonzero only at the true class.
pub fn focal_loss_gradient(probabilities: &[f64], true_class: usize, gamma: f64) -> Vec<f64> {
    let mut grad = vec![0.0; probabilities.len()];
    let p = probabilities[true_class];
    if p <= PROB_FLOOR {
        // Inside the floor the loss is constant in p.
        return grad;
    }
    let one_minus = 1.0 - p;
    if one_minus <= 0.0 {
        return grad;
    }
    grad[true_class] = if gamma == 0.0 {
        -1.0 / p
    } else {
        gamma * one_minus.powf(gamma - 1.0) * p.ln() - one_minus.powf(gamma) / p
    };
    grad
}

/// Query focal loss of one episode plus the gradient for every parameter
/// tensor, in canonical tensor order.
pub fn episode_gradients(
    params: &ModelParameters,
    episode: &Episode,
    gamma: f64,
    dropout: DropoutSpec,
) -> Result<(f64, Vec<Matrix>)> {
    let label = episode.query_label.ok_or_else(|| {
        Error::Sampling("episode query carries no label; cannot compute the loss".into())
    })?;
    let out = forward(
        &EpisodeInputs {
            features: &episode.features,
            node_labels: &episode.node_labels,
            graphs: &episode.graphs,
            query_index: episode.query_index,
        },
        params,
        dropout,
    )?;
    let loss = focal_loss(&out.probabilities, label, gamma);
    let seed = Matrix::row_vector(&focal_loss_gradient(&out.probabilities, label, gamma));
    let grads = out.tape.backward(out.prob_node, seed)?;
    let mut per_tensor = Vec::with_capacity(out.param_nodes.len());
    for (&node, (_, tensor)) in out.param_nodes.iter().zip(params.tensors()) {
        let g = grads
            .get(node)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(tensor.rows(), tensor.cols()));
        per_tensor.push(g);
    }
    Ok((loss, per_tensor))
}

/// Probabilities of one already-built episode under a trained model
/// (dropout disabled).
pub fn infer_episode(params: &ModelParameters, episode: &Episode) -> Result<Vec<f64>> {
    let out = forward(
        &EpisodeInputs {
            features: &episode.features,
            node_labels: &episode.node_labels,
            graphs: &episode.graphs,
            query_index: episode.query_index,
        },
        params,
        DropoutSpec::Inference,
    )?;
    Ok(out.probabilities)
}

/// Average query focal loss over the batch, one optimizer step on its
/// gradient. Episodes are evaluated independently (possibly in parallel)
/// and reduced in batch order.
pub fn meta_update(
    params: &mut ModelParameters,
    episodes: &[Episode],
    optimizer: &mut Optimizer,
    config: &TrainingConfig,
    dropout_root: &RngStream,
    iteration: usize,
) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::Config("meta update over an empty batch".into()));
    }
    let shared: &ModelParameters = params;
    let results: Vec<Result<(f64, Vec<Matrix>)>> = episodes
        .par_iter()
        .enumerate()
        .map(|(b, episode)| {
            let dropout = if config.dropout > 0.0 {
                DropoutSpec::Train {
                    rate: config.dropout,
                    stream: dropout_root.substream(b as u64),
                }
            } else {
                DropoutSpec::Inference
            };
            episode_gradients(shared, episode, config.focal_gamma, dropout)
        })
        .collect();

    let scale = 1.0 / episodes.len() as f64;
    let mut mean_loss = 0.0;
    let mut accumulated: Option<Vec<Matrix>> = None;
    for (b, result) in results.into_iter().enumerate() {
        let (loss, grads) = result?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss in episode {b} at iteration {iteration} (seed {})",
                config.seed
            )));
        }
        mean_loss += loss;
        match &mut accumulated {
            None => accumulated = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g);
                }
            }
        }
    }
    let mut grads = accumulated.expect("nonempty batch");
    for g in &mut grads {
        *g = g.scale(scale);
    }
    optimizer.step(params, &grads)?;
    Ok(mean_loss * scale)
}

pub struct TrainOutcome {
    pub params: ModelParameters,
    /// (iteration, mean loss) per iteration.
    pub trace: Vec<(usize, f64)>,
}

/// Train on every labeled subject of the dataset.
pub fn train(dataset: &Dataset, config: &TrainingConfig) -> Result<TrainOutcome> {
    let split = dataset.labeled_indices();
    train_subset(dataset, &split, config)
}

/// Train on a caller-chosen subset of dataset rows.
pub fn train_subset(
    dataset: &Dataset,
    split: &[usize],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    train_on_split(
        dataset,
        split,
        config,
        RngStream::new(config.seed, streams::TRAIN),
    )
}

pub(crate) fn train_on_split(
    dataset: &Dataset,
    split: &[usize],
    config: &TrainingConfig,
    root: RngStream,
) -> Result<TrainOutcome> {
    config.validate()?;
    let model_config = config.model_config(dataset)?;
    let mut init_stream = root.substream(streams::INIT);
    let mut params = ModelParameters::init(model_config, &mut init_stream)?;
    let split_copula = match config.copula_scope {
        CopulaScope::Episode => None,
        CopulaScope::Split => Some(SplitCopula::build(dataset, split, config.lambda)?),
    };
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &params);
    let episodes_root = root.substream(streams::EPISODES);
    let dropout_root = root.substream(streams::DROPOUT);

    let mut trace = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        let iter_stream = episodes_root.substream(t as u64);
        let sampled: Vec<Result<Episode>> = (0..config.episodes_per_iteration)
            .into_par_iter()
            .map(|b| {
                let mut stream = iter_stream.substream(b as u64);
                sample_episode(dataset, split, config, &mut stream, split_copula.as_ref())
            })
            .collect();
        let episodes = sampled.into_iter().collect::<Result<Vec<Episode>>>()?;
        let loss = meta_update(
            &mut params,
            &episodes,
            &mut optimizer,
            config,
            &dropout_root.substream(t as u64),
            t,
        )?;
        trace.push((t, loss));
    }
    Ok(TrainOutcome { params, trace })
}

/// Loss trace CSV: `iteration,mean_loss`.
pub fn write_loss_trace(
    trace: &[(usize, f64)],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(out, "iteration,mean_loss")?;
    for (t, loss) in trace {
        writeln!(out, "{t},{loss}")?;
    }
    Ok(())
}

/// Inductive inference for one query: `infer_ensemble` episodes with
/// independently redrawn balanced supports from `pool`, probabilities
/// averaged. Dropout is off and the query's label channel stays zero.
pub fn infer_one(
    params: &ModelParameters,
    dataset: &Dataset,
    pool: &[usize],
    query: QueryInput,
    config: &TrainingConfig,
    stream: &RngStream,
    split_copula: Option<&SplitCopula>,
) -> Result<Vec<f64>> {
    let r = config.infer_ensemble;
    let mut mean = vec![0.0; dataset.num_classes()];
    for draw in 0..r {
        let mut draw_stream = stream.substream(draw as u64);
        let support: Vec<usize> = sample_support(dataset, pool, config.q, &mut draw_stream)?
            .into_iter()
            .flatten()
            .collect();
        let episode = build_episode(dataset, &support, query, config, split_copula)?;
        let probs = infer_episode(params, &episode)?;
        for (m, p) in mean.iter_mut().zip(&probs) {
            *m += p;
        }
    }
    for m in &mut mean {
        *m /= r as f64;
    }
    Ok(mean)
}

/// Score every labeled subject of the dataset under a trained model,
/// drawing each subject's supports from the other labeled subjects.
pub fn evaluate_single_split(
    params: &ModelParameters,
    dataset: &Dataset,
    config: &TrainingConfig,
) -> Result<(MetricsReport, Vec<ScoredPrediction>)> {
    let labeled = dataset.labeled_indices();
    let infer_root = RngStream::new(config.seed, streams::INFER);
    let predictions = score_queries(params, dataset, &labeled, &labeled, config, &infer_root)?;
    let class_names: Vec<String> = dataset
        .class_names
        .iter()
        .map(|c| c.name().to_string())
        .collect();
    let report = metrics::report(&predictions, &class_names)?;
    Ok((report, predictions))
}

/// Score `queries` with supports drawn from `pool` only. A query present
/// in the pool is excluded from its own support draws.
fn score_queries(
    params: &ModelParameters,
    dataset: &Dataset,
    queries: &[usize],
    pool: &[usize],
    config: &TrainingConfig,
    infer_root: &RngStream,
) -> Result<Vec<ScoredPrediction>> {
    let results: Vec<Result<ScoredPrediction>> = queries
        .par_iter()
        .enumerate()
        .map(|(position, &qi)| {
            let record = &dataset.records[qi];
            let true_class = dataset.label_index(record).ok_or_else(|| {
                Error::Sampling(format!("query subject {} is unlabeled", record.subject_id))
            })?;
            let own_pool: Vec<usize> = pool.iter().copied().filter(|&p| p != qi).collect();
            let split_copula = match config.copula_scope {
                CopulaScope::Episode => None,
                CopulaScope::Split => Some(SplitCopula::build(dataset, &own_pool, config.lambda)?),
            };
            let stream = infer_root.substream(position as u64);
            let probabilities = infer_one(
                params,
                dataset,
                &own_pool,
                QueryInput {
                    subject_id: &record.subject_id,
                    features: &record.features,
                },
                config,
                &stream,
                split_copula.as_ref(),
            )?;
            Ok(ScoredPrediction {
                subject_id: record.subject_id.clone(),
                true_class,
                probabilities,
            })
        })
        .collect();
    results.into_iter().collect()
}

pub struct CvOutcome {
    pub folds: Vec<MetricsReport>,
    pub fold_predictions: Vec<Vec<ScoredPrediction>>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub micro_auc_mean: f64,
    pub micro_auc_std: f64,
}

/// Stratified subject-level folds: per class, shuffled then dealt
/// round-robin.
pub fn stratified_folds(
    dataset: &Dataset,
    fold_count: usize,
    stream: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    if fold_count < 2 {
        return Err(Error::Config("fold_count must be >= 2".into()));
    }
    let labeled = dataset.labeled_indices();
    let mut folds = vec![Vec::new(); fold_count];
    for group in dataset.labeled_by_class(&labeled) {
        let mut members = group;
        stream.shuffle(&mut members);
        for (i, idx) in members.into_iter().enumerate() {
            folds[i % fold_count].push(idx);
        }
    }
    Ok(folds)
}

/// K-fold cross-validation with retraining per fold. Held-out subjects
/// are scored with supports drawn exclusively from the fold's training
/// side.
pub fn cross_validate(dataset: &Dataset, config: &TrainingConfig) -> Result<CvOutcome> {
    config.validate()?;
    let mut fold_stream = RngStream::new(config.seed, streams::FOLDS);
    let folds = stratified_folds(dataset, config.fold_count, &mut fold_stream)?;

    let mut reports = Vec::with_capacity(folds.len());
    let mut fold_predictions = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let train_split: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != f)
            .flat_map(|(_, members)| members.iter().copied())
            .collect();
        // No-leakage check: evaluation queries never appear in the pool.
        if fold.iter().any(|i| train_split.contains(i)) {
            return Err(Error::Sampling(format!(
                "fold {f} overlaps its own training split"
            )));
        }
        let outcome = train_on_split(
            dataset,
            &train_split,
            config,
            RngStream::new(config.seed, streams::TRAIN).substream(f as u64),
        )?;
        let infer_root = RngStream::new(config.seed, streams::INFER).substream(f as u64);
        let predictions = score_queries(
            &outcome.params,
            dataset,
            fold,
            &train_split,
            config,
            &infer_root,
        )?;
        let class_names: Vec<String> = dataset
            .class_names
            .iter()
            .map(|c| c.name().to_string())
            .collect();
        reports.push(metrics::report(&predictions, &class_names)?);
        fold_predictions.push(predictions);
    }

    let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let micro_aucs: Vec<f64> = reports.iter().map(|r| r.micro_auc).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&accuracies);
    let (micro_auc_mean, micro_auc_std) = mean_std(&micro_aucs);
    Ok(CvOutcome {
        folds: reports,
        fold_predictions,
        accuracy_mean,
        accuracy_std,
        micro_auc_mean,
        micro_auc_std,
    })
}

/// Mean and sample standard deviation (n - 1 denominator).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
