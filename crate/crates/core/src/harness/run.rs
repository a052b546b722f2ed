use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{overall_accuracy, per_class_accuracy};
use super::ExperimentConfig;
use crate::active::{
    agreement_histogram, combine_probabilities, member_probabilities, select_by_uncertainty, select_random,
    AgreementHistogram, ProbabilityMatrix, SnapshotCommittee, Strategy, INFERENCE_CHUNK,
};
use crate::data::{augment_mirror, normalize_channels, seed_split, PatchDataset};
use crate::engine::AdamState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::zoo::{predict_chunked, train_step, NetworkGraph, ParameterSet};
use crate::Tensor;

/// Independent random streams of one run. Each stage draws only from its own
/// stream, so swapping the query strategy leaves the others untouched.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum RngStream {
    Split = 1,
    Init = 2,
    Shuffle = 3,
    Dropout = 4,
    Query = 5,
}

impl RngStream {
    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self as u64);
        rng
    }
}

/// Measurements taken after one round (round 0 is the initial model).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled_count: usize,
    /// Test accuracy of the reported predictor: the committee for aedl
    /// strategies, the final parameters otherwise.
    pub overall_accuracy: f64,
    /// NaN for classes absent from the test set.
    pub per_class_accuracy: Vec<f64>,
    pub final_params_accuracy: f64,
    pub wall_time_s: f64,
    /// Committee vote distribution on the test set (aedl strategies only).
    pub agreement: Option<AgreementHistogram>,
    /// Ids moved from the candidate pool into the labeled set this round.
    pub queried: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub network: crate::zoo::Architecture,
    pub seed: u64,
    pub class_count: usize,
    pub records: Vec<RoundRecord>,
}

impl LearningCurve {
    /// `(labeled_count, overall_accuracy)` pairs.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.labeled_count as f64, r.overall_accuracy))
            .collect()
    }
}

/// Loads the configured dataset and runs one seed of the protocol.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<LearningCurve> {
    config.validate()?;
    let dataset = config.dataset.load::<f64>()?;
    run_single_on(&dataset, config, seed)
}

/// One active-learning run on an already loaded dataset.
///
/// Split, normalize, train the initial model, then for each round select a
/// batch, label it, fine-tune while capturing snapshots, and evaluate.
pub fn run_single_on<T: Scalar>(
    dataset: &PatchDataset<T>,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<LearningCurve> {
    config.validate()?;
    let started = Instant::now();
    let clock = || if config.record_wall_time { started.elapsed().as_secs_f64() } else { 0.0 };

    let split_seed = RngStream::Split.rng(seed).next_u64();
    let ds = seed_split(
        dataset.clone(),
        config.per_class_seed,
        config.candidate_size,
        config.test_size,
        split_seed,
    )?;
    let mut ds = if config.normalize { normalize_channels(ds)?.0 } else { ds };

    let [h, w, c] = ds.patch_shape();
    let k = ds.class_count();
    let graph = config.network.build(c, k)?;
    if graph.input_shape() != [h, w, c] {
        return Err(Error::Config(format!(
            "{} expects {}x{} patches, dataset has {h}x{w}",
            config.network,
            config.network.patch_size(),
            config.network.patch_size()
        )));
    }

    let test_ids: Vec<usize> = ds.split.test.iter().copied().collect();
    let (test_x, test_y) = ds.gather(&test_ids);

    let mut trainer = Trainer {
        graph: &graph,
        params: ParameterSet::initialize(&graph, &mut RngStream::Init.rng(seed)),
        adam: AdamState::new(config.optimizer),
        shuffle_rng: RngStream::Shuffle.rng(seed),
        dropout_rng: RngStream::Dropout.rng(seed),
        batch_size: config.train_batch_size,
        augment: config.augment,
    };
    let mut query_rng = RngStream::Query.rng(seed);
    let mut committee = SnapshotCommittee::new(config.committee_size, config.snapshot_interval_epochs)?;
    let strategy = config.strategy;

    trainer.train(&ds, config.initial_epochs, None)?;
    let mut records = vec![evaluate(&graph, &trainer.params, None, &test_x, &test_y, k)
        .map(|e| e.into_record(0, ds.split.labeled.len(), clock(), Vec::new()))?];
    info!(
        "{strategy} seed {seed}: round 0, {} labeled, OA {:.4}",
        records[0].labeled_count, records[0].overall_accuracy
    );

    for round in 1..=config.rounds {
        let candidates: Vec<usize> = ds.split.candidates.iter().copied().collect();
        if candidates.is_empty() {
            info!("{strategy} seed {seed}: candidate pool exhausted after round {}", round - 1);
            break;
        }
        let batch = config.batch_per_round;
        let chosen = if strategy == Strategy::Random {
            select_random::<T>(&candidates, batch, query_rng.next_u64())?.chosen_ids
        } else {
            let (cand_x, _) = ds.gather(&candidates);
            let probs = if strategy.uses_committee() && !committee.is_empty() {
                combine_probabilities(&member_probabilities(&graph, &committee, &cand_x)?)?
            } else {
                predict_chunked(&graph, &trainer.params, &cand_x, INFERENCE_CHUNK)?
            };
            let probs = probs.with_ids(candidates)?;
            select_by_uncertainty(strategy.criterion(), &probs, batch)?.chosen_ids
        };
        debug!("{strategy} seed {seed}: round {round} queried {chosen:?}");
        ds = ds.move_to_labeled(&chosen)?;

        committee.clear();
        let capture = strategy.uses_committee().then_some(&mut committee);
        trainer.train(&ds, config.finetune_epochs, capture)?;

        let members = strategy.uses_committee().then_some(&committee);
        let eval = evaluate(&graph, &trainer.params, members, &test_x, &test_y, k)?;
        let record = eval.into_record(round, ds.split.labeled.len(), clock(), chosen);
        info!(
            "{strategy} seed {seed}: round {round}, {} labeled, OA {:.4}",
            record.labeled_count, record.overall_accuracy
        );
        records.push(record);
    }

    Ok(LearningCurve {
        strategy,
        network: config.network,
        seed,
        class_count: k,
        records,
    })
}

struct Trainer<'g, T> {
    graph: &'g NetworkGraph,
    params: ParameterSet<T>,
    adam: AdamState<T>,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    batch_size: usize,
    augment: bool,
}

impl<T: Scalar> Trainer<'_, T> {
    /// Mini-batch training on the labeled set for `epochs` passes, optionally
    /// capturing snapshots into `committee`.
    fn train(
        &mut self,
        ds: &PatchDataset<T>,
        epochs: usize,
        mut committee: Option<&mut SnapshotCommittee<T>>,
    ) -> Result<()> {
        let labeled: Vec<usize> = ds.split.labeled.iter().copied().collect();
        let (x, y) = ds.gather(&labeled);
        let (x, y) = if self.augment { augment_mirror(&x, &y)? } else { (x, y) };
        let mut order: Vec<usize> = (0..y.len()).collect();
        for epoch in 1..=epochs {
            order.shuffle(&mut self.shuffle_rng);
            let mut loss_sum = 0.0;
            for rows in order.chunks(self.batch_size) {
                let bx = x.gather_rows(rows);
                let by: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
                let loss = train_step(self.graph, &mut self.params, &bx, &by, &mut self.adam, &mut self.dropout_rng)?;
                loss_sum += loss.to_f64_lossy();
            }
            self.params.epoch_tag += 1;
            let mean_loss = loss_sum / order.chunks(self.batch_size).len().max(1) as f64;
            if !mean_loss.is_finite() {
                return Err(Error::InvalidArgument(format!("training diverged at epoch {}", self.params.epoch_tag)));
            }
            debug!("epoch {} loss {mean_loss:.5}", self.params.epoch_tag);
            if let Some(c) = committee.as_deref_mut() {
                if c.captures_at(epoch, epochs) {
                    c.push(self.params.clone());
                }
            }
        }
        Ok(())
    }
}

struct Evaluation {
    overall: f64,
    per_class: Vec<f64>,
    final_params: f64,
    agreement: Option<AgreementHistogram>,
}

impl Evaluation {
    fn into_record(self, round: usize, labeled_count: usize, wall_time_s: f64, queried: Vec<usize>) -> RoundRecord {
        RoundRecord {
            round,
            labeled_count,
            overall_accuracy: self.overall,
            per_class_accuracy: self.per_class,
            final_params_accuracy: self.final_params,
            wall_time_s,
            agreement: self.agreement,
            queried,
        }
    }
}

/// Scores the test set with the final parameters and, when given a
/// non-empty committee, with its soft vote.
fn evaluate<T: Scalar>(
    graph: &NetworkGraph,
    params: &ParameterSet<T>,
    committee: Option<&SnapshotCommittee<T>>,
    test_x: &Tensor<T>,
    test_y: &[usize],
    k: usize,
) -> Result<Evaluation> {
    let accuracy = |p: &ProbabilityMatrix<T>| overall_accuracy(&p.predicted_labels(), test_y);
    match committee.filter(|c| !c.is_empty()) {
        None => {
            let probs = predict_chunked(graph, params, test_x, INFERENCE_CHUNK)?;
            let predicted = probs.predicted_labels();
            let oa = overall_accuracy(&predicted, test_y)?;
            Ok(Evaluation {
                overall: oa,
                per_class: per_class_accuracy(&predicted, test_y, k),
                final_params: oa,
                agreement: None,
            })
        }
        Some(committee) => {
            let members = member_probabilities(graph, committee, test_x)?;
            // The newest snapshot is taken after the last epoch, so it is the final state.
            let final_params = if committee.latest() == Some(params) {
                accuracy(members.last().expect("non-empty"))?
            } else {
                accuracy(&predict_chunked(graph, params, test_x, INFERENCE_CHUNK)?)?
            };
            let votes: Vec<Vec<usize>> = members.iter().map(|m| m.predicted_labels()).collect();
            let predicted = combine_probabilities(&members)?.predicted_labels();
            Ok(Evaluation {
                overall: overall_accuracy(&predicted, test_y)?,
                per_class: per_class_accuracy(&predicted, test_y, k),
                final_params,
                agreement: Some(agreement_histogram(&votes)?),
            })
        }
    }
}
