//! Minibatch training of a mixture: rejection partitioning of each batch by
//! the partition of unity, reconstruction plus latent penalty per cluster,
//! Adam updates, and data-driven prior refresh rounds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::diffnet::{
    adam_step, backward_slots, forward_slots, init_layer_values, AdamConfig, AdamState, LayerSlots,
    MixtureArchitecture, ParamStore,
};
use crate::discrepancy::{penalty_with_grad, sliced_w1, DiscrepancySpec, GroundMetric, KernelSpec};
use crate::mixmodel::{MixtureModel, Prior, PriorBase, COLLAPSE_WINDOW, MIN_ACCEPTANCE};
use crate::partition::{mixture_weights, PartitionOfUnity};
use crate::rng::Rng;
use crate::{Error, LossComponent, Matrix, PointCloud, Result};

/// How refresh rounds judge whether a round helped.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum ValidationMetric {
    /// Sliced W1 between model samples and the validation cloud.
    SlicedW1 { projections: usize },
    /// Accept every round.
    None,
}

impl Default for ValidationMetric {
    fn default() -> Self {
        ValidationMetric::SlicedW1 { projections: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    /// Penalty weight per cluster; a single value applies to every cluster.
    pub lambda: Vec<f64>,
    pub penalty: DiscrepancySpec,
    pub batch_size: usize,
    pub epochs: usize,
    /// Variance of the Gaussian perturbation added to encodings.
    pub h: f64,
    pub adam: AdamConfig,
    pub prior_refresh_rounds: usize,
    pub validation: ValidationMetric,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::w1()
    }
}

impl TrainConfig {
    /// Exact W1 penalty with weight 10.
    pub fn w1() -> Self {
        Self {
            lambda: vec![10.0],
            penalty: DiscrepancySpec::W1 {
                metric: GroundMetric::L2,
            },
            batch_size: 256,
            epochs: 50,
            h: 0.01,
            adam: AdamConfig::default(),
            prior_refresh_rounds: 0,
            validation: ValidationMetric::default(),
            seed: 0,
        }
    }

    /// Squared MMD penalty with weight 100 and the given kernel.
    pub fn mmd(kernel: KernelSpec) -> Self {
        Self {
            lambda: vec![100.0],
            penalty: DiscrepancySpec::Mmd { kernel },
            ..Self::w1()
        }
    }

    pub fn validate(&self, clusters: usize) -> Result<()> {
        if self.lambda.len() != 1 && self.lambda.len() != clusters {
            return Err(Error::Config(format!(
                "{} penalty weights for {clusters} clusters",
                self.lambda.len()
            )));
        }
        if self.lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config("penalty weights must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("smoothing bandwidth must be nonnegative, got {}", self.h)));
        }
        if let ValidationMetric::SlicedW1 { projections: 0 } = self.validation {
            return Err(Error::Config("validation needs at least one projection".into()));
        }
        self.adam.validate()
    }

    pub fn lambda_for(&self, k: usize) -> f64 {
        if self.lambda.len() == 1 {
            self.lambda[0]
        } else {
            self.lambda[k]
        }
    }
}

/// Per-cluster row indices into a batch, plus the number of batch points
/// outside the cover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPartition {
    pub members: Vec<Vec<usize>>,
    pub uncovered: usize,
}

/// Put each batch point into cluster `k` with probability `rho_k(x)`,
/// independently over clusters. Weights of exactly 0 or 1 draw nothing, so
/// an indicator partition consumes no randomness.
pub fn partition_minibatch(batch: &Matrix, pou: &PartitionOfUnity, rng: &mut Rng) -> Result<BatchPartition> {
    if batch.cols() != pou.dim() {
        return Err(Error::Shape(format!(
            "batch of dimension {} against a partition in dimension {}",
            batch.cols(),
            pou.dim()
        )));
    }
    let mut members = vec![Vec::new(); pou.len()];
    let mut uncovered = 0;
    for (i, x) in batch.iter_rows().enumerate() {
        let rho = match pou.eval(x) {
            Ok(r) => r,
            Err(Error::Uncovered { .. }) => {
                uncovered += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (k, r) in rho.iter().enumerate() {
            let include = if *r >= 1.0 {
                true
            } else if *r <= 0.0 {
                false
            } else {
                rng.uniform() <= *r
            };
            if include {
                members[k].push(i);
            }
        }
    }
    Ok(BatchPartition { members, uncovered })
}

/// Inputs of one objective evaluation for one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTerm {
    /// Points of the cluster's minibatch subset, one per row.
    pub data: Matrix,
    /// Prior draws; empty skips the penalty.
    pub prior: Matrix,
    /// Standard normal draws, one row per data row, scaled by `sqrt(h)`.
    pub noise: Matrix,
}

impl ClusterTerm {
    pub fn empty(ambient: usize, latent: usize) -> Self {
        Self {
            data: Matrix::zeros(0, ambient),
            prior: Matrix::zeros(0, latent),
            noise: Matrix::zeros(0, latent),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub reconstruction: f64,
    /// Unweighted sum of the per-cluster penalties.
    pub penalty: f64,
    /// `sum_k lambda_k penalty_k`.
    pub weighted_penalty: f64,
    pub total: f64,
    /// Gradient of `total`, laid out like the model's parameters.
    pub grad: Vec<f64>,
    /// Clusters with data whose penalty was skipped for lack of samples.
    pub skipped_penalties: usize,
}

/// Reconstruction term of one chain: returns the value and the upstream
/// gradient `d loss / d output` for `scale * sum |x - out|^2`.
fn reconstruction(x: &Matrix, out: &Matrix, scale: f64) -> (f64, Matrix) {
    let mut value = 0.0;
    let mut upstream = Matrix::zeros(out.rows(), out.cols());
    for ((u, o), t) in upstream.as_mut_slice().iter_mut().zip(out.as_slice()).zip(x.as_slice()) {
        let diff = o - t;
        value += diff * diff;
        *u = 2.0 * scale * diff;
    }
    (scale * value, upstream)
}

/// One cluster's contribution, shared by the mixture and the plain
/// single-pair paths so both do identical arithmetic.
#[allow(clippy::too_many_arguments)]
fn cluster_objective(
    encoder: &[LayerSlots],
    decoder: &[LayerSlots],
    values: &[f64],
    term: &ClusterTerm,
    weight: f64,
    lambda: f64,
    h: f64,
    penalty: &DiscrepancySpec,
    grad: &mut [f64],
) -> Result<(f64, Option<f64>)> {
    let n = term.data.rows();
    let enc_tape = forward_slots(encoder, values, &term.data)?;
    let z = enc_tape.output();
    let dec_tape = forward_slots(decoder, values, z)?;
    let scale = weight / n as f64;
    let (recon, upstream) = reconstruction(&term.data, dec_tape.output(), scale);
    let mut dz = backward_slots(decoder, values, &dec_tape, &upstream, grad)?;
    let mut pen = None;
    if term.prior.rows() > 0 {
        if term.noise.rows() != n || term.noise.cols() != z.cols() {
            return Err(Error::Shape(format!(
                "noise is {}x{}, encodings are {}x{}",
                term.noise.rows(),
                term.noise.cols(),
                n,
                z.cols()
            )));
        }
        let s = h.sqrt();
        let mut noisy = z.clone();
        for (e, xi) in noisy.as_mut_slice().iter_mut().zip(term.noise.as_slice()) {
            *e += s * xi;
        }
        let (value, g) = penalty_with_grad(penalty, &term.prior, &noisy)?;
        for (d, gi) in dz.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *d += lambda * gi;
        }
        pen = Some(value);
    }
    backward_slots(encoder, values, &enc_tape, &dz, grad)?;
    Ok((recon, pen))
}

/// `sum_k [ p_k / |D_k| sum_{X in D_k} |X - G_k(Q_k X)|^2 + lambda_k D(L_k, E_k) ]`
/// where `E_k = Q_k(D_k) + sqrt(h) noise_k`; clusters with no data add 0.
pub fn objective(model: &MixtureModel, config: &TrainConfig, terms: &[ClusterTerm]) -> Result<ObjectiveValue> {
    if terms.len() != model.clusters() {
        return Err(Error::Shape(format!(
            "{} cluster terms for {} clusters",
            terms.len(),
            model.clusters()
        )));
    }
    config.validate(model.clusters())?;
    let mut grad = model.params().zero_grad();
    let mut out = ObjectiveValue {
        reconstruction: 0.0,
        penalty: 0.0,
        weighted_penalty: 0.0,
        total: 0.0,
        grad: Vec::new(),
        skipped_penalties: 0,
    };
    let values = model.params().values();
    for (k, term) in terms.iter().enumerate() {
        if term.data.rows() == 0 {
            continue;
        }
        let lambda = config.lambda_for(k);
        let (recon, pen) = cluster_objective(
            model.encoder_slots(k)?,
            model.decoder_slots(k)?,
            values,
            term,
            model.weights().values()[k],
            lambda,
            config.h,
            &config.penalty,
            &mut grad,
        )?;
        out.reconstruction += recon;
        match pen {
            Some(p) => {
                out.penalty += p;
                out.weighted_penalty += lambda * p;
            }
            None => out.skipped_penalties += 1,
        }
    }
    out.total = out.reconstruction + out.weighted_penalty;
    out.grad = grad;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub round: usize,
    pub epoch: usize,
    pub step: usize,
    pub reconstruction: f64,
    pub penalty: f64,
    pub weighted_penalty: f64,
    pub total: f64,
    pub skipped_penalties: usize,
    pub uncovered: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub round: usize,
    pub epoch: usize,
    pub reconstruction: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Losses of every pass. Round 0 is the initial fit; round `r >= 1` is the
/// `r`-th prior refresh.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Training passes run, including rejected refresh rounds.
    pub passes: usize,
    /// Refresh rounds whose model was kept.
    pub accepted_rounds: usize,
    /// Validation score after each pass, when a validation set was given.
    pub validation: Vec<f64>,
    /// Cluster whose reweighted prior collapsed and ended refreshing early.
    pub collapsed: Option<usize>,
}

impl TrainHistory {
    pub fn skipped_penalties(&self) -> usize {
        self.steps.iter().map(|s| s.skipped_penalties).sum()
    }

    pub fn uncovered(&self) -> usize {
        self.steps.iter().map(|s| s.uncovered).sum()
    }

    fn push_epoch(&mut self, round: usize, epoch: usize, first_step: usize) {
        let steps = &self.steps[first_step..];
        if steps.is_empty() {
            return;
        }
        let n = steps.len() as f64;
        let mean = |f: fn(&StepRecord) -> f64| steps.iter().map(f).sum::<f64>() / n;
        self.epochs.push(EpochRecord {
            round,
            epoch,
            reconstruction: mean(|s| s.reconstruction),
            penalty: mean(|s| s.penalty),
            total: mean(|s| s.total),
        });
    }
}

fn check_finite(value: &ObjectiveValue, step: usize) -> Result<()> {
    if !value.reconstruction.is_finite() {
        return Err(Error::NonFinite {
            step,
            component: LossComponent::Reconstruction,
        });
    }
    if !value.weighted_penalty.is_finite() || value.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            step,
            component: LossComponent::Penalty,
        });
    }
    Ok(())
}

fn batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// One pass of `config.epochs` epochs from the model's current parameters
/// with a fresh optimizer state.
fn run_pass(
    model: &mut MixtureModel,
    data: &PointCloud,
    config: &TrainConfig,
    round: usize,
    reference: Option<&[f64]>,
    rng: &mut Rng,
    history: &mut TrainHistory,
) -> Result<()> {
    let mut adam = AdamState::new(model.param_count(), config.adam)?;
    let (d_amb, d_lat) = (model.ambient_dim(), model.latent_dim());
    for epoch in 0..config.epochs {
        let first = history.steps.len();
        for idx in batches(data.len(), config.batch_size, rng) {
            let batch = data.points.select_rows(&idx);
            let part = partition_minibatch(&batch, model.partition(), rng)?;
            let mut terms = Vec::with_capacity(model.clusters());
            for (k, members) in part.members.iter().enumerate() {
                if members.is_empty() {
                    terms.push(ClusterTerm::empty(d_amb, d_lat));
                    continue;
                }
                let m = members.len();
                let (prior, noise) = if m >= 2 {
                    let prior = match reference {
                        Some(r) => model.sample_prior_through(k, m, rng, r)?,
                        None => model.sample_prior_with(k, m, rng)?,
                    };
                    let noise = Matrix::new(m, d_lat, rng.normal_vec(m * d_lat))?;
                    (prior, noise)
                } else {
                    (Matrix::zeros(0, d_lat), Matrix::zeros(0, d_lat))
                };
                terms.push(ClusterTerm {
                    data: batch.select_rows(members),
                    prior,
                    noise,
                });
            }
            let step = history.steps.len();
            let value = objective(model, config, &terms)?;
            check_finite(&value, step)?;
            adam_step(model.params_mut().values_mut(), &value.grad, &mut adam)?;
            history.steps.push(StepRecord {
                round,
                epoch,
                step,
                reconstruction: value.reconstruction,
                penalty: value.penalty,
                weighted_penalty: value.weighted_penalty,
                total: value.total,
                skipped_penalties: value.skipped_penalties,
                uncovered: part.uncovered,
            });
        }
        history.push_epoch(round, epoch, first);
    }
    history.passes += 1;
    Ok(())
}

/// Initialize a mixture on `pou` and fit it to `data`. Mixture weights are
/// the average partition weights over the whole training set.
pub fn train(
    data: &PointCloud,
    pou: &PartitionOfUnity,
    arch: MixtureArchitecture,
    prior: PriorBase,
    config: &TrainConfig,
) -> Result<(MixtureModel, TrainHistory)> {
    data.validate()?;
    config.validate(arch.clusters)?;
    let weights = mixture_weights(pou, data)?;
    let priors = vec![Prior::base(prior); arch.clusters];
    let mut model = MixtureModel::init(arch, pou.clone(), weights, priors, config.h, config.seed)?;
    let mut history = TrainHistory::default();
    let mut rng = Rng::derive(config.seed, 1);
    run_pass(&mut model, data, config, 0, None, &mut rng, &mut history)?;
    Ok((model, history))
}

/// Continue training an existing model for one pass.
pub fn train_more(model: &mut MixtureModel, data: &PointCloud, config: &TrainConfig, stream: u64) -> Result<TrainHistory> {
    config.validate(model.clusters())?;
    let mut history = TrainHistory::default();
    let mut rng = Rng::derive(config.seed, stream);
    run_pass(model, data, config, 0, None, &mut rng, &mut history)?;
    Ok(history)
}

fn validation_score(model: &MixtureModel, metric: ValidationMetric, validation: &PointCloud, seed: u64) -> Result<Option<f64>> {
    match metric {
        ValidationMetric::None => Ok(None),
        ValidationMetric::SlicedW1 { projections } => {
            let samples = model.sample(validation.len(), seed)?;
            Ok(Some(sliced_w1(&samples.points, &validation.points, projections, seed)?))
        }
    }
}

/// Acceptance a kept refresh round must reach in every cluster; ten times
/// the sampling floor, so later draws do not collapse by chance.
pub const REFRESH_MIN_ACCEPTANCE: f64 = 10.0 * MIN_ACCEPTANCE;

fn check_acceptance(model: &MixtureModel, seed: u64) -> Result<()> {
    for k in 0..model.clusters() {
        let rate = model.prior_acceptance(k, COLLAPSE_WINDOW, seed.wrapping_add(k as u64))?;
        if rate < REFRESH_MIN_ACCEPTANCE {
            return Err(Error::PriorCollapse {
                cluster: k,
                accepted: (rate * COLLAPSE_WINDOW as f64).round() as usize,
                proposals: COLLAPSE_WINDOW,
            });
        }
    }
    Ok(())
}

/// Data-driven prior refresh: each round replaces every prior by the base
/// prior reweighted through the current decoder and partition, then
/// retrains from the current parameters. With a validation cloud, a round
/// that does not improve the validation score is discarded and refreshing
/// stops. A round whose reweighted prior collapses, or accepts less than
/// [`REFRESH_MIN_ACCEPTANCE`] in some cluster, is discarded the same way.
pub fn refresh_priors(
    model: &MixtureModel,
    data: &PointCloud,
    config: &TrainConfig,
    rounds: usize,
    validation: Option<&PointCloud>,
    history: &mut TrainHistory,
) -> Result<MixtureModel> {
    if rounds == 0 {
        return Err(Error::Config("refresh needs at least one round".into()));
    }
    config.validate(model.clusters())?;
    let score_seed = config.seed.wrapping_add(0x5eed);
    let mut best = match validation {
        Some(v) => validation_score(model, config.validation, v, score_seed)?,
        None => None,
    };
    if let Some(b) = best {
        if history.validation.is_empty() {
            history.validation.push(b);
        }
    }
    let mut current = model.clone();
    for round in 1..=rounds {
        let mut candidate = current.clone();
        let priors = candidate.priors().iter().map(|p| Prior::reweighted(p.base)).collect();
        candidate.set_priors(priors)?;
        let mut rng = Rng::derive(config.seed, 1 + round as u64);
        // The training prior reweights through the decoders as they were
        // when the round started; the kept model reweights through its own.
        let reference = current.params().values().to_vec();
        let scored = run_pass(&mut candidate, data, config, round, Some(&reference), &mut rng, history)
            .and_then(|_| check_acceptance(&candidate, score_seed))
            .and_then(|_| match validation {
                Some(v) => validation_score(&candidate, config.validation, v, score_seed),
                None => Ok(None),
            });
        let score = match scored {
            Ok(s) => s,
            Err(Error::PriorCollapse { cluster, .. }) => {
                history.collapsed = Some(cluster);
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(s) = score {
            history.validation.push(s);
        }
        match (score, best) {
            (Some(s), Some(b)) if s >= b => break,
            _ => {
                best = score;
                current = candidate;
                history.accepted_rounds += 1;
            }
        }
    }
    Ok(current)
}

/// A single encoder/decoder pair trained on the plain autoencoder objective
/// `(1/n) sum |X - G(Q X)|^2 + lambda D(prior, Q X + sqrt(h) noise)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainAutoencoder {
    pub encoder: ParamStore,
    pub decoder: ParamStore,
    pub arch: MixtureArchitecture,
    pub prior: PriorBase,
}

fn plain_store(specs: &[crate::diffnet::LayerSpec], prefix: &str, rng: &mut Rng) -> Result<(ParamStore, Vec<LayerSlots>)> {
    let mut store = ParamStore::new();
    let mut slots = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let (w, b) = init_layer_values(spec, rng);
        let weight = store.push_segment(format!("{prefix}{i}.weight"), w)?;
        let bias = store.push_segment(format!("{prefix}{i}.bias"), b)?;
        slots.push(LayerSlots {
            spec: *spec,
            weight,
            bias,
        });
    }
    Ok((store, slots))
}

impl PlainAutoencoder {
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        let slots = self.slots(&self.encoder, &self.arch.encoder_layers(), "encoder")?;
        Ok(forward_slots(&slots, self.encoder.values(), x)?.into_output())
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        let slots = self.slots(&self.decoder, &self.arch.decoder_layers(), "decoder")?;
        Ok(forward_slots(&slots, self.decoder.values(), z)?.into_output())
    }

    fn slots(&self, store: &ParamStore, specs: &[crate::diffnet::LayerSpec], prefix: &str) -> Result<Vec<LayerSlots>> {
        specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let get = |part: &str| {
                    store
                        .range(&format!("{prefix}{i}.{part}"))
                        .ok_or_else(|| Error::Shape(format!("missing segment {prefix}{i}.{part}")))
                };
                Ok(LayerSlots {
                    spec: *spec,
                    weight: get("weight")?,
                    bias: get("bias")?,
                })
            })
            .collect()
    }

    pub fn sample(&self, m: usize, seed: u64) -> Result<Matrix> {
        let mut rng = Rng::new(seed);
        let z = self.prior.sample(self.arch.latent_dim, m, &mut rng);
        self.decode(&z)
    }
}

/// Fit a single encoder/decoder pair with the same initialization, batch
/// order and random draws as [`train`] uses for a one-cluster indicator
/// mixture, but without any partition machinery.
pub fn train_plain(
    data: &PointCloud,
    arch: MixtureArchitecture,
    prior: PriorBase,
    config: &TrainConfig,
) -> Result<(PlainAutoencoder, TrainHistory)> {
    data.validate()?;
    if arch.clusters != 1 {
        return Err(Error::Config("a plain autoencoder has exactly one cluster".into()));
    }
    arch.validate()?;
    config.validate(1)?;
    let enc_specs = arch.encoder_layers();
    let dec_specs = arch.decoder_layers();
    let mut init = Rng::new(config.seed);
    let (mut encoder, enc_slots) = plain_store(&enc_specs, "encoder", &mut init)?;
    let (mut decoder, dec_slots) = plain_store(&dec_specs, "decoder", &mut init)?;
    let mut enc_adam = AdamState::new(encoder.total_len(), config.adam)?;
    let mut dec_adam = AdamState::new(decoder.total_len(), config.adam)?;
    let d_lat = arch.latent_dim;
    let lambda = config.lambda_for(0);
    let mut history = TrainHistory::default();
    let mut rng = Rng::derive(config.seed, 1);

    // Both chains index one buffer: encoder values first, decoder after.
    let offset = encoder.total_len();
    let shift = |slots: &[LayerSlots]| -> Vec<LayerSlots> {
        slots
            .iter()
            .map(|s| LayerSlots {
                spec: s.spec,
                weight: s.weight.start + offset..s.weight.end + offset,
                bias: s.bias.start + offset..s.bias.end + offset,
            })
            .collect()
    };
    let dec_shifted = shift(&dec_slots);

    for epoch in 0..config.epochs {
        let first = history.steps.len();
        for idx in batches(data.len(), config.batch_size, &mut rng) {
            let batch = data.points.select_rows(&idx);
            let m = batch.rows();
            let (prior_draws, noise) = if m >= 2 {
                let p = prior.sample(d_lat, m, &mut rng);
                let noise = Matrix::new(m, d_lat, rng.normal_vec(m * d_lat))?;
                (p, noise)
            } else {
                (Matrix::zeros(0, d_lat), Matrix::zeros(0, d_lat))
            };
            let term = ClusterTerm {
                data: batch,
                prior: prior_draws,
                noise,
            };
            let mut values = encoder.values().to_vec();
            values.extend_from_slice(decoder.values());
            let mut grad = vec![0.0; values.len()];
            let (recon, pen) = cluster_objective(
                &enc_slots,
                &dec_shifted,
                &values,
                &term,
                1.0,
                lambda,
                config.h,
                &config.penalty,
                &mut grad,
            )?;
            let (penalty, weighted, skipped) = match pen {
                Some(p) => (p, lambda * p, 0),
                None => (0.0, 0.0, 1),
            };
            let step = history.steps.len();
            let value = ObjectiveValue {
                reconstruction: recon,
                penalty,
                weighted_penalty: weighted,
                total: recon + weighted,
                grad,
                skipped_penalties: skipped,
            };
            check_finite(&value, step)?;
            let (g_enc, g_dec) = value.grad.split_at(offset);
            adam_step(encoder.values_mut(), g_enc, &mut enc_adam)?;
            adam_step(decoder.values_mut(), g_dec, &mut dec_adam)?;
            history.steps.push(StepRecord {
                round: 0,
                epoch,
                step,
                reconstruction: value.reconstruction,
                penalty: value.penalty,
                weighted_penalty: value.weighted_penalty,
                total: value.total,
                skipped_penalties: value.skipped_penalties,
                uncovered: 0,
            });
        }
        history.push_epoch(0, epoch, first);
    }
    history.passes = 1;
    Ok((
        PlainAutoencoder {
            encoder,
            decoder,
            arch,
            prior,
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::Activation;
    use crate::partition::{MixtureWeights, PartitionKind};

    fn ring_pou(kind: PartitionKind) -> PartitionOfUnity {
        let centers = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        PartitionOfUnity::new(kind, centers, vec![1.5, 1.5], 0.1, 3.0).unwrap()
    }

    #[test]
    fn indicator_partition_is_deterministic_membership() {
        let pou = ring_pou(PartitionKind::Indicator);
        let batch = Matrix::from_rows(&[[0.9, 0.1], [-1.1, 0.0], [0.5, 0.0], [-0.2, 0.3]]).unwrap();
        let mut rng = Rng::new(0);
        let before = rng.clone().next_u64();
        let part = partition_minibatch(&batch, &pou, &mut rng).unwrap();
        assert_eq!(part.members, vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(rng.next_u64(), before);
    }

    #[test]
    fn uncovered_points_are_counted() {
        let pou = ring_pou(PartitionKind::Smooth);
        let batch = Matrix::from_rows(&[[10.0, 10.0], [1.0, 0.0]]).unwrap();
        let part = partition_minibatch(&batch, &pou, &mut Rng::new(1)).unwrap();
        assert_eq!(part.uncovered, 1);
        assert!(part.members[0].contains(&1));
    }

    #[test]
    fn half_weights_select_half() {
        // The origin is equidistant from both centers.
        let pou = ring_pou(PartitionKind::Smooth);
        let rho = pou.eval(&[0.0, 0.0]).unwrap();
        assert!((rho[0] - 0.5).abs() < 1e-12);
        let batch = Matrix::zeros(4000, 2);
        let part = partition_minibatch(&batch, &pou, &mut Rng::new(2)).unwrap();
        let frac = part.members[0].len() as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 0.05);
    }

    fn toy_model(k: usize, act: Activation) -> MixtureModel {
        let mut arch = MixtureArchitecture::new(2, 1, vec![5], k);
        arch.hidden_activation = act;
        let pou = ring_pou(PartitionKind::Smooth);
        let pou = if k == 2 {
            pou
        } else {
            PartitionOfUnity::single(&[0.0, 0.0], 5.0).unwrap()
        };
        let weights = MixtureWeights::new(vec![1.0 / k as f64; k]).unwrap();
        MixtureModel::init(arch, pou, weights, vec![Prior::default(); k], 0.01, 7).unwrap()
    }

    #[test]
    fn shifted_reconstruction_is_one() {
        let mut model = toy_model(1, Activation::Tanh);
        // Zero the decoder's output layer and set its bias to x + (1, 0).
        for v in model.params_mut().segment_mut("decoder.trunk0.weight").unwrap() {
            *v = 0.0;
        }
        model
            .params_mut()
            .segment_mut("decoder.trunk0.bias")
            .unwrap()
            .copy_from_slice(&[1.5, -2.0]);
        let term = ClusterTerm {
            data: Matrix::from_rows(&[[0.5, -2.0]]).unwrap(),
            prior: Matrix::zeros(0, 1),
            noise: Matrix::zeros(0, 1),
        };
        let v = objective(&model, &TrainConfig::w1(), &[term]).unwrap();
        assert!((v.reconstruction - 1.0).abs() < 1e-15);
        assert_eq!(v.skipped_penalties, 1);
    }

    #[test]
    fn empty_clusters_contribute_nothing() {
        let model = toy_model(2, Activation::Tanh);
        let terms = vec![ClusterTerm::empty(2, 1), ClusterTerm::empty(2, 1)];
        let v = objective(&model, &TrainConfig::w1(), &terms).unwrap();
        assert_eq!(v.total, 0.0);
        assert!(v.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn mmd_objective_gradient_matches_finite_differences() {
        let model = toy_model(2, Activation::Tanh);
        let config = TrainConfig::mmd(KernelSpec::imq_for_dim(1).unwrap());
        let terms = vec![
            ClusterTerm {
                data: Matrix::from_rows(&[[0.8, 0.3], [1.4, -0.2]]).unwrap(),
                prior: Matrix::column(&[0.2, -0.5]),
                noise: Matrix::column(&[0.7, -1.1]),
            },
            ClusterTerm {
                data: Matrix::from_rows(&[[-0.9, 0.4], [-1.2, -0.6]]).unwrap(),
                prior: Matrix::column(&[-0.1, 0.9]),
                noise: Matrix::column(&[0.3, 0.2]),
            },
        ];
        let base = objective(&model, &config, &terms).unwrap();
        let step = 1e-6;
        for i in 0..model.param_count() {
            let mut plus = model.clone();
            plus.params_mut().values_mut()[i] += step;
            let mut minus = model.clone();
            minus.params_mut().values_mut()[i] -= step;
            let fd = (objective(&plus, &config, &terms).unwrap().total
                - objective(&minus, &config, &terms).unwrap().total)
                / (2.0 * step);
            let g = base.grad[i];
            assert!((fd - g).abs() <= 1e-3 * g.abs().max(1e-3), "param {i}: fd {fd} vs {g}");
        }
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let data = crate::synthdata::gen_spiral(50, 1).unwrap();
        let pou = PartitionOfUnity::single(&[0.0, 0.0], 100.0).unwrap();
        let arch = MixtureArchitecture::new(2, 1, vec![4], 1);
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::w1()
        };
        let (model, history) = train(&data, &pou, arch.clone(), PriorBase::StdGaussian, &config).unwrap();
        let fresh = crate::mixmodel::init_mixture_params(&arch, config.seed).unwrap();
        assert_eq!(model.params(), &fresh);
        assert!(history.steps.is_empty());
    }

    #[test]
    fn logged_total_decomposes() {
        let data = crate::synthdata::gen_spiral(200, 3).unwrap();
        let pou = crate::partition::fit_partition(
            &data,
            &crate::partition::PartitionConfig {
                clusters: 3,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let arch = MixtureArchitecture::new(2, 1, vec![16], 3);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 64,
            ..TrainConfig::w1()
        };
        let (_, history) = train(&data, &pou, arch, PriorBase::TruncatedNormal { radius: 1.0 }, &config).unwrap();
        assert_eq!(history.steps.len(), 3 * 4);
        assert_eq!(history.epochs.len(), 3);
        for s in &history.steps {
            assert!((s.total - (s.reconstruction + 10.0 * s.penalty)).abs() <= 1e-9 * s.total.abs().max(1.0));
        }
    }
}
