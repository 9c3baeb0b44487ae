//! The fitted mixture: K encoder/decoder pairs sharing all but one layer
//! each, per-cluster latent priors, mixture weights and the partition of
//! unity that glues the local models together.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::diffnet::{forward_slots, init_layer_values, LayerSlots, MixtureArchitecture, ParamStore};
use crate::partition::{MixtureWeights, PartitionOfUnity};
use crate::rng::Rng;
use crate::{Error, Matrix, PointCloud, Result};

/// Proposals per acceptance check for reweighted priors.
pub const COLLAPSE_WINDOW: usize = 10_000;

/// Minimum acceptance rate over one window before sampling gives up.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

const PROPOSAL_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum PriorBase {
    StdGaussian,
    /// `N(0, I)` conditioned on `|z| <= radius`.
    TruncatedNormal { radius: f64 },
    UniformBall { radius: f64 },
}

impl PriorBase {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorBase::StdGaussian => Ok(()),
            PriorBase::TruncatedNormal { radius } | PriorBase::UniformBall { radius } => {
                if radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("prior radius must be positive, got {radius}")))
                }
            }
        }
    }

    pub fn sample_one(&self, dim: usize, rng: &mut Rng) -> Vec<f64> {
        match *self {
            PriorBase::StdGaussian => rng.normal_vec(dim),
            PriorBase::TruncatedNormal { radius } => loop {
                let z = rng.normal_vec(dim);
                if z.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
                    return z;
                }
            },
            PriorBase::UniformBall { radius } => {
                let dir = crate::discrepancy::random_direction(dim, rng);
                let r = radius * rng.uniform().powf(1.0 / dim as f64);
                dir.into_iter().map(|c| c * r).collect()
            }
        }
    }

    pub fn sample(&self, dim: usize, m: usize, rng: &mut Rng) -> Matrix {
        let mut data = Vec::with_capacity(m * dim);
        for _ in 0..m {
            data.extend(self.sample_one(dim, rng));
        }
        Matrix::new(m, dim, data).expect("sized buffer")
    }
}

/// Latent prior of one cluster: a base law, optionally reweighted by
/// `rho_k(G_k(z))` through rejection.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prior {
    pub base: PriorBase,
    pub reweighted: bool,
}

impl Prior {
    pub fn base(base: PriorBase) -> Self {
        Self {
            base,
            reweighted: false,
        }
    }

    pub fn reweighted(base: PriorBase) -> Self {
        Self {
            base,
            reweighted: true,
        }
    }
}

impl Default for Prior {
    fn default() -> Self {
        Self::base(PriorBase::TruncatedNormal { radius: 1.0 })
    }
}

pub fn encoder_trunk_name(layer: usize, part: &str) -> String {
    format!("encoder.trunk{layer}.{part}")
}

pub fn encoder_head_name(cluster: usize, part: &str) -> String {
    format!("encoder.head{cluster}.{part}")
}

pub fn decoder_head_name(cluster: usize, part: &str) -> String {
    format!("decoder.head{cluster}.{part}")
}

pub fn decoder_trunk_name(layer: usize, part: &str) -> String {
    format!("decoder.trunk{layer}.{part}")
}

/// Parameter layout of a mixture: encoder trunk, K encoder heads, K decoder
/// heads, decoder trunk, in that order. Initialization draws from one stream
/// in the same order, so a one-cluster mixture starts from exactly the
/// weights of a plain encoder followed by a plain decoder.
pub fn init_mixture_params(arch: &MixtureArchitecture, seed: u64) -> Result<ParamStore> {
    arch.validate()?;
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    let enc = arch.encoder_layers();
    let dec = arch.decoder_layers();
    let (enc_head, enc_trunk) = enc.split_last().expect("encoder has a layer");
    let (dec_head, dec_trunk) = dec.split_first().expect("decoder has a layer");
    let mut push = |store: &mut ParamStore, name: &dyn Fn(&str) -> String, spec| -> Result<()> {
        let (w, b) = init_layer_values(spec, &mut rng);
        store.push_segment(name("weight"), w)?;
        store.push_segment(name("bias"), b)?;
        Ok(())
    };
    for (i, spec) in enc_trunk.iter().enumerate() {
        push(&mut store, &|p| encoder_trunk_name(i, p), spec)?;
    }
    for k in 0..arch.clusters {
        push(&mut store, &|p| encoder_head_name(k, p), enc_head)?;
    }
    for k in 0..arch.clusters {
        push(&mut store, &|p| decoder_head_name(k, p), dec_head)?;
    }
    for (i, spec) in dec_trunk.iter().enumerate() {
        push(&mut store, &|p| decoder_trunk_name(i, p), spec)?;
    }
    Ok(store)
}

fn slot(params: &ParamStore, spec: crate::diffnet::LayerSpec, name: &dyn Fn(&str) -> String) -> Result<LayerSlots> {
    let find = |part: &str, len: usize| {
        let n = name(part);
        match params.range(&n) {
            Some(r) if r.len() == len => Ok(r),
            Some(r) => Err(Error::Shape(format!("segment `{n}` has {} values, expected {len}", r.len()))),
            None => Err(Error::Shape(format!("missing parameter segment `{n}`"))),
        }
    };
    Ok(LayerSlots {
        spec,
        weight: find("weight", spec.weight_len())?,
        bias: find("bias", spec.out_dim)?,
    })
}

/// Per-cluster layer chains resolved against a parameter layout.
pub fn mixture_slots(arch: &MixtureArchitecture, params: &ParamStore) -> Result<(Vec<Vec<LayerSlots>>, Vec<Vec<LayerSlots>>)> {
    arch.validate()?;
    if params.total_len() != arch.param_count() {
        return Err(Error::Shape(format!(
            "{} parameters stored, architecture needs {}",
            params.total_len(),
            arch.param_count()
        )));
    }
    let enc = arch.encoder_layers();
    let dec = arch.decoder_layers();
    let (enc_head, enc_trunk) = enc.split_last().expect("encoder has a layer");
    let (dec_head, dec_trunk) = dec.split_first().expect("decoder has a layer");
    let enc_shared = enc_trunk
        .iter()
        .enumerate()
        .map(|(i, s)| slot(params, *s, &|p| encoder_trunk_name(i, p)))
        .collect::<Result<Vec<_>>>()?;
    let dec_shared = dec_trunk
        .iter()
        .enumerate()
        .map(|(i, s)| slot(params, *s, &|p| decoder_trunk_name(i, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut encoders = Vec::with_capacity(arch.clusters);
    let mut decoders = Vec::with_capacity(arch.clusters);
    for k in 0..arch.clusters {
        let mut e = enc_shared.clone();
        e.push(slot(params, *enc_head, &|p| encoder_head_name(k, p))?);
        encoders.push(e);
        let mut d = vec![slot(params, *dec_head, &|p| decoder_head_name(k, p))?];
        d.extend(dec_shared.iter().cloned());
        decoders.push(d);
    }
    Ok((encoders, decoders))
}

#[derive(Clone, Debug)]
pub struct MixtureModel {
    arch: MixtureArchitecture,
    params: ParamStore,
    encoders: Vec<Vec<LayerSlots>>,
    decoders: Vec<Vec<LayerSlots>>,
    priors: Vec<Prior>,
    weights: MixtureWeights,
    pou: PartitionOfUnity,
    h: f64,
}

impl MixtureModel {
    /// Freshly initialized model.
    pub fn init(
        arch: MixtureArchitecture,
        pou: PartitionOfUnity,
        weights: MixtureWeights,
        priors: Vec<Prior>,
        h: f64,
        seed: u64,
    ) -> Result<Self> {
        let params = init_mixture_params(&arch, seed)?;
        Self::from_parts(arch, params, pou, weights, priors, h)
    }

    /// Assemble a model from stored parts, checking that they agree.
    pub fn from_parts(
        arch: MixtureArchitecture,
        params: ParamStore,
        pou: PartitionOfUnity,
        weights: MixtureWeights,
        priors: Vec<Prior>,
        h: f64,
    ) -> Result<Self> {
        let (encoders, decoders) = mixture_slots(&arch, &params)?;
        let k = arch.clusters;
        if pou.len() != k || weights.len() != k || priors.len() != k {
            return Err(Error::Shape(format!(
                "{k} clusters but {} cover elements, {} weights and {} priors",
                pou.len(),
                weights.len(),
                priors.len()
            )));
        }
        if pou.dim() != arch.ambient_dim {
            return Err(Error::Shape(format!(
                "partition lives in dimension {}, model in {}",
                pou.dim(),
                arch.ambient_dim
            )));
        }
        weights.validate()?;
        for p in &priors {
            p.base.validate()?;
        }
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("smoothing bandwidth must be nonnegative, got {h}")));
        }
        Ok(Self {
            arch,
            params,
            encoders,
            decoders,
            priors,
            weights,
            pou,
            h,
        })
    }

    pub fn architecture(&self) -> &MixtureArchitecture {
        &self.arch
    }

    pub fn clusters(&self) -> usize {
        self.arch.clusters
    }

    pub fn ambient_dim(&self) -> usize {
        self.arch.ambient_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable parameter layout; segment boundaries cannot change.
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    pub fn set_priors(&mut self, priors: Vec<Prior>) -> Result<()> {
        if priors.len() != self.clusters() {
            return Err(Error::Shape(format!("{} priors for {} clusters", priors.len(), self.clusters())));
        }
        for p in &priors {
            p.base.validate()?;
        }
        self.priors = priors;
        Ok(())
    }

    pub fn weights(&self) -> &MixtureWeights {
        &self.weights
    }

    pub fn partition(&self) -> &PartitionOfUnity {
        &self.pou
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn param_count(&self) -> usize {
        self.params.total_len()
    }

    pub fn encoder_slots(&self, k: usize) -> Result<&[LayerSlots]> {
        self.check_cluster(k)?;
        Ok(&self.encoders[k])
    }

    pub fn decoder_slots(&self, k: usize) -> Result<&[LayerSlots]> {
        self.check_cluster(k)?;
        Ok(&self.decoders[k])
    }

    fn check_cluster(&self, k: usize) -> Result<()> {
        if k >= self.clusters() {
            return Err(Error::Config(format!(
                "cluster index {k} out of range for {} clusters",
                self.clusters()
            )));
        }
        Ok(())
    }

    /// `Q_k(x)` for every row of `x`.
    pub fn encode(&self, k: usize, x: &Matrix) -> Result<Matrix> {
        Ok(forward_slots(self.encoder_slots(k)?, self.params.values(), x)?.into_output())
    }

    /// `G_k(z)` for every row of `z`.
    pub fn decode(&self, k: usize, z: &Matrix) -> Result<Matrix> {
        Ok(forward_slots(self.decoder_slots(k)?, self.params.values(), z)?.into_output())
    }

    /// `Q_k(x) + sqrt(h) N(0, I)`; with `h = 0` no noise is drawn.
    pub fn noisy_encode(&self, k: usize, x: &Matrix, seed: u64) -> Result<Matrix> {
        let mut z = self.encode(k, x)?;
        if self.h > 0.0 {
            let mut rng = Rng::new(seed);
            add_noise(&mut z, self.h, &mut rng);
        }
        Ok(z)
    }

    /// `m` draws from the prior of cluster `k`.
    pub fn sample_prior(&self, k: usize, m: usize, seed: u64) -> Result<Matrix> {
        self.check_cluster(k)?;
        let mut rng = Rng::new(seed);
        self.sample_prior_with(k, m, &mut rng)
    }

    pub(crate) fn sample_prior_with(&self, k: usize, m: usize, rng: &mut Rng) -> Result<Matrix> {
        self.sample_prior_through(k, m, rng, self.params.values())
    }

    /// Prior draws whose reweighting decodes through `reference`, a
    /// parameter vector laid out like this model's, instead of the current
    /// parameters.
    pub(crate) fn sample_prior_through(&self, k: usize, m: usize, rng: &mut Rng, reference: &[f64]) -> Result<Matrix> {
        let prior = self.priors[k];
        let d = self.latent_dim();
        if !prior.reweighted {
            return Ok(prior.base.sample(d, m, rng));
        }
        let mut out = Matrix::zeros(0, d);
        let (mut window_proposals, mut window_accepted) = (0usize, 0usize);
        while out.rows() < m {
            let z = prior.base.sample(d, PROPOSAL_CHUNK, rng);
            let x = forward_slots(self.decoder_slots(k)?, reference, &z)?.into_output();
            for (zr, xr) in z.iter_rows().zip(x.iter_rows()) {
                let rho = self.pou.eval_or_zero(k, xr);
                window_proposals += 1;
                if rng.uniform() < rho {
                    window_accepted += 1;
                    if out.rows() < m {
                        out.push_row(zr)?;
                    }
                }
                if window_proposals == COLLAPSE_WINDOW {
                    if (window_accepted as f64) < MIN_ACCEPTANCE * COLLAPSE_WINDOW as f64 {
                        return Err(Error::PriorCollapse {
                            cluster: k,
                            accepted: window_accepted,
                            proposals: window_proposals,
                        });
                    }
                    window_proposals = 0;
                    window_accepted = 0;
                }
            }
        }
        Ok(out)
    }

    /// Expected acceptance rate of cluster `k`'s reweighted prior, the mean
    /// of `rho_k(G_k(z))` over `proposals` base draws. Unweighted priors
    /// accept everything.
    pub fn prior_acceptance(&self, k: usize, proposals: usize, seed: u64) -> Result<f64> {
        self.check_cluster(k)?;
        if proposals == 0 {
            return Err(Error::Config("acceptance estimate needs at least one proposal".into()));
        }
        let prior = self.priors[k];
        if !prior.reweighted {
            return Ok(1.0);
        }
        let mut rng = Rng::new(seed);
        let z = prior.base.sample(self.latent_dim(), proposals, &mut rng);
        let x = self.decode(k, &z)?;
        let total: f64 = x.iter_rows().map(|xr| self.pou.eval_or_zero(k, xr)).sum();
        Ok(total / proposals as f64)
    }

    /// Draw `m` points from the fitted mixture: pick a cluster by its
    /// weight, draw from that cluster's prior and decode. Cluster labels are
    /// drawn first; cluster `k` then samples on stream `k` of `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> Result<PointCloud> {
        Ok(self.sample_labeled(m, seed)?.0)
    }

    /// Like [`MixtureModel::sample`], also returning the cluster of each draw.
    pub fn sample_labeled(&self, m: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
        let mut rng = Rng::derive(seed, u64::MAX);
        let labels: Vec<usize> = (0..m)
            .map(|_| rng.categorical(self.weights.values()).expect("valid mixture weights"))
            .collect();
        let mut counts = vec![0usize; self.clusters()];
        for &l in &labels {
            counts[l] += 1;
        }
        let mut decoded = Vec::with_capacity(self.clusters());
        for (k, &count) in counts.iter().enumerate() {
            if count == 0 {
                decoded.push(Matrix::zeros(0, self.ambient_dim()));
                continue;
            }
            let mut stream = Rng::derive(seed, k as u64);
            let z = self.sample_prior_with(k, count, &mut stream)?;
            decoded.push(self.decode(k, &z)?);
        }
        let mut next = vec![0usize; self.clusters()];
        let mut out = Matrix::zeros(0, self.ambient_dim());
        for &l in &labels {
            out.push_row(decoded[l].row(next[l]))?;
            next[l] += 1;
        }
        Ok((PointCloud::new_possibly_empty(out), labels))
    }
}

/// Add `sqrt(h) N(0, I)` in place, row by row.
pub(crate) fn add_noise(z: &mut Matrix, h: f64, rng: &mut Rng) {
    let s = h.sqrt();
    for v in z.as_mut_slice() {
        *v += s * rng.normal();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionKind;

    fn model(k: usize, h: f64) -> MixtureModel {
        let arch = MixtureArchitecture::new(2, 1, vec![8], k);
        let centers = Matrix::new(k, 2, (0..2 * k).map(|i| i as f64).collect()).unwrap();
        let pou = PartitionOfUnity::new(PartitionKind::Smooth, centers, vec![50.0; k], 1.0, 2.0).unwrap();
        let weights = MixtureWeights::new(vec![1.0 / k as f64; k]).unwrap();
        MixtureModel::init(arch, pou, weights, vec![Prior::default(); k], h, 3).unwrap()
    }

    fn probe() -> Matrix {
        Matrix::from_rows(&[[0.3, -1.0], [2.0, 0.5], [-0.7, 0.1]]).unwrap()
    }

    #[test]
    fn segment_layout_and_count() {
        let m = model(3, 0.0);
        assert_eq!(m.param_count(), m.architecture().param_count());
        let names: Vec<&str> = m.params().segments().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names[0], "encoder.trunk0.weight");
        assert_eq!(names[2], "encoder.head0.weight");
        assert_eq!(names.last().copied(), Some("decoder.trunk0.bias"));
    }

    #[test]
    fn cluster_index_checked() {
        let m = model(2, 0.0);
        assert!(m.encode(2, &probe()).is_err());
        assert!(m.decode(5, &Matrix::column(&[0.0])).is_err());
    }

    #[test]
    fn identical_heads_identical_outputs() {
        let mut m = model(2, 0.0);
        for part in ["weight", "bias"] {
            let src = m.params().segment(&encoder_head_name(0, part)).unwrap().to_vec();
            m.params_mut().segment_mut(&encoder_head_name(1, part)).unwrap().copy_from_slice(&src);
            let src = m.params().segment(&decoder_head_name(0, part)).unwrap().to_vec();
            m.params_mut().segment_mut(&decoder_head_name(1, part)).unwrap().copy_from_slice(&src);
        }
        assert_eq!(m.encode(0, &probe()).unwrap(), m.encode(1, &probe()).unwrap());
        let z = Matrix::column(&[0.1, -0.4]);
        assert_eq!(m.decode(0, &z).unwrap(), m.decode(1, &z).unwrap());
    }

    #[test]
    fn zero_encoder_head_gives_zero_latent() {
        let mut m = model(2, 0.0);
        for part in ["weight", "bias"] {
            m.params_mut().segment_mut(&encoder_head_name(1, part)).unwrap().fill(0.0);
        }
        assert!(m.encode(1, &probe()).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_decoder_head_gives_constant_output() {
        let mut m = model(2, 0.0);
        for part in ["weight", "bias"] {
            m.params_mut().segment_mut(&decoder_head_name(0, part)).unwrap().fill(0.0);
        }
        let out = m.decode(0, &Matrix::column(&[-3.0, 0.0, 7.0])).unwrap();
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(1), out.row(2));
    }

    #[test]
    fn head_mutation_is_local_trunk_mutation_is_global() {
        let base = model(3, 0.0);
        let x = probe();
        let mut m = base.clone();
        m.params_mut().segment_mut(&encoder_head_name(1, "weight")).unwrap()[0] += 0.5;
        assert_eq!(m.encode(0, &x).unwrap(), base.encode(0, &x).unwrap());
        assert_eq!(m.encode(2, &x).unwrap(), base.encode(2, &x).unwrap());
        assert_ne!(m.encode(1, &x).unwrap(), base.encode(1, &x).unwrap());

        let mut m = base.clone();
        for v in m.params_mut().segment_mut(&encoder_trunk_name(0, "weight")).unwrap() {
            *v += 0.3;
        }
        for k in 0..3 {
            assert_ne!(m.encode(k, &x).unwrap(), base.encode(k, &x).unwrap());
        }
    }

    #[test]
    fn noisy_encode_without_bandwidth_is_encode() {
        let m = model(2, 0.0);
        assert_eq!(m.noisy_encode(1, &probe(), 4).unwrap(), m.encode(1, &probe()).unwrap());
    }

    #[test]
    fn noisy_encode_variance() {
        let m = model(1, 0.01);
        let mut rng = Rng::new(2);
        let x = Matrix::new(10_000, 2, rng.normal_vec(20_000)).unwrap();
        let clean = m.encode(0, &x).unwrap();
        let noisy = m.noisy_encode(0, &x, 9).unwrap();
        assert_eq!(noisy, m.noisy_encode(0, &x, 9).unwrap());
        let diffs: Vec<f64> = noisy.as_slice().iter().zip(clean.as_slice()).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
        assert!((var - 0.01).abs() < 0.002, "variance {var}");
    }

    #[test]
    fn gaussian_prior_moments() {
        let mut rng = Rng::new(5);
        let z = PriorBase::StdGaussian.sample(1, 10_000, &mut rng);
        let mean = z.as_slice().iter().sum::<f64>() / 10_000.0;
        let var = z.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9_999.0;
        assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.1);
    }

    #[test]
    fn bounded_priors_stay_in_ball() {
        let mut rng = Rng::new(6);
        for base in [
            PriorBase::TruncatedNormal { radius: 0.7 },
            PriorBase::UniformBall { radius: 0.7 },
        ] {
            let z = base.sample(3, 2000, &mut rng);
            for r in z.iter_rows() {
                assert!(r.iter().map(|c| c * c).sum::<f64>().sqrt() <= 0.7);
            }
        }
        assert!(PriorBase::UniformBall { radius: 0.0 }.validate().is_err());
    }

    #[test]
    fn reweighting_with_full_cover_keeps_base_law() {
        // The cover is huge, so rho_0 = 1 on the decoder range of a one-cluster model.
        let mut m = model(1, 0.0);
        let base = m.sample_prior(0, 500, 11).unwrap();
        m.set_priors(vec![Prior::reweighted(PriorBase::TruncatedNormal { radius: 1.0 })]).unwrap();
        let reweighted = m.sample_prior(0, 500, 11).unwrap();
        let w = crate::discrepancy::w1_1d(base.as_slice(), reweighted.as_slice()).unwrap();
        assert!(w < 0.1, "w1 {w}");
    }

    #[test]
    fn reweighted_samples_decode_into_support() {
        let arch = MixtureArchitecture::new(2, 1, vec![8], 2);
        let centers = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let pou = PartitionOfUnity::new(PartitionKind::Smooth, centers, vec![1.0, 1.0], 0.1, 3.0).unwrap();
        let weights = MixtureWeights::new(vec![0.5, 0.5]).unwrap();
        let prior = Prior::reweighted(PriorBase::TruncatedNormal { radius: 1.0 });
        let m = MixtureModel::init(arch, pou, weights, vec![prior; 2], 0.0, 1).unwrap();
        for k in 0..2 {
            let z = m.sample_prior(k, 200, 3).unwrap();
            let x = m.decode(k, &z).unwrap();
            for r in x.iter_rows() {
                assert!(m.partition().contains(k, r));
            }
        }
    }

    #[test]
    fn collapse_is_reported() {
        let arch = MixtureArchitecture::new(2, 1, vec![4], 1);
        let centers = Matrix::from_rows(&[[1000.0, 1000.0]]).unwrap();
        let pou = PartitionOfUnity::new(PartitionKind::Smooth, centers, vec![1.0], 0.1, 3.0).unwrap();
        let weights = MixtureWeights::new(vec![1.0]).unwrap();
        let prior = Prior::reweighted(PriorBase::StdGaussian);
        let m = MixtureModel::init(arch, pou, weights, vec![prior], 0.0, 1).unwrap();
        assert!(matches!(
            m.sample_prior(0, 10, 0),
            Err(Error::PriorCollapse { cluster: 0, .. })
        ));
    }

    #[test]
    fn acceptance_rates() {
        let mut m = model(1, 0.0);
        assert_eq!(m.prior_acceptance(0, 100, 0).unwrap(), 1.0);
        // One huge ball: every decoded point has weight 1.
        m.set_priors(vec![Prior::reweighted(PriorBase::StdGaussian)]).unwrap();
        assert_eq!(m.prior_acceptance(0, 100, 0).unwrap(), 1.0);
        assert!(m.prior_acceptance(0, 0, 0).is_err());

        let arch = MixtureArchitecture::new(2, 1, vec![4], 1);
        let centers = Matrix::from_rows(&[[1000.0, 1000.0]]).unwrap();
        let pou = PartitionOfUnity::new(PartitionKind::Smooth, centers, vec![1.0], 0.1, 3.0).unwrap();
        let far = MixtureModel::init(
            arch,
            pou,
            MixtureWeights::new(vec![1.0]).unwrap(),
            vec![Prior::reweighted(PriorBase::StdGaussian)],
            0.0,
            1,
        )
        .unwrap();
        assert_eq!(far.prior_acceptance(0, 1000, 0).unwrap(), 0.0);
    }

    #[test]
    fn sampling_is_deterministic_and_follows_weights() {
        let mut m = model(3, 0.0);
        m.weights = MixtureWeights::new(vec![1.0, 0.0, 0.0]).unwrap();
        let (cloud, labels) = m.sample_labeled(300, 4).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
        assert_eq!(cloud, m.sample(300, 4).unwrap());
        assert_eq!(m.sample(0, 4).unwrap().len(), 0);
    }

    #[test]
    fn cluster_frequencies_converge() {
        let mut m = model(3, 0.0);
        let p = [0.5, 0.3, 0.2];
        m.weights = MixtureWeights::new(p.to_vec()).unwrap();
        let (_, labels) = m.sample_labeled(10_000, 8).unwrap();
        let mut chi2 = 0.0;
        for (k, pk) in p.iter().enumerate() {
            let observed = labels.iter().filter(|&&l| l == k).count() as f64;
            let expected = 10_000.0 * pk;
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
        // 99.9% quantile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 13.82, "chi2 {chi2}");
    }
}
