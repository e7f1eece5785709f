use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::PriorKind;
use super::lstm::{add_outer, concat, tdot, lstm_backward, lstm_forward, split, LstmCache};
use super::params::ModelParameters;
use crate::corpus::{BOS, EOS};
use crate::features::RegionFeatureSet;
use crate::latent::{combine_region_means, region_means, sentiment_prior_mean, AttributePrior, EmptyRegionPolicy, SentimentCluster, VARIANCE_FLOOR};
use crate::{Error, Result};

/// The prior the latent variables are regularized towards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Attribute { prior: AttributePrior, policy: EmptyRegionPolicy },
    Sentiment { sigma2: f64, z: usize },
}

impl Prior {
    pub fn kind(&self) -> PriorKind {
        match self {
            Prior::Attribute { .. } => PriorKind::Attribute,
            Prior::Sentiment { .. } => PriorKind::Sentiment,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Prior::Attribute { prior, .. } => prior.sigma2,
            Prior::Sentiment { sigma2, .. } => *sigma2,
        }
    }

    pub fn z_dim(&self) -> usize {
        match self {
            Prior::Attribute { prior, .. } => prior.z,
            Prior::Sentiment { z, .. } => *z,
        }
    }
}

/// Region features of one image in the layout the network consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageContext {
    pub image_id: String,
    /// `K x D`
    pub features: Array2<f64>,
    pub mean: Array1<f64>,
    /// Per-region average attribute mean (attribute prior only).
    pub region_means: Vec<Option<Vec<f64>>>,
}

impl ImageContext {
    pub fn new(set: &RegionFeatureSet, prior: &Prior) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyScene(set.image_id.clone()));
        }
        let d = set.feature_dim();
        let mut features = Array2::zeros((set.len(), d));
        for (k, r) in set.regions.iter().enumerate() {
            if r.feature.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "region feature",
                    expected: d,
                    actual: r.feature.len(),
                });
            }
            for (j, &x) in r.feature.iter().enumerate() {
                features[[k, j]] = x as f64;
            }
        }
        let mean = features.mean_axis(Axis(0)).expect("K >= 1");
        let region_means = match prior {
            Prior::Attribute { prior, .. } => region_means(&set.attribute_sets(), prior),
            Prior::Sentiment { .. } => vec![None; set.len()],
        };
        Ok(ImageContext {
            image_id: set.image_id.clone(),
            features,
            mean,
            region_means,
        })
    }

    pub fn num_regions(&self) -> usize {
        self.features.nrows()
    }
}

/// One training caption: word ids without bos/eos framing.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub image: &'a ImageContext,
    pub tokens: &'a [usize],
    /// Required with the sentiment prior.
    pub cluster: Option<SentimentCluster>,
}

/// Per-time-step quantities of one teacher-forced pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepTrace {
    pub nll: Vec<f64>,
    pub kl: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Arg-max of the next-word distribution.
    pub predicted: Vec<usize>,
    pub targets: Vec<usize>,
}

impl StepTrace {
    pub fn len(&self) -> usize {
        self.nll.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nll.is_empty()
    }

    pub fn correct(&self) -> usize {
        self.predicted.iter().zip(&self.targets).filter(|(p, t)| p == t).count()
    }
}

pub(crate) struct StepCache {
    input: usize,
    target: usize,
    att: LstmCache,
    h_att: Array1<f64>,
    u: Array2<f64>,
    alpha: Array1<f64>,
    mu_t: Array1<f64>,
    enc: LstmCache,
    logvar: Array1<f64>,
    var: Array1<f64>,
    mu_q: Array1<f64>,
    eps: Array1<f64>,
    dec: LstmCache,
    probs: Array1<f64>,
}

/// Attention over regions: `alpha = softmax_k(w . tanh(W_h h + W_v v_k + b))`,
/// attended feature `sum_k alpha_k v_k`.
pub fn attend(params: &ModelParameters, h_attention: &Array1<f64>, features: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let (alpha, v_hat, _) = attend_cached(params, h_attention, features);
    (alpha, v_hat)
}

fn attend_cached(p: &ModelParameters, h: &Array1<f64>, features: &Array2<f64>) -> (Array1<f64>, Array1<f64>, Array2<f64>) {
    let hproj = p.att_wh.dot(h) + &p.att_b;
    let mut u = features.dot(&p.att_wv.t());
    for mut row in u.rows_mut() {
        row += &hproj;
        row.mapv_inplace(f64::tanh);
    }
    let scores = u.dot(&p.att_w);
    let alpha = softmax(&scores);
    let v_hat = tdot(features, &alpha);
    (alpha, v_hat, u)
}

pub(crate) fn softmax(x: &Array1<f64>) -> Array1<f64> {
    let m = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = x.mapv(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

pub(crate) fn log_softmax(x: &Array1<f64>) -> Array1<f64> {
    let m = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.mapv(|v| v - lse)
}

fn argmax(x: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

fn prior_mean_at(prior: &Prior, image: &ImageContext, alpha: &Array1<f64>, cluster: Option<SentimentCluster>) -> Result<Array1<f64>> {
    match prior {
        Prior::Attribute { prior, policy } => {
            if alpha.len() != image.region_means.len() {
                return Err(Error::LengthMismatch {
                    expected: image.region_means.len(),
                    actual: alpha.len(),
                });
            }
            let a = alpha.as_slice().expect("contiguous");
            Ok(Array1::from(combine_region_means(a, &image.region_means, prior.z, *policy)))
        }
        Prior::Sentiment { z, .. } => {
            let c = cluster.ok_or_else(|| Error::InvalidArgument("sentiment prior needs a cluster label".into()))?;
            Ok(Array1::from(sentiment_prior_mean(c, *z)))
        }
    }
}

/// Gradient of the prior mean with respect to the attention weights.
fn prior_mean_backward(prior: &Prior, image: &ImageContext, alpha: &Array1<f64>, mu_t: &Array1<f64>, d_mu: &Array1<f64>) -> Array1<f64> {
    let mut d_alpha = Array1::zeros(alpha.len());
    let Prior::Attribute { policy, .. } = prior else {
        return d_alpha;
    };
    let mass: f64 = image.region_means.iter().zip(alpha).filter(|(m, _)| m.is_some()).map(|(_, a)| a).sum();
    for (k, m) in image.region_means.iter().enumerate() {
        let Some(m) = m else { continue };
        let g: f64 = match policy {
            EmptyRegionPolicy::Renormalize if mass > 0.0 => m.iter().zip(mu_t).zip(d_mu).map(|((mk, mu), d)| (mk - mu) * d).sum::<f64>() / mass,
            EmptyRegionPolicy::Renormalize => 0.0,
            EmptyRegionPolicy::ZeroContribution => m.iter().zip(d_mu).map(|(mk, d)| mk * d).sum(),
        };
        d_alpha[k] = g;
    }
    d_alpha
}

fn check_dims(p: &ModelParameters, prior: &Prior, image: &ImageContext) -> Result<()> {
    let c = &p.config;
    if image.features.ncols() != c.feature_dim {
        return Err(Error::DimensionMismatch {
            what: "feature_dim",
            expected: c.feature_dim,
            actual: image.features.ncols(),
        });
    }
    if prior.z_dim() != c.z_dim {
        return Err(Error::DimensionMismatch {
            what: "z_dim",
            expected: c.z_dim,
            actual: prior.z_dim(),
        });
    }
    if prior.kind() != c.prior {
        return Err(Error::InvalidArgument(format!("model expects a {:?} prior", c.prior)));
    }
    Ok(())
}

/// Teacher-forced pass over `bos w_1 .. w_n` predicting `w_1 .. w_n eos`,
/// with `z_t` drawn from the posterior by reparameterization.
pub fn forward_teacher_forced<R: Rng + ?Sized>(params: &ModelParameters, prior: &Prior, example: Example, rng: &mut R) -> Result<StepTrace> {
    forward_cached(params, prior, example, rng).map(|r| r.0)
}

pub(crate) fn forward_cached<R: Rng + ?Sized>(
    p: &ModelParameters,
    prior: &Prior,
    ex: Example,
    rng: &mut R,
) -> Result<(StepTrace, Vec<StepCache>)> {
    check_dims(p, prior, ex.image)?;
    let c = &p.config;
    if let Some(&bad) = ex.tokens.iter().find(|&&t| t >= c.vocab_size) {
        return Err(Error::OutOfRange {
            value: bad as f64,
            lo: 0.0,
            hi: c.vocab_size as f64 - 1.0,
        });
    }
    let (hs, zd) = (c.hidden_size, c.z_dim);
    let sigma_t2 = prior.variance();
    let mut ha = Array1::zeros(hs);
    let mut ca = Array1::zeros(hs);
    let mut he = Array1::zeros(hs);
    let mut ce = Array1::zeros(hs);
    let mut hd = Array1::zeros(hs);
    let mut cd = Array1::zeros(hs);
    let steps = ex.tokens.len() + 1;
    let mut trace = StepTrace::default();
    let mut caches = Vec::with_capacity(steps);
    for t in 0..steps {
        let input = if t == 0 { BOS } else { ex.tokens[t - 1] };
        let target = ex.tokens.get(t).copied().unwrap_or(EOS);

        let e = p.embed.row(input).to_owned();
        let xa = concat(&[ex.image.mean.view(), hd.view(), e.view()]);
        let (ha_new, ca_new, att) = lstm_forward(&p.att_lstm_w, &p.att_lstm_b, &xa, &ha, &ca);
        let (alpha, v_hat, u) = attend_cached(p, &ha_new, &ex.image.features);
        let mu_t = prior_mean_at(prior, ex.image, &alpha, ex.cluster)?;

        let xe = concat(&[v_hat.view(), mu_t.view(), ha_new.view(), hd.view()]);
        let (he_new, ce_new, enc) = lstm_forward(&p.enc_lstm_w, &p.enc_lstm_b, &xe, &he, &ce);
        let mu_q = p.mu_w.dot(&he_new) + &p.mu_b;
        let logvar = p.logvar_w.dot(&he_new) + &p.logvar_b;
        let var = logvar.mapv(|x| x.exp().max(VARIANCE_FLOOR));
        let eps: Array1<f64> = (0..zd).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let z = &mu_q + &(var.mapv(f64::sqrt) * &eps);

        let xd = concat(&[v_hat.view(), z.view(), mu_t.view(), ha_new.view()]);
        let (hd_new, cd_new, dec) = lstm_forward(&p.dec_lstm_w, &p.dec_lstm_b, &xd, &hd, &cd);
        let logits = p.out_w.dot(&hd_new) + &p.out_b;
        let logp = log_softmax(&logits);

        let kl: f64 = (0..zd)
            .map(|j| 0.5 * (sigma_t2.ln() - var[j].ln()) + (var[j] + (mu_q[j] - mu_t[j]).powi(2)) / (2.0 * sigma_t2) - 0.5)
            .sum();
        trace.nll.push(-logp[target]);
        trace.kl.push(kl.max(0.0));
        trace.alpha.push(alpha.to_vec());
        trace.z.push(z.to_vec());
        trace.predicted.push(argmax(&logits));
        trace.targets.push(target);
        caches.push(StepCache {
            input,
            target,
            att,
            h_att: ha_new.clone(),
            u,
            alpha,
            mu_t,
            enc,
            logvar,
            var,
            mu_q,
            eps,
            dec,
            probs: logp.mapv(f64::exp),
        });
        (ha, ca, he, ce, hd, cd) = (ha_new, ca_new, he_new, ce_new, hd_new, cd_new);
    }
    Ok((trace, caches))
}

/// Reverse-mode pass for `scale * (sum NLL + kl_weight * sum KL)`,
/// accumulated into `grads`.
pub(crate) fn backward(
    p: &ModelParameters,
    prior: &Prior,
    image: &ImageContext,
    caches: &[StepCache],
    kl_weight: f64,
    scale: f64,
    grads: &mut ModelParameters,
) {
    let c = &p.config;
    let (hs, zd, d) = (c.hidden_size, c.z_dim, c.feature_dim);
    let sigma_t2 = prior.variance();
    let mut dha_next = Array1::zeros(hs);
    let mut dca_next = Array1::zeros(hs);
    let mut dhe_next = Array1::zeros(hs);
    let mut dce_next = Array1::zeros(hs);
    let mut dhd_next = Array1::zeros(hs);
    let mut dcd_next = Array1::zeros(hs);
    let feats = &image.features;

    for sc in caches.iter().rev() {
        // output layer
        let mut dlogits = sc.probs.clone();
        dlogits[sc.target] -= 1.0;
        dlogits *= scale;
        let h_dec = &sc.dec.h_out();
        add_outer(&mut grads.out_w, &dlogits, h_dec);
        grads.out_b += &dlogits;
        let dhd = tdot(&p.out_w, &dlogits) + &dhd_next;

        let (dxd, dhd_prev, dcd_prev) = lstm_backward(&p.dec_lstm_w, &sc.dec, &dhd, &dcd_next, &mut grads.dec_lstm_w, &mut grads.dec_lstm_b);
        let parts = split(&dxd, &[d, zd, zd, hs]);
        let mut dv_hat = parts[0].clone();
        let dz = &parts[1];
        let mut dmu_t = parts[2].clone();
        let mut dha = &parts[3] + &dha_next;

        // reparameterization and KL
        let w = scale * kl_weight;
        let mut dmu_q = dz.clone();
        let mut dlogvar = Array1::zeros(zd);
        for j in 0..zd {
            let diff = sc.mu_q[j] - sc.mu_t[j];
            dmu_q[j] += w * diff / sigma_t2;
            dmu_t[j] -= w * diff / sigma_t2;
            if sc.logvar[j].exp() > VARIANCE_FLOOR {
                let sd = sc.var[j].sqrt();
                dlogvar[j] = dz[j] * sc.eps[j] * sd / 2.0 + w * (-0.5 + sc.var[j] / (2.0 * sigma_t2));
            }
        }
        let h_enc = sc.enc.h_out();
        add_outer(&mut grads.mu_w, &dmu_q, &h_enc);
        grads.mu_b += &dmu_q;
        add_outer(&mut grads.logvar_w, &dlogvar, &h_enc);
        grads.logvar_b += &dlogvar;
        let dhe = tdot(&p.mu_w, &dmu_q) + tdot(&p.logvar_w, &dlogvar) + &dhe_next;

        let (dxe, dhe_prev, dce_prev) = lstm_backward(&p.enc_lstm_w, &sc.enc, &dhe, &dce_next, &mut grads.enc_lstm_w, &mut grads.enc_lstm_b);
        let parts = split(&dxe, &[d, zd, hs, hs]);
        dv_hat += &parts[0];
        dmu_t += &parts[1];
        dha += &parts[2];
        let mut dhd_prev = dhd_prev + &parts[3];

        // prior mean and attention
        let mut dalpha = feats.dot(&dv_hat);
        dalpha += &prior_mean_backward(prior, image, &sc.alpha, &sc.mu_t, &dmu_t);
        let dot: f64 = sc.alpha.dot(&dalpha);
        let dscores = &sc.alpha * &(dalpha - dot);
        grads.att_w += &tdot(&sc.u, &dscores);
        let mut dpre = Array2::zeros(sc.u.raw_dim());
        for (k, (mut row, urow)) in dpre.rows_mut().into_iter().zip(sc.u.rows()).enumerate() {
            for ((r, &uu), &ww) in row.iter_mut().zip(urow.iter()).zip(p.att_w.iter()) {
                *r = dscores[k] * ww * (1.0 - uu * uu);
            }
        }
        let dpre_sum = dpre.sum_axis(Axis(0));
        add_outer(&mut grads.att_wh, &dpre_sum, &sc.h_att);
        grads.att_b += &dpre_sum;
        grads.att_wv += &dpre.t().dot(feats);
        dha += &tdot(&p.att_wh, &dpre_sum);

        let (dxa, dha_prev, dca_prev) = lstm_backward(&p.att_lstm_w, &sc.att, &dha, &dca_next, &mut grads.att_lstm_w, &mut grads.att_lstm_b);
        let parts = split(&dxa, &[d, hs, c.embed_dim]);
        dhd_prev += &parts[1];
        let mut erow = grads.embed.row_mut(sc.input);
        erow += &parts[2];

        dha_next = dha_prev;
        dca_next = dca_prev;
        dhe_next = dhe_prev;
        dce_next = dce_prev;
        dhd_next = dhd_prev;
        dcd_next = dcd_prev;
    }
}

/// Recurrent state during generation; the encoder is not used.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h_att: Array1<f64>,
    pub c_att: Array1<f64>,
    pub h_dec: Array1<f64>,
    pub c_dec: Array1<f64>,
}

impl DecoderState {
    pub fn zeros(hidden: usize) -> Self {
        DecoderState {
            h_att: Array1::zeros(hidden),
            c_att: Array1::zeros(hidden),
            h_dec: Array1::zeros(hidden),
            c_dec: Array1::zeros(hidden),
        }
    }
}

/// Output of one generation step.
#[derive(Debug, Clone)]
pub struct GenerationStep {
    pub state: DecoderState,
    pub log_probs: Array1<f64>,
    pub alpha: Array1<f64>,
    pub z: Array1<f64>,
}

/// Consumes `input` and returns the next-word log-probabilities, with
/// `z = mu_t + std * noise` drawn around the prior mean.
#[allow(clippy::too_many_arguments)]
pub fn generation_step(
    p: &ModelParameters,
    prior: &Prior,
    image: &ImageContext,
    cluster: Option<SentimentCluster>,
    state: &DecoderState,
    input: usize,
    noise: &[f64],
    std: f64,
) -> Result<GenerationStep> {
    check_dims(p, prior, image)?;
    if noise.len() != p.config.z_dim {
        return Err(Error::LengthMismatch {
            expected: p.config.z_dim,
            actual: noise.len(),
        });
    }
    let e = p.embed.row(input).to_owned();
    let xa = concat(&[image.mean.view(), state.h_dec.view(), e.view()]);
    let (h_att, c_att, _) = lstm_forward(&p.att_lstm_w, &p.att_lstm_b, &xa, &state.h_att, &state.c_att);
    let (alpha, v_hat, _) = attend_cached(p, &h_att, &image.features);
    let mu_t = prior_mean_at(prior, image, &alpha, cluster)?;
    let z: Array1<f64> = mu_t.iter().zip(noise).map(|(m, n)| m + std * n).collect();
    let xd = concat(&[v_hat.view(), z.view(), mu_t.view(), h_att.view()]);
    let (h_dec, c_dec, _) = lstm_forward(&p.dec_lstm_w, &p.dec_lstm_b, &xd, &state.h_dec, &state.c_dec);
    let log_probs = log_softmax(&(p.out_w.dot(&h_dec) + &p.out_b));
    Ok(GenerationStep {
        state: DecoderState { h_att, c_att, h_dec, c_dec },
        log_probs,
        alpha,
        z,
    })
}
