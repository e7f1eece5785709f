use ndarray::{s, Array1, Array2};
use rand::Rng;

use super::config::ModelConfig;
use crate::{Error, Result};

macro_rules! blocks {
    ($($name:ident: $ty:ident),* $(,)?) => {
        /// All trainable weights. Gradients and momentum buffers reuse this type.
        #[derive(Debug, Clone, PartialEq)]
        pub struct ModelParameters {
            pub config: ModelConfig,
            $(pub $name: $ty<f64>,)*
        }

        impl ModelParameters {
            /// `(name, shape, values)` of every block in a fixed order.
            pub fn blocks(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
                vec![$((stringify!($name), self.$name.shape().to_vec(), self.$name.as_slice().expect("standard layout")),)*]
            }

            pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
                vec![$((stringify!($name), self.$name.as_slice_mut().expect("standard layout")),)*]
            }
        }
    };
}

blocks! {
    embed: Array2,
    att_lstm_w: Array2,
    att_lstm_b: Array1,
    att_wh: Array2,
    att_wv: Array2,
    att_b: Array1,
    att_w: Array1,
    enc_lstm_w: Array2,
    enc_lstm_b: Array1,
    mu_w: Array2,
    mu_b: Array1,
    logvar_w: Array2,
    logvar_b: Array1,
    dec_lstm_w: Array2,
    dec_lstm_b: Array1,
    out_w: Array2,
    out_b: Array1,
}

/// Input widths of the three LSTMs.
pub(crate) struct Widths {
    /// `[mean feature; previous decoder hidden; word embedding]`
    pub attention: usize,
    /// `[attended feature; prior mean; attention hidden; previous decoder hidden]`
    pub encoder: usize,
    /// `[attended feature; z; prior mean; attention hidden]`
    pub decoder: usize,
}

impl Widths {
    pub fn of(c: &ModelConfig) -> Self {
        let (d, h, z, e) = (c.feature_dim, c.hidden_size, c.z_dim, c.embed_dim);
        Widths {
            attention: d + h + e,
            encoder: d + z + 2 * h,
            decoder: d + 2 * z + h,
        }
    }
}

impl ModelParameters {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config;
        let (h, z, v, d) = (c.hidden_size, c.z_dim, c.vocab_size, c.feature_dim);
        let w = Widths::of(c);
        Ok(ModelParameters {
            config: config.clone(),
            embed: Array2::zeros((v, c.embed_dim)),
            att_lstm_w: Array2::zeros((4 * h, w.attention + h)),
            att_lstm_b: Array1::zeros(4 * h),
            att_wh: Array2::zeros((h, h)),
            att_wv: Array2::zeros((h, d)),
            att_b: Array1::zeros(h),
            att_w: Array1::zeros(h),
            enc_lstm_w: Array2::zeros((4 * h, w.encoder + h)),
            enc_lstm_b: Array1::zeros(4 * h),
            mu_w: Array2::zeros((z, h)),
            mu_b: Array1::zeros(z),
            logvar_w: Array2::zeros((z, h)),
            logvar_b: Array1::zeros(z),
            dec_lstm_w: Array2::zeros((4 * h, w.decoder + h)),
            dec_lstm_b: Array1::zeros(4 * h),
            out_w: Array2::zeros((v, h)),
            out_b: Array1::zeros(v),
        })
    }

    /// Weights uniform in (-0.1, 0.1), biases zero except the forget gates at +1.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        for (name, values) in p.blocks_mut() {
            if is_bias(name) {
                continue;
            }
            for x in values.iter_mut() {
                *x = rng.random_range(-0.1..0.1);
            }
        }
        let h = config.hidden_size;
        for b in [&mut p.att_lstm_b, &mut p.enc_lstm_b, &mut p.dec_lstm_b] {
            b.slice_mut(s![h..2 * h]).fill(1.0);
        }
        Ok(p)
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|b| b.2.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.2.iter().all(|x| x.is_finite()))
    }

    pub fn global_norm(&self) -> f64 {
        self.blocks().iter().flat_map(|b| b.2.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for (_, v) in self.blocks_mut() {
            v.iter_mut().for_each(|x| *x *= k);
        }
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, k: f64, other: &ModelParameters) -> Result<()> {
        self.check_same_shape(other)?;
        let src = other.blocks();
        for ((_, dst), (_, _, src)) in self.blocks_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &ModelParameters) -> Result<()> {
        for (a, b) in self.blocks().iter().zip(other.blocks()) {
            if a.1 != b.1 {
                return Err(Error::DimensionMismatch {
                    what: a.0,
                    expected: a.2.len(),
                    actual: b.2.len(),
                });
            }
        }
        Ok(())
    }
}

fn is_bias(name: &str) -> bool {
    name.ends_with("_b")
}
