use rand::Rng;

use super::ModelConfig;
use crate::numerics::Array;
use crate::rng::SeedStream;

/// Weights of one encoder layer: multi-head attention followed by a
/// position-wise feed-forward block, each with residual and layer norm.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub wq: T,
    pub bq: T,
    pub wk: T,
    pub bk: T,
    pub wv: T,
    pub bv: T,
    pub wo: T,
    pub bo: T,
    pub ln1_g: T,
    pub ln1_b: T,
    pub ff_w1: T,
    pub ff_b1: T,
    pub ff_w2: T,
    pub ff_b2: T,
    pub ln2_g: T,
    pub ln2_b: T,
}

/// Every learnable array of the model. Generic so the same layout serves
/// stored arrays (`Weights<Array>`), tape handles and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    /// V x d
    pub type_emb: T,
    /// (n_players + 1) x d, row 0 is the unknown player
    pub player_emb: T,
    /// 2 x d projection of the normalized landing point
    pub area_w: T,
    pub area_b: T,
    /// 2 x d projection of the normalized hitter location
    pub loc_w: T,
    pub loc_b: T,
    /// 2d x d merge of the shot and area channels
    pub input_w: T,
    pub input_b: T,
    pub layers: Vec<LayerWeights<T>>,
    /// 3d x d gate over [rally ctx | player ctx | position]
    pub gate_w: T,
    pub gate_b: T,
    pub type_head_w: T,
    pub type_head_b: T,
    /// d x 5: mu_x, mu_y, log sigma_x, log sigma_y, pre-tanh rho
    pub area_head_w: T,
    pub area_head_b: T,
}

pub type ModelParams = Weights<Array>;

impl<T> LayerWeights<T> {
    fn try_map<'a, U, E>(
        &'a self,
        prefix: &str,
        f: &mut impl FnMut(&str, &'a T) -> Result<U, E>,
    ) -> Result<LayerWeights<U>, E> {
        let mut g = |name: &str, v: &'a T| f(&format!("{prefix}.{name}"), v);
        Ok(LayerWeights {
            wq: g("wq", &self.wq)?,
            bq: g("bq", &self.bq)?,
            wk: g("wk", &self.wk)?,
            bk: g("bk", &self.bk)?,
            wv: g("wv", &self.wv)?,
            bv: g("bv", &self.bv)?,
            wo: g("wo", &self.wo)?,
            bo: g("bo", &self.bo)?,
            ln1_g: g("ln1_g", &self.ln1_g)?,
            ln1_b: g("ln1_b", &self.ln1_b)?,
            ff_w1: g("ff_w1", &self.ff_w1)?,
            ff_b1: g("ff_b1", &self.ff_b1)?,
            ff_w2: g("ff_w2", &self.ff_w2)?,
            ff_b2: g("ff_b2", &self.ff_b2)?,
            ln2_g: g("ln2_g", &self.ln2_g)?,
            ln2_b: g("ln2_b", &self.ln2_b)?,
        })
    }

    fn for_each_mut(&mut self, prefix: &str, f: &mut impl FnMut(&str, &mut T)) {
        let mut g = |name: &str, v: &mut T| f(&format!("{prefix}.{name}"), v);
        g("wq", &mut self.wq);
        g("bq", &mut self.bq);
        g("wk", &mut self.wk);
        g("bk", &mut self.bk);
        g("wv", &mut self.wv);
        g("bv", &mut self.bv);
        g("wo", &mut self.wo);
        g("bo", &mut self.bo);
        g("ln1_g", &mut self.ln1_g);
        g("ln1_b", &mut self.ln1_b);
        g("ff_w1", &mut self.ff_w1);
        g("ff_b1", &mut self.ff_b1);
        g("ff_w2", &mut self.ff_w2);
        g("ff_b2", &mut self.ff_b2);
        g("ln2_g", &mut self.ln2_g);
        g("ln2_b", &mut self.ln2_b);
    }
}

impl<T> Weights<T> {
    /// Builds a parallel structure field by field, in canonical order.
    pub fn try_map<'a, U, E>(
        &'a self,
        mut f: impl FnMut(&str, &'a T) -> Result<U, E>,
    ) -> Result<Weights<U>, E> {
        Ok(Weights {
            type_emb: f("type_emb", &self.type_emb)?,
            player_emb: f("player_emb", &self.player_emb)?,
            area_w: f("area_w", &self.area_w)?,
            area_b: f("area_b", &self.area_b)?,
            loc_w: f("loc_w", &self.loc_w)?,
            loc_b: f("loc_b", &self.loc_b)?,
            input_w: f("input_w", &self.input_w)?,
            input_b: f("input_b", &self.input_b)?,
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.try_map(&format!("layer{i}"), &mut f))
                .collect::<Result<_, E>>()?,
            gate_w: f("gate_w", &self.gate_w)?,
            gate_b: f("gate_b", &self.gate_b)?,
            type_head_w: f("type_head_w", &self.type_head_w)?,
            type_head_b: f("type_head_b", &self.type_head_b)?,
            area_head_w: f("area_head_w", &self.area_head_w)?,
            area_head_b: f("area_head_b", &self.area_head_b)?,
        })
    }

    pub fn map<'a, U>(&'a self, mut f: impl FnMut(&str, &'a T) -> U) -> Weights<U> {
        self.try_map(|n, v| Ok::<_, std::convert::Infallible>(f(n, v)))
            .unwrap_or_else(|e| match e {})
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut T)) {
        f("type_emb", &mut self.type_emb);
        f("player_emb", &mut self.player_emb);
        f("area_w", &mut self.area_w);
        f("area_b", &mut self.area_b);
        f("loc_w", &mut self.loc_w);
        f("loc_b", &mut self.loc_b);
        f("input_w", &mut self.input_w);
        f("input_b", &mut self.input_b);
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.for_each_mut(&format!("layer{i}"), &mut f);
        }
        f("gate_w", &mut self.gate_w);
        f("gate_b", &mut self.gate_b);
        f("type_head_w", &mut self.type_head_w);
        f("type_head_b", &mut self.type_head_b);
        f("area_head_w", &mut self.area_head_w);
        f("area_head_b", &mut self.area_head_b);
    }

    /// `(name, value)` pairs in canonical order.
    pub fn entries(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        self.map(|n, v| out.push((n.to_string(), v)));
        out
    }
}

impl Weights<Array> {
    /// Expected shape of every array for `config`, in canonical order.
    pub fn shapes(config: &ModelConfig) -> Weights<Vec<usize>> {
        let d = config.embed_dim;
        let f = config.ffn_dim;
        let layer = LayerWeights {
            wq: vec![d, d],
            bq: vec![1, d],
            wk: vec![d, d],
            bk: vec![1, d],
            wv: vec![d, d],
            bv: vec![1, d],
            wo: vec![d, d],
            bo: vec![1, d],
            ln1_g: vec![1, d],
            ln1_b: vec![1, d],
            ff_w1: vec![d, f],
            ff_b1: vec![1, f],
            ff_w2: vec![f, d],
            ff_b2: vec![1, d],
            ln2_g: vec![1, d],
            ln2_b: vec![1, d],
        };
        Weights {
            type_emb: vec![config.vocab_size, d],
            player_emb: vec![config.n_players + 1, d],
            area_w: vec![2, d],
            area_b: vec![1, d],
            loc_w: vec![2, d],
            loc_b: vec![1, d],
            input_w: vec![2 * d, d],
            input_b: vec![1, d],
            layers: vec![layer; config.n_layers],
            gate_w: vec![3 * d, d],
            gate_b: vec![1, d],
            type_head_w: vec![d, config.vocab_size],
            type_head_b: vec![1, config.vocab_size],
            area_head_w: vec![d, 5],
            area_head_b: vec![1, 5],
        }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        Self::shapes(config).map(|_, s| Array::zeros(s))
    }

    /// Glorot-uniform matrices, uniform(-0.3, 0.3) embeddings, zero biases and
    /// unit layer-norm gains.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let root = SeedStream::new(seed).child(0x1417);
        let mut idx = 0u64;
        Self::shapes(config).map(|name, shape| {
            idx += 1;
            let mut rng = root.child(idx).rng();
            let n: usize = shape.iter().product();
            let leaf = name.rsplit('.').next().unwrap_or(name);
            let data: Vec<f64> = if leaf.ends_with("_g") {
                vec![1.0; n]
            } else if leaf.contains("_b") || leaf.starts_with('b') {
                vec![0.0; n]
            } else if leaf.ends_with("_emb") {
                (0..n)
                    .map(|_| 0.3 * (2.0 * rng.random::<f64>() - 1.0))
                    .collect()
            } else {
                let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                let scale = if leaf == "area_head_w" { 0.1 } else { 1.0 };
                (0..n)
                    .map(|_| scale * bound * (2.0 * rng.random::<f64>() - 1.0))
                    .collect()
            };
            Array::new(shape, data).expect("shape")
        })
    }

    pub fn n_values(&self) -> usize {
        self.entries().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|(_, a)| a.is_finite())
    }

    /// Checks that every array has the shape `config` requires.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<(), String> {
        let want = Self::shapes(config);
        if want.layers.len() != self.layers.len() {
            return Err(format!(
                "expected {} layers, found {}",
                want.layers.len(),
                self.layers.len()
            ));
        }
        for ((name, a), (_, s)) in self.entries().into_iter().zip(want.entries()) {
            if a.shape() != s.as_slice() {
                return Err(format!(
                    "{name}: expected shape {s:?}, found {:?}",
                    a.shape()
                ));
            }
        }
        Ok(())
    }
}
