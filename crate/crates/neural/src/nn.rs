use serde::{Deserialize, Serialize};

use crate::{Graph, Init, NeuralError, ParamId, ParamSet, Result, Tensor, Var};

/// LSTM cell with input, forget, candidate and output gates stacked in
/// that order along the rows of each weight matrix.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_size: usize,
    pub hidden_size: usize,
}

impl LstmCell {
    /// Registers `{prefix}.wx`, `{prefix}.wh` and `{prefix}.b`. The forget
    /// gate bias starts at 1.0, other biases at zero.
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        init: &Init,
    ) -> Result<Self> {
        let wx_name = format!("{prefix}.wx");
        let wh_name = format!("{prefix}.wh");
        let w_input = params.add(
            wx_name.clone(),
            init.uniform(&wx_name, vec![4 * hidden_size, input_size]),
        )?;
        let w_hidden = params.add(
            wh_name.clone(),
            init.uniform(&wh_name, vec![4 * hidden_size, hidden_size]),
        )?;
        let mut b = vec![0.0; 4 * hidden_size];
        b[hidden_size..2 * hidden_size].fill(1.0);
        let bias = params.add(format!("{prefix}.b"), Tensor::vector(b))?;
        Ok(LstmCell {
            w_input,
            w_hidden,
            bias,
            input_size,
            hidden_size,
        })
    }

    pub fn from_params(params: &ParamSet, prefix: &str) -> Result<Self> {
        let get = |s: &str| {
            let name = format!("{prefix}.{s}");
            params.id(&name).ok_or(NeuralError::UnknownParam(name))
        };
        let w_input = get("wx")?;
        let w_hidden = get("wh")?;
        let bias = get("b")?;
        let (rows, input_size) = params.get(w_input).dims2();
        Ok(LstmCell {
            w_input,
            w_hidden,
            bias,
            input_size,
            hidden_size: rows / 4,
        })
    }

    /// One step of the standard gated update; returns `(h', c')`.
    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hs = self.hidden_size;
        for (v, want) in [(h, hs), (c, hs)] {
            if g.value(v).len() != want {
                return Err(NeuralError::Shape {
                    op: "lstm_step state",
                    left: vec![want],
                    right: vec![g.value(v).len()],
                });
            }
        }
        let zx = g.affine(self.w_input, x, Some(self.bias))?;
        let zh = g.affine(self.w_hidden, h, None)?;
        let z = g.add(zx, zh)?;
        let i = g.slice(z, 0, hs)?;
        let f = g.slice(z, hs, hs)?;
        let u = g.slice(z, 2 * hs, hs)?;
        let o = g.slice(z, 3 * hs, hs)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let u = g.tanh(u);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, u)?;
        let c_new = g.add(keep, write)?;
        let tc = g.tanh(c_new);
        let h_new = g.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    pub fn zero_state(&self, g: &mut Graph) -> (Var, Var) {
        let h = g.input(vec![0.0; self.hidden_size]);
        let c = g.input(vec![0.0; self.hidden_size]);
        (h, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Tanh => g.tanh(x),
            Activation::Relu => g.relu(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }
}

/// Feed-forward stack of affine layers, each followed by its activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<(ParamId, ParamId, Activation)>,
}

impl Mlp {
    /// `sizes` lists input size then each layer's output size;
    /// `activations` has one entry per layer.
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        sizes: &[usize],
        activations: &[Activation],
        init: &Init,
    ) -> Result<Self> {
        if sizes.len() != activations.len() + 1 {
            return Err(NeuralError::Shape {
                op: "mlp layout",
                left: vec![sizes.len()],
                right: vec![activations.len() + 1],
            });
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (l, act) in activations.iter().enumerate() {
            let wn = format!("{prefix}.{l}.w");
            let w = params.add(wn.clone(), init.uniform(&wn, vec![sizes[l + 1], sizes[l]]))?;
            let b = params.add(format!("{prefix}.{l}.b"), Tensor::zeros(vec![sizes[l + 1]]))?;
            layers.push((w, b, *act));
        }
        Ok(Mlp { layers })
    }

    pub fn from_params(params: &ParamSet, prefix: &str, activations: &[Activation]) -> Result<Self> {
        let mut layers = Vec::new();
        for (l, act) in activations.iter().enumerate() {
            let get = |s: &str| {
                let name = format!("{prefix}.{l}.{s}");
                params.id(&name).ok_or(NeuralError::UnknownParam(name))
            };
            layers.push((get("w")?, get("b")?, *act));
        }
        Ok(Mlp { layers })
    }

    pub fn output_size(&self, params: &ParamSet) -> usize {
        self.layers
            .last()
            .map(|(w, _, _)| params.get(*w).dims2().0)
            .unwrap_or(0)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let mut h = x;
        for &(w, b, act) in &self.layers {
            let z = g.affine(w, h, Some(b))?;
            h = act.apply(g, z);
        }
        Ok(h)
    }
}

/// Forward and backward LSTMs plus an output projection.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
    pub projection: Mlp,
}

impl BiLstm {
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        output_size: usize,
        init: &Init,
    ) -> Result<Self> {
        let forward = LstmCell::new(params, &format!("{prefix}.fwd"), input_size, hidden_size, init)?;
        let backward = LstmCell::new(params, &format!("{prefix}.bwd"), input_size, hidden_size, init)?;
        let projection = Mlp::new(
            params,
            &format!("{prefix}.proj"),
            &[2 * hidden_size, output_size],
            &[Activation::Tanh],
            init,
        )?;
        Ok(BiLstm {
            forward,
            backward,
            projection,
        })
    }

    pub fn from_params(params: &ParamSet, prefix: &str) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmCell::from_params(params, &format!("{prefix}.fwd"))?,
            backward: LstmCell::from_params(params, &format!("{prefix}.bwd"))?,
            projection: Mlp::from_params(params, &format!("{prefix}.proj"), &[Activation::Tanh])?,
        })
    }

    pub fn encode(&self, g: &mut Graph, seq: &[Var]) -> Result<Var> {
        bilstm_encode(g, seq, &self.forward, &self.backward, &self.projection)
    }
}

/// Runs `fwd` left to right and `bwd` right to left over `seq` from zero
/// states, then projects the concatenation of the two final hidden states.
pub fn bilstm_encode(
    g: &mut Graph,
    seq: &[Var],
    fwd: &LstmCell,
    bwd: &LstmCell,
    proj: &Mlp,
) -> Result<Var> {
    if seq.is_empty() {
        return Err(NeuralError::EmptyInput("bilstm_encode"));
    }
    let (mut hf, mut cf) = fwd.zero_state(g);
    for &x in seq {
        (hf, cf) = fwd.step(g, x, hf, cf)?;
    }
    let (mut hb, mut cb) = bwd.zero_state(g);
    for &x in seq.iter().rev() {
        (hb, cb) = bwd.step(g, x, hb, cb)?;
    }
    let both = g.concat(&[hf, hb]);
    proj.forward(g, both)
}
