//! LSTM cells and bidirectional encoders on the tape.

use rand::Rng;

use crate::error::Result;
use crate::tensor_core::{uniform, ParameterSet, Tape, Tensor, Var};

pub const INIT_SCALE: f64 = 0.1;

/// Gate rows are ordered input, forget, candidate, output.
pub fn init_lstm(params: &mut ParameterSet, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) {
    params.insert(
        format!("{prefix}.w"),
        uniform(rng, &[4 * hidden, input + hidden], INIT_SCALE),
    );
    let mut b = Tensor::zeros(&[4 * hidden]);
    b.data_mut()[hidden..2 * hidden].fill(1.0);
    params.insert(format!("{prefix}.b"), b);
}

/// Registers `name` as trainable or frozen.
pub fn register<'p>(tape: &mut Tape<'p>, params: &'p ParameterSet, name: &str, trainable: bool) -> Result<Var> {
    if trainable {
        tape.param(params, name)
    } else {
        tape.frozen(params, name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    w: Var,
    b: Var,
    hidden: usize,
}

impl Lstm {
    pub fn register<'p>(tape: &mut Tape<'p>, params: &'p ParameterSet, prefix: &str, trainable: bool) -> Result<Self> {
        let w = register(tape, params, &format!("{prefix}.w"), trainable)?;
        let b = register(tape, params, &format!("{prefix}.b"), trainable)?;
        let hidden = tape.value(b).len() / 4;
        Ok(Lstm { w, b, hidden })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn zero_state(&self, tape: &mut Tape<'_>) -> Result<LstmState> {
        let h = tape.constant(Tensor::zeros(&[self.hidden]))?;
        let c = tape.constant(Tensor::zeros(&[self.hidden]))?;
        Ok(LstmState { h, c })
    }

    pub fn step(&self, tape: &mut Tape<'_>, x: Var, state: LstmState) -> Result<LstmState> {
        let n = self.hidden;
        let xh = tape.concat(&[x, state.h])?;
        let pre = tape.matvec(self.w, xh)?;
        let pre = tape.add(pre, self.b)?;
        let i = tape.slice(pre, 0, n)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice(pre, n, n)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice(pre, 2 * n, n)?;
        let g = tape.tanh(g)?;
        let o = tape.slice(pre, 3 * n, n)?;
        let o = tape.sigmoid(o)?;
        let keep = tape.mul(f, state.c)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c)?;
        let h = tape.mul(o, tc)?;
        Ok(LstmState { h, c })
    }
}

/// Output of a bidirectional pass over a sequence of length `M`.
pub struct BiOutput {
    /// `[fwd_i; bwd_i]` per position.
    pub states: Vec<Var>,
    /// `[fwd_M; bwd_1]`.
    pub summary: Var,
}

pub fn bilstm(tape: &mut Tape<'_>, fwd: &Lstm, bwd: &Lstm, inputs: &[Var]) -> Result<BiOutput> {
    let m = inputs.len();
    let mut forward = Vec::with_capacity(m);
    let mut s = fwd.zero_state(tape)?;
    for &x in inputs {
        s = fwd.step(tape, x, s)?;
        forward.push(s.h);
    }
    let mut backward = vec![forward[0]; m];
    let mut s = bwd.zero_state(tape)?;
    for (i, &x) in inputs.iter().enumerate().rev() {
        s = bwd.step(tape, x, s)?;
        backward[i] = s.h;
    }
    let states = forward
        .iter()
        .zip(&backward)
        .map(|(&f, &b)| tape.concat(&[f, b]))
        .collect::<Result<Vec<_>>>()?;
    let summary = tape.concat(&[forward[m - 1], backward[0]])?;
    Ok(BiOutput { states, summary })
}
