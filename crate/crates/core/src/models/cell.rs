//! LSTM and ConvLSTM cells without peephole connections.
//!
//! Both cells compute
//!
//! ```text
//! i = σ(W_ii x + b_ii + W_hi h + b_hi)
//! f = σ(W_if x + b_if + W_hf h + b_hf)
//! o = σ(W_io x + b_io + W_ho h + b_ho)
//! g = tanh(W_ig x + b_ig + W_hg h + b_hg)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```
//!
//! where `W x` is a matrix-vector product for the fully connected cell and a
//! same-padded multi-channel convolution for the convolutional one.

use crate::autograd::{Scalar, Tape, Var};
use crate::error::{Error, Result};

/// Gate order used for weight and bias slots: input, forget, output, candidate.
pub const GATES: [&str; 4] = ["i", "f", "o", "g"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Dense,
    Conv,
}

/// Tape handles of one cell's parameters.
///
/// `w[q]` / `b[q]` for `q < 4` act on the input, `w[4 + q]` / `b[4 + q]` on
/// the previous hidden state, with `q` indexing [`GATES`].
#[derive(Debug, Clone, Copy)]
pub struct CellVars {
    pub kind: CellKind,
    pub w: [Var; 8],
    pub b: [Var; 8],
}

fn transform<T: Scalar>(tape: &mut Tape<T>, kind: CellKind, w: Var, b: Var, x: Var) -> Result<Var> {
    match kind {
        CellKind::Dense => {
            let wx = tape.matvec(w, x)?;
            tape.add(wx, b)
        }
        CellKind::Conv => {
            let wx = tape.conv2d(w, x)?;
            tape.channel_bias(wx, b)
        }
    }
}

fn cell_step<T: Scalar>(
    tape: &mut Tape<T>,
    cell: &CellVars,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let mut pre = [x; 4];
    for (q, slot) in pre.iter_mut().enumerate() {
        let from_x = transform(tape, cell.kind, cell.w[q], cell.b[q], x)?;
        let from_h = transform(tape, cell.kind, cell.w[4 + q], cell.b[4 + q], h_prev)?;
        *slot = tape.add(from_x, from_h)?;
    }
    let i = tape.sigmoid(pre[0]);
    let f = tape.sigmoid(pre[1]);
    let o = tape.sigmoid(pre[2]);
    let g = tape.tanh(pre[3]);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// One step of a fully connected LSTM cell: `x: [n_in]`, states `[n_hidden]`.
pub fn lstm_cell_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    cell: &CellVars,
) -> Result<(Var, Var)> {
    if cell.kind != CellKind::Dense {
        return Err(Error::Shape("lstm_cell_step called with convolutional parameters".into()));
    }
    cell_step(tape, cell, x, h_prev, c_prev)
}

/// One step of a convolutional LSTM cell: `x: [c_in, H, W]`, states `[c_hidden, H, W]`.
pub fn convlstm_cell_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    cell: &CellVars,
) -> Result<(Var, Var)> {
    if cell.kind != CellKind::Conv {
        return Err(Error::Shape("convlstm_cell_step called with dense parameters".into()));
    }
    cell_step(tape, cell, x, h_prev, c_prev)
}
