//! The collaborative gating fusion network.
//!
//! ```text
//! raw_m --l2--> x_m --W_m,b_m--> p_m --dropout--> h_m
//! o_mn  = G2 relu(G1 [h_m ; h_n] + g1) + g2          (one gating net for all pairs)
//! a_m   = sigmoid(sum_{n != m} o_mn)                 (all ones without partners)
//! fused = sum_m a_m * h_m                            (canonical order t, a, v)
//! probs = softmax(C2 dropout(relu(C1 fused + c1)) + c2)
//! ```

mod backward;
mod forward;
mod params;

pub use backward::{backward, backward_into};
pub use forward::{
    classify, forward, forward_prepared, fuse, gate_modality, loss, mean_loss, pair_gate, prepare, project,
    ForwardCache, ModalityState, PairState, PreparedSample,
};
pub use params::{Block, BlockMut, Dense, FusionParams};

/// Forward-pass mode. Dropout is only applied in training mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Train { dropout: f64 },
    Eval,
}

impl Mode {
    pub(crate) fn dropout(self) -> f64 {
        match self {
            Mode::Train { dropout } => dropout,
            Mode::Eval => 0.0,
        }
    }
}
