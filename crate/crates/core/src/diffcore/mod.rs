//! Dense reverse-mode differentiation and the layers the rewriters use.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tape;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{additive_attention, Attended, Attention, Blstm, Lstm, LstmState};
pub use params::{Adam, Init, ParamId, ParamStore};
pub use tape::{Tape, Var};
