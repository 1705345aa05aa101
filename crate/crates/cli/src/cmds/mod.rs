pub mod attack;
pub mod eval;
pub mod gen;
pub mod synth;
pub mod train;
