//! Hermite, Laguerre and Krawtchouk families.

pub mod hermite;
pub mod identities;
pub mod krawtchouk;
pub mod laguerre;

pub use hermite::{hermite_eval, hermite_fn, packet_eval};
pub use identities::{hermite_scaling_report, identity_suite, ScalingReport};
pub use krawtchouk::{krawtchouk, krawtchouk_normalized, KrawtchoukTable};
pub use laguerre::{laguerre_eval, laguerre_eval_f64, laguerre_moment, LaguerrePoly};
