//! Concrete games: Kuhn poker and parameterized Leduc Hold'em.

pub mod kuhn;
pub mod leduc;

pub use kuhn::{Kuhn, KuhnState};
pub use leduc::{Leduc, LeducConfig, LeducState};
