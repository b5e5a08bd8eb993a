//! The book chapters as doc comments, so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/words.md")]
pub mod chapter1 {}
#[doc = include_str!("../../../book/src/quotients.md")]
pub mod chapter2 {}
#[doc = include_str!("../../../book/src/arcs.md")]
pub mod chapter3 {}
#[doc = include_str!("../../../book/src/trees.md")]
pub mod chapter4 {}
#[doc = include_str!("../../../book/src/dimension.md")]
pub mod chapter5 {}
#[doc = include_str!("../../../book/src/nonconical.md")]
pub mod chapter6 {}
#[doc = include_str!("../../../book/src/myrberg.md")]
pub mod chapter7 {}
#[doc = include_str!("../../../book/src/floyd.md")]
pub mod chapter8 {}
#[doc = include_str!("../../../book/src/running.md")]
pub mod chapter9 {}
