// Each chapter of the book is included as module documentation so that
// `cargo test -p guide --doc` compiles and runs every Rust snippet in it.
// The modules have no content of their own.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/illumination.md")]
pub mod illumination {}
#[doc = include_str!("../../../book/src/segmentation.md")]
pub mod segmentation {}
#[doc = include_str!("../../../book/src/corners.md")]
pub mod corners {}
#[doc = include_str!("../../../book/src/wlan.md")]
pub mod wlan {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/matching.md")]
pub mod matching {}
#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
