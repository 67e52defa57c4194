//! Chapters of the guide, compiled as doc-tests so their snippets stay in
//! sync with the crate.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/poses.md")]
mod poses {}
#[doc = include_str!("../../../book/src/losses.md")]
mod losses {}
#[doc = include_str!("../../../book/src/lifting.md")]
mod lifting {}
#[doc = include_str!("../../../book/src/temporal.md")]
mod temporal {}
#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
mod diagnostics {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
