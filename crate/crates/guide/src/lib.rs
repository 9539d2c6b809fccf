//! The chapters of the `bslab` guide, compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}

#[doc = include_str!("../../../book/src/spheroidal.md")]
pub mod spheroidal {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/forward.md")]
pub mod forward {}

#[doc = include_str!("../../../book/src/estimates.md")]
pub mod estimates {}

#[doc = include_str!("../../../book/src/probe.md")]
pub mod probe {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
