// SPDX-License-Identifier: Apache-2.0

//! Benchmarks only; see `benches/kernels.rs`.
