// SPDX-License-Identifier: Apache-2.0

//! Multiparty set disjointness solved through streaming `F_p` estimation.
//!
//! `t` players each hold a subset of `[n]`. Either the subsets are pairwise
//! disjoint, or exactly one index lies in all of them. Players relay an
//! `F_0` sketch and an `F_p` sketch of their concatenated indicator vectors;
//! the last player probes every index with weight `n^{1/p}` and reports the
//! first index whose `F_p` estimate clears a threshold derived from `F_0`.
//!
//! * [`params`]: parameter derivation and regime checks.
//! * [`oracle`]: exact moments and the case / decision inequalities.
//! * [`instance`]: promise instances and their generator.
//! * [`sketch`]: exact, noisy, KMV and AMS estimators.
//! * [`protocol`]: the one-way relay and the decision procedure.

pub mod error;
pub mod instance;
pub mod oracle;
pub mod params;
pub mod protocol;
pub mod sketch;
mod util;
pub mod vector;

pub use error::{Error, Result};
pub use instance::{gen_instance, CaseLabel, PromiseInstance, Truth};
pub use params::{make_parameters, Epsilon, Parameters, RegimeMode, RegimeViolation};
pub use vector::FrequencyVector;
