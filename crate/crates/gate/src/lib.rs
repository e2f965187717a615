// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate. The checks live in `tests/acceptance.rs`; this crate sits
//! last in the workspace so that a failing criterion does not stop the other
//! test binaries from running.
