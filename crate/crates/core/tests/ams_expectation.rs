// SPDX-License-Identifier: Apache-2.0

#[path = "support/ams_oracle.rs"]
mod ams_oracle;

use ams_oracle::{expectation, expectation_matches, moment};
use num::BigRational;
use proptest::prelude::*;

fn check(stream: &[(u64, u64)], p: u32) {
    assert!(expectation_matches(stream, p), "stream {stream:?}, p = {p}, moment {}", moment(stream, p));
}

#[test]
fn single_weighted_arrival() {
    // weight 4 on an empty sketch: expectation 4^3
    let (mean, _) = expectation(&[(1, 4)], 3);
    assert_eq!(mean, BigRational::from_integer(64.into()));
}

#[test]
fn thirty_two_unit_arrivals() {
    let stream: Vec<(u64, u64)> = (0..32).map(|k| (1 + k % 5, 1)).collect();
    check(&stream, 3);
    check(&stream, 4);
}

#[test]
fn long_weighted_blocks() {
    check(&[(1, 16)], 3);
    check(&[(2, 3), (1, 14), (2, 13)], 3);
    check(&[(7, 1), (9, 14), (7, 1), (7, 12)], 4);
}

#[test]
fn probe_shaped_streams() {
    // unit shares followed by one boosted probe, as in the decision procedure
    check(&[(1, 1), (2, 1), (3, 1), (2, 1), (2, 8)], 3);
    check(&[(1, 1), (2, 1), (3, 1), (4, 8)], 3);
    check(&[(5, 1), (5, 1), (6, 1), (5, 16)], 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expectation_is_the_moment(
        raw in proptest::collection::vec((1u64..5, 1u64..9), 1..9),
        p in 1u32..5,
    ) {
        let mut total = 0;
        let stream: Vec<(u64, u64)> = raw
            .into_iter()
            .take_while(|&(_, w)| { total += w; total <= 32 })
            .collect();
        prop_assume!(!stream.is_empty());
        check(&stream, p);
    }
}
