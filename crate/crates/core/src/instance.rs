// SPDX-License-Identifier: Apache-2.0

//! Promise instances of t-party set disjointness: either the sets are
//! pairwise disjoint, or they share exactly one common element.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{make_parameters, Epsilon, Parameters, RegimeMode};
use crate::vector::FrequencyVector;

/// Default fraction of the domain covered by the union of the shares.
pub const DEFAULT_DENSITY: f64 = 0.25;

/// Ground truth of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Disjoint,
    CommonElement(u64),
}

/// Which promise case to generate; the common index is drawn by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    Disjoint,
    CommonElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromiseInstance {
    params: Parameters,
    shares: Vec<FrequencyVector>,
    truth: Truth,
}

impl PromiseInstance {
    /// Validates the promise before constructing.
    pub fn new(params: Parameters, shares: Vec<FrequencyVector>, truth: Truth) -> Result<Self> {
        if shares.len() as u64 != params.t() {
            return Err(Error::invalid(format!(
                "expected {} shares, got {}",
                params.t(),
                shares.len()
            )));
        }
        for (r, share) in shares.iter().enumerate() {
            if share.dim() != params.n() {
                return Err(Error::invalid(format!(
                    "share {} has dimension {} (n = {})",
                    r + 1,
                    share.dim(),
                    params.n()
                )));
            }
            if !share.is_binary() {
                return Err(Error::invalid(format!("share {} is not a 0/1 vector", r + 1)));
            }
        }
        let inst = PromiseInstance {
            params,
            shares,
            truth,
        };
        let x = sum_shares(&inst);
        let promise_ok = match truth {
            Truth::Disjoint => x.is_binary(),
            Truth::CommonElement(i) => {
                x.get(i) == inst.params.t() && x.iter().all(|(j, c)| j == i || c == 1)
            }
        };
        if !promise_ok {
            return Err(Error::PromiseViolation(format!(
                "shares do not match truth {truth:?}"
            )));
        }
        Ok(inst)
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn shares(&self) -> &[FrequencyVector] {
        &self.shares
    }

    pub fn truth(&self) -> Truth {
        self.truth
    }

    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument {
            n: self.params.n(),
            p: self.params.p(),
            eps: [self.params.eps().num(), self.params.eps().den()],
            t: self.params.t(),
            mode: self.params.mode(),
            truth: self.truth,
            shares: self
                .shares
                .iter()
                .map(|s| s.support().collect())
                .collect(),
        }
    }

    pub fn from_document(doc: &InstanceDocument) -> Result<Self> {
        let eps = Epsilon::new(doc.eps[0], doc.eps[1])?;
        let params = match make_parameters(doc.n, doc.p, eps, doc.mode) {
            Ok(params) if params.t() == doc.t => params,
            _ if doc.mode == RegimeMode::Relaxed => {
                Parameters::with_forced_parties(doc.n, doc.p, eps, doc.t)?
            }
            Ok(params) => {
                return Err(Error::invalid(format!(
                    "document t = {} disagrees with derived t = {}",
                    doc.t,
                    params.t()
                )))
            }
            Err(e) => return Err(e),
        };
        let shares = doc
            .shares
            .iter()
            .map(|s| FrequencyVector::indicator(doc.n, s.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        PromiseInstance::new(params, shares, doc.truth)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("instance document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: InstanceDocument = serde_json::from_str(s)
            .map_err(|e| Error::invalid(format!("instance JSON: {e}")))?;
        Self::from_document(&doc)
    }
}

/// JSON form of an instance; shares are sorted index arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub n: u64,
    pub p: f64,
    pub eps: [u64; 2],
    pub t: u64,
    pub mode: RegimeMode,
    pub truth: Truth,
    pub shares: Vec<Vec<u64>>,
}

/// Draws a random promise instance.
///
/// Every share gets `floor(density * n / t)` private indices, placed
/// uniformly at random and pairwise disjoint. In the common-element case a
/// uniformly chosen index outside the private sets is added to every share.
pub fn gen_instance<R: Rng + ?Sized>(
    params: &Parameters,
    label: CaseLabel,
    density: f64,
    rng: &mut R,
) -> Result<PromiseInstance> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!("density {density} must lie in (0, 1]")));
    }
    let n = params.n();
    let t = params.t();
    let per_share = (density * n as f64 / t as f64).floor() as u64;
    let total = per_share
        .checked_mul(t)
        .ok_or_else(|| Error::invalid("share sizes overflow"))?;

    let (common, pool) = match label {
        CaseLabel::Disjoint => (None, n),
        CaseLabel::CommonElement => (Some(rng.gen_range(1..=n)), n - 1),
    };
    if total > pool {
        return Err(Error::invalid(format!(
            "cannot place {t} disjoint sets of size {per_share} in a pool of {pool}"
        )));
    }
    let pool = usize::try_from(pool).map_err(|_| Error::invalid("domain exceeds usize"))?;
    let picks = sample(rng, pool, total as usize).into_vec();

    let to_index = |v: usize| -> u64 {
        let j = v as u64 + 1;
        match common {
            Some(i) if j >= i => j + 1,
            _ => j,
        }
    };
    let k = per_share as usize;
    let shares = (0..t as usize)
        .map(|r| {
            let private = picks[r * k..(r + 1) * k].iter().map(|&v| to_index(v));
            FrequencyVector::indicator(n, private.chain(common))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = match common {
        Some(i) => Truth::CommonElement(i),
        None => Truth::Disjoint,
    };
    PromiseInstance::new(params.clone(), shares, truth)
}

/// `x = x_1 + ... + x_t`.
pub fn sum_shares(inst: &PromiseInstance) -> FrequencyVector {
    let mut x = FrequencyVector::zeros(inst.params.n());
    for share in &inst.shares {
        for (i, c) in share.iter() {
            x.add(i, c).expect("share indices are in range");
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params_64() -> Parameters {
        Parameters::with_forced_parties(64, 3.0, "1/4".parse().unwrap(), 2).unwrap()
    }

    #[test]
    fn disjoint_instance_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = gen_instance(&params_64(), CaseLabel::Disjoint, 0.25, &mut rng).unwrap();
        assert_eq!(inst.truth(), Truth::Disjoint);
        assert_eq!(inst.shares().len(), 2);
        for s in inst.shares() {
            assert_eq!(s.support_size(), 8);
        }
        let x = sum_shares(&inst);
        assert!(x.is_binary());
        assert_eq!(x.support_size(), 16);
    }

    #[test]
    fn common_instance_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = gen_instance(&params_64(), CaseLabel::CommonElement, 0.25, &mut rng).unwrap();
        let Truth::CommonElement(i) = inst.truth() else {
            panic!("wrong truth")
        };
        let x = sum_shares(&inst);
        assert_eq!(x.iter().filter(|&(_, c)| c == 2).count(), 1);
        assert_eq!(x.get(i), 2);
    }

    #[test]
    fn zero_size_shares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = gen_instance(&params_64(), CaseLabel::Disjoint, 0.01, &mut rng).unwrap();
        assert!(inst.shares().iter().all(|s| s.support_size() == 0));
        assert_eq!(sum_shares(&inst).support_size(), 0);

        let inst = gen_instance(&params_64(), CaseLabel::CommonElement, 0.01, &mut rng).unwrap();
        assert!(inst.shares().iter().all(|s| s.support_size() == 1));
    }

    #[test]
    fn density_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(gen_instance(&params_64(), CaseLabel::Disjoint, d, &mut rng).is_err());
        }
        // full density leaves no room for a separate common index when t | n
        assert!(gen_instance(&params_64(), CaseLabel::CommonElement, 1.0, &mut rng).is_err());
        assert!(gen_instance(&params_64(), CaseLabel::Disjoint, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn sums_small_shares() {
        let params = params_64();
        let shares = vec![
            FrequencyVector::unit(64, 1).unwrap(),
            FrequencyVector::unit(64, 2).unwrap(),
        ];
        let inst = PromiseInstance::new(params, shares, Truth::Disjoint).unwrap();
        let x = sum_shares(&inst);
        assert_eq!(x.iter().collect::<Vec<_>>(), vec![(1, 1), (2, 1)]);

        let params = Parameters::with_forced_parties(64, 3.0, "1/4".parse().unwrap(), 3).unwrap();
        let shares = vec![FrequencyVector::unit(64, 5).unwrap(); 3];
        let inst = PromiseInstance::new(params, shares, Truth::CommonElement(5)).unwrap();
        assert_eq!(sum_shares(&inst).get(5), 3);
    }

    #[test]
    fn sum_matches_coordinate_oracle() {
        let params = Parameters::with_forced_parties(4096, 3.0, "9/10".parse().unwrap(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = gen_instance(&params, CaseLabel::CommonElement, 0.25, &mut rng).unwrap();
        let x = sum_shares(&inst);
        for i in 1..=4096u64 {
            let brute: u64 = inst.shares().iter().map(|s| s.get(i)).sum();
            assert_eq!(x.get(i), brute);
        }
    }

    #[test]
    fn rejects_broken_promise() {
        let params = params_64();
        let shares = vec![
            FrequencyVector::indicator(64, [1, 2]).unwrap(),
            FrequencyVector::indicator(64, [1, 2]).unwrap(),
        ];
        assert!(matches!(
            PromiseInstance::new(params.clone(), shares.clone(), Truth::CommonElement(1)),
            Err(Error::PromiseViolation(_))
        ));
        assert!(PromiseInstance::new(params, shares, Truth::Disjoint).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = gen_instance(&params_64(), CaseLabel::CommonElement, 0.25, &mut rng).unwrap();
        let json = inst.to_json();
        assert!(json.contains("\"eps\""));
        let back = PromiseInstance::from_json(&json).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_instance(
            &params_64(),
            CaseLabel::CommonElement,
            0.25,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let b = gen_instance(
            &params_64(),
            CaseLabel::CommonElement,
            0.25,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_instances_keep_promise(seed in any::<u64>(), t in 2u64..6, common in any::<bool>(), density in 0.01f64..0.9) {
            let params = Parameters::with_forced_parties(4096, 3.0, "9/10".parse().unwrap(), t).unwrap();
            let label = if common { CaseLabel::CommonElement } else { CaseLabel::Disjoint };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = gen_instance(&params, label, density, &mut rng).unwrap();
            // revalidate through the checked constructor
            let again = PromiseInstance::new(inst.params().clone(), inst.shares().to_vec(), inst.truth());
            prop_assert!(again.is_ok());
            let x = sum_shares(&inst);
            match inst.truth() {
                Truth::Disjoint => prop_assert!(x.is_binary()),
                Truth::CommonElement(i) => {
                    prop_assert_eq!(x.get(i), t);
                    prop_assert!(x.iter().all(|(j, c)| j == i || c == 1));
                }
            }
        }
    }
}
