// SPDX-License-Identifier: Apache-2.0

//! One-way relay among `t` parties followed by the decision procedure.
//!
//! Party 1 inserts its share into a fresh `(F_0, F_p)` sketch pair and sends
//! the serialized pair on; every later party deserializes, inserts its own
//! share and forwards. The last party does not send: it runs
//! [`infer_disj`] on the final state.

mod factory;
mod trace;

pub use factory::{AmsKmvFactory, ExactFactory, NoisyFactory, SketchFactory};
pub use trace::{read_trace, replay, write_trace, TRACE_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PromiseInstance;
use crate::oracle::{threshold_offset, ThresholdRule};
use crate::params::Parameters;
use crate::sketch::{FpSketch, Guarantee, Sketch, StreamUpdate};
use crate::vector::FrequencyVector;

/// Per-hop framing: hop number and the two payload lengths, all `u32`.
pub const FRAME_BYTES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchMessage {
    pub hop: u32,
    pub payload_f0: Vec<u8>,
    pub payload_fp: Vec<u8>,
}

impl SketchMessage {
    /// Serialized sketch bits, the quantity the communication bound is about.
    pub fn net_bits(&self) -> u64 {
        8 * (self.payload_f0.len() + self.payload_fp.len()) as u64
    }

    /// Net bits plus framing.
    pub fn gross_bits(&self) -> u64 {
        self.net_bits() + 8 * FRAME_BYTES as u64
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_BYTES + self.payload_f0.len() + self.payload_fp.len());
        out.extend_from_slice(&self.hop.to_le_bytes());
        out.extend_from_slice(&(self.payload_f0.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.payload_fp.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload_f0);
        out.extend_from_slice(&self.payload_fp);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let word = |k: usize| -> Result<u32> {
            bytes
                .get(4 * k..4 * k + 4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
                .ok_or_else(|| Error::corrupt("truncated message frame"))
        };
        let hop = word(0)?;
        let (a, b) = (word(1)? as usize, word(2)? as usize);
        if bytes.len() != FRAME_BYTES + a + b {
            return Err(Error::corrupt("message length does not match its frame"));
        }
        Ok(SketchMessage {
            hop,
            payload_f0: bytes[FRAME_BYTES..FRAME_BYTES + a].to_vec(),
            payload_fp: bytes[FRAME_BYTES + a..].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Disjoint,
    CommonElement(u64),
}

/// What one party sees: its position, its share, and how to build sketches.
pub struct PartyState<'a, F> {
    pub party: u64,
    pub share: &'a FrequencyVector,
    pub factory: &'a F,
}

fn share_updates(share: &FrequencyVector) -> Result<Vec<StreamUpdate>> {
    share
        .iter()
        .map(|(i, c)| StreamUpdate::new(i, c as f64))
        .collect()
}

/// Sketch pair after this party has inserted its share.
fn absorb<F: SketchFactory>(
    state: &PartyState<'_, F>,
    incoming: Option<&SketchMessage>,
) -> Result<(F::F0, F::Fp)> {
    match (state.party, incoming) {
        (1, Some(_)) => return Err(Error::Protocol("party 1 receives no message".into())),
        (r, None) if r != 1 => {
            return Err(Error::Protocol(format!("party {r} expects a message")));
        }
        (r, Some(m)) if u64::from(m.hop) + 1 != r => {
            return Err(Error::Protocol(format!("party {r} got the message of hop {}", m.hop)));
        }
        _ => {}
    }
    let (mut f0, mut fp) = match incoming {
        None => (state.factory.make_f0()?, state.factory.make_fp()?),
        Some(m) => (
            F::F0::from_bytes(&m.payload_f0)?,
            F::Fp::from_bytes(&m.payload_fp)?,
        ),
    };
    let updates = share_updates(state.share)?;
    f0.insert_all(&updates)?;
    fp.insert_all(&updates)?;
    Ok((f0, fp))
}

/// Inserts the party's share and returns the message it forwards.
pub fn party_step<F: SketchFactory>(
    state: &PartyState<'_, F>,
    incoming: Option<&SketchMessage>,
) -> Result<SketchMessage> {
    let (f0, fp) = absorb(state, incoming)?;
    let hop = u32::try_from(state.party)
        .map_err(|_| Error::Protocol(format!("party index {} too large", state.party)))?;
    Ok(SketchMessage {
        hop,
        payload_f0: f0.to_bytes(),
        payload_fp: fp.to_bytes(),
    })
}

/// Runs the relay over all shares. Returns the final sketch pair (held by the
/// last party) and the `t - 1` messages sent.
pub fn relay<F: SketchFactory>(
    factory: &F,
    shares: &[FrequencyVector],
) -> Result<(F::F0, F::Fp, Vec<SketchMessage>)> {
    let Some((last, senders)) = shares.split_last() else {
        return Err(Error::Protocol("no parties".into()));
    };
    let mut messages: Vec<SketchMessage> = Vec::with_capacity(senders.len());
    for (k, share) in senders.iter().enumerate() {
        let state = PartyState {
            party: k as u64 + 1,
            share,
            factory,
        };
        let msg = party_step(&state, messages.last())?;
        messages.push(msg);
    }
    let state = PartyState {
        party: shares.len() as u64,
        share: last,
        factory,
    };
    let (f0, fp) = absorb(&state, messages.last())?;
    Ok((f0, fp, messages))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub decision: Decision,
    /// Indices examined, including ones covered by a prober run.
    pub probe_count: u64,
    pub f0_estimate: f64,
    /// `F_0` estimate plus the rule's offset.
    pub threshold_used: f64,
    pub threshold_offset: f64,
}

/// Probes `i = 1..=n` with weight `n^{1/p}` and returns the first index
/// whose `F_p` estimate reaches the threshold.
pub fn infer_disj<A: Sketch, B: FpSketch>(
    f0: &A,
    fp: &B,
    params: &Parameters,
    rule: ThresholdRule,
) -> Result<Inference> {
    let f0_estimate = f0.estimate();
    let offset = threshold_offset(rule, params);
    let threshold = f0_estimate + offset;
    let prober = fp.prober(params.boost())?;
    let n = params.n();
    let mut probe_count = 0;
    let mut decision = Decision::Disjoint;
    let mut i = 1;
    while i <= n {
        if prober.estimate_at(i)? >= threshold {
            probe_count += 1;
            decision = Decision::CommonElement(i);
            break;
        }
        let end = prober.run_end(i).clamp(i, n);
        probe_count += end - i + 1;
        i = match end.checked_add(1) {
            Some(next) => next,
            None => break,
        };
    }
    Ok(Inference {
        decision,
        probe_count,
        f0_estimate,
        threshold_used: threshold,
        threshold_offset: offset,
    })
}

/// Failure probabilities implied by the sketches' declared guarantees: a
/// union bound over the `n` probes for `F_p` and one `F_0` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceAccount {
    pub fp_failure: f64,
    pub f0_failure: f64,
    /// `(1 - fp_failure)(1 - f0_failure)`.
    pub joint_success: f64,
}

pub fn confidence_account(n: u64, f0: Guarantee, fp: Guarantee) -> ConfidenceAccount {
    let fp_failure = (n as f64 * fp.delta).min(1.0);
    let f0_failure = f0.delta.min(1.0);
    ConfidenceAccount {
        fp_failure,
        f0_failure,
        joint_success: (1.0 - fp_failure) * (1.0 - f0_failure),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub decision: Decision,
    /// Net bits of each of the `t - 1` messages.
    pub per_hop_bits: Vec<u64>,
    pub total_bits: u64,
    pub per_hop_gross_bits: Vec<u64>,
    pub gross_total_bits: u64,
    pub f0_payload_bytes: Vec<usize>,
    pub fp_payload_bytes: Vec<usize>,
    pub probe_count: u64,
    pub f0_estimate: f64,
    pub threshold_used: f64,
    pub threshold_offset: f64,
    pub confidence: ConfidenceAccount,
}

impl ProtocolTranscript {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("transcript JSON: {e}")))
    }
}

/// Full run: relay, then inference by the last party.
pub fn run_protocol<F: SketchFactory>(
    inst: &PromiseInstance,
    factory: &F,
    rule: ThresholdRule,
) -> Result<ProtocolTranscript> {
    run_protocol_traced(inst, factory, rule).map(|(t, _)| t)
}

/// As [`run_protocol`], also returning the relayed messages.
pub fn run_protocol_traced<F: SketchFactory>(
    inst: &PromiseInstance,
    factory: &F,
    rule: ThresholdRule,
) -> Result<(ProtocolTranscript, Vec<SketchMessage>)> {
    let params = inst.params();
    let (f0, fp, messages) = relay(factory, inst.shares())?;
    let inference = infer_disj(&f0, &fp, params, rule)?;
    let per_hop_bits: Vec<u64> = messages.iter().map(SketchMessage::net_bits).collect();
    let per_hop_gross_bits: Vec<u64> = messages.iter().map(SketchMessage::gross_bits).collect();
    let transcript = ProtocolTranscript {
        decision: inference.decision,
        total_bits: per_hop_bits.iter().sum(),
        gross_total_bits: per_hop_gross_bits.iter().sum(),
        per_hop_bits,
        per_hop_gross_bits,
        f0_payload_bytes: messages.iter().map(|m| m.payload_f0.len()).collect(),
        fp_payload_bytes: messages.iter().map(|m| m.payload_fp.len()).collect(),
        probe_count: inference.probe_count,
        f0_estimate: inference.f0_estimate,
        threshold_used: inference.threshold_used,
        threshold_offset: inference.threshold_offset,
        confidence: confidence_account(params.n(), f0.declared(), fp.declared()),
    };
    Ok((transcript, messages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Truth;
    use crate::params::{make_parameters, RegimeMode};
    use crate::sketch::ExactEstimator;

    fn desk_params() -> Parameters {
        make_parameters(4096, 3.0, "9/10".parse().unwrap(), RegimeMode::Relaxed).unwrap()
    }

    fn binary(n: u64, idx: &[u64]) -> FrequencyVector {
        FrequencyVector::indicator(n, idx.iter().copied()).unwrap()
    }

    #[test]
    fn framing_round_trip() {
        let m = SketchMessage {
            hop: 3,
            payload_f0: vec![1, 2, 3],
            payload_fp: vec![9; 10],
        };
        let enc = m.encode();
        assert_eq!(enc.len(), FRAME_BYTES + 13);
        assert_eq!(SketchMessage::decode(&enc).unwrap(), m);
        assert!(SketchMessage::decode(&enc[..enc.len() - 1]).is_err());
        assert_eq!(m.net_bits(), 104);
        assert_eq!(m.gross_bits() - m.net_bits(), 96);
    }

    #[test]
    fn first_party_with_empty_share() {
        let factory = ExactFactory::new(3.0);
        let share = FrequencyVector::zeros(10);
        let state = PartyState {
            party: 1,
            share: &share,
            factory: &factory,
        };
        let msg = party_step(&state, None).unwrap();
        assert_eq!(msg.hop, 1);
        assert_eq!(ExactEstimator::from_bytes(&msg.payload_f0).unwrap().estimate(), 0.0);
        assert_eq!(ExactEstimator::from_bytes(&msg.payload_fp).unwrap().estimate(), 0.0);
    }

    #[test]
    fn message_presence_is_checked() {
        let factory = ExactFactory::new(3.0);
        let share = binary(10, &[1]);
        let first = PartyState {
            party: 1,
            share: &share,
            factory: &factory,
        };
        let msg = party_step(&first, None).unwrap();
        assert!(matches!(party_step(&first, Some(&msg)), Err(Error::Protocol(_))));
        let third = PartyState {
            party: 3,
            share: &share,
            factory: &factory,
        };
        assert!(matches!(party_step(&third, None), Err(Error::Protocol(_))));
        assert!(matches!(party_step(&third, Some(&msg)), Err(Error::Protocol(_))));
    }

    #[test]
    fn distinct_count_grows_by_disjoint_share() {
        let factory = ExactFactory::new(3.0);
        let a = binary(20, &[1, 2, 3]);
        let b = binary(20, &[7, 8]);
        let m1 = party_step(
            &PartyState {
                party: 1,
                share: &a,
                factory: &factory,
            },
            None,
        )
        .unwrap();
        let m2 = party_step(
            &PartyState {
                party: 2,
                share: &b,
                factory: &factory,
            },
            Some(&m1),
        )
        .unwrap();
        let before = ExactEstimator::from_bytes(&m1.payload_f0).unwrap().estimate();
        let after = ExactEstimator::from_bytes(&m2.payload_f0).unwrap().estimate();
        assert_eq!(after - before, 2.0);
    }

    #[test]
    fn exact_two_party_run() {
        let params = make_parameters(4096, 3.0, "9/10".parse().unwrap(), RegimeMode::Relaxed)
            .unwrap();
        let params = Parameters::with_forced_parties(params.n(), 3.0, params.eps(), 2).unwrap();
        let shares = vec![binary(4096, &[7, 100]), binary(4096, &[7, 200])];
        let inst = PromiseInstance::new(params, shares, Truth::CommonElement(7)).unwrap();
        let tr = run_protocol(&inst, &ExactFactory::new(3.0), ThresholdRule::MidGap).unwrap();
        assert_eq!(tr.decision, Decision::CommonElement(7));
        assert_eq!(tr.per_hop_bits.len(), 1);
        assert_eq!(tr.probe_count, 7);
        let again = run_protocol(&inst, &ExactFactory::new(3.0), ThresholdRule::MidGap).unwrap();
        assert_eq!(tr.to_json(), again.to_json());
        assert_eq!(ProtocolTranscript::from_json(&tr.to_json()).unwrap(), tr);
    }

    #[test]
    fn disjoint_run_examines_every_index() {
        let params = desk_params();
        let shares = vec![binary(4096, &[1, 5]), binary(4096, &[2]), binary(4096, &[4096])];
        let inst = PromiseInstance::new(params, shares, Truth::Disjoint).unwrap();
        let tr = run_protocol(&inst, &ExactFactory::new(3.0), ThresholdRule::MidGap).unwrap();
        assert_eq!(tr.decision, Decision::Disjoint);
        assert_eq!(tr.probe_count, 4096);
        assert_eq!(tr.total_bits, tr.per_hop_bits.iter().sum::<u64>());
    }

    #[test]
    fn confidence_arithmetic() {
        let g = |delta| Guarantee { eps: 0.1, delta };
        let acc = confidence_account(4096, g(1.0 / 20.0), g(1.0 / (20.0 * 4096.0)));
        assert!((acc.fp_failure - 0.05).abs() < 1e-15);
        let failure = 1.0 - acc.joint_success;
        assert!((failure - (2.0 / 20.0 - 1.0 / 400.0)).abs() < 1e-15);
        assert!(acc.joint_success > 0.9);
    }
}
