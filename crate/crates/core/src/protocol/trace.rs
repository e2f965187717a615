// SPDX-License-Identifier: Apache-2.0

//! Binary trace of the relayed messages, for replaying the final inference.
//!
//! Layout (little-endian): `"FPTR"`, version byte, `u32` hop count, then per
//! hop `u32` hop number, `u64` length and bytes of the `F_0` payload, `u64`
//! length and bytes of the `F_p` payload.

use super::{absorb, infer_disj, Inference, PartyState, SketchFactory, SketchMessage};
use crate::error::{Error, Result};
use crate::instance::PromiseInstance;
use crate::oracle::ThresholdRule;
use crate::sketch::codec::{Decoder, Encoder};

pub const TRACE_MAGIC: &[u8; 4] = b"FPTR";
const VERSION: u8 = 1;

pub fn write_trace(messages: &[SketchMessage]) -> Vec<u8> {
    let size: usize = messages
        .iter()
        .map(|m| 20 + m.payload_f0.len() + m.payload_fp.len())
        .sum();
    let mut enc = Encoder::new(TRACE_MAGIC, VERSION, 9 + size);
    enc.u32(messages.len() as u32);
    for m in messages {
        enc.u32(m.hop)
            .u64(m.payload_f0.len() as u64)
            .bytes(&m.payload_f0)
            .u64(m.payload_fp.len() as u64)
            .bytes(&m.payload_fp);
    }
    enc.finish()
}

pub fn read_trace(bytes: &[u8]) -> Result<Vec<SketchMessage>> {
    let mut dec = Decoder::new(bytes, TRACE_MAGIC, VERSION)?;
    let count = dec.u32()?;
    let mut messages = Vec::new();
    for _ in 0..count {
        let hop = dec.u32()?;
        let a = dec.u64()?;
        let payload_f0 = dec.bytes(usize::try_from(a).map_err(|_| Error::corrupt("huge payload"))?)?;
        let payload_f0 = payload_f0.to_vec();
        let b = dec.u64()?;
        let payload_fp = dec.bytes(usize::try_from(b).map_err(|_| Error::corrupt("huge payload"))?)?;
        messages.push(SketchMessage {
            hop,
            payload_f0,
            payload_fp: payload_fp.to_vec(),
        });
    }
    dec.finish()?;
    if messages.iter().enumerate().any(|(k, m)| m.hop as usize != k + 1) {
        return Err(Error::corrupt("trace hops are not 1, 2, ..."));
    }
    Ok(messages)
}

/// Recomputes the last party's inference from a recorded relay.
pub fn replay<F: SketchFactory>(
    inst: &PromiseInstance,
    messages: &[SketchMessage],
    factory: &F,
    rule: ThresholdRule,
) -> Result<Inference> {
    let shares = inst.shares();
    if messages.len() + 1 != shares.len() {
        return Err(Error::Protocol(format!(
            "trace has {} hops for {} parties",
            messages.len(),
            shares.len()
        )));
    }
    let state = PartyState {
        party: shares.len() as u64,
        share: &shares[shares.len() - 1],
        factory,
    };
    let (f0, fp) = absorb(&state, messages.last())?;
    infer_disj(&f0, &fp, inst.params(), rule)
}
