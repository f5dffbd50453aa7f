//! Hamming(7,4) decoding by loopy belief propagation.

use serde::{Deserialize, Serialize};

use super::build::{build_factors, PARITY};
use super::{HammingSpec, PuzzleError, PuzzleSpec};
use crate::factor::NormMode;
use crate::graph::ltrip;
use crate::inference::{loopy_propagate, ConvergenceConfig, PropagationStats};
use crate::var::VariableId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammingDecode {
    /// Most probable bit per position, `b1..b7`.
    pub codeword: [u8; 7],
    pub message: [u8; 4],
    /// Posterior probability of each decoded bit.
    pub confidence: [f64; 7],
    pub stats: PropagationStats,
}

/// Codeword of a 4-bit message.
pub fn hamming_encode(message: [u8; 4]) -> [u8; 7] {
    let mut out = [0; 7];
    out[..4].copy_from_slice(&message);
    for [p, a, b, c] in PARITY {
        out[p] = out[a] ^ out[b] ^ out[c];
    }
    out
}

/// Sum-product loopy propagation on the LTRIP graph of the three parity
/// factors and seven reduced channel factors.
pub fn decode_hamming(spec: &HammingSpec, config: &ConvergenceConfig) -> Result<HammingDecode, PuzzleError> {
    let model = build_factors::<f64>(&PuzzleSpec::Hamming74(spec.clone()))?;
    let graph = ltrip(model.problem.factors).map_err(|e| PuzzleError::Malformed(e.to_string()))?;
    let config = ConvergenceConfig { mode: NormMode::Sum, ..*config };
    let outcome = loopy_propagate(&graph, &config).map_err(|e| PuzzleError::Malformed(e.to_string()))?;

    let mut codeword = [0; 7];
    let mut confidence = [0.0; 7];
    for i in 0..7 {
        let v = VariableId(i as u32);
        // The channel factor of bit i is cluster 3 + i.
        let belief = &outcome.beliefs[3 + i];
        debug_assert_eq!(belief.scope(), &[v]);
        let p = belief.marginalize(&[v], NormMode::Sum)?.normalize(NormMode::Sum)?;
        let one = p.get(&[1]);
        codeword[i] = u8::from(one > 0.5);
        confidence[i] = one.max(1.0 - one);
    }
    let mut message = [0; 4];
    message.copy_from_slice(&codeword[..4]);
    Ok(HammingDecode { codeword, message, confidence, stats: outcome.stats })
}
