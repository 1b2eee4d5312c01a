//! Exact uplink byte accounting.

use std::fmt::Write as _;

use super::RoundMessage;
use crate::dmcfe::PairingCurve;

/// Byte breakdown of one serialized upload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageBytes {
    pub client_id: u32,
    pub ciphertext: usize,
    /// Filter or Huffman-coded mapping.
    pub mapping: usize,
    pub key: usize,
    /// Fixed header plus length prefixes.
    pub header: usize,
}

impl MessageBytes {
    pub fn total(&self) -> usize {
        self.ciphertext + self.mapping + self.key + self.header
    }
}

/// Uplink traffic of one round, compared with a 32-bit-per-weight plaintext
/// upload.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationLedger {
    pub round: u64,
    pub d: usize,
    pub rows: Vec<MessageBytes>,
}

pub const CSV_HEADER: &str =
    "round,client,ct_bytes,filter_bytes,key_bytes,bpp,ratio,header_bytes,total_bytes,ratio_excl_keys";

impl CommunicationLedger {
    pub fn total_bytes(&self) -> usize {
        self.rows.iter().map(MessageBytes::total).sum()
    }

    pub fn key_bytes(&self) -> usize {
        self.rows.iter().map(|r| r.key).sum()
    }

    fn baseline_bits(&self) -> f64 {
        self.d as f64 * 32.0 * self.rows.len() as f64
    }

    /// Uplink bits over `d · 32 · n`, all message bytes included.
    pub fn ratio(&self) -> f64 {
        self.total_bytes() as f64 * 8.0 / self.baseline_bits()
    }

    /// As [`ratio`](Self::ratio) but without the partial-key bytes.
    pub fn ratio_excluding_keys(&self) -> f64 {
        (self.total_bytes() - self.key_bytes()) as f64 * 8.0 / self.baseline_bits()
    }

    /// Mean uplink bits per model parameter per client.
    pub fn bits_per_parameter(&self) -> f64 {
        self.total_bytes() as f64 * 8.0 / (self.d as f64 * self.rows.len() as f64)
    }

    /// One CSV line per client, without the header line.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        let d = self.d as f64;
        for r in &self.rows {
            let total = r.total() as f64;
            writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{},{},{:.6}",
                self.round,
                r.client_id,
                r.ciphertext,
                r.mapping,
                r.key,
                total * 8.0 / d,
                total * 8.0 / (d * 32.0),
                r.header,
                r.total(),
                (total - r.key as f64) * 8.0 / (d * 32.0),
            )
            .unwrap();
        }
        out
    }
}

/// Measures the serialized components of every message.
pub fn account_round<E: PairingCurve>(messages: &[RoundMessage<E>], d: usize) -> CommunicationLedger {
    let rows = messages
        .iter()
        .map(|m| {
            let ct = m.ciphertext.to_bytes().len();
            let key = m.partial_key.to_bytes().len();
            let mapping = m.mapping.bytes().len();
            MessageBytes {
                client_id: m.client_id,
                ciphertext: ct,
                mapping,
                key,
                header: m.encoded_len() - ct - key - mapping,
            }
        })
        .collect();
    CommunicationLedger {
        round: messages.first().map_or(0, |m| m.round),
        d,
        rows,
    }
}
