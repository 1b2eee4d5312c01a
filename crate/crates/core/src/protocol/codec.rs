//! Symmetric fixed-point encoding of real centroids as bounded integers.

use super::ProtocolError;

/// What to do when a scaled value does not fit in `[-B_slot, B_slot]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverflowPolicy {
    /// Clamp to the bound and report the event.
    Saturate,
    /// Fail with `PlaintextBoundExceeded`.
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointCodec {
    fractional_bits: u32,
    slot_bound: u64,
    policy: OverflowPolicy,
}

pub const DEFAULT_FRACTIONAL_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    pub value: i64,
    pub saturated: bool,
}

impl FixedPointCodec {
    pub fn new(
        fractional_bits: u32,
        slot_bound: u64,
        policy: OverflowPolicy,
    ) -> Result<Self, ProtocolError> {
        if fractional_bits > 52 {
            return Err(ProtocolError::InvalidArgument(format!(
                "at most 52 fractional bits, got {fractional_bits}"
            )));
        }
        if slot_bound == 0 || slot_bound > i64::MAX as u64 {
            return Err(ProtocolError::InvalidArgument(format!(
                "slot bound {slot_bound} out of range"
            )));
        }
        Ok(Self {
            fractional_bits,
            slot_bound,
            policy,
        })
    }

    pub fn fractional_bits(&self) -> u32 {
        self.fractional_bits
    }

    pub fn slot_bound(&self) -> u64 {
        self.slot_bound
    }

    pub fn policy(&self) -> OverflowPolicy {
        self.policy
    }

    pub fn with_policy(mut self, policy: OverflowPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn unit(&self) -> f64 {
        (1u64 << self.fractional_bits) as f64
    }

    /// `round(value · scale · 2^q)`, bounded by `B_slot`.
    pub fn quantize(&self, value: f64, scale: u64) -> Result<Quantized, ProtocolError> {
        if !value.is_finite() {
            return Err(ProtocolError::InvalidArgument(format!(
                "cannot quantize {value}"
            )));
        }
        let scaled = (value * scale as f64 * self.unit()).round();
        let bound = self.slot_bound as f64;
        if scaled.abs() <= bound {
            return Ok(Quantized {
                value: scaled as i64,
                saturated: false,
            });
        }
        match self.policy {
            OverflowPolicy::Saturate => Ok(Quantized {
                value: (self.slot_bound as i64) * scaled.signum() as i64,
                saturated: true,
            }),
            OverflowPolicy::Error => Err(ProtocolError::PlaintextBoundExceeded(format!(
                "{value} × {scale} × 2^{} exceeds {}",
                self.fractional_bits, self.slot_bound
            ))),
        }
    }

    pub fn dequantize(&self, x: i64) -> f64 {
        x as f64 / self.unit()
    }

    /// Largest `|value|` that encodes without saturation at `scale`.
    pub fn max_representable(&self, scale: u64) -> f64 {
        self.slot_bound as f64 / (scale.max(1) as f64 * self.unit())
    }
}
