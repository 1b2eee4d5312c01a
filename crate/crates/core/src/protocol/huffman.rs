//! Canonical Huffman coding of a cluster-weight mapping (the filter-free
//! upload variant).
//!
//! Layout: one code-length byte per cluster index `0..κ` (0 = unused), then
//! the codes of `P_0, P_1, …` packed most-significant-bit first and
//! zero-padded to a byte boundary. `d` and `κ` travel in the message header.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::ProtocolError;

pub const MAX_CODE_LENGTH: u8 = 24;

fn code_lengths(freq: &[u64]) -> Vec<u8> {
    let mut freq = freq.to_vec();
    loop {
        let lengths = unlimited_lengths(&freq);
        if lengths.iter().all(|&l| l <= MAX_CODE_LENGTH) {
            return lengths;
        }
        // Flatten the distribution and retry; terminates once all used
        // symbols have weight 1.
        for f in freq.iter_mut().filter(|f| **f > 0) {
            *f = (*f).div_ceil(2);
        }
    }
}

fn unlimited_lengths(freq: &[u64]) -> Vec<u8> {
    let used: Vec<usize> = (0..freq.len()).filter(|&s| freq[s] > 0).collect();
    let mut lengths = vec![0u8; freq.len()];
    match used.len() {
        0 => return lengths,
        1 => {
            lengths[used[0]] = 1;
            return lengths;
        }
        _ => {}
    }
    // Nodes 0..used.len() are leaves; internal nodes are appended.
    let mut parent: Vec<usize> = vec![usize::MAX; used.len()];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = used
        .iter()
        .enumerate()
        .map(|(node, &s)| Reverse((freq[s], node)))
        .collect();
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        let node = parent.len();
        parent.push(usize::MAX);
        parent[a] = node;
        parent[b] = node;
        heap.push(Reverse((wa + wb, node)));
    }
    for (leaf, &s) in used.iter().enumerate() {
        let mut depth = 0u32;
        let mut n = leaf;
        while parent[n] != usize::MAX {
            n = parent[n];
            depth += 1;
        }
        lengths[s] = depth.min(255) as u8;
    }
    lengths
}

/// Canonical codes: symbols sorted by (length, index) receive consecutive
/// codes.
fn canonical_codes(lengths: &[u8]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..lengths.len()).filter(|&s| lengths[s] > 0).collect();
    order.sort_by_key(|&s| (lengths[s], s));
    let mut codes = vec![0u32; lengths.len()];
    let mut code = 0u32;
    let mut prev_len = 0u8;
    for (i, &s) in order.iter().enumerate() {
        if i > 0 {
            code += 1;
        }
        code <<= lengths[s] - prev_len;
        prev_len = lengths[s];
        codes[s] = code;
    }
    codes
}

pub fn encode_mapping(mapping: &[u32], kappa: u32) -> Result<Vec<u8>, ProtocolError> {
    if kappa == 0 || kappa > 1 << 16 {
        return Err(ProtocolError::InvalidArgument(format!("κ = {kappa} out of range")));
    }
    let mut freq = vec![0u64; kappa as usize];
    for &p in mapping {
        *freq.get_mut(p as usize).ok_or_else(|| {
            ProtocolError::InvalidArgument(format!("cluster index {p} not below κ = {kappa}"))
        })? += 1;
    }
    let lengths = code_lengths(&freq);
    let codes = canonical_codes(&lengths);
    let mut out = lengths.clone();
    let mut acc = 0u64;
    let mut nbits = 0u32;
    for &p in mapping {
        let len = u32::from(lengths[p as usize]);
        acc = (acc << len) | u64::from(codes[p as usize]);
        nbits += len;
        while nbits >= 8 {
            nbits -= 8;
            out.push((acc >> nbits) as u8);
        }
        acc &= (1u64 << nbits) - 1;
    }
    if nbits > 0 {
        out.push((acc << (8 - nbits)) as u8);
    }
    Ok(out)
}

pub fn decode_mapping(bytes: &[u8], d: usize, kappa: u32) -> Result<Vec<u32>, ProtocolError> {
    let k = kappa as usize;
    if bytes.len() < k {
        return Err(ProtocolError::Decode("truncated code-length table".into()));
    }
    let lengths = &bytes[..k];
    if lengths.iter().any(|&l| l > MAX_CODE_LENGTH) {
        return Err(ProtocolError::Decode("code length too large".into()));
    }
    let max_len = *lengths.iter().max().unwrap_or(&0) as usize;
    let mut count = vec![0u32; max_len + 1];
    for &l in lengths.iter().filter(|&&l| l > 0) {
        count[l as usize] += 1;
    }
    let mut order: Vec<u32> = (0..kappa).filter(|&s| lengths[s as usize] > 0).collect();
    order.sort_by_key(|&s| (lengths[s as usize], s));
    // first[l]: canonical code of the first symbol of length l;
    // offset[l]: its index in `order`.
    let mut first = vec![0u32; max_len + 1];
    let mut offset = vec![0usize; max_len + 1];
    let mut code = 0u32;
    let mut idx = 0usize;
    for l in 1..=max_len {
        code <<= 1;
        first[l] = code;
        offset[l] = idx;
        code += count[l];
        idx += count[l] as usize;
    }

    let payload = &bytes[k..];
    let total_bits = payload.len() * 8;
    let bit = |i: usize| (payload[i / 8] >> (7 - i % 8)) & 1;
    let mut pos = 0usize;
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let mut code = 0u32;
        let mut len = 0usize;
        loop {
            if pos >= total_bits || len >= max_len {
                return Err(ProtocolError::Decode("invalid or truncated code stream".into()));
            }
            code = (code << 1) | u32::from(bit(pos));
            pos += 1;
            len += 1;
            let rel = code.wrapping_sub(first[len]);
            if code >= first[len] && rel < count[len] {
                out.push(order[offset[len] + rel as usize]);
                break;
            }
        }
    }
    if total_bits - pos >= 8 || (pos..total_bits).any(|i| bit(i) != 0) {
        return Err(ProtocolError::Decode("trailing data after mapping".into()));
    }
    Ok(out)
}
