//! m-hot message representation.
//!
//! A message index is mapped to an m-subset of the `M` output positions via
//! the lexicographic combinatorial number system; the vector carries `1/m` at
//! every selected position. Only the first `2^⌊log₂ C(M,m)⌋` subsets are used
//! as codewords. With `m = 1` this is the ordinary one-hot representation.

use crate::error::{Error, Result};

/// Exact binomial coefficient, or `None` when it exceeds `i64::MAX`.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc·(n−k+i) is divisible by i at every step
        acc = acc * (n as u128 - k as u128 + i) / i;
        if acc > i64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

fn check_order(vector_size: usize, order: usize) -> Result<()> {
    if vector_size < 2 || order < 1 || order > vector_size / 2 {
        return Err(Error::Domain(format!(
            "order m={order} must satisfy 1 <= m <= floor(M/2) for M={vector_size}"
        )));
    }
    Ok(())
}

fn checked_binomial(vector_size: usize, order: usize) -> Result<u64> {
    binomial(vector_size as u64, order as u64)
        .ok_or_else(|| Error::Overflow(format!("C({vector_size},{order}) exceeds 2^63-1")))
}

/// Number of information bits `⌊log₂ C(M,m)⌋`.
pub fn bits_per_message(vector_size: usize, order: usize) -> Result<u32> {
    check_order(vector_size, order)?;
    Ok(checked_binomial(vector_size, order)?.ilog2())
}

/// `2^⌊log₂ C(M,m)⌋`.
pub fn num_messages(vector_size: usize, order: usize) -> Result<u64> {
    Ok(1u64 << bits_per_message(vector_size, order)?)
}

/// The `index`-th m-subset of `{0..M−1}` in lexicographic order.
pub fn unrank_subset(index: u64, vector_size: usize, order: usize) -> Result<Vec<usize>> {
    let total = checked_binomial(vector_size, order)?;
    if order > vector_size || index >= total {
        return Err(Error::Domain(format!(
            "subset index {index} out of range for C({vector_size},{order}) = {total}"
        )));
    }
    let mut rank = index;
    let mut positions = Vec::with_capacity(order);
    let mut candidate = 0usize;
    for slot in 0..order {
        loop {
            let remaining = (order - slot - 1) as u64;
            let block = binomial((vector_size - candidate - 1) as u64, remaining)
                .expect("bounded by C(M,m)");
            if rank < block {
                break;
            }
            rank -= block;
            candidate += 1;
        }
        positions.push(candidate);
        candidate += 1;
    }
    Ok(positions)
}

/// Inverse of [`unrank_subset`].
pub fn rank_subset(positions: &[usize], vector_size: usize) -> Result<u64> {
    let order = positions.len();
    if order == 0 || order > vector_size {
        return Err(Error::Domain(format!(
            "subset of size {order} is not valid for M={vector_size}"
        )));
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!(
            "positions {positions:?} must be strictly increasing"
        )));
    }
    if positions[order - 1] >= vector_size {
        return Err(Error::Domain(format!(
            "position {} out of range for M={vector_size}",
            positions[order - 1]
        )));
    }
    checked_binomial(vector_size, order)?;
    let mut rank = 0u64;
    let mut start = 0usize;
    for (slot, &p) in positions.iter().enumerate() {
        let remaining = (order - slot - 1) as u64;
        for c in start..p {
            rank += binomial((vector_size - c - 1) as u64, remaining).expect("bounded by C(M,m)");
        }
        start = p + 1;
    }
    Ok(rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoded {
    Message(u64),
    /// The top-m subset is a valid m-subset but lies outside the codebook.
    InvalidCodeword,
}

impl Decoded {
    pub fn message(self) -> Option<u64> {
        match self {
            Decoded::Message(s) => Some(s),
            Decoded::InvalidCodeword => None,
        }
    }
}

/// Message codec for vector size `M`, order `m` and `n` channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GdrCodec {
    vector_size: usize,
    order: usize,
    channel_uses: usize,
    bits: u32,
}

impl GdrCodec {
    pub fn new(vector_size: usize, order: usize, channel_uses: usize) -> Result<Self> {
        if channel_uses == 0 {
            return Err(Error::Domain("channel uses n must be at least 1".into()));
        }
        let bits = bits_per_message(vector_size, order)?;
        Ok(Self {
            vector_size,
            order,
            channel_uses,
            bits,
        })
    }

    /// Conventional one-hot representation (`m = 1`).
    pub fn one_hot(vector_size: usize, channel_uses: usize) -> Result<Self> {
        Self::new(vector_size, 1, channel_uses)
    }

    pub fn vector_size(&self) -> usize {
        self.vector_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn channel_uses(&self) -> usize {
        self.channel_uses
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn num_messages(&self) -> u64 {
        1u64 << self.bits
    }

    /// `⌊log₂ C(M,m)⌋ / n` bits per channel use.
    pub fn data_rate(&self) -> f64 {
        self.bits as f64 / self.channel_uses as f64
    }

    /// Shannon capacity at the noise level this codec's rate implies:
    /// `log₂(1 + 2·(Eb/N0)·⌊log₂ C(M,m)⌋/n)`.
    pub fn capacity(&self, ebn0_linear: f64) -> Result<f64> {
        if !(ebn0_linear.is_finite() && ebn0_linear > 0.0) {
            return Err(Error::Domain(format!(
                "Eb/N0 must be positive and finite, got {ebn0_linear}"
            )));
        }
        Ok((1.0 + 2.0 * ebn0_linear * self.data_rate()).log2())
    }

    pub fn capacity_db(&self, ebn0_db: f64) -> Result<f64> {
        self.capacity(crate::channel::db_to_linear(ebn0_db))
    }

    pub fn subset(&self, message: u64) -> Result<Vec<usize>> {
        self.check_message(message)?;
        unrank_subset(message, self.vector_size, self.order)
    }

    fn check_message(&self, message: u64) -> Result<()> {
        if message >= self.num_messages() {
            return Err(Error::Domain(format!(
                "message {message} out of range: codec has {} messages",
                self.num_messages()
            )));
        }
        Ok(())
    }

    /// Probability vector with `1/m` at the message's subset positions.
    pub fn encode(&self, message: u64) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.vector_size];
        self.encode_into(message, &mut v)?;
        Ok(v)
    }

    pub fn encode_into(&self, message: u64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.vector_size {
            return Err(Error::InvalidInput(format!(
                "encode buffer has {} entries, expected {}",
                out.len(),
                self.vector_size
            )));
        }
        let subset = self.subset(message)?;
        out.fill(0.0);
        let weight = 1.0 / self.order as f64;
        for p in subset {
            out[p] = weight;
        }
        Ok(())
    }

    /// Indices of the `m` largest entries, ties going to the lower index,
    /// returned in increasing order.
    pub fn top_positions(&self, probabilities: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..probabilities.len()).collect();
        idx.sort_by(|&a, &b| {
            probabilities[b]
                .total_cmp(&probabilities[a])
                .then(a.cmp(&b))
        });
        idx.truncate(self.order);
        idx.sort_unstable();
        idx
    }

    pub fn decode(&self, probabilities: &[f64]) -> Result<Decoded> {
        if probabilities.len() != self.vector_size {
            return Err(Error::InvalidInput(format!(
                "decode input has {} entries, expected {}",
                probabilities.len(),
                self.vector_size
            )));
        }
        let rank = rank_subset(&self.top_positions(probabilities), self.vector_size)?;
        Ok(if rank < self.num_messages() {
            Decoded::Message(rank)
        } else {
            Decoded::InvalidCodeword
        })
    }
}
