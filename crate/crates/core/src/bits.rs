//! MSB-first bit packing with Exp-Golomb codes.
//!
//! `ue(v)` writes `v + 1` in binary preceded by as many zero bits as it has
//! bits after the leading one. `se(v)` maps 0, 1, -1, 2, -2, ... onto
//! 0, 1, 2, 3, 4, ... before coding unsigned.

use crate::error::{Error, Result};

/// Longest prefix accepted by the reader; values up to 2^32 - 2.
const MAX_PREFIX: u32 = 32;

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    used: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + self.used as usize
    }

    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.used += 1;
        if self.used == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.used = 0;
        }
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn put_bits(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            self.put_bit((value >> i) & 1 == 1);
        }
    }

    pub fn put_ue(&mut self, v: u32) {
        let x = v as u64 + 1;
        let len = 64 - x.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(x, len);
    }

    pub fn put_se(&mut self, v: i32) {
        self.put_ue(se_to_ue(v));
    }

    /// Pads the last byte with zeros and returns the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.acc <<= 8 - self.used;
            self.bytes.push(self.acc);
        }
        self.bytes
    }
}

#[inline]
pub fn se_to_ue(v: i32) -> u32 {
    if v > 0 {
        (v as u32) * 2 - 1
    } else {
        v.unsigned_abs() * 2
    }
}

#[inline]
pub fn ue_to_se(u: u32) -> i32 {
    if u & 1 == 1 {
        (u / 2 + 1) as i32
    } else {
        -((u / 2) as i64) as i32
    }
}

/// Length in bits of `ue(v)`.
#[inline]
pub fn ue_bits(v: u32) -> u32 {
    let x = v as u64 + 1;
    2 * (63 - x.leading_zeros()) + 1
}

#[inline]
pub fn se_bits(v: i32) -> u32 {
    ue_bits(se_to_ue(v))
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn bit_position(&self) -> usize {
        self.pos
    }

    pub fn get_bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| Error::Decode("bitstream exhausted".into()))?;
        let bit = (byte >> (7 - (self.pos % 8))) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.get_bit()? as u64;
        }
        Ok(v)
    }

    pub fn get_ue(&mut self) -> Result<u32> {
        let mut zeros = 0;
        while !self.get_bit()? {
            zeros += 1;
            if zeros > MAX_PREFIX {
                return Err(Error::Decode("Exp-Golomb prefix too long".into()));
            }
        }
        let rest = self.get_bits(zeros)?;
        let v = ((1u64 << zeros) | rest) - 1;
        u32::try_from(v).map_err(|_| Error::Decode("Exp-Golomb value overflows u32".into()))
    }

    pub fn get_se(&mut self) -> Result<i32> {
        let u = self.get_ue()?;
        Ok(ue_to_se(u))
    }

    /// Requires that only zero padding remains in the final byte and no
    /// bytes follow it.
    pub fn expect_end(&self) -> Result<()> {
        let total = self.bytes.len() * 8;
        if total < self.pos || total - self.pos >= 8 {
            return Err(Error::Decode(format!(
                "{} unread bits after payload",
                total.saturating_sub(self.pos)
            )));
        }
        let mut probe = self.clone();
        while probe.pos < total {
            if probe.get_bit()? {
                return Err(Error::Decode("non-zero padding bits".into()));
            }
        }
        Ok(())
    }
}
