use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};

/// A many-body eigenstate as a bit per normal mode (`1` = occupied).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupationVector {
    words: Vec<u64>,
    len: usize,
}

impl OccupationVector {
    pub fn empty(len: usize) -> Self {
        Self {
            words: alloc::vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut v = Self::empty(len);
        for l in 0..len {
            v.set(l, true);
        }
        v
    }

    /// Occupation with exactly the listed modes filled.
    pub fn from_modes(len: usize, modes: &[usize]) -> Result<Self> {
        let mut v = Self::empty(len);
        for &l in modes {
            if l >= len {
                return Err(Error::IndexOutOfRange { index: l, size: len });
            }
            v.set(l, true);
        }
        Ok(v)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::empty(bits.len());
        for (l, &b) in bits.iter().enumerate() {
            v.set(l, b);
        }
        v
    }

    /// Low `len` bits of `mask`, mode `l` at bit `l`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64);
        let mut v = Self::empty(len);
        if len > 0 {
            v.words[0] = if len == 64 { mask } else { mask & ((1u64 << len) - 1) };
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, l: usize) -> bool {
        debug_assert!(l < self.len);
        (self.words[l / 64] >> (l % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, l: usize, occupied: bool) {
        debug_assert!(l < self.len);
        let bit = 1u64 << (l % 64);
        if occupied {
            self.words[l / 64] |= bit;
        } else {
            self.words[l / 64] &= !bit;
        }
    }

    /// Particle number.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupied mode indices in ascending order.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            core::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    /// `n_l` as `0.0` / `1.0`.
    pub fn as_f64(&self) -> Vec<f64> {
        (0..self.len).map(|l| if self.get(l) { 1.0 } else { 0.0 }).collect()
    }

    /// Lowercase hex, two digits per byte; byte `j` holds modes `8j..8j+8`
    /// with mode `8j + b` at bit `b`.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(2 * self.len.div_ceil(8));
        for j in 0..self.len.div_ceil(8) {
            let byte = (self.words[j / 8] >> (8 * (j % 8))) as u8;
            let _ = write!(out, "{:02x}", byte);
        }
        out
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let bytes = len.div_ceil(8);
        if hex.len() != 2 * bytes {
            return Err(Error::Parse(alloc::format!(
                "expected {} hex digits for {} modes, found {}",
                2 * bytes,
                len,
                hex.len()
            )));
        }
        let mut v = Self::empty(len);
        for j in 0..bytes {
            let pair = &hex[2 * j..2 * j + 2];
            if !pair.bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f')) {
                return Err(Error::Parse(alloc::format!("invalid hex digits {:?}", pair)));
            }
            let byte = u8::from_str_radix(pair, 16).map_err(|e| Error::Parse(alloc::format!("{}", e)))?;
            for b in 0..8 {
                let l = 8 * j + b;
                if (byte >> b) & 1 == 1 {
                    if l >= len {
                        return Err(Error::Parse("bits set beyond the mode count".into()));
                    }
                    v.set(l, true);
                }
            }
        }
        Ok(v)
    }
}
