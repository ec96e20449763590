//! Simplified DES: 8-bit blocks, a 10-bit key, two Feistel rounds.
//!
//! Bit strings are numbered from 1 at the leftmost position. Internally a
//! string of `width` bits is packed into an integer with bit 1 as the most
//! significant bit, so `"1010000010"` is `0b1010000010`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CipherError {
    #[error("expected {expected} bits, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("invalid bit character {0:?}; only '0' and '1' are allowed")]
    InvalidDigit(char),
    #[error("value {value:#x} does not fit in {width} bits")]
    OutOfRange { value: u32, width: usize },
}

/// A bit string of up to 16 bits, bit 1 leftmost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bits {
    value: u16,
    width: u8,
}

impl Bits {
    pub fn new(value: u16, width: usize) -> Result<Self, CipherError> {
        if width > 16 || (width < 16 && u32::from(value) >> width != 0) {
            return Err(CipherError::OutOfRange {
                value: value.into(),
                width,
            });
        }
        Ok(Self {
            value,
            width: width as u8,
        })
    }

    pub fn value(self) -> u16 {
        self.value
    }

    pub fn width(self) -> usize {
        self.width as usize
    }

    /// Bit at 1-based `position`, counted from the left.
    pub fn bit(self, position: usize) -> u8 {
        debug_assert!((1..=self.width()).contains(&position));
        ((self.value >> (self.width() - position)) & 1) as u8
    }

    /// Parse an ASCII string of '0'/'1' characters.
    pub fn parse(text: &str) -> Result<Self, CipherError> {
        if text.len() > 16 {
            return Err(CipherError::WidthMismatch {
                expected: 16,
                actual: text.len(),
            });
        }
        let mut value = 0u16;
        for c in text.chars() {
            let digit = match c {
                '0' => 0,
                '1' => 1,
                other => return Err(CipherError::InvalidDigit(other)),
            };
            value = (value << 1) | digit;
        }
        Ok(Self {
            value,
            width: text.len() as u8,
        })
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for position in 1..=self.width() {
            f.write_str(if self.bit(position) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parse a bit string of exactly `width` characters.
fn parse_fixed(text: &str, width: usize) -> Result<u16, CipherError> {
    let bits = Bits::parse(text.trim())?;
    if bits.width() != width {
        return Err(CipherError::WidthMismatch {
            expected: width,
            actual: bits.width(),
        });
    }
    Ok(bits.value())
}

/// The 10-bit secret key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SdesKey(u16);

impl SdesKey {
    pub const BITS: usize = 10;
    /// Number of distinct keys.
    pub const SPACE: usize = 1 << Self::BITS;

    pub fn new(value: u16) -> Result<Self, CipherError> {
        if usize::from(value) >= Self::SPACE {
            return Err(CipherError::OutOfRange {
                value: value.into(),
                width: Self::BITS,
            });
        }
        Ok(Self(value))
    }

    /// Key whose bits, read as a 10-bit integer, equal `index % 1024`.
    pub fn from_index(index: usize) -> Self {
        Self((index % Self::SPACE) as u16)
    }

    pub fn value(self) -> u16 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn bits(self) -> Bits {
        Bits {
            value: self.0,
            width: Self::BITS as u8,
        }
    }

    /// Bit at 1-based `position`, leftmost first.
    pub fn bit(self, position: usize) -> u8 {
        self.bits().bit(position)
    }

    /// The key with bit `position` (1-based) inverted.
    pub fn flip(self, position: usize) -> Self {
        assert!(
            (1..=Self::BITS).contains(&position),
            "bit position {position} out of range"
        );
        Self(self.0 ^ (1 << (Self::BITS - position)))
    }

    pub fn complement(self) -> Self {
        Self(!self.0 & 0x3ff)
    }

    pub fn hamming_distance(self, other: Self) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// All 1024 keys in increasing integer order.
    pub fn all() -> impl Iterator<Item = SdesKey> {
        (0..Self::SPACE as u16).map(SdesKey)
    }
}

impl fmt::Display for SdesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits().fmt(f)
    }
}

impl FromStr for SdesKey {
    type Err = CipherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fixed(s, Self::BITS).map(SdesKey)
    }
}

impl serde::Serialize for SdesKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SdesKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// One 8-bit plaintext or ciphertext unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block(pub u8);

impl Block {
    pub const BITS: usize = 8;

    pub fn bits(self) -> Bits {
        Bits {
            value: self.0.into(),
            width: Self::BITS as u8,
        }
    }

    fn left(self) -> u8 {
        self.0 >> 4
    }

    fn right(self) -> u8 {
        self.0 & 0x0f
    }

    fn from_halves(left: u8, right: u8) -> Self {
        Block((left << 4) | (right & 0x0f))
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits().fmt(f)
    }
}

impl FromStr for Block {
    type Err = CipherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fixed(s, Self::BITS).map(|v| Block(v as u8))
    }
}

/// A bit permutation (or expansion / compression) given as 1-based source
/// positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationTable {
    pub entries: &'static [u8],
    pub input_width: usize,
}

pub const P10: PermutationTable = PermutationTable {
    entries: &[3, 5, 2, 7, 4, 10, 1, 9, 8, 6],
    input_width: 10,
};
pub const P8: PermutationTable = PermutationTable {
    entries: &[6, 3, 7, 4, 8, 5, 10, 9],
    input_width: 10,
};
pub const IP: PermutationTable = PermutationTable {
    entries: &[2, 6, 3, 1, 4, 8, 5, 7],
    input_width: 8,
};
pub const IP_INV: PermutationTable = PermutationTable {
    entries: &[4, 1, 3, 5, 7, 2, 8, 6],
    input_width: 8,
};
pub const EP: PermutationTable = PermutationTable {
    entries: &[4, 1, 2, 3, 2, 3, 4, 1],
    input_width: 4,
};
pub const P4: PermutationTable = PermutationTable {
    entries: &[2, 4, 3, 1],
    input_width: 4,
};

impl PermutationTable {
    pub fn output_width(&self) -> usize {
        self.entries.len()
    }

    /// Apply to a packed value known to be `input_width` bits wide.
    fn apply(&self, input: u16) -> u16 {
        let width = self.input_width;
        self.entries.iter().fold(0u16, |acc, &src| {
            (acc << 1) | ((input >> (width - src as usize)) & 1)
        })
    }
}

/// `output[i] = input[table.entries[i]]`.
pub fn permute(input: Bits, table: &PermutationTable) -> Result<Bits, CipherError> {
    if input.width() != table.input_width {
        return Err(CipherError::WidthMismatch {
            expected: table.input_width,
            actual: input.width(),
        });
    }
    Ok(Bits {
        value: table.apply(input.value),
        width: table.output_width() as u8,
    })
}

/// A 4x4 substitution box of 2-bit entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SBox {
    pub grid: [[u8; 4]; 4],
}

pub const S0: SBox = SBox {
    grid: [[1, 0, 3, 2], [3, 2, 1, 0], [0, 2, 1, 3], [3, 1, 3, 2]],
};
pub const S1: SBox = SBox {
    grid: [[0, 1, 2, 3], [2, 0, 1, 3], [3, 0, 1, 0], [2, 1, 0, 3]],
};

impl SBox {
    /// Row from bits (1,4), column from bits (2,3) of the low nibble.
    fn lookup(&self, nibble: u8) -> u8 {
        let row = ((nibble >> 2) & 0b10) | (nibble & 1);
        let col = (nibble >> 1) & 0b11;
        self.grid[row as usize][col as usize]
    }
}

/// Substitute a 4-bit input through `sbox`, yielding 2 bits.
pub fn sbox_lookup(nibble: Bits, sbox: &SBox) -> Result<Bits, CipherError> {
    if nibble.width() != 4 {
        return Err(CipherError::WidthMismatch {
            expected: 4,
            actual: nibble.width(),
        });
    }
    Ok(Bits {
        value: sbox.lookup(nibble.value as u8).into(),
        width: 2,
    })
}

/// Round subkeys derived from a 10-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubKeys {
    pub k1: u8,
    pub k2: u8,
}

impl SubKeys {
    pub fn k1_bits(&self) -> Bits {
        Bits {
            value: self.k1.into(),
            width: 8,
        }
    }

    pub fn k2_bits(&self) -> Bits {
        Bits {
            value: self.k2.into(),
            width: 8,
        }
    }
}

/// Circular left shift of each 5-bit half independently.
fn rotate_halves(value: u16, shift: u32) -> u16 {
    let rotate = |half: u16| ((half << shift) | (half >> (5 - shift))) & 0x1f;
    (rotate(value >> 5) << 5) | rotate(value & 0x1f)
}

/// K1 = P8(LS-1(P10(key))), K2 = P8(LS-2(LS-1(P10(key)))).
pub fn key_schedule(key: SdesKey) -> SubKeys {
    let shifted1 = rotate_halves(P10.apply(key.value()), 1);
    let shifted2 = rotate_halves(shifted1, 2);
    SubKeys {
        k1: P8.apply(shifted1) as u8,
        k2: P8.apply(shifted2) as u8,
    }
}

fn mix(right: u8, subkey: u8) -> u8 {
    let expanded = EP.apply(right.into()) as u8 ^ subkey;
    let substituted = (S0.lookup(expanded >> 4) << 2) | S1.lookup(expanded & 0x0f);
    P4.apply(substituted.into()) as u8
}

/// The keyed mixing function f(R, subkey) on a 4-bit half.
pub fn round_f(right: Bits, subkey: Bits) -> Result<Bits, CipherError> {
    if right.width() != 4 {
        return Err(CipherError::WidthMismatch {
            expected: 4,
            actual: right.width(),
        });
    }
    if subkey.width() != 8 {
        return Err(CipherError::WidthMismatch {
            expected: 8,
            actual: subkey.width(),
        });
    }
    Ok(Bits {
        value: mix(right.value as u8, subkey.value as u8).into(),
        width: 4,
    })
}

/// fK(L, R) = (L xor f(R, subkey), R).
pub fn fk(block: Block, subkey: u8) -> Block {
    Block::from_halves(block.left() ^ mix(block.right(), subkey), block.right())
}

/// Swap the two 4-bit halves.
pub fn switch(block: Block) -> Block {
    Block(block.0.rotate_left(4))
}

fn ip(block: Block) -> Block {
    Block(IP.apply(block.0.into()) as u8)
}

fn ip_inv(block: Block) -> Block {
    Block(IP_INV.apply(block.0.into()) as u8)
}

fn run_rounds(block: Block, first: u8, second: u8) -> Block {
    ip_inv(fk(switch(fk(ip(block), first)), second))
}

pub fn encrypt_block(plain: Block, key: SdesKey) -> Block {
    let sub = key_schedule(key);
    run_rounds(plain, sub.k1, sub.k2)
}

pub fn decrypt_block(cipher: Block, key: SdesKey) -> Block {
    let sub = key_schedule(key);
    run_rounds(cipher, sub.k2, sub.k1)
}

/// ECB: every byte is one block under the same key.
pub fn encrypt_bytes(plain: &[u8], key: SdesKey) -> Vec<u8> {
    let table = CodeBook::encryption(key);
    plain.iter().map(|&b| table.map(b)).collect()
}

pub fn decrypt_bytes(cipher: &[u8], key: SdesKey) -> Vec<u8> {
    let table = CodeBook::decryption(key);
    cipher.iter().map(|&b| table.map(b)).collect()
}

/// The full 256-entry block mapping for one key and direction.
#[derive(Clone)]
pub struct CodeBook {
    table: [u8; 256],
}

impl CodeBook {
    pub fn encryption(key: SdesKey) -> Self {
        let sub = key_schedule(key);
        Self::build(sub.k1, sub.k2)
    }

    pub fn decryption(key: SdesKey) -> Self {
        let sub = key_schedule(key);
        Self::build(sub.k2, sub.k1)
    }

    fn build(first: u8, second: u8) -> Self {
        let mut table = [0u8; 256];
        for (byte, slot) in table.iter_mut().enumerate() {
            *slot = run_rounds(Block(byte as u8), first, second).0;
        }
        Self { table }
    }

    #[inline]
    pub fn map(&self, byte: u8) -> u8 {
        self.table[byte as usize]
    }
}
