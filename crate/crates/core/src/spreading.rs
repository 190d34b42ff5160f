//! Direct-sequence spreading: octets to 4-bit data symbols, symbols to
//! 32-chip PN sequences, and hard-decision despreading back.
//!
//! The chip table is loaded from `data/chip_table.txt` (16 lines of 32
//! `0`/`1` characters, line `n` is symbol `n`, first character is the first
//! chip on air). Its structure is checked when first loaded.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

pub const CHIPS_PER_SYMBOL: usize = 32;
pub const SYMBOLS_PER_OCTET: usize = 2;
pub const CHIPS_PER_OCTET: usize = CHIPS_PER_SYMBOL * SYMBOLS_PER_OCTET;

const EVEN_CHIPS: u32 = 0x5555_5555;
const ODD_CHIPS: u32 = 0xAAAA_AAAA;

static STANDARD_TABLE_TEXT: &str = include_str!("../data/chip_table.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpreadingError {
    #[error("odd number of symbols ({0}) cannot form whole octets")]
    OddSymbolCount(usize),
    #[error("data symbol {0} out of range 0..16")]
    InvalidSymbol(u8),
    #[error("expected {CHIPS_PER_SYMBOL} chips, got {0}")]
    WrongChipCount(usize),
    #[error("malformed chip table: {0}")]
    MalformedTable(String),
}

/// A 4-bit data symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataSymbol(u8);

impl DataSymbol {
    pub fn new(value: u8) -> Result<Self, SpreadingError> {
        if value < 16 {
            Ok(Self(value))
        } else {
            Err(SpreadingError::InvalidSymbol(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = DataSymbol> {
        (0..16).map(DataSymbol)
    }
}

impl fmt::Display for DataSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 32 binary chips packed into a word; bit `i` holds chip `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChipSequence(u32);

impl ChipSequence {
    pub const fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Builds a sequence from 32 chip values; any nonzero value is a 1.
    pub fn from_chips(chips: &[u8]) -> Result<Self, SpreadingError> {
        if chips.len() != CHIPS_PER_SYMBOL {
            return Err(SpreadingError::WrongChipCount(chips.len()));
        }
        Ok(Self(
            chips
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &c)| acc | (u32::from(c != 0) << i)),
        ))
    }

    pub fn chip(self, index: usize) -> u8 {
        ((self.0 >> index) & 1) as u8
    }

    pub fn chips(self) -> impl Iterator<Item = u8> {
        (0..CHIPS_PER_SYMBOL).map(move |i| self.chip(i))
    }

    pub fn to_vec(self) -> Vec<u8> {
        self.chips().collect()
    }

    /// Number of chip positions on which the two sequences agree.
    pub fn agreement(self, other: ChipSequence) -> u32 {
        CHIPS_PER_SYMBOL as u32 - (self.0 ^ other.0).count_ones()
    }

    pub fn hamming_distance(self, other: ChipSequence) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// Delays the sequence by `k` chips, cyclically.
    pub fn delayed(self, k: u32) -> Self {
        Self(self.0.rotate_left(k % 32))
    }

    pub fn with_flipped(self, index: usize) -> Self {
        Self(self.0 ^ (1 << index))
    }
}

impl fmt::Debug for ChipSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.chips().map(|c| if c == 1 { '1' } else { '0' }).collect();
        write!(f, "ChipSequence({s})")
    }
}

/// Structural facts about a chip table, measured rather than assumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableStructure {
    /// Each row `s` in `1..8` is row `s - 1` delayed by this many chips.
    pub rotation_step: u32,
    /// Rows `s` and `s + 8` differ exactly on the chips of this index
    /// parity (0 = even, 1 = odd).
    pub conjugated_parity: usize,
    /// Minimum pairwise Hamming distance between rows.
    pub min_distance: u32,
}

/// The 16-row symbol-to-chip mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChipTable {
    rows: [ChipSequence; 16],
}

impl ChipTable {
    pub fn parse(text: &str) -> Result<Self, SpreadingError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() != 16 {
            return Err(SpreadingError::MalformedTable(format!("{} rows, expected 16", lines.len())));
        }
        let mut rows = [ChipSequence(0); 16];
        for (n, line) in lines.iter().enumerate() {
            let chips = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(SpreadingError::MalformedTable(format!("row {n}: character {other:?}"))),
                })
                .collect::<Result<Vec<u8>, _>>()?;
            rows[n] = ChipSequence::from_chips(&chips)
                .map_err(|_| SpreadingError::MalformedTable(format!("row {n}: {} chips", chips.len())))?;
        }
        Ok(Self { rows })
    }

    /// The 2.4 GHz table, loaded and checked on first use.
    pub fn standard() -> &'static ChipTable {
        static TABLE: OnceLock<ChipTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let table = ChipTable::parse(STANDARD_TABLE_TEXT).expect("bundled chip table parses");
            if let Err(e) = table.structure() {
                panic!("bundled chip table fails its structural check: {e}");
            }
            table
        })
    }

    pub fn row(&self, symbol: DataSymbol) -> ChipSequence {
        self.rows[usize::from(symbol.0)]
    }

    pub fn rows(&self) -> &[ChipSequence; 16] {
        &self.rows
    }

    pub fn min_distance(&self) -> u32 {
        let mut best = u32::MAX;
        for a in 0..16 {
            for b in a + 1..16 {
                best = best.min(self.rows[a].hamming_distance(self.rows[b]));
            }
        }
        best
    }

    /// Measures the rotation and conjugation relations and rejects tables
    /// that lack them or that cannot correct a single chip error.
    pub fn structure(&self) -> Result<TableStructure, SpreadingError> {
        let bad = |msg: String| Err(SpreadingError::MalformedTable(msg));

        let rotation_step = match (1..32).find(|&k| self.rows[0].delayed(k) == self.rows[1]) {
            Some(k) => k,
            None => return bad("row 1 is not a rotation of row 0".into()),
        };
        for s in 1..8 {
            if self.rows[s - 1].delayed(rotation_step) != self.rows[s] {
                return bad(format!("row {s} is not row {} delayed by {rotation_step}", s - 1));
            }
        }

        let diff = self.rows[0].0 ^ self.rows[8].0;
        let conjugated_parity = match diff {
            EVEN_CHIPS => 0,
            ODD_CHIPS => 1,
            _ => return bad("rows 0 and 8 do not differ on a single parity class".into()),
        };
        for s in 0..8 {
            if self.rows[s].0 ^ self.rows[s + 8].0 != diff {
                return bad(format!("rows {s} and {} differ outside the conjugated parity", s + 8));
            }
        }

        let min_distance = self.min_distance();
        if min_distance <= 2 {
            return bad(format!("minimum distance {min_distance} does not exceed 2"));
        }
        Ok(TableStructure { rotation_step, conjugated_parity, min_distance })
    }

    /// Maximum-agreement symbol; ties go to the lowest symbol.
    pub fn despread(&self, received: ChipSequence) -> (DataSymbol, u32) {
        let mut best = (DataSymbol(0), 0);
        for (s, row) in self.rows.iter().enumerate() {
            let score = row.agreement(received);
            if score > best.1 || s == 0 {
                best = (DataSymbol(s as u8), score);
            }
        }
        best
    }
}

/// Low nibble first, then high nibble, for each octet in order.
pub fn octets_to_symbols(data: &[u8]) -> Vec<DataSymbol> {
    data.iter()
        .flat_map(|&b| [DataSymbol(b & 0x0F), DataSymbol(b >> 4)])
        .collect()
}

pub fn symbols_to_octets(symbols: &[DataSymbol]) -> Result<Vec<u8>, SpreadingError> {
    if symbols.len() % 2 != 0 {
        return Err(SpreadingError::OddSymbolCount(symbols.len()));
    }
    Ok(symbols
        .chunks_exact(2)
        .map(|pair| pair[0].0 | (pair[1].0 << 4))
        .collect())
}

pub fn spread(symbol: DataSymbol) -> ChipSequence {
    ChipTable::standard().row(symbol)
}

pub fn despread(received: ChipSequence) -> (DataSymbol, u32) {
    ChipTable::standard().despread(received)
}

/// Chip stream (one `0`/`1` per element) for a run of octets.
pub fn spread_octets(data: &[u8]) -> Vec<u8> {
    octets_to_symbols(data)
        .into_iter()
        .flat_map(|s| spread(s).chips())
        .collect()
}

/// Despreads whole 32-chip groups; a trailing partial group is ignored.
pub fn despread_chips(chips: &[u8]) -> Vec<(DataSymbol, u32)> {
    chips
        .chunks_exact(CHIPS_PER_SYMBOL)
        .map(|group| despread(ChipSequence::from_chips(group).expect("exact chunk")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(v: u8) -> DataSymbol {
        DataSymbol::new(v).unwrap()
    }

    #[test]
    fn nibble_order() {
        assert_eq!(octets_to_symbols(&[0x00]), vec![sym(0), sym(0)]);
        assert_eq!(octets_to_symbols(&[0xA7]), vec![sym(7), sym(10)]);
        assert_eq!(octets_to_symbols(&[0x12, 0x34]), vec![sym(2), sym(1), sym(4), sym(3)]);
    }

    #[test]
    fn symbols_back_to_octets() {
        assert_eq!(symbols_to_octets(&[sym(7), sym(10)]), Ok(vec![0xA7]));
        assert_eq!(symbols_to_octets(&[]), Ok(vec![]));
        assert_eq!(symbols_to_octets(&[sym(1)]), Err(SpreadingError::OddSymbolCount(1)));
        let all: Vec<u8> = (0..=255).collect();
        assert_eq!(symbols_to_octets(&octets_to_symbols(&all)).unwrap(), all);
    }

    #[test]
    fn symbol_range_checked() {
        assert!(DataSymbol::new(15).is_ok());
        assert_eq!(DataSymbol::new(16), Err(SpreadingError::InvalidSymbol(16)));
    }

    #[test]
    fn row_zero_matches_transcription() {
        let expected = "11011001110000110101001000101110";
        let row: String = spread(sym(0)).chips().map(|c| char::from(b'0' + c)).collect();
        assert_eq!(row, expected);
        for s in DataSymbol::all() {
            assert_eq!(spread(s).to_vec().len(), CHIPS_PER_SYMBOL);
        }
    }

    #[test]
    fn measured_structure() {
        let st = ChipTable::standard().structure().unwrap();
        assert_eq!(st.rotation_step, 4);
        assert_eq!(st.conjugated_parity, 1);
        assert_eq!(st.min_distance, 12);
    }

    #[test]
    fn exact_and_single_error_despread() {
        assert_eq!(despread(spread(sym(9))), (sym(9), 32));
        for s in DataSymbol::all() {
            for i in 0..CHIPS_PER_SYMBOL {
                assert_eq!(despread(spread(s).with_flipped(i)), (s, 31));
            }
        }
    }

    #[test]
    fn all_zero_chips_tie_to_lowest_symbol() {
        // Every row has sixteen zeros, so all scores tie at 16.
        assert_eq!(despread(ChipSequence::from_bits(0)), (sym(0), 16));
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(ChipTable::parse("0101").is_err());
        let mut lines: Vec<String> = STANDARD_TABLE_TEXT.lines().map(String::from).collect();
        lines[3] = lines[3].replacen('0', "x", 1);
        assert!(ChipTable::parse(&lines.join("\n")).is_err());

        // Swap two rows: parses, but the rotation relation breaks.
        let mut lines: Vec<String> = STANDARD_TABLE_TEXT.lines().map(String::from).collect();
        lines.swap(2, 3);
        let table = ChipTable::parse(&lines.join("\n")).unwrap();
        assert!(table.structure().is_err());
    }
}
