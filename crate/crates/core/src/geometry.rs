//! Device geometry and address translation.
//!
//! The modeled device is one rank of x8 chips operating in lockstep: every
//! external (row, column) request touches the same internal location in each
//! chip. Rows live in subarrays of 512-row, 512-column mats; bitlines run
//! vertically through a mat and terminate in sense amplifiers on the mat edge,
//! wordlines run horizontally from per-mat drivers. In the open-bitline
//! arrangement modeled here, even local columns sense at the top edge of the
//! mat and odd local columns at the bottom edge, so the electrical distance
//! between a cell and its sense amplifier depends on both the row and the
//! column parity.
//!
//! External addresses are what a memory controller issues; internal addresses
//! are physical positions. The two differ by a per-device remap (a row bit
//! permutation plus an XOR mask) that vendors do not document, so the rest of
//! the crate treats [`AddressMap`] as ground truth that experiments may only
//! probe from the outside.

use crate::error::ModelError;
use crate::rng::keyed_permutation;

/// Rows per mat. Fixed by the modeled cell array.
pub const MAT_ROWS: usize = 512;
/// Bitline columns per mat. Fixed by the modeled cell array.
pub const MAT_COLS: usize = 512;
/// Data-out bits tracked per column access: burst beats x chips.
pub const BURST_BITS: usize = 64;

/// Physical organization of one modeled DIMM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceGeometry {
    /// Data chips on the rank; each contributes one tracked bit per beat.
    pub chips_per_dimm: usize,
    /// Banks per chip. Experiments drive bank 0; the rest exist so noise
    /// keys and capacity arithmetic stay honest.
    pub banks_per_chip: usize,
    /// Subarrays stacked vertically in one bank.
    pub subarrays_per_bank: usize,
    /// Rows per mat; must equal [`MAT_ROWS`].
    pub mat_rows: usize,
    /// Columns per mat; must equal [`MAT_COLS`].
    pub mat_cols: usize,
    /// Mats side by side in one subarray row.
    pub mats_per_subarray_row: usize,
    /// Beats in one burst transfer; fixed at 8.
    pub burst_length: usize,
    /// IO width of one chip during one beat; fixed at 8.
    pub bits_per_chip_per_beat: usize,
}

impl Default for DeviceGeometry {
    fn default() -> Self {
        DeviceGeometry {
            chips_per_dimm: 8,
            banks_per_chip: 8,
            subarrays_per_bank: 64,
            mat_rows: MAT_ROWS,
            mat_cols: MAT_COLS,
            mats_per_subarray_row: 8,
            burst_length: 8,
            bits_per_chip_per_beat: 8,
        }
    }
}

impl DeviceGeometry {
    /// Default geometry with a different subarray count; handy for tests
    /// that want fewer rows without touching the fixed mat dimensions.
    pub fn with_subarrays(subarrays_per_bank: usize) -> Self {
        DeviceGeometry {
            subarrays_per_bank,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mat_rows != MAT_ROWS || self.mat_cols != MAT_COLS {
            return Err(ModelError::invalid(
                "geometry",
                format!(
                    "mat dimensions are fixed at {MAT_ROWS}x{MAT_COLS}, got {}x{}",
                    self.mat_rows, self.mat_cols
                ),
            ));
        }
        if self.burst_length != 8 {
            return Err(ModelError::invalid("geometry", "burst_length is fixed at 8"));
        }
        if self.chips_per_dimm * self.bits_per_chip_per_beat != BURST_BITS {
            return Err(ModelError::invalid(
                "geometry",
                format!(
                    "one beat must carry {BURST_BITS} bits, got {} chips x {} bits",
                    self.chips_per_dimm, self.bits_per_chip_per_beat
                ),
            ));
        }
        if self.bits_per_chip_per_beat != 8 {
            return Err(ModelError::invalid(
                "geometry",
                "bits_per_chip_per_beat is fixed at 8",
            ));
        }
        if self.banks_per_chip == 0 {
            return Err(ModelError::invalid("geometry", "banks_per_chip must be >= 1"));
        }
        if self.subarrays_per_bank == 0 || !self.subarrays_per_bank.is_power_of_two() {
            return Err(ModelError::invalid(
                "geometry",
                format!(
                    "subarrays_per_bank must be a power of two (row addresses are bit-mapped), got {}",
                    self.subarrays_per_bank
                ),
            ));
        }
        if self.mats_per_subarray_row == 0
            || (self.mats_per_subarray_row * self.mat_cols) % self.burst_length != 0
        {
            return Err(ModelError::invalid(
                "geometry",
                "mats_per_subarray_row must be >= 1 and divide evenly into bursts",
            ));
        }
        Ok(())
    }

    /// Rows addressable in one bank.
    pub fn rows_per_bank(&self) -> u64 {
        (self.subarrays_per_bank * self.mat_rows) as u64
    }

    /// Bits in a (bank-local) row address.
    pub fn row_bits(&self) -> usize {
        self.rows_per_bank().trailing_zeros() as usize
    }

    /// External column addresses per row.
    pub fn external_columns(&self) -> u64 {
        (self.mats_per_subarray_row * self.mat_cols / self.burst_length) as u64
    }
}

/// Which mat edge a cell's bitline senses at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SenseAmpSide {
    Top,
    Bottom,
}

/// Fully resolved physical position of one tracked cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCoordinate {
    pub chip: usize,
    pub bank: usize,
    pub subarray: usize,
    pub mat: usize,
    pub local_row: usize,
    pub local_col: usize,
    pub sa_side: SenseAmpSide,
    /// Normalized distance from the cell to its sense amplifier, in [0, 1].
    pub bitline_distance: f64,
    /// Normalized distance from the cell to its wordline driver, in [0, 1].
    pub wordline_distance: f64,
}

/// Bijective relabeling of row-address bits.
///
/// Entry `k` gives the internal bit position that receives external bit `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPermutation(Vec<usize>);

impl BitPermutation {
    pub fn identity(bits: usize) -> Self {
        BitPermutation((0..bits).collect())
    }

    pub fn new(map: Vec<usize>) -> Result<Self, ModelError> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(ModelError::invalid(
                    "bit permutation",
                    format!("{map:?} is not a permutation of 0..{}", map.len()),
                ));
            }
            seen[m] = true;
        }
        Ok(BitPermutation(map))
    }

    /// Seeded shuffle of the low `low` bits; identity on the rest. Keeping
    /// the high bits in place scrambles addresses within each 2^low-row
    /// window without moving rows between windows.
    pub fn scrambled_low_bits(bits: usize, low: usize, seed: u64) -> Self {
        assert!(low <= bits);
        let mut map: Vec<usize> = keyed_permutation(low, 0x70f0, seed);
        map.extend(low..bits);
        BitPermutation(map)
    }

    pub fn bits(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, x: u64) -> u64 {
        let mut out = 0u64;
        for (k, &m) in self.0.iter().enumerate() {
            out |= ((x >> k) & 1) << m;
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.0.len()];
        for (k, &m) in self.0.iter().enumerate() {
            inv[m] = k;
        }
        BitPermutation(inv)
    }

    /// `self.compose(other)` applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.bits(), other.bits());
        BitPermutation(other.0.iter().map(|&m| self.0[m]).collect())
    }
}

/// How data-out bits of a column access spread over a subarray row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnLayout {
    /// Consecutive beats read consecutive positions along the row: global
    /// position = ext_col * burst_length + beat, split into (mat, local
    /// column) by division. Column sweeps cross mat boundaries.
    #[default]
    BeatMajor,
    /// Each beat reads from its own mat at the same local column. Burst
    /// positions inherit stable per-mat characteristics, which is the wiring
    /// of interest for ECC-word shuffling experiments.
    MatPerBeat,
}

/// External-to-internal address remap for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressMap {
    pub row_bit_permutation: BitPermutation,
    pub row_xor_mask: u64,
    pub column_layout: ColumnLayout,
}

impl AddressMap {
    /// Identity remap: external and internal addresses coincide.
    pub fn identity(row_bits: usize) -> Self {
        AddressMap {
            row_bit_permutation: BitPermutation::identity(row_bits),
            row_xor_mask: 0,
            column_layout: ColumnLayout::BeatMajor,
        }
    }

    /// Default scramble for a geometry: touches only subarray-local row
    /// bits, so each 512-row window maps onto itself.
    pub fn scrambled_for(geometry: &DeviceGeometry, seed: u64) -> Self {
        AddressMap::scrambled(
            geometry.row_bits(),
            geometry.mat_rows.trailing_zeros() as usize,
            seed,
        )
    }

    /// Seeded remap that permutes and XOR-flips the low `low` row bits.
    pub fn scrambled(row_bits: usize, low: usize, seed: u64) -> Self {
        let mask_bits = crate::rng::mix64(seed ^ 0xab1e5) & ((1u64 << low) - 1);
        AddressMap {
            row_bit_permutation: BitPermutation::scrambled_low_bits(row_bits, low, seed),
            row_xor_mask: mask_bits,
            column_layout: ColumnLayout::BeatMajor,
        }
    }

    pub fn validate(&self, geometry: &DeviceGeometry) -> Result<(), ModelError> {
        if self.row_bit_permutation.bits() != geometry.row_bits() {
            return Err(ModelError::invalid(
                "address map",
                format!(
                    "permutation covers {} bits but the geometry has {}-bit rows",
                    self.row_bit_permutation.bits(),
                    geometry.row_bits()
                ),
            ));
        }
        if self.row_xor_mask >= geometry.rows_per_bank() {
            return Err(ModelError::invalid(
                "address map",
                "row_xor_mask has bits outside the row address width",
            ));
        }
        if self.column_layout == ColumnLayout::MatPerBeat
            && geometry.mats_per_subarray_row != geometry.burst_length
        {
            return Err(ModelError::invalid(
                "address map",
                "mat-per-beat layout needs mats_per_subarray_row == burst_length",
            ));
        }
        Ok(())
    }

    /// External row address to internal row address: permute, then mask.
    pub fn translate_row(
        &self,
        ext_row: u64,
        geometry: &DeviceGeometry,
    ) -> Result<u64, ModelError> {
        if ext_row >= geometry.rows_per_bank() {
            return Err(ModelError::OutOfRange {
                what: "external row",
                got: ext_row,
                limit: geometry.rows_per_bank(),
            });
        }
        Ok(self.row_bit_permutation.apply(ext_row) ^ self.row_xor_mask)
    }

    /// Inverse of [`AddressMap::translate_row`].
    pub fn external_row(
        &self,
        internal_row: u64,
        geometry: &DeviceGeometry,
    ) -> Result<u64, ModelError> {
        if internal_row >= geometry.rows_per_bank() {
            return Err(ModelError::OutOfRange {
                what: "internal row",
                got: internal_row,
                limit: geometry.rows_per_bank(),
            });
        }
        Ok(self
            .row_bit_permutation
            .inverse()
            .apply(internal_row ^ self.row_xor_mask))
    }
}

/// Resolve one tracked data-out bit to its physical cell.
///
/// `bit_in_beat` indexes the tracked bit within a beat and doubles as the
/// chip index: the 64 tracked bits of one access are the 8 beats x 8 chips.
/// Experiments drive bank 0; the bank field exists for noise keying.
pub fn locate_cell(
    ext_row: u64,
    ext_col: u64,
    beat: usize,
    bit_in_beat: usize,
    geometry: &DeviceGeometry,
    map: &AddressMap,
) -> Result<CellCoordinate, ModelError> {
    if ext_col >= geometry.external_columns() {
        return Err(ModelError::OutOfRange {
            what: "external column",
            got: ext_col,
            limit: geometry.external_columns(),
        });
    }
    if beat >= geometry.burst_length {
        return Err(ModelError::OutOfRange {
            what: "beat",
            got: beat as u64,
            limit: geometry.burst_length as u64,
        });
    }
    if bit_in_beat >= geometry.chips_per_dimm {
        return Err(ModelError::OutOfRange {
            what: "bit in beat",
            got: bit_in_beat as u64,
            limit: geometry.chips_per_dimm as u64,
        });
    }
    let internal_row = map.translate_row(ext_row, geometry)?;
    Ok(locate_in_row(
        internal_row,
        ext_col,
        beat,
        bit_in_beat,
        geometry,
        map.column_layout,
    ))
}

/// Same resolution as [`locate_cell`] with the row translation already done.
///
/// Scan loops hoist the per-row translation out of their column loops and
/// call this directly; arguments must already be in range.
pub fn locate_in_row(
    internal_row: u64,
    ext_col: u64,
    beat: usize,
    bit_in_beat: usize,
    geometry: &DeviceGeometry,
    layout: ColumnLayout,
) -> CellCoordinate {
    debug_assert!(internal_row < geometry.rows_per_bank());
    debug_assert!(ext_col < geometry.external_columns());
    let subarray = (internal_row as usize) / geometry.mat_rows;
    let local_row = (internal_row as usize) % geometry.mat_rows;

    let (mat, local_col) = match layout {
        ColumnLayout::BeatMajor => {
            let global = ext_col as usize * geometry.burst_length + beat;
            (global / geometry.mat_cols, global % geometry.mat_cols)
        }
        ColumnLayout::MatPerBeat => (beat, ext_col as usize),
    };

    // Open bitline: even columns sense at the top mat edge, odd at the bottom.
    let sa_side = if local_col % 2 == 0 {
        SenseAmpSide::Top
    } else {
        SenseAmpSide::Bottom
    };
    let span = (geometry.mat_rows - 1) as f64;
    let bitline_distance = match sa_side {
        SenseAmpSide::Top => (span - local_row as f64) / span,
        SenseAmpSide::Bottom => local_row as f64 / span,
    };
    let wordline_distance = local_col as f64 / (geometry.mat_cols - 1) as f64;

    CellCoordinate {
        chip: bit_in_beat,
        bank: 0,
        subarray,
        mat,
        local_row,
        local_col,
        sa_side,
        bitline_distance,
        wordline_distance,
    }
}

/// Physical cells behind all 64 tracked data-out bits of one column access,
/// ordered by burst index (beat * 8 + bit_in_beat), for external row 0.
pub fn burst_positions(
    ext_col: u64,
    geometry: &DeviceGeometry,
    map: &AddressMap,
) -> Result<Vec<CellCoordinate>, ModelError> {
    let mut out = Vec::with_capacity(BURST_BITS);
    for beat in 0..geometry.burst_length {
        for bit in 0..geometry.chips_per_dimm {
            out.push(locate_cell(0, ext_col, beat, bit, geometry, map)?);
        }
    }
    Ok(out)
}
