//! Fixed-width binary codewords, Hamming distance, and exhaustive
//! radius-bounded Hamming-ball enumeration.
//!
//! A [`Codeword`] is an `f`-bit feature vector (1 ≤ f ≤ 32) packed into a
//! `u32`, the unit every index and table in this crate operates on. Distances
//! are integer bit counts; the `count / f` form is available through
//! [`Codeword::normalized_distance`]. Ball enumeration flips k-combinations
//! of bit positions around a center, so the work per center is proportional
//! to the ball size rather than `2^f`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported codeword width: one machine word, and a dense table of
/// `2^f` slots stays addressable.
pub const MAX_WIDTH: u8 = 32;

/// An `f`-bit binary feature vector packed into a `u32`.
///
/// Bits above position `f-1` are always zero. The string form is MSB-first:
/// the first character of `"0101"` is feature 1 and maps to bit position 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    bits: u32,
    width: u8,
}

impl Codeword {
    /// Wrap raw bits as an `f`-bit codeword.
    pub fn new(bits: u32, width: u8) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::InvalidWidth(u32::from(width)));
        }
        if width < 32 && (bits >> width) != 0 {
            return Err(Error::BadCodeword {
                text: format!("{bits:#x}"),
                reason: format!("value does not fit in {width} bits"),
            });
        }
        Ok(Self { bits, width })
    }

    /// The all-zero codeword of the given width.
    pub fn zero(width: u8) -> Result<Self> {
        Self::new(0, width)
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn width(self) -> u8 {
        self.width
    }

    /// The codeword as a table index in `0..2^f`.
    pub fn index(self) -> usize {
        self.bits as usize
    }

    /// Number of bit positions in which `self` and `other` differ.
    pub fn distance(self, other: Codeword) -> Result<u32> {
        hamming_distance(self, other)
    }

    /// Distance divided by the width, in `[0, 1]`.
    pub fn normalized_distance(self, other: Codeword) -> Result<f64> {
        Ok(f64::from(self.distance(other)?) / f64::from(self.width))
    }

    /// Parse an MSB-first binary string; the width is the string length.
    pub fn from_binary_str(text: &str) -> Result<Self> {
        let len = text.len();
        if len == 0 || len > MAX_WIDTH as usize {
            return Err(Error::BadCodeword {
                text: text.to_string(),
                reason: format!("length {len} out of range (1..=32)"),
            });
        }
        let mut bits = 0u32;
        for ch in text.chars() {
            bits <<= 1;
            match ch {
                '0' => {}
                '1' => bits |= 1,
                other => {
                    return Err(Error::BadCodeword {
                        text: text.to_string(),
                        reason: format!("invalid character {other:?}"),
                    })
                }
            }
        }
        Self::new(bits, len as u8)
    }

    /// Parse a hexadecimal string with an explicit width. An optional `0x`
    /// prefix is accepted; the value must fit in `width` bits.
    pub fn from_hex_str(text: &str, width: u8) -> Result<Self> {
        let digits = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")).unwrap_or(text);
        let bits = u32::from_str_radix(digits, 16).map_err(|e| Error::BadCodeword {
            text: text.to_string(),
            reason: e.to_string(),
        })?;
        Self::new(bits, width)
    }

    /// MSB-first binary string of exactly `width` characters.
    pub fn to_binary_string(self) -> String {
        let mut s = String::with_capacity(self.width as usize);
        for pos in (0..self.width).rev() {
            s.push(if self.bits >> pos & 1 == 1 { '1' } else { '0' });
        }
        s
    }

    /// Lowercase hex, zero-padded to `ceil(width / 4)` digits.
    pub fn to_hex_string(self) -> String {
        let digits = usize::from(self.width).div_ceil(4);
        format!("{:0digits$x}", self.bits)
    }

    /// The codeword with the positions set in `mask` flipped.
    pub(crate) fn flipped(self, mask: u32) -> Self {
        debug_assert!(self.width == 32 || mask >> self.width == 0);
        Self {
            bits: self.bits ^ mask,
            width: self.width,
        }
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_binary_string())
    }
}

/// Number of bit positions in which two equal-width codewords differ.
pub fn hamming_distance(a: Codeword, b: Codeword) -> Result<u32> {
    if a.width != b.width {
        return Err(Error::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    Ok((a.bits ^ b.bits).count_ones())
}

/// Maximum Hamming distance for ball expansion.
///
/// Radii above 4 are legal but the ball size grows combinatorially, so the
/// constructor logs a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HammingRadius(u8);

impl HammingRadius {
    pub const ZERO: HammingRadius = HammingRadius(0);

    pub fn new(e: u8) -> Self {
        if e > 4 {
            log::warn!("Hamming radius {e} > 4: ball sizes grow combinatorially");
        }
        Self(e)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for HammingRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact binomial coefficient, `None` on overflow.
fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays exact because acc is always a
        // binomial coefficient times a partial numerator.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of codewords within distance `e` of any center:
/// `sum_{k=0..=e} C(f, k)`, computed exactly.
pub fn ball_size(width: u8, radius: HammingRadius) -> Result<u64> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::InvalidWidth(u32::from(width)));
    }
    if radius.get() > width {
        return Err(Error::RadiusTooLarge {
            radius: radius.get(),
            width,
        });
    }
    let mut total: u64 = 0;
    for k in 0..=u64::from(radius.get()) {
        let term = binomial(u64::from(width), k).ok_or(Error::CountOverflow("binomial"))?;
        total = total.checked_add(term).ok_or(Error::CountOverflow("ball size"))?;
    }
    Ok(total)
}

/// All codewords at exactly distance `distance` from `center`, in
/// lexicographic order of the flipped-position tuples (position 0 is the
/// integer's least significant bit).
pub fn ring_enumerate(center: Codeword, distance: u8) -> Result<RingIter> {
    if distance > center.width {
        return Err(Error::RadiusTooLarge {
            radius: distance,
            width: center.width,
        });
    }
    Ok(RingIter::new(center, distance))
}

/// All codewords within distance `radius` of `center`, each exactly once:
/// the center first, then rings of increasing distance, each ring in
/// lexicographic flipped-position order. The order is deterministic so table
/// builds and serialized models are reproducible across runs.
pub fn ball_enumerate(center: Codeword, radius: HammingRadius) -> Result<BallIter> {
    if radius.get() > center.width {
        return Err(Error::RadiusTooLarge {
            radius: radius.get(),
            width: center.width,
        });
    }
    Ok(BallIter {
        center,
        radius: radius.get(),
        distance: 0,
        ring: RingIter::new(center, 0),
    })
}

/// Iterator over one ring of a Hamming ball. See [`ring_enumerate`].
#[derive(Debug, Clone)]
pub struct RingIter {
    center: Codeword,
    /// Positions currently flipped, always strictly increasing.
    positions: Vec<u8>,
    done: bool,
}

impl RingIter {
    fn new(center: Codeword, distance: u8) -> Self {
        Self {
            center,
            positions: (0..distance).collect(),
            done: false,
        }
    }

    fn mask(&self) -> u32 {
        self.positions.iter().fold(0u32, |m, &p| m | 1 << p)
    }

    /// Advance `positions` to the next combination in lexicographic order.
    fn advance(&mut self) {
        let k = self.positions.len();
        let width = self.center.width as usize;
        if k == 0 {
            self.done = true;
            return;
        }
        let mut i = k;
        while i > 0 {
            i -= 1;
            if (self.positions[i] as usize) < width - k + i {
                self.positions[i] += 1;
                for j in i + 1..k {
                    self.positions[j] = self.positions[j - 1] + 1;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for RingIter {
    type Item = Codeword;

    fn next(&mut self) -> Option<Codeword> {
        if self.done {
            return None;
        }
        let item = self.center.flipped(self.mask());
        self.advance();
        Some(item)
    }
}

/// Iterator over a whole Hamming ball. See [`ball_enumerate`].
#[derive(Debug, Clone)]
pub struct BallIter {
    center: Codeword,
    radius: u8,
    distance: u8,
    ring: RingIter,
}

impl Iterator for BallIter {
    type Item = Codeword;

    fn next(&mut self) -> Option<Codeword> {
        loop {
            if let Some(item) = self.ring.next() {
                return Some(item);
            }
            if self.distance == self.radius {
                return None;
            }
            self.distance += 1;
            self.ring = RingIter::new(self.center, self.distance);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent distance oracle: compare bits one position at a time.
    fn bitloop_distance(a: Codeword, b: Codeword) -> u32 {
        (0..a.width())
            .filter(|&p| (a.bits() >> p) & 1 != (b.bits() >> p) & 1)
            .count() as u32
    }

    /// Independent binomial oracle via Pascal's triangle.
    fn pascal(n: usize, k: usize) -> u128 {
        let mut row = vec![1u128];
        for _ in 0..n {
            let mut next = vec![1u128];
            for i in 1..row.len() {
                next.push(row[i - 1] + row[i]);
            }
            next.push(1);
            row = next;
        }
        if k < row.len() {
            row[k]
        } else {
            0
        }
    }

    #[test]
    fn distance_identity() {
        let x = Codeword::new(0b1011, 4).unwrap();
        assert_eq!(hamming_distance(x, x).unwrap(), 0);
    }

    #[test]
    fn distance_complement() {
        let a = Codeword::new(0b1010, 4).unwrap();
        let b = Codeword::new(0b0101, 4).unwrap();
        assert_eq!(hamming_distance(a, b).unwrap(), 4);
    }

    #[test]
    fn distance_known_pair() {
        // Frozen from the bit-loop oracle: popcount(16521 ^ 15951) = 10.
        let a = Codeword::new(16521, 20).unwrap();
        let b = Codeword::new(15951, 20).unwrap();
        assert_eq!(bitloop_distance(a, b), 10);
        assert_eq!(hamming_distance(a, b).unwrap(), 10);
    }

    #[test]
    fn distance_width_mismatch() {
        let a = Codeword::new(1, 4).unwrap();
        let b = Codeword::new(1, 5).unwrap();
        assert!(matches!(
            hamming_distance(a, b),
            Err(Error::WidthMismatch { left: 4, right: 5 })
        ));
    }

    #[test]
    fn normalized_distance_divides_by_width() {
        let a = Codeword::new(0b1010, 4).unwrap();
        let b = Codeword::new(0b0101, 4).unwrap();
        assert_eq!(a.normalized_distance(b).unwrap(), 1.0);
        let c = Codeword::new(0b0110, 4).unwrap();
        assert_eq!(a.normalized_distance(c).unwrap(), 0.5);
    }

    #[test]
    fn codeword_rejects_out_of_range() {
        assert!(Codeword::new(0, 0).is_err());
        assert!(Codeword::new(0, 33).is_err());
        assert!(Codeword::new(0b10000, 4).is_err());
        assert!(Codeword::new(u32::MAX, 32).is_ok());
    }

    #[test]
    fn binary_string_round_trip() {
        let c = Codeword::from_binary_str("010011").unwrap();
        assert_eq!(c.width(), 6);
        assert_eq!(c.bits(), 0b010011);
        assert_eq!(c.to_binary_string(), "010011");
        assert!(Codeword::from_binary_str("01x").is_err());
        assert!(Codeword::from_binary_str("").is_err());
        assert!(Codeword::from_binary_str(&"0".repeat(33)).is_err());
    }

    #[test]
    fn hex_parse_and_render() {
        let c = Codeword::from_hex_str("0x4089", 20).unwrap();
        assert_eq!(c.bits(), 16521);
        assert_eq!(c.to_hex_string(), "04089");
        assert_eq!(Codeword::from_hex_str("f", 4).unwrap().bits(), 15);
        // Value wider than the declared width is rejected.
        assert!(Codeword::from_hex_str("1f", 4).is_err());
        assert!(Codeword::from_hex_str("zz", 8).is_err());
    }

    #[test]
    fn ball_size_known_values() {
        // Frozen from the Pascal-triangle oracle.
        assert_eq!(pascal(24, 2), 276);
        assert_eq!(ball_size(24, HammingRadius::new(2)).unwrap(), 301);
        assert_eq!(ball_size(24, HammingRadius::new(3)).unwrap(), 2325);
        // The perfect-Golay-code coincidence: 1 + 23 + 253 + 1771 = 2^11.
        assert_eq!(ball_size(23, HammingRadius::new(3)).unwrap(), 2048);
        for f in 1..=MAX_WIDTH {
            assert_eq!(ball_size(f, HammingRadius::ZERO).unwrap(), 1);
        }
    }

    #[test]
    fn ball_size_matches_binomial_oracle() {
        for f in 1..=MAX_WIDTH {
            for e in 0..=f.min(6) {
                let expect: u128 = (0..=e as usize).map(|k| pascal(f as usize, k)).sum();
                let got = ball_size(f, HammingRadius::new(e)).unwrap();
                assert_eq!(u128::from(got), expect, "f={f} e={e}");
            }
        }
    }

    #[test]
    fn ball_size_rejects_radius_over_width() {
        assert!(matches!(
            ball_size(4, HammingRadius::new(5)),
            Err(Error::RadiusTooLarge { radius: 5, width: 4 })
        ));
    }

    #[test]
    fn ball_zero_radius_is_center_only() {
        let c = Codeword::new(0b1011, 4).unwrap();
        let members: Vec<_> = ball_enumerate(c, HammingRadius::ZERO).unwrap().collect();
        assert_eq!(members, vec![c]);
    }

    #[test]
    fn ball_radius_one_order() {
        let c = Codeword::zero(4).unwrap();
        let members: Vec<u32> = ball_enumerate(c, HammingRadius::new(1))
            .unwrap()
            .map(|w| w.bits())
            .collect();
        assert_eq!(members, vec![0b0000, 0b0001, 0b0010, 0b0100, 0b1000]);
    }

    #[test]
    fn ring_distance_two_lexicographic_pairs() {
        let c = Codeword::zero(4).unwrap();
        let members: Vec<u32> = ring_enumerate(c, 2).unwrap().map(|w| w.bits()).collect();
        // Pairs (0,1), (0,2), (0,3), (1,2), (1,3), (2,3).
        assert_eq!(members, vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100]);
    }

    #[test]
    fn ball_count_f24_e3() {
        let c = Codeword::zero(24).unwrap();
        let n = ball_enumerate(c, HammingRadius::new(3)).unwrap().count();
        assert_eq!(n as u64, 2325);
    }

    #[test]
    fn ball_rejects_radius_over_width() {
        let c = Codeword::zero(4).unwrap();
        assert!(ball_enumerate(c, HammingRadius::new(5)).is_err());
        assert!(ring_enumerate(c, 5).is_err());
    }

    #[test]
    fn full_width_ring_is_complement() {
        let c = Codeword::new(0b0110, 4).unwrap();
        let members: Vec<u32> = ring_enumerate(c, 4).unwrap().map(|w| w.bits()).collect();
        assert_eq!(members, vec![0b1001]);
    }

    proptest! {
        #[test]
        fn metric_axioms(width in 1u8..=32, xs in proptest::array::uniform3(any::<u32>())) {
            let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
            let a = Codeword::new(xs[0] & mask, width).unwrap();
            let b = Codeword::new(xs[1] & mask, width).unwrap();
            let c = Codeword::new(xs[2] & mask, width).unwrap();
            let dab = hamming_distance(a, b).unwrap();
            let dba = hamming_distance(b, a).unwrap();
            let dac = hamming_distance(a, c).unwrap();
            let dcb = hamming_distance(c, b).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(dab == 0, a == b);
            prop_assert!(dab <= dac + dcb);
            prop_assert!(dab <= u32::from(width));
        }

        #[test]
        fn distance_matches_bitloop_oracle(width in 1u8..=32, x in any::<u32>(), y in any::<u32>()) {
            let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
            let a = Codeword::new(x & mask, width).unwrap();
            let b = Codeword::new(y & mask, width).unwrap();
            prop_assert_eq!(hamming_distance(a, b).unwrap(), bitloop_distance(a, b));
        }

        #[test]
        fn ball_matches_exhaustive_scan(width in 1u8..=12, center in any::<u32>(), e in 0u8..=3) {
            let e = e.min(width);
            let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
            let c = Codeword::new(center & mask, width).unwrap();
            let members: Vec<Codeword> =
                ball_enumerate(c, HammingRadius::new(e)).unwrap().collect();

            // No duplicates, count matches the binomial sum.
            let set: std::collections::HashSet<u32> = members.iter().map(|w| w.bits()).collect();
            prop_assert_eq!(set.len(), members.len());
            prop_assert_eq!(members.len() as u64, ball_size(width, HammingRadius::new(e)).unwrap());

            // Membership agrees with a scan of all 2^f codewords.
            for v in 0..(1u64 << width) as u32 {
                let w = Codeword::new(v, width).unwrap();
                let inside = bitloop_distance(c, w) <= u32::from(e);
                prop_assert_eq!(set.contains(&v), inside, "member {:#b}", v);
            }
        }

        #[test]
        fn string_round_trip(width in 1u8..=32, x in any::<u32>()) {
            let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
            let c = Codeword::new(x & mask, width).unwrap();
            prop_assert_eq!(Codeword::from_binary_str(&c.to_binary_string()).unwrap(), c);
            prop_assert_eq!(Codeword::from_hex_str(&c.to_hex_string(), width).unwrap(), c);
        }
    }
}
