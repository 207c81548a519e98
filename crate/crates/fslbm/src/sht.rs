//! The supervised hash table: built by Hamming-ball expansion of training
//! codewords, updated in a streaming fashion, queried in constant time, and
//! persisted to a versioned checksummed binary format.
//!
//! Every training point `(c, W)` touches every codeword `u` with
//! `HD(c, u) <= e`; slot `u` accumulates `zeta(HD(c, u)) * W[i]` for every
//! class `i`. Overlapping balls accumulate rather than overwrite, which is
//! where fuzzy predictions come from: a query lands on one slot and reads the
//! blended class mass of every nearby training point.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::bitcode::{ball_size, ring_enumerate, Codeword, HammingRadius, MAX_WIDTH};
use crate::error::{Error, Result};
use crate::labels::{LabelDistribution, LabelWeights};

/// Default memory budget (bytes) when none is configured: dense tables are
/// used up to roughly f = 24 at k = 2 and the sparse map beyond that.
pub const DEFAULT_MEMORY_BUDGET: u64 = 512 * 1024 * 1024;

/// Model file magic bytes.
pub const MODEL_MAGIC: &[u8; 5] = b"FSLBM";
/// Model file format version.
pub const MODEL_VERSION: u8 = 1;

const MODEL_HEADER_LEN: usize = 35;

/// Per-touch weight increment policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaPolicy {
    /// Every ball member gains the same increment.
    Constant(f64),
    /// Members at distance `d` gain `zeta / (d + 1)`.
    DistanceDecay(f64),
}

impl ZetaPolicy {
    pub fn validate(&self) -> Result<()> {
        let v = self.value();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::BadZeta(v));
        }
        Ok(())
    }

    /// Increment applied to a ball member at the given distance.
    pub fn increment(&self, distance: u32) -> f64 {
        match *self {
            ZetaPolicy::Constant(z) => z,
            ZetaPolicy::DistanceDecay(z) => z / f64::from(distance + 1),
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ZetaPolicy::Constant(z) | ZetaPolicy::DistanceDecay(z) => z,
        }
    }

    fn tag(&self) -> u8 {
        match self {
            ZetaPolicy::Constant(_) => 0,
            ZetaPolicy::DistanceDecay(_) => 1,
        }
    }

    fn from_tag(tag: u8, value: f64) -> Result<Self> {
        let policy = match tag {
            0 => ZetaPolicy::Constant(value),
            1 => ZetaPolicy::DistanceDecay(value),
            other => return Err(Error::CorruptModel(format!("unknown zeta tag {other}"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl Default for ZetaPolicy {
    fn default() -> Self {
        ZetaPolicy::Constant(1.0)
    }
}

/// Entry storage strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageMode {
    /// Flat array of `2^f * k` weights.
    Dense,
    /// Hash map keyed by codeword index.
    Sparse,
    /// Dense when `2^f * k * 8` bytes fit the memory budget, sparse otherwise.
    #[default]
    Auto,
}

/// Build-time parameters of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub width: u8,
    pub radius: HammingRadius,
    pub zeta: ZetaPolicy,
    pub storage: StorageMode,
    /// Memory budget in bytes for table storage.
    pub memory_budget: u64,
}

impl TrainConfig {
    pub fn new(width: u8, radius: HammingRadius) -> Result<Self> {
        let config = Self {
            width,
            radius,
            zeta: ZetaPolicy::default(),
            storage: StorageMode::default(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_zeta(mut self, zeta: ZetaPolicy) -> Result<Self> {
        zeta.validate()?;
        self.zeta = zeta;
        Ok(self)
    }

    pub fn with_storage(mut self, storage: StorageMode) -> Self {
        self.storage = storage;
        self
    }

    pub fn with_memory_budget(mut self, bytes: u64) -> Self {
        self.memory_budget = bytes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.width > MAX_WIDTH {
            return Err(Error::InvalidWidth(u32::from(self.width)));
        }
        if self.radius.get() > self.width {
            return Err(Error::RadiusTooLarge {
                radius: self.radius.get(),
                width: self.width,
            });
        }
        self.zeta.validate()
    }

    /// `sum_{k=0..=e} C(f, k)`: slots touched per training point.
    pub fn ball_size(&self) -> Result<u64> {
        ball_size(self.width, self.radius)
    }
}

/// Query-time behavior when the looked-up slot is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// Report the query as unmatched.
    None,
    /// Probe rings at distance 1, 2, ... up to `max_extra_radius` and answer
    /// from the first non-empty ring (merging that whole ring's entries).
    Expand { max_extra_radius: u8 },
}

/// Outcome of a single query.
///
/// `distribution` is present iff the slot matched directly or a fallback
/// ring produced mass; `matched` is true only for the direct hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub distribution: Option<LabelDistribution>,
    pub matched: bool,
    pub fallback_radius_used: Option<u8>,
}

impl Prediction {
    pub fn unmatched() -> Self {
        Self {
            distribution: None,
            matched: false,
            fallback_radius_used: None,
        }
    }

    /// Whether any distribution is available (direct or via fallback).
    pub fn is_answered(&self) -> bool {
        self.distribution.is_some()
    }
}

fn dense_bytes(width: u8, class_count: usize) -> u64 {
    (1u64 << width) * class_count as u64 * 8
}

/// Rough per-entry footprint of the sparse map: key + boxed slice header +
/// allocator and load-factor overhead, plus the weights themselves.
fn sparse_entry_bytes(class_count: usize) -> u64 {
    48 + 8 * class_count as u64
}

#[derive(Debug, Clone)]
enum EntryStore {
    Dense {
        slots: Vec<f64>,
        class_count: usize,
        occupied: u64,
    },
    Sparse {
        map: HashMap<u32, Box<[f64]>>,
        class_count: usize,
    },
}

impl EntryStore {
    fn new_dense(width: u8, class_count: usize) -> Self {
        let len = (1usize << width) * class_count;
        let mut slots = vec![0.0f64; len];
        // Touch one element per page up front so the first absorb pass does
        // not stall on page faults.
        let step = 4096 / std::mem::size_of::<f64>();
        let mut i = 0;
        while i < slots.len() {
            unsafe { std::ptr::write_volatile(&mut slots[i], 0.0) };
            i += step;
        }
        EntryStore::Dense {
            slots,
            class_count,
            occupied: 0,
        }
    }

    fn new_sparse(class_count: usize) -> Self {
        EntryStore::Sparse {
            map: HashMap::new(),
            class_count,
        }
    }

    fn entry_count(&self) -> u64 {
        match self {
            EntryStore::Dense { occupied, .. } => *occupied,
            EntryStore::Sparse { map, .. } => map.len() as u64,
        }
    }

    fn get(&self, index: u32) -> Option<&[f64]> {
        match self {
            EntryStore::Dense {
                slots, class_count, ..
            } => {
                let base = index as usize * class_count;
                let slot = &slots[base..base + class_count];
                if slot.iter().any(|w| *w > 0.0) {
                    Some(slot)
                } else {
                    None
                }
            }
            EntryStore::Sparse { map, .. } => map.get(&index).map(|w| &w[..]),
        }
    }

    fn add_scaled(&mut self, index: u32, probs: &[f64], factor: f64) {
        match self {
            EntryStore::Dense {
                slots,
                class_count,
                occupied,
            } => {
                let base = index as usize * *class_count;
                let slot = &mut slots[base..base + *class_count];
                if !slot.iter().any(|w| *w > 0.0) {
                    *occupied += 1;
                }
                for (w, p) in slot.iter_mut().zip(probs) {
                    *w += factor * p;
                }
            }
            EntryStore::Sparse { map, class_count } => {
                let slot = map
                    .entry(index)
                    .or_insert_with(|| vec![0.0; *class_count].into_boxed_slice());
                for (w, p) in slot.iter_mut().zip(probs) {
                    *w += factor * p;
                }
            }
        }
    }

    /// Add raw pre-accumulated weights (used when merging partial builds and
    /// when loading a model).
    fn add_weights(&mut self, index: u32, weights: &[f64]) {
        match self {
            EntryStore::Dense {
                slots,
                class_count,
                occupied,
            } => {
                let base = index as usize * *class_count;
                let slot = &mut slots[base..base + *class_count];
                if !slot.iter().any(|w| *w > 0.0) {
                    *occupied += 1;
                }
                for (w, p) in slot.iter_mut().zip(weights) {
                    *w += p;
                }
            }
            EntryStore::Sparse { map, class_count } => {
                let slot = map
                    .entry(index)
                    .or_insert_with(|| vec![0.0; *class_count].into_boxed_slice());
                for (w, p) in slot.iter_mut().zip(weights) {
                    *w += p;
                }
            }
        }
    }

    fn sorted_entries(&self) -> SortedEntries<'_> {
        match self {
            EntryStore::Dense {
                slots, class_count, ..
            } => SortedEntries::Dense {
                slots,
                class_count: *class_count,
                next: 0,
            },
            EntryStore::Sparse { map, .. } => {
                let mut keys: Vec<u32> = map.keys().copied().collect();
                keys.sort_unstable();
                SortedEntries::Sparse {
                    map,
                    keys: keys.into_iter(),
                }
            }
        }
    }
}

/// Iterator over `(index, weights)` pairs in ascending index order.
pub enum SortedEntries<'a> {
    Dense {
        slots: &'a [f64],
        class_count: usize,
        next: usize,
    },
    Sparse {
        map: &'a HashMap<u32, Box<[f64]>>,
        keys: std::vec::IntoIter<u32>,
    },
}

impl<'a> Iterator for SortedEntries<'a> {
    type Item = (u32, &'a [f64]);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            SortedEntries::Dense {
                slots,
                class_count,
                next,
            } => {
                while *next * *class_count < slots.len() {
                    let base = *next * *class_count;
                    let slot = &slots[base..base + *class_count];
                    let index = *next as u32;
                    *next += 1;
                    if slot.iter().any(|w| *w > 0.0) {
                        return Some((index, slot));
                    }
                }
                None
            }
            SortedEntries::Sparse { map, keys } => {
                let key = keys.next()?;
                Some((key, &map[&key][..]))
            }
        }
    }
}

/// Map from codeword index to accumulated per-class weights.
///
/// Immutable between [`absorb`](Self::absorb) calls and safe to share across
/// any number of reader threads; absorbing requires exclusive access.
#[derive(Debug, Clone)]
pub struct SupervisedHashTable {
    config: TrainConfig,
    class_count: usize,
    trained_count: u64,
    store: EntryStore,
}

impl SupervisedHashTable {
    /// Create an empty table. Resolves `StorageMode::Auto` against the
    /// memory budget and refuses a dense layout that cannot fit it.
    pub fn new(config: TrainConfig, class_count: usize) -> Result<Self> {
        config.validate()?;
        if !(2..=usize::from(u16::MAX)).contains(&class_count) {
            return Err(Error::BadClassCount(class_count));
        }
        let dense = match config.storage {
            StorageMode::Dense => {
                let required = dense_bytes(config.width, class_count);
                if required > config.memory_budget {
                    return Err(Error::BudgetExceeded {
                        required,
                        budget: config.memory_budget,
                    });
                }
                true
            }
            StorageMode::Sparse => false,
            StorageMode::Auto => dense_bytes(config.width, class_count) <= config.memory_budget,
        };
        let store = if dense {
            EntryStore::new_dense(config.width, class_count)
        } else {
            EntryStore::new_sparse(class_count)
        };
        Ok(Self {
            config,
            class_count,
            trained_count: 0,
            store,
        })
    }

    /// Build a table from a training sequence.
    ///
    /// Accumulation is elementwise addition, so the resulting entry map does
    /// not depend on the training order (exactly so when the increments are
    /// exactly representable, to float rounding otherwise).
    pub fn build(
        training: &[(Codeword, LabelDistribution)],
        config: TrainConfig,
        class_count: usize,
    ) -> Result<Self> {
        Self::check_projected_budget(&config, class_count, training.len() as u64)?;
        let mut table = Self::new(config, class_count)?;
        for (code, label) in training {
            table.absorb(*code, label)?;
        }
        Ok(table)
    }

    /// Parallel build: workers accumulate sparse partial maps over contiguous
    /// chunks which are then merged in chunk order. Merging regroups the
    /// floating-point additions, so the result matches [`build`](Self::build)
    /// exactly when the increments are exactly representable (for example
    /// constant zeta 1 with crisp labels) and to float rounding otherwise.
    pub fn build_parallel(
        training: &[(Codeword, LabelDistribution)],
        config: TrainConfig,
        class_count: usize,
    ) -> Result<Self> {
        use rayon::prelude::*;

        let threads = rayon::current_num_threads();
        if threads <= 1 || training.len() < 2 * threads {
            return Self::build(training, config, class_count);
        }
        Self::check_projected_budget(&config, class_count, training.len() as u64)?;
        config.validate()?;

        let chunk_len = training.len().div_ceil(threads);
        let partials: Vec<Result<HashMap<u32, Box<[f64]>>>> = training
            .par_chunks(chunk_len)
            .map(|chunk| {
                let mut map: HashMap<u32, Box<[f64]>> = HashMap::new();
                for (code, label) in chunk {
                    if code.width() != config.width {
                        return Err(Error::WidthMismatch {
                            left: config.width,
                            right: code.width(),
                        });
                    }
                    if label.class_count() != class_count {
                        return Err(Error::ClassMismatch {
                            expected: class_count,
                            got: label.class_count(),
                        });
                    }
                    for d in 0..=config.radius.get() {
                        let factor = config.zeta.increment(u32::from(d));
                        for member in ring_enumerate(*code, d)? {
                            let slot = map
                                .entry(member.bits())
                                .or_insert_with(|| vec![0.0; class_count].into_boxed_slice());
                            for (w, p) in slot.iter_mut().zip(label.probs()) {
                                *w += factor * p;
                            }
                        }
                    }
                }
                Ok(map)
            })
            .collect();

        let mut table = Self::new(config, class_count)?;
        for partial in partials {
            for (index, weights) in partial? {
                table.store.add_weights(index, &weights);
            }
        }
        table.trained_count = training.len() as u64;
        Ok(table)
    }

    fn check_projected_budget(config: &TrainConfig, class_count: usize, points: u64) -> Result<()> {
        config.validate()?;
        if !(2..=usize::from(u16::MAX)).contains(&class_count) {
            return Err(Error::BadClassCount(class_count));
        }
        let uses_sparse = match config.storage {
            StorageMode::Dense => false,
            StorageMode::Sparse => true,
            StorageMode::Auto => dense_bytes(config.width, class_count) > config.memory_budget,
        };
        if uses_sparse {
            let ball = config.ball_size()?;
            let projected = points
                .saturating_mul(ball)
                .min(1u64 << config.width)
                .saturating_mul(sparse_entry_bytes(class_count));
            if projected > config.memory_budget {
                return Err(Error::BudgetExceeded {
                    required: projected,
                    budget: config.memory_budget,
                });
            }
        }
        Ok(())
    }

    /// Absorb one training point: expand its ball and accumulate weights.
    /// Equivalent to rebuilding from the original sequence plus this point.
    pub fn absorb(&mut self, code: Codeword, label: &LabelDistribution) -> Result<()> {
        if code.width() != self.config.width {
            return Err(Error::WidthMismatch {
                left: self.config.width,
                right: code.width(),
            });
        }
        if label.class_count() != self.class_count {
            return Err(Error::ClassMismatch {
                expected: self.class_count,
                got: label.class_count(),
            });
        }
        if let EntryStore::Sparse { .. } = self.store {
            let ball = self.config.ball_size()?;
            let projected = (self.entry_count() + ball)
                .min(1u64 << self.config.width)
                .saturating_mul(sparse_entry_bytes(self.class_count));
            if projected > self.config.memory_budget {
                return Err(Error::BudgetExceeded {
                    required: projected,
                    budget: self.config.memory_budget,
                });
            }
        }
        for d in 0..=self.config.radius.get() {
            let factor = self.config.zeta.increment(u32::from(d));
            for member in ring_enumerate(code, d)? {
                self.store.add_scaled(member.bits(), label.probs(), factor);
            }
        }
        self.trained_count += 1;
        debug_assert!(
            self.entry_count() <= self.trained_count.saturating_mul(self.config.ball_size().unwrap()),
            "entry count exceeds the phi * ball_size bound"
        );
        Ok(())
    }

    /// Look up a query codeword.
    ///
    /// An empty slot is not an error: it reports as unmatched, or under the
    /// expand policy the table probes rings of increasing distance and
    /// answers from the first non-empty one.
    pub fn query(&self, x: Codeword, fallback: Fallback) -> Result<Prediction> {
        if x.width() != self.config.width {
            return Err(Error::WidthMismatch {
                left: self.config.width,
                right: x.width(),
            });
        }
        if let Some(weights) = self.store.get(x.bits()) {
            return Ok(Prediction {
                distribution: Some(LabelDistribution::from_accumulator(weights)?),
                matched: true,
                fallback_radius_used: None,
            });
        }
        match fallback {
            Fallback::None => Ok(Prediction::unmatched()),
            Fallback::Expand { max_extra_radius } => {
                for d in 1..=max_extra_radius.min(self.config.width) {
                    let mut acc = LabelWeights::zeros(self.class_count)?;
                    let mut found = false;
                    for member in ring_enumerate(x, d)? {
                        if let Some(weights) = self.store.get(member.bits()) {
                            acc.merge_slice(weights);
                            found = true;
                        }
                    }
                    if found {
                        return Ok(Prediction {
                            distribution: Some(acc.normalize()?),
                            matched: false,
                            fallback_radius_used: Some(d),
                        });
                    }
                }
                Ok(Prediction::unmatched())
            }
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn width(&self) -> u8 {
        self.config.width
    }

    pub fn radius(&self) -> HammingRadius {
        self.config.radius
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Number of training points absorbed.
    pub fn trained_count(&self) -> u64 {
        self.trained_count
    }

    /// Number of non-null slots.
    pub fn entry_count(&self) -> u64 {
        self.store.entry_count()
    }

    /// Raw accumulated weights at one codeword index, if the slot exists.
    pub fn entry(&self, code: Codeword) -> Option<&[f64]> {
        if code.width() != self.config.width {
            return None;
        }
        self.store.get(code.bits())
    }

    /// All `(index, weights)` entries in ascending index order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, &[f64])> + '_ {
        self.store.sorted_entries()
    }

    /// Serialize to the versioned little-endian model format:
    /// magic, version, `f`, `e`, `k`, zeta tag + value, trained count, entry
    /// count, sorted entries, and a trailing CRC-32 of all preceding bytes.
    pub fn save_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = CrcWriter::new(writer);
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&[MODEL_VERSION, self.config.width, self.config.radius.get()])?;
        w.write_all(&(self.class_count as u16).to_le_bytes())?;
        w.write_all(&[self.config.zeta.tag()])?;
        w.write_all(&self.config.zeta.value().to_le_bytes())?;
        w.write_all(&self.trained_count.to_le_bytes())?;
        w.write_all(&self.entry_count().to_le_bytes())?;
        for (index, weights) in self.entries() {
            w.write_all(&index.to_le_bytes())?;
            for value in weights {
                w.write_all(&value.to_le_bytes())?;
            }
        }
        let crc = w.crc();
        let mut inner = w.into_inner();
        inner.write_all(&crc.to_le_bytes())?;
        inner.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.save_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn load_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut data = Vec::new();
        reader.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }

    /// Deserialize a model, verifying length, checksum, and every structural
    /// invariant of the entry map.
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < MODEL_MAGIC.len() {
            return Err(Error::Truncated);
        }
        if &data[..MODEL_MAGIC.len()] != MODEL_MAGIC {
            return Err(Error::BadMagic);
        }
        if data.len() < MODEL_HEADER_LEN + 4 {
            return Err(Error::Truncated);
        }
        let version = data[5];
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }

        let width = data[6];
        let radius = data[7];
        let class_count = u16::from_le_bytes([data[8], data[9]]) as usize;
        let zeta_tag = data[10];
        let zeta_value = f64::from_le_bytes(data[11..19].try_into().unwrap());
        let trained_count = u64::from_le_bytes(data[19..27].try_into().unwrap());
        let entry_count = u64::from_le_bytes(data[27..35].try_into().unwrap());

        let entry_len = 4u64 + 8 * class_count as u64;
        let expected = MODEL_HEADER_LEN as u64 + entry_count.saturating_mul(entry_len) + 4;
        if (data.len() as u64) < expected {
            return Err(Error::Truncated);
        }
        if data.len() as u64 > expected {
            return Err(Error::CorruptModel("trailing bytes after checksum".into()));
        }

        let body = &data[..data.len() - 4];
        let stored = u32::from_le_bytes(data[data.len() - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }

        if width == 0 || width > MAX_WIDTH {
            return Err(Error::CorruptModel(format!("width {width} out of range")));
        }
        if radius > width {
            return Err(Error::CorruptModel(format!(
                "radius {radius} exceeds width {width}"
            )));
        }
        if !(2..=usize::from(u16::MAX)).contains(&class_count) {
            return Err(Error::CorruptModel(format!(
                "class count {class_count} out of range"
            )));
        }
        if entry_count > 1u64 << width {
            return Err(Error::CorruptModel(format!(
                "entry count {entry_count} exceeds 2^{width}"
            )));
        }
        let zeta = ZetaPolicy::from_tag(zeta_tag, zeta_value)?;
        let config = TrainConfig::new(width, HammingRadius::new(radius))?.with_zeta(zeta)?;

        let mut table = Self::new(config, class_count)?;
        let mut pos = MODEL_HEADER_LEN;
        let mut previous: Option<u32> = None;
        for _ in 0..entry_count {
            let index = u32::from_le_bytes(body[pos..pos + 4].try_into().unwrap());
            pos += 4;
            if u64::from(index) >= 1u64 << width {
                return Err(Error::CorruptModel(format!("entry index {index} out of range")));
            }
            if previous.is_some_and(|p| p >= index) {
                return Err(Error::CorruptModel("entry indices not strictly ascending".into()));
            }
            previous = Some(index);
            let mut weights = vec![0.0f64; class_count];
            for w in weights.iter_mut() {
                *w = f64::from_le_bytes(body[pos..pos + 8].try_into().unwrap());
                pos += 8;
                if !w.is_finite() || *w < 0.0 {
                    return Err(Error::CorruptModel(format!(
                        "entry {index} weight {w} is negative or not finite"
                    )));
                }
            }
            if !weights.iter().any(|w| *w > 0.0) {
                return Err(Error::CorruptModel(format!("entry {index} has no mass")));
            }
            table.store.add_weights(index, &weights);
        }
        table.trained_count = trained_count;
        Ok(table)
    }
}

/// Semantic equality: configuration (width, radius, zeta), class count,
/// trained count, and the exact entry map. The storage layout and memory
/// budget are representation details and do not participate.
impl PartialEq for SupervisedHashTable {
    fn eq(&self, other: &Self) -> bool {
        if self.config.width != other.config.width
            || self.config.radius != other.config.radius
            || self.config.zeta != other.config.zeta
            || self.class_count != other.class_count
            || self.trained_count != other.trained_count
            || self.entry_count() != other.entry_count()
        {
            return false;
        }
        self.entries()
            .zip(other.entries())
            .all(|((ia, wa), (ib, wb))| ia == ib && wa == wb)
    }
}

struct CrcWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn new(inner: W) -> Self {
        Self {
            inner,
            hasher: crc32fast::Hasher::new(),
        }
    }

    fn crc(&self) -> u32 {
        self.hasher.clone().finalize()
    }

    fn into_inner(self) -> W {
        self.inner
    }
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(width: u8, radius: u8) -> TrainConfig {
        TrainConfig::new(width, HammingRadius::new(radius)).unwrap()
    }

    fn crisp(label: u16, k: usize) -> LabelDistribution {
        LabelDistribution::crisp(LabelId(label), k).unwrap()
    }

    fn code(bits: u32, width: u8) -> Codeword {
        Codeword::new(bits, width).unwrap()
    }

    #[test]
    fn single_point_ball_expansion() {
        // Ball of radius 1 around 0b0000 has 5 members (binomial oracle).
        let training = [(code(0b0000, 4), crisp(0, 2))];
        let table = SupervisedHashTable::build(&training, config(4, 1), 2).unwrap();
        assert_eq!(table.entry_count(), 5);
        for (_, weights) in table.entries() {
            assert_eq!(weights, &[1.0, 0.0]);
        }
    }

    #[test]
    fn empty_build_leaves_every_query_unmatched() {
        let table = SupervisedHashTable::build(&[], config(4, 1), 2).unwrap();
        assert_eq!(table.entry_count(), 0);
        assert_eq!(table.trained_count(), 0);
        for bits in 0..16u32 {
            let p = table.query(code(bits, 4), Fallback::None).unwrap();
            assert!(!p.matched && p.distribution.is_none());
        }
    }

    #[test]
    fn identical_codewords_accumulate_fuzziness() {
        let c = code(0b1010, 4);
        let training = [(c, crisp(0, 2)), (c, crisp(1, 2))];
        let table = SupervisedHashTable::build(&training, config(4, 0), 2).unwrap();
        assert_eq!(table.entry_count(), 1);
        assert_eq!(table.entry(c).unwrap(), &[1.0, 1.0]);
        let p = table.query(c, Fallback::None).unwrap();
        assert_eq!(p.distribution.unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn query_hits_within_ball_and_misses_outside() {
        let center = code(0b0000, 4);
        let table =
            SupervisedHashTable::build(&[(center, crisp(0, 2))], config(4, 1), 2).unwrap();

        let exact = table.query(center, Fallback::None).unwrap();
        assert!(exact.matched);
        assert_eq!(exact.distribution.unwrap().probs(), &[1.0, 0.0]);

        let near = table.query(code(0b0001, 4), Fallback::None).unwrap();
        assert!(near.matched);
        assert_eq!(near.distribution.unwrap().probs(), &[1.0, 0.0]);

        let far = table.query(code(0b0011, 4), Fallback::None).unwrap();
        assert!(!far.matched && far.distribution.is_none());
    }

    #[test]
    fn fallback_expands_to_first_nonempty_ring() {
        let center = code(0b0000, 4);
        let table =
            SupervisedHashTable::build(&[(center, crisp(1, 2))], config(4, 0), 2).unwrap();

        let q = code(0b0011, 4);
        assert!(!table.query(q, Fallback::None).unwrap().is_answered());

        let miss = table
            .query(q, Fallback::Expand { max_extra_radius: 1 })
            .unwrap();
        assert!(!miss.is_answered());

        let hit = table
            .query(q, Fallback::Expand { max_extra_radius: 2 })
            .unwrap();
        assert!(!hit.matched);
        assert_eq!(hit.fallback_radius_used, Some(2));
        assert_eq!(hit.distribution.unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn absorb_into_empty_equals_single_build() {
        let point = (code(0b0110, 4), crisp(1, 2));
        let built = SupervisedHashTable::build(std::slice::from_ref(&point), config(4, 1), 2)
            .unwrap();
        let mut absorbed = SupervisedHashTable::new(config(4, 1), 2).unwrap();
        absorbed.absorb(point.0, &point.1).unwrap();
        assert_eq!(built, absorbed);
    }

    #[test]
    fn absorbing_twice_doubles_weights() {
        let c = code(0b0101, 4);
        let mut table = SupervisedHashTable::new(config(4, 1), 2).unwrap();
        table.absorb(c, &crisp(0, 2)).unwrap();
        let once: Vec<(u32, Vec<f64>)> = table
            .entries()
            .map(|(i, w)| (i, w.to_vec()))
            .collect();
        table.absorb(c, &crisp(0, 2)).unwrap();
        for (i, w) in once {
            let doubled: Vec<f64> = w.iter().map(|x| x * 2.0).collect();
            assert_eq!(table.entry(code(i, 4)).unwrap(), &doubled[..]);
        }
        assert_eq!(table.trained_count(), 2);
    }

    #[test]
    fn distance_decay_weights_by_ring() {
        let center = code(0b0000, 4);
        let cfg = config(4, 1)
            .with_zeta(ZetaPolicy::DistanceDecay(1.0))
            .unwrap();
        let table = SupervisedHashTable::build(&[(center, crisp(0, 2))], cfg, 2).unwrap();
        assert_eq!(table.entry(center).unwrap(), &[1.0, 0.0]);
        assert_eq!(table.entry(code(0b0001, 4)).unwrap(), &[0.5, 0.0]);
    }

    #[test]
    fn width_and_class_mismatches_are_rejected() {
        let mut table = SupervisedHashTable::new(config(4, 1), 2).unwrap();
        assert!(table.absorb(code(0, 5), &crisp(0, 2)).is_err());
        assert!(table.absorb(code(0, 4), &crisp(0, 3)).is_err());
        assert!(table.query(code(0, 5), Fallback::None).is_err());
    }

    #[test]
    fn dense_budget_refusal_and_auto_fallback() {
        let tight = config(20, 1).with_memory_budget(1024);
        let explicit = tight.with_storage(StorageMode::Dense);
        assert!(matches!(
            SupervisedHashTable::new(explicit, 2),
            Err(Error::BudgetExceeded { .. })
        ));
        // Auto silently picks the sparse layout under the same budget.
        let auto = SupervisedHashTable::new(tight, 2).unwrap();
        assert!(matches!(auto.store, EntryStore::Sparse { .. }));
    }

    #[test]
    fn sparse_projected_budget_refusal() {
        let cfg = config(20, 2)
            .with_storage(StorageMode::Sparse)
            .with_memory_budget(4096);
        let training: Vec<_> = (0..100u32).map(|i| (code(i, 20), crisp(0, 2))).collect();
        assert!(matches!(
            SupervisedHashTable::build(&training, cfg, 2),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn save_load_round_trip_empty() {
        let table = SupervisedHashTable::new(config(8, 2), 2).unwrap();
        let bytes = table.to_bytes();
        let loaded = SupervisedHashTable::from_bytes(&bytes).unwrap();
        assert_eq!(table, loaded);
        assert_eq!(bytes, loaded.to_bytes());
    }

    #[test]
    fn save_load_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let training: Vec<_> = (0..200)
            .map(|_| {
                (
                    code(rng.random_range(0..1 << 10), 10),
                    crisp(rng.random_range(0..3), 3),
                )
            })
            .collect();
        let cfg = config(10, 2).with_zeta(ZetaPolicy::DistanceDecay(0.75)).unwrap();
        let table = SupervisedHashTable::build(&training, cfg, 3).unwrap();
        let bytes = table.to_bytes();
        let loaded = SupervisedHashTable::from_bytes(&bytes).unwrap();
        assert_eq!(table, loaded);
        // Deterministic serialization: re-saving is byte-identical.
        assert_eq!(bytes, loaded.to_bytes());
    }

    #[test]
    fn corrupted_stream_fails_checksum() {
        let table =
            SupervisedHashTable::build(&[(code(0b0101, 8), crisp(0, 2))], config(8, 1), 2)
                .unwrap();
        let mut bytes = table.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            SupervisedHashTable::from_bytes(&bytes),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn truncation_magic_and_version_errors() {
        let table = SupervisedHashTable::new(config(8, 1), 2).unwrap();
        let bytes = table.to_bytes();

        assert!(matches!(
            SupervisedHashTable::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated)
        ));
        assert!(matches!(
            SupervisedHashTable::from_bytes(&bytes[..3]),
            Err(Error::Truncated)
        ));

        let mut garbled = bytes.clone();
        garbled[0] = b'X';
        assert!(matches!(
            SupervisedHashTable::from_bytes(&garbled),
            Err(Error::BadMagic)
        ));

        let mut future = bytes.clone();
        future[5] = 9;
        assert!(matches!(
            SupervisedHashTable::from_bytes(&future),
            Err(Error::UnsupportedVersion(9))
        ));

        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(
            SupervisedHashTable::from_bytes(&trailing),
            Err(Error::CorruptModel(_))
        ));
    }

    fn random_training(
        rng: &mut ChaCha8Rng,
        width: u8,
        n: usize,
        k: usize,
    ) -> Vec<(Codeword, LabelDistribution)> {
        (0..n)
            .map(|_| {
                let bits = (rng.random_range(0..1u64 << width)) as u32;
                (
                    code(bits, width),
                    crisp(rng.random_range(0..k as u16), k),
                )
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn build_is_order_independent(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut training = random_training(&mut rng, 8, 30, 2);
            let cfg = config(8, 2);
            let a = SupervisedHashTable::build(&training, cfg, 2).unwrap();
            training.shuffle(&mut rng);
            let b = SupervisedHashTable::build(&training, cfg, 2).unwrap();
            // Crisp labels with constant zeta 1 accumulate exactly.
            prop_assert!(a == b);
        }

        #[test]
        fn absorb_all_matches_full_build(seed in any::<u64>(), split in 0usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let training = random_training(&mut rng, 8, 40, 2);
            let split = split.min(training.len());
            let cfg = config(8, 1);
            let full = SupervisedHashTable::build(&training, cfg, 2).unwrap();
            let mut incremental =
                SupervisedHashTable::build(&training[..split], cfg, 2).unwrap();
            for (c, l) in &training[split..] {
                incremental.absorb(*c, l).unwrap();
            }
            prop_assert!(full == incremental);
        }

        #[test]
        fn parallel_build_matches_sequential(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let training = random_training(&mut rng, 9, 120, 3);

            // Integer-valued increments accumulate exactly: bit-identical.
            let exact = config(9, 2);
            let seq = SupervisedHashTable::build(&training, exact, 3).unwrap();
            let par = SupervisedHashTable::build_parallel(&training, exact, 3).unwrap();
            prop_assert!(seq == par);

            // Inexact increments only agree to float rounding.
            let decay = config(9, 2).with_zeta(ZetaPolicy::DistanceDecay(0.7)).unwrap();
            let seq = SupervisedHashTable::build(&training, decay, 3).unwrap();
            let par = SupervisedHashTable::build_parallel(&training, decay, 3).unwrap();
            prop_assert_eq!(seq.entry_count(), par.entry_count());
            for ((ia, wa), (ib, wb)) in seq.entries().zip(par.entries()) {
                prop_assert_eq!(ia, ib);
                for (a, b) in wa.iter().zip(wb) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn dense_and_sparse_agree(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let training = random_training(&mut rng, 8, 25, 2);
            let dense = SupervisedHashTable::build(
                &training,
                config(8, 1).with_storage(StorageMode::Dense),
                2,
            )
            .unwrap();
            let sparse = SupervisedHashTable::build(
                &training,
                config(8, 1).with_storage(StorageMode::Sparse),
                2,
            )
            .unwrap();
            prop_assert!(dense == sparse);
        }

        #[test]
        fn entry_count_matches_exhaustive_union(seed in any::<u64>(), e in 0u8..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let width = 9u8;
            let training = random_training(&mut rng, width, 20, 2);
            let cfg = config(width, e);
            let table = SupervisedHashTable::build(&training, cfg, 2).unwrap();

            let mut union = 0u64;
            for bits in 0..(1u32 << width) {
                let q = code(bits, width);
                let covered = training.iter().any(|(c, _)| {
                    crate::bitcode::hamming_distance(*c, q).unwrap() <= u32::from(e)
                });
                if covered {
                    union += 1;
                }
                let matched = table.query(q, Fallback::None).unwrap().matched;
                prop_assert_eq!(matched, covered);
            }
            prop_assert_eq!(table.entry_count(), union);
            let bound = training.len() as u64 * ball_size(width, HammingRadius::new(e)).unwrap();
            prop_assert!(table.entry_count() <= bound);
        }

        #[test]
        fn round_trip_any_table(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let training = random_training(&mut rng, 7, 15, 2);
            let table = SupervisedHashTable::build(&training, config(7, 1), 2).unwrap();
            let loaded = SupervisedHashTable::from_bytes(&table.to_bytes()).unwrap();
            prop_assert!(table == loaded);
        }
    }
}
