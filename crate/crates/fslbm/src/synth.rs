//! Seeded synthetic dataset generators for benchmarks and validation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bitcode::Codeword;
use crate::error::Result;
use crate::labels::{LabelDistribution, LabelId};

/// Uniformly random codeword of the given width.
pub fn random_codeword(rng: &mut ChaCha8Rng, width: u8) -> Codeword {
    let bits = rng.random_range(0..1u64 << width) as u32;
    Codeword::new(bits, width).expect("sampled bits fit the width")
}

/// `n` uniformly random codewords with uniformly random crisp labels.
pub fn uniform_crisp_dataset(
    rng: &mut ChaCha8Rng,
    width: u8,
    n: usize,
    class_count: usize,
) -> Result<Vec<(Codeword, LabelDistribution)>> {
    (0..n)
        .map(|_| {
            let code = random_codeword(rng, width);
            let label = LabelId(rng.random_range(0..class_count as u16));
            Ok((code, LabelDistribution::crisp(label, class_count)?))
        })
        .collect()
}

/// Flip each bit of `center` independently with probability `p`.
pub fn perturb(rng: &mut ChaCha8Rng, center: Codeword, p: f64) -> Codeword {
    let mut bits = center.bits();
    for pos in 0..center.width() {
        if rng.random_bool(p) {
            bits ^= 1 << pos;
        }
    }
    Codeword::new(bits, center.width()).expect("perturbation preserves width")
}

/// Flip exactly `flips` distinct random bits of `center`.
pub fn flip_exact(rng: &mut ChaCha8Rng, center: Codeword, flips: u8) -> Codeword {
    debug_assert!(flips <= center.width());
    let width = usize::from(center.width());
    let mut positions: Vec<usize> = (0..width).collect();
    let mut bits = center.bits();
    for i in 0..usize::from(flips) {
        let j = rng.random_range(i..width);
        positions.swap(i, j);
        bits ^= 1 << positions[i];
    }
    Codeword::new(bits, center.width()).expect("flip preserves width")
}

/// Cluster dataset: each point picks a random prototype, perturbs each bit
/// with probability `bit_flip_prob`, and takes the prototype's class, flipped
/// to a uniformly random other class with probability `label_noise_prob`.
pub fn noisy_prototype_dataset(
    rng: &mut ChaCha8Rng,
    prototypes: &[(Codeword, LabelId)],
    class_count: usize,
    n: usize,
    bit_flip_prob: f64,
    label_noise_prob: f64,
) -> Result<Vec<(Codeword, LabelDistribution)>> {
    assert!(!prototypes.is_empty());
    (0..n)
        .map(|_| {
            let (center, label) = prototypes[rng.random_range(0..prototypes.len())];
            let code = perturb(rng, center, bit_flip_prob);
            let mut id = label;
            if label_noise_prob > 0.0 && rng.random_bool(label_noise_prob) {
                let offset = rng.random_range(1..class_count as u16);
                id = LabelId((label.0 + offset) % class_count as u16);
            }
            Ok((code, LabelDistribution::crisp(id, class_count)?))
        })
        .collect()
}
