//! Scoring predictions against crisp or fuzzy ground truth, the brute-force
//! oracles used to validate the table, and the build/query scaling bench.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bitcode::{hamming_distance, Codeword, HammingRadius};
use crate::error::{Error, Result};
use crate::labels::{LabelDistribution, LabelWeights};
use crate::sht::{Fallback, Prediction, SupervisedHashTable, TrainConfig};
use crate::synth;

/// Evaluation metrics over one test pass.
///
/// Denominators are explicit: `crisp_accuracy` and `fuzzy_accuracy` are over
/// the `answered_count` queries that produced a distribution (directly or via
/// fallback), while `total_accuracy` counts crisp hits over all `test_count`
/// queries, so unanswered queries count as misses there.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Crisp hits over all test points.
    pub total_accuracy: f64,
    /// Argmax agreement over answered queries.
    pub crisp_accuracy: f64,
    /// Truth argmax carried positive predicted probability, over answered.
    pub fuzzy_accuracy: f64,
    /// Mean prediction fuzziness over answered queries.
    pub fuzziness_mean: f64,
    /// `1 - crisp_accuracy`.
    pub boolean_error: f64,
    /// `1 - fuzzy_accuracy`.
    pub fuzzy_error: f64,
    /// Queries with no distribution over all test points.
    pub unmatched_rate: f64,
    /// Mean total-variation distance between prediction and truth, over
    /// answered queries.
    pub mean_total_variation: f64,
    pub test_count: usize,
    pub answered_count: usize,
    /// Table build time, when the caller supplies it.
    pub build_seconds: Option<f64>,
    /// Wall time of the sequential query pass divided by `test_count`.
    pub mean_query_seconds: f64,
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "total_accuracy,crisp_accuracy,fuzzy_accuracy,fuzziness_mean,boolean_error,\
         fuzzy_error,unmatched_rate,mean_total_variation,test_count,answered_count,\
         build_seconds,mean_query_seconds"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.total_accuracy,
            self.crisp_accuracy,
            self.fuzzy_accuracy,
            self.fuzziness_mean,
            self.boolean_error,
            self.fuzzy_error,
            self.unmatched_rate,
            self.mean_total_variation,
            self.test_count,
            self.answered_count,
            self.build_seconds.map_or(String::new(), |s| s.to_string()),
            self.mean_query_seconds,
        )
    }

    pub fn with_build_seconds(mut self, seconds: f64) -> Self {
        self.build_seconds = Some(seconds);
        self
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "test points:          {}", self.test_count)?;
        writeln!(
            f,
            "answered:             {} ({} unmatched)",
            self.answered_count,
            self.test_count - self.answered_count
        )?;
        writeln!(f, "total accuracy:       {:.4}", self.total_accuracy)?;
        writeln!(f, "crisp accuracy:       {:.4}", self.crisp_accuracy)?;
        writeln!(f, "fuzzy accuracy:       {:.4}", self.fuzzy_accuracy)?;
        writeln!(f, "boolean error:        {:.4}", self.boolean_error)?;
        writeln!(f, "fuzzy error:          {:.4}", self.fuzzy_error)?;
        writeln!(f, "unmatched rate:       {:.4}", self.unmatched_rate)?;
        writeln!(f, "mean fuzziness:       {:.4}", self.fuzziness_mean)?;
        writeln!(f, "mean total variation: {:.4}", self.mean_total_variation)?;
        if let Some(b) = self.build_seconds {
            writeln!(f, "build time:           {b:.6} s")?;
        }
        write!(f, "mean query time:      {:.3e} s", self.mean_query_seconds)
    }
}

/// Run every test query against the table and score the predictions.
///
/// The query pass is sequential so the reported per-query time is clean;
/// scoring of the collected predictions parallelizes over test points.
pub fn evaluate(
    table: &SupervisedHashTable,
    test: &[(Codeword, LabelDistribution)],
    fallback: Fallback,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    for (_, truth) in test {
        if truth.class_count() != table.class_count() {
            return Err(Error::ClassMismatch {
                expected: table.class_count(),
                got: truth.class_count(),
            });
        }
    }

    let start = Instant::now();
    let predictions = test
        .iter()
        .map(|(code, _)| table.query(*code, fallback))
        .collect::<Result<Vec<Prediction>>>()?;
    let mean_query_seconds = start.elapsed().as_secs_f64() / test.len() as f64;

    struct PointScore {
        answered: bool,
        crisp_hit: bool,
        fuzzy_hit: bool,
        fuzziness: f64,
        total_variation: f64,
    }

    let scores: Vec<PointScore> = predictions
        .par_iter()
        .zip(test.par_iter())
        .map(|(pred, (_, truth))| match &pred.distribution {
            Some(dist) => {
                let truth_label = truth.argmax_label();
                PointScore {
                    answered: true,
                    crisp_hit: dist.argmax_label() == truth_label,
                    fuzzy_hit: dist.probs()[truth_label.index()] > 0.0,
                    fuzziness: dist.fuzziness(),
                    total_variation: dist
                        .total_variation(truth)
                        .expect("class counts checked above"),
                }
            }
            None => PointScore {
                answered: false,
                crisp_hit: false,
                fuzzy_hit: false,
                fuzziness: 0.0,
                total_variation: 0.0,
            },
        })
        .collect();

    let m = test.len();
    let answered = scores.iter().filter(|s| s.answered).count();
    let crisp_hits = scores.iter().filter(|s| s.crisp_hit).count();
    let fuzzy_hits = scores.iter().filter(|s| s.fuzzy_hit).count();
    let fuzziness_sum: f64 = scores.iter().map(|s| s.fuzziness).sum();
    let tv_sum: f64 = scores.iter().map(|s| s.total_variation).sum();

    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let crisp_accuracy = frac(crisp_hits, answered);
    let fuzzy_accuracy = frac(fuzzy_hits, answered);

    Ok(EvalReport {
        total_accuracy: frac(crisp_hits, m),
        crisp_accuracy,
        fuzzy_accuracy,
        fuzziness_mean: if answered == 0 { 0.0 } else { fuzziness_sum / answered as f64 },
        boolean_error: 1.0 - crisp_accuracy,
        fuzzy_error: 1.0 - fuzzy_accuracy,
        unmatched_rate: frac(m - answered, m),
        mean_total_variation: if answered == 0 { 0.0 } else { tv_sum / answered as f64 },
        test_count: m,
        answered_count: answered,
        build_seconds: None,
        mean_query_seconds,
    })
}

/// Brute-force reference for [`SupervisedHashTable::query`] with
/// [`Fallback::None`]: a linear scan over the training points, accumulating
/// `zeta(HD)` for every point within the radius, then normalizing. Shares no
/// code with the table build or lookup paths.
pub fn oracle_predict(
    training: &[(Codeword, LabelDistribution)],
    config: &TrainConfig,
    x: Codeword,
) -> Result<Prediction> {
    config.validate()?;
    if x.width() != config.width {
        return Err(Error::WidthMismatch {
            left: config.width,
            right: x.width(),
        });
    }
    let Some(class_count) = training.first().map(|(_, d)| d.class_count()) else {
        return Ok(Prediction::unmatched());
    };
    let mut acc = LabelWeights::zeros(class_count)?;
    let mut found = false;
    for (code, dist) in training {
        let d = hamming_distance(*code, x)?;
        if d <= u32::from(config.radius.get()) {
            acc.add_scaled(dist, config.zeta.increment(d))?;
            found = true;
        }
    }
    if !found {
        return Ok(Prediction::unmatched());
    }
    Ok(Prediction {
        distribution: Some(acc.normalize()?),
        matched: true,
        fallback_radius_used: None,
    })
}

/// Exact k-nearest-neighbor baseline: scans all training points, takes the
/// `k` nearest by `(distance, position)`, and averages their distributions.
/// Returns `None` for an empty training set.
pub fn nearest_neighbor_predict(
    training: &[(Codeword, LabelDistribution)],
    x: Codeword,
    k: usize,
) -> Result<Option<LabelDistribution>> {
    assert!(k >= 1);
    if training.is_empty() {
        return Ok(None);
    }
    let mut order: Vec<(u32, usize)> = training
        .iter()
        .enumerate()
        .map(|(i, (code, _))| Ok((hamming_distance(*code, x)?, i)))
        .collect::<Result<_>>()?;
    let k = k.min(order.len());
    order.select_nth_unstable(k - 1);
    order.truncate(k);
    order.sort_unstable();

    let mut acc = LabelWeights::zeros(training[0].1.class_count())?;
    for (_, i) in order {
        acc.merge(&LabelWeights::from_vec(training[i].1.probs().to_vec())?)?;
    }
    Ok(Some(acc.normalize()?))
}

/// One row of the scaling bench.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub phi: u64,
    pub build_seconds: f64,
    pub mean_query_seconds: f64,
    pub entry_count: u64,
}

pub const BENCH_CSV_HEADER: &str = "phi,build_seconds,mean_query_seconds,entry_count";

impl BenchRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.phi, self.build_seconds, self.mean_query_seconds, self.entry_count
        )
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Measure build and query cost over a schedule of training-set sizes with
/// seeded synthetic two-class data.
///
/// Methodology: everything runs single-threaded for clean numbers.
/// `build_seconds` times the absorption of the training points into a
/// freshly created table; creating the table (whose size depends on `f`, not
/// on `phi`) happens outside the timed section. The query workload is half
/// resampled training codewords and half uniform draws, so the matched and
/// unmatched code paths both appear at every `phi` instead of the hit rate
/// tracking the table fill. Queries are warmed once and then timed. With
/// `repeats > 1` each row reports the median over that many runs.
pub fn bench_scaling(
    width: u8,
    radius: HammingRadius,
    phi_schedule: &[u64],
    query_count: usize,
    seed: u64,
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    assert!(repeats >= 1);
    assert!(query_count >= 1);
    let config = TrainConfig::new(width, radius)?;

    let mut rows = Vec::with_capacity(phi_schedule.len());
    for &phi in phi_schedule {
        let mut data_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(phi));
        let training = synth::uniform_crisp_dataset(&mut data_rng, width, phi as usize, 2)?;

        let mut query_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let queries: Vec<Codeword> = (0..query_count)
            .map(|i| {
                if i % 2 == 0 {
                    training[query_rng.random_range(0..training.len())].0
                } else {
                    synth::random_codeword(&mut query_rng, width)
                }
            })
            .collect();

        let mut build_times = Vec::with_capacity(repeats);
        let mut query_times = Vec::with_capacity(repeats);
        let mut entry_count = 0;
        for _ in 0..repeats {
            let mut table = SupervisedHashTable::new(config, 2)?;
            let start = Instant::now();
            for (code, label) in &training {
                table.absorb(*code, label)?;
            }
            build_times.push(start.elapsed().as_secs_f64());

            let mut answered = 0usize;
            for q in &queries {
                if std::hint::black_box(table.query(*q, Fallback::None)?).is_answered() {
                    answered += 1;
                }
            }
            std::hint::black_box(answered);

            let start = Instant::now();
            for q in &queries {
                std::hint::black_box(table.query(*q, Fallback::None)?);
            }
            query_times.push(start.elapsed().as_secs_f64() / query_count as f64);
            entry_count = table.entry_count();
        }

        rows.push(BenchRow {
            phi,
            build_seconds: median(&mut build_times),
            mean_query_seconds: median(&mut query_times),
            entry_count,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelId;
    use crate::sht::{StorageMode, ZetaPolicy};
    use proptest::prelude::*;
    use rand::Rng;

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
    fn separable_training_set_scores_perfectly() {
        // Centers 8 bits apart with radius 1: balls cannot collide.
        let training = vec![
            (code(0x00, 8), crisp(0, 2)),
            (code(0x03, 8), crisp(0, 2)),
            (code(0xFF, 8), crisp(1, 2)),
            (code(0xFC, 8), crisp(1, 2)),
        ];
        let table = SupervisedHashTable::build(&training, config(8, 1), 2).unwrap();
        let report = evaluate(&table, &training, Fallback::None).unwrap();
        assert_eq!(report.crisp_accuracy, 1.0);
        assert_eq!(report.total_accuracy, 1.0);
        assert_eq!(report.unmatched_rate, 0.0);
        assert_eq!(report.boolean_error, 0.0);
    }

    #[test]
    fn empty_table_scores_all_unmatched() {
        let table = SupervisedHashTable::new(config(6, 1), 2).unwrap();
        let test = vec![(code(0, 6), crisp(0, 2)), (code(63, 6), crisp(1, 2))];
        let report = evaluate(&table, &test, Fallback::None).unwrap();
        assert_eq!(report.unmatched_rate, 1.0);
        assert_eq!(report.total_accuracy, 0.0);
        assert_eq!(report.answered_count, 0);
    }

    #[test]
    fn tie_prediction_counts_as_crisp_hit_for_class_zero() {
        let c = code(0b0101, 4);
        let training = vec![(c, crisp(0, 2)), (c, crisp(1, 2))];
        let table = SupervisedHashTable::build(&training, config(4, 0), 2).unwrap();
        let report = evaluate(&table, &[(c, crisp(0, 2))], Fallback::None).unwrap();
        // [0.5, 0.5] resolves to label 0 under the lowest-id tie-break.
        assert_eq!(report.crisp_accuracy, 1.0);
        assert_eq!(report.fuzzy_accuracy, 1.0);
        let report = evaluate(&table, &[(c, crisp(1, 2))], Fallback::None).unwrap();
        assert_eq!(report.crisp_accuracy, 0.0);
        assert_eq!(report.fuzzy_accuracy, 1.0);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let table = SupervisedHashTable::new(config(4, 1), 2).unwrap();
        assert!(matches!(
            evaluate(&table, &[], Fallback::None),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn oracle_single_point_behavior() {
        let cfg = config(8, 2);
        let training = vec![(code(0x0F, 8), crisp(1, 2))];
        let near = oracle_predict(&training, &cfg, code(0x0E, 8)).unwrap();
        assert!(near.matched);
        assert_eq!(near.distribution.unwrap().probs(), &[0.0, 1.0]);
        let far = oracle_predict(&training, &cfg, code(0xF0, 8)).unwrap();
        assert!(!far.matched && far.distribution.is_none());
        let empty = oracle_predict(&[], &cfg, code(0, 8)).unwrap();
        assert!(!empty.is_answered());
    }

    #[test]
    fn nearest_neighbor_baseline_basics() {
        let training = vec![
            (code(0x00, 8), crisp(0, 2)),
            (code(0xFF, 8), crisp(1, 2)),
        ];
        let d = nearest_neighbor_predict(&training, code(0x01, 8), 1)
            .unwrap()
            .unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0]);
        let both = nearest_neighbor_predict(&training, code(0x0F, 8), 2)
            .unwrap()
            .unwrap();
        assert_eq!(both.probs(), &[0.5, 0.5]);
        assert!(nearest_neighbor_predict(&[], code(0, 8), 1).unwrap().is_none());
    }

    #[test]
    fn bench_rows_respect_entry_bound() {
        let rows = bench_scaling(10, HammingRadius::new(1), &[20, 40], 50, 7, 1).unwrap();
        assert_eq!(rows.len(), 2);
        let ball = crate::bitcode::ball_size(10, HammingRadius::new(1)).unwrap();
        for row in &rows {
            assert!(row.entry_count <= row.phi * ball);
            assert!(row.build_seconds >= 0.0 && row.mean_query_seconds >= 0.0);
        }
    }

    fn random_dataset(seed: u64, width: u8, n: usize, k: usize) -> Vec<(Codeword, LabelDistribution)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let bits = rng.random_range(0..1u64 << width) as u32;
                (code(bits, width), crisp(rng.random_range(0..k as u16), k))
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn query_matches_oracle_exhaustively(seed in any::<u64>(), e in 0u8..=2) {
            let width = 7u8;
            let training = random_dataset(seed, width, 25, 2);
            let cfg = config(width, e).with_zeta(ZetaPolicy::DistanceDecay(1.0)).unwrap();
            let table = SupervisedHashTable::build(&training, cfg, 2).unwrap();
            for bits in 0..(1u32 << width) {
                let q = code(bits, width);
                let from_table = table.query(q, Fallback::None).unwrap();
                let from_oracle = oracle_predict(&training, &cfg, q).unwrap();
                prop_assert_eq!(from_table.matched, from_oracle.matched);
                match (from_table.distribution, from_oracle.distribution) {
                    (Some(a), Some(b)) => {
                        for (x, y) in a.probs().iter().zip(b.probs()) {
                            prop_assert!((x - y).abs() < 1e-12);
                        }
                    }
                    (None, None) => {}
                    other => prop_assert!(false, "mismatch: {:?}", other),
                }
            }
        }

        #[test]
        fn fuzzy_accuracy_dominates_crisp(seed in any::<u64>()) {
            let training = random_dataset(seed, 8, 40, 3);
            let test = random_dataset(seed.wrapping_add(1), 8, 60, 3);
            let table = SupervisedHashTable::build(&training, config(8, 2), 3).unwrap();
            let report = evaluate(&table, &test, Fallback::None).unwrap();
            prop_assert!(report.fuzzy_accuracy >= report.crisp_accuracy);
            prop_assert!((report.boolean_error - (1.0 - report.crisp_accuracy)).abs() < 1e-15);
            prop_assert!((report.fuzzy_error - (1.0 - report.fuzzy_accuracy)).abs() < 1e-15);
        }

        #[test]
        fn evaluate_is_permutation_invariant(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let training = random_dataset(seed, 8, 30, 2);
            let mut test = random_dataset(seed.wrapping_add(9), 8, 40, 2);
            let table = SupervisedHashTable::build(
                &training,
                config(8, 1).with_storage(StorageMode::Sparse),
                2,
            ).unwrap();
            let a = evaluate(&table, &test, Fallback::None).unwrap();
            test.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = evaluate(&table, &test, Fallback::None).unwrap();
            prop_assert_eq!(a.answered_count, b.answered_count);
            prop_assert!((a.total_accuracy - b.total_accuracy).abs() < 1e-12);
            prop_assert!((a.crisp_accuracy - b.crisp_accuracy).abs() < 1e-12);
            prop_assert!((a.fuzzy_accuracy - b.fuzzy_accuracy).abs() < 1e-12);
            prop_assert!((a.fuzziness_mean - b.fuzziness_mean).abs() < 1e-12);
        }
    }
}
