//! Deterministic synthetic image classes for self-contained runs.
//!
//! Real digit data shares visual strokes across classes, which is exactly
//! the structure that makes parameter attacks bleed into other images. The
//! generator reproduces that: classes are built from a shared dictionary of
//! stroke patterns, plus per-sample intensity jitter and pixel noise, then
//! quantized to the u8/255 grid so in-memory batches match IDX files
//! written to disk bit for bit.

use fsn_core::{FeatureBatch, FeatureSource, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub dim: usize,
    pub classes: usize,
    pub train_n: usize,
    pub test_n: usize,
    pub seed: u64,
    /// Per-pixel Gaussian noise level.
    pub noise: f64,
    /// Shared stroke dictionary size; smaller means more overlap between
    /// classes.
    pub dictionary_strokes: usize,
    /// Strokes combined into each class prototype.
    pub strokes_per_class: usize,
    /// Fraction of samples blended toward another class, producing the
    /// near-boundary mass real data has.
    pub ambiguity: f64,
    /// Writing-style modes per class, each with its own stroke set. More
    /// modes spread a class over feature space, so small anchor sets leave
    /// parts of it unguarded.
    pub modes_per_class: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 784,
            classes: 10,
            train_n: 6000,
            test_n: 2000,
            seed: 7,
            noise: 0.22,
            dictionary_strokes: 20,
            strokes_per_class: 3,
            ambiguity: 0.08,
            modes_per_class: 2,
        }
    }
}

struct Stroke {
    /// (pixel index, base intensity) pairs.
    cells: Vec<(usize, f64)>,
}

fn build_dictionary(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Stroke> {
    (0..cfg.dictionary_strokes)
        .map(|_| {
            let len = rng.gen_range(50..90usize).min(cfg.dim);
            let start = rng.gen_range(0..cfg.dim);
            let cells = (0..len)
                .map(|k| {
                    let idx = (start + k) % cfg.dim;
                    // Bright in the middle, fading toward the ends.
                    let t = k as f64 / (len - 1).max(1) as f64;
                    let intensity = 0.55 + 0.45 * (core::f64::consts::PI * t).sin();
                    (idx, intensity)
                })
                .collect();
            Stroke { cells }
        })
        .collect()
}

/// Picks distinct strokes for every class mode; stroke sets may overlap
/// between modes and classes but never coincide entirely.
fn assign_strokes(
    sets: usize,
    per_class: usize,
    dictionary_len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut taken: Vec<Vec<usize>> = Vec::new();
    while taken.len() < sets {
        let mut picks = Vec::new();
        while picks.len() < per_class {
            let s = rng.gen_range(0..dictionary_len);
            if !picks.contains(&s) {
                picks.push(s);
            }
        }
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        if taken.iter().any(|existing| {
            let mut e = existing.clone();
            e.sort_unstable();
            e == sorted
        }) {
            continue;
        }
        taken.push(picks);
    }
    taken
}

fn add_strokes(
    x: &mut [f64],
    strokes: &[usize],
    dictionary: &[Stroke],
    weight: f64,
    rng: &mut ChaCha8Rng,
) {
    for &s in strokes {
        let scale = weight * rng.gen_range(0.65..1.35);
        for &(idx, v) in &dictionary[s].cells {
            x[idx] += scale * v;
        }
    }
}

fn sample_image(
    class: usize,
    mode_strokes: &[Vec<usize>],
    dictionary: &[Stroke],
    noise: &Normal<f64>,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let pick_mode = |class: usize, rng: &mut ChaCha8Rng| {
        class * cfg.modes_per_class + rng.gen_range(0..cfg.modes_per_class)
    };
    let mut x = vec![0.0; cfg.dim];
    let mode = pick_mode(class, rng);
    // Some samples blend toward a second class while keeping their label,
    // so the trained decision boundary sits close to real data.
    let blend = if rng.gen_bool(cfg.ambiguity) {
        let other = loop {
            let o = rng.gen_range(0..cfg.classes);
            if o != class {
                break o;
            }
        };
        let lambda = rng.gen_range(0.25..0.5);
        Some((pick_mode(other, rng), lambda))
    } else {
        None
    };
    match blend {
        Some((other_mode, lambda)) => {
            add_strokes(&mut x, &mode_strokes[mode], dictionary, 1.0 - lambda, rng);
            add_strokes(&mut x, &mode_strokes[other_mode], dictionary, lambda, rng);
        }
        None => add_strokes(&mut x, &mode_strokes[mode], dictionary, 1.0, rng),
    }
    for v in &mut x {
        *v += noise.sample(rng);
        // Snap to the u8 grid used by IDX files.
        *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    x
}

/// Generates a (train, test) pair of labeled batches, fully determined by
/// the config.
pub fn generate(cfg: &SynthConfig) -> (FeatureBatch, FeatureBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dictionary = build_dictionary(cfg, &mut rng);
    let mode_strokes = assign_strokes(
        cfg.classes * cfg.modes_per_class,
        cfg.strokes_per_class,
        dictionary.len(),
        &mut rng,
    );
    let noise = Normal::new(0.0, cfg.noise).expect("valid noise level");

    let mut make_split = |n: usize| {
        let mut features = Matrix::zeros(n, cfg.dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % cfg.classes;
            let img = sample_image(class, &mode_strokes, &dictionary, &noise, cfg, &mut rng);
            features.row_mut(i).copy_from_slice(&img);
            labels.push(class);
        }
        FeatureBatch::new(features, labels, FeatureSource::Imported).expect("nonempty")
    };

    let train = make_split(cfg.train_n);
    let test = make_split(cfg.test_n);
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            train_n: 50,
            test_n: 20,
            ..Default::default()
        };
        let (a_train, a_test) = generate(&cfg);
        let (b_train, b_test) = generate(&cfg);
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
    }

    #[test]
    fn values_sit_on_u8_grid() {
        let cfg = SynthConfig {
            train_n: 30,
            test_n: 10,
            ..Default::default()
        };
        let (train, _) = generate(&cfg);
        for &v in train.features.as_slice() {
            let scaled = v * 255.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn labels_cycle_over_classes() {
        let cfg = SynthConfig {
            train_n: 25,
            test_n: 10,
            classes: 5,
            ..Default::default()
        };
        let (train, _) = generate(&cfg);
        for (i, &l) in train.labels.iter().enumerate() {
            assert_eq!(l, i % 5);
        }
    }
}
