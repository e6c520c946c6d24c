//! Synthetic datasets: noisy sine vs cosine curves of varying length, and
//! sine vs square waves where half of each class carries value spikes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::sequence::Sequence;

/// Number of spiked positions per spiked sequence.
pub const SPIKE_COUNT: usize = 5;
/// Value written at each spiked position, before noise.
pub const SPIKE_VALUE: f64 = 4.0;

fn noise(sd: f64) -> Result<Option<Normal<f64>>> {
    if !(sd.is_finite() && sd >= 0.0) {
        return Err(Error::domain(format!("noise sd must be finite and >= 0, got {sd}")));
    }
    if sd == 0.0 {
        return Ok(None);
    }
    Ok(Some(Normal::new(0.0, sd).map_err(|e| Error::domain(e.to_string()))?))
}

fn add_noise<R: Rng>(values: &mut [f64], dist: &Option<Normal<f64>>, rng: &mut R) {
    if let Some(d) = dist {
        for v in values {
            *v += d.sample(rng);
        }
    }
}

/// One full period of a curve sampled at `len` uniform points starting at phase 0.
fn period(len: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..len).map(|k| f(2.0 * PI * k as f64 / len as f64)).collect()
}

/// `n_per_class` noisy sines (label `sine`) then as many noisy cosines
/// (label `cosine`). Each curve covers one full period with a length drawn
/// uniformly from `len_range` (inclusive); amplitude 1.
pub fn gen_sine_cosine(
    n_per_class: usize,
    len_range: (usize, usize),
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = len_range;
    if !(8 <= lo && lo <= hi && hi <= 512) {
        return Err(Error::domain(format!(
            "length range must satisfy 8 <= min <= max <= 512, got {lo}..={hi}"
        )));
    }
    if n_per_class == 0 {
        return Err(Error::domain("need at least one curve per class"));
    }
    let dist = noise(noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seqs = Vec::with_capacity(2 * n_per_class);
    for (name, f) in [("sine", f64::sin as fn(f64) -> f64), ("cosine", f64::cos)] {
        for k in 0..n_per_class {
            let len = rng.random_range(lo..=hi);
            let mut v = period(len, f);
            add_noise(&mut v, &dist, &mut rng);
            seqs.push(Sequence::univariate(format!("{name}-{k:03}"), v)?.with_label(name));
        }
    }
    let metadata = BTreeMap::from([
        ("generator".to_string(), "sine_cosine".to_string()),
        ("n_per_class".to_string(), n_per_class.to_string()),
        ("len_min".to_string(), lo.to_string()),
        ("len_max".to_string(), hi.to_string()),
        ("amplitude".to_string(), "1".to_string()),
        ("periods".to_string(), "1".to_string()),
        ("noise_sd".to_string(), noise_sd.to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);
    Dataset::new(seqs, metadata)
}

/// Sine and square waves with two labelings of the same sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeData {
    /// Labels `sine` / `square`.
    pub waveform: Dataset,
    /// Labels `clean` / `spiked`.
    pub spike: Dataset,
    /// Sorted spiked positions (0-based) per sequence; empty when clean.
    pub spike_positions: Vec<Vec<usize>>,
}

/// `n_per_class` sine waves then `n_per_class` square waves, one period of
/// length `len` each. The square wave is +1 over the first half period and
/// -1 over the second. In each waveform class a random half of the
/// sequences get [`SPIKE_COUNT`] distinct random positions set to
/// [`SPIKE_VALUE`]; Gaussian noise is added afterwards.
pub fn gen_sine_square_spike(
    n_per_class: usize,
    len: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<SpikeData> {
    if len < 20 {
        return Err(Error::domain(format!("sequence length must be >= 20, got {len}")));
    }
    if n_per_class < 2 || !n_per_class.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "n_per_class must be even and >= 2 so that exactly half can be spiked, got {n_per_class}"
        )));
    }
    let dist = noise(noise_sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sine = period(len, f64::sin);
    let square: Vec<f64> = (0..len).map(|k| if 2 * k < len { 1.0 } else { -1.0 }).collect();

    let mut seqs = Vec::with_capacity(2 * n_per_class);
    let mut spike_labels = Vec::with_capacity(2 * n_per_class);
    let mut positions = Vec::with_capacity(2 * n_per_class);
    for (name, base) in [("sine", &sine), ("square", &square)] {
        let mut spiked = vec![false; n_per_class];
        for i in index::sample(&mut rng, n_per_class, n_per_class / 2) {
            spiked[i] = true;
        }
        for (k, &is_spiked) in spiked.iter().enumerate() {
            let mut v = base.clone();
            let mut pos = Vec::new();
            if is_spiked {
                pos = index::sample(&mut rng, len, SPIKE_COUNT).into_vec();
                pos.sort_unstable();
                for &p in &pos {
                    v[p] = SPIKE_VALUE;
                }
            }
            add_noise(&mut v, &dist, &mut rng);
            seqs.push(Sequence::univariate(format!("{name}-{k:03}"), v)?.with_label(name));
            spike_labels.push(if is_spiked { "spiked" } else { "clean" }.to_string());
            positions.push(pos);
        }
    }
    let metadata = BTreeMap::from([
        ("generator".to_string(), "sine_square_spike".to_string()),
        ("n_per_class".to_string(), n_per_class.to_string()),
        ("len".to_string(), len.to_string()),
        ("amplitude".to_string(), "1".to_string()),
        ("periods".to_string(), "1".to_string()),
        ("square_wave".to_string(), "+1 first half period, -1 second half".to_string()),
        ("spike_count".to_string(), SPIKE_COUNT.to_string()),
        ("spike_value".to_string(), SPIKE_VALUE.to_string()),
        ("spike_applied".to_string(), "before noise".to_string()),
        ("noise_sd".to_string(), noise_sd.to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);
    let waveform = Dataset::new(seqs, metadata)?;
    let mut spike = waveform.relabeled(&spike_labels)?;
    spike.metadata.insert("labeling".into(), "spike".into());
    let mut waveform = waveform;
    waveform.metadata.insert("labeling".into(), "waveform".into());
    Ok(SpikeData {
        waveform,
        spike,
        spike_positions: positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_first_symbols() {
        let d = gen_sine_cosine(3, (16, 16), 0.0, 7).unwrap();
        for s in &d.sequences {
            let first = s.values()[0];
            match s.label().unwrap() {
                "sine" => assert!(first.abs() < 1e-15),
                "cosine" => assert!((first - 1.0).abs() < 1e-15),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn full_period_means_vanish() {
        let d = gen_sine_cosine(10, (8, 64), 0.0, 1).unwrap();
        for s in &d.sequences {
            let mean = s.values().iter().sum::<f64>() / s.len() as f64;
            assert!(mean.abs() < 2.0 / s.len() as f64, "{}: {mean}", s.id());
        }
    }

    #[test]
    fn lengths_within_range_and_deterministic() {
        let a = gen_sine_cosine(10, (20, 40), 0.1, 99).unwrap();
        let b = gen_sine_cosine(10, (20, 40), 0.1, 99).unwrap();
        assert_eq!(a, b);
        let c = gen_sine_cosine(10, (20, 40), 0.1, 100).unwrap();
        assert_ne!(a, c);
        let st = a.length_stats();
        assert!(st.min >= 20 && st.max <= 40);
        assert_eq!(a.class_names, vec!["cosine", "sine"]);
    }

    #[test]
    fn invalid_ranges() {
        assert!(gen_sine_cosine(10, (4, 40), 0.1, 0).is_err());
        assert!(gen_sine_cosine(10, (40, 20), 0.1, 0).is_err());
        assert!(gen_sine_cosine(10, (20, 600), 0.1, 0).is_err());
        assert!(gen_sine_cosine(10, (20, 40), -1.0, 0).is_err());
    }

    #[test]
    fn spikes_before_noise() {
        let d = gen_sine_square_spike(10, 50, 0.0, 3).unwrap();
        for (s, pos) in d.waveform.sequences.iter().zip(&d.spike_positions) {
            let fours: Vec<usize> = (0..s.len()).filter(|&i| s.values()[i] == SPIKE_VALUE).collect();
            if pos.is_empty() {
                assert!(fours.is_empty());
            } else {
                assert_eq!(fours.len(), SPIKE_COUNT);
                assert_eq!(&fours, pos);
            }
        }
    }

    #[test]
    fn square_wave_values_off_spikes() {
        let d = gen_sine_square_spike(4, 21, 0.0, 5).unwrap();
        for (s, pos) in d.waveform.sequences.iter().zip(&d.spike_positions) {
            if s.label() == Some("square") {
                for (i, v) in s.values().iter().enumerate() {
                    if !pos.contains(&i) {
                        assert!(*v == 1.0 || *v == -1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn class_balance() {
        let d = gen_sine_square_spike(10, 40, 0.1, 11).unwrap();
        let wl = d.waveform.labels().unwrap();
        let sl = d.spike.labels().unwrap();
        assert_eq!(d.spike.class_names, vec!["clean", "spiked"]);
        for w in 0..2 {
            let members: Vec<usize> = (0..wl.len()).filter(|&i| wl[i] == w).collect();
            assert_eq!(members.len(), 10);
            assert_eq!(members.iter().filter(|&&i| sl[i] == 1).count(), 5);
        }
    }

    #[test]
    fn spike_parameter_errors() {
        assert!(gen_sine_square_spike(10, 19, 0.1, 0).is_err());
        assert!(gen_sine_square_spike(5, 40, 0.1, 0).is_err());
    }
}
