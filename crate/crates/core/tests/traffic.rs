use pon_mpc::traffic::{arrivals_for_slot, make_onoff_source, mix_seed, OnOffSource, SourceConfig};

const SLOT_S: f64 = 0.5e-3;
const PACKET_BITS: f64 = 10_000.0;

/// One traffic group of the desk-scale setup: four ONUs with sixteen sources each.
fn sources(hurst: f64, mean_load: f64, seed: u64) -> Vec<OnOffSource> {
    (0..64)
        .map(|s| {
            make_onoff_source(SourceConfig { hurst, peak_bps: 25e6, mean_load, packet_bits: PACKET_BITS, seed: mix_seed(seed, s, 0, 0) })
                .unwrap()
        })
        .collect()
}

fn counts(hurst: f64, mean_load: f64, seed: u64, slots: usize) -> Vec<u64> {
    let mut src = sources(hurst, mean_load, seed);
    (0..slots).map(|_| arrivals_for_slot(&mut src, SLOT_S)).collect()
}

#[test]
fn long_run_mean_matches_configured_load() {
    let slots = 1_000_000;
    for (hurst, seed) in [(0.8, 1), (0.8, 2), (0.8, 3), (0.2, 1)] {
        let total: u64 = counts(hurst, 0.3, seed, slots).iter().sum();
        let expected = 64.0 * 0.3 * 25e6 * SLOT_S * slots as f64 / PACKET_BITS;
        let err = (total as f64 - expected).abs() / expected;
        println!("hurst {hurst} seed {seed}: {total} packets against {expected}, relative error {err:.4}");
        assert!(err < 0.02, "hurst {hurst}: relative error {err}");
    }
}

/// Variance over mean of packet counts in windows of `w` slots.
fn dispersion(c: &[u64], w: usize) -> f64 {
    let sums: Vec<f64> = c.chunks_exact(w).map(|ch| ch.iter().sum::<u64>() as f64).collect();
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n / mean
}

#[test]
fn higher_hurst_is_burstier() {
    let slots = 400_000;
    let lrd = counts(0.8, 0.3, 5, slots);
    let srd = counts(0.5, 0.3, 5, slots);
    for w in [10, 100, 1000] {
        let (a, b) = (dispersion(&lrd, w), dispersion(&srd, w));
        println!("window {w}: dispersion {a:.2} at hurst 0.8, {b:.2} at hurst 0.5");
        assert!(a > b);
    }
}
