//! Simulation and inversion of the two cavity measurements: the linewidth
//! scan calibrated by modulation sidebands, and the retro-reflection scan
//! that locates the two wavefront-matching points of a curved mirror.

mod retro;
mod sweep;

pub use retro::{measure_roc, mode_coupling, retro_scan, RetroScan, RetroScanSettings, RocMeasurement, ScanRegime};
pub use sweep::{fit_sweep, simulate_sweep, SweepFit, SweepSimulation, SweepTrace, MIN_SWEEP_SAMPLES};

/// Centred moving average; the window shrinks at the ends.
pub(crate) fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Indices of local maxima whose topographic prominence is at least
/// `min_prominence`, sorted by decreasing height.
pub(crate) fn prominent_peaks(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let prominence = |p: usize| {
        let h = values[p];
        let mut left_min = h;
        for k in (0..p).rev() {
            if values[k] > h {
                break;
            }
            left_min = left_min.min(values[k]);
        }
        let mut right_min = h;
        for &v in &values[p + 1..] {
            if v > h {
                break;
            }
            right_min = right_min.min(v);
        }
        h - left_min.max(right_min)
    };
    let mut kept: Vec<usize> = peaks.into_iter().filter(|&p| prominence(p) >= min_prominence).collect();
    kept.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_edges() {
        let v = moving_average(&[1.0, 2.0, 3.0, 4.0, 5.0], 3);
        assert_eq!(v, vec![1.5, 2.0, 3.0, 4.0, 4.5]);
    }

    #[test]
    fn peaks_by_prominence() {
        let v = [0.0, 1.0, 0.0, 0.5, 0.45, 0.5, 0.0, 2.0, 2.0, 0.0];
        let p = prominent_peaks(&v, 0.2);
        assert_eq!(p, vec![7, 1, 3, 5]);
        assert_eq!(prominent_peaks(&v, 1.5), vec![7]);
    }
}
