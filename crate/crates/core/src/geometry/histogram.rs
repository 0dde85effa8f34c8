use super::{GeometryError, PointCloud, Result};

/// Point counts binned along z.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightHistogram {
    pub bin_size: f64,
    pub origin_z: f64,
    pub counts: Vec<u64>,
}

impl HeightHistogram {
    pub fn bin_of(&self, z: f64) -> i64 {
        ((z - self.origin_z) / self.bin_size).floor() as i64
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        self.origin_z + (bin as f64 + 0.5) * self.bin_size
    }

    pub fn bin_low(&self, bin: usize) -> f64 {
        self.origin_z + bin as f64 * self.bin_size
    }

    pub fn bin_high(&self, bin: usize) -> f64 {
        self.origin_z + (bin as f64 + 1.0) * self.bin_size
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin_index: usize,
    pub height: u64,
    pub z_center: f64,
}

/// Bins every point by height. The origin snaps down to a multiple of `bin_h`
/// so bin edges do not depend on the lowest point.
pub fn build_height_histogram(cloud: &PointCloud, bin_h: f64) -> Result<HeightHistogram> {
    if !(bin_h > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("bin_h = {bin_h}")));
    }
    let (lo, hi) = cloud.z_range().ok_or(GeometryError::EmptyInput)?;
    let origin_z = (lo / bin_h).floor() * bin_h;
    let mut hist = HeightHistogram {
        bin_size: bin_h,
        origin_z,
        counts: Vec::new(),
    };
    let top = hist.bin_of(hi).max(0) as usize;
    hist.counts = vec![0; top + 1];
    for p in cloud.points() {
        let b = hist.bin_of(p[2]).clamp(0, top as i64) as usize;
        hist.counts[b] += 1;
    }
    Ok(hist)
}

/// Local maxima within a `±delta_f` meter window whose height exceeds
/// `p_h` times the tallest such maximum. Among equal counts inside one window
/// the lowest bin wins.
pub fn find_peaks(hist: &HeightHistogram, delta_f: f64, p_h: f64) -> Result<Vec<Peak>> {
    if !(delta_f > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("delta_f = {delta_f}")));
    }
    if !(p_h > 0.0 && p_h < 1.0) {
        return Err(GeometryError::InvalidParameter(format!("p_h = {p_h}")));
    }
    // |i - j| * bin_size <= delta_f, with slack for decimal bin sizes
    let radius = (delta_f / hist.bin_size + 1e-9).floor() as usize;
    let counts = &hist.counts;
    let mut peaks = Vec::new();
    for i in 0..counts.len() {
        let c = counts[i];
        if c == 0 {
            continue;
        }
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(counts.len() - 1);
        let below_ok = counts[lo..i].iter().all(|&o| c > o);
        let above_ok = counts[i + 1..=hi].iter().all(|&o| c >= o);
        if below_ok && above_ok {
            peaks.push(Peak {
                bin_index: i,
                height: c,
                z_center: hist.bin_center(i),
            });
        }
    }
    let h_max = peaks.iter().map(|p| p.height).max().ok_or(GeometryError::NoPeaks)?;
    let cut = p_h * h_max as f64;
    peaks.retain(|p| p.height as f64 > cut);
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hist(counts: Vec<u64>, bin: f64) -> HeightHistogram {
        HeightHistogram {
            bin_size: bin,
            origin_z: 0.0,
            counts,
        }
    }

    #[test]
    fn direct_binning() {
        let cloud =
            PointCloud::new(vec![[0.0, 0.0, 0.005], [0.0, 0.0, 0.006], [0.0, 0.0, 1.5]]).unwrap();
        let h = build_height_histogram(&cloud, 0.01).unwrap();
        assert_eq!(h.origin_z, 0.0);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[150], 1);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn empty_cloud() {
        assert_eq!(
            build_height_histogram(&PointCloud::empty(), 0.01),
            Err(GeometryError::EmptyInput)
        );
    }

    #[test]
    fn uniform_bins_within_five_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = (0..10_000)
            .map(|_| [0.0, 0.0, rng.random_range(0.0..1.0)])
            .collect();
        let h = build_height_histogram(&PointCloud::new(pts).unwrap(), 0.1).unwrap();
        assert_eq!(h.total(), 10_000);
        let sigma = (10_000.0f64 * 0.1 * 0.9).sqrt();
        for &c in h.counts.iter().take(10) {
            assert!((c as f64 - 1000.0).abs() < 5.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn unique_maximum() {
        let p = find_peaks(&hist(vec![0, 10, 0], 0.1), 0.1, 0.9).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].bin_index, 1);
    }

    #[test]
    fn distant_equal_maxima_both_kept() {
        let mut c = vec![0; 50];
        c[5] = 7;
        c[40] = 7;
        let p = find_peaks(&hist(c, 0.01), 0.2, 0.9).unwrap();
        assert_eq!(p.iter().map(|p| p.bin_index).collect::<Vec<_>>(), vec![5, 40]);
    }

    #[test]
    fn plateau_tie_goes_to_lower_bin() {
        let p = find_peaks(&hist(vec![0, 5, 5, 0], 0.1), 0.1, 0.5).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].bin_index, 1);
    }

    #[test]
    fn all_zero_has_no_peaks() {
        assert_eq!(
            find_peaks(&hist(vec![0; 8], 0.1), 0.2, 0.9),
            Err(GeometryError::NoPeaks)
        );
    }

    /// Exhaustive reference: compares every bin pair by metric distance.
    fn oracle_peaks(h: &HeightHistogram, delta_f: f64, p_h: f64) -> Vec<usize> {
        let n = h.counts.len();
        let mut local = Vec::new();
        for i in 0..n {
            if h.counts[i] == 0 {
                continue;
            }
            let mut ok = true;
            for j in 0..n {
                let dz = (h.bin_center(i) - h.bin_center(j)).abs();
                if j == i || dz > delta_f + 1e-9 {
                    continue;
                }
                if h.counts[j] > h.counts[i] || (h.counts[j] == h.counts[i] && j < i) {
                    ok = false;
                }
            }
            if ok {
                local.push(i);
            }
        }
        let hmax = local.iter().map(|&i| h.counts[i]).max().unwrap_or(0);
        local
            .into_iter()
            .filter(|&i| h.counts[i] as f64 > p_h * hmax as f64)
            .collect()
    }

    #[test]
    fn two_slab_histogram_has_four_peaks() {
        // two stories: floor/ceiling planes at 0, 2.8, 3.5, 6.3 over a sparse base
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c: Vec<u64> = (0..640).map(|_| rng.random_range(0..20)).collect();
        for b in [0usize, 280, 350, 630] {
            c[b] = 1000 + rng.random_range(0..50);
        }
        let h = hist(c, 0.01);
        let got: Vec<usize> = find_peaks(&h, 0.2, 0.9)
            .unwrap()
            .into_iter()
            .map(|p| p.bin_index)
            .collect();
        assert_eq!(got, oracle_peaks(&h, 0.2, 0.9));
        assert_eq!(got, vec![0, 280, 350, 630]);
    }

    #[test]
    fn random_histograms_match_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..120);
            let c: Vec<u64> = (0..n).map(|_| rng.random_range(0..6)).collect();
            let h = hist(c, 0.01);
            let delta = rng.random_range(1..10) as f64 * 0.01;
            match find_peaks(&h, delta, 0.5) {
                Ok(p) => assert_eq!(
                    p.iter().map(|p| p.bin_index).collect::<Vec<_>>(),
                    oracle_peaks(&h, delta, 0.5)
                ),
                Err(e) => {
                    assert_eq!(e, GeometryError::NoPeaks);
                    assert!(h.counts.iter().all(|&c| c == 0));
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn appending_zero_bins_keeps_peaks(
            counts in proptest::collection::vec(0u64..20, 1..60),
            pad in 1usize..20,
        ) {
            proptest::prop_assume!(counts.iter().any(|&c| c > 0));
            let a = find_peaks(&hist(counts.clone(), 0.01), 0.05, 0.5).unwrap();
            let mut padded = counts;
            padded.extend(std::iter::repeat(0).take(pad));
            let b = find_peaks(&hist(padded, 0.01), 0.05, 0.5).unwrap();
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn counts_sum_to_point_count(zs in proptest::collection::vec(-5.0f64..5.0, 1..300)) {
            let cloud = PointCloud::new(zs.iter().map(|&z| [0.0, 0.0, z]).collect()).unwrap();
            let h = build_height_histogram(&cloud, 0.07).unwrap();
            proptest::prop_assert_eq!(h.total(), zs.len() as u64);
        }
    }
}
