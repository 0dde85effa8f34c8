use super::{BinaryMask, DistanceField, GeometryError, Result};

pub const OTSU_BINS: usize = 256;

/// Result of Otsu thresholding on a distance field.
#[derive(Debug, Clone, PartialEq)]
pub struct OtsuSeeds {
    /// Chosen quantization level; class one is every bin above it.
    pub level: usize,
    /// Metric threshold: the upper edge of bin `level`.
    pub threshold: f64,
    /// Cells whose quantized value lies above `level`.
    pub mask: BinaryMask,
}

/// Bin of `v` when `[lo, hi]` is split into [`OTSU_BINS`] equal bins.
pub fn quantize(v: f64, lo: f64, hi: f64) -> usize {
    let t = ((v - lo) / (hi - lo) * OTSU_BINS as f64).floor();
    (t.max(0.0) as usize).min(OTSU_BINS - 1)
}

/// Threshold maximizing between-class variance over a 256-bin quantization
/// of the field's value range. Ties go to the lower level.
pub fn otsu_threshold(field: &DistanceField) -> Result<OtsuSeeds> {
    let (lo, hi) = field
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(GeometryError::DegenerateField);
    }
    let bins: Vec<usize> = field.values.iter().map(|&v| quantize(v, lo, hi)).collect();
    let mut hist = [0u64; OTSU_BINS];
    for &b in &bins {
        hist[b] += 1;
    }
    let total = bins.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let (mut best_level, mut best_var) = (0usize, f64::NEG_INFINITY);
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    for level in 0..OTSU_BINS - 1 {
        w0 += hist[level] as f64;
        sum0 += level as f64 * hist[level] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_level = level;
        }
    }
    let threshold = lo + (best_level as f64 + 1.0) * (hi - lo) / OTSU_BINS as f64;
    Ok(OtsuSeeds {
        level: best_level,
        threshold,
        mask: BinaryMask {
            frame: field.frame,
            values: bins.iter().map(|&b| b > best_level).collect(),
        },
    })
}
