//! Exact Euclidean distance transform (Felzenszwalb–Huttenlocher lower
//! envelope of parabolas, applied per column then per row).

use super::{BinaryMask, DistanceField, GeometryError, Result};

/// Distance in pixels from every cell to the nearest set cell of `mask`.
pub fn euclidean_distance_field(mask: &BinaryMask) -> Result<DistanceField> {
    if mask.is_empty() {
        return Err(GeometryError::NoWalls);
    }
    let f = mask.frame;
    let (h, w) = (f.height, f.width);
    let inf = ((h * h + w * w) as f64) * 4.0 + 1.0;
    let mut sq: Vec<f64> = mask.values.iter().map(|&v| if v { 0.0 } else { inf }).collect();

    let mut buf_in = vec![0.0; h.max(w)];
    let mut buf_out = vec![0.0; h.max(w)];
    let mut v = vec![0usize; h.max(w)];
    let mut z = vec![0.0; h.max(w) + 1];

    for c in 0..w {
        for r in 0..h {
            buf_in[r] = sq[r * w + c];
        }
        envelope_1d(&buf_in[..h], &mut buf_out[..h], &mut v, &mut z);
        for r in 0..h {
            sq[r * w + c] = buf_out[r];
        }
    }
    for r in 0..h {
        buf_in[..w].copy_from_slice(&sq[r * w..(r + 1) * w]);
        envelope_1d(&buf_in[..w], &mut buf_out[..w], &mut v, &mut z);
        sq[r * w..(r + 1) * w].copy_from_slice(&buf_out[..w]);
    }
    Ok(DistanceField {
        frame: f,
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

fn envelope_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let intersect = |p: usize, q: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(v[k], q);
        // z[0] is -inf, so this stops at k == 0
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k], q);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridFrame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(mask: &BinaryMask) -> Vec<f64> {
        let f = mask.frame;
        let walls: Vec<(f64, f64)> = (0..f.len())
            .filter(|&i| mask.values[i])
            .map(|i| ((i / f.width) as f64, (i % f.width) as f64))
            .collect();
        (0..f.len())
            .map(|i| {
                let (r, c) = ((i / f.width) as f64, (i % f.width) as f64);
                walls
                    .iter()
                    .map(|(wr, wc)| ((r - wr).powi(2) + (c - wc).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn single_source_is_radial() {
        let f = GridFrame::new(9, 9, 1.0, [0.0, 0.0]).unwrap();
        let mut m = BinaryMask::new(f);
        m.set(4, 4, true);
        let d = euclidean_distance_field(&m).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                let want = (((r as f64) - 4.0).powi(2) + ((c as f64) - 4.0).powi(2)).sqrt();
                assert!((d.get(r, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_walls_is_zero() {
        let f = GridFrame::new(3, 4, 1.0, [0.0, 0.0]).unwrap();
        let m = BinaryMask::from_values(f, vec![true; 12]).unwrap();
        assert!(euclidean_distance_field(&m).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_walls_is_an_error() {
        let f = GridFrame::new(3, 4, 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(
            euclidean_distance_field(&BinaryMask::new(f)),
            Err(GeometryError::NoWalls)
        );
    }

    #[test]
    fn random_masks_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let h = rng.random_range(1..=64);
            let w = rng.random_range(1..=64);
            let f = GridFrame::new(h, w, 1.0, [0.0, 0.0]).unwrap();
            let density = rng.random_range(0.001..0.3);
            let mut vals: Vec<bool> = (0..h * w).map(|_| rng.random_bool(density)).collect();
            vals[rng.random_range(0..h * w)] = true;
            let m = BinaryMask::from_values(f, vals).unwrap();
            let got = euclidean_distance_field(&m).unwrap();
            for (a, b) in got.values.iter().zip(brute_force(&m)) {
                assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
                assert!(*a <= f.diagonal_pixels());
            }
        }
    }
}
