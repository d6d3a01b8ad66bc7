use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Labeled points in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    /// `+1.0` or `-1.0` per point.
    pub labels: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `x,y,label`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "label"])?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            w.write_record(&[p[0].to_string(), p[1].to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Upper arc: unit semicircle `(cos t, sin t)`, `t ∈ [0, π]`.
pub(crate) fn upper_arc(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

/// Lower arc: the mirrored semicircle shifted by `(+0.5, -0.25)`.
pub(crate) fn lower_arc(t: f64) -> [f64; 2] {
    [t.cos() + 0.5, -t.sin() - 0.25]
}

/// Two interleaved half circles with `n_points / 2` points each, parameters
/// evenly spaced over `[0, π]`, perturbed by isotropic Gaussian noise of
/// standard deviation `noise`. The first half (upper arc) is labeled `+1`,
/// the second half `-1`.
pub fn make_two_moons(n_points: usize, noise: f64, seed: u64) -> Result<PointCloud> {
    if !n_points.is_multiple_of(2) {
        return Err(Error::arg(format!("n_points must be even, got {n_points}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::arg(format!("noise must be finite and >= 0, got {noise}")));
    }
    let half = n_points / 2;
    let param = |i: usize| {
        if half > 1 {
            PI * i as f64 / (half - 1) as f64
        } else {
            0.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).expect("noise validated above");
    let mut points = Vec::with_capacity(n_points);
    for arc in [upper_arc as fn(f64) -> [f64; 2], lower_arc] {
        for i in 0..half {
            let [x, y] = arc(param(i));
            if noise > 0.0 {
                points.push([x + jitter.sample(&mut rng), y + jitter.sample(&mut rng)]);
            } else {
                points.push([x, y]);
            }
        }
    }
    let labels = (0..n_points)
        .map(|i| if i < half { 1.0 } else { -1.0 })
        .collect();
    Ok(PointCloud { points, labels })
}
