//! Seeded procedural ground texture (two-octave value noise).
//!
//! Lattice values come from a stateless hash of (seed, cell index), so the
//! texture is an infinite, smooth, deterministic function of ground position.

use crate::optical_flow::ImageFrame;

/// Value noise over the ground plane, coordinates in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTexture {
    seed: u64,
    cell: f64,
}

const OCTAVES: [(f64, f64, u64); 2] = [(1.0, 0.6, 0), (0.5, 0.4, 0x9e37_79b9_7f4a_7c15)];

impl GroundTexture {
    /// `cell` is the coarse lattice spacing in metres.
    pub fn new(seed: u64, cell: f64) -> Self {
        assert!(cell > 0.0, "texture cell size must be positive");
        Self { seed, cell }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// Intensity in [0, 1] at ground point (x, y).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        OCTAVES
            .iter()
            .map(|&(scale, weight, salt)| {
                weight * value_noise(self.seed ^ salt, x / (self.cell * scale), y / (self.cell * scale))
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }
}

/// Two frames of the texture in pixel units, the second translated by
/// `shift` pixels; the exact optical flow between them is `shift`.
pub fn translated_pair(
    texture: &GroundTexture,
    width: usize,
    height: usize,
    shift: (f64, f64),
    dt: f64,
) -> (ImageFrame, ImageFrame) {
    let f0 = ImageFrame::from_fn(width, height, 0.0, |x, y| texture.sample(x as f64, y as f64));
    let f1 = ImageFrame::from_fn(width, height, dt, |x, y| {
        texture.sample(x as f64 - shift.0, y as f64 - shift.1)
    });
    (f0.expect("non-empty frame"), f1.expect("non-empty frame"))
}

fn value_noise(seed: u64, gx: f64, gy: f64) -> f64 {
    let (x0, y0) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - x0, gy - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let (sx, sy) = (smoothstep(fx), smoothstep(fy));
    let v00 = lattice(seed, ix, iy);
    let v10 = lattice(seed, ix + 1, iy);
    let v01 = lattice(seed, ix, iy + 1);
    let v11 = lattice(seed, ix + 1, iy + 1);
    let top = v00 + (v10 - v00) * sx;
    let bottom = v01 + (v11 - v01) * sx;
    top + (bottom - top) * sy
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let mut h = seed
        .wrapping_add((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add((iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_deterministic() {
        let t = GroundTexture::new(42, 16.0);
        for i in 0..500 {
            let (x, y) = (i as f64 * 1.37 - 300.0, i as f64 * -0.91 + 17.0);
            let v = t.sample(x, y);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, GroundTexture::new(42, 16.0).sample(x, y));
        }
        assert_ne!(t.sample(3.3, 4.4), GroundTexture::new(43, 16.0).sample(3.3, 4.4));
    }

    #[test]
    fn continuous() {
        let t = GroundTexture::new(7, 20.0);
        for i in 0..200 {
            let x = i as f64 * 0.73;
            let d = (t.sample(x, 5.0) - t.sample(x + 1e-6, 5.0)).abs();
            assert!(d < 1e-6);
        }
    }
}
