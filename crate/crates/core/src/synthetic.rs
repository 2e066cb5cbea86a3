//! Deterministic synthetic content for examples and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{FeatureTensor, Frame, VideoClip};

/// Smooth blotchy texture with some fine detail.
pub fn textured_frame(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0.01..0.12),
                rng.gen_range(0.01..0.12),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(8.0..24.0),
            )
        })
        .collect();
    let noise: Vec<u8> = (0..width * height).map(|_| rng.gen_range(0..12)).collect();
    Frame::from_fn(width, height, |x, y| {
        let v: f64 = waves
            .iter()
            .map(|&(fx, fy, ph, amp)| amp * (fx * x as f64 + fy * y as f64 + ph).sin())
            .sum();
        (112.0 + v + noise[y * width + x] as f64).clamp(0.0, 255.0) as u8
    })
}

/// A clip whose frames are all the same textured frame.
pub fn static_clip(width: usize, height: usize, frames: usize, seed: u64) -> VideoClip {
    VideoClip::new(vec![textured_frame(width, height, seed); frames], 30.0).expect("valid dimensions")
}

#[derive(Debug, Clone)]
struct Sprite {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    w: usize,
    h: usize,
    texture: Frame,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 + 4.0 && o.x0 < self.x1 + 4.0 && self.y0 < o.y1 + 4.0 && o.y0 < self.y1 + 4.0
    }
}

impl Sprite {
    fn sweep(&self, frames: usize) -> Rect {
        let t = frames.saturating_sub(1) as f64;
        let (ex, ey) = (self.x + self.vx * t, self.y + self.vy * t);
        Rect {
            x0: self.x.min(ex),
            y0: self.y.min(ey),
            x1: self.x.max(ex) + self.w as f64,
            y1: self.y.max(ey) + self.h as f64,
        }
    }
}

fn random_sprite(rng: &mut ChaCha8Rng, width: usize, height: usize, seed: u64, i: usize) -> Sprite {
    let w = rng.gen_range(width / 8..=width / 4).max(8);
    let h = rng.gen_range(height / 8..=height / 4).max(8);
    let tex = textured_frame(w, h, seed.wrapping_mul(31).wrapping_add(i as u64 + 1));
    Sprite {
        x: rng.gen_range(0.0..(width - w) as f64),
        y: rng.gen_range(0.0..(height - h) as f64),
        vx: rng.gen_range(-2.0..2.0),
        vy: rng.gen_range(-2.0..2.0),
        w,
        h,
        texture: Frame::from_fn(w, h, |x, y| tex.get(x, y).saturating_add(70)),
    }
}

/// Textured rectangles moving at constant velocity over a static textured
/// background. Objects keep their texture and do not overlap while the clip
/// lasts (when placement allows), so motion is pure translation.
pub fn moving_objects_clip(width: usize, height: usize, frames: usize, objects: usize, seed: u64) -> VideoClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let background = Frame::from_fn(width, height, {
        let bg = textured_frame(width, height, seed);
        move |x, y| bg.get(x, y) / 2 + 20
    });
    let mut sprites: Vec<Sprite> = Vec::with_capacity(objects);
    for i in 0..objects {
        let mut sprite = random_sprite(&mut rng, width, height, seed, i);
        // redraw a few times to keep swept areas apart, so nothing is occluded
        for _ in 0..64 {
            if sprites.iter().all(|s| !sprite.sweep(frames).overlaps(&s.sweep(frames))) {
                break;
            }
            sprite = random_sprite(&mut rng, width, height, seed, i);
        }
        sprites.push(sprite);
    }
    let clip_frames = (0..frames)
        .map(|t| {
            let mut f = background.clone();
            for s in &sprites {
                let ox = (s.x + s.vx * t as f64).round() as isize;
                let oy = (s.y + s.vy * t as f64).round() as isize;
                for sy in 0..s.h {
                    for sx in 0..s.w {
                        let (px, py) = (ox + sx as isize, oy + sy as isize);
                        if px >= 0 && py >= 0 && (px as usize) < width && (py as usize) < height {
                            f.set(px as usize, py as usize, s.texture.get(sx, sy));
                        }
                    }
                }
            }
            f
        })
        .collect();
    VideoClip::new(clip_frames, 30.0).expect("valid dimensions")
}

/// A textured square moving `dx` pixels per frame to the right over a flat
/// background.
pub fn translating_square_clip(width: usize, height: usize, frames: usize, dx: usize) -> VideoClip {
    let side = width.min(height) / 4;
    let tex = textured_frame(side, side, 7);
    let (x0, y0) = (width / 4, (height - side) / 2);
    let clip_frames = (0..frames)
        .map(|t| {
            Frame::from_fn(width, height, |x, y| {
                let left = x0 + dx * t;
                if (left..left + side).contains(&x) && (y0..y0 + side).contains(&y) {
                    tex.get(x - left, y - y0).saturating_add(60)
                } else {
                    40
                }
            })
        })
        .collect();
    VideoClip::new(clip_frames, 30.0).expect("valid dimensions")
}

/// A feature tensor whose channels come in clusters of near-duplicates,
/// stored in shuffled order.
pub fn clustered_tensor(channels: usize, height: usize, width: usize, clusters: usize, seed: u64) -> FeatureTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = height * width;
    let prototypes: Vec<Vec<f32>> = (0..clusters.max(1))
        .map(|_| {
            let (fx, fy, ph) = (rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.0..6.0));
            let scale: f32 = rng.gen_range(0.5..3.0);
            (0..plane)
                .map(|i| {
                    let (x, y) = ((i % width) as f32, (i / width) as f32);
                    scale * (fx * x + fy * y + ph).sin() + rng.gen_range(-1.0..1.0)
                })
                .collect()
        })
        .collect();
    let mut assignment: Vec<usize> = (0..channels).map(|c| c % prototypes.len()).collect();
    for i in (1..assignment.len()).rev() {
        assignment.swap(i, rng.gen_range(0..=i));
    }
    let mut values = Vec::with_capacity(channels * plane);
    for &k in &assignment {
        values.extend(prototypes[k].iter().map(|v| v + rng.gen_range(-0.02..0.02)));
    }
    FeatureTensor::new("synthetic", "clustered", channels, height, width, values).expect("finite values")
}

/// A tensor with smooth spatial structure and mild channel correlation.
pub fn smooth_tensor(channels: usize, height: usize, width: usize, seed: u64) -> FeatureTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(channels * height * width);
    for c in 0..channels {
        let (a, b): (f32, f32) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for y in 0..height {
            for x in 0..width {
                let v = a * (x as f32 * 0.3 + c as f32).sin() + b * (y as f32 * 0.2).cos();
                values.push(v.max(0.0) * 4.0);
            }
        }
    }
    FeatureTensor::new("synthetic", "smooth", channels, height, width, values).expect("finite values")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(moving_objects_clip(64, 48, 3, 2, 9), moving_objects_clip(64, 48, 3, 2, 9));
        assert_ne!(textured_frame(16, 16, 1), textured_frame(16, 16, 2));
        assert_eq!(clustered_tensor(8, 4, 4, 2, 3), clustered_tensor(8, 4, 4, 2, 3));
    }

    #[test]
    fn square_moves_by_dx() {
        let clip = translating_square_clip(64, 64, 2, 4);
        let (a, b) = (&clip.frames()[0], &clip.frames()[1]);
        for y in 0..64 {
            for x in 0..60 {
                assert_eq!(a.get(x, y), b.get(x + 4, y));
            }
        }
    }
}
