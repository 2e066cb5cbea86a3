//! Gaussian-weighted backward warp driven by keypoint displacements.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Frame, KeypointSet};

/// Below this total weight a pixel keeps zero motion.
pub const MIN_TOTAL_WEIGHT: f64 = 1e-6;

struct Kernel {
    tx: f64,
    ty: f64,
    dx: f64,
    dy: f64,
    // quadratic form in pixel units
    a: f64,
    b: f64,
    d: f64,
}

/// Dense motion field (key minus target displacement per pixel), row-major
/// `(mx, my)` pairs.
pub fn motion_field(width: usize, height: usize, kp_key: &KeypointSet, kp_target: &KeypointSet) -> Result<Vec<(f64, f64)>> {
    let kernels = kernels(width, height, kp_key, kp_target)?;
    let mut field = vec![(0.0, 0.0); width * height];
    field.par_chunks_mut(width.max(1)).enumerate().for_each(|(y, row)| {
        for (x, m) in row.iter_mut().enumerate() {
            *m = motion_at(&kernels, x as f64, y as f64);
        }
    });
    Ok(field)
}

fn kernels(width: usize, height: usize, kp_key: &KeypointSet, kp_target: &KeypointSet) -> Result<Vec<Kernel>> {
    if kp_key.points.len() != kp_target.points.len() {
        return Err(Error::Contract(format!(
            "key frame has {} keypoints, target frame {} has {}",
            kp_key.points.len(),
            kp_target.frame_index,
            kp_target.points.len()
        )));
    }
    let sx = 2.0 / width as f64;
    let sy = 2.0 / height as f64;
    Ok(kp_key
        .points
        .iter()
        .zip(&kp_target.points)
        .map(|(k, t)| {
            let m = t.inv_cov;
            Kernel {
                tx: t.x,
                ty: t.y,
                dx: k.x - t.x,
                dy: k.y - t.y,
                a: m[0] * sx * sx,
                b: 0.5 * (m[1] + m[2]) * sx * sy,
                d: m[3] * sy * sy,
            }
        })
        .collect())
}

fn motion_at(kernels: &[Kernel], x: f64, y: f64) -> (f64, f64) {
    let (mut sw, mut mx, mut my) = (0.0, 0.0, 0.0);
    for k in kernels {
        let (ex, ey) = (x - k.tx, y - k.ty);
        let q = k.a * ex * ex + 2.0 * k.b * ex * ey + k.d * ey * ey;
        let w = (-0.5 * q).exp();
        sw += w;
        mx += w * k.dx;
        my += w * k.dy;
    }
    if sw < MIN_TOTAL_WEIGHT {
        (0.0, 0.0)
    } else {
        (mx / sw, my / sw)
    }
}

fn bilinear(f: &Frame, x: f64, y: f64) -> u8 {
    let x = x.clamp(0.0, (f.width - 1) as f64);
    let y = y.clamp(0.0, (f.height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    if fx == 0.0 && fy == 0.0 {
        return f.get(x0, y0);
    }
    let x1 = (x0 + 1).min(f.width - 1);
    let y1 = (y0 + 1).min(f.height - 1);
    let top = f.get(x0, y0) as f64 * (1.0 - fx) + f.get(x1, y0) as f64 * fx;
    let bottom = f.get(x0, y1) as f64 * (1.0 - fx) + f.get(x1, y1) as f64 * fx;
    (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
}

/// Synthesises the target frame by sampling `key` at `p + m(p)`.
pub fn generate_predicted_frame(key: &Frame, kp_key: &KeypointSet, kp_target: &KeypointSet) -> Result<Frame> {
    let kernels = kernels(key.width, key.height, kp_key, kp_target)?;
    let mut out = Frame::filled(key.width, key.height, 0);
    out.samples.par_chunks_mut(key.width).enumerate().for_each(|(y, row)| {
        for (x, s) in row.iter_mut().enumerate() {
            let (mx, my) = motion_at(&kernels, x as f64, y as f64);
            *s = bilinear(key, x as f64 + mx, y as f64 + my);
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::model::Keypoint;

    fn textured(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| ((x * 7 + y * 13 + (x * y) % 31) % 256) as u8)
    }

    fn set(t: usize, pts: Vec<Keypoint>) -> KeypointSet {
        KeypointSet { frame_index: t, points: pts }
    }

    #[test]
    fn identity_keypoints_reproduce_key_frame() {
        let f = textured(40, 24);
        let kp = set(0, vec![Keypoint::isotropic(10.0, 5.0, 64.0), Keypoint::isotropic(30.0, 20.0, 8.0)]);
        let out = generate_predicted_frame(&f, &kp, &kp).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn vanishing_support_is_identity() {
        let f = textured(32, 32);
        let key = set(0, vec![Keypoint::isotropic(0.0, 0.0, 1e12)]);
        let target = set(1, vec![Keypoint::isotropic(31.0, 31.0, 1e12)]);
        // the single point's own pixel still moves; everything else is outside support
        let out = generate_predicted_frame(&f, &key, &target).unwrap();
        let moved = out.samples.iter().zip(&f.samples).filter(|(a, b)| a != b).count();
        assert!(moved <= 1);
    }

    #[test]
    fn count_mismatch_is_contract_error() {
        let f = textured(8, 8);
        let a = set(0, vec![Keypoint::isotropic(1.0, 1.0, 64.0)]);
        let b = set(1, vec![]);
        assert!(matches!(generate_predicted_frame(&f, &a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn translated_square_beats_repeating_the_key_frame() {
        let square = |ox: usize| {
            Frame::from_fn(64, 64, move |x, y| {
                if (20 + ox..36 + ox).contains(&x) && (24..40).contains(&y) {
                    160 + ((x - ox + y) % 5) as u8 * 10
                } else {
                    30
                }
            })
        };
        let key = square(0);
        let target = square(4);
        let kp_key = set(0, vec![Keypoint::isotropic(28.0, 32.0, 0.5)]);
        let kp_target = set(1, vec![Keypoint::isotropic(32.0, 32.0, 0.5)]);
        let predicted = generate_predicted_frame(&key, &kp_key, &kp_target).unwrap();
        let warped = psnr(&predicted, &target).unwrap().value;
        let repeat = psnr(&key, &target).unwrap().value;
        assert!(warped >= 30.0 && warped > repeat, "warp {warped} repeat {repeat}");
    }

    #[test]
    fn motion_field_averages_displacements() {
        let key = set(0, vec![Keypoint::isotropic(10.0, 10.0, 1.0), Keypoint::isotropic(12.0, 10.0, 1.0)]);
        let target = set(1, vec![Keypoint::isotropic(8.0, 10.0, 1.0), Keypoint::isotropic(8.0, 10.0, 1.0)]);
        let field = motion_field(16, 16, &key, &target).unwrap();
        let (mx, my) = field[10 * 16 + 8];
        assert!((mx - 3.0).abs() < 1e-12 && my.abs() < 1e-12);
    }
}
