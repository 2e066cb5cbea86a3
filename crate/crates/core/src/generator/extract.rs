//! Training-free keypoint extraction: minimum-eigenvalue corner detection
//! on the key frame, then template tracking through the clip so point `k`
//! refers to the same scene feature in every frame.

use crate::model::{Frame, Keypoint, KeypointSet, VideoClip};

const WINDOW_RADIUS: isize = 2; // 5×5 second-moment window
const PATCH_RADIUS: isize = 7;
const BORDER: usize = 3;
/// Eigenvalue ratio cap for the point shape.
const MAX_ANISOTROPY: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    /// Points per frame before the rate knob is applied.
    pub keypoints: usize,
    /// Rate control: the effective count is `max(1, floor(keypoints / λ))`.
    pub lambda: f64,
    /// Minimum corner response; weaker candidates are ignored.
    pub corner_threshold: f64,
    /// Search radius, in pixels, when following a point to the next frame.
    pub track_range: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            keypoints: 20,
            lambda: 1.0,
            corner_threshold: 50.0,
            track_range: 16,
        }
    }
}

impl ExtractorConfig {
    pub fn effective_keypoints(&self) -> usize {
        let k = (self.keypoints as f64 / self.lambda.max(f64::MIN_POSITIVE)).floor();
        (k as usize).max(1)
    }

    fn suppression_radius(&self, width: usize, height: usize) -> f64 {
        (width.min(height) as f64 / self.effective_keypoints() as f64).max(8.0)
    }

    /// Inverse-covariance scale (normalised coordinates) giving a Gaussian
    /// support of roughly one suppression radius.
    fn support_precision(&self, width: usize, height: usize) -> f64 {
        let r = self.suppression_radius(width, height);
        (width.min(height) as f64 / (2.0 * r)).powi(2)
    }
}

/// Summed gradient products `(Σ Ix², Σ Iy², Σ IxIy)` over the window
/// centred at (x, y), with central differences and clamped borders.
fn second_moments(f: &Frame, x: isize, y: isize) -> (f64, f64, f64) {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for wy in y - WINDOW_RADIUS..=y + WINDOW_RADIUS {
        for wx in x - WINDOW_RADIUS..=x + WINDOW_RADIUS {
            let ix = (f.get_clamped(wx + 1, wy) as f64 - f.get_clamped(wx - 1, wy) as f64) * 0.5;
            let iy = (f.get_clamped(wx, wy + 1) as f64 - f.get_clamped(wx, wy - 1) as f64) * 0.5;
            sxx += ix * ix;
            syy += iy * iy;
            sxy += ix * iy;
        }
    }
    (sxx, syy, sxy)
}

fn min_eigenvalue((sxx, syy, sxy): (f64, f64, f64)) -> f64 {
    let half_trace = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    half_trace - disc
}

/// Top corners in descending response order, each at least `radius` away
/// from every stronger accepted corner.
pub fn detect_corners(f: &Frame, count: usize, radius: f64, threshold: f64) -> Vec<(usize, usize)> {
    if f.width <= 2 * BORDER || f.height <= 2 * BORDER {
        return Vec::new();
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for y in BORDER..f.height - BORDER {
        for x in BORDER..f.width - BORDER {
            let r = min_eigenvalue(second_moments(f, x as isize, y as isize));
            if r > threshold {
                candidates.push((r, x, y));
            }
        }
    }
    // strongest first, raster order among equals
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    let r2 = radius * radius;
    let mut accepted: Vec<(usize, usize)> = Vec::with_capacity(count);
    for (_, x, y) in candidates {
        if accepted.len() == count {
            break;
        }
        let clear = accepted.iter().all(|&(ax, ay)| {
            let dx = ax as f64 - x as f64;
            let dy = ay as f64 - y as f64;
            dx * dx + dy * dy >= r2
        });
        if clear {
            accepted.push((x, y));
        }
    }
    accepted
}

/// Unit-determinant shape from the second-moment matrix, anisotropy
/// capped, scaled by `precision`. Flat neighbourhoods give an isotropic
/// matrix.
fn shape_matrix(m: (f64, f64, f64), precision: f64) -> [f64; 4] {
    let (a, d, b) = m;
    let det = a * d - b * b;
    let trace = a + d;
    if trace <= 1e-9 || det <= 1e-9 * trace * trace {
        return [precision, 0.0, 0.0, precision];
    }
    let s = det.sqrt();
    let (a, b, d) = (a / s, b / s, d / s);
    let half = 0.5 * (a + d);
    let disc = (0.25 * (a - d).powi(2) + b * b).sqrt();
    let hi = (half + disc).min(MAX_ANISOTROPY.sqrt());
    let lo = 1.0 / hi;
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (sn, cs) = theta.sin_cos();
    let m00 = hi * cs * cs + lo * sn * sn;
    let m11 = hi * sn * sn + lo * cs * cs;
    let m01 = (hi - lo) * cs * sn;
    [precision * m00, precision * m01, precision * m01, precision * m11]
}

fn patch_sad(template: &[u8], f: &Frame, cx: isize, cy: isize, bound: u32) -> u32 {
    let side = (2 * PATCH_RADIUS + 1) as usize;
    let mut acc = 0u32;
    for py in 0..side {
        for px in 0..side {
            let v = f.get_clamped(cx + px as isize - PATCH_RADIUS, cy + py as isize - PATCH_RADIUS);
            acc += (template[py * side + px] as i32 - v as i32).unsigned_abs();
        }
        if acc >= bound {
            return acc;
        }
    }
    acc
}

fn template_at(f: &Frame, cx: isize, cy: isize) -> Vec<u8> {
    let side = 2 * PATCH_RADIUS + 1;
    let mut t = Vec::with_capacity((side * side) as usize);
    for py in -PATCH_RADIUS..=PATCH_RADIUS {
        for px in -PATCH_RADIUS..=PATCH_RADIUS {
            t.push(f.get_clamped(cx + px, cy + py));
        }
    }
    t
}

/// Position in `f` best matching `template`, searched around `from`;
/// the unmoved position wins ties.
fn track(template: &[u8], f: &Frame, from: (isize, isize), range: isize) -> (isize, isize) {
    let mut best = from;
    let mut best_sad = patch_sad(template, f, from.0, from.1, u32::MAX);
    for dy in -range..=range {
        for dx in -range..=range {
            let (x, y) = (from.0 + dx, from.1 + dy);
            if (dx == 0 && dy == 0) || x < 0 || y < 0 || x >= f.width as isize || y >= f.height as isize {
                continue;
            }
            let s = patch_sad(template, f, x, y, best_sad);
            if s < best_sad {
                best_sad = s;
                best = (x, y);
            }
        }
    }
    best
}

/// Position plus its key-frame template; padding points have none.
type Tracked = ((isize, isize), Option<Vec<u8>>);

/// Extracts `effective_keypoints()` points per frame.
pub fn extract_keypoints(clip: &VideoClip, cfg: &ExtractorConfig) -> Vec<KeypointSet> {
    extract_with_extra(clip, cfg, 0)
}

/// As [`extract_keypoints`] with `extra` further points appended to every
/// frame. The first `effective_keypoints()` points are identical to a plain
/// extraction.
pub fn extract_with_extra(clip: &VideoClip, cfg: &ExtractorConfig, extra: usize) -> Vec<KeypointSet> {
    let (w, h) = (clip.width(), clip.height());
    let base = cfg.effective_keypoints();
    let total = base + extra;
    let precision = cfg.support_precision(w, h);
    let key = &clip.frames()[0];
    let detected = detect_corners(key, total, cfg.suppression_radius(w, h), cfg.corner_threshold);

    let center = ((w / 2) as isize, (h / 2) as isize);
    let mut points: Vec<Tracked> = detected
        .iter()
        .map(|&(x, y)| {
            let p = (x as isize, y as isize);
            (p, Some(template_at(key, p.0, p.1)))
        })
        .collect();
    // base padding comes before extras so the base prefix is stable
    let base_found = detected.len().min(base);
    let mut ordered: Vec<Tracked> = points.drain(..base_found).collect();
    ordered.extend((base_found..base).map(|_| (center, None)));
    ordered.extend(points);
    ordered.extend((ordered.len()..total).map(|_| (center, None)));

    let mut positions: Vec<(isize, isize)> = ordered.iter().map(|(p, _)| *p).collect();
    let mut sets = Vec::with_capacity(clip.len());
    for (t, frame) in clip.frames().iter().enumerate() {
        if t > 0 {
            for (pos, (_, template)) in positions.iter_mut().zip(&ordered) {
                if let Some(tpl) = template {
                    *pos = track(tpl, frame, *pos, cfg.track_range as isize);
                }
            }
        }
        let points = positions
            .iter()
            .zip(&ordered)
            .map(|(&(x, y), (_, template))| {
                let inv_cov = if template.is_some() {
                    shape_matrix(second_moments(frame, x, y), precision)
                } else {
                    [precision, 0.0, 0.0, precision]
                };
                Keypoint {
                    x: x as f64,
                    y: y as f64,
                    inv_cov,
                }
            })
            .collect();
        sets.push(KeypointSet {
            frame_index: t,
            points,
        });
    }
    sets
}
