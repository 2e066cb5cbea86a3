//! Orthonormal 8×8 DCT-II and zigzag scan order.

use std::sync::OnceLock;

pub const N: usize = 8;
pub type Block = [f64; 64];

fn basis() -> &'static [[f64; N]; N] {
    static BASIS: OnceLock<[[f64; N]; N]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; N]; N];
        for (k, row) in m.iter_mut().enumerate() {
            let scale = if k == 0 {
                (1.0 / N as f64).sqrt()
            } else {
                (2.0 / N as f64).sqrt()
            };
            for (n, v) in row.iter_mut().enumerate() {
                *v = scale
                    * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * N) as f64)
                        .cos();
            }
        }
        m
    })
}

/// Forward (`inverse = false`) or inverse 2-D DCT of a row-major block.
pub fn transform_block(block: &Block, inverse: bool) -> Block {
    let b = basis();
    let mut tmp = [0.0; 64];
    let mut out = [0.0; 64];
    // rows
    for y in 0..N {
        for k in 0..N {
            let mut acc = 0.0;
            for n in 0..N {
                acc += if inverse {
                    b[n][k] * block[y * N + n]
                } else {
                    b[k][n] * block[y * N + n]
                };
            }
            tmp[y * N + k] = acc;
        }
    }
    // columns
    for x in 0..N {
        for k in 0..N {
            let mut acc = 0.0;
            for n in 0..N {
                acc += if inverse {
                    b[n][k] * tmp[n * N + x]
                } else {
                    b[k][n] * tmp[n * N + x]
                };
            }
            out[k * N + x] = acc;
        }
    }
    out
}

/// Raster index of the i-th coefficient in zigzag order.
pub fn zigzag() -> &'static [usize; 64] {
    static ORDER: OnceLock<[usize; 64]> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut order = [0usize; 64];
        let mut i = 0;
        for s in 0..(2 * N - 1) {
            let range: Vec<usize> = (0..N).filter(|&y| s >= y && s - y < N).collect();
            // even anti-diagonals run bottom-left to top-right
            let ys: Vec<usize> = if s % 2 == 0 {
                range.into_iter().rev().collect()
            } else {
                range
            };
            for y in ys {
                order[i] = y * N + (s - y);
                i += 1;
            }
        }
        order
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_block_is_dc_only() {
        let c = transform_block(&[16.0; 64], false);
        assert!((c[0] - 128.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn parseval_and_inverse() {
        let mut b = [0.0; 64];
        let mut s = 12345u32;
        for v in b.iter_mut() {
            s = s.wrapping_mul(1_103_515_245).wrapping_add(12345);
            *v = ((s >> 16) % 256) as f64 - 128.0;
        }
        let c = transform_block(&b, false);
        let e_in: f64 = b.iter().map(|v| v * v).sum();
        let e_out: f64 = c.iter().map(|v| v * v).sum();
        assert!((e_in - e_out).abs() < 1e-6);
        let back = transform_block(&c, true);
        for (a, r) in b.iter().zip(back.iter()) {
            assert!((a - r).abs() < 1e-6);
        }
    }

    #[test]
    fn zigzag_prefix_and_permutation() {
        let z = zigzag();
        assert_eq!(&z[..10], &[0, 1, 8, 16, 9, 2, 3, 10, 17, 24]);
        let mut seen = [false; 64];
        for &i in z.iter() {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert_eq!(z[63], 63);
    }
}
