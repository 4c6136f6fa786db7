//! Unscrambled Sobol sequence with Joe–Kuo direction numbers.
//!
//! Points are produced in Gray-code order and the all-zero first point is
//! skipped, so the one-dimensional sequence starts `0.5, 0.75, 0.25, 0.375`.

use crate::error::{invalid, Result};
use crate::sobol_table::{DIRECTIONS, MAX_DIM};

const BITS: usize = 32;

/// Largest dimension with tabulated direction numbers.
pub const SOBOL_MAX_DIM: usize = MAX_DIM;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (poly, init) = DIRECTIONS[dim];
    let degree = (32 - poly.leading_zeros() - 1) as usize;
    let mut m = [0u64; BITS];
    m[..degree].copy_from_slice(&init.iter().map(|&x| u64::from(x)).collect::<Vec<_>>());
    for i in degree..BITS {
        let mut next = m[i - degree] ^ (m[i - degree] << degree);
        for k in 1..degree {
            if (poly >> (degree - k)) & 1 == 1 {
                next ^= m[i - k] << k;
            }
        }
        m[i] = next;
    }
    for (k, vk) in v.iter_mut().enumerate() {
        *vk = (m[k] << (BITS - 1 - k)) as u32;
    }
    v
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(format!(
                "sobol dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        Ok(Self {
            directions: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Writes the next point into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        // Gray-code update: flip the direction indexed by the lowest zero bit.
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "sobol sequence exhausted");
        self.index += 1;
        let scale = 1.0 / (1u64 << BITS) as f64;
        for ((s, dirs), o) in self.state.iter_mut().zip(&self.directions).zip(out) {
            *s ^= dirs[c];
            *o = f64::from(*s) * scale;
        }
    }
}

impl Iterator for Sobol {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut p = vec![0.0; self.dim()];
        self.next_into(&mut p);
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_prefix() {
        let pts: Vec<f64> = Sobol::new(1).unwrap().take(4).map(|p| p[0]).collect();
        assert_eq!(pts, vec![0.5, 0.75, 0.25, 0.375]);
    }

    // Reference values from an independent Joe–Kuo implementation (scipy's
    // unscrambled `qmc.Sobol`, indices counted with the zero point included).
    #[test]
    fn matches_reference_generator() {
        let cols = [0usize, 1, 2, 99, 500, 1023];
        let expected: [(usize, [f64; 6]); 4] = [
            (7, [0.125, 0.625, 0.375, 0.625, 0.625, 0.625]),
            (
                100,
                [
                    0.4140625, 0.2578125, 0.7734375, 0.8828125, 0.1796875, 0.9453125,
                ],
            ),
            (
                1000,
                [
                    0.2197265625,
                    0.0966796875,
                    0.5185546875,
                    0.1865234375,
                    0.7255859375,
                    0.7138671875,
                ],
            ),
            (
                1024,
                [
                    0.00146484375,
                    0.37646484375,
                    0.44775390625,
                    0.35791015625,
                    0.61376953125,
                    0.67529296875,
                ],
            ),
        ];
        let mut s = Sobol::new(1024).unwrap();
        let mut p = vec![0.0; 1024];
        let mut idx = 0;
        for (row, want) in expected {
            while idx < row {
                s.next_into(&mut p);
                idx += 1;
            }
            for (c, w) in cols.iter().zip(want) {
                assert_eq!(p[*c], w, "row {row} col {c}");
            }
        }
    }

    #[test]
    fn five_dims_first_points() {
        let pts: Vec<Vec<f64>> = Sobol::new(5).unwrap().take(3).collect();
        assert_eq!(pts[0], vec![0.5; 5]);
        assert_eq!(pts[1], vec![0.75, 0.25, 0.25, 0.25, 0.75]);
        assert_eq!(pts[2], vec![0.25, 0.75, 0.75, 0.75, 0.25]);
    }

    #[test]
    fn rejects_unsupported_dims() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(SOBOL_MAX_DIM + 1).is_err());
    }
}
