//! Deterministic low-discrepancy evaluation points on a torus.
//!
//! Experiments and tests need reproducible "generic" points in the
//! fundamental parallelogram: well spread out, away from lattice points and
//! away from any experiment-specific marked points.  The generator walks the
//! two-dimensional Kronecker sequence based on the plastic number, which
//! fills the unit square with low discrepancy; a starting index plays the
//! role of a seed, so distinct seeds give distinct but reproducible point
//! sets and equal seeds give byte-identical ones.

use num_complex::Complex64;

use crate::elliptic::Torus;

/// Inverse powers of the plastic number ρ ≈ 1.3247, the standard generator
/// pair for the two-dimensional Kronecker ("R2") sequence.
const ALPHA_X: f64 = 0.754_877_666_246_692_8;
const ALPHA_Y: f64 = 0.569_840_290_998_053_2;

/// Deterministic stream of points in the fundamental parallelogram.
#[derive(Debug, Clone)]
pub struct SamplePlan<'a> {
    torus: &'a Torus,
    index: u64,
}

impl<'a> SamplePlan<'a> {
    /// Starts the stream at `start_index` (the reproducibility seed).
    pub fn new(torus: &'a Torus, start_index: u64) -> Self {
        Self {
            torus,
            index: start_index,
        }
    }

    /// The next raw point of the stream.
    pub fn next_point(&mut self) -> Complex64 {
        self.index = self.index.wrapping_add(1);
        let n = self.index as f64;
        let x = (0.5 + ALPHA_X * n).fract();
        let y = (0.5 + ALPHA_Y * n).fract();
        2.0 * x * self.torus.omega() + 2.0 * y * self.torus.omega_prime()
    }

    /// Takes `count` points satisfying `keep`, each also at lattice distance
    /// at least `min_lattice_distance`.  At most 1000 candidates are tried
    /// per accepted point so a filter that rejects everything cannot hang.
    pub fn take_filtered(
        &mut self,
        count: usize,
        min_lattice_distance: f64,
        mut keep: impl FnMut(Complex64) -> bool,
    ) -> Vec<Complex64> {
        let mut points = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while points.len() < count && attempts < 1000 * count.max(1) {
            attempts += 1;
            let z = self.next_point();
            if self.torus.lattice_distance(z) >= min_lattice_distance && keep(z) {
                points.push(z);
            }
        }
        points
    }

    /// Takes `count` points away from lattice points by `min_lattice_distance`.
    pub fn take(&mut self, count: usize, min_lattice_distance: f64) -> Vec<Complex64> {
        self.take_filtered(count, min_lattice_distance, |_| true)
    }
}
