//! Random matrices for tests, benchmarks and initialization.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::complex::{ComplexMatrix, C64};

/// Entries with real and imaginary parts uniform in [-1, 1).
pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> ComplexMatrix {
    let v = (0..m * n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ComplexMatrix::new(m, n, v).expect("finite")
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of R's diagonal folded back into Q.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            let d = r[(k, k)];
            let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
            out.push(q[(i, k)] * ph);
        }
    }
    ComplexMatrix::new(n, n, out).expect("finite")
}
