//! Complex matrices, the structured real form of complex matrix-vector
//! products, split activations and photodiode detection.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(Array2<C64>);

/// Dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix(Array2<f64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(dims("ComplexMatrix::new", rows * cols, entries.len()));
        }
        let a = Array2::from_shape_vec((rows, cols), entries)
            .map_err(|e| Error::InvalidShape(e.to_string()))?;
        Self::from_array(a)
    }

    pub fn from_array(a: Array2<C64>) -> Result<Self> {
        if a.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("complex matrix"));
        }
        Ok(Self(a))
    }

    pub(crate) fn from_array_unchecked(a: Array2<C64>) -> Self {
        Self(a)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Array2::zeros((rows, cols)))
    }

    pub fn identity(n: usize) -> Self {
        Self(Array2::from_diag_elem(n, ONE))
    }

    pub fn diag(d: &[C64]) -> Self {
        Self(Array2::from_diag(&ndarray::arr1(d)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[[r, c]]
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<C64> {
        self.0
    }

    /// Row-major copy of the entries.
    pub fn to_vec(&self) -> Vec<C64> {
        self.0.iter().copied().collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self(self.0.t().mapv(|z| z.conj()))
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(dims("matmul", self.cols(), other.rows()));
        }
        Ok(Self(self.0.dot(&other.0)))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.mapv(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &ComplexMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `||U^H U - I||_F`, zero for a unitary matrix.
    pub fn unitarity_deviation(&self) -> f64 {
        let g = self.adjoint().0.dot(&self.0);
        let n = g.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                let target = if i == k { ONE } else { ZERO };
                acc += (g[[i, k]] - target).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(dims("RealMatrix::new", rows * cols, entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real matrix"));
        }
        Ok(Self(
            Array2::from_shape_vec((rows, cols), entries).expect("length checked"),
        ))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[[r, c]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(dims("matmul", self.cols(), other.rows()));
        }
        Ok(Self(self.0.dot(&other.0)))
    }

    pub fn mvm(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols() != x.len() {
            return Err(dims("real mvm", self.cols(), x.len()));
        }
        Ok(self
            .0
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Expands an m×n complex matrix into its 2m×2n real form: each entry
/// `a + jb` becomes the block `[[a, -b], [b, a]]`.
pub fn realify(w: &ComplexMatrix) -> RealMatrix {
    let (m, n) = w.shape();
    let mut out = Array2::zeros((2 * m, 2 * n));
    for ((r, c), z) in w.0.indexed_iter() {
        out[[2 * r, 2 * c]] = z.re;
        out[[2 * r, 2 * c + 1]] = -z.im;
        out[[2 * r + 1, 2 * c]] = z.im;
        out[[2 * r + 1, 2 * c + 1]] = z.re;
    }
    RealMatrix(out)
}

/// Real parts at even indices, imaginary parts at odd indices.
pub fn interleave(x: &[C64]) -> Vec<f64> {
    x.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn deinterleave(x: &[f64]) -> Result<Vec<C64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::InvalidShape(format!(
            "cannot deinterleave odd-length vector ({})",
            x.len()
        )));
    }
    Ok(x.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

pub fn complex_mvm(w: &ComplexMatrix, x: &[C64]) -> Result<Vec<C64>> {
    if w.cols() != x.len() {
        return Err(dims("complex mvm", w.cols(), x.len()));
    }
    Ok(w
        .0
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

/// Nonlinearity applied between complex layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// ReLU on real and imaginary parts independently.
    #[default]
    SplitRelu,
    /// `ReLU(|z| + b) * z / |z|`.
    ModRelu { bias: f64 },
}

impl Activation {
    pub fn apply(&self, z: C64) -> C64 {
        match *self {
            Activation::SplitRelu => C64::new(z.re.max(0.0), z.im.max(0.0)),
            Activation::ModRelu { bias } => {
                let r = z.norm();
                if r == 0.0 || r + bias <= 0.0 {
                    ZERO
                } else {
                    z * ((r + bias) / r)
                }
            }
        }
    }

    /// Chain rule through the activation. `g` packs `dL/dRe + j dL/dIm`
    /// of the output; the result is the same packing for the input `z`.
    pub fn backward(&self, z: C64, g: C64) -> C64 {
        match *self {
            Activation::SplitRelu => C64::new(
                if z.re > 0.0 { g.re } else { 0.0 },
                if z.im > 0.0 { g.im } else { 0.0 },
            ),
            Activation::ModRelu { bias } => {
                let r = z.norm();
                if r == 0.0 || r + bias <= 0.0 {
                    return ZERO;
                }
                // out = z * s(r), s = 1 + b/r
                let s = 1.0 + bias / r;
                let ds = -bias / (r * r);
                let (x, y) = (z.re, z.im);
                // d out_re/dx = s + x*ds*x/r, d out_re/dy = x*ds*y/r, etc.
                let dxx = s + x * ds * x / r;
                let dxy = x * ds * y / r;
                let dyx = y * ds * x / r;
                let dyy = s + y * ds * y / r;
                C64::new(g.re * dxx + g.im * dyx, g.re * dxy + g.im * dyy)
            }
        }
    }
}

pub fn split_relu(x: &[C64]) -> Vec<C64> {
    x.iter().map(|&z| Activation::SplitRelu.apply(z)).collect()
}

/// How photodiode readings become class scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Optical power `|z|^2`.
    #[default]
    Intensity,
    /// Field magnitude `|z|`.
    Magnitude,
}

impl Detection {
    pub fn apply(&self, z: C64) -> f64 {
        match self {
            Detection::Intensity => z.norm_sqr(),
            Detection::Magnitude => z.norm(),
        }
    }

    /// `dL/dRe + j dL/dIm` given `dL/d(reading)`.
    pub fn backward(&self, z: C64, g: f64) -> C64 {
        match self {
            Detection::Intensity => z * (2.0 * g),
            Detection::Magnitude => {
                let r = z.norm();
                if r == 0.0 {
                    ZERO
                } else {
                    z * (g / r)
                }
            }
        }
    }
}

/// Photodiode power reading `|z|^2` per element.
pub fn detect_intensity(x: &[C64]) -> Vec<f64> {
    x.iter().map(|z| z.norm_sqr()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ComplexMatrix {
        let v = (0..m * n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::new(m, n, v).unwrap()
    }

    #[test]
    fn realify_identity() {
        let r = realify(&ComplexMatrix::identity(2));
        for i in 0..4 {
            for k in 0..4 {
                assert_eq!(r.get(i, k), if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn realify_symbolic_pattern() {
        // w11..w24 as distinct primes so every position is identifiable
        let (w11, w12, w13, w14) = (2.0, 3.0, 5.0, 7.0);
        let (w21, w22, w23, w24) = (11.0, 13.0, 17.0, 19.0);
        let w = ComplexMatrix::new(
            2,
            2,
            vec![c(w11, w12), c(w13, w14), c(w21, w22), c(w23, w24)],
        )
        .unwrap();
        let expected = [
            [w11, -w12, w13, -w14],
            [w12, w11, w14, w13],
            [w21, -w22, w23, -w24],
            [w22, w21, w24, w23],
        ];
        let r = realify(&w);
        for (i, row) in expected.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert_eq!(r.get(i, k), *v);
            }
        }
    }

    #[test]
    fn realify_matches_direct_mvm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_matrix(&mut rng, 3, 2);
        let x: Vec<C64> = (0..2)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        // direct complex product, written out by hand
        let direct: Vec<C64> = (0..3)
            .map(|r| w.get(r, 0) * x[0] + w.get(r, 1) * x[1])
            .collect();
        let via_real = realify(&w).mvm(&interleave(&x)).unwrap();
        for (a, b) in via_real.iter().zip(interleave(&direct)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn interleave_examples() {
        assert_eq!(interleave(&[c(1.0, 2.0)]), vec![1.0, 2.0]);
        assert_eq!(deinterleave(&[0.0, 0.0]).unwrap(), vec![ZERO]);
        assert_eq!(
            interleave(&[c(3.0, -4.0), c(0.0, 5.0)]),
            vec![3.0, -4.0, 0.0, 5.0]
        );
        assert!(deinterleave(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn mvm_examples() {
        let x = vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 0.0)];
        assert_eq!(complex_mvm(&ComplexMatrix::identity(3), &x).unwrap(), x);
        let w = ComplexMatrix::new(1, 1, vec![J]).unwrap();
        assert_eq!(complex_mvm(&w, &[ONE]).unwrap(), vec![J]);
        assert!(complex_mvm(&w, &x).is_err());
    }

    #[test]
    fn mvm_random_agrees_with_realified() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_matrix(&mut rng, 4, 4);
        let x: Vec<C64> = (0..4)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let y = complex_mvm(&w, &x).unwrap();
        let yr = deinterleave(&realify(&w).mvm(&interleave(&x)).unwrap()).unwrap();
        for (a, b) in y.iter().zip(&yr) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn split_relu_cases() {
        assert_eq!(split_relu(&[c(1.0, 2.0)]), vec![c(1.0, 2.0)]);
        assert_eq!(split_relu(&[c(-1.0, -2.0)]), vec![ZERO]);
        assert_eq!(split_relu(&[c(-1.0, 2.0)]), vec![c(0.0, 2.0)]);
    }

    #[test]
    fn detection_cases() {
        assert_eq!(detect_intensity(&[ZERO]), vec![0.0]);
        assert_eq!(detect_intensity(&[c(3.0, 4.0)]), vec![25.0]);
        for k in 0..16 {
            let theta = k as f64 * 0.7;
            let v = detect_intensity(&[C64::from_polar(1.0, theta)])[0];
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert_eq!(Detection::Magnitude.apply(c(3.0, 4.0)), 5.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ComplexMatrix::new(2, 1, vec![ONE]).is_err());
    }

    #[test]
    fn modrelu_gradient_matches_finite_difference() {
        let act = Activation::ModRelu { bias: -0.3 };
        let z = c(0.4, -0.7);
        let g = c(0.9, -1.3);
        // L = Re(conj(g) * act(z))
        let loss = |z: C64| {
            let o = act.apply(z);
            g.re * o.re + g.im * o.im
        };
        let h = 1e-6;
        let dre = (loss(z + c(h, 0.0)) - loss(z - c(h, 0.0))) / (2.0 * h);
        let dim = (loss(z + c(0.0, h)) - loss(z - c(0.0, h))) / (2.0 * h);
        let an = act.backward(z, g);
        assert!((an.re - dre).abs() < 1e-8);
        assert!((an.im - dim).abs() < 1e-8);
    }
}
