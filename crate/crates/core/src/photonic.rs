//! MZI meshes: the 2×2 interferometer transfer, triangular decomposition
//! of unitaries, SVD compilation of arbitrary weight matrices and
//! simulation of the compiled hardware.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::DMatrix;
use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::complex::{ComplexMatrix, C64, J, ONE, ZERO};
use crate::error::{dims, Error, Result};

/// Tolerance on `||U^H U - I||_F` accepted by [`decompose_unitary`].
pub const UNITARY_TOLERANCE: f64 = 1e-8;

type Mat2 = [[C64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            out[i][k] = a[i][0] * b[0][k] + a[i][1] * b[1][k];
        }
    }
    out
}

/// 50:50 directional coupler: half the power to each port, `pi/2` on the
/// cross path.
pub fn directional_coupler() -> [[C64; 2]; 2] {
    let t = C64::new(FRAC_1_SQRT_2, 0.0);
    let x = J * FRAC_1_SQRT_2;
    [[t, x], [x, t]]
}

fn phase_top(angle: f64) -> Mat2 {
    [[C64::from_polar(1.0, angle), ZERO], [ZERO, ONE]]
}

/// `DC * PS(theta) * DC * PS(phi)` with both phase shifters on the top arm.
pub(crate) fn mzi_mat2(theta: f64, phi: f64) -> Mat2 {
    // closed form of the four-factor product
    let et = C64::from_polar(1.0, theta);
    let ep = C64::from_polar(1.0, phi);
    [
        [(et - ONE) * ep * 0.5, J * (et + ONE) * 0.5],
        [J * (et + ONE) * ep * 0.5, (ONE - et) * 0.5],
    ]
}

/// Partial derivatives of [`mzi_mat2`] with respect to theta and phi.
pub(crate) fn mzi_mat2_grad(theta: f64, phi: f64) -> (Mat2, Mat2) {
    let et = C64::from_polar(1.0, theta);
    let ep = C64::from_polar(1.0, phi);
    let jet = J * et;
    let d_theta = [
        [jet * ep * 0.5, J * jet * 0.5],
        [J * jet * ep * 0.5, -jet * 0.5],
    ];
    let d_phi = [
        [(et - ONE) * J * ep * 0.5, ZERO],
        [J * (et + ONE) * J * ep * 0.5, ZERO],
    ];
    (d_theta, d_phi)
}

/// Transfer matrix of one MZI.
pub fn mzi_transfer(theta: f64, phi: f64) -> ComplexMatrix {
    let m = mzi_mat2(theta, phi);
    ComplexMatrix::from_array_unchecked(
        Array2::from_shape_vec((2, 2), vec![m[0][0], m[0][1], m[1][0], m[1][1]])
            .expect("2x2"),
    )
}

/// The literal four-factor chain, kept separate from the closed form used
/// everywhere else.
pub fn mzi_transfer_chain(theta: f64, phi: f64) -> ComplexMatrix {
    let dc = directional_coupler();
    let m = mat2_mul(
        &mat2_mul(&mat2_mul(&dc, &phase_top(theta)), &dc),
        &phase_top(phi),
    );
    ComplexMatrix::from_array_unchecked(
        Array2::from_shape_vec((2, 2), vec![m[0][0], m[0][1], m[1][0], m[1][1]])
            .expect("2x2"),
    )
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// One MZI acting on waveguides `i` and `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziSetting {
    pub i: usize,
    pub theta: f64,
    pub phi: f64,
}

impl MziSetting {
    pub fn transfer(&self) -> ComplexMatrix {
        mzi_transfer(self.theta, self.phi)
    }
}

/// Ordered MZI stages followed by a per-waveguide output phase screen.
/// Stage 0 is the first one light passes through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MziMesh {
    pub width: usize,
    pub stages: Vec<MziSetting>,
    pub phase_screen: Vec<f64>,
}

impl MziMesh {
    /// Mesh with no stages and a zero phase screen.
    pub fn identity(width: usize) -> Self {
        Self {
            width,
            stages: Vec::new(),
            phase_screen: vec![0.0; width],
        }
    }

    pub fn mzi_count(&self) -> usize {
        self.stages.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase_screen.len() != self.width {
            return Err(Error::MalformedMesh(format!(
                "phase screen has {} entries for width {}",
                self.phase_screen.len(),
                self.width
            )));
        }
        for (k, s) in self.stages.iter().enumerate() {
            if s.i + 1 >= self.width {
                return Err(Error::MalformedMesh(format!(
                    "stage {k} targets waveguides ({}, {}) outside width {}",
                    s.i,
                    s.i + 1,
                    self.width
                )));
            }
            if !s.theta.is_finite() || !s.phi.is_finite() {
                return Err(Error::MalformedMesh(format!("stage {k} has non-finite phase")));
            }
        }
        if self.phase_screen.iter().any(|p| !p.is_finite()) {
            return Err(Error::MalformedMesh("non-finite phase screen".into()));
        }
        Ok(())
    }

    /// Propagates a field vector through the mesh.
    pub fn forward(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.validate()?;
        if x.len() != self.width {
            return Err(dims("mesh forward", self.width, x.len()));
        }
        let mut v = x.to_vec();
        for s in &self.stages {
            let t = mzi_mat2(s.theta, s.phi);
            let (a, b) = (v[s.i], v[s.i + 1]);
            v[s.i] = t[0][0] * a + t[0][1] * b;
            v[s.i + 1] = t[1][0] * a + t[1][1] * b;
        }
        for (z, p) in v.iter_mut().zip(&self.phase_screen) {
            *z *= C64::from_polar(1.0, *p);
        }
        Ok(v)
    }

    /// Propagates every column of `a` (shape `width × batch`) in place.
    pub fn forward_columns(&self, a: &mut Array2<C64>) -> Result<()> {
        self.validate()?;
        if a.nrows() != self.width {
            return Err(dims("mesh forward", self.width, a.nrows()));
        }
        for s in &self.stages {
            let t = mzi_mat2(s.theta, s.phi);
            let (mut top, mut bottom) = a.multi_slice_mut((s![s.i, ..], s![s.i + 1, ..]));
            for (x, y) in top.iter_mut().zip(bottom.iter_mut()) {
                let (p, q) = (*x, *y);
                *x = t[0][0] * p + t[0][1] * q;
                *y = t[1][0] * p + t[1][1] * q;
            }
        }
        for (mut row, p) in a.axis_iter_mut(Axis(0)).zip(&self.phase_screen) {
            let e = C64::from_polar(1.0, *p);
            row.mapv_inplace(|z| z * e);
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let mut a = Array2::from_diag_elem(self.width, ONE);
        self.forward_columns(&mut a)?;
        Ok(ComplexMatrix::from_array_unchecked(a))
    }
}

pub fn mesh_forward(mesh: &MziMesh, x: &[C64]) -> Result<Vec<C64>> {
    mesh.forward(x)
}

pub fn mesh_to_matrix(mesh: &MziMesh) -> Result<ComplexMatrix> {
    mesh.to_matrix()
}

/// Factors a unitary into a triangular MZI mesh with `n(n-1)/2` stages and
/// an output phase screen.
///
/// Works by nulling the strictly lower triangle row by row, bottom row
/// first, with inverse MZIs applied to adjacent column pairs; what remains
/// is a diagonal of unit-modulus phases.
pub fn decompose_unitary(u: &ComplexMatrix) -> Result<MziMesh> {
    let (n, cols) = u.shape();
    if n != cols {
        return Err(dims("decompose_unitary (square)", n, cols));
    }
    let deviation = u.unitarity_deviation();
    if !(deviation <= UNITARY_TOLERANCE) {
        return Err(Error::NonUnitary { deviation });
    }
    let mut a = u.as_array().clone();
    let mut stages = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for r in (1..n).rev() {
        for c in 0..r {
            let (x, y) = (a[[r, c]], a[[r, c + 1]]);
            // [x, y] * T^H has a zero first entry for these angles; a zero
            // pair gives theta = 0, which is as good as any other choice.
            let theta = 2.0 * y.norm().atan2(x.norm());
            let phi = wrap_angle(PI + x.arg() - y.arg());
            if !theta.is_finite() || !phi.is_finite() {
                return Err(Error::DegenerateNulling {
                    stage: stages.len(),
                });
            }
            let t = mzi_mat2(theta, phi);
            // rows below r are already zero in both columns
            for row in 0..=r {
                let (p, q) = (a[[row, c]], a[[row, c + 1]]);
                a[[row, c]] = p * t[0][0].conj() + q * t[0][1].conj();
                a[[row, c + 1]] = p * t[1][0].conj() + q * t[1][1].conj();
            }
            a[[r, c]] = ZERO;
            stages.push(MziSetting {
                i: c,
                theta: wrap_angle(theta),
                phi,
            });
        }
    }
    let phase_screen = (0..n).map(|i| wrap_angle(a[[i, i]].arg())).collect();
    Ok(MziMesh {
        width: n,
        stages,
        phase_screen,
    })
}

/// A weight matrix realized as `U * diag(attenuators) * V^H`, scaled down by
/// `global_scale` so that every attenuator is at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonicLayer {
    pub rows: usize,
    pub cols: usize,
    pub v_mesh: MziMesh,
    pub attenuators: Vec<f64>,
    pub u_mesh: MziMesh,
    pub global_scale: f64,
}

impl PhotonicLayer {
    pub fn validate(&self) -> Result<()> {
        self.v_mesh.validate()?;
        self.u_mesh.validate()?;
        if self.v_mesh.width != self.cols || self.u_mesh.width != self.rows {
            return Err(Error::MalformedMesh(format!(
                "mesh widths ({}, {}) do not match layer {}x{}",
                self.u_mesh.width, self.v_mesh.width, self.rows, self.cols
            )));
        }
        if self.attenuators.len() != self.rows.min(self.cols) {
            return Err(Error::MalformedMesh(format!(
                "{} attenuators for a {}x{} layer",
                self.attenuators.len(),
                self.rows,
                self.cols
            )));
        }
        if self
            .attenuators
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0 || *a > 1.0 + 1e-12)
        {
            return Err(Error::MalformedMesh("attenuator outside [0, 1]".into()));
        }
        if !(self.global_scale.is_finite() && self.global_scale > 0.0) {
            return Err(Error::MalformedMesh("global scale must be positive".into()));
        }
        Ok(())
    }

    /// Optical output for one input vector; equals `W x / global_scale`.
    pub fn forward(&self, x: &[C64]) -> Result<Vec<C64>> {
        let mut a = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column");
        if x.len() != self.cols {
            return Err(dims("photonic layer", self.cols, x.len()));
        }
        a = self.forward_columns(a)?;
        Ok(a.column(0).to_vec())
    }

    /// Optical output for each column of `x` (`cols × batch`).
    pub fn forward_columns(&self, mut x: Array2<C64>) -> Result<Array2<C64>> {
        self.validate()?;
        if x.nrows() != self.cols {
            return Err(dims("photonic layer", self.cols, x.nrows()));
        }
        self.v_mesh.forward_columns(&mut x)?;
        let mut mid = Array2::zeros((self.rows, x.ncols()));
        for (k, att) in self.attenuators.iter().enumerate() {
            let src = x.row(k);
            mid.row_mut(k).zip_mut_with(&src, |d, s| *d = *s * *att);
        }
        self.u_mesh.forward_columns(&mut mid)?;
        Ok(mid)
    }

    /// Transfer matrix of the optical path (without the global scale).
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let id = Array2::from_diag_elem(self.cols, ONE);
        Ok(ComplexMatrix::from_array_unchecked(self.forward_columns(id)?))
    }

    pub fn mzi_count(&self) -> usize {
        self.v_mesh.mzi_count() + self.attenuators.len() + self.u_mesh.mzi_count()
    }
}

fn to_nalgebra(w: &ComplexMatrix) -> DMatrix<C64> {
    let (m, n) = w.shape();
    DMatrix::from_fn(m, n, |r, c| w.get(r, c))
}

/// Extends `q` (m×r, orthonormal columns) to an m×m unitary whose first r
/// columns are exactly `q`, using Householder reflections.
fn complete_unitary(q: &Array2<C64>) -> Array2<C64> {
    let (m, r) = q.dim();
    let mut a = q.clone();
    let mut full = Array2::from_diag_elem(m, ONE);
    for k in 0..r.min(m) {
        let x = a.slice(s![k.., k]).to_owned();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let mut v = x;
        v[0] += phase * norm;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        v.mapv_inplace(|z| z / vn);
        // a[k.., :] <- (I - 2 v v^H) a[k.., :]
        {
            let mut sub = a.slice_mut(s![k.., ..]);
            for mut col in sub.axis_iter_mut(Axis(1)) {
                let dot: C64 = v.iter().zip(col.iter()).map(|(vi, ci)| vi.conj() * ci).sum();
                col.zip_mut_with(&v, |c, vi| *c -= *vi * dot * 2.0);
            }
        }
        // full[:, k..] <- full[:, k..] (I - 2 v v^H)
        let mut sub = full.slice_mut(s![.., k..]);
        for mut row in sub.axis_iter_mut(Axis(0)) {
            let dot: C64 = row.iter().zip(v.iter()).map(|(ri, vi)| ri * vi).sum();
            row.zip_mut_with(&v, |c, vi| *c -= vi.conj() * dot * 2.0);
        }
    }
    full.slice_mut(s![.., ..r]).assign(q);
    full
}

/// Compiles an arbitrary complex matrix to two MZI meshes around a column
/// of attenuators.
pub fn compile_matrix(w: &ComplexMatrix) -> Result<PhotonicLayer> {
    let (m, n) = w.shape();
    if w.as_array().iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("weight matrix"));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidShape(format!("empty {m}x{n} weight matrix")));
    }
    let svd = nalgebra::linalg::SVD::try_new(to_nalgebra(w), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Svd(format!("{m}x{n} matrix did not converge")))?;
    let u = svd.u.ok_or_else(|| Error::Svd("missing U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Svd("missing V^H".into()))?;
    let sigma = svd.singular_values;
    let r = m.min(n);

    let u_thin = Array2::from_shape_fn((m, r), |(i, k)| u[(i, k)]);
    // columns of V, i.e. conjugate rows of V^H
    let v_thin = Array2::from_shape_fn((n, r), |(i, k)| v_t[(k, i)].conj());
    let u_full = complete_unitary(&u_thin);
    let v_full = complete_unitary(&v_thin);
    let vh_full = v_full.t().mapv(|z| z.conj());

    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let global_scale = sigma_max.max(1.0);
    let attenuators = sigma.iter().map(|s| (s / global_scale).clamp(0.0, 1.0)).collect();

    let v_mesh = decompose_unitary(&ComplexMatrix::from_array_unchecked(vh_full))?;
    let u_mesh = decompose_unitary(&ComplexMatrix::from_array_unchecked(u_full))?;
    Ok(PhotonicLayer {
        rows: m,
        cols: n,
        v_mesh,
        attenuators,
        u_mesh,
        global_scale,
    })
}

/// MZIs for an m×n weight: `n(n-1)/2 + min(m, n) + m(m-1)/2`, the middle
/// term counting attenuator sites.
pub fn count_mzis(m: usize, n: usize) -> u64 {
    let (m, n) = (m as u64, n as u64);
    n * n.saturating_sub(1) / 2 + m.min(n) + m * m.saturating_sub(1) / 2
}

/// MZIs in an n×n unitary mesh.
pub fn count_unitary_mzis(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{haar_unitary, random_complex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn transfer_zero_angles_is_cross() {
        let t = mzi_transfer(0.0, 0.0);
        assert!(close(t.get(0, 0), ZERO, 1e-15));
        assert!(close(t.get(0, 1), J, 1e-15));
        assert!(close(t.get(1, 0), J, 1e-15));
        assert!(close(t.get(1, 1), ZERO, 1e-15));
    }

    #[test]
    fn transfer_matches_literal_chain() {
        for &(theta, phi) in &[(PI, 0.0), (0.3, 1.7), (2.0, 5.5), (6.0, 0.01)] {
            let a = mzi_transfer(theta, phi);
            let b = mzi_transfer_chain(theta, phi);
            assert!(a.distance(&b) < 1e-14, "theta={theta} phi={phi}");
        }
        // theta = pi: the bar state up to signs
        let t = mzi_transfer(PI, 0.0);
        assert!(close(t.get(0, 0), C64::new(-1.0, 0.0), 1e-15));
        assert!(close(t.get(1, 1), ONE, 1e-15));
        assert!(t.get(0, 1).norm() < 1e-15 && t.get(1, 0).norm() < 1e-15);
    }

    #[test]
    fn transfer_unitary() {
        for k in 0..50 {
            let (theta, phi) = (k as f64 * 0.37, k as f64 * 1.13);
            let t = mzi_transfer(theta, phi);
            assert!(t.unitarity_deviation() < 1e-14);
            let det = t.get(0, 0) * t.get(1, 1) - t.get(0, 1) * t.get(1, 0);
            assert!((det.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn transfer_gradient_matches_finite_difference() {
        let (theta, phi) = (0.8, 2.1);
        let (dt, dp) = mzi_mat2_grad(theta, phi);
        let h = 1e-6;
        for i in 0..2 {
            for k in 0..2 {
                let fd_t = (mzi_mat2(theta + h, phi)[i][k] - mzi_mat2(theta - h, phi)[i][k]) / (2.0 * h);
                let fd_p = (mzi_mat2(theta, phi + h)[i][k] - mzi_mat2(theta, phi - h)[i][k]) / (2.0 * h);
                assert!(close(dt[i][k], fd_t, 1e-9));
                assert!(close(dp[i][k], fd_p, 1e-9));
            }
        }
    }

    #[test]
    fn one_by_one_unitary() {
        let u = ComplexMatrix::new(1, 1, vec![C64::from_polar(1.0, 2.5)]).unwrap();
        let mesh = decompose_unitary(&u).unwrap();
        assert!(mesh.stages.is_empty());
        assert!((mesh.phase_screen[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn four_by_four_uses_six_mzis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = haar_unitary(&mut rng, 4);
        let mesh = decompose_unitary(&u).unwrap();
        assert_eq!(mesh.mzi_count(), 6);
        assert!(mesh.to_matrix().unwrap().distance(&u) < 1e-10);
    }

    #[test]
    fn haar_sixteen_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let u = haar_unitary(&mut rng, 16);
        let mesh = decompose_unitary(&u).unwrap();
        assert_eq!(mesh.mzi_count(), 120);
        assert!(mesh.to_matrix().unwrap().distance(&u) < 1e-8);
    }

    #[test]
    fn permutation_and_diagonal_inputs() {
        // zero pivots everywhere
        let p = ComplexMatrix::new(
            3,
            3,
            vec![ZERO, ONE, ZERO, ZERO, ZERO, J, ONE, ZERO, ZERO],
        )
        .unwrap();
        let mesh = decompose_unitary(&p).unwrap();
        assert!(mesh.to_matrix().unwrap().distance(&p) < 1e-12);
        let d = ComplexMatrix::diag(&[J, -ONE, C64::from_polar(1.0, 0.3)]);
        let mesh = decompose_unitary(&d).unwrap();
        assert!(mesh.to_matrix().unwrap().distance(&d) < 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let w = ComplexMatrix::new(2, 2, vec![ONE, ONE, ZERO, ONE]).unwrap();
        match decompose_unitary(&w) {
            Err(Error::NonUnitary { deviation }) => assert!(deviation > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_mesh_is_identity() {
        let mesh = MziMesh::identity(3);
        let x = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), J];
        assert_eq!(mesh.forward(&x).unwrap(), x);
    }

    #[test]
    fn single_mzi_forward() {
        let mesh = MziMesh {
            width: 2,
            stages: vec![MziSetting { i: 0, theta: 0.0, phi: 0.0 }],
            phase_screen: vec![0.0, 0.0],
        };
        let y = mesh.forward(&[ONE, ZERO]).unwrap();
        assert!(close(y[0], ZERO, 1e-15) && close(y[1], J, 1e-15));
    }

    #[test]
    fn forward_on_basis_equals_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mesh = decompose_unitary(&haar_unitary(&mut rng, 6)).unwrap();
        let m = mesh.to_matrix().unwrap();
        for i in 0..6 {
            let mut e = vec![ZERO; 6];
            e[i] = ONE;
            let y = mesh.forward(&e).unwrap();
            for r in 0..6 {
                assert!(close(y[r], m.get(r, i), 1e-12));
            }
        }
    }

    #[test]
    fn malformed_mesh_rejected() {
        let mesh = MziMesh {
            width: 2,
            stages: vec![MziSetting { i: 1, theta: 0.0, phi: 0.0 }],
            phase_screen: vec![0.0, 0.0],
        };
        assert!(matches!(mesh.forward(&[ONE, ONE]), Err(Error::MalformedMesh(_))));
    }

    #[test]
    fn compile_identity() {
        let layer = compile_matrix(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(layer.global_scale, 1.0);
        for a in &layer.attenuators {
            assert!((a - 1.0).abs() < 1e-12);
        }
        assert!(layer.to_matrix().unwrap().distance(&ComplexMatrix::identity(3)) < 1e-10);
    }

    #[test]
    fn compile_diagonal_scale() {
        let w = ComplexMatrix::diag(&[C64::new(2.0, 0.0), ONE]);
        let layer = compile_matrix(&w).unwrap();
        assert!((layer.global_scale - 2.0).abs() < 1e-12);
        let mut att = layer.attenuators.clone();
        att.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((att[0] - 1.0).abs() < 1e-12 && (att[1] - 0.5).abs() < 1e-12);
        let m = layer.to_matrix().unwrap().scale(layer.global_scale);
        assert!(m.distance(&w) < 1e-10);
    }

    #[test]
    fn compile_zero_matrix() {
        let layer = compile_matrix(&ComplexMatrix::zeros(3, 2)).unwrap();
        assert!(layer.attenuators.iter().all(|a| *a == 0.0));
        assert_eq!(layer.global_scale, 1.0);
        assert!(layer.to_matrix().unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn compile_rectangular_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(1612);
        for &(m, n) in &[(16, 12), (12, 16), (1, 5), (5, 1)] {
            let w = random_complex(&mut rng, m, n);
            let layer = compile_matrix(&w).unwrap();
            assert_eq!(layer.mzi_count() as u64, count_mzis(m, n));
            let x: Vec<C64> = random_complex(&mut rng, n, 1).to_vec();
            let direct = crate::complex::complex_mvm(&w, &x).unwrap();
            let optical = layer.forward(&x).unwrap();
            for (a, b) in direct.iter().zip(&optical) {
                assert!(close(*a, *b * layer.global_scale, 1e-9));
            }
            let rel = layer.to_matrix().unwrap().scale(layer.global_scale).distance(&w)
                / w.frobenius_norm();
            assert!(rel < 1e-8, "{m}x{n}: {rel}");
        }
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_mzis(1, 1), 1);
        assert_eq!(count_mzis(100, 784), 306_936 + 100 + 4950);
        assert_eq!(count_mzis(100, 784), 311_986);
        assert_eq!(count_mzis(4, 4), 16);
        assert_eq!(count_mzis(100, 784) + count_mzis(10, 100), 316_991);
        for n in 1..40 {
            assert_eq!(count_mzis(n, n), (n * (n - 1) + n) as u64);
        }
    }
}
