//! Spin operator matrices in the |m = +s, ..., −s⟩ ordering.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// (Sx, Sy, Sz) for spin 1/2, basis (|↑⟩, |↓⟩).
pub fn spin_half() -> [DMatrix<C64>; 3] {
    let h = 0.5;
    let sx = DMatrix::from_row_slice(2, 2, &[ZERO, C64::new(h, 0.0), C64::new(h, 0.0), ZERO]);
    let sy = DMatrix::from_row_slice(2, 2, &[ZERO, C64::new(0.0, -h), C64::new(0.0, h), ZERO]);
    let sz = DMatrix::from_row_slice(2, 2, &[C64::new(h, 0.0), ZERO, ZERO, C64::new(-h, 0.0)]);
    [sx, sy, sz]
}

/// (Jx, Jy, Jz) for spin 1, basis (|+1⟩, |0⟩, |−1⟩).
pub fn spin_one() -> [DMatrix<C64>; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    let jx = DMatrix::from_row_slice(3, 3, &[ZERO, r(s), ZERO, r(s), ZERO, r(s), ZERO, r(s), ZERO]);
    let jy = DMatrix::from_row_slice(3, 3, &[ZERO, i(-s), ZERO, i(s), ZERO, i(-s), ZERO, i(s), ZERO]);
    let jz = DMatrix::from_row_slice(3, 3, &[r(1.0), ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, r(-1.0)]);
    [jx, jy, jz]
}

pub fn identity(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n)
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}
