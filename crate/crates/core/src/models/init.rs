use crate::numeric::{Matrix, RngStream, Vector};

/// `rows × cols` with entries uniform on `[-1/√cols, 1/√cols)`.
pub fn init_weight(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-bound, bound).expect("bound > 0"))
        .collect();
    Matrix::from_raw(rows, cols, data)
}

/// Like [`init_weight`] but on `[0, 1/√fan_in)`, for weights constrained
/// to be nonnegative.
pub fn init_nonnegative(rows: usize, cols: usize, fan_in: usize, rng: &mut RngStream) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform(0.0, bound).expect("bound > 0"))
        .collect();
    Matrix::from_raw(rows, cols, data)
}

pub fn init_bias(len: usize) -> Vector {
    Vector::zeros(len)
}
