use super::Matrix;
use crate::error::Result;

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn sym_min_eig(m: &Matrix) -> Result<f64> {
    let eig = sym_eigenvalues(m)?;
    Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
}

/// Eigenvalues (ascending) of `(M + Mᵀ)/2` by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 · max(1, ‖M‖_F)`.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let mut a = m.symmetric_part()?;
    let n = a.rows();
    let tol = OFF_DIAGONAL_TOL * a.frobenius_norm().max(1.0);
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Closed-form eigenvalues `(lo, hi)` of `[[a, b], [b, d]]`.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(b);
    (mean - r, mean + r)
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    #[test]
    fn examples() {
        let m = Matrix::from_rows(&[&[1.0, 0.5], &[0.5, 1.0]]).unwrap();
        assert!((sym_min_eig(&m).unwrap() - 0.5).abs() < 1e-14);
        for n in 1..6 {
            assert!((sym_min_eig(&Matrix::identity(n)).unwrap() - 1.0).abs() < 1e-15);
        }
        let h = Matrix::from_rows(&[&[13.0, 0.5], &[0.5, 1.0]]).unwrap();
        let (lo, _) = sym2_eigenvalues(13.0, 0.5, 1.0);
        assert!((lo - 0.979_202_710_603_852_1).abs() < 1e-12);
        assert!((sym_min_eig(&h).unwrap() - lo).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(sym_min_eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn jacobi_matches_closed_form_on_2x2() {
        let mut rng = RngStream::new(5);
        for _ in 0..500 {
            let a = rng.uniform(-10.0, 10.0).unwrap();
            let b = rng.uniform(-10.0, 10.0).unwrap();
            let d = rng.uniform(-10.0, 10.0).unwrap();
            let m = Matrix::from_rows(&[&[a, b], &[b, d]]).unwrap();
            let (lo, hi) = sym2_eigenvalues(a, b, d);
            let eig = sym_eigenvalues(&m).unwrap();
            assert!((eig[0] - lo).abs() < 1e-12 * hi.abs().max(1.0));
            assert!((eig[1] - hi).abs() < 1e-12 * hi.abs().max(1.0));
        }
    }

    #[test]
    fn trace_and_diagonal_invariants() {
        let mut rng = RngStream::new(6);
        for n in 2..8 {
            let data: Vec<f64> = (0..n * n).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
            let m = Matrix::new(n, n, data).unwrap().symmetric_part().unwrap();
            let eig = sym_eigenvalues(&m).unwrap();
            let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
            assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-12);
            let fro2: f64 = m.data().iter().map(|x| x * x).sum();
            assert!((eig.iter().map(|x| x * x).sum::<f64>() - fro2).abs() < 1e-10);
        }
    }
}
