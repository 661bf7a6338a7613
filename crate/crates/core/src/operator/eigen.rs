//! Cyclic Jacobi eigensolver for hermitian matrices.

use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Eigenvalues in ascending order; `vectors` holds the matching orthonormal
/// eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |r, c| {
            (0..n).map(|k| v[(r, k)] * fv[k] * v[(c, k)].conj()).sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|l| l)
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.values.len()).map(|r| self.vectors[(r, k)]).collect()
    }
}

const MAX_SWEEPS: usize = 100;

pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = a.require_square()?;
    let scale = a.max_abs();
    let defect = a.hermiticity_defect();
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: v });
    }

    let frob = m.frobenius_norm();
    let threshold = f64::EPSILON * frob;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= threshold || off == 0.0 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Annihilates `m[p][q]` with a unitary acting on columns/rows `p`, `q`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let n = m.rows();
    let apq = m[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    // Phase-rotate the pair into a real symmetric 2x2 block, then apply the
    // classic real Jacobi rotation.
    let phase = apq / mag;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
    let u_pp = C64::new(c, 0.0);
    let u_pq = C64::new(s, 0.0);
    let u_qp = -phase.conj() * s;
    let u_qq = phase.conj() * c;

    for r in 0..n {
        let mp = m[(r, p)];
        let mq = m[(r, q)];
        m[(r, p)] = mp * u_pp + mq * u_qp;
        m[(r, q)] = mp * u_pq + mq * u_qq;
        let vp = v[(r, p)];
        let vq = v[(r, q)];
        v[(r, p)] = vp * u_pp + vq * u_qp;
        v[(r, q)] = vp * u_pq + vq * u_qq;
    }
    for col in 0..n {
        let mp = m[(p, col)];
        let mq = m[(q, col)];
        m[(p, col)] = u_pp.conj() * mp + u_qp.conj() * mq;
        m[(q, col)] = u_pq.conj() * mp + u_qq.conj() * mq;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
}

#[cfg(test)]
mod tests {
    use super::super::{pauli_y, pauli_z};
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&g + &g.dagger()).scale_real(0.5)
    }

    fn check_contract(a: &ComplexMatrix, tol: f64) {
        let e = hermitian_eigen(a).unwrap();
        let resid = (&e.reconstruct() - a).frobenius_norm();
        assert!(resid <= tol * a.frobenius_norm().max(1.0), "residual {resid:e}");
        let vtv = e.vectors.dagger().matmul(&e.vectors);
        let orth = (&vtv - &ComplexMatrix::identity(a.rows())).max_abs();
        assert!(orth <= 1e-10, "orthonormality defect {orth:e}");
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pauli_z_spectrum() {
        let e = hermitian_eigen(&pauli_z()).unwrap();
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let ey = hermitian_eigen(&pauli_y()).unwrap();
        assert!((ey.values[0] + 1.0).abs() < 1e-14 && (ey.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaled_identity_spectrum() {
        let e = hermitian_eigen(&ComplexMatrix::identity(4).scale_real(0.25)).unwrap();
        assert!(e.values.iter().all(|&l| (l - 0.25).abs() < 1e-15));
    }

    #[test]
    fn random_16x16_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            check_contract(&random_hermitian(&mut rng, 16), 1e-10);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::unit(2, 0, 1);
        assert!(matches!(hermitian_eigen(&m), Err(Error::NotHermitian(_))));
        assert!(hermitian_eigen(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    proptest! {
        #[test]
        fn random_4x4_hermitian_reconstructs(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            check_contract(&random_hermitian(&mut rng, 4), 1e-10);
        }
    }
}
