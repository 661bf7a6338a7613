//! Two-qubit entanglement and state metrics.
//!
//! Two-qubit inputs use the atomic basis `{|11>, |10>, |01>, |00>}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operator::{hermitian_eigen, pauli_y, ComplexMatrix, C64, I, ONE, ZERO};

/// CSV column names, in [`MetricReport`] field order.
pub const METRIC_COLUMNS: [&str; 5] = ["fidelity", "concurrence", "entropy_bits", "purity", "flux_per_us"];

const TRACE_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-8;
const NEGATIVITY_TOL: f64 = 1e-7;

/// Trace within 1e-8 of one, hermitian within 1e-8, no eigenvalue below
/// -1e-7. Above dimension 64 only the diagonal is checked for negativity.
pub fn check_density_matrix(rho: &ComplexMatrix) -> Result<()> {
    rho.require_square()?;
    let tr = rho.trace();
    if (tr - ONE).norm() > TRACE_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
    }
    let defect = rho.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::InvalidDensityMatrix(format!("not hermitian (defect {defect:e})")));
    }
    let min = if rho.rows() <= 64 {
        hermitian_eigen(&rho.hermitian_part())?.values[0]
    } else {
        (0..rho.rows()).map(|i| rho[(i, i)].re).fold(f64::INFINITY, f64::min)
    };
    if min < -NEGATIVITY_TOL {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

fn check_two_qubit(rho: &ComplexMatrix) -> Result<()> {
    if rho.rows() != 4 || rho.cols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4x4".into(),
            actual: format!("{}x{}", rho.rows(), rho.cols()),
        });
    }
    check_density_matrix(rho)
}

/// Columns are the magic basis vectors in the atomic basis ordering.
fn magic_basis() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // rows: |11>, |10>, |01>, |00>
    let r = C64::new(h, 0.0);
    let i = I * h;
    ComplexMatrix::from_vec(
        4,
        4,
        vec![
            r, -i, ZERO, ZERO, //
            ZERO, ZERO, i, -r, //
            ZERO, ZERO, i, r, //
            r, i, ZERO, ZERO,
        ],
    )
    .expect("4x4")
}

/// Fully entangled fraction: the largest eigenvalue of the real part of
/// `rho` written in the magic basis.
pub fn fef_fidelity(rho: &ComplexMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let m = magic_basis();
    let in_magic = m.dagger().matmul(rho).matmul(&m);
    let real = ComplexMatrix::from_fn(4, 4, |r, c| C64::new((in_magic[(r, c)].re + in_magic[(c, r)].re) / 2.0, 0.0));
    Ok(*hermitian_eigen(&real)?.values.last().expect("4 eigenvalues"))
}

fn su2(q: [f64; 4]) -> ComplexMatrix {
    let [a, b, c, d] = q;
    ComplexMatrix::from_vec(4 / 2, 2, vec![C64::new(a, b), C64::new(c, d), C64::new(-c, d), C64::new(a, -b)])
        .expect("2x2")
}

fn normalize(q: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.map(|x| x / n)
}

/// `<phi_U| rho |phi_U>` with `|phi_U> = (U kron I)|phi+>`.
fn overlap(rho: &ComplexMatrix, q: [f64; 4]) -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut phi_plus = vec![ZERO; 4];
    phi_plus[0] = C64::new(h, 0.0);
    phi_plus[3] = C64::new(h, 0.0);
    let u = su2(q).kron(&ComplexMatrix::identity(2));
    let phi = u.matvec(&phi_plus);
    rho.expectation_between(&phi, &phi).re
}

/// Sampling lower bound on the fully entangled fraction: the best overlap
/// over `samples` Haar-random maximally entangled states, then polished by a
/// shrinking-step coordinate search. Deterministic for a given seed.
pub fn fef_oracle(rho: &ComplexMatrix, samples: usize, seed: u64) -> Result<f64> {
    check_two_qubit(rho)?;
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_q = [1.0, 0.0, 0.0, 0.0];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let q = normalize([0; 4].map(|_: i32| StandardNormal.sample(&mut rng)));
        let v = overlap(rho, q);
        if v > best {
            best = v;
            best_q = q;
        }
    }
    let mut step = 0.1;
    while step > 1e-7 {
        let mut improved = false;
        for k in 0..4 {
            for sign in [1.0, -1.0] {
                let mut q = best_q;
                q[k] += sign * step;
                let q = normalize(q);
                let v = overlap(rho, q);
                if v > best {
                    best = v;
                    best_q = q;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(best)
}

/// Square roots of the eigenvalues of `rho (Y kron Y) rho* (Y kron Y)`,
/// descending.
///
/// They are the singular values of `tau_ij = <v_i| (Y kron Y) |v_j*>` for the
/// subnormalized eigenvectors `v_i = sqrt(l_i) e_i` of `rho`. Taking singular
/// values directly keeps absolute accuracy near 1e-16; going through the
/// eigenvalues and a square root would turn 1e-16 noise into 1e-8.
fn wootters_roots(rho: &ComplexMatrix) -> Result<[f64; 4]> {
    let yy = pauli_y().kron(&pauli_y());
    let eig = hermitian_eigen(&rho.hermitian_part())?;
    let v: Vec<Vec<C64>> = (0..4)
        .map(|k| {
            let w = eig.values[k].max(0.0).sqrt();
            eig.vector(k).into_iter().map(|x| x * w).collect()
        })
        .collect();
    let flipped: Vec<Vec<C64>> = v.iter().map(|vj| yy.matvec(&vj.iter().map(|x| x.conj()).collect::<Vec<_>>())).collect();
    let tau = nalgebra::DMatrix::from_fn(4, 4, |i, j| v[i].iter().zip(&flipped[j]).map(|(a, b)| a.conj() * b).sum::<C64>());
    let mut roots = [0.0; 4];
    for (r, s) in roots.iter_mut().zip(tau.singular_values().iter()) {
        *r = *s;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(roots)
}

/// Wootters concurrence.
pub fn concurrence(rho: &ComplexMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let s = wootters_roots(rho)?;
    Ok((s[0] - s[1] - s[2] - s[3]).max(0.0))
}

/// Von Neumann entropy in bits; eigenvalues below zero are clipped.
pub fn vn_entropy(rho: &ComplexMatrix) -> Result<f64> {
    check_density_matrix(rho)?;
    Ok(hermitian_eigen(&rho.hermitian_part())?
        .values
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0))
}

/// `tr(rho^2)`.
pub fn purity(rho: &ComplexMatrix) -> Result<f64> {
    check_density_matrix(rho)?;
    let n = rho.rows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            s += (rho[(r, c)] * rho[(c, r)]).re;
        }
    }
    Ok(s)
}

/// `tr(rho F)` for a flux operator `F = c^dag c`.
pub fn output_flux(rho: &ComplexMatrix, flux_operator: &ComplexMatrix) -> Result<f64> {
    if rho.rows() != flux_operator.rows() || rho.cols() != flux_operator.cols() || !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", flux_operator.rows(), flux_operator.cols()),
            actual: format!("{}x{}", rho.rows(), rho.cols()),
        });
    }
    let n = rho.rows();
    let mut s = ZERO;
    for r in 0..n {
        for c in 0..n {
            s += rho[(r, c)] * flux_operator[(c, r)];
        }
    }
    Ok(s.re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub fidelity: f64,
    pub concurrence: f64,
    pub entropy_bits: f64,
    pub purity: f64,
    pub flux_per_us: Option<f64>,
}

impl MetricReport {
    pub fn of(rho: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            fidelity: fef_fidelity(rho)?,
            concurrence: concurrence(rho)?,
            entropy_bits: vn_entropy(rho)?,
            purity: purity(rho)?,
            flux_per_us: None,
        })
    }

    pub fn with_flux(mut self, flux: f64) -> Self {
        self.flux_per_us = Some(flux);
        self
    }

    /// Values in [`METRIC_COLUMNS`] order; a missing flux is `NaN`.
    pub fn values(&self) -> [f64; 5] {
        [
            self.fidelity,
            self.concurrence,
            self.entropy_bits,
            self.purity,
            self.flux_per_us.unwrap_or(f64::NAN),
        ]
    }
}
