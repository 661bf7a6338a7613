use super::{ComplexMatrix, SparseMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Ordered list of subsystem dimensions. Factor 0 is the most significant
/// digit of a joint basis index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TensorSpace {
    factor_dims: Vec<usize>,
}

impl TensorSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidSpace("no factors".into()));
        }
        if let Some(pos) = factor_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidSpace(format!("factor {pos} has dimension 0")));
        }
        Ok(Self { factor_dims })
    }

    pub fn qubits(n: usize) -> Self {
        Self {
            factor_dims: vec![2; n.max(1)],
        }
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    /// Joint index of a per-factor basis label.
    pub fn index_of(&self, labels: &[usize]) -> usize {
        assert_eq!(labels.len(), self.factor_dims.len());
        labels
            .iter()
            .zip(&self.factor_dims)
            .fold(0, |acc, (&l, &d)| {
                assert!(l < d, "label {l} out of range for factor of dim {d}");
                acc * d + l
            })
    }

    /// Per-factor labels of a joint index.
    pub fn labels_of(&self, mut index: usize) -> Vec<usize> {
        let mut labels = vec![0; self.factor_dims.len()];
        for (slot, &d) in labels.iter_mut().zip(&self.factor_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        labels
    }

    fn check_site(&self, op_dim: usize, site: usize) -> Result<()> {
        let Some(&d) = self.factor_dims.get(site) else {
            return Err(Error::DimensionMismatch {
                expected: format!("site < {}", self.factor_dims.len()),
                actual: site.to_string(),
            });
        };
        if d != op_dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d} operator for site {site}"),
                actual: format!("{op_dim}x{op_dim}"),
            });
        }
        Ok(())
    }

    /// Lifts `op` on factor `site` to the joint space (identity elsewhere).
    pub fn embed_at(&self, op: &ComplexMatrix, site: usize) -> Result<ComplexMatrix> {
        let d = op.require_square()?;
        self.check_site(d, site)?;
        let mut out = ComplexMatrix::identity(1);
        for (k, &dk) in self.factor_dims.iter().enumerate() {
            out = if k == site {
                out.kron(op)
            } else {
                out.kron(&ComplexMatrix::identity(dk))
            };
        }
        Ok(out)
    }

    /// Sparse lift of a product of single-site operators, one per listed site.
    pub fn embed_sparse(&self, ops: &[(usize, &ComplexMatrix)]) -> Result<SparseMatrix> {
        for (site, op) in ops {
            self.check_site(op.require_square()?, *site)?;
        }
        let mut out = SparseMatrix::identity(1);
        for (k, &dk) in self.factor_dims.iter().enumerate() {
            let mut factor: Option<SparseMatrix> = None;
            for (site, op) in ops.iter().filter(|(s, _)| *s == k) {
                let _ = site;
                let s = SparseMatrix::from_dense(op);
                factor = Some(match factor {
                    Some(f) => f.matmul(&s),
                    None => s,
                });
            }
            let factor = factor.unwrap_or_else(|| SparseMatrix::identity(dk));
            out = out.kron(&factor);
        }
        Ok(out)
    }

    /// Traces out every factor not listed in `keep`. The result is ordered by
    /// ascending factor index.
    pub fn partial_trace(&self, rho: &ComplexMatrix, keep: &[usize]) -> Result<ComplexMatrix> {
        let n = rho.require_square()?;
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} for space {1:?}", self.dim(), self.factor_dims),
                actual: format!("{n}x{n}"),
            });
        }
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if let Some(&bad) = kept.iter().find(|&&k| k >= self.num_factors()) {
            return Err(Error::DimensionMismatch {
                expected: format!("factor index < {}", self.num_factors()),
                actual: bad.to_string(),
            });
        }
        let traced: Vec<usize> = (0..self.num_factors()).filter(|k| !kept.contains(k)).collect();

        let mut strides = vec![1usize; self.num_factors()];
        for k in (0..self.num_factors().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factor_dims[k + 1];
        }
        let offsets = |factors: &[usize]| -> Vec<usize> {
            let mut offs = vec![0usize];
            for &f in factors {
                let mut next = Vec::with_capacity(offs.len() * self.factor_dims[f]);
                for &o in &offs {
                    for l in 0..self.factor_dims[f] {
                        next.push(o + l * strides[f]);
                    }
                }
                offs = next;
            }
            offs
        };
        let kept_offsets = offsets(&kept);
        let traced_offsets = offsets(&traced);

        let m = kept_offsets.len();
        let mut out = ComplexMatrix::zeros(m, m);
        for (i, &oi) in kept_offsets.iter().enumerate() {
            for (j, &oj) in kept_offsets.iter().enumerate() {
                let mut acc = ZERO;
                for &t in &traced_offsets {
                    acc += rho[(oi + t, oj + t)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }
}

/// Amplitudes over a declared tensor space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: TensorSpace,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(space: TensorSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} amplitudes", space.dim()),
                actual: amplitudes.len().to_string(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalizes on construction; rejects the zero vector.
    pub fn normalized(space: TensorSpace, amplitudes: Vec<C64>) -> Result<Self> {
        let mut s = Self::new(space, amplitudes)?;
        let norm = s.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        for a in &mut s.amplitudes {
            *a /= norm;
        }
        Ok(s)
    }

    pub fn basis(space: TensorSpace, labels: &[usize]) -> Self {
        let mut amps = vec![ZERO; space.dim()];
        amps[space.index_of(labels)] = C64::new(1.0, 0.0);
        Self {
            space,
            amplitudes: amps,
        }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.amplitudes.len();
        ComplexMatrix::from_fn(n, n, |r, c| self.amplitudes[r] * self.amplitudes[c].conj())
    }

    pub fn apply(&self, op: &ComplexMatrix) -> Result<StateVector> {
        if op.cols() != self.amplitudes.len() || op.rows() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} operator", self.amplitudes.len()),
                actual: format!("{}x{}", op.rows(), op.cols()),
            });
        }
        Ok(Self {
            space: self.space.clone(),
            amplitudes: op.matvec(&self.amplitudes),
        })
    }
}
