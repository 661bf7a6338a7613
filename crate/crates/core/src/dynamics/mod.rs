//! Generators, time evolution and steady states.
//!
//! A [`LiouvillianAction`] stores the generator as a sparse superoperator acting
//! on column-stacked density matrices. When it was built from Lindblad form it
//! also keeps the dense non-hermitian "no-jump" Hamiltonian, which the implicit
//! solvers use as a preconditioner.

mod explicit;
mod implicit;
mod krylov;
mod steady;

pub use explicit::{integrate, integrate_with, IntegrateOptions, Trajectory};
pub use implicit::{integrate_implicit, integrate_implicit_trajectory, ImplicitOptions};
pub use steady::{
    spectral_gap, steady_state, steady_state_inverse, steady_state_longtime, steady_state_nullspace,
    InverseOptions, LongtimeOptions, SteadyMethod, SteadyOutcome, Stepper, NULLSPACE_LIMIT,
};

use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, SparseMatrix, C64, I, ZERO};

/// Largest dimension for which [`LiouvillianAction::materialize`] returns a
/// dense superoperator.
pub const MATERIALIZE_LIMIT: usize = 64;

/// `coef * ([first rho, second^dag] + [second, rho first^dag])`.
///
/// The unidirectional coupling of a cascaded pair. Its sign depends on the
/// phase convention of the coupled operators, so the coefficient is signed.
#[derive(Clone, Debug)]
pub struct CascadeTerm {
    pub first: SparseMatrix,
    pub second: SparseMatrix,
    pub coef: f64,
}

/// `rho' = -i[H, rho] + sum_k D[c_k] rho + sum cascade terms`, with
/// `D[c] rho = 2 c rho c^dag - c^dag c rho - rho c^dag c`.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    cascades: Vec<CascadeTerm>,
}

impl LindbladModel {
    pub fn new(hamiltonian: SparseMatrix) -> Result<Self> {
        if hamiltonian.rows() != hamiltonian.cols() {
            return Err(Error::NotSquare(hamiltonian.rows(), hamiltonian.cols()));
        }
        Ok(Self {
            dim: hamiltonian.rows(),
            hamiltonian,
            jumps: vec![],
            cascades: vec![],
        })
    }

    fn check(&self, op: &SparseMatrix) -> Result<()> {
        if op.rows() != self.dim || op.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim),
                actual: format!("{}x{}", op.rows(), op.cols()),
            });
        }
        Ok(())
    }

    pub fn with_jump(mut self, c: SparseMatrix) -> Result<Self> {
        self.check(&c)?;
        self.jumps.push(c);
        Ok(self)
    }

    pub fn with_cascade(mut self, first: SparseMatrix, second: SparseMatrix, coef: f64) -> Result<Self> {
        self.check(&first)?;
        self.check(&second)?;
        self.cascades.push(CascadeTerm { first, second, coef });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &SparseMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[SparseMatrix] {
        &self.jumps
    }

    /// Evaluates the generator directly in operator form, without the
    /// superoperator. Slow; used to cross-check the vectorized form.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim),
                actual: format!("{}x{}", rho.rows(), rho.cols()),
            });
        }
        let h = self.hamiltonian.to_dense();
        let mut out = h.commutator(rho).scale(-I);
        for c in &self.jumps {
            out += &dissipator(&c.to_dense(), rho);
        }
        for t in &self.cascades {
            let c1 = t.first.to_dense();
            let c2 = t.second.to_dense();
            let term = &c1.matmul(rho).commutator(&c2.dagger()) + &c2.commutator(&rho.matmul(&c1.dagger()));
            out += &term.scale_real(t.coef);
        }
        Ok(out)
    }

    /// `H - i sum c^dag c - i sum coef * second^dag first`: the generator of
    /// the evolution between jumps, `rho' = -i (K rho - rho K^dag)`.
    pub fn effective_hamiltonian(&self) -> ComplexMatrix {
        let mut k = self.hamiltonian.to_dense();
        for c in &self.jumps {
            let cdc = c.dagger().matmul(c);
            k -= &cdc.to_dense().scale(I);
        }
        for t in &self.cascades {
            let m = t.second.dagger().matmul(&t.first);
            k -= &m.to_dense().scale(I * t.coef);
        }
        k
    }

    /// Column-stacked superoperator, `vec(A rho B) = (B^T kron A) vec(rho)`.
    pub fn superoperator(&self) -> SparseMatrix {
        let id = SparseMatrix::identity(self.dim);
        let h = &self.hamiltonian;
        let mut s = id.kron(h).add(&h.transpose().kron(&id).scale(-C64::new(1.0, 0.0))).scale(-I);
        for c in &self.jumps {
            let cdc = c.dagger().matmul(c);
            s = s
                .add(&c.conj().kron(c).scale_real(2.0))
                .add(&id.kron(&cdc).scale_real(-1.0))
                .add(&cdc.transpose().kron(&id).scale_real(-1.0));
        }
        for t in &self.cascades {
            let (c1, c2) = (&t.first, &t.second);
            let term = c2
                .conj()
                .kron(c1)
                .add(&id.kron(&c2.dagger().matmul(c1)).scale_real(-1.0))
                .add(&c1.conj().kron(c2))
                .add(&c1.dagger().matmul(c2).transpose().kron(&id).scale_real(-1.0));
            s = s.add(&term.scale_real(t.coef));
        }
        s
    }

    pub fn into_action(self) -> LiouvillianAction {
        let superop = self.superoperator();
        let k = self.effective_hamiltonian();
        let mut action = LiouvillianAction::from_superoperator_unchecked(superop);
        action.no_jump = Some(k);
        action
    }
}

/// `D[c] rho = 2 c rho c^dag - c^dag c rho - rho c^dag c`.
pub fn dissipator(c: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let cd = c.dagger();
    let cdc = cd.matmul(c);
    let mut out = c.matmul(rho).matmul(&cd).scale_real(2.0);
    out -= &cdc.matmul(rho);
    out -= &rho.matmul(&cdc);
    out
}

/// A linear generator `rho -> rho'` on `dim x dim` density matrices.
#[derive(Clone, Debug)]
pub struct LiouvillianAction {
    dim: usize,
    superop: SparseMatrix,
    rate_scale: f64,
    no_jump: Option<ComplexMatrix>,
}

impl LiouvillianAction {
    pub fn from_superoperator(superop: SparseMatrix) -> Result<Self> {
        let n2 = superop.rows();
        let dim = (n2 as f64).sqrt().round() as usize;
        if superop.cols() != n2 || dim * dim != n2 {
            return Err(Error::DimensionMismatch {
                expected: "a square superoperator of size dim^2".into(),
                actual: format!("{}x{}", superop.rows(), superop.cols()),
            });
        }
        Ok(Self::from_superoperator_unchecked(superop))
    }

    fn from_superoperator_unchecked(superop: SparseMatrix) -> Self {
        let dim = (superop.rows() as f64).sqrt().round() as usize;
        let rate_scale = (0..superop.rows())
            .map(|r| superop.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        Self {
            dim,
            superop,
            rate_scale,
            no_jump: None,
        }
    }

    /// The generator that does nothing.
    pub fn zero(dim: usize) -> Self {
        Self::from_superoperator_unchecked(SparseMatrix::zeros(dim * dim, dim * dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest absolute row sum of the superoperator: the fastest rate the
    /// generator can produce. Used to make convergence tests unit-free.
    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    pub fn superoperator(&self) -> &SparseMatrix {
        &self.superop
    }

    pub(crate) fn no_jump_hamiltonian(&self) -> Option<&ComplexMatrix> {
        self.no_jump.as_ref()
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim),
                actual: format!("{}x{}", rho.rows(), rho.cols()),
            });
        }
        ComplexMatrix::unvec(&self.superop.matvec(&rho.vec_stack()?))
    }

    pub fn apply_vec(&self, x: &[C64], out: &mut [C64]) {
        self.superop.matvec_into(x, out);
    }

    /// Dense superoperator, only for `dim <= MATERIALIZE_LIMIT`.
    pub fn materialize(&self) -> Option<ComplexMatrix> {
        (self.dim <= MATERIALIZE_LIMIT).then(|| self.superop.to_dense())
    }
}

pub(crate) fn trace_of_vec(x: &[C64], dim: usize) -> C64 {
    (0..dim).map(|k| x[k * dim + k]).fold(ZERO, |a, b| a + b)
}

/// `rho <- (rho + rho^dag) / 2` on a column-stacked vector.
pub(crate) fn symmetrize_vec(x: &mut [C64], dim: usize) {
    for c in 0..dim {
        x[c * dim + c].im = 0.0;
        for r in c + 1..dim {
            let a = x[c * dim + r];
            let b = x[r * dim + c];
            let m = (a + b.conj()) * 0.5;
            x[c * dim + r] = m;
            x[r * dim + c] = m.conj();
        }
    }
}

/// Subtracts `tr(x)/dim` from every diagonal entry, leaving `x` traceless.
pub(crate) fn remove_trace(x: &mut [C64], dim: usize) {
    let shift = trace_of_vec(x, dim) / dim as f64;
    for k in 0..dim {
        x[k * dim + k] -= shift;
    }
}

pub(crate) fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{destroy, pauli_x, TensorSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn sample_model() -> LindbladModel {
        let space = TensorSpace::new(vec![2, 3]).unwrap();
        let a = destroy(2);
        let x = pauli_x();
        let h = space.embed_sparse(&[(0, &x), (1, &a)]).unwrap();
        let h = h.add(&h.dagger()).add(&space.embed_sparse(&[(1, &a.dagger().matmul(&a))]).unwrap().scale_real(0.3));
        let sm = ComplexMatrix::unit(2, 1, 0);
        LindbladModel::new(h)
            .unwrap()
            .with_jump(space.embed_sparse(&[(1, &a)]).unwrap().scale_real(0.7))
            .unwrap()
            .with_jump(space.embed_sparse(&[(0, &sm)]).unwrap().scale_real(0.4))
            .unwrap()
            .with_cascade(
                space.embed_sparse(&[(0, &sm)]).unwrap(),
                space.embed_sparse(&[(1, &a)]).unwrap(),
                -0.9,
            )
            .unwrap()
    }

    #[test]
    fn superoperator_matches_operator_form() {
        let model = sample_model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let action = model.clone().into_action();
        for _ in 0..10 {
            let rho = random_matrix(&mut rng, 6);
            let direct = model.apply(&rho).unwrap();
            let vectorized = action.apply(&rho).unwrap();
            assert!((&direct - &vectorized).max_abs() < 1e-13);
        }
    }

    #[test]
    fn no_jump_part_matches_superoperator_minus_recycling() {
        // L rho - (-i (K rho - rho K^dag)) must equal the recycling terms.
        let model = sample_model();
        let k = model.effective_hamiltonian();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_matrix(&mut rng, 6);
        let full = model.apply(&rho).unwrap();
        let no_jump = (&k.matmul(&rho) - &rho.matmul(&k.dagger())).scale(-I);
        let mut recycle = ComplexMatrix::zeros(6, 6);
        for c in model.jumps() {
            let c = c.to_dense();
            recycle += &c.matmul(&rho).matmul(&c.dagger()).scale_real(2.0);
        }
        let t = &model.cascades[0];
        let (c1, c2) = (t.first.to_dense(), t.second.to_dense());
        recycle += &(&c1.matmul(&rho).matmul(&c2.dagger()) + &c2.matmul(&rho).matmul(&c1.dagger())).scale_real(t.coef);
        assert!((&(&full - &no_jump) - &recycle).max_abs() < 1e-13);
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity() {
        let action = sample_model().into_action();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let g = random_matrix(&mut rng, 6);
            let rho = g.matmul(&g.dagger());
            let d = action.apply(&rho).unwrap();
            assert!(d.trace().norm() < 1e-12 * rho.trace().norm());
            assert!(d.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn linearity() {
        let action = sample_model().into_action();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (r1, r2) = (random_matrix(&mut rng, 6), random_matrix(&mut rng, 6));
            let (al, be) = (C64::new(rng.gen(), rng.gen()), C64::new(rng.gen(), rng.gen()));
            let lhs = action.apply(&(&r1.scale(al) + &r2.scale(be))).unwrap();
            let rhs = &action.apply(&r1).unwrap().scale(al) + &action.apply(&r2).unwrap().scale(be);
            assert!((&lhs - &rhs).max_abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrize_vec_makes_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_matrix(&mut rng, 4);
        let mut v = m.vec_stack().unwrap();
        symmetrize_vec(&mut v, 4);
        let back = ComplexMatrix::unvec(&v).unwrap();
        assert!((&back - &m.hermitian_part()).max_abs() < 1e-15);
    }
}
