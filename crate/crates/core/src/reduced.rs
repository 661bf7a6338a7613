//! Two-qubit cascaded master equation after elimination of both cavities.
//!
//! `rho' = sum_i D[R_i] rho - 2 sqrt(eps) ([R_1 rho, R_2^dag] + [R_2, rho R_1^dag])`
//! with `R_i = (beta_ri |0><1| + beta_si |1><0|) / sqrt(kappa_i)` and the
//! factor-2 dissipator of [`crate::dynamics::dissipator`].
//!
//! Single-atom basis is `(|1>, |0>)`, so the joint basis is
//! `{|11>, |10>, |01>, |00>}`.

use crate::dynamics::{dissipator, LindbladModel, LiouvillianAction};
use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, SparseMatrix, StateVector, TensorSpace, C64, I, ZERO};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedParams {
    pub beta_r1: C64,
    pub beta_s1: C64,
    pub beta_r2: C64,
    pub beta_s2: C64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub epsilon: f64,
}

impl ReducedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa1 > 0.0 && self.kappa2 > 0.0) || !self.kappa1.is_finite() || !self.kappa2.is_finite() {
            return Err(Error::InvalidParams("kappa1 and kappa2 must be positive".into()));
        }
        check_epsilon(self.epsilon)?;
        let betas = [self.beta_r1, self.beta_s1, self.beta_r2, self.beta_s2];
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParams("Raman rates must be finite".into()));
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParams(format!("epsilon out of [0,1]: {epsilon}")));
    }
    Ok(())
}

/// Matched driving, `beta_ri / sqrt(kappa_i) = a` and `beta_si / sqrt(kappa_i) = b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchedDrive {
    pub a: C64,
    pub b: C64,
    pub epsilon: f64,
}

impl MatchedDrive {
    pub fn new(a: C64, b: C64, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !a.is_finite() || !b.is_finite() || a.norm_sqr() + b.norm_sqr() == 0.0 {
            return Err(Error::InvalidParams("need finite a, b with |a|^2 + |b|^2 > 0".into()));
        }
        Ok(Self { a, b, epsilon })
    }

    pub fn real(a: f64, b: f64, epsilon: f64) -> Result<Self> {
        Self::new(C64::new(a, 0.0), C64::new(b, 0.0), epsilon)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    pub fn to_params(&self, kappa1: f64, kappa2: f64) -> Result<ReducedParams> {
        let (s1, s2) = (kappa1.sqrt(), kappa2.sqrt());
        let p = ReducedParams {
            beta_r1: self.a * s1,
            beta_s1: self.b * s1,
            beta_r2: self.a * s2,
            beta_s2: self.b * s2,
            kappa1,
            kappa2,
            epsilon: self.epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Cross configuration: atom 2 is driven with the roles of `a` and `b`
    /// exchanged, which steers towards `psi` rather than `phi` Bell states.
    pub fn to_cross_params(&self, kappa1: f64, kappa2: f64) -> Result<ReducedParams> {
        let mut p = self.to_params(kappa1, kappa2)?;
        std::mem::swap(&mut p.beta_r2, &mut p.beta_s2);
        Ok(p)
    }
}

fn space() -> TensorSpace {
    TensorSpace::qubits(2)
}

/// `|0><1|` in the `(|1>, |0>)` basis.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::unit(2, 1, 0)
}

/// `(R_1, R_2)` on the two-qubit space.
pub fn jump_operators(p: &ReducedParams) -> (ComplexMatrix, ComplexMatrix) {
    let sm = sigma_minus();
    let sp = sm.dagger();
    let single = |br: C64, bs: C64, kappa: f64| (&sm.scale(br) + &sp.scale(bs)).scale_real(1.0 / kappa.sqrt());
    let s = space();
    let r1 = s.embed_at(&single(p.beta_r1, p.beta_s1, p.kappa1), 0).expect("qubit factor");
    let r2 = s.embed_at(&single(p.beta_r2, p.beta_s2, p.kappa2), 1).expect("qubit factor");
    (r1, r2)
}

fn require_4x4(rho: &ComplexMatrix) -> Result<()> {
    if rho.rows() != 4 || rho.cols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: "4x4".into(),
            actual: format!("{}x{}", rho.rows(), rho.cols()),
        });
    }
    Ok(())
}

/// `rho'` evaluated directly in operator form.
pub fn liouvillian_apply(p: &ReducedParams, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_4x4(rho)?;
    let (r1, r2) = jump_operators(p);
    let mut out = &dissipator(&r1, rho) + &dissipator(&r2, rho);
    let r1_rho = r1.matmul(rho);
    let rho_r1d = rho.matmul(&r1.dagger());
    let cascade = &r1_rho.commutator(&r2.dagger()) + &r2.commutator(&rho_r1d);
    out -= &cascade.scale_real(2.0 * p.epsilon.sqrt());
    Ok(out)
}

/// The same generator as a [`LindbladModel`]: no Hamiltonian, jumps `R_1`,
/// `R_2` and a cascade term `(R_1, R_2)` with coefficient `-2 sqrt(eps)`.
pub fn lindblad_model(p: &ReducedParams) -> LindbladModel {
    let (r1, r2) = jump_operators(p);
    let (r1, r2) = (SparseMatrix::from_dense(&r1), SparseMatrix::from_dense(&r2));
    LindbladModel::new(SparseMatrix::zeros(4, 4))
        .and_then(|m| m.with_jump(r1.clone()))
        .and_then(|m| m.with_jump(r2.clone()))
        .and_then(|m| m.with_cascade(r1, r2, -2.0 * p.epsilon.sqrt()))
        .expect("4x4 operators")
}

/// Column-stacked 16x16 superoperator.
pub fn liouvillian_matrix(p: &ReducedParams) -> ComplexMatrix {
    lindblad_model(p).superoperator().to_dense()
}

pub fn liouvillian_action(p: &ReducedParams) -> LiouvillianAction {
    lindblad_model(p).into_action()
}

/// `D` of the closed-form steady state; vanishes at `|a| = |b|`, `eps = 1`.
pub fn denominator(m: &MatchedDrive) -> f64 {
    let (x, y, e) = (m.a.norm_sqr(), m.b.norm_sqr(), m.epsilon);
    (x * x + y * y + 2.0 * (1.0 + 2.0 * e - 4.0 * e * e) * x * y) * (x + y)
}

/// Closed-form stationary state of the matched model.
pub fn analytic_steady_state(m: &MatchedDrive) -> Result<ComplexMatrix> {
    let (x, y, e) = (m.a.norm_sqr(), m.b.norm_sqr(), m.epsilon);
    let d = denominator(m);
    if d.abs() <= 1e-12 * (x + y).powi(3) {
        return Err(Error::DegenerateParams(format!(
            "steady state is not unique at |a| = |b| with epsilon = 1 (D = {d:e})"
        )));
    }
    let se = e.sqrt();
    let mut rho = ComplexMatrix::zeros(4, 4);
    rho[(0, 0)] = C64::new((y.powi(3) + (1.0 + e - 4.0 * e * e) * x * y * y + e * y * x * x) / d, 0.0);
    rho[(1, 1)] = C64::new(x * y * (1.0 - e) * (x + (1.0 + 4.0 * e) * y) / d, 0.0);
    rho[(2, 2)] = C64::new(x * y * (1.0 - e) * (y + (1.0 + 4.0 * e) * x) / d, 0.0);
    rho[(3, 3)] = C64::new((x.powi(3) + e * x * y * y + (1.0 + e - 4.0 * e * e) * y * x * x) / d, 0.0);
    let c03 = m.a.conj() * m.b * (se * (x * x + (2.0 - 4.0 * e) * x * y + y * y) / d);
    rho[(0, 3)] = c03;
    rho[(3, 0)] = c03.conj();
    let c12 = C64::new(2.0 * se * (1.0 - e) * x * y * (x + y) / d, 0.0);
    rho[(1, 2)] = c12;
    rho[(2, 1)] = c12;
    Ok(rho)
}

/// `(a|00> + b|11>) / sqrt(|a|^2 + |b|^2)`.
pub fn dark_state(a: C64, b: C64) -> Result<StateVector> {
    StateVector::normalized(space(), vec![b, ZERO, ZERO, a])
}

/// `[phi+, phi-, psi+, psi-]` with `phi = (|00> +- |11>)/sqrt2`,
/// `psi = (|01> +- |10>)/sqrt2`.
pub fn bell_states() -> [StateVector; 4] {
    let one = C64::new(1.0, 0.0);
    let make = |amps: [C64; 4]| StateVector::normalized(space(), amps.to_vec()).expect("nonzero");
    [
        make([one, ZERO, ZERO, one]),
        make([-one, ZERO, ZERO, one]),
        make([ZERO, one, one, ZERO]),
        make([ZERO, -one, one, ZERO]),
    ]
}

/// Lindblad form of the cascaded generator.
#[derive(Clone, Debug)]
pub struct CascadeDecomposition {
    /// `J = sqrt(eps) R_1 - R_2`, the output-field jump.
    pub jump: ComplexMatrix,
    /// `sqrt(1 - eps) R_1`: the light lost between the cavities.
    pub loss: ComplexMatrix,
    /// `H_c = i sqrt(eps) (R_2^dag R_1 - R_1^dag R_2)`.
    pub hamiltonian: ComplexMatrix,
}

impl CascadeDecomposition {
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = &self.hamiltonian;
        let coherent = (&h.matmul(rho) - &rho.matmul(h)).scale(-I);
        &(&coherent + &dissipator(&self.jump, rho)) + &dissipator(&self.loss, rho)
    }
}

pub fn cascade_decomposition(p: &ReducedParams) -> CascadeDecomposition {
    let (r1, r2) = jump_operators(p);
    let se = p.epsilon.sqrt();
    let jump = &r1.scale_real(se) - &r2;
    let loss = r1.scale_real((1.0 - p.epsilon).max(0.0).sqrt());
    let exchange = &r2.dagger().matmul(&r1) - &r1.dagger().matmul(&r2);
    CascadeDecomposition {
        jump,
        loss,
        hamiltonian: exchange.scale(I * se),
    }
}

/// Photon flux leaving the second cavity, `2 J^dag J` in units of 1/us.
pub fn flux_operator(p: &ReducedParams) -> ComplexMatrix {
    let j = cascade_decomposition(p).jump;
    j.dagger().matmul(&j).scale_real(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{spectral_gap, steady_state_nullspace};
    use crate::metrics::{fef_fidelity, output_flux, purity};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(4, 4, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        g.hermitian_part()
    }

    fn random_params(rng: &mut ChaCha8Rng) -> ReducedParams {
        let mut z = || C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let betas = [z(), z(), z(), z()];
        ReducedParams {
            beta_r1: betas[0],
            beta_s1: betas[1],
            beta_r2: betas[2],
            beta_s2: betas[3],
            kappa1: rng.gen_range(0.5..3.0),
            kappa2: rng.gen_range(0.5..3.0),
            epsilon: rng.gen_range(0.0..1.0),
        }
    }

    #[test]
    fn matched_jump_operator() {
        let p = MatchedDrive::real(2.0, 1.0, 1.0).unwrap().to_params(1.0, 1.0).unwrap();
        let (r1, _) = jump_operators(&p);
        let single = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!(r1, single.kron(&ComplexMatrix::identity(2)));
        let q = MatchedDrive::real(1.5, 0.0, 1.0).unwrap().to_params(1.0, 1.0).unwrap();
        let (_, r2) = jump_operators(&q);
        assert_eq!(r2, ComplexMatrix::identity(2).kron(&sigma_minus().scale_real(1.5)));
    }

    #[test]
    fn cross_configuration_swaps_roles_on_atom_two() {
        let m = MatchedDrive::real(2.0, 1.0, 1.0).unwrap();
        let p = m.to_cross_params(1.0, 1.0).unwrap();
        assert_eq!((p.beta_r2, p.beta_s2), (c(1.0), c(2.0)));
        // Dark state becomes (a|01> + b|10>)-type, here approaching psi.
        let rho = steady_state_nullspace(&liouvillian_matrix(&p)).unwrap();
        let psi = StateVector::normalized(space(), vec![ZERO, c(1.0), c(2.0), ZERO]).unwrap();
        assert!((&rho - &psi.projector()).max_abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MatchedDrive::real(1.0, 1.0, 1.5).is_err());
        assert!(MatchedDrive::real(0.0, 0.0, 0.5).is_err());
        assert!(MatchedDrive::real(1.0, 1.0, 0.5).unwrap().to_params(0.0, 1.0).is_err());
        let p = MatchedDrive::real(1.0, 1.0, 0.5).unwrap().to_params(1.0, 1.0).unwrap();
        assert!(liouvillian_apply(&p, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn pure_decay_of_the_maximally_mixed_state() {
        // a=1, b=0, eps=0: each atom sees D[sigma-](I/2) = |0><0| - |1><1|.
        let p = MatchedDrive::real(1.0, 0.0, 0.0).unwrap().to_params(1.0, 1.0).unwrap();
        let out = liouvillian_apply(&p, &ComplexMatrix::identity(4).scale_real(0.25)).unwrap();
        let expected = ComplexMatrix::diagonal(&[c(-1.0), c(0.0), c(0.0), c(1.0)]);
        assert!((&out - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn matrix_matches_operator_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let l = liouvillian_matrix(&p);
            let rho = random_hermitian(&mut rng);
            let via_matrix = ComplexMatrix::unvec(&l.matvec(&rho.vec_stack().unwrap())).unwrap();
            let direct = liouvillian_apply(&p, &rho).unwrap();
            assert!((&via_matrix - &direct).max_abs() < 1e-12);
        }
    }

    #[test]
    fn generator_is_trace_and_hermiticity_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let out = liouvillian_apply(&p, &random_hermitian(&mut rng)).unwrap();
            assert!(out.trace().norm() < 1e-13);
            assert!(out.hermiticity_defect() < 1e-13);
        }
    }

    #[test]
    fn spectrum_has_single_zero_and_decaying_rest() {
        let p = MatchedDrive::real(2.0, 1.0, 0.98).unwrap().to_params(1.0, 1.0).unwrap();
        assert!(spectral_gap(&liouvillian_matrix(&p)).unwrap() > 0.0);
    }

    #[test]
    fn analytic_reference_values() {
        let rho = analytic_steady_state(&MatchedDrive::real(2.0, 1.0, 1.0).unwrap()).unwrap();
        let expected = ComplexMatrix::from_real(
            4,
            4,
            &[
                0.2, 0.0, 0.0, 0.4, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.4, 0.0, 0.0, 0.8,
            ],
        )
        .unwrap();
        assert!((&rho - &expected).max_abs() < 1e-15);
        let product = analytic_steady_state(&MatchedDrive::real(2.0, 1.0, 0.0).unwrap()).unwrap();
        let diag = ComplexMatrix::diagonal(&[c(0.04), c(0.16), c(0.16), c(0.64)]);
        assert!((&product - &diag).max_abs() < 1e-15);
        assert!(matches!(
            analytic_steady_state(&MatchedDrive::real(1.0, 1.0, 1.0).unwrap()),
            Err(Error::DegenerateParams(_))
        ));
    }

    #[test]
    fn analytic_state_is_stationary() {
        for (a, b, e) in [(2.0, 1.0, 0.98), (3.0, 1.0, 0.5), (1.0, 2.5, 0.0), (1.5, 1.0, 1.0)] {
            let m = MatchedDrive::real(a, b, e).unwrap();
            let out = liouvillian_apply(&m.to_params(1.0, 1.0).unwrap(), &analytic_steady_state(&m).unwrap()).unwrap();
            assert!(out.frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn dark_and_bell_states() {
        let d = dark_state(c(2.0), c(1.0)).unwrap();
        let s5 = 5f64.sqrt();
        assert_eq!(d.amplitudes()[0], c(1.0 / s5));
        assert!((d.amplitudes()[3] - c(2.0 / s5)).norm() < 1e-16);
        let bells = bell_states();
        let phi_plus = dark_state(c(1.0), c(1.0)).unwrap();
        assert!((phi_plus.inner(&bells[0]) - c(1.0)).norm() < 1e-15);
        let phi_minus = dark_state(c(1.0), c(-1.0)).unwrap();
        assert!((phi_minus.inner(&bells[1]).norm() - 1.0).abs() < 1e-15);
        for (i, x) in bells.iter().enumerate() {
            assert!((x.norm() - 1.0).abs() < 1e-15);
            assert!((fef_fidelity(&x.projector()).unwrap() - 1.0).abs() < 1e-12);
            for y in &bells[i + 1..] {
                assert!(x.inner(y).norm() < 1e-15);
            }
        }
        assert!(dark_state(ZERO, ZERO).is_err());
    }

    #[test]
    fn dark_state_is_annihilated_at_ideal_coupling() {
        let m = MatchedDrive::new(C64::new(1.2, 0.4), C64::new(-0.3, 0.7), 1.0).unwrap();
        let dec = cascade_decomposition(&m.to_params(1.3, 0.6).unwrap());
        let psi = dark_state(m.a, m.b).unwrap();
        let zero = |op: &ComplexMatrix| psi.apply(op).unwrap().amplitudes().iter().all(|z| z.norm() < 1e-14);
        assert!(zero(&dec.jump));
        assert!(zero(&dec.hamiltonian));
    }

    #[test]
    fn decomposition_without_coupling() {
        let p = MatchedDrive::real(2.0, 1.0, 0.0).unwrap().to_params(1.0, 1.0).unwrap();
        let dec = cascade_decomposition(&p);
        let (r1, r2) = jump_operators(&p);
        assert_eq!(dec.jump, -&r2);
        assert_eq!(dec.loss, r1);
        assert_eq!(dec.hamiltonian.max_abs(), 0.0);
    }

    #[test]
    fn flux_dark_and_bright() {
        let ideal = MatchedDrive::real(2.0, 1.0, 1.0).unwrap();
        let rho = analytic_steady_state(&ideal).unwrap();
        assert!(output_flux(&rho, &flux_operator(&ideal.to_params(1.0, 1.0).unwrap())).unwrap() <= 1e-12);
        let lossy = MatchedDrive::real(2.0, 1.0, 0.98).unwrap();
        let rho = analytic_steady_state(&lossy).unwrap();
        assert!(output_flux(&rho, &flux_operator(&lossy.to_params(1.0, 1.0).unwrap())).unwrap() > 1e-6);
        assert!((purity(&rho).unwrap() - 1.0).abs() > 1e-3);
    }

    proptest! {
        #[test]
        fn decomposition_reproduces_generator(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng);
            let rho = random_hermitian(&mut rng);
            let lhs = cascade_decomposition(&p).apply(&rho);
            let rhs = liouvillian_apply(&p, &rho).unwrap();
            prop_assert!((&lhs - &rhs).max_abs() < 1e-12);
            prop_assert!(cascade_decomposition(&p).hamiltonian.hermiticity_defect() < 1e-14);
        }

        #[test]
        fn stationarity(ar in -3.0f64..3.0, ai in -3.0f64..3.0, br in -3.0f64..3.0, bi in -3.0f64..3.0, e in 0.0f64..=1.0) {
            let m = MatchedDrive::new(C64::new(ar, ai), C64::new(br, bi), e);
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            prop_assume!(denominator(&m).abs() > 1e-6);
            let rho = analytic_steady_state(&m).unwrap();
            let out = liouvillian_apply(&m.to_params(1.0, 1.0).unwrap(), &rho).unwrap();
            prop_assert!(out.frobenius_norm() <= 1e-11 * m.norm_sqr());
            prop_assert!((rho.trace() - c(1.0)).norm() < 1e-12);
            prop_assert!(rho.hermiticity_defect() == 0.0);
        }

        #[test]
        fn common_phase_only_rotates_coherences(a in 0.1f64..3.0, b in 0.1f64..3.0, e in 0.0f64..0.99, phase in 0.0f64..6.3) {
            let m = MatchedDrive::real(a, b, e).unwrap();
            let u = C64::from_polar(1.0, phase);
            let rotated = MatchedDrive::new(m.a * u, m.b * u, e).unwrap();
            let (r0, r1) = (analytic_steady_state(&m).unwrap(), analytic_steady_state(&rotated).unwrap());
            for k in 0..4 {
                prop_assert!((r0[(k, k)] - r1[(k, k)]).norm() < 1e-14);
            }
            // A common phase cancels in a* b.
            prop_assert!((&r0 - &r1).max_abs() < 1e-14);
        }

        #[test]
        fn relative_phase_is_a_diagonal_unitary(a in 0.1f64..3.0, b in 0.1f64..3.0, e in 0.0f64..0.99, phase in 0.0f64..6.3) {
            let m = MatchedDrive::real(a, b, e).unwrap();
            let shifted = MatchedDrive::new(m.a, m.b * C64::from_polar(1.0, phase), e).unwrap();
            let half = C64::from_polar(1.0, phase / 2.0);
            // |x1 x2> picks up half^(n1 + n2) where n counts |1>s.
            let u = ComplexMatrix::diagonal(&[half * half, half, half, c(1.0)]);
            let expected = u.matmul(&analytic_steady_state(&m).unwrap()).matmul(&u.dagger());
            prop_assert!((&expected - &analytic_steady_state(&shifted).unwrap()).max_abs() < 1e-13);
        }

        #[test]
        fn uncoupled_steady_state_is_a_product(a in 0.1f64..3.0, b in 0.1f64..3.0) {
            let rho = analytic_steady_state(&MatchedDrive::real(a, b, 0.0).unwrap()).unwrap();
            let (x, y) = (a * a, b * b);
            let single = ComplexMatrix::diagonal(&[c(y / (x + y)), c(x / (x + y))]);
            prop_assert!((&rho - &single.kron(&single)).max_abs() < 1e-14);
        }
    }
}
