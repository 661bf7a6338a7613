//! Restarted GMRES and the preconditioners used by the implicit solvers.

use nalgebra::DMatrix;

use super::{norm, LiouvillianAction};
use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, C64, I, ZERO};

#[derive(Clone, Copy, Debug)]
pub(crate) struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    pub rtol: f64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Right-preconditioned restarted GMRES for `A x = b`. `x` holds the initial
/// guess on entry and the solution on exit.
pub(crate) fn gmres(
    apply_a: &dyn Fn(&[C64], &mut [C64]),
    precondition: &dyn Fn(&[C64], &mut [C64]),
    b: &[C64],
    x: &mut [C64],
    opts: GmresOptions,
) -> GmresReport {
    let n = b.len();
    let m = opts.restart.max(1);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = ZERO);
        return GmresReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let target = opts.rtol * b_norm;

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![ZERO; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![ZERO; m];
    let mut g = vec![ZERO; m + 1];
    let mut z = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    let mut r = vec![ZERO; n];
    let mut iterations = 0;

    loop {
        apply_a(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        if beta <= target || iterations >= opts.max_iter {
            return GmresReport {
                iterations,
                relative_residual: beta / b_norm,
                converged: beta <= target,
            };
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = ZERO);
        g[0] = C64::new(beta, 0.0);

        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            precondition(&basis[k], &mut z);
            apply_a(&z, &mut w);
            for i in 0..=k {
                let hik = dot(&basis[i], &w);
                h[i][k] = hik;
                axpy(-hik, &basis[i], &mut w);
            }
            let wn = norm(&w);
            h[k + 1][k] = C64::new(wn, 0.0);

            for i in 0..k {
                let (a, bb) = (h[i][k], h[i + 1][k]);
                h[i][k] = cs[i] * a + sn[i] * bb;
                h[i + 1][k] = -sn[i].conj() * a + cs[i] * bb;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let rr = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = C64::new(1.0, 0.0);
            } else {
                cs[k] = a.norm() / rr;
                sn[k] = (a / a.norm()) * bb.conj() / rr;
            }
            h[k][k] = cs[k] * a + sn[k] * bb;
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] *= cs[k];

            iterations += 1;
            k += 1;
            if g[k].norm() <= target || wn <= f64::EPSILON * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        // Back-substitute the k x k triangular system and update x.
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![ZERO; n];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut u);
        }
        precondition(&u, &mut z);
        axpy(C64::new(1.0, 0.0), &z, x);
    }
}

/// Approximate inverse of `I - tau L` used to precondition GMRES.
pub(crate) enum Preconditioner {
    /// Inverse of the diagonal of `I - tau L`.
    Jacobi(Vec<C64>),
    /// Exact inverse of `I - tau L0`, where `L0 rho = -i (K rho - rho K^dag)` is
    /// the no-jump part of the generator. Solved as a Sylvester equation in the
    /// Schur basis of `K`.
    NoJump { tau: f64, schur: SchurFactors },
}

pub(crate) struct SchurFactors {
    q: ComplexMatrix,
    q_dag: ComplexMatrix,
    t: ComplexMatrix,
}

impl SchurFactors {
    pub fn new(k: &ComplexMatrix) -> Result<Self> {
        let n = k.rows();
        let m = DMatrix::from_fn(n, n, |r, c| k[(r, c)]);
        let schur = nalgebra::linalg::Schur::try_new(m, 1e-15, 10_000)
            .ok_or_else(|| Error::NotConverged("Schur decomposition of the no-jump Hamiltonian".into()))?;
        let (q, t) = schur.unpack();
        let q = ComplexMatrix::from_fn(n, n, |r, c| q[(r, c)]);
        let t = ComplexMatrix::from_fn(n, n, |r, c| if r > c { ZERO } else { t[(r, c)] });
        Ok(Self {
            q_dag: q.dagger(),
            q,
            t,
        })
    }

    /// Solves `Y + i tau (K Y - Y K^dag) = X` for column-stacked `X`.
    fn solve(&self, tau: f64, x: &[C64], out: &mut [C64]) {
        let n = self.t.rows();
        let xm = ComplexMatrix::unvec(x).expect("square by construction");
        // Columns of Q^dag X Q are rows of its transpose.
        let xt = self.q_dag.matmul(&xm).matmul(&self.q).transpose();
        let t = &self.t;
        let at = t.scale(I * tau);
        let at = at.as_slice();
        let half = C64::new(0.5, 0.0);
        // Y~ columns, stored as rows.
        let mut yt = ComplexMatrix::zeros(n, n);
        let mut rhs = vec![ZERO; n];
        for k in (0..n).rev() {
            rhs.copy_from_slice(&xt.as_slice()[k * n..(k + 1) * n]);
            // B = I/2 - i tau T^dag is lower triangular: B[j][k] = -i tau conj(T[k][j]) for j > k.
            for j in k + 1..n {
                let bjk = -I * tau * t[(k, j)].conj();
                if bjk == ZERO {
                    continue;
                }
                let yj = &yt.as_slice()[j * n..(j + 1) * n];
                for (r, y) in rhs.iter_mut().zip(yj) {
                    *r -= bjk * y;
                }
            }
            let bkk = half - I * tau * t[(k, k)].conj();
            let row = &mut yt.as_mut_slice()[k * n..(k + 1) * n];
            for i in (0..n).rev() {
                let arow = &at[i * n..(i + 1) * n];
                let s = arow[i + 1..]
                    .iter()
                    .zip(&row[i + 1..])
                    .fold(rhs[i], |acc, (a, y)| acc - a * y);
                row[i] = s / (half + arow[i] + bkk);
            }
        }
        let y = self.q.matmul(&yt.transpose()).matmul(&self.q_dag);
        out.copy_from_slice(&y.vec_stack().expect("square"));
    }
}

impl Preconditioner {
    /// Picks the Sylvester preconditioner when the generator carries its
    /// no-jump Hamiltonian, Jacobi otherwise.
    pub fn for_shifted(action: &LiouvillianAction, tau: f64, schur: Option<SchurFactors>) -> Self {
        match schur {
            Some(schur) => Preconditioner::NoJump { tau, schur },
            None => {
                let s = action.superoperator();
                let diag = s.diagonal().iter().map(|d| C64::new(1.0, 0.0) - d * tau).collect();
                Preconditioner::Jacobi(diag)
            }
        }
    }

    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        match self {
            Preconditioner::Jacobi(d) => {
                for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
                    *o = if *di == ZERO { *xi } else { xi / di };
                }
            }
            Preconditioner::NoJump { tau, schur } => schur.solve(*tau, x, out),
        }
    }

    pub fn set_tau(&mut self, action: &LiouvillianAction, tau: f64) {
        match self {
            Preconditioner::Jacobi(d) => {
                for (di, si) in d.iter_mut().zip(action.superoperator().diagonal()) {
                    *di = C64::new(1.0, 0.0) - si * tau;
                }
            }
            Preconditioner::NoJump { tau: t, .. } => *t = tau,
        }
    }
}

/// Schur factors of the action's no-jump Hamiltonian, if it has one.
pub(crate) fn schur_for(action: &LiouvillianAction) -> Result<Option<SchurFactors>> {
    action.no_jump_hamiltonian().map(SchurFactors::new).transpose()
}

/// Solves `(I - tau L) x = b` with GMRES; `x` carries the initial guess.
pub(crate) fn solve_shifted(
    action: &LiouvillianAction,
    tau: f64,
    prec: &Preconditioner,
    b: &[C64],
    x: &mut [C64],
    opts: GmresOptions,
) -> GmresReport {
    let apply = |v: &[C64], out: &mut [C64]| {
        action.apply_vec(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi - *o * tau;
        }
    };
    gmres(&apply, &|v, out| prec.apply(v, out), b, x, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LindbladModel;
    use crate::operator::{destroy, SparseMatrix, TensorSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> LiouvillianAction {
        let space = TensorSpace::new(vec![2, 4]).unwrap();
        let a = destroy(3);
        let sm = ComplexMatrix::unit(2, 1, 0);
        let h = space.embed_sparse(&[(0, &sm.dagger()), (1, &a)]).unwrap().scale_real(3.0);
        let h = h.add(&h.dagger()).add(&space.embed_sparse(&[(0, &sm.dagger().matmul(&sm))]).unwrap().scale_real(40.0));
        LindbladModel::new(h)
            .unwrap()
            .with_jump(space.embed_sparse(&[(1, &a)]).unwrap().scale_real(2.0))
            .unwrap()
            .with_jump(space.embed_sparse(&[(0, &sm)]).unwrap().scale_real(0.5))
            .unwrap()
            .into_action()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn sylvester_preconditioner_inverts_no_jump_part() {
        let action = model();
        let k = action.no_jump_hamiltonian().unwrap().clone();
        let schur = SchurFactors::new(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vec(&mut rng, 64);
        let mut y = vec![ZERO; 64];
        let tau = 0.37;
        schur.solve(tau, &x, &mut y);
        let ym = ComplexMatrix::unvec(&y).unwrap();
        let back = &ym + &(&k.matmul(&ym) - &ym.matmul(&k.dagger())).scale(I * tau);
        let xm = ComplexMatrix::unvec(&x).unwrap();
        assert!((&back - &xm).max_abs() < 1e-12);
    }

    #[test]
    fn gmres_solves_shifted_system_with_both_preconditioners() {
        let action = model();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_vec(&mut rng, 64);
        let opts = GmresOptions {
            restart: 30,
            max_iter: 2000,
            rtol: 1e-12,
        };
        for schur in [None, schur_for(&action).unwrap()] {
            let prec = Preconditioner::for_shifted(&action, 0.8, schur);
            let mut x = vec![ZERO; 64];
            let report = solve_shifted(&action, 0.8, &prec, &b, &mut x, opts);
            assert!(report.converged, "{report:?}");
            let mut ax = vec![ZERO; 64];
            action.apply_vec(&x, &mut ax);
            let resid: f64 = ax
                .iter()
                .zip(&x)
                .zip(&b)
                .map(|((a, xi), bi)| (xi - a * 0.8 - bi).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-10 * norm(&b));
        }
    }

    #[test]
    fn gmres_on_small_dense_system() {
        let m = SparseMatrix::from_dense(&ComplexMatrix::from_real(2, 2, &[4.0, 1.0, 1.0, 3.0]).unwrap());
        let b = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
        let mut x = vec![ZERO; 2];
        let report = gmres(
            &|v, out| m.matvec_into(v, out),
            &|v, out| out.copy_from_slice(v),
            &b,
            &mut x,
            GmresOptions {
                restart: 5,
                max_iter: 10,
                rtol: 1e-14,
            },
        );
        assert!(report.converged);
        assert!((x[0] - C64::new(1.0 / 11.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - C64::new(7.0 / 11.0, 0.0)).norm() < 1e-14);
    }
}
