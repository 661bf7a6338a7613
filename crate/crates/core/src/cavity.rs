//! Models that keep the cavity modes: effective two-level atoms coupled to
//! the cavities, and full five-level atoms with spontaneous emission.
//!
//! # Rotating frame
//!
//! Atom levels are ordered `[|1>, |0>, |r>, |s>, |t>]`. The two Raman lasers
//! and the cavity can only be removed from the Hamiltonian together, which
//! fixes the frame
//!
//! ```text
//! carrier  w_c' = (w_Ls + w_Lr) / 2      (cavity photons)
//! E_1           = (w_Ls - w_Lr) / 2      (level |1>)
//! ```
//!
//! with `|r>` rotating at `E_1 + w_Lr`, `|s>` at `w_Ls` and `|t>` at `w_Lt`.
//! Every coupling is then static. With detunings taken as laser minus atomic
//! transition frequency, the frame energies are
//!
//! ```text
//! |1>: d_1 = w_1 - E_1    |0>: 0    |r>: d_1 - D_r    |s>: -D_s    |t>: -D_t
//! photon: d_c = w_cav - w_c'
//! ```
//!
//! This frame exists for any finite laser frequencies, so the only frame
//! failure is a non-finite input.
//!
//! # Effective model
//!
//! Eliminating `|r>, |s>, |t>` at second order gives, per atom,
//!
//! ```text
//! H_i = d_c n_i + (d_1 + alpha_r) |1><1| + (alpha_s + alpha_t) |0><0|
//!       + eta_r n_i |0><0| + eta_s n_i |1><1|
//!       + a_i^dag (beta_r |0><1| + beta_s |1><0|) + h.c.
//! ```
//!
//! Both cavities decay through `kappa_i D[a_i]` and are coupled by the
//! cascade term `2 sqrt(eps kappa_1 kappa_2) ([a_1 rho, a_2^dag] + [a_2, rho a_1^dag])`.

use crate::dynamics::{steady_state_inverse, InverseOptions, LindbladModel, LiouvillianAction};
use crate::error::{Error, Result};
use crate::metrics::fef_fidelity;
use crate::operator::{destroy, ComplexMatrix, SparseMatrix, TensorSpace, C64, ZERO};
use crate::reduced::ReducedParams;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Converts a value quoted as `X/2pi MHz` to rad/us.
pub fn mhz(x: f64) -> f64 {
    TWO_PI * x
}

/// Level indices of the five-level atom.
pub mod level {
    pub const ONE: usize = 0;
    pub const ZERO: usize = 1;
    pub const R: usize = 2;
    pub const S: usize = 3;
    pub const T: usize = 4;
}

/// Raw cavity-QED parameters, in rad/us. Detunings are laser minus atomic
/// transition frequency; the optical frequencies are offsets from a common
/// reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub g_r: f64,
    pub g_s: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma_r: f64,
    pub gamma_s: f64,
    pub gamma_t: f64,
    pub delta_r: f64,
    pub delta_s: f64,
    pub delta_t: f64,
    /// Rabi frequencies per atom, index 0 for atom 1.
    pub omega_r: [C64; 2],
    pub omega_s: [C64; 2],
    pub omega_t: [C64; 2],
    pub omega_1: f64,
    pub omega_cav: f64,
    pub omega_lr: f64,
    pub omega_ls: f64,
    pub omega_lt: f64,
    pub epsilon: f64,
}

impl PhysicalParams {
    /// Identical atoms and cavities with one detuning for all three
    /// transitions. `Omega_t` starts at zero, frequencies at the reference.
    pub fn symmetric(g: f64, kappa: f64, gamma: f64, delta: f64, omega_r: f64, omega_s: f64, epsilon: f64) -> Self {
        let both = |x: f64| [C64::new(x, 0.0); 2];
        Self {
            g_r: g,
            g_s: g,
            kappa1: kappa,
            kappa2: kappa,
            gamma_r: gamma,
            gamma_s: gamma,
            gamma_t: gamma,
            delta_r: delta,
            delta_s: delta,
            delta_t: delta,
            omega_r: both(omega_r),
            omega_s: both(omega_s),
            omega_t: both(0.0),
            omega_1: 0.0,
            omega_cav: 0.0,
            omega_lr: 0.0,
            omega_ls: 0.0,
            omega_lt: 0.0,
            epsilon,
        }
    }

    /// The benchmark point `(g, kappa, gamma, Delta, Omega_s)/2pi =
    /// (110, 14.2, 5.2, 8000, 100) MHz` with `Omega_r = (a/b) Omega_s`,
    /// balanced with cavity-shift compensation.
    pub fn reference(a_over_b: f64, epsilon: f64) -> Result<Self> {
        let p = Self::symmetric(
            mhz(110.0),
            mhz(14.2),
            mhz(5.2),
            mhz(8000.0),
            mhz(100.0 * a_over_b),
            mhz(100.0),
            epsilon,
        );
        p.validate()?;
        stark_balance(&p, StarkMode::Compensated)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma_r = gamma;
        self.gamma_s = gamma;
        self.gamma_t = gamma;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa1 = kappa;
        self.kappa2 = kappa;
        self
    }

    /// Sets both couplings to `g` and rescales every Rabi frequency so the
    /// Raman rates stay fixed. Shifts change, so balance again afterwards.
    pub fn with_coupling(mut self, g: f64) -> Result<Self> {
        if !(g > 0.0 && self.g_r > 0.0 && self.g_s > 0.0) {
            return Err(Error::InvalidParams("couplings must be positive to rescale".into()));
        }
        let (fr, fs) = (self.g_r / g, self.g_s / g);
        for i in 0..2 {
            self.omega_r[i] *= fr;
            self.omega_s[i] *= fs;
        }
        self.g_r = g;
        self.g_s = g;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("g_r", self.g_r),
            ("g_s", self.g_s),
            ("gamma_r", self.gamma_r),
            ("gamma_s", self.gamma_s),
            ("gamma_t", self.gamma_t),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be finite and non-negative")));
            }
        }
        for (name, v) in [("kappa1", self.kappa1), ("kappa2", self.kappa2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!("epsilon out of [0,1]: {}", self.epsilon)));
        }
        let detunings = [self.delta_r, self.delta_s, self.delta_t];
        let rabi = self.omega_r.iter().chain(&self.omega_s).chain(&self.omega_t);
        if detunings.iter().any(|d| !d.is_finite()) || rabi.clone().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParams("detunings and Rabi frequencies must be finite".into()));
        }
        Ok(())
    }

    /// `min |Delta| / max(|Omega|, g, kappa, gamma)`; adiabatic elimination
    /// wants this well above 20.
    pub fn detuning_ratio(&self) -> f64 {
        let rabi = self.omega_r.iter().chain(&self.omega_s).chain(&self.omega_t).map(|o| o.norm());
        let rates = [self.g_r, self.g_s, self.kappa1, self.kappa2, self.gamma_r, self.gamma_s, self.gamma_t];
        let largest = rabi.chain(rates).fold(0.0, f64::max);
        let smallest = [self.delta_r, self.delta_s, self.delta_t].iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        smallest / largest
    }

    /// Human-readable notes about parameters outside the large-detuning regime.
    pub fn warnings(&self) -> Vec<String> {
        let ratio = self.detuning_ratio();
        if ratio < 20.0 {
            vec![format!("detuning only {ratio:.1}x the largest rate; elimination of excited states is marginal")]
        } else {
            vec![]
        }
    }
}

/// Raman rates, light shifts and cooperativity, in rad/us.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedParams {
    pub beta_r: [C64; 2],
    pub beta_s: [C64; 2],
    pub alpha_r: [f64; 2],
    pub alpha_s: [f64; 2],
    pub alpha_t: [f64; 2],
    pub eta_r: f64,
    pub eta_s: f64,
    /// `g_r^2 / (kappa_1 gamma_r)`.
    pub cooperativity: f64,
}

impl DerivedParams {
    /// Parameters of the cavity-free model with the same Raman rates.
    pub fn reduced(&self, p: &PhysicalParams) -> Result<ReducedParams> {
        let r = ReducedParams {
            beta_r1: self.beta_r[0],
            beta_s1: self.beta_s[0],
            beta_r2: self.beta_r[1],
            beta_s2: self.beta_s[1],
            kappa1: p.kappa1,
            kappa2: p.kappa2,
            epsilon: p.epsilon,
        };
        r.validate()?;
        Ok(r)
    }
}

pub fn derive_params(p: &PhysicalParams) -> Result<DerivedParams> {
    for (name, d) in [("r", p.delta_r), ("s", p.delta_s), ("t", p.delta_t)] {
        if d == 0.0 {
            return Err(Error::ZeroDetuning(name));
        }
    }
    let shift = |o: C64, d: f64| o.norm_sqr() / (4.0 * d);
    Ok(DerivedParams {
        beta_r: p.omega_r.map(|o| o * (p.g_r / (2.0 * p.delta_r))),
        beta_s: p.omega_s.map(|o| o * (p.g_s / (2.0 * p.delta_s))),
        alpha_r: p.omega_r.map(|o| shift(o, p.delta_r)),
        alpha_s: p.omega_s.map(|o| shift(o, p.delta_s)),
        alpha_t: p.omega_t.map(|o| shift(o, p.delta_t)),
        eta_r: p.g_r * p.g_r / p.delta_r,
        eta_s: p.g_s * p.g_s / p.delta_s,
        cooperativity: p.g_r * p.g_r / (p.kappa1 * p.gamma_r),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotatingFrame {
    /// Frame frequency of the cavity photons.
    pub carrier: f64,
    /// Frame frequency of level `|1>`.
    pub e1: f64,
    pub delta_c: f64,
    pub delta_1: f64,
}

impl RotatingFrame {
    pub fn of(p: &PhysicalParams) -> Result<Self> {
        let freqs = [p.omega_1, p.omega_cav, p.omega_lr, p.omega_ls, p.omega_lt];
        if freqs.iter().any(|f| !f.is_finite()) {
            return Err(Error::FrameInconsistency("optical and level frequencies must be finite".into()));
        }
        let carrier = (p.omega_ls + p.omega_lr) / 2.0;
        let e1 = (p.omega_ls - p.omega_lr) / 2.0;
        Ok(Self {
            carrier,
            e1,
            delta_c: p.omega_cav - carrier,
            delta_1: p.omega_1 - e1,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarkMode {
    /// `alpha_r - alpha_s - alpha_t = 0`; frequencies untouched.
    RamanResonant,
    /// Resets the cavity to `(w_Ls + w_Lr)/2 - eta` and picks `alpha_t` so
    /// that `alpha_r - alpha_s - alpha_t = (w_Ls - w_Lr)/2 - w_1`. Needs
    /// `eta_r = eta_s`.
    Compensated,
}

/// Solves for `Omega_t` (real, per atom) that balances the ground-state shifts.
pub fn stark_balance(p: &PhysicalParams, mode: StarkMode) -> Result<PhysicalParams> {
    p.validate()?;
    let d = derive_params(p)?;
    let frame = RotatingFrame::of(p)?;
    let mut out = *p;
    let offset = match mode {
        StarkMode::RamanResonant => 0.0,
        StarkMode::Compensated => {
            if (d.eta_r - d.eta_s).abs() > 1e-12 * d.eta_r.abs().max(d.eta_s.abs()) {
                return Err(Error::InvalidParams(format!(
                    "compensation needs eta_r = eta_s (got {} and {})",
                    d.eta_r, d.eta_s
                )));
            }
            out.omega_cav = frame.carrier - d.eta_r;
            frame.delta_1
        }
    };
    for i in 0..2 {
        let alpha_t = d.alpha_r[i] - d.alpha_s[i] + offset;
        if alpha_t == 0.0 {
            out.omega_t[i] = ZERO;
        } else if alpha_t * p.delta_t < 0.0 {
            return Err(Error::Infeasible(format!(
                "atom {} needs alpha_t = {alpha_t:e}, which has the wrong sign for Delta_t = {}",
                i + 1,
                p.delta_t
            )));
        } else {
            out.omega_t[i] = C64::new((4.0 * p.delta_t * alpha_t).sqrt(), 0.0);
        }
    }
    Ok(out)
}

/// `d_1 + alpha_r - alpha_s - alpha_t` per atom, zero when the Raman
/// transitions are resonant.
pub fn shift_residual(p: &PhysicalParams) -> Result<[f64; 2]> {
    let d = derive_params(p)?;
    let frame = RotatingFrame::of(p)?;
    Ok([0, 1].map(|i| frame.delta_1 + d.alpha_r[i] - d.alpha_s[i] - d.alpha_t[i]))
}

fn check_balanced(p: &PhysicalParams) -> Result<()> {
    let d = derive_params(p)?;
    let frame = RotatingFrame::of(p)?;
    let residual = shift_residual(p)?;
    for i in 0..2 {
        let scale = [frame.delta_1, d.alpha_r[i], d.alpha_s[i], d.alpha_t[i]]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let limit = 1e-9 * scale;
        if residual[i].abs() > limit {
            return Err(Error::UnbalancedShifts {
                residual: residual[i],
                limit,
            });
        }
    }
    Ok(())
}

/// Atom levels and Fock truncation; the space is `[L, L, n+1, n+1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpace {
    pub atom_levels: usize,
    pub fock_cutoff: usize,
}

impl ModelSpace {
    pub fn new(atom_levels: usize, fock_cutoff: usize) -> Result<Self> {
        if atom_levels != 2 && atom_levels != 5 {
            return Err(Error::InvalidSpace(format!("atoms have 2 or 5 levels, not {atom_levels}")));
        }
        if fock_cutoff < 1 {
            return Err(Error::InvalidSpace("fock cutoff must be at least 1".into()));
        }
        Ok(Self {
            atom_levels,
            fock_cutoff,
        })
    }

    pub fn effective(fock_cutoff: usize) -> Result<Self> {
        Self::new(2, fock_cutoff)
    }

    pub fn full(fock_cutoff: usize) -> Result<Self> {
        Self::new(5, fock_cutoff)
    }

    pub fn tensor_space(&self) -> TensorSpace {
        let n = self.fock_cutoff + 1;
        TensorSpace::new(vec![self.atom_levels, self.atom_levels, n, n]).expect("positive factors")
    }

    pub fn dim(&self) -> usize {
        self.tensor_space().dim()
    }

    /// Both atoms in `|0>`, both cavities empty.
    pub fn ground_vacuum(&self) -> ComplexMatrix {
        let s = self.tensor_space();
        let k = s.index_of(&[level::ZERO, level::ZERO, 0, 0]);
        ComplexMatrix::unit(s.dim(), k, k)
    }

    fn require(&self, levels: usize) -> Result<()> {
        if self.atom_levels != levels {
            return Err(Error::InvalidSpace(format!(
                "this model needs {levels}-level atoms, the space has {}",
                self.atom_levels
            )));
        }
        Ok(())
    }
}

fn site_op(space: &TensorSpace, site: usize, op: &ComplexMatrix) -> SparseMatrix {
    space.embed_sparse(&[(site, op)]).expect("factor dimensions match")
}

fn projector(levels: usize, k: usize) -> ComplexMatrix {
    ComplexMatrix::unit(levels, k, k)
}

struct Modes {
    a: [SparseMatrix; 2],
    n: [SparseMatrix; 2],
}

fn modes(space: &ModelSpace) -> Modes {
    let s = space.tensor_space();
    let a = destroy(space.fock_cutoff);
    let a = [site_op(&s, 2, &a), site_op(&s, 3, &a)];
    let n = [a[0].dagger().matmul(&a[0]), a[1].dagger().matmul(&a[1])];
    Modes { a, n }
}

/// Cavity damping and the cascade coupling, shared by both models.
fn with_cavity_losses(model: LindbladModel, p: &PhysicalParams, m: &Modes) -> Result<LindbladModel> {
    model
        .with_jump(m.a[0].scale_real(p.kappa1.sqrt()))?
        .with_jump(m.a[1].scale_real(p.kappa2.sqrt()))?
        .with_cascade(m.a[0].clone(), m.a[1].clone(), 2.0 * (p.epsilon * p.kappa1 * p.kappa2).sqrt())
}

/// Generator of the effective two-level model on `[2, 2, n+1, n+1]`.
pub fn effective_model(p: &PhysicalParams, space: &ModelSpace) -> Result<LindbladModel> {
    space.require(2)?;
    p.validate()?;
    check_balanced(p)?;
    let d = derive_params(p)?;
    let frame = RotatingFrame::of(p)?;
    let s = space.tensor_space();
    let m = modes(space);
    let sm = ComplexMatrix::unit(2, level::ZERO, level::ONE);
    let mut h = SparseMatrix::zeros(s.dim(), s.dim());
    for i in 0..2 {
        let p1 = site_op(&s, i, &projector(2, level::ONE));
        let p0 = site_op(&s, i, &projector(2, level::ZERO));
        let x = site_op(&s, i, &(&sm.scale(d.beta_r[i]) + &sm.dagger().scale(d.beta_s[i])));
        let raman = m.a[i].dagger().matmul(&x);
        h = h
            .add(&m.n[i].scale_real(frame.delta_c))
            .add(&p1.scale_real(frame.delta_1 + d.alpha_r[i]))
            .add(&p0.scale_real(d.alpha_s[i] + d.alpha_t[i]))
            .add(&m.n[i].matmul(&p0).scale_real(d.eta_r))
            .add(&m.n[i].matmul(&p1).scale_real(d.eta_s))
            .add(&raman)
            .add(&raman.dagger());
    }
    with_cavity_losses(LindbladModel::new(h)?, p, &m)
}

pub fn build_effective_liouvillian(p: &PhysicalParams, space: &ModelSpace) -> Result<LiouvillianAction> {
    Ok(effective_model(p, space)?.into_action())
}

/// Generator of the five-level model on `[5, 5, n+1, n+1]`.
pub fn full_model(p: &PhysicalParams, space: &ModelSpace) -> Result<LindbladModel> {
    space.require(5)?;
    p.validate()?;
    let frame = RotatingFrame::of(p)?;
    let s = space.tensor_space();
    let m = modes(space);
    let flip = |to: usize, from: usize| ComplexMatrix::unit(5, to, from);
    let energies = [
        (level::ONE, frame.delta_1),
        (level::R, frame.delta_1 - p.delta_r),
        (level::S, -p.delta_s),
        (level::T, -p.delta_t),
    ];
    let mut h = SparseMatrix::zeros(s.dim(), s.dim());
    let mut emission = Vec::new();
    for i in 0..2 {
        h = h.add(&m.n[i].scale_real(frame.delta_c));
        for (k, e) in energies {
            h = h.add(&site_op(&s, i, &projector(5, k)).scale_real(e));
        }
        let laser = &(&flip(level::R, level::ONE).scale(p.omega_r[i] * 0.5)
            + &flip(level::S, level::ZERO).scale(p.omega_s[i] * 0.5))
            + &flip(level::T, level::ZERO).scale(p.omega_t[i] * 0.5);
        let absorb = &flip(level::R, level::ZERO).scale_real(p.g_r) + &flip(level::S, level::ONE).scale_real(p.g_s);
        let v = site_op(&s, i, &laser).add(&site_op(&s, i, &absorb).matmul(&m.a[i]));
        h = h.add(&v).add(&v.dagger());
        for (e, gamma) in [(level::R, p.gamma_r), (level::S, p.gamma_s), (level::T, p.gamma_t)] {
            if gamma > 0.0 {
                for g in [level::ONE, level::ZERO] {
                    emission.push(site_op(&s, i, &flip(g, e)).scale_real((gamma / 2.0).sqrt()));
                }
            }
        }
    }
    let mut model = with_cavity_losses(LindbladModel::new(h)?, p, &m)?;
    for c in emission {
        model = model.with_jump(c)?;
    }
    Ok(model)
}

pub fn build_full_liouvillian(p: &PhysicalParams, space: &ModelSpace) -> Result<LiouvillianAction> {
    Ok(full_model(p, space)?.into_action())
}

/// Builds whichever model matches `space.atom_levels`.
pub fn build_liouvillian(p: &PhysicalParams, space: &ModelSpace) -> Result<LiouvillianAction> {
    match space.atom_levels {
        2 => build_effective_liouvillian(p, space),
        _ => build_full_liouvillian(p, space),
    }
}

/// `c^dag c` with `c = sqrt(2 eps kappa_1) a_1 + sqrt(2 kappa_2) a_2`, the
/// photon flux leaving the second cavity.
pub fn output_flux_operator(p: &PhysicalParams, space: &ModelSpace) -> ComplexMatrix {
    let m = modes(space);
    let c = m.a[0]
        .scale_real((2.0 * p.epsilon * p.kappa1).sqrt())
        .add(&m.a[1].scale_real((2.0 * p.kappa2).sqrt()));
    c.dagger().matmul(&c).to_dense()
}

fn require_state(rho: &ComplexMatrix, space: &ModelSpace) -> Result<TensorSpace> {
    let s = space.tensor_space();
    if rho.rows() != s.dim() || rho.cols() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", s.dim()),
            actual: format!("{}x{}", rho.rows(), rho.cols()),
        });
    }
    Ok(s)
}

/// Two-qubit state of the atoms: the cavities are traced out and, for
/// five-level atoms, the ground-state block is kept and renormalized.
pub fn atomic_marginal(rho: &ComplexMatrix, space: &ModelSpace) -> Result<ComplexMatrix> {
    let s = require_state(rho, space)?;
    let atoms = s.partial_trace(rho, &[0, 1])?;
    if space.atom_levels == 2 {
        return Ok(atoms);
    }
    let l = space.atom_levels;
    let ground = [level::ONE, level::ZERO];
    let idx: Vec<usize> = ground.iter().flat_map(|&x| ground.iter().map(move |&y| x * l + y)).collect();
    let block = atoms.select(&idx, &idx);
    let tr = block.trace().re;
    if !(tr > 0.0) {
        return Err(Error::InvalidDensityMatrix("no population in the ground manifold".into()));
    }
    Ok(block.scale_real(1.0 / tr).hermitian_part())
}

/// Largest population of the highest retained Fock state over both modes.
pub fn top_fock_population(rho: &ComplexMatrix, space: &ModelSpace) -> Result<f64> {
    let s = require_state(rho, space)?;
    let top = space.fock_cutoff;
    let mut worst = 0.0f64;
    for site in [2, 3] {
        worst = worst.max(s.partial_trace(rho, &[site])?[(top, top)].re);
    }
    Ok(worst)
}

/// Steady state of a cavity model at one Fock cutoff.
#[derive(Clone, Debug)]
pub struct CavitySteadyState {
    pub space: ModelSpace,
    pub state: ComplexMatrix,
    pub marginal: ComplexMatrix,
    pub fidelity: f64,
    pub flux: f64,
    pub top_population: f64,
    /// `||L rho|| / rate_scale` at the returned state.
    pub residual: f64,
}

/// Steady state by shifted inverse iteration from the ground-vacuum state.
pub fn cavity_steady_state(p: &PhysicalParams, space: &ModelSpace) -> Result<CavitySteadyState> {
    let action = build_liouvillian(p, space)?;
    let outcome = steady_state_inverse(&action, &space.ground_vacuum(), InverseOptions::default())?;
    let marginal = atomic_marginal(&outcome.state, space)?;
    let flux_op = output_flux_operator(p, space);
    let flux = crate::metrics::output_flux(&outcome.state, &flux_op)?;
    Ok(CavitySteadyState {
        space: *space,
        fidelity: fef_fidelity(&marginal)?,
        top_population: top_fock_population(&outcome.state, space)?,
        flux,
        marginal,
        residual: outcome.residual,
        state: outcome.state,
    })
}

pub const DEFAULT_FOCK_CUTOFF: usize = 2;
pub const MAX_FOCK_CUTOFF: usize = 4;

/// Result of raising the Fock cutoff until the truncation stops mattering.
#[derive(Clone, Debug)]
pub struct EscalatedSteadyState {
    pub accepted: CavitySteadyState,
    /// Fidelity change from the previous cutoff, if one was solved.
    pub fidelity_change: Option<f64>,
    /// Top-Fock population and fidelity change both at most `1e-6`.
    pub converged: bool,
}

/// Solves at cutoffs `start, start+1, ...` up to `max_cutoff`, stopping once
/// the top Fock population is at most `1e-6` and the fidelity moved by at
/// most `1e-6` from the previous cutoff.
pub fn escalating_steady_state(
    p: &PhysicalParams,
    atom_levels: usize,
    start: usize,
    max_cutoff: usize,
) -> Result<EscalatedSteadyState> {
    let mut previous: Option<CavitySteadyState> = None;
    let mut cutoff = start;
    loop {
        let current = cavity_steady_state(p, &ModelSpace::new(atom_levels, cutoff)?)?;
        let change = previous.as_ref().map(|prev| (current.fidelity - prev.fidelity).abs());
        let converged = current.top_population <= 1e-6 && change.is_some_and(|c| c <= 1e-6);
        if converged || cutoff >= max_cutoff {
            return Ok(EscalatedSteadyState {
                accepted: current,
                fidelity_change: change,
                converged,
            });
        }
        previous = Some(current);
        cutoff += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, steady_state, steady_state_longtime, LongtimeOptions};
    use crate::metrics::output_flux;
    use crate::operator::ONE;
    use crate::reduced::{analytic_steady_state, MatchedDrive};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .hermitian_part()
    }

    #[test]
    fn derived_reference_values() {
        let p = PhysicalParams::symmetric(mhz(110.0), mhz(14.2), mhz(5.2), mhz(8000.0), 0.0, mhz(100.0), 1.0);
        let d = derive_params(&p).unwrap();
        assert!((d.beta_s[0].re / TWO_PI - 0.6875).abs() < 1e-12);
        assert!((d.eta_r / TWO_PI - 1.5125).abs() < 1e-12);
        assert!((d.cooperativity - 110.0f64.powi(2) / (14.2 * 5.2)).abs() < 1e-9);
        assert!((d.cooperativity - 163.86).abs() < 0.01);
        assert_eq!(d.beta_r[0], ZERO);
        assert_eq!(d.alpha_r[0], 0.0);
    }

    #[test]
    fn doubling_rabi_scales_rate_and_shift() {
        let base = PhysicalParams::symmetric(1.0, 1.0, 1.0, 500.0, 3.0, 2.0, 1.0);
        let mut twice = base;
        twice.omega_r = base.omega_r.map(|o| o * 2.0);
        let (d1, d2) = (derive_params(&base).unwrap(), derive_params(&twice).unwrap());
        assert!((d2.beta_r[0] - d1.beta_r[0] * 2.0).norm() < 1e-15);
        assert!((d2.alpha_r[0] - 4.0 * d1.alpha_r[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_detuning_is_reported() {
        let mut p = PhysicalParams::symmetric(1.0, 1.0, 1.0, 500.0, 3.0, 2.0, 1.0);
        p.delta_s = 0.0;
        assert!(matches!(derive_params(&p), Err(Error::ZeroDetuning("s"))));
        p.delta_s = 500.0;
        p.delta_t = 0.0;
        assert!(matches!(stark_balance(&p, StarkMode::RamanResonant), Err(Error::ZeroDetuning("t"))));
    }

    #[test]
    fn raman_resonant_balance() {
        let p = PhysicalParams::symmetric(mhz(110.0), 1.0, 1.0, mhz(8000.0), mhz(200.0), mhz(100.0), 1.0);
        let b = stark_balance(&p, StarkMode::RamanResonant).unwrap();
        let d = derive_params(&b).unwrap();
        assert!((d.alpha_t[0] / TWO_PI - 0.9375).abs() < 1e-12);
        assert!((b.omega_t[0].re / TWO_PI - 173.205).abs() < 1e-3);
        assert_eq!(b.omega_cav, p.omega_cav);
        for r in shift_residual(&b).unwrap() {
            assert!(r.abs() <= 1e-12 * d.alpha_r[0]);
        }
        let even = PhysicalParams::symmetric(1.0, 1.0, 1.0, 500.0, 3.0, 3.0, 1.0);
        assert_eq!(stark_balance(&even, StarkMode::RamanResonant).unwrap().omega_t, [ZERO; 2]);
    }

    #[test]
    fn wrong_sign_detuning_is_infeasible() {
        let mut p = PhysicalParams::symmetric(1.0, 1.0, 1.0, 500.0, 3.0, 2.0, 1.0);
        p.delta_t = -500.0;
        assert!(matches!(stark_balance(&p, StarkMode::RamanResonant), Err(Error::Infeasible(_))));
    }

    #[test]
    fn compensation_resets_cavity_and_absorbs_frequency_offsets() {
        let mut p = PhysicalParams::symmetric(mhz(110.0), 1.0, 1.0, mhz(8000.0), mhz(200.0), mhz(100.0), 1.0);
        p.omega_ls = 3.0;
        p.omega_lr = 1.0;
        p.omega_1 = 0.5;
        let b = stark_balance(&p, StarkMode::Compensated).unwrap();
        let d = derive_params(&b).unwrap();
        assert!((b.omega_cav - (2.0 - d.eta_r)).abs() < 1e-12);
        let target = (3.0 - 1.0) / 2.0 - 0.5;
        assert!((d.alpha_r[0] - d.alpha_s[0] - d.alpha_t[0] - target).abs() < 1e-12);
        assert!((RotatingFrame::of(&b).unwrap().delta_c + d.eta_r).abs() < 1e-12);
        p.g_s *= 1.01;
        assert!(stark_balance(&p, StarkMode::Compensated).is_err());
    }

    #[test]
    fn unbalanced_shifts_are_rejected() {
        let p = PhysicalParams::symmetric(mhz(110.0), mhz(14.2), 0.0, mhz(8000.0), mhz(200.0), mhz(100.0), 1.0);
        assert!(matches!(
            build_effective_liouvillian(&p, &ModelSpace::effective(1).unwrap()),
            Err(Error::UnbalancedShifts { .. })
        ));
    }

    #[test]
    fn rejects_bad_spaces_and_frames() {
        assert!(ModelSpace::new(5, 0).is_err());
        assert!(ModelSpace::new(3, 2).is_err());
        let mut p = PhysicalParams::reference(2.0, 1.0).unwrap();
        assert!(build_full_liouvillian(&p, &ModelSpace::effective(1).unwrap()).is_err());
        p.omega_ls = f64::NAN;
        assert!(matches!(
            build_full_liouvillian(&p, &ModelSpace::full(1).unwrap()),
            Err(Error::FrameInconsistency(_))
        ));
    }

    #[test]
    fn generators_preserve_trace_and_hermiticity() {
        let p = PhysicalParams::reference(2.0, 0.98).unwrap();
        for space in [ModelSpace::effective(2).unwrap(), ModelSpace::full(1).unwrap()] {
            let action = build_liouvillian(&p, &space).unwrap();
            let rho = random_hermitian(space.dim(), 5);
            let out = action.apply(&rho).unwrap();
            let scale = action.rate_scale() * rho.frobenius_norm() * (space.dim() as f64).sqrt();
            assert!(out.trace().norm() <= 1e-12 * scale);
            assert!(out.hermiticity_defect() <= 1e-12 * scale);
        }
    }

    #[test]
    fn undriven_models_are_stationary() {
        let mut p = PhysicalParams::symmetric(mhz(110.0), mhz(14.2), mhz(5.2), mhz(8000.0), 0.0, 0.0, 0.9);
        let space = ModelSpace::effective(2).unwrap();
        let atoms = random_hermitian(4, 7);
        let atoms = atoms.matmul(&atoms);
        let atoms = atoms.scale(atoms.trace().inv());
        let mut vacuum = ComplexMatrix::zeros(9, 9);
        vacuum[(0, 0)] = ONE;
        let rho = atoms.kron(&vacuum);
        let out = build_effective_liouvillian(&p, &space).unwrap().apply(&rho).unwrap();
        assert!(out.max_abs() < 1e-12);
        p.g_r = 0.0;
        p.g_s = 0.0;
        let full = ModelSpace::full(1).unwrap();
        let out = build_full_liouvillian(&p, &full).unwrap().apply(&full.ground_vacuum()).unwrap();
        assert!(out.max_abs() < 1e-12);
    }

    #[test]
    fn marginals_and_fock_population() {
        let space = ModelSpace::full(2).unwrap();
        let rho = space.ground_vacuum();
        let m = atomic_marginal(&rho, &space).unwrap();
        assert_eq!(m, ComplexMatrix::unit(4, 3, 3));
        assert_eq!(top_fock_population(&rho, &space).unwrap(), 0.0);
        assert!(atomic_marginal(&ComplexMatrix::identity(3), &space).is_err());
    }

    #[test]
    fn flux_of_vacuum_and_uncoupled_cavities() {
        let mut p = PhysicalParams::reference(2.0, 0.0).unwrap();
        let space = ModelSpace::effective(2).unwrap();
        let op = output_flux_operator(&p, &space);
        assert_eq!(output_flux(&space.ground_vacuum(), &op).unwrap(), 0.0);
        p.kappa2 = 3.0;
        let op = output_flux_operator(&p, &space);
        let s = space.tensor_space();
        let n2 = s.embed_at(&destroy(2).dagger().matmul(&destroy(2)), 3).unwrap();
        assert!((&op - &n2.scale_real(6.0)).max_abs() < 1e-14);
    }

    #[test]
    fn nullspace_agrees_with_longtime_on_the_smallest_effective_model() {
        let p = PhysicalParams::reference(2.0, 0.98).unwrap().with_kappa(mhz(40.0));
        let space = ModelSpace::effective(1).unwrap();
        let action = build_effective_liouvillian(&p, &space).unwrap();
        let null = steady_state(&action, &space.ground_vacuum()).unwrap();
        let long = steady_state_longtime(&action, &space.ground_vacuum(), LongtimeOptions::default()).unwrap();
        assert!((&null.state - &long.state).frobenius_norm() < 1e-6);
        let inverse = steady_state_inverse(&action, &space.ground_vacuum(), InverseOptions::default()).unwrap();
        assert!((&null.state - &inverse.state).frobenius_norm() < 1e-8);
    }

    #[test]
    fn bad_cavity_limit_matches_reduced_model() {
        let p = PhysicalParams::reference(2.0, 0.98).unwrap();
        let reduced = derive_params(&p).unwrap().reduced(&p).unwrap();
        let b = reduced.beta_s1 / p.kappa1.sqrt();
        let m = MatchedDrive::new(reduced.beta_r1 / p.kappa1.sqrt(), b, p.epsilon).unwrap();
        let target = fef_fidelity(&analytic_steady_state(&m).unwrap()).unwrap();
        let eff = cavity_steady_state(&p, &ModelSpace::effective(3).unwrap()).unwrap();
        assert!((eff.fidelity - target).abs() < 0.01, "{} vs {target}", eff.fidelity);
    }

    #[test]
    fn dark_state_suppresses_cavity_output() {
        let p = PhysicalParams::reference(2.0, 1.0).unwrap();
        let space = ModelSpace::effective(3).unwrap();
        let ss = cavity_steady_state(&p, &space).unwrap();
        let s = space.tensor_space();
        let n2 = s.embed_at(&destroy(3).dagger().matmul(&destroy(3)), 3).unwrap();
        let bare = 2.0 * p.kappa2 * output_flux(&ss.state, &n2).unwrap();
        assert!(ss.flux < 0.05 * bare, "flux {} vs uncancelled {bare}", ss.flux);
    }

    #[test]
    fn compensation_matters_when_the_cavity_shift_is_large() {
        // eta = g^2 / Delta comparable to kappa.
        let raw = PhysicalParams::symmetric(mhz(110.0), mhz(3.0), 0.0, mhz(2000.0), mhz(60.0), mhz(20.0), 1.0);
        let on = stark_balance(&raw, StarkMode::Compensated).unwrap();
        let off = stark_balance(&raw, StarkMode::RamanResonant).unwrap();
        let space = ModelSpace::effective(3).unwrap();
        let f_on = cavity_steady_state(&on, &space).unwrap().fidelity;
        let f_off = cavity_steady_state(&off, &space).unwrap().fidelity;
        assert!(f_off < f_on - 1e-3, "off {f_off} on {f_on}");
    }

    #[test]
    fn escalation_raises_cutoff_until_converged() {
        let p = PhysicalParams::reference(3.0, 0.98).unwrap();
        let e = escalating_steady_state(&p, 2, DEFAULT_FOCK_CUTOFF, MAX_FOCK_CUTOFF).unwrap();
        assert!(e.accepted.space.fock_cutoff > DEFAULT_FOCK_CUTOFF);
        assert!(e.converged, "{:?} {}", e.fidelity_change, e.accepted.top_population);
    }

    #[test]
    fn effective_trajectory_starts_from_ground_vacuum() {
        let p = PhysicalParams::reference(2.0, 1.0).unwrap();
        let space = ModelSpace::effective(2).unwrap();
        let action = build_effective_liouvillian(&p, &space).unwrap();
        let traj = integrate(&action, &space.ground_vacuum(), &[0.0, 0.5, 1.0], Default::default()).unwrap();
        traj.validate().unwrap();
        let f0 = fef_fidelity(&atomic_marginal(&traj.states[0], &space).unwrap()).unwrap();
        assert!((f0 - 0.5).abs() < 1e-12);
    }
}
