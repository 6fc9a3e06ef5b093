//! Ideal measurement of a discrete system observable by a discrete observer.
//!
//! The observer starts in its ready state `|β_0⟩`. For system eigenstate
//! `|α_i⟩` the interaction rotates the observer from `|β_0⟩` to `|β_i⟩`
//! through a quarter turn in the plane `span{|β_0⟩, |β_i⟩}`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::branch::{Branch, BranchDecomposition, BranchWeightReport, Provenance, WeightEntry};
use crate::error::{Error, Result};
use crate::hilbert::{
    embed, heisenberg_evolve, kron, sum_ops, CVector, HilbertSpace, Ket, LinOp, ProductSpace, C64, I,
};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct IdealModelSpec {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    tau: f64,
    psi: Vec<C64>,
}

impl IdealModelSpec {
    /// `alphas` has `M` entries, `betas` has `M + 1` (index 0 is the ready
    /// state), `psi` holds the `M` system amplitudes.
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, tau: f64, psi: Vec<C64>) -> Result<Self> {
        let spec = Self::unnormalized(alphas, betas, tau, psi)?;
        let total: f64 = spec.psi.iter().map(|a| a.norm_sqr()).sum();
        if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
            return Err(Error::Normalization {
                constraint: "psi_norm",
                field: "psi",
                total,
            });
        }
        Ok(spec)
    }

    /// Default labels: `α_i = i`, `β_i = i`, `τ = 1`.
    pub fn with_defaults(psi: Vec<C64>) -> Result<Self> {
        let m = psi.len();
        Self::new(default_alphas(m), default_betas(m), 1.0, psi)
    }

    /// Outcome labels and coupling time with uniform placeholder amplitudes,
    /// for models whose amplitudes are given on a grid instead.
    pub fn labels(alphas: Vec<f64>, betas: Vec<f64>, tau: f64) -> Result<Self> {
        let m = alphas.len().max(1);
        let amp = C64::new(1.0 / (m as f64).sqrt(), 0.0);
        Self::unnormalized(alphas, betas, tau, vec![amp; m])
    }

    /// Same labels with different amplitudes; the caller guarantees the norm.
    pub(crate) fn with_psi(&self, psi: Vec<C64>) -> Self {
        debug_assert_eq!(psi.len(), self.outcomes());
        Self { psi, ..self.clone() }
    }

    /// Validates everything except the amplitude norm. Models whose
    /// amplitudes live elsewhere (on a grid) carry an ideal spec with
    /// placeholder amplitudes.
    pub(crate) fn unnormalized(alphas: Vec<f64>, betas: Vec<f64>, tau: f64, psi: Vec<C64>) -> Result<Self> {
        let m = alphas.len();
        if m == 0 {
            return Err(Error::InvalidParameter {
                field: "alphas",
                reason: "need at least one outcome".into(),
            });
        }
        if betas.len() != m + 1 {
            return Err(Error::InvalidParameter {
                field: "betas",
                reason: format!(
                    "expected {} entries (ready state plus {m} outcomes), found {}",
                    m + 1,
                    betas.len()
                ),
            });
        }
        if psi.len() != m {
            return Err(Error::InvalidParameter {
                field: "psi",
                reason: format!("expected {m} amplitudes, found {}", psi.len()),
            });
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter {
                field: "tau",
                reason: format!("coupling time must be positive, got {tau}"),
            });
        }
        check_distinct("alphas", &alphas)?;
        check_distinct("betas", &betas)?;
        Ok(Self {
            alphas,
            betas,
            tau,
            psi,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn psi(&self) -> &[C64] {
        &self.psi
    }

    /// Coupling strength giving a quarter turn in time `τ`.
    pub fn kappa(&self) -> f64 {
        FRAC_PI_2 / self.tau
    }

    pub fn spaces(&self) -> IdealSpaces {
        IdealSpaces::new(self.outcomes(), "O")
    }
}

pub fn default_alphas(m: usize) -> Vec<f64> {
    (1..=m).map(|i| i as f64).collect()
}

pub fn default_betas(m: usize) -> Vec<f64> {
    (0..=m).map(|i| i as f64).collect()
}

fn check_distinct(field: &'static str, values: &[f64]) -> Result<()> {
    for (i, a) in values.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::InvalidParameter {
                field,
                reason: format!("entry {i} is not finite"),
            });
        }
        for (j, b) in values.iter().enumerate().skip(i + 1) {
            if (a - b).abs() <= Tolerances::DEFAULT.degeneracy {
                return Err(Error::Nondegeneracy(format!(
                    "{field}[{i}] = {a} and {field}[{j}] = {b} coincide"
                )));
            }
        }
    }
    Ok(())
}

/// Observer and system factor spaces for an `M`-outcome measurement.
#[derive(Debug, Clone)]
pub struct IdealSpaces {
    pub observer: Arc<HilbertSpace>,
    pub system: Arc<HilbertSpace>,
    pub joint: ProductSpace,
}

impl IdealSpaces {
    pub fn new(m: usize, observer_name: &str) -> Self {
        let observer = observer_space(observer_name, m);
        let system = system_space(m);
        let joint = ProductSpace::new(vec![observer.clone(), system.clone()]).expect("distinct factor names");
        Self {
            observer,
            system,
            joint,
        }
    }
}

/// Observer space with basis `|β_0⟩ .. |β_M⟩`.
pub fn observer_space(name: &str, m: usize) -> Arc<HilbertSpace> {
    HilbertSpace::indexed(name, "beta", m + 1).expect("non-empty basis")
}

/// System space with basis `|α_1⟩ .. |α_M⟩`.
pub fn system_space(m: usize) -> Arc<HilbertSpace> {
    HilbertSpace::new("S", (1..=m).map(|i| format!("alpha_{i}")).collect()).expect("non-empty basis")
}

/// `iκ(|β_i⟩⟨β_0| − |β_0⟩⟨β_i|)`.
pub fn observer_generator(observer: &Arc<HilbertSpace>, i: usize, kappa: f64) -> LinOp {
    let up = LinOp::outer(&Ket::basis(observer.clone(), i), &Ket::basis(observer.clone(), 0)).expect("same space");
    let skew = &up - &up.adjoint();
    skew.scale(I * kappa)
}

/// `exp(θ(|β_i⟩⟨β_0| − |β_0⟩⟨β_i|))` in closed form; `θ = κτ`.
pub fn observer_rotation(observer: &Arc<HilbertSpace>, i: usize, angle: f64) -> LinOp {
    let n = observer.dim();
    let mut mat = crate::hilbert::CMatrix::identity(n, n);
    let (s, c) = angle.sin_cos();
    mat[(0, 0)] = C64::new(c, 0.0);
    mat[(i, i)] = C64::new(c, 0.0);
    mat[(i, 0)] = C64::new(s, 0.0);
    mat[(0, i)] = C64::new(-s, 0.0);
    LinOp::new(observer.clone(), mat).expect("square")
}

/// `b̂ = Σ β_i |β_i⟩⟨β_i|`.
pub fn observer_readout(observer: &Arc<HilbertSpace>, betas: &[f64]) -> LinOp {
    LinOp::diagonal(observer.clone(), betas).expect("one eigenvalue per basis vector")
}

/// `â = Σ α_i |α_i⟩⟨α_i|`.
pub fn system_observable(system: &Arc<HilbertSpace>, alphas: &[f64]) -> LinOp {
    LinOp::diagonal(system.clone(), alphas).expect("one eigenvalue per basis vector")
}

/// `|α_i⟩⟨α_i|` for `i = 1..M`.
pub fn system_projector(system: &Arc<HilbertSpace>, i: usize) -> LinOp {
    LinOp::projector_onto(&Ket::basis(system.clone(), i - 1))
}

/// `|β_i⟩⟨β_i|` for `i = 0..M`.
pub fn observer_projector(observer: &Arc<HilbertSpace>, i: usize) -> LinOp {
    LinOp::projector_onto(&Ket::basis(observer.clone(), i))
}

/// `Ĥ_I = Σ_i ĥ_i ⊗ P_i` on observer ⊗ system.
pub fn build_ideal_hamiltonian(spec: &IdealModelSpec) -> LinOp {
    let sp = spec.spaces();
    let kappa = spec.kappa();
    let terms: Vec<LinOp> = (1..=spec.outcomes())
        .map(|i| {
            kron(
                &observer_generator(&sp.observer, i, kappa),
                &system_projector(&sp.system, i),
            )
        })
        .collect();
    sum_ops(&sp.joint, &terms)
}

/// `Û_I = Σ_i û_i ⊗ P_i` with each `û_i` a closed-form rotation.
pub fn build_ideal_unitary(spec: &IdealModelSpec) -> LinOp {
    let sp = spec.spaces();
    let angle = spec.kappa() * spec.tau();
    let terms: Vec<LinOp> = (1..=spec.outcomes())
        .map(|i| {
            kron(
                &observer_rotation(&sp.observer, i, angle),
                &system_projector(&sp.system, i),
            )
        })
        .collect();
    sum_ops(&sp.joint, &terms)
}

/// `|β_0⟩ ⊗ Σ ψ_i |α_i⟩`.
pub fn ideal_initial_state(spec: &IdealModelSpec) -> Ket {
    let sp = spec.spaces();
    let system = Ket::new(sp.system.clone(), CVector::from_column_slice(spec.psi())).expect("M amplitudes");
    Ket::basis(sp.observer, 0).tensor(&system)
}

/// Branch weights `W_i = ⟨ψ|P_i|ψ⟩ = |ψ_i|²`, `i = 1..M`.
pub fn ideal_branch_weights(spec: &IdealModelSpec) -> BranchWeightReport {
    let entries = spec
        .psi()
        .iter()
        .enumerate()
        .map(|(k, amp)| WeightEntry {
            index: k + 1,
            beta: spec.betas()[k + 1],
            weight: amp.norm_sqr(),
        })
        .collect();
    BranchWeightReport::new(entries, Provenance::Formula)
}

/// The evolved readout `b̂(t) = Û_I† (b̂ ⊗ 1) Û_I` together with its
/// decomposition into `M` branches `b̂_i ⊗ P_i`, `b̂_i = û_i† b̂ û_i`.
pub fn ideal_b_of_t(spec: &IdealModelSpec) -> Result<(LinOp, BranchDecomposition)> {
    let sp = spec.spaces();
    let b = observer_readout(&sp.observer, spec.betas());
    let u = build_ideal_unitary(spec);
    let evolved = heisenberg_evolve(&embed(&b, &sp.joint)?, &u)?;
    let angle = spec.kappa() * spec.tau();
    let branches = (1..=spec.outcomes())
        .map(|i| {
            let ui = observer_rotation(&sp.observer, i, angle);
            Branch {
                index: i,
                beta: spec.betas()[i],
                b_op: &(&ui.adjoint() * &b) * &ui,
                label: system_projector(&sp.system, i),
            }
        })
        .collect();
    Ok((evolved, BranchDecomposition { branches }))
}

/// Convenience used by tests and the CLI: `ψ` scaled to unit norm.
pub fn normalize(psi: &[C64]) -> Vec<C64> {
    let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    psi.iter().map(|a| a / norm).collect()
}
