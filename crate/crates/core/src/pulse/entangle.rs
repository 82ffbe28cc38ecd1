//! Two-P1 entangling sequence, Pauli tomography and the fidelity witness.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::levels::{evolve_free, Levels};
use super::rotation::{apply_rotation, RotationTarget, PHASE_X};
use super::state::{QuantumState, StateSpace};
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};
use crate::spin::operators::C64;

const PAULI: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// 2×2 Pauli matrix in the (|↑⟩, |↓⟩) basis.
pub fn pauli(p: char) -> Result<DMatrix<C64>> {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    Ok(match p {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => return Err(Error::UnknownLabel(format!("Pauli {p:?}"))),
    })
}

/// P ⊗ Q with P on the first spin.
pub fn pauli_pair(p: char, q: char) -> Result<DMatrix<C64>> {
    Ok(pauli(p)?.kronecker(&pauli(q)?))
}

/// |↑↓⟩.
pub fn initial_state() -> QuantumState {
    QuantumState::basis_state(StateSpace::TwoQubit, 1).expect("valid basis state")
}

/// (|↑−⟩ + |↓+⟩)/√2 with |±⟩ = (|↑⟩ ± |↓⟩)/√2.
pub fn target_state() -> DVector<C64> {
    let h = C64::new(0.5, 0.0);
    DVector::from_vec(vec![h, -h, h, h])
}

/// Intermediate states U₁|ψ⟩, U_zz U₁|ψ⟩, U₂ U_zz U₁|ψ⟩ and the final state.
pub fn entanglement_stages(j: f64, t: f64) -> Result<[QuantumState; 4]> {
    let lv = Levels::two_qubit_zz(j)?;
    let pulse = |s: &QuantumState, angle: f64| -> Result<QuantumState> {
        let s = apply_rotation(s, RotationTarget::Qubit(1), angle, PHASE_X)?;
        apply_rotation(&s, RotationTarget::Qubit(2), angle, PHASE_X)
    };
    let s1 = pulse(&initial_state(), PI / 2.0)?;
    let s2 = evolve_free(&s1, &lv, t)?;
    let s3 = pulse(&s2, PI)?;
    let s4 = evolve_free(&s3, &lv, t)?;
    Ok([s1, s2, s3, s4])
}

/// U_zz(t) U₂ U_zz(t) U₁ |↑↓⟩ with U_zz = exp(−i J S_z S_z t), J in rad/s.
pub fn entanglement_sequence(j: f64, t: f64) -> Result<QuantumState> {
    let [_, _, _, f] = entanglement_stages(j, t)?;
    Ok(f)
}

/// ρ → (1 − p)ρ + p Z_q ρ Z_q on qubit q ∈ {1, 2}.
pub fn dephase(state: &QuantumState, qubit: u8, p: f64) -> Result<QuantumState> {
    if state.space() != StateSpace::TwoQubit {
        return Err(Error::DimensionMismatch { expected: 4, found: state.dim() });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("dephasing probability {p} outside [0, 1]")));
    }
    let z = match qubit {
        1 => pauli_pair('Z', 'I')?,
        2 => pauli_pair('I', 'Z')?,
        _ => return Err(Error::UnknownLabel(format!("qubit {qubit}"))),
    };
    let rho = state.matrix() * C64::new(1.0 - p, 0.0) + &z * state.matrix() * &z * C64::new(p, 0.0);
    QuantumState::new(StateSpace::TwoQubit, rho)
}

/// Phase-flip probability equivalent to a coherence decay e^{−(t/T)ⁿ}.
pub fn dephasing_probability(t2: f64, n: f64, t: f64) -> f64 {
    (1.0 - (-(t / t2).powf(n)).exp()) / 2.0
}

/// 15 Pauli expectations and the linear-inversion density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitTomogram {
    pub expectations: BTreeMap<String, f64>,
    pub rho: DMatrix<C64>,
}

impl TwoQubitTomogram {
    pub fn from_expectations(expectations: BTreeMap<String, f64>) -> Result<Self> {
        let mut rho = DMatrix::<C64>::identity(4, 4);
        for p in PAULI {
            for q in PAULI {
                if p == 'I' && q == 'I' {
                    continue;
                }
                let key = format!("{p}{q}");
                let v = *expectations.get(&key).ok_or_else(|| Error::UnknownLabel(format!("missing ⟨{key}⟩")))?;
                if v.abs() > 1.0 + 1e-12 {
                    return Err(Error::InvalidInput(format!("⟨{key}⟩ = {v} outside [−1, 1]")));
                }
                rho += pauli_pair(p, q)? * C64::new(v, 0.0);
            }
        }
        Ok(Self { expectations, rho: rho * C64::new(0.25, 0.0) })
    }

    pub fn get(&self, key: &str) -> f64 {
        self.expectations.get(key).copied().unwrap_or(0.0)
    }

    /// `PQ = value` lines in key order.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.expectations {
            let _ = writeln!(s, "{k} = {v:.12e}");
        }
        s
    }

    /// Four rows, each `re00 im00 re01 im01 ...` (row-major, real/imag pairs).
    pub fn matrix_dump(&self) -> String {
        let mut s = String::new();
        for r in 0..4 {
            let row: Vec<String> =
                (0..4).flat_map(|c| [format!("{:.12e}", self.rho[(r, c)].re), format!("{:.12e}", self.rho[(r, c)].im)]).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }
}

/// Exact expectations of all 15 non-identity Pauli pairs.
pub fn tomography(state: &QuantumState) -> Result<TwoQubitTomogram> {
    if state.space() != StateSpace::TwoQubit {
        return Err(Error::DimensionMismatch { expected: 4, found: state.dim() });
    }
    let mut ex = BTreeMap::new();
    for p in PAULI {
        for q in PAULI {
            if p == 'I' && q == 'I' {
                continue;
            }
            ex.insert(format!("{p}{q}"), state.expectation(&pauli_pair(p, q)?)?);
        }
    }
    TwoQubitTomogram::from_expectations(ex)
}

/// Nine-setting Pauli tomography with `shots` joint single-shot outcomes per
/// setting. Single-qubit terms average over the three settings that share
/// the measured basis.
pub fn tomography_sampled<R: Rng + ?Sized>(state: &QuantumState, shots: u64, rng: &mut R) -> Result<TwoQubitTomogram> {
    if shots == 0 {
        return Err(Error::InvalidInput("shot count must be positive".into()));
    }
    if state.space() != StateSpace::TwoQubit {
        return Err(Error::DimensionMismatch { expected: 4, found: state.dim() });
    }
    let mut sums: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for p in ['X', 'Y', 'Z'] {
        for q in ['X', 'Y', 'Z'] {
            // outcome probabilities via projectors (1 ± P)/2 ⊗ (1 ± Q)/2
            let mut probs = [0.0; 4];
            for (k, (sp, sq)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].into_iter().enumerate() {
                let pa = (pauli('I')? + pauli(p)? * C64::new(sp, 0.0)) * C64::new(0.5, 0.0);
                let pb = (pauli('I')? + pauli(q)? * C64::new(sq, 0.0)) * C64::new(0.5, 0.0);
                probs[k] = state.expectation(&pa.kronecker(&pb))?.max(0.0);
            }
            let counts = multinomial(shots, &probs, rng)?;
            let n = shots as f64;
            let c = |k: usize| counts[k] as f64 / n;
            let pq = c(0) - c(1) - c(2) + c(3);
            let pi = c(0) + c(1) - c(2) - c(3);
            let iq = c(0) - c(1) + c(2) - c(3);
            for (key, v) in [(format!("{p}{q}"), pq), (format!("{p}I"), pi), (format!("I{q}"), iq)] {
                let e = sums.entry(key).or_insert((0.0, 0.0));
                e.0 += v;
                e.1 += 1.0;
            }
        }
    }
    let ex = sums.into_iter().map(|(k, (s, n))| (k, s / n)).collect();
    TwoQubitTomogram::from_expectations(ex)
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64; 4], rng: &mut R) -> Result<[u64; 4]> {
    let total: f64 = probs.iter().sum();
    let mut left = n;
    let mut mass = total;
    let mut out = [0u64; 4];
    for k in 0..3 {
        let p = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let b = Binomial::new(left, p).map_err(|e| Error::InvalidInput(e.to_string()))?;
        out[k] = b.sample(rng);
        left -= out[k];
        mass -= probs[k];
    }
    out[3] = left;
    Ok(out)
}

/// F = (1 + ⟨XZ⟩ − ⟨ZX⟩ − ⟨YY⟩)/4; F > 1/2 witnesses entanglement.
pub fn fidelity_witness(tomo: &TwoQubitTomogram) -> f64 {
    (1.0 + tomo.get("XZ") - tomo.get("ZX") - tomo.get("YY")) / 4.0
}

/// ⟨X⊗Z⟩ after the sequence, as a function of the total interaction time
/// x = 2t. Ideal value −sin(J·x/2).
pub fn xz_expectation(j: f64, two_t: f64) -> Result<f64> {
    let s = entanglement_sequence(j, two_t / 2.0)?;
    s.expectation(&pauli_pair('X', 'Z')?)
}

/// ⟨XZ⟩ over a grid of 2t values, optionally with binomial shot noise.
pub fn xz_trace<R: Rng + ?Sized>(j: f64, two_t: &[f64], shots: Option<(u64, &mut R)>) -> Result<Vec<f64>> {
    let exact = two_t.iter().map(|&x| xz_expectation(j, x)).collect::<Result<Vec<_>>>()?;
    match shots {
        None => Ok(exact),
        Some((n, rng)) => {
            if n == 0 {
                return Err(Error::InvalidInput("shot count must be positive".into()));
            }
            exact
                .into_iter()
                .map(|e| {
                    let p = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
                    let k = Binomial::new(n, p).map_err(|er| Error::InvalidInput(er.to_string()))?.sample(rng);
                    Ok(2.0 * k as f64 / n as f64 - 1.0)
                })
                .collect()
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingFit {
    /// rad/s; sign fixed by a positive amplitude in a − A·sin(J·x/2).
    pub j: f64,
    pub j_std_error: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Least-squares fit of a − A·sin(J·x/2) to an ⟨XZ⟩(2t) trace.
pub fn fit_xz_coupling(two_t: &[f64], xz: &[f64], j_guess: f64) -> Result<CouplingFit> {
    if two_t.len() != xz.len() {
        return Err(Error::DimensionMismatch { expected: two_t.len(), found: xz.len() });
    }
    if two_t.len() < 5 {
        return Err(Error::Underdetermined { needed: 5, got: two_t.len() });
    }
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(two_t.iter().zip(xz).map(|(&x, &y)| p[0] - p[1] * (p[2] * x / 2.0).sin() - y).collect())
    };
    let r = levenberg_marquardt(resid, &[0.0, 1.0, j_guess], &LmOptions::default())?;
    let se = r.std_errors();
    let (mut a, mut j) = (r.params[1], r.params[2]);
    if a < 0.0 {
        a = -a;
        j = -j;
    }
    Ok(CouplingFit { j, j_std_error: se[2], amplitude: a, offset: r.params[0] })
}
