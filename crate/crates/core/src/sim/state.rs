use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::{Gate, GateKind, GateMatrix};
use crate::error::{Error, Result};

/// Largest register simulated as a pure state.
pub const PURE_CAP: usize = 14;

/// Ordered gate list on a fixed register. Gates are applied in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter("circuit width must be >= 1".into()));
        }
        Ok(Circuit {
            width,
            gates: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends every gate of `other`, which must share this width.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.width != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: other.width,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    /// Gate-by-gate adjoint: reversed order, each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            width: self.width,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// `self` followed by the adjoint of `other`: the fidelity test circuit.
    pub fn compute_uncompute(&self, other: &Circuit) -> Result<Circuit> {
        let mut c = self.clone();
        c.append(&other.inverse())?;
        Ok(c)
    }
}

/// Pure state on `width` qubits. Qubit 0 is the least-significant bit of the
/// basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    width: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn zero(width: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << width];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        QuantumState { width, amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let state = QuantumState {
            width: len.trailing_zeros() as usize,
            amplitudes,
        };
        if (state.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter("state is not normalized".into()));
        }
        Ok(state)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.width)?;
        let t = 1usize << gate.target;
        match gate.kind {
            GateKind::Cnot => {
                let c = 1usize << gate.control.expect("validated");
                for idx in 0..self.amplitudes.len() {
                    if idx & c != 0 && idx & t == 0 {
                        self.amplitudes.swap(idx, idx | t);
                    }
                }
            }
            GateKind::Cz => {
                let c = 1usize << gate.control.expect("validated");
                for (idx, a) in self.amplitudes.iter_mut().enumerate() {
                    if idx & c != 0 && idx & t != 0 {
                        *a = -*a;
                    }
                }
            }
            _ => {
                let GateMatrix::One(m) = gate.matrix() else {
                    unreachable!("single-qubit kinds yield 2x2 matrices")
                };
                apply_single(&mut self.amplitudes, t, &m);
            }
        }
        Ok(())
    }
}

/// Applies a 2x2 matrix to the qubit whose bit is `mask` in a strided vector.
pub(crate) fn apply_single(amps: &mut [Complex64], mask: usize, m: &[[Complex64; 2]; 2]) {
    for i0 in 0..amps.len() {
        if i0 & mask != 0 {
            continue;
        }
        let i1 = i0 | mask;
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = m[0][0] * a0 + m[0][1] * a1;
        amps[i1] = m[1][0] * a0 + m[1][1] * a1;
    }
}

/// Evolves `|0…0>` through the circuit.
pub fn run_pure(circuit: &Circuit) -> Result<QuantumState> {
    if circuit.width() > PURE_CAP {
        return Err(Error::CapExceeded {
            backend: "pure-state",
            width: circuit.width(),
            cap: PURE_CAP,
        });
    }
    let mut state = QuantumState::zero(circuit.width());
    for gate in circuit.gates() {
        state.apply(gate)?;
    }
    Ok(state)
}

/// `|<a|b>|^2`.
pub fn overlap_probability(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.width != b.width {
        return Err(Error::DimensionMismatch {
            expected: a.width,
            actual: b.width,
        });
    }
    let inner: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(inner.norm_sqr().min(1.0))
}
