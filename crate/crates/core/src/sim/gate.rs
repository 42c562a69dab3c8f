use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Gate kinds supported by the simulator. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateKind {
    U3 { theta: f64, phi: f64, lambda: f64 },
    Rx { theta: f64 },
    Ry { theta: f64 },
    Rz { theta: f64 },
    H,
    P { theta: f64 },
    Cnot,
    Cz,
}

impl GateKind {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, GateKind::Cnot | GateKind::Cz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
}

/// Matrix of a gate. Two-qubit matrices act on the basis `|control, target>`
/// with basis index `2 * control_bit + target_bit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateMatrix {
    One([[Complex64; 2]; 2]),
    Two([[Complex64; 4]; 4]),
}

impl Gate {
    pub fn single(kind: GateKind, target: usize) -> Self {
        Gate {
            kind,
            target,
            control: None,
        }
    }

    pub fn u3(target: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Self::single(GateKind::U3 { theta, phi, lambda }, target)
    }

    pub fn rx(target: usize, theta: f64) -> Self {
        Self::single(GateKind::Rx { theta }, target)
    }

    pub fn ry(target: usize, theta: f64) -> Self {
        Self::single(GateKind::Ry { theta }, target)
    }

    pub fn rz(target: usize, theta: f64) -> Self {
        Self::single(GateKind::Rz { theta }, target)
    }

    pub fn h(target: usize) -> Self {
        Self::single(GateKind::H, target)
    }

    pub fn p(target: usize, theta: f64) -> Self {
        Self::single(GateKind::P { theta }, target)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
        }
    }

    pub fn cz(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::Cz,
            target,
            control: Some(control),
        }
    }

    /// Qubits touched by the gate, control first.
    pub fn qubits(&self) -> Vec<usize> {
        match self.control {
            Some(c) => vec![c, self.target],
            None => vec![self.target],
        }
    }

    /// Checks the gate against a register of `width` qubits.
    pub fn validate(&self, width: usize) -> Result<()> {
        if self.target >= width {
            return Err(Error::QubitOutOfRange {
                index: self.target,
                width,
            });
        }
        match (self.kind.is_two_qubit(), self.control) {
            (true, Some(c)) => {
                if c >= width {
                    return Err(Error::QubitOutOfRange { index: c, width });
                }
                if c == self.target {
                    return Err(Error::ControlEqualsTarget(c));
                }
            }
            (true, None) => {
                return Err(Error::InvalidParameter(
                    "two-qubit gate without a control qubit".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "single-qubit gate with a control qubit".into(),
                ))
            }
            (false, None) => {}
        }
        Ok(())
    }

    /// Adjoint gate. `U3(θ,φ,λ)† = U3(−θ,−λ,−φ)`; rotations and phases negate;
    /// H, CNOT and CZ are self-inverse.
    pub fn inverse(&self) -> Gate {
        let kind = match self.kind {
            GateKind::U3 { theta, phi, lambda } => GateKind::U3 {
                theta: -theta,
                phi: -lambda,
                lambda: -phi,
            },
            GateKind::Rx { theta } => GateKind::Rx { theta: -theta },
            GateKind::Ry { theta } => GateKind::Ry { theta: -theta },
            GateKind::Rz { theta } => GateKind::Rz { theta: -theta },
            GateKind::P { theta } => GateKind::P { theta: -theta },
            k @ (GateKind::H | GateKind::Cnot | GateKind::Cz) => k,
        };
        Gate { kind, ..*self }
    }

    pub fn matrix(&self) -> GateMatrix {
        gate_matrix(&self.kind)
    }
}

/// Unitary of a gate kind.
pub fn gate_matrix(kind: &GateKind) -> GateMatrix {
    let i = Complex64::i();
    match *kind {
        GateKind::U3 { theta, phi, lambda } => {
            let (s, c) = (theta / 2.0).sin_cos();
            GateMatrix::One([
                [ONE * c, -(i * lambda).exp() * s],
                [(i * phi).exp() * s, (i * (phi + lambda)).exp() * c],
            ])
        }
        GateKind::Rx { theta } => {
            let (s, c) = (theta / 2.0).sin_cos();
            GateMatrix::One([[ONE * c, -i * s], [-i * s, ONE * c]])
        }
        GateKind::Ry { theta } => {
            let (s, c) = (theta / 2.0).sin_cos();
            GateMatrix::One([[ONE * c, -ONE * s], [ONE * s, ONE * c]])
        }
        GateKind::Rz { theta } => GateMatrix::One([
            [(-i * (theta / 2.0)).exp(), ZERO],
            [ZERO, (i * (theta / 2.0)).exp()],
        ]),
        GateKind::H => {
            let r = ONE * std::f64::consts::FRAC_1_SQRT_2;
            GateMatrix::One([[r, r], [r, -r]])
        }
        GateKind::P { theta } => GateMatrix::One([[ONE, ZERO], [ZERO, (i * theta).exp()]]),
        GateKind::Cnot => GateMatrix::Two([
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ONE, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ONE],
            [ZERO, ZERO, ONE, ZERO],
        ]),
        GateKind::Cz => GateMatrix::Two([
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ONE, ZERO, ZERO],
            [ZERO, ZERO, ONE, ZERO],
            [ZERO, ZERO, ZERO, -ONE],
        ]),
    }
}

impl GateMatrix {
    pub fn dim(&self) -> usize {
        match self {
            GateMatrix::One(_) => 2,
            GateMatrix::Two(_) => 4,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        match self {
            GateMatrix::One(m) => m[r][c],
            GateMatrix::Two(m) => m[r][c],
        }
    }

    /// Max-entry deviation of `G†G` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += self.get(k, r).conj() * self.get(k, c);
                }
                let expect = if r == c { ONE } else { ZERO };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }
}
