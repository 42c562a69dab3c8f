use nalgebra::DMatrix;
use num_complex::Complex64;

use super::gate::{Gate, GateKind, GateMatrix};
use super::state::{Circuit, QuantumState};
use crate::error::{Error, Result};
use crate::noise::{self, NoiseModel};

/// Largest register simulated as a density matrix.
pub const DENSITY_CAP: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Mixed state on `width` qubits, stored row-major as a `2^n x 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    width: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|0…0><0…0|`.
    pub fn zero(width: usize) -> Self {
        let dim = 1usize << width;
        let mut entries = vec![ZERO; dim * dim];
        entries[0] = Complex64::new(1.0, 0.0);
        DensityMatrix {
            width,
            dim,
            entries,
        }
    }

    /// `|ψ><ψ|`.
    pub fn from_pure(state: &QuantumState) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for a in amps {
            for b in amps {
                entries.push(a * b.conj());
            }
        }
        DensityMatrix {
            width: state.width(),
            dim,
            entries,
        }
    }

    pub fn from_entries(width: usize, entries: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << width;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Ok(DensityMatrix {
            width,
            dim,
            entries,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Computational-basis outcome probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        m.symmetric_eigenvalues().min()
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.width)?;
        let t = 1usize << gate.target;
        match gate.kind {
            GateKind::Cnot => {
                let c = 1usize << gate.control.expect("validated");
                self.permute(|i| if i & c != 0 { i ^ t } else { i });
            }
            GateKind::Cz => {
                let c = 1usize << gate.control.expect("validated");
                let dim = self.dim;
                for r in 0..dim {
                    let rs = r & c != 0 && r & t != 0;
                    for col in 0..dim {
                        let cs = col & c != 0 && col & t != 0;
                        if rs != cs {
                            self.entries[r * dim + col] = -self.entries[r * dim + col];
                        }
                    }
                }
            }
            _ => {
                let GateMatrix::One(m) = gate.matrix() else {
                    unreachable!("single-qubit kinds yield 2x2 matrices")
                };
                self.left(t, &m);
                self.right_adjoint(t, &m);
            }
        }
        Ok(())
    }

    /// ρ ← Σ K ρ K† for single-qubit operators on `qubit`.
    pub fn apply_kraus_1q(&mut self, ops: &[[[Complex64; 2]; 2]], qubit: usize) -> Result<()> {
        if qubit >= self.width {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                width: self.width,
            });
        }
        let mask = 1usize << qubit;
        let mut acc = vec![ZERO; self.entries.len()];
        for k in ops {
            let mut term = self.clone();
            term.left(mask, k);
            term.right_adjoint(mask, k);
            for (a, t) in acc.iter_mut().zip(&term.entries) {
                *a += t;
            }
        }
        self.entries = acc;
        Ok(())
    }

    /// ρ ← (1−p)ρ + p·(I/2^k ⊗ Tr_sub ρ) on the listed qubits.
    pub fn depolarize(&mut self, p: f64, qubits: &[usize]) -> Result<()> {
        let mut mask = 0usize;
        for &q in qubits {
            if q >= self.width {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    width: self.width,
                });
            }
            mask |= 1 << q;
        }
        if p == 0.0 {
            return Ok(());
        }
        let subsets: Vec<usize> = subsets_of(mask);
        let norm = 1.0 / subsets.len() as f64;
        let dim = self.dim;
        let old = &self.entries;
        let mut out: Vec<Complex64> = old.iter().map(|v| v * (1.0 - p)).collect();
        for rb in (0..dim).filter(|r| r & mask == 0) {
            for cb in (0..dim).filter(|c| c & mask == 0) {
                let partial: Complex64 = subsets
                    .iter()
                    .map(|&s| old[(rb | s) * dim + (cb | s)])
                    .sum();
                let mixed = partial * (p * norm);
                for &s in &subsets {
                    out[(rb | s) * dim + (cb | s)] += mixed;
                }
            }
        }
        self.entries = out;
        Ok(())
    }

    fn permute(&mut self, f: impl Fn(usize) -> usize) {
        let dim = self.dim;
        let old = std::mem::take(&mut self.entries);
        let mut out = vec![ZERO; dim * dim];
        for r in 0..dim {
            let pr = f(r);
            for c in 0..dim {
                out[pr * dim + f(c)] = old[r * dim + c];
            }
        }
        self.entries = out;
    }

    fn left(&mut self, mask: usize, m: &[[Complex64; 2]; 2]) {
        let dim = self.dim;
        for r0 in (0..dim).filter(|r| r & mask == 0) {
            let r1 = r0 | mask;
            for c in 0..dim {
                let a0 = self.entries[r0 * dim + c];
                let a1 = self.entries[r1 * dim + c];
                self.entries[r0 * dim + c] = m[0][0] * a0 + m[0][1] * a1;
                self.entries[r1 * dim + c] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn right_adjoint(&mut self, mask: usize, m: &[[Complex64; 2]; 2]) {
        let dim = self.dim;
        for r in 0..dim {
            let row = &mut self.entries[r * dim..(r + 1) * dim];
            for c0 in (0..dim).filter(|c| c & mask == 0) {
                let c1 = c0 | mask;
                let (a0, a1) = (row[c0], row[c1]);
                row[c0] = a0 * m[0][0].conj() + a1 * m[0][1].conj();
                row[c1] = a0 * m[1][0].conj() + a1 * m[1][1].conj();
            }
        }
    }
}

/// All sub-masks of `mask`, including 0.
fn subsets_of(mask: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(1 << mask.count_ones());
    let mut s = 0usize;
    loop {
        out.push(s);
        if s == mask {
            break;
        }
        s = (s.wrapping_sub(mask)) & mask;
    }
    out
}

/// Evolves `|0…0><0…0|` gate by gate, applying the noise channels of each
/// gate right after it.
pub fn run_density(circuit: &Circuit, model: &NoiseModel) -> Result<DensityMatrix> {
    if circuit.width() > DENSITY_CAP {
        return Err(Error::CapExceeded {
            backend: "density-matrix",
            width: circuit.width(),
            cap: DENSITY_CAP,
        });
    }
    let mut rho = DensityMatrix::zero(circuit.width());
    for gate in circuit.gates() {
        rho.apply_gate(gate)?;
        for channel in noise::channels_for(gate, model)? {
            noise::apply_channel(&mut rho, &channel)?;
        }
    }
    Ok(rho)
}

/// Readout confusion for one qubit: `m[true][read]`, rows summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confusion(pub [[f64; 2]; 2]);

impl Confusion {
    pub const IDEAL: Confusion = Confusion([[1.0, 0.0], [0.0, 1.0]]);

    pub fn symmetric(flip: f64) -> Self {
        Confusion([[1.0 - flip, flip], [flip, 1.0 - flip]])
    }

    pub fn is_stochastic(&self) -> bool {
        self.0.iter().all(|row| {
            row.iter().all(|&v| (0.0..=1.0).contains(&v)) && (row[0] + row[1] - 1.0).abs() < 1e-12
        })
    }
}

/// Probability of reading all zeros: `Σ_z P(z) Π_q C_q[z_q][0]`.
pub fn zero_outcome_probability(rho: &DensityMatrix, readout: &[Confusion]) -> Result<f64> {
    if readout.len() != rho.width() {
        return Err(Error::DimensionMismatch {
            expected: rho.width(),
            actual: readout.len(),
        });
    }
    if let Some(q) = readout.iter().position(|c| !c.is_stochastic()) {
        return Err(Error::NotStochastic(q));
    }
    let p: f64 = rho
        .diagonal()
        .iter()
        .enumerate()
        .map(|(z, &pz)| {
            let passes: f64 = readout
                .iter()
                .enumerate()
                .map(|(q, c)| c.0[(z >> q) & 1][0])
                .product();
            pz * passes
        })
        .sum();
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::state::run_pure;

    #[test]
    fn empty_single_qubit() {
        let rho = run_density(&Circuit::new(1).unwrap(), &NoiseModel::ideal()).unwrap();
        assert_eq!(rho.diagonal(), vec![1.0, 0.0]);
        assert_eq!(rho.get(0, 1), ZERO);
    }

    #[test]
    fn hadamard_with_depolarizing() {
        let p = 0.1;
        let model = NoiseModel {
            p1q: p,
            ..NoiseModel::ideal()
        };
        let mut circ = Circuit::new(1).unwrap();
        circ.push(Gate::h(0)).unwrap();
        let rho = run_density(&circ, &model).unwrap();
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-12);
        assert!((rho.get(1, 1).re - 0.5).abs() < 1e-12);
        assert!((rho.get(0, 1).norm() - (1.0 - p) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_matches_pure() {
        let mut circ = Circuit::new(3).unwrap();
        circ.push(Gate::u3(0, 1.0, 0.3, -0.8)).unwrap();
        circ.push(Gate::cnot(0, 2)).unwrap();
        circ.push(Gate::ry(1, 0.6)).unwrap();
        circ.push(Gate::cz(1, 2)).unwrap();
        circ.push(Gate::h(2)).unwrap();
        let rho = run_density(&circ, &NoiseModel::ideal()).unwrap();
        let expect = DensityMatrix::from_pure(&run_pure(&circ).unwrap());
        for (a, b) in rho.entries().iter().zip(expect.entries()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn readout_cases() {
        let rho = DensityMatrix::zero(1);
        assert_eq!(zero_outcome_probability(&rho, &[Confusion::IDEAL]).unwrap(), 1.0);
        let p = zero_outcome_probability(&rho, &[Confusion::symmetric(0.1)]).unwrap();
        assert!((p - 0.9).abs() < 1e-15);
        let rho2 = DensityMatrix::zero(2);
        let c = Confusion::symmetric(0.026);
        let p2 = zero_outcome_probability(&rho2, &[c, c]).unwrap();
        assert!((p2 - 0.948676).abs() < 1e-6);
    }

    #[test]
    fn readout_rejects_non_stochastic() {
        let bad = Confusion([[0.9, 0.2], [0.0, 1.0]]);
        assert!(matches!(
            zero_outcome_probability(&DensityMatrix::zero(1), &[bad]),
            Err(Error::NotStochastic(0))
        ));
    }

    #[test]
    fn density_cap_enforced() {
        let circ = Circuit::new(DENSITY_CAP + 1).unwrap();
        assert!(run_density(&circ, &NoiseModel::ideal()).is_err());
    }

    #[test]
    fn subsets_enumerates_all() {
        let mut s = subsets_of(0b1010);
        s.sort();
        assert_eq!(s, vec![0, 0b10, 0b1000, 0b1010]);
    }
}
