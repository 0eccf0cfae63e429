//! Dense statevector simulator restricted to RX, RY and CNOT plus exact
//! Pauli-Z readout.
//!
//! Qubit ordering is big-endian: qubit 0 is the most significant bit of the
//! basis index, so the ket `|q0 q1 ... q(n-1)>` is the binary expansion of the
//! index. `|10>` on two qubits is index 2.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest register the simulator will allocate (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Cnot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn kind(&self) -> GateKind {
        match self {
            GateOp::Rx { .. } => GateKind::Rx,
            GateOp::Ry { .. } => GateKind::Ry,
            GateOp::Cnot { .. } => GateKind::Cnot,
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            GateOp::Rx { target, .. } | GateOp::Ry { target, .. } | GateOp::Cnot { target, .. } => {
                target
            }
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            GateOp::Cnot { control, .. } => Some(control),
            _ => None,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateOp::Rx { angle, .. } | GateOp::Ry { angle, .. } => Some(angle),
            GateOp::Cnot { .. } => None,
        }
    }

    /// Same gate with the rotation angle shifted by `delta`. CNOT is returned unchanged.
    pub fn shifted(self, delta: f64) -> GateOp {
        match self {
            GateOp::Rx { target, angle } => GateOp::Rx {
                target,
                angle: angle + delta,
            },
            GateOp::Ry { target, angle } => GateOp::Ry {
                target,
                angle: angle + delta,
            },
            cnot => cnot,
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= num_qubits {
            return Err(Error::Index(format!(
                "target qubit {target} out of range for {num_qubits} qubits"
            )));
        }
        if let Some(control) = self.control() {
            if control >= num_qubits {
                return Err(Error::Index(format!(
                    "control qubit {control} out of range for {num_qubits} qubits"
                )));
            }
            if control == target {
                return Err(Error::Index(format!(
                    "control and target are both qubit {target}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateOp::Rx { target, angle } => write!(f, "RX({angle:.4}) q{target}"),
            GateOp::Ry { target, angle } => write!(f, "RY({angle:.4}) q{target}"),
            GateOp::Cnot { control, target } => write!(f, "CNOT q{control}->q{target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_qubit_count(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "register of {num_qubits} qubits outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be `2^n`; normalization is the
    /// caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Shape(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubit_count(num_qubits)?;
        Ok(StateVector {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            GateOp::Rx { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let diag = Complex64::new(c, 0.0);
                let off = Complex64::new(0.0, -s);
                self.apply_single(target, [[diag, off], [off, diag]]);
            }
            GateOp::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                self.apply_single(
                    target,
                    [
                        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                    ],
                );
            }
            GateOp::Cnot { control, target } => {
                let cmask = self.mask(control);
                let tmask = self.mask(target);
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    fn apply_single(&mut self, target: usize, m: [[Complex64; 2]; 2]) {
        let mask = self.mask(target);
        let dim = self.amplitudes.len();
        // Walk blocks of 2*mask; the lower half has the target bit clear.
        let mut base = 0;
        while base < dim {
            for i in base..base + mask {
                let j = i | mask;
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[j];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += mask << 1;
        }
    }

    /// Exact `<Z>` on `qubit`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        let mask = self.mask(qubit);
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = a.norm_sqr();
                if i & mask == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum::<f64>();
        Ok(value.clamp(-1.0, 1.0))
    }
}

pub fn zero_state(num_qubits: usize) -> Result<StateVector> {
    StateVector::zero(num_qubits)
}

pub fn apply_gate(mut state: StateVector, gate: &GateOp) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}
