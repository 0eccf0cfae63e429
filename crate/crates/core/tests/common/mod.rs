//! Reference implementations the library is checked against. Each one is
//! written from the textbook definition, not from the library code.
#![allow(dead_code)]

use num_complex::Complex64;
use qfl_core::qsim::GateOp;
use qfl_core::vqc::{self, CircuitSpec, WeightVector};
use rand::Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn single_qubit(kind: char, theta: f64) -> Matrix {
    let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match kind {
        'x' => vec![vec![c(cs, 0.0), c(0.0, -sn)], vec![c(0.0, -sn), c(cs, 0.0)]],
        'y' => vec![vec![c(cs, 0.0), c(-sn, 0.0)], vec![c(sn, 0.0), c(cs, 0.0)]],
        _ => unreachable!(),
    }
}

/// `I ⊗ .. ⊗ U ⊗ .. ⊗ I` with qubit 0 as the leftmost factor.
fn embed_single(n: usize, target: usize, u: &Matrix) -> Matrix {
    let mut m = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        let factor = if q == target { u.clone() } else { identity(2) };
        m = kron(&m, &factor);
    }
    m
}

/// CNOT as `|0><0| ⊗ I + |1><1| ⊗ X` on the control/target factors.
fn cnot_matrix(n: usize, control: usize, target: usize) -> Matrix {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
    let mut a = vec![vec![c(1.0, 0.0)]];
    let mut b = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        let (fa, fb) = if q == control {
            (p0.clone(), p1.clone())
        } else if q == target {
            (identity(2), x.clone())
        } else {
            (identity(2), identity(2))
        };
        a = kron(&a, &fa);
        b = kron(&b, &fb);
    }
    a.iter()
        .zip(&b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn gate_matrix(n: usize, op: &GateOp) -> Matrix {
    match *op {
        GateOp::Rx { target, angle } => embed_single(n, target, &single_qubit('x', angle)),
        GateOp::Ry { target, angle } => embed_single(n, target, &single_qubit('y', angle)),
        GateOp::Cnot { control, target } => cnot_matrix(n, control, target),
    }
}

/// Product of all gate matrices, later gates on the left.
pub fn circuit_unitary(n: usize, ops: &[GateOp]) -> Matrix {
    ops.iter().fold(identity(1 << n), |acc, op| matmul(&gate_matrix(n, op), &acc))
}

/// `<Z_q>` from amplitudes, qubit 0 being the most significant index bit.
pub fn z_expectation(amps: &[Complex64], n: usize, q: usize) -> f64 {
    amps.iter()
        .enumerate()
        .map(|(i, a)| {
            let bit = (i >> (n - 1 - q)) & 1;
            let sign = if bit == 0 { 1.0 } else { -1.0 };
            sign * a.norm_sqr()
        })
        .sum()
}

pub fn random_circuit(rng: &mut impl Rng, n: usize, len: usize) -> Vec<GateOp> {
    (0..len)
        .map(|_| {
            let target = rng.random_range(0..n);
            let angle = rng.random_range(-std::f64::consts::TAU..std::f64::consts::TAU);
            match rng.random_range(0..3) {
                0 => GateOp::Rx { target, angle },
                1 if n > 1 => {
                    let mut control = rng.random_range(0..n - 1);
                    if control >= target {
                        control += 1;
                    }
                    GateOp::Cnot { control, target }
                }
                _ => GateOp::Ry { target, angle },
            }
        })
        .collect()
}

/// Mean clipped cross-entropy computed from the forward pass only.
pub fn mean_loss(spec: &CircuitSpec, w: &WeightVector, batch: &[(Vec<f64>, u8)]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| vqc::loss(&vqc::forward(spec, w, x).unwrap(), *y))
        .sum::<f64>()
        / batch.len() as f64
}

/// Central finite differences of [`mean_loss`].
pub fn fd_gradient(spec: &CircuitSpec, w: &WeightVector, batch: &[(Vec<f64>, u8)], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus.0[i] += h;
            minus.0[i] -= h;
            (mean_loss(spec, &plus, batch) - mean_loss(spec, &minus, batch)) / (2.0 * h)
        })
        .collect()
}

/// Receiver keeps slot `i` from the sender when the sender has it, its own otherwise.
pub fn reference_ring_adapt(incoming: &[f64], own: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..own.len() {
        match incoming.get(i) {
            Some(&v) => out.push(v),
            None => out.push(own[i]),
        }
    }
    out
}

/// Elementwise mean of equal-length vectors, summed in client order.
pub fn brute_force_mean(vectors: &[Vec<f64>]) -> Vec<f64> {
    let len = vectors[0].len();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let mut s = 0.0;
        for v in vectors {
            s += v[i];
        }
        out.push(s / vectors.len() as f64);
    }
    out
}

/// Corner-aligned bilinear interpolation from its four-neighbour definition.
pub fn reference_bilinear(img: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let coord = |i: usize, out: usize, inp: usize| -> f64 {
        if out == 1 {
            (inp as f64 - 1.0) / 2.0
        } else {
            i as f64 * (inp as f64 - 1.0) / (out as f64 - 1.0)
        }
    };
    let mut out = Vec::with_capacity(oh * ow);
    for r in 0..oh {
        for col in 0..ow {
            let y = coord(r, oh, h);
            let x = coord(col, ow, w);
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (dy, dx) = (y - y0 as f64, x - x0 as f64);
            let p = |yy: usize, xx: usize| img[yy * w + xx];
            out.push(
                p(y0, x0) * (1.0 - dy) * (1.0 - dx)
                    + p(y0, x1) * (1.0 - dy) * dx
                    + p(y1, x0) * dy * (1.0 - dx)
                    + p(y1, x1) * dy * dx,
            );
        }
    }
    out
}
