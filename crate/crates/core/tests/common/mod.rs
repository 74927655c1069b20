//! Reference implementations used only by tests.
#![allow(dead_code)]

use num_complex::Complex64;
use qttt_core::circuits::{compose_layer, AnsatzKind, EmbeddingKind};
use qttt_core::qsim::{self, AngleExpr, Gate, QuantumCircuit, Readout, RotationKind, Sampling};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn single_qubit_matrix(gate: &Gate, theta: f64) -> [[Complex64; 2]; 2] {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match gate {
        Gate::H(_) => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            [[c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(-r, 0.0)]]
        }
        Gate::Rotation { kind, .. } => match kind {
            RotationKind::Rx => [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]],
            RotationKind::Ry => [[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]],
            RotationKind::Rz => [
                [Complex64::from_polar(1.0, -theta / 2.0), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::from_polar(1.0, theta / 2.0)],
            ],
            RotationKind::Phase => [
                [c(1.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::from_polar(1.0, theta)],
            ],
        },
        Gate::Cx { .. } => unreachable!("two-qubit gate"),
    }
}

fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
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

/// Full-register matrix of one gate. Basis index bit `q` is qubit `q`, so the
/// Kronecker product runs from the highest qubit down.
pub fn gate_matrix(gate: &Gate, theta: f64, n: usize) -> Matrix {
    match gate {
        Gate::Cx { control, target } => {
            let dim = 1 << n;
            let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
            for i in 0..dim {
                let j = if (i >> control) & 1 == 1 { i ^ (1 << target) } else { i };
                m[j][i] = c(1.0, 0.0);
            }
            m
        }
        _ => {
            let q = gate.qubits()[0];
            let u = single_qubit_matrix(gate, theta);
            let u: Matrix = u.iter().map(|r| r.to_vec()).collect();
            let id2 = identity(2);
            let mut m = identity(1);
            for k in (0..n).rev() {
                m = kron(&m, if k == q { &u } else { &id2 });
            }
            m
        }
    }
}

fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Statevector by explicit matrix products.
pub fn dense_state(circuit: &QuantumCircuit, angles: &[f64]) -> Vec<Complex64> {
    let n = circuit.num_qubits();
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    for (g, &theta) in circuit.gates().iter().zip(angles) {
        v = mat_vec(&gate_matrix(g, theta, n), &v);
    }
    v
}

pub fn dense_expect_z(state: &[Complex64], q: usize) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(i, a)| if (i >> q) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

/// Marginal distribution; the first listed qubit is the most significant bit.
pub fn dense_marginal(state: &[Complex64], qubits: &[usize]) -> Vec<f64> {
    let k = qubits.len();
    let mut out = vec![0.0; 1 << k];
    for (i, a) in state.iter().enumerate() {
        let mut o = 0;
        for &q in qubits {
            o = (o << 1) | ((i >> q) & 1);
        }
        out[o] += a.norm_sqr();
    }
    debug_assert_eq!(out.len(), 1 << k);
    out
}

/// Random circuit with constant angles over every gate kind.
pub fn random_circuit(rng: &mut dyn RngCore, n: usize, len: usize) -> QuantumCircuit {
    let mut circ = QuantumCircuit::new(n);
    for _ in 0..len {
        let q = rng.random_range(0..n);
        let theta = rng.random_range(-7.0..7.0);
        match rng.random_range(0..6) {
            0 => circ.h(q),
            1 => circ.rx(q, AngleExpr::constant(theta)),
            2 => circ.ry(q, AngleExpr::constant(theta)),
            3 => circ.rz(q, AngleExpr::constant(theta)),
            4 => circ.p(q, AngleExpr::constant(theta)),
            _ if n > 1 => {
                let t = (q + rng.random_range(1..n)) % n;
                circ.cx(q, t)
            }
            _ => circ.h(q),
        };
    }
    circ
}

/// `|g - fd| / max(|fd|, floor)`; the floor keeps vanishing components from
/// dominating.
pub fn rel_err(g: f64, fd: f64, floor: f64) -> f64 {
    (g - fd).abs() / fd.abs().max(floor)
}

/// Compares `count` random circuits on 1..=4 qubits against the dense oracle.
/// Returns the largest deviation seen across amplitudes, ⟨Z⟩ and marginals.
pub fn simulator_oracle_max_error(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.random_range(1..=4);
        let len = rng.random_range(1..=30);
        let circ = random_circuit(&mut rng, n, len);
        let angles = circ
            .resolve_angles(&qsim::Bindings { inputs: &[], params: &[] })
            .unwrap();
        let fast = qsim::simulate(&circ, &angles).unwrap();
        let slow = dense_state(&circ, &angles);
        for (a, b) in fast.amplitudes().iter().zip(&slow) {
            worst = worst.max((a - b).norm());
        }
        for q in 0..n {
            worst = worst.max((fast.expect_z(q).unwrap() - dense_expect_z(&slow, q)).abs());
        }
        let mut qubits: Vec<usize> = (0..n).collect();
        qubits.rotate_left(rng.random_range(0..n));
        qubits.truncate(rng.random_range(1..=n));
        let exact = qsim::measure(&fast, &Readout::QuasiProbs(qubits.clone()), Sampling::Exact, &mut rng).unwrap();
        for (a, b) in exact.iter().zip(dense_marginal(&slow, &qubits)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn readout_value(circ: &QuantumCircuit, x: &[f64], p: &[f64], readout: &Readout, up: &[f64]) -> f64 {
    let s = qsim::run(circ, x, p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = qsim::measure(&s, readout, Sampling::Exact, &mut rng).unwrap();
    out.iter().zip(up).map(|(a, b)| a * b).sum()
}

/// Worst relative error of parameter-shift input and parameter gradients
/// against central differences, for one embedding/ansatz pair.
pub fn shift_vs_fd(emb: EmbeddingKind, ans: AnsatzKind, n: usize, readout: Readout, seed: u64) -> f64 {
    let circ = compose_layer(emb, ans, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..circ.num_inputs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p: Vec<f64> = (0..circ.num_params()).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let up: Vec<f64> = (0..readout.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = qsim::readout_vjp(&circ, &x, &p, &readout, Sampling::Exact, &up, true, &mut rng).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let (mut a, mut b) = (x.clone(), x.clone());
        a[i] += h;
        b[i] -= h;
        let fd = (readout_value(&circ, &a, &p, &readout, &up) - readout_value(&circ, &b, &p, &readout, &up)) / (2.0 * h);
        worst = worst.max(rel_err(g.inputs[i], fd, 1e-3));
    }
    for i in 0..p.len() {
        let (mut a, mut b) = (p.clone(), p.clone());
        a[i] += h;
        b[i] -= h;
        let fd = (readout_value(&circ, &x, &a, &readout, &up) - readout_value(&circ, &x, &b, &readout, &up)) / (2.0 * h);
        worst = worst.max(rel_err(g.params[i], fd, 1e-3));
    }
    worst
}

/// Every embedding with every ansatz at a width each family supports.
pub fn gradient_cases() -> Vec<(EmbeddingKind, AnsatzKind, usize)> {
    let mut out = Vec::new();
    for emb in EmbeddingKind::ALL {
        for ans in AnsatzKind::ALL {
            out.push((emb, ans, 4));
        }
    }
    out
}
