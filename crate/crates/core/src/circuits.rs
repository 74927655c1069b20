//! Embedding and ansatz circuit families, plus gate-count metrics.
//!
//! All families use a single repetition. Entangling layers are linear CX
//! chains `0→1→…→n−1` except the feature map's all-pairs block and the
//! circular QCNN convolution.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{AngleExpr, QuantumCircuit, Symbol};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("{family} does not support {n} qubits: {reason}")]
    UnsupportedWidth {
        family: &'static str,
        n: usize,
        reason: &'static str,
    },
    #[error("unknown circuit family {0:?}")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingKind {
    ZFeatureMap,
    ZZFeatureMap,
    /// Hardware-efficient embedding: RY(x) layer then a CX chain.
    Hee,
    /// Tensor-product embedding: RY(x) layer only.
    Tpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnsatzKind {
    RealAmplitudes,
    EfficientSU2,
    Qcnn,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 4] = [
        EmbeddingKind::ZFeatureMap,
        EmbeddingKind::ZZFeatureMap,
        EmbeddingKind::Hee,
        EmbeddingKind::Tpe,
    ];

    pub fn key(self) -> &'static str {
        match self {
            EmbeddingKind::ZFeatureMap => "zfeaturemap",
            EmbeddingKind::ZZFeatureMap => "zzfeaturemap",
            EmbeddingKind::Hee => "hee",
            EmbeddingKind::Tpe => "tpe",
        }
    }
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 3] = [
        AnsatzKind::RealAmplitudes,
        AnsatzKind::EfficientSU2,
        AnsatzKind::Qcnn,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AnsatzKind::RealAmplitudes => "realamplitudes",
            AnsatzKind::EfficientSU2 => "efficientsu2",
            AnsatzKind::Qcnn => "qcnn",
        }
    }

    /// Trainable parameters for an `n`-qubit instance.
    pub fn param_count(self, n: usize) -> usize {
        match self {
            AnsatzKind::RealAmplitudes => 2 * n,
            AnsatzKind::EfficientSU2 => 4 * n,
            AnsatzKind::Qcnn => 3 * n + 3 * (n / 2),
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for EmbeddingKind {
    type Err = CircuitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmbeddingKind::ALL
            .into_iter()
            .find(|k| k.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| CircuitError::UnknownFamily(s.to_string()))
    }
}

impl FromStr for AnsatzKind {
    type Err = CircuitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnsatzKind::ALL
            .into_iter()
            .find(|k| k.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| CircuitError::UnknownFamily(s.to_string()))
    }
}

fn linear_chain(c: &mut QuantumCircuit, n: usize) {
    for q in 0..n - 1 {
        c.cx(q, q + 1);
    }
}

pub fn build_embedding(kind: EmbeddingKind, n: usize) -> Result<QuantumCircuit, CircuitError> {
    if n < 2 {
        return Err(CircuitError::UnsupportedWidth {
            family: kind.key(),
            n,
            reason: "at least two qubits required",
        });
    }
    let mut c = QuantumCircuit::new(n);
    let xs: Vec<Symbol> = (0..n).map(|_| c.add_input()).collect();
    match kind {
        EmbeddingKind::ZFeatureMap | EmbeddingKind::ZZFeatureMap => {
            for q in 0..n {
                c.h(q);
            }
            for q in 0..n {
                c.p(q, AngleExpr::scaled(2.0, xs[q]));
            }
            if kind == EmbeddingKind::ZZFeatureMap {
                for i in 0..n {
                    for j in i + 1..n {
                        c.cx(i, j)
                            .p(j, AngleExpr::pi_minus_product(2.0, xs[i], xs[j]))
                            .cx(i, j);
                    }
                }
            }
        }
        EmbeddingKind::Hee | EmbeddingKind::Tpe => {
            for q in 0..n {
                c.ry(q, AngleExpr::symbol(xs[q]));
            }
            if kind == EmbeddingKind::Hee {
                linear_chain(&mut c, n);
            }
        }
    }
    Ok(c)
}

pub fn build_ansatz(kind: AnsatzKind, n: usize) -> Result<QuantumCircuit, CircuitError> {
    if n < 2 {
        return Err(CircuitError::UnsupportedWidth {
            family: kind.key(),
            n,
            reason: "at least two qubits required",
        });
    }
    let mut c = QuantumCircuit::new(n);
    match kind {
        AnsatzKind::RealAmplitudes => {
            rotation_layer(&mut c, n, false);
            linear_chain(&mut c, n);
            rotation_layer(&mut c, n, false);
        }
        AnsatzKind::EfficientSU2 => {
            rotation_layer(&mut c, n, true);
            linear_chain(&mut c, n);
            rotation_layer(&mut c, n, true);
        }
        AnsatzKind::Qcnn => {
            if n % 2 != 0 {
                return Err(CircuitError::UnsupportedWidth {
                    family: kind.key(),
                    n,
                    reason: "QCNN needs an even number of qubits",
                });
            }
            for (a, b) in qcnn_conv_pairs(n) {
                conv_block(&mut c, a, b);
            }
            for k in 0..n / 2 {
                pool_block(&mut c, 2 * k + 1, 2 * k);
            }
        }
    }
    Ok(c)
}

fn rotation_layer(c: &mut QuantumCircuit, n: usize, with_rz: bool) {
    for q in 0..n {
        let t = c.add_param();
        c.ry(q, AngleExpr::symbol(t));
    }
    if with_rz {
        for q in 0..n {
            let t = c.add_param();
            c.rz(q, AngleExpr::symbol(t));
        }
    }
}

/// Even pairs `(0,1),(2,3),…` then odd pairs `(1,2),…,(n−1,0)`.
pub fn qcnn_conv_pairs(n: usize) -> Vec<(usize, usize)> {
    let even = (0..n / 2).map(|k| (2 * k, 2 * k + 1));
    let odd = (0..n / 2).map(|k| (2 * k + 1, (2 * k + 2) % n));
    even.chain(odd).collect()
}

/// Qubits still carrying information after pooling: the even indices.
pub fn qcnn_surviving_qubits(n: usize) -> Vec<usize> {
    (0..n / 2).map(|k| 2 * k).collect()
}

/// Three-parameter, three-CX two-qubit convolution unitary on `(a, b)`.
fn conv_block(c: &mut QuantumCircuit, a: usize, b: usize) {
    let t: Vec<Symbol> = (0..3).map(|_| c.add_param()).collect();
    c.rz(b, AngleExpr::constant(-FRAC_PI_2))
        .cx(b, a)
        .rz(a, AngleExpr::symbol(t[0]))
        .ry(b, AngleExpr::symbol(t[1]))
        .cx(a, b)
        .ry(b, AngleExpr::symbol(t[2]))
        .cx(b, a)
        .rz(a, AngleExpr::constant(FRAC_PI_2));
}

/// Convolution block without its last CX and RZ: folds `source` into `sink`.
fn pool_block(c: &mut QuantumCircuit, source: usize, sink: usize) {
    let t: Vec<Symbol> = (0..3).map(|_| c.add_param()).collect();
    c.rz(sink, AngleExpr::constant(-FRAC_PI_2))
        .cx(sink, source)
        .rz(source, AngleExpr::symbol(t[0]))
        .ry(sink, AngleExpr::symbol(t[1]))
        .cx(source, sink)
        .ry(sink, AngleExpr::symbol(t[2]));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CircuitMetrics {
    pub cx_count: usize,
    pub depth: usize,
    pub param_count: usize,
}

/// CX count, ASAP-scheduled depth over all gates, and trainable parameter count.
pub fn circuit_metrics(circuit: &QuantumCircuit) -> CircuitMetrics {
    let mut level = vec![0usize; circuit.num_qubits()];
    let mut depth = 0;
    let mut cx_count = 0;
    for g in circuit.gates() {
        let qs = g.qubits();
        if qs.iter().any(|&q| q >= level.len()) {
            continue;
        }
        let l = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for &q in &qs {
            level[q] = l;
        }
        depth = depth.max(l);
        if g.is_cx() {
            cx_count += 1;
        }
    }
    CircuitMetrics {
        cx_count,
        depth,
        param_count: circuit.num_params(),
    }
}

/// Embedding followed by ansatz.
pub fn compose_layer(
    embedding: EmbeddingKind,
    ansatz: AnsatzKind,
    n: usize,
) -> Result<QuantumCircuit, CircuitError> {
    Ok(build_embedding(embedding, n)?.compose(&build_ansatz(ansatz, n)?))
}
