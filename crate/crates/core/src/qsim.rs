//! Dense statevector simulation with symbolic gate angles, Z-basis readout
//! (exact or shot-sampled) and parameter-shift gradients.
//!
//! Qubit `q` is bit `q` of a basis-state index (little-endian). When a list
//! of qubits is measured, the *first* listed qubit is the most significant bit
//! of the outcome index.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 18;

/// States at or above this width split gate application across threads.
const PARALLEL_MIN_QUBITS: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("unbound symbol {0}")]
    UnboundSymbol(Symbol),
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("controlled gate with control == target ({0})")]
    ControlIsTarget(usize),
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit limit")]
    TooManyQubits(usize),
    #[error("binding length mismatch: {what} expects {expected}, got {got}")]
    BindingMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("gate {0} does not admit a two-term parameter-shift rule")]
    UnsupportedGateForShift(String),
    #[error("shot count must be at least 1")]
    NoShots,
}

/// A free symbol of an angle expression: a data input or a trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Input(usize),
    Param(usize),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Input(i) => write!(f, "x[{i}]"),
            Symbol::Param(i) => write!(f, "theta[{i}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    /// `coef · s`
    Linear { coef: f64, symbol: Symbol },
    /// `coef · (π − a)(π − b)`
    PiMinusProduct { coef: f64, a: Symbol, b: Symbol },
}

/// `constant + Σ terms`. Covers every angle map used by the circuit families.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AngleExpr {
    pub constant: f64,
    pub terms: Vec<Term>,
}

/// Values bound to a circuit's symbols.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    pub inputs: &'a [f64],
    pub params: &'a [f64],
}

impl Bindings<'_> {
    fn get(&self, s: Symbol) -> Result<f64, QsimError> {
        let v = match s {
            Symbol::Input(i) => self.inputs.get(i),
            Symbol::Param(i) => self.params.get(i),
        };
        v.copied().ok_or(QsimError::UnboundSymbol(s))
    }
}

impl AngleExpr {
    pub fn constant(value: f64) -> Self {
        AngleExpr {
            constant: value,
            terms: Vec::new(),
        }
    }

    pub fn scaled(coef: f64, symbol: Symbol) -> Self {
        AngleExpr {
            constant: 0.0,
            terms: vec![Term::Linear { coef, symbol }],
        }
    }

    pub fn symbol(symbol: Symbol) -> Self {
        Self::scaled(1.0, symbol)
    }

    pub fn pi_minus_product(coef: f64, a: Symbol, b: Symbol) -> Self {
        AngleExpr {
            constant: 0.0,
            terms: vec![Term::PiMinusProduct { coef, a, b }],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        for t in &self.terms {
            match *t {
                Term::Linear { symbol, .. } => out.push(symbol),
                Term::PiMinusProduct { a, b, .. } => {
                    out.push(a);
                    out.push(b);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, QsimError> {
        let mut v = self.constant;
        for t in &self.terms {
            v += match *t {
                Term::Linear { coef, symbol } => coef * b.get(symbol)?,
                Term::PiMinusProduct { coef, a, b: bb } => {
                    coef * (PI - b.get(a)?) * (PI - b.get(bb)?)
                }
            };
        }
        Ok(v)
    }

    /// ∂(angle)/∂(symbol) at the bound point.
    pub fn partial(&self, symbol: Symbol, b: &Bindings) -> Result<f64, QsimError> {
        let mut d = 0.0;
        for t in &self.terms {
            match *t {
                Term::Linear { coef, symbol: s } if s == symbol => d += coef,
                Term::Linear { .. } => {}
                Term::PiMinusProduct { coef, a, b: bb } => {
                    if a == symbol {
                        d -= coef * (PI - b.get(bb)?);
                    }
                    if bb == symbol {
                        d -= coef * (PI - b.get(a)?);
                    }
                }
            }
        }
        Ok(d)
    }
}

fn fmt_coef(f: &mut fmt::Formatter<'_>, coef: f64) -> fmt::Result {
    if coef == 1.0 {
        Ok(())
    } else if coef == -1.0 {
        write!(f, "-")
    } else {
        write!(f, "{coef}*")
    }
}

impl fmt::Display for AngleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if self.constant != 0.0 || self.terms.is_empty() {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for t in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match *t {
                Term::Linear { coef, symbol } => {
                    fmt_coef(f, coef)?;
                    write!(f, "{symbol}")?;
                }
                Term::PiMinusProduct { coef, a, b } => {
                    fmt_coef(f, coef)?;
                    write!(f, "(pi - {a})*(pi - {b})")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationKind {
    Rx,
    Ry,
    Rz,
    /// `diag(1, e^{iφ})`
    Phase,
}

impl RotationKind {
    fn name(self) -> &'static str {
        match self {
            RotationKind::Rx => "rx",
            RotationKind::Ry => "ry",
            RotationKind::Rz => "rz",
            RotationKind::Phase => "p",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    Rotation {
        kind: RotationKind,
        target: usize,
        angle: AngleExpr,
    },
    Cx { control: usize, target: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) => vec![*q],
            Gate::Rotation { target, .. } => vec![*target],
            Gate::Cx { control, target } => vec![*control, *target],
        }
    }

    pub fn angle(&self) -> Option<&AngleExpr> {
        match self {
            Gate::Rotation { angle, .. } => Some(angle),
            _ => None,
        }
    }

    pub fn is_cx(&self) -> bool {
        matches!(self, Gate::Cx { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::Rotation { kind, .. } => kind.name(),
            Gate::Cx { .. } => "cx",
        }
    }

    /// Whether `d/dθ f = ½(f(θ+π/2) − f(θ−π/2))` holds for this gate's angle.
    /// Every rotation here is `exp(−iθG/2)` with `G² = I` up to a global phase.
    pub fn supports_shift_rule(&self) -> bool {
        match self {
            Gate::Rotation { kind, .. } => matches!(
                kind,
                RotationKind::Rx | RotationKind::Ry | RotationKind::Rz | RotationKind::Phase
            ),
            Gate::H(_) | Gate::Cx { .. } => true,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H(q) => write!(f, "h {q}"),
            Gate::Rotation {
                kind,
                target,
                angle,
            } => write!(f, "{} {target} {angle}", kind.name()),
            Gate::Cx { control, target } => write!(f, "cx {control} {target}"),
        }
    }
}

/// Ordered gate list over `num_qubits` qubits with named inputs and parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantumCircuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    inputs: Vec<String>,
    params: Vec<String>,
}

impl QuantumCircuit {
    pub fn new(num_qubits: usize) -> Self {
        QuantumCircuit {
            num_qubits,
            ..Default::default()
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn param_names(&self) -> &[String] {
        &self.params
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn add_input(&mut self) -> Symbol {
        let i = self.inputs.len();
        self.inputs.push(format!("x[{i}]"));
        Symbol::Input(i)
    }

    pub fn add_param(&mut self) -> Symbol {
        let i = self.params.len();
        self.params.push(format!("theta[{i}]"));
        Symbol::Param(i)
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.push(Gate::H(q))
    }

    pub fn rotation(&mut self, kind: RotationKind, q: usize, angle: AngleExpr) -> &mut Self {
        self.push(Gate::Rotation {
            kind,
            target: q,
            angle,
        })
    }

    pub fn rx(&mut self, q: usize, angle: AngleExpr) -> &mut Self {
        self.rotation(RotationKind::Rx, q, angle)
    }

    pub fn ry(&mut self, q: usize, angle: AngleExpr) -> &mut Self {
        self.rotation(RotationKind::Ry, q, angle)
    }

    pub fn rz(&mut self, q: usize, angle: AngleExpr) -> &mut Self {
        self.rotation(RotationKind::Rz, q, angle)
    }

    pub fn p(&mut self, q: usize, angle: AngleExpr) -> &mut Self {
        self.rotation(RotationKind::Phase, q, angle)
    }

    pub fn cx(&mut self, control: usize, target: usize) -> &mut Self {
        self.push(Gate::Cx { control, target })
    }

    /// Appends `other` after `self`. The other circuit's inputs and parameters
    /// are renumbered to follow this circuit's.
    pub fn compose(&self, other: &QuantumCircuit) -> QuantumCircuit {
        let (ni, np) = (self.inputs.len(), self.params.len());
        let shift = |s: Symbol| match s {
            Symbol::Input(i) => Symbol::Input(i + ni),
            Symbol::Param(i) => Symbol::Param(i + np),
        };
        let mut out = self.clone();
        out.num_qubits = self.num_qubits.max(other.num_qubits);
        for g in &other.gates {
            let g = match g {
                Gate::Rotation {
                    kind,
                    target,
                    angle,
                } => Gate::Rotation {
                    kind: *kind,
                    target: *target,
                    angle: AngleExpr {
                        constant: angle.constant,
                        terms: angle
                            .terms
                            .iter()
                            .map(|t| match *t {
                                Term::Linear { coef, symbol } => Term::Linear {
                                    coef,
                                    symbol: shift(symbol),
                                },
                                Term::PiMinusProduct { coef, a, b } => Term::PiMinusProduct {
                                    coef,
                                    a: shift(a),
                                    b: shift(b),
                                },
                            })
                            .collect(),
                    },
                },
                other => other.clone(),
            };
            out.gates.push(g);
        }
        for _ in 0..other.inputs.len() {
            out.add_input();
        }
        for _ in 0..other.params.len() {
            out.add_param();
        }
        out
    }

    /// One line per gate: `name target(s) [angle-expr]`.
    pub fn dump(&self) -> String {
        let mut s = format!(
            "qubits {} inputs {} params {}\n",
            self.num_qubits,
            self.inputs.len(),
            self.params.len()
        );
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    /// Verifies qubit indices and CX wiring.
    pub fn validate(&self) -> Result<(), QsimError> {
        if self.num_qubits > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(self.num_qubits));
        }
        for g in &self.gates {
            for q in g.qubits() {
                if q >= self.num_qubits {
                    return Err(QsimError::QubitOutOfRange {
                        qubit: q,
                        num_qubits: self.num_qubits,
                    });
                }
            }
            if let Gate::Cx { control, target } = g {
                if control == target {
                    return Err(QsimError::ControlIsTarget(*control));
                }
            }
        }
        Ok(())
    }

    /// Fails on the first parameterized gate the two-term shift rule can't handle.
    pub fn check_shift_support(&self) -> Result<(), QsimError> {
        for g in &self.gates {
            let parameterized = g.angle().is_some_and(|a| !a.is_constant());
            if parameterized && !g.supports_shift_rule() {
                return Err(QsimError::UnsupportedGateForShift(g.to_string()));
            }
        }
        Ok(())
    }

    fn check_bindings(&self, b: &Bindings) -> Result<(), QsimError> {
        if b.inputs.len() != self.inputs.len() {
            return Err(QsimError::BindingMismatch {
                what: "inputs",
                expected: self.inputs.len(),
                got: b.inputs.len(),
            });
        }
        if b.params.len() != self.params.len() {
            return Err(QsimError::BindingMismatch {
                what: "params",
                expected: self.params.len(),
                got: b.params.len(),
            });
        }
        Ok(())
    }

    /// Numeric angle of every gate (0 for angle-free gates).
    pub fn resolve_angles(&self, b: &Bindings) -> Result<Vec<f64>, QsimError> {
        self.check_bindings(b)?;
        self.gates
            .iter()
            .map(|g| g.angle().map_or(Ok(0.0), |a| a.eval(b)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`
    pub fn zero(num_qubits: usize) -> Result<Self, QsimError> {
        if num_qubits > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(num_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { num_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n || n > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(n));
        }
        Ok(Statevector {
            num_qubits: n,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<(), QsimError> {
        if q >= self.num_qubits {
            Err(QsimError::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Applies a 2×2 matrix `[[m00, m01], [m10, m11]]` to `target`.
    pub fn apply_single(&mut self, target: usize, m: [[Complex64; 2]; 2]) {
        let mask = 1usize << target;
        let kernel = |lo: &mut [Complex64], hi: &mut [Complex64]| {
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = m[0][0] * x + m[0][1] * y;
                *b = m[1][0] * x + m[1][1] * y;
            }
        };
        if self.num_qubits >= PARALLEL_MIN_QUBITS {
            self.amps.par_chunks_mut(2 * mask).for_each(|chunk| {
                let (lo, hi) = chunk.split_at_mut(mask);
                kernel(lo, hi);
            });
        } else {
            for chunk in self.amps.chunks_mut(2 * mask) {
                let (lo, hi) = chunk.split_at_mut(mask);
                kernel(lo, hi);
            }
        }
    }

    fn apply_diagonal(&mut self, target: usize, d0: Complex64, d1: Complex64) {
        let mask = 1usize << target;
        let kernel = |(i, a): (usize, &mut Complex64)| {
            *a *= if i & mask == 0 { d0 } else { d1 };
        };
        if self.num_qubits >= PARALLEL_MIN_QUBITS {
            self.amps.par_iter_mut().enumerate().for_each(kernel);
        } else {
            self.amps.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let (cm, tm) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    pub fn apply_h(&mut self, target: usize) {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        self.apply_single(target, [[h, h], [h, -h]]);
    }

    pub fn apply_rotation(&mut self, kind: RotationKind, target: usize, theta: f64) {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        match kind {
            RotationKind::Rx => {
                let (cc, ms) = (Complex64::new(c, 0.0), Complex64::new(0.0, -s));
                self.apply_single(target, [[cc, ms], [ms, cc]]);
            }
            RotationKind::Ry => {
                let (cc, ss) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
                self.apply_single(target, [[cc, -ss], [ss, cc]]);
            }
            RotationKind::Rz => {
                self.apply_diagonal(target, Complex64::new(c, -s), Complex64::new(c, s))
            }
            RotationKind::Phase => self.apply_diagonal(
                target,
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(1.0, theta),
            ),
        }
    }

    /// ⟨Z_q⟩ = Σ |amp|² · (+1 if bit q is 0 else −1).
    pub fn expect_z(&self, qubit: usize) -> Result<f64, QsimError> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & mask == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum())
    }

    /// Exact outcome probabilities over `qubits`, first qubit most significant.
    pub fn marginal_probs(&self, qubits: &[usize]) -> Result<Vec<f64>, QsimError> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        let k = qubits.len();
        let mut probs = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            probs[outcome_index(i, qubits)] += a.norm_sqr();
        }
        Ok(probs)
    }
}

fn outcome_index(basis: usize, qubits: &[usize]) -> usize {
    let k = qubits.len();
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (pos, &q)| acc | (((basis >> q) & 1) << (k - 1 - pos)))
}

/// Draws `shots` outcomes from `probs`, returning counts per outcome.
fn sample_counts(probs: &[f64], shots: u32, rng: &mut dyn RngCore) -> Vec<u32> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut counts = vec![0u32; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|c| *c <= u).min(probs.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// Simulates `circuit` from `|0…0⟩` with explicit per-gate angles.
pub fn simulate(circuit: &QuantumCircuit, angles: &[f64]) -> Result<Statevector, QsimError> {
    circuit.validate()?;
    let mut state = Statevector::zero(circuit.num_qubits)?;
    for (g, &theta) in circuit.gates.iter().zip(angles) {
        match g {
            Gate::H(q) => state.apply_h(*q),
            Gate::Rotation { kind, target, .. } => state.apply_rotation(*kind, *target, theta),
            Gate::Cx { control, target } => state.apply_cx(*control, *target),
        }
    }
    Ok(state)
}

/// Runs `circuit` with the given bindings, starting from `|0…0⟩`.
pub fn run(
    circuit: &QuantumCircuit,
    inputs: &[f64],
    params: &[f64],
) -> Result<Statevector, QsimError> {
    let angles = circuit.resolve_angles(&Bindings { inputs, params })?;
    simulate(circuit, &angles)
}

pub fn expect_z(state: &Statevector, qubit: usize) -> Result<f64, QsimError> {
    state.expect_z(qubit)
}

/// Outcome frequencies over `qubits` from `shots` samples.
pub fn sample_quasi_probs(
    state: &Statevector,
    qubits: &[usize],
    shots: u32,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>, QsimError> {
    if shots == 0 {
        return Err(QsimError::NoShots);
    }
    let probs = state.marginal_probs(qubits)?;
    let counts = sample_counts(&probs, shots, rng);
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / shots as f64)
        .collect())
}

/// How measurement statistics are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Exact expectation values / probabilities.
    #[default]
    Exact,
    /// Finite-shot estimates.
    Shots(u32),
}

/// What the quantum layer reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// ⟨Z⟩ on each listed qubit.
    ExpectZ(Vec<usize>),
    /// Outcome distribution over the listed qubits (length `2^len`).
    QuasiProbs(Vec<usize>),
}

impl Readout {
    pub fn output_len(&self) -> usize {
        match self {
            Readout::ExpectZ(q) => q.len(),
            Readout::QuasiProbs(q) => 1 << q.len(),
        }
    }

    pub fn qubits(&self) -> &[usize] {
        match self {
            Readout::ExpectZ(q) | Readout::QuasiProbs(q) => q,
        }
    }
}

/// Reads `state` out per `readout`. `rng` is only consulted for shot sampling.
pub fn measure(
    state: &Statevector,
    readout: &Readout,
    sampling: Sampling,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>, QsimError> {
    match (readout, sampling) {
        (Readout::ExpectZ(qs), Sampling::Exact) => qs.iter().map(|&q| state.expect_z(q)).collect(),
        (Readout::QuasiProbs(qs), Sampling::Exact) => state.marginal_probs(qs),
        (Readout::QuasiProbs(qs), Sampling::Shots(shots)) => {
            sample_quasi_probs(state, qs, shots, rng)
        }
        (Readout::ExpectZ(qs), Sampling::Shots(shots)) => {
            let freqs = sample_quasi_probs(state, qs, shots, rng)?;
            let k = qs.len();
            Ok((0..k)
                .map(|pos| {
                    let bit = k - 1 - pos;
                    freqs
                        .iter()
                        .enumerate()
                        .map(|(o, f)| if (o >> bit) & 1 == 0 { *f } else { -*f })
                        .sum()
                })
                .collect())
        }
    }
}

/// Scalar observable for [`param_shift_grad`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observable {
    Z(usize),
    QuasiProb { qubits: Vec<usize>, outcome: usize },
}

fn observe(state: &Statevector, obs: &Observable) -> Result<f64, QsimError> {
    match obs {
        Observable::Z(q) => state.expect_z(*q),
        Observable::QuasiProb { qubits, outcome } => {
            Ok(state.marginal_probs(qubits)?.get(*outcome).copied().unwrap_or(0.0))
        }
    }
}

/// Exact d⟨obs⟩/d(wrt) by the parameter-shift rule, summed over every gate
/// whose angle depends on `wrt`.
pub fn param_shift_grad(
    circuit: &QuantumCircuit,
    inputs: &[f64],
    params: &[f64],
    observable: &Observable,
    wrt: Symbol,
) -> Result<f64, QsimError> {
    let b = Bindings { inputs, params };
    let angles = circuit.resolve_angles(&b)?;
    let mut grad = 0.0;
    for (gi, g) in circuit.gates.iter().enumerate() {
        let Some(expr) = g.angle() else { continue };
        if !expr.symbols().contains(&wrt) {
            continue;
        }
        if !g.supports_shift_rule() {
            return Err(QsimError::UnsupportedGateForShift(g.to_string()));
        }
        let d_angle = expr.partial(wrt, &b)?;
        let mut shifted = angles.clone();
        shifted[gi] = angles[gi] + FRAC_PI_2;
        let plus = observe(&simulate(circuit, &shifted)?, observable)?;
        shifted[gi] = angles[gi] - FRAC_PI_2;
        let minus = observe(&simulate(circuit, &shifted)?, observable)?;
        grad += d_angle * 0.5 * (plus - minus);
    }
    Ok(grad)
}

/// Gradients of `upstream · readout(circuit)` with respect to every input and
/// parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGradients {
    pub inputs: Vec<f64>,
    pub params: Vec<f64>,
}

/// Vector-Jacobian product through the circuit by the parameter-shift rule.
///
/// Each symbol-dependent gate is shifted once in each direction; the chain
/// rule through its angle expression distributes the result to every symbol
/// it references. Shifted evaluations run in parallel and are reduced in gate
/// order, so the result is deterministic. `rng` is used only in shot mode.
/// With `need_inputs` false, gates that depend only on inputs are skipped and
/// the input gradients are left at zero.
pub fn readout_vjp(
    circuit: &QuantumCircuit,
    inputs: &[f64],
    params: &[f64],
    readout: &Readout,
    sampling: Sampling,
    upstream: &[f64],
    need_inputs: bool,
    rng: &mut dyn RngCore,
) -> Result<ShiftGradients, QsimError> {
    if upstream.len() != readout.output_len() {
        return Err(QsimError::BindingMismatch {
            what: "upstream gradient",
            expected: readout.output_len(),
            got: upstream.len(),
        });
    }
    circuit.check_shift_support()?;
    let b = Bindings { inputs, params };
    let angles = circuit.resolve_angles(&b)?;
    let shifted: Vec<usize> = circuit
        .gates
        .iter()
        .enumerate()
        .filter(|(_, g)| {
            g.angle().is_some_and(|a| {
                a.symbols()
                    .iter()
                    .any(|s| need_inputs || matches!(s, Symbol::Param(_)))
            })
        })
        .map(|(i, _)| i)
        .collect();

    // Shot mode needs one independent stream per evaluation to stay reproducible.
    let seeds: Vec<u64> = match sampling {
        Sampling::Exact => vec![0; shifted.len()],
        Sampling::Shots(_) => (0..shifted.len()).map(|_| rng.next_u64()).collect(),
    };
    let dot = |v: &[f64]| -> f64 { v.iter().zip(upstream).map(|(a, b)| a * b).sum() };
    let per_gate: Vec<Result<f64, QsimError>> = shifted
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&gi, &seed)| {
            use rand::SeedableRng;
            let mut local = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut a = angles.clone();
            a[gi] = angles[gi] + FRAC_PI_2;
            let plus = measure(&simulate(circuit, &a)?, readout, sampling, &mut local)?;
            a[gi] = angles[gi] - FRAC_PI_2;
            let minus = measure(&simulate(circuit, &a)?, readout, sampling, &mut local)?;
            Ok(0.5 * (dot(&plus) - dot(&minus)))
        })
        .collect();

    let mut out = ShiftGradients {
        inputs: vec![0.0; inputs.len()],
        params: vec![0.0; params.len()],
    };
    for (&gi, scalar) in shifted.iter().zip(per_gate) {
        let scalar = scalar?;
        let expr = circuit.gates[gi].angle().expect("filtered on angle");
        for s in expr.symbols() {
            let d = expr.partial(s, &b)?;
            match s {
                Symbol::Input(i) if need_inputs => out.inputs[i] += d * scalar,
                Symbol::Input(_) => {}
                Symbol::Param(i) => out.params[i] += d * scalar,
            }
        }
    }
    Ok(out)
}
