//! Engine specifications and the evaluable engines built from them.
//!
//! Every engine maps a board to nine action values. Classical engines run a
//! small convolutional network; quantum-only engines feed the encoded board
//! straight into an embedding + ansatz circuit; hybrid engines sandwich the
//! circuit between two dense layers.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{
    build_ansatz, build_embedding, qcnn_surviving_qubits, AnsatzKind, CircuitError,
    EmbeddingKind,
};
use crate::game::Board;
use crate::nn::{ForwardCache, Layer, LayerKind, Network, NnError, Tensor};
use crate::qsim::{self, QsimError, QuantumCircuit, Readout, Sampling};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine spec: {0}")]
    InvalidSpec(String),
    #[error("no legal moves on board {0}")]
    NoLegalMoves(Board),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint is for {found}, expected {expected}")]
    SpecMismatch { expected: String, found: String },
    #[error("engine has no quantum layer")]
    NoQuantumLayer,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassicalSize {
    Stronger,
    Weaker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputMethod {
    /// Outcome distribution over all qubits.
    Sampler,
    /// Per-qubit ⟨Z⟩.
    Estimator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Classical(ClassicalSize),
    /// 9 qubits for QNN ansatze, 18 (duplicated input) for QCNN.
    QuantumOnly {
        embedding: EmbeddingKind,
        ansatz: AnsatzKind,
    },
    Hybrid {
        output: OutputMethod,
        qubits: usize,
        embedding: EmbeddingKind,
        ansatz: AnsatzKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EngineSpec {
    pub family: Family,
    pub seed: u64,
}

impl EngineSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        EngineSpec { family, seed }
    }

    pub fn parse(key: &str, seed: u64) -> Result<Self, EngineError> {
        let family = key.parse()?;
        let spec = EngineSpec { family, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn key(&self) -> String {
        self.family.to_string()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match self.family {
            Family::Classical(_) | Family::QuantumOnly { .. } => Ok(()),
            Family::Hybrid {
                output,
                qubits,
                ansatz,
                ..
            } => {
                if qubits != 8 && qubits != 16 {
                    return Err(EngineError::InvalidSpec(format!(
                        "hybrid engines use 8 or 16 qubits, got {qubits}"
                    )));
                }
                if output == OutputMethod::Sampler && ansatz == AnsatzKind::Qcnn {
                    return Err(EngineError::InvalidSpec(
                        "QCNN hybrids only support the estimator output".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Width of the quantum register, if any.
    pub fn qubits(&self) -> Option<usize> {
        match self.family {
            Family::Classical(_) => None,
            Family::QuantumOnly { ansatz, .. } => Some(if ansatz == AnsatzKind::Qcnn { 18 } else { 9 }),
            Family::Hybrid { qubits, .. } => Some(qubits),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Classical(ClassicalSize::Stronger) => write!(f, "ccnn-stronger"),
            Family::Classical(ClassicalSize::Weaker) => write!(f, "ccnn-weaker"),
            Family::QuantumOnly { embedding, ansatz } => {
                let n = if *ansatz == AnsatzKind::Qcnn { 18 } else { 9 };
                write!(f, "qnn-{n}-{embedding}-{ansatz}")
            }
            Family::Hybrid {
                output,
                qubits,
                embedding,
                ansatz,
            } => {
                let o = match output {
                    OutputMethod::Sampler => "smp",
                    OutputMethod::Estimator => "est",
                };
                write!(f, "hnn-{o}-{qubits}-{embedding}-{ansatz}")
            }
        }
    }
}

impl FromStr for Family {
    type Err = EngineError;

    /// Accepts `ccnn-stronger`, `qnn-9-tpe-efficientsu2`, `qnn-18-hee-qcnn`,
    /// `hnn-est-16-hee-realamplitudes` and the like.
    fn from_str(key: &str) -> Result<Self, Self::Err> {
        let bad = || EngineError::InvalidSpec(format!("unrecognised engine key {key:?}"));
        let parts: Vec<&str> = key.split('-').collect();
        let family = match parts.as_slice() {
            ["ccnn", "stronger"] => Family::Classical(ClassicalSize::Stronger),
            ["ccnn", "weaker"] => Family::Classical(ClassicalSize::Weaker),
            ["qnn", n, e, a] => {
                let embedding = e.parse().map_err(|_| bad())?;
                let ansatz: AnsatzKind = a.parse().map_err(|_| bad())?;
                let expected = if ansatz == AnsatzKind::Qcnn { "18" } else { "9" };
                if *n != expected {
                    return Err(EngineError::InvalidSpec(format!(
                        "quantum-only {ansatz} engines use {expected} qubits, key says {n}"
                    )));
                }
                Family::QuantumOnly { embedding, ansatz }
            }
            ["hnn", o, n, e, a] => Family::Hybrid {
                output: match *o {
                    "smp" => OutputMethod::Sampler,
                    "est" => OutputMethod::Estimator,
                    _ => return Err(bad()),
                },
                qubits: n.parse().map_err(|_| bad())?,
                embedding: e.parse().map_err(|_| bad())?,
                ansatz: a.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        EngineSpec::new(family, 0).validate()?;
        Ok(family)
    }
}

/// The full study: 2 classical, 8 QNN, 4 QCNN, 32 hybrid-QNN and 8 hybrid-QCNN
/// engines. Seeds are `base_seed + index`.
pub fn all_specs(base_seed: u64) -> Vec<EngineSpec> {
    let mut families = vec![
        Family::Classical(ClassicalSize::Stronger),
        Family::Classical(ClassicalSize::Weaker),
    ];
    let qnn_ansatze = [AnsatzKind::RealAmplitudes, AnsatzKind::EfficientSU2];
    for output in [OutputMethod::Sampler, OutputMethod::Estimator] {
        for qubits in [8, 16] {
            for ansatz in qnn_ansatze {
                for embedding in EmbeddingKind::ALL {
                    families.push(Family::Hybrid {
                        output,
                        qubits,
                        embedding,
                        ansatz,
                    });
                }
            }
            if output == OutputMethod::Estimator {
                for embedding in EmbeddingKind::ALL {
                    families.push(Family::Hybrid {
                        output,
                        qubits,
                        embedding,
                        ansatz: AnsatzKind::Qcnn,
                    });
                }
            }
        }
    }
    for ansatz in [AnsatzKind::RealAmplitudes, AnsatzKind::EfficientSU2, AnsatzKind::Qcnn] {
        for embedding in EmbeddingKind::ALL {
            families.push(Family::QuantumOnly { embedding, ansatz });
        }
    }
    families
        .into_iter()
        .enumerate()
        .map(|(i, family)| EngineSpec::new(family, base_seed.wrapping_add(i as u64)))
        .collect()
}

/// Embedding + ansatz with trainable angles and a fixed readout.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumLayer {
    embedding: QuantumCircuit,
    ansatz: QuantumCircuit,
    circuit: QuantumCircuit,
    params: Vec<f64>,
    readout: Readout,
    /// Feed the 9-vector twice to fill an 18-qubit register.
    duplicate_inputs: bool,
}

impl QuantumLayer {
    fn new(
        embedding: EmbeddingKind,
        ansatz: AnsatzKind,
        n: usize,
        readout: Readout,
        duplicate_inputs: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Self, EngineError> {
        let emb = build_embedding(embedding, n)?;
        let ans = build_ansatz(ansatz, n)?;
        let circuit = emb.compose(&ans);
        circuit.validate()?;
        let params = (0..circuit.num_params())
            .map(|_| rng.random_range(0.0..TAU))
            .collect();
        Ok(QuantumLayer {
            embedding: emb,
            ansatz: ans,
            circuit,
            params,
            readout,
            duplicate_inputs,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }

    pub fn circuit(&self) -> &QuantumCircuit {
        &self.circuit
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    /// Splices constant-angle circuits after the embedding and/or the ansatz.
    pub fn realize(&self, insert: &Insertions) -> QuantumCircuit {
        if insert.is_empty() {
            return self.circuit.clone();
        }
        let mut c = self.embedding.clone();
        if let Some(mid) = &insert.after_embedding {
            c = c.compose(mid);
        }
        c = c.compose(&self.ansatz);
        if let Some(end) = &insert.after_ansatz {
            c = c.compose(end);
        }
        c
    }

    fn circuit_inputs(&self, x: &[f64]) -> Vec<f64> {
        if self.duplicate_inputs {
            x.iter().chain(x).copied().collect()
        } else {
            x.to_vec()
        }
    }
}

/// Extra fixed-angle gates to splice into a quantum layer for one inference.
/// Spliced circuits must not declare inputs or parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Insertions {
    pub after_embedding: Option<QuantumCircuit>,
    pub after_ansatz: Option<QuantumCircuit>,
}

impl Insertions {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.after_embedding.is_none() && self.after_ansatz.is_none()
    }

    pub fn gate_count(&self) -> usize {
        [&self.after_embedding, &self.after_ansatz]
            .iter()
            .filter_map(|c| c.as_ref())
            .map(|c| c.gates().len())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Classical(Network),
    Quantum(QuantumLayer),
    Hybrid {
        pre: Network,
        quantum: QuantumLayer,
        post: Network,
    },
}

/// Everything [`Engine::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    classical: Option<ForwardCache>,
    pre: Option<ForwardCache>,
    post: Option<ForwardCache>,
    circuit_inputs: Vec<f64>,
    realized: Option<QuantumCircuit>,
    pub values: [f64; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    spec: EngineSpec,
    model: Model,
    sampling: Sampling,
}

fn classical_net(size: ClassicalSize) -> Network {
    match size {
        ClassicalSize::Stronger => Network::new(vec![
            Layer::conv3x3(1, 64),
            Layer::tanh(),
            Layer::flatten(),
            Layer::dense(64, 128),
            Layer::tanh(),
            Layer::dense(128, 9),
            Layer::tanh(),
        ]),
        ClassicalSize::Weaker => Network::new(vec![
            Layer::conv3x3(1, 16),
            Layer::tanh(),
            Layer::flatten(),
            Layer::dense(16, 9),
            Layer::tanh(),
        ]),
    }
}

pub fn build_engine(spec: EngineSpec) -> Result<Engine, EngineError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let model = match spec.family {
        Family::Classical(size) => {
            let mut net = classical_net(size);
            net.init_uniform(&mut rng);
            Model::Classical(net)
        }
        Family::QuantumOnly { embedding, ansatz } => {
            let (n, readout, dup) = if ansatz == AnsatzKind::Qcnn {
                (18, Readout::ExpectZ(qcnn_surviving_qubits(18)), true)
            } else {
                (9, Readout::ExpectZ((0..9).collect()), false)
            };
            Model::Quantum(QuantumLayer::new(embedding, ansatz, n, readout, dup, &mut rng)?)
        }
        Family::Hybrid {
            output,
            qubits: n,
            embedding,
            ansatz,
        } => {
            let readout = match (output, ansatz) {
                (OutputMethod::Sampler, _) => Readout::QuasiProbs((0..n).collect()),
                (OutputMethod::Estimator, AnsatzKind::Qcnn) => {
                    Readout::ExpectZ(qcnn_surviving_qubits(n))
                }
                (OutputMethod::Estimator, _) => Readout::ExpectZ((0..n).collect()),
            };
            let width = readout.output_len();
            let mut pre = Network::new(vec![Layer::dense(9, n), Layer::tanh()]);
            pre.init_uniform(&mut rng);
            let quantum = QuantumLayer::new(embedding, ansatz, n, readout, false, &mut rng)?;
            let mut post = Network::new(vec![Layer::dense(width, 9), Layer::tanh()]);
            post.init_uniform(&mut rng);
            Model::Hybrid { pre, quantum, post }
        }
    };
    Ok(Engine {
        spec,
        model,
        sampling: Sampling::Exact,
    })
}

impl Engine {
    pub fn spec(&self) -> &EngineSpec {
        &self.spec
    }

    pub fn id(&self) -> String {
        self.spec.key()
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn set_sampling(&mut self, sampling: Sampling) {
        self.sampling = sampling;
    }

    pub fn quantum_layer(&self) -> Option<&QuantumLayer> {
        match &self.model {
            Model::Classical(_) => None,
            Model::Quantum(q) | Model::Hybrid { quantum: q, .. } => Some(q),
        }
    }

    pub fn classical_param_count(&self) -> usize {
        match &self.model {
            Model::Classical(n) => n.param_count(),
            Model::Quantum(_) => 0,
            Model::Hybrid { pre, post, .. } => pre.param_count() + post.param_count(),
        }
    }

    pub fn quantum_param_count(&self) -> usize {
        self.quantum_layer().map_or(0, |q| q.params.len())
    }

    pub fn param_count(&self) -> usize {
        self.classical_param_count() + self.quantum_param_count()
    }

    /// Flat parameters: classical network, or `[pre, quantum, post]`.
    pub fn params(&self) -> Vec<f64> {
        match &self.model {
            Model::Classical(n) => n.params(),
            Model::Quantum(q) => q.params.clone(),
            Model::Hybrid { pre, quantum, post } => {
                let mut p = pre.params();
                p.extend_from_slice(&quantum.params);
                p.extend(post.params());
                p
            }
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), EngineError> {
        if params.len() != self.param_count() {
            return Err(EngineError::Nn(NnError::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                got: params.len().to_string(),
            }));
        }
        match &mut self.model {
            Model::Classical(n) => n.set_params(params)?,
            Model::Quantum(q) => q.params.copy_from_slice(params),
            Model::Hybrid { pre, quantum, post } => {
                let (a, rest) = params.split_at(pre.param_count());
                let (b, c) = rest.split_at(quantum.params.len());
                pre.set_params(a)?;
                quantum.params.copy_from_slice(b);
                post.set_params(c)?;
            }
        }
        Ok(())
    }

    /// Forward pass with optional spliced gates. `rng` feeds shot sampling.
    pub fn forward(
        &self,
        board: &Board,
        insert: &Insertions,
        rng: &mut dyn RngCore,
    ) -> Result<Tape, EngineError> {
        let x = board.encode();
        let mut tape = Tape {
            classical: None,
            pre: None,
            post: None,
            circuit_inputs: Vec::new(),
            realized: None,
            values: [0.0; 9],
        };
        let out: Vec<f64> = match &self.model {
            Model::Classical(net) => {
                let (out, cache) = net.forward(&Tensor::board_plane(x))?;
                tape.classical = Some(cache);
                out.data
            }
            Model::Quantum(q) => {
                let inputs = q.circuit_inputs(&x);
                let out = self.run_quantum(q, &inputs, insert, &mut tape, rng)?;
                tape.circuit_inputs = inputs;
                out
            }
            Model::Hybrid { pre, quantum, post } => {
                let (h, pre_cache) = pre.forward(&Tensor::vector(x.to_vec()))?;
                let inputs = quantum.circuit_inputs(&h.data);
                let qout = self.run_quantum(quantum, &inputs, insert, &mut tape, rng)?;
                tape.circuit_inputs = inputs;
                let (out, post_cache) = post.forward(&Tensor::vector(qout))?;
                tape.pre = Some(pre_cache);
                tape.post = Some(post_cache);
                out.data
            }
        };
        tape.values = out
            .try_into()
            .map_err(|v: Vec<f64>| EngineError::InvalidSpec(format!("{} outputs", v.len())))?;
        Ok(tape)
    }

    fn run_quantum(
        &self,
        q: &QuantumLayer,
        inputs: &[f64],
        insert: &Insertions,
        tape: &mut Tape,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>, EngineError> {
        let realized = (!insert.is_empty()).then(|| q.realize(insert));
        let circuit = realized.as_ref().unwrap_or(&q.circuit);
        let state = qsim::run(circuit, inputs, &q.params)?;
        let out = qsim::measure(&state, &q.readout, self.sampling, rng)?;
        tape.realized = realized;
        Ok(out)
    }

    /// Gradient of `grad_out · values` with respect to [`Engine::params`].
    pub fn backward(
        &self,
        tape: &Tape,
        grad_out: &[f64; 9],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>, EngineError> {
        let missing = || EngineError::InvalidSpec("tape does not match engine".into());
        match &self.model {
            Model::Classical(net) => {
                let cache = tape.classical.as_ref().ok_or_else(missing)?;
                Ok(net.backward(cache, grad_out)?.params)
            }
            Model::Quantum(q) => {
                let circuit = tape.realized.as_ref().unwrap_or(&q.circuit);
                let g = qsim::readout_vjp(
                    circuit,
                    &tape.circuit_inputs,
                    &q.params,
                    &q.readout,
                    self.sampling,
                    grad_out,
                    false,
                    rng,
                )?;
                Ok(g.params)
            }
            Model::Hybrid { pre, quantum, post } => {
                let post_cache = tape.post.as_ref().ok_or_else(missing)?;
                let pre_cache = tape.pre.as_ref().ok_or_else(missing)?;
                let post_g = post.backward(post_cache, grad_out)?;
                let circuit = tape.realized.as_ref().unwrap_or(&quantum.circuit);
                let qg = qsim::readout_vjp(
                    circuit,
                    &tape.circuit_inputs,
                    &quantum.params,
                    &quantum.readout,
                    self.sampling,
                    &post_g.input,
                    true,
                    rng,
                )?;
                let pre_g = pre.backward(pre_cache, &qg.inputs)?;
                let mut out = pre_g.params;
                out.extend(qg.params);
                out.extend(post_g.params);
                Ok(out)
            }
        }
    }

    /// Action values under the engine's sampling mode.
    pub fn evaluate_with(&self, board: &Board, rng: &mut dyn RngCore) -> [f64; 9] {
        self.forward(board, &Insertions::none(), rng)
            .expect("a built engine accepts every board")
            .values
    }

    /// Action values; deterministic in exact mode. Shot mode draws from a
    /// stream seeded by the engine seed.
    pub fn evaluate(&self, board: &Board) -> [f64; 9] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        self.evaluate_with(board, &mut rng)
    }
}

/// Anything that assigns nine action values to a position.
pub trait QFunction: Send + Sync {
    fn q_values(&self, board: &Board, rng: &mut dyn RngCore) -> [f64; 9];
}

impl QFunction for Engine {
    fn q_values(&self, board: &Board, rng: &mut dyn RngCore) -> [f64; 9] {
        self.evaluate_with(board, rng)
    }
}

/// Index of the largest value among `legal`, lowest index on ties.
pub fn argmax_legal(values: &[f64; 9], legal: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &c in legal {
        match best {
            Some(b) if values[c] <= values[b] => {}
            _ => best = Some(c),
        }
    }
    best
}

/// ε-greedy choice: a uniform legal move with probability `epsilon`, otherwise
/// the best legal cell by value.
pub fn select_move<Q: QFunction + ?Sized>(
    q: &Q,
    board: &Board,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<usize, EngineError> {
    let legal = board.legal_moves();
    if legal.is_empty() {
        return Err(EngineError::NoLegalMoves(*board));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(legal[rng.random_range(0..legal.len())]);
    }
    let values = q.q_values(board, rng);
    Ok(argmax_legal(&values, &legal).expect("legal moves are non-empty"))
}

const CHECKPOINT_FORMAT: &str = "qttt-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumDescriptor {
    pub embedding: EmbeddingKind,
    pub ansatz: AnsatzKind,
    pub qubits: usize,
    pub readout: Readout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pre: Vec<LayerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumDescriptor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post: Vec<LayerKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// One flat array per classical layer in declaration order (pre, then post).
    pub pre: Vec<Vec<f64>>,
    pub quantum: Vec<f64>,
    pub post: Vec<Vec<f64>>,
}

/// On-disk engine document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: String,
    pub seed: u64,
    pub architecture: Architecture,
    pub weights: Weights,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

fn layer_weights(net: &Network) -> Vec<Vec<f64>> {
    net.layers().iter().map(|l| l.weights().to_vec()).collect()
}

fn load_layers(net: &mut Network, arrays: &[Vec<f64>]) -> Result<(), EngineError> {
    if arrays.len() != net.layers().len() {
        return Err(EngineError::CorruptCheckpoint(format!(
            "expected {} layer arrays, found {}",
            net.layers().len(),
            arrays.len()
        )));
    }
    let flat: Vec<f64> = arrays.concat();
    for (l, a) in net.layers().iter().zip(arrays) {
        if l.weights().len() != a.len() {
            return Err(EngineError::CorruptCheckpoint(format!(
                "layer {:?} expects {} weights, found {}",
                l.kind(),
                l.weights().len(),
                a.len()
            )));
        }
    }
    if flat.iter().any(|w| !w.is_finite()) {
        return Err(EngineError::CorruptCheckpoint("non-finite weight".into()));
    }
    net.set_params(&flat)?;
    Ok(())
}

impl Engine {
    fn architecture(&self) -> Architecture {
        let descriptor = |q: &QuantumLayer| {
            let (embedding, ansatz) = match self.spec.family {
                Family::QuantumOnly { embedding, ansatz }
                | Family::Hybrid {
                    embedding, ansatz, ..
                } => (embedding, ansatz),
                Family::Classical(_) => unreachable!("classical engines carry no circuit"),
            };
            QuantumDescriptor {
                embedding,
                ansatz,
                qubits: q.num_qubits(),
                readout: q.readout.clone(),
            }
        };
        match &self.model {
            Model::Classical(n) => Architecture {
                pre: n.architecture(),
                quantum: None,
                post: Vec::new(),
            },
            Model::Quantum(q) => Architecture {
                pre: Vec::new(),
                quantum: Some(descriptor(q)),
                post: Vec::new(),
            },
            Model::Hybrid { pre, quantum, post } => Architecture {
                pre: pre.architecture(),
                quantum: Some(descriptor(quantum)),
                post: post.architecture(),
            },
        }
    }

    pub fn to_checkpoint(&self, metadata: serde_json::Map<String, serde_json::Value>) -> Checkpoint {
        let weights = match &self.model {
            Model::Classical(n) => Weights {
                pre: layer_weights(n),
                quantum: Vec::new(),
                post: Vec::new(),
            },
            Model::Quantum(q) => Weights {
                pre: Vec::new(),
                quantum: q.params.clone(),
                post: Vec::new(),
            },
            Model::Hybrid { pre, quantum, post } => Weights {
                pre: layer_weights(pre),
                quantum: quantum.params.clone(),
                post: layer_weights(post),
            },
        };
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            spec: self.spec.key(),
            seed: self.spec.seed,
            architecture: self.architecture(),
            weights,
            metadata,
        }
    }

    /// Pretty JSON; floats round-trip exactly.
    pub fn checkpoint_save(&self, metadata: serde_json::Map<String, serde_json::Value>) -> String {
        serde_json::to_string_pretty(&self.to_checkpoint(metadata))
            .expect("checkpoint serialization cannot fail")
    }

    /// Rebuilds an engine. With `expected`, the stored spec key must match.
    pub fn checkpoint_load(document: &str, expected: Option<&str>) -> Result<Engine, EngineError> {
        let cp: Checkpoint = serde_json::from_str(document)
            .map_err(|e| EngineError::CorruptCheckpoint(e.to_string()))?;
        Self::from_checkpoint(&cp, expected)
    }

    pub fn from_checkpoint(cp: &Checkpoint, expected: Option<&str>) -> Result<Engine, EngineError> {
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(EngineError::CorruptCheckpoint(format!(
                "unsupported format {} v{}",
                cp.format, cp.version
            )));
        }
        if let Some(exp) = expected {
            if exp != cp.spec {
                return Err(EngineError::SpecMismatch {
                    expected: exp.to_string(),
                    found: cp.spec.clone(),
                });
            }
        }
        let spec = EngineSpec::parse(&cp.spec, cp.seed)
            .map_err(|e| EngineError::CorruptCheckpoint(e.to_string()))?;
        let mut engine = build_engine(spec)?;
        if engine.architecture() != cp.architecture {
            return Err(EngineError::CorruptCheckpoint(
                "architecture does not match the spec".into(),
            ));
        }
        match &mut engine.model {
            Model::Classical(n) => load_layers(n, &cp.weights.pre)?,
            Model::Quantum(q) => load_quantum(q, &cp.weights.quantum)?,
            Model::Hybrid { pre, quantum, post } => {
                load_layers(pre, &cp.weights.pre)?;
                load_quantum(quantum, &cp.weights.quantum)?;
                load_layers(post, &cp.weights.post)?;
            }
        }
        Ok(engine)
    }
}

fn load_quantum(q: &mut QuantumLayer, params: &[f64]) -> Result<(), EngineError> {
    if params.len() != q.params.len() || params.iter().any(|p| !p.is_finite()) {
        return Err(EngineError::CorruptCheckpoint(format!(
            "quantum layer expects {} finite parameters, found {}",
            q.params.len(),
            params.len()
        )));
    }
    q.params.copy_from_slice(params);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(key: &str) -> EngineSpec {
        EngineSpec::parse(key, 3).unwrap()
    }

    #[test]
    fn census() {
        let specs = all_specs(0);
        assert_eq!(specs.len(), 54);
        let count = |f: &dyn Fn(&Family) -> bool| specs.iter().filter(|s| f(&s.family)).count();
        assert_eq!(count(&|f| matches!(f, Family::Classical(_))), 2);
        assert_eq!(
            count(&|f| matches!(f, Family::QuantumOnly { ansatz, .. } if *ansatz != AnsatzKind::Qcnn)),
            8
        );
        assert_eq!(
            count(&|f| matches!(f, Family::QuantumOnly { ansatz: AnsatzKind::Qcnn, .. })),
            4
        );
        assert_eq!(
            count(&|f| matches!(f, Family::Hybrid { ansatz, .. } if *ansatz != AnsatzKind::Qcnn)),
            32
        );
        assert_eq!(
            count(&|f| matches!(f, Family::Hybrid { ansatz: AnsatzKind::Qcnn, .. })),
            8
        );
        let mut keys: Vec<String> = specs.iter().map(|s| s.key()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 54);
    }

    #[test]
    fn keys_round_trip() {
        for s in all_specs(9) {
            assert_eq!(EngineSpec::parse(&s.key(), s.seed).unwrap(), s);
        }
        assert!(EngineSpec::parse("hnn-smp-8-hee-qcnn", 0).is_err());
        assert!(EngineSpec::parse("hnn-est-12-hee-realamplitudes", 0).is_err());
        assert!(EngineSpec::parse("qnn-18-hee-realamplitudes", 0).is_err());
        assert!(EngineSpec::parse("dqn", 0).is_err());
    }

    #[test]
    fn classical_param_examples() {
        let e = build_engine(spec("hnn-est-16-hee-realamplitudes")).unwrap();
        assert_eq!(e.classical_param_count(), 313);
        let e = build_engine(spec("hnn-smp-8-tpe-realamplitudes")).unwrap();
        assert_eq!(e.classical_param_count(), 2393);
        let e = build_engine(spec("hnn-est-8-zfeaturemap-qcnn")).unwrap();
        assert_eq!(e.classical_param_count(), 125);
        assert_eq!(e.quantum_param_count(), 36);
    }

    #[test]
    fn zero_weight_classical_outputs_zero() {
        let mut e = build_engine(spec("ccnn-weaker")).unwrap();
        let zeros = vec![0.0; e.param_count()];
        e.set_params(&zeros).unwrap();
        let b: Board = "X...O....O".parse().unwrap();
        assert_eq!(e.evaluate(&b), [0.0; 9]);
    }

    #[test]
    fn tpe_qnn_zero_params_empty_board() {
        let mut e = build_engine(spec("qnn-9-tpe-efficientsu2")).unwrap();
        e.set_params(&vec![0.0; e.param_count()]).unwrap();
        let v = e.evaluate(&Board::new());
        for x in v {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_small_engine_outputs_nine_bounded_values() {
        let board: Board = "O.X.O...XX".parse().unwrap();
        for s in all_specs(1) {
            if s.qubits().unwrap_or(0) > 9 {
                continue;
            }
            let e = build_engine(s).unwrap();
            let v = e.evaluate(&board);
            assert!(v.iter().all(|x| x.is_finite() && x.abs() <= 1.0), "{}", s.key());
        }
    }

    struct Fixed([f64; 9]);
    impl QFunction for Fixed {
        fn q_values(&self, _: &Board, _: &mut dyn RngCore) -> [f64; 9] {
            self.0
        }
    }

    #[test]
    fn select_move_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut v = [0.0; 9];
        v[4] = 1.0;
        assert_eq!(select_move(&Fixed(v), &Board::new(), 0.0, &mut rng).unwrap(), 4);

        let b = Board::new().apply_move(4).unwrap();
        v[7] = 0.5;
        assert_eq!(select_move(&Fixed(v), &b, 0.0, &mut rng).unwrap(), 7);

        // ties go to the lowest index
        assert_eq!(select_move(&Fixed([0.2; 9]), &b, 0.0, &mut rng).unwrap(), 0);

        let pick = |seed| {
            select_move(&Fixed(v), &b, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        assert_eq!(pick(42), pick(42));
        let over: Board = "OOOXX....X".parse().unwrap();
        assert!(matches!(
            select_move(&Fixed(v), &over, 0.0, &mut rng),
            Err(EngineError::NoLegalMoves(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let e = build_engine(spec("hnn-est-8-hee-realamplitudes")).unwrap();
        let doc = e.checkpoint_save(Default::default());
        let back = Engine::checkpoint_load(&doc, Some("hnn-est-8-hee-realamplitudes")).unwrap();
        assert_eq!(back, e);
        let b: Board = "O...X....O".parse().unwrap();
        assert_eq!(back.evaluate(&b), e.evaluate(&b));

        assert!(matches!(
            Engine::checkpoint_load(&doc[..doc.len() / 2], None),
            Err(EngineError::CorruptCheckpoint(_))
        ));

        let smp = build_engine(spec("hnn-smp-8-hee-realamplitudes")).unwrap();
        let doc = smp.checkpoint_save(Default::default());
        assert!(matches!(
            Engine::checkpoint_load(&doc, Some("hnn-est-8-hee-realamplitudes")),
            Err(EngineError::SpecMismatch { .. })
        ));

        let mut cp = e.to_checkpoint(Default::default());
        cp.weights.quantum.pop();
        assert!(matches!(
            Engine::from_checkpoint(&cp, None),
            Err(EngineError::CorruptCheckpoint(_))
        ));
    }
}
