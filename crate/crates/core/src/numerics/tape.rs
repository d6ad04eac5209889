//! Tensor-level reverse-mode differentiation.
//!
//! Every operation appends a node holding its output value. Nodes only refer
//! to earlier nodes, so a single reverse sweep from the loss visits inputs after
//! all of their consumers.

use std::fmt;

use super::conv::{conv_backward, conv_forward, ConvGeometry, Padding};
use super::tensor::RealTensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Local derivative rule for operations defined outside this module.
///
/// `backward` receives the input values, the node's output value and the
/// upstream gradient, and returns one optional gradient per input.
pub trait Backward: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[&RealTensor], output: &RealTensor, grad: &RealTensor) -> Vec<Option<RealTensor>>;
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Mean(Var),
    Sum(Var),
    WeightedSum(Vec<(Var, f64)>),
    Reshape(Var),
    Transpose(Var),
    Select(Var, usize),
    BiasAdd { x: Var, bias: Var, inner: usize },
    Conv { input: Var, kernel: Var, geo: ConvGeometry },
    Custom { inputs: Vec<Var>, rule: Box<dyn Backward> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::Mean(..) => "mean",
            Op::Sum(..) => "sum",
            Op::WeightedSum(..) => "weighted_sum",
            Op::Reshape(..) => "reshape",
            Op::Transpose(..) => "transpose",
            Op::Select(..) => "select",
            Op::BiasAdd { .. } => "bias_add",
            Op::Conv { .. } => "conv",
            Op::Custom { rule, .. } => rule.name(),
        }
    }
}

struct Node {
    value: RealTensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of tensor operations.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.nodes.iter().map(|n| (n.op.name(), n.value.shape())))
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &RealTensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: RealTensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Leaf that gradients are computed for.
    pub fn param(&mut self, value: RealTensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation; everything computed only from
    /// constants is skipped by the backward sweep.
    pub fn constant(&mut self, value: RealTensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let out = RealTensor::scalar(self.value(a).mean());
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Mean(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = RealTensor::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    /// `Σ cᵢ·xᵢ` over equally shaped terms, accumulated in the given order.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let (first, _) = *terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("weighted_sum of zero terms".into()))?;
        let mut out = RealTensor::zeros(self.shape(first));
        for &(v, c) in terms {
            let value = self.value(v);
            out.ensure_same_shape(value, "weighted_sum")?;
            for (o, x) in out.data_mut().iter_mut().zip(value.data()) {
                *o += c * x;
            }
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let rg = self.any_grad(&vars);
        Ok(self.push(out, Op::WeightedSum(terms.to_vec()), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    /// Slab `index` along the leading axis.
    pub fn select(&mut self, a: Var, index: usize) -> Result<Var> {
        let out = self.value(a).select(index)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Select(a, index), rg))
    }

    /// Adds `bias[c]` to every element of channel `c`. `x` is `C×…` or
    /// `B×C×…` when `batched`.
    pub fn bias_add(&mut self, x: Var, bias: Var, batched: bool) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let bs = self.shape(bias).to_vec();
        let axis = usize::from(batched);
        if bs.len() != 1 || xs.len() <= axis || xs[axis] != bs[0] {
            return Err(Error::mismatch("bias_add", &xs, &bs));
        }
        let inner: usize = xs[axis + 1..].iter().product();
        let mut out = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for (i, chunk) in out.data_mut().chunks_mut(inner).enumerate() {
            let bv = b[i % b.len()];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
        let rg = self.any_grad(&[x, bias]);
        Ok(self.push(out, Op::BiasAdd { x, bias, inner }, rg))
    }

    /// "Same" convolution (cross-correlation) of `signal` with `kernel`; see
    /// [`ConvGeometry::resolve`] for accepted shapes.
    pub fn conv(&mut self, signal: Var, kernel: Var, stride: usize, padding: Padding) -> Result<Var> {
        let geo = ConvGeometry::resolve(self.shape(signal), self.shape(kernel), stride, padding)?;
        let data = conv_forward(self.value(signal).data(), self.value(kernel).data(), &geo);
        let out = RealTensor::new(geo.output_shape(), data)?;
        let rg = self.any_grad(&[signal, kernel]);
        Ok(self.push(
            out,
            Op::Conv {
                input: signal,
                kernel,
                geo,
            },
            rg,
        ))
    }

    /// Records an operation whose forward value was computed by the caller.
    pub fn custom(&mut self, inputs: &[Var], value: RealTensor, rule: Box<dyn Backward>) -> Var {
        let rg = self.any_grad(inputs);
        self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                rule,
            },
            rg,
        )
    }

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if root.value.numel() != 1 {
            return Err(Error::shape("backward", root.value.shape(), "loss must be a scalar"));
        }
        let mut grads: Vec<Option<RealTensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(RealTensor::full(root.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            for (input, contribution) in self.local_grads(node, &g) {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node, g: &RealTensor) -> Vec<(Var, RealTensor)> {
        let val = |v: &Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
            Op::Mul(a, b) => {
                let ga = g.zip_map(val(b), "mul", |gv, bv| gv * bv).expect("shape checked at forward");
                let gb = g.zip_map(val(a), "mul", |gv, av| gv * av).expect("shape checked at forward");
                vec![(*a, ga), (*b, gb)]
            }
            Op::Scale(a, c) => vec![(*a, g.map(|x| x * c))],
            Op::Relu(a) => {
                let ga = g
                    .zip_map(val(a), "relu", |gv, x| if x > 0.0 { gv } else { 0.0 })
                    .expect("shape checked at forward");
                vec![(*a, ga)]
            }
            Op::Mean(a) => {
                let n = val(a).numel() as f64;
                vec![(*a, RealTensor::full(val(a).shape(), g.data()[0] / n))]
            }
            Op::Sum(a) => vec![(*a, RealTensor::full(val(a).shape(), g.data()[0]))],
            Op::WeightedSum(terms) => terms.iter().map(|&(v, c)| (v, g.map(|x| x * c))).collect(),
            Op::Reshape(a) => vec![(*a, g.reshape(val(a).shape()).expect("same element count"))],
            Op::Transpose(a) => vec![(*a, g.transpose().expect("rank-2 gradient"))],
            Op::Select(a, index) => {
                let shape = val(a).shape();
                let mut ga = RealTensor::zeros(shape);
                let stride = g.numel();
                ga.data_mut()[index * stride..(index + 1) * stride].copy_from_slice(g.data());
                vec![(*a, ga)]
            }
            Op::BiasAdd { x, bias, inner } => {
                let channels = val(bias).numel();
                let mut gb = vec![0.0; channels];
                for (i, chunk) in g.data().chunks(*inner).enumerate() {
                    gb[i % channels] += chunk.iter().sum::<f64>();
                }
                vec![(*x, g.clone()), (*bias, RealTensor::new(vec![channels], gb).expect("bias shape"))]
            }
            Op::Conv { input, kernel, geo } => {
                let (gx, gk) = conv_backward(val(input).data(), val(kernel).data(), g.data(), geo);
                vec![
                    (*input, RealTensor::new(val(input).shape().to_vec(), gx).expect("input shape")),
                    (*kernel, RealTensor::new(val(kernel).shape().to_vec(), gk).expect("kernel shape")),
                ]
            }
            Op::Custom { inputs, rule } => {
                let values: Vec<&RealTensor> = inputs.iter().map(val).collect();
                let out = rule.backward(&values, &node.value, g);
                debug_assert_eq!(out.len(), inputs.len(), "{}: one gradient slot per input", rule.name());
                inputs
                    .iter()
                    .zip(out)
                    .filter_map(|(&v, gv)| gv.map(|gv| (v, gv)))
                    .collect()
            }
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<RealTensor>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&RealTensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, materialising zeros for unreachable nodes.
    pub fn wrt(&self, tape: &Tape, v: Var) -> RealTensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| RealTensor::zeros(tape.shape(v)))
    }
}
