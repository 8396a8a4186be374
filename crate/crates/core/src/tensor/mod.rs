//! Dense tensors with reverse-mode automatic differentiation.
//!
//! Tensors are immutable after creation except for two sanctioned mutations:
//! gradient buffers (filled by [`Tensor::backward`]) and in-place parameter
//! updates between optimization steps (via [`Tensor::data_mut`], leaves
//! only). A graph and its tensors belong to one execution context at a time;
//! kernels parallelize internally over raw buffers.

pub mod adam;
pub(crate) mod gemm;
pub mod ops;

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Backward function: given the output cotangent and the op context, return
/// one optional gradient buffer per parent (None when the parent does not
/// track gradients).
pub(crate) type BackwardFn<T> = Box<dyn Fn(&OpCtx<'_, T>) -> Vec<Option<Vec<T>>>>;

pub(crate) struct OpCtx<'a, T: Scalar> {
    pub out_grad: &'a [T],
    pub out_data: &'a [T],
    pub parents: &'a [Tensor<T>],
}

pub(crate) struct Op<T: Scalar> {
    pub parents: Vec<Tensor<T>>,
    pub backward: BackwardFn<T>,
}

struct Inner<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: bool,
    track: bool,
    op: RefCell<Option<Op<T>>>,
    freed: Cell<bool>,
}

/// A node of the computation graph. Cloning is a cheap handle copy.
pub struct Tensor<T: Scalar = f32> {
    inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    fn new_inner(
        shape: Vec<usize>,
        data: Vec<T>,
        requires_grad: bool,
        track: bool,
        op: Option<Op<T>>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                track,
                op: RefCell::new(op),
                freed: Cell::new(false),
            }),
        }
    }

    /// Leaf tensor that does not participate in differentiation.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid_argument(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self::new_inner(shape.to_vec(), data, false, false, None))
    }

    /// Leaf parameter: receives a gradient on backward.
    pub fn param(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid_argument(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self::new_inner(shape.to_vec(), data, true, true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::new_inner(shape.to_vec(), vec![T::zero(); n], false, false, None)
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let n = shape.iter().product();
        Self::new_inner(shape.to_vec(), vec![v; n], false, false, None)
    }

    pub fn scalar(v: T) -> Self {
        Self::new_inner(vec![1], vec![v], false, false, None)
    }

    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Self {
        let track = op.parents.iter().any(|p| p.tracks());
        let op = if track { Some(op) } else { None };
        Self::new_inner(shape, data, false, track, op)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Whether this node participates in the autodiff graph.
    pub fn tracks(&self) -> bool {
        self.inner.track
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.op.borrow().is_none()
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    /// Mutable access to the raw buffer. Only leaves may be mutated; interior
    /// nodes are owned by the graph that produced them.
    pub fn data_mut(&self) -> RefMut<'_, Vec<T>> {
        assert!(
            self.is_leaf(),
            "data_mut on a non-leaf tensor; interior values are immutable"
        );
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Current accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    /// New leaf sharing no graph history (data copied, gradients dropped).
    pub fn detach(&self) -> Tensor<T> {
        Self::new_inner(
            self.inner.shape.clone(),
            self.inner.data.borrow().clone(),
            false,
            false,
            None,
        )
    }

    /// Severs the backward graph reachable from this tensor and marks every
    /// interior node freed. Frees memory promptly for long unrolls and makes
    /// later `backward` calls fail instead of silently misbehaving. Also used
    /// internally to avoid deep recursive drops of long graph chains.
    pub fn free_graph(&self) {
        let mut stack = vec![self.clone()];
        let mut seen = HashSet::new();
        while let Some(t) = stack.pop() {
            if !seen.insert(t.inner.id) {
                continue;
            }
            let op = t.inner.op.borrow_mut().take();
            if let Some(op) = op {
                t.inner.freed.set(true);
                stack.extend(op.parents.into_iter());
            }
        }
    }

    /// Interpret as a 4-D (batch, channel, height, width) tensor.
    pub fn dim4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.inner.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            other => Err(Error::invalid_argument(format!(
                "expected 4-D tensor, got shape {other:?}"
            ))),
        }
    }

    pub fn assert_finite(&self, context: &str) -> Result<()> {
        if self.inner.data.borrow().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid_data(format!(
                "non-finite value produced by {context}"
            )))
        }
    }

    fn accumulate_leaf_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (b, v) in buf.iter_mut().zip(g) {
                    *b += *v;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar loss. Every `requires_grad` leaf
    /// reachable from `self` accumulates dLoss/dLeaf into its grad buffer;
    /// repeated calls without [`Tensor::zero_grad`] keep accumulating.
    pub fn backward(&self) -> Result<()> {
        if self.inner.freed.get() {
            return Err(Error::GraphFreed);
        }
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.inner.shape.clone()));
        }

        // Iterative post-order DFS; the reversed order visits every node
        // before its parents.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.inner.id) {
                continue;
            }
            if node.inner.freed.get() {
                return Err(Error::GraphFreed);
            }
            stack.push((node.clone(), true));
            if let Some(op) = node.inner.op.borrow().as_ref() {
                for p in &op.parents {
                    if p.tracks() && !visited.contains(&p.inner.id) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }

        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.inner.id, vec![T::one()]);
        for node in order.iter().rev() {
            let Some(g) = grads.remove(&node.inner.id) else {
                continue;
            };
            if node.inner.requires_grad {
                node.accumulate_leaf_grad(&g);
            }
            let op_ref = node.inner.op.borrow();
            if let Some(op) = op_ref.as_ref() {
                let data = node.inner.data.borrow();
                let ctx = OpCtx {
                    out_grad: &g,
                    out_data: &data,
                    parents: &op.parents,
                };
                let contribs = (op.backward)(&ctx);
                debug_assert_eq!(contribs.len(), op.parents.len());
                for (p, c) in op.parents.iter().zip(contribs) {
                    let Some(c) = c else { continue };
                    debug_assert_eq!(c.len(), p.numel());
                    match grads.entry(p.inner.id) {
                        std::collections::hash_map::Entry::Occupied(mut e) => {
                            for (b, v) in e.get_mut().iter_mut().zip(&c) {
                                *b += *v;
                            }
                        }
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(c);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}


// Benchmark-only re-export; examples cannot reach pub(crate) items.
#[doc(hidden)]
pub mod gemm_bench {
    pub fn matmul_acc_pub(out: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
        super::gemm::matmul_acc(out, a, b, m, k, n)
    }
}
