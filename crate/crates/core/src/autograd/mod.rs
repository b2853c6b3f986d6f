//! A small dense-tensor engine with reverse-mode differentiation.
//!
//! Computation is recorded on a [`Tape`] as it executes; [`Tape::backward`]
//! then walks the record in exact reverse order. Trainable values live in
//! [`Tensor`]s outside the tape and are copied in as leaves for each step.
//!
//! Everything is generic over [`Scalar`] so gradient checks can run in `f64`
//! while training runs in `f32`.

pub mod check;
mod optim;
mod tape;

pub use check::{gradient_check, GradCheck};
pub use optim::{clip_global_norm, Adam, Optimizer, Sgd};
pub use tape::{Tape, Var};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type of tensors.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + AddAssign + Send + Sync + 'static
{
    /// Name recorded in checkpoint manifests.
    const DTYPE: &'static str;
    const BYTES: usize;

    /// `c = alpha * a * b + beta * c` on strided row/column layouts.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn write_le(values: &[Self], out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Vec<Self>;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

fn check_gemm_bounds<T>(rows: usize, cols: usize, strides: (isize, isize), buf: &[T]) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * strides.0 + (cols as isize - 1) * strides.1;
    assert!(
        strides.0 >= 0 && strides.1 >= 0 && (last as usize) < buf.len(),
        "gemm operand out of bounds"
    );
}

macro_rules! impl_scalar {
    ($t:ty, $name:literal, $gemm:path) => {
        impl Scalar for $t {
            const DTYPE: &'static str = $name;
            const BYTES: usize = std::mem::size_of::<$t>();

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                check_gemm_bounds(m, k, a_strides, a);
                check_gemm_bounds(k, n, b_strides, b);
                check_gemm_bounds(m, n, c_strides, c);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index touched by the kernel was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }

            fn write_le(values: &[Self], out: &mut Vec<u8>) {
                out.reserve(values.len() * Self::BYTES);
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }

            fn read_le(bytes: &[u8]) -> Vec<Self> {
                bytes
                    .chunks_exact(Self::BYTES)
                    .map(|c| <$t>::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            }
        }
    };
}

impl_scalar!(f32, "f32", matrixmultiply::sgemm);
impl_scalar!(f64, "f64", matrixmultiply::dgemm);

/// A shaped array with a same-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Vec<T>,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if numel(&shape) != values.len() {
            return Err(Error::Shape(format!(
                "{} values do not fill shape {shape:?}",
                values.len()
            )));
        }
        let grad = vec![T::zero(); values.len()];
        Ok(Self {
            shape,
            values,
            grad,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel(&shape);
        Self {
            shape,
            values: vec![T::zero(); n],
            grad: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.to_f64().unwrap())).collect();
        Tensor {
            shape: self.shape.clone(),
            values: conv(&self.values),
            grad: conv(&self.grad),
        }
    }
}
