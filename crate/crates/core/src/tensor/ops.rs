use rand::Rng;

use super::tape::Backward;
use super::{Element, Mode, Tape, Tensor, Var};
use crate::error::{invalid, Result};

struct AddOp;

impl<F: Element> Backward<F> for AddOp {
    fn backward(
        &self,
        _inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        needs.iter().map(|&n| n.then(|| grad.clone())).collect()
    }
}

struct MulOp;

impl<F: Element> Backward<F> for MulOp {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let times = |other: &Tensor<F>| {
            let data = grad
                .data()
                .iter()
                .zip(other.data())
                .map(|(&g, &o)| g * o)
                .collect();
            Tensor::new(grad.shape().to_vec(), data).expect("same shape")
        };
        vec![
            needs[0].then(|| times(inputs[1])),
            needs[1].then(|| times(inputs[0])),
        ]
    }
}

struct SumOp;

impl<F: Element> Backward<F> for SumOp {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        vec![Some(Tensor::full(inputs[0].shape().to_vec(), grad.item()))]
    }
}

struct ReluOp;

impl<F: Element> Backward<F> for ReluOp {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        // Subgradient at exactly zero is zero.
        let data = inputs[0]
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&x, &g)| if x > F::zero() { g } else { F::zero() })
            .collect();
        vec![Some(Tensor::new(grad.shape().to_vec(), data).expect("same shape"))]
    }
}

struct DropoutOp<F> {
    scale: Vec<F>,
}

impl<F: Element> Backward<F> for DropoutOp<F> {
    fn backward(
        &self,
        _inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let data = grad
            .data()
            .iter()
            .zip(&self.scale)
            .map(|(&g, &s)| g * s)
            .collect();
        vec![Some(Tensor::new(grad.shape().to_vec(), data).expect("same shape"))]
    }
}

struct LogSoftmaxOp {
    classes: usize,
}

impl<F: Element> Backward<F> for LogSoftmaxOp {
    fn backward(
        &self,
        _inputs: &[&Tensor<F>],
        output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let mut out = vec![F::zero(); grad.numel()];
        for ((dst, lp), g) in out
            .chunks_mut(self.classes)
            .zip(output.data().chunks(self.classes))
            .zip(grad.data().chunks(self.classes))
        {
            let total: F = g.iter().copied().sum();
            for ((d, &l), &gi) in dst.iter_mut().zip(lp).zip(g) {
                *d = gi - l.exp() * total;
            }
        }
        vec![Some(Tensor::new(grad.shape().to_vec(), out).expect("same shape"))]
    }
}

struct SwapLastAxesOp {
    batch: usize,
    rows: usize,
    cols: usize,
}

fn swap_last_axes_data<F: Element>(data: &[F], batch: usize, rows: usize, cols: usize) -> Vec<F> {
    let mut out = vec![F::zero(); data.len()];
    let plane = rows * cols;
    for b in 0..batch {
        let src = &data[b * plane..(b + 1) * plane];
        let dst = &mut out[b * plane..(b + 1) * plane];
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }
    out
}

impl<F: Element> Backward<F> for SwapLastAxesOp {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        // Output plane is cols×rows; swapping back restores rows×cols.
        let data = swap_last_axes_data(grad.data(), self.batch, self.cols, self.rows);
        vec![Some(Tensor::new(inputs[0].shape().to_vec(), data).expect("same numel"))]
    }
}

struct MaskTimeOp {
    lengths: Vec<usize>,
}

fn mask_time_in_place<F: Element>(data: &mut [F], shape: &[usize], lengths: &[usize]) {
    let (channels, steps) = (shape[1], shape[2]);
    for (n, &len) in lengths.iter().enumerate() {
        for c in 0..channels {
            let row = &mut data[(n * channels + c) * steps..(n * channels + c + 1) * steps];
            row[len.min(steps)..].fill(F::zero());
        }
    }
}

impl<F: Element> Backward<F> for MaskTimeOp {
    fn backward(
        &self,
        _inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let mut g = grad.clone();
        let shape = g.shape().to_vec();
        mask_time_in_place(g.data_mut(), &shape, &self.lengths);
        vec![Some(g)]
    }
}

struct ExternalLossOp<F> {
    grad: Tensor<F>,
}

impl<F: Element> Backward<F> for ExternalLossOp<F> {
    fn backward(
        &self,
        _inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        _needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let upstream = grad.item();
        vec![Some(self.grad.map(|g| g * upstream))]
    }
}

impl<F: Element> Tape<F> {
    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(invalid(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.record(out, vec![a, b], Box::new(AddOp)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.record(out, vec![a, b], Box::new(MulOp)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self
            .value(a)
            .data()
            .iter()
            .fold(0.0f64, |acc, &x| acc + x.as_f64());
        self.record(Tensor::scalar(F::from_f64(total)), vec![a], Box::new(SumOp))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > F::zero() { x } else { F::zero() });
        self.record(out, vec![a], Box::new(ReluOp))
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f32,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        if mode == Mode::Infer || rate == 0.0 {
            return Ok(a);
        }
        let keep = F::from_f64(1.0 / (1.0 - rate as f64));
        let scale: Vec<F> = (0..self.value(a).numel())
            .map(|_| {
                if rng.random::<f32>() < rate {
                    F::zero()
                } else {
                    keep
                }
            })
            .collect();
        let src = self.value(a);
        let data = src
            .data()
            .iter()
            .zip(&scale)
            .map(|(&x, &s)| x * s)
            .collect();
        let out = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.record(out, vec![a], Box::new(DropoutOp { scale })))
    }

    /// Log-softmax over the last axis, stabilized by max subtraction.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let classes = *src.shape().last().expect("rank >= 1");
        let mut out = src.clone();
        for row in out.data_mut().chunks_mut(classes) {
            let max = row.iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|x| (x.as_f64() - max).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x = F::from_f64(x.as_f64() - max - lse);
            }
        }
        self.record(out, vec![a], Box::new(LogSoftmaxOp { classes }))
    }

    /// `[.., A, B] -> [.., B, A]` for rank-2 or rank-3 tensors.
    pub fn swap_last_axes(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let (batch, rows, cols, out_shape) = match shape.as_slice() {
            [r, c] => (1, *r, *c, vec![*c, *r]),
            [n, r, c] => (*n, *r, *c, vec![*n, *c, *r]),
            _ => return Err(invalid(format!("swap_last_axes on rank {}", shape.len()))),
        };
        let data = swap_last_axes_data(self.value(a).data(), batch, rows, cols);
        let out = Tensor::new(out_shape, data)?;
        Ok(self.record(out, vec![a], Box::new(SwapLastAxesOp { batch, rows, cols })))
    }

    /// Zeroes `[N, C, T]` positions at or beyond each sample's length.
    pub fn mask_time(&mut self, a: Var, lengths: &[usize]) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        if shape.len() != 3 || shape[0] != lengths.len() {
            return Err(invalid(format!(
                "mask_time expects [N, C, T] with N = {}, got {shape:?}",
                lengths.len()
            )));
        }
        if lengths.iter().all(|&l| l >= shape[2]) {
            return Ok(a);
        }
        let mut out = self.value(a).clone();
        mask_time_in_place(out.data_mut(), &shape, lengths);
        Ok(self.record(
            out,
            vec![a],
            Box::new(MaskTimeOp {
                lengths: lengths.to_vec(),
            }),
        ))
    }

    /// Attaches a scalar computed outside the tape whose gradient with
    /// respect to `a` is already known.
    pub fn external_loss(&mut self, a: Var, value: f64, grad: Tensor<F>) -> Result<Var> {
        if grad.shape() != self.value(a).shape() {
            return Err(invalid(format!(
                "loss gradient shape {:?} does not match input {:?}",
                grad.shape(),
                self.value(a).shape()
            )));
        }
        Ok(self.record(
            Tensor::scalar(F::from_f64(value)),
            vec![a],
            Box::new(ExternalLossOp { grad }),
        ))
    }
}
