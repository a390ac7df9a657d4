use super::tape::Backward;
use super::{matmul, Element, Tape, Tensor, Var};
use crate::error::{invalid, Result};

/// Output length of a "same"-padded strided convolution: `ceil(len / stride)`.
pub fn conv_output_len(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// Left padding. Even effective kernels put the extra tap on the right.
fn left_pad(kernel: usize, dilation: usize) -> usize {
    dilation * (kernel - 1) / 2
}

#[derive(Clone, Copy)]
struct Geometry {
    batch: usize,
    c_in: usize,
    steps: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    out_steps: usize,
    rank2: bool,
}

impl Geometry {
    fn cols_rows(&self) -> usize {
        self.c_in * self.kernel
    }

    fn cols_width(&self) -> usize {
        self.batch * self.out_steps
    }

    /// Visits every (column-matrix index, input index) pair that reads a real
    /// input sample; padded taps are skipped.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let pad = left_pad(self.kernel, self.dilation) as isize;
        let width = self.cols_width();
        for n in 0..self.batch {
            for ci in 0..self.c_in {
                let src_row = (n * self.c_in + ci) * self.steps;
                for k in 0..self.kernel {
                    let row = (ci * self.kernel + k) * width + n * self.out_steps;
                    let offset = (k * self.dilation) as isize - pad;
                    for t in 0..self.out_steps {
                        let src = (t * self.stride) as isize + offset;
                        if src >= 0 && (src as usize) < self.steps {
                            f(row + t, src_row + src as usize);
                        }
                    }
                }
            }
        }
    }

    fn im2col<F: Element>(&self, input: &[F]) -> Vec<F> {
        let mut cols = vec![F::zero(); self.cols_rows() * self.cols_width()];
        self.for_each_tap(|dst, src| cols[dst] = input[src]);
        cols
    }
}

struct Conv1dOp {
    geom: Geometry,
}

impl<F: Element> Backward<F> for Conv1dOp {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let g = self.geom;
        let width = g.cols_width();
        // [N, C_out, T_out] -> [C_out, N·T_out]
        let mut gmat = vec![F::zero(); g.c_out * width];
        for n in 0..g.batch {
            for c in 0..g.c_out {
                let src = &grad.data()[(n * g.c_out + c) * g.out_steps..][..g.out_steps];
                gmat[c * width + n * g.out_steps..][..g.out_steps].copy_from_slice(src);
            }
        }

        let input = inputs[0];
        let weight = inputs[1];
        let mut out = vec![None, None, None];

        if needs[1] {
            let cols = g.im2col(input.data());
            let mut dw = vec![F::zero(); g.c_out * g.cols_rows()];
            matmul(&gmat, false, &cols, true, &mut dw, g.c_out, width, g.cols_rows(), F::zero());
            out[1] = Some(Tensor::new(weight.shape().to_vec(), dw).expect("weight shape"));
        }
        if needs[2] {
            let db = gmat.chunks(width).map(|row| row.iter().copied().sum()).collect();
            out[2] = Some(Tensor::new([g.c_out], db).expect("bias shape"));
        }
        if needs[0] {
            let mut dcols = vec![F::zero(); g.cols_rows() * width];
            matmul(
                weight.data(),
                true,
                &gmat,
                false,
                &mut dcols,
                g.cols_rows(),
                g.c_out,
                width,
                F::zero(),
            );
            let mut dx = vec![F::zero(); input.numel()];
            g.for_each_tap(|col, src| dx[src] = dx[src] + dcols[col]);
            out[0] = Some(Tensor::new(input.shape().to_vec(), dx).expect("input shape"));
        }
        out
    }
}

impl<F: Element> Tape<F> {
    /// 1-D convolution with symmetric "same" zero padding.
    ///
    /// `input` is `[N, C_in, T]` (or `[C_in, T]`), `weight` is
    /// `[C_out, C_in, K]`, `bias` is `[C_out]`. The output has
    /// `ceil(T / stride)` steps.
    pub fn conv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        dilation: usize,
    ) -> Result<Var> {
        if stride == 0 || dilation == 0 {
            return Err(invalid("conv1d stride and dilation must be >= 1"));
        }
        let x = self.value(input);
        let (batch, c_in, steps, rank2) = match x.shape() {
            [c, t] => (1, *c, *t, true),
            [n, c, t] => (*n, *c, *t, false),
            s => return Err(invalid(format!("conv1d input must be rank 2 or 3, got {s:?}"))),
        };
        let (c_out, kernel) = match self.value(weight).shape() {
            [o, i, k] if *i == c_in => (*o, *k),
            s => {
                return Err(invalid(format!(
                    "conv1d weight {s:?} does not match {c_in} input channels"
                )))
            }
        };
        if self.value(bias).shape() != [c_out] {
            return Err(invalid(format!(
                "conv1d bias {:?} does not match {c_out} filters",
                self.value(bias).shape()
            )));
        }
        let geom = Geometry {
            batch,
            c_in,
            steps,
            c_out,
            kernel,
            stride,
            dilation,
            out_steps: conv_output_len(steps, stride),
            rank2,
        };

        let cols = geom.im2col(x.data());
        let width = geom.cols_width();
        let mut omat = vec![F::zero(); c_out * width];
        matmul(
            self.value(weight).data(),
            false,
            &cols,
            false,
            &mut omat,
            c_out,
            geom.cols_rows(),
            width,
            F::zero(),
        );
        drop(cols);

        let b = self.value(bias).data();
        let mut out = vec![F::zero(); omat.len()];
        for n in 0..batch {
            for c in 0..c_out {
                let dst = &mut out[(n * c_out + c) * geom.out_steps..][..geom.out_steps];
                let src = &omat[c * width + n * geom.out_steps..][..geom.out_steps];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = s + b[c];
                }
            }
        }
        let shape = if geom.rank2 {
            vec![c_out, geom.out_steps]
        } else {
            vec![batch, c_out, geom.out_steps]
        };
        let out = Tensor::new(shape, out)?;
        Ok(self.record(out, vec![input, weight, bias], Box::new(Conv1dOp { geom })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct sliding-window sum.
    fn reference(
        x: &[f64],
        c_in: usize,
        t: usize,
        w: &[f64],
        c_out: usize,
        k: usize,
        b: &[f64],
        stride: usize,
        dil: usize,
    ) -> Vec<f64> {
        let pad = (dil * (k - 1) / 2) as isize;
        let t_out = t.div_ceil(stride);
        let mut out = vec![0.0; c_out * t_out];
        for o in 0..c_out {
            for s in 0..t_out {
                let mut acc = b[o];
                for i in 0..c_in {
                    for j in 0..k {
                        let pos = (s * stride) as isize + (j * dil) as isize - pad;
                        if pos >= 0 && (pos as usize) < t {
                            acc += x[i * t + pos as usize] * w[(o * c_in + i) * k + j];
                        }
                    }
                }
                out[o * t_out + s] = acc;
            }
        }
        out
    }

    fn run(x: Tensor<f64>, w: Tensor<f64>, b: Tensor<f64>, stride: usize, dil: usize) -> Tensor<f64> {
        let mut tape = Tape::new();
        let (x, w, b) = (tape.constant(x), tape.constant(w), tape.constant(b));
        let y = tape.conv1d(x, w, b, stride, dil).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn identity_kernel() {
        let y = run(
            Tensor::from_f64([1, 3], &[1.0, 2.0, 3.0]).unwrap(),
            Tensor::from_f64([1, 1, 1], &[1.0]).unwrap(),
            Tensor::zeros([1]),
            1,
            1,
        );
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn strided_box_filter() {
        let y = run(
            Tensor::from_f64([1, 4], &[1.0; 4]).unwrap(),
            Tensor::from_f64([1, 1, 3], &[1.0; 3]).unwrap(),
            Tensor::zeros([1]),
            2,
            1,
        );
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[2.0, 3.0]);
    }

    #[test]
    fn stride_two_halves_forty() {
        let y = run(
            Tensor::zeros([2, 40]),
            Tensor::zeros([3, 2, 3]),
            Tensor::zeros([3]),
            2,
            1,
        );
        assert_eq!(y.shape(), &[3, 20]);
    }

    #[test]
    fn length_law_holds() {
        for t in 1..=100usize {
            for stride in [1, 2] {
                for k in [1, 3, 4, 6, 7] {
                    for dil in [1, 2] {
                        let y = run(
                            Tensor::zeros([1, t]),
                            Tensor::zeros([1, 1, k]),
                            Tensor::zeros([1]),
                            stride,
                            dil,
                        );
                        assert_eq!(y.shape()[1], t.div_ceil(stride), "t={t} s={stride} k={k} d={dil}");
                    }
                }
            }
        }
    }

    #[test]
    fn matches_direct_summation() {
        let (c_in, t, c_out) = (3, 11, 2);
        for &(k, stride, dil) in &[(3, 1, 1), (4, 1, 1), (6, 2, 1), (7, 1, 2), (1, 2, 1)] {
            let x: Vec<f64> = (0..c_in * t).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
            let w: Vec<f64> = (0..c_out * c_in * k).map(|i| ((i * 5 % 11) as f64 - 5.0) / 7.0).collect();
            let b = vec![0.25, -0.5];
            let y = run(
                Tensor::from_f64([c_in, t], &x).unwrap(),
                Tensor::from_f64([c_out, c_in, k], &w).unwrap(),
                Tensor::from_f64([c_out], &b).unwrap(),
                stride,
                dil,
            );
            let want = reference(&x, c_in, t, &w, c_out, k, &b, stride, dil);
            for (a, e) in y.data().iter().zip(&want) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::zeros([2, 5]));
        let w = tape.constant(Tensor::zeros([1, 3, 3]));
        let b = tape.constant(Tensor::zeros([1]));
        assert!(tape.conv1d(x, w, b, 1, 1).is_err());
    }
}
