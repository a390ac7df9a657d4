use super::tape::Backward;
use super::{Element, Tape, Tensor, Var};
use crate::error::{invalid, Result};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept by the running statistics on each update.
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-channel running mean and variance used at inference.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<F = f32> {
    pub mean: Vec<F>,
    pub var: Vec<F>,
}

impl<F: Element> RunningStats<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![F::zero(); channels],
            var: vec![F::one(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn cast<G: Element>(&self) -> RunningStats<G> {
        RunningStats {
            mean: self.mean.iter().map(|&v| G::from_f64(v.as_f64())).collect(),
            var: self.var.iter().map(|&v| G::from_f64(v.as_f64())).collect(),
        }
    }
}

pub enum NormMode<'a, F: Element> {
    /// Normalize with batch statistics and fold them into the running stats.
    Train(&'a mut RunningStats<F>),
    /// Normalize with the running stats only.
    Infer(&'a RunningStats<F>),
}

#[derive(Clone, Copy)]
struct Layout {
    batch: usize,
    channels: usize,
    steps: usize,
}

impl Layout {
    /// Calls `f(offset_of_row, valid_len)` for every (sample, channel) row of
    /// channel `c`.
    fn rows(&self, c: usize, lengths: &[usize], mut f: impl FnMut(usize, usize)) {
        for n in 0..self.batch {
            let len = lengths.get(n).copied().unwrap_or(self.steps).min(self.steps);
            f((n * self.channels + c) * self.steps, len);
        }
    }
}

struct BatchNormOp<F> {
    layout: Layout,
    lengths: Vec<usize>,
    normalized: Vec<F>,
    inv_std: Vec<F>,
    batch_stats: bool,
}

impl<F: Element> Backward<F> for BatchNormOp<F> {
    fn backward(
        &self,
        inputs: &[&Tensor<F>],
        _output: &Tensor<F>,
        grad: &Tensor<F>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<F>>> {
        let l = self.layout;
        let gamma = inputs[1].data();
        let dy = grad.data();
        let mut dgamma = vec![F::zero(); l.channels];
        let mut dbeta = vec![F::zero(); l.channels];
        let mut dx = needs[0].then(|| vec![F::zero(); dy.len()]);

        for c in 0..l.channels {
            let (mut sum_dy, mut sum_dy_xhat, mut count) = (0.0f64, 0.0f64, 0usize);
            l.rows(c, &self.lengths, |row, len| {
                for (&g, &xhat) in dy[row..row + len].iter().zip(&self.normalized[row..row + len]) {
                    sum_dy += g.as_f64();
                    sum_dy_xhat += (g * xhat).as_f64();
                }
                count += len;
            });
            dgamma[c] = F::from_f64(sum_dy_xhat);
            dbeta[c] = F::from_f64(sum_dy);

            if let Some(dx) = dx.as_mut() {
                let scale = gamma[c] * self.inv_std[c];
                if self.batch_stats {
                    let m = count as f64;
                    let mean_dy = F::from_f64(sum_dy / m);
                    let mean_dy_xhat = F::from_f64(sum_dy_xhat / m);
                    l.rows(c, &self.lengths, |row, len| {
                        for i in row..row + len {
                            dx[i] = scale * (dy[i] - mean_dy - self.normalized[i] * mean_dy_xhat);
                        }
                    });
                } else {
                    l.rows(c, &self.lengths, |row, len| {
                        for i in row..row + len {
                            dx[i] = scale * dy[i];
                        }
                    });
                }
            }
        }

        vec![
            dx.map(|d| Tensor::new(inputs[0].shape().to_vec(), d).expect("input shape")),
            needs[1].then(|| Tensor::new([l.channels], dgamma).expect("gamma shape")),
            needs[2].then(|| Tensor::new([l.channels], dbeta).expect("beta shape")),
        ]
    }
}

impl<F: Element> Tape<F> {
    /// Per-channel batch normalization of `[N, C, T]` (or `[C, T]`).
    ///
    /// When `lengths` is given, statistics use only the first `lengths[n]`
    /// steps of sample `n`, and the remaining positions are emitted as zero.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mode: NormMode<'_, F>,
        lengths: Option<&[usize]>,
    ) -> Result<Var> {
        let x = self.value(input);
        let layout = match x.shape() {
            [c, t] => Layout {
                batch: 1,
                channels: *c,
                steps: *t,
            },
            [n, c, t] => Layout {
                batch: *n,
                channels: *c,
                steps: *t,
            },
            s => return Err(invalid(format!("batch_norm input must be rank 2 or 3, got {s:?}"))),
        };
        let channels = layout.channels;
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.value(v).shape() != [channels] {
                return Err(invalid(format!(
                    "batch_norm {name} {:?} does not match {channels} channels",
                    self.value(v).shape()
                )));
            }
        }
        let lengths: Vec<usize> = match lengths {
            Some(l) if l.len() != layout.batch => {
                return Err(invalid(format!(
                    "batch_norm got {} lengths for batch of {}",
                    l.len(),
                    layout.batch
                )))
            }
            Some(l) => l.iter().map(|&v| v.min(layout.steps)).collect(),
            None => vec![layout.steps; layout.batch],
        };
        let valid: usize = lengths.iter().sum();
        if valid == 0 {
            return Err(invalid("batch_norm over an empty time axis"));
        }

        let data = x.data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut normalized = vec![F::zero(); data.len()];
        let mut out = vec![F::zero(); data.len()];
        let mut inv_std = vec![F::zero(); channels];
        let batch_stats = matches!(mode, NormMode::Train(_));

        let mut batch_mean = vec![0.0f64; channels];
        let mut batch_var = vec![0.0f64; channels];
        for c in 0..channels {
            let (mean, var) = match &mode {
                NormMode::Train(_) => {
                    let mut sum = 0.0f64;
                    layout.rows(c, &lengths, |row, len| {
                        sum += data[row..row + len].iter().map(|v| v.as_f64()).sum::<f64>();
                    });
                    let mean = sum / valid as f64;
                    let mut sq = 0.0f64;
                    layout.rows(c, &lengths, |row, len| {
                        sq += data[row..row + len]
                            .iter()
                            .map(|v| (v.as_f64() - mean).powi(2))
                            .sum::<f64>();
                    });
                    (mean, sq / valid as f64)
                }
                NormMode::Infer(stats) => (stats.mean[c].as_f64(), stats.var[c].as_f64()),
            };
            batch_mean[c] = mean;
            batch_var[c] = var;
            let inv = 1.0 / (var + BN_EPSILON).sqrt();
            inv_std[c] = F::from_f64(inv);
            let (mean_f, inv_f) = (F::from_f64(mean), F::from_f64(inv));
            layout.rows(c, &lengths, |row, len| {
                for i in row..row + len {
                    let xhat = (data[i] - mean_f) * inv_f;
                    normalized[i] = xhat;
                    out[i] = g[c] * xhat + b[c];
                }
            });
        }

        if let NormMode::Train(stats) = mode {
            let unbias = if valid > 1 {
                valid as f64 / (valid - 1) as f64
            } else {
                1.0
            };
            for c in 0..channels {
                let m = stats.mean[c].as_f64();
                let v = stats.var[c].as_f64();
                stats.mean[c] = F::from_f64(BN_MOMENTUM * m + (1.0 - BN_MOMENTUM) * batch_mean[c]);
                stats.var[c] =
                    F::from_f64(BN_MOMENTUM * v + (1.0 - BN_MOMENTUM) * batch_var[c] * unbias);
            }
        }

        let out = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.record(
            out,
            vec![input, gamma, beta],
            Box::new(BatchNormOp {
                layout,
                lengths,
                normalized,
                inv_std,
                batch_stats,
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bn(x: Tensor<f64>, gamma: f64, beta: f64, stats: &mut RunningStats<f64>) -> Tensor<f64> {
        let c = x.shape()[x.rank() - 2];
        let mut tape = Tape::new();
        let x = tape.constant(x);
        let g = tape.constant(Tensor::full([c], gamma));
        let b = tape.constant(Tensor::full([c], beta));
        let y = tape.batch_norm(x, g, b, NormMode::Train(stats), None).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let mut stats = RunningStats::new(2);
        let y = bn(
            Tensor::from_f64([2, 3], &[5.0, 5.0, 5.0, -2.0, -2.0, -2.0]).unwrap(),
            1.0,
            0.0,
            &mut stats,
        );
        assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn symmetric_pair() {
        let mut stats = RunningStats::new(1);
        let y = bn(Tensor::from_f64([1, 2], &[-1.0, 1.0]).unwrap(), 1.0, 0.0, &mut stats);
        let expected = 1.0 / (1.0f64 + BN_EPSILON).sqrt();
        assert!((y.data()[0] + expected).abs() < 1e-12);
        assert!((y.data()[1] - expected).abs() < 1e-12);
        // Running stats moved by (1 - momentum) toward mean 0, unbiased var 2.
        assert!((stats.mean[0] - 0.0).abs() < 1e-12);
        assert!((stats.var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_emits_beta() {
        let mut stats = RunningStats::new(1);
        let y = bn(Tensor::from_f64([1, 4], &[3.0, -1.0, 7.0, 0.5]).unwrap(), 0.0, 0.25, &mut stats);
        assert!(y.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn train_output_is_standardized() {
        let mut stats = RunningStats::new(3);
        let x: Vec<f64> = (0..2 * 3 * 17).map(|i| ((i * 31 % 23) as f64) * 0.7 - 3.0).collect();
        let y = bn(Tensor::from_f64([2, 3, 17], &x).unwrap(), 1.0, 0.0, &mut stats);
        for c in 0..3 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|n| y.data()[(n * 3 + c) * 17..(n * 3 + c + 1) * 17].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn infer_uses_running_stats() {
        let stats = RunningStats {
            mean: vec![2.0],
            var: vec![4.0],
        };
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_f64([1, 2], &[2.0, 6.0]).unwrap());
        let g = tape.constant(Tensor::full([1], 1.0));
        let b = tape.constant(Tensor::full([1], 0.0));
        let y = tape.batch_norm(x, g, b, NormMode::Infer(&stats), None).unwrap();
        let d = tape.value(y).data();
        assert!(d[0].abs() < 1e-12);
        assert!((d[1] - 4.0 / (4.0 + BN_EPSILON).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_time_axis_is_rejected() {
        let mut stats = RunningStats::<f32>::new(1);
        let mut tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::zeros([1, 1, 4]));
        let g = tape.constant(Tensor::full([1], 1.0));
        let b = tape.constant(Tensor::zeros([1]));
        assert!(tape
            .batch_norm(x, g, b, NormMode::Train(&mut stats), Some(&[0]))
            .is_err());
    }

    #[test]
    fn masked_statistics_ignore_padding() {
        let mut s1 = RunningStats::<f64>::new(1);
        let mut s2 = RunningStats::<f64>::new(1);
        let plain = bn(Tensor::from_f64([1, 1, 3], &[1.0, 2.0, 4.0]).unwrap(), 1.0, 0.0, &mut s1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_f64([1, 1, 5], &[1.0, 2.0, 4.0, 99.0, -99.0]).unwrap());
        let g = tape.constant(Tensor::full([1], 1.0));
        let b = tape.constant(Tensor::full([1], 0.0));
        let y = tape
            .batch_norm(x, g, b, NormMode::Train(&mut s2), Some(&[3]))
            .unwrap();
        assert_eq!(&tape.value(y).data()[..3], plain.data());
        assert_eq!(&tape.value(y).data()[3..], &[0.0, 0.0]);
        assert_eq!(s1, s2);
    }
}
