//! Dense (batch, channels, length) tensors in f64.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub batch: usize,
    pub ch: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(batch: usize, ch: usize, len: usize) -> Self {
        Tensor { batch, ch, len, data: vec![0.0; batch * ch * len] }
    }

    pub fn from_data(batch: usize, ch: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * ch * len {
            return Err(Error::Shape {
                expected: format!("{} values for ({batch}, {ch}, {len})", batch * ch * len),
                got: format!("{}", data.len()),
            });
        }
        Ok(Tensor { batch, ch, len, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.ch, self.len)
    }

    #[inline]
    pub fn channel(&self, b: usize, c: usize) -> &[f64] {
        let start = (b * self.ch + c) * self.len;
        &self.data[start..start + self.len]
    }

    #[inline]
    pub fn channel_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let start = (b * self.ch + c) * self.len;
        &mut self.data[start..start + self.len]
    }

    /// Concatenate along the channel axis.
    pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.batch != b.batch || a.len != b.len {
            return Err(Error::Shape {
                expected: format!("matching batch/length ({}, {})", a.batch, a.len),
                got: format!("({}, {})", b.batch, b.len),
            });
        }
        let mut out = Tensor::zeros(a.batch, a.ch + b.ch, a.len);
        for bi in 0..a.batch {
            for c in 0..a.ch {
                out.channel_mut(bi, c).copy_from_slice(a.channel(bi, c));
            }
            for c in 0..b.ch {
                out.channel_mut(bi, a.ch + c).copy_from_slice(b.channel(bi, c));
            }
        }
        Ok(out)
    }

    /// Split a gradient of `concat(a, b)` back into the two parts.
    pub fn split(&self, ch_a: usize) -> (Tensor, Tensor) {
        let ch_b = self.ch - ch_a;
        let mut a = Tensor::zeros(self.batch, ch_a, self.len);
        let mut b = Tensor::zeros(self.batch, ch_b, self.len);
        for bi in 0..self.batch {
            for c in 0..ch_a {
                a.channel_mut(bi, c).copy_from_slice(self.channel(bi, c));
            }
            for c in 0..ch_b {
                b.channel_mut(bi, c).copy_from_slice(self.channel(bi, ch_a + c));
            }
        }
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_batch_major() {
        let mut t = Tensor::zeros(2, 3, 4);
        t.channel_mut(1, 2)[3] = 7.0;
        assert_eq!(t.data[(1 * 3 + 2) * 4 + 3], 7.0);
        assert_eq!(t.channel(1, 2)[3], 7.0);
    }

    #[test]
    fn concat_then_split_round_trips() {
        let a = Tensor::from_data(1, 2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::from_data(1, 1, 3, vec![7., 8., 9.]).unwrap();
        let c = Tensor::concat(&a, &b).unwrap();
        assert_eq!(c.ch, 3);
        assert_eq!(c.channel(0, 2), &[7., 8., 9.]);
        let (a2, b2) = c.split(2);
        assert_eq!(a2, a);
        assert_eq!(b2, b);
    }

    #[test]
    fn from_data_checks_size() {
        assert!(Tensor::from_data(1, 2, 3, vec![0.0; 5]).is_err());
    }
}
