//! Unnormalized complex DFT over split re/im buffers: iterative radix-2
//! Cooley-Tukey for power-of-two lengths, direct O(N²) summation otherwise.

use std::f64::consts::PI;

/// Twiddle table and bit-reversal permutation for one transform length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Option<Vec<usize>>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform length must be positive");
        let (cos, sin) = (0..n)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / n as f64;
                (theta.cos(), theta.sin())
            })
            .unzip();
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        });
        Self { n, cos, sin, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform; `inverse` flips the exponent sign, no scaling.
    pub fn process(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        debug_assert_eq!(re.len(), self.n);
        debug_assert_eq!(im.len(), self.n);
        match &self.bitrev {
            Some(perm) => self.radix2(perm, re, im, inverse),
            None => self.naive(re, im, inverse),
        }
    }

    fn radix2(&self, perm: &[usize], re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        for (i, &j) in perm.iter().enumerate() {
            if i < j {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let wr = self.cos[j * step];
                    let wi = sign * self.sin[j * step];
                    let (a, b) = (start + j, start + j + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }

    fn naive(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for m in 0..n {
                let idx = (k * m) % n;
                let (c, s) = (self.cos[idx], sign * self.sin[idx]);
                sr += re[m] * c - im[m] * s;
                si += re[m] * s + im[m] * c;
            }
            out_re[k] = sr;
            out_im[k] = si;
        }
        re.copy_from_slice(&out_re);
        im.copy_from_slice(&out_im);
    }
}

/// Direct O(N²) transform regardless of length.
pub fn naive_dft(re: &[f64], im: &[f64], inverse: bool) -> (Vec<f64>, Vec<f64>) {
    let plan = FftPlan {
        bitrev: None,
        ..FftPlan::new(re.len())
    };
    let (mut r, mut i) = (re.to_vec(), im.to_vec());
    plan.naive(&mut r, &mut i, inverse);
    (r, i)
}

/// Transforms every `h×w` plane of the split buffers along both axes
/// (`h == 1` gives a 1-D transform of each row).
pub(crate) fn transform_planes(re: &mut [f64], im: &mut [f64], h: usize, w: usize, inverse: bool) {
    let row_plan = FftPlan::new(w);
    let col_plan = (h > 1).then(|| FftPlan::new(h));
    let mut col_re = vec![0.0; h];
    let mut col_im = vec![0.0; h];
    for (pre, pim) in re.chunks_mut(h * w).zip(im.chunks_mut(h * w)) {
        for (rr, ri) in pre.chunks_mut(w).zip(pim.chunks_mut(w)) {
            row_plan.process(rr, ri, inverse);
        }
        if let Some(plan) = &col_plan {
            for x in 0..w {
                for y in 0..h {
                    col_re[y] = pre[y * w + x];
                    col_im[y] = pim[y * w + x];
                }
                plan.process(&mut col_re, &mut col_im, inverse);
                for y in 0..h {
                    pre[y * w + x] = col_re[y];
                    pim[y * w + x] = col_im[y];
                }
            }
        }
    }
}
