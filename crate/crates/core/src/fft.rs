//! Complex FFT usable without `std`.
//!
//! Power-of-two lengths use an iterative radix-2 transform; every other
//! length goes through Bluestein's chirp-z algorithm on a padded radix-2
//! plan. Transforms are unnormalized: `forward` computes
//! `X_k = Σ_j x_j e^{-2πi jk/n}` and `inverse` the same with `+i`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

#[derive(Clone, Debug)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<usize>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if n == 1 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Self { n, twiddles, rev }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[derive(Clone, Debug)]
struct Bluestein {
    n: usize,
    chirp: Vec<Complex64>,
    kernel_hat: Vec<Complex64>,
    inner: Radix2,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // exp(-iπ j²/n), with j² reduced mod 2n to keep the angle small
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                let jj = ((j as u128 * j as u128) % (2 * n as u128)) as f64;
                Complex64::from_polar(1.0, -PI * jj / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..n {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.run(&mut kernel, false);
        Self { n, chirp, kernel_hat: kernel, inner }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.inner.n;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..self.n {
            let x = if inverse { buf[j].conj() } else { buf[j] };
            work[j] = x * self.chirp[j];
        }
        self.inner.run(&mut work, false);
        for (w, k) in work.iter_mut().zip(&self.kernel_hat) {
            *w *= k;
        }
        self.inner.run(&mut work, true);
        let scale = 1.0 / m as f64;
        for k in 0..self.n {
            let y = work[k] * self.chirp[k] * scale;
            buf[k] = if inverse { y.conj() } else { y };
        }
    }
}

#[derive(Clone, Debug)]
enum Plan {
    Radix2(Radix2),
    Bluestein(Bluestein),
}

/// A reusable one-dimensional transform of fixed length.
#[derive(Clone, Debug)]
pub struct Fft {
    n: usize,
    plan: Plan,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let plan = if n.is_power_of_two() {
            Plan::Radix2(Radix2::new(n))
        } else {
            Plan::Bluestein(Bluestein::new(n))
        };
        Self { n, plan }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false)
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true)
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n);
        match &self.plan {
            Plan::Radix2(p) => p.run(buf, inverse),
            Plan::Bluestein(p) => p.run(buf, inverse),
        }
    }
}

/// Applies a 1-D plan along every axis of a row-major `n^d` array.
pub fn transform_nd(plan: &Fft, dims: usize, data: &mut [Complex64], inverse: bool) {
    let n = plan.len();
    let total = data.len();
    debug_assert_eq!(total, n.pow(dims as u32));
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dims {
        let stride = n.pow((dims - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                plan.run(&mut line, inverse);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}
