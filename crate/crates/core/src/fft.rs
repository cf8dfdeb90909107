//! Complex FFT for the angular-spectrum propagator.
//!
//! Power-of-two sizes use an iterative radix-2 transform; any other size goes
//! through Bluestein's chirp-z reformulation on a padded power-of-two plan.
//! Forward transforms are unnormalized, inverse transforms divide by `n`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2 {
        /// exp(-2πik/n), k < n/2
        twiddles: Vec<Complex64>,
        bitrev: Vec<u32>,
    },
    Bluestein(Box<Bluestein>),
}

#[derive(Debug, Clone)]
struct Bluestein {
    inner: Fft,
    /// exp(-iπk²/n)
    chirp: Vec<Complex64>,
    /// FFT of the conjugate chirp, wrapped onto the padded length.
    kernel: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "FFT length must be positive");
        if n.is_power_of_two() {
            let twiddles = (0..n / 2)
                .map(|k| {
                    let a = -2.0 * PI * k as f64 / n as f64;
                    Complex64::new(a.cos(), a.sin())
                })
                .collect();
            let bits = n.trailing_zeros();
            let bitrev = (0..n as u32)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
                .collect();
            Fft {
                n,
                kind: Kind::Radix2 { twiddles, bitrev },
            }
        } else {
            let m = (2 * n - 1).next_power_of_two();
            let inner = Fft::new(m);
            let chirp: Vec<Complex64> = (0..n)
                .map(|k| {
                    // k² mod 2n keeps the angle small for large k
                    let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                    let a = -PI * k2 / n as f64;
                    Complex64::new(a.cos(), a.sin())
                })
                .collect();
            let mut kernel = vec![Complex64::new(0.0, 0.0); m];
            kernel[0] = chirp[0].conj();
            for k in 1..n {
                kernel[k] = chirp[k].conj();
                kernel[m - k] = chirp[k].conj();
            }
            inner.forward(&mut kernel);
            Fft {
                n,
                kind: Kind::Bluestein(Box::new(Bluestein {
                    inner,
                    chirp,
                    kernel,
                })),
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n);
        match &self.kind {
            Kind::Radix2 { twiddles, bitrev } => radix2(data, twiddles, bitrev),
            Kind::Bluestein(b) => b.transform(data),
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        for v in data.iter_mut() {
            *v = v.conj();
        }
        self.forward(data);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

fn radix2(data: &mut [Complex64], twiddles: &[Complex64], bitrev: &[u32]) {
    let n = data.len();
    for i in 0..n {
        let j = bitrev[i] as usize;
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * step];
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

impl Bluestein {
    fn transform(&self, data: &mut [Complex64]) {
        let n = data.len();
        let m = self.inner.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..n {
            buf[k] = data[k] * self.chirp[k];
        }
        self.inner.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inner.inverse(&mut buf);
        for k in 0..n {
            data[k] = buf[k] * self.chirp[k];
        }
    }
}

/// Signed spatial frequency of FFT bin `j` for `n` samples at spacing `pitch`.
pub fn frequency(j: usize, n: usize, pitch: f64) -> f64 {
    let j = j as f64;
    let nf = n as f64;
    if j < nf / 2.0 {
        j / (nf * pitch)
    } else {
        (j - nf) / (nf * pitch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let a = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                        v * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                let t = j as f64;
                Complex64::new((0.3 * t).sin() + 0.1 * t / n as f64, (1.7 * t).cos())
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_various_sizes() {
        for &n in &[1usize, 2, 3, 5, 8, 12, 64, 100, 257] {
            let x = signal(n);
            let expected = naive_dft(&x);
            let mut y = x.clone();
            Fft::new(n).forward(&mut y);
            for (a, b) in y.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for &n in &[16usize, 30, 512] {
            let x = signal(n);
            let mut y = x.clone();
            let plan = Fft::new(n);
            plan.forward(&mut y);
            plan.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn frequency_layout() {
        assert_eq!(frequency(0, 8, 1.0), 0.0);
        assert_eq!(frequency(3, 8, 1.0), 3.0 / 8.0);
        assert_eq!(frequency(4, 8, 1.0), -0.5);
        assert_eq!(frequency(7, 8, 0.5), -0.25);
    }
}
