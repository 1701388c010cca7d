use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::dense::DenseOperator;
use crate::error::{out_of_range, Result};
use crate::rng::RandomStream;

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut RandomStream) -> Result<DenseOperator> {
    if d < 2 {
        return Err(out_of_range("d", d, ">= 2"));
    }
    let mut g = DMatrix::<Complex64>::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            g[(r, c)] = Complex64::new(re, im);
        }
    }
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..d {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..d {
            q[(row, c)] *= phase;
        }
    }
    Ok(DenseOperator::from_nalgebra(&q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    #[test]
    fn samples_are_unitary() {
        let base = RandomStream::new(Seed(11));
        for i in 0..100 {
            let u = haar_unitary(8, &mut base.substream(i)).unwrap();
            assert!(u.is_unitary(1e-10));
        }
    }

    #[test]
    fn first_moment_twirl() {
        let d = 4;
        let a = DenseOperator::from_fn(d, |r, c| Complex64::new((r * 3 + c) as f64 * 0.1, (r as f64) - (c as f64) * 0.5));
        let base = RandomStream::new(Seed(12));
        let samples = 20_000u64;
        let mut acc = DenseOperator::zeros(d);
        for i in 0..samples {
            let u = haar_unitary(d, &mut base.substream(i)).unwrap();
            let twirled = u.matmul(&a).unwrap().matmul(&u.adjoint()).unwrap();
            acc = acc.add(&twirled).unwrap();
        }
        let mean = acc.scale_real(1.0 / samples as f64);
        let target = DenseOperator::identity(d).scale(a.trace() / d as f64);
        let err = mean.distance(&target).unwrap();
        let scale = a.frobenius_norm();
        assert!(err < 5.0 * scale / (samples as f64).sqrt(), "err {err}");
    }

    #[test]
    fn rejects_trivial_dimension() {
        assert!(haar_unitary(1, &mut RandomStream::new(Seed(0))).is_err());
    }
}
