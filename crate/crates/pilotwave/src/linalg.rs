//! Dense complex matrices for the finite-dimensional measurement models:
//! scaling-and-squaring Padé matrix exponential and a Jacobi eigensolver for
//! Hermitian matrices. Dimensions stay small (product spaces ≤ 2^12), so
//! simple O(n³) kernels are plenty.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::default(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Config(format!(
                "matrix data length {} does not match {n}x{n}",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == Complex64::default() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// max |A − A†| entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Kronecker product (self ⊗ other).
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.n, other.n);
        CMatrix::from_fn(a * b, |i, j| {
            self[(i / b, j / b)] * other[(i % b, j % b)]
        })
    }

    /// Solve A·X = B by LU with partial pivoting, overwriting X into B.
    fn lu_solve(mut a: CMatrix, b: &mut CMatrix) -> Result<()> {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot, pmax) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            if pmax < 1e-300 {
                return Err(Error::Degenerate("singular matrix in LU solve".into()));
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
                for j in 0..b.n {
                    b.data.swap(col * b.n + j, pivot * b.n + j);
                }
            }
            let inv = Complex64::new(1.0, 0.0) / a[(col, col)];
            for r in col + 1..n {
                let factor = a[(r, col)] * inv;
                if factor == Complex64::default() {
                    continue;
                }
                a[(r, col)] = factor;
                for j in col + 1..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= factor * v;
                }
                for j in 0..b.n {
                    let v = b[(col, j)];
                    b[(r, j)] -= factor * v;
                }
            }
        }
        // Back substitution.
        for col in (0..n).rev() {
            let inv = Complex64::new(1.0, 0.0) / a[(col, col)];
            for j in 0..b.n {
                let mut acc = b[(col, j)];
                for k in col + 1..n {
                    acc -= a[(col, k)] * b[(k, j)];
                }
                b[(col, j)] = acc * inv;
            }
        }
        Ok(())
    }

    /// Matrix exponential by scaling-and-squaring with the order-13 Padé
    /// approximant.
    pub fn expm(&self) -> Result<CMatrix> {
        const THETA_13: f64 = 5.371920351148152;
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        let n = self.n;
        let norm = self.one_norm();
        let squarings = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil() as u32
        } else {
            0
        };
        let a = self.scale(Complex64::new(1.0 / f64::powi(2.0, squarings as i32), 0.0));
        let a2 = a.mul(&a);
        let a4 = a2.mul(&a2);
        let a6 = a2.mul(&a4);
        let real = |x: f64| Complex64::new(x, 0.0);
        let ident = CMatrix::identity(n);
        // U = A·[A6·(b13·A6 + b11·A4 + b9·A2) + b7·A6 + b5·A4 + b3·A2 + b1·I]
        let inner_u = a6
            .mul(&a6.scale(real(B[13])).add(&a4.scale(real(B[11]))).add(&a2.scale(real(B[9]))))
            .add(&a6.scale(real(B[7])))
            .add(&a4.scale(real(B[5])))
            .add(&a2.scale(real(B[3])))
            .add(&ident.scale(real(B[1])));
        let u = a.mul(&inner_u);
        // V = A6·(b12·A6 + b10·A4 + b8·A2) + b6·A6 + b4·A4 + b2·A2 + b0·I
        let v = a6
            .mul(&a6.scale(real(B[12])).add(&a4.scale(real(B[10]))).add(&a2.scale(real(B[8]))))
            .add(&a6.scale(real(B[6])))
            .add(&a4.scale(real(B[4])))
            .add(&a2.scale(real(B[2])))
            .add(&ident.scale(real(B[0])));
        let mut rhs = v.add(&u);
        CMatrix::lu_solve(v.sub(&u), &mut rhs)?;
        let mut result = rhs;
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        Ok(result)
    }

    /// Eigenvalues of a Hermitian matrix via cyclic complex Jacobi sweeps,
    /// sorted ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if self.hermiticity_defect() > 1e-9 * self.one_norm().max(1.0) {
            return Err(Error::Domain(
                "eigenvalue solve expects a Hermitian matrix".into(),
            ));
        }
        let n = self.n;
        let mut a = self.clone();
        // Symmetrize exactly so the invariants below hold to roundoff.
        for i in 0..n {
            a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
            for j in i + 1..n {
                let avg = 0.5 * (a[(i, j)] + a[(j, i)].conj());
                a[(i, j)] = avg;
                a[(j, i)] = avg.conj();
            }
        }
        let scale = a.one_norm().max(1e-300);
        let mut converged = false;
        for _sweep in 0..60 {
            let mut off: f64 = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off < 1e-14 * scale {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag < 1e-300 {
                        continue;
                    }
                    let phase = apq / mag;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (2.0 * mag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Column rotation: col_p ← c·col_p − s·phase*·col_q,
                    // col_q ← s·phase·col_p + c·col_q, then the mirrored row
                    // update (J† A J).
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = c * arp - s * phase.conj() * arq;
                        a[(r, q)] = s * phase * arp + c * arq;
                    }
                    for col in 0..n {
                        let apc = a[(p, col)];
                        let aqc = a[(q, col)];
                        a[(p, col)] = c * apc - s * phase * aqc;
                        a[(q, col)] = s * phase.conj() * apc + c * aqc;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::Instability {
                module: "linalg",
                step: 60,
                detail: "Jacobi sweeps did not reduce the off-diagonal".into(),
            });
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Ok(eig)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn expm_of_diagonal_matches_scalar_exponentials() {
        let m = CMatrix::from_fn(3, |i, j| {
            if i == j {
                c(0.3 * i as f64, -0.7 * i as f64)
            } else {
                c(0.0, 0.0)
            }
        });
        let e = m.expm().unwrap();
        for i in 0..3 {
            let expect = Complex64::new(0.3 * i as f64, -0.7 * i as f64).exp();
            assert!((e[(i, i)] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_of_rotation_generator_is_a_rotation() {
        let theta = 1.234;
        let g = CMatrix::from_rows(
            2,
            vec![c(0.0, 0.0), c(-theta, 0.0), c(theta, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let r = g.expm().unwrap();
        assert!((r[(0, 0)].re - theta.cos()).abs() < 1e-13);
        assert!((r[(1, 0)].re - theta.sin()).abs() < 1e-13);
    }

    #[test]
    fn expm_of_anti_hermitian_is_unitary_and_inverts() {
        // Fixed pseudo-random Hermitian H, -iH exponentiated.
        let n = 6;
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rand = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut h = CMatrix::zeros(n);
        for i in 0..n {
            h[(i, i)] = c(rand(), 0.0);
            for j in i + 1..n {
                let v = c(rand(), rand());
                h[(i, j)] = v;
                h[(j, i)] = v.conj();
            }
        }
        // Large norm to force several squarings.
        let h = h.scale(c(20.0, 0.0));
        let u = h.scale(c(0.0, -1.0)).expm().unwrap();
        let back = h.scale(c(0.0, 1.0)).expm().unwrap();
        let id = u.mul(&u.adjoint());
        let id2 = u.mul(&back);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - c(expect, 0.0)).norm() < 1e-11);
                assert!((id2[(i, j)] - c(expect, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn jacobi_matches_known_two_by_two_spectra() {
        // Pauli-x: eigenvalues ±1.
        let sx = CMatrix::from_rows(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let e = sx.hermitian_eigenvalues().unwrap();
        assert!((e[0] + 1.0).abs() < 1e-13 && (e[1] - 1.0).abs() < 1e-13);
        // Pauli-y (complex entries).
        let sy = CMatrix::from_rows(2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
            .unwrap();
        let e = sy.hermitian_eigenvalues().unwrap();
        assert!((e[0] + 1.0).abs() < 1e-13 && (e[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn jacobi_preserves_trace_and_frobenius_invariants() {
        let n = 8;
        let mut seed = 42u64;
        let mut rand = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut h = CMatrix::zeros(n);
        for i in 0..n {
            h[(i, i)] = c(rand(), 0.0);
            for j in i + 1..n {
                let v = c(rand(), rand());
                h[(i, j)] = v;
                h[(j, i)] = v.conj();
            }
        }
        let eig = h.hermitian_eigenvalues().unwrap();
        let trace: f64 = (0..n).map(|i| h[(i, i)].re).sum();
        let fro2: f64 = h.data().iter().map(|a| a.norm_sqr()).sum();
        assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-11);
        assert!((eig.iter().map(|l| l * l).sum::<f64>() - fro2).abs() < 1e-10);
        assert!(eig.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn kron_dimensions_and_values() {
        let a = CMatrix::from_rows(2, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        let id = CMatrix::identity(2);
        let k = a.kron(&id);
        assert_eq!(k.dim(), 4);
        assert_eq!(k[(0, 0)], c(1.0, 0.0));
        assert_eq!(k[(1, 1)], c(1.0, 0.0));
        assert_eq!(k[(2, 0)], c(3.0, 0.0));
        assert_eq!(k[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn non_hermitian_input_is_rejected_by_the_eigensolver() {
        let m = CMatrix::from_rows(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert!(m.hermitian_eigenvalues().is_err());
    }
}
