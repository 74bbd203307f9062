//! Dense matrix exponentials and block partitioning of sparse generators.

use nalgebra::Schur;

use crate::operators::{CMatrix, CVector, C64};

/// Eigenvector matrices with a 1-norm condition number above this are not trusted.
pub const EIGEN_CONDITION_LIMIT: f64 = 1e8;

const PADE13_THETA: f64 = 5.371_920_351_148_152;
const PADE13_COEFFS: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a degree-13 Padé approximant.
pub fn expm_pade(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm_pade requires a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if n == 1 {
        return CMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    let norm = one_norm(a);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * C64::new(0.5f64.powi(squarings), 0.0);

    let b = |k: usize| C64::new(PADE13_COEFFS[k], 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Diagonalization `a = V diag(values) V^-1` of a general complex matrix.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    pub condition: f64,
}

impl EigenDecomposition {
    /// Attempts a diagonalization through the complex Schur form. Returns `None`
    /// when the eigenvector basis is ill-conditioned or fails to reproduce `a`.
    pub fn try_new(a: &CMatrix) -> Option<Self> {
        let n = a.nrows();
        if n == 0 || n != a.ncols() {
            return None;
        }
        let scale = one_norm(a).max(1e-300);
        if one_norm(&(a + a.adjoint())) <= 1e-14 * scale {
            return Some(Self::anti_hermitian(a));
        }
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))?;
        let (q, t) = schur.unpack();
        let values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();

        // Normal matrices have a diagonal Schur form; the Schur vectors are then
        // an exact unitary eigenbasis.
        let off_diagonal = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .map(|(i, j)| t[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off_diagonal <= 1e-13 * scale.max(1.0) {
            let inverse = q.adjoint();
            return Some(EigenDecomposition {
                values,
                vectors: q,
                inverse,
                condition: 1.0,
            });
        }

        let degenerate = 1e-9 * scale.max(1.0);
        let mut y = CMatrix::zeros(n, n);
        for k in 0..n {
            y[(k, k)] = C64::new(1.0, 0.0);
            for j in (0..k).rev() {
                let mut num = C64::new(0.0, 0.0);
                for l in (j + 1)..=k {
                    num += t[(j, l)] * y[(l, k)];
                }
                let den = t[(j, j)] - values[k];
                y[(j, k)] = if den.norm() < degenerate { C64::new(0.0, 0.0) } else { -num / den };
            }
            let norm = y.column(k).norm();
            y.column_mut(k).unscale_mut(norm);
        }
        let vectors = &q * y;
        let inverse = vectors.clone().try_inverse()?;
        let condition = one_norm(&vectors) * one_norm(&inverse);
        if !condition.is_finite() || condition > EIGEN_CONDITION_LIMIT {
            return None;
        }
        let lambda = CMatrix::from_diagonal(&CVector::from_vec(values.clone()));
        let rebuilt = &vectors * lambda * &inverse;
        let residual = one_norm(&(rebuilt - a));
        if residual > 1e-11 * scale.max(1.0) * condition.max(1.0).sqrt() {
            return None;
        }
        Some(EigenDecomposition {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    /// `a = -i V diag(w) V^†` from the Hermitian eigenproblem of `i a`.
    fn anti_hermitian(a: &CMatrix) -> Self {
        let h = a * C64::new(0.0, 1.0);
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let values = eig.eigenvalues.iter().map(|&w| C64::new(0.0, -w)).collect();
        let inverse = eig.eigenvectors.adjoint();
        EigenDecomposition {
            values,
            vectors: eig.eigenvectors,
            inverse,
            condition: 1.0,
        }
    }

    /// `exp(t * a)`.
    pub fn exp(&self, t: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, lambda) in self.values.iter().enumerate() {
            let f = (lambda * t).exp();
            for z in scaled.column_mut(k).iter_mut() {
                *z *= f;
            }
        }
        scaled * &self.inverse
    }
}

/// Connected components of the sparsity graph of `m` (entries exactly zero are
/// treated as absent). Components are returned with ascending indices, ordered
/// by their smallest member.
pub fn block_partition(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            let z = m[(i, j)];
            if i != j && (z.re != 0.0 || z.im != 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

pub fn submatrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_exp(a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let mut term = CMatrix::identity(n, n);
        let mut acc = term.clone();
        for k in 1..60 {
            term = &term * a * C64::new(1.0 / k as f64, 0.0);
            acc += &term;
        }
        acc
    }

    fn sample_matrix(n: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| {
            let x = ((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.45;
            let y = ((i * 5 + j * 3) % 7) as f64 / 7.0 - 0.5;
            C64::new(x * scale, y * scale)
        })
    }

    #[test]
    fn pade_matches_taylor_for_moderate_norm() {
        let a = sample_matrix(6, 0.8);
        let diff = one_norm(&(expm_pade(&a) - taylor_exp(&a)));
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn pade_handles_large_norm_by_squaring() {
        // exp of a rotation generator: exact cos/sin blocks.
        let theta = 37.3;
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = C64::new(-theta, 0.0);
        a[(1, 0)] = C64::new(theta, 0.0);
        let e = expm_pade(&a);
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn eigen_route_agrees_with_pade() {
        let a = sample_matrix(8, 1.3);
        let eig = EigenDecomposition::try_new(&a).expect("generic matrix is diagonalizable");
        for &t in &[0.0, 0.4, 2.5] {
            let d = one_norm(&(eig.exp(t) - expm_pade(&(&a * C64::new(t, 0.0)))));
            assert!(d < 1e-10, "t={t}: {d}");
        }
    }

    #[test]
    fn eigen_route_handles_degenerate_normal_matrices() {
        let mut a = CMatrix::zeros(4, 4);
        a[(0, 0)] = C64::new(0.0, -1.0);
        a[(1, 1)] = C64::new(0.0, -1.0);
        a[(2, 3)] = C64::new(0.0, 0.5);
        a[(3, 2)] = C64::new(0.0, 0.5);
        let eig = EigenDecomposition::try_new(&a).expect("normal matrix");
        let d = one_norm(&(eig.exp(1.7) - expm_pade(&(&a * C64::new(1.7, 0.0)))));
        assert!(d < 1e-12);
    }

    #[test]
    fn anti_hermitian_route_is_exact() {
        let h = sample_matrix(7, 0.9);
        let a = (&h - h.adjoint()) * C64::new(0.5, 0.0);
        let eig = EigenDecomposition::try_new(&a).unwrap();
        assert_eq!(eig.condition, 1.0);
        let d = one_norm(&(eig.exp(3.3) - expm_pade(&(&a * C64::new(3.3, 0.0)))));
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn eigen_route_rejects_defective_matrix() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(EigenDecomposition::try_new(&a).is_none());
    }

    #[test]
    fn partition_finds_independent_blocks() {
        let mut m = CMatrix::zeros(5, 5);
        m[(0, 3)] = C64::new(1.0, 0.0);
        m[(4, 1)] = C64::new(0.0, 2.0);
        m[(2, 2)] = C64::new(1.0, 0.0);
        let blocks = block_partition(&m);
        assert_eq!(blocks, vec![vec![0, 3], vec![1, 4], vec![2]]);
    }
}
