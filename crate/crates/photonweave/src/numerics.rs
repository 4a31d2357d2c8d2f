//! Permutation and matrix kernels: permanents, cycle structure, Hermitian evolution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const MAX_PERMANENT_DIM: usize = 20;
pub const MAX_NAIVE_DIM: usize = 8;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A bijection on `0..n`, with `image[j] = σ(j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &x in &image {
            if x >= n || seen[x] {
                return Err(Error::Parameter(format!("{image:?} is not a permutation")));
            }
            seen[x] = true;
        }
        Ok(Self { image })
    }

    pub fn identity(n: usize) -> Self {
        Self { image: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn apply(&self, j: usize) -> usize {
        self.image[j]
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &x) in self.image.iter().enumerate() {
            inv[x] = i;
        }
        Self { image: inv }
    }

    /// +1 for even, −1 for odd permutations.
    pub fn sign(&self) -> i32 {
        let odd = cycle_decomposition(self)
            .iter()
            .filter(|c| c.len() % 2 == 0)
            .count();
        if odd % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Cycle lengths sorted in descending order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = cycle_decomposition(self).iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }
}

/// Disjoint cycles, each starting at its smallest element, sorted by first element.
/// Each cycle lists `j, σ(j), σ²(j), …`.
pub fn cycle_decomposition(sigma: &Permutation) -> Vec<Vec<usize>> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            cycle.push(j);
            j = sigma.image[j];
        }
        cycles.push(cycle);
    }
    cycles
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Permutations {
    Permutations { next: Some((0..n).collect()) }
}

pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut a = current.clone();
        let n = a.len();
        if n > 1 {
            let mut i = n - 1;
            while i > 0 && a[i - 1] >= a[i] {
                i -= 1;
            }
            if i > 0 {
                let mut j = n - 1;
                while a[j] <= a[i - 1] {
                    j -= 1;
                }
                a.swap(i - 1, j);
                a[i..].reverse();
                self.next = Some(a);
            }
        }
        Some(Permutation { image: current })
    }
}

fn require_square(m: &CMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Matrix permanent by Ryser's formula with Gray-code subset updates.
pub fn permanent(m: &CMatrix) -> Result<C64> {
    let n = require_square(m, "permanent input")?;
    if n > MAX_PERMANENT_DIM {
        return Err(Error::TooLarge { what: "permanent dimension", n, max: MAX_PERMANENT_DIM });
    }
    if n == 0 {
        return Ok(c(1.0, 0.0));
    }
    let mut row_sums = vec![C64::new(0.0, 0.0); n];
    let mut total = C64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let changed = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << changed) != 0;
        gray = next;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += m[(i, changed)];
            } else {
                *s -= m[(i, changed)];
            }
        }
        let prod = row_sums.iter().fold(C64::new(1.0, 0.0), |acc, s| acc * s);
        if gray.count_ones() % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

/// Permanent as the explicit sum over all n! permutations.
pub fn permanent_naive(m: &CMatrix) -> Result<C64> {
    let n = require_square(m, "permanent input")?;
    if n > MAX_NAIVE_DIM {
        return Err(Error::TooLarge { what: "naive permanent dimension", n, max: MAX_NAIVE_DIM });
    }
    let mut total = C64::new(0.0, 0.0);
    for p in permutations(n) {
        total += (0..n).fold(C64::new(1.0, 0.0), |acc, j| acc * m[(j, p.apply(j))]);
    }
    Ok(total)
}

/// Row `i` of the result is row `σ(i)` of `m`.
pub fn permute_rows(m: &CMatrix, sigma: &Permutation) -> Result<CMatrix> {
    if sigma.len() != m.nrows() {
        return Err(Error::Dimension(format!(
            "permutation on {} elements applied to {} rows",
            sigma.len(),
            m.nrows()
        )));
    }
    Ok(CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(sigma.apply(i), j)]))
}

pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.component_mul(b))
}

/// Largest entry of |H − H†|.
pub fn hermitian_deviation(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |U†U − I|.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c(target, 0.0)).norm());
        }
    }
    worst
}

/// Unitary from the QR decomposition of a matrix with uniform random entries.
/// Not Haar distributed, which no caller needs.
pub fn random_unitary<R: Rng>(m: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(m, m, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a.qr().q()
}

/// Normalized vector with uniform random real and imaginary parts.
pub fn random_vector<R: Rng>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Cached eigendecomposition of a Hermitian matrix for repeated evolution.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Result<Self> {
        require_square(h, "Hamiltonian")?;
        let dev = hermitian_deviation(h);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let herm = (h + h.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(h.nrows(), h.nrows(), |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self { values, vectors })
    }

    /// exp(−iHz)·v
    pub fn evolve(&self, z: f64, v: &CVector) -> Result<CVector> {
        if v.len() != self.values.len() {
            return Err(Error::Dimension(format!(
                "vector of length {} for {}-dim Hamiltonian",
                v.len(),
                self.values.len()
            )));
        }
        let mut coeffs = self.vectors.adjoint() * v;
        for (k, e) in self.values.iter().enumerate() {
            coeffs[k] *= C64::from_polar(1.0, -e * z);
        }
        Ok(&self.vectors * coeffs)
    }
}

/// exp(−iHz)·v through the eigendecomposition of `h`.
pub fn hermitian_evolve(h: &CMatrix, z: f64, v: &CVector) -> Result<CVector> {
    HermitianEigen::new(h)?.evolve(z, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn tritter() -> CMatrix {
        let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let one = c(1.0, 0.0);
        CMatrix::from_row_slice(3, 3, &[one, one, one, one, z * z, z, one, z, z * z])
            .scale(1.0 / 3f64.sqrt())
    }

    #[test]
    fn permanent_small_cases() {
        let id = CMatrix::identity(3, 3);
        assert!((permanent(&id).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        let ones = CMatrix::from_element(3, 3, c(1.0, 0.0));
        assert!((permanent(&ones).unwrap() - c(6.0, 0.0)).norm() < 1e-12);
        let p = permanent(&tritter()).unwrap();
        assert!((p.norm_sqr() - 1.0 / 3.0).abs() < 1e-12);
        assert!((permanent(&CMatrix::zeros(0, 0)).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn permanent_rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(permanent(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn permanent_matches_naive_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            for _ in 0..20 {
                let m = random_matrix(n, &mut rng);
                let a = permanent(&m).unwrap();
                let b = permanent_naive(&m).unwrap();
                assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0), "n={n}");
            }
        }
    }

    #[test]
    fn cycles_canonical() {
        let id = Permutation::identity(3);
        assert_eq!(cycle_decomposition(&id), vec![vec![0], vec![1], vec![2]]);
        let swap = Permutation::new(vec![1, 0, 2]).unwrap();
        assert_eq!(cycle_decomposition(&swap), vec![vec![0, 1], vec![2]]);
        let three = Permutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(cycle_decomposition(&three), vec![vec![0, 1, 2]]);
        let mixed = Permutation::new(vec![3, 2, 1, 0]).unwrap();
        assert_eq!(cycle_decomposition(&mixed), vec![vec![0, 3], vec![1, 2]]);
        assert!(Permutation::new(vec![0, 0]).is_err());
    }

    #[test]
    fn permutation_enumeration_is_lexicographic() {
        let all: Vec<Vec<usize>> = permutations(3).map(|p| p.image().to_vec()).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[1], vec![0, 2, 1]);
        assert_eq!(all[5], vec![2, 1, 0]);
        assert_eq!(permutations(0).count(), 1);
        assert_eq!(permutations(5).count(), 120);
    }

    #[test]
    fn sign_of_cycles() {
        assert_eq!(Permutation::new(vec![1, 0, 2]).unwrap().sign(), -1);
        assert_eq!(Permutation::new(vec![1, 2, 0]).unwrap().sign(), 1);
        assert_eq!(Permutation::identity(4).sign(), 1);
    }

    #[test]
    fn row_permutation_and_hadamard() {
        let swap = Permutation::new(vec![1, 0]).unwrap();
        let p = permute_rows(&CMatrix::identity(2, 2), &swap).unwrap();
        assert_eq!(p[(0, 1)], c(1.0, 0.0));
        assert_eq!(p[(0, 0)], c(0.0, 0.0));
        let t = tritter();
        let h = hadamard(&t, &t.map(|x| x.conj())).unwrap();
        for x in h.iter() {
            assert!((x.re - 1.0 / 3.0).abs() < 1e-14 && x.im.abs() < 1e-14);
        }
        assert!(hadamard(&t, &CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn tritter_three_cycle_term() {
        // perm(U ⋆ U*_{σ}) for the 3-cycle on the tritter; the 3-cycle pair carries 4/9·cos φ.
        let t = tritter();
        let cyc = Permutation::new(vec![1, 2, 0]).unwrap();
        let a = hadamard(&t, &permute_rows(&t.map(|x| x.conj()), &cyc).unwrap()).unwrap();
        let p = permanent(&a).unwrap();
        assert!((p - c(2.0 / 9.0, 0.0)).norm() < 1e-12, "{p}");
        let swap = Permutation::new(vec![1, 0, 2]).unwrap();
        let a = hadamard(&t, &permute_rows(&t.map(|x| x.conj()), &swap).unwrap()).unwrap();
        assert!((permanent(&a).unwrap() - c(-1.0 / 9.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn evolve_zero_and_coupler() {
        let v = CVector::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.5)]);
        let out = hermitian_evolve(&CMatrix::zeros(2, 2), 3.0, &v).unwrap();
        assert!((out - &v).norm() < 1e-14);

        let k = 0.7;
        let l = 1.9;
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(k, 0.0), c(k, 0.0), c(0.0, 0.0)]);
        let out = hermitian_evolve(&h, l, &CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert!((out[0] - c((k * l).cos(), 0.0)).norm() < 1e-12);
        assert!((out[1] - c(0.0, -(k * l).sin())).norm() < 1e-12);
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let v = CVector::from_element(2, c(1.0, 0.0));
        assert!(matches!(hermitian_evolve(&h, 1.0, &v), Err(Error::NotHermitian(_))));
    }

    fn hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let a = random_matrix(n, rng);
        (&a + a.adjoint()).scale(0.5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn permanent_invariant_under_row_and_column_permutation(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(n, &mut rng);
            let mut rows: Vec<usize> = (0..n).collect();
            let mut cols: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                rows.swap(i, rng.gen_range(0..=i));
                cols.swap(i, rng.gen_range(0..=i));
            }
            let shuffled = CMatrix::from_fn(n, n, |i, j| m[(rows[i], cols[j])]);
            let a = permanent(&m).unwrap();
            let b = permanent(&shuffled).unwrap();
            prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
        }

        #[test]
        fn cycles_partition_indices(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut image: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                image.swap(i, rng.gen_range(0..=i));
            }
            let p = Permutation::new(image).unwrap();
            let cycles = cycle_decomposition(&p);
            let mut all: Vec<usize> = cycles.iter().flatten().copied().collect();
            prop_assert_eq!(all.len(), n);
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for w in cycles.windows(2) {
                prop_assert!(w[0][0] < w[1][0]);
            }
            for cyc in &cycles {
                prop_assert_eq!(cyc[0], *cyc.iter().min().unwrap());
            }
        }

        #[test]
        fn evolution_is_unitary_and_composes(seed in any::<u64>(), z1 in -3.0f64..3.0, z2 in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = hermitian(8, &mut rng);
            let v = CVector::from_fn(8, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let eig = HermitianEigen::new(&h).unwrap();
            let once = eig.evolve(z1 + z2, &v).unwrap();
            let twice = eig.evolve(z2, &eig.evolve(z1, &v).unwrap()).unwrap();
            prop_assert!((once.norm() - v.norm()).abs() < 1e-9);
            prop_assert!((&once - &twice).norm() < 1e-9);
        }
    }
}
