//! Finite-element primitives shared by the Stokes and surface solvers:
//! Gauss-Legendre quadrature on the unit interval/square, P1/Q1/Q2
//! Lagrange bases, a triplet sparse system with a direct LU solve, and a
//! pivoted tridiagonal solve for the surface Newton systems.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::{Error, Result};

/// Element family a quadrature rule applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadFamily {
    /// Unit interval `[0, 1]`.
    Interval,
    /// Unit square `[0, 1]^2`.
    Quad,
}

/// Quadrature points and weights on the reference element.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates; one entry per point, `[xi]` or `[xi, eta]`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub family: QuadFamily,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact through degree
/// `2n - 1`. Nodes are found by Newton iteration on the Legendre
/// polynomial; accurate to machine precision for the sizes used here.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess on [-1, 1].
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(t) and derivative by recurrence.
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { t } else { p1 };
            let dpn = n as f64 * (t * pn - p0) / (t * t - 1.0);
            let dt = pn / dpn;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, t);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dpn = n as f64 * (t * p1 - p0) / (t * t - 1.0);
        // Map from [-1, 1] to [0, 1].
        x[n - 1 - i] = 0.5 * (t + 1.0);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dpn * dpn);
    }
    (x, w)
}

/// Builds a rule exact for polynomials up to `degree` on the family's
/// reference element (tensor product for quads).
pub fn quad_rule(family: QuadFamily, degree: usize) -> Result<QuadratureRule> {
    if degree < 1 {
        return Err(Error::InvalidArgument(format!("quadrature degree must be >= 1, got {degree}")));
    }
    let n = degree / 2 + 1; // 2n - 1 >= degree
    let (x, w) = gauss_legendre_unit(n);
    match family {
        QuadFamily::Interval => {
            let points = x.iter().map(|&xi| [xi, 0.0]).collect();
            Ok(QuadratureRule { points, weights: w, family })
        }
        QuadFamily::Quad => {
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    points.push([x[i], x[j]]);
                    weights.push(w[i] * w[j]);
                }
            }
            Ok(QuadratureRule { points, weights, family })
        }
    }
}

// --- Lagrange bases on the unit reference elements -------------------

/// P1 hat values on `[0, 1]`.
pub fn p1(t: f64) -> [f64; 2] {
    [1.0 - t, t]
}

/// 1D linear Lagrange basis at {0, 1}.
pub fn lag1(t: f64) -> [f64; 2] {
    [1.0 - t, t]
}

pub fn lag1_d() -> [f64; 2] {
    [-1.0, 1.0]
}

/// 1D quadratic Lagrange basis at {0, 1/2, 1}.
pub fn lag2(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
}

pub fn lag2_d(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0]
}

/// Q1 basis on the unit square; local node `(a, b)` maps to index `2a + b`.
pub fn q1(xi: f64, eta: f64) -> [f64; 4] {
    let lx = lag1(xi);
    let le = lag1(eta);
    let mut v = [0.0; 4];
    for a in 0..2 {
        for b in 0..2 {
            v[2 * a + b] = lx[a] * le[b];
        }
    }
    v
}

/// Q2 basis on the unit square; local node `(a, b)` maps to index `3a + b`
/// with `a, b` over {0, 1/2, 1}.
pub fn q2(xi: f64, eta: f64) -> [f64; 9] {
    let lx = lag2(xi);
    let le = lag2(eta);
    let mut v = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            v[3 * a + b] = lx[a] * le[b];
        }
    }
    v
}

/// Reference gradients `(d/dxi, d/deta)` of the Q2 basis.
pub fn q2_grad(xi: f64, eta: f64) -> [[f64; 2]; 9] {
    let lx = lag2(xi);
    let le = lag2(eta);
    let dx = lag2_d(xi);
    let de = lag2_d(eta);
    let mut g = [[0.0; 2]; 9];
    for a in 0..3 {
        for b in 0..3 {
            g[3 * a + b] = [dx[a] * le[b], lx[a] * de[b]];
        }
    }
    g
}

/// Reference gradients of the Q1 basis.
pub fn q1_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let lx = lag1(xi);
    let le = lag1(eta);
    let dx = lag1_d();
    let de = lag1_d();
    let mut g = [[0.0; 2]; 4];
    for a in 0..2 {
        for b in 0..2 {
            g[2 * a + b] = [dx[a] * le[b], lx[a] * de[b]];
        }
    }
    g
}

// --- Sparse direct solve ---------------------------------------------

/// Square sparse system in triplet form plus right-hand side. Duplicate
/// entries are summed when the matrix is compressed.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(n: usize) -> SparseSystem {
        SparseSystem { n, triplets: Vec::new(), rhs: vec![0.0; n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.triplets.push((i, j, v));
        }
    }
}

/// Cached direct factorization. The symbolic analysis is reused whenever
/// the sparsity pattern repeats (every Newton step on a fixed mesh), and
/// the numeric factorization can be carried across iterations chord-style.
pub struct SparseLu {
    n: usize,
    symbolic: SymbolicLu<usize>,
    numeric: Lu<usize, f64>,
}

fn to_faer(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let entries: Vec<Triplet<usize, usize, f64>> =
        triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(n, n, &entries)
        .map_err(|e| Error::SolverFailure(format!("sparse assembly failed: {e:?}")))
}

impl SparseLu {
    /// Factorizes the system matrix (symbolic + numeric).
    pub fn factorize(system: &SparseSystem) -> Result<SparseLu> {
        let mat = to_faer(system.n, &system.triplets)?;
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| Error::SolverFailure(format!("symbolic LU failed: {e:?}")))?;
        let numeric = Lu::try_new_with_symbolic(symbolic.clone(), mat.rb())
            .map_err(|e| Error::SolverFailure(format!("numeric LU failed: {e:?}")))?;
        Ok(SparseLu { n: system.n, symbolic, numeric })
    }

    /// Refactorizes a matrix with the same sparsity pattern, reusing the
    /// symbolic analysis.
    pub fn refactorize(&mut self, system: &SparseSystem) -> Result<()> {
        let mat = to_faer(system.n, &system.triplets)?;
        self.numeric = Lu::try_new_with_symbolic(self.symbolic.clone(), mat.rb())
            .map_err(|e| Error::SolverFailure(format!("numeric LU failed: {e:?}")))?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = rhs` with the current factorization.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.numeric.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Direct sparse solve with a post-solve residual check:
/// `|Ax - b|_inf / |b|_inf <= 1e-10` or the factorization is reported as
/// failed, carrying the achieved residual as the pivot-quality diagnostic.
pub fn solve_sparse(system: &SparseSystem) -> Result<Vec<f64>> {
    if system.rhs.len() != system.n {
        return Err(Error::InvalidArgument(format!(
            "rhs has {} entries for an {}x{} system",
            system.rhs.len(),
            system.n,
            system.n
        )));
    }
    let lu = SparseLu::factorize(system)?;
    let x = lu.solve(&system.rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("factorization produced non-finite entries (singular pivot)".into()));
    }
    let r = residual_inf(system, &x);
    let b_inf = system.rhs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if b_inf > 0.0 && r > 1e-10 * b_inf {
        return Err(Error::SolverFailure(format!(
            "direct solve residual {r:.3e} exceeds 1e-10 * |b|_inf = {:.3e}; matrix likely ill-conditioned",
            1e-10 * b_inf
        )));
    }
    Ok(x)
}

/// Infinity norm of `A x - b` computed from the triplets.
pub fn residual_inf(system: &SparseSystem, x: &[f64]) -> f64 {
    let mut r = system.rhs.iter().map(|&v| -v).collect::<Vec<_>>();
    for &(i, j, v) in &system.triplets {
        r[i] += v * x[j];
    }
    r.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

// --- Tridiagonal solve with partial pivoting --------------------------

/// Solves a tridiagonal system with rowwise partial pivoting (LAPACK
/// `gtsv` style). `sub[i]` couples row `i+1` to column `i`; `sup[i]`
/// couples row `i` to column `i+1`.
pub fn solve_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if sub.len() != n - 1 || sup.len() != n - 1 || rhs.len() != n {
        return Err(Error::InvalidArgument("tridiagonal dimensions inconsistent".into()));
    }
    // Band storage with one extra superdiagonal created by pivoting.
    let mut d = diag.to_vec();
    let mut e = sup.to_vec();
    let mut f2 = vec![0.0; n.saturating_sub(2)];
    let mut l = sub.to_vec();
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if l[i].abs() > d[i].abs() {
            // Swap rows i and i+1.
            d.swap(i, i + 1);
            std::mem::swap(&mut l[i], &mut e[i]);
            // Row i+1 originally has no entry in column i+2; row i gains one.
            if i + 2 < n {
                f2[i] = e[i + 1];
                e[i + 1] = 0.0;
            }
            b.swap(i, i + 1);
            // After the swap the naming is: row i = (d[i], e[i], f2[i]),
            // row i+1 = (l[i], d[i+1], e[i+1]).
        }
        if d[i] == 0.0 {
            return Err(Error::SolverFailure(format!("tridiagonal solve: zero pivot at row {i}")));
        }
        let m = l[i] / d[i];
        d[i + 1] -= m * e[i];
        if i + 2 < n {
            e[i + 1] -= m * f2[i];
        }
        b[i + 1] -= m * b[i];
    }
    if d[n - 1] == 0.0 {
        return Err(Error::SolverFailure("tridiagonal solve: zero pivot at last row".into()));
    }
    // Back substitution over the (at most) two superdiagonals.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= e[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= f2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quad_rule_midpoint_on_unit_interval() {
        let r = quad_rule(QuadFamily::Interval, 1).unwrap();
        assert_eq!(r.points.len(), 1);
        let int_x: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| p[0] * w).sum();
        assert_eq!(int_x, 0.5);
    }

    #[test]
    fn quad_rule_degree5_on_square() {
        // integral of x^2 y^3 over [0,1]^2 = 1/12, symbolic oracle.
        let r = quad_rule(QuadFamily::Quad, 5).unwrap();
        let v: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| p[0] * p[0] * p[1] * p[1] * p[1] * w)
            .sum();
        assert_relative_eq!(v, 1.0 / 12.0, max_relative = 1e-14);
    }

    #[test]
    fn quad_rule_two_point_gauss_odd_symmetry() {
        // Map the [0,1] rule to [-1,1]; integral of x^3 vanishes.
        let r = quad_rule(QuadFamily::Interval, 3).unwrap();
        assert_eq!(r.points.len(), 2);
        let v: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| {
                let x = 2.0 * p[0] - 1.0;
                x * x * x * w * 2.0
            })
            .sum();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn quad_rule_weights_positive_and_sum_to_measure() {
        for deg in 1..=9 {
            let r = quad_rule(QuadFamily::Interval, deg).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            let s: f64 = r.weights.iter().sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-14);
            let r = quad_rule(QuadFamily::Quad, deg).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn quad_rule_exactness_against_monomials() {
        for deg in 1..=8 {
            let r = quad_rule(QuadFamily::Interval, deg).unwrap();
            for k in 0..=deg {
                let v: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| p[0].powi(k as i32) * w).sum();
                assert_relative_eq!(v, 1.0 / (k as f64 + 1.0), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn quad_rule_rejects_degree_zero() {
        assert!(quad_rule(QuadFamily::Quad, 0).is_err());
    }

    #[test]
    fn bases_partition_of_unity() {
        let pts = [(0.12, 0.77), (0.5, 0.5), (0.98, 0.03), (0.0, 1.0)];
        for (xi, eta) in pts {
            let s2: f64 = q2(xi, eta).iter().sum();
            let s1: f64 = q1(xi, eta).iter().sum();
            assert!((s2 - 1.0).abs() < 1e-14);
            assert!((s1 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn q2_reproduces_quadratics() {
        // Interpolate f(x, y) = 3x^2 - 2xy + y^2 + x - 4 at the 9 nodes and
        // check exact reproduction at quadrature points.
        let f = |x: f64, y: f64| 3.0 * x * x - 2.0 * x * y + y * y + x - 4.0;
        let nodes = [0.0, 0.5, 1.0];
        let mut coeff = [0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                coeff[3 * a + b] = f(nodes[a], nodes[b]);
            }
        }
        let r = quad_rule(QuadFamily::Quad, 6).unwrap();
        for p in &r.points {
            let basis = q2(p[0], p[1]);
            let v: f64 = basis.iter().zip(&coeff).map(|(b, c)| b * c).sum();
            assert_relative_eq!(v, f(p[0], p[1]), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_sparse_identity() {
        let mut sys = SparseSystem::new(4);
        for i in 0..4 {
            sys.add(i, i, 1.0);
        }
        sys.rhs = vec![3.0, -1.0, 0.5, 9.0];
        let x = solve_sparse(&sys).unwrap();
        for (xi, bi) in x.iter().zip(&sys.rhs) {
            assert_relative_eq!(xi, bi, max_relative = 1e-12);
        }
    }

    #[test]
    fn solve_sparse_two_by_two() {
        let mut sys = SparseSystem::new(2);
        sys.add(0, 0, 2.0);
        sys.add(0, 1, 1.0);
        sys.add(1, 0, 1.0);
        sys.add(1, 1, 2.0);
        sys.rhs = vec![3.0, 3.0];
        let x = solve_sparse(&sys).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-12);
    }

    /// Dense LU with partial pivoting, written independently of the sparse
    /// path, as the oracle for the random SPD check.
    fn dense_lu_solve(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let m = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= m * a[k][j];
                }
                b[i] -= m * b[k];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                b[i] -= a[i][j] * b[j];
            }
            b[i] /= a[i][i];
        }
    }

    #[test]
    fn solve_sparse_matches_dense_oracle_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut m = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = rng.gen_range(-1.0..1.0);
            }
        }
        // A = M^T M + n I is SPD.
        let mut a = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[k][i] * m[k][j];
                }
                a[i][j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sys = SparseSystem::new(n);
        for i in 0..n {
            for j in 0..n {
                sys.add(i, j, a[i][j]);
            }
        }
        sys.rhs = b.clone();
        let x = solve_sparse(&sys).unwrap();
        let mut a_copy = a.clone();
        let mut x_oracle = b;
        dense_lu_solve(&mut a_copy, &mut x_oracle);
        for i in 0..n {
            assert_relative_eq!(x[i], x_oracle[i], max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_sparse_reports_singular() {
        let mut sys = SparseSystem::new(2);
        sys.add(0, 0, 1.0);
        sys.add(0, 1, 1.0);
        sys.add(1, 0, 1.0);
        sys.add(1, 1, 1.0);
        sys.rhs = vec![1.0, 2.0];
        assert!(matches!(solve_sparse(&sys), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn load_assembly_is_linear() {
        // Assembling the P1 load vector of f + g equals the sum of loads.
        use crate::mesh::{IntervalMesh, SurfaceField};
        use crate::surface::p1_load;
        let m = IntervalMesh::build_interval(10.0, 13).unwrap();
        let f = SurfaceField::from_fn(m.clone(), |x| x * x - 3.0);
        let g = SurfaceField::from_fn(m.clone(), |x| (x * 0.7).sin());
        let mut sum = f.clone();
        for (v, w) in sum.values_mut().iter_mut().zip(g.values()) {
            *v += w;
        }
        let lf = p1_load(&f);
        let lg = p1_load(&g);
        let lsum = p1_load(&sum);
        for i in 0..m.n_nodes() {
            assert_relative_eq!(lsum[i], lf[i] + lg[i], max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn tridiag_with_pivoting_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 3 + (trial % 9);
            let sub: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sup: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // Include rows where the subdiagonal dominates to force pivoting.
            let diag: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 0.1 } else { 3.0 }).collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_tridiag(&sub, &diag, &sup, &rhs).unwrap();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                a[i][i] = diag[i];
                if i + 1 < n {
                    a[i][i + 1] = sup[i];
                    a[i + 1][i] = sub[i];
                }
            }
            let mut xo = rhs.clone();
            dense_lu_solve(&mut a, &mut xo);
            for i in 0..n {
                assert_relative_eq!(x[i], xo[i], max_relative = 1e-9, epsilon = 1e-11);
            }
        }
    }
}
