//! Finite-dimensional symmetric bilinear-form algebra.
//!
//! A form `B` is represented by its symmetric matrix in the standard basis.
//! The module computes the inertia triple `(n_-, n_0, n_+)`, B-orthogonal
//! complements `W^{perp_B} = { x : B(x, y) = 0 for all y in W }`, the
//! relative dimension `dim_V(W) = dim(W \cap V^perp) - dim(W^perp \cap V)`,
//! and the relative index
//!
//! ```text
//! ind_W(B) = n_-(B|_{W^{perp_B}}) - n_+(B|_W),
//! ```
//!
//! which equals the relative dimension of the negative eigenspace of the
//! realization of `B` with respect to `W`; both routes are evaluated and
//! compared. For paths of symmetric matrices with invertible endpoints the
//! spectral flow is the net count of eigenvalues crossing zero upwards,
//! `n_-(start) - n_-(end)`; crossings are additionally localized by adaptive
//! bisection of the parameter grid so that jumps hidden between grid points
//! are caught.

use thiserror::Error;

use crate::linalg::{self, Mat};
use crate::{cast, tol, Scalar};

#[derive(Debug, Error)]
pub enum BilinearError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("matrix asymmetry {defect:e} exceeds relative tolerance {tol:e}")]
    NotSymmetric { defect: f64, tol: f64 },
    #[error("subspace basis is rank deficient (rank {rank} of {cols} columns)")]
    RankDeficientBasis { rank: usize, cols: usize },
    #[error("ambient dimension mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },
    #[error("relative dimension {formula} disagrees with dim W - dim V = {counted}")]
    RelativeDimensionMismatch { formula: i64, counted: i64 },
    #[error("relative index mismatch: formula {formula}, eigenspace definition {definition}")]
    RelativeIndexMismatch { formula: i64, definition: i64 },
    #[error("path needs at least two samples")]
    PathTooShort,
    #[error("path grid is not strictly increasing at index {index}")]
    GridNotIncreasing { index: usize },
    #[error("path samples have mixed dimensions")]
    MixedDims,
    #[error("endpoint {which} of the path is not invertible ({n_zero} eigenvalues in the tolerance band)")]
    EndpointDegenerate { which: &'static str, n_zero: usize },
    #[error("crossing near [{lo:e}, {hi:e}] could not be resolved at maximum refinement depth")]
    UnresolvedCrossing { lo: f64, hi: f64 },
    #[error("tracked crossings sum to {tracked} but endpoint inertia difference is {endpoint}")]
    CrossingCountMismatch { tracked: i64, endpoint: i64 },
}

/// Symmetric bilinear form on `R^dim`, stored as its (symmetrized) matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymForm<S> {
    dim: usize,
    matrix: Mat<S>,
}

impl<S: Scalar> SymForm<S> {
    /// Ingests a matrix, rejecting asymmetry beyond `tol::SYMMETRY` relative
    /// to the largest entry, then symmetrizes to absorb assembly roundoff.
    pub fn new(matrix: Mat<S>) -> Result<Self, BilinearError> {
        if !matrix.is_square() {
            return Err(BilinearError::NotSquare { rows: matrix.rows(), cols: matrix.cols() });
        }
        if matrix.rows() == 0 {
            return Err(BilinearError::ZeroDim);
        }
        let scale = matrix.max_abs();
        let defect = matrix.sub(&matrix.transpose()).max_abs();
        if scale > S::zero() && defect > cast::<S>(tol::SYMMETRY) * scale {
            return Err(BilinearError::NotSymmetric {
                defect: (defect / scale).to_f64().unwrap_or(f64::NAN),
                tol: tol::SYMMETRY,
            });
        }
        let dim = matrix.rows();
        Ok(SymForm { dim, matrix: matrix.symmetrized() })
    }

    pub fn from_diag(diag: &[S]) -> Self {
        SymForm { dim: diag.len(), matrix: Mat::from_diag(diag) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Mat<S> {
        &self.matrix
    }

    /// Value `B(x, y)`.
    pub fn apply(&self, x: &[S], y: &[S]) -> S {
        let mx = self.matrix.mul_vec(y);
        x.iter().zip(mx.iter()).map(|(&a, &b)| a * b).sum()
    }

    /// Matrix of the restriction of the form to the span of the columns of
    /// `basis` (may have zero columns).
    pub fn restricted(&self, basis: &Mat<S>) -> Mat<S> {
        basis.transpose().mul(&self.matrix).mul(basis).symmetrized()
    }

    /// Congruent form `M^T B M`.
    pub fn congruent(&self, m: &Mat<S>) -> SymForm<S> {
        let matrix = m.transpose().mul(&self.matrix).mul(m).symmetrized();
        SymForm { dim: matrix.rows(), matrix }
    }
}

/// Inertia triple of a symmetric form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub n_minus: usize,
    pub n_zero: usize,
    pub n_plus: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }

    pub fn is_invertible(&self) -> bool {
        self.n_zero == 0
    }

    pub fn dim(&self) -> usize {
        self.n_minus + self.n_zero + self.n_plus
    }
}

/// Counts of eigenvalues below `-tol`, inside `[-tol, tol]` and above `tol`.
pub fn inertia<S: Scalar>(form: &SymForm<S>, tol: S) -> Inertia {
    inertia_of(&form.matrix, tol)
}

/// Inertia of a bare symmetric matrix; accepts the empty 0x0 restriction.
pub fn inertia_of<S: Scalar>(matrix: &Mat<S>, tol: S) -> Inertia {
    let eig = linalg::eigen_sym(matrix);
    let mut n = Inertia { n_minus: 0, n_zero: 0, n_plus: 0 };
    for &v in &eig.values {
        if v < -tol {
            n.n_minus += 1;
        } else if v > tol {
            n.n_plus += 1;
        } else {
            n.n_zero += 1;
        }
    }
    n
}

/// Subspace of `R^{ambient_dim}` spanned by full-column-rank basis columns.
#[derive(Clone, Debug)]
pub struct Subspace<S> {
    ambient_dim: usize,
    basis: Mat<S>,
}

impl<S: Scalar> Subspace<S> {
    pub fn new(basis: Mat<S>, tol: S) -> Result<Self, BilinearError> {
        let k = basis.cols();
        if k > 0 {
            let rank = linalg::rank_from_sigma(&linalg::svd(&basis).sigma, tol);
            if rank != k {
                return Err(BilinearError::RankDeficientBasis { rank, cols: k });
            }
        }
        Ok(Subspace { ambient_dim: basis.rows(), basis })
    }

    /// The zero subspace.
    pub fn zero(ambient_dim: usize) -> Self {
        Subspace { ambient_dim, basis: Mat::zeros(ambient_dim, 0) }
    }

    /// The whole ambient space.
    pub fn full(ambient_dim: usize) -> Self {
        Subspace { ambient_dim, basis: Mat::identity(ambient_dim) }
    }

    /// Span of the listed coordinate directions.
    pub fn coordinate(ambient_dim: usize, indices: &[usize]) -> Self {
        let mut basis = Mat::zeros(ambient_dim, indices.len());
        for (j, &i) in indices.iter().enumerate() {
            basis[(i, j)] = S::one();
        }
        Subspace { ambient_dim, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &Mat<S> {
        &self.basis
    }

    /// Orthonormalized basis of the same span.
    pub fn orthonormal_basis(&self, tol: S) -> Mat<S> {
        if self.dim() == 0 {
            return Mat::zeros(self.ambient_dim, 0);
        }
        linalg::range_basis(&self.basis, tol)
    }

    /// Euclidean orthogonal complement.
    pub fn orth_complement(&self, tol: S) -> Subspace<S> {
        Subspace { ambient_dim: self.ambient_dim, basis: linalg::orth_complement(&self.basis, tol) }
    }
}

/// B-orthogonal complement together with a flag marking fragile rank
/// decisions (a singular value inside the tolerance band).
#[derive(Clone, Debug)]
pub struct BOrthogonal<S> {
    pub complement: Subspace<S>,
    pub rank_ambiguous: bool,
}

const RANK_BAND: f64 = 16.0;

/// `W^{perp_B}`, computed as the kernel of `basis^T * matrix`.
pub fn b_orthogonal<S: Scalar>(
    form: &SymForm<S>,
    w: &Subspace<S>,
    tol: S,
) -> Result<BOrthogonal<S>, BilinearError> {
    if w.ambient_dim() != form.dim() {
        return Err(BilinearError::AmbientMismatch { left: form.dim(), right: w.ambient_dim() });
    }
    let constraints = w.basis().transpose().mul(form.matrix());
    let dec = linalg::svd(&constraints);
    let rank_ambiguous = linalg::rank_ambiguous(&dec.sigma, tol, cast(RANK_BAND));
    let r = linalg::rank_from_sigma(&dec.sigma, tol);
    let n = form.dim();
    let basis = Mat::from_fn(n, n - r, |i, j| dec.v.at(i, r + j));
    Ok(BOrthogonal { complement: Subspace { ambient_dim: n, basis }, rank_ambiguous })
}

/// Relative dimension `dim_V(W) = dim(W \cap V^perp) - dim(W^perp \cap V)`.
///
/// In finite dimension this always equals `dim W - dim V`; both routes are
/// computed and a mismatch (possible only through a bad rank decision) is an
/// error.
pub fn relative_dimension<S: Scalar>(
    v: &Subspace<S>,
    w: &Subspace<S>,
    tol: S,
) -> Result<i64, BilinearError> {
    if v.ambient_dim() != w.ambient_dim() {
        return Err(BilinearError::AmbientMismatch { left: v.ambient_dim(), right: w.ambient_dim() });
    }
    let v_perp = v.orth_complement(tol);
    let w_perp = w.orth_complement(tol);
    let a = linalg::intersect_dim(w.basis(), v_perp.basis(), tol) as i64;
    let b = linalg::intersect_dim(w_perp.basis(), v.basis(), tol) as i64;
    let formula = a - b;
    let counted = w.dim() as i64 - v.dim() as i64;
    if formula != counted {
        return Err(BilinearError::RelativeDimensionMismatch { formula, counted });
    }
    Ok(formula)
}

/// Relative index of a form with respect to a subspace, by two routes.
#[derive(Clone, Copy, Debug)]
pub struct RelativeIndex {
    /// `n_-(B|_{W^{perp_B}}) - n_+(B|_W)`, the returned value.
    pub value: i64,
    /// `dim_W(V^-(S))` computed from the numerically determined negative
    /// eigenspace; agrees with `value` whenever the result is `Ok`.
    pub by_definition: i64,
    /// Fragile rank decision somewhere along the way.
    pub rank_ambiguous: bool,
}

/// `ind_W(B)`, evaluated both as `n_-(B|_{W^{perp_B}}) - n_+(B|_W)` and as
/// the relative dimension of the negative eigenspace with respect to `W`.
/// Disagreement between the two routes is reported as an error carrying both
/// integers; it signals eigenvalues or singular values inside the tolerance
/// band.
pub fn relative_index<S: Scalar>(
    form: &SymForm<S>,
    w: &Subspace<S>,
    tol: S,
) -> Result<RelativeIndex, BilinearError> {
    if w.ambient_dim() != form.dim() {
        return Err(BilinearError::AmbientMismatch { left: form.dim(), right: w.ambient_dim() });
    }
    let eig = linalg::eigen_sym(form.matrix());
    let scale = eig
        .values
        .iter()
        .fold(S::zero(), |m, &v| m.max(v.abs()))
        .max(S::min_positive_value());
    let cut = tol * scale;

    // formula route
    let ortho = b_orthogonal(form, w, tol)?;
    let comp_basis = ortho.complement.basis();
    let n_minus_comp = inertia_of(&form.restricted(comp_basis), cut).n_minus as i64;
    let w_basis = w.orthonormal_basis(tol);
    let n_plus_w = inertia_of(&form.restricted(&w_basis), cut).n_plus as i64;
    let value = n_minus_comp - n_plus_w;

    // definition route: relative dimension of the negative eigenspace
    let neg_cols: Vec<Vec<S>> = eig
        .values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v < -cut)
        .map(|(j, _)| eig.vectors.col(j))
        .collect();
    let v_minus = Subspace { ambient_dim: form.dim(), basis: Mat::from_cols(form.dim(), &neg_cols) };
    let by_definition = relative_dimension(w, &v_minus, tol)?;

    if value != by_definition {
        return Err(BilinearError::RelativeIndexMismatch { formula: value, definition: by_definition });
    }
    Ok(RelativeIndex { value, by_definition, rank_ambiguous: ortho.rank_ambiguous })
}

/// Sampled path of symmetric forms on a strictly increasing grid.
#[derive(Clone, Debug)]
pub struct MatrixPath<S> {
    grid: Vec<S>,
    samples: Vec<SymForm<S>>,
}

impl<S: Scalar> MatrixPath<S> {
    pub fn new(grid: Vec<S>, samples: Vec<SymForm<S>>) -> Result<Self, BilinearError> {
        if grid.len() < 2 || grid.len() != samples.len() {
            return Err(BilinearError::PathTooShort);
        }
        for i in 1..grid.len() {
            if grid[i] <= grid[i - 1] {
                return Err(BilinearError::GridNotIncreasing { index: i });
            }
        }
        let dim = samples[0].dim();
        if samples.iter().any(|s| s.dim() != dim) {
            return Err(BilinearError::MixedDims);
        }
        Ok(MatrixPath { grid, samples })
    }

    pub fn grid(&self) -> &[S] {
        &self.grid
    }

    pub fn samples(&self) -> &[SymForm<S>] {
        &self.samples
    }

    /// Piecewise-linear interpolation between the stored samples.
    pub fn interpolate(&self, s: S) -> SymForm<S> {
        let n = self.grid.len();
        if s <= self.grid[0] {
            return self.samples[0].clone();
        }
        if s >= self.grid[n - 1] {
            return self.samples[n - 1].clone();
        }
        let mut i = 0;
        while self.grid[i + 1] < s {
            i += 1;
        }
        let f = (s - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        let m = self.samples[i]
            .matrix()
            .scaled(S::one() - f)
            .add(&self.samples[i + 1].matrix().scaled(f));
        SymForm { dim: m.rows(), matrix: m }
    }
}

/// One localized crossing of the path: the bracket in the parameter, and the
/// change of `n_-` across it (an upward eigenvalue crossing has
/// `delta_n_minus = -1`).
#[derive(Clone, Copy, Debug)]
pub struct CrossingEvent<S> {
    pub bracket: (S, S),
    pub delta_n_minus: i64,
}

/// Spectral flow of a path, with endpoint inertias and localized crossings.
#[derive(Clone, Debug)]
pub struct SpectralFlow<S> {
    /// `n_-(start) - n_-(end)`: eigenvalues crossing zero upwards count +1.
    pub flow: i64,
    pub start: Inertia,
    pub end: Inertia,
    pub crossings: Vec<CrossingEvent<S>>,
}

const MAX_REFINE_DEPTH: usize = 60;

/// Spectral flow of a sampled path. Refinement between samples evaluates the
/// piecewise-linear interpolant; endpoints must be invertible.
pub fn spectral_flow<S: Scalar>(
    path: &MatrixPath<S>,
    tol: S,
) -> Result<SpectralFlow<S>, BilinearError> {
    let p = path.clone();
    spectral_flow_of(move |s| p.interpolate(s), path.grid(), tol)
}

/// Spectral flow of `s -> eval(s)` over the given grid, with adaptive
/// bisection wherever the inertia changes between neighbouring samples.
pub fn spectral_flow_of<S: Scalar>(
    eval: impl Fn(S) -> SymForm<S>,
    grid: &[S],
    tol: S,
) -> Result<SpectralFlow<S>, BilinearError> {
    if grid.len() < 2 {
        return Err(BilinearError::PathTooShort);
    }
    // One absolute eigenvalue threshold for the whole path, anchored at the
    // endpoint scale, keeps inertia comparisons along the path consistent.
    let scale_at = |s: S| -> S {
        let eig = linalg::eigen_sym(eval(s).matrix());
        eig.values.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    };
    let scale = scale_at(grid[0]).max(scale_at(grid[grid.len() - 1])).max(S::min_positive_value());
    let cut = tol * scale;
    spectral_flow_counts(move |s| inertia(&eval(s), cut), grid)
}

/// Spectral-flow engine over a caller-supplied inertia classifier; the
/// classifier must use one consistent eigenvalue threshold along the whole
/// path.
pub fn spectral_flow_counts<S: Scalar>(
    classify: impl Fn(S) -> Inertia,
    grid: &[S],
) -> Result<SpectralFlow<S>, BilinearError> {
    if grid.len() < 2 {
        return Err(BilinearError::PathTooShort);
    }
    let inertias: Vec<Inertia> = grid.iter().map(|&s| classify(s)).collect();
    let start = inertias[0];
    let end = inertias[inertias.len() - 1];
    if !start.is_invertible() {
        return Err(BilinearError::EndpointDegenerate { which: "start", n_zero: start.n_zero });
    }
    if !end.is_invertible() {
        return Err(BilinearError::EndpointDegenerate { which: "end", n_zero: end.n_zero });
    }
    let flow = start.n_minus as i64 - end.n_minus as i64;

    // Walk between invertible samples, skipping over degenerate grid points
    // (a crossing may sit exactly on a sample).
    let mut events: Vec<CrossingEvent<S>> = Vec::new();
    let mut prev = 0usize;
    for i in 1..grid.len() {
        if !inertias[i].is_invertible() {
            continue;
        }
        if inertias[i].n_minus != inertias[prev].n_minus || inertias[i].n_plus != inertias[prev].n_plus
        {
            resolve(&classify, grid[prev], inertias[prev], grid[i], inertias[i], 0, &mut events)?;
        }
        prev = i;
    }

    let tracked: i64 = events.iter().map(|e| -e.delta_n_minus).sum();
    if tracked != flow {
        return Err(BilinearError::CrossingCountMismatch { tracked, endpoint: flow });
    }
    Ok(SpectralFlow { flow, start, end, crossings: events })
}

/// Recursively bisects `[a, b]` (invertible inertia at both ends, differing
/// across) until each crossing is bracketed tightly. A degenerate midpoint is
/// sidestepped by an off-center split; if no invertible split point can be
/// found before the depth limit, the crossing is unresolvable.
fn resolve<S: Scalar>(
    classify: &impl Fn(S) -> Inertia,
    a: S,
    ia: Inertia,
    b: S,
    ib: Inertia,
    depth: usize,
    events: &mut Vec<CrossingEvent<S>>,
) -> Result<(), BilinearError> {
    let width = b - a;
    let span_eps = cast::<S>(1e-12) * (a.abs() + b.abs() + S::one());
    if depth >= MAX_REFINE_DEPTH || width <= span_eps {
        if depth >= MAX_REFINE_DEPTH {
            return Err(BilinearError::UnresolvedCrossing {
                lo: a.to_f64().unwrap_or(f64::NAN),
                hi: b.to_f64().unwrap_or(f64::NAN),
            });
        }
        events.push(CrossingEvent {
            bracket: (a, b),
            delta_n_minus: ib.n_minus as i64 - ia.n_minus as i64,
        });
        return Ok(());
    }
    // try the midpoint, then two off-center fractions if it lands on a
    // degenerate sample
    let mut im = None;
    for &f in &[0.5, 0.4375, 0.5625] {
        let m = a + width * cast::<S>(f);
        let c = classify(m);
        if c.is_invertible() {
            im = Some((m, c));
            break;
        }
    }
    let Some((m, ic)) = im else {
        // an eigenvalue hugs zero across the whole stretch
        if width <= span_eps * cast::<S>(4.0) {
            events.push(CrossingEvent {
                bracket: (a, b),
                delta_n_minus: ib.n_minus as i64 - ia.n_minus as i64,
            });
            return Ok(());
        }
        return Err(BilinearError::UnresolvedCrossing {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
        });
    };
    if ic.n_minus != ia.n_minus || ic.n_plus != ia.n_plus {
        resolve(classify, a, ia, m, ic, depth + 1, events)?;
    }
    if ic.n_minus != ib.n_minus || ic.n_plus != ib.n_plus {
        resolve(classify, m, ic, b, ib, depth + 1, events)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(rows: &[&[f64]]) -> SymForm<f64> {
        SymForm::new(Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())).unwrap()
    }

    #[test]
    fn inertia_of_hyperbolic_plane() {
        let f = SymForm::from_diag(&[-1.0, 1.0]);
        assert_eq!(inertia(&f, 1e-10), Inertia { n_minus: 1, n_zero: 0, n_plus: 1 });
    }

    #[test]
    fn inertia_of_null_form() {
        let f = SymForm::from_diag(&[0.0, 0.0, 0.0]);
        assert_eq!(inertia(&f, 1e-10), Inertia { n_minus: 0, n_zero: 3, n_plus: 0 });
    }

    // Expected counts computed with an independent dense symmetric
    // eigensolver before this module was written.
    #[test]
    fn inertia_matches_frozen_oracle() {
        let a = Mat::from_rows(&vec![
            vec![-0.318486162100847, -0.7216015711953723, 0.3818063862999177, 1.546666020865396, -0.9139937654593078, -0.9781087433848399, 0.8343537747268008, -0.9006895394388492],
            vec![-0.7216015711953723, 0.27663581016145855, -0.3758262582135512, 0.010036912485440252, -0.11064254212490354, 1.0899811264706467, 0.3437805644075831, -0.2793456524965796],
            vec![0.3818063862999177, -0.3758262582135512, -0.6950856007538948, -0.3714458122759978, 0.1745387090470636, 0.14058893525408545, -0.7804582427778797, -0.7029131186736812],
            vec![1.546666020865396, 0.010036912485440252, -0.3714458122759978, 1.4411305644344008, -0.17715495442893103, -0.8064745581173054, -0.9971024342979227, -1.772743983679416],
            vec![-0.9139937654593078, -0.11064254212490354, 0.1745387090470636, -0.17715495442893103, 1.441431591784831, -0.4871237430157669, -1.2245793520442023, -0.2669744084812593],
            vec![-0.9781087433848399, 1.0899811264706467, 0.14058893525408545, -0.8064745581173054, -0.4871237430157669, 1.9901189009418587, -0.09621915394636305, -0.30935912855536474],
            vec![0.8343537747268008, 0.3437805644075831, -0.7804582427778797, -0.9971024342979227, -1.2245793520442023, -0.09621915394636305, 1.9738736724079087, -0.7833628253274347],
            vec![-0.9006895394388492, -0.2793456524965796, -0.7029131186736812, -1.772743983679416, -0.2669744084812593, -0.30935912855536474, -0.7833628253274347, 0.6246832631279995],
        ]);
        let f = SymForm::new(a).unwrap();
        assert_eq!(inertia(&f, 1e-8), Inertia { n_minus: 3, n_zero: 0, n_plus: 5 });
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let m = Mat::from_rows(&vec![vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(SymForm::new(m), Err(BilinearError::NotSymmetric { .. })));
    }

    #[test]
    fn b_orthogonal_euclidean() {
        let f = SymForm::from_diag(&[1.0, 1.0, 1.0]);
        let w = Subspace::coordinate(3, &[0]);
        let c = b_orthogonal(&f, &w, 1e-8).unwrap();
        assert_eq!(c.complement.dim(), 2);
        // complement must annihilate e1 under B
        for j in 0..2 {
            assert!(c.complement.basis().at(0, j).abs() < 1e-12);
        }
    }

    #[test]
    fn b_orthogonal_indefinite_and_singular() {
        let f = SymForm::from_diag(&[-1.0, 1.0, 1.0]);
        let w = Subspace::coordinate(3, &[1]);
        let c = b_orthogonal(&f, &w, 1e-8).unwrap();
        assert_eq!(c.complement.dim(), 2);
        for j in 0..2 {
            assert!(c.complement.basis().at(1, j).abs() < 1e-12);
        }

        // singular form: B = diag(1, 0), W = span(e1) -> complement span(e2)
        let f = SymForm::from_diag(&[1.0, 0.0]);
        let w = Subspace::coordinate(2, &[0]);
        let c = b_orthogonal(&f, &w, 1e-8).unwrap();
        assert_eq!(c.complement.dim(), 1);
        assert!(c.complement.basis().at(0, 0).abs() < 1e-12);
        assert!(c.complement.basis().at(1, 0).abs() > 0.99);
    }

    #[test]
    fn relative_dimension_examples() {
        let v = Subspace::<f64>::coordinate(4, &[0, 1]);
        assert_eq!(relative_dimension(&v, &v, 1e-8).unwrap(), 0);
        let zero = Subspace::<f64>::zero(4);
        let w = Subspace::<f64>::coordinate(4, &[0, 1]);
        assert_eq!(relative_dimension(&zero, &w, 1e-8).unwrap(), 2);
    }

    #[test]
    fn relative_index_examples() {
        // ind_{0}(B) = n_-(B)
        let b = SymForm::from_diag(&[-1.0, 1.0]);
        let w = Subspace::zero(2);
        assert_eq!(relative_index(&b, &w, 1e-8).unwrap().value, 1);

        // positive definite B, W = span(e1): 0 - 1 = -1
        let b = SymForm::from_diag(&[1.0, 1.0]);
        let w = Subspace::coordinate(2, &[0]);
        assert_eq!(relative_index(&b, &w, 1e-8).unwrap().value, -1);

        // B = diag(-1,1,1), W = span(e2): n_-(B|span(e1,e3)) - n_+(B|W) = 1 - 1
        let b = SymForm::from_diag(&[-1.0, 1.0, 1.0]);
        let w = Subspace::coordinate(3, &[1]);
        assert_eq!(relative_index(&b, &w, 1e-8).unwrap().value, 0);
    }

    #[test]
    fn spectral_flow_single_upward_crossing() {
        let grid: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let samples: Vec<SymForm<f64>> =
            grid.iter().map(|&s| SymForm::from_diag(&[s - 0.5])).collect();
        let path = MatrixPath::new(grid, samples).unwrap();
        let sf = spectral_flow(&path, 1e-8).unwrap();
        assert_eq!(sf.flow, 1);
        assert_eq!(sf.crossings.len(), 1);
        let (lo, hi) = sf.crossings[0].bracket;
        assert!(lo <= 0.5 && 0.5 <= hi);
    }

    #[test]
    fn spectral_flow_constant_invertible_path_is_zero() {
        let grid: Vec<f64> = vec![0.0, 0.5, 1.0];
        let samples = vec![
            SymForm::from_diag(&[-2.0, 1.0]),
            SymForm::from_diag(&[-2.0, 1.0]),
            SymForm::from_diag(&[-2.0, 1.0]),
        ];
        let path = MatrixPath::new(grid, samples).unwrap();
        let sf = spectral_flow(&path, 1e-8).unwrap();
        assert_eq!(sf.flow, 0);
        assert!(sf.crossings.is_empty());
    }

    #[test]
    fn spectral_flow_up_down_cancel() {
        let grid: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let samples: Vec<SymForm<f64>> =
            grid.iter().map(|&s| SymForm::from_diag(&[s - 0.3, 0.7 - s])).collect();
        let path = MatrixPath::new(grid, samples).unwrap();
        let sf = spectral_flow(&path, 1e-8).unwrap();
        assert_eq!(sf.flow, 0);
        assert_eq!(sf.crossings.len(), 2);
    }

    #[test]
    fn spectral_flow_crossing_on_a_grid_point() {
        // the crossing sits exactly on the sample s = 0.5
        let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let samples: Vec<SymForm<f64>> =
            grid.iter().map(|&s| SymForm::from_diag(&[s - 0.5])).collect();
        let path = MatrixPath::new(grid, samples).unwrap();
        let sf = spectral_flow(&path, 1e-8).unwrap();
        assert_eq!(sf.flow, 1);
    }

    #[test]
    fn spectral_flow_rejects_degenerate_endpoint() {
        let grid: Vec<f64> = vec![0.0, 1.0];
        let samples = vec![SymForm::from_diag(&[0.0]), SymForm::from_diag(&[1.0])];
        let path = MatrixPath::new(grid, samples).unwrap();
        assert!(matches!(
            spectral_flow(&path, 1e-8),
            Err(BilinearError::EndpointDegenerate { which: "start", .. })
        ));
    }

    #[test]
    fn restriction_to_subspace() {
        let f = form(&[&[2.0, 1.0], &[1.0, -3.0]]);
        let w = Subspace::coordinate(2, &[1]);
        let r = f.restricted(w.basis());
        assert_eq!(r.rows(), 1);
        assert!((r.at(0, 0) + 3.0).abs() < 1e-14);
    }
}
