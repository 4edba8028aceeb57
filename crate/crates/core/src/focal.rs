//! Initial-submanifold (focal) boundary data.
//!
//! The trivialized data of a submanifold through the starting point is a
//! subspace `P` of `R^n` on which `g` is nondegenerate, together with the
//! second fundamental form `S` in the chosen basis of `P`. A focal Jacobi
//! field satisfies
//!
//! ```text
//! J(0) in P,     g(J'(0), .) + S(J(0), .) = 0  on P,
//! ```
//!
//! so the admissible Cauchy data span the Lagrangian subspace
//! `{ (v, gw) : v in P, (gw)|_P = -S(v, .) }`: each basis vector of `P`
//! paired with a covector solving the linear condition, completed by the
//! annihilator of `P`. Dragging that frame through the flow and repeating
//! the crossing-count machinery yields the P-Maslov index; the Galerkin
//! route computes it as the relative index of the focal endpoint form minus
//! the correction `n_-(g|_P)`, and the spectral flow of the focal path is
//! its negative.

use thiserror::Error;

use crate::index_form::{
    focal_path_spectral_flow, focal_relative_index, BasisSpec, GalerkinError,
};
use crate::linalg::{self, Mat};
use crate::maslov::{
    maslov_index_geodesic_on_track, LagrangianFrame, MaslovError,
};
use crate::morse_sturm::{
    classify_on_track, find_instants_on_track, ConjugateInstant, Flow, JacobiTrack, KernelInstant,
    MetricForm, MorseSturmError, MorseSturmSystem,
};
use crate::{cast, tol, Scalar, DEFAULT_FLOW_STEPS, DEFAULT_S_GRID};

#[derive(Debug, Error)]
pub enum FocalError {
    #[error("subspace basis must have {expected} rows (got {got})")]
    BadAmbientDim { expected: usize, got: usize },
    #[error("subspace basis is rank deficient")]
    RankDeficient,
    #[error("second fundamental form must be {p}x{p} symmetric")]
    BadSecondFundamental { p: usize },
    #[error("submanifold degenerate at the initial point: g restricted to P has a kernel")]
    DegenerateSubmanifold,
    #[error("constructed initial frame is invalid: {0}")]
    BadFrame(String),
    #[error("focal identity failed: P-Maslov {p_maslov}, relative index {relative_index}, correction {correction}, spectral flow {spectral_flow}")]
    IdentityMismatch { p_maslov: i64, relative_index: i64, correction: i64, spectral_flow: i64 },
    #[error(transparent)]
    Flow(#[from] MorseSturmError),
    #[error(transparent)]
    Maslov(#[from] MaslovError),
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
}

/// Trivialized boundary data of the initial submanifold.
#[derive(Clone, Debug)]
pub struct FocalBoundary<S> {
    p_basis: Mat<S>,
    second_fundamental: Mat<S>,
}

impl<S: Scalar> FocalBoundary<S> {
    /// Validates the data against a metric: the basis must have full column
    /// rank, the second fundamental form must be symmetric, and `g`
    /// restricted to `P` must be nondegenerate.
    pub fn new(
        metric: &MetricForm<S>,
        p_basis: Mat<S>,
        second_fundamental: Mat<S>,
    ) -> Result<Self, FocalError> {
        let n = metric.dim();
        if p_basis.rows() != n {
            return Err(FocalError::BadAmbientDim { expected: n, got: p_basis.rows() });
        }
        let p = p_basis.cols();
        if second_fundamental.rows() != p || second_fundamental.cols() != p {
            return Err(FocalError::BadSecondFundamental { p });
        }
        let rank_tol = cast::<S>(tol::RANK);
        if p > 0 {
            let rank = linalg::rank_from_sigma(&linalg::svd(&p_basis).sigma, rank_tol);
            if rank != p {
                return Err(FocalError::RankDeficient);
            }
            let sym_defect = second_fundamental.sub(&second_fundamental.transpose()).max_abs();
            let scale = second_fundamental.max_abs().max(S::one());
            if sym_defect > cast::<S>(tol::SYMMETRY) * scale {
                return Err(FocalError::BadSecondFundamental { p });
            }
            // nondegeneracy of g|_P, on an orthonormalized basis
            let q = linalg::range_basis(&p_basis, rank_tol);
            let gram = metric.gram(&q);
            let eig = linalg::eigen_sym(&gram);
            if eig.values.iter().any(|&v| v.abs() <= cast(1e-10)) {
                return Err(FocalError::DegenerateSubmanifold);
            }
        }
        Ok(FocalBoundary { p_basis, second_fundamental: second_fundamental.symmetrized() })
    }

    /// The conjugate-point case `P = {0}`.
    pub fn point(metric: &MetricForm<S>) -> Self {
        let n = metric.dim();
        FocalBoundary { p_basis: Mat::zeros(n, 0), second_fundamental: Mat::zeros(0, 0) }
    }

    pub fn p_dim(&self) -> usize {
        self.p_basis.cols()
    }

    pub fn p_basis(&self) -> &Mat<S> {
        &self.p_basis
    }

    pub fn second_fundamental(&self) -> &Mat<S> {
        &self.second_fundamental
    }

    /// `n_-(g|_P)`, the correction term of the focal identity. Stable under
    /// perturbations of the basis as long as `g|_P` stays nondegenerate.
    pub fn metric_index(&self, metric: &MetricForm<S>) -> usize {
        if self.p_dim() == 0 {
            return 0;
        }
        let q = linalg::range_basis(&self.p_basis, cast(tol::RANK));
        let gram = metric.gram(&q);
        linalg::eigen_sym(&gram).values.iter().filter(|&&v| v < S::zero()).count()
    }
}

/// Lagrangian frame of admissible focal Cauchy data `(J(0), g J'(0))`.
///
/// Columns: each subspace basis vector `p_i` paired with a covector `a_i`
/// solving `a_i|_P = -S(p_i, .)` (minimum-norm solution), plus an
/// orthonormal basis of the annihilator of `P` in the covector slot. For
/// `P = {0}` this is the vertical `L_0`, for `P = R^n` with `S = 0` the
/// horizontal graph.
pub fn initial_lagrangian<S: Scalar>(
    metric: &MetricForm<S>,
    focal: &FocalBoundary<S>,
) -> Result<LagrangianFrame<S>, FocalError> {
    let n = metric.dim();
    let p = focal.p_dim();
    let rank_tol = cast::<S>(tol::RANK);
    let mut frame = Mat::zeros(2 * n, n);
    if p > 0 {
        // covectors with P^T a = -S
        let a = linalg::solve_least_squares(
            &focal.p_basis().transpose(),
            &focal.second_fundamental().scaled(-S::one()),
            rank_tol,
        );
        frame.set_block(0, 0, focal.p_basis());
        frame.set_block(n, 0, &a);
    }
    // annihilator of P: covectors vanishing on the subspace
    let ann = linalg::kernel_basis(&focal.p_basis().transpose(), rank_tol);
    frame.set_block(n, p, &ann);
    LagrangianFrame::new(frame).map_err(|e| FocalError::BadFrame(e.to_string()))
}

/// Jacobi track seeded with the focal initial frame.
pub fn focal_track<S: Scalar>(
    flow: &Flow<S>,
    focal: &FocalBoundary<S>,
) -> Result<JacobiTrack<S>, FocalError> {
    let frame = initial_lagrangian(flow.system().metric(), focal)?;
    Ok(JacobiTrack::seeded(flow, frame.frame().clone()))
}

/// Locates P-focal instants: rank drops of the seeded matrix solution.
pub fn find_focal_instants<S: Scalar>(
    flow: &Flow<S>,
    focal: &FocalBoundary<S>,
    tol_rank: S,
) -> Result<Vec<KernelInstant<S>>, FocalError> {
    let track = focal_track(flow, focal)?;
    Ok(find_instants_on_track(flow, &track, tol_rank)?)
}

/// Classification of a located focal instant (multiplicity, signature).
pub fn classify_focal_instant<S: Scalar>(
    flow: &Flow<S>,
    focal: &FocalBoundary<S>,
    instant: &KernelInstant<S>,
    tol_rank: S,
) -> Result<ConjugateInstant<S>, FocalError> {
    let track = focal_track(flow, focal)?;
    Ok(classify_on_track(flow, &track, instant, tol_rank)?)
}

/// Maslov index of the focal curve over `(startup, 1]`; crossings are the
/// P-focal instants. With `P = {0}` this is exactly the conjugate-point
/// Maslov index.
pub fn p_maslov_index<S: Scalar>(
    flow: &Flow<S>,
    focal: &FocalBoundary<S>,
    tol_rank: S,
) -> Result<i64, FocalError> {
    let track = focal_track(flow, focal)?;
    Ok(maslov_index_geodesic_on_track(flow, &track, tol_rank)?)
}

/// Both sides of the focal index identity.
#[derive(Clone, Copy, Debug)]
pub struct FocalIdentityReport {
    /// Crossing-count route.
    pub p_maslov: i64,
    /// `n_-(g|_P)`.
    pub correction: i64,
    /// Galerkin relative index of the focal endpoint form with respect to
    /// the endpoint-vanishing negative block.
    pub relative_index: i64,
    /// `relative_index - correction`; must equal `p_maslov`.
    pub galerkin_p_maslov: i64,
    /// Spectral flow of the focal Galerkin path; must equal `-p_maslov`.
    pub spectral_flow: i64,
    pub n_minus_end: usize,
    pub dim_h_minus: usize,
    pub dim_s_delta: usize,
}

/// Evaluates the focal identity by both routes and cross-checks them:
/// the crossing count must equal the Galerkin relative index minus
/// `n_-(g|_P)`, and the spectral flow of the focal path must be the negative
/// of the crossing count. A mismatch is an error carrying all integers.
pub fn focal_identity_check<S: Scalar>(
    system: &MorseSturmSystem<S>,
    focal: &FocalBoundary<S>,
    basis: BasisSpec,
    tol_rank: S,
) -> Result<FocalIdentityReport, FocalError> {
    let flow = crate::morse_sturm::integrate_flow(system, DEFAULT_FLOW_STEPS)?;
    let p_maslov = p_maslov_index(&flow, focal, tol_rank)?;
    let correction = focal.metric_index(system.metric()) as i64;
    let rel = focal_relative_index(system, focal, basis, tol_rank)?;
    let path = focal_path_spectral_flow(system, focal, basis, DEFAULT_S_GRID, tol_rank)?;
    let report = FocalIdentityReport {
        p_maslov,
        correction,
        relative_index: rel.value,
        galerkin_p_maslov: rel.value - correction,
        spectral_flow: path.spectral_flow,
        n_minus_end: path.n_minus_end,
        dim_h_minus: path.dim_h_minus,
        dim_s_delta: 0,
    };
    if report.galerkin_p_maslov != p_maslov || path.spectral_flow != -p_maslov {
        return Err(FocalError::IdentityMismatch {
            p_maslov,
            relative_index: rel.value,
            correction,
            spectral_flow: path.spectral_flow,
        });
    }
    Ok(FocalIdentityReport { dim_s_delta: report.dim_h_minus - correction as usize, ..report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse_sturm::{integrate_flow, CurvatureCurve};

    const PI: f64 = std::f64::consts::PI;

    fn metric(diag: &[f64]) -> MetricForm<f64> {
        MetricForm::new(diag.to_vec()).unwrap()
    }

    fn system(diag: &[f64], r: &[f64]) -> MorseSturmSystem<f64> {
        MorseSturmSystem::new(metric(diag), CurvatureCurve::constant_diag(r)).unwrap()
    }

    #[test]
    fn point_boundary_gives_vertical_frame() {
        let g = metric(&[-1.0, 1.0]);
        let focal = FocalBoundary::point(&g);
        let frame = initial_lagrangian(&g, &focal).unwrap();
        let vertical = LagrangianFrame::<f64>::vertical(2);
        assert!(frame.frame().sub(vertical.frame()).max_abs() < 1e-14);
    }

    #[test]
    fn full_totally_geodesic_gives_horizontal_frame() {
        let g = metric(&[1.0, 1.0]);
        let focal = FocalBoundary::new(&g, Mat::identity(2), Mat::zeros(2, 2)).unwrap();
        let frame = initial_lagrangian(&g, &focal).unwrap();
        // graph { (v, 0) }
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((frame.frame().at(i, j) - want).abs() < 1e-14);
                assert!(frame.frame().at(2 + i, j).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn line_with_second_fundamental_form() {
        // P = span(e1) in 2-space, g = id, S = (sigma):
        // frame columns (e1, -sigma e1*) and (0, e2*)
        let g = metric(&[1.0, 1.0]);
        let sigma = 0.7;
        let p = Mat::from_cols(2, &[vec![1.0, 0.0]]);
        let s2f = Mat::from_rows(&vec![vec![sigma]]);
        let focal = FocalBoundary::new(&g, p, s2f).unwrap();
        let frame = initial_lagrangian(&g, &focal).unwrap();
        let f = frame.frame();
        assert!((f.at(0, 0) - 1.0).abs() < 1e-14);
        assert!((f.at(2, 0) + sigma).abs() < 1e-14);
        assert!(f.at(3, 0).abs() < 1e-14);
        assert!(f.at(0, 1).abs() < 1e-14 && f.at(1, 1).abs() < 1e-14);
        assert!((f.at(3, 1).abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_subspace_rejected() {
        // g = diag(-1, 1), P spanned by the null vector e1 + e2
        let g = metric(&[-1.0, 1.0]);
        let p = Mat::from_cols(2, &[vec![1.0, 1.0]]);
        assert!(matches!(
            FocalBoundary::new(&g, p, Mat::zeros(1, 1)),
            Err(FocalError::DegenerateSubmanifold)
        ));
    }

    #[test]
    fn equator_focal_instant_and_index() {
        // P full, S = 0, R = -(0.75 pi)^2: J(t) = cos(0.75 pi t), zero at 2/3
        let l = 0.75 * PI;
        let sys = system(&[1.0], &[-(l * l)]);
        let focal = FocalBoundary::new(sys.metric(), Mat::identity(1), Mat::zeros(1, 1)).unwrap();
        let flow = integrate_flow(&sys, 2048).unwrap();
        let instants = find_focal_instants(&flow, &focal, 1e-8).unwrap();
        assert_eq!(instants.len(), 1);
        assert!((instants[0].t0 - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(p_maslov_index(&flow, &focal, 1e-8).unwrap(), 1);
    }

    #[test]
    fn flat_neumann_has_no_focal_points() {
        let sys = system(&[1.0], &[0.0]);
        let focal = FocalBoundary::new(sys.metric(), Mat::identity(1), Mat::zeros(1, 1)).unwrap();
        let flow = integrate_flow(&sys, 256).unwrap();
        assert!(find_focal_instants(&flow, &focal, 1e-8).unwrap().is_empty());
        assert_eq!(p_maslov_index(&flow, &focal, 1e-8).unwrap(), 0);
    }

    #[test]
    fn point_boundary_reduces_to_conjugate_index() {
        let l = 1.5 * PI;
        let sys = system(&[-1.0, 1.0], &[-(l * l), -(2.5 * PI) * (2.5 * PI)]);
        let focal = FocalBoundary::point(sys.metric());
        let flow = integrate_flow(&sys, 2048).unwrap();
        let direct = crate::maslov::maslov_index_geodesic(&flow, 1e-8).unwrap();
        assert_eq!(p_maslov_index(&flow, &focal, 1e-8).unwrap(), direct);
    }

    #[test]
    fn equator_identity_holds() {
        let l = 0.75 * PI;
        let sys = system(&[1.0], &[-(l * l)]);
        let focal = FocalBoundary::new(sys.metric(), Mat::identity(1), Mat::zeros(1, 1)).unwrap();
        let report = focal_identity_check(&sys, &focal, BasisSpec::sine(16), 1e-8).unwrap();
        assert_eq!(report.p_maslov, 1);
        assert_eq!(report.correction, 0);
        assert_eq!(report.relative_index, 1);
        assert_eq!(report.spectral_flow, -1);
    }

    #[test]
    fn timelike_line_identity_with_correction() {
        // g = diag(-1, 1), P = timelike e1 axis: correction n_-(g|_P) = 1
        let l1 = 0.75 * PI;
        let l2 = 1.25 * PI;
        let sys = system(&[-1.0, 1.0], &[-(l1 * l1), -(l2 * l2)]);
        let p = Mat::from_cols(2, &[vec![1.0, 0.0]]);
        let focal = FocalBoundary::new(sys.metric(), p, Mat::zeros(1, 1)).unwrap();
        let report = focal_identity_check(&sys, &focal, BasisSpec::sine(32), 1e-8).unwrap();
        assert_eq!(report.correction, 1);
        // crossings at 2/3 (signature -1) and 0.8 (signature +1)
        assert_eq!(report.p_maslov, 0);
        assert_eq!(report.relative_index, 1);
        assert_eq!(report.spectral_flow, 0);
    }

    #[test]
    fn focal_assembly_reduces_to_conjugate_for_point_boundary() {
        let l = 1.5 * PI;
        let sys = system(&[-1.0, 1.0], &[-(l * l), -(l * l)]);
        let focal = FocalBoundary::point(sys.metric());
        for &s in &[0.0, 0.37, 1.0] {
            let a = crate::index_form::assemble(&sys, BasisSpec::sine(8), s).unwrap();
            let b = crate::index_form::assemble_focal(&sys, &focal, BasisSpec::sine(8), s).unwrap();
            assert!(a.matrix().sub(b.matrix()).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn focal_boundary_term_vanishes_at_s_zero() {
        let l = 0.75 * PI;
        let sys = system(&[1.0], &[-(l * l)]);
        let p = Mat::identity(1);
        let with_s = FocalBoundary::new(sys.metric(), p.clone(), Mat::from_rows(&vec![vec![2.5]])).unwrap();
        let without = FocalBoundary::new(sys.metric(), p, Mat::zeros(1, 1)).unwrap();
        let a = crate::index_form::assemble_focal(&sys, &with_s, BasisSpec::sine(8), 0.0).unwrap();
        let b = crate::index_form::assemble_focal(&sys, &without, BasisSpec::sine(8), 0.0).unwrap();
        assert!(a.matrix().sub(b.matrix()).max_abs() <= 1e-13);
    }
}
