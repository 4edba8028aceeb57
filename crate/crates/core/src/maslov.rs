//! Crossing forms and the Maslov index of a Morse-Sturm system.
//!
//! The flow drags a Lagrangian seed `L` through the Lagrangian Grassmannian;
//! a crossing happens at the instants where `Phi(t) L` meets the vertical
//! `L_0 = {0} + R^n*` nontrivially, i.e. at the conjugate (or focal)
//! instants. Differentiating `t -> Phi(t) L` along the flow and restricting
//! to the intersection with `L_0` gives the crossing form; in kernel
//! coordinates it reduces to
//!
//! ```text
//! Q(c_i, c_j) = g( J'(t0) c_i, J'(t0) c_j ),
//! ```
//!
//! because a kernel point of the curve is `(0, g J'(t0) c)`, the flow moves
//! it with velocity `X(t0) (0, g J'(t0) c) = (J'(t0) c, 0)` and pairing the
//! velocity with the intersection under the symplectic form leaves exactly
//! the g-product of the `J'` images. The Maslov index over a window is the
//! sum of crossing-form signatures; a crossing with degenerate form aborts
//! the computation instead of being regularized. The orientation is pinned
//! so that crossings of a Riemannian system count +1.

use thiserror::Error;

use crate::linalg::Mat;
use crate::morse_sturm::{
    self, classify_on_track, find_instants_on_track, omega_matrix, Flow, JacobiTrack,
    KernelInstant, MorseSturmError,
};
use crate::bilinear::{inertia_of, SymForm};
use crate::{cast, tol, Scalar};

#[derive(Debug, Error)]
pub enum MaslovError {
    #[error("frame must be 2n x n (got {rows}x{cols})")]
    BadFrameShape { rows: usize, cols: usize },
    #[error("frame is rank deficient")]
    RankDeficientFrame,
    #[error("frame is not isotropic: |frame^T Omega frame| = {defect:e} exceeds {limit:e}")]
    NotIsotropic { defect: f64, limit: f64 },
    #[error("window endpoint t = {0} is a conjugate instant")]
    ConjugateEndpoint(f64),
    #[error("t = 1 is conjugate; a total index is refused, analyze a sub-interval ending before {last_clear}")]
    EndpointConjugate { last_clear: f64 },
    #[error("degenerate crossing form at t0 = {0}; the index is undefined without regularization")]
    DegenerateCrossing(f64),
    #[error("rank decision at t0 = {0} is uncertain; refine the flow or loosen the tolerance")]
    UncertainInstant(f64),
    #[error("crossing-form signature {crossing} disagrees with the kernel-complement signature {complement} at t0 = {t0}")]
    SignatureMismatch { t0: f64, crossing: i64, complement: i64 },
    #[error(transparent)]
    Flow(#[from] MorseSturmError),
    #[error(transparent)]
    Bilinear(#[from] crate::bilinear::BilinearError),
}

/// Frame of a Lagrangian subspace of `R^n + R^n*`: a full-rank `2n x n`
/// matrix whose span is isotropic for the canonical symplectic form.
#[derive(Clone, Debug)]
pub struct LagrangianFrame<S> {
    n: usize,
    frame: Mat<S>,
}

impl<S: Scalar> LagrangianFrame<S> {
    pub fn new(frame: Mat<S>) -> Result<Self, MaslovError> {
        if frame.rows() == 0 || frame.rows() != 2 * frame.cols() {
            return Err(MaslovError::BadFrameShape { rows: frame.rows(), cols: frame.cols() });
        }
        let n = frame.cols();
        let rank = crate::linalg::rank_from_sigma(&crate::linalg::svd(&frame).sigma, cast(tol::RANK));
        if rank != n {
            return Err(MaslovError::RankDeficientFrame);
        }
        let omega = omega_matrix::<S>(n);
        let pairing = frame.transpose().mul(&omega).mul(&frame);
        let scale = frame.max_abs();
        let defect = pairing.max_abs() / (scale * scale).max(S::min_positive_value());
        if defect > cast(tol::ISOTROPY) {
            return Err(MaslovError::NotIsotropic {
                defect: defect.to_f64().unwrap_or(f64::NAN),
                limit: tol::ISOTROPY,
            });
        }
        Ok(LagrangianFrame { n, frame })
    }

    /// The vertical Lagrangian `L_0 = {0} + R^n*`.
    pub fn vertical(n: usize) -> Self {
        let mut frame = Mat::zeros(2 * n, n);
        for i in 0..n {
            frame[(n + i, i)] = S::one();
        }
        LagrangianFrame { n, frame }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> &Mat<S> {
        &self.frame
    }
}

/// Crossing form at a localized instant, in the orthonormal kernel basis.
#[derive(Clone, Debug)]
pub struct CrossingReport<S> {
    pub t0: S,
    /// `Q(c_i, c_j) = g(J' c_i, J' c_j)` on the kernel coordinates.
    pub form: SymForm<S>,
    pub signature: i64,
    pub degenerate: bool,
}

const SIGNATURE_EIG_TOL: f64 = 1e-8;

/// Crossing form of the standard (conjugate-point) track at an instant.
pub fn crossing_form<S: Scalar>(
    flow: &Flow<S>,
    instant: &KernelInstant<S>,
    tol_rank: S,
) -> Result<CrossingReport<S>, MaslovError> {
    let track = JacobiTrack::standard(flow);
    crossing_form_on_track(flow, &track, instant, tol_rank)
}

/// Crossing form on an arbitrary seeded track, validated against the
/// independent classification route (restriction of `g` to the orthonormalized
/// complement); a signature disagreement is a sign-convention bug and is
/// reported as such.
pub fn crossing_form_on_track<S: Scalar>(
    flow: &Flow<S>,
    track: &JacobiTrack<S>,
    instant: &KernelInstant<S>,
    tol_rank: S,
) -> Result<CrossingReport<S>, MaslovError> {
    // the dragged frame stays Lagrangian along the flow
    let y = flow.phi_at(instant.t0).mul(track.frame());
    LagrangianFrame::new(y)?;

    let (_, jd) = track.jacobi_at(flow, instant.t0);
    let w = jd.mul(&instant.kernel);
    let q = flow.system().metric().gram(&w);
    let counts = inertia_of(&q, cast(SIGNATURE_EIG_TOL));
    let signature = counts.signature();
    let degenerate = counts.n_zero > 0;

    let classified = classify_on_track(flow, track, instant, tol_rank)?;
    if classified.signature != signature || classified.nondegenerate == degenerate {
        return Err(MaslovError::SignatureMismatch {
            t0: instant.t0.to_f64().unwrap_or(f64::NAN),
            crossing: signature,
            complement: classified.signature,
        });
    }

    Ok(CrossingReport { t0: instant.t0, form: SymForm::new(q)?, signature, degenerate })
}

const ENDPOINT_GUARD: f64 = 1e-9;

/// Maslov index over the open window `(a, b)`: the sum of crossing-form
/// signatures of the instants inside. Errors out when an endpoint is itself
/// conjugate, when a crossing form is degenerate, or when an instant is
/// rank-uncertain.
pub fn maslov_index<S: Scalar>(
    flow: &Flow<S>,
    window: (S, S),
    tol_rank: S,
) -> Result<i64, MaslovError> {
    let track = JacobiTrack::standard(flow);
    maslov_index_on_track(flow, &track, window, tol_rank)
}

/// Window variant on an arbitrary track.
pub fn maslov_index_on_track<S: Scalar>(
    flow: &Flow<S>,
    track: &JacobiTrack<S>,
    (a, b): (S, S),
    tol_rank: S,
) -> Result<i64, MaslovError> {
    let instants = find_instants_on_track(flow, track, tol_rank)?;
    let guard = cast::<S>(ENDPOINT_GUARD);
    let mut total = 0i64;
    for inst in &instants {
        if (inst.t0 - a).abs() <= guard {
            return Err(MaslovError::ConjugateEndpoint(a.to_f64().unwrap_or(f64::NAN)));
        }
        if (inst.t0 - b).abs() <= guard {
            return Err(MaslovError::ConjugateEndpoint(b.to_f64().unwrap_or(f64::NAN)));
        }
        if inst.t0 <= a || inst.t0 >= b {
            continue;
        }
        if inst.uncertain {
            return Err(MaslovError::UncertainInstant(inst.t0.to_f64().unwrap_or(f64::NAN)));
        }
        let report = crossing_form_on_track(flow, track, inst, tol_rank)?;
        if report.degenerate {
            return Err(MaslovError::DegenerateCrossing(inst.t0.to_f64().unwrap_or(f64::NAN)));
        }
        total += report.signature;
    }
    Ok(total)
}

/// Maslov index of the geodesic: the window `(startup, 1]`, requiring that
/// `t = 1` is not conjugate.
pub fn maslov_index_geodesic<S: Scalar>(flow: &Flow<S>, tol_rank: S) -> Result<i64, MaslovError> {
    let track = JacobiTrack::standard(flow);
    maslov_index_geodesic_on_track(flow, &track, tol_rank)
}

/// Geodesic variant on an arbitrary track.
pub fn maslov_index_geodesic_on_track<S: Scalar>(
    flow: &Flow<S>,
    track: &JacobiTrack<S>,
    tol_rank: S,
) -> Result<i64, MaslovError> {
    let instants = find_instants_on_track(flow, track, tol_rank)?;
    if let Some(e) = instants.iter().find(|i| i.at_endpoint) {
        let interior: Vec<&KernelInstant<S>> = instants.iter().filter(|i| !i.at_endpoint).collect();
        let last_clear = interior
            .last()
            .map(|i| (i.t0 + e.t0) * cast::<S>(0.5))
            .unwrap_or_else(|| cast::<S>(0.5));
        return Err(MaslovError::EndpointConjugate {
            last_clear: last_clear.to_f64().unwrap_or(f64::NAN),
        });
    }
    let a = cast::<S>(tol::STARTUP_ZONE);
    // the right endpoint is clear of crossings, so count over (startup, 1)
    maslov_index_on_track(flow, track, (a, S::one()), tol_rank)
}

/// Verifies additivity under concatenation at a split point: the index over
/// `(a, mid)` plus the index over `(mid, b)` must equal the index over
/// `(a, b)`. Returns `false` (with no panic) when the integers disagree.
pub fn concatenation_check<S: Scalar>(
    flow: &Flow<S>,
    mid: S,
    tol_rank: S,
) -> Result<bool, MaslovError> {
    let a = cast::<S>(tol::STARTUP_ZONE);
    let b = S::one();
    let left = maslov_index(flow, (a, mid), tol_rank)?;
    let right = maslov_index(flow, (mid, b), tol_rank)?;
    let whole = maslov_index(flow, (a, b), tol_rank)?;
    Ok(left + right == whole)
}

/// The curve sample `Phi(t) L` as a Lagrangian frame; exposed for invariant
/// checks.
pub fn curve_frame<S: Scalar>(
    flow: &Flow<S>,
    seed: &LagrangianFrame<S>,
    t: S,
) -> Result<LagrangianFrame<S>, MaslovError> {
    LagrangianFrame::new(flow.phi_at(t).mul(seed.frame()))
}

/// Intersection dimension of the curve with the vertical at `t`, from the
/// rank of the top block; exposed for diagnostics.
pub fn vertical_intersection_dim<S: Scalar>(
    flow: &Flow<S>,
    track: &JacobiTrack<S>,
    t: S,
    tol_rank: S,
) -> usize {
    let (j, _) = track.jacobi_at(flow, t);
    let sigma = crate::linalg::svd(&j).sigma;
    let cutoff = tol_rank * track.scale();
    sigma.iter().filter(|&&s| s <= cutoff).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse_sturm::{integrate_flow, CurvatureCurve, MetricForm, MorseSturmSystem};

    const L15: f64 = 1.5 * std::f64::consts::PI;
    const L25: f64 = 2.5 * std::f64::consts::PI;

    fn system(diag: &[f64], r: &[f64]) -> MorseSturmSystem<f64> {
        MorseSturmSystem::new(
            MetricForm::new(diag.to_vec()).unwrap(),
            CurvatureCurve::constant_diag(r),
        )
        .unwrap()
    }

    #[test]
    fn vertical_frame_is_lagrangian() {
        let f = LagrangianFrame::<f64>::vertical(3);
        assert!(LagrangianFrame::new(f.frame().clone()).is_ok());
    }

    #[test]
    fn non_isotropic_frame_rejected() {
        // graph of the identity: omega((v, v), (w, w)) = v.w - w.v = 0, so
        // that IS Lagrangian; use a genuinely bad frame instead
        let mut m = Mat::<f64>::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(2, 0)] = 1.0; // (e1, e1*)
        m[(1, 1)] = 1.0;
        m[(2, 1)] = 1.0; // (e2, e1*): omega = e1*(e2)... nonzero pairing
        assert!(matches!(
            LagrangianFrame::new(m),
            Err(MaslovError::NotIsotropic { .. })
        ));
    }

    #[test]
    fn sphere_crossing_form_positive() {
        let sys = system(&[1.0], &[-(L15 * L15)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        let instants = crate::morse_sturm::find_conjugate_instants(&flow, 1e-8).unwrap();
        let report = crossing_form(&flow, &instants[0], 1e-8).unwrap();
        assert_eq!(report.signature, 1);
        assert!(!report.degenerate);
        // Q = g (J')^2 = cos(pi)^2 = 1 on the unit kernel vector
        assert!((report.form.matrix().at(0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sphere_maslov_is_one() {
        let sys = system(&[1.0], &[-(L15 * L15)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        assert_eq!(maslov_index_geodesic(&flow, 1e-8).unwrap(), 1);
    }

    #[test]
    fn split_lorentzian_maslov_is_one() {
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        // crossings at 0.4 (+1), 2/3 (-1), 0.8 (+1)
        assert_eq!(maslov_index_geodesic(&flow, 1e-8).unwrap(), 1);
    }

    #[test]
    fn flat_maslov_is_zero() {
        let sys = system(&[-1.0, 1.0], &[0.0, 0.0]);
        let flow = integrate_flow(&sys, 256).unwrap();
        assert_eq!(maslov_index_geodesic(&flow, 1e-8).unwrap(), 0);
    }

    #[test]
    fn degenerate_signature_instant_sums_to_zero() {
        // multiplicity-2 instant with crossing form diag(-1, +1): signature 0
        // but nondegenerate, so the index is defined and vanishes
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L15 * L15)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        assert_eq!(maslov_index_geodesic(&flow, 1e-8).unwrap(), 0);
    }

    #[test]
    fn concatenation_additivity() {
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        for mid in [0.5, 0.55, 0.75] {
            assert!(concatenation_check(&flow, mid, 1e-8).unwrap());
        }
    }

    #[test]
    fn conjugate_endpoint_rejected() {
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        assert!(matches!(
            maslov_index(&flow, (0.01, 0.4), 1e-8),
            Err(MaslovError::ConjugateEndpoint(_))
        ));
    }

    #[test]
    fn maslov_stable_across_grid_refinement() {
        let sys = system(&[-1.0, 1.0], &[-(L15 * L15), -(L25 * L25)]);
        let values: Vec<i64> = [1024usize, 2048, 4096]
            .iter()
            .map(|&steps| {
                let flow = integrate_flow(&sys, steps).unwrap();
                maslov_index_geodesic(&flow, 1e-8).unwrap()
            })
            .collect();
        assert_eq!(values, vec![1, 1, 1]);
    }

    #[test]
    fn riemannian_index_counts_multiplicities() {
        // two positive directions crossing at different instants: the sum of
        // multiplicities is the index
        let l2 = 2.2 * std::f64::consts::PI;
        let sys = system(&[1.0, 1.0], &[-(L15 * L15), -(l2 * l2)]);
        let flow = integrate_flow(&sys, 2048).unwrap();
        let instants = crate::morse_sturm::find_conjugate_instants(&flow, 1e-8).unwrap();
        let total_mult: usize = instants.iter().map(|i| i.multiplicity).sum();
        assert_eq!(maslov_index_geodesic(&flow, 1e-8).unwrap(), total_mult as i64);
    }
}
