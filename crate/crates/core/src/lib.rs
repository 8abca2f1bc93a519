//! Construction, certification, and verification of lifted spectrahedral
//! descriptions of convex semialgebraic sets and of convex hulls of unions
//! of such sets.
//!
//! The crate is organized bottom up: polynomials and symmetric matrices,
//! set and representation models, a dense interior-point SDP solver, the
//! truncated-moment construction, the union/gluing construction, analytic
//! certificates (sos-concavity, quasi-concavity, a first-order optimality
//! probe), boundary localization, and brute-force verification.

pub mod certify;
pub mod error;
pub mod hull;
pub mod localize;
pub mod moment;
pub mod optimize;
pub mod poly;
pub mod rep;
pub mod sdp;
pub mod set;
pub mod symmat;
pub mod verify;

pub use certify::{
    check_quasi_concave_at, check_sos_concave, classify, pdlh_probe, sample_boundary,
    BoundaryPoint, CertifyOptions, ClassifyReport, ConstraintReport, ConstraintVerdict,
    OverallVerdict, PdlhReport, PointVerdict, ProbeDirection, ProbeVerdict,
    SosConcavityCertificate, SosOutcome,
};
pub use error::{Error, Result};
pub use hull::{build_union, membership as union_membership, BranchLayout, UnionLift};
pub use localize::{
    build_cover_representation, plan_cover, CenterChoice, CoverMode, CoverOptions, CoverPlan,
    DeltaPolicy, Patch,
};
pub use moment::{
    build_moment_lmi, localizing_matrices, point_mass_lift, MomentBasis, MomentMode,
};
pub use optimize::{
    multistart_minimize, nonnegative_ls, LocalMinimum, MinimizeOptions, SmoothProblem,
};
pub use poly::{monomial_vector, Exponent, PolyMatrix, Polynomial};
pub use rep::{AffineRow, LiftedRepresentation, LinearPencil, RepMetadata};
pub use sdp::{
    feasible_point, rep_membership, solve as solve_sdp, support_value, FeasStatus,
    FeasibilityResult, PencilBlock, SdpOptions, SdpProblem, SdpSolution, SdpStatus,
};
pub use set::{ball_pencil, parse_set_file, BallConstraint, BasicSet, UnionSet};
pub use verify::{
    compare, sphere_directions, support_lift, support_oracle, DirectionReport, OracleSupport,
    SupportOutcome, Verdict, VerifyOptions, VerifyReport,
};
pub use symmat::SymMat;
