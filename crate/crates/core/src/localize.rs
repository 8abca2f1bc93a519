//! Boundary covers: patch the boundary of a convex set (or the convex
//! boundary of a compact set) with closed balls, build one local moment
//! representation per patch, and glue the patches into a single lifted
//! representation of the convex hull of their union.
//!
//! A patch at a boundary point u keeps only the constraints active at u
//! together with the ball inequality δ² − ‖x − u‖² ≥ 0; every dropped
//! constraint is verified strictly positive on the sampled ball, so the
//! patch equals the full local intersection as a set while its moment
//! relaxation stays small. Gluing the patch representations yields the
//! convex hull of the patch union, which equals the original set when
//! the patches cover its boundary.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{check_quasi_concave_at, mix_seed, sample_boundary, CertifyOptions};
use crate::error::{Error, Result};
use crate::hull::{build_union, UnionLift};
use crate::moment::{build_moment_lmi, MomentMode};
use crate::optimize::{multistart_minimize, MinimizeOptions, SmoothProblem};
use crate::poly::{Exponent, Polynomial};
use crate::set::{BallConstraint, BasicSet, UnionSet};

/// Tolerance for deciding that a point lies on a constraint boundary and
/// for accepting supplied centers as members of a block.
pub const CENTER_BOUNDARY_TOL: f64 = 1e-8;
/// Points sampled inside each candidate ball when checking that the
/// constraints dropped from a patch stay strictly positive on it.
const BALL_SCAN_SAMPLES: usize = 600;
/// Smallest radius the shrink loop will accept before giving up.
const DELTA_FLOOR: f64 = 1e-3;
/// Deduplication distance for convex-boundary candidates.
const CENTER_DEDUPE_TOL: f64 = 1e-6;

/// How patch centers are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum CenterChoice {
    /// Sample this many centers automatically (per block on the boundary
    /// of a convex set; in total for convex-boundary candidates).
    Auto(usize),
    /// Use exactly these points, validated against the set.
    Supplied(Vec<Vec<f64>>),
}

/// How patch radii are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaPolicy {
    /// Start from half the local feature scale (distance-to-inactive
    /// estimate |h_j(u)| / ‖∇h_j(u)‖), then halve until the sampled ball
    /// checks pass.
    Auto,
    /// Use this radius everywhere; the sampled ball checks still run and
    /// a failure is an error instead of a retry.
    Fixed(f64),
}

/// Where the centers live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverMode {
    /// Centers on the boundary of each block — for sets that are convex,
    /// where the whole boundary must be covered.
    Boundary,
    /// Centers at minimizers of sampled linear functionals over the
    /// union — the candidate convex boundary of a compact set, the only
    /// part a hull construction needs to cover.
    ConvexBoundary,
}

#[derive(Clone, Debug)]
pub struct CoverOptions {
    pub mode: CoverMode,
    pub delta: DeltaPolicy,
    pub seed: u64,
    /// Require every active constraint to be strictly quasi-concave (with
    /// nonzero gradient) at sampled near-boundary points of each ball, as
    /// the local-representation route assumes.
    pub require_strict_qc: bool,
    /// Tolerances for the quasi-concavity checks.
    pub certify: CertifyOptions,
    /// Optional strictly interior point per block, passed to the boundary
    /// sampler when automatic centers are requested.
    pub interior_hints: Vec<Option<Vec<f64>>>,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            mode: CoverMode::Boundary,
            delta: DeltaPolicy::Auto,
            seed: 0,
            require_strict_qc: false,
            certify: CertifyOptions::default(),
            interior_hints: Vec::new(),
        }
    }
}

/// One ball patch of the cover.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Index of the union block the patch restricts.
    pub block: usize,
    /// Indices of that block's inequalities active at the center. Empty
    /// means the center is interior (possible only for supplied centers)
    /// and the patch keeps every constraint of the block.
    pub active: Vec<usize>,
    /// The local set: active inequalities (all of them when degenerate),
    /// all equalities, and the ball inequality appended last.
    pub restricted: BasicSet,
}

/// A planned boundary cover. Sampled centers lie on their block's
/// boundary within [`CENTER_BOUNDARY_TOL`]; supplied centers may also be
/// interior, which yields a degenerate whole-block patch.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverPlan {
    pub n: usize,
    pub patches: Vec<Patch>,
    /// How the centers were produced, for reproducibility records.
    pub provenance: String,
    pub seed: u64,
}

fn linear_objective(n: usize, ell: &[f64]) -> Polynomial {
    Polynomial::from_terms(
        n,
        ell.iter()
            .enumerate()
            .map(|(i, &c)| (Exponent::unit(n, i), c))
            .collect::<Vec<_>>(),
    )
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

/// Uniform sample from the closed ball around `center`.
fn ball_sample(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    loop {
        let d: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let r = radius * rng.random_range(0.0_f64..1.0).powf(1.0 / n as f64);
            return center
                .iter()
                .zip(&d)
                .map(|(c, v)| c + r * v / norm)
                .collect();
        }
    }
}

/// Checks a candidate radius: every dropped inequality must stay
/// strictly positive on the sampled ball, and, when requested, every
/// kept inequality must be strictly quasi-concave at sampled points near
/// its zero level inside the ball. Returns a human-readable reason on
/// failure.
fn scan_ball(
    block: &BasicSet,
    center: &[f64],
    radius: f64,
    active: &[usize],
    opts: &CoverOptions,
    salt: u64,
) -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, salt));
    let samples: Vec<Vec<f64>> = (0..BALL_SCAN_SAMPLES)
        .map(|_| ball_sample(&mut rng, center, radius))
        .collect();

    let degenerate = active.is_empty();
    for (j, h) in block.inequalities.iter().enumerate() {
        if degenerate || active.contains(&j) {
            continue;
        }
        let floor = 1e-9 * 1.0_f64.max(h.eval(center).abs());
        let min = samples
            .iter()
            .map(|x| h.eval(x))
            .fold(f64::INFINITY, f64::min);
        if min <= floor {
            return Err(format!(
                "inactive constraint {j} reaches {min:.3e} on the ball of radius {radius:.6}"
            ));
        }
    }

    if opts.require_strict_qc {
        let kept: Vec<usize> = if degenerate {
            (0..block.inequalities.len()).collect()
        } else {
            active.to_vec()
        };
        for i in kept {
            let g = &block.inequalities[i];
            let vals: Vec<f64> = samples.iter().map(|x| g.eval(x).abs()).collect();
            let vmax = vals.iter().cloned().fold(1e-12_f64, f64::max);
            let band = 0.05 * vmax;
            let mut points: Vec<&[f64]> = Vec::new();
            if g.eval(center).abs() <= CENTER_BOUNDARY_TOL {
                points.push(center);
            }
            for (x, v) in samples.iter().zip(&vals) {
                if *v <= band && points.len() < 25 {
                    points.push(x);
                }
            }
            for x in points {
                let verdict = check_quasi_concave_at(g, x, &opts.certify);
                if !(verdict.strictly_quasi_concave && verdict.nonsingular) {
                    return Err(format!(
                        "constraint {i} is not strictly quasi-concave near {x:?} \
                         on the ball of radius {radius:.6}"
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Radius for one patch per the policy, including shrink retries for the
/// automatic policy.
fn choose_radius(
    block: &BasicSet,
    center: &[f64],
    active: &[usize],
    bbox: &[(f64, f64)],
    opts: &CoverOptions,
    salt: u64,
) -> Result<f64> {
    let cap = 0.25
        * bbox
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min);

    match opts.delta {
        DeltaPolicy::Fixed(delta) => {
            if !(delta > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "patch radius must be positive, got {delta}"
                )));
            }
            scan_ball(block, center, delta, active, opts, salt).map_err(|why| {
                Error::InvalidInput(format!(
                    "supplied radius {delta} fails on the patch at {center:?}: {why}"
                ))
            })?;
            Ok(delta)
        }
        DeltaPolicy::Auto => {
            let mut feature = f64::INFINITY;
            for (j, h) in block.inequalities.iter().enumerate() {
                if active.contains(&j) || active.is_empty() {
                    continue;
                }
                let grad = DVector::from_column_slice(&h.gradient_at(center)).norm();
                feature = feature.min(h.eval(center).abs() / grad.max(1e-9));
            }
            let mut delta = if feature.is_finite() {
                (0.5 * feature).clamp(DELTA_FLOOR, cap)
            } else {
                cap
            };
            loop {
                match scan_ball(block, center, delta, active, opts, salt) {
                    Ok(()) => return Ok(delta),
                    Err(why) => {
                        if delta <= DELTA_FLOOR {
                            return Err(Error::InvalidInput(format!(
                                "no radius down to {DELTA_FLOOR} works for the patch at \
                                 {center:?}: {why}"
                            )));
                        }
                        delta = (0.5 * delta).max(DELTA_FLOOR);
                    }
                }
            }
        }
    }
}

/// Candidate convex-boundary centers: minimizers of seeded random linear
/// functionals over the union, deduplicated, with box-pinned minimizers
/// rejected as evidence of unboundedness.
fn convex_boundary_centers(
    s: &UnionSet,
    bbox: &[(f64, f64)],
    count: usize,
    opts: &CoverOptions,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let n = s.n;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, 0xC0FFEE));
    let lower: Vec<f64> = bbox.iter().map(|(lo, _)| *lo).collect();
    let upper: Vec<f64> = bbox.iter().map(|(_, hi)| *hi).collect();
    let mut found: Vec<(usize, Vec<f64>)> = Vec::new();

    let rounds = 4 * count + 16;
    for t in 0..rounds {
        if found.len() >= count {
            break;
        }
        let ell: Vec<f64> = loop {
            let d: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break d.iter().map(|v| v / norm).collect();
            }
        };

        let mut block_best: Vec<Option<Vec<f64>>> = vec![None; s.blocks.len()];
        let mut block_value = vec![f64::INFINITY; s.blocks.len()];
        for (b, block) in s.blocks.iter().enumerate() {
            let prob = SmoothProblem::over_set(linear_objective(n, &ell), block, 1.0)
                .with_box(lower.clone(), upper.clone());
            let min_opts = MinimizeOptions {
                starts: 8,
                seed: mix_seed(opts.seed, 31 * t as u64 + b as u64),
                ..MinimizeOptions::default()
            };
            if let Some(m) = multistart_minimize(&prob, &min_opts)
                .into_iter()
                .find(|m| m.violation <= 1e-6)
            {
                block_value[b] = m.value;
                block_best[b] = Some(m.x);
            }
        }
        let best = block_value.iter().cloned().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            continue;
        }
        for b in 0..s.blocks.len() {
            if block_value[b] > best + 1e-6 {
                continue;
            }
            let Some(x) = &block_best[b] else { continue };
            for (i, ((lo, hi), xi)) in bbox.iter().zip(x).enumerate() {
                let pin = 1e-6 * (hi - lo).max(1.0);
                if xi - lo <= pin || hi - xi <= pin {
                    return Err(Error::Noncompact(format!(
                        "a linear functional's minimizer {x:?} is pinned to the bounding \
                         box at coordinate {i}; the set may be unbounded, and its convex \
                         boundary is unreliable"
                    )));
                }
            }
            let dup = found.iter().any(|(fb, fx)| {
                *fb == b
                    && fx
                        .iter()
                        .zip(x)
                        .map(|(a, c)| (a - c) * (a - c))
                        .sum::<f64>()
                        .sqrt()
                        <= CENTER_DEDUPE_TOL
            });
            if !dup && found.len() < count {
                found.push((b, x.clone()));
            }
        }
    }
    if found.is_empty() {
        return Err(Error::InvalidInput(
            "no convex-boundary candidates found: every sampled linear functional \
             failed to produce a feasible minimizer"
                .into(),
        ));
    }
    Ok(found)
}

/// Plans a ball cover of the boundary.
///
/// Automatic centers are sampled on each block's boundary
/// ([`CoverMode::Boundary`], for convex sets) or at minimizers of random
/// linear functionals over the union ([`CoverMode::ConvexBoundary`], for
/// hulls of compact sets). Supplied centers attach to every block that
/// contains them; a supplied center inside no block is rejected with the
/// residual of the nearest one. Each patch keeps the constraints active
/// at its center plus the ball, and the radius policy verifies by
/// sampling that every dropped constraint stays strictly positive on the
/// ball, shrinking automatic radii until that holds.
pub fn plan_cover(
    s: &UnionSet,
    bbox: &[(f64, f64)],
    centers: &CenterChoice,
    opts: &CoverOptions,
) -> Result<CoverPlan> {
    let n = s.n;
    if bbox.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "bounding box has {} intervals for {} variables",
            bbox.len(),
            n
        )));
    }
    for (lo, hi) in bbox {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!(
                "bounding box interval [{lo}, {hi}] is empty"
            )));
        }
    }

    // (block, center, active) candidates.
    let mut candidates: Vec<(usize, Vec<f64>, Vec<usize>)> = Vec::new();
    let provenance;
    match centers {
        CenterChoice::Auto(count) => {
            if *count == 0 {
                return Err(Error::InvalidInput("at least one center is required".into()));
            }
            match opts.mode {
                CoverMode::Boundary => {
                    for (b, block) in s.blocks.iter().enumerate() {
                        let hint = opts
                            .interior_hints
                            .get(b)
                            .and_then(|h| h.as_deref());
                        let pts = sample_boundary(
                            block,
                            bbox,
                            *count,
                            mix_seed(opts.seed, 1000 + b as u64),
                            hint,
                        )?;
                        for bp in pts {
                            candidates.push((b, bp.point, bp.active));
                        }
                    }
                    provenance = format!("auto-boundary count={count} seed={}", opts.seed);
                }
                CoverMode::ConvexBoundary => {
                    let pts = convex_boundary_centers(s, bbox, *count, opts)?;
                    let found = pts.len();
                    for (b, x) in pts {
                        let active = s.blocks[b].active_constraints(&x, CENTER_BOUNDARY_TOL);
                        candidates.push((b, x, active));
                    }
                    provenance = format!(
                        "auto-convex-boundary requested={count} found={found} seed={}",
                        opts.seed
                    );
                }
            }
        }
        CenterChoice::Supplied(list) => {
            if list.is_empty() {
                return Err(Error::InvalidInput("at least one center is required".into()));
            }
            for (idx, u) in list.iter().enumerate() {
                if u.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "center {idx} has {} coordinates for {} variables",
                        u.len(),
                        n
                    )));
                }
                let mut attached = false;
                let mut best_residual = f64::INFINITY;
                for (b, block) in s.blocks.iter().enumerate() {
                    if block.contains(u, CENTER_BOUNDARY_TOL) {
                        let active = block.active_constraints(u, CENTER_BOUNDARY_TOL);
                        candidates.push((b, u.clone(), active));
                        attached = true;
                    } else {
                        let ineq = (-block.min_inequality(u)).max(0.0);
                        let eq = block
                            .equalities
                            .iter()
                            .map(|f| f.eval(u).abs())
                            .fold(0.0_f64, f64::max);
                        best_residual = best_residual.min(ineq.max(eq));
                    }
                }
                if !attached {
                    return Err(Error::NotOnBoundary {
                        index: idx,
                        residual: best_residual,
                    });
                }
            }
            provenance = format!("supplied count={}", list.len());
        }
    }

    let mut patches = Vec::with_capacity(candidates.len());
    for (pi, (b, center, active)) in candidates.into_iter().enumerate() {
        let block = &s.blocks[b];
        let radius = choose_radius(block, &center, &active, bbox, opts, 7000 + pi as u64)?;
        let ineqs: Vec<Polynomial> = if active.is_empty() {
            block.inequalities.clone()
        } else {
            active.iter().map(|&i| block.inequalities[i].clone()).collect()
        };
        let ball = BallConstraint::new(center.clone(), radius)?;
        let mut restricted = BasicSet::with_constraints(
            n,
            format!("{}#patch{}", block.name, pi),
            ineqs,
            block.equalities.clone(),
        );
        restricted.inequalities.push(ball.polynomial());
        patches.push(Patch {
            center,
            radius,
            block: b,
            active,
            restricted,
        });
    }

    Ok(CoverPlan {
        n,
        patches,
        provenance,
        seed: opts.seed,
    })
}

/// Builds the glued lifted representation of a planned cover: one moment
/// representation per patch at the shared order, merged by the union
/// construction. Every patch is ball-bounded, so the glued projection is
/// exactly the convex hull of the patch union.
pub fn build_cover_representation(
    plan: &CoverPlan,
    order: usize,
    mode: MomentMode,
) -> Result<UnionLift> {
    if plan.patches.is_empty() {
        return Err(Error::InvalidInput("cover plan has no patches".into()));
    }
    let mut reps = Vec::with_capacity(plan.patches.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .patches
            .iter()
            .map(|p| scope.spawn(move || build_moment_lmi(&p.restricted, order, mode)))
            .collect();
        for h in handles {
            reps.push(h.join().expect("patch build panicked"));
        }
    });
    let reps: Vec<_> = reps.into_iter().collect::<Result<_>>()?;

    let mut ul = build_union(&reps, true)?;
    ul.rep.metadata.construction = Some("localized-cover".into());
    ul.rep.metadata.order = Some(order);
    ul.rep.metadata.mode = Some(mode.as_str().into());
    ul.rep.metadata.notes.push(plan.provenance.clone());
    for (k, p) in plan.patches.iter().enumerate() {
        let center: Vec<String> = p.center.iter().map(|c| format!("{c:.6}")).collect();
        ul.rep.metadata.notes.push(format!(
            "patch {k}: block={} center=[{}] radius={:.6} active={:?}",
            p.block,
            center.join(", "),
            p.radius,
            p.active
        ));
    }
    Ok(ul)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::membership;
    use crate::moment::point_mass_lift;
    use crate::sdp::{support_value, SdpOptions};

    fn disk() -> BasicSet {
        BasicSet::with_constraints(
            2,
            "disk",
            vec![Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap()],
            vec![],
        )
    }

    fn unit_directions(count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| loop {
                let d = [standard_normal(&mut rng), standard_normal(&mut rng)];
                let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
                if norm > 1e-9 {
                    break vec![d[0] / norm, d[1] / norm];
                }
            })
            .collect()
    }

    // Eight automatic boundary patches at a fixed radius; the glued
    // order-1 representation must reproduce the disk's support value -1
    // in every unit direction.
    #[test]
    fn disk_eight_patches_at_order_one_match_the_disk_support() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let opts = CoverOptions {
            delta: DeltaPolicy::Fixed(0.5),
            ..CoverOptions::default()
        };
        let plan = plan_cover(&s, &bbox, &CenterChoice::Auto(8), &opts).unwrap();
        assert_eq!(plan.patches.len(), 8);
        for p in &plan.patches {
            let r = (p.center[0] * p.center[0] + p.center[1] * p.center[1]).sqrt();
            assert!((r - 1.0).abs() <= 1e-8, "center off the circle: {r}");
            assert_eq!(p.active, vec![0]);
            assert_eq!(p.restricted.inequalities.len(), 2);
            assert_eq!(p.radius, 0.5);
        }

        let ul = build_cover_representation(&plan, 1, MomentMode::Preordering).unwrap();
        let sdp = SdpOptions::default();
        for ell in unit_directions(32, 7) {
            let sol = support_value(&ul.rep, &ell, &sdp).unwrap();
            assert!(
                sol.value_usable(1e-5),
                "unusable solve ({:?}, gap {:.2e}) in direction {ell:?}",
                sol.status,
                sol.relative_gap
            );
            assert!(
                (sol.objective + 1.0).abs() <= 1e-5,
                "support {} in direction {ell:?}",
                sol.objective
            );
        }
    }

    // A single supplied interior center with a ball that swallows the
    // whole set keeps every constraint (the degenerate manual patch); the
    // one-branch union must match the plain moment construction.
    #[test]
    fn single_degenerate_patch_matches_the_plain_moment_build() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let opts = CoverOptions {
            delta: DeltaPolicy::Fixed(2.0),
            ..CoverOptions::default()
        };
        let centers = CenterChoice::Supplied(vec![vec![0.0, 0.0]]);
        let plan = plan_cover(&s, &bbox, &centers, &opts).unwrap();
        assert_eq!(plan.patches.len(), 1);
        assert!(plan.patches[0].active.is_empty());
        assert_eq!(plan.patches[0].restricted.inequalities.len(), 2);

        let ul = build_cover_representation(&plan, 1, MomentMode::Preordering).unwrap();
        let plain = build_moment_lmi(&disk(), 1, MomentMode::Preordering).unwrap();
        let sdp = SdpOptions::default();
        for ell in unit_directions(16, 11) {
            let a = support_value(&ul.rep, &ell, &sdp).unwrap();
            let b = support_value(&plain, &ell, &sdp).unwrap();
            assert!(a.value_usable(1e-5), "cover solve {:?}", a.status);
            assert!(b.value_usable(1e-5), "plain solve {:?}", b.status);
            assert!(
                (a.objective - b.objective).abs() <= 1e-6,
                "cover {} vs plain {} in {ell:?}",
                a.objective,
                b.objective
            );
        }
    }

    fn parabola_or_quadrant() -> UnionSet {
        let circle = Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap();
        let b1 = BasicSet::with_constraints(
            2,
            "cap",
            vec![circle.clone(), Polynomial::parse("x2 - x1^2", 2).unwrap()],
            vec![],
        );
        let b2 = BasicSet::with_constraints(
            2,
            "quadrant",
            vec![
                circle,
                Polynomial::parse("x1", 2).unwrap(),
                Polynomial::parse("x2", 2).unwrap(),
            ],
            vec![],
        );
        UnionSet::from_blocks(vec![b1, b2]).unwrap()
    }

    // The ball-capped union of a parabola cap and the first quadrant is
    // convex; a manual cover of its boundary pieces must reproduce its
    // membership on a grid, away from the boundary. The supplied center
    // at the origin sits on the boundary of both blocks and must yield a
    // patch in each.
    #[test]
    fn parabola_or_quadrant_cover_matches_direct_membership() {
        let s = parabola_or_quadrant();
        let bbox = [(-1.05, 1.05), (-1.05, 1.05)];

        // Corner of the cap where the parabola meets the circle:
        // x2 = (sqrt(5)-1)/2, x1 = -sqrt(x2).
        let x2a = (5.0_f64.sqrt() - 1.0) / 2.0;
        let corner = vec![-x2a.sqrt(), x2a];
        let deg = std::f64::consts::PI / 180.0;
        let arc = |a: f64| vec![(a * deg).cos(), (a * deg).sin()];
        let centers = CenterChoice::Supplied(vec![
            arc(10.0),
            arc(45.0),
            arc(80.0),
            arc(115.0),
            corner,
            vec![1.0, 0.0],
            vec![-0.5, 0.25],
            vec![0.0, 0.0],
        ]);
        let plan = plan_cover(&s, &bbox, &centers, &CoverOptions::default()).unwrap();

        let origin_blocks: Vec<usize> = plan
            .patches
            .iter()
            .filter(|p| p.center == vec![0.0, 0.0])
            .map(|p| p.block)
            .collect();
        assert_eq!(origin_blocks, vec![0, 1], "origin must patch both blocks");

        let ul = build_cover_representation(&plan, 1, MomentMode::Preordering).unwrap();
        let sdp = SdpOptions::default();
        let mut decided = 0usize;
        let mut undecided = 0usize;
        for i in 0..21 {
            for j in 0..21 {
                let x = [
                    -1.05 + 2.1 * (i as f64) / 20.0,
                    -1.05 + 2.1 * (j as f64) / 20.0,
                ];
                let near_boundary = s
                    .blocks
                    .iter()
                    .map(|b| b.min_inequality(&x).abs())
                    .fold(f64::INFINITY, f64::min)
                    < 1e-3;
                if near_boundary {
                    continue;
                }
                let direct = s.contains(&x, 1e-9);
                match membership(&ul, &x, &sdp).unwrap() {
                    // A decided verdict must never contradict direct
                    // evaluation; a stalled solve may abstain (the lifted
                    // margin near the cover seams is genuinely thin), but
                    // only rarely.
                    Some(lifted) => {
                        assert_eq!(
                            lifted, direct,
                            "membership mismatch at {x:?} (direct {direct})"
                        );
                        decided += 1;
                    }
                    None => undecided += 1,
                }
            }
        }
        assert!(decided > 350, "only {decided} grid points were decided");
        assert!(undecided <= 2, "{undecided} grid points were undecided");
    }

    // Convex-boundary candidates of the annulus 1 <= |x|^2 <= 4: every
    // linear functional is minimized on the outer circle (analytic
    // minimum -2 at -2*direction), never on the inner one.
    #[test]
    fn annulus_hull_centers_lie_on_the_outer_circle() {
        let annulus = BasicSet::with_constraints(
            2,
            "annulus",
            vec![
                Polynomial::parse("x1^2 + x2^2 - 1", 2).unwrap(),
                Polynomial::parse("4 - x1^2 - x2^2", 2).unwrap(),
            ],
            vec![],
        );
        let s = UnionSet::single(annulus).unwrap();
        let bbox = [(-2.5, 2.5), (-2.5, 2.5)];
        let opts = CoverOptions {
            mode: CoverMode::ConvexBoundary,
            ..CoverOptions::default()
        };
        let plan = plan_cover(&s, &bbox, &CenterChoice::Auto(8), &opts).unwrap();
        assert_eq!(plan.patches.len(), 8);
        for p in &plan.patches {
            let r = (p.center[0] * p.center[0] + p.center[1] * p.center[1]).sqrt();
            assert!(
                (r - 2.0).abs() <= 1e-4,
                "center {:?} not on the outer circle",
                p.center
            );
            assert_eq!(p.active, vec![1], "outer constraint must be the active one");
        }
    }

    // A halfplane's linear functionals are minimized on the bounding box
    // itself, which is evidence of unboundedness and must be rejected.
    #[test]
    fn halfplane_hull_mode_is_rejected_as_noncompact() {
        let halfplane = BasicSet::with_constraints(
            2,
            "halfplane",
            vec![Polynomial::parse("x1", 2).unwrap()],
            vec![],
        );
        let s = UnionSet::single(halfplane).unwrap();
        let bbox = [(-3.0, 3.0), (-3.0, 3.0)];
        let opts = CoverOptions {
            mode: CoverMode::ConvexBoundary,
            ..CoverOptions::default()
        };
        let err = plan_cover(&s, &bbox, &CenterChoice::Auto(4), &opts).unwrap_err();
        assert!(matches!(err, Error::Noncompact(_)), "got {err:?}");
    }

    #[test]
    fn supplied_center_off_the_set_is_rejected() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let centers = CenterChoice::Supplied(vec![vec![2.0, 0.0]]);
        let err = plan_cover(&s, &bbox, &centers, &CoverOptions::default()).unwrap_err();
        match err {
            Error::NotOnBoundary { index, residual } => {
                assert_eq!(index, 0);
                assert!((residual - 3.0).abs() <= 1e-9, "residual {residual}");
            }
            other => panic!("expected NotOnBoundary, got {other:?}"),
        }
    }

    // Patch soundness: points of the set within half a radius of a
    // center lift into that patch's moment representation through the
    // moment coordinates of their point mass.
    #[test]
    fn points_near_a_center_lift_into_its_patch() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let opts = CoverOptions {
            delta: DeltaPolicy::Fixed(0.5),
            ..CoverOptions::default()
        };
        let plan = plan_cover(&s, &bbox, &CenterChoice::Auto(8), &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let d = disk();
        for p in &plan.patches {
            let rep = build_moment_lmi(&p.restricted, 1, MomentMode::Preordering).unwrap();
            let mut kept = 0usize;
            while kept < 12 {
                let x = ball_sample(&mut rng, &p.center, 0.5 * p.radius);
                if !d.contains(&x, 0.0) {
                    continue;
                }
                let lift = point_mass_lift(&p.restricted, &x, 1).unwrap();
                assert!(
                    rep.full_point_feasible(&x, &lift, 1e-7),
                    "point {x:?} fails in the patch at {:?}",
                    p.center
                );
                kept += 1;
            }
        }
    }

    // Glue inclusion: every sampled member of the disk belongs to the
    // glued projection — by an explicit one-branch witness when the point
    // lies inside some patch, and through the membership solver
    // otherwise (interior points are hull points of the patches).
    #[test]
    fn sampled_members_belong_to_the_glued_lift() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let opts = CoverOptions {
            delta: DeltaPolicy::Fixed(0.5),
            ..CoverOptions::default()
        };
        let plan = plan_cover(&s, &bbox, &CenterChoice::Auto(8), &opts).unwrap();
        let ul = build_cover_representation(&plan, 1, MomentMode::Preordering).unwrap();
        let sdp = SdpOptions::default();
        let d = disk();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut kept = 0usize;
        let mut witnessed = 0usize;
        while kept < 25 {
            let x = [
                rng.random_range(-1.0_f64..1.0),
                rng.random_range(-1.0_f64..1.0),
            ];
            if !d.contains(&x, 0.0) {
                continue;
            }
            kept += 1;
            let inside = plan
                .patches
                .iter()
                .position(|p| p.restricted.contains(&x, 1e-9));
            if let Some(k) = inside {
                let layout = &ul.branches[k];
                let mut u_full = vec![0.0; ul.rep.num_lifted];
                u_full[ul.lambda_offset + k] = 1.0;
                for (i, xi) in x.iter().enumerate() {
                    u_full[layout.x_offset + i] = *xi;
                }
                let lift = point_mass_lift(&plan.patches[k].restricted, &x, 1).unwrap();
                for (j, v) in lift.iter().enumerate() {
                    u_full[layout.u_offset + j] = *v;
                }
                assert!(
                    ul.rep.full_point_feasible(&x, &u_full, 1e-7),
                    "explicit witness fails at {x:?}"
                );
                witnessed += 1;
            } else {
                assert_eq!(
                    membership(&ul, &x, &sdp).unwrap(),
                    Some(true),
                    "hull membership fails at {x:?}"
                );
            }
        }
        assert!(witnessed >= 5, "only {witnessed} explicit witnesses exercised");
    }

    // Conservativeness: points clearly outside the disk are rejected by
    // the glued lift.
    #[test]
    fn points_outside_the_set_are_rejected() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let opts = CoverOptions {
            delta: DeltaPolicy::Fixed(0.5),
            ..CoverOptions::default()
        };
        let plan = plan_cover(&s, &bbox, &CenterChoice::Auto(8), &opts).unwrap();
        let ul = build_cover_representation(&plan, 1, MomentMode::Preordering).unwrap();
        let sdp = SdpOptions::default();
        for k in 0..12 {
            let theta = std::f64::consts::TAU * (k as f64) / 12.0;
            let x = [1.08 * theta.cos(), 1.08 * theta.sin()];
            assert_eq!(
                membership(&ul, &x, &sdp).unwrap(),
                Some(false),
                "outside point {x:?} admitted"
            );
        }
    }

    // The automatic radius for a set with no inactive constraints at the
    // centers falls back to a quarter of the smallest box side.
    #[test]
    fn automatic_radius_defaults_to_a_quarter_box_side() {
        let s = UnionSet::single(disk()).unwrap();
        let bbox = [(-1.1, 1.1), (-1.1, 1.1)];
        let plan = plan_cover(&s, &bbox, &CenterChoice::Auto(4), &CoverOptions::default()).unwrap();
        for p in &plan.patches {
            assert!((p.radius - 0.55).abs() <= 1e-12, "radius {}", p.radius);
        }
    }

    #[test]
    fn planning_is_deterministic() {
        let s = parabola_or_quadrant();
        let bbox = [(-1.05, 1.05), (-1.05, 1.05)];
        let opts = CoverOptions {
            interior_hints: vec![Some(vec![0.0, 0.5]), Some(vec![0.5, 0.5])],
            ..CoverOptions::default()
        };
        let a = plan_cover(&s, &bbox, &CenterChoice::Auto(6), &opts).unwrap();
        let b = plan_cover(&s, &bbox, &CenterChoice::Auto(6), &opts).unwrap();
        assert_eq!(a, b);
    }

    // The strict quasi-concavity gate refuses a flat boundary piece: a
    // halfplane's boundary has zero curvature everywhere.
    #[test]
    fn strict_curvature_gate_refuses_a_flat_boundary() {
        let slab = BasicSet::with_constraints(
            2,
            "slab",
            vec![
                Polynomial::parse("x1", 2).unwrap(),
                Polynomial::parse("1 - x1", 2).unwrap(),
                Polynomial::parse("1 - x2^2", 2).unwrap(),
            ],
            vec![],
        );
        let s = UnionSet::single(slab).unwrap();
        let bbox = [(-0.5, 1.5), (-1.1, 1.1)];
        let opts = CoverOptions {
            require_strict_qc: true,
            delta: DeltaPolicy::Fixed(0.25),
            ..CoverOptions::default()
        };
        let centers = CenterChoice::Supplied(vec![vec![0.0, 0.3]]);
        let err = plan_cover(&s, &bbox, &centers, &opts).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "got {err:?}");
    }
}
