//! Oracle-based verification that a lifted representation projects to
//! (the closure of the convex hull of) a given set.
//!
//! The representation side is queried through its own SDP: support values
//! `min l.x` over the projection, and phase-I membership of fixed points.
//! The set side is queried by brute force: direct polynomial evaluation
//! over a grid, sharpened by a local pattern search. The two sides are
//! compared along seeded sphere directions, and near-boundary points are
//! probed for membership on both sides. The outcome is sampled evidence
//! with stated tolerances, not a decision procedure.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certify::mix_seed;
use crate::error::{Error, Result};
use crate::localize::standard_normal;
use crate::rep::LiftedRepresentation;
use crate::sdp::{rep_membership, support_value, SdpOptions, SdpStatus};
use crate::set::UnionSet;

/// Default verification tolerance. Desk scale; reflects oracle grid
/// error, not solver error.
pub const DEFAULT_TOL: f64 = 1e-3;

/// Membership probes sit this many tolerances away from the sampled
/// boundary, so boundary-hugging solver noise cannot raise false alarms.
pub const MEMBERSHIP_MARGIN_FACTOR: f64 = 3.0;

/// Residual/gap quality a stalled support solve must reach before its
/// value is trusted (see `SdpSolution::value_usable`).
const SUPPORT_USABLE_TOL: f64 = 1e-5;

/// Outcome of one support solve over the lift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportOutcome {
    /// The solver certified (or usably approached) the optimum.
    Value(f64),
    /// The projection recedes in this direction.
    Unbounded,
    /// Solver trouble; no usable value.
    Indeterminate,
}

/// Brute-force support value of the set itself, with its minimizer and a
/// conservative error bound.
#[derive(Clone, Debug)]
pub struct OracleSupport {
    pub value: f64,
    pub minimizer: Vec<f64>,
    /// Bound on `value - true support`: the pattern search's final step
    /// (box diagonal halved `refine_steps` times) plus one grid cell
    /// diagonal for the coarse scan. Always nonnegative: the reported
    /// value is attained by a true member, so it never undershoots.
    pub error_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Per-direction record of the comparison.
#[derive(Clone, Debug)]
pub struct DirectionReport {
    pub direction: Vec<f64>,
    pub lift: SupportOutcome,
    pub oracle: f64,
    /// `lift - oracle` when the lift side produced a value.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub directions: Vec<DirectionReport>,
    /// Largest |lift - oracle| over decided directions.
    pub max_abs_gap: f64,
    /// Points certified in the hull of the set but rejected by the lift.
    pub set_in_lift_out: usize,
    /// Points outside the hull by the probe margin but accepted by the
    /// lift.
    pub lift_in_set_out: usize,
    /// Directions whose lift support was unbounded or indeterminate.
    pub inconclusive_directions: usize,
    /// Membership probes the solver could not decide.
    pub undecided_memberships: usize,
    pub verdict: Verdict,
    pub tol: f64,
    pub membership_margin: f64,
}

impl VerifyReport {
    /// Per-direction gaps as CSV (`index,direction...,lift,oracle,gap`),
    /// for plotting. Undecided directions carry an empty gap field.
    pub fn gaps_csv(&self) -> String {
        let mut out = String::from("index,direction,lift,oracle,gap\n");
        for (k, d) in self.directions.iter().enumerate() {
            let dir: Vec<String> = d.direction.iter().map(|c| format!("{c:.6}")).collect();
            let (lift, gap) = match (d.lift, d.gap) {
                (SupportOutcome::Value(v), Some(g)) => (format!("{v:.9}"), format!("{g:.3e}")),
                (SupportOutcome::Unbounded, _) => ("unbounded".into(), String::new()),
                _ => ("indeterminate".into(), String::new()),
            };
            out.push_str(&format!(
                "{k},{},{lift},{:.9},{gap}\n",
                dir.join(" "),
                d.oracle
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Number of seeded sphere directions.
    pub directions: usize,
    pub seed: u64,
    /// Support-gap tolerance; membership probes use three times this.
    pub tol: f64,
    /// Grid subdivisions per axis for the coarse oracle scan.
    pub resolution: usize,
    /// Pattern-search halvings refining each oracle value.
    pub refine_steps: usize,
    pub sdp: SdpOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            directions: 64,
            seed: 0,
            tol: DEFAULT_TOL,
            resolution: 400,
            refine_steps: 30,
            sdp: SdpOptions::default(),
        }
    }
}

/// Minimize `l . x` over the projection of the representation. A stalled
/// solve whose residuals and gap pass the usability gate still yields a
/// value; anything worse is indeterminate.
pub fn support_lift(
    rep: &LiftedRepresentation,
    direction: &[f64],
    opts: &SdpOptions,
) -> Result<SupportOutcome> {
    let sol = support_value(rep, direction, opts)?;
    Ok(match sol.status {
        SdpStatus::Unbounded => SupportOutcome::Unbounded,
        _ if sol.value_usable(SUPPORT_USABLE_TOL) => SupportOutcome::Value(sol.objective),
        _ => SupportOutcome::Indeterminate,
    })
}

/// Brute-force support value `min l . x` over the set: scan a grid on
/// the box for members (membership by direct evaluation at tolerance
/// 1e-9), then sharpen the best member by a pattern search whose step
/// starts at one grid cell and halves `refine_steps` times. Moves are
/// `-h l` and `+-h e_i`; only members are accepted. The reported error
/// bound adds the final step to one cell diagonal.
pub fn support_oracle(
    s: &UnionSet,
    direction: &[f64],
    bbox: &[(f64, f64)],
    resolution: usize,
    refine_steps: usize,
) -> Result<OracleSupport> {
    let n = s.n;
    if direction.len() != n || bbox.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} coordinates, box has {}, set has {}",
            direction.len(),
            bbox.len(),
            n
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput(
            "oracle grid needs at least 2 subdivisions per axis".into(),
        ));
    }
    for (lo, hi) in bbox {
        if !(hi > lo) {
            return Err(Error::InvalidInput(format!(
                "degenerate box side [{lo}, {hi}]"
            )));
        }
    }
    let points = ((resolution + 1) as f64).powi(n as i32);
    if points > 2.0e7 {
        return Err(Error::InvalidInput(format!(
            "oracle grid would hold {points:.0} points; lower the resolution"
        )));
    }

    const MEMBER_TOL: f64 = 1e-9;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0f64; n];
    loop {
        for (i, &k) in idx.iter().enumerate() {
            let (lo, hi) = bbox[i];
            x[i] = lo + (hi - lo) * (k as f64) / (resolution as f64);
        }
        if s.contains(&x, MEMBER_TOL) {
            let v = dot(direction, &x);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, x.clone()));
            }
        }
        // Odometer over the grid indices.
        let mut axis = 0;
        loop {
            if axis == n {
                break;
            }
            idx[axis] += 1;
            if idx[axis] <= resolution {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == n {
            break;
        }
    }
    let (mut value, mut minimizer) = best.ok_or_else(|| {
        Error::InvalidInput("no set member found on the oracle grid; widen the box".into())
    })?;

    let cell: Vec<f64> = bbox
        .iter()
        .map(|(lo, hi)| (hi - lo) / resolution as f64)
        .collect();
    let cell_diag = cell.iter().map(|c| c * c).sum::<f64>().sqrt();
    let dir_norm = dot(direction, direction).sqrt().max(1e-12);

    // Pattern search: step against the objective, along each axis, and
    // along an orthonormal basis of the objective's level set. Accept a
    // strict objective drop, or — the best of a grid scan often sits at
    // the end of a chord of near-equal objective — an (up to rounding)
    // equal objective with strictly deeper membership slack; the level
    // moves then slide the iterate toward the true tangency before the
    // next descent.
    let unit: Vec<f64> = direction.iter().map(|d| d / dir_norm).collect();
    let level = level_basis(&unit);
    let mut slack = membership_slack(s, &minimizer);
    let mut h = cell.iter().cloned().fold(0.0f64, f64::max);
    let mut halvings = 0usize;
    let mut sweeps = 0usize;
    while halvings < refine_steps && sweeps < 50 * refine_steps.max(1) {
        sweeps += 1;
        let mut improved = false;
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(4 * n);
        candidates.push(minimizer.iter().zip(&unit).map(|(c, d)| c - h * d).collect());
        for t in &level {
            for sign in [-1.0, 1.0] {
                candidates.push(
                    minimizer
                        .iter()
                        .zip(t)
                        .map(|(c, d)| c + sign * h * d)
                        .collect(),
                );
            }
        }
        for i in 0..n {
            for sign in [-1.0, 1.0] {
                let mut c = minimizer.clone();
                c[i] += sign * h;
                candidates.push(c);
            }
        }
        let tie = 1e-12 * (1.0 + value.abs());
        for c in candidates {
            if !s.contains(&c, MEMBER_TOL) {
                continue;
            }
            let v = dot(direction, &c);
            let sl = membership_slack(s, &c);
            if v < value - tie || (v <= value + tie && sl > slack) {
                value = v;
                slack = sl;
                minimizer = c;
                improved = true;
            }
        }
        if !improved {
            h /= 2.0;
            halvings += 1;
        }
    }

    let final_step = cell.iter().cloned().fold(0.0f64, f64::max) * 0.5f64.powi(halvings as i32);
    Ok(OracleSupport {
        value,
        minimizer,
        error_bound: dir_norm * (cell_diag + final_step * (n as f64).sqrt()),
    })
}

/// Compare the representation against the set along seeded sphere
/// directions. PASS means every direction was decided with
/// |lift - oracle| <= tol and every membership probe landed on the right
/// side at margin 3 tol; any violation beyond those bounds is FAIL;
/// solver trouble anywhere else leaves the verdict INCONCLUSIVE.
pub fn compare(
    rep: &LiftedRepresentation,
    s: &UnionSet,
    bbox: &[(f64, f64)],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if rep.n != s.n {
        return Err(Error::DimensionMismatch(format!(
            "representation projects to {} coordinates, set has {}",
            rep.n, s.n
        )));
    }
    if opts.directions == 0 {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let dirs = sphere_directions(s.n, opts.directions, opts.seed);

    // Support values, both sides, one thread per direction.
    let mut supports: Vec<(SupportOutcome, OracleSupport)> = Vec::with_capacity(dirs.len());
    {
        let mut slots: Vec<Option<Result<(SupportOutcome, OracleSupport)>>> =
            (0..dirs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = dirs
                .iter()
                .map(|l| {
                    scope.spawn(move || {
                        let lift = support_lift(rep, l, &opts.sdp)?;
                        let oracle =
                            support_oracle(s, l, bbox, opts.resolution, opts.refine_steps)?;
                        Ok((lift, oracle))
                    })
                })
                .collect();
            for (slot, h) in slots.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("support solve panicked"));
            }
        });
        for slot in slots {
            supports.push(slot.expect("all slots filled")?);
        }
    }

    // Interior estimate: the mean of the oracle minimizers. For a convex
    // body this sits inside; membership probes pull toward it.
    let n = s.n;
    let mut centroid = vec![0.0f64; n];
    for (_, o) in &supports {
        for (c, m) in centroid.iter_mut().zip(&o.minimizer) {
            *c += m / supports.len() as f64;
        }
    }

    let margin = MEMBERSHIP_MARGIN_FACTOR * opts.tol;
    // Membership probes: one point pulled inward from each oracle
    // minimizer (a hull member the lift must keep), one pushed past the
    // supporting hyperplane (outside the hull, the lift must reject).
    let mut probes: Vec<(Option<bool>, Option<bool>)> = Vec::with_capacity(dirs.len());
    {
        let centroid = &centroid;
        let mut slots: Vec<Option<Result<(Option<bool>, Option<bool>)>>> =
            (0..dirs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = dirs
                .iter()
                .zip(&supports)
                .map(|(l, (_, o))| {
                    let x_or = o.minimizer.clone();
                    scope.spawn(move || {
                        let pull: Vec<f64> =
                            centroid.iter().zip(&x_or).map(|(c, m)| c - m).collect();
                        let pull_norm = dot(&pull, &pull).sqrt();
                        let t = if pull_norm > 2.0 * margin {
                            margin / pull_norm
                        } else {
                            0.5
                        };
                        let x_in: Vec<f64> =
                            x_or.iter().zip(&pull).map(|(m, p)| m + t * p).collect();
                        let dir_norm = dot(l, l).sqrt().max(1e-12);
                        let x_out: Vec<f64> = x_or
                            .iter()
                            .zip(l)
                            .map(|(m, d)| m - margin * d / dir_norm)
                            .collect();
                        let inp = rep_membership(rep, &x_in, &opts.sdp)?;
                        let outp = rep_membership(rep, &x_out, &opts.sdp)?;
                        Ok((inp, outp))
                    })
                })
                .collect();
            for (slot, h) in slots.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("membership probe panicked"));
            }
        });
        for slot in slots {
            probes.push(slot.expect("all slots filled")?);
        }
    }

    let mut directions = Vec::with_capacity(dirs.len());
    let mut max_abs_gap = 0.0f64;
    let mut inconclusive_directions = 0usize;
    let mut set_in_lift_out = 0usize;
    let mut lift_in_set_out = 0usize;
    let mut undecided_memberships = 0usize;
    for ((l, (lift, oracle)), (inp, outp)) in dirs.iter().zip(&supports).zip(&probes) {
        let gap = match lift {
            SupportOutcome::Value(v) => {
                let g = v - oracle.value;
                max_abs_gap = max_abs_gap.max(g.abs());
                Some(g)
            }
            _ => {
                inconclusive_directions += 1;
                None
            }
        };
        match inp {
            Some(true) => {}
            Some(false) => set_in_lift_out += 1,
            None => undecided_memberships += 1,
        }
        match outp {
            Some(false) => {}
            Some(true) => lift_in_set_out += 1,
            None => undecided_memberships += 1,
        }
        directions.push(DirectionReport {
            direction: l.clone(),
            lift: *lift,
            oracle: oracle.value,
            gap,
        });
    }

    let verdict = if max_abs_gap > opts.tol || set_in_lift_out > 0 || lift_in_set_out > 0 {
        Verdict::Fail
    } else if inconclusive_directions > 0 || undecided_memberships > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };

    Ok(VerifyReport {
        directions,
        max_abs_gap,
        set_in_lift_out,
        lift_in_set_out,
        inconclusive_directions,
        undecided_memberships,
        verdict,
        tol: opts.tol,
        membership_margin: margin,
    })
}

/// Seeded uniform directions on the unit sphere.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5EED));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let norm = dot(&d, &d).sqrt();
        if norm > 1e-9 {
            out.push(d.iter().map(|v| v / norm).collect());
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector
/// `unit`: the coordinate axes with `unit` projected out, kept when the
/// remainder is well-conditioned.
fn level_basis(unit: &[f64]) -> Vec<Vec<f64>> {
    let n = unit.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for i in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = vec![0.0f64; n];
        v[i] = 1.0;
        let c = unit[i];
        for (vk, uk) in v.iter_mut().zip(unit) {
            *vk -= c * uk;
        }
        for b in &basis {
            let c = dot(&v, b);
            for (vk, bk) in v.iter_mut().zip(b) {
                *vk -= c * bk;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            basis.push(v.iter().map(|t| t / norm).collect());
        }
    }
    basis
}

/// Signed membership depth: the best block's worst constraint residual
/// (inequalities as their value, equalities as minus their magnitude).
/// Nonnegative inside, consistent with `UnionSet::contains` up to its
/// tolerance.
fn membership_slack(s: &UnionSet, x: &[f64]) -> f64 {
    s.blocks
        .iter()
        .map(|b| {
            let mut worst = f64::INFINITY;
            for g in &b.inequalities {
                worst = worst.min(g.eval(x));
            }
            for e in &b.equalities {
                worst = worst.min(-e.eval(x).abs());
            }
            worst
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
