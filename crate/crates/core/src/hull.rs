//! Gluing construction for convex hulls of unions.
//!
//! Given lifted representations of sets W_1..W_m in a shared ambient
//! space, the glued representation describes
//!
//!   C = { sum_k x^(k) : exists lambda in the simplex and u^(k) with
//!         lambda_k A^(k) + sum_i x_i^(k) B_i^(k) + sum_j u_j^(k) C_j^(k)
//!         PSD for every k }.
//!
//! C always contains conv(W_1 ∪ ... ∪ W_m); when every W_k is bounded the
//! two sets are equal, and in general only their closures agree. Each
//! branch keeps its pencils verbatim with the former constant block
//! reattached to lambda_k, and the output x is identified with the sum of
//! the branch copies by affine rows rather than eliminated.

use crate::error::{Error, Result};
use crate::rep::{AffineRow, LiftedRepresentation, LinearPencil, RepMetadata};
use crate::sdp::{rep_membership, SdpOptions};
use crate::symmat::SymMat;

/// Where each branch's variable copies live inside the glued lifted
/// coordinate vector.
#[derive(Clone, Copy, Debug)]
pub struct BranchLayout {
    /// Start of this branch's x-copy.
    pub x_offset: usize,
    /// Start of this branch's own lifted coordinates.
    pub u_offset: usize,
    pub num_lifted: usize,
}

#[derive(Clone, Debug)]
pub struct UnionLift {
    pub inputs: Vec<LiftedRepresentation>,
    pub rep: LiftedRepresentation,
    pub branches: Vec<BranchLayout>,
    /// Start of the simplex weights within the lifted coordinates.
    pub lambda_offset: usize,
}

/// Glue representations of W_1..W_m into one for C above.
///
/// `inputs_bounded` is a caller-supplied promise, not something this layer
/// can decide; without it the output carries a warning that only closure
/// equality with the hull is guaranteed.
pub fn build_union(
    reps: &[LiftedRepresentation],
    inputs_bounded: bool,
) -> Result<UnionLift> {
    if reps.is_empty() {
        return Err(Error::InvalidInput("union of zero representations".into()));
    }
    let n = reps[0].n;
    for r in reps {
        r.validate()?;
        if r.n != n {
            return Err(Error::DimensionMismatch(format!(
                "representations in {} and {} ambient variables cannot be glued",
                n, r.n
            )));
        }
    }
    let m = reps.len();

    let mut branches = Vec::with_capacity(m);
    let mut offset = 0usize;
    for r in reps {
        branches.push(BranchLayout {
            x_offset: offset,
            u_offset: offset + n,
            num_lifted: r.num_lifted,
        });
        offset += n + r.num_lifted;
    }
    let lambda_offset = offset;
    let num_lifted = offset + m;

    let mut rep = LiftedRepresentation::new(n, num_lifted);

    for (k, (r, layout)) in reps.iter().zip(&branches).enumerate() {
        for p in &r.pencils {
            let mut bu = vec![SymMat::zeros(p.size); num_lifted];
            bu[lambda_offset + k] = p.a0.clone();
            for (i, a) in p.ax.iter().enumerate() {
                bu[layout.x_offset + i] = a.clone();
            }
            for (j, b) in p.bu.iter().enumerate() {
                bu[layout.u_offset + j] = b.clone();
            }
            rep.pencils.push(LinearPencil {
                size: p.size,
                a0: SymMat::zeros(p.size),
                ax: vec![SymMat::zeros(p.size); n],
                bu,
            });
        }
        for row in &r.equalities {
            // Homogenized: the constant term rides on lambda_k.
            let mut u_coeffs = vec![0.0; num_lifted];
            for (i, c) in row.x_coeffs.iter().enumerate() {
                u_coeffs[layout.x_offset + i] = *c;
            }
            for (j, c) in row.u_coeffs.iter().enumerate() {
                u_coeffs[layout.u_offset + j] = *c;
            }
            u_coeffs[lambda_offset + k] = row.constant;
            rep.equalities.push(AffineRow {
                x_coeffs: vec![0.0; n],
                u_coeffs,
                constant: 0.0,
            });
        }
    }

    // lambda_k >= 0 as one diagonal pencil.
    let mut lambda_bu = vec![SymMat::zeros(m); num_lifted];
    for (k, mat) in lambda_bu.iter_mut().skip(lambda_offset).enumerate() {
        mat.set(k, k, 1.0);
    }
    rep.pencils.push(LinearPencil {
        size: m,
        a0: SymMat::zeros(m),
        ax: vec![SymMat::zeros(m); n],
        bu: lambda_bu,
    });

    // sum lambda_k = 1.
    let mut simplex = AffineRow {
        x_coeffs: vec![0.0; n],
        u_coeffs: vec![0.0; num_lifted],
        constant: -1.0,
    };
    for k in 0..m {
        simplex.u_coeffs[lambda_offset + k] = 1.0;
    }
    rep.equalities.push(simplex);

    // x_i = sum_k x_i^(k).
    for i in 0..n {
        let mut row = AffineRow {
            x_coeffs: vec![0.0; n],
            u_coeffs: vec![0.0; num_lifted],
            constant: 0.0,
        };
        row.x_coeffs[i] = 1.0;
        for layout in &branches {
            row.u_coeffs[layout.x_offset + i] = -1.0;
        }
        rep.equalities.push(row);
    }

    let mut notes = vec![format!("branches={m}")];
    if !inputs_bounded {
        notes.push(
            "unbounded inputs: projection equals the hull only up to closure".into(),
        );
    }
    rep.metadata = RepMetadata {
        construction: Some("union".into()),
        unbounded_warning: !inputs_bounded,
        notes,
        ..RepMetadata::default()
    };
    rep.validate()?;

    Ok(UnionLift {
        inputs: reps.to_vec(),
        rep,
        branches,
        lambda_offset,
    })
}

/// Membership of `x` in the glued projection; `None` when the solver
/// cannot decide.
pub fn membership(ul: &UnionLift, x: &[f64], opts: &SdpOptions) -> Result<Option<bool>> {
    rep_membership(&ul.rep, x, opts)
}
