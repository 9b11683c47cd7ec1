//! Offline/online split of the residual dual norm: one Riesz representer per
//! residual generator, Gram matrices of the representers per X component,
//! and an online evaluation whose cost depends only on the reduced
//! dimensions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{self, Block};
use crate::eim::EimApproximation;
use crate::params::ParameterPoint;
use crate::rb::project::OperatorProjector;
use crate::rb::space::ReducedBasisSpace;
use crate::sparse;
use crate::system::FeSystem;

/// Residual generators. Indices refer to basis vectors (j, s over velocity;
/// m, l over temperature/pressure) and EIM bases (k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenTag {
    AUx { j: usize },
    AUy { j: usize },
    BxMom { l: usize },
    ByMom { l: usize },
    FBuoyTheta { m: usize },
    FBuoyLift,
    CUx { s: usize, j: usize },
    CUy { s: usize, j: usize },
    SUx { k: usize, j: usize },
    SUy { k: usize, j: usize },
    ATx { m: usize },
    ATy { m: usize },
    ATxLift,
    ATyLift,
    CTx { s: usize, m: usize },
    CTy { s: usize, m: usize },
    CTxLift { s: usize },
    CTyLift { s: usize },
    STx { k: usize, m: usize },
    STy { k: usize, m: usize },
    STxLift { k: usize },
    STyLift { k: usize },
    BxCont { j: usize },
    ByCont { j: usize },
}

/// Scalar weight of a generator at (mu, state): the coefficient multiplying
/// its parameter-independent residual vector.
pub fn coefficient(
    tag: GenTag,
    mu: &ParameterPoint,
    pr: f64,
    u: &[f64],
    th: &[f64],
    p: &[f64],
    sigma: &[f64],
) -> f64 {
    let t = |b: Block| assembly::theta(b, mu, pr);
    match tag {
        GenTag::AUx { j } => t(Block::AUx) * u[j],
        GenTag::AUy { j } => t(Block::AUy) * u[j],
        GenTag::BxMom { l } => t(Block::BX) * p[l],
        GenTag::ByMom { l } => t(Block::BY) * p[l],
        GenTag::FBuoyTheta { m } => t(Block::FBuoy) * th[m],
        GenTag::FBuoyLift => t(Block::FBuoy),
        GenTag::CUx { s, j } => t(Block::CUx) * u[s] * u[j],
        GenTag::CUy { s, j } => t(Block::CUy) * u[s] * u[j],
        GenTag::SUx { k, j } => t(Block::SUx) * sigma[k] * u[j],
        GenTag::SUy { k, j } => t(Block::SUy) * sigma[k] * u[j],
        GenTag::ATx { m } => t(Block::ATx) * th[m],
        GenTag::ATy { m } => t(Block::ATy) * th[m],
        GenTag::ATxLift => t(Block::ATx),
        GenTag::ATyLift => t(Block::ATy),
        GenTag::CTx { s, m } => t(Block::CTx) * u[s] * th[m],
        GenTag::CTy { s, m } => t(Block::CTy) * u[s] * th[m],
        GenTag::CTxLift { s } => t(Block::CTx) * u[s],
        GenTag::CTyLift { s } => t(Block::CTy) * u[s],
        GenTag::STx { k, m } => t(Block::STx) * sigma[k] * th[m],
        GenTag::STy { k, m } => t(Block::STy) * sigma[k] * th[m],
        GenTag::STxLift { k } => t(Block::STx) * sigma[k],
        GenTag::STyLift { k } => t(Block::STy) * sigma[k],
        GenTag::BxCont { j } => t(Block::BX) * u[j],
        GenTag::ByCont { j } => t(Block::BY) * u[j],
    }
}

/// Canonical generator enumeration for given reduced dimensions; stable under
/// growth only entrywise (the library reconciles orderings through a map).
fn momentum_tags(nv: usize, nt: usize, np: usize, m_eim: usize) -> Vec<GenTag> {
    let mut tags = Vec::new();
    for j in 0..nv {
        tags.push(GenTag::AUx { j });
        tags.push(GenTag::AUy { j });
    }
    for l in 0..np {
        tags.push(GenTag::BxMom { l });
        tags.push(GenTag::ByMom { l });
    }
    for m in 0..nt {
        tags.push(GenTag::FBuoyTheta { m });
    }
    tags.push(GenTag::FBuoyLift);
    for s in 0..nv {
        for j in 0..nv {
            tags.push(GenTag::CUx { s, j });
            tags.push(GenTag::CUy { s, j });
        }
    }
    for k in 0..m_eim {
        for j in 0..nv {
            tags.push(GenTag::SUx { k, j });
            tags.push(GenTag::SUy { k, j });
        }
    }
    tags
}

fn energy_tags(nv: usize, nt: usize, m_eim: usize) -> Vec<GenTag> {
    let mut tags = Vec::new();
    for m in 0..nt {
        tags.push(GenTag::ATx { m });
        tags.push(GenTag::ATy { m });
    }
    tags.push(GenTag::ATxLift);
    tags.push(GenTag::ATyLift);
    for s in 0..nv {
        for m in 0..nt {
            tags.push(GenTag::CTx { s, m });
            tags.push(GenTag::CTy { s, m });
        }
        tags.push(GenTag::CTxLift { s });
        tags.push(GenTag::CTyLift { s });
    }
    for k in 0..m_eim {
        for m in 0..nt {
            tags.push(GenTag::STx { k, m });
            tags.push(GenTag::STy { k, m });
        }
        tags.push(GenTag::STxLift { k });
        tags.push(GenTag::STyLift { k });
    }
    tags
}

fn continuity_tags(nv: usize) -> Vec<GenTag> {
    let mut tags = Vec::new();
    for j in 0..nv {
        tags.push(GenTag::BxCont { j });
        tags.push(GenTag::ByCont { j });
    }
    tags
}

#[derive(Clone, Default, Serialize, Deserialize)]
pub struct SpaceLib {
    pub tags: Vec<GenTag>,
    pub gram: DMatrix<f64>,
    /// Riesz representers on free dofs; offline state, not persisted
    #[serde(skip)]
    reps: Vec<Vec<f64>>,
}

#[derive(Clone, Default, Serialize, Deserialize)]
pub struct RieszLibrary {
    pub momentum: SpaceLib,
    pub energy: SpaceLib,
    pub continuity: SpaceLib,
}

impl RieszLibrary {
    /// Bring the library up to date with the current space, reusing every
    /// previously computed representer and Gram entry.
    pub fn sync(
        &mut self,
        sys: &FeSystem,
        projector: &OperatorProjector,
        space: &ReducedBasisSpace,
        eim: &EimApproximation,
    ) {
        let nv = space.n_vel();
        let nt = space.temperature.len();
        let np = space.pressure.len();
        let m_eim = eim.m();
        let lift = sys.layout.lift_vector();

        let raw_mom = |tag: GenTag| raw_vector(sys, projector, space, &lift, tag);
        sync_space(
            &mut self.momentum,
            momentum_tags(nv, nt, np, m_eim),
            |tag| raw_mom(tag),
            |dual| {
                let rhs = sys.vel_to_free(&dual);
                sys.k_vel_solver.solve(&rhs)
            },
            |dual| sys.vel_to_free(&dual),
        );
        sync_space(
            &mut self.energy,
            energy_tags(nv, nt, m_eim),
            |tag| raw_vector(sys, projector, space, &lift, tag),
            |dual| {
                let rhs = sys.temp_to_free(&dual);
                sys.k_temp_solver.solve(&rhs)
            },
            |dual| sys.temp_to_free(&dual),
        );
        sync_space(
            &mut self.continuity,
            continuity_tags(nv),
            |tag| raw_vector(sys, projector, space, &lift, tag),
            |dual| {
                let (rep, _) = sys.riesz_pressure(&dual);
                rep
            },
            |dual| dual.to_vec(),
        );
    }

    /// Online residual dual norm at a reduced state.
    pub fn epsilon(
        &self,
        mu: &ParameterPoint,
        pr: f64,
        u: &[f64],
        th: &[f64],
        p: &[f64],
        sigma: &[f64],
    ) -> f64 {
        let mut total = 0.0;
        for lib in [&self.momentum, &self.energy, &self.continuity] {
            let c: Vec<f64> = lib
                .tags
                .iter()
                .map(|&t| coefficient(t, mu, pr, u, th, p, sigma))
                .collect();
            // c^T G c
            let n = c.len();
            let mut acc = 0.0;
            for i in 0..n {
                if c[i] == 0.0 {
                    continue;
                }
                let row = lib.gram.row(i);
                let mut s = 0.0;
                for j in 0..n {
                    s += row[j] * c[j];
                }
                acc += c[i] * s;
            }
            total += acc;
        }
        total.max(0.0).sqrt()
    }
}

/// Parameter-independent dual vector of one generator on its test space.
fn raw_vector(
    sys: &FeSystem,
    projector: &OperatorProjector,
    space: &ReducedBasisSpace,
    lift: &[f64],
    tag: GenTag,
) -> Vec<f64> {
    let layout = &sys.layout;
    let n = layout.n_p2_nodes;
    let conv = projector.conv_kernels();
    let eimk = projector.eim_kernels();
    let vel_apply = |kernel: &sparse::Csc, field: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; layout.n_vel];
        let f1 = assembly::velocity_component(field, 0, n);
        let f2 = assembly::velocity_component(field, 1, n);
        let mut o1 = vec![0.0; n];
        let mut o2 = vec![0.0; n];
        sparse::matvec(kernel, &f1, &mut o1);
        sparse::matvec(kernel, &f2, &mut o2);
        for i in 0..n {
            out[2 * i] = o1[i];
            out[2 * i + 1] = o2[i];
        }
        out
    };
    let scal_apply = |kernel: &sparse::Csc, field: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; layout.n_temp];
        sparse::matvec(kernel, field, &mut out);
        out
    };
    match tag {
        GenTag::AUx { j } => apply(&sys.ops.a_ux, &space.velocity[j], layout.n_vel),
        GenTag::AUy { j } => apply(&sys.ops.a_uy, &space.velocity[j], layout.n_vel),
        GenTag::BxMom { l } => apply_t(&sys.ops.b_x, &space.pressure[l], layout.n_vel),
        GenTag::ByMom { l } => apply_t(&sys.ops.b_y, &space.pressure[l], layout.n_vel),
        GenTag::FBuoyTheta { m } => apply(&sys.ops.f_buoy, &space.temperature[m], layout.n_vel),
        GenTag::FBuoyLift => apply(&sys.ops.f_buoy, lift, layout.n_vel),
        GenTag::CUx { s, j } => vel_apply(&conv[s].0, &space.velocity[j]),
        GenTag::CUy { s, j } => vel_apply(&conv[s].1, &space.velocity[j]),
        GenTag::SUx { k, j } => vel_apply(&eimk[k].0, &space.velocity[j]),
        GenTag::SUy { k, j } => vel_apply(&eimk[k].1, &space.velocity[j]),
        GenTag::ATx { m } => apply(&sys.ops.a_tx, &space.temperature[m], layout.n_temp),
        GenTag::ATy { m } => apply(&sys.ops.a_ty, &space.temperature[m], layout.n_temp),
        GenTag::ATxLift => apply(&sys.ops.a_tx, lift, layout.n_temp),
        GenTag::ATyLift => apply(&sys.ops.a_ty, lift, layout.n_temp),
        GenTag::CTx { s, m } => scal_apply(&conv[s].0, &space.temperature[m]),
        GenTag::CTy { s, m } => scal_apply(&conv[s].1, &space.temperature[m]),
        GenTag::CTxLift { s } => scal_apply(&conv[s].0, lift),
        GenTag::CTyLift { s } => scal_apply(&conv[s].1, lift),
        GenTag::STx { k, m } => scal_apply(&eimk[k].0, &space.temperature[m]),
        GenTag::STy { k, m } => scal_apply(&eimk[k].1, &space.temperature[m]),
        GenTag::STxLift { k } => scal_apply(&eimk[k].0, lift),
        GenTag::STyLift { k } => scal_apply(&eimk[k].1, lift),
        GenTag::BxCont { j } => apply(&sys.ops.b_x, &space.velocity[j], layout.n_pres),
        GenTag::ByCont { j } => apply(&sys.ops.b_y, &space.velocity[j], layout.n_pres),
    }
}

fn apply(m: &sparse::Csc, x: &[f64], nrows: usize) -> Vec<f64> {
    let mut out = vec![0.0; nrows];
    sparse::matvec(m, x, &mut out);
    out
}

fn apply_t(m: &sparse::Csc, x: &[f64], ncols: usize) -> Vec<f64> {
    let mut out = vec![0.0; ncols];
    sparse::matvec_transpose_add(m, x, &mut out, 1.0);
    out
}

/// Extend one component library to a new tag list, computing representers
/// for new tags and Gram entries for new pairs.
fn sync_space(
    lib: &mut SpaceLib,
    new_tags: Vec<GenTag>,
    raw: impl Fn(GenTag) -> Vec<f64>,
    riesz: impl Fn(Vec<f64>) -> Vec<f64>,
    restrict: impl Fn(Vec<f64>) -> Vec<f64>,
) {
    let n_new = new_tags.len();
    let mut old_index = std::collections::HashMap::new();
    for (i, t) in lib.tags.iter().enumerate() {
        old_index.insert(*t, i);
    }
    let mut reps: Vec<Vec<f64>> = Vec::with_capacity(n_new);
    let mut raw_free: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_new);
    let mut from_old: Vec<Option<usize>> = Vec::with_capacity(n_new);
    for &t in &new_tags {
        if let Some(&i) = old_index.get(&t) {
            reps.push(lib.reps[i].clone());
            raw_free.push(None);
            from_old.push(Some(i));
        } else {
            let dual = raw(t);
            let rf = restrict(dual.clone());
            reps.push(riesz(dual));
            raw_free.push(Some(rf));
            from_old.push(None);
        }
    }
    let mut gram = DMatrix::zeros(n_new, n_new);
    for i in 0..n_new {
        for j in 0..=i {
            let v = match (from_old[i], from_old[j]) {
                (Some(oi), Some(oj)) => lib.gram[(oi, oj)],
                _ => {
                    // (r_i, r_j)_K = rep_i . raw_j when either side is fresh
                    if let Some(rj) = &raw_free[j] {
                        sparse::dot(&reps[i], rj)
                    } else if let Some(ri) = &raw_free[i] {
                        sparse::dot(&reps[j], ri)
                    } else {
                        unreachable!()
                    }
                }
            };
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    lib.tags = new_tags;
    lib.gram = gram;
    lib.reps = reps;
}

impl std::fmt::Debug for RieszLibrary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "RieszLibrary(momentum: {}, energy: {}, continuity: {})",
            self.momentum.tags.len(),
            self.energy.tags.len(),
            self.continuity.tags.len()
        )
    }
}
