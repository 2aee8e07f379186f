//! The attention potential: graph construction, featurization, alternating
//! out/in-neighborhood attention blocks and the readout heads.

use std::rc::Rc;

use super::attention::{window_attention, PairList};
use super::features::{angular_var, radial_var};
use super::{ForceField, GraphKind, Head, ParamVars, Parameters, PotentialConfig, PotentialError};
use crate::autodiff::{grad, AdError, Tape, Tensor, Var};
use crate::chem::Structure;
use crate::graphs::{diff_knn_memeff, diff_knn_with, envelope, hard_knn_cutoff, DiffKnnParams, RankKernel, TruncationReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub config: PotentialConfig,
    pub params: Parameters,
}

/// Index data for one evaluation, fixed by the positions' values.
#[derive(Debug, Clone)]
pub(crate) struct GraphPlan {
    /// Pairs whose vectors are taped; the edges are a subset of them.
    pub cand_src: Rc<Vec<usize>>,
    pub cand_dst: Rc<Vec<usize>>,
    /// Candidate index of each edge.
    pub edge: Rc<Vec<usize>>,
    pub src: Rc<Vec<usize>>,
    pub dst: Rc<Vec<usize>>,
    pub weights: Weighting,
}

#[derive(Debug, Clone)]
pub(crate) enum Weighting {
    /// `f = d / r_c`.
    Distance,
    /// Soft-rank terms `kernel((d_e - d_c) / d0)` for `(edge, candidate)` pairs,
    /// plus a constant per edge from terms that sit on a flat part of the kernel.
    Rank { kernel: RankKernel, pair_edge: Rc<Vec<usize>>, pair_cand: Rc<Vec<usize>>, constant: Vec<f64> },
}

/// Attention weights of one block, for inspection.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    pub layer: usize,
    /// `true` for out-neighborhood windows.
    pub out_phase: bool,
    /// `(source, destination)` per edge.
    pub edges: Vec<(usize, usize)>,
    pub query: Vec<usize>,
    pub key: Vec<usize>,
    /// `[pair][head]`, row-major.
    pub weights: Vec<f64>,
}

fn bump_parts(x: f64) -> Option<f64> {
    if x <= -1.0 {
        Some(0.0)
    } else if x >= 1.0 {
        Some(1.0)
    } else {
        None
    }
}

impl Potential {
    pub fn new(config: PotentialConfig) -> Result<Self, PotentialError> {
        let params = Parameters::init(&config)?;
        Ok(Self { config, params })
    }

    pub fn from_parts(config: PotentialConfig, params: Parameters) -> Result<Self, PotentialError> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn species_indices(&self, species: &[u8]) -> Result<Vec<usize>, PotentialError> {
        species.iter().map(|&z| self.config.species_index(z)).collect()
    }

    fn diff_params(&self, kernel: RankKernel) -> DiffKnnParams {
        let c = &self.config;
        DiffKnnParams { k: c.k, d0: c.d0, r_c: c.r_c, beta: c.beta, kernel }
    }

    /// Graph for the current positions, plus the truncation report of the
    /// memory-efficient variant.
    pub(crate) fn plan(&self, positions: &[[f64; 3]]) -> (GraphPlan, Option<TruncationReport>) {
        let c = &self.config;
        match c.graph {
            GraphKind::HardKnn => {
                let g = hard_knn_cutoff(positions, c.k, c.r_c);
                let keep: Vec<usize> = (0..g.len()).filter(|&e| envelope(g.dist[e] / c.r_c) > 0.0).collect();
                let src: Vec<usize> = keep.iter().map(|&e| g.src[e]).collect();
                let dst: Vec<usize> = keep.iter().map(|&e| g.dst[e]).collect();
                let plan = GraphPlan {
                    cand_src: Rc::new(src.clone()),
                    cand_dst: Rc::new(dst.clone()),
                    edge: Rc::new((0..keep.len()).collect()),
                    src: Rc::new(src),
                    dst: Rc::new(dst),
                    weights: Weighting::Distance,
                };
                (plan, None)
            }
            GraphKind::DiffKnn | GraphKind::DiffKnnMemeff => {
                let (g, report) = if c.graph == GraphKind::DiffKnn {
                    (diff_knn_with(positions, self.diff_params(RankKernel::Sigmoid)), None)
                } else {
                    let (g, r) = diff_knn_memeff(positions, c.k, c.delta, c.d0, c.r_c, c.beta);
                    (g, Some(r))
                };
                let (pe, pc) = g.comparison_pairs();
                let kernel = g.params.kernel;
                let mut constant = vec![0.0; g.edges.len()];
                let (mut pair_edge, mut pair_cand) = (Vec::new(), Vec::new());
                for (&e, &c2) in pe.iter().zip(&pc) {
                    let x = (g.edges.dist[e] - g.candidates.dist[c2]) / c.d0;
                    match (kernel, bump_parts(x)) {
                        (RankKernel::Bump, Some(v)) => constant[e] += v,
                        _ => {
                            pair_edge.push(e);
                            pair_cand.push(c2);
                        }
                    }
                }
                let plan = GraphPlan {
                    cand_src: Rc::new(g.candidates.src.clone()),
                    cand_dst: Rc::new(g.candidates.dst.clone()),
                    edge: Rc::new(g.retained.clone()),
                    src: Rc::new(g.edges.src.clone()),
                    dst: Rc::new(g.edges.dst.clone()),
                    weights: Weighting::Rank {
                        kernel,
                        pair_edge: Rc::new(pair_edge),
                        pair_cand: Rc::new(pair_cand),
                        constant,
                    },
                };
                (plan, report)
            }
        }
    }

    /// `f_env` per edge as a taped function of the candidate distances.
    pub(crate) fn envelope_argument(&self, plan: &GraphPlan, d_cand: &Var, d_edge: &Var) -> Result<Var, AdError> {
        let c = &self.config;
        let f_dist = d_edge.scale(1.0 / c.r_c)?;
        let Weighting::Rank { kernel, pair_edge, pair_cand, constant } = &plan.weights else {
            return Ok(f_dist);
        };
        let n_edges = plan.edge.len();
        let x = d_edge.gather(pair_edge.clone())?.sub(&d_cand.gather(pair_cand.clone())?)?.scale(1.0 / c.d0)?;
        let terms = match kernel {
            RankKernel::Sigmoid => x.sigmoid()?,
            RankKernel::Bump => {
                let one = Var::scalar(1.0);
                let a = one.sub(&x)?;
                let b = one.add(&x)?;
                Var::scalar(2.0).div(&a)?.sub(&Var::scalar(2.0).div(&b)?)?.sigmoid()?
            }
        };
        let rank = terms.scatter_add(pair_edge.clone(), n_edges)?.add(&Var::constant(Tensor::from_vec(constant.clone())))?;
        let f_rank = rank.scale(1.0 / c.k as f64)?;
        // log-sum-exp with a constant shift
        let m: Vec<f64> = f_rank.value().data().iter().zip(f_dist.value().data()).map(|(a, b)| a.max(*b)).collect();
        let m = Var::constant(Tensor::from_vec(m));
        let s = f_rank.sub(&m)?.scale(c.beta)?.exp()?.add(&f_dist.sub(&m)?.scale(c.beta)?.exp()?)?;
        m.add(&s.log()?.scale(1.0 / c.beta)?)
    }

    fn layer_norm(h: &Var, gain: &Var, bias: &Var) -> Result<Var, AdError> {
        let e = h.shape()[0];
        let mean = h.mean_axis(1)?.reshape(&[e, 1])?;
        let c = h.sub(&mean)?;
        let var = c.square()?.mean_axis(1)?.reshape(&[e, 1])?;
        c.div(&var.add_scalar(1e-5)?.sqrt()?)?.mul(gain)?.add(bias)
    }

    fn mlp(x: &Var, p: &ParamVars, first: &str, second: &str) -> Result<Var, AdError> {
        x.matmul(p.get(&format!("{first}_w")))?
            .add(p.get(&format!("{first}_b")))?
            .silu()?
            .matmul(p.get(&format!("{second}_w")))?
            .add(p.get(&format!("{second}_b")))
    }

    /// Taped energy (and direct forces for the direct head) at positions `x` (`[N, 3]`).
    pub(crate) fn forward(
        &self,
        p: &ParamVars,
        species: &[usize],
        x: &Var,
        mut record: Option<&mut Vec<AttentionMap>>,
    ) -> Result<(Var, Option<Var>), PotentialError> {
        let c = &self.config;
        let n = species.len();
        if x.shape() != [n, 3] {
            return Err(PotentialError::Shape(format!("positions have shape {:?} for {n} atoms", x.shape())));
        }
        let species_rc = Rc::new(species.to_vec());
        let offsets = p.get("offsets").gather(species_rc.clone())?.sum()?;
        let (plan, _) = self.plan(&x.value().to_rows3());
        let n_edges = plan.edge.len();
        if n_edges == 0 {
            let forces = (c.head == Head::Direct).then(|| Var::constant(Tensor::zeros(&[n, 3])));
            return Ok((offsets, forces));
        }

        let vec_c = x.gather(plan.cand_dst.clone())?.sub(&x.gather(plan.cand_src.clone())?)?;
        let n_cand = plan.cand_src.len();
        let d_c = vec_c.square()?.sum_axis(1)?.sqrt()?;
        let d = d_c.gather(plan.edge.clone())?;
        let vec = vec_c.gather(plan.edge.clone())?;
        debug_assert_eq!(d_c.shape(), [n_cand]);
        let f = self.envelope_argument(&plan, &d_c, &d)?;
        // log e = -f^2 / (1 - f^2)
        let f2 = f.square()?;
        let log_w = f2.div(&f2.add_scalar(-1.0)?)?;
        let w = log_w.exp()?.reshape(&[n_edges, 1])?;

        let d_col = d.reshape(&[n_edges, 1])?;
        let u = vec.div(&d_col)?;
        let src_species = Rc::new(plan.src.iter().map(|&i| species[i]).collect::<Vec<_>>());
        let dst_species = Rc::new(plan.dst.iter().map(|&i| species[i]).collect::<Vec<_>>());
        let mut h = radial_var(&d_col, c.n_radial, c.r_c, c.gamma)?
            .matmul(p.get("radial_w"))?
            .add(&angular_var(&u, c.l_max)?.matmul(p.get("angular_w"))?)?
            .add(&p.get("src_embed").gather(src_species)?)?
            .add(&p.get("dst_embed").gather(dst_species)?)?
            .add(p.get("input_b"))?;

        let out_pairs = PairList::from_groups(&plan.src, n);
        let in_pairs = PairList::from_groups(&plan.dst, n);
        let value_weight = if c.value_scaling { Some(w.reshape(&[n_edges])?) } else { None };
        for l in 0..c.n_layers {
            let name = |s: &str| format!("layer{l}.{s}");
            let out_phase = l % 2 == 0;
            let pairs = if out_phase { &out_pairs } else { &in_pairs };
            let a = Self::layer_norm(&h, p.get(&name("ln1.gain")), p.get(&name("ln1.bias")))?;
            let (att, weights) = window_attention(
                &a.matmul(p.get(&name("q_w")))?,
                &a.matmul(p.get(&name("k_w")))?,
                &a.matmul(p.get(&name("v_w")))?,
                pairs,
                c.n_heads,
                c.tau,
                Some(&log_w),
                value_weight.as_ref(),
            )?;
            if let Some(rec) = record.as_deref_mut() {
                rec.push(AttentionMap {
                    layer: l,
                    out_phase,
                    edges: plan.src.iter().zip(plan.dst.iter()).map(|(&a, &b)| (a, b)).collect(),
                    query: pairs.query.to_vec(),
                    key: pairs.key.to_vec(),
                    weights: weights.value().data().to_vec(),
                });
            }
            h = h.add(&att.matmul(p.get(&name("o_w")))?)?;
            let b = Self::layer_norm(&h, p.get(&name("ln2.gain")), p.get(&name("ln2.bias")))?;
            h = h.add(&Self::mlp(&b, p, &name("ff1"), &name("ff2"))?)?;
        }
        let o = Self::layer_norm(&h, p.get("out_ln.gain"), p.get("out_ln.bias"))?;
        // per-edge contributions pooled onto source atoms, weighted by e_ij
        let energy = Self::mlp(&o, p, "energy1", "energy2")?.mul(&w)?.sum()?.add(&offsets)?;
        let forces = if c.head == Head::Direct {
            let coef = Self::mlp(&o, p, "force1", "force2")?.mul(&w)?;
            Some(coef.mul(&u)?.scatter_add(plan.src.clone(), n)?)
        } else {
            None
        };
        Ok((energy, forces))
    }

    pub fn energy_at(&self, species: &[u8], positions: &[[f64; 3]]) -> Result<f64, PotentialError> {
        let idx = self.species_indices(species)?;
        let (e, _) = self.forward(&self.params.constants(), &idx, &Var::constant(Tensor::from_rows3(positions)), None)?;
        Ok(e.item())
    }

    pub fn energy_forces_at(
        &self,
        species: &[u8],
        positions: &[[f64; 3]],
    ) -> Result<(f64, Vec<[f64; 3]>), PotentialError> {
        let idx = self.species_indices(species)?;
        let p = self.params.constants();
        let (e, f) = match self.config.head {
            Head::Gradient => {
                let tape = Tape::new();
                let x = tape.var(Tensor::from_rows3(positions));
                let (e, _) = self.forward(&p, &idx, &x, None)?;
                let g = grad(&e, &[&x], false)?.remove(0);
                (e.item(), g.value().map(|v| -v).to_rows3())
            }
            Head::Direct => {
                let (e, f) = self.forward(&p, &idx, &Var::constant(Tensor::from_rows3(positions)), None)?;
                (e.item(), f.expect("direct head returns forces").value().to_rows3())
            }
        };
        if !e.is_finite() || f.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite("model output".into()));
        }
        Ok((e, f))
    }

    /// Forces and their directional derivative `dF/ds` for positions moving
    /// as `x + s v`. The gradient head uses one Hessian-vector product; the
    /// direct head differentiates each force component.
    pub fn force_derivative_at(
        &self,
        species: &[u8],
        positions: &[[f64; 3]],
        v: &[[f64; 3]],
    ) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>), PotentialError> {
        if v.len() != positions.len() {
            return Err(PotentialError::Shape(format!("{} directions for {} atoms", v.len(), positions.len())));
        }
        let idx = self.species_indices(species)?;
        let p = self.params.constants();
        let tape = Tape::new();
        let x = tape.var(Tensor::from_rows3(positions));
        let dir = Var::constant(Tensor::from_rows3(v));
        let (e, f) = self.forward(&p, &idx, &x, None)?;
        let (forces, jv) = match self.config.head {
            Head::Gradient => {
                let f = grad(&e, &[&x], true)?.remove(0).neg()?;
                // the force Jacobian is minus the Hessian, hence symmetric
                let jv = grad(&f.mul(&dir)?.sum()?, &[&x], false)?.remove(0);
                (f.value().to_rows3(), jv.value().to_rows3())
            }
            Head::Direct => {
                let f = f.expect("direct head returns forces");
                let n3 = 3 * positions.len();
                let flat = f.reshape(&[n3])?;
                let vflat: Vec<f64> = v.iter().flatten().copied().collect();
                let mut jv = vec![0.0; n3];
                for (c, out) in jv.iter_mut().enumerate() {
                    let row = grad(&flat.gather(Rc::new(vec![c]))?.sum()?, &[&x], false)?.remove(0);
                    *out = row.value().data().iter().zip(&vflat).map(|(a, b)| a * b).sum();
                }
                (f.value().to_rows3(), Tensor::new(vec![positions.len(), 3], jv)?.to_rows3())
            }
        };
        if forces.iter().chain(&jv).flatten().any(|x| !x.is_finite()) {
            return Err(PotentialError::NonFinite("force derivative".into()));
        }
        Ok((forces, jv))
    }

    pub fn energy(&self, s: &Structure) -> Result<f64, PotentialError> {
        self.energy_at(s.species(), s.positions())
    }

    pub fn forces(&self, s: &Structure) -> Result<Vec<[f64; 3]>, PotentialError> {
        Ok(self.energy_forces_at(s.species(), s.positions())?.1)
    }

    pub fn energy_forces(&self, s: &Structure) -> Result<(f64, Vec<[f64; 3]>), PotentialError> {
        self.energy_forces_at(s.species(), s.positions())
    }

    /// Attention weights of every block at the structure's geometry.
    pub fn attention_maps(&self, s: &Structure) -> Result<Vec<AttentionMap>, PotentialError> {
        let idx = self.species_indices(s.species())?;
        let mut maps = Vec::new();
        self.forward(&self.params.constants(), &idx, &Var::constant(Tensor::from_rows3(s.positions())), Some(&mut maps))?;
        Ok(maps)
    }

    /// Truncation diagnostics of the memory-efficient graph; `None` for other graphs.
    pub fn truncation_report(&self, positions: &[[f64; 3]]) -> Option<TruncationReport> {
        self.plan(positions).1
    }

    /// Fixes the species so the model can drive dynamics or scans.
    pub fn bind(&self, species: &[u8]) -> Result<BoundModel<'_>, PotentialError> {
        self.species_indices(species)?;
        Ok(BoundModel { potential: self, species: species.to_vec() })
    }
}

/// A model with its species fixed.
#[derive(Debug, Clone)]
pub struct BoundModel<'a> {
    pub potential: &'a Potential,
    pub species: Vec<u8>,
}

impl ForceField for BoundModel<'_> {
    fn energy_forces(&self, positions: &[[f64; 3]]) -> Result<(f64, Vec<[f64; 3]>), PotentialError> {
        self.potential.energy_forces_at(&self.species, positions)
    }
}
