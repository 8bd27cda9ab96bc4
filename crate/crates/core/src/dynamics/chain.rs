use serde::{Deserialize, Serialize};

use super::{DrawSource, Recorder, Replay};
use crate::error::{Error, Result};
use crate::exact::Limits;
use crate::spin::{plus_probability, IsingModel, SpinConfig, UpdateRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Single-site heat-bath updates at a uniform vertex.
    Plain,
    /// A uniform `v ∉ F` is updated alone; a uniform `v ∈ F` triggers a
    /// joint resample of the block `{v} ∪ F^c` given `F ∖ {v}`.
    Accelerated,
    /// The chain on `{±1}^F`: a uniform `v ∈ F` is resampled from the Gibbs
    /// conditional given `F ∖ {v}` with `F^c` summed out.
    ZChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// Enumerate the block's conditional law. The block factorizes over
    /// connected components of the induced subgraph, so only the largest
    /// component is bounded by the block limit.
    Exact,
    /// Approximate a block resample by heat-bath steps at uniform block
    /// sites. Not exact.
    NestedGlauber { inner_steps: u64 },
}

impl BlockMode {
    /// `⌈20 b ln b⌉` inner steps for a block of `b` sites (at least one).
    pub fn nested_default(block_size: usize) -> Self {
        let b = block_size.max(1) as f64;
        BlockMode::NestedGlauber {
            inner_steps: ((20.0 * b * b.ln()).ceil() as u64).max(1),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, BlockMode::Exact)
    }
}

/// A connected piece of a block with its conditioning data.
#[derive(Debug, Clone)]
struct Component {
    sites: Vec<usize>,
    /// Edges inside the component, by local index.
    internal: Vec<(usize, usize, f64)>,
    /// Per local site: neighbors outside the component, all of them in `F`.
    boundary: Vec<Vec<(usize, f64)>>,
}

impl Component {
    fn build(model: &IsingModel, sites: Vec<usize>) -> Self {
        let mut local = vec![usize::MAX; model.n()];
        for (i, &v) in sites.iter().enumerate() {
            local[v] = i;
        }
        let mut internal = Vec::new();
        let mut boundary = vec![Vec::new(); sites.len()];
        for (i, &v) in sites.iter().enumerate() {
            for &(w, j) in model.neighbors(v) {
                if local[w] == usize::MAX {
                    boundary[i].push((w, j));
                } else if i < local[w] {
                    internal.push((i, local[w], j));
                }
            }
        }
        Self {
            sites,
            internal,
            boundary,
        }
    }

    fn external_fields(&self, model: &IsingModel, spin_of: impl Fn(usize) -> i8) -> Vec<f64> {
        self.sites
            .iter()
            .zip(&self.boundary)
            .map(|(&v, bd)| {
                bd.iter()
                    .fold(model.field()[v], |acc, &(w, j)| acc + j * f64::from(spin_of(w)))
            })
            .collect()
    }

    /// Log-weights of all `2^c` assignments; bit `i` of the index is site `i`.
    fn log_weights(&self, ext: &[f64]) -> Vec<f64> {
        let c = self.sites.len();
        (0..1u64 << c)
            .map(|a| {
                let s = |i: usize| if (a >> i) & 1 == 1 { 1.0 } else { -1.0 };
                let mut e: f64 = ext.iter().enumerate().map(|(i, h)| h * s(i)).sum();
                for &(i, k, j) in &self.internal {
                    e += j * s(i) * s(k);
                }
                e
            })
            .collect()
    }

    /// `P(site 0 = +1)` under the conditional law.
    fn first_plus_probability(&self, model: &IsingModel, spin_of: impl Fn(usize) -> i8) -> f64 {
        let ext = self.external_fields(model, spin_of);
        if self.sites.len() == 1 {
            return plus_probability(ext[0]);
        }
        let lw = self.log_weights(&ext);
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut plus, mut total) = (0.0, 0.0);
        for (a, e) in lw.iter().enumerate() {
            let w = (e - max).exp();
            total += w;
            if a & 1 == 1 {
                plus += w;
            }
        }
        plus / total
    }

    /// Resamples the component in `spins` by inverse CDF with one uniform.
    fn resample<D: DrawSource + ?Sized>(&self, model: &IsingModel, spins: &mut [i8], src: &mut D) {
        let ext = self.external_fields(model, |w| spins[w]);
        let u = src.uniform();
        if self.sites.len() == 1 {
            spins[self.sites[0]] = if u < plus_probability(ext[0]) { 1 } else { -1 };
            return;
        }
        let lw = self.log_weights(&ext);
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = lw.iter().map(|e| (e - max).exp()).collect();
        let target = u * weights.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut pick = weights.len() - 1;
        for (a, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                pick = a;
                break;
            }
        }
        for (i, &v) in self.sites.iter().enumerate() {
            spins[v] = if (pick >> i) & 1 == 1 { 1 } else { -1 };
        }
    }
}

/// A chain variant bound to a model and a subset `F`.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    model: IsingModel,
    subset: Vec<usize>,
    position: Vec<usize>,
    complement: Vec<usize>,
    variant: Variant,
    mode: BlockMode,
    /// Components of the subgraph induced on `F^c`.
    pieces: Vec<Component>,
    /// Per position in `F`: the component of `v` in `G[{v} ∪ F^c]`.
    anchors: Vec<Component>,
    /// Per position in `F`: indices into `pieces` merged into the anchor.
    adjacent: Vec<Vec<usize>>,
}

impl ChainSpec {
    /// Plain single-site chain; the recorded statistic is the sum over all of `V`.
    pub fn plain(model: &IsingModel) -> Self {
        Self::new(
            model,
            (0..model.n()).collect(),
            Variant::Plain,
            BlockMode::Exact,
            &Limits::default(),
        )
        .expect("the full vertex set is a valid subset")
    }

    /// Accelerated chain with exact blocks when they fit, nested otherwise.
    pub fn accelerated(model: &IsingModel, subset: Vec<usize>, limits: &Limits) -> Result<Self> {
        match Self::new(model, subset.clone(), Variant::Accelerated, BlockMode::Exact, limits) {
            Err(Error::Capacity { .. }) => {
                let b = model.n() - subset.len() + 1;
                Self::new(model, subset, Variant::Accelerated, BlockMode::nested_default(b), limits)
            }
            other => other,
        }
    }

    pub fn z_chain(model: &IsingModel, subset: Vec<usize>, limits: &Limits) -> Result<Self> {
        Self::new(model, subset, Variant::ZChain, BlockMode::Exact, limits)
    }

    pub fn new(
        model: &IsingModel,
        mut subset: Vec<usize>,
        variant: Variant,
        mode: BlockMode,
        limits: &Limits,
    ) -> Result<Self> {
        let n = model.n();
        subset.sort_unstable();
        if subset.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("subset has repeated vertices".into()));
        }
        if subset.last().is_some_and(|&v| v >= n) {
            return Err(Error::InvalidInput("subset vertex out of range".into()));
        }
        if subset.is_empty() && variant != Variant::Plain {
            return Err(Error::InvalidInput(
                "block and projected chains need a nonempty subset".into(),
            ));
        }
        if variant == Variant::ZChain && !mode.is_exact() {
            return Err(Error::InvalidInput(
                "the projected chain needs exact block enumeration".into(),
            ));
        }
        let mut position = vec![usize::MAX; n];
        for (i, &v) in subset.iter().enumerate() {
            position[v] = i;
        }
        let complement: Vec<usize> = (0..n).filter(|&v| position[v] == usize::MAX).collect();
        let mut spec = Self {
            model: model.clone(),
            subset,
            position,
            complement,
            variant,
            mode,
            pieces: Vec::new(),
            anchors: Vec::new(),
            adjacent: Vec::new(),
        };
        if variant != Variant::Plain {
            spec.build_blocks(limits)?;
        }
        Ok(spec)
    }

    fn build_blocks(&mut self, limits: &Limits) -> Result<()> {
        let n = self.model.n();
        let mut label = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &root in &self.complement {
            if label[root] != usize::MAX {
                continue;
            }
            let id = groups.len();
            label[root] = id;
            let mut members = vec![root];
            let mut head = 0;
            while head < members.len() {
                let x = members[head];
                head += 1;
                for &(y, _) in self.model.neighbors(x) {
                    if self.position[y] == usize::MAX && label[y] == usize::MAX {
                        label[y] = id;
                        members.push(y);
                    }
                }
            }
            members.sort_unstable();
            groups.push(members);
        }
        for &v in &self.subset {
            let mut adj: Vec<usize> = self
                .model
                .neighbors(v)
                .iter()
                .filter(|&&(w, _)| self.position[w] == usize::MAX)
                .map(|&(w, _)| label[w])
                .collect();
            adj.sort_unstable();
            adj.dedup();
            let mut sites = vec![v];
            for &g in &adj {
                sites.extend_from_slice(&groups[g]);
            }
            self.anchors.push(Component::build(&self.model, sites));
            self.adjacent.push(adj);
        }
        self.pieces = groups
            .into_iter()
            .map(|g| Component::build(&self.model, g))
            .collect();
        if self.mode.is_exact() {
            let needed = match self.variant {
                Variant::ZChain => self.anchors.iter().map(|c| c.sites.len()).max(),
                _ => self
                    .anchors
                    .iter()
                    .chain(&self.pieces)
                    .map(|c| c.sites.len())
                    .max(),
            }
            .unwrap_or(0);
            if needed > limits.block() {
                return Err(Error::Capacity {
                    what: "exact block component sites",
                    size: needed,
                    limit: limits.block(),
                });
            }
        }
        Ok(())
    }

    pub fn model(&self) -> &IsingModel {
        &self.model
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn k(&self) -> usize {
        self.subset.len()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn mode(&self) -> BlockMode {
        self.mode
    }

    /// Position of `v` in `F`.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.position.get(v).copied().filter(|&p| p != usize::MAX)
    }

    /// Largest component that an exact block update enumerates.
    pub fn largest_block_component(&self) -> usize {
        self.anchors
            .iter()
            .chain(&self.pieces)
            .map(|c| c.sites.len())
            .max()
            .unwrap_or(1)
    }

    /// `P(z(F[i]) = +1 | z on F ∖ {F[i]})` with `F^c` summed out.
    pub fn z_plus_probability(&self, i: usize, z: &SpinConfig) -> f64 {
        self.anchors[i].first_plus_probability(&self.model, |w| z.get(self.position[w]))
    }

    /// Sum of spins over `F` for a full configuration.
    pub fn subset_sum(&self, sigma: &SpinConfig) -> i64 {
        self.subset.iter().map(|&v| i64::from(sigma.get(v))).sum()
    }

    fn check_state(&self, sigma: &SpinConfig) -> Result<()> {
        let expected = match self.variant {
            Variant::ZChain => self.k(),
            _ => self.model.n(),
        };
        if sigma.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: sigma.len(),
            });
        }
        Ok(())
    }
}

/// One heat-bath update at a uniform site; returns the site.
pub fn glauber_step<D: DrawSource + ?Sized>(
    model: &IsingModel,
    sigma: &mut SpinConfig,
    src: &mut D,
) -> usize {
    let v = src.site(model.n());
    let p = plus_probability(model.local_field_spins(sigma.spins(), v));
    let u = src.uniform();
    sigma.set(v, if u < p { 1 } else { -1 });
    v
}

/// One step of the accelerated chain; returns the chosen vertex and whether
/// it triggered a block update.
pub fn accelerated_step<D: DrawSource + ?Sized>(
    spec: &ChainSpec,
    sigma: &mut SpinConfig,
    src: &mut D,
) -> (usize, bool) {
    debug_assert_eq!(spec.variant, Variant::Accelerated);
    let model = &spec.model;
    let v = src.site(model.n());
    let Some(i) = spec.position(v) else {
        let p = plus_probability(model.local_field_spins(sigma.spins(), v));
        let u = src.uniform();
        sigma.set(v, if u < p { 1 } else { -1 });
        return (v, false);
    };
    let spins = sigma.spins_mut();
    match spec.mode {
        BlockMode::Exact => {
            spec.anchors[i].resample(model, spins, src);
            let adj = &spec.adjacent[i];
            for (g, piece) in spec.pieces.iter().enumerate() {
                if adj.binary_search(&g).is_err() {
                    piece.resample(model, spins, src);
                }
            }
        }
        BlockMode::NestedGlauber { inner_steps } => {
            let b = spec.complement.len() + 1;
            for _ in 0..inner_steps {
                let idx = ((src.uniform() * b as f64) as usize).min(b - 1);
                let w = if idx == 0 { v } else { spec.complement[idx - 1] };
                let p = plus_probability(model.local_field_spins(spins, w));
                spins[w] = if src.uniform() < p { 1 } else { -1 };
            }
        }
    }
    (v, true)
}

/// One step of the chain on `{±1}^F`; `z` is indexed by position in `F`.
/// Returns the updated position.
pub fn z_chain_step<D: DrawSource + ?Sized>(spec: &ChainSpec, z: &mut SpinConfig, src: &mut D) -> usize {
    debug_assert_eq!(spec.variant, Variant::ZChain);
    let i = src.site(spec.k());
    let p = spec.z_plus_probability(i, z);
    let u = src.uniform();
    z.set(i, if u < p { 1 } else { -1 });
    i
}

/// Monotone coupling: both chains update the same position with the same
/// uniform, each thresholded against its own conditional probability.
pub fn monotone_coupled_z_step<D: DrawSource + ?Sized>(
    spec: &ChainSpec,
    z: &mut SpinConfig,
    z_tilde: &mut SpinConfig,
    src: &mut D,
) -> usize {
    let i = src.site(spec.k());
    let p = spec.z_plus_probability(i, z);
    let p_tilde = spec.z_plus_probability(i, z_tilde);
    let u = src.uniform();
    z.set(i, if u < p { 1 } else { -1 });
    z_tilde.set(i, if u < p_tilde { 1 } else { -1 });
    i
}

/// `E[σ(u) | η on F∖{u}] - E[σ(u) | η̃ on F∖{u}]` with `F^c` summed out,
/// for `η, η̃` (indexed by position in `F`) differing at one vertex `v ≠ u`
/// where `η(v) = +1`.
pub fn psi_discrepancy(
    model: &IsingModel,
    subset: &[usize],
    u: usize,
    eta: &SpinConfig,
    eta_tilde: &SpinConfig,
    limits: &Limits,
) -> Result<f64> {
    let spec = ChainSpec::z_chain(model, subset.to_vec(), limits)?;
    spec.check_state(eta)?;
    spec.check_state(eta_tilde)?;
    let i = spec
        .position(u)
        .ok_or_else(|| Error::InvalidInput(format!("vertex {u} is not in the subset")))?;
    let diff: Vec<usize> = (0..spec.k())
        .filter(|&p| eta.get(p) != eta_tilde.get(p))
        .collect();
    if diff.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "boundary conditions differ at {} vertices, expected exactly one",
            diff.len()
        )));
    }
    if diff[0] == i {
        return Err(Error::InvalidInput(
            "boundary conditions differ at the target vertex".into(),
        ));
    }
    if eta.get(diff[0]) != 1 {
        return Err(Error::InvalidInput(
            "the first boundary condition must carry +1 where they differ".into(),
        ));
    }
    let p = spec.z_plus_probability(i, eta);
    let pt = spec.z_plus_probability(i, eta_tilde);
    Ok(2.0 * (p - pt))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOptions {
    pub configs: bool,
    pub updates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `S_t` (sum of spins over `F`) for `t = 0..=T`.
    pub sums: Vec<i64>,
    pub configs: Option<Vec<SpinConfig>>,
    /// For the projected chain `site` is the vertex of `F`, not its position.
    pub records: Option<Vec<UpdateRecord>>,
    /// Times `K_1 < K_2 < …` of block updates (accelerated chain only).
    pub block_times: Vec<u64>,
    pub final_state: SpinConfig,
}

impl Trajectory {
    pub fn horizon(&self) -> u64 {
        self.sums.len() as u64 - 1
    }

    /// Number of block updates in `[1, t]`.
    pub fn block_count(&self, t: u64) -> usize {
        self.block_times.partition_point(|&k| k <= t)
    }

    /// `S` along the projected chain: `S_0, S_{K_1}, S_{K_2}, …`.
    pub fn projected_sums(&self) -> Vec<i64> {
        std::iter::once(self.sums[0])
            .chain(self.block_times.iter().map(|&k| self.sums[k as usize]))
            .collect()
    }
}

fn step_any<D: DrawSource + ?Sized>(spec: &ChainSpec, state: &mut SpinConfig, src: &mut D) -> (usize, bool) {
    match spec.variant {
        Variant::Plain => (glauber_step(&spec.model, state, src), false),
        Variant::Accelerated => accelerated_step(spec, state, src),
        Variant::ZChain => {
            let i = z_chain_step(spec, state, src);
            (spec.subset[i], false)
        }
    }
}

fn statistic(spec: &ChainSpec, state: &SpinConfig) -> i64 {
    match spec.variant {
        Variant::ZChain => state.sum(),
        _ => spec.subset_sum(state),
    }
}

/// Runs `horizon` steps from `start`; a deterministic function of `spec`,
/// the start and the draws.
pub fn run_chain<D: DrawSource + ?Sized>(
    spec: &ChainSpec,
    start: &SpinConfig,
    horizon: u64,
    src: &mut D,
    options: RecordOptions,
) -> Result<Trajectory> {
    spec.check_state(start)?;
    let mut state = start.clone();
    let mut sums = Vec::with_capacity(horizon as usize + 1);
    sums.push(statistic(spec, &state));
    let mut configs = options.configs.then(|| vec![state.clone()]);
    let mut records = options.updates.then(Vec::new);
    let mut block_times = Vec::new();
    for t in 1..=horizon {
        let (_, block) = if let Some(recs) = records.as_mut() {
            let mut rec = Recorder::new(&mut *src);
            let out = step_any(spec, &mut state, &mut rec);
            let mut r = rec.finish(t);
            r.site = out.0;
            recs.push(r);
            out
        } else {
            step_any(spec, &mut state, src)
        };
        if block {
            block_times.push(t);
        }
        sums.push(statistic(spec, &state));
        if let Some(c) = configs.as_mut() {
            c.push(state.clone());
        }
    }
    Ok(Trajectory {
        sums,
        configs,
        records,
        block_times,
        final_state: state,
    })
}

/// Re-runs a recorded trajectory from its update records.
pub fn replay(spec: &ChainSpec, start: &SpinConfig, records: &[UpdateRecord]) -> Result<Trajectory> {
    spec.check_state(start)?;
    let mut state = start.clone();
    let mut sums = vec![statistic(spec, &state)];
    let mut block_times = Vec::new();
    for (idx, r) in records.iter().enumerate() {
        if r.t != idx as u64 + 1 {
            return Err(Error::InvalidInput(format!(
                "update record {idx} has time {}, expected {}",
                r.t,
                idx + 1
            )));
        }
        let raw_site = match spec.variant {
            Variant::ZChain => spec.position(r.site).ok_or_else(|| {
                Error::InvalidInput(format!("recorded vertex {} is not in the subset", r.site))
            })?,
            _ => r.site,
        };
        let mut src = Replay::new(raw_site, &r.draws);
        let (_, block) = step_any(spec, &mut state, &mut src);
        if !src.exhausted_exactly() {
            return Err(Error::InvalidInput(format!(
                "update record at t = {} does not match the chain's draws",
                r.t
            )));
        }
        if block {
            block_times.push(r.t);
        }
        sums.push(statistic(spec, &state));
    }
    Ok(Trajectory {
        sums,
        configs: None,
        records: Some(records.to_vec()),
        block_times,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RngStream;
    use crate::exact::table::{conditional_magnetization, gibbs_distribution, project_distribution};
    use crate::spin::Edge;
    use approx::assert_abs_diff_eq;

    fn path(n: usize, j: f64) -> IsingModel {
        IsingModel::new(n, (0..n - 1).map(|i| Edge { u: i, v: i + 1, j }).collect()).unwrap()
    }

    #[test]
    fn full_subset_reduces_to_single_site_updates() {
        let m = path(4, 0.8);
        let lim = Limits::default();
        let acc = ChainSpec::new(&m, (0..4).collect(), Variant::Accelerated, BlockMode::Exact, &lim).unwrap();
        let plain = ChainSpec::plain(&m);
        let start = SpinConfig::all_plus(4);
        let a = run_chain(&acc, &start, 200, &mut RngStream::new(5, 0), RecordOptions::default()).unwrap();
        let b = run_chain(&plain, &start, 200, &mut RngStream::new(5, 0), RecordOptions::default()).unwrap();
        assert_eq!(a.sums, b.sums);
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.block_times.len(), 200);
    }

    #[test]
    fn z_conditional_matches_enumeration() {
        let m = IsingModel::with_field(
            5,
            vec![
                Edge { u: 0, v: 1, j: 0.6 },
                Edge { u: 1, v: 2, j: 0.9 },
                Edge { u: 2, v: 3, j: 0.4 },
                Edge { u: 3, v: 4, j: 1.1 },
                Edge { u: 0, v: 4, j: 0.2 },
            ],
            vec![0.1, 0.0, 0.3, 0.0, 0.0],
        )
        .unwrap();
        let lim = Limits::default();
        let subset = vec![0, 2, 4];
        let spec = ChainSpec::z_chain(&m, subset.clone(), &lim).unwrap();
        for idx in 0..8u64 {
            let z = SpinConfig::from_index(idx, 3);
            for i in 0..3 {
                let clamped: Vec<(usize, i8)> = (0..3)
                    .filter(|&p| p != i)
                    .map(|p| (subset[p], z.get(p)))
                    .collect();
                let m_u = conditional_magnetization(&m, subset[i], &clamped, &lim).unwrap();
                assert_abs_diff_eq!(2.0 * spec.z_plus_probability(i, &z) - 1.0, m_u, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn z_chain_stationary_law_is_the_projection() {
        let m = path(5, 0.7);
        let lim = Limits::default();
        let subset = vec![0, 2, 3];
        let spec = ChainSpec::z_chain(&m, subset.clone(), &lim).unwrap();
        let target = project_distribution(&gibbs_distribution(&m, &lim).unwrap(), &subset).unwrap();
        let mut z = SpinConfig::all_plus(3);
        let mut src = RngStream::new(11, 0);
        let mut counts = [0u64; 8];
        let steps = 400_000;
        for _ in 0..steps {
            z_chain_step(&spec, &mut z, &mut src);
            counts[z.index() as usize] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(target.probs())
            .map(|(&c, p)| (c as f64 / steps as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn coupling_preserves_order_and_coalesces() {
        let m = path(6, 0.5);
        let spec = ChainSpec::z_chain(&m, vec![0, 1, 3, 5], &Limits::default()).unwrap();
        let mut top = SpinConfig::all_plus(4);
        let mut bottom = SpinConfig::all_minus(4);
        let mut src = RngStream::new(2, 9);
        for _ in 0..5000 {
            monotone_coupled_z_step(&spec, &mut top, &mut bottom, &mut src);
            assert!(bottom.leq(&top).unwrap());
        }
        assert_eq!(top, bottom);
    }

    #[test]
    fn psi_examples() {
        let lim = Limits::default();
        let m = IsingModel::new(2, vec![Edge { u: 0, v: 1, j: 0.5 }]).unwrap();
        let eta = SpinConfig::new(vec![1, 1]).unwrap();
        let eta_t = SpinConfig::new(vec![1, -1]).unwrap();
        let psi = psi_discrepancy(&m, &[0, 1], 0, &eta, &eta_t, &lim).unwrap();
        assert_abs_diff_eq!(psi, 0.924_234_314_520_019_6, epsilon = 1e-12);
        let empty = IsingModel::empty(3).unwrap();
        let e = SpinConfig::new(vec![1, 1, -1]).unwrap();
        let et = SpinConfig::new(vec![1, -1, -1]).unwrap();
        assert_eq!(psi_discrepancy(&empty, &[0, 1, 2], 0, &e, &et, &lim).unwrap(), 0.0);
        assert!(psi_discrepancy(&empty, &[0, 1, 2], 0, &e, &e, &lim).is_err());
        assert!(psi_discrepancy(&empty, &[0, 1, 2], 0, &et, &e, &lim).is_err());
    }

    #[test]
    fn replay_reproduces_every_variant() {
        let m = IsingModel::new(
            6,
            vec![
                Edge { u: 0, v: 1, j: 0.4 },
                Edge { u: 1, v: 2, j: 0.4 },
                Edge { u: 3, v: 4, j: 0.9 },
                Edge { u: 4, v: 5, j: 0.3 },
            ],
        )
        .unwrap();
        let lim = Limits::default();
        let specs = [
            (ChainSpec::plain(&m), SpinConfig::all_plus(6)),
            (
                ChainSpec::new(&m, vec![1, 4], Variant::Accelerated, BlockMode::Exact, &lim).unwrap(),
                SpinConfig::all_plus(6),
            ),
            (
                ChainSpec::new(&m, vec![1, 4], Variant::Accelerated, BlockMode::nested_default(5), &lim)
                    .unwrap(),
                SpinConfig::all_minus(6),
            ),
            (ChainSpec::z_chain(&m, vec![0, 2, 5], &lim).unwrap(), SpinConfig::all_plus(3)),
        ];
        for (spec, start) in &specs {
            let opts = RecordOptions {
                configs: true,
                updates: true,
            };
            let run = run_chain(spec, start, 300, &mut RngStream::new(3, 1), opts).unwrap();
            let again = replay(spec, start, run.records.as_ref().unwrap()).unwrap();
            assert_eq!(run.sums, again.sums);
            assert_eq!(run.final_state, again.final_state);
            assert_eq!(run.block_times, again.block_times);
            for w in run.sums.windows(2) {
                assert!((w[1] - w[0]).abs() <= 2);
            }
        }
    }

    #[test]
    fn zero_horizon_and_capacity() {
        let m = path(3, 1.0);
        let spec = ChainSpec::plain(&m);
        let t = run_chain(&spec, &SpinConfig::all_minus(3), 0, &mut RngStream::new(0, 0), RecordOptions::default())
            .unwrap();
        assert_eq!(t.sums, vec![-3]);
        let big = path(30, 0.1);
        let lim = Limits::default();
        assert!(matches!(
            ChainSpec::new(&big, vec![0], Variant::Accelerated, BlockMode::Exact, &lim),
            Err(Error::Capacity { .. })
        ));
        let nested = ChainSpec::accelerated(&big, vec![0], &lim).unwrap();
        assert!(!nested.mode().is_exact());
        assert!(ChainSpec::z_chain(&big, vec![0], &lim).is_err());
        assert!(ChainSpec::z_chain(&big, vec![], &lim).is_err());
    }
}
