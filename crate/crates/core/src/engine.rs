//! The splitting optimizer.
//!
//! A partition of the N matrix points is a label array `a` with one label per
//! point; points share a cluster exactly when they share a label. Labels are
//! point indices, and between operations every live label is the smallest
//! member of its own cluster. Per-label arrays hold cluster sizes (`a_cnt`)
//! and within-cluster pair sums (`a_sum`), so the objective
//!
//! ```text
//!     Σ_{i<j, a[i]=a[j]} σ(i, j; factor)
//! ```
//!
//! is simply Σ a_sum. A parallel "trial" set of arrays holds candidate splits;
//! it is copied into the committed arrays only when it scores strictly better.
//!
//! Splitting a cluster seeds candidate splits from its most negatively related
//! members, polishes each with randomized single-point moves, and keeps the
//! best. [`Optimizer::master_split`] repeats this over every oversized cluster,
//! and [`super_split`] lowers the prior factor level by level until every
//! cluster fits the size threshold.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::affinity::SigmaMatrix;
use crate::textfmt;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    /// Most-negative points tried as split seeds per cluster.
    pub k_seeds: usize,
    /// Cap on single-point optimization sweeps.
    pub max_passes: usize,
    pub rng_seed: u64,
    /// `super_split` aborts if the factor would drop below this.
    pub factor_floor: f64,
    /// Follow splitting with within-group single-point moves.
    pub polish: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            k_seeds: 10,
            max_passes: 30,
            rng_seed: 0,
            factor_floor: -100.0,
            polish: true,
        }
    }
}

/// Minimum gain for a polishing move; keeps rounding noise from cycling.
const POLISH_EPS: f64 = 1e-12;
const MAX_POLISH_ROUNDS: usize = 1000;

/// Committed and trial partition arrays.
#[derive(Debug, Clone)]
pub struct PartitionState {
    labels: Vec<i64>,
    counts: Vec<usize>,
    sums: Vec<f64>,
    trial_labels: Vec<usize>,
    trial_counts: Vec<usize>,
    trial_sums: Vec<f64>,
    factor: f64,
}

impl PartitionState {
    /// Every point in its own cluster.
    fn singletons(n: usize) -> Self {
        PartitionState {
            labels: (0..n as i64).collect(),
            counts: vec![1; n],
            sums: vec![0.0; n],
            trial_labels: (0..n).collect(),
            trial_counts: vec![0; n],
            trial_sums: vec![0.0; n],
            factor: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Σ a_sum over live labels, in label order.
    pub fn objective(&self) -> f64 {
        self.counts
            .iter()
            .zip(&self.sums)
            .filter(|(&c, _)| c > 0)
            .map(|(_, &s)| s)
            .sum()
    }

    /// Clusters as sorted member lists, ordered by smallest member.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        group_by_label(self.labels.iter().map(|&l| decode_label(l)))
    }

    /// Recomputes counts and sums from the labels and the matrix and compares
    /// them with the stored arrays. Also checks label canonicality.
    pub fn check_bookkeeping(&self, matrix: &SigmaMatrix, tol: f64) -> std::result::Result<(), String> {
        let n = self.len();
        let mut counts = vec![0usize; n];
        let mut sums = vec![0.0f64; n];
        for i in 0..n {
            let li = decode_label(self.labels[i]);
            if li >= n {
                return Err(format!("label {} of point {i} out of range", self.labels[i]));
            }
            if li > i {
                return Err(format!("point {i} precedes its label {li}"));
            }
            counts[li] += 1;
            for j in i + 1..n {
                if self.labels[j] == self.labels[i] {
                    sums[li] += matrix.base(i, j) + self.factor;
                }
            }
        }
        for j in 0..n {
            if counts[j] != self.counts[j] {
                return Err(format!("a_cnt[{j}] = {}, recount {}", self.counts[j], counts[j]));
            }
            if (sums[j] - self.sums[j]).abs() > tol {
                return Err(format!("a_sum[{j}] = {}, recomputed {}", self.sums[j], sums[j]));
            }
            if counts[j] > 0 && decode_label(self.labels[j]) != j {
                return Err(format!("label {j} is not a member of its own cluster"));
            }
        }
        Ok(())
    }
}

/// Undoes the negative "cannot split" encoding (−label−1).
fn decode_label(l: i64) -> usize {
    if l < 0 {
        (-l - 1) as usize
    } else {
        l as usize
    }
}

fn group_by_label(labels: impl Iterator<Item = usize>) -> Vec<Vec<usize>> {
    let labels: Vec<usize> = labels.collect();
    let n = labels.len();
    let mut slot = vec![usize::MAX; n.max(labels.iter().max().map_or(0, |m| m + 1))];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if slot[l] == usize::MAX {
            slot[l] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[l]].push(i);
    }
    groups
}

/// Scratch space for splitting one cluster.
#[derive(Debug)]
pub struct SplitWorkspace {
    /// Points of the subset under work.
    members: Vec<usize>,
    /// Visit order for single-point sweeps.
    visit: Vec<usize>,
    neg_sum: Vec<f64>,
    ord: Vec<usize>,
    ord2: Vec<usize>,
    pos: Vec<f64>,
    par: Vec<f64>,
    in_par: Vec<bool>,
    touched: Vec<usize>,
    canon: Vec<usize>,
    k_seeds: usize,
    max_passes: usize,
    rng: ChaCha8Rng,
}

impl SplitWorkspace {
    fn new(n: usize, params: &EngineParams) -> Self {
        SplitWorkspace {
            members: Vec::new(),
            visit: Vec::new(),
            neg_sum: Vec::new(),
            ord: Vec::new(),
            ord2: Vec::new(),
            pos: Vec::new(),
            par: vec![0.0; n],
            in_par: vec![false; n],
            touched: Vec::new(),
            canon: vec![usize::MAX; n],
            k_seeds: params.k_seeds,
            max_passes: params.max_passes,
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Single-point optimizations stopped by the pass cap while still moving.
    pub cap_hits: usize,
    /// Trial partitions committed.
    pub commits: usize,
    pub basic_splits: usize,
}

#[inline]
fn sigma(matrix: &SigmaMatrix, factor: f64, i: usize, j: usize) -> f64 {
    if i == j {
        0.0
    } else {
        matrix.base(i, j) + factor
    }
}

/// Holds a partition of the matrix points and the routines that improve it.
pub struct Optimizer<'m> {
    matrix: &'m SigmaMatrix,
    state: PartitionState,
    ws: SplitWorkspace,
    stats: RunStats,
    polish: bool,
}

impl<'m> Optimizer<'m> {
    /// Starts from all singletons at factor 0.
    pub fn new(matrix: &'m SigmaMatrix, params: &EngineParams) -> Self {
        let n = matrix.order();
        Optimizer {
            matrix,
            state: PartitionState::singletons(n),
            ws: SplitWorkspace::new(n, params),
            stats: RunStats::default(),
            polish: params.polish,
        }
    }

    pub fn state(&self) -> &PartitionState {
        &self.state
    }

    pub fn workspace(&self) -> &SplitWorkspace {
        &self.ws
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    pub fn objective(&self) -> f64 {
        self.state.objective()
    }

    /// Sets the prior log-odds offset and recomputes every cluster sum under it.
    pub fn set_factor(&mut self, factor: f64) {
        self.state.factor = factor;
        let n = self.state.len();
        for s in &mut self.state.sums {
            *s = 0.0;
        }
        for i in 0..n {
            let li = decode_label(self.state.labels[i]);
            for j in i + 1..n {
                if self.state.labels[j] == self.state.labels[i] {
                    self.state.sums[li] += sigma(self.matrix, factor, i, j);
                }
            }
        }
    }

    /// Puts every point in cluster 0.
    pub fn one_cluster(&mut self) {
        let n = self.state.len();
        if n == 0 {
            return;
        }
        let f = self.state.factor;
        for i in 0..n {
            self.state.labels[i] = 0;
            self.state.counts[i] = 0;
            self.state.sums[i] = 0.0;
        }
        self.state.counts[0] = n;
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += sigma(self.matrix, f, i, j);
            }
        }
        self.state.sums[0] = total;
    }

    /// Replaces the committed partition. Labels are arbitrary group ids.
    pub fn set_partition(&mut self, groups: &[usize]) -> Result<()> {
        let n = self.state.len();
        if groups.len() != n {
            return Err(Error::Domain(format!("{} labels for {n} points", groups.len())));
        }
        let clusters = group_by_label(groups.iter().copied());
        for cluster in &clusters {
            let label = cluster[0];
            for &p in cluster {
                self.state.labels[p] = label as i64;
            }
        }
        for c in &mut self.state.counts {
            *c = 0;
        }
        for cluster in &clusters {
            self.state.counts[cluster[0]] = cluster.len();
        }
        let f = self.state.factor;
        self.set_factor(f);
        Ok(())
    }

    /// Selects the subset the split routines work on.
    pub fn load_subset(&mut self, members: &[usize]) {
        self.ws.members.clear();
        self.ws.members.extend_from_slice(members);
        self.ws.visit.clear();
        self.ws.visit.extend_from_slice(members);
    }

    /// Seeds the trial arrays for the loaded subset. `labels[k]` is the trial
    /// label of `members[k]` and must itself be a subset member.
    pub fn set_trial(&mut self, labels: &[usize]) -> Result<()> {
        let members = &self.ws.members;
        if labels.len() != members.len() || labels.iter().any(|l| !members.contains(l)) {
            return Err(Error::Domain("trial labels must be subset members".into()));
        }
        for (&p, &l) in members.iter().zip(labels) {
            self.state.trial_labels[p] = l;
        }
        for &p in members {
            self.state.trial_counts[p] = 0;
        }
        for &l in labels {
            self.state.trial_counts[l] += 1;
        }
        self.set_sum();
        Ok(())
    }

    /// Recomputes trial sums of the subset from the trial labels.
    fn set_sum(&mut self) {
        let (m, f) = (self.matrix, self.state.factor);
        let members = &self.ws.members;
        let st = &mut self.state;
        for &p in members {
            st.trial_sums[p] = 0.0;
        }
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if st.trial_labels[i] == st.trial_labels[j] {
                    st.trial_sums[st.trial_labels[i]] += sigma(m, f, i, j);
                }
            }
        }
    }

    /// Sweeps the subset moving each point to the trial cluster (among those
    /// present in the subset) with the highest summed affinity, until a sweep
    /// makes no move or the pass cap is reached. Returns the subset's total.
    pub fn single_point_opt(&mut self) -> f64 {
        let (m, f) = (self.matrix, self.state.factor);
        let ws = &mut self.ws;
        let st = &mut self.state;
        let mut passes = 0;
        loop {
            let mut moved = false;
            for &i in &ws.visit {
                let current = st.trial_labels[i];
                ws.touched.clear();
                ws.touched.push(current);
                ws.in_par[current] = true;
                ws.par[current] = 0.0;
                for &k in &ws.visit {
                    if k == i {
                        continue;
                    }
                    let l = st.trial_labels[k];
                    if !ws.in_par[l] {
                        ws.in_par[l] = true;
                        ws.par[l] = 0.0;
                        ws.touched.push(l);
                    }
                    ws.par[l] += sigma(m, f, i, k);
                }
                let mut best = ws.par[current];
                let mut target = current;
                for &l in &ws.touched {
                    if best < ws.par[l] {
                        best = ws.par[l];
                        target = l;
                    }
                }
                if target != current {
                    st.trial_sums[current] -= ws.par[current];
                    st.trial_sums[target] += best;
                    st.trial_counts[current] -= 1;
                    st.trial_counts[target] += 1;
                    if st.trial_counts[current] == 0 {
                        st.trial_sums[current] = 0.0;
                    }
                    st.trial_labels[i] = target;
                    moved = true;
                }
                for &l in &ws.touched {
                    ws.in_par[l] = false;
                }
            }
            passes += 1;
            if !moved {
                break;
            }
            if passes >= ws.max_passes {
                self.stats.cap_hits += 1;
                break;
            }
        }
        ws.members
            .iter()
            .filter(|&&p| st.trial_counts[p] > 0)
            .map(|&p| st.trial_sums[p])
            .sum()
    }

    /// Copies the trial arrays of the subset into the committed arrays.
    fn record_max(&mut self) {
        let st = &mut self.state;
        for &k in &self.ws.members {
            st.labels[k] = st.trial_labels[k] as i64;
            st.counts[k] = st.trial_counts[k];
            st.sums[k] = st.trial_sums[k];
        }
        self.stats.commits += 1;
    }

    /// Shuffles the visit order, runs single-point optimization and commits
    /// the result if it strictly beats `incumbent`. Returns the trial total.
    pub fn local_opt(&mut self, incumbent: f64) -> f64 {
        self.ws.visit.clone_from(&self.ws.members);
        self.ws.visit.shuffle(&mut self.ws.rng);
        let trial = self.single_point_opt();
        if trial > incumbent {
            self.record_max();
        }
        trial
    }

    /// Tries to split the loaded subset, which must be exactly one committed
    /// cluster. Leaves the subset relabeled canonically, or with its label
    /// negated when no split improved the sum.
    pub fn basic_split(&mut self) {
        self.stats.basic_splits += 1;
        let (m, f) = (self.matrix, self.state.factor);
        let nb = self.ws.members.len();
        if nb == 0 {
            return;
        }
        if nb == 1 {
            let k = self.ws.members[0];
            self.state.labels[k] = -(k as i64) - 1;
            self.state.counts[k] = 1;
            self.state.sums[k] = 0.0;
            return;
        }

        let mut total = 0.0;
        {
            let ws = &mut self.ws;
            ws.neg_sum.clear();
            ws.neg_sum.resize(nb, 0.0);
            for x in 0..nb {
                for y in x + 1..nb {
                    let v = sigma(m, f, ws.members[x], ws.members[y]);
                    total += v;
                    if v < 0.0 {
                        ws.neg_sum[x] += v;
                        ws.neg_sum[y] += v;
                    }
                }
            }
            ws.ord.clear();
            ws.ord.extend(0..nb);
            let neg = &ws.neg_sum;
            ws.ord.sort_by(|&a, &b| neg[a].total_cmp(&neg[b]).then(a.cmp(&b)));
        }

        let mut best = total;
        for r in 0..self.ws.k_seeds.min(nb) {
            let s = self.ws.ord[r];
            if self.ws.neg_sum[s] >= 0.0 {
                break;
            }
            let seed = self.ws.members[s];

            let mut seed_total = 0.0;
            {
                let ws = &mut self.ws;
                ws.pos.clear();
                for &p in &ws.members {
                    let v = sigma(m, f, seed, p);
                    seed_total += v;
                    ws.pos.push(v);
                }
                ws.ord2.clear();
                ws.ord2.extend(0..nb);
                let pos = &ws.pos;
                ws.ord2.sort_by(|&a, &b| pos[b].total_cmp(&pos[a]).then(a.cmp(&b)));
            }
            let tp = self.ws.ord2.iter().take_while(|&&x| self.ws.pos[x] > 0.0).count();

            if seed_total < 0.0 {
                // {seed} | rest
                let rest = self.ws.members[if s == 0 { 1 } else { 0 }];
                let st = &mut self.state;
                for &p in &self.ws.members {
                    st.trial_labels[p] = rest;
                    st.trial_counts[p] = 0;
                    st.trial_sums[p] = 0.0;
                }
                st.trial_sums[rest] = total - seed_total;
                st.trial_counts[rest] = nb - 1;
                st.trial_counts[seed] = 1;
                st.trial_labels[seed] = seed;
                let trial = self.local_opt(best);
                best = best.max(trial);
            }

            // {seed + k most affine points} | rest, k = 1, 2, 4, ..., tp
            let mut k = 1;
            while k <= tp {
                let rest = self.ws.ord2[k..]
                    .iter()
                    .map(|&x| self.ws.members[x])
                    .find(|&p| p != seed);
                {
                    let st = &mut self.state;
                    let ws = &self.ws;
                    for &p in &ws.members {
                        st.trial_labels[p] = rest.unwrap_or(seed);
                        st.trial_counts[p] = 0;
                    }
                    st.trial_labels[seed] = seed;
                    for &x in &ws.ord2[..k] {
                        st.trial_labels[ws.members[x]] = seed;
                    }
                    st.trial_counts[seed] = k + 1;
                    if let Some(r) = rest {
                        st.trial_counts[r] = nb - k - 1;
                    }
                }
                self.set_sum();
                let trial = self.local_opt(best);
                best = best.max(trial);
                k = if k * 2 <= tp {
                    k * 2
                } else if k < tp {
                    tp
                } else {
                    tp + 1
                };
            }
        }
        self.relabel(total);
    }

    /// Relabels the subset so every label is the smallest member of its
    /// cluster; a subset that is still one cluster gets a negated label.
    fn relabel(&mut self, total: f64) {
        let ws = &mut self.ws;
        let st = &mut self.state;
        let mut live: Vec<(usize, usize, f64)> = Vec::new();
        for &p in &ws.members {
            if st.counts[p] > 0 {
                live.push((p, st.counts[p], st.sums[p]));
            }
        }
        for &p in &ws.members {
            let l = st.labels[p] as usize;
            ws.canon[l] = ws.canon[l].min(p);
        }
        if live.len() == 1 {
            let (label, count, _) = live[0];
            let canon = ws.canon[label];
            for &p in &ws.members {
                st.labels[p] = -(canon as i64) - 1;
                st.counts[p] = 0;
                st.sums[p] = 0.0;
            }
            st.counts[canon] = count;
            st.sums[canon] = total;
        } else {
            for &p in &ws.members {
                st.labels[p] = ws.canon[st.labels[p] as usize] as i64;
                st.counts[p] = 0;
                st.sums[p] = 0.0;
            }
            for &(label, count, sum) in &live {
                st.counts[ws.canon[label]] = count;
                st.sums[ws.canon[label]] = sum;
            }
        }
        for &p in &ws.members {
            ws.canon[p] = usize::MAX;
        }
    }

    /// Splits every cluster larger than `thr` until none can be split, then
    /// clears the "cannot split" markers. Returns how many points sit in
    /// clusters that resisted splitting (0 when everything fits `thr`).
    ///
    /// With polishing enabled, each group of clusters descended from one
    /// oversized input cluster is afterwards swept with single-point moves
    /// (including moves to a fresh singleton) and the splitting repeats until
    /// no move helps, so the result is 1-move-optimal within every group.
    pub fn master_split(&mut self, thr: usize) -> usize {
        let groups: Vec<Vec<usize>> = if self.polish {
            self.state
                .clusters()
                .into_iter()
                .filter(|c| c.len() > thr)
                .collect()
        } else {
            Vec::new()
        };
        let mut rounds = 0;
        loop {
            self.split_pass(thr);
            let mut moved = false;
            for g in &groups {
                moved |= self.polish_group(g);
            }
            if !moved {
                break;
            }
            rounds += 1;
            if rounds >= MAX_POLISH_ROUNDS {
                log::warn!("master_split: stopping after {rounds} polish rounds");
                break;
            }
        }
        let mut unsplit = 0;
        for l in &mut self.state.labels {
            if *l < 0 {
                *l = -*l - 1;
                unsplit += 1;
            }
        }
        unsplit
    }

    fn split_pass(&mut self, thr: usize) {
        let n = self.state.len();
        let mut members = Vec::new();
        loop {
            let mut found = false;
            let mut m = 0;
            while m < n {
                while m < n && (self.state.labels[m] < 0 || self.state.counts[m] <= thr) {
                    m += 1;
                }
                if m < n {
                    found = true;
                    let label = self.state.labels[m];
                    debug_assert_eq!(label, m as i64, "non-canonical label");
                    members.clear();
                    members.extend((m..n).filter(|&i| self.state.labels[i] == label));
                    self.load_subset(&members);
                    self.basic_split();
                }
            }
            if !found {
                break;
            }
        }
    }

    /// Single-point moves over `group`, which must be a union of committed
    /// clusters. Commits and returns true if any point moved.
    fn polish_group(&mut self, group: &[usize]) -> bool {
        let (m, f) = (self.matrix, self.state.factor);
        self.load_subset(group);
        {
            let st = &mut self.state;
            for &p in group {
                st.trial_labels[p] = decode_label(st.labels[p]);
                st.trial_counts[p] = 0;
            }
            for &p in group {
                st.trial_counts[st.trial_labels[p]] += 1;
            }
        }
        self.set_sum();

        let ws = &mut self.ws;
        let st = &mut self.state;
        let mut any = false;
        loop {
            let mut moved = false;
            for &i in group {
                let current = st.trial_labels[i];
                ws.touched.clear();
                ws.touched.push(current);
                ws.in_par[current] = true;
                ws.par[current] = 0.0;
                for &k in group {
                    if k == i {
                        continue;
                    }
                    let l = st.trial_labels[k];
                    if !ws.in_par[l] {
                        ws.in_par[l] = true;
                        ws.par[l] = 0.0;
                        ws.touched.push(l);
                    }
                    ws.par[l] += sigma(m, f, i, k);
                }
                let mut best = ws.par[current];
                let mut target = Some(current);
                for &l in &ws.touched {
                    if ws.par[l] > best + POLISH_EPS {
                        best = ws.par[l];
                        target = Some(l);
                    }
                }
                if st.trial_counts[current] > 1 && 0.0 > best + POLISH_EPS {
                    best = 0.0;
                    target = None;
                }
                for &l in &ws.touched {
                    ws.in_par[l] = false;
                }
                let target = match target {
                    Some(l) if l == current => continue,
                    Some(l) => l,
                    None => *group
                        .iter()
                        .find(|&&p| st.trial_counts[p] == 0)
                        .expect("a multi-point cluster leaves a free label"),
                };
                st.trial_sums[current] -= ws.par[current];
                st.trial_sums[target] += best;
                st.trial_counts[current] -= 1;
                st.trial_counts[target] += 1;
                if st.trial_counts[current] == 0 {
                    st.trial_sums[current] = 0.0;
                }
                st.trial_labels[i] = target;
                moved = true;
            }
            if !moved {
                break;
            }
            any = true;
        }
        if !any {
            return false;
        }

        for &p in group {
            let l = st.trial_labels[p];
            ws.canon[l] = ws.canon[l].min(p);
        }
        for &p in group {
            let l = st.trial_labels[p];
            st.labels[p] = ws.canon[l] as i64;
            st.counts[p] = 0;
            st.sums[p] = 0.0;
        }
        for &p in group {
            if st.trial_counts[p] > 0 {
                let c = ws.canon[p];
                st.counts[c] = st.trial_counts[p];
                st.sums[c] = st.trial_sums[p];
            }
        }
        for &p in group {
            ws.canon[p] = usize::MAX;
        }
        true
    }

    pub fn largest_cluster(&self) -> usize {
        self.state.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn snapshot(&self, level: usize) -> LevelSnapshot {
        LevelSnapshot {
            level,
            factor: self.state.factor,
            objective: self.objective(),
            labels: self.state.labels.iter().map(|&l| decode_label(l)).collect(),
        }
    }
}

/// The clustering at one level of the factor schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSnapshot {
    pub level: usize,
    pub factor: f64,
    pub objective: f64,
    /// Canonical label (smallest member) of each point's cluster.
    pub labels: Vec<usize>,
}

impl LevelSnapshot {
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        group_by_label(self.labels.iter().copied())
    }

    pub fn write_tsv<W: Write>(&self, mut w: W, seed: u64) -> Result<()> {
        let mut header = format!(
            "level={} factor={} objective={}",
            self.level, self.factor, self.objective
        );
        write!(header, " seed={seed} version={}", textfmt::FORMAT_VERSION).expect("string write");
        writeln!(w, "{header}")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(w, "{i}\t{l}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "snapshot file";
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(WHAT, 1, "empty file"))?;
        let fields = textfmt::kv_tokens(&header);
        textfmt::check_version(&fields, WHAT)?;
        let get = |key: &str| {
            fields
                .get(key)
                .ok_or_else(|| Error::parse(WHAT, 1, format!("header lacks {key}=")))
        };
        let level = get("level")?
            .parse()
            .map_err(|_| Error::parse(WHAT, 1, "bad level"))?;
        let factor = get("factor")?
            .parse()
            .map_err(|_| Error::parse(WHAT, 1, "bad factor"))?;
        let objective = get("objective")?
            .parse()
            .map_err(|_| Error::parse(WHAT, 1, "bad objective"))?;
        let mut labels = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let line_no = idx + 2;
            let (i, l) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(WHAT, line_no, "expected <point>\\t<label>"))?;
            let i: usize = i.parse().map_err(|_| Error::parse(WHAT, line_no, "bad point index"))?;
            let l: usize = l.parse().map_err(|_| Error::parse(WHAT, line_no, "bad label"))?;
            if i != labels.len() {
                return Err(Error::parse(WHAT, line_no, "point indices out of sequence"));
            }
            labels.push(l);
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= labels.len()) {
            return Err(Error::parse(WHAT, 1, format!("label {bad} out of range")));
        }
        Ok(LevelSnapshot {
            level,
            factor,
            objective,
            labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
        self.write_tsv(&mut w, seed)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        LevelSnapshot::read_tsv(BufReader::new(File::open(path).map_err(Error::at(path))?))
    }
}

#[derive(Debug, Clone)]
pub struct SuperSplitRun {
    pub snapshots: Vec<LevelSnapshot>,
    pub stats: RunStats,
    pub rng_seed: u64,
}

/// Multi-level clustering: level 0 splits everything possible at factor 0;
/// each later level n lowers the factor to −n·del and splits only clusters
/// larger than `thr`, until all clusters have at most `thr` points.
pub fn super_split(matrix: &SigmaMatrix, thr: usize, del: f64, params: &EngineParams) -> Result<SuperSplitRun> {
    if thr < 1 {
        return Err(Error::Config("thr must be at least 1".into()));
    }
    if !(del > 0.0 && del.is_finite()) {
        return Err(Error::Config(format!("del must be positive, got {del}")));
    }
    let mut opt = Optimizer::new(matrix, params);
    opt.set_factor(0.0);
    opt.one_cluster();
    opt.master_split(1);
    let mut snapshots = vec![opt.snapshot(0)];
    let mut level = 0;
    while opt.largest_cluster() > thr {
        level += 1;
        let factor = -(level as f64) * del;
        if factor < params.factor_floor {
            return Err(Error::NonTermination {
                factor,
                floor: params.factor_floor,
                level,
                largest: opt.largest_cluster(),
            });
        }
        opt.set_factor(factor);
        opt.master_split(thr);
        snapshots.push(opt.snapshot(level));
    }
    log::debug!(
        "super_split: {} levels, {} cap hits, {} commits",
        snapshots.len(),
        opt.stats().cap_hits,
        opt.stats().commits
    );
    Ok(SuperSplitRun {
        snapshots,
        stats: opt.stats(),
        rng_seed: params.rng_seed,
    })
}

/// File name of the snapshot for `level`.
pub fn snapshot_file_name(level: usize) -> String {
    format!("level_{level:03}.tsv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_point() -> SigmaMatrix {
        SigmaMatrix::from_dense(&[
            vec![0.0, 2.0, -3.0],
            vec![2.0, 0.0, -3.0],
            vec![-3.0, -3.0, 0.0],
        ])
    }

    fn planted(blocks: usize, size: usize) -> SigmaMatrix {
        SigmaMatrix::from_fn(blocks * size, |i, j| if i / size == j / size { 1.0 } else { -1.0 })
    }

    #[test]
    fn objective_examples() {
        let m = three_point();
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        assert_eq!(opt.objective(), 0.0);
        opt.one_cluster();
        assert_eq!(opt.objective(), -4.0);
        opt.set_partition(&[0, 0, 1]).unwrap();
        assert_eq!(opt.objective(), 2.0);
        opt.state().check_bookkeeping(&m, 1e-12).unwrap();
    }

    #[test]
    fn one_cluster_edges() {
        let m = SigmaMatrix::from_fn(1, |_, _| 0.0);
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.one_cluster();
        assert_eq!(opt.state().sums()[0], 0.0);
        assert_eq!(opt.state().counts()[0], 1);

        let empty = SigmaMatrix::from_fn(0, |_, _| 0.0);
        let mut opt = Optimizer::new(&empty, &EngineParams::default());
        opt.one_cluster();
        assert!(opt.state().is_empty());
    }

    #[test]
    fn single_point_opt_single_member() {
        let m = three_point();
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.load_subset(&[1]);
        opt.set_trial(&[1]).unwrap();
        assert_eq!(opt.single_point_opt(), 0.0);
    }

    #[test]
    fn single_point_opt_seeded_split() {
        let m = three_point();
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.one_cluster();
        opt.load_subset(&[0, 1, 2]);
        opt.set_trial(&[0, 0, 2]).unwrap();
        assert_eq!(opt.single_point_opt(), 2.0);
        // Starting all-in-one cannot split: no other label is present.
        opt.set_trial(&[0, 0, 0]).unwrap();
        assert_eq!(opt.single_point_opt(), -4.0);
        // Point 2 seeded with 0 drifts to rejoin nothing better; 1 follows 0.
        opt.set_trial(&[0, 1, 1]).unwrap();
        assert_eq!(opt.single_point_opt(), 2.0);
    }

    #[test]
    fn single_point_opt_all_positive_never_splits() {
        let m = SigmaMatrix::from_fn(4, |i, j| 1.0 + (i + j) as f64);
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.load_subset(&[0, 1, 2, 3]);
        opt.set_trial(&[0, 0, 0, 0]).unwrap();
        let full: f64 = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).map(|(i, j)| m.base(i, j)).sum();
        assert_eq!(opt.single_point_opt(), full);
    }

    #[test]
    fn local_opt_commits_only_on_strict_improvement() {
        let m = three_point();
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.set_partition(&[0, 0, 1]).unwrap();
        opt.load_subset(&[0, 1, 2]);
        opt.set_trial(&[1, 1, 2]).unwrap();
        let before = opt.state().labels().to_vec();
        assert_eq!(opt.local_opt(2.0), 2.0);
        assert_eq!(opt.state().labels(), before.as_slice());
        assert_eq!(opt.stats().commits, 0);

        opt.one_cluster();
        opt.load_subset(&[0, 1, 2]);
        opt.set_trial(&[0, 0, 2]).unwrap();
        assert_eq!(opt.local_opt(-4.0), 2.0);
        assert_eq!(opt.state().labels(), &[0, 0, 2]);
    }

    #[test]
    fn basic_split_singleton_marks() {
        let m = three_point();
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.load_subset(&[2]);
        opt.basic_split();
        assert_eq!(opt.state().labels()[2], -3);
        assert_eq!(opt.state().counts()[2], 1);
        assert_eq!(opt.state().sums()[2], 0.0);
    }

    #[test]
    fn basic_split_planted_blocks() {
        let m = planted(2, 3);
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.one_cluster();
        opt.load_subset(&[0, 1, 2, 3, 4, 5]);
        opt.basic_split();
        assert_eq!(opt.state().clusters(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(opt.objective(), 6.0);
        opt.state().check_bookkeeping(&m, 1e-12).unwrap();
    }

    #[test]
    fn basic_split_all_positive_is_unsplittable() {
        let m = SigmaMatrix::from_fn(5, |_, _| 0.5);
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        opt.one_cluster();
        opt.load_subset(&[0, 1, 2, 3, 4]);
        opt.basic_split();
        assert!(opt.state().labels().iter().all(|&l| l == -1));
    }

    #[test]
    fn master_split_examples() {
        let m = planted(2, 3);
        let mut opt = Optimizer::new(&m, &EngineParams::default());
        assert_eq!(opt.master_split(3), 0);
        assert_eq!(opt.state().clusters().len(), 6);

        opt.one_cluster();
        assert_eq!(opt.master_split(3), 0);
        assert_eq!(opt.state().clusters(), vec![vec![0, 1, 2], vec![3, 4, 5]]);

        let pos = SigmaMatrix::from_fn(5, |_, _| 1.0);
        let mut opt = Optimizer::new(&pos, &EngineParams::default());
        opt.one_cluster();
        assert_eq!(opt.master_split(3), 5);
        assert_eq!(opt.state().labels(), &[0, 0, 0, 0, 0]);
        opt.state().check_bookkeeping(&pos, 1e-12).unwrap();
    }

    #[test]
    fn super_split_single_snapshot_when_small() {
        let pos = SigmaMatrix::from_fn(4, |_, _| 1.0);
        let run = super_split(&pos, 10, 0.5, &EngineParams::default()).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        assert_eq!(run.snapshots[0].factor, 0.0);
    }

    #[test]
    fn super_split_planted_schedule() {
        // Within-block σ = +1: blocks split once σ + factor < 0, i.e. at factor −1.5.
        let m = planted(2, 3);
        let run = super_split(&m, 1, 0.5, &EngineParams::default()).unwrap();
        assert_eq!(run.snapshots[0].clusters(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let factors: Vec<f64> = run.snapshots.iter().map(|s| s.factor).collect();
        assert_eq!(factors, vec![0.0, -0.5, -1.0, -1.5]);
        assert_eq!(run.snapshots[2].clusters().len(), 2);
        assert_eq!(run.snapshots[3].clusters().len(), 6);
    }

    #[test]
    fn super_split_is_deterministic() {
        let m = SigmaMatrix::from_fn(24, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let params = EngineParams { rng_seed: 99, ..Default::default() };
        let a = super_split(&m, 4, 0.5, &params).unwrap();
        let b = super_split(&m, 4, 0.5, &params).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn super_split_factor_floor() {
        let m = SigmaMatrix::from_fn(6, |_, _| 1000.0);
        let err = super_split(&m, 2, 0.5, &EngineParams::default()).unwrap_err();
        assert!(matches!(err, Error::NonTermination { .. }));
    }

    #[test]
    fn snapshot_file_round_trip() {
        let snap = LevelSnapshot { level: 2, factor: -1.0, objective: 3.25, labels: vec![0, 0, 2, 2, 4] };
        let mut buf = Vec::new();
        snap.write_tsv(&mut buf, 7).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("level=2 factor=-1 objective=3.25 seed=7 version=1\n"));
        assert_eq!(LevelSnapshot::read_tsv(buf.as_slice()).unwrap(), snap);
        let bad = text.replace("version=1", "version=2");
        assert!(matches!(LevelSnapshot::read_tsv(bad.as_bytes()), Err(Error::Incompatible { .. })));
    }
}
