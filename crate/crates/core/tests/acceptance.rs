//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use seqblock::chain::{build_chain, ChainCounts, ChainOptions, MemoryKey};
use seqblock::combinatorics::ln_factorial;
use seqblock::dl::{block_mle_loglik, partition_prior, seq_term, total_dl, Partition, PriorConfig};
use seqblock::edges::EdgeStream;
use seqblock::generate::shuffle_null;
use seqblock::inference::{
    agglomerative_search, fit_chain, fit_sequence, order_scan, BlockState, ChainState, FitConfig, WaitConfig,
};
use seqblock::metrics::nmi;
use seqblock::predict::{holdout_bound, temporal_holdout_bound, SplitSpec};
use seqblock::sequence::Sequence;
use seqblock::synthetic::{planted_stream, planted_waits, random_stream, timing_order2, MemoryRule, PlantedChain};
use seqblock::temporal::{
    dcsbm_loglik, joint_fit, label_sequence, static_fit, static_term, temporal_dl, NodeState, TemporalConfig,
};
use seqblock::waits::{gamma_evidence, wait_term, WaitMode, WaitStats};

use common::{edges_given_labels, label_tokens, logsumexp, set_partitions, wait_evidence_quadrature};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn compact(labels: &[u32]) -> Vec<u32> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|g| {
            let next = map.len() as u32;
            *map.entry(*g).or_insert(next)
        })
        .collect()
}

fn seeds() -> std::ops::Range<u64> {
    0..20
}

fn memory_truth(chain: &ChainCounts, rule: &MemoryRule) -> Vec<u32> {
    chain.memories().iter().map(|m| rule.group(&m.0)).collect()
}

// 1 -------------------------------------------------------------------------

/// Sequences in canonical first-appearance form of length `len` over at most
/// `max` symbols.
fn canonical_sequences(len: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(cur: &mut Vec<u32>, len: usize, max: u32, top: u32, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for x in 0..(top + 1).min(max) {
            cur.push(x);
            rec(cur, len, max, top.max(x + 1), out);
            cur.pop();
        }
    }
    rec(&mut cur, len, max, 0, &mut out);
    out
}

fn all_sequences(len: usize, n: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n).map(move |x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

/// Block signature of emissions `xs` against memory groups `ss`.
fn signature(xs: &[u32], ss: &[u32], tp: &[u32], n: usize, bn: usize, bm: usize) -> Vec<u32> {
    let mut sig = vec![0u32; n + bn * bm];
    for (&x, &s) in xs.iter().zip(ss) {
        sig[x as usize] += 1;
        sig[n + tp[x as usize] as usize * bm + s as usize] += 1;
    }
    sig
}

fn c1_normalization() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut induced_checked = 0usize;
    let mut induced_worst = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut cache: HashMap<(usize, Vec<u32>, Vec<u32>), HashMap<Vec<u32>, u64>> = HashMap::new();
    for e in 1..=7usize {
        for toks in canonical_sequences(e + 1, 3) {
            let n = *toks.iter().max().unwrap() as usize + 1;
            let seq = Sequence::from_ids(toks.clone(), n).unwrap();
            let chain = build_chain(&seq, 1, ChainOptions::default()).unwrap();
            let m = chain.num_memories();
            let emis: Vec<u32> = toks[1..].to_vec();
            let mem_ids: Vec<u32> = chain.emissions().iter().map(|em| em.memory).collect();
            let candidates = all_sequences(e, n as u32);
            let mem_of: Vec<Option<u32>> = (0..n as u32).map(|x| chain.memory_of_token(x)).collect();
            // memory visited before each emission of every candidate
            let paths: Vec<Vec<Option<u32>>> = candidates
                .iter()
                .map(|xs| {
                    let mut prev = toks[0];
                    xs.iter()
                        .map(|&x| {
                            let id = mem_of[prev as usize];
                            prev = x;
                            id
                        })
                        .collect()
                })
                .collect();
            for tp in set_partitions(n) {
                let bn = *tp.iter().max().unwrap() as usize + 1;
                for mp in set_partitions(m) {
                    let bm = *mp.iter().max().unwrap() as usize + 1;
                    let part = Partition::new(tp.clone(), mp.clone());
                    let st = seq_term(&chain, &part).unwrap();
                    // memory-group visits held fixed
                    let ss: Vec<u32> = mem_ids.iter().map(|&id| mp[id as usize]).collect();
                    let hist = cache.entry((n, tp.clone(), ss.clone())).or_insert_with(|| {
                        let mut h = HashMap::new();
                        for xs in &candidates {
                            *h.entry(signature(xs, &ss, &tp, n, bn, bm)).or_insert(0u64) += 1;
                        }
                        h
                    });
                    let count = hist[&signature(&emis, &ss, &tp, n, bn, bm)];
                    let err = ((count as f64).ln() - st).abs();
                    worst = worst.max(err);
                    checked += 1;

                    // memories induced by the sampled tokens themselves; with one
                    // memory group, unseen memories join it
                    let target = signature(&emis, &ss, &tp, n, bn, bm);
                    let mut induced = 0u64;
                    let mut ys = vec![0u32; e];
                    for (xs, path) in candidates.iter().zip(&paths) {
                        let ok = path.iter().enumerate().all(|(t, m)| match m {
                            Some(id) => {
                                ys[t] = mp[*id as usize];
                                true
                            }
                            None => {
                                ys[t] = 0;
                                bm == 1
                            }
                        });
                        if ok && signature(xs, &ys, &tp, n, bn, bm) == target {
                            induced += 1;
                        }
                    }
                    let ratio = (induced as f64).ln() - st;
                    if bm == 1 {
                        induced_worst = induced_worst.max(ratio.abs());
                        induced_checked += 1;
                    } else {
                        lo = lo.min(ratio);
                        hi = hi.max(ratio);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && induced_worst < 1e-9 && elapsed < Duration::from_secs(10),
        format!(
            "{checked} (chain, partition) pairs, max |ln count - seq_term| = {worst:.1e}; \
             induced memories with B_M=1: {induced_checked} pairs, max err {induced_worst:.1e}; \
             B_M>1 induced ln(count*P) in [{lo:.3}, {hi:.3}]; {elapsed:.1?}"
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn scratch_chain(st: &ChainState, prior: &PriorConfig, waits: Option<(&WaitStats, WaitMode)>) -> f64 {
    let part = st.partition();
    let mut t = total_dl(st.chain(), &part, prior).unwrap().total;
    if let Some((w, mode)) = waits {
        t += wait_term(w, &part, mode).unwrap();
    }
    t
}

fn scratch_nodes(stream: &EdgeStream, labels: &[u32]) -> f64 {
    let c = compact(labels);
    static_term(stream, &c).unwrap() + partition_prior(&c).unwrap()
}

fn random_target<S: BlockState, R: Rng>(s: &mut S, item: usize, rng: &mut R) -> u32 {
    let side = s.side(item);
    let mut options: Vec<u32> = s.groups(side).to_vec();
    options.push(s.fresh_group(side));
    *options.choose(rng).unwrap()
}

fn c2_delta_consistency() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut moves = 0usize;
    for state in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + state);
        if state % 5 == 4 {
            let directed = state % 10 == 9;
            let n = rng.random_range(4..15usize);
            let pairs: Vec<(u32, u32)> = (0..rng.random_range(20..120))
                .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
                .collect();
            let stream = EdgeStream::from_indices(n, pairs, directed).unwrap();
            let b = rng.random_range(1..5u32);
            let init: Vec<u32> = compact(&(0..n).map(|_| rng.random_range(0..b)).collect::<Vec<_>>());
            let mut s = NodeState::new(&stream, &init);
            let mut before = scratch_nodes(&stream, &s.labels());
            for _ in 0..200 {
                let item = rng.random_range(0..s.num_items());
                let to = random_target(&mut s, item, &mut rng);
                let d = s.delta(item, to);
                s.apply(item, to);
                let after = scratch_nodes(&stream, &s.labels());
                worst = worst.max((d - (after - before)).abs());
                before = after;
                moves += 1;
            }
            continue;
        }
        let n = rng.random_range(3..12usize);
        let order = if state % 3 == 0 { 2 } else { 1 };
        let len = rng.random_range(60..300);
        let toks: Vec<u32> = (0..len).map(|_| rng.random_range(0..n as u32)).collect();
        let mut seq = Sequence::from_ids(toks, n).unwrap();
        let waits: Vec<f64> = (1..len).map(|_| rng.random_range(0.01..5.0)).collect();
        seq = seq.with_waits(waits).unwrap();
        let chain = build_chain(&seq, order, ChainOptions::default()).unwrap();
        let unified = order == 1 && state % 4 == 1;
        let bt = rng.random_range(1..5u32);
        let bm = rng.random_range(1..5u32);
        let tg = compact(&(0..n).map(|_| rng.random_range(0..bt)).collect::<Vec<_>>());
        let part = if unified {
            Partition::unified(&chain, tg).unwrap()
        } else {
            let mg = compact(&(0..chain.num_memories()).map(|_| rng.random_range(0..bm)).collect::<Vec<_>>());
            Partition::new(tg, mg)
        };
        let prior = PriorConfig {
            k_prior: if state % 2 == 0 {
                seqblock::dl::KPrior::Hyperprior
            } else {
                seqblock::dl::KPrior::Uniform
            },
        };
        let stats = WaitStats::from_chain(&chain, &seq.waits.clone().unwrap(), 1.0, None).unwrap();
        let mode = if state % 3 == 1 {
            Some(WaitMode::PerGroup)
        } else if state % 3 == 2 {
            Some(WaitMode::PerMemory)
        } else {
            None
        };
        let waits = mode.map(|m| (&stats, m));
        let mut s = ChainState::new(&chain, &part, prior, waits).unwrap();
        let mut before = scratch_chain(&s, &prior, waits);
        for _ in 0..200 {
            let item = rng.random_range(0..s.num_items());
            let to = random_target(&mut s, item, &mut rng);
            let d = s.delta(item, to);
            s.apply(item, to);
            let after = scratch_chain(&s, &prior, waits);
            worst = worst.max((d - (after - before)).abs());
            before = after;
            moves += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        moves == 10_000 && worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("{moves} moves over 50 states, max |delta - recompute| = {worst:.1e}; {elapsed:.1?}"),
    )
}

// 3 -------------------------------------------------------------------------

fn c3_global_optimum() -> Outcome {
    let start = Instant::now();
    let prior = PriorConfig::default();
    let hits: Vec<bool> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            // a random chain with some structure, until all four tokens occur
            let seq = loop {
                let p: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.random::<f64>().powi(3)).collect()).collect();
                let len = rng.random_range(15..=31);
                let mut t = vec![rng.random_range(0..4u32)];
                while t.len() < len {
                    let row = &p[*t.last().unwrap() as usize];
                    let total: f64 = row.iter().sum();
                    let mut u = rng.random::<f64>() * total;
                    let mut x = 0;
                    while x < 3 && u >= row[x] {
                        u -= row[x];
                        x += 1;
                    }
                    t.push(x as u32);
                }
                let mut seen = t.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() == 4 {
                    break Sequence::from_ids(t, 4).unwrap();
                }
            };
            let chain = build_chain(&seq, 1, ChainOptions::default()).unwrap();
            let mut best = f64::INFINITY;
            for tp in set_partitions(4) {
                for mp in set_partitions(chain.num_memories()) {
                    let t = total_dl(&chain, &Partition::new(tp.clone(), mp), &prior).unwrap().total;
                    best = best.min(t);
                }
            }
            let cfg = FitConfig {
                seed,
                ..Default::default()
            };
            let mut st = ChainState::singletons(&chain, false, prior, None).unwrap();
            let out = agglomerative_search(&mut st, &cfg, &mut rng, |_| {});
            out.total <= best + 1e-9
        })
        .collect();
    let n = hits.iter().filter(|&&h| h).count();
    let elapsed = start.elapsed();
    outcome(
        n >= 18 && elapsed < Duration::from_secs(300),
        format!("exhaustive optimum reached in {n}/20 seeds; {elapsed:.1?}"),
    )
}

// 4 -------------------------------------------------------------------------

fn c4_shuffle_null() -> Outcome {
    let ok: Vec<bool> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
            let seq = PlantedChain::two_by_two(9.0).sample(10_001, &mut rng);
            let shuffled = shuffle_null(&seq, &mut rng).unwrap();
            let cfg = FitConfig {
                seed,
                ..Default::default()
            };
            let f = order_scan(&shuffled, 1..=3, &cfg, None).unwrap();
            f.order == 1 && f.num_token_groups == 1 && f.num_memory_groups == 1
        })
        .collect();
    let n = ok.iter().filter(|&&h| h).count();
    outcome(n >= 19, format!("n=1 with B_N=B_M=1 in {n}/20 seeds"))
}

// 5 and 7 -------------------------------------------------------------------

fn c5_c7_planted() -> (Outcome, Vec<(f64, f64)>) {
    let rows: Vec<(f64, f64, f64, f64)> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let p = PlantedChain::two_by_two(9.0);
            let seq = p.sample(10_001, &mut rng);
            let cfg = FitConfig {
                seed,
                ..Default::default()
            };
            let f = fit_sequence(&seq, &cfg, None).unwrap();
            let chain = build_chain(&seq, 1, cfg.chain).unwrap();
            let a = nmi(&f.partition.token_groups, &p.token_groups);
            let b = nmi(&f.partition.memory_groups, &memory_truth(&chain, &p.memory_rule));
            (a, b, f.breakdown.total, f.baseline)
        })
        .collect();
    let n = rows.iter().filter(|r| r.0 >= 0.99 && r.1 >= 0.99).count();
    let min = rows.iter().map(|r| r.0.min(r.1)).fold(1.0, f64::min);
    (
        outcome(n >= 18, format!("NMI >= 0.99 on tokens and memories in {n}/20 seeds (min {min:.3})")),
        rows.iter().map(|r| (r.2, r.3)).collect(),
    )
}

// 6 -------------------------------------------------------------------------

fn c6_order_selection() -> (Outcome, Vec<(f64, f64)>) {
    let rows: Vec<(usize, usize, f64, f64)> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
            let seq = PlantedChain::xor_order2(9.0).sample(10_003, &mut rng);
            let cfg = FitConfig {
                seed,
                ..Default::default()
            };
            let f = order_scan(&seq, 1..=3, &cfg, None).unwrap();
            let table = f.order_table.clone().unwrap();
            let base = table
                .iter()
                .min_by(|a, b| a.baseline.total_cmp(&b.baseline))
                .unwrap()
                .order;
            let at2 = table.iter().find(|r| r.order == 2).unwrap();
            (f.order, base, at2.total, at2.baseline)
        })
        .collect();
    let n = rows.iter().filter(|r| r.0 == 2).count();
    let nb = rows.iter().filter(|r| r.1 == 2).count();
    (
        outcome(
            n >= 16 && nb >= 16,
            format!("argmin n=2 in {n}/20 seeds; plain-chain evidence picks n=2 in {nb}/20"),
        ),
        rows.iter().map(|r| (r.2, r.3)).collect(),
    )
}

fn c7_beats_baseline(planted: &[(f64, f64)], order2: &[(f64, f64)]) -> Outcome {
    let a = planted.iter().filter(|(s, b)| s < b).count();
    let b = order2.iter().filter(|(s, b)| s < b).count();
    outcome(
        a == 20 && b == 20,
        format!("Sigma < plain chain in {a}/20 order-1 runs and {b}/20 order-2 runs"),
    )
}

// 8 -------------------------------------------------------------------------

fn c8_factorization() -> Outcome {
    let prior = PriorConfig::default();
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + case);
        let n = rng.random_range(2..=6usize);
        let e = rng.random_range(3..=20usize);
        let directed = case % 2 == 1;
        let pairs: Vec<(u32, u32)> = (0..e)
            .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
            .collect();
        let stream = EdgeStream::from_indices(n, pairs, directed).unwrap();
        let c = rng.random_range(1..=3u32.min(n as u32));
        let groups = compact(&(0..n).map(|_| rng.random_range(0..c)).collect::<Vec<_>>());
        let order = rng.random_range(1..=2usize).min(e - 1);
        // label chain from the raw events
        let (tokens, space) = label_tokens(&stream, &groups);
        let labels = Sequence::from_ids(tokens, space).unwrap();
        let chain = build_chain(&labels, order, ChainOptions::default()).unwrap();
        let bt = rng.random_range(1..=3u32);
        let tg = compact(&(0..space).map(|_| rng.random_range(0..bt)).collect::<Vec<_>>());
        let mg = compact(&(0..chain.num_memories()).map(|_| rng.random_range(0..bt)).collect::<Vec<_>>());
        let part = Partition::new(tg, mg);
        let direct = edges_given_labels(&stream, &groups)
            + total_dl(&chain, &part, &prior).unwrap().total
            + partition_prior(&groups).unwrap();
        let factorized = temporal_dl(&stream, &groups, order, Some(&part), &prior).unwrap().total;
        worst = worst.max((direct - factorized).abs());
    }
    outcome(worst <= 1e-6, format!("100 streams, max |direct - factorized| = {worst:.1e} nats"))
}

// 9 -------------------------------------------------------------------------

fn c9_dcsbm_reduction() -> Outcome {
    let mut same = 0;
    let mut optimal = 0;
    let mut worst_const = 0.0f64;
    for case in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + case);
        let n = 6;
        let (stream, _) = planted_stream(n, rng.random_range(10..25), 0.5, &mut rng).unwrap();
        let cfg = TemporalConfig {
            order: 0,
            fit: FitConfig {
                seed: case,
                ..Default::default()
            },
            ..Default::default()
        };
        let dynamic = joint_fit(&stream, &cfg).unwrap();
        let stat = static_fit(&stream, &cfg).unwrap();
        let e = stream.len() as u64;
        let sn = dynamic.breakdown.static_net_term.unwrap() + dynamic.breakdown.node_partition_prior.unwrap();
        if compact(&dynamic.node_groups) == compact(&stat.node_groups)
            && (dynamic.breakdown.total - sn - ln_factorial(e)).abs() < 1e-9
        {
            same += 1;
        }
        // exhaustive static optimum
        let best = set_partitions(n)
            .iter()
            .map(|g| static_term(&stream, g).unwrap() + partition_prior(g).unwrap())
            .fold(f64::INFINITY, f64::min);
        if (sn - best).abs() < 1e-9 {
            optimal += 1;
        }
        // one node group: the dynamic factor is the constant ln E!
        let ones = vec![0u32; n];
        for order in 1..=3 {
            let labels = label_sequence(&stream, &ones).unwrap();
            let chain = labels.chain(order).unwrap();
            let part = Partition::trivial(&chain, false).unwrap();
            let b = temporal_dl(&stream, &ones, order, Some(&part), &PriorConfig::default()).unwrap();
            let dynamic_part = b.total - b.static_net_term.unwrap() - b.node_partition_prior.unwrap();
            worst_const = worst_const.max((dynamic_part - ln_factorial(e)).abs());
        }
    }
    outcome(
        same == 20 && optimal == 20 && worst_const < 1e-9,
        format!(
            "n=0 fit equals the static fit in {same}/20 and the exhaustive static optimum in {optimal}/20; \
             C=1 dynamic factor - ln E! within {worst_const:.1e}"
        ),
    )
}

// 10 ------------------------------------------------------------------------

fn c10_random_streams() -> Outcome {
    let rows: Vec<(usize, usize, usize)> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let stream = random_stream(50, 5_000, &mut rng).unwrap();
            let cfg = TemporalConfig {
                fit: FitConfig {
                    seed,
                    ..Default::default()
                },
                ..Default::default()
            };
            let f = joint_fit(&stream, &cfg).unwrap();
            (f.num_node_groups, f.num_label_token_groups(), f.num_label_memory_groups())
        })
        .collect();
    let n = rows.iter().filter(|r| **r == (1, 1, 1)).count();
    let others: Vec<_> = rows.iter().filter(|r| **r != (1, 1, 1)).collect();
    outcome(n >= 18, format!("C=B_N=B_M=1 in {n}/20 seeds; others (C, B_N, B_M) {others:?}"))
}

// 11 ------------------------------------------------------------------------

/// Exact `ln P(validation | training, b*)` by summing over every placement of
/// the items first seen in the validation part.
fn exact_predictive(seq: &Sequence, t_star: usize, cfg: &FitConfig) -> Option<(f64, usize)> {
    let (train, back) = seq.prefix(t_star);
    let train_chain = build_chain(&train, cfg.order, cfg.chain).ok()?;
    let fit = fit_chain(&train_chain, None, cfg).ok()?;
    let full = build_chain(seq, cfg.order, cfg.chain).ok()?;
    let mut tok: Vec<Option<u32>> = vec![None; full.num_tokens()];
    for (x, &g) in fit.partition.token_groups.iter().enumerate() {
        tok[back[x] as usize] = Some(g);
    }
    let mut mem: Vec<Option<u32>> = vec![None; full.num_memories()];
    for (m, key) in train_chain.memories().iter().enumerate() {
        let k = MemoryKey(key.0.iter().map(|&x| back[x as usize]).collect());
        mem[full.memory_id(&k)? as usize] = Some(fit.partition.memory_groups[m]);
    }
    let new_tok: Vec<usize> = (0..tok.len()).filter(|&i| tok[i].is_none()).collect();
    let new_mem: Vec<usize> = (0..mem.len()).filter(|&i| mem[i].is_none()).collect();
    let bn = fit.num_token_groups as u32;
    let bm = fit.num_memory_groups as u32;
    // each new item joins an existing group or one of the fresh groups opened before it
    fn placements(k: usize, existing: u32) -> Vec<Vec<u32>> {
        let mut out = vec![(Vec::new(), existing)];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|(p, top)| {
                    (0..=top).map(move |g| {
                        let mut q = p.clone();
                        q.push(g);
                        (q, if g == top { top + 1 } else { top })
                    })
                })
                .collect();
        }
        out.into_iter().map(|(p, _)| p).collect()
    }
    let pt = placements(new_tok.len(), bn);
    let pm = placements(new_mem.len(), bm);
    let configs = pt.len() * pm.len();
    if configs > 200 {
        return None;
    }
    let mut terms = Vec::with_capacity(configs);
    for a in &pt {
        for b in &pm {
            let mut tg: Vec<u32> = tok.iter().map(|g| g.unwrap_or(0)).collect();
            for (i, &x) in new_tok.iter().enumerate() {
                tg[x] = a[i];
            }
            let mut mg: Vec<u32> = mem.iter().map(|g| g.unwrap_or(0)).collect();
            for (i, &m) in new_mem.iter().enumerate() {
                mg[m] = b[i];
            }
            let part = Partition::new(compact(&tg), compact(&mg));
            terms.push(-total_dl(&full, &part, &cfg.prior).ok()?.total);
        }
    }
    Some((logsumexp(&terms) + fit.breakdown.total, configs))
}

fn c11_prediction() -> Outcome {
    let cfg = FitConfig {
        restarts: 2,
        ..Default::default()
    };
    let mut valid = 0;
    let mut cases = 0;
    let mut attempt = 0u64;
    let mut max_configs = 0;
    while cases < 100 && attempt < 2_000 {
        attempt += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(1100 + attempt);
        let n = rng.random_range(3..7u32);
        let len = rng.random_range(10..40usize);
        // the last tokens may be new, so the validation part introduces items
        let toks: Vec<u32> = (0..len)
            .map(|t| {
                if t < len / 2 {
                    rng.random_range(0..n - 1)
                } else {
                    rng.random_range(0..n)
                }
            })
            .collect();
        let Ok(seq) = Sequence::from_ids(toks, n as usize) else { continue };
        let split = SplitSpec::new(0.5).unwrap();
        let t_star = split.boundary(seq.len());
        let c = FitConfig {
            seed: attempt,
            ..cfg.clone()
        };
        let Some((exact, configs)) = exact_predictive(&seq, t_star, &c) else { continue };
        let h = holdout_bound(&seq, split, &c).unwrap();
        cases += 1;
        max_configs = max_configs.max(configs);
        if h.log_bound <= exact + 1e-9 {
            valid += 1;
        }
    }
    let better: Vec<bool> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1150 + seed);
            let (stream, _) = planted_stream(30, 2_000, 0.9, &mut rng).unwrap();
            let bound = |order| {
                let cfg = TemporalConfig {
                    order,
                    fit: FitConfig {
                        seed,
                        ..Default::default()
                    },
                    ..Default::default()
                };
                temporal_holdout_bound(&stream, SplitSpec::default(), &cfg).unwrap().log_bound
            };
            bound(1) > bound(0)
        })
        .collect();
    let nb = better.iter().filter(|&&b| b).count();
    outcome(
        cases == 100 && valid == 100 && nb >= 18,
        format!(
            "bound below the exact log predictive likelihood in {valid}/{cases} cases (<= {max_configs} placements each); \
             -dSigma(n=1) > -dSigma(n=0) in {nb}/20 streams"
        ),
    )
}

// 12 ------------------------------------------------------------------------

fn c12_continuous_time() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1200);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let k = rng.random_range(0..60u64);
        let delta = 10f64.powf(rng.random_range(-2.0..2.0)) * (k as f64 + 0.5);
        let alpha = rng.random_range(0.1..5.0);
        let beta = 10f64.powf(rng.random_range(-2.0..1.0));
        let closed = -gamma_evidence(k, delta, alpha, beta);
        let quad = wait_evidence_quadrature(k, delta, alpha, beta);
        // relative error of the evidence itself
        worst = worst.max((closed - quad).exp_m1().abs());
    }

    let rule = MemoryRule {
        table: (0..10).map(|x| x % 2).collect(),
        modulus: 2,
    };
    let separated: Vec<bool> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1210 + seed);
            let seq = PlantedChain::two_by_two(1.0).sample(5_000, &mut rng);
            let waits = planted_waits(&seq, 1, &rule, &[1e-3, 1.0], &mut rng);
            let seq = seq.with_waits(waits).unwrap();
            let cfg = FitConfig {
                seed,
                ..Default::default()
            };
            let wc = WaitConfig {
                mode: WaitMode::PerGroup,
                ..Default::default()
            };
            let f = fit_sequence(&seq, &cfg, Some(&wc)).unwrap();
            let chain = build_chain(&seq, 1, cfg.chain).unwrap();
            nmi(&f.partition.memory_groups, &memory_truth(&chain, &rule)) >= 0.99
        })
        .collect();
    let ns = separated.iter().filter(|&&b| b).count();

    let shifted: Vec<bool> = seeds()
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1230 + seed);
            let seq = timing_order2(4, 5_000, [0.01, 1.0], &mut rng);
            let cfg = FitConfig {
                seed,
                ..Default::default()
            };
            let plain = order_scan(&seq, 1..=3, &cfg, None).unwrap();
            let timed = order_scan(&seq, 1..=3, &cfg, Some(&WaitConfig::default())).unwrap();
            plain.order == 1 && timed.order == 2
        })
        .collect();
    let nsh = shifted.iter().filter(|&&b| b).count();
    outcome(
        worst <= 1e-6 && ns >= 18 && nsh >= 14,
        format!(
            "closed form vs quadrature max rel err {worst:.1e}; memory groups separated in {ns}/20; \
             order moves from 1 to 2 with waits in {nsh}/20"
        ),
    )
}

// 13 ------------------------------------------------------------------------

fn c13_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1300);
    let n = 30usize;
    let pairs: Vec<(u32, u32)> = (0..300)
        .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
        .collect();
    let stream = EdgeStream::from_indices(n, pairs.clone(), false).unwrap();
    // adjacency counts as transitions: each edge is walked both ways
    let mut triples = Vec::new();
    for &(i, j) in &pairs {
        triples.push((j, i, 1));
        triples.push((i, j, 1));
    }
    let memories = (0..n as u32).map(|x| MemoryKey(vec![x])).collect();
    let chain = ChainCounts::from_transitions(n, memories, &triples).unwrap();
    let diffs: Vec<f64> = (0..100)
        .map(|_| {
            let b = rng.random_range(1..8u32);
            let groups = compact(&(0..n).map(|_| rng.random_range(0..b)).collect::<Vec<_>>());
            let part = Partition::unified(&chain, groups.clone()).unwrap();
            block_mle_loglik(&chain, &part).unwrap() - dcsbm_loglik(&stream, &groups).unwrap()
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
    outcome(sd < 1e-9, format!("100 partitions, difference {mean:.6} with sd {sd:.1e}"))
}

// 14 ------------------------------------------------------------------------

fn c14_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1400);
    let n = 1000u32;
    let mut p = PlantedChain::two_by_two(9.0);
    p.token_groups = (0..n).map(|x| x % 10).collect();
    p.memory_rule = MemoryRule {
        table: (0..n).map(|x| (x / 10) % 10).collect(),
        modulus: 10,
    };
    p.affinity = (0..10)
        .map(|s| (0..10).map(|r| if r == s { 20.0 } else { 1.0 }).collect())
        .collect();
    let seq = p.sample(1_000_001, &mut rng);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let cfg = FitConfig {
        restarts: 1,
        ..Default::default()
    };
    let f = pool.install(|| fit_sequence(&seq, &cfg, None)).unwrap();
    let elapsed = start.elapsed();
    outcome(
        elapsed < Duration::from_secs(600),
        format!(
            "E=10^6, N=10^3 fitted in {elapsed:.1?} on one thread (B_N={}, B_M={}, token NMI {:.3})",
            f.num_token_groups,
            f.num_memory_groups,
            nmi(&f.partition.token_groups, &p.token_groups)
        ),
    )
}

fn main() {
    // ACCEPTANCE_ONLY=1,8 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |i: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if !wanted(i) {
            return;
        }
        let o = f();
        println!("[{}] criterion {i:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((i, name, o));
    };
    run(1, "normalization", &c1_normalization);
    run(2, "delta consistency", &c2_delta_consistency);
    run(3, "global optimum", &c3_global_optimum);
    run(4, "shuffle null", &c4_shuffle_null);
    let (o5, planted) = if wanted(5) || wanted(7) {
        c5_c7_planted()
    } else {
        (outcome(false, ""), Vec::new())
    };
    let (o6, order2) = if wanted(6) || wanted(7) {
        c6_order_selection()
    } else {
        (outcome(false, ""), Vec::new())
    };
    run(5, "planted recovery", &|| outcome(o5.pass, o5.detail.clone()));
    run(6, "order selection", &|| outcome(o6.pass, o6.detail.clone()));
    run(7, "beats plain chain", &|| c7_beats_baseline(&planted, &order2));
    run(8, "temporal factorization", &c8_factorization);
    run(9, "static reduction", &c9_dcsbm_reduction);
    run(10, "random streams", &c10_random_streams);
    run(11, "prediction bound", &c11_prediction);
    run(12, "continuous time", &c12_continuous_time);
    run(13, "structure/dynamics equivalence", &c13_equivalence);
    run(14, "performance", &c14_performance);
    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
