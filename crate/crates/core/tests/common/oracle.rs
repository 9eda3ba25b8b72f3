//! Brute-force reference for node-level rule selection.

use backflow_core::backpressure::{BacklogView, BpConfig, ForecastView, NeighborFilter, PeeringView, RuleBudget, RuleProposal};

/// Selection by repeated global argmax over every remaining
/// (link, commodity) pair at a node, then an exhaustive search over the
/// placements on each parallel-link group.
pub fn oracle(
    view: &PeeringView,
    hosts: &[usize],
    u: &BacklogView,
    g: Option<&ForecastView>,
    filter: &NeighborFilter,
    cfg: &BpConfig,
) -> Vec<RuleProposal> {
    let links = view.links();
    let nc = hosts.len();
    let budget_of = |li: usize| match cfg.budget {
        RuleBudget::Single => 1,
        RuleBudget::PerPrefix { n_prefixes } => {
            let deg = links.iter().filter(|l| l.from_router == links[li].from_router).count().max(1);
            ((n_prefixes + deg - 1) / deg).max(1)
        }
    };
    let mut out = Vec::new();
    for node in 0..view.node_count() {
        let outs: Vec<usize> = (0..links.len()).filter(|&i| links[i].from == node).collect();
        let mut left: Vec<usize> = outs.iter().map(|&li| budget_of(li)).collect();
        let mut visited = vec![false; nc];
        let mut chosen: Vec<Vec<RuleProposal>> = vec![Vec::new(); outs.len()];
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (pos, &li) in outs.iter().enumerate() {
                if left[pos] == 0 {
                    continue;
                }
                let d = links[li].to;
                for c in 0..nc {
                    let here = u.get(node, c);
                    if visited[c] || hosts[c] == node || here == 0 || here < cfg.alarm_level || !filter.allows(node, c, d) {
                        continue;
                    }
                    let score = here as f64 - u.get(d, c) as f64 - g.map_or(0.0, |g| g.get(d, c));
                    let better = match best {
                        None => true,
                        Some((bs, bc, bp)) => score > bs || (score == bs && (c, pos) < (bc, bp)),
                    };
                    if better {
                        best = Some((score, c, pos));
                    }
                }
            }
            let Some((score, c, pos)) = best else { break };
            visited[c] = true;
            left[pos] -= 1;
            let li = outs[pos];
            let d = links[li].to;
            let (here, there) = (u.get(node, c), u.get(d, c));
            let ordered = g.map_or(true, |g| here as f64 + g.get(node, c) > there as f64 + g.get(d, c));
            if here > there && ordered {
                chosen[pos].push(RuleProposal {
                    owner: node,
                    commodity: c,
                    link: li,
                    link_id: links[li].link_id,
                    neighbor: d,
                    potential: here - there,
                    foresight_delta: score,
                });
            }
        }
        // Parallel links towards the same neighbour with equal budgets.
        let mut neighbours: Vec<usize> = outs.iter().map(|&li| links[li].to).collect();
        neighbours.sort();
        neighbours.dedup();
        for d in neighbours {
            let group: Vec<usize> = (0..outs.len()).filter(|&p| links[outs[p]].to == d).collect();
            if group.len() < 2 || group.iter().all(|&p| chosen[p].is_empty()) {
                continue;
            }
            let b0 = budget_of(outs[group[0]]);
            if group.iter().any(|&p| budget_of(outs[p]) != b0) {
                continue;
            }
            let caps: Vec<u128> = group.iter().map(|&p| links[outs[p]].capacity_bps as u128).collect();
            let dq: Vec<u128> = group.iter().map(|&p| chosen[p].iter().map(|r| r.potential as u128).sum()).collect();
            let perm = best_permutation(&caps, &dq);
            let taken: Vec<Vec<RuleProposal>> = group.iter().map(|&p| std::mem::take(&mut chosen[p])).collect();
            for (slot, &p) in group.iter().enumerate() {
                let li = outs[p];
                chosen[p] = taken[perm[slot]]
                    .iter()
                    .cloned()
                    .map(|mut r| {
                        r.link = li;
                        r.link_id = links[li].link_id;
                        r
                    })
                    .collect();
            }
        }
        out.extend(chosen.into_iter().flatten());
    }
    out
}

/// First permutation in lexicographic order with the largest score.
pub fn best_permutation(caps: &[u128], dq: &[u128]) -> Vec<usize> {
    fn rec(caps: &[u128], dq: &[u128], cur: &mut Vec<usize>, used: &mut Vec<bool>, best: &mut Option<(u128, Vec<usize>)>) {
        if cur.len() == caps.len() {
            let s: u128 = cur.iter().enumerate().map(|(l, &a)| caps[l] * dq[a]).sum();
            if best.as_ref().map_or(true, |(bs, _)| s > *bs) {
                *best = Some((s, cur.clone()));
            }
            return;
        }
        for a in 0..caps.len() {
            if !used[a] {
                used[a] = true;
                cur.push(a);
                rec(caps, dq, cur, used, best);
                cur.pop();
                used[a] = false;
            }
        }
    }
    let mut best = None;
    rec(caps, dq, &mut Vec::new(), &mut vec![false; caps.len()], &mut best);
    best.expect("at least one permutation").1
}
