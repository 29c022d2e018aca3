//! Dynamic label assignment between scored proposal lanes and ground truth.
//!
//! The whole procedure is a reconstruction in the SimOTA style: pair cost
//! combines score and line-IoU quality, each ground-truth lane claims an
//! adaptive number of cheapest proposals, and contested proposals go to the
//! cheaper claim. It is validated against an independent reimplementation
//! of the same rule, never against external numbers.

use crate::geometry::Lane;
use crate::losses::{gliou, GliouParams, LossError};

/// Errors from label assignment.
#[derive(Debug, Clone, PartialEq)]
pub enum AssignError {
    /// No proposals to assign.
    EmptyProposals,
    /// Proposal and ground-truth lanes disagree on slice count.
    ShapeMismatch { left: usize, right: usize },
}

impl std::fmt::Display for AssignError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssignError::EmptyProposals => write!(f, "no proposals to assign"),
            AssignError::ShapeMismatch { left, right } => {
                write!(f, "lane slice counts differ: {left} vs {right}")
            }
        }
    }
}

impl std::error::Error for AssignError {}

/// Outcome of one assignment round.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignResult {
    /// (proposal index, gt index) pairs, sorted by proposal index.
    /// No proposal appears twice.
    pub matches: Vec<(usize, usize)>,
    /// Proposal indices left unmatched (negatives), ascending.
    pub negatives: Vec<usize>,
}

impl AssignResult {
    pub fn gt_of(&self, proposal: usize) -> Option<usize> {
        self.matches
            .iter()
            .find(|&&(p, _)| p == proposal)
            .map(|&(_, g)| g)
    }

    pub fn proposals_of(&self, gt: usize) -> Vec<usize> {
        self.matches
            .iter()
            .filter(|&&(_, g)| g == gt)
            .map(|&(p, _)| p)
            .collect()
    }
}

/// Line IoU for assignment purposes: lane pairs with no jointly present
/// slice score the domain floor -2, keeping every cost finite.
fn assign_gliou(pred: &Lane, gt: &Lane, p: &GliouParams) -> Result<f64, AssignError> {
    match gliou(pred, gt, p) {
        Ok(v) => Ok(v),
        Err(LossError::NoOverlapSlices) => Ok(-2.0),
        Err(LossError::ShapeMismatch { left, right }) => {
            Err(AssignError::ShapeMismatch { left, right })
        }
        Err(_) => unreachable!("gliou emits no other error"),
    }
}

/// Assigns proposals to ground-truth lanes.
///
/// Pair cost is `(1 - score) + (1 - gliou)`. Each gt claims its
/// `clamp(round(sum of top-k_max positive gliou), 1, k_max)` cheapest
/// proposals; a proposal claimed by several gts goes to the cheapest claim
/// (ties to the lower gt index). Ground truths left empty by conflicts are
/// backfilled with their cheapest still-unmatched proposal, so every gt
/// keeps at least one proposal whenever enough proposals exist. Empty `gts`
/// is not an error: every proposal simply comes back negative.
pub fn dynamic_assign(
    proposals: &[(Lane, f64)],
    gts: &[Lane],
    p: &GliouParams,
    k_max: usize,
) -> Result<AssignResult, AssignError> {
    if proposals.is_empty() {
        return Err(AssignError::EmptyProposals);
    }
    let k_max = k_max.max(1);
    if gts.is_empty() {
        return Ok(AssignResult {
            matches: Vec::new(),
            negatives: (0..proposals.len()).collect(),
        });
    }

    // cost[g][p] and quality[g][p]
    let mut cost = vec![vec![0.0; proposals.len()]; gts.len()];
    let mut quality = vec![vec![0.0; proposals.len()]; gts.len()];
    for (gi, gt) in gts.iter().enumerate() {
        for (pi, (lane, score)) in proposals.iter().enumerate() {
            let q = assign_gliou(lane, gt, p)?;
            quality[gi][pi] = q;
            cost[gi][pi] = (1.0 - score) + (1.0 - q);
        }
    }

    // Per-gt claim lists: dynamic-k cheapest proposals.
    let mut claims: Vec<Vec<usize>> = Vec::with_capacity(gts.len());
    for (gi, quality_row) in quality.iter().enumerate() {
        let mut by_quality: Vec<f64> = quality_row.clone();
        by_quality.sort_by(|a, b| b.total_cmp(a));
        let dynamic_k = by_quality
            .iter()
            .take(k_max)
            .map(|&q| q.max(0.0))
            .sum::<f64>()
            .round()
            .clamp(1.0, k_max as f64) as usize;

        let mut order: Vec<usize> = (0..proposals.len()).collect();
        order.sort_by(|&a, &b| cost[gi][a].total_cmp(&cost[gi][b]).then(a.cmp(&b)));
        claims.push(order.into_iter().take(dynamic_k).collect());
    }

    // Conflict resolution: a proposal goes to its cheapest claimant.
    let mut owner: Vec<Option<usize>> = vec![None; proposals.len()];
    for (gi, claim) in claims.iter().enumerate() {
        for &pi in claim {
            match owner[pi] {
                None => owner[pi] = Some(gi),
                Some(prev) => {
                    if cost[gi][pi] < cost[prev][pi] {
                        owner[pi] = Some(gi);
                    }
                }
            }
        }
    }

    // Backfill gts that lost every claim with their cheapest free proposal.
    for (gi, cost_row) in cost.iter().enumerate() {
        if owner.contains(&Some(gi)) {
            continue;
        }
        let free = (0..proposals.len())
            .filter(|&pi| owner[pi].is_none())
            .min_by(|&a, &b| cost_row[a].total_cmp(&cost_row[b]).then(a.cmp(&b)));
        if let Some(pi) = free {
            owner[pi] = Some(gi);
        }
    }

    let mut matches = Vec::new();
    let mut negatives = Vec::new();
    for (pi, o) in owner.iter().enumerate() {
        match o {
            Some(gi) => matches.push((pi, *gi)),
            None => negatives.push(pi),
        }
    }
    Ok(AssignResult { matches, negatives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: GliouParams = GliouParams { e: 15.0 };

    fn shifted(base: &Lane, dx: f64) -> Lane {
        Lane::new(base.xs().iter().map(|x| x.map(|v| v + dx)).collect())
    }

    #[test]
    fn exact_proposal_matches_at_zero_cost() {
        let gt = Lane::full(vec![400.0; 8]);
        let res = dynamic_assign(&[(gt.clone(), 1.0)], &[gt], &E, 4).unwrap();
        assert_eq!(res.matches, vec![(0, 0)]);
        assert!(res.negatives.is_empty());
    }

    #[test]
    fn nearer_proposal_wins_single_slot() {
        let gt = Lane::full(vec![400.0; 8]);
        let near = shifted(&gt, E.e);
        let far = shifted(&gt, 6.0 * E.e);
        // quality {1/3, -1} -> positive sum 1/3 -> dynamic-k 1.
        let res = dynamic_assign(&[(far, 0.9), (near, 0.9)], &[gt], &E, 4).unwrap();
        assert_eq!(res.matches, vec![(1, 0)]);
        assert_eq!(res.negatives, vec![0]);
    }

    #[test]
    fn empty_gt_list_marks_all_negative() {
        let lane = Lane::full(vec![100.0; 4]);
        let res = dynamic_assign(&[(lane.clone(), 0.5), (lane, 0.2)], &[], &E, 4).unwrap();
        assert!(res.matches.is_empty());
        assert_eq!(res.negatives, vec![0, 1]);
    }

    #[test]
    fn empty_proposals_is_an_error() {
        let gt = Lane::full(vec![100.0; 4]);
        assert_eq!(
            dynamic_assign(&[], &[gt], &E, 4).unwrap_err(),
            AssignError::EmptyProposals
        );
    }

    #[test]
    fn disjoint_proposal_still_assignable() {
        // The only proposal shares no slice with the gt; the -2 floor keeps
        // its cost finite so the gt still gets its one proposal.
        let gt = Lane::new(vec![Some(100.0), Some(100.0), None, None]);
        let prop = Lane::new(vec![None, None, Some(500.0), Some(500.0)]);
        let res = dynamic_assign(&[(prop, 0.4)], &[gt], &E, 2).unwrap();
        assert_eq!(res.matches, vec![(0, 0)]);
    }

    #[test]
    fn conflict_goes_to_cheaper_gt() {
        // One proposal sits exactly on gt 1; gt 0 is 4e away. Both claim it
        // (it is the cheapest for each); gt 1 wins, gt 0 backfills to the
        // other proposal.
        let gt0 = Lane::full(vec![400.0; 8]);
        let gt1 = Lane::full(vec![460.0; 8]);
        let on_gt1 = Lane::full(vec![460.0; 8]);
        let spare = Lane::full(vec![430.0; 8]);
        let res = dynamic_assign(
            &[(on_gt1, 0.9), (spare, 0.1)],
            &[gt0.clone(), gt1.clone()],
            &E,
            1,
        )
        .unwrap();
        assert_eq!(res.gt_of(0), Some(1));
        assert_eq!(res.gt_of(1), Some(0));
    }

    /// Straight-line restatement of the assignment rule, kept deliberately
    /// separate from the implementation under test.
    fn oracle_assign(
        proposals: &[(Lane, f64)],
        gts: &[Lane],
        p: &GliouParams,
        k_max: usize,
    ) -> Vec<Option<usize>> {
        let np = proposals.len();
        let ng = gts.len();
        let q = |pi: usize, gi: usize| gliou(&proposals[pi].0, &gts[gi], p).unwrap_or(-2.0);
        let c = |pi: usize, gi: usize| (1.0 - proposals[pi].1) + (1.0 - q(pi, gi));

        let mut owner: Vec<Option<usize>> = vec![None; np];
        let mut claimed: Vec<Vec<usize>> = vec![Vec::new(); ng];
        for (gi, claim_row) in claimed.iter_mut().enumerate() {
            let mut quals: Vec<f64> = (0..np).map(|pi| q(pi, gi)).collect();
            quals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut sum = 0.0;
            for &v in quals.iter().take(k_max) {
                if v > 0.0 {
                    sum += v;
                }
            }
            let mut k = sum.round() as i64;
            if k < 1 {
                k = 1;
            }
            if k > k_max as i64 {
                k = k_max as i64;
            }
            let mut order: Vec<usize> = (0..np).collect();
            order.sort_by(|&a, &b| c(a, gi).partial_cmp(&c(b, gi)).unwrap().then(a.cmp(&b)));
            *claim_row = order.into_iter().take(k as usize).collect();
        }
        for (gi, claim) in claimed.iter().enumerate() {
            for &pi in claim {
                owner[pi] = match owner[pi] {
                    None => Some(gi),
                    Some(prev) if c(pi, gi) < c(pi, prev) => Some(gi),
                    keep => keep,
                };
            }
        }
        for gi in 0..ng {
            if owner.contains(&Some(gi)) {
                continue;
            }
            let mut best: Option<usize> = None;
            for (pi, o) in owner.iter().enumerate() {
                if o.is_some() {
                    continue;
                }
                best = match best {
                    None => Some(pi),
                    Some(b) if c(pi, gi) < c(b, gi) => Some(pi),
                    keep => keep,
                };
            }
            if let Some(pi) = best {
                owner[pi] = Some(gi);
            }
        }
        owner
    }

    proptest! {
        // Implementation agrees with the independent restatement.
        #[test]
        fn matches_oracle(
            gt_xs in proptest::collection::vec(100.0..700.0f64, 3),
            proposal_params in proptest::collection::vec((0.0..3.0f64, -200.0..200.0f64, 0.1..1.0f64), 10),
            k_max in 1usize..5,
        ) {
            let k = 8;
            let gts: Vec<Lane> = gt_xs.iter().map(|&x| Lane::full(vec![x; k])).collect();
            let proposals: Vec<(Lane, f64)> = proposal_params
                .iter()
                .map(|&(gsel, dx, score)| {
                    let base = gt_xs[(gsel as usize).min(2)];
                    (Lane::full(vec![base + dx; k]), score)
                })
                .collect();
            let res = dynamic_assign(&proposals, &gts, &E, k_max).unwrap();
            let oracle = oracle_assign(&proposals, &gts, &E, k_max);
            for (pi, &expected) in oracle.iter().enumerate() {
                prop_assert_eq!(res.gt_of(pi), expected, "proposal {}", pi);
            }
        }

        // Invariants: determinism, coverage, per-gt claim bounds.
        #[test]
        fn structural_invariants(
            gt_xs in proptest::collection::vec(100.0..700.0f64, 1..4),
            proposal_params in proptest::collection::vec((-300.0..300.0f64, 0.1..1.0f64), 4..12),
            k_max in 1usize..5,
        ) {
            let k = 8;
            let gts: Vec<Lane> = gt_xs.iter().map(|&x| Lane::full(vec![x; k])).collect();
            let proposals: Vec<(Lane, f64)> = proposal_params
                .iter()
                .map(|&(dx, score)| (Lane::full(vec![gt_xs[0] + dx; k]), score))
                .collect();
            prop_assume!(proposals.len() >= gts.len());

            let res = dynamic_assign(&proposals, &gts, &E, k_max).unwrap();
            let rerun = dynamic_assign(&proposals, &gts, &E, k_max).unwrap();
            prop_assert_eq!(&res, &rerun);

            // No proposal on two gts; matches + negatives partition them.
            let mut seen = vec![0usize; proposals.len()];
            for &(pi, _) in &res.matches {
                seen[pi] += 1;
            }
            for &pi in &res.negatives {
                seen[pi] += 1;
            }
            prop_assert!(seen.iter().all(|&s| s == 1));

            for gi in 0..gts.len() {
                let n = res.proposals_of(gi).len();
                prop_assert!(n >= 1, "gt {} unmatched", gi);
                prop_assert!(n <= k_max);
            }
        }

        // Raising a matched proposal's score never turns it negative.
        #[test]
        fn score_monotonicity(
            gt_xs in proptest::collection::vec(100.0..700.0f64, 1..3),
            proposal_params in proptest::collection::vec((-200.0..200.0f64, 0.1..0.8f64), 4..10),
            bump in 0.01..0.2f64,
        ) {
            let k = 8;
            let gts: Vec<Lane> = gt_xs.iter().map(|&x| Lane::full(vec![x; k])).collect();
            let proposals: Vec<(Lane, f64)> = proposal_params
                .iter()
                .map(|&(dx, score)| (Lane::full(vec![gt_xs[0] + dx; k]), score))
                .collect();
            let res = dynamic_assign(&proposals, &gts, &E, 3).unwrap();
            for &(pi, _) in &res.matches {
                let mut bumped = proposals.clone();
                bumped[pi].1 = (bumped[pi].1 + bump).min(1.0);
                let res2 = dynamic_assign(&bumped, &gts, &E, 3).unwrap();
                prop_assert!(res2.gt_of(pi).is_some(), "proposal {} lost its match", pi);
            }
        }
    }
}
