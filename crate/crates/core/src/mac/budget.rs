//! Inter-slice tier: turns RRM policies and per-slice demand into a PRB
//! budget per slice for one slot.
//!
//! Three stages, in order:
//!
//! 1. dedicated PRBs are reserved for every slice, demand or not;
//! 2. slices with demand are topped up to `min(guarantee, demand, cap)`,
//!    scaled down by largest remainder when the pool cannot cover everyone;
//! 3. the remaining pool goes one PRB at a time to the slice with unmet demand,
//!    room under its cap and the best `demand_rate / pf_avg` metric.

use std::collections::BTreeMap;

use crate::model::{RrmPolicyRatio, SliceConfig, Snssai};

/// Floor used in every proportional-fair denominator, in bits per second.
pub const PF_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceBudget {
    pub snssai: Snssai,
    pub dedicated_prbs: u32,
    /// PRBs the slice may use this slot, including its dedicated reservation.
    pub granted_prbs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceState {
    pub config: SliceConfig,
    /// Slice-aggregate EWMA of served rate, bits per second.
    pub pf_avg_bps: f64,
}

impl SliceState {
    pub fn new(config: SliceConfig) -> Self {
        Self { config, pf_avg_bps: 0.0 }
    }

    pub fn snssai(&self) -> Snssai {
        self.config.snssai
    }

    pub fn policy(&self) -> RrmPolicyRatio {
        self.config.policy
    }
}

/// What a slice asks for this slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SliceDemand {
    /// PRBs needed to drain every backlog of the slice.
    pub prbs: u64,
    /// Rate the slice would carry if its PRB demand were served; the
    /// numerator of the shared-pool PF metric.
    pub rate_bps: f64,
}

impl SliceDemand {
    pub fn new(prbs: u64, rate_bps: f64) -> Self {
        Self { prbs, rate_bps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum BudgetError {
    #[error("cell has zero PRBs")]
    TotalPrbsZero,
}

/// Computes per-slice budgets, returned in ascending S-NSSAI order.
///
/// Slices missing from `demand` are treated as idle.
pub fn compute_slice_budgets(
    slices: &[SliceState],
    demand: &BTreeMap<Snssai, SliceDemand>,
    total_prbs: u32,
) -> Result<Vec<SliceBudget>, BudgetError> {
    if total_prbs == 0 {
        return Err(BudgetError::TotalPrbsZero);
    }
    let mut order: Vec<&SliceState> = slices.iter().collect();
    order.sort_by_key(|s| s.snssai());
    let want: Vec<SliceDemand> =
        order.iter().map(|s| demand.get(&s.snssai()).copied().unwrap_or_default()).collect();

    // stage 1
    let mut budgets: Vec<SliceBudget> = order
        .iter()
        .map(|s| {
            let d = s.policy().dedicated_prbs(total_prbs);
            SliceBudget { snssai: s.snssai(), dedicated_prbs: d, granted_prbs: d }
        })
        .collect();
    let reserved: u32 = budgets.iter().map(|b| b.granted_prbs).sum();
    let mut pool = total_prbs.saturating_sub(reserved);

    // stage 2
    let shortfall: Vec<u32> = order
        .iter()
        .zip(&want)
        .zip(&budgets)
        .map(|((s, w), b)| {
            if w.prbs == 0 {
                return 0;
            }
            let p = s.policy();
            let target = u64::from(p.min_prbs(total_prbs))
                .min(w.prbs)
                .min(u64::from(p.max_prbs(total_prbs))) as u32;
            target.saturating_sub(b.granted_prbs)
        })
        .collect();
    let total_short: u32 = shortfall.iter().sum();
    if total_short <= pool {
        for (b, s) in budgets.iter_mut().zip(&shortfall) {
            b.granted_prbs += s;
        }
        pool -= total_short;
    } else {
        let shares = largest_remainder(pool, &shortfall);
        for (b, s) in budgets.iter_mut().zip(shares) {
            b.granted_prbs += s;
        }
        pool = 0;
    }

    // stage 3
    let caps: Vec<u32> = order.iter().map(|s| s.policy().max_prbs(total_prbs)).collect();
    let avgs: Vec<f64> = order.iter().map(|s| s.pf_avg_bps).collect();
    fill_shared_pool(&mut budgets, pool, &want, &caps, &avgs);
    Ok(budgets)
}

/// Splits `pool` proportionally to `weights` (whose sum exceeds `pool`),
/// flooring each share and handing the leftover units to the largest
/// remainders. Ties go to the lower index.
fn largest_remainder(pool: u32, weights: &[u32]) -> Vec<u32> {
    let total: u64 = weights.iter().map(|&w| u64::from(w)).sum();
    let mut shares = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let num = u64::from(pool) * u64::from(w);
        shares.push((num / total) as u32);
        remainders.push((num % total, i));
    }
    let leftover = pool - shares.iter().sum::<u32>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover as usize) {
        shares[i] += 1;
    }
    shares
}

/// Stage 3. With a per-call static metric, handing out PRBs one at a time is
/// the same as filling slices in metric order, which is what this does.
pub(crate) fn fill_shared_pool(
    budgets: &mut [SliceBudget],
    mut pool: u32,
    want: &[SliceDemand],
    caps: &[u32],
    avgs: &[f64],
) {
    let mut order: Vec<usize> = (0..budgets.len()).collect();
    let metric = |i: usize| want[i].rate_bps / avgs[i].max(PF_EPSILON);
    // stable sort keeps S-NSSAI order among equal metrics
    order.sort_by(|&a, &b| metric(b).total_cmp(&metric(a)));
    for i in order {
        if pool == 0 {
            break;
        }
        let limit = want[i].prbs.min(u64::from(caps[i]));
        let room = limit.saturating_sub(u64::from(budgets[i].granted_prbs)) as u32;
        let take = room.min(pool);
        budgets[i].granted_prbs += take;
        pool -= take;
    }
}
