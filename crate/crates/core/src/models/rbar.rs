use crate::error::{Error, Result};

/// Worst-case total headcount of one job: nominal total plus the `budget`
/// largest deviations.
///
/// With every deviation weight confined to `[0, 1]` and their sum to
/// `budget`, the linear maximum puts weight 1 on the largest deviations, so
/// sorting is exact for integral budgets.
pub fn compute_rbar(requirements: &[u32], deviations: &[u32], budget: usize) -> Result<u64> {
    if requirements.len() != deviations.len() {
        return Err(Error::validation(
            "r_hat",
            format!(
                "{} deviations for {} requirement cells",
                deviations.len(),
                requirements.len()
            ),
        ));
    }
    if budget > deviations.len() {
        return Err(Error::BudgetOutOfRange {
            budget,
            max: deviations.len(),
        });
    }
    let nominal: u64 = requirements.iter().map(|&r| u64::from(r)).sum();
    let mut sorted = deviations.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let extra: u64 = sorted.iter().take(budget).map(|&d| u64::from(d)).sum();
    Ok(nominal + extra)
}

/// [`compute_rbar`] over a `|K| x |L|` block.
pub fn compute_rbar_block(requirements: &[Vec<u32>], deviations: &[Vec<u32>], budget: usize) -> Result<u64> {
    let r: Vec<u32> = requirements.iter().flatten().copied().collect();
    let d: Vec<u32> = deviations.iter().flatten().copied().collect();
    compute_rbar(&r, &d, budget)
}
