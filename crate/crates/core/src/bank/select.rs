use super::{KernelBank, ModelPair};
use crate::error::{Error, Result};
use crate::gp::{log_marginal_likelihood, TimeSeriesWindow};

/// Outcome of [`select_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Pair assembled from the two winners; its id and provenance are the
    /// speed winner's.
    pub pair: ModelPair,
    /// Index into `bank.models` of the speed (or x) winner.
    pub speed_index: usize,
    /// Index into `bank.models` of the heading (or y) winner.
    pub heading_index: usize,
    pub speed_log_likelihood: f64,
    pub heading_log_likelihood: f64,
}

fn argmax(bank: &KernelBank, window: &TimeSeriesWindow, slot: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, u64, f64)> = None;
    for (i, m) in bank.models.iter().enumerate() {
        let model = if slot == 0 { &m.speed_model } else { &m.heading_model };
        let Ok(ll) = log_marginal_likelihood(window, &model.hyperparams()) else {
            continue;
        };
        if !ll.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, id, b)) => ll > b || (ll == b && m.id < id),
        };
        if better {
            best = Some((i, m.id, ll));
        }
    }
    best.map(|(i, _, ll)| (i, ll))
}

/// Picks, independently per series, the bank model with the highest
/// marginal log-likelihood on the window. Ties go to the lowest id.
pub fn select_model(bank: &KernelBank, first: &TimeSeriesWindow, second: &TimeSeriesWindow) -> Result<Selection> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if first.times() != second.times() {
        return Err(Error::InvalidArgument("selection windows must share timestamps".into()));
    }
    let (si, sll) = argmax(bank, first, 0).ok_or(Error::BankSelection)?;
    let (hi, hll) = argmax(bank, second, 1).ok_or(Error::BankSelection)?;
    let s = &bank.models[si];
    Ok(Selection {
        pair: ModelPair {
            id: s.id,
            speed_model: s.speed_model,
            heading_model: bank.models[hi].heading_model,
            created_at: s.created_at.clone(),
            usage_count: s.usage_count,
        },
        speed_index: si,
        heading_index: hi,
        speed_log_likelihood: sll,
        heading_log_likelihood: hll,
    })
}
