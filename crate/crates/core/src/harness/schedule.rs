//! Epoch-level learning-rate decay and early stopping, both driven by the
//! running best of a reward history (oldest first).

/// Index of the first strict maximum, or `None` for an empty history.
fn best_index(history: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &r) in history.iter().enumerate() {
        if best.is_none_or(|b| r > history[b]) {
            best = Some(i);
        }
    }
    best
}

/// Multiplies `lr` by `scale` (floored at `min`) when the latest reward does
/// not improve on the best reward seen before it.
pub fn adapt_learning_rate(history: &[f64], lr: f64, scale: f64, min: f64) -> f64 {
    let Some((&latest, earlier)) = history.split_last() else {
        return lr;
    };
    match best_index(earlier) {
        Some(b) if latest <= earlier[b] => (lr * scale).max(min),
        _ => lr,
    }
}

/// True once `patience` consecutive epochs have passed without a strict
/// improvement over the best reward.
pub fn early_stop(history: &[f64], patience: usize) -> bool {
    match best_index(history) {
        Some(b) => history.len() - 1 - b >= patience,
        None => false,
    }
}
