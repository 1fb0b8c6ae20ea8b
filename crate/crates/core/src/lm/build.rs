//! Small counting utility that builds properly normalized back-off models
//! for synthetic benchmarks and test fixtures.

use rustc_hash::FxHashMap;

use super::{pack, Entry, NGramModel, WordId, MAX_ORDER};
use crate::error::{Error, Result};

/// Estimates an absolute-discounting back-off model from one continuous
/// word sequence.
///
/// Unigrams are add-one smoothed over the whole vocabulary. For higher
/// orders every seen n-gram keeps `(c - discount) / c(context)` and the
/// context's back-off weight redistributes exactly the left-over mass over
/// the unseen continuations, so each conditional distribution sums to one.
/// Total count of a context and its seen continuations.
type ContextCounts = (u64, Vec<(WordId, u64)>);

pub fn train_backoff(vocab: &[String], text: &[WordId], order: usize, discount: f64) -> Result<NGramModel> {
    if vocab.is_empty() {
        return Err(Error::InvalidInput("empty vocabulary".into()));
    }
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidInput(format!("unsupported order {order}")));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidInput(format!("discount {discount} outside [0, 1)")));
    }
    if let Some(&w) = text.iter().find(|&&w| w as usize >= vocab.len()) {
        return Err(Error::InvalidInput(format!("word id {w} outside the vocabulary")));
    }

    // counts[k - 1]: k-gram -> count
    let mut counts: Vec<FxHashMap<Vec<WordId>, u64>> = vec![FxHashMap::default(); order];
    for k in 1..=order {
        for gram in text.windows(k) {
            *counts[k - 1].entry(gram.to_vec()).or_default() += 1;
        }
    }

    let total = text.len() as f64;
    let v = vocab.len() as f64;
    let mut tables: Vec<FxHashMap<u128, Entry>> = vec![FxHashMap::default(); order];
    for id in 0..vocab.len() as WordId {
        let c = counts[0].get(&vec![id]).copied().unwrap_or(0) as f64;
        let p = (c + 1.0) / (total + v);
        tables[0].insert(
            pack(&[id]),
            Entry {
                prob: p.log10() as f32,
                backoff: 0.0,
            },
        );
    }

    for k in 2..=order {
        let mut by_context: FxHashMap<&[WordId], ContextCounts> = FxHashMap::default();
        for (gram, &c) in &counts[k - 1] {
            let slot = by_context.entry(&gram[..k - 1]).or_default();
            slot.0 += c;
            slot.1.push((gram[k - 1], c));
        }
        let mut contexts: Vec<_> = by_context.into_iter().collect();
        contexts.sort_unstable_by(|a, b| a.0.cmp(b.0));

        let partial = NGramModel::from_parts(vocab.to_vec(), tables.clone());
        for (context, (ctx_total, mut seen)) in contexts {
            seen.sort_unstable();
            let mut kept = 0.0f64;
            let mut lower = 0.0f64;
            for &(w, c) in &seen {
                let p = (c as f64 - discount) / ctx_total as f64;
                kept += p;
                lower += 10f64.powf(f64::from(partial.lm_score(&context[1..], w)));
                let mut gram = context.to_vec();
                gram.push(w);
                tables[k - 1].insert(
                    pack(&gram),
                    Entry {
                        prob: p.log10() as f32,
                        backoff: 0.0,
                    },
                );
            }
            let alpha = (1.0 - kept).max(0.0) / (1.0 - lower).max(1e-12);
            if alpha > 0.0 {
                if let Some(e) = tables[k - 2].get_mut(&pack(context)) {
                    e.backoff = alpha.log10() as f32;
                }
            }
        }
    }
    Ok(NGramModel::from_parts(vocab.to_vec(), tables))
}
