use std::collections::VecDeque;

use crate::amper::CandidateEntry;
use crate::fixed::PriorityValue;
use crate::replay::PriorityStore;

/// The `k` stored priorities closest to `query` over the whole store.
///
/// Ties in distance go to the lower slot. Results come out in order of
/// increasing `(distance, slot)`. Walks the store's value index outward
/// from `query`, so the cost is `O(log n + k)`.
pub fn knn_search(store: &PriorityStore, query: PriorityValue, k: usize) -> Vec<CandidateEntry> {
    let q = query.0;
    let index = store.sorted_index();
    let k = k.min(index.len());
    let mut out = Vec::with_capacity(k);
    let mut up = index.range((q, 0)..).copied().peekable();
    let mut down = index.range(..(q, 0)).rev().copied().peekable();
    // Entries sharing one value below `q`, re-ordered to ascending slot.
    let mut below: VecDeque<(u32, u32)> = VecDeque::new();

    while out.len() < k {
        if below.is_empty() {
            if let Some(&(v, _)) = down.peek() {
                let mut run = Vec::new();
                while let Some(&(w, s)) = down.peek() {
                    if w != v {
                        break;
                    }
                    run.push((w, s));
                    down.next();
                }
                below.extend(run.into_iter().rev());
            }
        }
        let take_up = match (up.peek(), below.front()) {
            (Some(&(uv, us)), Some(&(dv, ds))) => (uv - q, us) < (q - dv, ds),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let (v, s) = if take_up {
            up.next().unwrap()
        } else {
            below.pop_front().unwrap()
        };
        out.push(CandidateEntry {
            slot: s as usize,
            value: PriorityValue(v),
        });
    }
    out
}

/// Every stored priority with `|p - query| <= delta` (raw units), in slot
/// order.
pub fn frnn_search(store: &PriorityStore, query: PriorityValue, delta: u32) -> Vec<CandidateEntry> {
    let lo = query.0.saturating_sub(delta);
    let hi = query.0.saturating_add(delta);
    let mut out: Vec<CandidateEntry> = store
        .sorted_index()
        .range((lo, 0)..=(hi, u32::MAX))
        .map(|&(v, s)| CandidateEntry {
            slot: s as usize,
            value: PriorityValue(v),
        })
        .collect();
    out.sort_unstable_by_key(|e| e.slot);
    out
}
