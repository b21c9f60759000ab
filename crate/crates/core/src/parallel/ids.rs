//! Parallel consistent ID assignment by request/answer.
//!
//! Owned entities receive globally unique IDs from per-rank prefix
//! offsets of the owned counts. Non-owned entities send their
//! identifying payload to the owning rank, which resolves it to a local
//! entity and answers with its ID. All messages go through the simulated
//! transport so the exchange is observable and replayable.

use super::transport::{decode_u64s, encode_u64s, tag, Rank, SimTransport};
use crate::error::{Error, Result};

/// One entity participating in an ID exchange.
#[derive(Debug, Clone)]
pub struct IdItem {
    pub owner: Rank,
    /// Identifying payload, resolvable by the owner. Fixed width per
    /// entity kind.
    pub key: Vec<u64>,
}

/// Assign IDs across ranks. `items[p]` lists rank p's entities in local
/// index order; `locate(p, key)` is how rank p finds the local item index
/// for a payload it owns. Returns the IDs per rank and item.
pub fn communicate_ids(
    items: &[Vec<IdItem>],
    transport: &mut SimTransport,
    locate: impl Fn(Rank, &[u64]) -> Result<usize>,
) -> Result<Vec<Vec<u64>>> {
    let nr = items.len() as Rank;

    // Share owned counts (the allgather step).
    for p in 0..nr {
        let count = items[p as usize]
            .iter()
            .filter(|it| it.owner == p)
            .count() as u64;
        for q in 0..nr {
            if q != p {
                transport.send(p, q, tag::COUNTS, encode_u64s(&[count]));
            }
        }
    }
    let mut counts = vec![0u64; nr as usize];
    for p in 0..nr {
        counts[p as usize] = items[p as usize]
            .iter()
            .filter(|it| it.owner == p)
            .count() as u64;
        for q in 0..nr {
            if q != p {
                let c = decode_u64s(&transport.recv(q, p, tag::COUNTS)?)?;
                if c.len() != 1 || c[0] != items[q as usize].iter().filter(|it| it.owner == q).count() as u64 {
                    return Err(Error::protocol("owned count mismatch".to_string()));
                }
            }
        }
    }

    // Owned IDs: 1 + prefix sum of earlier ranks' counts, in item order.
    let mut ids: Vec<Vec<u64>> = items.iter().map(|v| vec![0u64; v.len()]).collect();
    for p in 0..nr as usize {
        let mut next: u64 = 1 + counts[..p].iter().sum::<u64>();
        for (i, it) in items[p].iter().enumerate() {
            if it.owner == p as Rank {
                ids[p][i] = next;
                next += 1;
            }
        }
    }

    // Requests: per rank, group non-owned items by owner. A request
    // message is a sequence of (item_index, key...) records.
    let mut key_width = None;
    for per in items {
        for it in per {
            match key_width {
                None => key_width = Some(it.key.len()),
                Some(w) => {
                    if w != it.key.len() {
                        return Err(Error::protocol("inconsistent key width".to_string()));
                    }
                }
            }
        }
    }
    let kw = key_width.unwrap_or(1);
    let mut requested: Vec<Vec<Vec<usize>>> =
        vec![vec![Vec::new(); nr as usize]; nr as usize];
    for p in 0..nr as usize {
        let mut payloads: Vec<Vec<u64>> = vec![Vec::new(); nr as usize];
        for (i, it) in items[p].iter().enumerate() {
            if it.owner != p as Rank {
                let o = it.owner as usize;
                requested[p][o].push(i);
                payloads[o].extend(&it.key);
            }
        }
        for o in 0..nr as usize {
            if o != p {
                transport.send(p as Rank, o as Rank, tag::REQUEST, encode_u64s(&payloads[o]));
            }
        }
    }

    // Answers: owners resolve each key and reply with IDs in order.
    for o in 0..nr as usize {
        for p in 0..nr as usize {
            if p == o {
                continue;
            }
            let keys = decode_u64s(&transport.recv(p as Rank, o as Rank, tag::REQUEST)?)?;
            let mut answer = Vec::with_capacity(keys.len() / kw.max(1));
            for key in keys.chunks(kw.max(1)) {
                let local = locate(o as Rank, key).map_err(|e| {
                    Error::protocol(format!(
                        "rank {o} cannot resolve payload {key:?} from rank {p}: {e}"
                    ))
                })?;
                let id = ids[o][local];
                if id == 0 {
                    return Err(Error::protocol(format!(
                        "rank {o} resolved payload {key:?} to an unowned entity"
                    )));
                }
                answer.push(id);
            }
            transport.send(o as Rank, p as Rank, tag::ANSWER, encode_u64s(&answer));
        }
    }
    for p in 0..nr as usize {
        for o in 0..nr as usize {
            if p == o {
                continue;
            }
            let answer = decode_u64s(&transport.recv(o as Rank, p as Rank, tag::ANSWER)?)?;
            if answer.len() != requested[p][o].len() {
                return Err(Error::protocol("answer length mismatch".to_string()));
            }
            for (slot, id) in requested[p][o].iter().zip(answer) {
                ids[p][*slot] = id;
            }
        }
    }
    transport.assert_drained()?;
    Ok(ids)
}
