//! Time-domain decomposition and the message transport between time workers.
//!
//! The solver talks to other workers only through [`Transport`]: tagged
//! point-to-point sends of packed buffers, plus gather/scatter/broadcast
//! rooted at one worker built on top of them. [`ThreadTransport`] connects
//! workers running as threads in one process; [`SerialTransport`] is the
//! single-worker case and never communicates.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::application::Application;
use crate::error::{MgritError, Result};
use crate::hierarchy::Hierarchy;

/// Which part of the algorithm a message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    FRelax,
    CRelax,
    /// Fine-level residual at C-points (stopping test and FAS restriction).
    Residual,
    /// Left neighbour on the coarse level during FAS restriction.
    CoarseBoundary,
    Collective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub level: usize,
    pub phase: Phase,
}

impl Tag {
    pub fn new(level: usize, phase: Phase) -> Self {
        Self { level, phase }
    }

    pub fn collective() -> Self {
        Self::new(usize::MAX, Phase::Collective)
    }
}

/// Message counters kept by a transport.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub sent: BTreeMap<Tag, usize>,
}

impl TransportStats {
    pub fn point_to_point(&self) -> usize {
        self.sent
            .iter()
            .filter(|(t, _)| t.phase != Phase::Collective)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn collective(&self) -> usize {
        self.sent
            .iter()
            .filter(|(t, _)| t.phase == Phase::Collective)
            .map(|(_, n)| n)
            .sum()
    }
}

/// Point-to-point messaging between time workers.
///
/// Messages between a pair of workers are delivered in send order; receives
/// name the expected tag so protocol drift is reported instead of silently
/// mixing up buffers.
pub trait Transport: Send {
    fn rank(&self) -> usize;

    fn size(&self) -> usize;

    fn send(&mut self, to: usize, tag: Tag, data: Vec<f64>) -> Result<()>;

    fn recv(&mut self, from: usize, tag: Tag) -> Result<Vec<f64>>;

    fn stats(&self) -> TransportStats;

    /// Every worker contributes `data`; the root gets them in rank order.
    fn gather(&mut self, root: usize, data: Vec<f64>) -> Result<Option<Vec<Vec<f64>>>> {
        let tag = Tag::collective();
        if self.rank() == root {
            let mut parts = Vec::with_capacity(self.size());
            for r in 0..self.size() {
                if r == root {
                    parts.push(data.clone());
                } else {
                    parts.push(self.recv(r, tag)?);
                }
            }
            Ok(Some(parts))
        } else {
            self.send(root, tag, data)?;
            Ok(None)
        }
    }

    /// The root supplies one buffer per rank; every worker gets its own.
    fn scatter(&mut self, root: usize, parts: Option<Vec<Vec<f64>>>) -> Result<Vec<f64>> {
        let tag = Tag::collective();
        if self.rank() == root {
            let parts = parts.ok_or_else(|| MgritError::Transport {
                context: "scatter".into(),
                reason: "root supplied no buffers".into(),
            })?;
            if parts.len() != self.size() {
                return Err(MgritError::Transport {
                    context: "scatter".into(),
                    reason: format!("{} buffers for {} workers", parts.len(), self.size()),
                });
            }
            let mut own = Vec::new();
            for (r, part) in parts.into_iter().enumerate() {
                if r == root {
                    own = part;
                } else {
                    self.send(r, tag, part)?;
                }
            }
            Ok(own)
        } else {
            self.recv(root, tag)
        }
    }

    fn broadcast(&mut self, root: usize, data: Option<Vec<f64>>) -> Result<Vec<f64>> {
        let parts = data.map(|d| vec![d; self.size()]);
        self.scatter(root, parts)
    }
}

/// The single-worker transport.
#[derive(Debug, Default, Clone)]
pub struct SerialTransport;

impl Transport for SerialTransport {
    fn rank(&self) -> usize {
        0
    }

    fn size(&self) -> usize {
        1
    }

    fn send(&mut self, to: usize, tag: Tag, _data: Vec<f64>) -> Result<()> {
        Err(MgritError::Transport {
            context: format!("{tag:?}"),
            reason: format!("single worker cannot send to rank {to}"),
        })
    }

    fn recv(&mut self, from: usize, tag: Tag) -> Result<Vec<f64>> {
        Err(MgritError::Transport {
            context: format!("{tag:?}"),
            reason: format!("single worker cannot receive from rank {from}"),
        })
    }

    fn stats(&self) -> TransportStats {
        TransportStats::default()
    }
}

type Message = (Tag, Vec<f64>);

/// In-process transport: one FIFO channel per ordered pair of workers.
pub struct ThreadTransport {
    rank: usize,
    size: usize,
    senders: Vec<Option<Sender<Message>>>,
    receivers: Vec<Option<Receiver<Message>>>,
    stats: TransportStats,
}

impl ThreadTransport {
    /// Fully connected set of `size` endpoints, indexed by rank.
    pub fn mesh(size: usize) -> Vec<ThreadTransport> {
        let mut endpoints: Vec<ThreadTransport> = (0..size)
            .map(|rank| ThreadTransport {
                rank,
                size,
                senders: (0..size).map(|_| None).collect(),
                receivers: (0..size).map(|_| None).collect(),
                stats: TransportStats::default(),
            })
            .collect();
        for from in 0..size {
            for to in 0..size {
                if from == to {
                    continue;
                }
                let (tx, rx) = channel();
                endpoints[from].senders[to] = Some(tx);
                endpoints[to].receivers[from] = Some(rx);
            }
        }
        endpoints
    }
}

impl Transport for ThreadTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn send(&mut self, to: usize, tag: Tag, data: Vec<f64>) -> Result<()> {
        let err = |reason: String| MgritError::Transport {
            context: format!(
                "level {} {:?}, rank {} -> {}",
                tag.level, tag.phase, self.rank, to
            ),
            reason,
        };
        let tx = self
            .senders
            .get(to)
            .and_then(Option::as_ref)
            .ok_or_else(|| err("no channel to that rank".into()))?;
        tx.send((tag, data))
            .map_err(|_| err("peer has shut down".into()))?;
        *self.stats.sent.entry(tag).or_default() += 1;
        Ok(())
    }

    fn recv(&mut self, from: usize, tag: Tag) -> Result<Vec<f64>> {
        let err = |reason: String| MgritError::Transport {
            context: format!(
                "level {} {:?}, rank {} <- {}",
                tag.level, tag.phase, self.rank, from
            ),
            reason,
        };
        let rx = self
            .receivers
            .get(from)
            .and_then(Option::as_ref)
            .ok_or_else(|| err("no channel from that rank".into()))?;
        let (got, data) = rx.recv().map_err(|_| err("peer has shut down".into()))?;
        if got != tag {
            return Err(err(format!("expected {tag:?}, got {got:?}")));
        }
        Ok(data)
    }

    fn stats(&self) -> TransportStats {
        self.stats.clone()
    }
}

/// Contiguous split of `n_points` indices over `n_workers`: the first
/// `n_points mod n_workers` workers get one extra point.
pub fn distribute_points(n_points: usize, n_workers: usize) -> Vec<Range<usize>> {
    assert!(n_workers > 0, "need at least one worker");
    let base = n_points / n_workers;
    let extra = n_points % n_workers;
    let mut lo = 0;
    (0..n_workers)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = lo..lo + len;
            lo += len;
            r
        })
        .collect()
}

/// Ownership of time points on every level.
///
/// The finest level is split evenly; a coarse point belongs to whoever owns
/// its image on the finer level, so coarse ranges stay contiguous and may be
/// empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeDecomposition {
    n_workers: usize,
    ranges: Vec<Vec<Range<usize>>>,
    owners: Vec<Vec<usize>>,
}

impl TimeDecomposition {
    /// `cf_maps[l]` lists, for each point of level `l + 1`, its index on level `l`.
    pub fn from_cf_maps(n_finest: usize, cf_maps: &[&[usize]], n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(MgritError::Decomposition("need at least one worker".into()));
        }
        let fine_ranges = distribute_points(n_finest, n_workers);
        let mut owner0 = vec![0; n_finest];
        for (w, r) in fine_ranges.iter().enumerate() {
            owner0[r.clone()].iter_mut().for_each(|o| *o = w);
        }
        let mut owners = vec![owner0];
        for (l, cf) in cf_maps.iter().enumerate() {
            let prev = &owners[l];
            let next = cf
                .iter()
                .map(|&i| {
                    prev.get(i).copied().ok_or_else(|| {
                        MgritError::Decomposition(format!(
                            "level {} maps to index {i} outside level {l}",
                            l + 1
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            owners.push(next);
        }
        let ranges = owners
            .iter()
            .map(|own| {
                (0..n_workers)
                    .map(|w| {
                        let lo = own.partition_point(|&o| o < w);
                        let hi = own.partition_point(|&o| o <= w);
                        lo..hi
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n_workers,
            ranges,
            owners,
        })
    }

    pub fn for_hierarchy<A: Application>(h: &Hierarchy<A>, n_workers: usize) -> Result<Self> {
        let maps: Vec<&[usize]> = h.levels()[..h.num_levels() - 1]
            .iter()
            .map(|l| l.cf_map())
            .collect();
        Self::from_cf_maps(h.level(0).len(), &maps, n_workers)
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn num_levels(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, level: usize, worker: usize) -> Range<usize> {
        self.ranges[level][worker].clone()
    }

    pub fn ranges(&self, level: usize) -> &[Range<usize>] {
        &self.ranges[level]
    }

    pub fn owner(&self, level: usize, index: usize) -> usize {
        self.owners[level][index]
    }

    /// Number of places on `level` where ownership changes hands.
    pub fn boundaries(&self, level: usize) -> usize {
        self.ranges[level]
            .iter()
            .filter(|r| !r.is_empty())
            .count()
            .saturating_sub(1)
    }

    /// Worker that runs the sequential coarsest-level solve: the lowest rank
    /// owning point 0 of the coarsest level.
    pub fn coarse_root(&self) -> usize {
        self.owners[self.owners.len() - 1][0]
    }
}

/// Rank bookkeeping for splitting a world of workers into space and time groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommunicatorSplit {
    pub world_size: usize,
    pub world_rank: usize,
    pub time_size: usize,
    pub time_rank: usize,
    pub space_size: usize,
    pub space_rank: usize,
}

impl CommunicatorSplit {
    /// World ranks sharing this worker's time communicator, in time-rank order.
    pub fn time_members(&self) -> Vec<usize> {
        (0..self.time_size)
            .map(|t| t * self.space_size + self.space_rank)
            .collect()
    }

    /// World ranks sharing this worker's space communicator, in space-rank order.
    pub fn space_members(&self) -> Vec<usize> {
        (0..self.space_size)
            .map(|s| self.time_rank * self.space_size + s)
            .collect()
    }
}

/// Workers with equal `rank mod space_size` form a time communicator; workers
/// with equal `rank div space_size` form a space communicator.
pub fn split_communicator(
    world_size: usize,
    world_rank: usize,
    space_size: usize,
) -> Result<CommunicatorSplit> {
    if space_size == 0 || world_size == 0 || !world_size.is_multiple_of(space_size) {
        return Err(MgritError::Decomposition(format!(
            "world size {world_size} is not divisible by space size {space_size}"
        )));
    }
    if world_rank >= world_size {
        return Err(MgritError::Decomposition(format!(
            "rank {world_rank} outside world of {world_size}"
        )));
    }
    Ok(CommunicatorSplit {
        world_size,
        world_rank,
        time_size: world_size / space_size,
        time_rank: world_rank / space_size,
        space_size,
        space_rank: world_rank % space_size,
    })
}
