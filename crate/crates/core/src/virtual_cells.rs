//! User affiliation and assembly of virtual cells.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Clustering;
use crate::scenario::{ChannelRealization, Deployment};

/// Rule deciding which BS (and therefore which virtual cell) a user joins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Affiliation {
    Closest,
    BestChannel,
}

impl Affiliation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Affiliation::Closest => "closest",
            Affiliation::BestChannel => "best-channel",
        }
    }
}

/// How the per-band gains of a (user, BS) pair are reduced to one number
/// for the best-channel rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelQuality {
    #[default]
    MaxOverBands,
    MeanOverBands,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VirtualCell {
    /// Global BS indices, ascending.
    pub bs: Vec<usize>,
    /// Global user indices, ascending. May be empty.
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualCellPartition {
    pub cells: Vec<VirtualCell>,
    pub rule: Affiliation,
}

impl VirtualCellPartition {
    pub fn m(&self) -> usize {
        self.cells.len()
    }

    /// Builds the cells from a BS clustering and each user's serving BS.
    pub fn from_serving_bs(clustering: &Clustering, serving: &[usize], rule: Affiliation) -> Self {
        let mut cells: Vec<VirtualCell> = clustering
            .members()
            .into_iter()
            .map(|bs| VirtualCell { bs, users: Vec::new() })
            .collect();
        for (u, &b) in serving.iter().enumerate() {
            cells[clustering.labels[b]].users.push(u);
        }
        VirtualCellPartition { cells, rule }
    }
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Each user joins the cell of its nearest BS; ties go to the lowest BS index.
pub fn affiliate_closest(dep: &Deployment, clustering: &Clustering) -> VirtualCellPartition {
    let serving: Vec<usize> = dep
        .user_positions
        .iter()
        .map(|u| argmax_lowest(dep.bs_positions.iter().map(|b| -u.distance(b))))
        .collect();
    VirtualCellPartition::from_serving_bs(clustering, &serving, Affiliation::Closest)
}

/// Each user joins the cell of the BS with the best scalarized channel gain;
/// ties go to the lowest BS index.
pub fn affiliate_best_channel(
    chan: &ChannelRealization,
    clustering: &Clustering,
    quality: ChannelQuality,
) -> VirtualCellPartition {
    let (nu, nb, nk) = (chan.num_users(), chan.num_bs(), chan.num_bands());
    let serving: Vec<usize> = (0..nu)
        .map(|u| {
            argmax_lowest((0..nb).map(|b| {
                let gains = (0..nk).map(|k| chan.gain.at(u, b, k));
                match quality {
                    ChannelQuality::MaxOverBands => gains.fold(f64::NEG_INFINITY, f64::max),
                    ChannelQuality::MeanOverBands => gains.sum::<f64>() / nk as f64,
                }
            }))
        })
        .collect();
    VirtualCellPartition::from_serving_bs(clustering, &serving, Affiliation::BestChannel)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionViolation {
    #[error("BS {0} is not in any cell")]
    MissingBs(usize),
    #[error("BS {0} appears in more than one cell")]
    DuplicateBs(usize),
    #[error("BS index {0} out of range")]
    UnknownBs(usize),
    #[error("user {0} is not in any cell")]
    MissingUser(usize),
    #[error("user {0} appears in more than one cell")]
    DuplicateUser(usize),
    #[error("user index {0} out of range")]
    UnknownUser(usize),
    #[error("cell {0} has no BS")]
    EmptyCell(usize),
}

fn check_cover<'a>(
    sets: impl Iterator<Item = &'a [usize]>,
    n: usize,
    unknown: fn(usize) -> PartitionViolation,
    duplicate: fn(usize) -> PartitionViolation,
    missing: fn(usize) -> PartitionViolation,
) -> Result<(), PartitionViolation> {
    let mut seen = vec![false; n];
    for set in sets {
        for &i in set {
            if i >= n {
                return Err(unknown(i));
            }
            if seen[i] {
                return Err(duplicate(i));
            }
            seen[i] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(missing(i)),
        None => Ok(()),
    }
}

/// Checks that the BS sets and the user sets each partition their universe.
pub fn validate_partition(
    p: &VirtualCellPartition,
    num_bs: usize,
    num_users: usize,
) -> Result<(), PartitionViolation> {
    if let Some(c) = p.cells.iter().position(|c| c.bs.is_empty()) {
        return Err(PartitionViolation::EmptyCell(c));
    }
    check_cover(
        p.cells.iter().map(|c| c.bs.as_slice()),
        num_bs,
        PartitionViolation::UnknownBs,
        PartitionViolation::DuplicateBs,
        PartitionViolation::MissingBs,
    )?;
    check_cover(
        p.cells.iter().map(|c| c.users.as_slice()),
        num_users,
        PartitionViolation::UnknownUser,
        PartitionViolation::DuplicateUser,
        PartitionViolation::MissingUser,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Point;
    use crate::tensor::{Matrix, Tensor3};

    fn two_bs_split() -> Clustering {
        Clustering { labels: vec![0, 1], m: 2 }
    }

    #[test]
    fn closest_rule_and_ties() {
        let dep = Deployment {
            bs_positions: vec![Point::new(1.0, 0.0), Point::new(5.0, 0.0)],
            user_positions: vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(6.0, 0.0)],
        };
        let p = affiliate_closest(&dep, &two_bs_split());
        assert_eq!(p.cells[0].users, vec![0, 1]);
        assert_eq!(p.cells[1].users, vec![2]);
        assert_eq!(validate_partition(&p, 2, 3), Ok(()));

        let single = Clustering { labels: vec![0, 0], m: 1 };
        let p = affiliate_closest(&dep, &single);
        assert_eq!(p.cells.len(), 1);
        assert_eq!(p.cells[0].users, vec![0, 1, 2]);
    }

    fn toy_channel(rows: &[[f64; 2]]) -> ChannelRealization {
        ChannelRealization {
            gain: Tensor3::from_fn([rows.len(), 2, 1], |u, b, _| rows[u][b]),
            noise: Matrix::from_fn(2, 1, |_, _| 1.0),
        }
    }

    #[test]
    fn best_channel_matches_exhaustive_scan() {
        let rows = [[0.3, 0.7], [0.9, 0.1], [0.5, 0.5]];
        let ch = toy_channel(&rows);
        let p = affiliate_best_channel(&ch, &two_bs_split(), ChannelQuality::MaxOverBands);
        for (u, r) in rows.iter().enumerate() {
            // Exhaustive: first index attaining the maximum.
            let mut best = 0;
            for b in 0..2 {
                if r[b] > r[best] {
                    best = b;
                }
            }
            assert!(p.cells[best].users.contains(&u));
        }
        // Equal gains -> lowest index.
        assert!(p.cells[0].users.contains(&2));
    }

    #[test]
    fn best_channel_scalarization_variants() {
        // BS 0 has the single best band, BS 1 the better average.
        let ch = ChannelRealization {
            gain: Tensor3::from_vec([1, 2, 2], vec![1.0, 0.0, 0.6, 0.6]).unwrap(),
            noise: Matrix::from_fn(2, 2, |_, _| 1.0),
        };
        let max = affiliate_best_channel(&ch, &two_bs_split(), ChannelQuality::MaxOverBands);
        let mean = affiliate_best_channel(&ch, &two_bs_split(), ChannelQuality::MeanOverBands);
        assert_eq!(max.cells[0].users, vec![0]);
        assert_eq!(mean.cells[1].users, vec![0]);
    }

    #[test]
    fn violations_are_reported() {
        let mut p = VirtualCellPartition {
            cells: vec![
                VirtualCell { bs: vec![0], users: vec![0, 1] },
                VirtualCell { bs: vec![1], users: vec![1] },
            ],
            rule: Affiliation::Closest,
        };
        assert_eq!(validate_partition(&p, 2, 2), Err(PartitionViolation::DuplicateUser(1)));
        p.cells[1].users.clear();
        assert_eq!(validate_partition(&p, 2, 2), Ok(()));
        assert_eq!(validate_partition(&p, 3, 2), Err(PartitionViolation::MissingBs(2)));
        assert_eq!(validate_partition(&p, 2, 3), Err(PartitionViolation::MissingUser(2)));
        p.cells[1].bs.clear();
        assert_eq!(validate_partition(&p, 2, 2), Err(PartitionViolation::EmptyCell(1)));
    }
}
