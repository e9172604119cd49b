use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vcell::channel::{bsc_allocation, msrm_allocation, uc_allocation};
use vcell::clustering::{cut_dendrogram, hierarchical_cluster, Clustering};
use vcell::power::{solve_power_continuous, SolverSettings};
use vcell::rate::{cell_sum_rate, system_sum_rate, CellSolution, CellView, ChannelAssignment, EvalMode, PowerMatrix};
use vcell::scenario::{generate_channels, generate_deployment, ChannelRealization, Deployment, Point, SystemConfig};
use vcell::tensor::{Matrix, Tensor3};
use vcell::virtual_cells::{affiliate_best_channel, affiliate_closest, validate_partition, ChannelQuality};

fn points(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 1..=max)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point { x, y }).collect())
}

fn view_strategy() -> impl Strategy<Value = (CellView, Matrix)> {
    (1usize..=4, 1usize..=3, 1usize..=3).prop_flat_map(|(nu, nb, nk)| {
        (
            prop::collection::vec(1e-3..10.0f64, nu * nb * nk),
            prop::collection::vec(0.1..2.0f64, nb * nk),
            prop::collection::vec(0.5..5.0f64, nu),
            prop::collection::vec(0.0..1.0f64, nu * nk),
        )
            .prop_map(move |(gain, noise, budgets, share)| {
                let view = CellView::from_parts(
                    Tensor3::from_vec([nu, nb, nk], gain).unwrap(),
                    Matrix::from_fn(nb, nk, |b, k| noise[b * nk + k]),
                    vec![1.0; nk],
                    budgets.clone(),
                );
                let p = Matrix::from_fn(nu, nk, |u, k| budgets[u] * share[u * nk + k] / nk as f64);
                (view, p)
            })
    })
}

fn network(seed: u64, num_bs: usize, num_users: usize) -> (SystemConfig, Deployment, ChannelRealization) {
    let cfg = SystemConfig { num_bs, num_users, num_bands: 2, ..SystemConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dep = generate_deployment(&cfg, &mut rng);
    let chan = generate_channels(&cfg, &dep, &mut rng);
    (cfg, dep, chan)
}

fn random_clustering(labels: &[usize]) -> Clustering {
    Clustering::from_raw_labels(labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merge_linkages_never_decrease(pts in points(12)) {
        let d = hierarchical_cluster(&pts);
        prop_assert_eq!(d.merges.len(), pts.len() - 1);
        for w in d.merges.windows(2) {
            prop_assert!(w[0].linkage <= w[1].linkage);
        }
    }

    #[test]
    fn every_cut_has_m_nonempty_clusters(pts in points(12)) {
        let d = hierarchical_cluster(&pts);
        for m in 1..=pts.len() {
            let c = cut_dendrogram(&d, m).unwrap();
            let members = c.members();
            prop_assert_eq!(members.len(), m);
            prop_assert!(members.iter().all(|g| !g.is_empty()));
            prop_assert_eq!(members.iter().map(Vec::len).sum::<usize>(), pts.len());
        }
    }

    #[test]
    fn uc_gives_each_user_one_bs_per_band((view, p) in view_strategy()) {
        let g = uc_allocation(&view, &p);
        let [nu, nb, nk] = view.dims();
        for u in 0..nu {
            for k in 0..nk {
                prop_assert_eq!((0..nb).filter(|&b| g.is_set(u, b, k)).count(), 1);
            }
        }
    }

    #[test]
    fn bsc_gives_each_bs_one_user_per_band((view, p) in view_strategy()) {
        let g = bsc_allocation(&view, &p);
        let [nu, nb, nk] = view.dims();
        for b in 0..nb {
            for k in 0..nk {
                prop_assert_eq!((0..nu).filter(|&u| g.is_set(u, b, k)).count(), 1);
            }
        }
    }

    #[test]
    fn msrm_is_a_matching_per_band((view, p) in view_strategy()) {
        let g = msrm_allocation(&view, &p);
        let [nu, nb, nk] = view.dims();
        prop_assert!(g.is_feasible());
        for b in 0..nb {
            for k in 0..nk {
                prop_assert!((0..nu).filter(|&u| g.is_set(u, b, k)).count() <= 1);
            }
        }
    }

    #[test]
    fn cell_rate_ignores_user_order((view, p) in view_strategy(), rot in 0usize..4) {
        let g = msrm_allocation(&view, &p);
        let [nu, nb, nk] = view.dims();
        let perm: Vec<usize> = (0..nu).map(|i| (i + rot) % nu).collect();
        let permuted = CellView::from_parts(
            Tensor3::from_fn([nu, nb, nk], |u, b, k| view.gain.at(perm[u], b, k)),
            view.noise.clone(),
            view.band_widths.clone(),
            perm.iter().map(|&u| view.budgets[u]).collect(),
        );
        let mut pg = ChannelAssignment::empty([nu, nb, nk]);
        for u in 0..nu {
            for b in 0..nb {
                for k in 0..nk {
                    pg.gamma.set(u, b, k, g.is_set(perm[u], b, k));
                }
            }
        }
        let pp = Matrix::from_fn(nu, nk, |u, k| p.at(perm[u], k));
        let a = cell_sum_rate(&view, &g, &p);
        let b = cell_sum_rate(&permuted, &pg, &pp);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn continuous_solution_respects_budgets((view, _p) in view_strategy()) {
        let sol = solve_power_continuous(&view, &SolverSettings::default(), None).unwrap();
        for (u, &budget) in view.budgets.iter().enumerate() {
            prop_assert!(sol.power.user_total(u) <= budget * (1.0 + 1e-6));
        }
        prop_assert!(sol.power.p.as_slice().iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!(sol.rate.is_finite() && sol.rate >= 0.0);
    }

    #[test]
    fn affiliations_yield_valid_partitions(
        seed in any::<u64>(),
        nb in 1usize..=8,
        nu in 0usize..=20,
        raw in prop::collection::vec(0usize..8, 8),
    ) {
        let (_, dep, chan) = network(seed, nb, nu);
        let clustering = random_clustering(&raw[..nb]);
        for partition in [
            affiliate_closest(&dep, &clustering),
            affiliate_best_channel(&chan, &clustering, ChannelQuality::MaxOverBands),
            affiliate_best_channel(&chan, &clustering, ChannelQuality::MeanOverBands),
        ] {
            prop_assert!(validate_partition(&partition, nb, nu).is_ok());
            prop_assert_eq!(partition.m(), clustering.members().len());
        }
    }

    #[test]
    fn closest_user_sits_with_its_nearest_bs(seed in any::<u64>(), raw in prop::collection::vec(0usize..4, 6)) {
        let (_, dep, _) = network(seed, 6, 15);
        let clustering = random_clustering(&raw);
        let partition = affiliate_closest(&dep, &clustering);
        for cell in &partition.cells {
            for &u in &cell.users {
                let up = &dep.user_positions[u];
                let nearest = (0..6)
                    .min_by(|&a, &b| up.distance(&dep.bs_positions[a]).total_cmp(&up.distance(&dep.bs_positions[b])))
                    .unwrap();
                prop_assert!(cell.bs.contains(&nearest));
            }
        }
    }

    #[test]
    fn affiliation_ignores_cluster_label_names(seed in any::<u64>(), raw in prop::collection::vec(0usize..4, 6), shift in 1usize..4) {
        let (_, dep, chan) = network(seed, 6, 15);
        let a = random_clustering(&raw);
        let relabelled: Vec<usize> = raw.iter().map(|l| (l + shift) % 4).collect();
        let b = random_clustering(&relabelled);
        let sorted = |p: vcell::VirtualCellPartition| {
            let mut cells = p.cells;
            cells.sort_by(|x, y| x.bs.cmp(&y.bs));
            cells
        };
        prop_assert_eq!(sorted(affiliate_closest(&dep, &a)), sorted(affiliate_closest(&dep, &b)));
        prop_assert_eq!(
            sorted(affiliate_best_channel(&chan, &a, ChannelQuality::MaxOverBands)),
            sorted(affiliate_best_channel(&chan, &b, ChannelQuality::MaxOverBands))
        );
    }

    #[test]
    fn global_rate_never_exceeds_local(
        seed in any::<u64>(),
        raw in prop::collection::vec(0usize..3, 5),
        levels in prop::collection::vec(0.0..1.0f64, 5 * 8 * 2),
    ) {
        let (cfg, dep, chan) = network(seed, 5, 8);
        let clustering = random_clustering(&raw);
        let partition = affiliate_closest(&dep, &clustering);
        let budgets = cfg.budgets_mw();
        let solutions: Vec<CellSolution> = partition
            .cells
            .iter()
            .map(|cell| {
                let dims = [cell.users.len(), cell.bs.len(), 2];
                let p = Tensor3::from_fn(dims, |u, b, k| {
                    budgets[cell.users[u]] * levels[(cell.users[u] * 5 + cell.bs[b]) * 2 + k] / 10.0
                });
                CellSolution { power: PowerMatrix { p }, gamma: None }
            })
            .collect();
        let widths = cfg.band_widths();
        let global = system_sum_rate(&partition, &chan, &widths, &solutions, EvalMode::Global);
        let local = system_sum_rate(&partition, &chan, &widths, &solutions, EvalMode::Local);
        prop_assert!(global <= local * (1.0 + 1e-12));
    }
}
