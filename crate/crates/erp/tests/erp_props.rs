use std::collections::HashSet;

use erp_regress::cluster::{find_clusters, group_t, permutation_seed};
use erp_regress::lrt::subject_dummies;
use erp_regress::*;

fn small_spec(seed: u64, amplitude: f64) -> SynthSpec {
    SynthSpec {
        subjects: 12,
        epochs_per_subject: 60,
        montage: grid16(),
        sample_rate: 50.0,
        predictors: vec!["x".into(), "c1".into()],
        effect: Some(Effect {
            predictor: "x".into(),
            channels: ["P3", "P1", "P2", "P4"].iter().map(|s| s.to_string()).collect(),
            tmin: 0.3,
            tmax: 0.5,
            amplitude,
        }),
        seed,
        ..SynthSpec::default()
    }
}

fn cfg(n_perm: usize, seed: u64) -> ClusterConfig {
    ClusterConfig {
        n_perm,
        seed,
        ..ClusterConfig::default()
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let c: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    c / (vx * vy).sqrt()
}

fn site(e: &EpochSet) -> HashSet<(usize, usize)> {
    let w = e.window(0.3, 0.5).unwrap();
    let mut s = HashSet::new();
    for ch in ["P3", "P1", "P2", "P4"] {
        let c = e.channel_index(ch).unwrap();
        for t in w.clone() {
            s.insert((c, t));
        }
    }
    s
}

#[test]
fn synth_defaults_and_zero_amplitude() {
    let d = SynthSpec::default();
    assert_eq!(d.montage.channels.len(), 61);
    assert_eq!(d.sample_rate, 500.0);
    assert_eq!((d.tmin, d.tmax), (-0.3, 1.0));

    let spec = SynthSpec {
        subjects: 20,
        epochs_per_subject: 100,
        sample_rate: 20.0,
        ..small_spec(5, 0.0)
    };
    let e = synth_epochs(&spec).unwrap();
    assert_eq!(e.n_epochs(), 2000);
    let x = e.meta.column("x").unwrap();
    let c = e.channel_index("P1").unwrap();
    let t = e.window(0.4, 0.4).unwrap().start;
    let y: Vec<f64> = (0..2000).map(|i| e.value(i, c, t)).collect();
    assert!(pearson(x, &y).abs() < 0.05);

    let strong = synth_epochs(&small_spec(5, 1.0)).unwrap();
    let x = strong.meta.column("x").unwrap();
    let t = strong.window(0.4, 0.4).unwrap().start;
    let y: Vec<f64> = (0..strong.n_epochs()).map(|i| strong.value(i, c, t)).collect();
    assert!(pearson(x, &y) > 0.3);
}

#[test]
fn bundle_round_trip() {
    let e = synth_epochs(&small_spec(1, 0.5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    e.save(dir.path()).unwrap();
    assert_eq!(EpochSet::load(dir.path()).unwrap(), e);
}

#[test]
fn exact_linear_data_is_recovered() {
    let spec = SynthSpec {
        subjects: 1,
        noise_sd: 0.0,
        subject_sd: 0.0,
        effect: None,
        ..small_spec(2, 0.0)
    };
    let mut e = synth_epochs(&spec).unwrap();
    let d = build_design(&e.meta, Some("x"), &["c1"]).unwrap();
    // y = 1.5 - 2 x_c + 0.25 c1_c at every cell, scaled by channel
    for i in 0..e.n_epochs() {
        let row = [1.5, -2.0 * d.values[(i, 2)], 0.25 * d.values[(i, 1)]];
        let base: f64 = row.iter().sum();
        for c in 0..e.n_channels {
            for t in 0..e.n_times {
                e.data[(i * e.n_channels + c) * e.n_times + t] = base * (c + 1) as f64;
            }
        }
    }
    let fit = fit_pointwise(&e, &d).unwrap();
    for c in 0..e.n_channels {
        let s = (c + 1) as f64;
        assert!((fit.beta(c, 7, 0) - 1.5 * s).abs() < 1e-8);
        assert!((fit.beta(c, 7, 1) - 0.25 * s).abs() < 1e-8);
        assert!((fit.beta(c, 7, 2) + 2.0 * s).abs() < 1e-8);
    }
    assert!(fit.rss.iter().all(|&r| r < 1e-12));
}

#[test]
fn single_predictor_slope_and_orthogonal_residuals() {
    let e = synth_epochs(&SynthSpec {
        subjects: 1,
        ..small_spec(3, 0.7)
    })
    .unwrap();
    let x = e.meta.column("x").unwrap();
    let d = build_design(&e.meta, Some("x"), &[]).unwrap();
    let fit = fit_pointwise(&e, &d).unwrap();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    for (c, t) in [(0, 0), (9, 20), (15, 64)] {
        let y: Vec<f64> = (0..e.n_epochs()).map(|i| e.value(i, c, t)).collect();
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let var: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        assert!((fit.beta(c, t, 1) - cov / var).abs() < 1e-12);
    }
    let full = build_design(&e.meta, Some("x"), &["c1"]).unwrap();
    let fit = fit_pointwise(&e, &full).unwrap();
    let mut dots = vec![vec![0.0; e.epoch_len()]; full.cols()];
    let mut norm = vec![0.0; e.epoch_len()];
    for i in 0..e.n_epochs() {
        let r = fit.residuals(&e, &full, i);
        for (k, dk) in dots.iter_mut().enumerate() {
            for (a, b) in dk.iter_mut().zip(&r) {
                *a += full.values[(i, k)] * b;
            }
        }
        for (a, y) in norm.iter_mut().zip(e.epoch(i)) {
            *a += y * y;
        }
    }
    for dk in &dots {
        for (a, s) in dk.iter().zip(&norm) {
            assert!(a.abs() < 1e-6 * s.sqrt() * (n).sqrt());
        }
    }
    assert!(fit.ar1.abs() < 0.1);
}

#[test]
fn noise_betas_center_on_zero() {
    let mut betas = Vec::new();
    for rep in 0..200 {
        let e = synth_epochs(&SynthSpec {
            subjects: 1,
            epochs_per_subject: 50,
            sample_rate: 4.0,
            ..small_spec(1000 + rep, 0.0)
        })
        .unwrap();
        let d = build_design(&e.meta, Some("x"), &["c1"]).unwrap();
        betas.push(fit_pointwise(&e, &d).unwrap().beta(5, 2, 2));
    }
    let n = betas.len() as f64;
    let m = betas.iter().sum::<f64>() / n;
    let sd = (betas.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(m.abs() < 3.0 * sd / n.sqrt(), "{m} {sd}");
}

#[test]
fn rank_deficiency_names_columns() {
    let mut e = synth_epochs(&SynthSpec {
        subjects: 1,
        ..small_spec(4, 0.0)
    })
    .unwrap();
    let x: Vec<f64> = e.meta.column("x").unwrap().iter().map(|v| 3.0 * v + 1.0).collect();
    e.meta.set_column("x3", x).unwrap();
    let d = build_design(&e.meta, Some("x3"), &["x", "c1"]).unwrap();
    match fit_pointwise(&e, &d) {
        Err(ErpError::RankDeficient { column, with }) => {
            assert_eq!(column, "x3");
            assert_eq!(with, vec!["x"]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn null_max_matches_explicit_permuted_refits() {
    let e = synth_epochs(&small_spec(6, 0.4)).unwrap();
    let adj = Adjacency::of(&e).unwrap();
    let c = cfg(100, 17);
    let res = cluster_permutation_test(&e, "x", &["c1"], &adj, &c).unwrap();
    for q in [0, 1, 57] {
        let mut betas = Vec::new();
        for (s, (_, rows)) in e.meta.subjects().iter().enumerate() {
            let sub = e.select(rows);
            let d = build_design(&sub.meta, Some("x"), &["c1"]).unwrap();
            let p = permute_design(&d, permutation_seed(17, q, s));
            let fit = fit_pointwise(&sub, &p).unwrap();
            let mut b = Vec::new();
            for ch in 0..e.n_channels {
                for t in res.window.clone() {
                    b.push(fit.beta(ch, t, 2));
                }
            }
            betas.push(b);
        }
        let t = group_t(&betas);
        let m = find_clusters(&t, res.window.len(), res.t_threshold, &adj)
            .iter()
            .map(|c| c.1.abs())
            .fold(0.0, f64::max);
        assert!((m - res.null_max[q]).abs() < 1e-9 * (1.0 + m), "{m} vs {}", res.null_max[q]);
    }
}

#[test]
fn recovered_cluster_is_connected_and_significant() {
    let e = synth_epochs(&small_spec(7, 0.4)).unwrap();
    let adj = Adjacency::of(&e).unwrap();
    let res = cluster_permutation_test(&e, "x", &["c1"], &adj, &cfg(200, 1)).unwrap();
    let best = &res.clusters[0];
    assert_eq!(best.polarity, Polarity::Positive);
    // stronger than every permutation: smallest reportable p
    assert_eq!(best.p, 1.0 / 201.0);
    let below = res.null_max.iter().filter(|&&m| m < best.mass.abs()).count();
    assert!(below >= 190, "{below}");
    let s = site(&e);
    let hit = best.members.iter().filter(|m| s.contains(m)).count();
    assert!(hit * 2 >= s.len());
    for c in &res.clusters {
        assert!(c.p > 0.0 && c.p <= 1.0);
        let members: HashSet<_> = c.members.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut stack = vec![c.members[0]];
        while let Some((ch, t)) = stack.pop() {
            if !seen.insert((ch, t)) {
                continue;
            }
            let mut next = vec![(ch, t.wrapping_sub(1)), (ch, t + 1)];
            next.extend(adj.neighbours(ch).iter().map(|&n| (n, t)));
            stack.extend(next.into_iter().filter(|m| members.contains(m)));
        }
        assert_eq!(seen.len(), members.len(), "cluster not connected");
    }
    assert!(res.ar1.iter().all(|a| a.abs() < 0.2));
}

#[test]
fn cluster_results_are_scale_invariant() {
    let e = synth_epochs(&small_spec(8, 0.25)).unwrap();
    let adj = Adjacency::of(&e).unwrap();
    let base = cluster_permutation_test(&e, "x", &["c1"], &adj, &cfg(100, 3)).unwrap();
    assert!(!base.clusters.is_empty());
    for factor in [4.0, 2.5, 0.01] {
        let r = cluster_permutation_test(&e.scaled(factor), "x", &["c1"], &adj, &cfg(100, 3)).unwrap();
        assert_eq!(r.clusters.len(), base.clusters.len());
        for (a, b) in r.clusters.iter().zip(&base.clusters) {
            assert_eq!(a.members, b.members);
            assert_eq!(a.p, b.p);
            assert!((a.mass - b.mass).abs() < 1e-9 * b.mass.abs());
        }
    }
}

#[test]
fn permuted_target_loses_the_effect() {
    let mut hits = 0;
    for rep in 0..20 {
        let mut e = synth_epochs(&small_spec(300 + rep, 0.4)).unwrap();
        let x = e.meta.column("x").unwrap().to_vec();
        let perm = erp_regress::design::permutation(x.len(), rep);
        e.meta.set_column("x", perm.iter().map(|&i| x[i]).collect()).unwrap();
        let adj = Adjacency::of(&e).unwrap();
        let res = cluster_permutation_test(&e, "x", &["c1"], &adj, &cfg(100, rep)).unwrap();
        hits += res.significant(0.05).next().is_some() as usize;
    }
    assert!(hits <= 4, "{hits}/20");
}

#[test]
fn configuration_errors() {
    let e = synth_epochs(&small_spec(9, 0.0)).unwrap();
    let adj = Adjacency::of(&e).unwrap();
    assert!(cluster_permutation_test(&e, "x", &[], &adj, &cfg(99, 0)).is_err());
    assert!(cluster_permutation_test(&e, "nope", &[], &adj, &cfg(100, 0)).is_err());
    let one = e.select(&e.meta.subjects()[0].1);
    assert!(cluster_permutation_test(&one, "x", &[], &adj, &cfg(100, 0)).is_err());
}

#[test]
fn roi_averages() {
    let e = synth_epochs(&small_spec(10, 0.3)).unwrap();
    let all = Region {
        name: "all".into(),
        channels: e.channels.clone(),
        tmin: e.tmin,
        tmax: e.tmax(),
    };
    let r = roi_average(&e, &all).unwrap();
    for (i, v) in r.iter().enumerate().step_by(37) {
        let m = e.epoch(i).iter().sum::<f64>() / e.epoch_len() as f64;
        assert!((v - m).abs() < 1e-12);
    }
    let mut flat = e.clone();
    flat.data.iter_mut().for_each(|v| *v = 2.5);
    for name in ["N400", "P600", "ANT"] {
        let r = roi_average(&flat, &Region::preset(name).unwrap()).unwrap();
        assert!(r.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }
    let empty = Region {
        channels: vec!["Xx".into()],
        ..all
    };
    assert!(roi_average(&e, &empty).is_err());
}

#[test]
fn lrt_detects_and_rejects() {
    let e = synth_epochs(&small_spec(11, 0.5)).unwrap();
    let y = roi_average(&e, &Region::preset("N400").unwrap()).unwrap();
    let d0 = build_design(&e.meta, None, &["c1"]).unwrap();
    let d1 = build_design(&e.meta, Some("x"), &["c1"]).unwrap();
    let r = lrt_compare(&y, &d0, &d1, &e.meta.subject).unwrap();
    assert_eq!(r.df, 1);
    assert!(r.p < 0.002, "{r:?}");
    assert!(r.rss1 < r.rss0);
    assert!(matches!(lrt_compare(&y, &d1, &d1, &e.meta.subject), Err(ErpError::NotNested(_))));
    let other = build_design(&e.meta, Some("x"), &[]).unwrap();
    assert!(matches!(lrt_compare(&y, &d0, &other, &e.meta.subject), Err(ErpError::NotNested(_))));
    assert_eq!(subject_dummies(&e.meta.subject).len(), 11);
}

#[test]
fn lrt_null_is_roughly_uniform() {
    let mut ps = Vec::new();
    for rep in 0..100 {
        let mut e = synth_epochs(&SynthSpec {
            sample_rate: 10.0,
            ..small_spec(500 + rep, 0.5)
        })
        .unwrap();
        let noise = synth_epochs(&SynthSpec {
            subjects: 12,
            sample_rate: 10.0,
            effect: None,
            ..small_spec(9000 + rep, 0.0)
        })
        .unwrap();
        e.meta.set_column("noise", noise.meta.column("x").unwrap().to_vec()).unwrap();
        let y = roi_average(&e, &Region::preset("N400").unwrap()).unwrap();
        let d0 = build_design(&e.meta, None, &["x", "c1"]).unwrap();
        let d1 = build_design(&e.meta, Some("noise"), &["x", "c1"]).unwrap();
        ps.push(lrt_compare(&y, &d0, &d1, &e.meta.subject).unwrap().p);
    }
    let (_, p) = ks_uniform(&ps);
    assert!(p > 0.01, "KS p = {p}");
}
