#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use wam::dataset::{ingest, IngestConfig};
use wam::geodata::{load_region, NUM_CHANNELS};
use wam::synth::{oracle_from_stats, random_field, window_stats, World, WorldConfig, NOMINAL};

fn autocorrelation(f: &[f64], n: usize, lag: usize) -> f64 {
    let m = f.iter().sum::<f64>() / f.len() as f64;
    let var = f.iter().map(|x| (x - m).powi(2)).sum::<f64>() / f.len() as f64;
    let mut acc = 0.0;
    let mut count = 0;
    for i in 0..n {
        for j in 0..n - lag {
            acc += (f[i * n + j] - m) * (f[i * n + j + lag] - m);
            acc += (f[j * n + i] - m) * (f[(j + lag) * n + i] - m);
            count += 2;
        }
    }
    acc / count as f64 / var
}

#[test]
fn autocorrelation_at_correlation_length() {
    let n = 200;
    let mut mean = 0.0;
    for seed in 0..4 {
        let f = random_field(n, n, 8.0, seed).unwrap();
        mean += autocorrelation(&f, n, 8) / 4.0;
    }
    let target = (-1.0f64).exp();
    assert!((mean - target).abs() < 0.1, "autocorrelation {mean}");
}

fn small_world(seed: u64) -> WorldConfig {
    let mut cfg = WorldConfig::desk(seed);
    cfg.region.lat.count = 40;
    cfg.region.lon.count = 40;
    cfg.window = 16;
    cfg.fires = 60;
    cfg.last_day = chrono::NaiveDate::from_ymd_opt(2021, 6, 25).unwrap();
    cfg
}

#[test]
fn world_is_deterministic_and_round_trips_through_files() {
    let w = World::generate(small_world(4)).unwrap();
    let store = w.store().unwrap();
    let fires = w.fires(&store).unwrap();
    let again = World::generate(small_world(4)).unwrap();
    assert_eq!(again.fires(&again.store().unwrap()).unwrap(), fires);
    assert!(fires.iter().all(|f| f.label().iter().all(|&v| v >= 0.0)));

    let dir = tempfile::tempdir().unwrap();
    w.write(dir.path(), &fires).unwrap();
    let (manifest, loaded) = load_region(&dir.path().join("manifest.toml")).unwrap();
    assert_eq!(manifest.synthetic.unwrap().seed, 4);
    for date in store.sample_dates() {
        assert_eq!(loaded.stack(date).unwrap().values, store.stack(date).unwrap().values);
    }
}

#[test]
fn greenness_stays_in_range() {
    let w = World::generate(small_world(2)).unwrap();
    let store = w.store().unwrap();
    for d in store.sample_dates() {
        let s = store.stack(d).unwrap();
        assert!(s.values.chunks(NUM_CHANNELS).all(|px| (-1.0..=1.0).contains(&px[2])));
    }
}

#[test]
fn fitted_zscore_standardizes_the_fitting_set() {
    let w = World::generate(small_world(5)).unwrap();
    let store = w.store().unwrap();
    let fires = w.fires(&store).unwrap();
    let cfg = IngestConfig {
        window: 16,
        unlabelled: 80,
        train_fraction: 0.7,
        seed: 1,
    };
    let out = ingest(&store, &fires, &cfg).unwrap();
    assert_eq!(out.train.len() + out.test.len(), 60);
    assert_eq!(out.train.len(), 42);
    let all: Vec<&[f32]> = out
        .unlabelled
        .samples
        .iter()
        .chain(&out.train.samples)
        .chain(&out.test.samples)
        .map(|s| s.tensor.data())
        .collect();
    for c in 0..NUM_CHANNELS {
        let vals: Vec<f64> = all
            .iter()
            .flat_map(|d| d.chunks(NUM_CHANNELS).map(move |px| px[c] as f64))
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let s = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!(
            m.abs() < 0.01 && (s - 1.0).abs() < 0.01,
            "channel {c}: mean {m}, std {s}"
        );
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn labels_track_input_channels() {
    let mut cfg = WorldConfig::desk(6);
    cfg.fires = 300;
    let w = World::generate(cfg).unwrap();
    let store = w.store().unwrap();
    let fires = w.fires(&store).unwrap();
    let raws: Vec<Vec<f64>> = fires
        .iter()
        .map(|f| wam::geodata::raw_window(&store, (f.lat, f.lon), f.date, 32).unwrap())
        .collect();
    for l in 0..6 {
        let y: Vec<f64> = fires.iter().map(|f| f.label()[l]).collect();
        let best = (0..NUM_CHANNELS)
            .map(|c| {
                let x: Vec<f64> = raws.iter().map(|r| window_stats(r).0[c]).collect();
                pearson(&ranks(&x), &ranks(&y)).abs()
            })
            .fold(0.0, f64::max);
        assert!(best > 0.3, "label {l}: best rank correlation {best}");
    }
}

/// Solves the least-squares problem `min |X b - y|` by normal equations.
fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &t) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * t;
        }
    }
    for i in 0..p {
        let piv = (i..p).max_by(|&r, &s| a[r][i].abs().total_cmp(&a[s][i].abs())).unwrap();
        a.swap(i, piv);
        for r in 0..p {
            if r != i {
                let f = a[r][i] / a[i][i];
                for c in i..=p {
                    a[r][c] -= f * a[i][c];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

#[test]
fn true_statistics_regressor_beats_average_threefold() {
    let mut cfg = WorldConfig::desk(8);
    cfg.fires = 300;
    cfg.label_noise = 0.0;
    let w = World::generate(cfg).unwrap();
    let store = w.store().unwrap();
    let fires = w.fires(&store).unwrap();
    // features the oracle is affine in after its link function
    let feats: Vec<Vec<f64>> = fires
        .iter()
        .map(|f| {
            let raw = wam::geodata::raw_window(&store, (f.lat, f.lon), f.date, 32).unwrap();
            let (m, s) = window_stats(&raw);
            let wind = ((m[0] * m[0] + m[1] * m[1]).sqrt() - 4.0) / 2.5;
            let mut v = vec![1.0, wind, s[0] / NOMINAL[0].1];
            v.extend((2..NUM_CHANNELS).map(|c| (m[c] - NOMINAL[c].0) / NOMINAL[c].1));
            assert_eq!(oracle_from_stats(&m, &s), f.label());
            v
        })
        .collect();
    let (train, test) = (0..200, 200..300);
    for l in 0..6 {
        let y: Vec<f64> = fires.iter().map(|f| f.label()[l]).collect();
        let (link, inv): (fn(f64) -> f64, fn(f64) -> f64) = if l < 3 {
            (f64::ln, f64::exp)
        } else {
            (|v: f64| v.exp_m1().ln(), |v: f64| v.exp().ln_1p())
        };
        let scale = [800.0, 90.0, 300.0, 6.0, 2.0, 1.5][l];
        let t: Vec<f64> = y[train.clone()].iter().map(|&v| link(v / scale)).collect();
        let b = least_squares(&feats[train.clone()], &t);
        let mean = y[train.clone()].iter().sum::<f64>() / 200.0;
        let mut mae_fit = 0.0;
        let mut mae_avg = 0.0;
        for i in test.clone() {
            let pred = scale * inv(feats[i].iter().zip(&b).map(|(a, c)| a * c).sum());
            mae_fit += (pred - y[i]).abs() / 100.0;
            mae_avg += (mean - y[i]).abs() / 100.0;
        }
        assert!(
            mae_fit * 3.0 < mae_avg,
            "label {l}: fitted {mae_fit}, average {mae_avg}"
        );
    }
}
