use chrono::NaiveDate;
use wam::geodata::{
    normalize_window, raw_window, GridFile, GridStore, MinMax, NormalizationStats, VariableId, ZScore, LABEL_NAMES,
    NUM_CHANNELS,
};
use wam::mapgen::{enumerate_windows, predict_cell, predict_raster, WindowPlan};
use wam::models::{ModelConfig, ModelState};
use wam::synth::{World, WorldConfig};
use wam_grad::Tensor;

fn small_world(seed: u64) -> World {
    let mut cfg = WorldConfig::desk(seed);
    cfg.region.lat.count = 44;
    cfg.region.lon.count = 42;
    cfg.last_day = NaiveDate::from_ymd_opt(2021, 6, 20).unwrap();
    World::generate(cfg).unwrap()
}

fn unit_stats() -> NormalizationStats {
    let mut s = NormalizationStats::new(ZScore {
        mean: vec![0.0; NUM_CHANNELS],
        std: vec![1.0; NUM_CHANNELS],
    });
    s.labels = Some(MinMax {
        min: vec![0.0; 6],
        max: vec![10.0; 6],
    });
    s
}

fn fitted_stats(store: &GridStore, date: NaiveDate) -> NormalizationStats {
    let stack = store.stack(date).unwrap();
    let mut mean = vec![0.0; NUM_CHANNELS];
    let mut sq = [0.0; NUM_CHANNELS];
    let n = (stack.values.len() / NUM_CHANNELS) as f64;
    for px in stack.values.chunks(NUM_CHANNELS) {
        for c in 0..NUM_CHANNELS {
            mean[c] += px[c] / n;
            sq[c] += px[c] * px[c] / n;
        }
    }
    let std = (0..NUM_CHANNELS)
        .map(|c| (sq[c] - mean[c] * mean[c]).max(1e-12).sqrt())
        .collect();
    let mut s = unit_stats();
    s.inputs = ZScore { mean, std };
    s
}

fn model(kind: &str, stats: NormalizationStats) -> ModelState {
    let mut m = ModelState::new(ModelConfig::desk(kind, 16), 3).unwrap();
    m.stats = Some(stats);
    for n in &mut m.norms {
        n.initialized = true;
    }
    m
}

#[test]
fn window_count_matches_fit_arithmetic() {
    let world = small_world(1);
    let store = world.store().unwrap();
    assert_eq!(
        enumerate_windows(&store.region, 32).unwrap().len(),
        (44 - 31) * (42 - 31)
    );
}

#[test]
fn raster_cells_equal_standalone_predictions() {
    let world = small_world(2);
    let store = world.store().unwrap();
    let date = store.sample_dates()[3];
    let m = model("residual", fitted_stats(&store, date));
    let rasters = predict_raster(&m, &store, date, 3).unwrap();
    assert_eq!(rasters.len(), 6);
    let plan = WindowPlan::new(&store.region, 32, 3).unwrap();
    let stats = m.stats.clone().unwrap();
    let mut defined = 0;
    for (r, &i) in plan.rows.iter().enumerate() {
        for (c, &j) in plan.cols.iter().enumerate() {
            let center = (store.region.lat[i], store.region.lon[j]);
            match raw_window(&store, center, date, 32) {
                Ok(raw) => {
                    defined += 1;
                    let x = normalize_window(&raw, 32, &stats.inputs).unwrap();
                    let x = Tensor::stack(&[&x]).unwrap();
                    let y = m.predict_normalized(&x).unwrap();
                    let y = m.denormalize(y.row(0)).unwrap();
                    for l in 0..6 {
                        assert_eq!(
                            rasters[l].at(r, c).to_bits(),
                            y[l].to_bits(),
                            "{} at ({r}, {c})",
                            LABEL_NAMES[l]
                        );
                    }
                }
                Err(_) => assert!(rasters.iter().all(|ras| ras.at(r, c).is_nan())),
            }
        }
    }
    assert_eq!(defined, plan.centers().len());
    let f = rasters[0].frame;
    assert_eq!(f.top + f.bottom + 5, plan.rows.len());
}

#[test]
fn thread_count_does_not_change_rasters() {
    let world = small_world(3);
    let store = world.store().unwrap();
    let date = store.sample_dates()[0];
    let m = model("sequential", fitted_stats(&store, date));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| predict_raster(&m, &store, date, 2).unwrap())
    };
    let a = run(1);
    let b = run(3);
    for (x, y) in a.iter().zip(&b) {
        let bits = |r: &wam::mapgen::AssessmentRaster| r.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x), bits(y));
    }
}

#[test]
fn constant_fields_give_constant_rasters() {
    let mut world = small_world(4);
    for (_, g) in world.grids.iter_mut() {
        match g {
            GridFile::Geo(g) => g.values.iter_mut().for_each(|v| *v = 1.5),
            GridFile::Utm(g) => g.values.iter_mut().for_each(|v| *v = 0.25),
        }
    }
    let store = world.store().unwrap();
    let date = store.sample_dates()[2];
    let m = model("sequential", unit_stats());
    for r in predict_raster(&m, &store, date, 4).unwrap() {
        let (lo, hi) = r.range().unwrap();
        assert_eq!(lo, hi);
    }
}

/// Passes the first channel straight through the encoder and scores it with
/// a centre-weighted head, so predictions peak where that channel does.
fn hot_spot_model() -> ModelState {
    let mut m = model("sequential", unit_stats());
    let filters = m.config.encoder.filters.clone();
    let mut cin = NUM_CHANNELS;
    for (b, &f) in filters.iter().enumerate() {
        let id = m.params.find(&format!("encoder.block{b}.conv0.kernel")).unwrap();
        let centre = 4 * cin * f;
        m.params.get_mut(id).value = Tensor::from_fn(&[3, 3, cin, f], |i| if i == centre { 1.0 } else { 0.0 });
        cin = f;
    }
    let latent = m.config.latent_size();
    let channels = m.config.latent_channels();
    let hidden = m.config.head_hidden;
    let mid = (latent as f64 - 1.0) / 2.0;
    let id = m.params.find("head.hidden.w").unwrap();
    m.params.get_mut(id).value = Tensor::from_fn(&[latent * latent * channels, hidden], |i| {
        let (row, unit) = (i / hidden, i % hidden);
        let (pos, ch) = (row / channels, row % channels);
        let (y, x) = ((pos / latent) as f64, (pos % latent) as f64);
        if ch == 0 && unit == 0 {
            (-((y - mid).powi(2) + (x - mid).powi(2))).exp() as f32
        } else {
            0.0
        }
    });
    let id = m.params.find("head.out.w").unwrap();
    m.params.get_mut(id).value = Tensor::from_fn(&[hidden, 6], |i| if i / 6 == 0 { 1.0 } else { 0.0 });
    m
}

#[test]
fn planted_hot_spot_is_found_by_every_label() {
    let mut world = small_world(5);
    let store = world.store().unwrap();
    let centre = (store.region.lat[22], store.region.lon[21]);
    let mut node = None;
    for (_, g) in world.grids.iter_mut() {
        if let GridFile::Geo(g) = g {
            if g.variable != VariableId::U10 {
                continue;
            }
            let near = |axis: &[f64], v: f64| {
                (0..axis.len())
                    .min_by(|&a, &b| (axis[a] - v).abs().total_cmp(&(axis[b] - v).abs()))
                    .unwrap()
            };
            let (i, j) = (near(&g.lat, centre.0), near(&g.lon, centre.1));
            node = Some((g.lat[i], g.lon[j]));
            let cols = g.lon.len();
            g.values[i * cols + j] += 100.0;
        }
    }
    let (lat, lon) = node.unwrap();
    let store = world.store().unwrap();
    let (pi, pj) = store.region.cell_of(lat, lon).unwrap();
    let date = store.sample_dates()[1];
    let m = hot_spot_model();
    let plan = WindowPlan::new(&store.region, 32, 1).unwrap();
    for r in predict_raster(&m, &store, date, 1).unwrap() {
        let (ar, ac) = r.argmax().unwrap();
        let (i, j) = (plan.rows[ar], plan.cols[ac]);
        let d = ((i as f64 - pi as f64).powi(2) + (j as f64 - pj as f64).powi(2)).sqrt();
        assert!(d <= 5.0, "{}: argmax ({i}, {j}) vs planted ({pi}, {pj})", r.name());
    }
    let p = predict_cell(&m, &store, date, pi, pj).unwrap();
    assert!(p.iter().all(|v| v.is_finite()));
}
