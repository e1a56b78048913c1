use detkit::evaluation::{evaluate, ImageEval};
use detkit::synthfarm::{
    generate_dataset, generate_scene, generate_scenes, perturb_predictions, ConfModel, ErrorModel, SceneConfig,
    Weather, MIN_VISIBILITY,
};

fn degraded_model() -> ErrorModel {
    ErrorModel {
        drop_rate: 0.05,
        jitter_sigma: 0.06,
        spurious_rate: 1.0,
        conf: ConfModel {
            contrast_aware: true,
            ..Default::default()
        },
    }
}

fn map_for(weather: Weather, n: usize, seed: u64) -> f64 {
    let template = SceneConfig::default().with_weather(weather);
    let scenes = generate_scenes(&template, n, seed).unwrap();
    let images: Vec<ImageEval> = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| ImageEval {
            image_id: format!("{i:06}"),
            dims: s.dims(),
            ground_truth: s.annotations.clone(),
            detections: perturb_predictions(s.view(), &degraded_model(), 100 + i as u64).detections,
        })
        .collect();
    evaluate(&images).unwrap().map
}

#[test]
fn weather_does_not_move_geometry() {
    let clear = generate_scene(&SceneConfig::default()).unwrap();
    for w in Weather::ALL {
        let s = generate_scene(&SceneConfig::default().with_weather(w)).unwrap();
        assert_eq!(s.annotations, clear.annotations);
        assert_eq!(s.clean, clear.clean);
        assert_eq!(s.owner, clear.owner);
    }
}

#[test]
fn annotations_are_visible_buoys() {
    for s in generate_scenes(&SceneConfig::default(), 20, 5).unwrap() {
        let dims = s.dims();
        let mut counts = vec![0usize; s.buoys.len()];
        for o in s.owner.iter().flatten() {
            counts[*o as usize] += 1;
        }
        for (i, b) in s.buoys.iter().enumerate() {
            match b.annotation {
                Some(k) => {
                    assert!(b.visibility >= MIN_VISIBILITY);
                    let a = s.annotations[k].bbox.to_abs(dims);
                    // Every painted pixel of the buoy lies inside its box.
                    let w = dims.width as usize;
                    for (p, o) in s.owner.iter().enumerate() {
                        if *o == Some(i as u32) {
                            assert!(a.contains_point((p % w) as f64 + 0.5, (p / w) as f64 + 0.5));
                        }
                    }
                }
                None => assert!(b.visibility < MIN_VISIBILITY || counts[i] == 0),
            }
        }
    }
}

#[test]
fn perturbation_composition_is_reported() {
    let s = generate_scene(&SceneConfig::default()).unwrap();
    let perfect = perturb_predictions(s.view(), &ErrorModel::default(), 1);
    assert_eq!(perfect.detections.len(), s.annotations.len());
    assert_eq!(perfect.intended_fn(), 0);
    let img = ImageEval {
        image_id: "a".into(),
        dims: s.dims(),
        ground_truth: s.annotations.clone(),
        detections: perfect.detections,
    };
    let r = evaluate(&[img]).unwrap();
    assert!((r.map - 1.0).abs() < 1e-12);

    let noisy = perturb_predictions(s.view(), &degraded_model(), 1);
    assert_eq!(noisy.intended_tp() + noisy.intended_fp(), noisy.detections.len());
    assert_eq!(noisy, perturb_predictions(s.view(), &degraded_model(), 1));
}

#[test]
fn map_does_not_increase_with_weather_severity() {
    let maps: Vec<f64> = Weather::ALL.iter().map(|&w| map_for(w, 30, 77)).collect();
    for pair in maps.windows(2) {
        assert!(pair[1] <= pair[0], "{maps:?}");
    }
    assert!(maps[0] > maps[3], "{maps:?}");
}

#[test]
fn dataset_on_disk_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SceneConfig {
        dims: detkit::ImageDims::new(160, 120).unwrap(),
        ..Default::default()
    };
    let m = generate_dataset(&cfg, 3, 9, "synth", dir.path()).unwrap();
    let loaded = detkit::dataset::DatasetManifest::load(&dir.path().join("manifest.toml")).unwrap();
    assert_eq!(loaded.entries.len(), 3);
    for (a, b) in loaded.entries.iter().zip(&m.entries) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.annotations.len(), b.annotations.len());
        for (x, y) in a.annotations.iter().zip(&b.annotations) {
            assert!((x.bbox.cx - y.bbox.cx).abs() < 1e-6);
        }
        let img = image::open(dir.path().join(&a.image)).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (160, 120));
    }
    assert!(generate_dataset(&cfg, 3, 9, "synth", dir.path()).is_err());
}
