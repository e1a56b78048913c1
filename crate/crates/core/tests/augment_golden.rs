//! Frozen output hashes for the default recipe. A change here means the
//! augmentation stream changed for every seeded run downstream.

use detkit::augment::{AugmentConfig, Pipeline, Sample};
use detkit::dataset::serialize_labels;
use detkit::synthfarm::{generate_scenes, SceneConfig};
use detkit::ImageDims;
use sha2::{Digest, Sha256};

const GOLDEN: [&str; 8] = [
    "6e03433a6352f47fda6678e3e42d52e603a3615d9632cacb6f7735d1cce12926",
    "e3ca4e0e258080d38a727af481e897a5ae181a2bc313b1141b2e7cd771e7c52b",
    "51959d4242a036203411f304d6d98d6bee83fdf9708b532a85846fb2f73e18bc",
    "1bad5766264aa529d3af72d6b55ffaf98b4b0b1f3f2ea40e9edcbe9bcc17a678",
    "968cb414d79dc3db70ead60bc744ba1d08c95305f23d9af30341b6b308afe0b7",
    "e49ff2f26f4382c15fc30ac49239652ed95b296c795341fb000e51448c1c75cb",
    "032a32251d99d062333b8add567f03a208887b60e242cbc387cd054846950f47",
    "7b05ee3f301906bd242da587c205c02c04391716fa92f1c2eb45dcf3f8ebedec",
];

fn outputs() -> Vec<String> {
    let cfg = SceneConfig {
        dims: ImageDims::new(160, 120).unwrap(),
        ..Default::default()
    };
    let src: Vec<Sample> = generate_scenes(&cfg, 6, 1)
        .unwrap()
        .into_iter()
        .map(|s| Sample {
            image: s.image,
            annotations: s.annotations,
        })
        .collect();
    let p = Pipeline::new(&src, AugmentConfig::default()).unwrap();
    p.iter(8)
        .map(|out| {
            let mut h = Sha256::new();
            h.update(out.sample.image.width().to_le_bytes());
            h.update(out.sample.image.height().to_le_bytes());
            h.update(out.sample.image.as_raw());
            h.update(serialize_labels(&out.sample.annotations).as_bytes());
            hex::encode(h.finalize())
        })
        .collect()
}

#[test]
fn default_recipe_golden_hashes() {
    let got = outputs();
    assert_eq!(got, outputs());
    for (i, (g, want)) in got.iter().zip(GOLDEN).enumerate() {
        assert_eq!(g, want, "output {i}");
    }
}
