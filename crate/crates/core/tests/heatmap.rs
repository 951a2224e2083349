mod common;

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use shannon_core::viz::render_heatmap;

use common::{adversarial, injection_property, toy_heatmap_spec};

#[test]
fn toy_spec_matches_golden_file() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/heatmap_toy.html");
    let html = render_heatmap(&toy_heatmap_spec()).unwrap();
    assert_eq!(html, render_heatmap(&toy_heatmap_spec()).unwrap());
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &html).unwrap();
    }
    let expected = fs::read_to_string(&golden).expect("golden file exists; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(html, expected);
}

#[test]
fn legend_and_scale() {
    let spec = toy_heatmap_spec();
    // 28 surprisals; the nearest-rank 99th percentile is the largest, 6.3.
    assert_eq!(spec.effective_anchor(), 6.3);
    let html = render_heatmap(&spec).unwrap();
    for needle in [
        "I(D|S)",
        "22.7000",
        "2.1000",
        "info_diff",
        "0.3495",
        "toy-model",
        "6.300 nats",
    ] {
        assert!(html.contains(needle), "missing {needle}");
    }
    // Zero surprisal renders white, the anchor renders the full hue.
    assert!(html.contains("background:#ffffff\" title=\"0.000\""));
    assert!(html.contains("background:#b2182b\" title=\"6.300\""));
    assert!(!html.contains("http"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn arbitrary_text_cannot_inject_markup(doc_id in adversarial(), label in adversarial(), token in adversarial(), metric in adversarial()) {
        injection_property(&doc_id, &label, &token, &metric)?;
    }
}

#[test]
fn intensity_is_monotone_in_surprisal() {
    use shannon_core::viz::{intensity, shade, DEFAULT_HUE};
    let mut previous = 0.0;
    for i in 0..=100 {
        let s = i as f64 * 0.1;
        let v = intensity(s, 6.0);
        assert!(v >= previous);
        previous = v;
        let [r, g, b] = shade(v, DEFAULT_HUE);
        assert!(r >= DEFAULT_HUE[0] && g >= DEFAULT_HUE[1] && b >= DEFAULT_HUE[2]);
    }
}
