use unigeo_core::autoencoder::{train_ae, AeTrainConfig};
use unigeo_core::curve::CubicCurve;
use unigeo_core::datasets::sample_semisphere;
use unigeo_core::losses::{train_curve, CurveTrainConfig, LossWeights};
use unigeo_core::ltsa::{ltsa_embed, LtsaConfig};
use unigeo_core::oracle::{geodesic_report, great_circle, ReportSpec};

#[test]
fn small_semisphere_run_shortens_the_chord() {
    let cloud = sample_semisphere(600, 1.0, 11).unwrap();
    let chart = ltsa_embed(&cloud, &LtsaConfig::default()).unwrap().coords;
    let cfg = AeTrainConfig {
        hidden: vec![32, 32],
        epochs: 60,
        lr: 3e-3,
        seed: 11,
        ..Default::default()
    };
    let ae = train_ae(&cloud.points, &chart, &cfg).unwrap();
    let first = ae.history[0].total;
    assert!(ae.history.last().unwrap().total < first);

    let (i, j) = (0, 1);
    let (p0, p1) = (cloud.points.row(i), cloud.points.row(j));
    let oracle = great_circle(p0, p1, 1).unwrap().length;
    let chord = CubicCurve::chord(ae.model.encode_point(p0).unwrap(), ae.model.encode_point(p1).unwrap()).unwrap();
    let tc = CurveTrainConfig {
        epochs: 300,
        weights: LossWeights::new(1.0, 0.0, 1.0).unwrap(),
        ..Default::default()
    };
    let out = train_curve(&ae.model, &chord, &tc).unwrap();
    assert_eq!(out.curve.z0, chord.z0);
    assert_eq!(out.curve.z1, chord.z1);
    assert!(out.history.last().unwrap().total <= out.history[0].total);

    let spec = ReportSpec::default();
    let (before, _) = geodesic_report(&ae.model, &chord, Some(&cloud.points), Some(oracle), &spec).unwrap();
    let (after, decoded) = geodesic_report(&ae.model, &out.curve, Some(&cloud.points), Some(oracle), &spec).unwrap();
    assert!(after.polyline_length <= before.polyline_length + 1e-9);
    assert!(after.polyline_length >= after.endpoint_distance);
    assert_eq!(decoded.shape(), (spec.n_samples + 1, ae.model.ambient_dim()));
}
