use pseudoiid_web::{depth_profile_report, edge_of_chaos_report, histogram_report};

#[test]
fn relu_profile_keeps_variance_at_criticality() {
    let p = depth_profile_report("relu", 2.0, 0.0, 5, 1.0).unwrap();
    assert_eq!(p.layers, vec![1, 2, 3, 4, 5, 6]);
    for v in &p.variance {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
    assert!((p.correlation[0] - 1.0f64.cos()).abs() < 1e-12);
    assert!(p.correlation.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn chaotic_tanh_decorrelates() {
    let p = depth_profile_report("tanh", 4.0, 0.0, 45, 0.3).unwrap();
    assert!(p.correlation.windows(2).all(|w| w[1] < w[0]));
    assert!(p.correlation.last().unwrap().abs() < 0.05);
}

#[test]
fn edge_of_chaos_rows() {
    let t = edge_of_chaos_report("tanh", &[0.0]).unwrap();
    assert!((t[0].sigma_w2 - 1.0).abs() < 1e-4);
    let r = edge_of_chaos_report("relu", &[0.0]).unwrap();
    assert!((r[0].sigma_w2 - 2.0).abs() < 1e-4);
}

#[test]
fn histogram_density_integrates_to_one() {
    let h = histogram_report("haar_orthogonal", 40, 2, 1000, 7).unwrap();
    let mass: f64 = h.bins.iter().map(|(lo, hi, d)| (hi - lo) * d).sum();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!(h.ks < h.ks_critical);
    assert!((h.sample_variance / h.target_variance - 1.0).abs() < 0.2);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(depth_profile_report("swish", 1.0, 0.0, 3, 0.5).is_err());
    assert!(histogram_report("cauchy", 10, 2, 1000, 1).is_err());
    assert!(histogram_report("iid_gaussian", 10_000, 2, 1000, 1).is_err());
}
