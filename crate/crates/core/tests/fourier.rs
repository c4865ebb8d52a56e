use trapnls::fourier::*;
use trapnls::C;

#[test]
fn gaussian_transform_matches_closed_form() {
    let g = XGrid::<f64>::new(40.0, 256).unwrap();
    let line = Line::from_fn(&g, |x| C::new((-x * x / 2.0).exp(), 0.0));
    let s = line.spectrum();
    for (v, &xi) in s.iter().zip(g.xi()) {
        let exact = (-xi * xi / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - C::new(exact, 0.0)).norm() < 1e-13, "xi = {xi}");
    }
    let back = Line::from_spectrum(&g, s.clone());
    for (a, b) in back.values.iter().zip(&line.values) {
        assert!((a - b).norm() < 1e-13);
    }
    let m1 = g.l2_sqr_physical(&line.values);
    let m2 = g.l2_sqr_spectral(&s);
    assert!((m1 - m2).abs() < 1e-12);
}

#[test]
fn rejects_bad_sizes() {
    assert!(XGrid::<f64>::new(1.0, 48).is_err());
    assert!(XGrid::<f64>::new(-1.0, 64).is_err());
}
