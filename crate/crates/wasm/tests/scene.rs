use partreg::bench::scenarios::zalesak_area;
use partreg_wasm::{Scene, PERIOD};

#[test]
fn projected_area_matches_the_body() {
    let mut s = Scene::new(25, 2, 0.5, false, 0).unwrap();
    assert!(s.image(8).unwrap().is_empty());
    let a = s.project().unwrap();
    assert!((a / zalesak_area() - 1.0).abs() < 0.1, "{a}");
    assert_eq!(s.image(8).unwrap().len(), 64);
}

#[test]
fn full_turn_returns_the_picture() {
    let mut s = Scene::new(20, 2, 0.5, true, 3).unwrap();
    s.project().unwrap();
    let start = s.image(40).unwrap();
    s.rotate(PERIOD as u32).unwrap();
    assert_eq!(s.time(), PERIOD);
    s.project().unwrap();
    assert!(s.last_iterations() > 0);
    let end = s.image(40).unwrap();
    let same = start.iter().zip(&end).filter(|(a, b)| (**a > 0.0) == (**b > 0.0)).count();
    assert!(same as f64 > 0.97 * start.len() as f64, "{same}");
    assert!(s.particles().len() % 3 == 0 && s.particle_count() > 0);
}

#[test]
fn bad_order_is_an_error() {
    assert!(Scene::new(10, 1, 0.5, false, 0).is_err());
}
