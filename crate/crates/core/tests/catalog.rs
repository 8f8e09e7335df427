use coincidence_core::spwf::Spwf;
use coincidence_core::Interval;

fn family_members() -> Vec<Vec<Spwf>> {
    vec![
        (1..=6).map(|n| Spwf::box_state(n, 1.7).unwrap()).collect(),
        (0..=6).map(|n| Spwf::oscillator(n, 0.8).unwrap()).collect(),
        // cos(2 pi p x / L + phase) with distinct p and whole periods
        (1..=5).map(|p| Spwf::plane(p, 0.4, 2.0).unwrap()).collect(),
    ]
}

#[test]
fn catalog_states_are_orthonormal() {
    for members in family_members() {
        for (i, a) in members.iter().enumerate() {
            for (j, b) in members.iter().enumerate() {
                let d1 = a.natural_domain().unwrap();
                let d2 = b.natural_domain().unwrap();
                let hull = Interval::new(d1.lo().min(d2.lo()), d1.hi().max(d2.hi())).unwrap();
                let ov = a.overlap(b, hull).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (ov.re - expected).abs() < 1e-9 && ov.im.abs() < 1e-9,
                    "{} #{i} vs #{j}: {ov}",
                    a.family_name()
                );
            }
        }
    }
}

#[test]
fn local_models_have_no_overlap() {
    let psi = Spwf::local_node(num_complex::Complex64::new(1.0, 0.0), 0.0).unwrap();
    let unit = Interval::new(0.0, 1.0).unwrap();
    assert!(psi.overlap(&psi, unit).is_err());
}

#[test]
fn box_nodes_are_at_multiples_of_length_over_n() {
    for n in 1..=8u32 {
        let psi = Spwf::box_state(n, 2.5).unwrap();
        let inner = Interval::new(1e-9, 2.5 - 1e-9).unwrap();
        let nodes = psi.find_nodes(inner);
        assert_eq!(nodes.len(), n as usize - 1, "n = {n}");
        for (k, x) in nodes.iter().enumerate() {
            assert!((x - 2.5 * (k + 1) as f64 / n as f64).abs() < 1e-11);
        }
    }
}

#[test]
fn oscillator_nodes_have_small_residuals() {
    for n in 0..=7u32 {
        let psi = Spwf::oscillator(n, 1.3).unwrap();
        let nodes = psi.find_nodes(psi.natural_domain().unwrap());
        assert_eq!(nodes.len(), n as usize, "n = {n}");
        let peak = (0..2000).map(|i| psi.evaluate(-6.0 + 12.0 * i as f64 / 2000.0).norm()).fold(0.0, f64::max);
        for x in nodes {
            assert!(psi.evaluate(x).norm() < 1e-10 * peak, "n = {n}, x = {x}");
        }
    }
}

#[test]
fn odd_oscillator_states_have_a_node_at_the_center() {
    for n in [1u32, 3, 5] {
        let psi = Spwf::oscillator(n, 0.7).unwrap();
        let nodes = psi.find_nodes(Interval::new(-0.3, 0.31).unwrap());
        assert_eq!(nodes.len(), 1);
        assert!(nodes[0].abs() < 1e-12);
    }
}

#[test]
fn plane_wave_nodes_sit_on_the_cosine_zeros() {
    let psi = Spwf::plane(2, 0.0, 1.0).unwrap();
    let nodes = psi.find_nodes(Interval::new(0.0, 1.0).unwrap());
    let expected = [0.125, 0.375, 0.625, 0.875];
    assert_eq!(nodes.len(), expected.len());
    for (x, e) in nodes.iter().zip(expected) {
        assert!((x - e).abs() < 1e-11);
    }
}

#[test]
fn scenario_states_serialize_round_trip() {
    for members in family_members() {
        for psi in members {
            let text = serde_json::to_string(&psi).unwrap();
            let back: Spwf = serde_json::from_str(&text).unwrap();
            assert_eq!(psi, back);
        }
    }
    assert!(serde_json::from_str::<Spwf>(r#"{"family":"box","n":0,"length":1.0}"#).is_err());
    assert!(serde_json::from_str::<Spwf>(r#"{"family":"box","n":1,"length":1.0,"extra":2}"#).is_err());
}
