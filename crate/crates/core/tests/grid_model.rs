use sparsedisc::{case57_topology, linearize, GridSpec};

#[test]
fn star_network_rows_are_laplacian() {
    // Generator at the hub, three loads on the spokes.
    let spec = GridSpec::uniform(4, vec![0], vec![(0, 1, 1.5), (0, 2, 0.5), (0, 3, 2.0)], 2.0, 0.5)
        .unwrap();
    let (plant, map, _) = linearize(&spec).unwrap();
    assert_eq!(map.states, 5);
    for bus in 0..4 {
        let row = map.input_row(bus);
        let sum: f64 = (0..4).map(|b| plant.a_hat[(row, map.theta(b))]).sum();
        assert!(sum.abs() <= 1e-12, "bus {bus}: {sum}");
    }
}

#[test]
fn case57_structure() {
    let spec = case57_topology().unwrap();
    let (plant, map, adj) = linearize(&spec).unwrap();
    let n = map.states;
    for j in 0..plant.b2_hat.ncols() {
        let nnz = (0..n).filter(|&i| plant.b2_hat[(i, j)] != 0.0).count();
        assert_eq!(nnz, 1, "actuator {j}");
    }
    assert_eq!(plant.b1_hat, plant.b2_hat);
    for i in 0..n {
        for j in 0..n {
            if plant.a_hat[(i, j)] != 0.0 {
                assert!(adj.get(map.bus_of_state(i), map.bus_of_state(j)), "({i}, {j})");
            }
        }
    }
    for bus in 0..map.buses() {
        let row = map.input_row(bus);
        let sum: f64 = (0..map.buses()).map(|b| plant.a_hat[(row, map.theta(b))]).sum();
        assert!(sum.abs() <= 1e-12);
    }
}
