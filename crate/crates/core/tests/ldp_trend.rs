use rayon::prelude::*;

use snls_core::config::RunConfig;
use snls_core::ldp::{
    controlled_trajectory, rate_cost, skeleton_trajectory, sup_distance_on_shared_times, Control,
};
use snls_core::noise::WienerPath;
use snls_core::stats::mean;

fn config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.n_modes = 16;
    cfg.policy.delta = 0.0625;
    cfg
}

#[test]
fn controlled_runs_approach_the_skeleton_as_epsilon_shrinks() {
    let cfg = config();
    let t = cfg.model.t_final;
    let model = cfg.noise_model().unwrap();
    let control = Control::new(vec![1, 2], vec![0.0, 0.25, t], vec![vec![0.5, 0.0], vec![-0.5, 0.8]])
        .unwrap();
    let mut means = Vec::new();
    for eps in [0.1, 0.01, 0.001] {
        let params = cfg.model_params().unwrap().with_epsilon(eps).unwrap();
        let skel = skeleton_trajectory(&params, &cfg.policy, &control, &model).unwrap();
        let d: Vec<f64> = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let path = WienerPath::sample(3, i, cfg.policy.master_j, model.k_modes(), t).unwrap();
                let run = controlled_trajectory(&params, &cfg.policy, &control, &model, &path).unwrap();
                sup_distance_on_shared_times(&run, &skel).unwrap()
            })
            .collect();
        means.push(mean(&d));
    }
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    // roughly √ε scaling
    assert!(means[2] < 0.2 * means[0], "{means:?}");
}

#[test]
fn rate_cost_sums_squared_piecewise_values() {
    let c = Control::new(vec![1, 4], vec![0.0, 0.25, 0.5], vec![vec![1.0, 2.0], vec![0.0, -1.0]]).unwrap();
    // ½(0.25·(1 + 4) + 0.25·1)
    assert_eq!(rate_cost(&c), 0.75);
    assert_eq!(rate_cost(&Control::zero(0.5)), 0.0);
}

#[test]
fn control_json_round_trip() {
    let c = Control::new(vec![2], vec![0.0, 0.1, 0.5], vec![vec![0.3], vec![-1.0 / 3.0]]).unwrap();
    assert_eq!(Control::from_json(&c.to_json()).unwrap(), c);
}
