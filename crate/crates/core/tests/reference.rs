use snls_core::config::RunConfig;
use snls_core::experiments::{reference_solution, StudySetup};
use snls_core::noise::WienerPath;
use snls_core::scheme::{Integrator, RecordOptions, Stepping};

fn setup() -> StudySetup {
    let mut cfg = RunConfig::default();
    cfg.experiment.n_ref = 32;
    cfg.model.n_modes = 16;
    cfg.study_setup().unwrap()
}

#[test]
fn halving_reference_step_moves_errors_less_than_ten_percent() {
    let fine_setup = {
        let mut s = setup();
        s.policy.master_j = 11;
        s
    };
    let coarse_setup = setup();
    let integ = Integrator::new(
        coarse_setup.params(16).unwrap(),
        Stepping::Adaptive(coarse_setup.policy.with_delta(2f64.powi(-7))),
        coarse_setup.model.clone(),
    )
    .unwrap()
    .with_options(RecordOptions::FINAL_ONLY);

    let (mut shift, mut err) = (0.0, 0.0);
    for i in 0..12 {
        let fine = fine_setup.path(9, i).unwrap();
        let coarse: WienerPath = fine.coarsened().unwrap();
        let r_fine = reference_solution(&fine_setup, &fine).unwrap();
        let r_coarse = reference_solution(&coarse_setup, &coarse).unwrap();
        let u = integ.run(&coarse).unwrap().final_state.resized(32);
        shift += r_fine.distance(&r_coarse).powi(2);
        err += u.distance(&r_fine).powi(2);
    }
    let (shift, err) = (shift.sqrt(), err.sqrt());
    assert!(shift < 0.1 * err, "reference shift {shift:e} vs error {err:e}");
}

#[test]
fn reference_rejects_budget_overrun() {
    let mut s = setup();
    s.reference_budget = 1000;
    let path = s.path(1, 0).unwrap();
    assert!(reference_solution(&s, &path).is_err());
}
