use chasectl_core::control::LqrWeights;
use chasectl_core::geometry::BoxBounds;
use chasectl_core::sim::*;
use nalgebra::dvector;

fn base(seed: u64) -> RunConfig {
    RunConfig {
        plant: PlantModel::LtvFormula { id: LtvBuiltin::Drift2x1 },
        disturbance: DisturbanceSpec { model: DisturbanceModel::Zero, zero_tail: 0 },
        controller: ControllerSpec::OpenLoop,
        w_bound: 1.0,
        theta_box: BoxBounds::new(-2.0, 3.0).unwrap(),
        horizon: 150,
        seed,
        x0: dvector![0.0, 0.0],
        label: "diag".into(),
        config_hash: String::new(),
        chase_diagnostics: false,
    }
}

#[test]
fn diag_ltv_seeds() {
    for seed in [9u64] {
        let mut rnd = base(seed);
        rnd.controller = ControllerSpec::RandomInput { magnitude: 1.0 };
        let rtrace = run_closed_loop(&rnd).unwrap();
        let mut cbc = base(seed);
        cbc.controller = ControllerSpec::CbcLqr {
            num_samples: 200,
            window_cap: 50,
            weights: LqrWeights::identity(2, 1),
            exploration: Some(1.0),
        };
        let ctrace = run_closed_loop(&cbc).unwrap();
        println!(
            "seed {seed}: random max={:.3e} cbc max={:.3e} ratio={:.1e}",
            rtrace.max_state_norm(),
            ctrace.max_state_norm(),
            rtrace.max_state_norm() / ctrace.max_state_norm()
        );
    }
}
