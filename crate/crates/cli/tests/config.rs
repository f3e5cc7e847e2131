use cityroad_cli::config::{
    parse_config, parse_config_str, ConfigError, ExperimentConfig, InitialKind, SweepParameter,
};

fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_str(text, "exp.cfg", &[], None)
}

#[test]
fn empty_config_gives_defaults() {
    let cfg = parse("").unwrap();
    let p = cfg.params();
    assert_eq!((p.alpha, p.beta, p.d, p.fprime0()), (1.0, 1.0, 1.0, 1.0));
    assert_eq!(cfg.simulation.m, 32);
    assert_eq!(cfg.simulation.dt, 1e-3);
    assert_eq!(cfg.measurement.threshold, 0.5);
    assert_eq!(cfg.simulation.initial, InitialKind::LeftBlock);
}

#[test]
fn negative_alpha_is_rejected() {
    match parse("parameters.alpha = -1\n").unwrap_err() {
        ConfigError::Invalid { key, .. } => assert_eq!(key, "parameters.alpha"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn diffusivity_sweep_plans_three_runs() {
    let cfg = parse("sweep.parameter = d\nsweep.values = 1, 10, 100\n").unwrap();
    let plan = cfg.sweep_plan().unwrap();
    assert_eq!(plan.len(), 3);
    for (run, d) in plan.iter().zip([1.0, 10.0, 100.0]) {
        assert_eq!(run.parameter, SweepParameter::D);
        assert_eq!(run.params.d, d);
        assert_eq!((run.params.alpha, run.params.beta), (1.0, 1.0));
    }
}

#[test]
fn inadmissible_sweep_value_names_the_key() {
    let err = parse("sweep.parameter = beta\nsweep.values = 1, 0\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "sweep.values"), "{err}");
}

#[test]
fn unknown_key_reports_its_line() {
    let err = parse("parameters.d = 2\n\nsimulation.colour = red\n").unwrap_err();
    match err {
        ConfigError::UnknownKey { line, key, .. } => {
            assert_eq!(line, 3);
            assert_eq!(key, "simulation.colour");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn malformed_lines_report_their_line() {
    let err = parse("# ok\nparameters.beta 2\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err}");
    let err = parse("parameters.beta = two\n").unwrap_err();
    assert!(err.to_string().starts_with("exp.cfg:1:"), "{err}");
}

#[test]
fn overrides_apply_after_the_file() {
    let cfg = parse_config_str(
        "parameters.fprime0 = 2\n",
        "exp.cfg",
        &["parameters.fprime0=0.5".into(), "simulation.T = 10".into()],
        None,
    )
    .unwrap();
    assert_eq!(cfg.params().fprime0(), 0.5);
    assert_eq!(cfg.simulation.t_final, 10.0);
    let err = parse_config_str("", "exp.cfg", &["nope=1".into()], None).unwrap_err();
    assert!(err.to_string().starts_with("--set:1:"), "{err}");
}

#[test]
fn dt_must_divide_horizon() {
    let err = parse("simulation.T = 1\nsimulation.dt = 0.3\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "simulation.dt"));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = parse_config(Some("/nonexistent/exp.cfg".as_ref()), &[]).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}
