use aniso_rabi::spectrum::{self, CouplingMode, Grid, Method, SolverOptions, SweepSpec, SweepVariable};
use aniso_rabi::Parity;

fn spec(delta: f64, r: f64, sweep: SweepVariable, grid: Grid, n_levels: usize, methods: Vec<Method>) -> SweepSpec {
    SweepSpec {
        delta,
        coupling: CouplingMode::Ratio(r),
        sweep,
        grid,
        n_levels,
        methods,
        options: SolverOptions::default(),
    }
}

#[test]
fn g1_sweep_gfunction_tracks_oracle() {
    let s = spec(
        0.7,
        0.5,
        SweepVariable::G1,
        Grid {
            start: 0.01,
            stop: 1.5,
            step: 0.01,
        },
        5,
        vec![Method::GFunction, Method::Oracle],
    );
    let table = spectrum::run_sweep(&s).unwrap();
    let points = s.grid.points().len();
    assert_eq!(table.rows.len(), points * 2 * 2 * 5);
    assert!(spectrum::continuity_violations(&table).is_empty());
    let summary = spectrum::compare_methods(&table, Method::Oracle).unwrap();
    for e in summary.iter().filter(|e| e.method == Method::GFunction) {
        assert_eq!(e.samples, points, "{e:?}");
        assert!(e.max_abs < 1e-8, "{e:?}");
    }
    for m in [Method::GFunction, Method::Oracle] {
        for p in Parity::BOTH {
            for (v, levels) in table.curves(m, p) {
                assert!(levels.windows(2).all(|w| w[0] < w[1]), "{m} {p} at {v}");
            }
        }
    }
}

#[test]
fn alpha_sweep_approximations_stay_real_and_continuous() {
    for r in [0.5, 2.0] {
        let s = spec(
            0.5,
            r,
            SweepVariable::Alpha,
            Grid {
                start: 0.0,
                stop: 1.5,
                step: 0.01,
            },
            3,
            vec![Method::Oracle, Method::Adiabatic, Method::Grwa, Method::Truncated(30)],
        );
        let table = spectrum::run_sweep(&s).unwrap();
        assert!(table.rows.iter().all(|r| r.flag == spectrum::FLAG_OK && r.energy.is_finite()));
        assert!(spectrum::continuity_violations(&table).is_empty());
        let summary = spectrum::compare_methods(&table, Method::Oracle).unwrap();
        for e in summary.iter().filter(|e| e.method == Method::Truncated(30)) {
            assert!(e.max_abs < 1e-5, "{e:?}");
        }
        for e in summary.iter().filter(|e| e.method == Method::Grwa) {
            assert!(e.max_abs < 0.3, "{e:?}");
        }
    }
}
