use mimo_pilot::harness::{run_experiment, ExperimentId, ExperimentPlan, Scheme};
use mimo_pilot::SystemConfig;

fn small(id: ExperimentId) -> ExperimentPlan {
    ExperimentPlan {
        n_large: 4,
        n_small: 6,
        ..ExperimentPlan::desk(id)
    }
}

fn csv(id: ExperimentId, jobs: usize) -> String {
    let plan = ExperimentPlan { jobs, ..small(id) };
    run_experiment(&plan, &SystemConfig { seed: 3, ..SystemConfig::default() })
        .unwrap()
        .to_csv()
        .unwrap()
}

#[test]
fn headers() {
    let expect = [
        (ExperimentId::Fig3, "M,scheme,method,gamma,mean_exp_rcee,stderr,closed_form"),
        (ExperimentId::Fig4a, "scheme,method,gamma,value,cdf"),
        (ExperimentId::Fig4b, "P_dB,"),
        (ExperimentId::Fig5a, "M,scheme,method,gamma,mean_min_rate,stderr,asymptote"),
        (ExperimentId::Fig5b, "scheme,method,gamma,value,cdf"),
    ];
    for (id, head) in expect {
        let text = csv(id, 1);
        assert!(text.lines().next().unwrap().starts_with(head), "{id:?}: {}", text.lines().next().unwrap());
    }
}

#[test]
fn rows_are_rectangular_and_finite() {
    for id in [ExperimentId::Fig3, ExperimentId::Fig4a, ExperimentId::Fig4b, ExperimentId::Fig5a, ExperimentId::Fig5b] {
        let text = csv(id, 1);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let width = reader.headers().unwrap().len();
        let mut rows = 0;
        for rec in reader.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), width);
            for field in rec.iter() {
                if let Ok(v) = field.parse::<f64>() {
                    assert!(!v.is_nan() || field == "NaN", "{id:?}: {field}");
                }
            }
            rows += 1;
        }
        assert!(rows > 0, "{id:?}");
    }
}

#[test]
fn cdf_columns_are_monotone() {
    let report = run_experiment(&small(ExperimentId::Fig4a), &SystemConfig::default()).unwrap();
    for series in &report.cdfs {
        let xs = series.cdf.samples();
        assert!(xs.windows(2).all(|w| w[0] <= w[1] && series.cdf.cdf(w[0]) <= series.cdf.cdf(w[1])));
        assert_eq!(series.cdf.cdf(*xs.last().unwrap()), 1.0);
    }
}

#[test]
fn worker_count_does_not_change_output() {
    for id in [ExperimentId::Fig3, ExperimentId::Fig5b] {
        assert_eq!(csv(id, 1), csv(id, 3));
    }
}

#[test]
fn scheme_filter_is_respected() {
    let plan = ExperimentPlan {
        schemes: vec![Scheme::Eppa],
        ..small(ExperimentId::Fig5a)
    };
    let report = run_experiment(&plan, &SystemConfig::default()).unwrap();
    assert!(report.curves.iter().all(|c| c.scheme == Scheme::Eppa));
}
