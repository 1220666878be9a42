use icgn::harness::{eval_grid, train, Domain, ModelSpec, TrainConfig, Trainable};
use icgn::integrator::{icgn_forward, Mode, QuadratureRule};
use icgn::models::{deserialize_model, serialize_model, Model};

fn short(steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        batch: 32,
        grid_resolution: 16,
        ..TrainConfig::with_model(ModelSpec::default())
    }
}

#[test]
fn evaluation_rule_barely_moves_trained_error() {
    let out = train(&short(500), false).unwrap();
    let Trainable::Icgn(model) = out.model else { panic!("icgn expected") };
    let domain = Domain::unit_square();
    let mean = |rule| {
        let m = model.with_eval_rule(rule).unwrap();
        eval_grid(|x| icgn_forward(&m, x, Mode::Eval, None), 64, &domain).unwrap().mean
    };
    let (gl32, gl64) = (
        mean(QuadratureRule::GaussLegendre { nodes: 32 }),
        mean(QuadratureRule::GaussLegendre { nodes: 64 }),
    );
    assert!((gl32 - gl64).abs() < 1e-6, "{gl32} vs {gl64}");
}

#[test]
fn trained_model_roundtrips_exactly() {
    let out = train(&short(50), false).unwrap();
    let model = out.model.clone().into_model();
    let text = serialize_model(&model).unwrap();
    let back = deserialize_model(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(serialize_model(&back).unwrap(), text);
    let Model::Icgn(m) = back else { panic!("icgn expected") };
    let g = eval_grid(|x| icgn_forward(&m, x, Mode::Eval, None), 16, &Domain::unit_square()).unwrap();
    assert_eq!(g, out.grid);
}

#[test]
fn reruns_are_bit_identical() {
    let a = train(&short(100), false).unwrap();
    let b = train(&short(100), false).unwrap();
    assert_eq!(a.metrics.to_json().unwrap(), b.metrics.to_json().unwrap());
    assert_eq!(
        serialize_model(&a.model.into_model()).unwrap(),
        serialize_model(&b.model.into_model()).unwrap()
    );
}
