use std::sync::{Arc, Mutex};
use std::time::Duration;

use egoground::pipeline::{run_direct, run_svcot, PipelineError, SvCotConfig};
use egoground::schema::{expand_cases, TaskKind};
use egoground::scorers::{
    ChatClient, DirectionEstimator, DirectionProvenance, EndpointConfig, RemoteVerifier,
    ScorerError, TemplateRegistry, Verifier,
};
use egoground::synth::{generate_scenes, SceneConfig};
use egoground_oracles::endpoint::{prompt_text, FakeEndpoint, Reply};

fn client(base: String) -> ChatClient {
    ChatClient::new(EndpointConfig {
        base_url: base,
        api_key: Some("test-key".into()),
        model: "fake-vl".into(),
        timeout: Duration::from_secs(5),
    })
}

fn scene_samples() -> Vec<Arc<egoground::Sample>> {
    let config = SceneConfig {
        seed: 3,
        negative_rate: 0.0,
        ..SceneConfig::default()
    };
    generate_scenes(&config, 4)
        .unwrap()
        .into_iter()
        .map(|s| Arc::new(s.sample))
        .collect()
}

#[test]
fn complete_returns_message_text_and_sends_the_prompt() {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let server = FakeEndpoint::start(move |body| {
        log.lock().unwrap().push(body.clone());
        Reply::Text("hello there".into())
    });
    let c = client(server.base_url());
    assert_eq!(c.complete("ping", None).unwrap(), "hello there");
    let bodies = seen.lock().unwrap();
    assert_eq!(bodies[0]["model"], "fake-vl");
    assert_eq!(prompt_text(&bodies[0]), "ping");
}

#[test]
fn server_errors_are_infer_exceptions() {
    let server = FakeEndpoint::start(|_| Reply::Status(503));
    let err = client(server.base_url()).complete("ping", None).unwrap_err();
    assert!(err.is_infer_exception(), "{err:?}");
}

#[test]
fn remote_verifier_reads_one_score_per_candidate() {
    let server = FakeEndpoint::start(|body| {
        let p = prompt_text(body);
        let n = p.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count();
        let scores: Vec<String> = (0..n).map(|i| format!("{}", if i == 0 { 1.4 } else { 0.2 })).collect();
        Reply::Text(format!("Sure. {{\"scores\": [{}]}}", scores.join(", ")))
    });
    let v = RemoteVerifier::new(client(server.base_url()), None);
    assert_eq!(v.id(), "remote-fake-vl");
    let samples = scene_samples();
    let s = &samples[0];
    let objs: Vec<_> = s.objects().collect();
    let scores = v.verify(s, &objs, "this cup").unwrap();
    assert_eq!(scores.len(), objs.len());
    assert_eq!(scores[0].score, 1.0);
    assert!(scores.iter().skip(1).all(|x| x.score == 0.2));
    assert!(v.verify(s, &[], "this cup").unwrap().is_empty());
}

#[test]
fn wrong_score_count_is_an_infer_exception() {
    let server = FakeEndpoint::start(|_| Reply::Text("{\"scores\": [0.5]}".into()));
    let v = RemoteVerifier::new(client(server.base_url()), None);
    let samples = scene_samples();
    let s = &samples[0];
    let objs: Vec<_> = s.objects().collect();
    assert!(objs.len() >= 2);
    assert!(matches!(v.verify(s, &objs, "x"), Err(ScorerError::InferException(_))));
}

#[test]
fn remote_direction_drives_the_chain() {
    let samples = scene_samples();
    let truth = samples[0].gt_direction.unwrap();
    let dir_reply = format!("{{\"direction\": [{}, {}], \"confidence\": 0.8}}", truth.x * 3.0, truth.y * 3.0);
    let server = FakeEndpoint::start(move |_| Reply::Text(dir_reply.clone()));
    let est = DirectionEstimator::remote(client(server.base_url()), None);
    let case = expand_cases(&samples[..1], TaskKind::Pog).entries.remove(0);
    let egoground::schema::CaseEntry::Case(case) = case else { panic!("case skipped") };
    let (outcome, trace) =
        run_svcot(&case, &est, &egoground::scorers::MockVerifier, &SvCotConfig::default()).unwrap();
    let d = trace.direction.unwrap();
    assert_eq!(d.provenance, DirectionProvenance::RemoteModel);
    assert!((d.confidence - 0.8).abs() < 1e-12);
    assert!((d.direction.x - truth.x).abs() < 1e-9 && (d.direction.y - truth.y).abs() < 1e-9);
    assert_eq!(outcome.ann_id(), samples[0].gt_target_ann_id.as_deref());
}

#[test]
fn direct_baseline_parses_relative_boxes() {
    let samples = scene_samples();
    let target = samples[0].target().unwrap().bbox;
    let (w, h) = samples[0].dims();
    let reply = format!(
        "{{\"bbox_2d\": [{}, {}, {}, {}]}}",
        (target.x1 / w * 1000.0).round(),
        (target.y1 / h * 1000.0).round(),
        (target.x2 / w * 1000.0).round(),
        (target.y2 / h * 1000.0).round()
    );
    let server = FakeEndpoint::start(move |_| Reply::Text(reply.clone()));
    let c = client(server.base_url());
    let registry = TemplateRegistry::builtin();
    let template = registry.get(TaskKind::Edg, "qwen3-vl").unwrap();
    let exp = expand_cases(&samples[..1], TaskKind::Edg);
    let case = exp.cases().next().unwrap();
    let out = run_direct(case, template, &c, None).unwrap();
    assert!(out.prompt.contains(case.referent.as_deref().unwrap()));
    let pred = out.pred_abs.unwrap();
    assert!(egoground::geometry::iou(&pred, &target) > 0.95);

    let dead = client("http://127.0.0.1:9".into());
    assert!(matches!(run_direct(case, template, &dead, None), Err(PipelineError::Infer(_))));
    assert!(server.hits() >= 1);
}
