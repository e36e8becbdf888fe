mod common;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use common::*;
use mathkg_core::completion::{
    classify_problem, complete_entity, complete_kg, default_rules, find_incomplete, generate_knowledge_points,
    two_stage_retrieve, write_back, CompletionConfig, CompletionError, CompletionStatus, KindHint, KnowledgePoint,
    ProblemCategory, RetrievalBundle, COMPLETION_SOURCE,
};
use mathkg_core::embedding::{EmbedConfig, HashEmbedder};
use mathkg_core::index::{build_vd, VectorDb};
use mathkg_core::llm::{CompletionParams, FnBackend, LlmError, Prompt, ScriptedMockBackend, TemplateId};
use mathkg_core::store::kg_to_bytes;
use mathkg_core::{Entity, EntityId, EntityType, KnowledgeGraph};
use proptest::prelude::*;
use serde_json::Value;

fn params() -> CompletionParams {
    CompletionParams::default()
}

fn problem(id: u64, text: &str) -> Entity {
    Entity::new(EntityId(id), EntityType::Problem)
        .with_title(format!("Problem:P{id}"))
        .with_contents([text])
}

#[test]
fn incomplete_entities_match_manifest() {
    let manifest: Value = serde_json::from_str(&read(fixture("mini_corpus.manifest.json"))).unwrap();
    let want: Vec<EntityId> = manifest["incomplete"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| EntityId(v.as_u64().unwrap()))
        .collect();
    assert_eq!(find_incomplete(&mini_kg()), want);

    let mut kg = KnowledgeGraph::new();
    kg.add_entity(Entity::new(EntityId(0), EntityType::Theorem).with_title("Theorem:T").with_contents(["t"]))
        .unwrap();
    kg.add_entity(problem(1, "compute")).unwrap();
    kg.add_entity(Entity::new(EntityId(2), EntityType::Definition).with_title("Definition:D")).unwrap();
    assert_eq!(find_incomplete(&kg), vec![EntityId(0), EntityId(1)]);
}

#[test]
fn classification() {
    assert_eq!(
        classify_problem(&ScriptedMockBackend::new("calculation"), "2+2", &params(), 3).unwrap(),
        ProblemCategory::Calculation
    );
    let keywords = FnBackend(|p: &Prompt| {
        let text = p.rendered.split("### Problem\n").nth(1).unwrap_or("").to_lowercase();
        Ok(if text.starts_with("prove") || text.contains("show that") {
            "proof"
        } else if text.contains("how many") || text.contains("compute") {
            "calculation"
        } else {
            "application"
        }
        .to_string())
    });
    assert_eq!(
        classify_problem(&keywords, "Prove that the center of S_n is trivial for n >= 3.", &params(), 3).unwrap(),
        ProblemCategory::Proof
    );
    let calls = AtomicUsize::new(0);
    let geometry = FnBackend(|_: &Prompt| {
        calls.fetch_add(1, Ordering::SeqCst);
        Ok("geometry".to_string())
    });
    assert!(matches!(
        classify_problem(&geometry, "x", &params(), 3),
        Err(LlmError::UndecidableResponse(_))
    ));
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn knowledge_points() {
    let pts = generate_knowledge_points(
        &ScriptedMockBackend::new("definition: positive definite matrix"),
        "x",
        &params(),
        3,
    )
    .unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].kind_hint, KindHint::Definition);
    assert!(generate_knowledge_points(&ScriptedMockBackend::new(""), "x", &params(), 3)
        .unwrap()
        .is_empty());
    let multi = "theorem: Lagrange\ndefinition: Group\n- definition: Subgroup\ntheorem: lagrange\ncyclic group\n";
    let pts = generate_knowledge_points(&ScriptedMockBackend::new(multi), "x", &params(), 3).unwrap();
    let got: Vec<(&str, KindHint)> = pts.iter().map(|p| (p.text.as_str(), p.kind_hint)).collect();
    assert_eq!(
        got,
        vec![
            ("Lagrange", KindHint::Theorem),
            ("Group", KindHint::Definition),
            ("Subgroup", KindHint::Definition),
            ("cyclic group", KindHint::Unspecified),
        ]
    );
}

fn point(text: &str, kind_hint: KindHint) -> KnowledgePoint {
    KnowledgePoint {
        text: text.into(),
        kind_hint,
    }
}

fn mini_vd() -> VectorDb {
    build_vd(&mini_kg(), &HashEmbedder, &EmbedConfig::default()).unwrap().0
}

#[test]
fn retrieval_matches_oracle() {
    let g: Value = serde_json::from_str(&read(golden("mini_embeddings.json"))).unwrap();
    let want = &g["retrieval"];
    let points = vec![
        point("Group", KindHint::Definition),
        point("Lagrange", KindHint::Theorem),
        point("order of an element divides the group order", KindHint::Unspecified),
        point("Symmetric Group", KindHint::Unspecified),
    ];
    let kg = mini_kg();
    let b = two_stage_retrieve(
        &points,
        &kg,
        &mini_vd(),
        &HashEmbedder,
        &CompletionConfig::default(),
        &BTreeSet::from([EntityId(10)]),
    )
    .unwrap();
    let ids = |v: &Value| -> Vec<u64> { v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect() };
    assert_eq!(b.exact_hits.iter().map(|i| i.0).collect::<Vec<_>>(), ids(&want["exact_hits"]));
    assert_eq!(b.selected.iter().map(|i| i.0).collect::<Vec<_>>(), ids(&want["selected"]));
    let fuzzy = want["fuzzy_hits"].as_array().unwrap();
    assert_eq!(b.fuzzy_hits.len(), fuzzy.len());
    for (h, w) in b.fuzzy_hits.iter().zip(fuzzy) {
        assert_eq!(h.entity_id.0, w[0].as_u64().unwrap());
        assert!((h.score - w[1].as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn retrieval_edge_cases() {
    let kg = mini_kg();
    let cfg = CompletionConfig::default();
    let none = BTreeSet::new();
    let b = two_stage_retrieve(&[point("definition:group", KindHint::Unspecified)], &kg, &mini_vd(), &HashEmbedder, &cfg, &none)
        .unwrap();
    assert_eq!(b.exact_hits, vec![EntityId(1)]);
    assert!(b.selected.starts_with(&[EntityId(1)]));
    let empty = KnowledgeGraph::new();
    let empty_vd = build_vd(&empty, &HashEmbedder, &EmbedConfig::default()).unwrap().0;
    let b = two_stage_retrieve(&[point("Group", KindHint::Definition)], &empty, &empty_vd, &HashEmbedder, &cfg, &none)
        .unwrap();
    assert_eq!(b, RetrievalBundle::default());
}

/// Answers the answer/calibrate prompts from a fixed list, in order.
struct Sequence {
    answers: Vec<&'static str>,
    next: Mutex<usize>,
}

impl Sequence {
    fn new(answers: Vec<&'static str>) -> Self {
        Sequence {
            answers,
            next: Mutex::new(0),
        }
    }

    fn calls(&self) -> usize {
        *self.next.lock().unwrap()
    }
}

impl mathkg_core::llm::LlmBackend for Sequence {
    fn complete(&self, _: &Prompt, _: &CompletionParams) -> Result<String, LlmError> {
        let mut n = self.next.lock().unwrap();
        let a = self.answers.get(*n).copied();
        *n += 1;
        a.map(str::to_string)
            .ok_or_else(|| LlmError::BackendUnavailable("script exhausted".into()))
    }
}

#[test]
fn rounds_pass_first_fail_then_pass_and_fail() {
    let rules = default_rules();
    let cfg = CompletionConfig::default();
    let e = problem(0, "Compute $3!$.");

    let seq = Sequence::new(vec!["3! = 6"]);
    let r = complete_entity(&seq, &e, ProblemCategory::Calculation, "(none)", &rules, &cfg).unwrap();
    assert_eq!((r.rounds, r.status), (1, CompletionStatus::Complete));
    assert_eq!(r.answer, "3! = 6");

    let seq = Sequence::new(vec!["it is six", "3! = 6"]);
    let r = complete_entity(&seq, &e, ProblemCategory::Calculation, "(none)", &rules, &cfg).unwrap();
    assert_eq!((r.rounds, r.status), (2, CompletionStatus::Complete));
    assert!(r.trace[0].violations[0].starts_with("numeric-result"));
    assert!(!r.trace[0].error_summary.is_empty());
    assert!(r.trace[1].violations.is_empty());

    let seq = Sequence::new(vec!["six", "six", "six", "six"]);
    let r = complete_entity(&seq, &e, ProblemCategory::Calculation, "(none)", &rules, &cfg).unwrap();
    assert_eq!((r.rounds, r.status), (3, CompletionStatus::Failed));
    assert!(r.trace.iter().all(|t| !t.violations.is_empty() && !t.error_summary.is_empty()));
    assert_eq!(seq.calls(), 3);
}

#[test]
fn later_rounds_carry_violations_and_summaries() {
    let prompts = Mutex::new(Vec::new());
    let llm = FnBackend(|p: &Prompt| {
        prompts.lock().unwrap().push(p.clone());
        Ok("Thus x = y.".to_string())
    });
    let e = Entity::new(EntityId(0), EntityType::Theorem).with_title("Theorem:T").with_contents(["x = y"]);
    let r = complete_entity(&llm, &e, ProblemCategory::Proof, "Definition:D\nd", &default_rules(), &CompletionConfig::default())
        .unwrap();
    assert_eq!(r.status, CompletionStatus::Failed);
    let prompts = prompts.into_inner().unwrap();
    assert_eq!(prompts[0].template, TemplateId::CompletionAnswer);
    assert!(prompts[0].rendered.contains("### Knowledge\nDefinition:D\nd"));
    assert_eq!(prompts[2].template, TemplateId::CompletionCalibrate);
    assert!(prompts[2].rendered.contains("### Violations\nfinal-statement:"));
    assert!(prompts[2].rendered.contains("### Error summary\nRound 1: final-statement"));
    assert!(prompts[2].rendered.contains("\nRound 2: final-statement"));
}

#[test]
fn backend_loss_keeps_trace() {
    let seq = Sequence::new(vec!["six"]);
    let err = complete_entity(
        &seq,
        &problem(0, "Compute 3!."),
        ProblemCategory::Calculation,
        "(none)",
        &default_rules(),
        &CompletionConfig::default(),
    )
    .unwrap_err();
    match err {
        CompletionError::BackendUnavailable { trace, .. } => assert_eq!(trace.len(), 1),
        other => panic!("{other:?}"),
    }
    let cfg = CompletionConfig {
        max_rounds: 0,
        ..CompletionConfig::default()
    };
    assert_eq!(
        complete_entity(&seq, &problem(0, "x"), ProblemCategory::Proof, "", &default_rules(), &cfg),
        Err(CompletionError::InvalidConfig)
    );
}

#[test]
fn missing_step_question_names_the_theorem() {
    let text = "Let f have a continuous derivative on [a,b]. To see that f is Lipschitz on [a,b], note that by \
                [MISSING], f(x) - f(y) = f'(t)(x - y) for some t between y and x; f' is bounded by some C on the \
                compact interval, so |f(x) - f(y)| <= C|x - y|. Can you name the result used in [MISSING]?";
    let e = problem(0, text);
    let llm = ScriptedMockBackend::new("").on(
        "### Category\napplication",
        "The result used in [MISSING] is the Mean Value Theorem: f(b) - f(a) = f'(c)(b - a) for some c in (a, b).",
    );
    let r = complete_entity(&llm, &e, ProblemCategory::Application, "(none)", &default_rules(), &CompletionConfig::default())
        .unwrap();
    assert_eq!(r.status, CompletionStatus::Complete);
    assert!(r.answer.contains("Mean Value Theorem"));
}

fn passed(answer: &str) -> mathkg_core::completion::CompletionResult {
    mathkg_core::completion::CompletionResult {
        answer: answer.into(),
        rounds: 1,
        trace: Vec::new(),
        status: CompletionStatus::Complete,
    }
}

#[test]
fn write_back_appends_record_and_edges() {
    let mut kg = mini_kg();
    let bundle = RetrievalBundle {
        selected: vec![EntityId(1), EntityId(4)],
        ..Default::default()
    };
    let before_in = kg.in_edges(EntityId(5)).len();
    write_back(&mut kg, EntityId(5), &passed("Suppose e, f are identities; e = ef = f. QED"), &bundle).unwrap();
    let t = kg.entity(EntityId(5)).unwrap();
    assert_eq!(t.proofs.len(), 1);
    assert_eq!(t.proofs[0].source, COMPLETION_SOURCE);
    assert_eq!(t.proofs[0].refs, vec!["Definition:Group", "Theorem:Lagrange"]);
    let from: BTreeSet<u64> = kg.in_edges(EntityId(5)).iter().map(|e| e.from.0).collect();
    assert!(from.contains(&4));
    assert!(kg.in_edges(EntityId(5)).len() > before_in);
    assert_eq!(
        write_back(&mut kg, EntityId(5), &passed("again"), &bundle),
        Err(CompletionError::EntityNotIncomplete(EntityId(5)))
    );
    assert_eq!(
        write_back(&mut kg, EntityId(4), &passed("x"), &bundle),
        Err(CompletionError::EntityNotIncomplete(EntityId(4)))
    );
}

pub fn completion_mock() -> ScriptedMockBackend {
    ScriptedMockBackend::from_jsonl(&read(fixture("mini_completion_mock.jsonl")), "").unwrap()
}

#[test]
fn mini_kg_completion_snapshot() {
    let run = || {
        let mut kg = mini_kg();
        let report = complete_kg(&mut kg, &mini_vd(), &HashEmbedder, &completion_mock(), &default_rules(), &CompletionConfig::default())
            .unwrap();
        (kg, report)
    };
    let (kg, report) = run();
    assert_eq!(report.completed, 3, "{report:#?}");
    assert!(find_incomplete(&kg).is_empty());
    let rounds: Vec<usize> = report.entities.iter().map(|c| c.result.as_ref().unwrap().rounds).collect();
    assert_eq!(rounds, vec![1, 2, 1]);
    let (again, _) = run();
    assert_eq!(kg_to_bytes(&kg), kg_to_bytes(&again));
    assert_snapshot(fixture("mini_completed.jsonl"), &kg_to_bytes(&kg));
}

proptest! {
    #[test]
    fn termination_and_trace_faithfulness(passes in proptest::collection::vec(any::<bool>(), 1..8), max_rounds in 1usize..5) {
        let script: Vec<&'static str> = passes.iter().map(|&p| if p { "x = 4" } else { "four" }).collect();
        let seq = Sequence::new(script);
        let cfg = CompletionConfig { max_rounds, ..CompletionConfig::default() };
        match complete_entity(&seq, &problem(0, "Compute 2+2."), ProblemCategory::Calculation, "(none)", &default_rules(), &cfg) {
            Ok(r) => {
                prop_assert!(r.rounds <= max_rounds);
                prop_assert_eq!(r.rounds, r.trace.len());
                prop_assert!(seq.calls() <= 2 * max_rounds);
                match r.status {
                    CompletionStatus::Complete => prop_assert!(r.trace.last().unwrap().violations.is_empty()),
                    CompletionStatus::Failed => prop_assert!(r.trace.iter().all(|t| !t.violations.is_empty())),
                }
            }
            Err(CompletionError::BackendUnavailable { trace, .. }) => prop_assert_eq!(trace.len(), passes.len()),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
