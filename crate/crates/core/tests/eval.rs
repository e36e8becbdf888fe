mod common;

use std::collections::{BTreeMap, BTreeSet};

use mathkg_core::embedding::{SentenceMask, DIM};
use mathkg_core::eval::*;
use mathkg_core::index::{StrategyTag, VectorDb};
use mathkg_core::model::EdgeTactic;
use mathkg_core::{Direction, EntityId, EntityType, KnowledgeGraph, TacticLabel};
use proptest::prelude::*;
use serde_json::Value;

fn golden() -> Value {
    serde_json::from_str(&common::read(common::golden("eval.json"))).unwrap()
}

fn inputs() -> Value {
    serde_json::from_str(&common::read(common::fixture("eval_inputs.json"))).unwrap()
}

/// The synthetic graph with each node's vector being its 0/1 out-adjacency
/// row, padded to the index dimension.
fn synthetic() -> (KnowledgeGraph, VectorDb) {
    let v: Value = serde_json::from_str(&common::read(common::fixture("synthetic_200.json"))).unwrap();
    let n = v["nodes"].as_u64().unwrap() as usize;
    let edges: Vec<(usize, usize)> = v["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_u64().unwrap() as usize, e[1].as_u64().unwrap() as usize))
        .collect();
    let kg = common::digraph(n, &edges);
    let mut vd = VectorDb::new(StrategyTag::External, None, SentenceMask::ALL);
    for i in 0..n {
        let mut row = vec![0.0; DIM];
        for &(a, b) in &edges {
            if a == i {
                row[b] = 1.0;
            }
        }
        vd.insert(EntityId(i as u64), &row).unwrap();
    }
    (kg, vd)
}

#[test]
fn hits_match_oracle_on_synthetic_graph() {
    let (kg, vd) = synthetic();
    assert_eq!(kg.edge_count(), 800);
    let samples: Vec<EntityId> = kg.ids().collect();
    let golden = golden();
    for (dir, name) in [(Direction::Either, "either"), (Direction::Forward, "forward")] {
        let mut prev: Option<BTreeMap<usize, f64>> = None;
        for k in 1..=6 {
            let res = hits_at_qs(&kg, &vd, &samples, k, &[1, 5, 10, 15], dir).unwrap();
            for (q, rate) in &res.rates {
                let want = golden["hits"][name][k.to_string()][q.to_string()].as_f64().unwrap();
                assert_eq!(*rate, want, "{name} k {k} q {q}");
                assert!((0.0..=1.0).contains(rate));
                if let Some(p) = &prev {
                    assert!(p[q] <= *rate, "{name} q {q} drops at k {k}");
                }
            }
            assert!(res.details.iter().all(|d| d.r <= d.q));
            let single = hits_at_q(&kg, &vd, &samples, k, 5, dir).unwrap();
            assert_eq!(single.rates[&5], res.rates[&5]);
            prev = Some(res.rates);
        }
    }
}

#[test]
fn star_graph_leaves_find_the_hub() {
    // hub 0 referenced by leaves 1..=6; each leaf vector sits closest to the hub
    let edges: Vec<(usize, usize)> = (1..=6).map(|j| (0, j)).collect();
    let kg = common::digraph(7, &edges);
    let mut vd = VectorDb::new(StrategyTag::External, None, SentenceMask::ALL);
    let mut hub = vec![0.0; DIM];
    hub[..7].iter_mut().for_each(|x| *x = 1.0);
    vd.insert(EntityId(0), &hub).unwrap();
    for j in 1..=6 {
        let mut v = vec![0.0; DIM];
        v[j] = 1.0;
        v[100 + j] = 1.0;
        vd.insert(EntityId(j as u64), &v).unwrap();
    }
    let leaves: Vec<EntityId> = (1..=6).map(EntityId).collect();
    for k in 1..=3 {
        let res = hits_at_q(&kg, &vd, &leaves, k, 1, Direction::Either).unwrap();
        assert_eq!(res.rates[&1], 1.0);
    }
    let res = hits_at_q(&kg, &vd, &leaves, 1, 1, Direction::Forward).unwrap();
    assert_eq!(res.rates[&1], 0.0);
}

#[test]
fn hits_errors() {
    let (kg, mut vd) = synthetic();
    vd.remove(EntityId(3));
    assert_eq!(
        hits_at_q(&kg, &vd, &[EntityId(3)], 2, 1, Direction::Either),
        Err(EvalError::MissingVector(EntityId(3)))
    );
    assert!(hits_at_q(&kg, &vd, &[EntityId(1)], 0, 1, Direction::Either).is_err());
    assert!(hits_at_q(&kg, &vd, &[EntityId(1)], 1, 0, Direction::Either).is_err());
    let csv = hits_at_qs(&kg, &vd, &[EntityId(1)], 2, &[1, 5], Direction::Either).unwrap().to_csv();
    assert!(csv.starts_with("q,rate\n1,"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn sampling_is_stratified_and_deterministic() {
    let kg = common::mini_kg();
    let counts = BTreeMap::from([(EntityType::Definition, 2), (EntityType::Theorem, 1), (EntityType::Problem, 2)]);
    let a = sample_entities(&kg, &counts, 9).unwrap();
    assert_eq!(a, sample_entities(&kg, &counts, 9).unwrap());
    assert_eq!(a.len(), 5);
    for (t, n) in &counts {
        assert_eq!(a.iter().filter(|id| kg.entity(**id).unwrap().entity_type == *t).count(), *n);
    }
    assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 5);
    assert!(sample_entities(&kg, &BTreeMap::new(), 1).unwrap().is_empty());
    let too_many = BTreeMap::from([(EntityType::Theorem, 100)]);
    assert!(matches!(
        sample_entities(&kg, &too_many, 1),
        Err(EvalError::InsufficientEntities { entity_type: EntityType::Theorem, requested: 100, .. })
    ));
}

#[test]
fn precision_and_ks_match_fixtures() {
    let (inputs, golden) = (inputs(), golden());
    let samples: Vec<PrecisionSample> = serde_json::from_value(inputs["precision"].clone()).unwrap();
    let got = precision(&samples).unwrap();
    let want = &golden["precision"];
    for (g, w) in got.per_sample.iter().zip(want["per_sample"].as_array().unwrap()) {
        assert!((g - w.as_f64().unwrap()).abs() <= 1e-12);
    }
    assert!((got.mean - want["mean"].as_f64().unwrap()).abs() <= 1e-12);
    assert!((got.stdev - want["stdev"].as_f64().unwrap()).abs() <= 1e-12);

    let floats = |v: &Value| -> Vec<f64> { v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    let (a, b) = (floats(&inputs["ks"]["a"]), floats(&inputs["ks"]["b"]));
    let d = ks_statistic(&a, &b).unwrap();
    assert!((d - golden["ks"]["d"].as_f64().unwrap()).abs() <= 1e-12);
    assert_eq!(d, ks_statistic(&b, &a).unwrap());
}

#[test]
fn precision_hand_values() {
    let s = |labels: &[u8]| PrecisionSample {
        entity_id: EntityId(0),
        labels: labels.iter().map(|&l| l == 1).collect(),
    };
    let got = precision(&[s(&[1, 1, 0, 1]), s(&[1, 0, 0, 0]), s(&[1, 1, 1, 1])]).unwrap();
    assert_eq!(got.per_sample, vec![0.75, 0.25, 1.0]);
    assert!((got.mean - 2.0 / 3.0).abs() < 1e-12);
    // deviations 1/12, -5/12, 4/12 -> variance (1 + 25 + 16) / 144 / 2
    assert!((got.stdev - (42.0f64 / 288.0).sqrt()).abs() < 1e-12);
    assert!(precision(&[s(&[1, 1]), s(&[1])]).is_err());
}

#[test]
fn triples_follow_edges() {
    assert!(triples_from_kg(&KnowledgeGraph::new()).is_empty());
    let kg = common::mini_kg();
    let triples = triples_from_kg(&kg);
    assert_eq!(triples.len(), kg.edge_count());
    let edges: BTreeSet<(u64, u64)> = kg.edges().map(|e| (e.from.0, e.to.0)).collect();
    assert_eq!(triples.iter().map(|t| (t.head.0, t.tail.0)).collect::<BTreeSet<_>>(), edges);
    assert!(triples.windows(2).all(|w| (w[0].head, w[0].tail) < (w[1].head, w[1].tail)));

    let manifest: Value = serde_json::from_str(&common::read(common::fixture("mini_corpus.manifest.json"))).unwrap();
    let mut want: Vec<(u64, u64)> = manifest["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_u64().unwrap(), e[1].as_u64().unwrap()))
        .collect();
    want.sort();
    want.dedup();
    assert_eq!(triples.iter().map(|t| (t.head.0, t.tail.0)).collect::<Vec<_>>(), want);
}

#[test]
fn symmetric_group_triples_carry_tactics() {
    use mathkg_core::Entity;
    let mut kg = KnowledgeGraph::new();
    let names = ["Mapping", "Permutation", "Composition of Mappings", "Group", "Identity Mapping"];
    for (i, n) in names.iter().enumerate() {
        kg.add_entity(Entity::new(EntityId(i as u64), EntityType::Definition).with_title(format!("Definition:{n}")))
            .unwrap();
    }
    let sym = Entity::new(EntityId(5), EntityType::Definition)
        .with_title("Definition:Symmetric Group")
        .with_ref("Definition:Mapping", TacticLabel::Premise)
        .with_ref("Definition:Permutation", TacticLabel::Definition)
        .with_ref("Definition:Composition of Mappings", TacticLabel::Definition)
        .with_ref("Definition:Group", TacticLabel::Conclusion)
        .with_ref("Definition:Identity Mapping", TacticLabel::Definition);
    kg.add_entity(sym).unwrap();
    kg.rebuild_edges();
    let triples = triples_from_kg(&kg);
    let got: Vec<(u64, Option<TacticLabel>, u64)> = triples.iter().map(|t| (t.head.0, t.relation.0, t.tail.0)).collect();
    assert_eq!(
        got,
        vec![
            (0, Some(TacticLabel::Premise), 5),
            (1, Some(TacticLabel::Definition), 5),
            (2, Some(TacticLabel::Definition), 5),
            (3, Some(TacticLabel::Conclusion), 5),
            (4, Some(TacticLabel::Definition), 5),
        ]
    );
}

fn triple(h: u64, r: TacticLabel, t: u64) -> Triple {
    Triple {
        head: EntityId(h),
        relation: EdgeTactic(Some(r)),
        tail: EntityId(t),
    }
}

/// Ten heads, each with a premise tail and a lemma tail.
fn two_relation_triples() -> Vec<Triple> {
    (0..10)
        .flat_map(|i| [triple(i, TacticLabel::Premise, 10 + i), triple(i, TacticLabel::Lemma, 20 + i)])
        .collect()
}

fn transe_cfg() -> TranseConfig {
    TranseConfig {
        epochs: 150,
        negatives_per_positive: 30,
        seed: 42,
        ..TranseConfig::default()
    }
}

#[test]
fn transe_synthetic_training() {
    let triples = two_relation_triples();
    let start = std::time::Instant::now();
    let model = transe_train(&triples, &transe_cfg()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(model.epoch_losses.len(), 150);
    let windows: Vec<f64> = model.epoch_losses.chunks(5).map(|c| c.iter().sum::<f64>() / 5.0).collect();
    for (i, w) in windows.windows(2).enumerate() {
        assert!(w[1] <= w[0], "window {} mean rose: {} -> {}", i + 1, w[0], w[1]);
    }

    // ranking oracle: recompute every distance from the raw vectors
    let dist = |h: &[f64], r: &[f64], t: &[f64]| -> f64 {
        (0..h.len()).map(|i| (h[i] + r[i] - t[i]).powi(2)).sum::<f64>().sqrt()
    };
    let mut top1 = 0;
    for t in &triples {
        let (h, r) = (&model.entities[&t.head], &model.relations[&t.relation]);
        let best = model
            .entities
            .iter()
            .min_by(|a, b| dist(h, r, a.1).total_cmp(&dist(h, r, b.1)))
            .map(|(id, _)| *id)
            .unwrap();
        if best == t.tail {
            top1 += 1;
        }
        assert_eq!(tail_rank(&model, t) == Some(1), best == t.tail);
    }
    assert!(top1 as f64 / triples.len() as f64 >= 0.9, "train Hits@1 {top1}/20");

    for v in model.entities.values() {
        assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
    }
    let again = transe_train(&triples, &transe_cfg()).unwrap();
    let bits = |m: &TranseModel| -> Vec<u64> { m.entities.values().flatten().map(|x| x.to_bits()).collect() };
    assert_eq!(bits(&model), bits(&again));

    let vd = transe_vd(&model).unwrap();
    assert_eq!(vd.strategy_tag, StrategyTag::Transe);
    assert_eq!(vd.len(), 30);
}

#[test]
fn transe_single_triple_converges() {
    let t = triple(0, TacticLabel::Premise, 1);
    // With two unit-length entities the hinge at margin 2 only vanishes as
    // the residual goes to zero; at margin 1 it saturates near 0.3.
    let cfg = TranseConfig {
        epochs: 3000,
        margin: 2.0,
        seed: 3,
        ..TranseConfig::default()
    };
    let model = transe_train(&[t], &cfg).unwrap();
    let d = model.distance(t.head, t.relation, t.tail).unwrap();
    assert!(d < 0.1, "residual {d}");
}

#[test]
fn transe_zero_epochs_is_initialization() {
    let cfg = TranseConfig {
        dim: 8,
        epochs: 0,
        seed: 1,
        ..TranseConfig::default()
    };
    let triples = vec![triple(4, TacticLabel::Lemma, 2), triple(2, TacticLabel::Premise, 7)];
    let model = transe_train(&triples, &cfg).unwrap();
    assert!(model.epoch_losses.is_empty());
    let bound = 6.0 / 8f64.sqrt();
    let all: Vec<f64> = model.entities.values().chain(model.relations.values()).flatten().copied().collect();
    assert_eq!(all.len(), 5 * 8);
    assert!(all.iter().all(|x| x.abs() <= bound));
    assert_eq!(model, transe_train(&triples, &cfg).unwrap());
    assert_eq!(transe_train(&[], &cfg), Err(EvalError::EmptyTriples));
    // dimension other than the index's cannot be loaded
    assert!(transe_vd(&model).is_err());
}

proptest! {
    #[test]
    fn ks_is_bounded_and_symmetric(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }
}
