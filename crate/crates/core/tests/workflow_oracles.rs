use causalwb::discovery::{DiscoveryParams, Method};
use causalwb::graph::{from_json, KnowledgeDelta};
use causalwb::sim::{GraphSpec, MechanismSpec};
use causalwb::workflow::{
    default_intervention, parse_intent, ArtifactKind, DataRole, RcaMethod, RcaParams, Session,
    StepOutcome, StepRecord, StepStatus, WorkflowCommand,
};
use causalwb::Error;

fn recorded(o: StepOutcome) -> StepRecord {
    match o {
        StepOutcome::Recorded(r) => r,
        other => panic!("expected a record, got {other:?}"),
    }
}

fn simulate(seed: u64) -> WorkflowCommand {
    let mut intervention = default_intervention(seed);
    intervention.magnitude = 10.0;
    intervention.n_anomalies = 5;
    WorkflowCommand::Simulate {
        graph: GraphSpec::erdos_renyi(6, 2.0, seed),
        mechanism: MechanismSpec::default(),
        intervention,
        n_normal: 2000,
    }
}

fn discover(m: Method) -> WorkflowCommand {
    WorkflowCommand::Discover {
        algorithm: m,
        params: DiscoveryParams::default(),
    }
}

fn rca(method: RcaMethod, row: usize) -> WorkflowCommand {
    WorkflowCommand::RunRca {
        method,
        row,
        target: None,
        params: RcaParams::default(),
    }
}

/// Simulate, discover, evaluate, set the true graph, estimate, rank, report.
fn pipeline(s: &mut Session, seed: u64) {
    recorded(s.execute(simulate(seed)).unwrap());
    recorded(s.execute(WorkflowCommand::Describe).unwrap());
    let d = recorded(s.execute(discover(Method::Pc)).unwrap());
    assert_eq!(d.status, StepStatus::Ok, "{:?}", d.error);
    recorded(
        s.execute(WorkflowCommand::Evaluate { truth: None })
            .unwrap(),
    );
    let truth_ref = s.context().truth.unwrap();
    let truth =
        from_json(std::str::from_utf8(&s.artifact(&truth_ref).unwrap().1).unwrap()).unwrap();
    let (t, y) = {
        let e = &truth.edges()[0];
        (
            truth.label(e.from).to_string(),
            truth.label(e.to).to_string(),
        )
    };
    recorded(
        s.execute(WorkflowCommand::SetGraph { graph: truth })
            .unwrap(),
    );
    let eff = recorded(
        s.execute(WorkflowCommand::EstimateEffect {
            treatment: t,
            outcome: y,
        })
        .unwrap(),
    );
    assert_eq!(eff.status, StepStatus::Ok, "{:?}", eff.error);
    for m in [
        RcaMethod::Cholesky,
        RcaMethod::Traversal,
        RcaMethod::Counterfactual,
    ] {
        let r = recorded(s.execute(rca(m, 0)).unwrap());
        assert_eq!(r.status, StepStatus::Ok, "{:?}", r.error);
    }
    recorded(s.execute(WorkflowCommand::GenerateReport).unwrap());
}

fn report_of(s: &Session) -> String {
    let rec = s.record(s.head().unwrap()).unwrap();
    String::from_utf8(
        s.artifact(&rec.output("report").unwrap().reference)
            .unwrap()
            .1
            .to_vec(),
    )
    .unwrap()
}

#[test]
fn describe_after_load_advances_head() {
    let mut s = Session::in_memory();
    let csv = (0..40).fold(String::from("a,b\n"), |acc, i| {
        acc + &format!("{},{}\n", i, (i * i) % 7)
    });
    let r = s.upload(ArtifactKind::Csv, csv.into_bytes()).unwrap();
    let cmd = parse_intent(&format!("load {r}")).unwrap();
    let load = recorded(s.execute(cmd).unwrap());
    assert_eq!((load.id, load.parent_id), (1, None));
    let desc = recorded(s.execute(WorkflowCommand::Describe).unwrap());
    assert_eq!(s.journal().len(), 2);
    assert_eq!((desc.parent_id, s.head()), (Some(1), Some(2)));
    assert_eq!(desc.outputs.len(), 3);
}

#[test]
fn preconditions_reject_without_journal_write() {
    let mut s = Session::in_memory();
    assert!(matches!(
        s.execute(discover(Method::Pc)),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        s.execute(WorkflowCommand::GenerateReport),
        Err(Error::Precondition(_))
    ));
    assert!(s.journal().is_empty());
    recorded(s.execute(simulate(3)).unwrap());
    // Traversal needs a graph; none has been set.
    assert!(matches!(
        s.execute(rca(RcaMethod::Traversal, 0)),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        s.execute(rca(RcaMethod::Cholesky, 99)),
        Err(Error::Precondition(_))
    ));
    // A cyclic requirement is inconsistent knowledge.
    let nodes: Vec<String> = {
        let ds = s.context().dataset.unwrap();
        let ds: causalwb::data::Dataset =
            serde_json::from_slice(&s.artifact(&ds).unwrap().1).unwrap();
        ds.names()
    };
    let delta = KnowledgeDelta {
        required: vec![
            (nodes[0].clone(), nodes[1].clone()),
            (nodes[1].clone(), nodes[0].clone()),
        ],
        ..Default::default()
    };
    assert!(matches!(
        s.execute(WorkflowCommand::SetKnowledge { delta }),
        Err(Error::Knowledge(_))
    ));
    let unknown = KnowledgeDelta {
        forbidden: vec![("nope".into(), nodes[0].clone())],
        ..Default::default()
    };
    assert!(s
        .execute(WorkflowCommand::SetKnowledge { delta: unknown })
        .is_err());
    assert_eq!(s.journal().len(), 1);
}

#[test]
fn failed_step_keeps_prior_artifacts() {
    let mut s = Session::in_memory();
    // Two rows are too few for any test.
    let r = s
        .upload(ArtifactKind::Csv, b"x,y\n1,2\n2,1\n".to_vec())
        .unwrap();
    recorded(
        s.execute(WorkflowCommand::LoadData {
            source: r,
            role: DataRole::Primary,
            labels: None,
            hints: Default::default(),
            categorical_threshold: None,
        })
        .unwrap(),
    );
    let g = causalwb::graph::CausalGraph::new(["x", "y"]).unwrap();
    let set = recorded(s.execute(WorkflowCommand::SetGraph { graph: g }).unwrap());
    let graph_ref = set.output_ref().unwrap().clone();
    let failed = recorded(s.execute(discover(Method::Pc)).unwrap());
    assert_eq!(failed.status, StepStatus::Failed);
    assert!(failed.outputs.is_empty());
    let msg = failed.error.clone().unwrap();
    assert_eq!(s.head(), Some(failed.id));
    assert_eq!(s.context().graph, Some(graph_ref.clone()));
    assert!(s.artifact(&graph_ref).is_ok());
    recorded(s.execute(WorkflowCommand::GenerateReport).unwrap());
    assert!(report_of(&s).contains(&format!("error: {msg}")));
}

#[test]
fn rollback_branches_and_preserves_records() {
    let mut s = Session::in_memory();
    recorded(s.execute(simulate(5)).unwrap());
    recorded(s.execute(WorkflowCommand::Describe).unwrap());
    recorded(s.execute(discover(Method::Pc)).unwrap());
    recorded(
        s.execute(WorkflowCommand::Evaluate { truth: None })
            .unwrap(),
    );
    recorded(s.execute(rca(RcaMethod::Cholesky, 0)).unwrap());
    assert_eq!(s.journal().len(), 5);
    let before: Vec<StepRecord> = s.journal().to_vec();

    assert_eq!(
        s.execute(WorkflowCommand::Rollback { step: 2 }).unwrap(),
        StepOutcome::Moved { head: 2 }
    );
    assert_eq!(s.context(), s.record(2).unwrap().context);
    let ges = recorded(s.execute(discover(Method::Ges)).unwrap());
    assert_eq!(s.journal().len(), 6);
    assert_eq!(&s.journal()[..5], &before[..]);
    let children: Vec<u64> = s
        .journal()
        .iter()
        .filter(|r| r.parent_id == Some(2))
        .map(|r| r.id)
        .collect();
    assert_eq!(children, vec![3, ges.id]);

    let head = s.head();
    s.rollback(head.unwrap()).unwrap();
    assert_eq!(s.head(), head);
    assert!(matches!(s.rollback(999), Err(Error::NotFound(_))));
    assert_eq!(s.journal().len(), 6);

    // The report covers only the head's chain: 1, 2, 6.
    recorded(s.execute(WorkflowCommand::GenerateReport).unwrap());
    let rep = report_of(&s);
    assert!(rep.contains("- Step 6 (parent 2) discover ok"));
    assert!(!rep.contains("- Step 3 "));
    assert!(!rep.contains("- Step 5 "));
}

#[test]
fn replay_reproduces_hashes() {
    let mut s = Session::in_memory();
    pipeline(&mut s, 21);
    assert!(s.verify_replay().unwrap());
    let fresh = s.replay().unwrap();
    let a: Vec<_> = s.chain().iter().map(|r| r.outputs.clone()).collect();
    let b: Vec<_> = fresh.chain().iter().map(|r| r.outputs.clone()).collect();
    assert_eq!(a, b);

    // A branch: replay follows only the head chain.
    s.rollback(3).unwrap();
    recorded(s.execute(discover(Method::Notears)).unwrap());
    assert!(s.verify_replay().unwrap());
    assert_eq!(s.replay().unwrap().journal().len(), 4);
}

#[test]
fn identical_sessions_give_identical_reports() {
    let mut a = Session::in_memory();
    let mut b = Session::in_memory();
    pipeline(&mut a, 33);
    pipeline(&mut b, 33);
    let (ra, rb) = (report_of(&a), report_of(&b));
    assert_eq!(ra, rb);
    for section in [
        "## Data Summary",
        "## Preprocessing Decisions",
        "## Knowledge Constraints",
        "## Discovery",
        "## Effects",
        "## RCA",
        "## Full Decision Journal",
    ] {
        assert!(ra.contains(section), "{section}");
    }
    assert!(ra.contains("```dot\ndigraph G {"));
    assert!(ra.contains("SHD vs truth"));
    assert!(ra.contains("| precision@k |"));
    let mut c = Session::in_memory();
    pipeline(&mut c, 34);
    assert_ne!(report_of(&c), ra);
}

#[test]
fn persisted_session_reopens_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (journal, report, head) = {
        let mut s = Session::open(dir.path()).unwrap();
        pipeline(&mut s, 8);
        s.rollback(2).unwrap();
        (s.export_journal(), report_of_at(&s, 10), s.head())
    };
    let s = Session::open(dir.path()).unwrap();
    assert_eq!(s.export_journal(), journal);
    assert_eq!(s.head(), head);
    assert_eq!(report_of_at(&s, 10), report);
    for rec in s.journal() {
        for o in &rec.outputs {
            let (kind, _) = s.artifact(&o.reference).unwrap();
            assert_eq!(kind, o.kind);
        }
    }
    for line in journal.lines() {
        let _: StepRecord = serde_json::from_str(line).unwrap();
    }
}

fn report_of_at(s: &Session, id: u64) -> Vec<u8> {
    let rec = s.record(id).unwrap();
    assert_eq!(rec.command, WorkflowCommand::GenerateReport);
    s.artifact(&rec.output("report").unwrap().reference)
        .unwrap()
        .1
        .to_vec()
}

#[test]
fn uploads_are_validated() {
    let mut s = Session::in_memory();
    assert!(s
        .upload(ArtifactKind::Graph, b"{not json".to_vec())
        .is_err());
    assert!(s.upload(ArtifactKind::Labels, b"[1,2]".to_vec()).is_err());
    assert!(s.upload(ArtifactKind::Report, b"# hi".to_vec()).is_err());
    assert!(s.upload(ArtifactKind::Csv, b"".to_vec()).is_err());
    let r = s
        .upload(ArtifactKind::Labels, br#"{"0": ["x1"]}"#.to_vec())
        .unwrap();
    // Referencing a labels artifact as CSV fails before the journal.
    let cmd = WorkflowCommand::LoadData {
        source: r,
        role: DataRole::Primary,
        labels: None,
        hints: Default::default(),
        categorical_threshold: None,
    };
    assert!(matches!(s.execute(cmd), Err(Error::Precondition(_))));
}
