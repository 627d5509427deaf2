use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cinepipe_core::clients::mock::{FaultInjector, MockBackend};
use cinepipe_core::clients::{Backend, GenKind, ModelEndpoint, RetryPolicy};
use cinepipe_core::eval::{summarize_llm_audit, win_rate, RankingRecord};
use cinepipe_core::screenplay::{AuditField, FieldLabels, RetrievalAudit, SampleVotes};
use cinepipe_core::storyboard::{build_routing, ScoreMatrix, TieBreak};
use cinepipe_core::taxonomy::{generate_plan, ControlSignals, Dynamicity, Family, SubjectCount, Taxonomy};
use cinepipe_core::transition::{
    detect_truncation, hermite_eval, hermite_position, ingest_tracks, synth_tracks, BoundaryState, CompositePath,
    ControlField, CutList, MotionProfile, SynthSpec, TrackSet, TransitionParams, Vec2,
};
use cinepipe_pipeline::config::PipelineConfig;
use cinepipe_pipeline::tracker::SyntheticTracker;
use cinepipe_pipeline::{export_manifest, Pipeline, RunStore, Stage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> BoundaryState {
    let mut c = || rng.random_range(-2000.0..2000.0);
    BoundaryState { p: Vec2::new(c(), c()), v: Vec2::new(c(), c()) }
}

fn rel_err(got: Vec2, want: Vec2) -> f64 {
    (got - want).norm() / want.norm().max(1.0)
}

fn hermite_endpoints() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    let (mut worst_p, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let (s0, s1) = (random_state(&mut rng), random_state(&mut rng));
        let p0 = hermite_position(&s0, &s1, 0.0).map_err(|e| e.to_string())?;
        let p1 = hermite_position(&s0, &s1, 1.0).map_err(|e| e.to_string())?;
        worst_p = worst_p.max((p0 - s0.p).norm()).max((p1 - s1.p).norm());
        let fd = |t: f64| (hermite_eval(&s0, &s1, t + h) - hermite_eval(&s0, &s1, t - h)) * (0.5 / h);
        worst_v = worst_v.max(rel_err(fd(0.0), s0.v)).max(rel_err(fd(1.0), s1.v));
    }
    let elapsed = start.elapsed();
    check(worst_p <= 1e-9, || format!("endpoint error {worst_p:e}"))?;
    check(worst_v <= 1e-5, || format!("tangent error {worst_v:e}"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("max endpoint err {worst_p:.1e}, max tangent rel err {worst_v:.1e}, {elapsed:.2?}"))
}

fn composite_c1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let path =
            CompositePath { s0: random_state(&mut rng), s1: random_state(&mut rng), span: rng.random_range(2.0..64.0) };
        for junction in [0.0, path.span] {
            worst = worst.max((path.velocity(junction, true) - path.velocity(junction, false)).norm());
        }
    }
    check(worst <= 1e-9, || format!("velocity jump {worst:e}"))?;
    Ok(format!("max junction velocity jump {worst:.1e}"))
}

/// First offset whose median displacement from the anchor reaches tau,
/// computed straight from the raw samples.
fn brute_force_cut(ts: &TrackSet, negative: bool, params: &TransitionParams) -> usize {
    let at = |samples: &[cinepipe_core::transition::TrackSample], f: i64| {
        samples.iter().find(|s| s.frame == f && s.visible).map(|s| (s.x, s.y))
    };
    for offset in 1..=params.window as i64 {
        let frame = if negative { -offset } else { offset };
        let mut d: Vec<f64> = ts
            .tracks
            .iter()
            .filter_map(|t| Some((at(&t.samples, 0)?, at(&t.samples, frame)?)))
            .map(|(a, p)| ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt())
            .collect();
        d.sort_by(f64::total_cmp);
        let m = d.len();
        let med = if m % 2 == 1 { d[m / 2] } else { (d[m / 2 - 1] + d[m / 2]) / 2.0 };
        if med >= params.tau * ts.height as f64 / 720.0 {
            return offset as usize - 1;
        }
    }
    params.window
}

fn truncation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut full, mut zero) = (0, 0);
    for case in 0..500 {
        let len = 48;
        let profile = |rng: &mut ChaCha8Rng| {
            let stall = match case % 4 {
                0 => len,
                1 => 0,
                _ => rng.random_range(0..36),
            };
            let (speed, angle) = (rng.random_range(0.5..6.0), rng.random_range(0.0..std::f64::consts::TAU));
            MotionProfile {
                stall,
                ease: rng.random_range(0..6),
                ..MotionProfile::moving(Vec2::new(speed * f64::cos(angle), speed * f64::sin(angle)))
            }
        };
        let (a, b) = (profile(&mut rng), profile(&mut rng));
        full += usize::from(a.stall == len) + usize::from(b.stall == len);
        zero += usize::from(a.stall == 0) + usize::from(b.stall == 0);
        let spec = SynthSpec {
            a,
            b,
            n_points: rng.random_range(1..20),
            clip_a_len: len,
            clip_b_len: len,
            ..SynthSpec::default()
        };
        let out = synth_tracks(&spec, rng.random());
        let window = if case % 3 == 0 { 30 } else { rng.random_range(1..=30) };
        let params = TransitionParams { window, ..Default::default() };
        let got = detect_truncation(&out.tracks, &params).map_err(|e| format!("case {case}: {e}"))?;
        let brute = (brute_force_cut(&out.tracks, true, &params), brute_force_cut(&out.tracks, false, &params));
        check((got.cut_a, got.cut_b) == brute, || {
            format!("case {case}: {:?} vs scan {brute:?}", (got.cut_a, got.cut_b))
        })?;
        let truth = out.truth.cuts(window);
        check((got.cut_a, got.cut_b) == truth, || {
            format!("case {case}: {:?} vs truth {truth:?}", (got.cut_a, got.cut_b))
        })?;
        check(got.cut_a <= 30 && got.cut_b <= 30, || format!("case {case}: cut beyond cap"))?;
    }
    let base = synth_tracks(&SynthSpec::default(), 0);
    let over = TransitionParams { window: 31, ..Default::default() };
    check(detect_truncation(&base.tracks, &over).is_err(), || "window 31 accepted".into())?;
    Ok(format!("500 profiles ({full} full-stall, {zero} zero-stall sides), window 31 refused"))
}

fn marginals(entries: &[ControlSignals], tax: &Taxonomy) -> BTreeMap<&'static str, Vec<usize>> {
    let tally = |cats: Vec<String>, key: &dyn Fn(&ControlSignals) -> String| {
        cats.iter().map(|c| entries.iter().filter(|e| &key(e) == c).count()).collect::<Vec<_>>()
    };
    BTreeMap::from([
        ("genre", tally(tax.genres().to_vec(), &|e| e.genre.clone())),
        ("shot_count", tally(tax.shot_counts().iter().map(u8::to_string).collect(), &|e| e.shot_count.to_string())),
        ("movement", tally(tax.movements().to_vec(), &|e| e.movements[0].clone())),
        (
            "subject_count",
            tally(tax.subject_counts().iter().map(SubjectCount::to_string).collect(), &|e| e.subject_count.to_string()),
        ),
        (
            "dynamicity",
            tally(tax.dynamicity().iter().map(Dynamicity::to_string).collect(), &|e| e.dynamicity.to_string()),
        ),
    ])
}

fn balance() -> Outcome {
    let tax = Taxonomy::default_taxonomy();
    let start = Instant::now();
    let plan = generate_plan(5000, &tax, 42).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(plan.entries.len() == 5000, || format!("{} entries", plan.entries.len()))?;
    let mut worst = 0;
    for (dim, counts) in marginals(&plan.entries, &tax) {
        check(counts.iter().sum::<usize>() == 5000, || format!("{dim} counts do not cover the plan"))?;
        let dev = counts.iter().max().unwrap() - counts.iter().min().unwrap();
        check(dev <= 1, || format!("{dim} deviation {dev}: {counts:?}"))?;
        worst = worst.max(dev);
    }
    let rerun = generate_plan(5000, &tax, 42).map_err(|e| e.to_string())?;
    check(rerun.to_jsonl() == plan.to_jsonl(), || "rerun differs".into())?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("max marginal deviation {worst}, reruns identical, {elapsed:.2?}"))
}

fn routing_replay() -> Outcome {
    let m = ScoreMatrix::shipped();
    let table = build_routing(&m, TieBreak::default()).map_err(|e| e.to_string())?;
    let expected = BTreeMap::from([
        (Family::Static, "gemini-flash-2.5"),
        (Family::Tilt, "gemini-flash-2.5"),
        (Family::Zoom, "gemini-flash-2.5"),
        (Family::Pan, "qwen-lora-camera"),
        (Family::Truck, "qwen-lora-camera"),
        (Family::Crane, "qwen-lora-camera"),
        (Family::Arc, "qwen-lora-camera"),
        (Family::Dolly, "qwen-imageedit"),
        (Family::Pedestal, "gemini-flash-2.5"),
    ]);
    for (family, model) in &expected {
        let got = &table.assignment[family];
        check(got == model, || format!("{family} routed to {got}, expected {model}"))?;
    }
    check(table.tie_break_trace[&Family::Pedestal].len() > 1, || "pedestal was not a tie".into())?;
    for family in Family::ALL {
        let chosen = m.camera_adherence(&table.assignment[&family], family).unwrap();
        for model in m.models() {
            let s = model.camera_adherence[&family].mean;
            check(s <= chosen, || format!("{family}: {} scores {s} above the routed {chosen}", model.id))?;
        }
    }
    Ok(format!("9 families match, pedestal tie trace {:?}", table.tie_break_trace[&Family::Pedestal]))
}

/// Votes from a single judge with `correct[f]` of 57 samples right per field.
fn audit_from_counts(correct: [usize; 4]) -> Result<RetrievalAudit, String> {
    let samples: Vec<SampleVotes> = (0..57)
        .map(|i| {
            let truth: FieldLabels = AuditField::ALL.into_iter().map(|f| (f, format!("{f}-truth"))).collect();
            let vote: FieldLabels = AuditField::ALL
                .into_iter()
                .zip(correct)
                .map(|(f, k)| (f, if i < k { format!("{f}-truth") } else { format!("{f}-other") }))
                .collect();
            SampleVotes { sample_id: format!("s{i}"), truth, votes: vec![Some(vote)] }
        })
        .collect();
    RetrievalAudit::from_votes(&samples).map_err(|e| e.to_string())
}

fn evaluation_replay() -> Outcome {
    let rows = [
        ("gpt-5-mini", [54, 34, 55, 57], 87.7),
        ("qwen-3", [49, 23, 50, 9], 57.5),
        ("gemini-2.5-flash", [51, 26, 48, 12], 60.1),
    ];
    let audits =
        rows.iter().map(|(m, c, _)| Ok((m.to_string(), audit_from_counts(*c)?))).collect::<Result<Vec<_>, String>>()?;
    let summary = summarize_llm_audit(&audits).map_err(|e| e.to_string())?;
    let mut shown = vec![];
    for ((model, _, want), row) in rows.iter().zip(&summary) {
        check(&row.model == model, || format!("row order {}", row.model))?;
        check((row.average - want).abs() <= 0.05, || format!("{model} average {} vs {want}", row.average))?;
        check(row.average_display == *want, || format!("{model} displays {}", row.average_display))?;
        shown.push(format!("{:.1}", row.average_display));
    }

    let methods = ["simple-concatenation", "blind-interpolator", "fixed-window", "trajectory-aware"];
    let firsts = [14usize, 7, 15, 64];
    let mut rankings = vec![];
    for (mi, &count) in firsts.iter().enumerate() {
        for k in 0..count {
            let mut ranking: Vec<String> = vec![methods[mi].to_string()];
            ranking.extend(methods.iter().enumerate().filter(|(j, _)| *j != mi).map(|(_, m)| m.to_string()));
            rankings.push(RankingRecord {
                evaluator_id: format!("e{}", k % 10),
                item_id: format!("{mi}-{k}"),
                ranking,
            });
        }
    }
    let rates = win_rate(&rankings).map_err(|e| e.to_string())?;
    for (m, want) in methods.iter().zip(firsts) {
        let got = rates[*m];
        check((got - want as f64).abs() < 1e-9, || format!("{m}: {got} vs {want}"))?;
    }
    let total: f64 = rates.values().sum();
    check((total - 100.0).abs() < 1e-9, || format!("win rates sum to {total}"))?;
    Ok(format!("averages {}, win rates 14/7/15/64 sum {total}", shown.join("/")))
}

fn signals(id: &str, movements: &[&str]) -> ControlSignals {
    ControlSignals {
        sample_id: id.into(),
        genre: "western".into(),
        shot_count: movements.len() as u8,
        movements: movements.iter().map(|m| m.to_string()).collect(),
        subject_count: SubjectCount::Single,
        dynamicity: Dynamicity::Dynamic,
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = RunStore::open(dir.path()).map_err(|e| e.to_string())?;
    let p = Pipeline::new(PipelineConfig::default(), store).map_err(|e| e.to_string())?;
    let cases: [(&str, &[&str]); 3] =
        [("n1", &["pan left"]), ("n2", &["tilt up", "dolly in"]), ("n3", &["static", "crane up", "arc left"])];
    for (id, moves) in cases {
        p.plan(&[signals(id, moves)]).map_err(|e| e.to_string())?;
        let rec = p.run(id).map_err(|e| e.to_string())?;
        let n = moves.len();
        check(rec.stage == Stage::Final, || format!("{id} ended at {} ({:?})", rec.stage, rec.failure))?;
        let board = rec.storyboard.as_ref().ok_or("no storyboard")?;
        let counts = (board.keyframes.len(), rec.clips.len(), rec.transitions.len());
        check(counts == (n + 1, n, n.saturating_sub(1)), || format!("{id} artifact counts {counts:?}"))?;
        for w in board.keyframes.windows(2) {
            check(w[1].source.as_ref() == Some(&w[0].image), || {
                format!("{id}: keyframe not edited from its predecessor")
            })?;
        }
    }
    let manifest = export_manifest(p.store(), p.taxonomy()).map_err(|e| e.to_string())?;
    check(manifest.entries.len() == 3, || format!("{} manifest entries", manifest.entries.len()))?;
    for e in &manifest.entries {
        for (i, w) in e.triplets.windows(2).enumerate() {
            check(w[1].shot_init == w[0].shot_end, || format!("{}: chain broken at shot {}", e.run_id, i + 1))?;
        }
        check(e.keyframes.len() == e.triplets.len() + 1, || format!("{}: keyframe count", e.run_id))?;
    }

    let crash_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let injector = Arc::new(FaultInjector::always(Arc::new(MockBackend::default())));
    let inj = injector.clone();
    let factory = move |ep: &ModelEndpoint| -> Arc<dyn Backend> {
        if ep.kind == GenKind::Flf2v {
            inj.clone()
        } else {
            Arc::new(MockBackend::default())
        }
    };
    let cfg = PipelineConfig { retry: RetryPolicy::immediate(2), ..Default::default() };
    let crash_store = RunStore::open(crash_dir.path()).map_err(|e| e.to_string())?;
    let cp = Pipeline::with_parts(cfg, crash_store, &factory, Arc::new(SyntheticTracker::default()))
        .map_err(|e| e.to_string())?;
    cp.plan(&[signals("n3", cases[2].1)]).map_err(|e| e.to_string())?;
    let failed = cp.run("n3").map_err(|e| e.to_string())?;
    check(failed.stage == Stage::Failed, || format!("injected fault did not fail the run: {}", failed.stage))?;
    let before = (failed.screenplay.clone(), failed.storyboard.clone());
    injector.heal();
    let done = cp.resume("n3").map_err(|e| e.to_string())?;
    check(done.stage == Stage::Final, || format!("resume ended at {}", done.stage))?;
    check((done.screenplay.clone(), done.storyboard.clone()) == before, || {
        "completed stages changed on resume".into()
    })?;
    let clean = p.load("n3").map_err(|e| e.to_string())?;
    let (a, b) = (done.output.as_ref().map(|o| &o.video), clean.output.as_ref().map(|o| &o.video));
    check(a == b, || "resumed video differs from an uninterrupted run".into())?;

    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("shot counts 1/2/3 final, chaining intact, resume preserved hashes, {elapsed:.2?}"))
}

fn transition_cli() -> Outcome {
    let tracks_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/example_tracks.json");
    let tracks =
        ingest_tracks(&std::fs::read_to_string(&tracks_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let meta = tracks.meta();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut seen = vec![];
    for frames in [16usize, 24] {
        let (field_path, cuts_path) = (dir.path().join("field.json"), dir.path().join("cuts.json"));
        let out = Command::new(env!("CARGO_BIN_EXE_cinepipe"))
            .arg("transition")
            .arg(&tracks_path)
            .args(["--frames", &frames.to_string()])
            .arg("--field-out")
            .arg(&field_path)
            .arg("--cuts-out")
            .arg(&cuts_path)
            .output()
            .map_err(|e| e.to_string())?;
        check(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        let summary: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let field = ControlField::from_json(&std::fs::read_to_string(&field_path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        check(field.header.frames == frames, || format!("header says {} frames", field.header.frames))?;
        check(!field.trajectories.is_empty(), || "empty control field".into())?;
        for t in &field.trajectories {
            check(t.samples.len() == frames, || format!("point {} has {} entries", t.point_id, t.samples.len()))?;
        }
        let cuts: CutList = serde_json::from_str(&std::fs::read_to_string(&cuts_path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let (cut_a, cut_b) =
            (summary["cut_a"].as_u64().unwrap_or(0) as usize, summary["cut_b"].as_u64().unwrap_or(0) as usize);
        let expected = meta.clip_a_len - cut_a + frames + meta.clip_b_len - cut_b;
        check(cuts.total_frames == expected, || format!("total {} vs formula {expected}", cuts.total_frames))?;
        let summed: usize = cuts.cuts.iter().map(|c| c.frame_count()).sum();
        check(summed == expected, || format!("cuts cover {summed} frames, expected {expected}"))?;
        check(cut_a > 0 && cut_b > 0, || "example file should exercise truncation".into())?;
        seen.push(format!("T={frames}: {} points, cuts ({cut_a},{cut_b}), total {expected}", field.trajectories.len()));
    }
    Ok(seen.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("hermite endpoints and tangents", hermite_endpoints),
        ("C1 composite stitching", composite_c1),
        ("truncation oracle equivalence", truncation_oracle),
        ("taxonomy balance", balance),
        ("routing replay", routing_replay),
        ("evaluation arithmetic replay", evaluation_replay),
        ("end-to-end mock pipeline", end_to_end),
        ("standalone transition CLI", transition_cli),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
