//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line. Run with `cargo test -p cb-lab --test acceptance --
//! --nocapture` to see the lines.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cb_lab::config::{RunConfig, Tolerances};
use cb_lab::corrections::{induces_homology_iso, is_chain_map, Tracking};
use cb_lab::critical::{detect_birth_death, find_critical_points, match_points};
use cb_lab::flow::extract_portrait;
use cb_lab::geom::{Rect, Vec2};
use cb_lab::loci::diagram::assemble_cb_diagram;
use cb_lab::loci::{detect_wall_on_segment, trace_caustic, WallKind};
use cb_lab::morse::{build_complex, euler, homology, solve_orientation};
use cb_lab::pipeline::{analyze_diagram, WallCorrection};
use cb_lab::poly::GeneratingFunction;
use cb_lab::portrait::CriticalKind;
use cb_lab::synthetic;

struct Verdict {
    criterion: &'static str,
    passed: bool,
    detail: String,
}

impl Verdict {
    fn report(self) {
        let status = if self.passed { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} ({})", self.criterion, self.detail);
        assert!(self.passed, "criterion {} failed: {}", self.criterion, self.detail);
    }
}

fn fold_cfg() -> RunConfig {
    RunConfig {
        polynomial: vec![[3, 0, 1, 1], [0, 2, 1, 1]],
        region: [-1.0, 1.0, -1.0, 1.0],
        fiber_window: [-1.5, 1.5, -1.5, 1.5],
        grid_n: 12,
        grid_m: 16,
        caustic_samples: 192,
        tolerances: Tolerances::default(),
        connection: BTreeMap::new(),
        output_dir: None,
    }
}

fn umbilic_cfg(grid_m: u32) -> RunConfig {
    RunConfig {
        polynomial: vec![[3, 0, 1, 1], [1, 2, -3, 1], [2, 0, 1, 1], [0, 2, 1, 1]],
        region: [-2.0, 2.0, -2.0, 2.0],
        fiber_window: [-1.6, 1.6, -1.6, 1.6],
        grid_n: 12,
        grid_m,
        caustic_samples: 256,
        tolerances: Tolerances::default(),
        connection: BTreeMap::new(),
        output_dir: None,
    }
}

/// Criterion 1: the fold normal form end to end.
#[test]
fn criterion_1_fold_normal_form() {
    let started = Instant::now();
    let cfg = fold_cfg();
    let f = cfg.function().unwrap();

    // caustic on the x1 = 0 axis
    let caustic = trace_caustic(
        &f,
        cfg.region_rect(),
        cfg.fiber_rect(),
        cfg.caustic_samples,
        cfg.grid_n,
        &cfg.tolerances,
    );
    let caustic_on_axis = !caustic.is_empty()
        && caustic.segments.iter().flatten().all(|p| p.x.abs() < 1e-6);

    // chambers and the connecting line
    let diagram = assemble_cb_diagram(&f, &cfg).unwrap();
    let positive = diagram
        .chambers
        .iter()
        .find(|c| c.representative.x > 0.0)
        .expect("chamber right of the fold");
    let mut kinds: Vec<CriticalKind> = positive.portrait.points.iter().map(|p| p.kind).collect();
    kinds.sort();
    let kinds_ok = kinds == vec![CriticalKind::UnstableNode, CriticalKind::Saddle];
    let un = positive.portrait.ids_of(CriticalKind::UnstableNode)[0];
    let s = positive.portrait.ids_of(CriticalKind::Saddle)[0];
    let unique_line = positive.portrait.count_connections(un, s).len() == 1
        && positive.portrait.edges.len() == 1;

    // betti and the correction
    let analysis = analyze_diagram(&f, &cfg, diagram).unwrap();
    let betti_ok = analysis.homologies.iter().all(|h| h.betti == (0, 0, 0));
    let mut correction_ok = !analysis.corrections.is_empty();
    for (wid, corr) in analysis.corrections.iter().enumerate() {
        match corr {
            Ok(WallCorrection::Caustic { poorer, richer, correction }) => {
                let src = &analysis.complexes[*poorer as usize];
                let dst = &analysis.complexes[*richer as usize];
                correction_ok &= is_chain_map(
                    src,
                    dst,
                    &correction.map.m2,
                    &correction.map.m1,
                    &correction.map.m0,
                ) && induces_homology_iso(src, dst, &correction.map);
            }
            other => {
                correction_ok = false;
                println!("wall {wid}: unexpected correction {other:?}");
            }
        }
    }
    let elapsed = started.elapsed();
    let in_time = elapsed.as_secs_f64() < 10.0;
    Verdict {
        criterion: "1 (fold normal form)",
        passed: caustic_on_axis && kinds_ok && unique_line && betti_ok && correction_ok && in_time,
        detail: format!(
            "caustic_on_axis={caustic_on_axis} kinds_ok={kinds_ok} unique_line={unique_line} \
             betti_ok={betti_ok} correction_ok={correction_ok} elapsed={elapsed:.2?}"
        ),
    }
    .report();
}

/// Criterion 2: the dual fold's birth-death pair.
#[test]
fn criterion_2_dual_fold_pair() {
    let started = Instant::now();
    let f = GeneratingFunction::from_int_terms(&[(3, 0, 1), (0, 2, -1)]).unwrap();
    let tols = Tolerances::default();
    let pair =
        detect_birth_death(&f, Vec2::ZERO, Vec2::new(1.0, 0.0), Rect::square(1.5), 12, &tols)
            .unwrap();
    let kinds_ok = pair.kinds() == (CriticalKind::Saddle, CriticalKind::StableNode);
    let elapsed = started.elapsed();
    Verdict {
        criterion: "2 (dual fold)",
        passed: kinds_ok && elapsed.as_secs_f64() < 10.0,
        detail: format!("pair={:?} elapsed={elapsed:.2?}", pair.kinds()),
    }
    .report();
}

/// The analytic deltoid of the perturbed elliptic umbilic.
fn deltoid(theta: f64) -> Vec2 {
    Vec2::new(
        ((2.0 * theta).cos() + 2.0 * theta.cos()) / 3.0,
        (2.0 * theta.sin() - (2.0 * theta).sin()) / 3.0,
    )
}

/// Winding-number test against the analytic deltoid.
fn inside_deltoid(p: Vec2, samples: usize) -> bool {
    let mut winding = 0.0f64;
    let mut prev = deltoid(0.0) - p;
    for k in 1..=samples {
        let cur = deltoid(2.0 * std::f64::consts::PI * k as f64 / samples as f64) - p;
        winding += (prev.x * cur.y - prev.y * cur.x).atan2(prev.dot(cur));
        prev = cur;
    }
    winding.abs() > std::f64::consts::PI
}

fn distance_to_deltoid(p: Vec2, samples: usize) -> f64 {
    (0..samples)
        .map(|k| deltoid(2.0 * std::f64::consts::PI * k as f64 / samples as f64).dist(p))
        .fold(f64::INFINITY, f64::min)
}

/// Criterion 3: the perturbed elliptic umbilic at grid_m = 64.
#[test]
fn criterion_3_perturbed_elliptic_umbilic() {
    let started = Instant::now();
    let cfg = umbilic_cfg(64);
    let f = cfg.function().unwrap();

    // cusps against the analytic parametrization
    let caustic = trace_caustic(
        &f,
        cfg.region_rect(),
        cfg.fiber_rect(),
        cfg.caustic_samples,
        cfg.grid_n,
        &cfg.tolerances,
    );
    let expected_cusps = [0.0f64, 2.0 * std::f64::consts::PI / 3.0, 4.0 * std::f64::consts::PI / 3.0]
        .map(deltoid);
    let cusps_ok = caustic.cusps.len() == 3
        && expected_cusps.iter().all(|e| {
            caustic.cusps.iter().map(|c| c.dist(*e)).fold(f64::INFINITY, f64::min) < 1e-3
        });
    // the traced caustic is the closed deltoid: two-sided closeness
    let trace_close = caustic
        .segments
        .iter()
        .flatten()
        .all(|p| distance_to_deltoid(*p, 2000) < 1e-3);
    let analytic_covered = (0..500).all(|k| {
        let p = deltoid(2.0 * std::f64::consts::PI * k as f64 / 500.0);
        caustic.distance(p) < 1e-3
    });

    // the diagram and its chambers
    let diagram = assemble_cb_diagram(&f, &cfg).unwrap();
    let counts_ok = diagram.chambers.iter().all(|c| {
        let n = c.portrait.points.len();
        if inside_deltoid(c.representative, 720) {
            n == 4
        } else {
            n == 2
        }
    });

    // 200 x 200 brute-force grid oracle on critical-point counts
    let oracle: Vec<(Vec2, Option<usize>)> = (0..200 * 200)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % 200, k / 200);
            let x = Vec2::new(
                -2.0 + 4.0 * (i as f64 + 0.5) / 200.0,
                -2.0 + 4.0 * (j as f64 + 0.5) / 200.0,
            );
            let count = find_critical_points(&f, x, cfg.fiber_rect(), 10, &cfg.tolerances)
                .ok()
                .map(|p| p.len());
            (x, count)
        })
        .collect();
    let mut oracle_ok = true;
    let mut oracle_checked = 0usize;
    for (x, count) in &oracle {
        if distance_to_deltoid(*x, 720) < 0.05 {
            continue; // too close to the wall for the oracle to be decisive
        }
        let expected = if inside_deltoid(*x, 720) { 4 } else { 2 };
        match count {
            Some(c) => {
                oracle_checked += 1;
                if *c != expected {
                    oracle_ok = false;
                    println!("oracle mismatch at {x:?}: got {c}, expected {expected}");
                }
            }
            None => {
                oracle_ok = false;
                println!("oracle failure at {x:?}");
            }
        }
    }

    // every wall crossing preserves the betti triple
    let analysis = analyze_diagram(&f, &cfg, diagram).unwrap();
    let mut betti_ok = true;
    for wall in &analysis.diagram.walls {
        let (a, b) = wall.adjacent;
        if a == b {
            continue;
        }
        if analysis.homologies[a as usize].betti != analysis.homologies[b as usize].betti {
            betti_ok = false;
            println!(
                "wall {} changes betti: {:?} vs {:?}",
                wall.id, analysis.homologies[a as usize].betti, analysis.homologies[b as usize].betti
            );
        }
    }

    let elapsed = started.elapsed();
    let in_time = elapsed.as_secs_f64() < 300.0;
    Verdict {
        criterion: "3 (perturbed elliptic umbilic)",
        passed: cusps_ok && trace_close && analytic_covered && counts_ok && oracle_ok && betti_ok && in_time,
        detail: format!(
            "cusps_ok={cusps_ok} trace_close={trace_close} analytic_covered={analytic_covered} \
             counts_ok={counts_ok} oracle_ok={oracle_ok} (checked {oracle_checked}) \
             betti_ok={betti_ok} elapsed={elapsed:.2?}"
        ),
    }
    .report();
}

/// Criterion 4: d1.d0 = 0 exactly at >= 1000 random off-wall base points.
#[test]
fn criterion_4_d_squared_zero_at_random_points() {
    let families: Vec<(GeneratingFunction, Rect, Rect)> = vec![
        (
            GeneratingFunction::from_int_terms(&[(3, 0, 1), (0, 2, 1)]).unwrap(),
            Rect::square(1.0),
            Rect::square(1.5),
        ),
        (
            GeneratingFunction::from_int_terms(&[(3, 0, 1), (0, 2, -1)]).unwrap(),
            Rect::square(1.0),
            Rect::square(1.5),
        ),
        (
            GeneratingFunction::from_int_terms(&[(3, 0, 1), (1, 2, -3), (2, 0, 1), (0, 2, 1)])
                .unwrap(),
            Rect::square(2.0),
            Rect::square(1.6),
        ),
    ];
    let tols = Tolerances::default();
    let per_family = 334usize;
    let results: Vec<(usize, usize)> = families
        .par_iter()
        .map(|(f, region, window)| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut tested = 0;
            let mut failures = 0;
            let mut attempts = 0;
            while tested < per_family && attempts < 20 * per_family {
                attempts += 1;
                let x = Vec2::new(
                    rng.random_range(region.x_min..region.x_max),
                    rng.random_range(region.y_min..region.y_max),
                );
                let Ok(p) = extract_portrait(f, x, *window, 12, &tols) else {
                    continue; // on or too close to a wall
                };
                tested += 1;
                match solve_orientation(&p, &[], &BTreeMap::new()) {
                    Ok(o) => {
                        let cx = build_complex(&p, &o);
                        if !cx.d_squared_is_zero() {
                            failures += 1;
                        } else {
                            let h = homology(&cx).unwrap();
                            if euler(&h) != p.euler_count() {
                                failures += 1;
                            }
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            (tested, failures)
        })
        .collect();
    let total: usize = results.iter().map(|(t, _)| t).sum();
    let failures: usize = results.iter().map(|(_, f)| f).sum();
    Verdict {
        criterion: "4 (d^2 = 0 at random points)",
        passed: total >= 1000 && failures == 0,
        detail: format!("{total} points tested, {failures} failures"),
    }
    .report();
}

/// Criterion 5: the corpus reproduces the kernel/image identities and the
/// bifurcation correction matrix. The detailed subspace assertions live in
/// the corpus_walls test target; here the corpus corrections are re-driven
/// end to end.
#[test]
fn criterion_5_corpus_identities() {
    // every fold document's correction must build (the chain-map and, where
    // defined, homology checks run inside)
    let fold_docs =
        ["fig03", "fig05", "fig07", "fig08", "fig09", "fig10", "fig11", "fig12", "fig13",
         "fig14", "fig17", "fig18"];
    let mut all_ok = true;
    let mut detail = String::new();
    for name in fold_docs {
        let doc = synthetic::builtin_by_name(name).unwrap();
        let (rich, rich_cx) = doc.complex("U1").unwrap();
        let (poor, poor_cx) = doc.complex("U2").unwrap();
        let cb_lab::synthetic::SyntheticWall::CausticFold { node, saddle, .. } = &doc.walls[0]
        else {
            panic!("{name}: expected a fold wall");
        };
        let pair = (rich.by_name(node).unwrap(), rich.by_name(saddle).unwrap());
        let tracking = Tracking::by_name(&poor, &rich);
        match cb_lab::corrections::caustic_correction(
            &rich, &rich_cx, &poor, &poor_cx, pair, &tracking,
        ) {
            Ok(_) => {}
            Err(e) => {
                all_ok = false;
                detail.push_str(&format!("{name}: {e}; "));
            }
        }
    }
    // the Fig. 19 matrix
    let doc = synthetic::builtin_by_name("fig19").unwrap();
    let map = doc.bifurcation_map("U1", "U2").unwrap();
    let matrix_ok = map.m1.row_vecs() == vec![vec![1, 0], vec![-1, 1]];
    if !matrix_ok {
        all_ok = false;
        detail.push_str("fig19 matrix mismatch; ");
    }
    Verdict {
        criterion: "5 (corpus kernel/image identities)",
        passed: all_ok,
        detail: if detail.is_empty() {
            format!("{} fold corrections + the [[1,0],[-1,1]] matrix", fold_docs.len())
        } else {
            detail
        },
    }
    .report();
}

/// Criterion 6: identity monodromy for every synthetic codimension-2 loop.
#[test]
fn criterion_6_synthetic_monodromy() {
    let mut all_ok = true;
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut detail = String::new();
    for doc in synthetic::builtin() {
        for lp in &doc.loops {
            match doc.run_loop(lp) {
                Ok(report) if report.is_identity => {
                    *seen.entry(lp.point.clone()).or_default() += 1;
                }
                Ok(_) => {
                    all_ok = false;
                    detail.push_str(&format!("{} {}: not identity; ", doc.name, lp.point));
                }
                Err(e) => {
                    all_ok = false;
                    detail.push_str(&format!("{} {}: {e}; ", doc.name, lp.point));
                }
            }
        }
    }
    // the three codimension-2 kinds must all be covered, the fold-meets-wall
    // shape in every enumerated node case
    let coverage_ok = seen.get("BTriple") == Some(&1)
        && seen.get("BTransversal") == Some(&1)
        && seen.get("CausticMeetsB") == Some(&9);
    Verdict {
        criterion: "6 (synthetic monodromy)",
        passed: all_ok && coverage_ok,
        detail: if detail.is_empty() { format!("loops: {seen:?}") } else { detail },
    }
    .report();
}

/// Criterion 7: tolerance halving and grid doubling change nothing at the
/// acceptance representatives.
#[test]
fn criterion_7_numerical_robustness() {
    let mut all_ok = true;
    let mut detail = String::new();

    // portraits at representatives under halved tolerances and doubled grids
    let cases: Vec<(GeneratingFunction, RunConfig)> = vec![
        (fold_cfg().function().unwrap(), fold_cfg()),
        (umbilic_cfg(16).function().unwrap(), umbilic_cfg(16)),
    ];
    for (f, cfg) in &cases {
        let diagram = assemble_cb_diagram(f, cfg).unwrap();
        for chamber in &diagram.chambers {
            let tight = cfg.tolerances.halved();
            let redo =
                extract_portrait(f, chamber.representative, cfg.fiber_rect(), cfg.grid_n * 2, &tight);
            match redo {
                Ok(p) => {
                    let same = match match_points(&chamber.portrait.points, &p.points) {
                        Ok(map) => {
                            chamber.portrait.signature().relabel(&map) == Some(p.signature())
                        }
                        Err(_) => false,
                    };
                    if !same {
                        all_ok = false;
                        detail.push_str(&format!(
                            "portrait changed at {:?}; ",
                            chamber.representative
                        ));
                    }
                }
                Err(e) => {
                    all_ok = false;
                    detail.push_str(&format!("portrait failed at {:?}: {e}; ", chamber.representative));
                }
            }
        }
    }

    // wall location stability on the canonical fold probe
    let fold = fold_cfg().function().unwrap();
    let base = detect_wall_on_segment(
        &fold,
        Vec2::new(-0.5, 0.0),
        Vec2::new(0.5, 0.0),
        Rect::square(1.5),
        12,
        &Tolerances::default(),
    )
    .unwrap();
    let tight = detect_wall_on_segment(
        &fold,
        Vec2::new(-0.5, 0.0),
        Vec2::new(0.5, 0.0),
        Rect::square(1.5),
        24,
        &Tolerances::default().halved(),
    )
    .unwrap();
    let walls_ok = base.len() == 1
        && tight.len() == 1
        && base[0].kind == tight[0].kind
        && base[0].x.dist(tight[0].x) < 10.0 * Tolerances::default().tol_wall;
    if !walls_ok {
        all_ok = false;
        detail.push_str("fold wall moved under tightening; ");
    }

    // chamber signatures stable under doubling of the base lattice
    for (make, label) in [
        (Box::new(|m: u32| {
            let mut cfg = fold_cfg();
            cfg.grid_m = m;
            cfg
        }) as Box<dyn Fn(u32) -> RunConfig>, "fold"),
        (Box::new(umbilic_cfg) as Box<dyn Fn(u32) -> RunConfig>, "umbilic"),
    ] {
        let coarse_cfg = make(16);
        let fine_cfg = make(32);
        let f = coarse_cfg.function().unwrap();
        let coarse = assemble_cb_diagram(&f, &coarse_cfg).unwrap();
        let fine = assemble_cb_diagram(&f, &fine_cfg).unwrap();
        let signature = |d: &cb_lab::loci::diagram::CBDiagram| {
            let mut sigs: Vec<(usize, usize)> = d
                .chambers
                .iter()
                .map(|c| (c.portrait.points.len(), c.portrait.edges.len()))
                .collect();
            sigs.sort();
            sigs
        };
        if signature(&coarse) != signature(&fine) {
            all_ok = false;
            detail.push_str(&format!("{label} chamber signatures changed under grid doubling; "));
        }
    }

    Verdict {
        criterion: "7 (numerical robustness)",
        passed: all_ok,
        detail: if detail.is_empty() { "portraits, walls, chambers stable".into() } else { detail },
    }
    .report();
}

/// Criterion 8: identical configs produce byte-identical diagram JSON.
#[test]
fn criterion_8_determinism() {
    let cfg = fold_cfg();
    let f = cfg.function().unwrap();
    let a = cb_lab::report::to_json("diagram", &assemble_cb_diagram(&f, &cfg).unwrap()).unwrap();
    let b = cb_lab::report::to_json("diagram", &assemble_cb_diagram(&f, &cfg).unwrap()).unwrap();
    let identical = a == b;
    // and the document round-trips through the parser
    let reparsed = cb_lab::report::from_json(&a).is_ok();
    Verdict {
        criterion: "8 (determinism)",
        passed: identical && reparsed,
        detail: format!("identical={identical} reparsed={reparsed} bytes={}", a.len()),
    }
    .report();
}
