//! Command-line driver: phase portraits, caustics, chamber diagrams,
//! homology, wall-crossing maps, monodromy and holomorphic weights for a
//! configured polynomial family.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use cb_lab::config::{init_thread_cap, RunConfig};
use cb_lab::corrections::{holomorphic_weight, WeightInput};
use cb_lab::docs::{ChainMapDoc, ComplexDoc, HomologyDoc, PortraitDoc, WeightDoc};
use cb_lab::error::{CbError, Result};
use cb_lab::geom::Vec2;
use cb_lab::loci::diagram::assemble_cb_diagram;
use cb_lab::loci::trace_caustic;
use cb_lab::morse::{build_complex, homology, solve_orientation};
use cb_lab::pipeline::{analyze_diagram, diagram_monodromy, WallCorrection};
use cb_lab::poly::legendre_sheet;
use cb_lab::report;
use cb_lab::synthetic;

#[derive(Parser)]
#[command(name = "cb-lab", about = "Wall-and-chamber analysis of planar gradient families")]
struct Cli {
    /// Path to the run configuration JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase portrait and Morse complex at one base point.
    Portrait {
        /// Base point as x1,x2.
        #[arg(long)]
        at: String,
    },
    /// Trace the caustic curve.
    Caustic,
    /// Assemble the full chamber diagram.
    Diagram,
    /// Betti numbers per chamber of the diagram.
    Homology,
    /// The quantum-correction chain map across one wall.
    Wallcross {
        #[arg(long)]
        wall: u32,
    },
    /// Monodromy reports around every codimension-2 point.
    Monodromy,
    /// Holomorphic weight of one sheet at a base point.
    Weight {
        #[arg(long)]
        at: String,
        /// Dual fiber point as w1,w2.
        #[arg(long)]
        w: String,
        /// Sheet index in the canonical critical-point order.
        #[arg(long, default_value_t = 0)]
        sheet: usize,
        /// Chamber id whose connection constant applies.
        #[arg(long, default_value_t = 0)]
        chamber: u32,
    },
    /// Run the built-in synthetic-corpus suite.
    Selftest,
}

fn parse_pair(text: &str, what: &str) -> Result<Vec2> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CbError::Config(format!("{what} must be two comma-separated numbers")));
    }
    let x: f64 =
        parts[0].trim().parse().map_err(|e| CbError::Config(format!("{what}: {e}")))?;
    let y: f64 =
        parts[1].trim().parse().map_err(|e| CbError::Config(format!("{what}: {e}")))?;
    if !x.is_finite() || !y.is_finite() {
        return Err(CbError::Config(format!("{what} must be finite")));
    }
    Ok(Vec2::new(x, y))
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Err(CbError::Config("--config is required for this subcommand".into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CbError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

fn emit(cfg: Option<&RunConfig>, name: &str, json: &str, svg: Option<String>) -> Result<()> {
    print!("{json}");
    if let Some(dir) = cfg.and_then(|c| c.output_dir.as_ref()) {
        std::fs::create_dir_all(dir).map_err(|e| CbError::Io(e.to_string()))?;
        let json_path = dir.join(format!("{name}.json"));
        std::fs::write(&json_path, json).map_err(|e| CbError::Io(e.to_string()))?;
        if let Some(svg) = svg {
            let stamp =
                SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let svg_path = dir.join(format!("{name}-{stamp}.svg"));
            std::fs::write(&svg_path, svg).map_err(|e| CbError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_thread_cap();
    match cli.command {
        Command::Portrait { at } => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let x = parse_pair(&at, "--at")?;
            let portrait = cb_lab::flow::extract_portrait(
                &f,
                x,
                cfg.fiber_rect(),
                cfg.grid_n,
                &cfg.tolerances,
            )?;
            let orientation = solve_orientation(&portrait, &[], &Default::default())?;
            let complex = build_complex(&portrait, &orientation);
            let h = homology(&complex)?;
            let svg = report::portrait_svg(&portrait, cfg.fiber_rect());
            let doc = PortraitDoc {
                portrait,
                complex: ComplexDoc::new(&complex),
                homology: HomologyDoc::new(&h)?,
            };
            emit(Some(&cfg), "portrait", &report::to_json("portrait", &doc)?, Some(svg))
        }
        Command::Caustic => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let caustic = trace_caustic(
                &f,
                cfg.region_rect(),
                cfg.fiber_rect(),
                cfg.caustic_samples,
                cfg.grid_n,
                &cfg.tolerances,
            );
            let svg = report::caustic_svg(&caustic, cfg.region_rect());
            emit(Some(&cfg), "caustic", &report::to_json("caustic", &caustic)?, Some(svg))
        }
        Command::Diagram => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let diagram = assemble_cb_diagram(&f, &cfg)?;
            let svg = report::diagram_svg(&diagram);
            emit(Some(&cfg), "diagram", &report::to_json("diagram", &diagram)?, Some(svg))
        }
        Command::Homology => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let diagram = assemble_cb_diagram(&f, &cfg)?;
            let analysis = analyze_diagram(&f, &cfg, diagram)?;
            #[derive(serde::Serialize)]
            struct ChamberHomology {
                chamber: u32,
                representative: Vec2,
                homology: HomologyDoc,
            }
            let mut rows = Vec::new();
            for (i, h) in analysis.homologies.iter().enumerate() {
                rows.push(ChamberHomology {
                    chamber: analysis.diagram.chambers[i].id,
                    representative: analysis.diagram.chambers[i].representative,
                    homology: HomologyDoc::new(h)?,
                });
            }
            emit(Some(&cfg), "homology", &report::to_json("homology", &rows)?, None)
        }
        Command::Wallcross { wall } => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let diagram = assemble_cb_diagram(&f, &cfg)?;
            let analysis = analyze_diagram(&f, &cfg, diagram)?;
            let Some(corr) = analysis.corrections.get(wall as usize) else {
                return Err(CbError::MissingCorrection(format!("no wall {wall}")));
            };
            let corr = corr
                .as_ref()
                .map_err(|e| CbError::MissingCorrection(format!("wall {wall}: {e}")))?;
            let kind = analysis.diagram.wall(wall).kind;
            let doc = match corr {
                WallCorrection::Caustic { poorer, richer, correction } => {
                    let src = &analysis.complexes[*poorer as usize];
                    let dst = &analysis.complexes[*richer as usize];
                    ChainMapDoc {
                        wall,
                        kind,
                        source_chamber: *poorer,
                        target_chamber: *richer,
                        direction: correction.map.direction,
                        m2: correction.map.m2.row_vecs(),
                        m1: correction.map.m1.row_vecs(),
                        m0: correction.map.m0.row_vecs(),
                        source_basis: (src.basis2.clone(), src.basis1.clone(), src.basis0.clone()),
                        target_basis: (dst.basis2.clone(), dst.basis1.clone(), dst.basis0.clone()),
                    }
                }
                WallCorrection::Bifurcation { from, to, map } => {
                    let src = &analysis.complexes[*from as usize];
                    let dst = &analysis.complexes[*to as usize];
                    ChainMapDoc {
                        wall,
                        kind,
                        source_chamber: *from,
                        target_chamber: *to,
                        direction: map.direction,
                        m2: map.m2.row_vecs(),
                        m1: map.m1.row_vecs(),
                        m0: map.m0.row_vecs(),
                        source_basis: (src.basis2.clone(), src.basis1.clone(), src.basis0.clone()),
                        target_basis: (dst.basis2.clone(), dst.basis1.clone(), dst.basis0.clone()),
                    }
                }
            };
            emit(Some(&cfg), "wallcross", &report::to_json("wallcross", &doc)?, None)
        }
        Command::Monodromy => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let diagram = assemble_cb_diagram(&f, &cfg)?;
            let analysis = analyze_diagram(&f, &cfg, diagram)?;
            let verdicts = diagram_monodromy(&analysis);
            emit(Some(&cfg), "monodromy", &report::to_json("monodromy", &verdicts)?, None)
        }
        Command::Weight { at, w, sheet, chamber } => {
            let cfg = load_config(&cli.config)?;
            let f = cfg.function()?;
            let x = parse_pair(&at, "--at")?;
            let dual = parse_pair(&w, "--w")?;
            let points = cb_lab::critical::find_critical_points(
                &f,
                x,
                cfg.fiber_rect(),
                cfg.grid_n,
                &cfg.tolerances,
            )?;
            let Some(point) = points.get(sheet) else {
                return Err(CbError::Config(format!(
                    "sheet {sheet} out of range: {} sheets at this base point",
                    points.len()
                )));
            };
            let sheet_fn = legendre_sheet(
                &f,
                x,
                point.y,
                cfg.tolerances.tol_root,
                cfg.tolerances.tol_degenerate,
            )?;
            let connection = cfg.connection_for(chamber);
            let weight = holomorphic_weight(&WeightInput { sheet: sheet_fn, connection, dual });
            let doc = WeightDoc::new(sheet_fn, sheet, connection, dual, weight);
            emit(Some(&cfg), "weight", &report::to_json("weight", &doc)?, None)
        }
        Command::Selftest => {
            let mut failures = 0;
            for doc in synthetic::builtin() {
                for (name, portrait) in &doc.chambers {
                    match portrait.validate() {
                        Ok(()) => println!("ok   {}.{name}: portrait valid", doc.name),
                        Err(e) => {
                            failures += 1;
                            println!("FAIL {}.{name}: {e}", doc.name);
                        }
                    }
                }
                for lp in &doc.loops {
                    match doc.run_loop(lp) {
                        Ok(report) if report.is_identity => {
                            println!("ok   {} {}: monodromy is the identity", doc.name, lp.point);
                        }
                        Ok(_) => {
                            failures += 1;
                            println!("FAIL {} {}: monodromy is not the identity", doc.name, lp.point);
                        }
                        Err(e) => {
                            failures += 1;
                            println!("FAIL {} {}: {e}", doc.name, lp.point);
                        }
                    }
                }
            }
            if failures > 0 {
                return Err(CbError::NotAChainMap(format!("{failures} selftest failures")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
